//! System model: channels, powers, noises and the closed-form evaluation of
//! end-to-end SNRs, rates and relay transmit powers.
//!
//! Units are watts for powers and noise variances; rates are in bits per
//! channel use and include the factor 1/2 of the two-slot protocol.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::CVec;

/// Source powers and noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    p_s1: f64,
    p_s2: f64,
    sigma_relay: Vec<f64>,
    sigma_s1_sq: f64,
    sigma_s2_sq: f64,
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

impl SystemParams {
    pub fn new(
        p_s1: f64,
        p_s2: f64,
        sigma_relay: Vec<f64>,
        sigma_s1_sq: f64,
        sigma_s2_sq: f64,
    ) -> Result<Self> {
        if sigma_relay.is_empty() {
            return Err(Error::EmptyCluster);
        }
        // A noiseless relay is allowed; it only amplifies the sources.
        for &s in &sigma_relay {
            if !(s.is_finite() && s >= 0.0) {
                return Err(invalid("sigma_relay", format!("must be finite and >= 0, got {s}")));
            }
        }
        Ok(Self {
            p_s1: positive("p_s1", p_s1)?,
            p_s2: positive("p_s2", p_s2)?,
            sigma_relay,
            sigma_s1_sq: positive("sigma_s1_sq", sigma_s1_sq)?,
            sigma_s2_sq: positive("sigma_s2_sq", sigma_s2_sq)?,
        })
    }

    /// Equal source powers and unit-free uniform noise variance everywhere.
    pub fn uniform(k: usize, p_s: f64, noise: f64) -> Result<Self> {
        Self::new(p_s, p_s, vec![noise; k], noise, noise)
    }

    pub fn p_s1(&self) -> f64 {
        self.p_s1
    }
    pub fn p_s2(&self) -> f64 {
        self.p_s2
    }
    pub fn sigma_relay(&self) -> &[f64] {
        &self.sigma_relay
    }
    pub fn sigma_s1_sq(&self) -> f64 {
        self.sigma_s1_sq
    }
    pub fn sigma_s2_sq(&self) -> f64 {
        self.sigma_s2_sq
    }
    pub fn k(&self) -> usize {
        self.sigma_relay.len()
    }

    pub fn check_k(&self, k: usize) -> Result<()> {
        if self.k() == k {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: k,
                found: self.k(),
            })
        }
    }
}

/// Forward (`h1`, `h2`: sources to relays) and backward (`h1r`, `h2r`: relays
/// to sources) channel vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    h1: CVec,
    h2: CVec,
    h1r: CVec,
    h2r: CVec,
}

impl ChannelSet {
    pub fn new(h1: Vec<Complex64>, h2: Vec<Complex64>, h1r: Vec<Complex64>, h2r: Vec<Complex64>) -> Result<Self> {
        let k = h1.len();
        if k == 0 {
            return Err(Error::EmptyCluster);
        }
        for v in [&h2, &h1r, &h2r] {
            if v.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: v.len(),
                });
            }
        }
        let all = h1.iter().chain(&h2).chain(&h1r).chain(&h2r);
        if all.clone().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("channels", "entries must be finite"));
        }
        Ok(Self {
            h1: CVec::from_vec(h1),
            h2: CVec::from_vec(h2),
            h1r: CVec::from_vec(h1r),
            h2r: CVec::from_vec(h2r),
        })
    }

    /// TDD channels: the backward channels equal the forward ones.
    pub fn reciprocal(h1: Vec<Complex64>, h2: Vec<Complex64>) -> Result<Self> {
        Self::new(h1.clone(), h2.clone(), h1, h2)
    }

    pub fn k(&self) -> usize {
        self.h1.len()
    }
    pub fn h1(&self) -> &CVec {
        &self.h1
    }
    pub fn h2(&self) -> &CVec {
        &self.h2
    }
    pub fn h1r(&self) -> &CVec {
        &self.h1r
    }
    pub fn h2r(&self) -> &CVec {
        &self.h2r
    }

    pub fn is_reciprocal(&self) -> bool {
        self.h1 == self.h1r && self.h2 == self.h2r
    }

    /// Composite S1 -> S2 channel `h1 ⊙ h2r`.
    pub fn f1(&self) -> CVec {
        self.h1.component_mul(&self.h2r)
    }

    /// Composite S2 -> S1 channel `h2 ⊙ h1r`.
    pub fn f2(&self) -> CVec {
        self.h2.component_mul(&self.h1r)
    }

    /// `|h1_i| |h2_i|`, the composite gain magnitude under reciprocity.
    pub fn fhat(&self) -> Vec<f64> {
        self.h1
            .iter()
            .zip(self.h2.iter())
            .map(|(a, b)| a.norm() * b.norm())
            .collect()
    }

    pub(crate) fn require_reciprocal(&self) -> Result<()> {
        if self.is_reciprocal() {
            Ok(())
        } else {
            Err(Error::NotReciprocal)
        }
    }
}

/// Relay power constraint.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerBudget {
    /// Total relay transmit power limit.
    Sum(f64),
    /// Per-relay transmit power limits.
    Individual(Vec<f64>),
}

impl PowerBudget {
    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            PowerBudget::Sum(p) => positive("p_r", *p).map(|_| ()),
            PowerBudget::Individual(p) => {
                if p.len() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        found: p.len(),
                    });
                }
                p.iter().try_for_each(|&v| positive("p_r", v).map(|_| ()))
            }
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            PowerBudget::Sum(p) => *p,
            PowerBudget::Individual(p) => p.iter().sum(),
        }
    }

    /// Whether the given per-relay powers respect the budget, with relative
    /// tolerance `tol`.
    pub fn admits(&self, powers: &[f64], tol: f64) -> bool {
        match self {
            PowerBudget::Sum(p) => powers.iter().sum::<f64>() <= p * (1.0 + tol),
            PowerBudget::Individual(caps) => powers
                .iter()
                .zip(caps)
                .all(|(&q, &c)| q <= c * (1.0 + tol)),
        }
    }
}

/// Relay weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    w: CVec,
}

impl Beamformer {
    pub fn new(w: Vec<Complex64>) -> Result<Self> {
        if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("w", "entries must be finite"));
        }
        Ok(Self {
            w: CVec::from_vec(w),
        })
    }

    pub fn zeros(k: usize) -> Self {
        Self { w: CVec::zeros(k) }
    }

    /// Weights from magnitudes and phases (radians).
    pub fn from_polar(mags: &[f64], phases: &[f64]) -> Self {
        let w = mags
            .iter()
            .zip(phases)
            .map(|(&m, &p)| Complex64::from_polar(m, p))
            .collect::<Vec<_>>();
        Self {
            w: CVec::from_vec(w),
        }
    }

    pub fn weights(&self) -> &CVec {
        &self.w
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            w: self.w.scale(c),
        }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.w.iter().map(|z| z.norm()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SnrPair {
    pub snr1: f64,
    pub snr2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
}

impl RatePair {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }

    pub fn from_snr(snr: SnrPair) -> Self {
        Self {
            r1: 0.5 * snr.snr1.ln_1p() / std::f64::consts::LN_2,
            r2: 0.5 * snr.snr2.ln_1p() / std::f64::consts::LN_2,
        }
    }

    pub fn sum(&self) -> f64 {
        self.r1 + self.r2
    }
}

/// Diagonals of the relay-noise matrices `A1`, `A2` and the relay power
/// matrix `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrices {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub d: Vec<f64>,
}

impl NoiseMatrices {
    pub fn new(ch: &ChannelSet, sp: &SystemParams) -> Result<Self> {
        sp.check_k(ch.k())?;
        let sig = sp.sigma_relay();
        let a1 = (0..ch.k()).map(|i| ch.h1r[i].norm_sqr() * sig[i]).collect();
        let a2 = (0..ch.k()).map(|i| ch.h2r[i].norm_sqr() * sig[i]).collect();
        let d: Vec<f64> = (0..ch.k())
            .map(|i| ch.h1[i].norm_sqr() * sp.p_s1() + ch.h2[i].norm_sqr() * sp.p_s2() + sig[i])
            .collect();
        if let Some(i) = d.iter().position(|&v| v <= 0.0) {
            return Err(Error::Degenerate(format!("relay {i} receives neither signal nor noise")));
        }
        Ok(Self { a1, a2, d })
    }
}

fn check_w(ch: &ChannelSet, sp: &SystemParams, w: &Beamformer) -> Result<()> {
    sp.check_k(ch.k())?;
    if w.k() != ch.k() {
        return Err(Error::DimensionMismatch {
            expected: ch.k(),
            found: w.k(),
        });
    }
    Ok(())
}

fn quad_diag(d: &[f64], w: &CVec) -> f64 {
    d.iter().zip(w.iter()).map(|(&a, z)| a * z.norm_sqr()).sum()
}

/// End-to-end SNRs after self-interference cancellation.
///
/// `snr1` is the S2 -> S1 link, `snr2` the S1 -> S2 link.
pub fn snr_pair(ch: &ChannelSet, sp: &SystemParams, w: &Beamformer) -> Result<SnrPair> {
    check_w(ch, sp, w)?;
    let nm = NoiseMatrices::new(ch, sp)?;
    let w = w.weights();
    let g2 = ch.f2().transpose() * w;
    let g1 = ch.f1().transpose() * w;
    let snr1 = sp.p_s2() * g2[0].norm_sqr() / (sp.sigma_s1_sq() + quad_diag(&nm.a1, w));
    let snr2 = sp.p_s1() * g1[0].norm_sqr() / (sp.sigma_s2_sq() + quad_diag(&nm.a2, w));
    Ok(SnrPair { snr1, snr2 })
}

pub fn rate_pair(ch: &ChannelSet, sp: &SystemParams, w: &Beamformer) -> Result<RatePair> {
    snr_pair(ch, sp, w).map(RatePair::from_snr)
}

/// Per-relay transmit powers `|w_i|^2 D_ii`.
pub fn relay_powers(ch: &ChannelSet, sp: &SystemParams, w: &Beamformer) -> Result<Vec<f64>> {
    check_w(ch, sp, w)?;
    let nm = NoiseMatrices::new(ch, sp)?;
    Ok(w
        .weights()
        .iter()
        .zip(&nm.d)
        .map(|(z, &d)| z.norm_sqr() * d)
        .collect())
}

/// `10^(db/10)`. Scenarios take linear values only; convert with this.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// Milliwatt decibels to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Inverse-SNR pair to rate pair: `(x, y) -> (½log2(1+1/x), ½log2(1+1/y))`.
pub fn map_u(inv_snr: (f64, f64)) -> Result<RatePair> {
    let (x, y) = inv_snr;
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::Domain {
            op: "map_u",
            reason: format!("inverse SNRs must be > 0, got ({x}, {y})"),
        });
    }
    Ok(RatePair::from_snr(SnrPair {
        snr1: 1.0 / x,
        snr2: 1.0 / y,
    }))
}

/// Rate pair to inverse-SNR pair; exact inverse of [`map_u`].
pub fn map_u_inverse(rates: RatePair) -> Result<(f64, f64)> {
    if !(rates.r1 > 0.0 && rates.r2 > 0.0) {
        return Err(Error::Domain {
            op: "map_u_inverse",
            reason: format!("rates must be > 0, got ({}, {})", rates.r1, rates.r2),
        });
    }
    let inv = |r: f64| 1.0 / (2.0 * r * std::f64::consts::LN_2).exp_m1();
    Ok((inv(rates.r1), inv(rates.r2)))
}
