//! Closed-form weighted sum inverse-SNR minimization (WSISMin) for reciprocal
//! channels.
//!
//! With `h1r == h1` and `h2r == h2`, matching each relay's phase to
//! `-(∠h1_i + ∠h2_i)` maximizes both SNRs for any magnitudes, so only the
//! magnitudes `x_i = |w_i|` remain. For a weight `μ`, the solvers below
//! minimize `μ/SNR1 + (1-μ)/SNR2` in closed form; sweeping `μ` over `[0, 1]`
//! yields points whose convex hull is the achievable rate region.
//!
//! Both solvers also expose the partially distributed form: a control center
//! broadcasts `μ` and one scalar, and every relay computes its own weight from
//! local channel knowledge.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::{snr_pair, Beamformer, ChannelSet, PowerBudget, RatePair, SnrPair, SystemParams};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Phases `θ_i = -(∠h1_i + ∠h2_i)` in `(-π, π]`.
pub fn matched_phases(ch: &ChannelSet) -> Result<Vec<f64>> {
    ch.require_reciprocal()?;
    Ok(ch
        .h1()
        .iter()
        .zip(ch.h2().iter())
        .map(|(a, b)| wrap_phase(-(a.arg() + b.arg())))
        .collect())
}

/// `μ/SNR1 + (1-μ)/SNR2`; a zero weight drops its term even when the SNR is 0.
pub fn wsis_objective(snr: SnrPair, mu: f64) -> f64 {
    let term = |weight: f64, s: f64| if weight == 0.0 { 0.0 } else { weight / s };
    term(mu, snr.snr1) + term(1.0 - mu, snr.snr2)
}

fn check_mu(mu: f64) -> Result<()> {
    if (0.0..=1.0).contains(&mu) {
        Ok(())
    } else {
        Err(invalid("mu", format!("must lie in [0, 1], got {mu}")))
    }
}

/// What a single relay knows: its own forward channels and noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayLocal {
    pub h1: Complex64,
    pub h2: Complex64,
    pub sigma_sq: f64,
}

impl RelayLocal {
    pub fn all(ch: &ChannelSet, sp: &SystemParams) -> Vec<RelayLocal> {
        (0..ch.k())
            .map(|i| RelayLocal {
                h1: ch.h1()[i],
                h2: ch.h2()[i],
                sigma_sq: sp.sigma_relay()[i],
            })
            .collect()
    }

    fn all_checked(ch: &ChannelSet, sp: &SystemParams) -> Result<Vec<RelayLocal>> {
        let relays = Self::all(ch, sp);
        if let Some(i) = relays.iter().position(|r| r.d(sp) <= 0.0) {
            return Err(Error::Degenerate(format!("relay {i} receives neither signal nor noise")));
        }
        Ok(relays)
    }

    fn d(&self, sp: &SystemParams) -> f64 {
        self.h1.norm_sqr() * sp.p_s1() + self.h2.norm_sqr() * sp.p_s2() + self.sigma_sq
    }

    fn phase(&self) -> f64 {
        wrap_phase(-(self.h1.arg() + self.h2.arg()))
    }
}

/// `ν = μσ²_S1/P_S2 + (1-μ)σ²_S2/P_S1`, known to every relay.
pub fn nu(sp: &SystemParams, mu: f64) -> f64 {
    mu * sp.sigma_s1_sq() / sp.p_s2() + (1.0 - mu) * sp.sigma_s2_sq() / sp.p_s1()
}

/// Diagonal entry of `Γ = νD/P_R + (μ/P_S2)A1 + ((1-μ)/P_S1)A2` for one relay.
fn gamma_entry(relay: &RelayLocal, sp: &SystemParams, p_r: f64, mu: f64) -> f64 {
    let beta = relay.d(sp);
    let eta = relay.sigma_sq
        * (relay.h1.norm_sqr() * mu / sp.p_s2() + relay.h2.norm_sqr() * (1.0 - mu) / sp.p_s1());
    nu(sp, mu) * beta / p_r + eta
}

/// Closed-form optimum under a sum-power constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct SumPowerSolution {
    /// Optimal magnitudes `x*`.
    pub x: Vec<f64>,
    /// Broadcast constant `ξ/‖Γ⁻¹f̂‖`.
    pub xi_over_norm: f64,
    pub mu: f64,
    pub gamma_diag: Vec<f64>,
}

impl SumPowerSolution {
    pub fn beamformer(&self, ch: &ChannelSet) -> Result<Beamformer> {
        Ok(Beamformer::from_polar(&self.x, &matched_phases(ch)?))
    }
}

/// Minimizes `μ/SNR1 + (1-μ)/SNR2` subject to `xᵀDx ≤ P_R`.
///
/// The power constraint is tight at the optimum, which turns the problem
/// into a Rayleigh quotient maximization of `(f̂ᵀx)² / xᵀΓx`, solved by
/// `x ∝ Γ⁻¹f̂`. At `μ ∈ {0, 1}` this is the one-way optimal beamformer.
pub fn wsismin_sum_power(
    ch: &ChannelSet,
    sp: &SystemParams,
    p_r: f64,
    mu: f64,
) -> Result<SumPowerSolution> {
    ch.require_reciprocal()?;
    sp.check_k(ch.k())?;
    check_mu(mu)?;
    PowerBudget::Sum(p_r).validate(ch.k())?;

    let relays = RelayLocal::all_checked(ch, sp)?;
    let fhat = ch.fhat();
    let gamma_diag: Vec<f64> = relays.iter().map(|r| gamma_entry(r, sp, p_r, mu)).collect();
    let dir: Vec<f64> = fhat.iter().zip(&gamma_diag).map(|(f, g)| f / g).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("all composite channel gains are zero".into()));
    }
    let power_unit: f64 = dir
        .iter()
        .zip(&relays)
        .map(|(u, r)| (u / norm).powi(2) * r.d(sp))
        .sum();
    let xi = (p_r / power_unit).sqrt();
    let xi_over_norm = xi / norm;
    let x = dir.iter().map(|u| xi_over_norm * u).collect();
    Ok(SumPowerSolution {
        x,
        xi_over_norm,
        mu,
        gamma_diag,
    })
}

/// Values a control center broadcasts for the sum-power rule.
pub fn broadcast_params_sum(sol: &SumPowerSolution) -> (f64, f64) {
    (sol.mu, sol.xi_over_norm)
}

/// Weight computed at a relay from its local channels and the broadcast.
pub fn local_weight_sum(
    relay: &RelayLocal,
    sp: &SystemParams,
    p_r: f64,
    mu: f64,
    scalar: f64,
) -> Complex64 {
    let mag = scalar * relay.h1.norm() * relay.h2.norm() / gamma_entry(relay, sp, p_r, mu);
    Complex64::from_polar(mag, relay.phase())
}

/// Closed-form optimum under individual power constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualPowerSolution {
    /// Power fractions: relay `i` transmits `alpha_i² p_i`.
    pub alpha: Vec<f64>,
    /// Number of relays at full power.
    pub k_star: usize,
    /// Broadcast constant `λ_{k*}`.
    pub lambda_kstar: f64,
    /// Relay indices sorted by descending `φ`.
    pub tau: Vec<usize>,
    pub mu: f64,
}

impl IndividualPowerSolution {
    pub fn beamformer(&self, ch: &ChannelSet, sp: &SystemParams, p: &[f64]) -> Result<Beamformer> {
        let phases = matched_phases(ch)?;
        let relays = RelayLocal::all_checked(ch, sp)?;
        let mags: Vec<f64> = relays
            .iter()
            .zip(&self.alpha)
            .zip(p)
            .map(|((r, a), pi)| a * (pi / r.d(sp)).sqrt())
            .collect();
        Ok(Beamformer::from_polar(&mags, &phases))
    }
}

/// `(g̃_i, ψ_i²)` for one relay.
fn indiv_terms(relay: &RelayLocal, sp: &SystemParams, p_i: f64, mu: f64) -> (f64, f64) {
    let d = relay.d(sp);
    let n = nu(sp, mu);
    let g = p_i.sqrt() * relay.h1.norm() * relay.h2.norm() / d.sqrt();
    let h1 = relay.sigma_sq * p_i * relay.h1.norm_sqr();
    let h2 = relay.sigma_sq * p_i * relay.h2.norm_sqr();
    let psi_sq = (h1 * mu / sp.p_s2() + h2 * (1.0 - mu) / sp.p_s1()) / (d * n);
    (g / n.sqrt(), psi_sq)
}

/// `φ_i = g̃_i/ψ_i²`; a noiseless relay with positive gain gets `+∞`.
fn phi_of(g_tilde: f64, psi_sq: f64) -> f64 {
    if psi_sq > 0.0 {
        g_tilde / psi_sq
    } else if g_tilde > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Minimizes `μ/SNR1 + (1-μ)/SNR2` subject to per-relay power limits `p`.
///
/// Equivalent to maximizing `⟨g̃, α⟩² / (1 + ‖Ψα‖²)` over `0 ⪯ α ⪯ 1`. The
/// relays with the largest `φ_i` transmit at full power and the rest scale
/// as `λ_{k*} φ_i`, where `k*` is the smallest `k` with
/// `λ_k < 1/φ_{τ_{k+1}}`.
pub fn wsismin_individual(
    ch: &ChannelSet,
    sp: &SystemParams,
    p: &[f64],
    mu: f64,
) -> Result<IndividualPowerSolution> {
    ch.require_reciprocal()?;
    sp.check_k(ch.k())?;
    check_mu(mu)?;
    let budget = PowerBudget::Individual(p.to_vec());
    budget.validate(ch.k())?;

    let k = ch.k();
    let relays = RelayLocal::all_checked(ch, sp)?;
    let terms: Vec<(f64, f64)> = relays
        .iter()
        .zip(p)
        .map(|(r, &pi)| indiv_terms(r, sp, pi, mu))
        .collect();
    if terms.iter().all(|&(g, _)| g == 0.0) {
        return Err(Error::Degenerate("all composite channel gains are zero".into()));
    }
    let phi: Vec<f64> = terms.iter().map(|&(g, s)| phi_of(g, s)).collect();

    // Descending φ; ties by ascending relay index (stable sort).
    let mut tau: Vec<usize> = (0..k).collect();
    tau.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]));

    let mut num = 1.0;
    let mut den = 0.0;
    let mut chosen = None;
    for (idx, &j) in tau.iter().enumerate() {
        num += terms[j].1;
        den += terms[j].0;
        let lambda = num / den;
        let next_phi = tau.get(idx + 1).map_or(0.0, |&n| phi[n]);
        if lambda < 1.0 / next_phi {
            chosen = Some((idx + 1, lambda));
            break;
        }
    }
    let (k_star, lambda_kstar) = chosen.unwrap_or_else(|| {
        log::warn!("no split satisfied the threshold test; running every relay at full power");
        (k, num / den)
    });

    let mut alpha = vec![0.0; k];
    for (idx, &j) in tau.iter().enumerate() {
        alpha[j] = if idx < k_star {
            1.0
        } else {
            lambda_kstar * phi[j]
        };
    }
    Ok(IndividualPowerSolution {
        alpha,
        k_star,
        lambda_kstar,
        tau,
        mu,
    })
}

/// Values a control center broadcasts for the individual-power rule.
pub fn broadcast_params_indiv(sol: &IndividualPowerSolution) -> (f64, f64) {
    (sol.mu, sol.lambda_kstar)
}

/// Weight computed at a relay: full power when `1/φ_i ≤ λ_{k*}`, otherwise
/// power `(λ_{k*} φ_i)² p_i`.
pub fn local_weight_indiv(
    relay: &RelayLocal,
    sp: &SystemParams,
    p_i: f64,
    mu: f64,
    lambda_kstar: f64,
) -> Complex64 {
    let (g, psi_sq) = indiv_terms(relay, sp, p_i, mu);
    let phi = phi_of(g, psi_sq);
    let alpha = if 1.0 / phi <= lambda_kstar {
        1.0
    } else {
        lambda_kstar * phi
    };
    Complex64::from_polar(alpha * (p_i / relay.d(sp)).sqrt(), relay.phase())
}

/// WSISMin beamformer for either budget type.
pub fn wsismin(ch: &ChannelSet, sp: &SystemParams, budget: &PowerBudget, mu: f64) -> Result<Beamformer> {
    match budget {
        PowerBudget::Sum(p_r) => wsismin_sum_power(ch, sp, *p_r, mu)?.beamformer(ch),
        PowerBudget::Individual(p) => wsismin_individual(ch, sp, p, mu)?.beamformer(ch, sp, p),
    }
}

/// Rate pair of the WSISMin solution at weight `μ`.
pub fn wsismin_rates(ch: &ChannelSet, sp: &SystemParams, budget: &PowerBudget, mu: f64) -> Result<RatePair> {
    let w = wsismin(ch, sp, budget, mu)?;
    Ok(RatePair::from_snr(snr_pair(ch, sp, &w)?))
}

/// Boundary point of the WSISMin trajectory on the rate-profile ray
/// `(κ, 1-κ)`, returned as its profile sum rate.
///
/// `r1/(r1+r2)` is nondecreasing in `μ`, so the ray is located by bisection
/// on `μ`. Rays outside the range covered by the trajectory hit the region
/// where one rate is capped by its one-way optimum.
pub fn profile_sum_rate(
    ch: &ChannelSet,
    sp: &SystemParams,
    budget: &PowerBudget,
    kappa: f64,
    tol: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(invalid("kappa", format!("must lie in [0, 1], got {kappa}")));
    }
    let share = |r: RatePair| r.r1 / r.sum();
    let profile = |r: RatePair| {
        let a = if kappa > 0.0 { r.r1 / kappa } else { f64::INFINITY };
        let b = if kappa < 1.0 { r.r2 / (1.0 - kappa) } else { f64::INFINITY };
        a.min(b)
    };
    let top = wsismin_rates(ch, sp, budget, 1.0)?;
    let bottom = wsismin_rates(ch, sp, budget, 0.0)?;
    if kappa >= share(top) {
        return Ok(profile(top));
    }
    if kappa <= share(bottom) {
        return Ok(profile(bottom));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if share(wsismin_rates(ch, sp, budget, mid)?) < kappa {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = wsismin_rates(ch, sp, budget, lo)?;
    let b = wsismin_rates(ch, sp, budget, hi)?;
    Ok(profile(a).max(profile(b)))
}
