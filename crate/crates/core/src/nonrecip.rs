//! Rate-profile characterization of the rate region for non-reciprocal
//! channels.
//!
//! A boundary point in direction `(κ, 1-κ)` is the largest `r` such that the
//! pair `(κr, (1-κ)r)` is achievable. Achievability at a fixed `r` is a pair
//! of SNR constraints; lifting `w wᴴ` to a PSD matrix `X` turns the check into
//! an SDP (a power minimization under a sum budget, a feasibility problem
//! under per-relay caps), and `r` is found by bisection.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::linalg::{diag, hermitian_eigen, lifted_gain, trace_product, CMat, CVec};
use crate::model::{rate_pair, Beamformer, ChannelSet, NoiseMatrices, PowerBudget, RatePair, SystemParams};
use crate::sdp::{
    solve_feasibility_with, solve_min_trace_with, Constraint, SdpProblem, SdpSettings, SdpSolution, SdpStatus,
};

/// Exponent guard: `2^(2κr)` beyond this is treated as unreachable.
const MAX_EXPONENT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateProfile {
    kappa: f64,
}

impl RateProfile {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(invalid("kappa", format!("must lie in [0, 1], got {kappa}")));
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn kappa_bar(&self) -> f64 {
        1.0 - self.kappa
    }

    /// SNR targets `(2^(2κr) - 1, 2^(2κ̄r) - 1)`, or `None` when either
    /// exponent exceeds the overflow guard.
    pub fn gammas(&self, r: f64) -> Option<(f64, f64)> {
        let (e1, e2) = (self.kappa * r, self.kappa_bar() * r);
        if e1 > MAX_EXPONENT || e2 > MAX_EXPONENT {
            return None;
        }
        Some(((2.0 * e1).exp2() - 1.0, (2.0 * e2).exp2() - 1.0))
    }

    /// `min(r1/κ, r2/κ̄)`: the sum rate at which the ray leaves the
    /// down-closure of `rates`.
    pub fn sum_rate_of(&self, rates: RatePair) -> f64 {
        let a = if self.kappa > 0.0 { rates.r1 / self.kappa } else { f64::INFINITY };
        let b = if self.kappa < 1.0 { rates.r2 / self.kappa_bar() } else { f64::INFINITY };
        a.min(b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BisectionConfig {
    /// Final bracket width in bits.
    pub epsilon: f64,
    pub max_iters: usize,
    pub r_max: Option<f64>,
    pub sdp: SdpSettings,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iters: 60,
            r_max: None,
            sdp: SdpSettings::default(),
        }
    }
}

impl BisectionConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if let Some(r) = self.r_max {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(invalid("r_max", format!("must be finite and nonnegative, got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BisectionOutcome {
    /// Largest sum rate certified feasible.
    pub r_sum: f64,
    /// Smallest rate found infeasible (or the initial upper bound).
    pub r_up: f64,
    /// Relaxed solution at `r_sum`.
    pub x_opt: CMat,
    pub iterations: usize,
    /// SDP solves that stopped without a verdict; each is counted as
    /// infeasible.
    pub solver_failures: usize,
    /// `MaxIter` if the bracket did not shrink below `epsilon`.
    pub status: SdpStatus,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum RankOneSource {
    ExactReduction,
    /// Rank reduction failed numerically; `w` is the scaled dominant
    /// eigenvector of `X`.
    EigenFallback,
    Randomization {
        num_candidates: usize,
        best_violation: f64,
    },
}

#[derive(Debug, Clone)]
pub struct RankOneResult {
    pub w: Beamformer,
    pub rates: RatePair,
    pub source: RankOneSource,
}

/// Best one-way rates `(r̃1, r̃2)` under the sum budget `p_r`.
pub fn one_way_rates(ch: &ChannelSet, sp: &SystemParams, p_r: f64) -> Result<(f64, f64)> {
    let nm = NoiseMatrices::new(ch, sp)?;
    let (f1, f2) = (ch.f1(), ch.f2());
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for i in 0..ch.k() {
        s1 += f2[i].norm_sqr() / (sp.sigma_s1_sq() * nm.d[i] / p_r + nm.a1[i]);
        s2 += f1[i].norm_sqr() / (sp.sigma_s2_sq() * nm.d[i] / p_r + nm.a2[i]);
    }
    let rate = |snr: f64| 0.5 * (1.0 + snr).log2();
    Ok((rate(sp.p_s2() * s1), rate(sp.p_s1() * s2)))
}

/// Upper bound on any profile sum rate: twice the better one-way rate.
/// Individual caps are bounded through their total.
pub fn r_max_bound(ch: &ChannelSet, sp: &SystemParams, budget: &PowerBudget) -> Result<f64> {
    budget.validate(ch.k())?;
    let (a, b) = one_way_rates(ch, sp, budget.total())?;
    Ok(2.0 * a.max(b))
}

/// The two lifted SNR constraints `tr[(P_S2 F2 − γ1 A1) X] ≥ γ1 σ_S1²` and
/// `tr[(P_S1 F1 − γ2 A2) X] ≥ γ2 σ_S2²`.
pub fn snr_constraints(ch: &ChannelSet, sp: &SystemParams, gamma1: f64, gamma2: f64) -> Result<[Constraint; 2]> {
    let nm = NoiseMatrices::new(ch, sp)?;
    let f1 = lifted_gain(&ch.f1());
    let f2 = lifted_gain(&ch.f2());
    let c1 = f2 * Complex64::new(sp.p_s2(), 0.0) - diag(&nm.a1) * Complex64::new(gamma1, 0.0);
    let c2 = f1 * Complex64::new(sp.p_s1(), 0.0) - diag(&nm.a2) * Complex64::new(gamma2, 0.0);
    Ok([
        Constraint::new(c1, gamma1 * sp.sigma_s1_sq()),
        Constraint::new(c2, gamma2 * sp.sigma_s2_sq()),
    ])
}

fn unreachable(k: usize) -> SdpSolution {
    SdpSolution {
        x: CMat::zeros(k, k),
        status: SdpStatus::Infeasible,
        objective: f64::INFINITY,
        max_violation: f64::INFINITY,
        duality_gap: 0.0,
        iterations: 0,
    }
}

/// Minimum relay power `tr(DX)` meeting SNR targets `(γ1, γ2)`.
pub fn min_power_for_snr(
    ch: &ChannelSet,
    sp: &SystemParams,
    gamma1: f64,
    gamma2: f64,
    settings: &SdpSettings,
) -> Result<SdpSolution> {
    let nm = NoiseMatrices::new(ch, sp)?;
    let problem = SdpProblem::min_trace(diag(&nm.d), snr_constraints(ch, sp, gamma1, gamma2)?.to_vec(), None)?;
    Ok(solve_min_trace_with(&problem, settings)?)
}

/// Feasibility of SNR targets `(γ1, γ2)` under per-relay caps `p`; slacks are
/// scaled by the right-hand sides so the verdict is relative.
pub fn feasibility_for_snr(
    ch: &ChannelSet,
    sp: &SystemParams,
    p: &[f64],
    gamma1: f64,
    gamma2: f64,
    settings: &SdpSettings,
) -> Result<SdpSolution> {
    PowerBudget::Individual(p.to_vec()).validate(ch.k())?;
    let nm = NoiseMatrices::new(ch, sp)?;
    let caps: Vec<f64> = p.iter().zip(&nm.d).map(|(&pi, &d)| pi / d).collect();
    let constraints = snr_constraints(ch, sp, gamma1, gamma2)?
        .into_iter()
        .map(|c| {
            let s = if c.b > 0.0 { c.b } else { 1.0 };
            c.with_slack_scale(s)
        })
        .collect();
    let problem = SdpProblem::feasibility(ch.k(), constraints, Some(caps))?;
    Ok(solve_feasibility_with(&problem, settings)?)
}

pub fn min_power_sdp(ch: &ChannelSet, sp: &SystemParams, kappa: f64, r: f64) -> Result<SdpSolution> {
    min_power_sdp_with(ch, sp, kappa, r, &SdpSettings::default())
}

pub fn min_power_sdp_with(
    ch: &ChannelSet,
    sp: &SystemParams,
    kappa: f64,
    r: f64,
    settings: &SdpSettings,
) -> Result<SdpSolution> {
    let profile = RateProfile::new(kappa)?;
    if r.is_nan() || r < 0.0 {
        return Err(invalid("r", format!("must be nonnegative, got {r}")));
    }
    match profile.gammas(r) {
        Some((g1, g2)) => min_power_for_snr(ch, sp, g1, g2, settings),
        None => Ok(unreachable(ch.k())),
    }
}

/// Whether `rates` lies in the relaxed region for `budget`.
pub fn relaxed_contains(
    ch: &ChannelSet,
    sp: &SystemParams,
    budget: &PowerBudget,
    rates: RatePair,
    rel_tol: f64,
) -> Result<bool> {
    let gamma = |r: f64| (2.0 * r.max(0.0)).exp2() - 1.0;
    let (g1, g2) = (gamma(rates.r1), gamma(rates.r2));
    let settings = SdpSettings::default();
    match budget {
        PowerBudget::Sum(p_r) => {
            let s = min_power_for_snr(ch, sp, g1, g2, &settings)?;
            Ok(s.is_optimal() && s.objective <= p_r * (1.0 + rel_tol))
        }
        PowerBudget::Individual(p) => {
            let relaxed: Vec<f64> = p.iter().map(|v| v * (1.0 + rel_tol)).collect();
            Ok(feasibility_for_snr(ch, sp, &relaxed, g1, g2, &settings)?.is_optimal())
        }
    }
}

fn bisect(
    k: usize,
    r_up: f64,
    cfg: &BisectionConfig,
    mut feasible: impl FnMut(f64) -> Result<(bool, Option<CMat>, bool)>,
) -> Result<BisectionOutcome> {
    let mut out = BisectionOutcome {
        r_sum: 0.0,
        r_up,
        x_opt: CMat::zeros(k, k),
        iterations: 0,
        solver_failures: 0,
        status: SdpStatus::Optimal,
    };
    while out.r_up - out.r_sum >= cfg.epsilon {
        if out.iterations >= cfg.max_iters {
            out.status = SdpStatus::MaxIter;
            break;
        }
        out.iterations += 1;
        let r = 0.5 * (out.r_sum + out.r_up);
        let (ok, x, failed) = feasible(r)?;
        if failed {
            out.solver_failures += 1;
            log::warn!("sdp solve without verdict at r = {r:.6}; treated as infeasible");
        }
        match (ok, x) {
            (true, Some(x)) => {
                out.r_sum = r;
                out.x_opt = x;
            }
            _ => out.r_up = r,
        }
    }
    Ok(out)
}

/// Sum-power bisection: `r` is feasible iff the minimum power at
/// `(κr, κ̄r)` is within `p_r`.
pub fn algorithm1_sum_power(
    ch: &ChannelSet,
    sp: &SystemParams,
    p_r: f64,
    kappa: f64,
    cfg: &BisectionConfig,
) -> Result<BisectionOutcome> {
    cfg.validate()?;
    RateProfile::new(kappa)?;
    if !(p_r > 0.0 && p_r.is_finite()) {
        return Err(invalid("p_r", format!("must be positive, got {p_r}")));
    }
    let r_up = match cfg.r_max {
        Some(r) => r,
        None => r_max_bound(ch, sp, &PowerBudget::Sum(p_r))?,
    };
    bisect(ch.k(), r_up, cfg, |r| {
        let s = min_power_sdp_with(ch, sp, kappa, r, &cfg.sdp)?;
        let ok = s.is_optimal() && s.objective <= p_r;
        Ok((ok, Some(s.x), s.status == SdpStatus::MaxIter))
    })
}

/// Per-relay-cap bisection on the feasibility SDP.
pub fn algorithm2_individual(
    ch: &ChannelSet,
    sp: &SystemParams,
    p: &[f64],
    kappa: f64,
    cfg: &BisectionConfig,
) -> Result<BisectionOutcome> {
    cfg.validate()?;
    let profile = RateProfile::new(kappa)?;
    let budget = PowerBudget::Individual(p.to_vec());
    budget.validate(ch.k())?;
    let r_up = match cfg.r_max {
        Some(r) => r,
        None => r_max_bound(ch, sp, &budget)?,
    };
    bisect(ch.k(), r_up, cfg, |r| {
        let Some((g1, g2)) = profile.gammas(r) else {
            return Ok((false, None, false));
        };
        let s = feasibility_for_snr(ch, sp, p, g1, g2, &cfg.sdp)?;
        Ok((s.is_optimal(), Some(s.x), s.status == SdpStatus::MaxIter))
    })
}

/// Hermitian basis of `r×r` matrices: diagonal units, then symmetric and
/// antisymmetric-imaginary off-diagonal pairs.
fn hermitian_basis(r: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(r * r);
    for j in 0..r {
        let mut m = CMat::zeros(r, r);
        m[(j, j)] = Complex64::new(1.0, 0.0);
        out.push(m);
    }
    for j in 0..r {
        for l in (j + 1)..r {
            let mut s = CMat::zeros(r, r);
            s[(j, l)] = Complex64::new(1.0, 0.0);
            s[(l, j)] = Complex64::new(1.0, 0.0);
            out.push(s);
            let mut a = CMat::zeros(r, r);
            a[(j, l)] = Complex64::new(0.0, 1.0);
            a[(l, j)] = Complex64::new(0.0, -1.0);
            out.push(a);
        }
    }
    out
}

/// Rank reduction preserving `tr(M_i X)` for every `M_i` in `mats`.
///
/// Returns a PSD matrix of rank at most one with the same trace values, or
/// `None` if no admissible direction was found before the rank dropped.
/// Needs `rank² > mats.len()` at every step, so up to three forms reduce all
/// the way to rank one.
pub fn reduce_rank(x: &CMat, mats: &[CMat]) -> Option<CMat> {
    let k = x.nrows();
    let mut x = x.clone();
    for _ in 0..k {
        let (vals, vecs) = hermitian_eigen(&x);
        let top = vals[0].max(0.0);
        if top == 0.0 {
            return Some(CMat::zeros(k, k));
        }
        let r = vals.iter().filter(|&&v| v > 1e-9 * top).count();
        if r <= 1 {
            let v = vecs.column(0);
            return Some(v * v.adjoint() * Complex64::new(top, 0.0));
        }
        if r * r <= mats.len() {
            return None;
        }
        let v = CMat::from_fn(k, r, |i, j| vecs[(i, j)] * vals[j].sqrt());
        let reduced: Vec<CMat> = mats.iter().map(|m| v.adjoint() * m * &v).collect();
        let basis = hermitian_basis(r);
        let g = nalgebra::DMatrix::<f64>::from_fn(mats.len(), basis.len(), |i, b| trace_product(&reduced[i], &basis[b]));
        // Null vector of G: eigenvector of GᵀG for its smallest eigenvalue.
        let gtg = g.transpose() * &g;
        let eig = gtg.symmetric_eigen();
        let idx = eig.eigenvalues.imin();
        let coeffs = eig.eigenvectors.column(idx);
        let mut delta = CMat::zeros(r, r);
        for (b, m) in basis.iter().enumerate() {
            delta += m * Complex64::new(coeffs[b], 0.0);
        }
        let (dvals, _) = hermitian_eigen(&delta);
        let (lmax, lmin) = (dvals[0], dvals[r - 1]);
        let (delta, lmax) = if lmax >= -lmin { (delta, lmax) } else { (-delta, -lmin) };
        if lmax <= 1e-14 {
            return None;
        }
        let step = CMat::identity(r, r) - delta / Complex64::new(lmax, 0.0);
        let next = &v * step * v.adjoint();
        x = (&next + next.adjoint()) * Complex64::new(0.5, 0.0);
    }
    None
}

fn dominant(x: &CMat) -> CVec {
    let (vals, vecs) = hermitian_eigen(x);
    vecs.column(0).into_owned() * Complex64::new(vals[0].max(0.0).sqrt(), 0.0)
}

/// Rank-one beamformer with the same constraint values and power as a
/// relaxed optimum.
pub fn rank_one_reduce(
    ch: &ChannelSet,
    sp: &SystemParams,
    x_opt: &CMat,
    constraints: &[Constraint],
    d: &CMat,
) -> Result<RankOneResult> {
    if x_opt.nrows() != ch.k() {
        return Err(crate::Error::DimensionMismatch {
            expected: ch.k(),
            found: x_opt.nrows(),
        });
    }
    let mut mats: Vec<CMat> = constraints.iter().map(|c| c.a.clone()).collect();
    mats.push(d.clone());
    let before: Vec<f64> = mats.iter().map(|m| trace_product(m, x_opt)).collect();
    let preserved = |x: &CMat| {
        mats.iter().zip(&before).all(|(m, &b)| {
            let scale = 1f64.max(crate::linalg::frobenius(m)).max(b.abs());
            (trace_product(m, x) - b).abs() <= 1e-9 * scale
        })
    };
    let (w, source) = match reduce_rank(x_opt, &mats) {
        Some(x) if preserved(&x) => (dominant(&x), RankOneSource::ExactReduction),
        _ => {
            log::warn!("rank reduction failed; using the dominant eigenvector");
            let mut w = dominant(x_opt);
            let p = trace_product(d, &crate::linalg::outer(&w));
            if p > 0.0 {
                w *= Complex64::new((before[before.len() - 1] / p).sqrt(), 0.0);
            }
            (w, RankOneSource::EigenFallback)
        }
    };
    let w = Beamformer::new(w.iter().copied().collect())?;
    let rates = rate_pair(ch, sp, &w)?;
    Ok(RankOneResult { w, rates, source })
}

/// Randomization violation `v(w)`: how far `w` is from meeting both SNR
/// targets, in units of the targets. Directions with a zero target are
/// ignored.
pub fn violation(ch: &ChannelSet, sp: &SystemParams, w: &CVec, gamma1: f64, gamma2: f64) -> Result<f64> {
    let nm = NoiseMatrices::new(ch, sp)?;
    let quad = |a: &[f64]| a.iter().zip(w.iter()).map(|(&a, z)| a * z.norm_sqr()).sum::<f64>();
    let g1 = (ch.f1().transpose() * w)[0].norm_sqr();
    let g2 = (ch.f2().transpose() * w)[0].norm_sqr();
    let mut v = f64::NEG_INFINITY;
    if gamma2 > 0.0 {
        let s = sp.sigma_s2_sq();
        v = v.max(1.0 - (sp.p_s1() * g1 / (gamma2 * s) - quad(&nm.a2) / s));
    }
    if gamma1 > 0.0 {
        let s = sp.sigma_s1_sq();
        v = v.max(1.0 - (sp.p_s2() * g2 / (gamma1 * s) - quad(&nm.a1) / s));
    }
    Ok(if v.is_finite() { v } else { 0.0 })
}

/// Random-phase candidates with magnitudes `√X_ii`; returns the one with
/// the smallest violation.
pub fn randomize_rank_one(
    x_opt: &CMat,
    ch: &ChannelSet,
    sp: &SystemParams,
    gamma1: f64,
    gamma2: f64,
    candidates: usize,
    seed: u64,
) -> Result<RankOneResult> {
    let k = ch.k();
    if x_opt.nrows() != k {
        return Err(crate::Error::DimensionMismatch {
            expected: k,
            found: x_opt.nrows(),
        });
    }
    if candidates == 0 {
        return Err(invalid("candidates", "need at least one candidate"));
    }
    let mags: Vec<f64> = (0..k).map(|i| x_opt[(i, i)].re.max(0.0).sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, CVec)> = None;
    for _ in 0..candidates {
        let w = CVec::from_fn(k, |i, _| {
            Complex64::from_polar(mags[i], rng.random_range(0.0..std::f64::consts::TAU))
        });
        let v = violation(ch, sp, &w, gamma1, gamma2)?;
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, w));
        }
    }
    let (best_violation, w) = best.expect("at least one candidate");
    let w = Beamformer::new(w.iter().copied().collect())?;
    let rates = rate_pair(ch, sp, &w)?;
    Ok(RankOneResult {
        w,
        rates,
        source: RankOneSource::Randomization {
            num_candidates: candidates,
            best_violation,
        },
    })
}

/// One boundary point of the sum-power region: relaxed bound plus its exact
/// rank-one beamformer.
#[derive(Debug, Clone)]
pub struct ProfilePoint {
    pub outcome: BisectionOutcome,
    pub rank_one: RankOneResult,
}

pub fn sum_power_point(
    ch: &ChannelSet,
    sp: &SystemParams,
    p_r: f64,
    kappa: f64,
    cfg: &BisectionConfig,
) -> Result<ProfilePoint> {
    let outcome = algorithm1_sum_power(ch, sp, p_r, kappa, cfg)?;
    let (g1, g2) = RateProfile::new(kappa)?
        .gammas(outcome.r_sum)
        .expect("feasible rates pass the exponent guard");
    let constraints = snr_constraints(ch, sp, g1, g2)?;
    let d = diag(&NoiseMatrices::new(ch, sp)?.d);
    let rank_one = rank_one_reduce(ch, sp, &outcome.x_opt, &constraints, &d)?;
    Ok(ProfilePoint { outcome, rank_one })
}

pub fn individual_power_point(
    ch: &ChannelSet,
    sp: &SystemParams,
    p: &[f64],
    kappa: f64,
    cfg: &BisectionConfig,
    candidates: usize,
    seed: u64,
) -> Result<ProfilePoint> {
    let outcome = algorithm2_individual(ch, sp, p, kappa, cfg)?;
    let (g1, g2) = RateProfile::new(kappa)?
        .gammas(outcome.r_sum)
        .expect("feasible rates pass the exponent guard");
    let rank_one = randomize_rank_one(&outcome.x_opt, ch, sp, g1, g2, candidates, seed)?;
    Ok(ProfilePoint { outcome, rank_one })
}
