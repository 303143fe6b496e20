//! Brute-force reference engines for validation.
//!
//! Nothing here calls the production solvers: SNRs, powers, hulls and SDP
//! optima are recomputed along separate arithmetic paths (scalar loops,
//! exhaustive grids, projected gradient ascent, low-rank factorization).
//! Only the input types are shared.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{Beamformer, ChannelSet, PowerBudget, RatePair, SystemParams};
use crate::Complex64;

/// Largest relay count accepted by [`best_wsis_grid`].
pub const GRID_MAX_RELAYS: usize = 4;
/// Largest number of grid points [`best_wsis_grid`] will evaluate.
pub const GRID_MAX_POINTS: usize = 20_000_000;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `D_ii`: average received power at relay `i`.
pub fn scalar_relay_gain(ch: &ChannelSet, sp: &SystemParams) -> Vec<f64> {
    let sig = sp.sigma_relay();
    (0..ch.k())
        .map(|i| ch.h1()[i].norm_sqr() * sp.p_s1() + ch.h2()[i].norm_sqr() * sp.p_s2() + sig[i])
        .collect()
}

/// `(SNR1, SNR2)` by direct summation.
pub fn scalar_snr(ch: &ChannelSet, sp: &SystemParams, w: &[Complex64]) -> (f64, f64) {
    let sig = sp.sigma_relay();
    let (mut s1, mut s2) = (zero(), zero());
    let (mut n1, mut n2) = (sp.sigma_s1_sq(), sp.sigma_s2_sq());
    for i in 0..ch.k() {
        s1 += ch.h2()[i] * ch.h1r()[i] * w[i];
        s2 += ch.h1()[i] * ch.h2r()[i] * w[i];
        n1 += ch.h1r()[i].norm_sqr() * sig[i] * w[i].norm_sqr();
        n2 += ch.h2r()[i].norm_sqr() * sig[i] * w[i].norm_sqr();
    }
    (sp.p_s2() * s1.norm_sqr() / n1, sp.p_s1() * s2.norm_sqr() / n2)
}

fn rate_of(snr: f64) -> f64 {
    0.5 * (1.0 + snr).log2()
}

pub fn scalar_rates(ch: &ChannelSet, sp: &SystemParams, w: &[Complex64]) -> RatePair {
    let (a, b) = scalar_snr(ch, sp, w);
    RatePair::new(rate_of(a), rate_of(b))
}

pub fn scalar_powers(ch: &ChannelSet, sp: &SystemParams, w: &[Complex64]) -> Vec<f64> {
    scalar_relay_gain(ch, sp)
        .iter()
        .zip(w)
        .map(|(d, wi)| d * wi.norm_sqr())
        .collect()
}

fn co_phases(ch: &ChannelSet) -> Result<Vec<f64>> {
    if !ch.is_reciprocal() {
        return Err(Error::NotReciprocal);
    }
    Ok((0..ch.k()).map(|i| -(ch.h1()[i].arg() + ch.h2()[i].arg())).collect())
}

fn polar(mags: &[f64], phases: &[f64]) -> Vec<Complex64> {
    mags.iter().zip(phases).map(|(&m, &t)| Complex64::from_polar(m, t)).collect()
}

/// Best grid point of a WSIS minimization.
#[derive(Debug, Clone)]
pub struct GridOptimum {
    pub objective: f64,
    pub magnitudes: Vec<f64>,
    pub beamformer: Beamformer,
    /// Upper bound on `objective − continuous optimum`.
    pub lipschitz_gap: f64,
    pub evaluations: usize,
}

/// Exhaustive search of `μ/SNR1 + (1−μ)/SNR2` over co-phased beamformers on
/// reciprocal channels.
///
/// Sum budget: the full-power ellipsoid `Σ D_ii x_i² = P_R` is swept with
/// `K−1` spherical angles in `[0, π/2]`. Per-relay caps: `x_i = α_i √(p_i/D_ii)`
/// with `α ∈ [0,1]^K`. Each axis is split into `round(1/resolution)` steps.
///
/// The gap bound is a local Lipschitz estimate: with `Δ_j` the largest
/// objective change between the grid optimum and its neighbours along axis
/// `j`, the continuous optimum lies in a cell touching the grid optimum and
/// the objective there differs by at most `Σ_j Δ_j`.
pub fn best_wsis_grid(
    ch: &ChannelSet,
    sp: &SystemParams,
    budget: &PowerBudget,
    mu: f64,
    resolution: f64,
) -> Result<GridOptimum> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(invalid("mu", format!("must lie in [0, 1], got {mu}")));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(invalid("resolution", format!("must lie in (0, 1], got {resolution}")));
    }
    let k = ch.k();
    if k > GRID_MAX_RELAYS {
        return Err(Error::GridTooLarge {
            k,
            max: GRID_MAX_RELAYS,
        });
    }
    budget.validate(k)?;
    let phases = co_phases(ch)?;
    let d = scalar_relay_gain(ch, sp);
    let steps = (1.0 / resolution).round().max(1.0) as usize;
    let dims = match budget {
        PowerBudget::Sum(_) => k - 1,
        PowerBudget::Individual(_) => k,
    };
    let total = (steps + 1)
        .checked_pow(dims as u32)
        .filter(|&n| n <= GRID_MAX_POINTS)
        .ok_or_else(|| invalid("resolution", format!("{steps} steps over {dims} axes exceeds {GRID_MAX_POINTS} points")))?;

    let mags_at = |idx: usize| -> Vec<f64> {
        let mut coord = vec![0usize; dims];
        let mut r = idx;
        for c in coord.iter_mut() {
            *c = r % (steps + 1);
            r /= steps + 1;
        }
        match budget {
            PowerBudget::Sum(p_r) => {
                let mut u = vec![0.0; k];
                let mut tail = 1.0;
                for (j, &c) in coord.iter().enumerate() {
                    let a = std::f64::consts::FRAC_PI_2 * c as f64 / steps as f64;
                    u[j] = tail * a.cos();
                    tail *= a.sin();
                }
                u[k - 1] = tail;
                (0..k).map(|i| u[i] * (p_r / d[i]).sqrt()).collect()
            }
            PowerBudget::Individual(p) => (0..k)
                .map(|i| coord[i] as f64 / steps as f64 * (p[i] / d[i]).sqrt())
                .collect(),
        }
    };
    let eval = |idx: usize| -> f64 {
        let w = polar(&mags_at(idx), &phases);
        let (a, b) = scalar_snr(ch, sp, &w);
        let mut f = 0.0;
        if mu > 0.0 {
            f += mu / a;
        }
        if mu < 1.0 {
            f += (1.0 - mu) / b;
        }
        if f.is_nan() {
            f64::INFINITY
        } else {
            f
        }
    };
    let values: Vec<f64> = (0..total).into_par_iter().map(eval).collect();
    let (best, objective) = values
        .iter()
        .copied()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.total_cmp(b).then(i.cmp(j)))
        .expect("grid is nonempty");

    let mut gap = 0.0;
    let mut stride = 1usize;
    for _ in 0..dims {
        let c = (best / stride) % (steps + 1);
        let mut delta: f64 = 0.0;
        if c > 0 {
            delta = delta.max((values[best - stride] - objective).abs());
        }
        if c < steps {
            delta = delta.max((values[best + stride] - objective).abs());
        }
        gap += delta;
        stride *= steps + 1;
    }
    let magnitudes = mags_at(best);
    Ok(GridOptimum {
        objective,
        beamformer: Beamformer::new(polar(&magnitudes, &phases))?,
        magnitudes,
        lipschitz_gap: gap,
        evaluations: total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudPhases {
    /// Independent uniform phases.
    Uniform,
    /// Co-phased (`−∠h1_i − ∠h2_i`); reciprocal channels only.
    Matched,
}

#[derive(Debug, Clone)]
pub struct CloudSample {
    pub beamformer: Beamformer,
    pub snr: (f64, f64),
    pub rates: RatePair,
}

/// `n` random feasible beamformers. Sum budget: a random nonnegative
/// direction scaled to a uniform fraction of `P_R`. Per-relay caps:
/// `|w_i| = α_i √(p_i/D_ii)` with `α_i` uniform on `[0, 1]`.
pub fn random_beamformer_cloud(
    ch: &ChannelSet,
    sp: &SystemParams,
    budget: &PowerBudget,
    n: usize,
    seed: u64,
    phases: CloudPhases,
) -> Result<Vec<CloudSample>> {
    if n == 0 {
        return Err(invalid("n", "need at least one sample"));
    }
    let k = ch.k();
    budget.validate(k)?;
    let matched = match phases {
        CloudPhases::Matched => Some(co_phases(ch)?),
        CloudPhases::Uniform => None,
    };
    let d = scalar_relay_gain(ch, sp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mags: Vec<f64> = match budget {
            PowerBudget::Sum(p_r) => {
                let dir: Vec<f64> = (0..k)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z.abs()
                    })
                    .collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let frac: f64 = rng.random();
                (0..k).map(|i| dir[i] / norm * (frac * p_r / d[i]).sqrt()).collect()
            }
            PowerBudget::Individual(p) => (0..k)
                .map(|i| rng.random::<f64>() * (p[i] / d[i]).sqrt())
                .collect(),
        };
        let th: Vec<f64> = match &matched {
            Some(t) => t.clone(),
            None => (0..k)
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect(),
        };
        let w = polar(&mags, &th);
        let snr = scalar_snr(ch, sp, &w);
        out.push(CloudSample {
            rates: RatePair::new(rate_of(snr.0), rate_of(snr.1)),
            snr,
            beamformer: Beamformer::new(w)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct WsrSearch {
    /// `λ r1 + (1−λ) r2` at the best beamformer found.
    pub value: f64,
    pub rates: RatePair,
    pub beamformer: Beamformer,
}

struct WsrProblem<'a> {
    ch: &'a ChannelSet,
    sp: &'a SystemParams,
    sqrt_d: Vec<f64>,
    lambda: f64,
    caps: Vec<f64>,
    sum_cap: Option<f64>,
}

impl WsrProblem<'_> {
    fn weights(&self, v: &[Complex64]) -> Vec<Complex64> {
        v.iter().zip(&self.sqrt_d).map(|(x, s)| x / s).collect()
    }

    fn value(&self, v: &[Complex64]) -> f64 {
        let r = scalar_rates(self.ch, self.sp, &self.weights(v));
        self.lambda * r.r1 + (1.0 - self.lambda) * r.r2
    }

    // d value / d conj(v) in Wirtinger form.
    fn gradient(&self, v: &[Complex64]) -> Vec<Complex64> {
        let (ch, sp) = (self.ch, self.sp);
        let w = self.weights(v);
        let k = ch.k();
        let sig = sp.sigma_relay();
        let a: Vec<Complex64> = (0..k).map(|i| ch.h2()[i] * ch.h1r()[i]).collect();
        let b: Vec<Complex64> = (0..k).map(|i| ch.h1()[i] * ch.h2r()[i]).collect();
        let q1: Vec<f64> = (0..k).map(|i| ch.h1r()[i].norm_sqr() * sig[i]).collect();
        let q2: Vec<f64> = (0..k).map(|i| ch.h2r()[i].norm_sqr() * sig[i]).collect();
        let s1: Complex64 = (0..k).map(|i| a[i] * w[i]).sum();
        let s2: Complex64 = (0..k).map(|i| b[i] * w[i]).sum();
        let n1 = sp.sigma_s1_sq() + (0..k).map(|i| q1[i] * w[i].norm_sqr()).sum::<f64>();
        let n2 = sp.sigma_s2_sq() + (0..k).map(|i| q2[i] * w[i].norm_sqr()).sum::<f64>();
        let snr1 = sp.p_s2() * s1.norm_sqr() / n1;
        let snr2 = sp.p_s1() * s2.norm_sqr() / n2;
        let c1 = self.lambda / (2.0 * std::f64::consts::LN_2 * (1.0 + snr1)) * sp.p_s2() / (n1 * n1);
        let c2 = (1.0 - self.lambda) / (2.0 * std::f64::consts::LN_2 * (1.0 + snr2)) * sp.p_s1() / (n2 * n2);
        (0..k)
            .map(|i| {
                let g1 = s1 * a[i].conj() * n1 - w[i] * (s1.norm_sqr() * q1[i]);
                let g2 = s2 * b[i].conj() * n2 - w[i] * (s2.norm_sqr() * q2[i]);
                (g1 * c1 + g2 * c2) / self.sqrt_d[i]
            })
            .collect()
    }

    fn project(&self, v: &mut [Complex64]) {
        match self.sum_cap {
            Some(p_r) => {
                let e: f64 = v.iter().map(|x| x.norm_sqr()).sum();
                if e > p_r {
                    let s = (p_r / e).sqrt();
                    v.iter_mut().for_each(|x| *x *= s);
                }
            }
            None => {
                for (x, &c) in v.iter_mut().zip(&self.caps) {
                    let m = x.norm();
                    if m > c.sqrt() {
                        *x *= c.sqrt() / m;
                    }
                }
            }
        }
    }

    fn ascend(&self, mut v: Vec<Complex64>) -> (f64, Vec<Complex64>) {
        self.project(&mut v);
        let mut f = self.value(&v);
        let mut t = 1.0;
        for _ in 0..20_000 {
            let g = self.gradient(&v);
            let mut accepted = None;
            for _ in 0..80 {
                let mut cand: Vec<Complex64> = v.iter().zip(&g).map(|(x, gi)| x + gi * t).collect();
                self.project(&mut cand);
                let step2: f64 = cand.iter().zip(&v).map(|(a, b)| (a - b).norm_sqr()).sum();
                let fc = self.value(&cand);
                if fc.is_finite() && fc >= f + 1e-4 * step2 / t {
                    accepted = Some((fc, cand, step2));
                    break;
                }
                t *= 0.5;
            }
            let Some((fc, cand, step2)) = accepted else { break };
            let scale: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().max(1.0);
            let done = step2 <= 1e-28 * scale || fc - f <= 1e-16 * f.abs().max(1.0);
            v = cand;
            f = fc;
            t *= 2.0;
            if done {
                break;
            }
        }
        (f, v)
    }
}

/// Multi-start projected gradient ascent of `λ r1 + (1−λ) r2` over all
/// feasible complex beamformers, in coordinates `v_i = √D_ii w_i` where both
/// budget shapes have exact projections.
pub fn weighted_sum_rate_search(
    ch: &ChannelSet,
    sp: &SystemParams,
    budget: &PowerBudget,
    lambda: f64,
    n_restarts: usize,
    seed: u64,
) -> Result<WsrSearch> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid("lambda", format!("must lie in [0, 1], got {lambda}")));
    }
    let k = ch.k();
    budget.validate(k)?;
    let d = scalar_relay_gain(ch, sp);
    let prob = WsrProblem {
        ch,
        sp,
        sqrt_d: d.iter().map(|x| x.sqrt()).collect(),
        lambda,
        caps: match budget {
            PowerBudget::Individual(p) => p.clone(),
            PowerBudget::Sum(p_r) => vec![*p_r; k],
        },
        sum_cap: match budget {
            PowerBudget::Sum(p_r) => Some(*p_r),
            PowerBudget::Individual(_) => None,
        },
    };
    let full = |i: usize| match budget {
        PowerBudget::Sum(p_r) => (p_r / k as f64).sqrt(),
        PowerBudget::Individual(p) => p[i].sqrt(),
    };
    // Two aligned starts (one per direction) plus random ones.
    let mut starts: Vec<Vec<Complex64>> = [true, false]
        .iter()
        .map(|&dir1| {
            (0..k)
                .map(|i| {
                    let c = if dir1 {
                        ch.h2()[i] * ch.h1r()[i]
                    } else {
                        ch.h1()[i] * ch.h2r()[i]
                    };
                    Complex64::from_polar(full(i), -c.arg())
                })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_restarts {
        starts.push(
            (0..k)
                .map(|i| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * full(i)
                })
                .collect(),
        );
    }
    let results: Vec<(f64, Vec<Complex64>)> = starts.into_par_iter().map(|s| prob.ascend(s)).collect();
    let (value, v) = results
        .into_iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(j.cmp(i)))
        .map(|(_, r)| r)
        .expect("at least two starts");
    let w = prob.weights(&v);
    Ok(WsrSearch {
        value,
        rates: scalar_rates(ch, sp, &w),
        beamformer: Beamformer::new(w)?,
    })
}

/// Upper-right Pareto hull by gift wrapping: from the highest point
/// (ties: rightmost), repeatedly step to the point on the right that makes
/// the steepest edge, preferring the farthest among collinear ones.
pub fn brute_force_hull(points: &[RatePair]) -> Vec<RatePair> {
    let pts: Vec<RatePair> = points
        .iter()
        .copied()
        .filter(|p| p.r1.is_finite() && p.r2.is_finite())
        .collect();
    let Some(mut cur) = pts
        .iter()
        .copied()
        .reduce(|a, b| if (b.r2, b.r1) > (a.r2, a.r1) { b } else { a })
    else {
        return Vec::new();
    };
    let mut hull = vec![cur];
    loop {
        let mut next: Option<(RatePair, f64)> = None;
        for &q in &pts {
            if q.r1 <= cur.r1 {
                continue;
            }
            let slope = (q.r2 - cur.r2) / (q.r1 - cur.r1);
            next = match next {
                Some((b, s)) if s > slope || (s == slope && b.r1 >= q.r1) => Some((b, s)),
                _ => Some((q, slope)),
            };
        }
        match next {
            Some((q, _)) => {
                hull.push(q);
                cur = q;
            }
            None => return hull,
        }
    }
}

pub type OracleMat = DMatrix<Complex64>;

/// SDP `min tr(C X)` (or pure feasibility) subject to `tr(A_i X) ≥ b_i`,
/// `X_kk ≤ u_k`, `X ⪰ 0`.
#[derive(Debug, Clone)]
pub struct FactorizedSdp {
    pub k: usize,
    pub objective: Option<OracleMat>,
    pub constraints: Vec<(OracleMat, f64)>,
    pub caps: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct FactorizedSolution {
    pub x: OracleMat,
    pub objective: f64,
    /// Largest violation over constraints scaled by `max(1, |b_i|)` and caps
    /// scaled by `max(1, u_k)`.
    pub max_violation: f64,
}

fn tr_prod(a: &OracleMat, x: &OracleMat) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] * x[(j, i)]).re;
        }
    }
    s
}

fn re_inner(a: &OracleMat, b: &OracleMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

impl FactorizedSdp {
    fn check(&self) -> Result<()> {
        let k = self.k;
        let square = |m: &OracleMat| m.nrows() == k && m.ncols() == k;
        if k == 0 || self.caps.len() != k {
            return Err(invalid("caps", "need one entry per dimension"));
        }
        if !self.objective.as_ref().is_none_or(square) || !self.constraints.iter().all(|(a, _)| square(a)) {
            return Err(invalid("constraints", "matrices must be k×k"));
        }
        Ok(())
    }

    fn violation(&self, x: &OracleMat) -> f64 {
        let mut v: f64 = 0.0;
        for (a, b) in &self.constraints {
            v = v.max((b - tr_prod(a, x)) / b.abs().max(1.0));
        }
        for (kk, u) in self.caps.iter().enumerate() {
            if let Some(u) = u {
                v = v.max((x[(kk, kk)].re - u) / u.max(1.0));
            }
        }
        v.max(0.0)
    }

    fn objective_of(&self, x: &OracleMat) -> f64 {
        self.objective.as_ref().map_or(0.0, |c| tr_prod(c, x))
    }
}

struct AugLag<'a> {
    p: &'a FactorizedSdp,
    // Constraints rescaled to unit size.
    rows: Vec<(OracleMat, f64)>,
    lam: Vec<f64>,
    nu: Vec<f64>,
    rho: f64,
}

impl AugLag<'_> {
    fn value(&self, v: &OracleMat) -> f64 {
        let x = v * v.adjoint();
        let mut f = self.p.objective_of(&x);
        for ((a, b), &l) in self.rows.iter().zip(&self.lam) {
            let g = tr_prod(a, &x) - b;
            f += ((l - self.rho * g).max(0.0).powi(2) - l * l) / (2.0 * self.rho);
        }
        for (kk, (u, &m)) in self.p.caps.iter().zip(&self.nu).enumerate() {
            if let Some(u) = u {
                let h = (u - x[(kk, kk)].re) / u.max(1.0);
                f += ((m - self.rho * h).max(0.0).powi(2) - m * m) / (2.0 * self.rho);
            }
        }
        f
    }

    // Direction G V with G = ∂L/∂X.
    fn gradient(&self, v: &OracleMat) -> OracleMat {
        let x = v * v.adjoint();
        let k = self.p.k;
        let mut g = self.p.objective.clone().unwrap_or_else(|| OracleMat::zeros(k, k));
        for ((a, b), &l) in self.rows.iter().zip(&self.lam) {
            let m = (l - self.rho * (tr_prod(a, &x) - b)).max(0.0);
            g -= a * Complex64::new(m, 0.0);
        }
        for (kk, (u, &n)) in self.p.caps.iter().zip(&self.nu).enumerate() {
            if let Some(u) = u {
                let s = u.max(1.0);
                let m = (n - self.rho * (u - x[(kk, kk)].re) / s).max(0.0);
                g[(kk, kk)] += Complex64::new(m / s, 0.0);
            }
        }
        g * v
    }

    fn minimize(&self, mut v: OracleMat) -> OracleMat {
        let mut f = self.value(&v);
        let mut g = self.gradient(&v);
        let mut t = 1e-2;
        for _ in 0..4000 {
            let gg = re_inner(&g, &g);
            if gg < 1e-26 {
                break;
            }
            let mut next = None;
            for _ in 0..60 {
                let cand = &v - &g * Complex64::new(t, 0.0);
                let fc = self.value(&cand);
                if fc <= f - 1e-4 * t * gg {
                    next = Some((cand, fc));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, fc)) = next else { break };
            let gc = self.gradient(&cand);
            // Barzilai-Borwein proposal for the next trial step.
            let s = &cand - &v;
            let y = &gc - &g;
            let sy = re_inner(&s, &y);
            t = if sy > 0.0 { re_inner(&s, &s) / sy } else { t * 2.0 };
            let done = (f - fc).abs() <= 1e-15 * f.abs().max(1.0);
            v = cand;
            f = fc;
            g = gc;
            if done {
                break;
            }
        }
        v
    }
}

fn factorized_run(p: &FactorizedSdp, v0: OracleMat) -> FactorizedSolution {
    let rows: Vec<(OracleMat, f64)> = p
        .constraints
        .iter()
        .map(|(a, b)| {
            let s = a.norm().max(b.abs()).max(1.0);
            (a / Complex64::new(s, 0.0), b / s)
        })
        .collect();
    let mut al = AugLag {
        p,
        lam: vec![0.0; rows.len()],
        nu: vec![0.0; p.k],
        rows,
        rho: 10.0,
    };
    let mut v = v0;
    let mut prev_viol = f64::INFINITY;
    for _ in 0..80 {
        v = al.minimize(v);
        let x = &v * v.adjoint();
        for (l, (a, b)) in al.lam.iter_mut().zip(&al.rows) {
            *l = (*l - al.rho * (tr_prod(a, &x) - b)).max(0.0);
        }
        for (kk, (n, u)) in al.nu.iter_mut().zip(&p.caps).enumerate() {
            if let Some(u) = u {
                *n = (*n - al.rho * (u - x[(kk, kk)].re) / u.max(1.0)).max(0.0);
            }
        }
        let viol = p.violation(&x);
        if viol < 1e-11 && prev_viol < 1e-11 {
            break;
        }
        if viol > 0.25 * prev_viol {
            al.rho = (al.rho * 4.0).min(1e10);
        }
        prev_viol = viol;
    }
    let x = &v * v.adjoint();
    FactorizedSolution {
        objective: p.objective_of(&x),
        max_violation: p.violation(&x),
        x,
    }
}

/// Solves the SDP over `X = V Vᴴ` (full-rank factor) with an augmented
/// Lagrangian and gradient inner loops, from `restarts` random factors.
/// Among runs with violation below `1e-7` the lowest objective wins; if none
/// gets there, the least violated run is returned.
pub fn factorization_solve(p: &FactorizedSdp, restarts: usize, seed: u64) -> Result<FactorizedSolution> {
    p.check()?;
    let k = p.k;
    let scale = p
        .constraints
        .iter()
        .map(|(a, b)| b.abs() / a.norm().max(1e-12))
        .fold(1.0, f64::max)
        .sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<OracleMat> = (0..restarts.max(1))
        .map(|_| {
            OracleMat::from_fn(k, k, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * (scale / k as f64)
            })
        })
        .collect();
    let runs: Vec<FactorizedSolution> = starts.into_par_iter().map(|v| factorized_run(p, v)).collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| {
            let (fa, fb) = (a.max_violation < 1e-7, b.max_violation < 1e-7);
            let better = match (fa, fb) {
                (true, true) => b.objective < a.objective,
                (false, true) => true,
                (true, false) => false,
                (false, false) => b.max_violation < a.max_violation,
            };
            if better {
                b
            } else {
                a
            }
        })
        .expect("at least one start");
    Ok(best)
}

/// Feasibility verdict: the least violation found by [`factorization_solve`]
/// (with the objective dropped) is at most `tol`.
pub fn factorization_feasible(p: &FactorizedSdp, restarts: usize, seed: u64, tol: f64) -> Result<(bool, f64)> {
    let q = FactorizedSdp {
        objective: None,
        ..p.clone()
    };
    let sol = factorization_solve(&q, restarts, seed)?;
    Ok((sol.max_violation <= tol, sol.max_violation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rate_pair, relay_powers, snr_pair};
    use crate::recip::{wsis_objective, wsismin, wsismin_rates};
    use crate::region::convex_hull;

    fn draw(rng: &mut ChaCha8Rng, k: usize) -> Vec<Complex64> {
        (0..k)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect()
    }

    fn reciprocal(k: usize, seed: u64) -> ChannelSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ChannelSet::reciprocal(draw(&mut rng, k), draw(&mut rng, k)).unwrap()
    }

    #[test]
    fn scalar_paths_agree_with_the_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ch = ChannelSet::new(draw(&mut rng, 3), draw(&mut rng, 3), draw(&mut rng, 3), draw(&mut rng, 3)).unwrap();
        let sp = SystemParams::new(1.5, 0.5, vec![1.0, 0.5, 2.0], 0.7, 1.3).unwrap();
        let w = draw(&mut rng, 3);
        let bf = Beamformer::new(w.clone()).unwrap();
        let (a, b) = scalar_snr(&ch, &sp, &w);
        let s = snr_pair(&ch, &sp, &bf).unwrap();
        assert!((a - s.snr1).abs() < 1e-12 * a && (b - s.snr2).abs() < 1e-12 * b);
        let r = rate_pair(&ch, &sp, &bf).unwrap();
        let q = scalar_rates(&ch, &sp, &w);
        assert!((r.r1 - q.r1).abs() < 1e-12 && (r.r2 - q.r2).abs() < 1e-12);
        let p = relay_powers(&ch, &sp, &bf).unwrap();
        for (x, y) in p.iter().zip(scalar_powers(&ch, &sp, &w)) {
            assert!((x - y).abs() < 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn closed_form_optimal_with_unequal_source_powers() {
        let sp = SystemParams::new(0.4, 2.5, vec![1.0, 0.3], 0.7, 1.6).unwrap();
        for seed in 0..6 {
            let ch = reciprocal(2, 40 + seed);
            for budget in [PowerBudget::Sum(4.0), PowerBudget::Individual(vec![0.8, 3.0])] {
                for mu in [0.1, 0.5, 0.85] {
                    let f = wsis_objective(snr_pair(&ch, &sp, &wsismin(&ch, &sp, &budget, mu).unwrap()).unwrap(), mu);
                    let g = best_wsis_grid(&ch, &sp, &budget, mu, 2e-3).unwrap();
                    assert!(f <= g.objective + 1e-12 * f, "closed form {f} above grid {}", g.objective);
                    assert!(g.objective - f <= g.lipschitz_gap + 1e-12, "gap {} > {}", g.objective - f, g.lipschitz_gap);
                }
            }
        }
    }

    #[test]
    fn grid_single_relay_is_exact() {
        let ch = reciprocal(1, 1);
        let sp = SystemParams::uniform(1, 1.0, 1.0).unwrap();
        for budget in [PowerBudget::Sum(10.0), PowerBudget::Individual(vec![3.0])] {
            let g = best_wsis_grid(&ch, &sp, &budget, 0.3, 0.1).unwrap();
            let opt = snr_pair(&ch, &sp, &wsismin(&ch, &sp, &budget, 0.3).unwrap()).unwrap();
            let f = wsis_objective(opt, 0.3);
            assert!((g.objective - f).abs() < 1e-12 * f);
        }
    }

    #[test]
    fn grid_sum_power_brackets_the_closed_form() {
        let ch = reciprocal(2, 2);
        let sp = SystemParams::uniform(2, 1.0, 1.0).unwrap();
        let budget = PowerBudget::Sum(10.0);
        for mu in [0.0, 0.3, 1.0] {
            let g = best_wsis_grid(&ch, &sp, &budget, mu, 1e-4).unwrap();
            let f = wsis_objective(snr_pair(&ch, &sp, &wsismin(&ch, &sp, &budget, mu).unwrap()).unwrap(), mu);
            assert!(g.objective >= f * (1.0 - 1e-12));
            assert!(g.objective - f <= g.lipschitz_gap + 1e-15, "{} {} {}", g.objective, f, g.lipschitz_gap);
            assert!(g.lipschitz_gap < 1e-4 * f);
        }
    }

    #[test]
    fn grid_individual_k3_is_close() {
        let ch = reciprocal(3, 3);
        let sp = SystemParams::uniform(3, 1.0, 1.0).unwrap();
        let budget = PowerBudget::Individual(vec![2.5, 0.5, 3.0]);
        let g = best_wsis_grid(&ch, &sp, &budget, 0.6, 0.01).unwrap();
        let f = wsis_objective(snr_pair(&ch, &sp, &wsismin(&ch, &sp, &budget, 0.6).unwrap()).unwrap(), 0.6);
        assert!(g.objective >= f * (1.0 - 1e-12));
        assert!(g.objective - f <= 1e-3);
        assert!(g.objective - f <= g.lipschitz_gap + 1e-15);
    }

    #[test]
    fn grid_rejects_large_or_nonreciprocal() {
        let sp = SystemParams::uniform(5, 1.0, 1.0).unwrap();
        assert!(matches!(
            best_wsis_grid(&reciprocal(5, 4), &sp, &PowerBudget::Sum(1.0), 0.5, 0.1),
            Err(Error::GridTooLarge { k: 5, .. })
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = ChannelSet::new(draw(&mut rng, 2), draw(&mut rng, 2), draw(&mut rng, 2), draw(&mut rng, 2)).unwrap();
        let sp = SystemParams::uniform(2, 1.0, 1.0).unwrap();
        assert!(best_wsis_grid(&ch, &sp, &PowerBudget::Sum(1.0), 0.5, 0.1).is_err());
    }

    #[test]
    fn cloud_is_feasible_and_seeded() {
        let ch = reciprocal(4, 5);
        let sp = SystemParams::uniform(4, 1.0, 1.0).unwrap();
        let caps = vec![2.5, 3.0, 0.5, 1.0];
        for budget in [PowerBudget::Sum(10.0), PowerBudget::Individual(caps.clone())] {
            for ph in [CloudPhases::Uniform, CloudPhases::Matched] {
                let c = random_beamformer_cloud(&ch, &sp, &budget, 500, 8, ph).unwrap();
                assert_eq!(c.len(), 500);
                for s in &c {
                    let p = scalar_powers(&ch, &sp, s.beamformer.weights().as_slice());
                    match &budget {
                        PowerBudget::Sum(p_r) => assert!(p.iter().sum::<f64>() <= p_r + 1e-9),
                        PowerBudget::Individual(q) => assert!(p.iter().zip(q).all(|(a, b)| *a <= b + 1e-9)),
                    }
                }
                let again = random_beamformer_cloud(&ch, &sp, &budget, 500, 8, ph).unwrap();
                assert!(c.iter().zip(&again).all(|(a, b)| a.rates == b.rates));
            }
        }
    }

    #[test]
    fn wsr_endpoints_match_one_way_optima() {
        let ch = reciprocal(3, 6);
        let sp = SystemParams::uniform(3, 1.0, 1.0).unwrap();
        let budget = PowerBudget::Sum(10.0);
        let hi = weighted_sum_rate_search(&ch, &sp, &budget, 1.0, 8, 1).unwrap();
        let lo = weighted_sum_rate_search(&ch, &sp, &budget, 0.0, 8, 1).unwrap();
        let r1 = wsismin_rates(&ch, &sp, &budget, 1.0).unwrap().r1;
        let r2 = wsismin_rates(&ch, &sp, &budget, 0.0).unwrap().r2;
        assert!((hi.value - r1).abs() < 1e-6, "{} {}", hi.value, r1);
        assert!((lo.value - r2).abs() < 1e-6, "{} {}", lo.value, r2);
    }

    #[test]
    fn wsr_is_monotone_in_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ch = ChannelSet::new(draw(&mut rng, 3), draw(&mut rng, 3), draw(&mut rng, 3), draw(&mut rng, 3)).unwrap();
        let sp = SystemParams::uniform(3, 1.0, 1.0).unwrap();
        let mut prev = 0.0;
        for p_r in [1.0, 3.0, 10.0] {
            let v = weighted_sum_rate_search(&ch, &sp, &PowerBudget::Sum(p_r), 0.4, 6, 2).unwrap().value;
            assert!(v >= prev - 1e-9);
            prev = v;
        }
    }

    #[test]
    fn brute_hull_matches_monotone_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [1usize, 2, 5, 50, 1000] {
            let pts: Vec<RatePair> = (0..n).map(|_| RatePair::new(rng.random(), rng.random())).collect();
            assert_eq!(brute_force_hull(&pts), convex_hull(&pts));
        }
        let line = [RatePair::new(0.0, 2.0), RatePair::new(1.0, 1.0), RatePair::new(2.0, 0.0)];
        assert_eq!(brute_force_hull(&line), vec![line[0], line[2]]);
    }

    fn herm(rng: &mut ChaCha8Rng, k: usize) -> OracleMat {
        let g = OracleMat::from_fn(k, k, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        });
        (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn factorization_solves_known_problems() {
        // min tr X s.t. tr X ≥ 1 (2×2): optimum 1.
        let id = OracleMat::identity(2, 2);
        let p = FactorizedSdp {
            k: 2,
            objective: Some(id.clone()),
            constraints: vec![(id.clone(), 1.0)],
            caps: vec![None, None],
        };
        let s = factorization_solve(&p, 3, 1).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-6 && s.max_violation < 1e-7);

        // min tr X s.t. X_00 + X_11 ≥ 4, X_00 ≤ 1 → objective 4 with X_11 ≥ 3.
        let p = FactorizedSdp {
            caps: vec![Some(1.0), None],
            constraints: vec![(id.clone(), 4.0)],
            ..p
        };
        let s = factorization_solve(&p, 3, 2).unwrap();
        assert!((s.objective - 4.0).abs() < 1e-5);
        assert!(s.x[(0, 0)].re <= 1.0 + 1e-6);

        // Random PSD-objective instance: compare against the minimum
        // eigenvalue form min tr(C X) s.t. tr X ≥ 1 → λ_min(C).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = herm(&mut rng, 3);
        let c = &h * &h + OracleMat::identity(3, 3);
        let lmin = c.clone().symmetric_eigenvalues().min();
        let p = FactorizedSdp {
            k: 3,
            objective: Some(c),
            constraints: vec![(OracleMat::identity(3, 3), 1.0)],
            caps: vec![None; 3],
        };
        let s = factorization_solve(&p, 4, 3).unwrap();
        assert!((s.objective - lmin).abs() < 1e-5 * lmin, "{} {}", s.objective, lmin);
    }

    #[test]
    fn factorization_feasibility_verdicts() {
        let id = OracleMat::identity(2, 2);
        let p = FactorizedSdp {
            k: 2,
            objective: None,
            constraints: vec![(id.clone(), 2.0)],
            caps: vec![Some(1.0), Some(1.0)],
        };
        assert!(factorization_feasible(&p, 3, 1, 1e-6).unwrap().0);
        let q = FactorizedSdp {
            constraints: vec![(id, 2.02)],
            ..p
        };
        let (ok, v) = factorization_feasible(&q, 3, 1, 1e-6).unwrap();
        assert!(!ok && v > 1e-4);
    }
}
