//! Small dense SDP solver for Hermitian matrix variables.
//!
//! Two problem shapes are supported:
//!
//! * `min tr(C X)` subject to `tr(A_i X) ≥ b_i`, optional `X_kk ≤ u_k`, `X ⪰ 0`;
//! * feasibility of the same constraint set, solved as a max-slack problem
//!   `max t` subject to `tr(A_i X) ≥ b_i + t s_i`.
//!
//! Hermitian data is mapped to the real symmetric embedding and handed to a
//! dense primal-dual interior-point method (see [`ipm`]).

mod ipm;

use crate::linalg::{embed, frobenius, hermitian_eigen, is_hermitian, trace_product, unembed, CMat};
use ipm::{ConicProblem, IpmSettings, IpmStatus, Mat, Vector};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("matrix `{0}` is not Hermitian")]
    NotHermitian(String),
    #[error("matrix `{name}` has shape {rows}x{cols}, expected {k}x{k}")]
    Shape {
        name: String,
        rows: usize,
        cols: usize,
        k: usize,
    },
    #[error("dimension {k} exceeds the configured maximum {max}")]
    TooLarge { k: usize, max: usize },
    #[error("non-finite data in `{0}`")]
    NonFinite(String),
    #[error("{0}")]
    Malformed(String),
}

/// `tr(A X) ≥ b`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub a: CMat,
    pub b: f64,
    /// Scale `s_i` of the slack in the feasibility form. Defaults to the
    /// normalization scale.
    pub slack_scale: Option<f64>,
}

impl Constraint {
    pub fn new(a: CMat, b: f64) -> Self {
        Self {
            a,
            b,
            slack_scale: None,
        }
    }

    pub fn with_slack_scale(mut self, s: f64) -> Self {
        self.slack_scale = Some(s);
        self
    }

    /// `max(1, ‖A‖_F, |b|)`
    pub fn norm_scale(&self) -> f64 {
        1f64.max(frobenius(&self.a)).max(self.b.abs())
    }
}

#[derive(Debug, Clone)]
pub enum Objective {
    MinTrace(CMat),
    Feasibility,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    k: usize,
    objective: Objective,
    constraints: Vec<Constraint>,
    caps: Option<Vec<f64>>,
}

impl SdpProblem {
    pub fn min_trace(c: CMat, constraints: Vec<Constraint>, caps: Option<Vec<f64>>) -> Result<Self, SdpError> {
        let k = c.nrows();
        let p = Self {
            k,
            objective: Objective::MinTrace(c),
            constraints,
            caps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn feasibility(k: usize, constraints: Vec<Constraint>, caps: Option<Vec<f64>>) -> Result<Self, SdpError> {
        let p = Self {
            k,
            objective: Objective::Feasibility,
            constraints,
            caps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn objective(&self) -> &Objective {
        &self.objective
    }
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }
    pub fn caps(&self) -> Option<&[f64]> {
        self.caps.as_deref()
    }

    fn validate(&self) -> Result<(), SdpError> {
        let check = |name: String, m: &CMat| -> Result<(), SdpError> {
            if m.nrows() != self.k || m.ncols() != self.k {
                return Err(SdpError::Shape {
                    name,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    k: self.k,
                });
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(SdpError::NonFinite(name));
            }
            if !is_hermitian(m, 1e-12) {
                return Err(SdpError::NotHermitian(name));
            }
            Ok(())
        };
        if self.k == 0 {
            return Err(SdpError::Malformed("dimension must be positive".into()));
        }
        if let Objective::MinTrace(c) = &self.objective {
            check("C".into(), c)?;
        }
        for (i, con) in self.constraints.iter().enumerate() {
            check(format!("A_{i}"), &con.a)?;
            if !con.b.is_finite() {
                return Err(SdpError::NonFinite(format!("b_{i}")));
            }
            if let Some(s) = con.slack_scale {
                if !(s.is_finite() && s > 0.0) {
                    return Err(SdpError::Malformed(format!("slack scale of constraint {i} must be positive")));
                }
            }
        }
        if let Some(u) = &self.caps {
            if u.len() != self.k {
                return Err(SdpError::Malformed(format!("{} caps for dimension {}", u.len(), self.k)));
            }
            if u.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
                return Err(SdpError::Malformed("caps must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Largest normalized violation of the constraints and caps at `x`.
    pub fn max_violation(&self, x: &CMat) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            worst = worst.max((c.b - trace_product(&c.a, x)) / c.norm_scale());
        }
        if let Some(u) = &self.caps {
            for (k, &uk) in u.iter().enumerate() {
                worst = worst.max((x[(k, k)].re - uk) / uk.max(1.0));
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SdpStatus {
    /// Solved to tolerance; for feasibility problems, the constraint set is
    /// feasible.
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: CMat,
    pub status: SdpStatus,
    /// `tr(C X)` for min-trace problems, the max slack `t*` for feasibility.
    /// The slack is bounded above by `max(1, t_lo + 1)`, so large margins
    /// saturate; only its sign is meaningful there.
    pub objective: f64,
    pub max_violation: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SdpSettings {
    pub max_dim: usize,
    pub max_iter: usize,
    /// Feasibility threshold on the max slack.
    pub feasibility_tol: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            max_dim: 64,
            max_iter: 120,
            feasibility_tol: 1e-8,
        }
    }
}

impl SdpSettings {
    fn ipm(&self) -> IpmSettings {
        IpmSettings {
            max_iter: self.max_iter,
            ..IpmSettings::default()
        }
    }
}

pub fn solve_min_trace(p: &SdpProblem) -> Result<SdpSolution, SdpError> {
    solve_min_trace_with(p, &SdpSettings::default())
}

pub fn solve_feasibility(p: &SdpProblem) -> Result<SdpSolution, SdpError> {
    solve_feasibility_with(p, &SdpSettings::default())
}

/// Half of the embedded matrix, so that `<half_embed(A), embed(X)> = tr(A X)`.
fn half_embed(a: &CMat) -> Mat {
    embed(a) * 0.5
}

fn unit_diag(k: usize, i: usize) -> Mat {
    let mut m = Mat::zeros(2 * k, 2 * k);
    m[(i, i)] = 0.5;
    m[(i + k, i + k)] = 0.5;
    m
}

/// Row builder for a conic problem whose LP block is laid out as
/// `[e_1..e_m | c_1..c_K | extra..]`.
struct Rows {
    a_s: Vec<Mat>,
    a_l: Vec<Vector>,
    b: Vec<f64>,
    p: usize,
}

impl Rows {
    fn new(p: usize) -> Self {
        Self {
            a_s: Vec::new(),
            a_l: Vec::new(),
            b: Vec::new(),
            p,
        }
    }

    fn push(&mut self, a_s: Mat, lp: &[(usize, f64)], b: f64, scale: f64) {
        let mut a_l = Vector::zeros(self.p);
        for &(i, v) in lp {
            a_l[i] += v;
        }
        self.a_s.push(a_s / scale);
        self.a_l.push(a_l / scale);
        self.b.push(b / scale);
    }

    fn into_problem(self, c_s: Mat, c_l: Vector) -> ConicProblem {
        ConicProblem {
            c_s,
            c_l,
            a_s: self.a_s,
            a_l: self.a_l,
            b: Vector::from_vec(self.b),
        }
    }
}

fn check_dim(p: &SdpProblem, s: &SdpSettings) -> Result<(), SdpError> {
    if p.k > s.max_dim {
        return Err(SdpError::TooLarge { k: p.k, max: s.max_dim });
    }
    Ok(())
}

fn finish(p: &SdpProblem, x: CMat, status: SdpStatus, objective: f64, gap: f64, iterations: usize) -> SdpSolution {
    // Clip round-off negative eigenvalues; the embedding average is PSD up
    // to the solver's accuracy already.
    let x = psd_clip(&x);
    let max_violation = p.max_violation(&x).max(0.0);
    SdpSolution {
        x,
        status,
        objective,
        max_violation,
        duality_gap: gap,
        iterations,
    }
}

fn psd_clip(x: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(x);
    if vals.iter().all(|&v| v >= 0.0) {
        return (x + x.adjoint()) * num_complex::Complex64::new(0.5, 0.0);
    }
    let k = x.nrows();
    let mut out = CMat::zeros(k, k);
    for (i, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let col = vecs.column(i);
            out += col * col.adjoint() * num_complex::Complex64::new(v, 0.0);
        }
    }
    out
}

pub fn solve_min_trace_with(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
    check_dim(p, settings)?;
    let Objective::MinTrace(c) = &p.objective else {
        return Err(SdpError::Malformed("solve_min_trace needs an objective matrix".into()));
    };
    let k = p.k;

    let trivially_zero = p.constraints.iter().all(|con| con.b <= 0.0) && hermitian_eigen(c).0[k - 1] >= 0.0;
    if trivially_zero {
        return Ok(finish(p, CMat::zeros(k, k), SdpStatus::Optimal, 0.0, 0.0, 0));
    }

    let m = p.constraints.len();
    let caps = p.caps.as_deref().unwrap_or(&[]);
    let n_lp = m + caps.len();
    let mut rows = Rows::new(n_lp);
    for (i, con) in p.constraints.iter().enumerate() {
        rows.push(half_embed(&con.a), &[(i, -1.0)], con.b, con.norm_scale());
    }
    for (kk, &u) in caps.iter().enumerate() {
        rows.push(unit_diag(k, kk), &[(m + kk, 1.0)], u, u.max(1.0));
    }
    let c_scale = frobenius(c).max(1.0);
    let conic = rows.into_problem(half_embed(c) / c_scale, Vector::zeros(n_lp));
    let res = ipm::solve(&conic, &settings.ipm());
    log::debug!(
        "min-trace ipm: status {:?}, {} iterations, gap {:.2e}, pinf {:.2e}, dinf {:.2e}",
        res.status,
        res.iterations,
        res.rel_gap,
        res.pinf,
        res.dinf
    );
    if res.status == IpmStatus::Optimal {
        debug_assert!(res.pobj >= res.dobj - 1e-6 * (1.0 + res.pobj.abs()));
        let x = unembed(&res.x_s);
        let obj = trace_product(c, &x);
        return Ok(finish(p, x, SdpStatus::Optimal, obj, res.rel_gap, res.iterations));
    }

    let strictly_feasible = phase_one(p, settings);
    let status = if strictly_feasible {
        SdpStatus::MaxIter
    } else {
        SdpStatus::Infeasible
    };
    let x = unembed(&res.x_s);
    let obj = trace_product(c, &x);
    Ok(finish(p, x, status, obj, res.rel_gap, res.iterations))
}

/// Homogeneous check for a strictly feasible point:
/// `max t` s.t. `tr(A_i X) − b_i τ ≥ t s_i`, `X_kk ≤ u_k τ`, `tr X + τ ≤ 1`,
/// `−1 ≤ t ≤ 1`. A positive optimum exhibits a strictly feasible point.
fn phase_one(p: &SdpProblem, settings: &SdpSettings) -> bool {
    let k = p.k;
    let m = p.constraints.len();
    let caps = p.caps.as_deref().unwrap_or(&[]);
    // LP block: [e (m) | c (K) | τ | t' | ω_norm | ω_t]
    let (tau, tp, wn, wt) = (m + caps.len(), m + caps.len() + 1, m + caps.len() + 2, m + caps.len() + 3);
    let n_lp = wt + 1;
    let mut rows = Rows::new(n_lp);
    for (i, con) in p.constraints.iter().enumerate() {
        let s = con.norm_scale();
        // t = t' − 1
        rows.push(half_embed(&con.a), &[(i, -1.0), (tau, -con.b), (tp, -s)], -s, s);
    }
    for (kk, &u) in caps.iter().enumerate() {
        rows.push(unit_diag(k, kk), &[(m + kk, 1.0), (tau, -u)], 0.0, u.max(1.0));
    }
    rows.push(Mat::identity(2 * k, 2 * k) * 0.5, &[(tau, 1.0), (wn, 1.0)], 1.0, 1.0);
    rows.push(Mat::zeros(2 * k, 2 * k), &[(tp, 1.0), (wt, 1.0)], 2.0, 1.0);
    let mut c_l = Vector::zeros(n_lp);
    c_l[tp] = -1.0;
    let res = ipm::solve(&rows.into_problem(Mat::zeros(2 * k, 2 * k), c_l), &settings.ipm());
    let t = res.x_l[tp] - 1.0;
    log::debug!("phase one: status {:?}, t* = {t:.3e}", res.status);
    t > 1e-9
}

pub fn solve_feasibility_with(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
    check_dim(p, settings)?;
    let k = p.k;
    let m = p.constraints.len();
    let caps = p.caps.as_deref().unwrap_or(&[]);
    let scales: Vec<f64> = p
        .constraints
        .iter()
        .map(|c| c.slack_scale.unwrap_or_else(|| c.norm_scale()))
        .collect();

    if m == 0 {
        return Ok(finish(p, CMat::zeros(k, k), SdpStatus::Optimal, f64::INFINITY, 0.0, 0));
    }

    // X = 0 satisfies every row at t_lo with unit margin.
    let t_lo = p
        .constraints
        .iter()
        .zip(&scales)
        .map(|(c, s)| -c.b / s)
        .fold(f64::INFINITY, f64::min)
        - 1.0;
    let t_hi = 1f64.max(t_lo + 1.0);

    // LP block: [e (m) | c (K) | τ | ω], t = t_lo + τ.
    let (tau, w) = (m + caps.len(), m + caps.len() + 1);
    let n_lp = w + 1;
    let mut rows = Rows::new(n_lp);
    for (i, con) in p.constraints.iter().enumerate() {
        rows.push(
            half_embed(&con.a),
            &[(i, -1.0), (tau, -scales[i])],
            con.b + scales[i] * t_lo,
            con.norm_scale().max(scales[i]),
        );
    }
    for (kk, &u) in caps.iter().enumerate() {
        rows.push(unit_diag(k, kk), &[(m + kk, 1.0)], u, u.max(1.0));
    }
    rows.push(Mat::zeros(2 * k, 2 * k), &[(tau, 1.0), (w, 1.0)], t_hi - t_lo, 1f64.max(t_hi - t_lo));
    let mut c_l = Vector::zeros(n_lp);
    c_l[tau] = -1.0;
    // Without caps X is only bounded through a tiny trace penalty.
    let c_s = if caps.is_empty() {
        Mat::identity(2 * k, 2 * k) * 1e-10
    } else {
        Mat::zeros(2 * k, 2 * k)
    };
    let res = ipm::solve(&rows.into_problem(c_s, c_l), &settings.ipm());
    let t = t_lo + res.x_l[tau];
    log::debug!(
        "feasibility ipm: status {:?}, {} iterations, t* = {t:.3e}",
        res.status,
        res.iterations
    );
    let x = unembed(&res.x_s);
    let status = if t >= -settings.feasibility_tol {
        if res.status == IpmStatus::Optimal {
            SdpStatus::Optimal
        } else {
            // An unconverged iterate that already clears every row is still a
            // certificate of feasibility.
            let v = p.max_violation(&psd_clip(&x));
            if v <= settings.feasibility_tol {
                SdpStatus::Optimal
            } else {
                SdpStatus::MaxIter
            }
        }
    } else if res.status == IpmStatus::Optimal {
        SdpStatus::Infeasible
    } else {
        SdpStatus::MaxIter
    };
    Ok(finish(p, x, status, t, res.rel_gap, res.iterations))
}
