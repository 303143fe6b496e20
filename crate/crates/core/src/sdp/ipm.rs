//! Infeasible-start primal-dual path-following method for dense conic
//! problems over one real PSD block and one nonnegative orthant:
//!
//! ```text
//! min  <C, X> + cᵀx
//! s.t. <A_j, X> + a_jᵀx = b_j,   j = 1..m
//!      X ⪰ 0,  x ≥ 0
//! ```
//!
//! Search directions use the HKM scaling with a Mehrotra predictor-corrector
//! step. Everything is dense; the intended sizes are a few dozen rows.

use nalgebra::{DMatrix, DVector};

pub(crate) type Mat = DMatrix<f64>;
pub(crate) type Vector = DVector<f64>;

pub(crate) struct ConicProblem {
    pub c_s: Mat,
    pub c_l: Vector,
    pub a_s: Vec<Mat>,
    pub a_l: Vec<Vector>,
    pub b: Vector,
}

impl ConicProblem {
    fn n(&self) -> usize {
        self.c_s.nrows()
    }
    fn p(&self) -> usize {
        self.c_l.len()
    }
    fn m(&self) -> usize {
        self.b.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iter: usize,
    /// Relative gap and infeasibility targets.
    pub target_tol: f64,
    /// Looser bounds accepted when progress stalls before reaching the
    /// target.
    pub accept_gap: f64,
    pub accept_feas: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iter: 120,
            target_tol: 1e-10,
            accept_gap: 1e-8,
            accept_feas: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    MaxIter,
    /// Dual objective ran away while the primal residual stayed put: the
    /// primal is very likely infeasible.
    Diverged,
    NumericalFailure,
}

pub(crate) struct IpmResult {
    pub x_s: Mat,
    pub x_l: Vector,
    pub pobj: f64,
    pub dobj: f64,
    pub rel_gap: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub iterations: usize,
    pub status: IpmStatus,
}

fn inner(a: &Mat, b: &Mat) -> f64 {
    a.component_mul(b).sum()
}

fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Largest step `α` keeping `X + αΔX ⪰ 0`, given the Cholesky factor of `X`.
fn max_step_psd(l: &Mat, dx: &Mat) -> f64 {
    if dx.nrows() == 0 {
        return f64::INFINITY;
    }
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(s) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let lmin = sym(&s).symmetric_eigenvalues().min();
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn max_step_lp(x: &Vector, dx: &Vector) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dx_s: Mat,
    dx_l: Vector,
    dy: Vector,
    dz_s: Mat,
    dz_l: Vector,
}

pub(crate) fn solve(prob: &ConicProblem, settings: &IpmSettings) -> IpmResult {
    let (n, p, m) = (prob.n(), prob.p(), prob.m());
    let dim = (n + p) as f64;

    let norm_c = (prob.c_s.norm_squared() + prob.c_l.norm_squared()).sqrt();
    let norm_b = prob.b.norm();
    let row_norm = |j: usize| (prob.a_s[j].norm_squared() + prob.a_l[j].norm_squared()).sqrt();

    let mut xi = 10f64.max((n as f64).sqrt());
    let mut zeta = xi.max(norm_c);
    for j in 0..m {
        xi = xi.max(dim * (1.0 + prob.b[j].abs()) / (1.0 + row_norm(j)));
        zeta = zeta.max(row_norm(j));
    }
    let mut x_s = Mat::identity(n, n) * xi;
    let mut x_l = Vector::from_element(p, xi);
    let mut z_s = Mat::identity(n, n) * zeta;
    let mut z_l = Vector::from_element(p, zeta);
    let mut y = Vector::zeros(m);

    let apply_a = |xs: &Mat, xl: &Vector| -> Vector {
        Vector::from_fn(m, |j, _| inner(&prob.a_s[j], xs) + prob.a_l[j].dot(xl))
    };
    let apply_at_s = |v: &Vector| -> Mat {
        let mut out = Mat::zeros(n, n);
        for j in 0..m {
            out += &prob.a_s[j] * v[j];
        }
        out
    };
    let apply_at_l = |v: &Vector| -> Vector {
        let mut out = Vector::zeros(p);
        for j in 0..m {
            out += &prob.a_l[j] * v[j];
        }
        out
    };

    let mut status;
    let mut iterations = 0;
    let mut stalls = 0;
    let (mut pobj, mut dobj, mut rel_gap, mut pinf, mut dinf);

    loop {
        let rp = &prob.b - apply_a(&x_s, &x_l);
        let rd_s = &prob.c_s - apply_at_s(&y) - &z_s;
        let rd_l = &prob.c_l - apply_at_l(&y) - &z_l;
        pobj = inner(&prob.c_s, &x_s) + prob.c_l.dot(&x_l);
        dobj = prob.b.dot(&y);
        rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        pinf = rp.norm() / (1.0 + norm_b);
        dinf = (rd_s.norm_squared() + rd_l.norm_squared()).sqrt() / (1.0 + norm_c);

        if rel_gap < settings.target_tol && pinf < settings.target_tol && dinf < settings.target_tol {
            status = IpmStatus::Optimal;
            break;
        }
        if iterations >= settings.max_iter || stalls >= 3 {
            status = IpmStatus::MaxIter;
            break;
        }
        if dobj > 1e10 * (1.0 + norm_c) && pinf > 1e-6 {
            status = IpmStatus::Diverged;
            break;
        }
        iterations += 1;

        let mu = (inner(&x_s, &z_s) + x_l.dot(&z_l)) / dim;

        let Some(chol_x) = x_s.clone().cholesky() else {
            status = IpmStatus::NumericalFailure;
            break;
        };
        let Some(chol_z) = z_s.clone().cholesky() else {
            status = IpmStatus::NumericalFailure;
            break;
        };
        let l_x = chol_x.l();
        let l_z = chol_z.l();
        let z_inv = chol_z.inverse();

        // Schur complement M_ij = <A_i, X A_j Z⁻¹> + Σ a_i a_j x/z.
        let ratio = x_l.component_div(&z_l);
        let g: Vec<Mat> = (0..m).map(|j| &x_s * &prob.a_s[j] * &z_inv).collect();
        let mut schur = Mat::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut v = prob.a_s[i].component_mul(&g[j].transpose()).sum();
                v += prob.a_l[i].component_mul(&prob.a_l[j]).dot(&ratio);
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let Some(schur_chol) = factor_schur(&schur) else {
            status = IpmStatus::NumericalFailure;
            break;
        };

        let direction = |rc_s: &Mat, rc_l: &Vector| -> Direction {
            let t = (rc_s - &x_s * &rd_s) * &z_inv;
            let t_l = (rc_l - x_l.component_mul(&rd_l)).component_div(&z_l);
            let rhs = &rp - apply_a(&t, &t_l);
            let dy = schur_chol.solve(&rhs);
            let dz_s = &rd_s - apply_at_s(&dy);
            let dz_l = &rd_l - apply_at_l(&dy);
            let dx_s = sym(&((rc_s - &x_s * &dz_s) * &z_inv));
            let dx_l = (rc_l - x_l.component_mul(&dz_l)).component_div(&z_l);
            Direction {
                dx_s,
                dx_l,
                dy,
                dz_s,
                dz_l,
            }
        };
        let steps = |d: &Direction| -> (f64, f64) {
            let ap = max_step_psd(&l_x, &d.dx_s).min(max_step_lp(&x_l, &d.dx_l));
            let ad = max_step_psd(&l_z, &d.dz_s).min(max_step_lp(&z_l, &d.dz_l));
            (ap, ad)
        };

        // Predictor.
        let xz = &x_s * &z_s;
        let aff = direction(&(-&xz), &(-x_l.component_mul(&z_l)));
        let (ap, ad) = steps(&aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff = (inner(&(&x_s + &aff.dx_s * ap), &(&z_s + &aff.dz_s * ad))
            + (&x_l + &aff.dx_l * ap).dot(&(&z_l + &aff.dz_l * ad)))
            / dim;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let rc_s = Mat::identity(n, n) * (sigma * mu) - &xz - &aff.dx_s * &aff.dz_s;
        let rc_l = Vector::from_element(p, sigma * mu)
            - x_l.component_mul(&z_l)
            - aff.dx_l.component_mul(&aff.dz_l);
        let d = direction(&rc_s, &rc_l);
        let (ap, ad) = steps(&d);
        let frac = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let (ap, ad) = ((frac * ap).min(1.0), (frac * ad).min(1.0));
        if ap.max(ad) < 1e-10 {
            stalls += 1;
        }

        x_s += &d.dx_s * ap;
        x_l += &d.dx_l * ap;
        y += &d.dy * ad;
        z_s += &d.dz_s * ad;
        z_l += &d.dz_l * ad;
        x_s = sym(&x_s);
        z_s = sym(&z_s);
    }

    if status != IpmStatus::Optimal
        && rel_gap < settings.accept_gap
        && pinf < settings.accept_feas
        && dinf < settings.accept_feas
    {
        status = IpmStatus::Optimal;
    }

    IpmResult {
        x_s,
        x_l,
        pobj,
        dobj,
        rel_gap,
        pinf,
        dinf,
        iterations,
        status,
    }
}

/// Cholesky factor of the Schur complement. Duplicate or dependent
/// constraints make it singular; a growing diagonal shift keeps the solve
/// well defined since the right-hand side stays in its range.
fn factor_schur(m: &Mat) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Some(c);
    }
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut shift = 1e-14 * scale;
    while shift <= 1e-6 * scale {
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += shift;
        }
        if let Some(c) = shifted.cholesky() {
            return Some(c);
        }
        shift *= 10.0;
    }
    None
}
