//! Bounded Levenberg–Marquardt least squares with parameter covariance.
//!
//! Residuals are expected to be pre-weighted (r_i = (y_i − f_i)/σ_i), so the
//! returned covariance (JᵀJ)⁻¹ is in parameter units without rescaling by the
//! reduced chi-square.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy)]
pub struct LmOptions<T> {
    pub max_iter: usize,
    /// Relative reduction of the cost below which the fit has converged.
    pub ftol: T,
    /// Relative step size below which the fit has converged.
    pub xtol: T,
    /// Infinity norm of the scaled gradient below which the fit has converged.
    pub gtol: T,
}

impl<T: Real> Default for LmOptions<T> {
    fn default() -> Self {
        let eps = T::default_epsilon();
        Self {
            max_iter: 200,
            ftol: eps * T::of(1e3),
            xtol: eps.sqrt() * T::of(1e-2),
            gtol: eps * T::of(1e2),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmFit<T: Real> {
    pub params: Vec<T>,
    pub covariance: DMatrix<T>,
    /// Σ r_i² at the solution.
    pub chi2: T,
    pub n_resid: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> LmFit<T> {
    pub fn dof(&self) -> usize {
        self.n_resid.saturating_sub(self.params.len())
    }

    pub fn reduced_chi2(&self) -> T {
        let dof = self.dof().max(1);
        self.chi2 / T::from_usize_lossy(dof)
    }

    pub fn sigma(&self, i: usize) -> T {
        self.covariance[(i, i)].max(T::zero()).sqrt()
    }
}

fn clamp<T: Real>(p: &mut [T], bounds: Option<&[(T, T)]>) {
    if let Some(b) = bounds {
        for (x, &(lo, hi)) in p.iter_mut().zip(b) {
            *x = x.clamp(lo, hi);
        }
    }
}

fn sum_sq<T: Real>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// Central-difference Jacobian; steps stay inside the bounds.
fn jacobian<T: Real, F>(f: &F, p: &[T], typical: &[T], n_resid: usize, bounds: Option<&[(T, T)]>) -> DMatrix<T>
where
    F: Fn(&[T], &mut [T]),
{
    let np = p.len();
    let mut jac = DMatrix::zeros(n_resid, np);
    let step_scale = T::default_epsilon().powf(T::of(1.0 / 3.0));
    let mut hi = vec![T::zero(); n_resid];
    let mut lo = vec![T::zero(); n_resid];
    let mut q = p.to_vec();
    for j in 0..np {
        let h = step_scale * p[j].abs().max(typical[j]);
        let (mut up, mut down) = (p[j] + h, p[j] - h);
        if let Some(b) = bounds {
            up = up.min(b[j].1);
            down = down.max(b[j].0);
        }
        q[j] = up;
        f(&q, &mut hi);
        q[j] = down;
        f(&q, &mut lo);
        q[j] = p[j];
        let span = up - down;
        if span <= T::zero() {
            continue;
        }
        for i in 0..n_resid {
            jac[(i, j)] = (hi[i] - lo[i]) / span;
        }
    }
    jac
}

/// Inverse of a symmetric positive semidefinite matrix; falls back to the
/// pseudo-inverse when Cholesky fails.
pub fn spd_inverse<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    if let Some(ch) = a.clone().cholesky() {
        return ch.inverse();
    }
    let n = a.nrows();
    a.clone()
        .svd(true, true)
        .pseudo_inverse(T::default_epsilon() * T::from_usize_lossy(n) * a.amax())
        .unwrap_or_else(|_| DMatrix::from_element(n, n, T::from_f64(f64::NAN).unwrap()))
}

/// Minimizes ½Σ r_i(p)² from `p0`, projecting every trial point onto the box
/// `bounds`.
///
/// `f` fills a residual slice of length `n_resid`. Fails when the starting
/// residuals are not finite or the iteration budget runs out.
pub fn levenberg_marquardt<T: Real, F>(
    f: F,
    n_resid: usize,
    p0: &[T],
    bounds: Option<&[(T, T)]>,
    opts: &LmOptions<T>,
) -> Result<LmFit<T>>
where
    F: Fn(&[T], &mut [T]),
{
    let np = p0.len();
    if n_resid < np {
        return Err(Error::Fit {
            target: "least squares".into(),
            reason: format!("{n_resid} residuals for {np} parameters"),
        });
    }
    if let Some(b) = bounds {
        if b.len() != np || b.iter().any(|&(lo, hi)| lo > hi) {
            return Err(Error::domain("levenberg_marquardt", "bounds do not match parameters"));
        }
    }
    let mut p = p0.to_vec();
    clamp(&mut p, bounds);
    let mut r = vec![T::zero(); n_resid];
    f(&p, &mut r);
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::Fit {
            target: "least squares".into(),
            reason: "non-finite residuals at the starting point".into(),
        });
    }

    let mut lambda = T::of(1e-3);
    let mut diag = DVector::<T>::zeros(np);
    let mut trial = vec![T::zero(); np];
    let mut r_trial = vec![T::zero(); n_resid];
    let mut converged = false;
    let mut iterations = 0;
    // Difference-step scale for parameters that start at zero.
    let typical: Vec<T> = p0
        .iter()
        .map(|&x| if x != T::zero() { x.abs() } else { T::one() })
        .collect();
    let mut jac = jacobian(&f, &p, &typical, n_resid, bounds);

    'outer: while iterations < opts.max_iter {
        iterations += 1;
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.tr_mul(&jac);
        let g = jac.tr_mul(&rv);
        for j in 0..np {
            diag[j] = diag[j].max(jtj[(j, j)]);
        }
        let gnorm = (0..np).fold(T::zero(), |m, j| {
            let s = diag[j].sqrt().max(T::tiny());
            m.max((g[j] / s).abs())
        });
        if gnorm <= opts.gtol * cost.sqrt().max(T::one()) {
            converged = true;
            break;
        }

        loop {
            let mut a = jtj.clone();
            for j in 0..np {
                a[(j, j)] += lambda * diag[j].max(T::tiny());
            }
            let Some(ch) = a.cholesky() else {
                lambda *= T::of(10.0);
                if lambda > T::of(1e16) {
                    break 'outer;
                }
                continue;
            };
            let delta = ch.solve(&(-&g));
            for j in 0..np {
                trial[j] = p[j] + delta[j];
            }
            clamp(&mut trial, bounds);
            f(&trial, &mut r_trial);
            let new_cost = sum_sq(&r_trial);
            if new_cost.is_finite() && new_cost <= cost {
                let step = (0..np).fold(T::zero(), |acc, j| acc + (trial[j] - p[j]).sq()).sqrt();
                let pnorm = p.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
                let rel_drop = (cost - new_cost) / cost.max(T::tiny());
                p.copy_from_slice(&trial);
                r.copy_from_slice(&r_trial);
                cost = new_cost;
                lambda = (lambda * T::of(0.2)).max(T::of(1e-12));
                jac = jacobian(&f, &p, &typical, n_resid, bounds);
                if rel_drop <= opts.ftol || step <= opts.xtol * (pnorm + opts.xtol) || cost == T::zero() {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= T::of(10.0);
            if lambda > T::of(1e16) {
                // No downhill step exists at machine precision.
                converged = true;
                break 'outer;
            }
        }
    }

    if !converged {
        return Err(Error::Fit {
            target: "least squares".into(),
            reason: format!("no convergence after {iterations} iterations, chi2 = {cost}"),
        });
    }
    let covariance = spd_inverse(&jac.tr_mul(&jac));
    Ok(LmFit {
        params: p,
        covariance,
        chi2: cost,
        n_resid,
        iterations,
        converged,
    })
}
