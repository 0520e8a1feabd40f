//! Bounded Levenberg-Marquardt for small nonlinear least-squares problems.
//!
//! Bounds are enforced by projecting every trial point onto the box; the
//! gain ratio uses the projected step so the trust-region logic stays
//! consistent at active bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Relative cost decrease below which an accepted step ends the run.
    pub ftol: f64,
    /// Relative step size below which the run ends.
    pub xtol: f64,
    /// Infinity norm of the projected gradient below which the run ends.
    pub gtol: f64,
    /// Forward-difference step relative to the parameter magnitude.
    pub fd_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { max_iterations: 200, ftol: 1e-14, xtol: 1e-12, gtol: 1e-14, fd_step: 1e-4 }
    }
}

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmTermination {
    /// Gradient, step or cost change fell below tolerance.
    Converged,
    /// Cost reached zero to machine precision.
    ExactFit,
    MaxIterations,
}

/// Result of a solver run.
#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub residuals: DVector<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    /// Jacobian at `params`.
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub termination: LmTermination,
}

impl LmOutcome {
    /// Singular values of the Jacobian, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.jacobian.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s
    }

    /// True when J^T J is numerically rank deficient.
    pub fn is_singular(&self) -> bool {
        let n = self.params.len();
        let s = self.singular_values();
        if s.len() < n {
            return true;
        }
        let smax = s.first().copied().unwrap_or(0.0);
        smax == 0.0 || s[n - 1] <= 1e-8 * smax
    }

    /// (J^T J)^-1, when it exists.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        if self.is_singular() {
            return None;
        }
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let inv = jtj.try_inverse()?;
        Some((&inv + inv.transpose()) * 0.5)
    }
}

/// Box constraints; use infinities for open sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; n], upper: vec![f64::INFINITY; n] }
    }

    pub fn project(&self, p: &mut [f64]) {
        for (k, v) in p.iter_mut().enumerate() {
            *v = v.clamp(self.lower[k], self.upper[k]);
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().enumerate().all(|(k, v)| *v >= self.lower[k] && *v <= self.upper[k])
    }
}

/// Forward-difference Jacobian with a relative step.
///
/// Steps backwards when the forward point would leave the box.
pub fn numeric_jacobian<F>(f: &F, p: &[f64], r0: &DVector<f64>, bounds: &Bounds, rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
{
    let m = r0.len();
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    for k in 0..n {
        let width = bounds.upper[k] - bounds.lower[k];
        let typical = if width.is_finite() { 1e-3 * width } else { 1.0 };
        let mut h = rel_step * p[k].abs().max(typical);
        if p[k] + h > bounds.upper[k] {
            h = -h;
        }
        q[k] = p[k] + h;
        let r = f(&q)?;
        q[k] = p[k];
        let step = (p[k] + h) - p[k];
        jac.set_column(k, &((r - r0) / step));
    }
    Ok(jac)
}

/// Minimizes `sum r_i(p)^2` starting from `p0`.
///
/// `jac` supplies an analytic Jacobian; when `None` forward differences with
/// `config.fd_step` are used.
pub fn levenberg_marquardt<F, J>(
    f: F,
    jac: Option<J>,
    p0: &[f64],
    bounds: &Bounds,
    config: &LmConfig,
) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
    J: Fn(&[f64]) -> Result<DMatrix<f64>>,
{
    let n = p0.len();
    if bounds.lower.len() != n || bounds.upper.len() != n {
        return Err(Error::Shape(format!("bounds have {} entries for {n} parameters", bounds.lower.len())));
    }
    let mut p = p0.to_vec();
    bounds.project(&mut p);
    let jacobian = |p: &[f64], r: &DVector<f64>| -> Result<DMatrix<f64>> {
        match &jac {
            Some(j) => j(p),
            None => numeric_jacobian(&f, p, r, bounds, config.fd_step),
        }
    };
    let mut r = f(&p)?;
    check_finite(&r)?;
    let mut cost = r.norm_squared();
    let mut jm = jacobian(&p, &r)?;
    let mut lambda: Option<f64> = None;
    let mut nu = 2.0;
    let mut termination = LmTermination::MaxIterations;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        if cost == 0.0 || cost < 1e-30 {
            termination = LmTermination::ExactFit;
            break;
        }
        iterations += 1;
        let jtj = jm.transpose() * &jm;
        let grad = jm.transpose() * &r;
        if projected_gradient_norm(&p, &grad, bounds) <= config.gtol * (1.0 + cost) {
            termination = LmTermination::Converged;
            break;
        }
        let max_diag = (0..n).map(|k| jtj[(k, k)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let lam = *lambda.get_or_insert(1e-3 * max_diag);
        let mut a = jtj.clone();
        for k in 0..n {
            a[(k, k)] += lam * jtj[(k, k)].max(1e-12 * max_diag);
        }
        let step = match a.cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => {
                lambda = Some(lam * nu);
                nu *= 2.0;
                continue;
            }
        };
        let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        bounds.project(&mut trial);
        let actual_step = DVector::from_iterator(n, trial.iter().zip(&p).map(|(a, b)| a - b));
        let step_norm = actual_step.norm();
        let p_norm = DVector::from_column_slice(&p).norm();
        if step_norm <= config.xtol * (p_norm + config.xtol) {
            termination = LmTermination::Converged;
            break;
        }
        let predicted = cost - (&r + &jm * &actual_step).norm_squared();
        let r_trial = match f(&trial) {
            Ok(v) if v.iter().all(|x| x.is_finite()) => Some(v),
            _ => None,
        };
        let accepted = match r_trial {
            Some(r_new) => {
                let cost_new = r_new.norm_squared();
                let rho = if predicted > 0.0 { (cost - cost_new) / predicted } else { -1.0 };
                if cost_new < cost && rho > 0.0 {
                    let rel = (cost - cost_new) / cost;
                    p = trial;
                    r = r_new;
                    cost = cost_new;
                    jm = jacobian(&p, &r)?;
                    lambda = Some(lam * (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3)));
                    nu = 2.0;
                    if rel <= config.ftol {
                        termination = LmTermination::Converged;
                        break;
                    }
                    true
                } else {
                    false
                }
            }
            None => false,
        };
        if !accepted {
            lambda = Some(lam * nu);
            nu *= 2.0;
            if lam * nu > 1e30 * max_diag.max(1.0) {
                termination = LmTermination::Converged;
                break;
            }
        }
    }
    Ok(LmOutcome { params: p, residuals: r, cost, jacobian: jm, iterations, termination })
}

fn check_finite(r: &DVector<f64>) -> Result<()> {
    if r.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("residuals are not finite at the initial point".into()))
    }
}

fn projected_gradient_norm(p: &[f64], grad: &DVector<f64>, bounds: &Bounds) -> f64 {
    p.iter()
        .enumerate()
        .map(|(k, &v)| {
            let g = grad[k];
            // a descent direction blocked by an active bound does not count
            if (v <= bounds.lower[k] && g > 0.0) || (v >= bounds.upper[k] && g < 0.0) {
                0.0
            } else {
                g.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Type helper for callers without an analytic Jacobian.
pub type NoJacobian = fn(&[f64]) -> Result<DMatrix<f64>>;
