use nalgebra::DVector;

use super::density::DensityOperator;
use super::liouvillian::Liouvillian;
use crate::error::{Error, Result};
use crate::C64;

/// Relative size below which a generator eigenvalue counts as zero.
const NULL_TOLERANCE: f64 = 1e-9;

/// Steady state of `l`, after checking that the null space is one-dimensional.
///
/// The null-space dimension is read off the full generator spectrum. The
/// state itself is obtained by replacing the (0,0) population equation with
/// the trace condition and solving the resulting linear system, followed by
/// one round of iterative refinement.
pub fn steady_state(l: &Liouvillian) -> Result<DensityOperator> {
    let scale = l.scale().max(1.0);
    let dim = l.eigenvalues()?.iter().filter(|z| z.norm() <= NULL_TOLERANCE * scale).count();
    if dim != 1 {
        return Err(Error::NonUniqueSteadyState { dim });
    }
    solve_trace_constrained(l)
}

/// [`steady_state`] followed by the density-operator checks and a residual
/// check at `tol`.
pub fn steady_state_checked(l: &Liouvillian, tol: f64) -> Result<DensityOperator> {
    let rho = steady_state(l)?;
    rho.validate(1e-10, 1e-8)?;
    let res = l.residual(&rho);
    if res > tol {
        return Err(Error::Numerical(format!("steady-state residual {res:.3e} exceeds {tol:.1e}")));
    }
    Ok(rho)
}

fn solve_trace_constrained(l: &Liouvillian) -> Result<DensityOperator> {
    let d = l.hilbert_dim();
    let n = d * d;
    let mut a = l.generator().clone();
    for col in 0..n {
        a[(0, col)] = C64::new(0.0, 0.0);
    }
    for k in 0..d {
        a[(0, k * d + k)] = C64::new(1.0, 0.0);
    }
    let mut b = DVector::zeros(n);
    b[0] = C64::new(1.0, 0.0);
    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(Error::NonUniqueSteadyState { dim: 2 })?;
    let r = &a * &x - &b;
    if let Some(dx) = lu.solve(&r) {
        x -= dx;
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("steady-state solve produced non-finite values".into()));
    }
    let raw = DensityOperator::from_vector(&x).into_matrix();
    let herm = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);
    let tr = herm.trace().re;
    Ok(DensityOperator::from_matrix_unchecked(herm / C64::new(tr, 0.0)))
}
