use super::density::DensityOperator;
use super::liouvillian::Liouvillian;
use super::operators::lowering;
use super::propagate::{evolve_vector, Propagation};
use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::units::mhz_to_angular;
use crate::{CMatrix, C64};

/// Sideband detection operators: collapse operators sqrt(k) sigma_i and
/// intensity operators k sigma_i^dag sigma_i with k = (1 - alpha) Gamma0 in
/// rad/ns. ZPL photons are filtered out and never reach the detector.
pub fn detection_operators(model: &SystemModel) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let n = model.n_emitters();
    let k = mhz_to_angular(model.sideband_rate_mhz());
    let collapse: Vec<CMatrix> = (0..n).map(|i| lowering(n, i) * C64::new(k.sqrt(), 0.0)).collect();
    let measure = collapse.iter().map(|c| c.adjoint() * c).collect();
    (collapse, measure)
}

/// Unnormalized two-time intensity correlation via the quantum regression
/// theorem:
///
/// G2(tau) = sum_{i,j} Tr[m_j exp(L tau)(c_i rho_ss c_i^dag)]
///
/// `taus_ns` must be sorted and nonnegative.
pub fn regression_correlation(
    l: &Liouvillian,
    rho_ss: &DensityOperator,
    collapse_ops: &[CMatrix],
    measure_ops: &[CMatrix],
    taus_ns: &[f64],
) -> Result<Vec<f64>> {
    let d = l.hilbert_dim();
    if rho_ss.dim() != d {
        return Err(Error::Shape(format!("state has dimension {}, generator expects {d}", rho_ss.dim())));
    }
    for op in collapse_ops.iter().chain(measure_ops) {
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::Shape(format!("operator is {}x{}, expected {d}x{d}", op.nrows(), op.ncols())));
        }
    }
    let rho = rho_ss.matrix();
    let mut conditioned = CMatrix::zeros(d, d);
    for c in collapse_ops {
        conditioned += c * rho * c.adjoint();
    }
    let measure: CMatrix = measure_ops.iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m);
    let v0 = DensityOperator::from_matrix_unchecked(conditioned).to_vector();
    let evolved = evolve_vector(l, &v0, taus_ns, Propagation::Exponential)?;
    Ok(evolved.iter().map(|v| DensityOperator::from_vector(v).expectation(&measure).re).collect())
}
