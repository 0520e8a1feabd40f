//! Parameter estimation against the forward simulators.
//!
//! Every fit is weighted least squares, `chi^2 = sum ((model - y) / sigma)^2`,
//! minimized by the bounded Levenberg-Marquardt solver with forward-difference
//! Jacobians. Uncertainties come from `(J^T J)^-1` at the optimum and from
//! profile likelihoods.

mod fit;
mod forward;
mod scenario;

pub use fit::{
    fit, profile_scan, synthesize_data, FitOptions, FitProblem, FitResult, FitStatus, FreeParam, ParamValue, Profile,
    ProfilePoint,
};
pub use forward::{default_axis, forward};
pub use scenario::{DataPoint, DimerScenario, Observable, Param};
