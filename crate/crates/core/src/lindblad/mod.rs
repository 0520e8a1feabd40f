//! Dense Lindblad engine.
//!
//! The generator acts on column-stacked density matrices: the element
//! `rho[(i, j)]` sits at index `j * d + i`, which is nalgebra's storage order.

mod correlation;
mod density;
mod liouvillian;
pub mod operators;
mod propagate;
mod steady;

pub use correlation::{detection_operators, regression_correlation};
pub use density::DensityOperator;
pub use liouvillian::{build_liouvillian, Liouvillian, MAX_EMITTERS};
pub use propagate::{evolve_vector, propagate, propagate_with, Propagation};
pub use steady::{steady_state, steady_state_checked};
