//! Measurable curves computed from the Lindblad engine.

mod extinction;
mod g2;
mod lifetime;
mod peaks;
mod resonance;
mod saturation;
mod spectrum;

pub use extinction::{extinction_ratio_at, extinction_ratio_curve, ExtinctionPoint};
pub use g2::{fit_rabi_oscillation, g2_curve, CorrelationTrace, DriveTarget, RabiOscillationFit};
pub use lifetime::{lifetime_trace, ExponentialFit, InitialState, LifetimeTrace, MultiExponential};
pub use peaks::{detect_peaks, lorentzian, peak_fit, peak_fit_with, Peak, PeakCandidate, PeakFitOptions, PeakSet};
pub use resonance::{
    baseline_resonance_probability, enhancement_factor, resonance_probability_quadrature, Enhancement,
    ResonanceEstimate, ResonanceEstimator, ResonanceMcParams,
};
pub use saturation::{saturation_series, SaturationPoint};
pub use spectrum::{detected_rate, dressed_scan, excitation_spectrum, linear_scan, SpectrumMeta, SpectrumTrace};
