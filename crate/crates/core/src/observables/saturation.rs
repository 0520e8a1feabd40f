use serde::{Deserialize, Serialize};

use super::peaks::{detect_peaks, peak_fit_with, Peak, PeakFitOptions, PeakSet};
use super::spectrum::{excitation_spectrum, SpectrumTrace};
use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::units::saturation_from_rabi;

/// Minimum prominence, as a fraction of the largest signal, for a local
/// maximum to count as a line.
pub const MIN_PROMINENCE: f64 = 1e-3;

/// Lines fitted at most: two dressed states and the two-photon resonance.
const MAX_LINES: usize = 3;

/// One power step of a saturation series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationPoint {
    pub rabi_mhz: f64,
    /// Drive amplitude in units of Gamma0.
    pub rabi_over_gamma: f64,
    /// s = 2 Omega^2 / Gamma0^2.
    pub saturation: f64,
    pub trace: SpectrumTrace,
    /// Lines with at least [`MIN_PROMINENCE`] relative prominence.
    pub detected_lines: usize,
    pub peaks: Option<PeakSet>,
    /// Set when the Lorentzian fit failed for this trace.
    pub fit_error: Option<String>,
}

/// Excitation spectra at increasing drive amplitudes, each with a
/// multi-Lorentzian decomposition. A failed fit is recorded on its point and
/// does not abort the series; engine failures do.
pub fn saturation_series(model: &SystemModel, rabi_mhz: &[f64], scan_mhz: &[f64]) -> Result<Vec<SaturationPoint>> {
    if rabi_mhz.is_empty() {
        return Err(Error::InvalidInput("no drive amplitudes given".into()));
    }
    if rabi_mhz.iter().any(|r| !(r.is_finite() && *r > 0.0)) || rabi_mhz.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("drive amplitudes must be positive and strictly increasing".into()));
    }
    rabi_mhz
        .iter()
        .map(|&rabi| {
            let trace = excitation_spectrum(model, rabi, scan_mhz)?;
            let mut lines = detect_peaks(&trace, MIN_PROMINENCE);
            let detected_lines = lines.len();
            lines.sort_by(|a, b| b.prominence.partial_cmp(&a.prominence).unwrap());
            lines.truncate(MAX_LINES);
            lines.sort_by(|a, b| a.freq_mhz.partial_cmp(&b.freq_mhz).unwrap());
            let (peaks, fit_error) = if lines.is_empty() {
                (None, Some("no lines detected".to_string()))
            } else {
                let init: Vec<Peak> = lines
                    .iter()
                    .map(|c| Peak { center_mhz: c.freq_mhz, height: c.prominence, fwhm_mhz: c.fwhm_estimate_mhz })
                    .collect();
                let opts = PeakFitOptions { init: Some(init), ..PeakFitOptions::new(lines.len()) };
                match peak_fit_with(&trace, &opts) {
                    Ok(p) => (Some(p), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            Ok(SaturationPoint {
                rabi_mhz: rabi,
                rabi_over_gamma: rabi / model.gamma0_mhz,
                saturation: saturation_from_rabi(rabi, model.gamma0_mhz),
                trace,
                detected_lines,
                peaks,
                fit_error,
            })
        })
        .collect()
}
