use serde::{Deserialize, Serialize};

use super::peaks::{peak_fit_with, Peak, PeakFitOptions, PeakSet};
use super::spectrum::excitation_spectrum;
use crate::error::{Error, Result};
use crate::model::SystemModel;

/// Subradiant-to-superradiant peak height ratio at one detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionPoint {
    /// Bare detuning omega1 - omega2, MHz.
    pub delta_mhz: f64,
    /// height(minus) / height(plus) from the two-Lorentzian fit.
    pub ratio: f64,
    pub plus: Peak,
    pub minus: Peak,
    /// The lines overlap (generalized detuning below half a linewidth) or the
    /// free fit failed; centers were held at the dressed-state frequencies.
    pub constrained: bool,
}

/// Ratio at one detuning. `template` supplies J, Gamma0, alpha and
/// dephasing; its two bare frequencies are replaced by mean +/- delta/2.
pub fn extinction_ratio_at(template: &SystemModel, delta_mhz: f64, rabi_mhz: f64) -> Result<ExtinctionPoint> {
    if template.n_emitters() != 2 {
        return Err(Error::Model(format!("extinction needs a pair, got {} emitters", template.n_emitters())));
    }
    if !delta_mhz.is_finite() {
        return Err(Error::InvalidInput("detuning must be finite".into()));
    }
    let mean = template.mean_frequency_mhz();
    let mut model = template.clone();
    model.emitters[0].omega_mhz = mean + 0.5 * delta_mhz;
    model.emitters[1].omega_mhz = mean - 0.5 * delta_mhz;
    model.validate()?;
    let ds = model.dressed_states()?;
    let width = model.gamma0_mhz + 2.0 * model.dephasing_mhz;
    let scan = window_scan(&[ds.freq_plus_mhz, ds.freq_minus_mhz], width);
    let trace = excitation_spectrum(&model, rabi_mhz, &scan)?;

    let (dp, dm) = ds.drive_factors();
    let single = trace.max_signal().max(f64::MIN_POSITIVE);
    let guess = |f: f64, g: f64, drive: f64| Peak {
        center_mhz: f,
        height: (single * drive * drive * 0.5).max(1e-6 * single),
        fwhm_mhz: g + 2.0 * model.dephasing_mhz,
    };
    let init = vec![guess(ds.freq_plus_mhz, ds.gamma_plus_mhz, dp), guess(ds.freq_minus_mhz, ds.gamma_minus_mhz, dm)];
    let base = PeakFitOptions { init: Some(init.clone()), baseline: false, ..PeakFitOptions::new(2) };
    let overlapping = ds.delta_tilde_mhz < 0.5 * width;
    let free = if overlapping { None } else { peak_fit_with(&trace, &base).ok() };
    let (fit, constrained) = match free {
        Some(fit) => (fit, false),
        None => (peak_fit_with(&trace, &PeakFitOptions { fixed_centers: true, ..base })?, true),
    };
    let (plus, minus) = assign(&fit, &init, constrained);
    let ratio = if plus.height > 0.0 { minus.height / plus.height } else { f64::INFINITY };
    Ok(ExtinctionPoint { delta_mhz, ratio, plus, minus, constrained })
}

/// Half-width of the window around each dressed line, in linewidths.
const WINDOW_WIDTHS: f64 = 6.0;
/// Samples per linewidth inside a window.
const SAMPLES_PER_WIDTH: usize = 8;

// Fixed grids that move rigidly with the line centers, merged. Unlike an
// adaptive axis, the sample count never jumps as parameters change, so the
// fitted heights vary smoothly with J and the detuning.
fn window_scan(centers: &[f64], width: f64) -> Vec<f64> {
    let half = (WINDOW_WIDTHS as usize) * SAMPLES_PER_WIDTH;
    let step = width / SAMPLES_PER_WIDTH as f64;
    let mut out: Vec<f64> =
        centers.iter().flat_map(|&c| (0..=2 * half).map(move |k| c + step * (k as f64 - half as f64))).collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * step);
    out
}

// Fitted peaks come back ordered by center; match them to the dressed states.
fn assign(fit: &PeakSet, init: &[Peak], constrained: bool) -> (Peak, Peak) {
    if constrained {
        // centers were held, so each line sits where it started
        let find = |c: f64| fit.peaks[fit.nearest(c).unwrap_or(0)];
        return (find(init[0].center_mhz), find(init[1].center_mhz));
    }
    let plus_first = init[0].center_mhz <= init[1].center_mhz;
    if plus_first {
        (fit.peaks[0], fit.peaks[1])
    } else {
        (fit.peaks[1], fit.peaks[0])
    }
}

/// [`extinction_ratio_at`] over a list of detunings.
pub fn extinction_ratio_curve(
    template: &SystemModel,
    detunings_mhz: &[f64],
    rabi_mhz: f64,
) -> Result<Vec<ExtinctionPoint>> {
    detunings_mhz.iter().map(|&d| extinction_ratio_at(template, d, rabi_mhz)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j_aggregate() -> SystemModel {
        SystemModel::dimer(381_000_000.0, 381_000_000.0, -116.0, 37.0, 0.135, 1.0).unwrap()
    }

    #[test]
    fn resonant_pair_extinguishes_the_subradiant_line() {
        let p = extinction_ratio_at(&j_aggregate(), 0.0, 0.05 * 37.0).unwrap();
        assert!(p.ratio < 0.01, "{p:?}");
        assert!(p.plus.center_mhz < p.minus.center_mhz);
    }

    #[test]
    fn ratio_grows_with_detuning() {
        let curve = extinction_ratio_curve(&j_aggregate(), &[0.0, 200.0, 600.0], 0.05 * 37.0).unwrap();
        assert!(curve.windows(2).all(|w| w[1].ratio > w[0].ratio), "{curve:?}");
        assert!(curve.iter().all(|p| p.ratio <= 1.05));
    }

    #[test]
    fn rejects_non_pairs() {
        let m = SystemModel::independent(&[1.0], 37.0, 0.1, 0.0).unwrap();
        assert!(extinction_ratio_at(&m, 0.0, 1.0).is_err());
    }
}
