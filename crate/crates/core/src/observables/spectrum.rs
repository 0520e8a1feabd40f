use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{build_liouvillian, steady_state, DensityOperator};
use crate::model::{DriveParams, SystemModel};
use crate::units::{mhz_to_angular, per_ns_to_per_s};

/// Snapshot of the inputs that produced a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub model: SystemModel,
    pub rabi_mhz: f64,
}

/// Detected fluorescence versus laser frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    /// Laser frequency axis, MHz, strictly increasing.
    pub freqs_mhz: Vec<f64>,
    /// Sideband photon rate, photons/s, or relative units when `normalized`.
    pub signal: Vec<f64>,
    pub normalized: bool,
    pub meta: SpectrumMeta,
}

impl SpectrumTrace {
    /// Copy rescaled to a maximum of one.
    pub fn normalized(&self) -> Self {
        let max = self.max_signal();
        let mut out = self.clone();
        if max > 0.0 {
            out.signal.iter_mut().for_each(|s| *s /= max);
        }
        out.normalized = true;
        out
    }

    pub fn max_signal(&self) -> f64 {
        self.signal.iter().copied().fold(0.0, f64::max)
    }

    /// Linear interpolation of the signal at `f`, clamped to the axis ends.
    pub fn interpolate(&self, f: f64) -> f64 {
        let x = &self.freqs_mhz;
        if f <= x[0] {
            return self.signal[0];
        }
        if f >= x[x.len() - 1] {
            return self.signal[x.len() - 1];
        }
        let k = x.partition_point(|&v| v <= f) - 1;
        let t = (f - x[k]) / (x[k + 1] - x[k]);
        self.signal[k] * (1.0 - t) + self.signal[k + 1] * t
    }
}

/// Sideband photon rate (photons/s) of a state: (1 - alpha) Gamma0 sum <n_i>.
pub fn detected_rate(model: &SystemModel, rho: &DensityOperator) -> f64 {
    let k = mhz_to_angular(model.sideband_rate_mhz());
    per_ns_to_per_s(k * rho.populations().iter().sum::<f64>())
}

pub(crate) fn validate_axis(scan: &[f64]) -> Result<()> {
    if scan.is_empty() {
        return Err(Error::InvalidInput("scan axis is empty".into()));
    }
    if scan.iter().any(|f| !f.is_finite()) {
        return Err(Error::InvalidInput("scan axis has non-finite values".into()));
    }
    if scan.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("scan axis must be strictly increasing".into()));
    }
    Ok(())
}

/// Steady-state excitation spectrum: at each laser frequency the generator is
/// rebuilt in that frame and its steady state supplies the sideband rate.
///
/// Scan points are independent and evaluated in parallel.
pub fn excitation_spectrum(model: &SystemModel, rabi_mhz: f64, scan_mhz: &[f64]) -> Result<SpectrumTrace> {
    validate_axis(scan_mhz)?;
    let n = model.n_emitters();
    let signal = scan_mhz
        .par_iter()
        .map(|&laser| {
            let l = build_liouvillian(model, &DriveParams::uniform(n, rabi_mhz, laser))?;
            let rho = steady_state(&l)?;
            Ok(detected_rate(model, &rho).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SpectrumTrace {
        freqs_mhz: scan_mhz.to_vec(),
        signal,
        normalized: false,
        meta: SpectrumMeta { model: model.clone(), rabi_mhz },
    })
}

/// `points` evenly spaced frequencies from `start` to `stop` inclusive.
pub fn linear_scan(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![start];
    }
    let step = (stop - start) / (points - 1) as f64;
    (0..points).map(|k| start + step * k as f64).collect()
}

/// Scan axis that is dense (spacing `width/12`) within `6*width` of each
/// center and coarse (spacing `width`) elsewhere, spanning `margin` widths
/// beyond the outermost centers.
pub fn dressed_scan(centers: &[f64], width: f64, margin: f64) -> Vec<f64> {
    let lo = centers.iter().copied().fold(f64::INFINITY, f64::min) - margin * width;
    let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max) + margin * width;
    let fine = width / 12.0;
    let mut out = Vec::new();
    let mut f = lo;
    while f <= hi {
        out.push(f);
        let near = centers.iter().any(|c| (f - c).abs() < 6.0 * width);
        f += if near { fine } else { width };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_axes() {
        let model = SystemModel::independent(&[1000.0], 33.0, 0.3, 0.0).unwrap();
        assert!(excitation_spectrum(&model, 1.0, &[]).is_err());
        assert!(excitation_spectrum(&model, 1.0, &[2.0, 1.0]).is_err());
        assert!(excitation_spectrum(&model, 1.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn single_emitter_lineshape_is_lorentzian() {
        // weak drive: FWHM = Gamma0 + 2 gamma_phi
        let model = SystemModel::independent(&[10_000.0], 33.0, 0.3, 2.0).unwrap();
        let scan = [9_800.0, 10_000.0 - 18.5, 10_000.0, 10_000.0 + 18.5, 10_200.0];
        let tr = excitation_spectrum(&model, 0.005 * 33.0, &scan).unwrap();
        let (lo, peak, hi) = (tr.signal[1], tr.signal[2], tr.signal[3]);
        assert!((hi / peak - 0.5).abs() < 1e-4, "{}", hi / peak);
        assert!((hi - lo).abs() < 1e-9 * peak);
        assert!(tr.signal.iter().all(|s| *s >= 0.0));
    }

    fn j_pair(delta: f64) -> SystemModel {
        SystemModel::dimer(381_900_000.0 + delta / 2.0, 381_900_000.0 - delta / 2.0, -116.0, 37.0, 0.135, 1.0).unwrap()
    }

    #[test]
    fn resonant_j_pair_shows_a_single_line() {
        let m = j_pair(0.0);
        let ds = m.dressed_states().unwrap();
        let scan = dressed_scan(&[ds.freq_minus_mhz, ds.freq_plus_mhz], 37.0, 6.0);
        let tr = excitation_spectrum(&m, 0.05 * 37.0, &scan).unwrap();
        let lines = crate::observables::detect_peaks(&tr, 1e-3);
        assert_eq!(lines.len(), 1, "{lines:?}");
        let dark = tr.interpolate(ds.freq_minus_mhz);
        let bright = tr.interpolate(ds.freq_plus_mhz);
        assert!(dark < 0.01 * bright, "{dark} vs {bright}");
    }

    #[test]
    fn detuned_pair_lines_sit_on_the_dressed_states() {
        let m = j_pair(20.0 * 116.0);
        let ds = m.dressed_states().unwrap();
        let scan = dressed_scan(&[ds.freq_minus_mhz, ds.freq_plus_mhz], 37.0, 6.0);
        let tr = excitation_spectrum(&m, 0.05 * 37.0, &scan).unwrap();
        let fit = crate::observables::peak_fit(&tr, 2, None).unwrap();
        let (lo, hi) = (fit.peaks[0], fit.peaks[1]);
        for (p, f) in [(lo, ds.freq_minus_mhz.min(ds.freq_plus_mhz)), (hi, ds.freq_minus_mhz.max(ds.freq_plus_mhz))] {
            assert!((p.center_mhz - f).abs() < 37.0 / 10.0, "{p:?} vs {f}");
        }
        // the drive still favors the bright state by (1 + sin 2theta) / (1 - sin 2theta)
        let ratio = lo.height.min(hi.height) / lo.height.max(hi.height);
        assert!(ratio > 0.8 && ratio < 0.9, "{ratio}");
    }

    #[test]
    fn dressed_scan_is_increasing_and_dense_near_centers() {
        let s = dressed_scan(&[0.0, 1000.0], 40.0, 8.0);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        assert!(s.iter().filter(|f| f.abs() < 40.0).count() >= 20);
    }
}
