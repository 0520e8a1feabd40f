use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::spectrum::{validate_axis, SpectrumTrace};
use crate::error::{Error, Result};
use crate::optimize::{levenberg_marquardt, Bounds, LmConfig, LmTermination};

/// Lorentzian `height / (1 + 4 (f - center)^2 / fwhm^2)`.
pub fn lorentzian(f: f64, center: f64, height: f64, fwhm: f64) -> f64 {
    let u = 2.0 * (f - center) / fwhm;
    height / (1.0 + u * u)
}

/// One fitted line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center_mhz: f64,
    pub height: f64,
    pub fwhm_mhz: f64,
}

/// Result of a multi-Lorentzian fit, peaks ordered by center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    pub baseline: f64,
    /// Covariance of (height, center, fwhm) per peak followed by the
    /// baseline, scaled by the residual variance. Fixed parameters have zero
    /// rows. `None` when the Jacobian is rank deficient.
    pub covariance: Option<DMatrix<f64>>,
    /// Root-mean-square residual, signal units.
    pub residual_rms: f64,
    /// Euclidean norm of the residual vector, signal units.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl PeakSet {
    /// Model value at `f`.
    pub fn evaluate(&self, f: f64) -> f64 {
        self.baseline + self.peaks.iter().map(|p| lorentzian(f, p.center_mhz, p.height, p.fwhm_mhz)).sum::<f64>()
    }

    /// Index of the peak closest to `f`.
    pub fn nearest(&self, f: f64) -> Option<usize> {
        (0..self.peaks.len()).min_by(|&a, &b| {
            (self.peaks[a].center_mhz - f).abs().partial_cmp(&(self.peaks[b].center_mhz - f).abs()).unwrap()
        })
    }
}

/// A local maximum found by [`detect_peaks`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakCandidate {
    pub index: usize,
    pub freq_mhz: f64,
    pub height: f64,
    pub prominence: f64,
    pub fwhm_estimate_mhz: f64,
}

/// Local maxima whose topographic prominence is at least
/// `min_prominence_frac` of the largest signal, ordered by frequency.
pub fn detect_peaks(trace: &SpectrumTrace, min_prominence_frac: f64) -> Vec<PeakCandidate> {
    let s = &trace.signal;
    let x = &trace.freqs_mhz;
    let n = s.len();
    let max = trace.max_signal();
    if n < 3 || max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || s[i] > s[i - 1];
        let right_ok = i == n - 1 || s[i] >= s[i + 1];
        if !(left_ok && right_ok) || i == 0 || i == n - 1 {
            continue;
        }
        // lowest point on each side before reaching higher ground
        let mut left_min = s[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            if s[j] > s[i] {
                break;
            }
            left_min = left_min.min(s[j]);
        }
        let mut right_min = s[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            if s[j] > s[i] {
                break;
            }
            right_min = right_min.min(s[j]);
        }
        let base = left_min.max(right_min);
        let prominence = s[i] - base;
        if prominence < min_prominence_frac * max {
            continue;
        }
        let half = base + 0.5 * prominence;
        let cross = |dir: isize| -> f64 {
            let mut k = i as isize;
            loop {
                let next = k + dir;
                if next < 0 || next >= n as isize {
                    return x[k as usize];
                }
                let (a, b) = (k as usize, next as usize);
                if s[b] <= half {
                    let t = (s[a] - half) / (s[a] - s[b]);
                    return x[a] + t * (x[b] - x[a]);
                }
                k = next;
            }
        };
        let fwhm = (cross(1) - cross(-1)).abs().max(x[i + 1] - x[i - 1]);
        out.push(PeakCandidate { index: i, freq_mhz: x[i], height: s[i], prominence, fwhm_estimate_mhz: fwhm });
    }
    out
}

/// Options for [`peak_fit_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeakFitOptions {
    pub n_peaks: usize,
    /// Starting values; detected from local maxima when absent.
    pub init: Option<Vec<Peak>>,
    /// Keep the centers at their initial values.
    pub fixed_centers: bool,
    /// Fit an additive constant.
    pub baseline: bool,
    pub max_iterations: usize,
}

impl PeakFitOptions {
    pub fn new(n_peaks: usize) -> Self {
        Self { n_peaks, init: None, fixed_centers: false, baseline: true, max_iterations: 500 }
    }
}

/// Least-squares sum of `n_peaks` Lorentzians plus a constant baseline.
pub fn peak_fit(trace: &SpectrumTrace, n_peaks: usize, init: Option<&[Peak]>) -> Result<PeakSet> {
    let mut opts = PeakFitOptions::new(n_peaks);
    opts.init = init.map(|p| p.to_vec());
    peak_fit_with(trace, &opts)
}

pub fn peak_fit_with(trace: &SpectrumTrace, opts: &PeakFitOptions) -> Result<PeakSet> {
    validate_axis(&trace.freqs_mhz)?;
    if opts.n_peaks == 0 {
        return Err(Error::InvalidInput("n_peaks must be at least 1".into()));
    }
    if trace.signal.len() != trace.freqs_mhz.len() {
        return Err(Error::Shape("signal and axis lengths differ".into()));
    }
    let m = trace.freqs_mhz.len();
    let n_lines = opts.n_peaks;
    let n_params = 3 * n_lines + usize::from(opts.baseline);
    if m < n_params {
        return Err(Error::InvalidInput(format!("{m} samples cannot constrain {n_params} parameters")));
    }
    let init: Vec<Peak> = match &opts.init {
        Some(p) if p.len() == n_lines => p.clone(),
        Some(p) => {
            return Err(Error::InvalidInput(format!("{} initial peaks given for {n_lines} lines", p.len())));
        }
        None => initial_guesses(trace, n_lines)?,
    };

    // Work on a unit-scaled problem: x in spans around the axis midpoint, y
    // in units of the largest signal.
    let x0 = 0.5 * (trace.freqs_mhz[0] + trace.freqs_mhz[m - 1]);
    let xs = (trace.freqs_mhz[m - 1] - trace.freqs_mhz[0]).max(f64::MIN_POSITIVE);
    let ys = trace.signal.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let xn: Vec<f64> = trace.freqs_mhz.iter().map(|f| (f - x0) / xs).collect();
    let yn: Vec<f64> = trace.signal.iter().map(|v| v / ys).collect();

    // Full parameter layout: [h, c, w] per line, then baseline.
    let mut full0 = Vec::with_capacity(n_params);
    for p in &init {
        full0.extend([p.height / ys, (p.center_mhz - x0) / xs, (p.fwhm_mhz / xs).abs()]);
    }
    if opts.baseline {
        full0.push(0.0);
    }
    let free: Vec<usize> = (0..n_params).filter(|&k| !(opts.fixed_centers && k < 3 * n_lines && k % 3 == 1)).collect();
    let expand = |q: &[f64]| {
        let mut full = full0.clone();
        for (slot, &k) in free.iter().enumerate() {
            full[k] = q[slot];
        }
        full
    };
    let min_width = 1e-6;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &k in &free {
        let (lo, hi) = if k >= 3 * n_lines {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            match k % 3 {
                0 => (0.0, f64::INFINITY),
                1 => (-0.5, 0.5),
                _ => (min_width, 4.0),
            }
        };
        lower.push(lo);
        upper.push(hi);
    }
    let bounds = Bounds { lower, upper };
    let mut q0: Vec<f64> = free.iter().map(|&k| full0[k]).collect();
    bounds.project(&mut q0);

    let model = |full: &[f64], x: f64| -> f64 {
        let base = if opts.baseline { full[3 * n_lines] } else { 0.0 };
        base + (0..n_lines).map(|l| lorentzian(x, full[3 * l + 1], full[3 * l], full[3 * l + 2])).sum::<f64>()
    };
    let residuals = |q: &[f64]| -> Result<DVector<f64>> {
        let full = expand(q);
        Ok(DVector::from_iterator(m, xn.iter().zip(&yn).map(|(&x, &y)| model(&full, x) - y)))
    };
    let jacobian = |q: &[f64]| -> Result<DMatrix<f64>> {
        let full = expand(q);
        let mut jf = DMatrix::zeros(m, n_params);
        for (row, &x) in xn.iter().enumerate() {
            for l in 0..n_lines {
                let (h, c, w) = (full[3 * l], full[3 * l + 1], full[3 * l + 2]);
                let u = 2.0 * (x - c) / w;
                let den = 1.0 + u * u;
                jf[(row, 3 * l)] = 1.0 / den;
                // d/dc and d/dw of h / (1 + u^2)
                let dfdu = -2.0 * h * u / (den * den);
                jf[(row, 3 * l + 1)] = dfdu * (-2.0 / w);
                jf[(row, 3 * l + 2)] = dfdu * (-u / w);
            }
            if opts.baseline {
                jf[(row, 3 * n_lines)] = 1.0;
            }
        }
        Ok(DMatrix::from_fn(m, free.len(), |r, c| jf[(r, free[c])]))
    };
    let config = LmConfig { max_iterations: opts.max_iterations, ..Default::default() };
    let out = levenberg_marquardt(residuals, Some(jacobian), &q0, &bounds, &config)?;
    let rms_norm = (out.cost / m as f64).sqrt();
    if out.termination == LmTermination::MaxIterations {
        return Err(Error::NonConvergence { iterations: out.iterations, residual: rms_norm * ys });
    }
    let full = expand(&out.params);
    let mut peaks: Vec<Peak> = (0..n_lines)
        .map(|l| Peak {
            height: full[3 * l] * ys,
            center_mhz: full[3 * l + 1] * xs + x0,
            fwhm_mhz: full[3 * l + 2] * xs,
        })
        .collect();
    let covariance = out.covariance().map(|c| {
        let dof = (m - free.len()).max(1) as f64;
        let var = out.cost / dof;
        let scale_of = |k: usize| -> f64 {
            if k >= 3 * n_lines {
                ys
            } else {
                match k % 3 {
                    0 => ys,
                    _ => xs,
                }
            }
        };
        let mut full_cov = DMatrix::zeros(n_params, n_params);
        for (a, &ka) in free.iter().enumerate() {
            for (b, &kb) in free.iter().enumerate() {
                full_cov[(ka, kb)] = c[(a, b)] * var * scale_of(ka) * scale_of(kb);
            }
        }
        full_cov
    });
    // order lines by center while keeping covariance blocks consistent
    let mut order: Vec<usize> = (0..n_lines).collect();
    order.sort_by(|&a, &b| peaks[a].center_mhz.partial_cmp(&peaks[b].center_mhz).unwrap());
    let covariance = covariance.map(|c| {
        let perm: Vec<usize> =
            order.iter().flat_map(|&l| [3 * l, 3 * l + 1, 3 * l + 2]).chain((3 * n_lines)..n_params).collect();
        DMatrix::from_fn(n_params, n_params, |r, col| c[(perm[r], perm[col])])
    });
    peaks = order.iter().map(|&l| peaks[l]).collect();
    Ok(PeakSet {
        peaks,
        baseline: if opts.baseline { full[3 * n_lines] * ys } else { 0.0 },
        covariance,
        residual_rms: rms_norm * ys,
        residual_norm: out.cost.sqrt() * ys,
        iterations: out.iterations,
    })
}

fn initial_guesses(trace: &SpectrumTrace, n: usize) -> Result<Vec<Peak>> {
    let mut cands = detect_peaks(trace, 0.0);
    if cands.len() < n {
        return Err(Error::InvalidInput(format!("found {} local maxima, cannot seed {n} peaks", cands.len())));
    }
    cands.sort_by(|a, b| b.prominence.partial_cmp(&a.prominence).unwrap());
    cands.truncate(n);
    cands.sort_by(|a, b| a.freq_mhz.partial_cmp(&b.freq_mhz).unwrap());
    Ok(cands
        .iter()
        .map(|c| Peak { center_mhz: c.freq_mhz, height: c.prominence, fwhm_mhz: c.fwhm_estimate_mhz })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemModel;
    use crate::observables::spectrum::{linear_scan, SpectrumMeta};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synthetic(freqs: &[f64], peaks: &[Peak], base: f64) -> SpectrumTrace {
        SpectrumTrace {
            freqs_mhz: freqs.to_vec(),
            signal: freqs
                .iter()
                .map(|&f| base + peaks.iter().map(|p| lorentzian(f, p.center_mhz, p.height, p.fwhm_mhz)).sum::<f64>())
                .collect(),
            normalized: false,
            meta: SpectrumMeta { model: SystemModel::independent(&[1.0], 1.0, 0.5, 0.0).unwrap(), rabi_mhz: 0.0 },
        }
    }

    #[test]
    fn exact_single_lorentzian() {
        let truth = Peak { center_mhz: 381_900_012.5, height: 2.3e5, fwhm_mhz: 35.0 };
        let tr = synthetic(&linear_scan(381_899_800.0, 381_900_200.0, 201), &[truth], 1.0e3);
        let fit = peak_fit(&tr, 1, None).unwrap();
        let p = fit.peaks[0];
        assert!((p.center_mhz - truth.center_mhz).abs() < 1e-6 * truth.fwhm_mhz);
        assert!((p.height / truth.height - 1.0).abs() < 1e-6);
        assert!((p.fwhm_mhz / truth.fwhm_mhz - 1.0).abs() < 1e-6);
        assert!((fit.baseline / 1.0e3 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn overlapping_pair_with_noise() {
        let w = 40.0;
        let truth = [
            Peak { center_mhz: 0.0, height: 1.0, fwhm_mhz: w },
            Peak { center_mhz: 1.5 * w, height: 0.7, fwhm_mhz: w },
        ];
        let freqs = linear_scan(-300.0, 360.0, 331);
        let mut tr = synthetic(&freqs, &truth, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.01).unwrap();
        tr.signal.iter_mut().for_each(|s| *s += noise.sample(&mut rng));
        let init = [
            Peak { center_mhz: -10.0, height: 1.0, fwhm_mhz: 30.0 },
            Peak { center_mhz: 70.0, height: 0.5, fwhm_mhz: 30.0 },
        ];
        let fit = peak_fit(&tr, 2, Some(&init)).unwrap();
        for (p, t) in fit.peaks.iter().zip(&truth) {
            assert!((p.center_mhz - t.center_mhz).abs() < 0.05 * w, "{p:?}");
        }
        let cov = fit.covariance.unwrap();
        assert!(cov[(1, 1)] > 0.0);
    }

    #[test]
    fn detection_ignores_small_wiggles() {
        let freqs = linear_scan(-500.0, 500.0, 1001);
        let tr = synthetic(
            &freqs,
            &[
                Peak { center_mhz: -200.0, height: 1.0, fwhm_mhz: 30.0 },
                Peak { center_mhz: 0.0, height: 0.005, fwhm_mhz: 20.0 },
                Peak { center_mhz: 200.0, height: 0.8, fwhm_mhz: 30.0 },
            ],
            0.0,
        );
        let strong = detect_peaks(&tr, 0.01);
        assert_eq!(strong.len(), 2);
        assert!((strong[0].fwhm_estimate_mhz - 30.0).abs() < 2.0);
        assert_eq!(detect_peaks(&tr, 0.001).len(), 3);
    }

    #[test]
    fn fixed_centers_stay_put() {
        let freqs = linear_scan(-200.0, 200.0, 201);
        let tr = synthetic(&freqs, &[Peak { center_mhz: 3.0, height: 1.0, fwhm_mhz: 30.0 }], 0.0);
        let opts = PeakFitOptions {
            init: Some(vec![Peak { center_mhz: 0.0, height: 1.0, fwhm_mhz: 20.0 }]),
            fixed_centers: true,
            baseline: false,
            ..PeakFitOptions::new(1)
        };
        let fit = peak_fit_with(&tr, &opts).unwrap();
        assert!(fit.peaks[0].center_mhz.abs() < 1e-9);
    }

    #[test]
    fn too_few_maxima_is_an_error() {
        let freqs = linear_scan(-200.0, 200.0, 201);
        let tr = synthetic(&freqs, &[Peak { center_mhz: 3.0, height: 1.0, fwhm_mhz: 30.0 }], 0.0);
        assert!(matches!(peak_fit(&tr, 2, None), Err(Error::InvalidInput(_))));
        assert!(peak_fit(&tr, 0, None).is_err());
    }

    #[test]
    fn capped_iterations_give_non_convergence() {
        let freqs = linear_scan(-200.0, 200.0, 201);
        let tr = synthetic(&freqs, &[Peak { center_mhz: 30.0, height: 1.0, fwhm_mhz: 30.0 }], 0.1);
        let opts = PeakFitOptions {
            init: Some(vec![Peak { center_mhz: -50.0, height: 0.2, fwhm_mhz: 80.0 }]),
            max_iterations: 1,
            ..PeakFitOptions::new(1)
        };
        assert!(matches!(peak_fit_with(&tr, &opts), Err(Error::NonConvergence { .. })));
    }
}
