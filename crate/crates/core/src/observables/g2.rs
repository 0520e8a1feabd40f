use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{build_liouvillian, detection_operators, regression_correlation, steady_state};
use crate::model::{DriveParams, SystemModel};
use crate::optimize::{levenberg_marquardt, Bounds, LmConfig, LmTermination, NoJacobian};
use crate::units::{angular_to_mhz, per_ns_to_per_s};

/// Where the laser sits. Driving on a dressed-state resonance stands in for
/// spectrally filtering that state's emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriveTarget {
    Plus,
    Minus,
    Laser { mhz: f64 },
}

impl DriveTarget {
    pub fn laser_mhz(&self, model: &SystemModel) -> Result<f64> {
        match *self {
            DriveTarget::Laser { mhz } => Ok(mhz),
            DriveTarget::Plus => Ok(model.dressed_states()?.freq_plus_mhz),
            DriveTarget::Minus => Ok(model.dressed_states()?.freq_minus_mhz),
        }
    }
}

/// Normalized intensity correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTrace {
    /// Delay axis, ns. Negative delays use g2(-tau) = g2(tau).
    pub taus_ns: Vec<f64>,
    pub g2: Vec<f64>,
    pub laser_mhz: f64,
    /// Steady-state detected rate, photons/s.
    pub rate_per_s: f64,
}

/// g2(tau) = G2(tau) / R^2 of the sideband emission under uniform drive.
pub fn g2_curve(model: &SystemModel, rabi_mhz: f64, target: DriveTarget, taus_ns: &[f64]) -> Result<CorrelationTrace> {
    if taus_ns.is_empty() || taus_ns.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("delay axis must be nonempty and finite".into()));
    }
    let laser = target.laser_mhz(model)?;
    let l = build_liouvillian(model, &DriveParams::uniform(model.n_emitters(), rabi_mhz, laser))?;
    let rho = steady_state(&l)?;
    let (collapse, measure) = detection_operators(model);
    let rate: f64 = measure.iter().map(|m| rho.expectation(m).re).sum();
    if !(rate > 1e-300) {
        return Err(Error::Normalization(format!("steady-state detected rate is {rate:e}")));
    }
    let mut abs: Vec<f64> = taus_ns.iter().map(|t| t.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    abs.dedup();
    let g = regression_correlation(&l, &rho, &collapse, &measure, &abs)?;
    let g2 = taus_ns
        .iter()
        .map(|t| {
            let k = abs.partition_point(|&a| a < t.abs());
            (g[k] / (rate * rate)).max(0.0)
        })
        .collect();
    Ok(CorrelationTrace { taus_ns: taus_ns.to_vec(), g2, laser_mhz: laser, rate_per_s: per_ns_to_per_s(rate) })
}

/// Fit of g(tau) = 1 - c exp(-a tau) (cos(W tau) + b sin(W tau)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiOscillationFit {
    /// Oscillation frequency W, expressed as an ordinary frequency in MHz.
    pub rabi_mhz: f64,
    /// Envelope decay rate a, 1/ns.
    pub damping_per_ns: f64,
    pub depth: f64,
    pub phase_coefficient: f64,
    pub residual_rms: f64,
}

/// Extracts the effective Rabi frequency from the nonnegative-delay part of
/// a correlation trace.
pub fn fit_rabi_oscillation(trace: &CorrelationTrace) -> Result<RabiOscillationFit> {
    let pts: Vec<(f64, f64)> =
        trace.taus_ns.iter().zip(&trace.g2).filter(|(t, _)| **t >= 0.0).map(|(&t, &g)| (t, g)).collect();
    if pts.len() < 8 {
        return Err(Error::InvalidInput("need at least 8 nonnegative delays".into()));
    }
    // first local maximum sits near W tau = pi
    let t_max = pts
        .windows(3)
        .find(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1 && w[1].1 > 1.0)
        .map(|w| w[1].0)
        .ok_or_else(|| Error::InvalidInput("no oscillation found in g2 trace".into()))?;
    let w0 = std::f64::consts::PI / t_max;
    let model = |p: &[f64], t: f64| {
        let (c, a, w, b) = (p[0], p[1], p[2], p[3]);
        1.0 - c * (-a * t).exp() * ((w * t).cos() + b * (w * t).sin())
    };
    let residuals = |p: &[f64]| Ok(DVector::from_iterator(pts.len(), pts.iter().map(|&(t, g)| model(p, t) - g)));
    let g0 = pts[0].1;
    let p0 = [1.0 - g0, 0.5 * w0, w0, 0.5];
    let bounds = Bounds { lower: vec![0.0, 0.0, 0.1 * w0, -10.0], upper: vec![2.0, 10.0 * w0, 3.0 * w0, 10.0] };
    let out = levenberg_marquardt(
        residuals,
        None::<NoJacobian>,
        &p0,
        &bounds,
        &LmConfig { max_iterations: 500, ..Default::default() },
    )?;
    let rms = (out.cost / pts.len() as f64).sqrt();
    if out.termination == LmTermination::MaxIterations {
        return Err(Error::NonConvergence { iterations: out.iterations, residual: rms });
    }
    let p = &out.params;
    Ok(RabiOscillationFit {
        rabi_mhz: angular_to_mhz(p[2]),
        damping_per_ns: p[1],
        depth: p[0],
        phase_coefficient: p[3],
        residual_rms: rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::spectrum::linear_scan;
    use crate::units::mhz_to_angular;

    // Resonance fluorescence of a two-level system at exact resonance.
    fn mollow_g2(rabi: f64, gamma: f64, t: f64) -> f64 {
        let mu = (rabi * rabi - gamma * gamma / 16.0).sqrt();
        1.0 - (-0.75 * gamma * t).exp() * ((mu * t).cos() + 0.75 * gamma / mu * (mu * t).sin())
    }

    #[test]
    fn single_emitter_matches_closed_form() {
        let model = SystemModel::independent(&[5_000.0], 33.0, 0.3, 0.0).unwrap();
        let taus = linear_scan(0.0, 20.0, 101);
        let tr = g2_curve(&model, 80.0, DriveTarget::Laser { mhz: 5_000.0 }, &taus).unwrap();
        assert!(tr.g2[0] < 1e-8);
        let (w, g) = (mhz_to_angular(80.0), mhz_to_angular(33.0));
        for (t, v) in taus.iter().zip(&tr.g2) {
            assert!((v - mollow_g2(w, g, *t)).abs() < 1e-8, "tau {t}");
        }
        let fit = fit_rabi_oscillation(&tr).unwrap();
        let mu = (w * w - g * g / 16.0).sqrt();
        assert!((fit.rabi_mhz / angular_to_mhz(mu) - 1.0).abs() < 1e-4, "{fit:?}");
    }

    #[test]
    fn symmetric_axis_is_even() {
        let model = SystemModel::dimer(1_000.0, 1_200.0, 80.0, 33.0, 0.11, 1.0).unwrap();
        let taus = linear_scan(-10.0, 10.0, 41);
        let tr = g2_curve(&model, 30.0, DriveTarget::Plus, &taus).unwrap();
        for k in 0..taus.len() {
            assert_eq!(tr.g2[k], tr.g2[taus.len() - 1 - k]);
        }
    }

    #[test]
    fn independent_pair_gives_one_half() {
        let model = SystemModel::independent(&[1_000.0, 1_000.0], 33.0, 0.3, 0.0).unwrap();
        let tr = g2_curve(&model, 10.0, DriveTarget::Laser { mhz: 1_000.0 }, &[0.0, 200.0]).unwrap();
        assert!((tr.g2[0] - 0.5).abs() < 1e-9);
        assert!((tr.g2[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn undriven_rate_is_a_normalization_error() {
        let model = SystemModel::independent(&[1_000.0], 33.0, 0.3, 0.0).unwrap();
        let r = g2_curve(&model, 0.0, DriveTarget::Laser { mhz: 1_000.0 }, &[0.0]);
        assert!(matches!(r, Err(Error::Normalization(_))));
    }
}
