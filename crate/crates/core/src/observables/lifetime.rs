use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::spectrum::detected_rate;
use crate::error::{Error, Result};
use crate::lindblad::operators::{basis_index, dimension};
use crate::lindblad::{build_liouvillian, propagate, DensityOperator};
use crate::model::{DriveParams, SystemModel};
use crate::optimize::{levenberg_marquardt, Bounds, LmConfig, NoJacobian};
use crate::units::lifetime_ns;
use crate::C64;

/// Single-excitation state prepared before the decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Plus,
    Minus,
    /// Only emitter `i` excited.
    Single(usize),
}

/// Single-exponential fit over `[window_start_ns, window_end_ns]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub tau_ns: f64,
    /// Rate at t = 0 extrapolated from the fit, photons/s.
    pub amplitude: f64,
    pub window_start_ns: f64,
    pub window_end_ns: f64,
    /// RMS relative deviation of the data from the fit inside the window.
    pub relative_rms: f64,
}

/// Two-component description reported when one exponential does not fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiExponential {
    pub tau_fast_ns: f64,
    pub tau_slow_ns: f64,
    /// Share of the t = 0 rate carried by the fast component.
    pub fast_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeTrace {
    pub times_ns: Vec<f64>,
    /// Sideband photon rate, photons/s.
    pub rate: Vec<f64>,
    pub fit: ExponentialFit,
    /// Present when the single-exponential relative RMS exceeds
    /// [`MULTI_EXPONENTIAL_THRESHOLD`].
    pub multi_exponential: Option<MultiExponential>,
}

pub const MULTI_EXPONENTIAL_THRESHOLD: f64 = 1e-3;

fn initial_state(model: &SystemModel, initial: InitialState) -> Result<(DensityOperator, f64)> {
    let n = model.n_emitters();
    let mut psi = DVector::<C64>::zeros(dimension(n));
    let tau_est = match initial {
        InitialState::Single(i) => {
            if i >= n {
                return Err(Error::InvalidInput(format!("emitter {i} does not exist in a model of {n}")));
            }
            psi[basis_index(n, &[i])] = C64::new(1.0, 0.0);
            lifetime_ns(model.gamma0_mhz)
        }
        InitialState::Plus | InitialState::Minus => {
            if n != 2 {
                return Err(Error::Model(format!("dressed states need a pair, got {n} emitters")));
            }
            let ds = model.dressed_states()?;
            let (amp, gamma) = if initial == InitialState::Plus {
                (ds.plus, ds.gamma_plus_mhz)
            } else {
                (ds.minus, ds.gamma_minus_mhz)
            };
            psi[basis_index(2, &[0])] = C64::new(amp[0], 0.0);
            psi[basis_index(2, &[1])] = C64::new(amp[1], 0.0);
            lifetime_ns(gamma)
        }
    };
    Ok((DensityOperator::pure(&psi)?, tau_est))
}

/// Free decay of a prepared single-excitation state and its lifetime.
///
/// The fit window `[0.1 tau, 3 tau]` around the expected lifetime skips the
/// early transient from residual admixture of the other eigenstate.
pub fn lifetime_trace(model: &SystemModel, initial: InitialState, times_ns: &[f64]) -> Result<LifetimeTrace> {
    let (rho0, tau_est) = initial_state(model, initial)?;
    let l = build_liouvillian(model, &DriveParams::uniform(model.n_emitters(), 0.0, model.mean_frequency_mhz()))?;
    let states = propagate(&l, &rho0, times_ns)?;
    let rate: Vec<f64> = states.iter().map(|r| detected_rate(model, r)).collect();

    let (w0, w1) = (0.1 * tau_est, 3.0 * tau_est);
    let window: Vec<(f64, f64)> = times_ns
        .iter()
        .zip(&rate)
        .filter(|(t, r)| **t >= w0 && **t <= w1 && **r > 0.0)
        .map(|(&t, &r)| (t, r))
        .collect();
    if window.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 samples in the fit window [{w0:.3}, {w1:.3}] ns")));
    }
    // ordinary least squares on ln(rate) = ln(A) - t / tau
    let m = window.len() as f64;
    let (st, sy) = window.iter().fold((0.0, 0.0), |(a, b), &(t, r)| (a + t, b + r.ln()));
    let (tm, ym) = (st / m, sy / m);
    let (sxy, sxx) =
        window.iter().fold((0.0, 0.0), |(a, b), &(t, r)| (a + (t - tm) * (r.ln() - ym), b + (t - tm) * (t - tm)));
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Numerical("emission does not decay inside the fit window".into()));
    }
    let ln_a = ym - slope * tm;
    let rel: f64 = window.iter().map(|&(t, r)| ((ln_a + slope * t).exp() / r - 1.0).powi(2)).sum::<f64>() / m;
    let fit = ExponentialFit {
        tau_ns: -1.0 / slope,
        amplitude: ln_a.exp(),
        window_start_ns: w0,
        window_end_ns: w1,
        relative_rms: rel.sqrt(),
    };
    let multi_exponential =
        if fit.relative_rms > MULTI_EXPONENTIAL_THRESHOLD { biexponential(times_ns, &rate, &fit) } else { None };
    Ok(LifetimeTrace { times_ns: times_ns.to_vec(), rate, fit, multi_exponential })
}

fn biexponential(times: &[f64], rate: &[f64], single: &ExponentialFit) -> Option<MultiExponential> {
    let pts: Vec<(f64, f64)> = times.iter().zip(rate).filter(|(_, r)| **r > 0.0).map(|(&t, &r)| (t, r)).collect();
    let scale = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let k = 1.0 / single.tau_ns;
    // relative residuals weight the tail as much as the peak
    let resid = |p: &[f64]| {
        Ok(DVector::from_iterator(
            pts.len(),
            pts.iter().map(|&(t, r)| (p[0] * (-p[1] * t).exp() + p[2] * (-p[3] * t).exp()) * scale / r - 1.0),
        ))
    };
    let bounds = Bounds { lower: vec![0.0, 1e-3 * k, 0.0, 1e-3 * k], upper: vec![10.0, 1e3 * k, 10.0, 1e3 * k] };
    let out = levenberg_marquardt(
        resid,
        None::<NoJacobian>,
        &[0.5, 1.5 * k, 0.5, 0.7 * k],
        &bounds,
        &LmConfig { max_iterations: 400, ..Default::default() },
    )
    .ok()?;
    let p = &out.params;
    let (fast, slow) = if p[1] >= p[3] { ((p[0], p[1]), (p[2], p[3])) } else { ((p[2], p[3]), (p[0], p[1])) };
    let total = fast.0 + slow.0;
    (total > 0.0).then(|| MultiExponential {
        tau_fast_ns: 1.0 / fast.1,
        tau_slow_ns: 1.0 / slow.1,
        fast_weight: fast.0 / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::spectrum::linear_scan;

    #[test]
    fn single_emitter_lifetime() {
        let model = SystemModel::independent(&[10_000.0], 33.0, 0.3, 0.0).unwrap();
        let tr = lifetime_trace(&model, InitialState::Single(0), &linear_scan(0.0, 20.0, 201)).unwrap();
        assert!((tr.fit.tau_ns - lifetime_ns(33.0)).abs() < 1e-6 * tr.fit.tau_ns);
        assert!((tr.fit.tau_ns - 4.823).abs() < 1e-3);
        assert!(tr.multi_exponential.is_none());
    }

    #[test]
    fn resonant_pair_rates_follow_one_plus_minus_alpha() {
        let model = SystemModel::dimer(10_000.0, 10_000.0, 500.0, 33.0, 0.11, 0.0).unwrap();
        let t = linear_scan(0.0, 30.0, 301);
        let p = lifetime_trace(&model, InitialState::Plus, &t).unwrap();
        let m = lifetime_trace(&model, InitialState::Minus, &t).unwrap();
        let ratio = p.fit.tau_ns / m.fit.tau_ns;
        assert!((ratio - 0.89 / 1.11).abs() < 1e-6, "{ratio}");
        let sum = 1.0 / p.fit.tau_ns + 1.0 / m.fit.tau_ns;
        assert!((sum * lifetime_ns(33.0) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn local_excitation_in_resonant_pair_is_biexponential() {
        let model = SystemModel::dimer(10_000.0, 10_000.0, 0.0, 33.0, 0.6, 0.0).unwrap();
        let t = linear_scan(0.0, 40.0, 401);
        let tr = lifetime_trace(&model, InitialState::Single(0), &t).unwrap();
        let multi = tr.multi_exponential.expect("two components");
        let fast = lifetime_ns(33.0 * 1.6);
        let slow = lifetime_ns(33.0 * 0.4);
        assert!((multi.tau_fast_ns / fast - 1.0).abs() < 1e-3, "{multi:?}");
        assert!((multi.tau_slow_ns / slow - 1.0).abs() < 1e-3, "{multi:?}");
    }

    #[test]
    fn bad_selectors() {
        let model = SystemModel::independent(&[10_000.0], 33.0, 0.3, 0.0).unwrap();
        assert!(lifetime_trace(&model, InitialState::Single(3), &[0.0, 1.0]).is_err());
        assert!(lifetime_trace(&model, InitialState::Plus, &[0.0, 1.0]).is_err());
        assert!(lifetime_trace(&model, InitialState::Single(0), &[0.0, 100.0]).is_err());
    }
}
