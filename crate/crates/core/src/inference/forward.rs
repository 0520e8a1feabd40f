use super::scenario::{DimerScenario, Observable};
use crate::error::{Error, Result};
use crate::observables::{
    dressed_scan, excitation_spectrum, extinction_ratio_at, g2_curve, lifetime_trace, linear_scan, InitialState,
};
use crate::units::{lifetime_ns, rabi_from_saturation};

/// Samples on the lifetime axis, which spans 3.2 expected lifetimes so the
/// fit window always covers the same sample indices.
const LIFETIME_SAMPLES: usize = 321;

/// Simulated y at every `(x, group)`.
pub fn forward(scenario: &DimerScenario, observable: &Observable, points: &[(f64, usize)]) -> Result<Vec<f64>> {
    observable.validate()?;
    if let Some(&(_, g)) = points.iter().find(|(_, g)| *g >= observable.groups()) {
        return Err(Error::InvalidInput(format!("group {g} does not exist for a {} observable", observable.name())));
    }
    let model = scenario.model()?;
    let mut out = vec![0.0; points.len()];
    for group in 0..observable.groups() {
        let idx: Vec<usize> = (0..points.len()).filter(|&k| points[k].1 == group).collect();
        if idx.is_empty() {
            continue;
        }
        let xs: Vec<f64> = idx.iter().map(|&k| points[k].0).collect();
        let ys = match observable {
            Observable::Spectrum => spectrum_at(scenario, scenario.rabi_mhz(), &xs)?,
            Observable::Saturation { saturations } => {
                spectrum_at(scenario, rabi_from_saturation(saturations[group], scenario.gamma0_mhz), &xs)?
            }
            Observable::G2 { targets } => {
                on_sorted_axis(&xs, |axis| Ok(g2_curve(&model, scenario.rabi_mhz(), targets[group], axis)?.g2))?
            }
            Observable::Extinction => xs
                .iter()
                .map(|&d| Ok(extinction_ratio_at(&model, d, scenario.rabi_mhz())?.ratio))
                .collect::<Result<Vec<f64>>>()?,
            Observable::Lifetime => xs.iter().map(|&x| lifetime_of(scenario, x)).collect::<Result<Vec<f64>>>()?,
        };
        for (k, y) in idx.into_iter().zip(ys) {
            out[k] = y;
        }
    }
    Ok(out)
}

fn spectrum_at(scenario: &DimerScenario, rabi: f64, offsets: &[f64]) -> Result<Vec<f64>> {
    let model = scenario.model()?;
    let mean = scenario.mean_frequency_mhz;
    on_sorted_axis(offsets, |axis| {
        let abs: Vec<f64> = axis.iter().map(|x| mean + x).collect();
        Ok(excitation_spectrum(&model, rabi, &abs)?.signal.iter().map(|s| s * scenario.scale).collect())
    })
}

fn lifetime_of(scenario: &DimerScenario, x: f64) -> Result<f64> {
    let state = if x == 0.0 {
        InitialState::Plus
    } else if x == 1.0 {
        InitialState::Minus
    } else {
        return Err(Error::InvalidInput(format!("lifetime data use x = 0 (plus) or 1 (minus), got {x}")));
    };
    let model = scenario.model()?;
    let ds = model.dressed_states()?;
    let gamma = if state == InitialState::Plus { ds.gamma_plus_mhz } else { ds.gamma_minus_mhz };
    let times = linear_scan(0.0, 3.2 * lifetime_ns(gamma), LIFETIME_SAMPLES);
    Ok(lifetime_trace(&model, state, &times)?.fit.tau_ns)
}

// Evaluates `f` on the sorted, deduplicated axis and maps back to the
// caller's order.
fn on_sorted_axis(xs: &[f64], f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let mut axis = xs.to_vec();
    axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    axis.dedup();
    let ys = f(&axis)?;
    Ok(xs.iter().map(|x| ys[axis.partition_point(|a| a < x)]).collect())
}

/// A reasonable sampling of each observable for synthetic data.
pub fn default_axis(scenario: &DimerScenario, observable: &Observable) -> Result<Vec<(f64, usize)>> {
    let spectrum_axis = || -> Result<Vec<f64>> {
        let ds = scenario.model()?.dressed_states()?;
        let m = scenario.mean_frequency_mhz;
        let width = scenario.gamma0_mhz + 2.0 * scenario.dephasing_mhz;
        Ok(dressed_scan(&[ds.freq_minus_mhz - m, 0.0, ds.freq_plus_mhz - m], width, 6.0))
    };
    Ok(match observable {
        Observable::Spectrum => spectrum_axis()?.into_iter().map(|x| (x, 0)).collect(),
        Observable::Saturation { saturations } => {
            let axis = spectrum_axis()?;
            (0..saturations.len()).flat_map(|g| axis.iter().map(move |&x| (x, g))).collect()
        }
        Observable::G2 { targets } => {
            let taus = linear_scan(0.0, 10.0, 101);
            (0..targets.len()).flat_map(|g| taus.iter().map(move |&t| (t, g))).collect()
        }
        Observable::Lifetime => vec![(0.0, 0), (1.0, 0)],
        Observable::Extinction => {
            let j = scenario.coupling_mhz.abs().max(1.0);
            linear_scan(0.0, 8.0 * j, 9).into_iter().map(|d| (d, 0)).collect()
        }
    })
}
