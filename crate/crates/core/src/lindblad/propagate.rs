use nalgebra::DVector;

use super::density::DensityOperator;
use super::liouvillian::Liouvillian;
use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Time-stepping scheme for `d rho/dt = L rho`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Propagation {
    /// Scaling-and-squaring matrix exponential of `L * dt` between output
    /// times, reused while the step is unchanged.
    #[default]
    Exponential,
    /// Adaptive Dormand-Prince 5(4) integration.
    Ode { rtol: f64, atol: f64 },
}

/// rho(t) = exp(L t) rho0 at each of `times_ns`.
pub fn propagate(l: &Liouvillian, rho0: &DensityOperator, times_ns: &[f64]) -> Result<Vec<DensityOperator>> {
    propagate_with(l, rho0, times_ns, Propagation::Exponential)
}

pub fn propagate_with(
    l: &Liouvillian,
    rho0: &DensityOperator,
    times_ns: &[f64],
    method: Propagation,
) -> Result<Vec<DensityOperator>> {
    if rho0.dim() != l.hilbert_dim() {
        return Err(Error::Shape(format!(
            "initial state has dimension {}, generator expects {}",
            rho0.dim(),
            l.hilbert_dim()
        )));
    }
    let vs = evolve_vector(l, &rho0.to_vector(), times_ns, method)?;
    Ok(vs
        .iter()
        .map(|v| {
            let m = DensityOperator::from_vector(v).into_matrix();
            DensityOperator::from_matrix_unchecked((&m + m.adjoint()) * C64::new(0.5, 0.0))
        })
        .collect())
}

/// Evolves an arbitrary vectorized operator; used by the regression
/// theorem where the initial operator is not a normalized state.
pub fn evolve_vector(
    l: &Liouvillian,
    v0: &DVector<C64>,
    times_ns: &[f64],
    method: Propagation,
) -> Result<Vec<DVector<C64>>> {
    if v0.len() != l.generator().nrows() {
        return Err(Error::Shape(format!(
            "vector has length {}, generator has {} rows",
            v0.len(),
            l.generator().nrows()
        )));
    }
    if times_ns.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput("times must be finite and nonnegative".into()));
    }
    if times_ns.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("times must be sorted".into()));
    }
    match method {
        Propagation::Exponential => Ok(exponential_steps(l.generator(), v0, times_ns)),
        Propagation::Ode { rtol, atol } => dormand_prince(l.generator(), v0, times_ns, rtol, atol),
    }
}

fn exponential_steps(gen: &CMatrix, v0: &DVector<C64>, times: &[f64]) -> Vec<DVector<C64>> {
    let mut out = Vec::with_capacity(times.len());
    let mut state = v0.clone();
    let mut t_prev = 0.0;
    let mut cached: Option<(f64, CMatrix)> = None;
    for &t in times {
        let dt = t - t_prev;
        if dt > 0.0 {
            let reuse = matches!(&cached, Some((h, _)) if (h - dt).abs() <= 1e-12 * dt);
            if !reuse {
                cached = Some((dt, (gen * C64::new(dt, 0.0)).exp()));
            }
            let (_, prop) = cached.as_ref().unwrap();
            state = prop * &state;
        }
        t_prev = t;
        out.push(state.clone());
    }
    out
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

fn dormand_prince(gen: &CMatrix, v0: &DVector<C64>, times: &[f64], rtol: f64, atol: f64) -> Result<Vec<DVector<C64>>> {
    let norm = gen.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let mut h = 0.1 / norm;
    let mut t = 0.0;
    let mut y = v0.clone();
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            let step = h.min(target - t);
            if step < 1e-14 * target.max(1.0) && target - t > step {
                return Err(Error::Integration(format!("step size underflow at t = {t:.6e} ns")));
            }
            let mut k: Vec<DVector<C64>> = Vec::with_capacity(7);
            for s in 0..7 {
                let mut ys = y.clone();
                for (r, kr) in k.iter().enumerate() {
                    if A[s][r] != 0.0 {
                        ys.axpy(C64::new(step * A[s][r], 0.0), kr, C64::new(1.0, 0.0));
                    }
                }
                k.push(gen * ys);
            }
            let mut y5 = y.clone();
            let mut err = DVector::<C64>::zeros(y.len());
            for s in 0..7 {
                y5.axpy(C64::new(step * B5[s], 0.0), &k[s], C64::new(1.0, 0.0));
                err.axpy(C64::new(step * (B5[s] - B4[s]), 0.0), &k[s], C64::new(1.0, 0.0));
            }
            let e = err
                .iter()
                .zip(y.iter().zip(y5.iter()))
                .map(|(e, (a, b))| e.norm() / (atol + rtol * a.norm().max(b.norm())))
                .fold(0.0, f64::max);
            if !e.is_finite() {
                return Err(Error::Integration("non-finite error estimate".into()));
            }
            if e <= 1.0 {
                t += step;
                if target - t < 1e-15 * target.max(1.0) {
                    t = target;
                }
                y = y5;
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * factor;
            if h < f64::MIN_POSITIVE {
                return Err(Error::Integration(format!("step size underflow at t = {t:.6e} ns")));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{build_liouvillian, operators, steady_state};
    use crate::model::{DriveParams, SystemModel};
    use crate::units::{lifetime_ns, mhz_to_angular};

    fn excited_single() -> DensityOperator {
        let mut m = CMatrix::zeros(2, 2);
        m[(1, 1)] = C64::new(1.0, 0.0);
        DensityOperator::new(m).unwrap()
    }

    #[test]
    fn free_decay_is_exponential() {
        let model = SystemModel::independent(&[1000.0], 33.0, 0.3, 2.0).unwrap();
        let l = build_liouvillian(&model, &DriveParams::uniform(1, 0.0, 1000.0)).unwrap();
        let tau = lifetime_ns(33.0);
        let out = propagate(&l, &excited_single(), &[0.0, tau, 3.0 * tau]).unwrap();
        let p = out[1].populations()[0];
        assert!((p / (-1.0f64).exp() - 1.0).abs() < 1e-8);
        let p3 = out[2].populations()[0];
        assert!((p3 / (-3.0f64).exp() - 1.0).abs() < 1e-8);
        assert_eq!(out[0], excited_single());
    }

    #[test]
    fn long_time_limit_is_steady_state() {
        let model = SystemModel::dimer(1300.0, 0.0 + 1000.0, 400.0, 33.0, 0.11, 1.0).unwrap();
        let l = build_liouvillian(&model, &DriveParams::uniform(2, 60.0, 1400.0)).unwrap();
        let rho_ss = steady_state(&l).unwrap();
        let t_end = 50.0 / mhz_to_angular(33.0) * 1.0;
        let out = propagate(&l, &DensityOperator::ground(2), &[t_end]).unwrap();
        assert!(out[0].max_abs_diff(&rho_ss) < 1e-6);
    }

    #[test]
    fn symmetric_state_decays_with_enhanced_rate() {
        let model = SystemModel::dimer(1000.0, 1000.0, 300.0, 33.0, 0.11, 0.0).unwrap();
        let l = build_liouvillian(&model, &DriveParams::uniform(2, 0.0, 1000.0)).unwrap();
        let mut psi = DVector::zeros(4);
        psi[operators::basis_index(2, &[0])] = C64::new(1.0, 0.0);
        psi[operators::basis_index(2, &[1])] = C64::new(1.0, 0.0);
        let rho0 = DensityOperator::pure(&psi).unwrap();
        let t = 2.0;
        let out = propagate(&l, &rho0, &[t]).unwrap();
        let pop: f64 = out[0].populations().iter().sum();
        let rate = mhz_to_angular(33.0 * 1.11);
        assert!((pop / (-rate * t).exp() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ode_agrees_with_exponential() {
        let model = SystemModel::dimer(1500.0, 1000.0, -250.0, 33.0, 0.2, 3.0).unwrap();
        let l = build_liouvillian(&model, &DriveParams::uniform(2, 80.0, 1200.0)).unwrap();
        let times: Vec<f64> = (0..20).map(|k| 0.37 * k as f64).collect();
        let a = propagate(&l, &DensityOperator::ground(2), &times).unwrap();
        let b = propagate_with(&l, &DensityOperator::ground(2), &times, Propagation::Ode { rtol: 1e-11, atol: 1e-13 })
            .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(x.max_abs_diff(y) < 1e-7);
            x.validate(1e-10, 1e-8).unwrap();
        }
    }

    #[test]
    fn rejects_unsorted_or_negative_times() {
        let model = SystemModel::independent(&[1000.0], 33.0, 0.3, 0.0).unwrap();
        let l = build_liouvillian(&model, &DriveParams::uniform(1, 0.0, 1000.0)).unwrap();
        assert!(propagate(&l, &excited_single(), &[1.0, 0.5]).is_err());
        assert!(propagate(&l, &excited_single(), &[-1.0]).is_err());
        assert!(matches!(propagate(&l, &DensityOperator::ground(2), &[1.0]), Err(Error::Shape(_))));
    }
}
