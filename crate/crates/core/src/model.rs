//! Physical data model: emitters, medium, couplings and dressed states.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{DEBYE, EPSILON_0, PLANCK};

/// Closest approach for which the point-dipole coupling is evaluated, nm.
pub const MIN_SEPARATION_NM: f64 = 0.1;

/// A single two-level emitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// Transition frequency, MHz.
    pub omega_mhz: f64,
    /// Position, nm.
    pub position_nm: [f64; 3],
    /// Unit transition-dipole orientation.
    pub dipole: [f64; 3],
    /// Transition-dipole magnitude, Debye.
    pub dipole_moment_debye: f64,
}

impl EmitterParams {
    /// Builds an emitter, normalizing nothing: the orientation must already be
    /// a unit vector.
    pub fn new(omega_mhz: f64, position_nm: [f64; 3], dipole: [f64; 3], dipole_moment_debye: f64) -> Result<Self> {
        let e = Self { omega_mhz, position_nm, dipole, dipole_moment_debye };
        e.validate()?;
        Ok(e)
    }

    /// Emitter at the origin with a dipole along z and unit moment.
    pub fn at_frequency(omega_mhz: f64) -> Self {
        Self { omega_mhz, position_nm: [0.0; 3], dipole: [0.0, 0.0, 1.0], dipole_moment_debye: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_mhz > 0.0) || !self.omega_mhz.is_finite() {
            return Err(Error::Model(format!("transition frequency must be positive, got {}", self.omega_mhz)));
        }
        let norm = self.dipole_vec().norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Model(format!("dipole orientation must be a unit vector, |d| = {norm}")));
        }
        if !(self.dipole_moment_debye >= 0.0) {
            return Err(Error::Model("dipole moment must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::from(self.position_nm)
    }

    pub fn dipole_vec(&self) -> Vector3<f64> {
        Vector3::from(self.dipole)
    }
}

/// Host medium of the emitters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumParams {
    pub epsilon_r: f64,
    /// Transition wavelength, nm.
    pub wavelength_nm: f64,
}

impl Default for MediumParams {
    fn default() -> Self {
        Self { epsilon_r: 1.0, wavelength_nm: 785.0 }
    }
}

impl MediumParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_r >= 1.0) {
            return Err(Error::Model(format!("epsilon_r must be >= 1, got {}", self.epsilon_r)));
        }
        if !(self.wavelength_nm > 0.0) {
            return Err(Error::Model("wavelength must be positive".into()));
        }
        Ok(())
    }
}

/// How the dissipative (ZPL) cross terms are evaluated from geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DecayModel {
    /// Sub-wavelength limit: the cross rate is the ZPL rate times the
    /// dipole-orientation overlap.
    #[default]
    PointDipole,
    /// Imaginary part of the free-space dyadic Green's function.
    GreenFunction { wavelength_nm: f64 },
}

/// Drive laser description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Per-emitter Rabi frequencies, MHz.
    pub rabi_mhz: Vec<f64>,
    /// Laser frequency, MHz.
    pub laser_mhz: f64,
}

impl DriveParams {
    /// Same Rabi frequency on every emitter.
    pub fn uniform(n: usize, rabi_mhz: f64, laser_mhz: f64) -> Self {
        Self { rabi_mhz: vec![rabi_mhz; n], laser_mhz }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.rabi_mhz.len() != n {
            return Err(Error::Shape(format!("drive has {} Rabi frequencies for {n} emitters", self.rabi_mhz.len())));
        }
        if self.rabi_mhz.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidInput("Rabi frequencies must be finite and >= 0".into()));
        }
        if !self.laser_mhz.is_finite() {
            return Err(Error::InvalidInput("laser frequency must be finite".into()));
        }
        Ok(())
    }
}

/// Coherent near-field dipole-dipole coupling between two emitters, MHz.
///
/// `J = (d_i.d_j - 3 (d_i.r)(d_j.r)) / (4 pi eps0 eps_r r^3)`, converted from
/// energy to ordinary frequency with Planck's constant.
pub fn dipole_coupling(ei: &EmitterParams, ej: &EmitterParams, medium: &MediumParams) -> Result<f64> {
    let sep = ej.position() - ei.position();
    let r = sep.norm();
    if !(r > MIN_SEPARATION_NM) {
        return Err(Error::DegenerateGeometry(format!(
            "emitter separation {r:.3e} nm is below {MIN_SEPARATION_NM} nm"
        )));
    }
    let rhat = sep / r;
    let di = ei.dipole_vec();
    let dj = ej.dipole_vec();
    let angular = di.dot(&dj) - 3.0 * (di.dot(&rhat) * dj.dot(&rhat));
    Ok(angular * coupling_scale_mhz(ei.dipole_moment_debye * ej.dipole_moment_debye, r, medium))
}

/// `mu_i mu_j / (4 pi eps0 eps_r r^3 h)` in MHz for a moment product in
/// Debye^2 and a separation in nm.
pub fn coupling_scale_mhz(moment_product_debye2: f64, r_nm: f64, medium: &MediumParams) -> f64 {
    let r_m = r_nm * 1e-9;
    let energy = moment_product_debye2 * DEBYE * DEBYE / (4.0 * PI * EPSILON_0 * medium.epsilon_r * r_m * r_m * r_m);
    energy / PLANCK * 1e-6
}

/// Dissipative cross rate for the ZPL channel, MHz.
///
/// `zpl_rate_mhz` is the single-emitter ZPL rate alpha*Gamma0.
pub fn collective_decay(ei: &EmitterParams, ej: &EmitterParams, zpl_rate_mhz: f64, decay: &DecayModel) -> f64 {
    let di = ei.dipole_vec();
    let dj = ej.dipole_vec();
    match decay {
        DecayModel::PointDipole => zpl_rate_mhz * di.dot(&dj),
        DecayModel::GreenFunction { wavelength_nm } => {
            let sep = ej.position() - ei.position();
            let r = sep.norm();
            if r == 0.0 {
                return zpl_rate_mhz * di.dot(&dj);
            }
            let rhat = sep / r;
            let x = 2.0 * PI * r / wavelength_nm;
            let dd = di.dot(&dj);
            let dr = di.dot(&rhat) * dj.dot(&rhat);
            let (s, c) = x.sin_cos();
            let far = (dd - dr) * s / x;
            let near = (dd - 3.0 * dr) * (c / (x * x) - s / (x * x * x));
            1.5 * zpl_rate_mhz * (far + near)
        }
    }
}

/// Complete model of a cluster of coupled emitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub emitters: Vec<EmitterParams>,
    /// Total excited-state decay linewidth Gamma0, MHz.
    pub gamma0_mhz: f64,
    /// Debye-Waller/Franck-Condon factor: ZPL fraction of the decay.
    pub alpha: f64,
    /// Pure dephasing (coherence decay) rate, MHz.
    pub dephasing_mhz: f64,
    /// Coherent couplings J_ij, MHz.
    pub coupling_mhz: DMatrix<f64>,
    /// ZPL decay matrix Gamma_ij, MHz (diagonal alpha*Gamma0).
    pub collective_mhz: DMatrix<f64>,
}

impl SystemModel {
    /// Builds a model from explicit coupling matrices and validates it.
    pub fn new(
        emitters: Vec<EmitterParams>,
        gamma0_mhz: f64,
        alpha: f64,
        dephasing_mhz: f64,
        coupling_mhz: DMatrix<f64>,
        collective_mhz: DMatrix<f64>,
    ) -> Result<Self> {
        let m = Self { emitters, gamma0_mhz, alpha, dephasing_mhz, coupling_mhz, collective_mhz };
        m.validate()?;
        Ok(m)
    }

    /// Derives both coupling matrices from positions and dipole orientations.
    pub fn from_geometry(
        emitters: Vec<EmitterParams>,
        medium: &MediumParams,
        gamma0_mhz: f64,
        alpha: f64,
        dephasing_mhz: f64,
        decay: &DecayModel,
    ) -> Result<Self> {
        medium.validate()?;
        let n = emitters.len();
        let zpl = alpha * gamma0_mhz;
        let mut j = DMatrix::zeros(n, n);
        let mut g = DMatrix::from_diagonal_element(n, n, zpl);
        for a in 0..n {
            for b in (a + 1)..n {
                let jab = dipole_coupling(&emitters[a], &emitters[b], medium)?;
                let gab = collective_decay(&emitters[a], &emitters[b], zpl, decay);
                j[(a, b)] = jab;
                j[(b, a)] = jab;
                g[(a, b)] = gab;
                g[(b, a)] = gab;
            }
        }
        Self::new(emitters, gamma0_mhz, alpha, dephasing_mhz, j, g)
    }

    /// Two parallel emitters with coupling `j_mhz` given directly. The ZPL
    /// cross rate takes its aligned-dipole value alpha*Gamma0.
    pub fn dimer(
        omega1_mhz: f64,
        omega2_mhz: f64,
        j_mhz: f64,
        gamma0_mhz: f64,
        alpha: f64,
        dephasing_mhz: f64,
    ) -> Result<Self> {
        let zpl = alpha * gamma0_mhz;
        let emitters = vec![
            EmitterParams::at_frequency(omega1_mhz),
            EmitterParams { position_nm: [1.0, 0.0, 0.0], ..EmitterParams::at_frequency(omega2_mhz) },
        ];
        let j = DMatrix::from_row_slice(2, 2, &[0.0, j_mhz, j_mhz, 0.0]);
        let g = DMatrix::from_row_slice(2, 2, &[zpl, zpl, zpl, zpl]);
        Self::new(emitters, gamma0_mhz, alpha, dephasing_mhz, j, g)
    }

    /// Uncoupled emitters: zero J and no ZPL cross terms.
    pub fn independent(omegas_mhz: &[f64], gamma0_mhz: f64, alpha: f64, dephasing_mhz: f64) -> Result<Self> {
        let n = omegas_mhz.len();
        let emitters = omegas_mhz.iter().map(|&w| EmitterParams::at_frequency(w)).collect();
        Self::new(
            emitters,
            gamma0_mhz,
            alpha,
            dephasing_mhz,
            DMatrix::zeros(n, n),
            DMatrix::from_diagonal_element(n, n, alpha * gamma0_mhz),
        )
    }

    pub fn n_emitters(&self) -> usize {
        self.emitters.len()
    }

    /// Single-emitter ZPL rate alpha*Gamma0, MHz.
    pub fn zpl_rate_mhz(&self) -> f64 {
        self.alpha * self.gamma0_mhz
    }

    /// Sideband rate (1-alpha)*Gamma0 per emitter, MHz.
    pub fn sideband_rate_mhz(&self) -> f64 {
        (1.0 - self.alpha) * self.gamma0_mhz
    }

    /// Mean transition frequency, MHz.
    pub fn mean_frequency_mhz(&self) -> f64 {
        self.emitters.iter().map(|e| e.omega_mhz).sum::<f64>() / self.n_emitters() as f64
    }

    /// Replaces the pair coupling of a dimer, keeping everything else.
    pub fn with_pair_coupling(mut self, j_mhz: f64) -> Self {
        self.coupling_mhz[(0, 1)] = j_mhz;
        self.coupling_mhz[(1, 0)] = j_mhz;
        self
    }

    /// Shifts every transition frequency by `shift_mhz`.
    pub fn translated(mut self, shift_mhz: f64) -> Self {
        for e in &mut self.emitters {
            e.omega_mhz += shift_mhz;
        }
        self
    }

    /// Dressed single-excitation states of a two-emitter model.
    pub fn dressed_states(&self) -> Result<DressedStates> {
        if self.n_emitters() != 2 {
            return Err(Error::InvalidInput(format!(
                "dressed states are defined for two emitters, model has {}",
                self.n_emitters()
            )));
        }
        Ok(eigenmodes(
            self.emitters[0].omega_mhz,
            self.emitters[1].omega_mhz,
            self.coupling_mhz[(0, 1)],
            self.collective_mhz[(0, 1)],
            self.gamma0_mhz,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.emitters.len();
        if n == 0 {
            return Err(Error::Model("model has no emitters".into()));
        }
        for e in &self.emitters {
            e.validate()?;
        }
        if !(self.gamma0_mhz > 0.0) || !self.gamma0_mhz.is_finite() {
            return Err(Error::Model(format!("gamma0 must be positive, got {}", self.gamma0_mhz)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Model(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.dephasing_mhz >= 0.0) || !self.dephasing_mhz.is_finite() {
            return Err(Error::Model(format!("dephasing must be >= 0, got {}", self.dephasing_mhz)));
        }
        for (name, m) in [("coupling", &self.coupling_mhz), ("collective decay", &self.collective_mhz)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Shape(format!("{name} matrix is {}x{}, expected {n}x{n}", m.nrows(), m.ncols())));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Model(format!("{name} matrix has non-finite entries")));
            }
        }
        let zpl = self.zpl_rate_mhz();
        let tol = 1e-12 * (1.0 + zpl);
        for a in 0..n {
            if self.coupling_mhz[(a, a)] != 0.0 {
                return Err(Error::Model("coupling matrix must have zero diagonal".into()));
            }
            if (self.collective_mhz[(a, a)] - zpl).abs() > tol {
                return Err(Error::Model(format!(
                    "collective decay diagonal must equal alpha*gamma0 = {zpl}, got {}",
                    self.collective_mhz[(a, a)]
                )));
            }
            for b in 0..n {
                if self.coupling_mhz[(a, b)] != self.coupling_mhz[(b, a)] {
                    return Err(Error::Model("coupling matrix must be symmetric".into()));
                }
                if self.collective_mhz[(a, b)] != self.collective_mhz[(b, a)] {
                    return Err(Error::Model("collective decay matrix must be symmetric".into()));
                }
                if a != b && self.collective_mhz[(a, b)].abs() > zpl + tol {
                    return Err(Error::Model(format!(
                        "collective cross rate {} exceeds alpha*gamma0 = {zpl}",
                        self.collective_mhz[(a, b)]
                    )));
                }
            }
        }
        let eig = SymmetricEigen::new(self.collective_mhz.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-9 * (1.0 + zpl) {
            return Err(Error::Model(format!(
                "collective decay matrix is not positive semidefinite (eigenvalue {min:.3e})"
            )));
        }
        Ok(())
    }
}

/// Single-excitation eigenstates of a coupled pair.
///
/// `plus` is the state whose amplitudes on |eg> and |ge> share a sign, which
/// is the superradiant state for parallel dipoles. It sits above `minus` when
/// J > 0 and below it when J < 0. Amplitudes are ordered (|eg>, |ge>) with
/// |eg> meaning the first emitter is excited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedStates {
    pub freq_plus_mhz: f64,
    pub freq_minus_mhz: f64,
    /// Mixing angle in [0, pi/2].
    pub theta: f64,
    /// Generalized detuning sqrt(Delta^2 + 4 J^2), MHz.
    pub delta_tilde_mhz: f64,
    pub gamma_plus_mhz: f64,
    pub gamma_minus_mhz: f64,
    pub plus: [f64; 2],
    pub minus: [f64; 2],
}

impl DressedStates {
    /// Splitting freq_plus - freq_minus, MHz.
    pub fn splitting_mhz(&self) -> f64 {
        self.freq_plus_mhz - self.freq_minus_mhz
    }

    pub fn lifetime_plus_ns(&self) -> f64 {
        crate::units::lifetime_ns(self.gamma_plus_mhz)
    }

    pub fn lifetime_minus_ns(&self) -> f64 {
        crate::units::lifetime_ns(self.gamma_minus_mhz)
    }

    /// Coupling of a uniform drive to each state relative to a single
    /// emitter: (cos(theta) + sin(theta), |cos(theta) - sin(theta)|).
    pub fn drive_factors(&self) -> (f64, f64) {
        let p = (self.plus[0] + self.plus[1]).abs();
        let m = (self.minus[0] + self.minus[1]).abs();
        (p, m)
    }
}

/// Dressed states for bare frequencies `omega1`, `omega2` (MHz), coherent
/// coupling `j`, ZPL cross rate `gamma12` and total linewidth `gamma0`.
///
/// With Delta = omega1 - omega2 the mixing angle obeys
/// tan(theta) = 2|J| / (Delta + Delta~). Decay rates are
/// Gamma0 +/- sin(2 theta) Gamma12: only the ZPL channel interferes.
pub fn eigenmodes(omega1: f64, omega2: f64, j: f64, gamma12: f64, gamma0: f64) -> DressedStates {
    let delta = omega1 - omega2;
    let mean = 0.5 * (omega1 + omega2);
    let delta_tilde = delta.hypot(2.0 * j);
    // tan(2 theta) = 2|J| / Delta; the half-angle form keeps theta in [0, pi/2]
    // including the J = 0, Delta < 0 corner where 2|J|/(Delta + Delta~) is 0/0.
    let theta = 0.5 * (2.0 * j.abs()).atan2(delta);
    let (s, c) = theta.sin_cos();
    let sin2 = if delta_tilde > 0.0 { 2.0 * j.abs() / delta_tilde } else { 0.0 };
    let sign = if j >= 0.0 { 1.0 } else { -1.0 };
    let (plus, minus) = if j >= 0.0 { ([c, s], [s, -c]) } else { ([s, c], [c, -s]) };
    DressedStates {
        freq_plus_mhz: mean + sign * 0.5 * delta_tilde,
        freq_minus_mhz: mean - sign * 0.5 * delta_tilde,
        theta,
        delta_tilde_mhz: delta_tilde,
        gamma_plus_mhz: gamma0 + sin2 * gamma12,
        gamma_minus_mhz: gamma0 - sin2 * gamma12,
        plus,
        minus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix2;
    use proptest::prelude::*;

    fn emitter(pos: [f64; 3], dipole: [f64; 3]) -> EmitterParams {
        EmitterParams::new(1.0e6, pos, dipole, 3.0).unwrap()
    }

    #[test]
    fn h_aggregate_coupling_is_positive() {
        let m = MediumParams::default();
        let a = emitter([0.0; 3], [0.0, 0.0, 1.0]);
        let b = emitter([10.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
        let j = dipole_coupling(&a, &b, &m).unwrap();
        let scale = coupling_scale_mhz(9.0, 10.0, &m);
        assert!(j > 0.0);
        assert_relative_eq!(j, scale, max_relative = 1e-14);
        // 1 D^2 at 10 nm in vacuum is ~150.9 MHz.
        assert_relative_eq!(coupling_scale_mhz(1.0, 10.0, &m), 150.9, max_relative = 1e-3);
    }

    #[test]
    fn j_aggregate_coupling_is_minus_two_scale() {
        let m = MediumParams { epsilon_r: 2.5, ..Default::default() };
        let a = emitter([0.0; 3], [1.0, 0.0, 0.0]);
        let b = emitter([7.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let j = dipole_coupling(&a, &b, &m).unwrap();
        assert_relative_eq!(j, -2.0 * coupling_scale_mhz(9.0, 7.0, &m), max_relative = 1e-14);
    }

    #[test]
    fn magic_angle_coupling_vanishes() {
        let c = (1.0f64 / 3.0).sqrt();
        let s = (2.0f64 / 3.0).sqrt();
        let a = emitter([0.0; 3], [s, 0.0, c]);
        let b = emitter([0.0, 0.0, 5.0], [s, 0.0, c]);
        let j = dipole_coupling(&a, &b, &MediumParams::default()).unwrap();
        assert!(j.abs() < 1e-12 * coupling_scale_mhz(9.0, 5.0, &MediumParams::default()));
    }

    #[test]
    fn coincident_emitters_are_rejected() {
        let a = emitter([1.0, 1.0, 1.0], [0.0, 0.0, 1.0]);
        let b = emitter([1.0, 1.0, 1.05], [0.0, 0.0, 1.0]);
        assert!(matches!(dipole_coupling(&a, &b, &MediumParams::default()), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn invalid_emitters_and_media() {
        assert!(EmitterParams::new(-1.0, [0.0; 3], [0.0, 0.0, 1.0], 1.0).is_err());
        assert!(EmitterParams::new(1.0, [0.0; 3], [0.0, 0.0, 1.1], 1.0).is_err());
        assert!(MediumParams { epsilon_r: 0.5, wavelength_nm: 785.0 }.validate().is_err());
    }

    #[test]
    fn point_dipole_decay_limits() {
        let a = emitter([0.0; 3], [0.0, 0.0, 1.0]);
        let b = emitter([10.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
        let c = emitter([10.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let zpl = 0.11 * 33.0;
        assert_relative_eq!(collective_decay(&a, &b, zpl, &DecayModel::PointDipole), 3.63, max_relative = 1e-12);
        assert_eq!(collective_decay(&a, &c, zpl, &DecayModel::PointDipole), 0.0);
        let green = collective_decay(&a, &b, zpl, &DecayModel::GreenFunction { wavelength_nm: 785.0 });
        assert_relative_eq!(green, 3.63, max_relative = 5e-3);
    }

    #[test]
    fn green_function_limit_for_collinear_dipoles() {
        let a = emitter([0.0; 3], [1.0, 0.0, 0.0]);
        let b = emitter([2.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let green = collective_decay(&a, &b, 1.0, &DecayModel::GreenFunction { wavelength_nm: 785.0 });
        assert_relative_eq!(green, 1.0, max_relative = 1e-3);
        assert!(green < 1.0);
    }

    #[test]
    fn model_validation_errors() {
        assert!(SystemModel::dimer(1e6, 1e6, 10.0, 33.0, 1.5, 0.0).is_err());
        assert!(SystemModel::dimer(1e6, 1e6, 10.0, -1.0, 0.1, 0.0).is_err());
        assert!(SystemModel::dimer(1e6, 1e6, 10.0, 33.0, 0.1, -1.0).is_err());
        let mut m = SystemModel::dimer(1e6, 1e6, 10.0, 33.0, 0.1, 0.0).unwrap();
        m.collective_mhz[(0, 1)] = 5.0;
        m.collective_mhz[(1, 0)] = 5.0;
        assert!(matches!(m.validate(), Err(Error::Model(_))));
    }

    #[test]
    fn geometric_model_matches_direct_couplings() {
        let emitters = vec![
            emitter([0.0; 3], [0.0, 0.0, 1.0]),
            emitter([8.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
            emitter([0.0, 8.0, 0.0], [0.0, 0.0, 1.0]),
        ];
        let medium = MediumParams::default();
        let m =
            SystemModel::from_geometry(emitters.clone(), &medium, 33.0, 0.3, 1.0, &DecayModel::PointDipole).unwrap();
        assert_eq!(m.coupling_mhz[(0, 1)], dipole_coupling(&emitters[0], &emitters[1], &medium).unwrap());
        assert_relative_eq!(m.collective_mhz[(1, 2)], 9.9, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_dimer_is_symmetric_superposition() {
        let d = eigenmodes(1000.0, 1000.0, -116.0, 0.135 * 37.0, 37.0);
        assert_relative_eq!(d.delta_tilde_mhz, 232.0, max_relative = 1e-12);
        assert_relative_eq!(d.theta, std::f64::consts::FRAC_PI_4, max_relative = 1e-12);
        assert_relative_eq!(d.splitting_mhz(), -232.0, max_relative = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(d.plus[0], h, max_relative = 1e-12);
        assert_relative_eq!(d.plus[1], h, max_relative = 1e-12);
        assert_relative_eq!(d.minus[0], -d.minus[1], max_relative = 1e-12);
        assert_relative_eq!(d.gamma_plus_mhz, 37.0 * 1.135, max_relative = 1e-12);
    }

    #[test]
    fn uncoupled_dimer_keeps_bare_states() {
        let d = eigenmodes(1100.0, 1000.0, 0.0, 3.0, 33.0);
        assert_eq!(d.theta, 0.0);
        assert_eq!(d.gamma_plus_mhz, 33.0);
        assert_eq!(d.gamma_minus_mhz, 33.0);
        assert_eq!(d.plus, [1.0, 0.0]);
        let d = eigenmodes(1000.0, 1100.0, 0.0, 3.0, 33.0);
        assert_relative_eq!(d.freq_plus_mhz, 1100.0);
        assert!(d.plus[1] > 0.999_999);
    }

    #[test]
    fn fig2_pair_dressed_states() {
        // Delta~ = sqrt(2600^2 + 4 * 1020^2), lifetimes via Gamma0 +/- sin2theta*alpha*Gamma0.
        let d = eigenmodes(2600.0, 0.0, 1020.0, 0.11 * 33.0, 33.0);
        assert_relative_eq!(d.delta_tilde_mhz, 3304.7844, max_relative = 1e-7);
        assert_relative_eq!((2.0 * d.theta).sin(), 0.617286, max_relative = 1e-5);
        assert_relative_eq!(d.lifetime_plus_ns(), 4.5162, max_relative = 1e-4);
        assert_relative_eq!(d.lifetime_minus_ns(), 5.1744, max_relative = 1e-4);
    }

    fn numeric_pair(omega1: f64, omega2: f64, j: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let eig = SymmetricEigen::new(Matrix2::new(omega1, j, j, omega2));
        let (lo, hi) = if eig.eigenvalues[0] < eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
        let v = |k: usize| [eig.eigenvectors[(0, k)], eig.eigenvectors[(1, k)]];
        ([eig.eigenvalues[lo], eig.eigenvalues[hi]], v(lo), v(hi))
    }

    proptest! {
        #[test]
        fn splitting_obeys_generalized_detuning(delta in -5000.0f64..5000.0, j in -2000.0f64..2000.0) {
            let d = eigenmodes(10_000.0 + delta, 10_000.0, j, 3.0, 33.0);
            let split2 = d.splitting_mhz().powi(2);
            let expect = delta * delta + 4.0 * j * j;
            prop_assert!((split2 - expect).abs() <= 1e-9 * expect.max(1e-300));
            prop_assert!((d.gamma_plus_mhz + d.gamma_minus_mhz - 66.0).abs() < 1e-12);
        }

        #[test]
        fn analytic_vectors_match_diagonalization(delta in -5000.0f64..5000.0, j in -2000.0f64..2000.0) {
            prop_assume!(j.abs() > 1e-6);
            let (w1, w2) = (20_000.0 + delta, 20_000.0);
            let d = eigenmodes(w1, w2, j, 1.0, 33.0);
            let (vals, lo, hi) = numeric_pair(w1, w2, j);
            let (plus_vec, minus_vec, plus_val) =
                if j > 0.0 { (hi, lo, vals[1]) } else { (lo, hi, vals[0]) };
            let overlap = |a: [f64; 2], b: [f64; 2]| (a[0] * b[0] + a[1] * b[1]).powi(2);
            prop_assert!(overlap(d.plus, plus_vec) >= 1.0 - 1e-10);
            prop_assert!(overlap(d.minus, minus_vec) >= 1.0 - 1e-10);
            prop_assert!((d.freq_plus_mhz - plus_val).abs() < 1e-9 * w1.abs());
            prop_assert!(d.plus[0] * d.plus[1] >= 0.0);
        }

        #[test]
        fn coupling_is_symmetric_and_cubic(
            x in 1.0f64..50.0, y in -20.0f64..20.0, z in -20.0f64..20.0,
            t1 in 0.0f64..3.1, p1 in 0.0f64..6.2, t2 in 0.0f64..3.1, p2 in 0.0f64..6.2,
        ) {
            let dir = |t: f64, p: f64| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
            let n = |v: [f64; 3]| { let l = Vector3::from(v).norm(); [v[0] / l, v[1] / l, v[2] / l] };
            let m = MediumParams::default();
            let a = emitter([0.0; 3], n(dir(t1, p1)));
            let b = emitter([x, y, z], n(dir(t2, p2)));
            let b2 = emitter([2.0 * x, 2.0 * y, 2.0 * z], b.dipole);
            let jab = dipole_coupling(&a, &b, &m).unwrap();
            prop_assert_eq!(jab, dipole_coupling(&b, &a, &m).unwrap());
            let j2 = dipole_coupling(&a, &b2, &m).unwrap();
            prop_assert!((j2 - jab / 8.0).abs() <= 1e-12 * jab.abs().max(1e-300));
        }

        #[test]
        fn degenerate_pair_is_maximally_mixed(j in -2000.0f64..2000.0) {
            prop_assume!(j.abs() > 1e-9);
            let d = eigenmodes(5000.0, 5000.0, j, 1.0, 33.0);
            prop_assert!((d.plus[0].powi(2) - 0.5).abs() < 1e-12);
            prop_assert!((d.plus[1].powi(2) - 0.5).abs() < 1e-12);
        }
    }
}
