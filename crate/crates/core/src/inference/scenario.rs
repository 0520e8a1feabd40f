use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::observables::DriveTarget;
use crate::units::rabi_from_saturation;

/// Physical parameters of a driven pair, as seen by the fitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimerScenario {
    /// (omega1 + omega2) / 2, MHz. Only sets the rotating frame.
    #[serde(default = "default_mean")]
    pub mean_frequency_mhz: f64,
    /// omega1 - omega2, MHz.
    #[serde(default)]
    pub detuning_mhz: f64,
    pub coupling_mhz: f64,
    pub gamma0_mhz: f64,
    pub alpha: f64,
    #[serde(default)]
    pub dephasing_mhz: f64,
    /// s = 2 Omega^2 / Gamma0^2.
    #[serde(default = "default_saturation")]
    pub saturation: f64,
    /// Multiplies simulated rates to match detector counts.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_mean() -> f64 {
    // 785 nm
    381_900_000.0
}

fn default_saturation() -> f64 {
    0.005
}

fn default_scale() -> f64 {
    1.0
}

impl DimerScenario {
    pub fn new(detuning_mhz: f64, coupling_mhz: f64, gamma0_mhz: f64, alpha: f64, dephasing_mhz: f64) -> Self {
        Self {
            mean_frequency_mhz: default_mean(),
            detuning_mhz,
            coupling_mhz,
            gamma0_mhz,
            alpha,
            dephasing_mhz,
            saturation: default_saturation(),
            scale: default_scale(),
        }
    }

    pub fn with_saturation(mut self, s: f64) -> Self {
        self.saturation = s;
        self
    }

    pub fn model(&self) -> Result<SystemModel> {
        let h = 0.5 * self.detuning_mhz;
        SystemModel::dimer(
            self.mean_frequency_mhz + h,
            self.mean_frequency_mhz - h,
            self.coupling_mhz,
            self.gamma0_mhz,
            self.alpha,
            self.dephasing_mhz,
        )
    }

    pub fn rabi_mhz(&self) -> f64 {
        rabi_from_saturation(self.saturation, self.gamma0_mhz)
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Coupling => self.coupling_mhz,
            Param::Detuning => self.detuning_mhz,
            Param::Gamma0 => self.gamma0_mhz,
            Param::Alpha => self.alpha,
            Param::Dephasing => self.dephasing_mhz,
            Param::Saturation => self.saturation,
            Param::Scale => self.scale,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        let slot = match p {
            Param::Coupling => &mut self.coupling_mhz,
            Param::Detuning => &mut self.detuning_mhz,
            Param::Gamma0 => &mut self.gamma0_mhz,
            Param::Alpha => &mut self.alpha,
            Param::Dephasing => &mut self.dephasing_mhz,
            Param::Saturation => &mut self.saturation,
            Param::Scale => &mut self.scale,
        };
        *slot = v;
    }
}

/// A fittable quantity of [`DimerScenario`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Coupling,
    Detuning,
    Gamma0,
    Alpha,
    Dephasing,
    Saturation,
    Scale,
}

impl Param {
    pub fn name(&self) -> &'static str {
        match self {
            Param::Coupling => "coupling_mhz",
            Param::Detuning => "detuning_mhz",
            Param::Gamma0 => "gamma0_mhz",
            Param::Alpha => "alpha",
            Param::Dephasing => "dephasing_mhz",
            Param::Saturation => "saturation",
            Param::Scale => "scale",
        }
    }

    pub fn default_bounds(&self) -> (f64, f64) {
        match self {
            Param::Coupling => (-5000.0, 5000.0),
            Param::Detuning => (-1.0e5, 1.0e5),
            Param::Gamma0 => (1.0, 200.0),
            Param::Alpha => (0.01, 0.99),
            Param::Dephasing => (0.0, 100.0),
            Param::Saturation => (1e-6, 1e4),
            Param::Scale => (0.0, f64::INFINITY),
        }
    }

    /// Magnitude below which a parameter is normalized by this floor rather
    /// than by its own starting value.
    pub(crate) fn typical(&self) -> f64 {
        match self {
            Param::Coupling | Param::Detuning | Param::Gamma0 => 1.0,
            Param::Alpha => 0.01,
            Param::Dephasing => 0.1,
            Param::Saturation => 1e-3,
            Param::Scale => f64::MIN_POSITIVE,
        }
    }
}

/// Which curve the data describe.
///
/// * `Spectrum`: x = laser frequency minus the mean frequency (MHz),
///   y = scale * sideband rate (photons/s).
/// * `G2`: x = delay (ns), `group` indexes `targets`.
/// * `Lifetime`: x = 0 for |+>, 1 for |->, y = fitted lifetime (ns).
/// * `Extinction`: x = detuning (MHz), y = height ratio.
/// * `Saturation`: like `Spectrum`, `group` indexes `saturations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    Spectrum,
    G2 { targets: Vec<DriveTarget> },
    Lifetime,
    Extinction,
    Saturation { saturations: Vec<f64> },
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::Spectrum => "spectrum",
            Observable::G2 { .. } => "g2",
            Observable::Lifetime => "lifetime",
            Observable::Extinction => "extinction",
            Observable::Saturation { .. } => "saturation",
        }
    }

    pub(crate) fn groups(&self) -> usize {
        match self {
            Observable::G2 { targets } => targets.len(),
            Observable::Saturation { saturations } => saturations.len(),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Observable::G2 { targets } if targets.is_empty() => {
                Err(Error::InvalidInput("g2 observable needs at least one drive target".into()))
            }
            Observable::Saturation { saturations } => {
                if saturations.is_empty() || saturations.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    Err(Error::InvalidInput("saturation observable needs positive saturation values".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// One measurement: `y +- sigma` at `x` in curve `group`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    #[serde(default)]
    pub group: usize,
}
