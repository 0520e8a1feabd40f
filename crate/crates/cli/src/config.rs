//! Run configuration: one JSON document per run, one task per document.
//!
//! Parsing is strict (unknown fields are rejected) and is followed by a full
//! validation pass, so a config that parses is safe to execute. Every error
//! carries the dotted path of the offending field, e.g. `model.alpha`.

use std::path::{Path, PathBuf};

use dimerlab_core::inference::{DimerScenario, FitOptions, Observable, Param};
use dimerlab_core::lindblad::MAX_EMITTERS;
use dimerlab_core::model::DecayModel;
use dimerlab_core::observables::{dressed_scan, linear_scan, DriveTarget, InitialState, ResonanceMcParams};
use dimerlab_core::units::rabi_from_saturation;
use dimerlab_core::{EmitterParams, MediumParams, SystemModel};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Not needed by `baseline-prob`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    pub task: TaskConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative paths resolve against the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Transition frequency of each emitter, MHz.
    pub frequencies_mhz: Vec<f64>,
    pub gamma0_mhz: f64,
    /// ZPL branching ratio.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub dephasing_mhz: f64,
    #[serde(default)]
    pub couplings: Couplings,
}

fn default_alpha() -> f64 {
    0.3
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Couplings {
    /// Independent emitters.
    #[default]
    None,
    /// Two emitters with coupling J and aligned dipoles.
    Pair { j_mhz: f64 },
    /// Explicit symmetric matrices. Without `collective_mhz` the ZPL decay is
    /// diagonal.
    Matrix {
        j_mhz: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        collective_mhz: Option<Vec<Vec<f64>>>,
    },
    /// Couplings from positions and unit dipole orientations.
    Geometric {
        positions_nm: Vec<[f64; 3]>,
        dipoles: Vec<[f64; 3]>,
        dipole_moment_debye: f64,
        #[serde(default)]
        medium: MediumParams,
        #[serde(default)]
        decay: DecayModel,
    },
}

/// Drive strength, given either as a Rabi frequency or a saturation
/// parameter `s = 2 Omega^2 / Gamma0^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<f64>,
}

impl DriveConfig {
    pub fn rabi(&self, gamma0_mhz: f64) -> f64 {
        match (self.rabi_mhz, self.saturation) {
            (Some(r), _) => r,
            (None, Some(s)) => rabi_from_saturation(s, gamma0_mhz),
            (None, None) => 0.0,
        }
    }

    fn validate(&self, path: &str) -> CliResult<()> {
        match (self.rabi_mhz, self.saturation) {
            (Some(_), Some(_)) | (None, None) => {
                Err(CliError::config(path, "give exactly one of `rabi_mhz` and `saturation`"))
            }
            (Some(v), None) => nonnegative(&format!("{path}.rabi_mhz"), v),
            (None, Some(v)) => nonnegative(&format!("{path}.saturation"), v),
        }
    }
}

/// Laser scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScanConfig {
    /// Uniform grid. With `relative` the bounds are offsets from the mean
    /// emitter frequency.
    Linear {
        start_mhz: f64,
        stop_mhz: f64,
        points: usize,
        #[serde(default)]
        relative: bool,
    },
    /// Dense around every resonance (the dressed states and their mean for a
    /// coupled pair, the bare lines otherwise), `margin` linewidths beyond
    /// the outermost one.
    Dressed {
        #[serde(default = "default_margin")]
        margin: f64,
    },
}

fn default_margin() -> f64 {
    6.0
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig::Dressed { margin: default_margin() }
    }
}

/// Uniform axis starting at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeAxis {
    pub stop_ns: f64,
    pub points: usize,
}

impl TimeAxis {
    fn g2_default() -> Self {
        Self { stop_ns: 10.0, points: 201 }
    }

    fn lifetime_default() -> Self {
        Self { stop_ns: 20.0, points: 401 }
    }

    pub fn values(&self) -> Vec<f64> {
        linear_scan(0.0, self.stop_ns, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        linear_scan(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    Spectrum {
        drive: DriveConfig,
        #[serde(default)]
        scan: ScanConfig,
        /// Divide by the maximum instead of reporting photons/s.
        #[serde(default)]
        normalize: bool,
    },
    G2 {
        drive: DriveConfig,
        targets: Vec<DriveTarget>,
        #[serde(default = "TimeAxis::g2_default")]
        taus: TimeAxis,
    },
    Lifetime {
        initial: Vec<InitialState>,
        #[serde(default = "TimeAxis::lifetime_default")]
        times: TimeAxis,
    },
    Extinction {
        drive: DriveConfig,
        /// Bare detuning omega1 - omega2, MHz.
        deltas_mhz: Axis,
    },
    Saturate {
        /// Saturation parameters, one spectrum each.
        saturations: Vec<f64>,
        #[serde(default)]
        scan: ScanConfig,
    },
    Fit {
        observable: Observable,
        free: Vec<FitParamConfig>,
        data: DataSource,
        /// Drive of the simulated observable, as a saturation parameter.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        saturation: Option<f64>,
        #[serde(default)]
        options: FitTaskOptions,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        profile: Option<ProfileConfig>,
    },
    BaselineProb {
        #[serde(default)]
        mc: ResonanceMcParams,
        /// Sample counts to report; defaults to `mc.n_samples` alone.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        sample_counts: Vec<u64>,
    },
}

impl TaskConfig {
    pub fn name(&self) -> &'static str {
        match self {
            TaskConfig::Spectrum { .. } => "spectrum",
            TaskConfig::G2 { .. } => "g2",
            TaskConfig::Lifetime { .. } => "lifetime",
            TaskConfig::Extinction { .. } => "extinction",
            TaskConfig::Saturate { .. } => "saturate",
            TaskConfig::Fit { .. } => "fit",
            TaskConfig::BaselineProb { .. } => "baseline-prob",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParamConfig {
    pub param: Param,
    /// Starting value; the model value when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitTaskOptions {
    #[serde(default = "default_fit_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub multi_start: usize,
}

fn default_fit_iterations() -> usize {
    FitOptions::default().max_iterations
}

impl Default for FitTaskOptions {
    fn default() -> Self {
        Self { max_iterations: default_fit_iterations(), multi_start: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// CSV with columns `x,y,sigma` and optionally `group`.
    Csv { path: PathBuf },
    /// Simulated from the model itself on the default axis, with Gaussian
    /// noise of `noise` times the largest value.
    Synthetic {
        #[serde(default)]
        noise: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub param: Param,
    pub grid: Axis,
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "<root>".to_string() } else { path };
        CliError::config(path, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn nonnegative(path: &str, v: f64) -> CliResult<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be finite and >= 0, got {v}")))
    }
}

fn positive(path: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be finite and > 0, got {v}")))
    }
}

fn square(path: &str, m: &[Vec<f64>], n: usize) -> CliResult<DMatrix<f64>> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(CliError::config(path, format!("must be a {n}x{n} matrix")));
    }
    let out = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(CliError::config(path, "entries must be finite"));
    }
    if out != out.transpose() {
        return Err(CliError::config(path, "must be symmetric"));
    }
    Ok(out)
}

impl ModelConfig {
    /// Builds the validated system model.
    pub fn build(&self) -> CliResult<SystemModel> {
        let n = self.frequencies_mhz.len();
        if n == 0 || n > MAX_EMITTERS {
            return Err(CliError::config(
                "model.frequencies_mhz",
                format!("need between 1 and {MAX_EMITTERS} emitters, got {n}"),
            ));
        }
        for (k, &f) in self.frequencies_mhz.iter().enumerate() {
            positive(&format!("model.frequencies_mhz[{k}]"), f)?;
        }
        positive("model.gamma0_mhz", self.gamma0_mhz)?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CliError::config("model.alpha", format!("must be in [0, 1], got {}", self.alpha)));
        }
        nonnegative("model.dephasing_mhz", self.dephasing_mhz)?;
        let invalid = |e: dimerlab_core::Error| CliError::config("model", e.to_string());
        let (g0, a, gp) = (self.gamma0_mhz, self.alpha, self.dephasing_mhz);
        match &self.couplings {
            Couplings::None => SystemModel::independent(&self.frequencies_mhz, g0, a, gp).map_err(invalid),
            Couplings::Pair { j_mhz } => {
                if n != 2 {
                    return Err(CliError::config("model.couplings", format!("`pair` needs 2 emitters, got {n}")));
                }
                if !j_mhz.is_finite() {
                    return Err(CliError::config("model.couplings.j_mhz", "must be finite"));
                }
                let (w1, w2) = (self.frequencies_mhz[0], self.frequencies_mhz[1]);
                SystemModel::dimer(w1, w2, *j_mhz, g0, a, gp).map_err(invalid)
            }
            Couplings::Matrix { j_mhz, collective_mhz } => {
                let j = square("model.couplings.j_mhz", j_mhz, n)?;
                let g = match collective_mhz {
                    Some(c) => square("model.couplings.collective_mhz", c, n)?,
                    None => DMatrix::from_diagonal_element(n, n, a * g0),
                };
                let emitters = self.frequencies_mhz.iter().map(|&w| EmitterParams::at_frequency(w)).collect();
                SystemModel::new(emitters, g0, a, gp, j, g).map_err(invalid)
            }
            Couplings::Geometric { positions_nm, dipoles, dipole_moment_debye, medium, decay } => {
                if positions_nm.len() != n {
                    return Err(CliError::config("model.couplings.positions_nm", format!("need {n} positions")));
                }
                if dipoles.len() != n {
                    return Err(CliError::config("model.couplings.dipoles", format!("need {n} orientations")));
                }
                positive("model.couplings.dipole_moment_debye", *dipole_moment_debye)?;
                let mut emitters = Vec::with_capacity(n);
                for k in 0..n {
                    let e =
                        EmitterParams::new(self.frequencies_mhz[k], positions_nm[k], dipoles[k], *dipole_moment_debye)
                            .map_err(|e| CliError::config(format!("model.couplings.dipoles[{k}]"), e.to_string()))?;
                    emitters.push(e);
                }
                SystemModel::from_geometry(emitters, medium, g0, a, gp, decay).map_err(invalid)
            }
        }
    }

    /// Pair parameters in the form the fitter works with.
    pub fn scenario(&self) -> CliResult<DimerScenario> {
        let Couplings::Pair { j_mhz } = self.couplings else {
            return Err(CliError::config("model.couplings", "fits need a `pair` coupling"));
        };
        let (w1, w2) = (self.frequencies_mhz[0], self.frequencies_mhz[1]);
        let mut s = DimerScenario::new(w1 - w2, j_mhz, self.gamma0_mhz, self.alpha, self.dephasing_mhz);
        s.mean_frequency_mhz = 0.5 * (w1 + w2);
        Ok(s)
    }

    /// Linewidth that sets scan resolution.
    pub fn linewidth_mhz(&self) -> f64 {
        self.gamma0_mhz + 2.0 * self.dephasing_mhz
    }
}

impl ScanConfig {
    pub fn axis(&self, model: &SystemModel, width_mhz: f64) -> CliResult<Vec<f64>> {
        match *self {
            ScanConfig::Linear { start_mhz, stop_mhz, points, relative } => {
                let origin = if relative { model.mean_frequency_mhz() } else { 0.0 };
                Ok(linear_scan(origin + start_mhz, origin + stop_mhz, points))
            }
            ScanConfig::Dressed { margin } => {
                let centers = if model.n_emitters() == 2 && model.coupling_mhz[(0, 1)] != 0.0 {
                    let ds = model.dressed_states().map_err(|e| CliError::numerical("scan", e))?;
                    vec![ds.freq_minus_mhz, model.mean_frequency_mhz(), ds.freq_plus_mhz]
                } else {
                    model.emitters.iter().map(|e| e.omega_mhz).collect()
                };
                Ok(dressed_scan(&centers, width_mhz, margin))
            }
        }
    }

    fn validate(&self, path: &str) -> CliResult<()> {
        match *self {
            ScanConfig::Linear { start_mhz, stop_mhz, points, .. } => {
                if !(start_mhz.is_finite() && stop_mhz.is_finite() && start_mhz < stop_mhz) {
                    return Err(CliError::config(path, "need finite start_mhz < stop_mhz"));
                }
                if points < 2 {
                    return Err(CliError::config(format!("{path}.points"), "need at least 2 points"));
                }
                Ok(())
            }
            ScanConfig::Dressed { margin } => positive(&format!("{path}.margin"), margin),
        }
    }
}

impl TimeAxis {
    fn validate(&self, path: &str) -> CliResult<()> {
        positive(&format!("{path}.stop_ns"), self.stop_ns)?;
        if self.points < 2 {
            return Err(CliError::config(format!("{path}.points"), "need at least 2 points"));
        }
        Ok(())
    }
}

impl Axis {
    fn validate(&self, path: &str) -> CliResult<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.start <= self.stop) {
            return Err(CliError::config(path, "need finite start <= stop"));
        }
        if self.points == 0 || (self.points == 1 && self.start != self.stop) {
            return Err(CliError::config(format!("{path}.points"), "need at least 2 points for a range"));
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn model(&self) -> CliResult<&ModelConfig> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::config("model", format!("required by the {} task", self.task.name())))
    }

    /// Everything that can be checked without simulating.
    pub fn validate(&self) -> CliResult<()> {
        let model = match &self.task {
            TaskConfig::BaselineProb { .. } => None,
            _ => {
                let cfg = self.model()?;
                Some((cfg, cfg.build()?))
            }
        };
        let pair = |what: &str| -> CliResult<()> {
            match &model {
                Some((_, m)) if m.n_emitters() == 2 => Ok(()),
                _ => Err(CliError::config("model.frequencies_mhz", format!("{what} needs exactly 2 emitters"))),
            }
        };
        match &self.task {
            TaskConfig::Spectrum { drive, scan, .. } => {
                drive.validate("task.drive")?;
                scan.validate("task.scan")
            }
            TaskConfig::G2 { drive, targets, taus } => {
                drive.validate("task.drive")?;
                if targets.is_empty() {
                    return Err(CliError::config("task.targets", "need at least one target"));
                }
                for (k, t) in targets.iter().enumerate() {
                    match t {
                        DriveTarget::Laser { mhz } => positive(&format!("task.targets[{k}].mhz"), *mhz)?,
                        _ => pair("a dressed-state target")?,
                    }
                }
                taus.validate("task.taus")
            }
            TaskConfig::Lifetime { initial, times } => {
                if initial.is_empty() {
                    return Err(CliError::config("task.initial", "need at least one initial state"));
                }
                let n = model.as_ref().map_or(0, |(_, m)| m.n_emitters());
                for (k, s) in initial.iter().enumerate() {
                    match s {
                        InitialState::Single(i) if *i >= n => {
                            return Err(CliError::config(
                                format!("task.initial[{k}]"),
                                format!("emitter {i} does not exist ({n} emitters)"),
                            ))
                        }
                        InitialState::Single(_) => {}
                        _ => pair("a dressed initial state")?,
                    }
                }
                times.validate("task.times")
            }
            TaskConfig::Extinction { drive, deltas_mhz } => {
                pair("extinction")?;
                drive.validate("task.drive")?;
                deltas_mhz.validate("task.deltas_mhz")
            }
            TaskConfig::Saturate { saturations, scan } => {
                if saturations.is_empty() {
                    return Err(CliError::config("task.saturations", "need at least one value"));
                }
                for (k, s) in saturations.iter().enumerate() {
                    positive(&format!("task.saturations[{k}]"), *s)?;
                }
                if saturations.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CliError::config("task.saturations", "must be strictly increasing"));
                }
                scan.validate("task.scan")
            }
            TaskConfig::Fit { observable, free, data, saturation, options, profile } => {
                pair("fit")?;
                let (cfg, _) = model.as_ref().expect("checked by pair");
                let scenario = fit_scenario(cfg, free, *saturation)?;
                observable.validate().map_err(|e| CliError::config("task.observable", e.to_string()))?;
                if free.is_empty() {
                    return Err(CliError::config("task.free", "need at least one free parameter"));
                }
                for (k, f) in free.iter().enumerate() {
                    let (lo, hi) = f.param.default_bounds();
                    let (lo, hi) = (f.lower.unwrap_or(lo), f.upper.unwrap_or(hi));
                    let v = scenario.get(f.param);
                    if !(lo < hi) || !(lo..=hi).contains(&v) {
                        return Err(CliError::config(
                            format!("task.free[{k}]"),
                            format!("start {v} outside bounds [{lo}, {hi}]"),
                        ));
                    }
                }
                if options.max_iterations == 0 {
                    return Err(CliError::config("task.options.max_iterations", "must be positive"));
                }
                match data {
                    DataSource::Csv { path } => {
                        load_data(path)?;
                    }
                    DataSource::Synthetic { noise } => nonnegative("task.data.noise", *noise)?,
                }
                if let Some(p) = profile {
                    p.grid.validate("task.profile.grid")?;
                }
                Ok(())
            }
            TaskConfig::BaselineProb { mc, sample_counts } => {
                let mut mc = *mc;
                mc.seed = self.seed;
                mc.validate().map_err(|e| CliError::config("task.mc", e.to_string()))?;
                for (k, n) in sample_counts.iter().enumerate() {
                    if *n < 10_000 {
                        return Err(CliError::config(format!("task.sample_counts[{k}]"), "need at least 10^4 samples"));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Model pair parameters with fit starting values applied.
pub fn fit_scenario(model: &ModelConfig, free: &[FitParamConfig], saturation: Option<f64>) -> CliResult<DimerScenario> {
    let mut s = model.scenario()?;
    if let Some(v) = saturation {
        positive("task.saturation", v)?;
        s.saturation = v;
    }
    for (k, f) in free.iter().enumerate() {
        if free[..k].iter().any(|g| g.param == f.param) {
            return Err(CliError::config(format!("task.free[{k}]"), format!("{} is listed twice", f.param.name())));
        }
        if let Some(v) = f.start {
            if !v.is_finite() {
                return Err(CliError::config(format!("task.free[{k}].start"), "must be finite"));
            }
            s.set(f.param, v);
        }
    }
    Ok(s)
}

/// Reads `x,y,sigma[,group]` data.
pub fn load_data(path: &Path) -> CliResult<Vec<dimerlab_core::inference::DataPoint>> {
    let t = crate::table::Table::read(path)?;
    let col = |name: &str| {
        t.column(name)
            .ok_or_else(|| CliError::config("task.data.path", format!("{}: no `{name}` column", path.display())))
    };
    let (x, y, sigma) = (col("x")?, col("y")?, col("sigma")?);
    let group = t.column("group").unwrap_or_else(|| vec![0.0; x.len()]);
    if x.is_empty() {
        return Err(CliError::config("task.data.path", format!("{}: no data rows", path.display())));
    }
    (0..x.len())
        .map(|k| {
            if !(sigma[k] > 0.0) || group[k] < 0.0 || group[k].fract() != 0.0 {
                return Err(CliError::config(
                    "task.data.path",
                    format!("{}: row {} needs sigma > 0 and a nonnegative integer group", path.display(), k + 1),
                ));
            }
            Ok(dimerlab_core::inference::DataPoint { x: x[k], y: y[k], sigma: sigma[k], group: group[k] as usize })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": { "frequencies_mhz": [381900000], "gamma0_mhz": 33 },
        "task": { "kind": "spectrum", "drive": { "saturation": 0.1 } }
    }"#;

    fn path_of(text: &str) -> String {
        match parse_config(text) {
            Err(CliError::Config { path, .. }) => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        let m = c.model.as_ref().unwrap();
        assert_eq!(m.alpha, 0.3);
        assert_eq!(m.dephasing_mhz, 0.0);
        assert_eq!(m.couplings, Couplings::None);
        assert_eq!(c.seed, 0);
        assert!(matches!(c.task, TaskConfig::Spectrum { scan: ScanConfig::Dressed { .. }, normalize: false, .. }));
    }

    #[test]
    fn out_of_range_alpha_names_the_field() {
        let text = MINIMAL.replace("\"gamma0_mhz\": 33", "\"gamma0_mhz\": 33, \"alpha\": 1.5");
        assert_eq!(path_of(&text), "model.alpha");
    }

    #[test]
    fn unknown_and_missing_fields_are_rejected_with_their_path() {
        let text = MINIMAL.replace("\"gamma0_mhz\": 33", "\"gamma0_mhz\": 33, \"colour\": 1");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        assert_eq!(path_of(&text), "model.colour");
        assert_eq!(path_of(&MINIMAL.replace(", \"gamma0_mhz\": 33", "")), "model");
        assert_eq!(path_of(&MINIMAL.replace("0.1 }", "0.1, \"rabi_mhz\": 3 }")), "task.drive");
        assert_eq!(path_of(&MINIMAL.replace("\"spectrum\"", "\"sepctrum\"")), "task.kind");
        assert_eq!(path_of(&MINIMAL.replace("[381900000]", "[381900000, -1]")), "model.frequencies_mhz[1]");
    }

    #[test]
    fn task_specific_requirements() {
        let text = MINIMAL.replace(
            r#"{ "kind": "spectrum", "drive": { "saturation": 0.1 } }"#,
            r#"{ "kind": "extinction", "drive": { "saturation": 0.1 }, "deltas_mhz": { "start": 0, "stop": 100, "points": 3 } }"#,
        );
        assert_eq!(path_of(&text), "model.frequencies_mhz");
        let baseline = r#"{ "task": { "kind": "baseline-prob", "mc": { "n_samples": 100 } } }"#;
        assert_eq!(path_of(baseline), "task.mc");
        let ok = r#"{ "task": { "kind": "baseline-prob", "mc": { "n_samples": 20000 } } }"#;
        assert!(parse_config(ok).is_ok());
        let no_model = r#"{ "task": { "kind": "lifetime", "initial": ["plus"] } }"#;
        assert_eq!(path_of(no_model), "model");
    }

    #[test]
    fn pair_models_translate_to_scenarios() {
        let m = ModelConfig {
            frequencies_mhz: vec![381_901_300.0, 381_898_700.0],
            gamma0_mhz: 33.0,
            alpha: 0.11,
            dephasing_mhz: 1.0,
            couplings: Couplings::Pair { j_mhz: 1020.0 },
        };
        let s = m.scenario().unwrap();
        assert_eq!(s.detuning_mhz, 2600.0);
        assert_eq!(s.mean_frequency_mhz, 381_900_000.0);
        assert_eq!(s.model().unwrap(), m.build().unwrap());
    }
}
