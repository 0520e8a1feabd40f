use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forward::forward;
use super::scenario::{DataPoint, DimerScenario, Observable, Param};
use crate::error::{Error, Result};
use crate::optimize::{levenberg_marquardt, Bounds, LmConfig, LmOutcome, LmTermination, NoJacobian};

/// A parameter left free, with its box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParam {
    pub param: Param,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

impl FreeParam {
    pub fn new(param: Param) -> Self {
        Self { param, lower: None, upper: None }
    }

    pub fn bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.param.default_bounds();
        (self.lower.unwrap_or(lo), self.upper.unwrap_or(hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    /// Extra starting points drawn uniformly inside the bounds.
    #[serde(default)]
    pub multi_start: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_iterations() -> usize {
    100
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: default_iterations(), multi_start: 0, seed: 0 }
    }
}

/// Weighted least-squares problem over a forward simulator. Free
/// parameters start from their values in `scenario`; the rest stay fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitProblem {
    pub observable: Observable,
    pub scenario: DimerScenario,
    pub free: Vec<FreeParam>,
    pub data: Vec<DataPoint>,
    #[serde(default)]
    pub options: FitOptions,
}

impl FitProblem {
    pub fn new(observable: Observable, scenario: DimerScenario, free: &[Param], data: Vec<DataPoint>) -> Self {
        Self {
            observable,
            scenario,
            free: free.iter().map(|&p| FreeParam::new(p)).collect(),
            data,
            options: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.observable.validate()?;
        if self.data.is_empty() {
            return Err(Error::InvalidInput("fit needs at least one data point".into()));
        }
        if let Some(k) = self.data.iter().position(|d| !(d.sigma > 0.0 && d.sigma.is_finite())) {
            return Err(Error::InvalidInput(format!("data[{k}].sigma must be positive and finite")));
        }
        if let Some(k) = self.data.iter().position(|d| !d.x.is_finite() || !d.y.is_finite()) {
            return Err(Error::InvalidInput(format!("data[{k}] has non-finite values")));
        }
        for (i, f) in self.free.iter().enumerate() {
            if self.free[..i].iter().any(|g| g.param == f.param) {
                return Err(Error::InvalidInput(format!("{} is listed twice", f.param.name())));
            }
            let (lo, hi) = f.bounds();
            let v = self.scenario.get(f.param);
            if !(lo <= hi) || !(v >= lo && v <= hi) {
                return Err(Error::InvalidInput(format!(
                    "initial {} = {v} lies outside its bounds [{lo}, {hi}]",
                    f.param.name()
                )));
            }
        }
        self.scenario.model()?;
        Ok(())
    }

    fn points(&self) -> Vec<(f64, usize)> {
        self.data.iter().map(|d| (d.x, d.group)).collect()
    }

    /// Weighted residuals (model - y) / sigma for a scenario.
    pub fn residuals(&self, scenario: &DimerScenario) -> Result<DVector<f64>> {
        let ys = forward(scenario, &self.observable, &self.points())?;
        Ok(DVector::from_iterator(self.data.len(), self.data.iter().zip(ys).map(|(d, m)| (m - d.y) / d.sigma)))
    }

    pub fn chi2(&self, scenario: &DimerScenario) -> Result<f64> {
        Ok(self.residuals(scenario)?.norm_squared())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// The data do not constrain every free parameter; no covariance.
    SingularJacobian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamValue {
    pub param: Param,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub scenario: DimerScenario,
    pub values: Vec<ParamValue>,
    /// Covariance of the free parameters in `values` order.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub chi2: f64,
    /// Data points minus free parameters.
    pub dof: i64,
    pub status: FitStatus,
    pub iterations: usize,
    /// Index of the starting point that produced the result.
    pub best_start: usize,
}

impl FitResult {
    pub fn value(&self, p: Param) -> Option<f64> {
        self.values.iter().find(|v| v.param == p).map(|v| v.value)
    }
}

/// Levenberg-Marquardt over the free parameters, each normalized by its
/// starting magnitude. With `multi_start > 0` further starts are drawn from
/// a seeded generator and the lowest chi^2 wins; starts run concurrently but
/// the choice is deterministic.
pub fn fit(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    let mut start_scenario = problem.scenario;
    if problem.free.iter().any(|f| f.param == Param::Scale) {
        start_scenario.scale = optimal_scale(problem, &start_scenario)?;
    }
    let starts = start_points(problem, &start_scenario);
    let runs: Vec<Result<(LmOutcome, Vec<f64>)>> = starts.par_iter().map(|s| run_lm(problem, s)).collect();
    let mut best: Option<(usize, LmOutcome, Vec<f64>)> = None;
    let mut first_err = None;
    for (k, r) in runs.into_iter().enumerate() {
        match r {
            Ok((out, scales)) => {
                if best.as_ref().is_none_or(|b| out.cost < b.1.cost) {
                    best = Some((k, out, scales));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let (best_start, out, scales) = match best {
        Some(b) => b,
        None => return Err(first_err.unwrap()),
    };

    let mut scenario = problem.scenario;
    scenario.scale = start_scenario.scale;
    for (k, f) in problem.free.iter().enumerate() {
        scenario.set(f.param, out.params[k] * scales[k]);
    }
    let status = if out.is_singular() {
        FitStatus::SingularJacobian
    } else if out.termination == LmTermination::MaxIterations {
        FitStatus::MaxIterations
    } else {
        FitStatus::Converged
    };
    let covariance = out
        .covariance()
        .map(|c| (0..c.nrows()).map(|i| (0..c.ncols()).map(|j| c[(i, j)] * scales[i] * scales[j]).collect()).collect());
    let values = problem
        .free
        .iter()
        .enumerate()
        .map(|(k, f)| ParamValue {
            param: f.param,
            value: scenario.get(f.param),
            stderr: covariance.as_ref().map(|c: &Vec<Vec<f64>>| c[k][k].max(0.0).sqrt()),
        })
        .collect();
    Ok(FitResult {
        scenario,
        values,
        covariance,
        chi2: out.cost,
        dof: problem.data.len() as i64 - problem.free.len() as i64,
        status,
        iterations: out.iterations,
        best_start,
    })
}

// Closed-form best scale for the current shape parameters.
fn optimal_scale(problem: &FitProblem, scenario: &DimerScenario) -> Result<f64> {
    let mut unit = *scenario;
    unit.scale = 1.0;
    let m = forward(&unit, &problem.observable, &problem.points())?;
    let (num, den) = problem.data.iter().zip(&m).fold((0.0, 0.0), |(a, b), (d, m)| {
        let w = 1.0 / (d.sigma * d.sigma);
        (a + w * m * d.y, b + w * m * m)
    });
    let (lo, hi) = problem.free.iter().find(|f| f.param == Param::Scale).unwrap().bounds();
    Ok(if den > 0.0 { (num / den).clamp(lo, hi) } else { scenario.scale })
}

fn start_points(problem: &FitProblem, first: &DimerScenario) -> Vec<DimerScenario> {
    let mut out = vec![*first];
    for k in 0..problem.options.multi_start {
        let mut rng = ChaCha8Rng::seed_from_u64(problem.options.seed);
        rng.set_stream(k as u64 + 1);
        let mut s = *first;
        for f in &problem.free {
            let (lo, hi) = f.bounds();
            let v0 = first.get(f.param);
            // open sides fall back to a decade around the first start
            let lo = if lo.is_finite() { lo } else { v0 - 10.0 * v0.abs().max(f.param.typical()) };
            let hi = if hi.is_finite() { hi } else { v0 + 10.0 * v0.abs().max(f.param.typical()) };
            s.set(f.param, lo + (hi - lo) * rng.random::<f64>());
        }
        out.push(s);
    }
    out
}

fn run_lm(problem: &FitProblem, start: &DimerScenario) -> Result<(LmOutcome, Vec<f64>)> {
    let scales: Vec<f64> = problem.free.iter().map(|f| start.get(f.param).abs().max(f.param.typical())).collect();
    let q0: Vec<f64> = problem.free.iter().zip(&scales).map(|(f, s)| start.get(f.param) / s).collect();
    let bounds = Bounds {
        lower: problem.free.iter().zip(&scales).map(|(f, s)| f.bounds().0 / s).collect(),
        upper: problem.free.iter().zip(&scales).map(|(f, s)| f.bounds().1 / s).collect(),
    };
    let residuals = |q: &[f64]| {
        let mut sc = *start;
        for (k, f) in problem.free.iter().enumerate() {
            sc.set(f.param, q[k] * scales[k]);
        }
        problem.residuals(&sc)
    };
    let config = LmConfig { max_iterations: problem.options.max_iterations, ..Default::default() };
    let out = levenberg_marquardt(residuals, None::<NoJacobian>, &q0, &bounds, &config)?;
    Ok((out, scales))
}

/// Forward-simulated data with additive Gaussian noise of standard deviation
/// `noise_level * max|y|`. Each point reports that deviation as its sigma
/// (or `1e-3 * max|y|` for noiseless data, which only sets the weights).
pub fn synthesize_data(
    scenario: &DimerScenario,
    observable: &Observable,
    points: &[(f64, usize)],
    noise_level: f64,
    seed: u64,
) -> Result<Vec<DataPoint>> {
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(Error::InvalidInput(format!("noise level must be >= 0, got {noise_level}")));
    }
    let ys = forward(scenario, observable, points)?;
    let peak = ys.iter().map(|y| y.abs()).fold(0.0, f64::max);
    let sd = noise_level * peak;
    let sigma = if sd > 0.0 { sd } else { (1e-3 * peak).max(f64::MIN_POSITIVE) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(points
        .iter()
        .zip(ys)
        .map(|(&(x, group), y)| DataPoint { x, y: if sd > 0.0 { y + noise.sample(&mut rng) } else { y }, sigma, group })
        .collect())
}

/// One grid point of a profile likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub value: f64,
    /// Minimum chi^2 over the remaining free parameters.
    pub chi2: Option<f64>,
    pub status: Option<FitStatus>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub param: Param,
    pub points: Vec<ProfilePoint>,
    /// Index of the smallest chi^2 on the grid.
    pub min_index: Option<usize>,
    /// chi^2 varies by less than one across the grid: the data do not pin
    /// this parameter down.
    pub flat: bool,
}

impl Profile {
    /// Interval where chi^2 stays within `delta` of the grid minimum, with
    /// linear interpolation at the crossings. `None` when a side never
    /// crosses inside the grid.
    pub fn interval(&self, delta: f64) -> Option<(f64, f64)> {
        let k = self.min_index?;
        let c = |i: usize| self.points[i].chi2;
        let level = c(k)? + delta;
        let cross = |i: usize, j: usize| -> Option<f64> {
            let (a, b) = (c(i)?, c(j)?);
            let (x, y) = (self.points[i].value, self.points[j].value);
            Some(x + (level - a) / (b - a) * (y - x))
        };
        let mut lo = None;
        for i in (0..k).rev() {
            if c(i)? >= level {
                lo = cross(i + 1, i);
                break;
            }
        }
        let mut hi = None;
        for i in (k + 1)..self.points.len() {
            if c(i)? >= level {
                hi = cross(i - 1, i);
                break;
            }
        }
        Some((lo?, hi?))
    }
}

/// Profile likelihood of `param` on `grid`: at each value the parameter is
/// held fixed and the remaining free parameters are refitted. Grid points
/// are independent and run concurrently; inner failures are recorded.
pub fn profile_scan(problem: &FitProblem, param: Param, grid: &[f64]) -> Result<Profile> {
    problem.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidInput("profile grid is empty".into()));
    }
    let (lo, hi) =
        problem.free.iter().find(|f| f.param == param).map(|f| f.bounds()).unwrap_or_else(|| param.default_bounds());
    if let Some(v) = grid.iter().find(|v| !(**v >= lo && **v <= hi)) {
        return Err(Error::InvalidInput(format!("grid value {v} lies outside [{lo}, {hi}] for {}", param.name())));
    }
    let points: Vec<ProfilePoint> = grid
        .par_iter()
        .map(|&value| {
            let mut inner = problem.clone();
            inner.free.retain(|f| f.param != param);
            inner.scenario.set(param, value);
            let outcome = if inner.free.is_empty() {
                inner.chi2(&inner.scenario).map(|c| (c, FitStatus::Converged))
            } else {
                fit(&inner).map(|r| (r.chi2, r.status))
            };
            match outcome {
                Ok((chi2, status)) => ProfilePoint { value, chi2: Some(chi2), status: Some(status), error: None },
                Err(e) => ProfilePoint { value, chi2: None, status: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let finite: Vec<(usize, f64)> = points.iter().enumerate().filter_map(|(k, p)| p.chi2.map(|c| (k, c))).collect();
    let min_index = finite.iter().min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).map(|m| m.0);
    let (cmin, cmax) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, c)| (a.min(c), b.max(c)));
    let flat = finite.len() >= 2 && cmax - cmin < 1.0;
    Ok(Profile { param, points, min_index, flat })
}
