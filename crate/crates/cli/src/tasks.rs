use std::path::{Path, PathBuf};

use dimerlab_core::inference::{
    default_axis, fit, profile_scan, synthesize_data, DataPoint, FitOptions, FitProblem, FitStatus, FreeParam,
};
use dimerlab_core::observables::{
    baseline_resonance_probability, excitation_spectrum, extinction_ratio_at, g2_curve, lifetime_trace,
    saturation_series, DriveTarget, InitialState, ResonanceMcParams,
};
use dimerlab_core::units::rabi_from_saturation;
use dimerlab_core::SystemModel;
use serde_json::{json, Value};

use crate::config::{fit_scenario, load_data, DataSource, RunConfig, TaskConfig};
use crate::error::{CliError, CliResult};
use crate::table::Table;

/// Files written by a task plus a machine-readable summary for the manifest.
#[derive(Debug)]
pub struct TaskOutput {
    pub files: Vec<PathBuf>,
    pub summary: Value,
    /// Set when a fit ended without converging; outputs are still written.
    pub non_converged: Option<String>,
}

struct Emitter<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Emitter<'_> {
    fn table(&mut self, name: &str, t: &Table) -> CliResult<()> {
        let path = self.dir.join(name);
        t.write(&path)?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> CliResult<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(v).expect("json values serialize") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

fn target_label(t: &DriveTarget) -> String {
    match t {
        DriveTarget::Plus => "plus".into(),
        DriveTarget::Minus => "minus".into(),
        DriveTarget::Laser { mhz } => format!("laser_{mhz}"),
    }
}

fn state_label(s: &InitialState) -> String {
    match s {
        InitialState::Plus => "plus".into(),
        InitialState::Minus => "minus".into(),
        InitialState::Single(i) => format!("emitter{i}"),
    }
}

fn model_comment(m: &SystemModel) -> String {
    let freqs: Vec<String> = m.emitters.iter().map(|e| e.omega_mhz.to_string()).collect();
    format!(
        "model: omega_mhz=[{}] gamma0_mhz={} alpha={} dephasing_mhz={}",
        freqs.join(" "),
        m.gamma0_mhz,
        m.alpha,
        m.dephasing_mhz
    )
}

fn spectrum_table(freqs: &[f64], signal: &[f64], normalized: bool) -> Table {
    let unit = if normalized { "relative to the maximum" } else { "sideband photons/s" };
    let mut t = Table::new(&["freq_mhz", "signal"])
        .comment(format!("units: freq_mhz = laser frequency in MHz (ordinary frequency); signal = {unit}"));
    for (f, s) in freqs.iter().zip(signal) {
        t.push(vec![*f, *s]);
    }
    t
}

/// Runs an already validated config, writing into `dir`.
pub fn run_task(config: &RunConfig, dir: &Path) -> CliResult<TaskOutput> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = Emitter { dir, files: Vec::new() };
    let task = config.task.name();
    let num = |e| CliError::numerical(task, e);
    let mut non_converged = None;
    let summary = match &config.task {
        TaskConfig::Spectrum { drive, scan, normalize } => {
            let cfg = config.model()?;
            let model = cfg.build()?;
            let axis = scan.axis(&model, cfg.linewidth_mhz())?;
            let mut tr = excitation_spectrum(&model, drive.rabi(cfg.gamma0_mhz), &axis).map_err(num)?;
            let max = tr.max_signal();
            if *normalize {
                tr = tr.normalized();
            }
            let t = spectrum_table(&tr.freqs_mhz, &tr.signal, *normalize).comment(model_comment(&model));
            out.table("spectrum.csv", &t)?;
            json!({ "points": axis.len(), "max_rate_per_s": max })
        }
        TaskConfig::G2 { drive, targets, taus } => {
            let cfg = config.model()?;
            let model = cfg.build()?;
            let axis = taus.values();
            let mut rows = Vec::new();
            for target in targets {
                let tr = g2_curve(&model, drive.rabi(cfg.gamma0_mhz), *target, &axis).map_err(num)?;
                let label = target_label(target);
                let mut t = Table::new(&["tau_ns", "g2"])
                    .comment(format!("units: tau_ns = delay in ns; g2 normalized; laser at {} MHz", tr.laser_mhz))
                    .comment(model_comment(&model));
                for (x, g) in tr.taus_ns.iter().zip(&tr.g2) {
                    t.push(vec![*x, *g]);
                }
                out.table(&format!("g2_{label}.csv"), &t)?;
                rows.push(json!({ "target": label, "laser_mhz": tr.laser_mhz, "g2_zero": tr.g2[0], "rate_per_s": tr.rate_per_s }));
            }
            Value::Array(rows)
        }
        TaskConfig::Lifetime { initial, times } => {
            let model = config.model()?.build()?;
            let axis = times.values();
            let mut rows = Vec::new();
            for state in initial {
                let tr = lifetime_trace(&model, *state, &axis).map_err(num)?;
                let label = state_label(state);
                let mut t = Table::new(&["t_ns", "rate"])
                    .comment(format!(
                        "units: t_ns = time in ns; rate = sideband photons/ns; fitted tau_ns = {}",
                        tr.fit.tau_ns
                    ))
                    .comment(model_comment(&model));
                for (x, r) in tr.times_ns.iter().zip(&tr.rate) {
                    t.push(vec![*x, *r]);
                }
                out.table(&format!("lifetime_{label}.csv"), &t)?;
                rows.push(json!({ "initial": label, "fit": tr.fit, "multi_exponential": tr.multi_exponential }));
            }
            Value::Array(rows)
        }
        TaskConfig::Extinction { drive, deltas_mhz } => {
            let cfg = config.model()?;
            let model = cfg.build()?;
            let rabi = drive.rabi(cfg.gamma0_mhz);
            let mut t = Table::new(&["delta_mhz", "ratio"])
                .comment("units: delta_mhz = omega1 - omega2 in MHz; ratio = subradiant / superradiant peak height")
                .comment(model_comment(&model));
            let mut constrained = Vec::new();
            for d in deltas_mhz.values() {
                let p = extinction_ratio_at(&model, d, rabi).map_err(num)?;
                if p.constrained {
                    constrained.push(d);
                }
                t.push(vec![d, p.ratio]);
            }
            out.table("extinction.csv", &t)?;
            json!({ "points": t.rows.len(), "fixed_center_fits_at_delta_mhz": constrained })
        }
        TaskConfig::Saturate { saturations, scan } => {
            let cfg = config.model()?;
            let model = cfg.build()?;
            let axis = scan.axis(&model, cfg.linewidth_mhz())?;
            let rabi: Vec<f64> = saturations.iter().map(|&s| rabi_from_saturation(s, cfg.gamma0_mhz)).collect();
            let series = saturation_series(&model, &rabi, &axis).map_err(num)?;
            let mut summary = Table::new(&["power", "peak", "center_mhz", "height", "fwhm_mhz"])
                .comment("units: power = saturation parameter s = 2 Omega^2 / Gamma0^2; center_mhz and fwhm_mhz in MHz; height in photons/s")
                .comment(model_comment(&model));
            let mut rows = Vec::new();
            for (k, (p, &s)) in series.iter().zip(saturations).enumerate() {
                let t = spectrum_table(&p.trace.freqs_mhz, &p.trace.signal, false)
                    .comment(format!("power: s = {s}, Omega = {} MHz", p.rabi_mhz));
                out.table(&format!("saturation_{k:02}.csv"), &t)?;
                if let Some(ps) = &p.peaks {
                    for (j, pk) in ps.peaks.iter().enumerate() {
                        summary.push(vec![s, j as f64, pk.center_mhz, pk.height, pk.fwhm_mhz]);
                    }
                }
                rows.push(json!({
                    "saturation": s,
                    "rabi_mhz": p.rabi_mhz,
                    "detected_lines": p.detected_lines,
                    "fit_error": p.fit_error,
                }));
            }
            out.table("saturation_summary.csv", &summary)?;
            Value::Array(rows)
        }
        TaskConfig::Fit { observable, free, data, saturation, options, profile } => {
            let cfg = config.model()?;
            let scenario = fit_scenario(cfg, free, *saturation)?;
            let points = match data {
                DataSource::Csv { path } => load_data(path)?,
                DataSource::Synthetic { noise } => {
                    let truth = fit_scenario(cfg, &[], *saturation)?;
                    let axis = default_axis(&truth, observable).map_err(num)?;
                    synthesize_data(&truth, observable, &axis, *noise, config.seed).map_err(num)?
                }
            };
            let mut data_table = Table::new(&["x", "y", "sigma", "group"]).comment(format!(
                "fit data for a {} observable; x conventions follow the observable",
                observable.name()
            ));
            for DataPoint { x, y, sigma, group } in &points {
                data_table.push(vec![*x, *y, *sigma, *group as f64]);
            }
            out.table("fit_data.csv", &data_table)?;
            let problem = FitProblem {
                observable: observable.clone(),
                scenario,
                free: free.iter().map(|f| FreeParam { param: f.param, lower: f.lower, upper: f.upper }).collect(),
                data: points,
                options: FitOptions {
                    max_iterations: options.max_iterations,
                    multi_start: options.multi_start,
                    seed: config.seed,
                },
            };
            let result = fit(&problem).map_err(num)?;
            if result.status != FitStatus::Converged {
                non_converged =
                    Some(format!("fit ended with status {:?} after {} iterations", result.status, result.iterations));
            }
            let profile = match profile {
                Some(p) => Some(profile_scan(&problem, p.param, &p.grid.values()).map_err(num)?),
                None => None,
            };
            let doc = json!({ "result": result, "profile": profile });
            out.json("fit_result.json", &doc)?;
            json!({ "status": result.status, "chi2": result.chi2, "dof": result.dof, "values": result.values })
        }
        TaskConfig::BaselineProb { mc, sample_counts } => {
            let counts = if sample_counts.is_empty() { vec![mc.n_samples] } else { sample_counts.clone() };
            let mut t = Table::new(&["n_samples", "p_hat", "stderr"]).comment(format!(
                "resonance probability for |delta| < {} |J|; {} molecules, width {} GHz, cube {} nm, seed {}",
                mc.threshold_factor, mc.n_molecules, mc.inhom_width_ghz, mc.crystal_size_nm, config.seed
            ));
            for n in counts {
                let p = ResonanceMcParams { n_samples: n, seed: config.seed, ..*mc };
                let e = baseline_resonance_probability(&p).map_err(num)?;
                t.push(vec![e.n_samples as f64, e.p_hat, e.stderr]);
            }
            out.table("baseline_prob.csv", &t)?;
            json!({ "rows": t.rows.len() })
        }
    };
    Ok(TaskOutput { files: out.files, summary, non_converged })
}
