//! Scenario execution and artifact emission.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use singlet_core::effective::approximate_rates;
use singlet_core::optimize::{fidelity_at, optimize_with, OptimizeOptions};
use singlet_core::{
    anharmonicity_scan, benchmarks, compile, effective_rates, integrate_partial, rate_model, scan_points,
    steady_state_traced, Error, IntegrateOptions, ParamName, ScanPoint, SteadyOptions, SteadyReport, SystemParams,
    TimeSeries,
};
use thiserror::Error;

use crate::config::{Command, ScenarioConfig};
use crate::svg::{Chart, Series};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Io { .. } => 2,
        }
    }
}

/// Files written by one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunArtifacts {
    pub csv_paths: Vec<PathBuf>,
    pub svg_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub summary: Vec<(String, String)>,
    /// Set when a numerical failure cut the run short.
    pub failure: Option<String>,
}

impl RunArtifacts {
    pub fn exit_code(&self) -> i32 {
        if self.failure.is_some() { 2 } else { 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub svg: bool,
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

struct Writer<'a> {
    dir: &'a Path,
    artifacts: RunArtifacts,
}

impl Writer<'_> {
    fn write(&self, name: &str, content: &str) -> Result<PathBuf, RunError> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|source| RunError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), RunError> {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        let path = self.write(name, &text)?;
        self.artifacts.csv_paths.push(path);
        Ok(())
    }

    fn svg(&mut self, name: &str, chart: &Chart) -> Result<(), RunError> {
        let path = self.write(name, &chart.render())?;
        self.artifacts.svg_paths.push(path);
        Ok(())
    }

    fn note(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.artifacts.summary.push((key.into(), value.into()));
    }

    fn fail(&mut self, e: &Error) {
        self.note("failure", e.to_string());
        self.artifacts.failure = Some(e.to_string());
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn integrate_options(cfg: &ScenarioConfig) -> IntegrateOptions {
    let base = if cfg.fast { IntegrateOptions::fast() } else { IntegrateOptions::default() };
    IntegrateOptions { sample_interval: cfg.sample_interval, ..base }
}

/// With `fast` these are exactly the sweep/objective settings.
fn steady_options(cfg: &ScenarioConfig) -> SteadyOptions {
    let base = if cfg.fast { SteadyOptions::objective(cfg.t_end) } else { SteadyOptions { t_max: cfg.t_end, ..Default::default() } };
    SteadyOptions { threshold: cfg.threshold, ..base }
}

/// Executes the scenario and writes its artifacts into `out_dir`.
pub fn run(cfg: &ScenarioConfig, out_dir: &Path, options: &RunOptions) -> Result<RunArtifacts, RunError> {
    cfg.validate_command().map_err(|e| RunError::Config(e.to_string()))?;
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;
    let mut w = Writer { dir: out_dir, artifacts: RunArtifacts::default() };
    w.note("command", cfg.command.name());
    match cfg.command {
        Command::Evolve => evolve(cfg, &mut w, options)?,
        Command::Steady => steady(cfg, &cfg.params, &mut w, options)?,
        Command::Rates => rates(cfg, &mut w)?,
        Command::Benchmarks => bench(cfg, &mut w)?,
        Command::Spectrum => spectrum(cfg, &mut w, options)?,
        Command::Optimize => optimize(cfg, &mut w, options)?,
        Command::Sweep => sweep(cfg, &mut w, options)?,
    }
    w.note("status", if w.artifacts.failure.is_some() { "failed" } else { "ok" });
    for p in ParamName::ALL {
        w.note(format!("param.{p}"), fmt_f64(cfg.params.get(p)));
    }
    w.note("param.d_t", cfg.params.d_t.to_string());
    w.note("param.d_c", cfg.params.d_c.to_string());
    let mut text = String::new();
    for (k, v) in &w.artifacts.summary {
        text.push_str(&format!("{k} = {v}\n"));
    }
    w.artifacts.summary_path = w.write("summary.txt", &text)?;
    Ok(w.artifacts)
}

fn timeseries_rows(ts: &TimeSeries) -> Vec<Vec<String>> {
    (0..ts.len())
        .map(|i| {
            let p = ts.populations[i];
            vec![
                fmt_f64(ts.times[i]),
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(p[2]),
                fmt_f64(p[3]),
                fmt_f64(ts.photon_number[i]),
                fmt_f64(ts.trace_error[i]),
                fmt_f64(ts.min_eigenvalue[i]),
            ]
        })
        .collect()
}

fn write_timeseries(cfg: &ScenarioConfig, ts: &TimeSeries, w: &mut Writer, options: &RunOptions) -> Result<(), RunError> {
    w.csv("timeseries.csv", &header(&["t", "P00", "P11", "PT", "PS", "nphot", "trace_err", "mineig"]), &timeseries_rows(ts))?;
    if options.svg && !ts.is_empty() {
        let names = ["P00", "P11", "PT", "PS"];
        let series = (0..4)
            .map(|k| Series { name: names[k].into(), points: ts.times.iter().zip(&ts.populations).map(|(t, p)| (*t, p[k])).collect() })
            .collect();
        let chart = Chart::new("Populations", "t [1/g]", "population", series).with_time_scale(cfg.ghz);
        w.svg("timeseries.svg", &chart)?;
    }
    Ok(())
}

fn diagnostics_notes(w: &mut Writer, ts: &TimeSeries) {
    let d = &ts.diagnostics;
    w.note("max_trace_error", fmt_f64(d.max_trace_error));
    w.note("max_hermiticity_error", fmt_f64(d.max_hermiticity_error));
    w.note("min_eigenvalue", fmt_f64(d.min_eigenvalue));
    w.note("accepted_steps", d.accepted_steps.to_string());
    w.note("rejected_steps", d.rejected_steps.to_string());
}

fn evolve(cfg: &ScenarioConfig, w: &mut Writer, options: &RunOptions) -> Result<(), RunError> {
    let (ts, failure) = match compile(&cfg.params).and_then(|m| Ok((cfg.initial_state.build(cfg.params.d_t, cfg.params.d_c)?, m))) {
        Ok((rho0, model)) => integrate_partial(&model, &rho0, cfg.t_end, &integrate_options(cfg)),
        Err(e) => return Err(RunError::Config(e.to_string())),
    };
    write_timeseries(cfg, &ts, w, options)?;
    if let Some(last) = ts.populations.last() {
        w.note("final_time", fmt_f64(*ts.times.last().unwrap_or(&0.0)));
        w.note("final_fidelity", fmt_f64(last[3]));
    }
    w.note("time_to_threshold", fmt_opt(ts.first_time_above(cfg.threshold)));
    diagnostics_notes(w, &ts);
    if let Some(e) = failure {
        w.fail(&e);
    }
    Ok(())
}

fn steady_notes(w: &mut Writer, r: &SteadyReport) {
    w.note("fidelity", fmt_f64(r.fidelity));
    w.note("converged", r.converged.to_string());
    w.note("convergence_time", fmt_f64(r.convergence_time));
    w.note("window_drift", fmt_f64(r.window_drift));
    w.note("time_to_threshold", fmt_opt(r.time_to_threshold));
    let names = ["P00", "P11", "PT", "PS"];
    for (n, v) in names.iter().zip(r.populations) {
        w.note(format!("average_{n}"), fmt_f64(v));
    }
}

fn steady(cfg: &ScenarioConfig, params: &SystemParams, w: &mut Writer, options: &RunOptions) -> Result<(), RunError> {
    let model = compile(params).map_err(|e| RunError::Config(e.to_string()))?;
    let rho0 = cfg.initial_state.build(params.d_t, params.d_c).map_err(|e| RunError::Config(e.to_string()))?;
    let (ts, report) = steady_state_traced(&model, &rho0, &steady_options(cfg));
    write_timeseries(cfg, &ts, w, options)?;
    match report {
        Ok(r) => steady_notes(w, &r),
        Err(e) => w.fail(&e),
    }
    diagnostics_notes(w, &ts);
    Ok(())
}

fn kv_rows(pairs: &[(&str, f64)]) -> Vec<Vec<String>> {
    pairs.iter().map(|(k, v)| vec![k.to_string(), fmt_f64(*v)]).collect()
}

fn rates(cfg: &ScenarioConfig, w: &mut Writer) -> Result<(), RunError> {
    let p = &cfg.params;
    let r = match effective_rates(p) {
        Ok(r) => r,
        Err(e) => {
            w.fail(&e);
            return Ok(());
        }
    };
    let approx = approximate_rates(r.omega_eff, p.kappa, p.g);
    let mut pairs = vec![
        ("omega_eff", r.omega_eff),
        ("g_eff_S0_re", r.g_eff_s0.re),
        ("g_eff_S0_im", r.g_eff_s0.im),
        ("g_eff_T1_re", r.g_eff_t1.re),
        ("g_eff_T1_im", r.g_eff_t1.im),
        ("kappa_plus", r.kappa_plus),
        ("kappa_minus", r.kappa_minus),
        ("kappa_reshuffle", r.kappa_reshuffle),
        ("kappa_plus_approx_resonant", approx.kappa_plus_resonant),
        ("kappa_plus_approx_weak", approx.kappa_plus_weak),
        ("kappa_minus_approx", approx.kappa_minus),
    ];
    match rate_model(r.kappa_plus, r.kappa_minus, p.gamma, 0.0, cfg.t_end) {
        Ok(s) => {
            pairs.push(("rate_model_PS_t_end", s.p_s));
            pairs.push(("rate_model_steady", s.steady));
            pairs.push(("rate_model_error", s.error));
        }
        Err(e) => w.note("rate_model", e.to_string()),
    }
    for (k, v) in &pairs {
        w.note(*k, fmt_f64(*v));
    }
    w.csv("rates.csv", &header(&["key", "value"]), &kv_rows(&pairs))
}

fn bench(cfg: &ScenarioConfig, w: &mut Writer) -> Result<(), RunError> {
    let b = benchmarks(cfg.params.gamma, cfg.params.g).map_err(|e| RunError::Config(e.to_string()))?;
    let pairs = [
        ("kappa_opt", b.kappa_opt),
        ("error_opt", b.error_opt),
        ("tau", b.tau),
        ("steady_fidelity", b.steady_fidelity),
    ];
    for (k, v) in &pairs {
        w.note(*k, fmt_f64(*v));
    }
    w.csv("rates.csv", &header(&["key", "value"]), &kv_rows(&pairs))
}

fn spectrum(cfg: &ScenarioConfig, w: &mut Writer, options: &RunOptions) -> Result<(), RunError> {
    let scan = match anharmonicity_scan(&cfg.params, &cfg.spectrum_grid, cfg.sector) {
        Ok(s) => s,
        Err(e @ Error::DegenerateInput(_)) => return Err(RunError::Config(e.to_string())),
        Err(e) => {
            w.fail(&e);
            return Ok(());
        }
    };
    let n = scan.first().map_or(0, |p| p.energies.len());
    let mut head = vec!["A".to_string()];
    head.extend((1..=n).map(|k| format!("eig{k}")));
    let rows: Vec<Vec<String>> = scan
        .iter()
        .map(|p| std::iter::once(p.anharmonicity).chain(p.energies.iter().copied()).map(fmt_f64).collect())
        .collect();
    w.csv("spectrum.csv", &head, &rows)?;
    let mut head = vec!["A".to_string()];
    head.extend((1..=n).map(|k| format!("t1_weight{k}")));
    let rows: Vec<Vec<String>> = scan
        .iter()
        .map(|p| std::iter::once(p.anharmonicity).chain(p.t1_weight.iter().copied()).map(fmt_f64).collect())
        .collect();
    w.csv("spectrum_t1.csv", &head, &rows)?;
    w.note("sector", cfg.sector.to_string());
    w.note("branches", n.to_string());
    if options.svg {
        let series = (0..n)
            .map(|k| Series { name: format!("eig{}", k + 1), points: scan.iter().map(|p| (p.anharmonicity, p.energies[k])).collect() })
            .collect();
        w.svg("spectrum.svg", &Chart::new("Dressed energies", "A [g]", "energy [g]", series).with_frequency_scale(cfg.ghz))?;
    }
    Ok(())
}

fn optimize(cfg: &ScenarioConfig, w: &mut Writer, options: &RunOptions) -> Result<(), RunError> {
    let opt = OptimizeOptions { seed: cfg.seed, prescan: cfg.prescan, ..Default::default() };
    let r = match optimize_with(&cfg.params, &cfg.free, cfg.budget, &opt, |p| fidelity_at(p, cfg.t_target).map(|r| r.fidelity)) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => return Err(RunError::Config(e.to_string())),
        Err(e) => {
            w.fail(&e);
            return Ok(());
        }
    };
    let mut head = vec!["start".to_string()];
    head.extend(r.free.iter().map(|p| p.key().to_string()));
    head.push("fidelity".into());
    let rows: Vec<Vec<String>> = r
        .trace
        .iter()
        .map(|tp| {
            let mut row = vec![tp.start.to_string()];
            row.extend(tp.x.iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(tp.fidelity));
            row
        })
        .collect();
    w.csv("optimize_trace.csv", &head, &rows)?;
    w.note("evaluations", r.evaluations.to_string());
    w.note("best_objective", fmt_f64(r.best_fidelity));
    for p in &r.free {
        w.note(format!("best.{p}"), fmt_f64(r.best_params.get(*p)));
    }
    steady(cfg, &r.best_params, w, options)
}

fn sweep(cfg: &ScenarioConfig, w: &mut Writer, options: &RunOptions) -> Result<(), RunError> {
    let spec = cfg.sweep.as_ref().expect("validated");
    let cells: Vec<Vec<f64>> = match spec.grids.as_slice() {
        [a] => a.iter().map(|&x| vec![x]).collect(),
        [a, b] => a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect(),
        _ => unreachable!("one or two sweep axes"),
    };
    let points: Vec<SystemParams> = cells
        .iter()
        .map(|vals| {
            let mut p = cfg.params;
            for (name, v) in spec.params.iter().zip(vals) {
                p.set(*name, *v);
            }
            p
        })
        .collect();
    let results: Vec<ScanPoint> = scan_points(&points, cfg.t_target);
    let mut head: Vec<String> = spec.params.iter().map(|p| p.key().to_string()).collect();
    head.extend(["fidelity".to_string(), "converged".to_string()]);
    let rows: Vec<Vec<String>> = cells
        .iter()
        .zip(&results)
        .map(|(vals, r)| {
            let mut row: Vec<String> = vals.iter().map(|v| fmt_f64(*v)).collect();
            row.push(fmt_opt(r.fidelity()));
            row.push(r.outcome.as_ref().map(|o| o.converged).unwrap_or(false).to_string());
            row
        })
        .collect();
    w.csv("sweep.csv", &head, &rows)?;
    let failed = results.iter().filter(|r| r.outcome.is_err()).count();
    w.note("cells", results.len().to_string());
    w.note("failed_cells", failed.to_string());
    if let Some((i, best)) = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.fidelity().map(|f| (i, f)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
    {
        w.note("best_fidelity", fmt_f64(best));
        w.note("best_cell", cells[i].iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "));
    }
    if spec.params.len() == 2 {
        let mut head: Vec<String> = spec.params.iter().map(|p| p.key().to_string()).collect();
        head.push("prep_time".into());
        let rows: Vec<Vec<String>> = cells
            .iter()
            .zip(&results)
            .map(|(vals, r)| {
                let mut row: Vec<String> = vals.iter().map(|v| fmt_f64(*v)).collect();
                let t = r.outcome.as_ref().ok().map(|o| o.time_to_threshold.unwrap_or(cfg.t_target).min(cfg.t_target));
                row.push(fmt_opt(t));
                row
            })
            .collect();
        w.csv("prep_time.csv", &head, &rows)?;
    } else if options.svg {
        let pts = cells.iter().zip(&results).filter_map(|(v, r)| r.fidelity().map(|f| (v[0], f))).collect();
        let chart = Chart::new("Fidelity", &format!("{} [g]", spec.params[0]), "fidelity", vec![Series { name: "fidelity".into(), points: pts }]);
        w.svg("sweep.svg", &chart)?;
    }
    Ok(())
}
