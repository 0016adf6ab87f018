//! Executing run configurations: single runs, comparisons against an
//! oracle, parameter sweeps, and the shipped example presets.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{parse_config, restarts_for, Command, ReferenceKind, RunConfig};
use crate::driver::{run_dgpc, run_hermite_pc, DgpcConfig};
use crate::error::{DgpcError, Result};
use crate::model::{InitialLaw, ModelKind, SdeModel};
use crate::oracles::{averaged_ou_invariant, exact_moments, invariant_cumulants_1d, mc_simulate, McTrajectory};
use crate::output::{emit_csv, Trajectory};
use crate::stats::{fit_slope, relative_errors, summarize_errors, CumulantReport};

pub const PRESETS: [(&str, &str); 7] = [
    ("ex1", include_str!("../presets/ex1.toml")),
    ("ex2", include_str!("../presets/ex2.toml")),
    ("ex3", include_str!("../presets/ex3.toml")),
    ("ex4", include_str!("../presets/ex4.toml")),
    ("ex5", include_str!("../presets/ex5.toml")),
    ("ex6", include_str!("../presets/ex6.toml")),
    ("ex7", include_str!("../presets/ex7.toml")),
];

pub fn preset(name: &str) -> Result<RunConfig> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| DgpcError::Config(format!("unknown experiment {name:?}, expected one of ex1..ex7")))?;
    parse_config(text)
}

/// Ground truth on a time grid.
#[derive(Debug, Clone)]
pub enum Reference {
    /// `(mean, var)` per time and component.
    Exact(Vec<Vec<(f64, f64)>>),
    MonteCarlo(McTrajectory),
}

impl Reference {
    pub fn label(&self) -> &'static str {
        match self {
            Reference::Exact(_) => "exact",
            Reference::MonteCarlo(_) => "Monte Carlo",
        }
    }

    pub fn rows(&self) -> Vec<Vec<(f64, f64)>> {
        match self {
            Reference::Exact(rows) => rows.clone(),
            Reference::MonteCarlo(mc) => mc
                .points
                .iter()
                .map(|p| {
                    (0..mc.names.len())
                        .map(|i| (p.cumulants.mean(i), p.cumulants.variance(i)))
                        .collect()
                })
                .collect(),
        }
    }

    /// Exact references carry only the first two cumulants.
    pub fn trajectory(&self, names: &[String], times: &[f64]) -> Trajectory {
        match self {
            Reference::MonteCarlo(mc) => Trajectory::from_mc(mc),
            Reference::Exact(rows) => {
                let mut t = Trajectory::new(names.to_vec());
                t.reports = rows
                    .iter()
                    .zip(times)
                    .map(|(row, &time)| CumulantReport {
                        time,
                        univariate: row
                            .iter()
                            .map(|&(m, v)| vec![m, v, f64::NAN, f64::NAN, f64::NAN, f64::NAN])
                            .collect(),
                        cross: None,
                    })
                    .collect();
                t
            }
        }
    }
}

/// Reference for `cfg` on `times`. With `ReferenceKind::Auto` the closed form
/// is preferred; Monte Carlo is the fallback only when `fallback_mc` is set.
pub fn reference(cfg: &RunConfig, model: &SdeModel, times: &[f64], fallback_mc: bool) -> Result<Option<Reference>> {
    let mc = || -> Result<Reference> { Ok(Reference::MonteCarlo(mc_simulate(model, &cfg.oracle.mc(times.to_vec())?)?)) };
    Ok(match cfg.oracle.reference {
        ReferenceKind::None => None,
        ReferenceKind::Mc => Some(mc()?),
        ReferenceKind::Exact => {
            let rows = exact_moments(model, times)?.ok_or_else(|| {
                DgpcError::Config("this model has no closed-form reference, use reference = \"mc\"".into())
            })?;
            Some(Reference::Exact(rows))
        }
        ReferenceKind::Auto => match exact_moments(model, times)? {
            Some(rows) => Some(Reference::Exact(rows)),
            None if fallback_mc => Some(mc()?),
            None => None,
        },
    })
}

/// `κ_1..κ_6` of the stationary law of the first component, when a
/// quadrature oracle applies.
pub fn stationary_cumulants(model: &SdeModel) -> Result<Option<Vec<f64>>> {
    if !model.forcing.is_zero() {
        return Ok(None);
    }
    let k = match model.kind {
        ModelKind::Ou { b_v, sigma_v } => invariant_cumulants_1d(&[0.0, -b_v], sigma_v, 6)?,
        ModelKind::CubicOu { b_v, c_v, sigma_v } => invariant_cumulants_1d(&[0.0, -b_v, 0.0, -c_v], sigma_v, 6)?,
        ModelKind::RandomDampingOu { sigma_v } => match model.initial[1] {
            InitialLaw::Uniform { lo, hi } if lo < hi => averaged_ou_invariant(lo, hi, sigma_v, 6)?,
            InitialLaw::Uniform { lo: b, .. } | InitialLaw::Point { value: b } => {
                invariant_cumulants_1d(&[0.0, -b], sigma_v, 6)?
            }
            InitialLaw::Gaussian { .. } => return Ok(None),
        },
        _ => return Ok(None),
    };
    Ok(Some(k))
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn command_name(c: Command) -> &'static str {
    match c {
        Command::Dgpc => "dgpc",
        Command::Hermite => "hermite",
        Command::Mc => "mc",
        Command::Invariant => "invariant",
        Command::Compare => "compare",
        Command::Sweep => "sweep",
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

/// The trajectory produced by a `dgpc`, `hermite`, `mc` or `invariant`
/// configuration, with ε columns when a reference applies.
pub fn trajectory(cfg: &RunConfig) -> Result<Trajectory> {
    let model = cfg.model.build()?;
    let method = cfg.method.dgpc()?;
    let mut traj = match cfg.command {
        Command::Dgpc | Command::Compare | Command::Sweep => Trajectory::from_run(&run_dgpc(&method, &model)?),
        Command::Hermite => Trajectory::from_run(&run_hermite_pc(&method, &model)?),
        Command::Mc => {
            let mc = mc_simulate(&model, &cfg.oracle.mc(method.output_times())?)?;
            return Ok(Trajectory::from_mc(&mc));
        }
        Command::Invariant => {
            let k = stationary_cumulants(&model)?.ok_or_else(|| {
                DgpcError::Config("no stationary-density oracle for this model".into())
            })?;
            let mut t = Trajectory::new(vec![model.component_names()[0].to_string()]);
            t.reports.push(CumulantReport {
                time: f64::INFINITY,
                univariate: vec![k],
                cross: None,
            });
            return Ok(t);
        }
    };
    if let Some(r) = reference(cfg, &model, &traj.times(), false)? {
        traj.attach_reference(&r.rows())?;
    }
    Ok(traj)
}

pub fn run_config(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", command_name(cfg.command))));
    match cfg.command {
        Command::Compare => compare(cfg, &out),
        Command::Sweep => sweep(cfg, &sibling(&out, "sweep")),
        _ => {
            let t = trajectory(cfg)?;
            emit_csv(&t, &out)?;
            Ok(Outcome {
                files: vec![out],
                summary: describe(&t),
            })
        }
    }
}

/// Run two configurations and report the first against the second.
pub fn compare_configs(a: &RunConfig, b: &RunConfig) -> Result<Trajectory> {
    let (ta, tb) = rayon::join(|| trajectory(a), || trajectory(b));
    let mut ta = ta?;
    ta.errors = None;
    ta.compare_with(&tb?)?;
    Ok(ta)
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else {
        format!("{x:.4e}")
    }
}

/// Final-time cumulants and error norms as plain text.
pub fn describe(t: &Trajectory) -> String {
    let mut s = String::new();
    if let Some(last) = t.reports.last() {
        for (i, name) in t.names.iter().enumerate() {
            let k: Vec<String> = last.univariate[i].iter().map(|&x| fmt(x)).collect();
            let _ = writeln!(s, "t = {}: {name}: κ1..κ6 = [{}]", last.time, k.join(", "));
        }
    }
    if let Some(e) = &t.errors {
        for (i, name) in t.names.iter().enumerate() {
            let m = summarize_errors(&e.mean[i]);
            let v = summarize_errors(&e.var[i]);
            let _ = writeln!(
                s,
                "{name}: ε_mean median {} max {}, ε_var median {} max {}",
                fmt(m.median),
                fmt(m.max),
                fmt(v.median),
                fmt(v.max)
            );
        }
    }
    s
}

fn cumulant_rows(s: &mut String, label: &str, names: &[String], report: &CumulantReport) {
    for (i, name) in names.iter().enumerate() {
        let k: Vec<String> = report.univariate[i].iter().map(|&x| fmt(x)).collect();
        let _ = writeln!(s, "| {label} | {name} | {} |", k.join(" | "));
    }
}

fn error_rows(s: &mut String, label: &str, t: &Trajectory) {
    if let Some(e) = &t.errors {
        for (i, name) in t.names.iter().enumerate() {
            let m = summarize_errors(&e.mean[i]);
            let v = summarize_errors(&e.var[i]);
            let _ = writeln!(
                s,
                "| {label} | {name} | {} | {} | {} | {} |",
                fmt(m.median),
                fmt(m.max),
                fmt(v.median),
                fmt(v.max)
            );
        }
    }
}

/// DgPC and the Hermite baseline side by side, with the reference and the
/// stationary oracle where available.
fn compare(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let model = cfg.model.build()?;
    let method = cfg.method.dgpc()?;
    let mut baseline = method.clone();
    if let Some(b) = &cfg.baseline {
        baseline.k = b.k;
        baseline.n = b.n;
    }
    // The baseline needs the same output grid to be comparable.
    baseline.output_interval = Some(method.output_interval.unwrap_or_else(|| method.restart_interval()));
    let (dgpc, hermite) = rayon::join(|| run_dgpc(&method, &model), || run_hermite_pc(&baseline, &model));
    let dgpc = dgpc?;
    let mut main = Trajectory::from_run(&dgpc);
    let times = main.times();
    let reference = reference(cfg, &model, &times, true)?;
    let stationary = stationary_cumulants(&model)?;

    let mut base = match hermite {
        Ok(run) => Ok(Trajectory::from_run(&run)),
        Err(e) => Err(e),
    };
    let mut files = Vec::new();
    if let Some(r) = &reference {
        main.attach_reference(&r.rows())?;
        if let Ok(b) = base.as_mut() {
            b.attach_reference(&r.rows())?;
        }
        let path = sibling(out, "reference");
        emit_csv(&r.trajectory(&main.names, &times), &path)?;
        files.push(path);
    }
    let path = sibling(out, "dgpc");
    emit_csv(&main, &path)?;
    files.push(path);
    if let Ok(b) = &base {
        let path = sibling(out, "hermite");
        emit_csv(b, &path)?;
        files.push(path);
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        "DgPC: t_end = {}, Δt = {}, K = {}, N = {}, L = {}; Hermite PC: K = {}, N = {}\n",
        method.t_end,
        method.restart_interval(),
        method.k,
        method.n,
        method.l,
        baseline.k,
        baseline.n
    );
    let last = main.reports.last().expect("trajectory has the initial time");
    let _ = writeln!(s, "Cumulants at t = {}\n", last.time);
    let _ = writeln!(s, "| method | component | κ1 | κ2 | κ3 | κ4 | κ5 | κ6 |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
    cumulant_rows(&mut s, "DgPC", &main.names, last);
    match &base {
        Ok(b) => cumulant_rows(&mut s, "Hermite PC", &b.names, b.reports.last().expect("nonempty")),
        Err(e) => {
            let _ = writeln!(s, "| Hermite PC | failed: {e} | | | | | | |");
        }
    }
    if let Some(r) = &reference {
        let rt = r.trajectory(&main.names, &times);
        cumulant_rows(&mut s, r.label(), &main.names, rt.reports.last().expect("nonempty"));
    }
    if let Some(k) = &stationary {
        let name = [main.names[0].clone()];
        let report = CumulantReport {
            time: f64::INFINITY,
            univariate: vec![k.clone()],
            cross: None,
        };
        cumulant_rows(&mut s, "stationary density", &name, &report);
    }
    if let Some(r) = &reference {
        let _ = writeln!(s, "\nRelative errors against the {} reference\n", r.label());
        let _ = writeln!(s, "| method | component | median ε_mean | max ε_mean | median ε_var | max ε_var |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        error_rows(&mut s, "DgPC", &main);
        if let Ok(b) = &base {
            error_rows(&mut s, "Hermite PC", b);
        }
    }
    Ok(Outcome { files, summary: s })
}

/// One row of a sweep: errors of the first component.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: &'static str,
    pub t_end: f64,
    pub k: usize,
    pub n: usize,
    pub l: usize,
    pub n_restarts: usize,
    pub var_end: f64,
    pub reference_var_end: f64,
    pub eps_var_end: f64,
    /// Time average of `ε_var` over the defined output points.
    pub eps_var_mean: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// `(method, t_end, slope)` of `log ε_var(t_end)` against `log K`.
    pub slopes: Vec<(&'static str, f64, f64)>,
}

struct Job {
    method: &'static str,
    config: DgpcConfig,
}

fn grid_key(times: &[f64]) -> Vec<u64> {
    times.iter().map(|t| t.to_bits()).collect()
}

/// Run every combination in the `[sweep]` block against the reference.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| DgpcError::Config("missing [sweep] block".into()))?;
    let model = cfg.model.build()?;
    let base = cfg.method.dgpc()?;
    let or = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
    let t_ends = or(&sweep.t_end, base.t_end);
    let intervals = or(&sweep.restart_interval, base.restart_interval());
    let ks = if sweep.k.is_empty() { vec![base.k] } else { sweep.k.clone() };

    let mut jobs = Vec::new();
    for &t_end in &t_ends {
        for &k in &ks {
            for &dt in &intervals {
                let mut c = base.clone();
                c.t_end = t_end;
                c.k = k;
                c.n_restarts = restarts_for(t_end, dt)?;
                jobs.push(Job { method: "dgpc", config: c });
            }
        }
        for &k in &sweep.hermite_k {
            let mut c = base.clone();
            c.t_end = t_end;
            c.k = k;
            c.n_restarts = 1;
            jobs.push(Job { method: "hermite", config: c });
        }
    }

    let mut references: HashMap<Vec<u64>, Vec<Vec<(f64, f64)>>> = HashMap::new();
    for job in &jobs {
        let times = job.config.output_times();
        if let std::collections::hash_map::Entry::Vacant(slot) = references.entry(grid_key(&times)) {
            let r = reference(cfg, &model, &times, true)?
                .ok_or_else(|| DgpcError::Config("a sweep needs a reference".into()))?;
            slot.insert(r.rows());
        }
    }

    let rows = jobs
        .par_iter()
        .map(|job| {
            let run = match job.method {
                "hermite" => run_hermite_pc(&job.config, &model)?,
                _ => run_dgpc(&job.config, &model)?,
            };
            let r = &references[&grid_key(&job.config.output_times())];
            let var = run.variances(0);
            let reference: Vec<f64> = r.iter().map(|row| row[0].1).collect();
            let eps = relative_errors(&var, &reference);
            Ok(SweepRow {
                method: job.method,
                t_end: job.config.t_end,
                k: job.config.k,
                n: job.config.n,
                l: job.config.l,
                n_restarts: job.config.n_restarts,
                var_end: *var.last().expect("nonempty"),
                reference_var_end: *reference.last().expect("nonempty"),
                eps_var_end: *eps.last().expect("nonempty"),
                eps_var_mean: summarize_errors(&eps).mean,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut slopes = Vec::new();
    for method in ["dgpc", "hermite"] {
        for &t_end in &t_ends {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.method == method && r.t_end == t_end && r.eps_var_end > 0.0)
                .map(|r| ((r.k as f64).ln(), r.eps_var_end.ln()))
                .collect();
            let distinct = pts.iter().map(|p| p.0.to_bits()).collect::<std::collections::HashSet<_>>();
            if distinct.len() >= 2 {
                let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                slopes.push((method, t_end, fit_slope(&xs, &ys)));
            }
        }
    }
    Ok(SweepResult { rows, slopes })
}

pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "method,t_end,k,n,l,n_restarts,var_end,ref_var_end,eps_var_end,eps_var_mean")?;
    for r in &result.rows {
        writeln!(
            w,
            "{},{:.16e},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.method, r.t_end, r.k, r.n, r.l, r.n_restarts, r.var_end, r.reference_var_end, r.eps_var_end, r.eps_var_mean
        )?;
    }
    w.flush()?;
    Ok(())
}

fn sweep(cfg: &RunConfig, path: &Path) -> Result<Outcome> {
    let result = run_sweep(cfg)?;
    write_sweep_csv(&result, path)?;
    let mut s = String::from("\nSweep\n\n| method | t_end | K | n_restarts | ε_var(t_end) | mean ε_var |\n|---|---|---|---|---|---|\n");
    for r in &result.rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            r.method,
            r.t_end,
            r.k,
            r.n_restarts,
            fmt(r.eps_var_end),
            fmt(r.eps_var_mean)
        );
    }
    for (method, t_end, slope) in &result.slopes {
        let _ = writeln!(s, "\n{method} at t = {t_end}: fitted slope of log ε_var against log K = {slope:.3}");
    }
    Ok(Outcome {
        files: vec![path.to_path_buf()],
        summary: s,
    })
}

/// Reproduce one shipped example into `dir`: DgPC, baseline and reference
/// CSVs, the sweep when the preset has one, and `summary.md`.
pub fn run_experiment(name: &str, dir: &Path) -> Result<Outcome> {
    let mut cfg = preset(name)?;
    fs::create_dir_all(dir)?;
    let out = dir.join(format!("{name}.csv"));
    cfg.output = Some(out.clone());
    let mut outcome = compare(&cfg, &out)?;
    if cfg.sweep.is_some() {
        let s = sweep(&cfg, &sibling(&out, "sweep"))?;
        outcome.files.extend(s.files);
        outcome.summary.push_str(&s.summary);
    }
    outcome.summary = format!("# {name}\n\n{}", outcome.summary);
    let path = dir.join("summary.md");
    fs::write(&path, &outcome.summary)?;
    outcome.files.push(path);
    Ok(outcome)
}
