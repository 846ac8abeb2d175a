use std::path::{Path, PathBuf};

use cnls_core::evolution::{evolve, EvolutionError};
use cnls_core::ground_state::{
    minimize, refine_fixed_point, subadditivity_check, GroundState, Init, SolveError, SubadditivityVerdict,
};
use cnls_core::model::CouplingModel;
use cnls_core::stability::{stability_ensemble, StabilityParams, StabilityReport, Verdict};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Format, InitKind, RunConfig};
use crate::io::{
    ensure_dir, read_profile, write_json, write_metadata, write_profile, write_trace, GroundStateRecord, IoError,
};
use crate::validate::{oracle_checks, CheckOutcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Input(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("blow-up: {0}")]
    BlowUp(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Input(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::BlowUp(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Precondition(_) | SolveError::Model(_) => CliError::Input(e.to_string()),
            other => CliError::NotConverged(other.to_string()),
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Options {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg.output.dir.clone())
    }
}

/// Minimize, then polish with the fixed-point iteration when enabled and
/// it lowers the residual.
pub fn compute_ground_state(cfg: &RunConfig, seed: Option<u64>) -> Result<(GroundState, CouplingModel), CliError> {
    let grid = cfg.grid()?;
    let model = cfg.model()?;
    let masses = cfg.masses()?;
    let mut solver = cfg.solver_config_without_init()?;
    if let Some(seed) = seed {
        solver.seed = seed;
    }
    if cfg.solver.init == InitKind::File {
        let path = cfg.solver.init_file.as_ref().ok_or(ConfigError::MissingSection("solver.init_file"))?;
        solver.init = Init::Supplied(read_profile(path, &grid)?);
    }
    let rough = minimize(&model, &masses, &grid, &solver)?;
    if !cfg.solver.refine {
        return Ok((rough, model));
    }
    match refine_fixed_point(&rough.profile, &model, &masses) {
        Ok(fine) if fine.residual < rough.residual => {
            let iterations = rough.iterations + fine.iterations;
            Ok((GroundState { iterations, energy_history: rough.energy_history, ..fine }, model))
        }
        _ => Ok((rough, model)),
    }
}

pub fn solve(cfg: &RunConfig, opts: &Options) -> Result<GroundStateRecord, CliError> {
    let dir = opts.out_dir(cfg);
    ensure_dir(&dir)?;
    write_metadata(&dir, "solve")?;
    let (gs, model, failure) = match compute_ground_state(cfg, opts.seed) {
        Ok((gs, model)) => (gs, model, None),
        Err(CliError::NotConverged(msg)) => {
            // Still report the last iterate.
            let model = cfg.model()?;
            let mut solver = cfg.solver_config_without_init()?;
            if let Some(seed) = opts.seed {
                solver.seed = seed;
            }
            match minimize(&model, &cfg.masses()?, &cfg.grid()?, &solver) {
                Err(SolveError::NotConverged { last, .. }) => (*last, model, Some(msg)),
                _ => return Err(CliError::NotConverged(msg)),
            }
        }
        Err(e) => return Err(e),
    };
    let record = GroundStateRecord::new(&gs, &model);
    write_ground_state(&dir, cfg, &gs, &record)?;
    opts.say(format!(
        "lambda = {:.12}  omega = [{:.9}, {:.9}, {:.9}]  residual = {:.3e}  iterations = {}",
        record.lambda, record.omega[0], record.omega[1], record.omega[2], record.residual, record.iterations
    ));
    match failure {
        Some(msg) => Err(CliError::NotConverged(msg)),
        None => Ok(record),
    }
}

fn write_ground_state(dir: &Path, cfg: &RunConfig, gs: &GroundState, record: &GroundStateRecord) -> Result<(), CliError> {
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("groundstate.json"), record)?;
    }
    if cfg.output.wants(Format::Csv) {
        write_profile(&dir.join("profile.csv"), &gs.profile)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotRecord {
    pub file: String,
    pub t: f64,
}

/// Contents of `evolve.json`.
#[derive(Debug, Clone, Serialize)]
pub struct EvolveSummary {
    pub final_time: f64,
    pub dt: f64,
    pub steps: usize,
    pub max_energy_drift: f64,
    pub max_mass_drift: [f64; 3],
    pub blow_up: bool,
    pub snapshots: Vec<SnapshotRecord>,
}

pub fn evolve_profile(cfg: &RunConfig, input: &Path, opts: &Options) -> Result<EvolveSummary, CliError> {
    let grid = cfg.grid()?;
    let model = cfg.model()?;
    let ev = cfg.evolution()?;
    let state = read_profile(input, &grid)?;
    let dir = opts.out_dir(cfg);
    ensure_dir(&dir)?;
    write_metadata(&dir, "evolve")?;
    let (trace, blow_up) = match evolve(&state, ev.final_time, ev.dt, &model, ev.snapshot_every) {
        Ok(trace) => (trace, None),
        Err(EvolutionError::BlowUp { time, trace }) => (*trace, Some(time)),
        Err(e) => return Err(CliError::Input(e.to_string())),
    };
    if cfg.output.wants(Format::Csv) {
        write_trace(&dir.join("trace.csv"), &trace)?;
    }
    let mut snapshots = Vec::new();
    for (k, (t, s)) in trace.snapshots.iter().enumerate() {
        let file = format!("snapshot_{k:04}.csv");
        if cfg.output.wants(Format::Csv) {
            write_profile(&dir.join(&file), s)?;
        }
        snapshots.push(SnapshotRecord { file, t: *t });
    }
    let summary = EvolveSummary {
        final_time: *trace.times.last().unwrap_or(&0.0),
        dt: ev.dt,
        steps: trace.len().saturating_sub(1),
        max_energy_drift: trace.max_energy_drift(),
        max_mass_drift: trace.max_mass_drift(),
        blow_up: blow_up.is_some(),
        snapshots,
    };
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("evolve.json"), &summary)?;
    }
    if let Some(t) = blow_up {
        return Err(CliError::BlowUp(format!("non-finite solution at t = {t}")));
    }
    opts.say(format!(
        "T = {}  max energy drift = {:.3e}  max mass drift = {:.3e}",
        summary.final_time,
        summary.max_energy_drift,
        summary.max_mass_drift.iter().cloned().fold(0.0, f64::max)
    ));
    Ok(summary)
}

/// Contents of `report_seed<N>.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRecord {
    pub seed: u64,
    pub delta: f64,
    pub eps: f64,
    pub verdict: &'static str,
    pub initial_distance: f64,
    pub sup_distance: f64,
    pub orbit_switch_suspected: bool,
    pub max_energy_drift: f64,
    pub max_mass_drift: [f64; 3],
    /// `(t, orbital distance)` samples.
    pub samples: Vec<(f64, f64)>,
}

impl From<&StabilityReport> for ReportRecord {
    fn from(r: &StabilityReport) -> Self {
        Self {
            seed: r.seed,
            delta: r.delta,
            eps: r.eps,
            verdict: verdict_name(r.verdict),
            initial_distance: r.initial_distance,
            sup_distance: r.sup_distance,
            orbit_switch_suspected: r.orbit_switch_suspected,
            max_energy_drift: r.trace.max_energy_drift(),
            max_mass_drift: r.trace.max_mass_drift(),
            samples: r.trace.orbital_distance.clone().unwrap_or_default(),
        }
    }
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Bounded => "bounded",
        Verdict::Escaped => "escaped",
        Verdict::BlowUp => "blow_up",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRun {
    pub seed: u64,
    pub verdict: &'static str,
    pub sup_distance: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct StabilitySummary {
    pub delta: f64,
    pub eps: f64,
    pub lambda: f64,
    pub residual: f64,
    pub runs: Vec<SummaryRun>,
    pub all_bounded: bool,
}

pub fn stability(cfg: &RunConfig, opts: &Options) -> Result<StabilitySummary, CliError> {
    let mut settings = cfg.stability()?;
    if let Some(seed) = opts.seed {
        settings.seeds = vec![seed];
    }
    let dir = opts.out_dir(cfg);
    ensure_dir(&dir)?;
    write_metadata(&dir, "stability")?;
    let (gs, model) = compute_ground_state(cfg, None)?;
    let params = StabilityParams {
        kind: settings.kind,
        delta: settings.delta,
        final_time: settings.final_time,
        dt: settings.dt,
        sample_every: settings.sample_every,
        eps: settings.eps,
        seed: 0,
    };
    let mut reports = Vec::new();
    for result in stability_ensemble(&gs, &model, &params, &settings.seeds) {
        reports.push(result.map_err(|e| CliError::Input(e.to_string()))?);
    }
    for r in &reports {
        if cfg.output.wants(Format::Json) {
            write_json(&dir.join(format!("report_seed{}.json", r.seed)), &ReportRecord::from(r))?;
        }
        opts.say(format!("seed {:>6}  {:<8} sup distance {:.3e}", r.seed, verdict_name(r.verdict), r.sup_distance));
    }
    let summary = StabilitySummary {
        delta: settings.delta,
        eps: settings.eps,
        lambda: gs.lambda,
        residual: gs.residual,
        runs: reports
            .iter()
            .map(|r| SummaryRun { seed: r.seed, verdict: verdict_name(r.verdict), sup_distance: r.sup_distance })
            .collect(),
        all_bounded: reports.iter().all(|r| r.verdict == Verdict::Bounded),
    };
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("summary.json"), &summary)?;
    }
    if let Some(r) = reports.iter().find(|r| r.verdict == Verdict::BlowUp) {
        return Err(CliError::BlowUp(format!("seed {} blew up", r.seed)));
    }
    Ok(summary)
}

/// One row of `margins.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct MarginRow {
    pub r1: f64,
    pub s1: f64,
    pub t1: f64,
    pub r2: f64,
    pub s2: f64,
    pub t2: f64,
    pub lambda_total: f64,
    pub lambda_first: f64,
    pub lambda_second: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub verdict: &'static str,
    pub inconclusive: bool,
}

pub fn subadd(cfg: &RunConfig, opts: &Options) -> Result<Vec<MarginRow>, CliError> {
    let grid = cfg.grid()?;
    let model = cfg.model()?;
    let splits = cfg.splits()?;
    let mut solver = cfg.solver_config_without_init()?;
    if let Some(seed) = opts.seed {
        solver.seed = seed;
    }
    let dir = opts.out_dir(cfg);
    ensure_dir(&dir)?;
    write_metadata(&dir, "subadd")?;
    let results: Vec<_> = splits.par_iter().map(|s| subadditivity_check(&model, s, &grid, &solver)).collect();
    let mut rows = Vec::new();
    for r in results {
        let r = r?;
        let verdict = match r.verdict {
            SubadditivityVerdict::Strict => "strict",
            SubadditivityVerdict::Inconclusive => "inconclusive",
            SubadditivityVerdict::Violated => "violated",
        };
        let [r1, s1, t1] = r.split.first;
        let [r2, s2, t2] = r.split.second;
        opts.say(format!("({r1}, {s1}, {t1}) + ({r2}, {s2}, {t2}): margin {:.6e} [{verdict}]", r.margin));
        rows.push(MarginRow {
            r1,
            s1,
            t1,
            r2,
            s2,
            t2,
            lambda_total: r.lambda_total,
            lambda_first: r.lambda_first,
            lambda_second: r.lambda_second,
            margin: r.margin,
            tolerance: r.tolerance,
            verdict,
            inconclusive: r.verdict == SubadditivityVerdict::Inconclusive,
        });
    }
    if cfg.output.wants(Format::Csv) {
        let path = dir.join("margins.csv");
        let csv_err = |source| IoError::Csv { path: path.clone(), source };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        for row in &rows {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush().map_err(|source| IoError::Io { path: path.clone(), source })?;
    }
    if let Some(row) = rows.iter().find(|r| r.verdict == "violated") {
        return Err(CliError::Validation(format!("positive margin {:.3e}", row.margin)));
    }
    Ok(rows)
}

pub fn validate(opts: &Options) -> Result<Vec<CheckOutcome>, CliError> {
    let checks = oracle_checks();
    for c in &checks {
        opts.say(format!(
            "{}  {:<48} {:.3e} (tolerance {:.0e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        ));
    }
    if let Some(out) = &opts.out {
        ensure_dir(out)?;
        write_json(&out.join("validate.json"), &checks)?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(checks)
    } else {
        Err(CliError::Validation(failed.join("; ")))
    }
}
