//! TOML run configuration.
//!
//! Physics sections (`grid`, `coupling`, and whichever of `masses`,
//! `evolution`, `stability`, `subadd` the subcommand needs) have no defaults.
//! Solver knobs and output settings do.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cnls_core::ground_state::{Init, MassSplit, SolverConfig};
use cnls_core::model::{CouplingModel, MassTriple};
use cnls_core::spectral::{make_grid, Grid};
use cnls_core::stability::{default_eps, PerturbationKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
}

fn invalid(field: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), message: message.to_string() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub coupling: CouplingSection,
    pub masses: Option<MassSection>,
    #[serde(default)]
    pub solver: SolverSection,
    pub evolution: Option<EvolutionSection>,
    pub stability: Option<StabilitySection>,
    pub subadd: Option<SubaddSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub a: [[f64; 3]; 3],
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassSection {
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Gaussian,
    Sech,
    File,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tau: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub energy_tol: f64,
    /// 0 disables rearrangement.
    pub rearrange_every: usize,
    pub seed: u64,
    pub noise: f64,
    pub init: InitKind,
    /// Profile CSV used when `init = "file"`.
    pub init_file: Option<PathBuf>,
    /// Polish the minimizer with the fixed-point iteration.
    pub refine: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tau: d.tau,
            max_iters: d.max_iters,
            residual_tol: d.residual_tol,
            energy_tol: d.energy_tol,
            rearrange_every: d.rearrange_every.unwrap_or(0),
            seed: d.seed,
            noise: d.noise,
            init: InitKind::Gaussian,
            init_file: None,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(rename = "T")]
    pub final_time: f64,
    pub dt: f64,
    #[serde(default)]
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationName {
    RandomH1,
    MassPreservingRandom,
    ComponentTilt,
}

impl From<PerturbationName> for PerturbationKind {
    fn from(p: PerturbationName) -> Self {
        match p {
            PerturbationName::RandomH1 => PerturbationKind::RandomH1,
            PerturbationName::MassPreservingRandom => PerturbationKind::MassPreservingRandom,
            PerturbationName::ComponentTilt => PerturbationKind::ComponentTilt,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub kind: PerturbationName,
    pub delta: f64,
    /// Defaults to `max(20 delta, 1e-6)`.
    pub eps: Option<f64>,
    pub seeds: Vec<u64>,
    #[serde(rename = "T")]
    pub final_time: f64,
    pub dt: f64,
    /// Steps between distance samples; defaults to every 0.1 time units.
    pub sample_every: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubaddSection {
    /// Each entry is `[[r1, s1, t1], [r2, s2, t2]]`.
    pub splits: Vec<[[f64; 3]; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), formats: vec![Format::Json, Format::Csv] }
    }
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Stability settings after validation.
#[derive(Debug, Clone)]
pub struct StabilitySettings {
    pub kind: PerturbationKind,
    pub delta: f64,
    pub eps: f64,
    pub seeds: Vec<u64>,
    pub final_time: f64,
    pub dt: f64,
    pub sample_every: usize,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    /// Re-validate every section that is present.
    pub fn check(&self) -> Result<(), ConfigError> {
        self.grid()?;
        self.model()?;
        if self.masses.is_some() {
            self.masses()?;
        }
        self.solver_config_without_init()?;
        if self.solver.init == InitKind::File && self.solver.init_file.is_none() {
            return Err(invalid("solver.init_file", "required when solver.init = \"file\""));
        }
        if self.evolution.is_some() {
            self.evolution()?;
        }
        if self.stability.is_some() {
            self.stability()?;
        }
        if self.subadd.is_some() {
            self.splits()?;
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats", "at least one format is required"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>, ConfigError> {
        make_grid(self.grid.n, self.grid.length).map_err(|e| invalid("grid", e))
    }

    pub fn model(&self) -> Result<CouplingModel, ConfigError> {
        let c = &self.coupling;
        if !(2.0..3.0).contains(&c.p) {
            return Err(invalid("coupling.p", format!("{} is outside [2, 3)", c.p)));
        }
        CouplingModel::new(c.a, c.p).map_err(|e| invalid("coupling.a", e))
    }

    pub fn masses(&self) -> Result<MassTriple, ConfigError> {
        let m = self.masses.as_ref().ok_or(ConfigError::MissingSection("masses"))?;
        MassTriple::new(m.r, m.s, m.t).map_err(|e| invalid("masses", e))
    }

    /// Solver settings with the built-in initial guess; `init = "file"` is
    /// resolved by the caller, which needs the grid and file access.
    pub fn solver_config_without_init(&self) -> Result<SolverConfig, ConfigError> {
        let s = &self.solver;
        let cfg = SolverConfig {
            tau: s.tau,
            max_iters: s.max_iters,
            residual_tol: s.residual_tol,
            energy_tol: s.energy_tol,
            rearrange_every: (s.rearrange_every > 0).then_some(s.rearrange_every),
            seed: s.seed,
            noise: s.noise,
            init: match s.init {
                InitKind::Sech => Init::SechGuess,
                InitKind::Gaussian | InitKind::File => Init::GaussianBumps,
            },
        };
        cfg.validate().map_err(|e| invalid("solver", e))?;
        Ok(cfg)
    }

    pub fn evolution(&self) -> Result<&EvolutionSection, ConfigError> {
        let e = self.evolution.as_ref().ok_or(ConfigError::MissingSection("evolution"))?;
        if !(e.final_time >= 0.0 && e.final_time.is_finite()) {
            return Err(invalid("evolution.T", "must be non-negative"));
        }
        if !(e.dt > 0.0 && e.dt.is_finite()) {
            return Err(invalid("evolution.dt", "must be positive"));
        }
        Ok(e)
    }

    pub fn stability(&self) -> Result<StabilitySettings, ConfigError> {
        let s = self.stability.as_ref().ok_or(ConfigError::MissingSection("stability"))?;
        if !(s.delta >= 0.0 && s.delta.is_finite()) {
            return Err(invalid("stability.delta", "must be non-negative"));
        }
        if let Some(eps) = s.eps {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(invalid("stability.eps", "must be non-negative"));
            }
        }
        if s.seeds.is_empty() {
            return Err(invalid("stability.seeds", "at least one seed is required"));
        }
        if !(s.final_time >= 0.0 && s.final_time.is_finite()) {
            return Err(invalid("stability.T", "must be non-negative"));
        }
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(invalid("stability.dt", "must be positive"));
        }
        if s.sample_every == Some(0) {
            return Err(invalid("stability.sample_every", "must be at least 1"));
        }
        Ok(StabilitySettings {
            kind: s.kind.into(),
            delta: s.delta,
            eps: s.eps.unwrap_or_else(|| default_eps(s.delta)),
            seeds: s.seeds.clone(),
            final_time: s.final_time,
            dt: s.dt,
            sample_every: s.sample_every.unwrap_or_else(|| ((0.1 / s.dt).round() as usize).max(1)),
        })
    }

    pub fn splits(&self) -> Result<Vec<MassSplit>, ConfigError> {
        let s = self.subadd.as_ref().ok_or(ConfigError::MissingSection("subadd"))?;
        if s.splits.is_empty() {
            return Err(invalid("subadd.splits", "at least one split is required"));
        }
        s.splits
            .iter()
            .enumerate()
            .map(|(i, [first, second])| {
                let split = MassSplit { first: *first, second: *second };
                split.validate().map_err(|e| invalid(&format!("subadd.splits[{i}]"), e))?;
                Ok(split)
            })
            .collect()
    }
}
