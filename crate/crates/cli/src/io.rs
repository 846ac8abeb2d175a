//! Result files: CSV for fields and traces, JSON for scalars.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cnls_core::evolution::EvolutionTrace;
use cnls_core::ground_state::GroundState;
use cnls_core::model::{CouplingModel, State};
use cnls_core::spectral::{Field, Grid, SpectralError};
use cnls_core::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROFILE_HEADER: [&str; 7] = ["x", "re_u1", "im_u1", "re_u2", "im_u2", "re_u3", "im_u3"];
pub const TRACE_HEADER: [&str; 5] = ["t", "energy_drift", "mass_drift_u1", "mass_drift_u2", "mass_drift_u3"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRecord {
    pub a: [[f64; 3]; 3],
    pub p: f64,
}

/// Contents of `groundstate.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateRecord {
    pub lambda: f64,
    pub omega: [f64; 3],
    pub residual: f64,
    pub iterations: usize,
    pub masses: [f64; 3],
    pub grid: GridRecord,
    pub coupling: CouplingRecord,
}

impl GroundStateRecord {
    pub fn new(gs: &GroundState, model: &CouplingModel) -> Self {
        let grid = gs.grid();
        Self {
            lambda: gs.lambda,
            omega: gs.multipliers.omega,
            residual: gs.residual,
            iterations: gs.iterations,
            masses: gs.masses_achieved,
            grid: GridRecord { n: grid.n(), length: grid.length() },
            coupling: CouplingRecord { a: *model.a(), p: model.p() },
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

/// One row per node, ordered by `x`.
pub fn write_profile(path: &Path, state: &State) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(PROFILE_HEADER).map_err(csv_err(path))?;
    let grid = state.grid();
    for (m, &x) in grid.nodes().iter().enumerate() {
        let mut row = vec![x];
        for f in state.components() {
            row.push(f.values()[m].re);
            row.push(f.values()[m].im);
        }
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Read a profile written by [`write_profile`] onto `grid`; the node count
/// and positions must match.
pub fn read_profile(path: &Path, grid: &Arc<Grid>) -> Result<State, IoError> {
    let format = |message: String| IoError::Format { path: path.to_path_buf(), message };
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(PROFILE_HEADER) {
        return Err(format(format!("expected header {}", PROFILE_HEADER.join(","))));
    }
    let mut columns: [Vec<Complex64>; 3] = Default::default();
    let tol = 1e-9 * grid.length();
    for (m, row) in r.deserialize::<[f64; 7]>().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let Some(&x) = grid.nodes().get(m) else {
            return Err(format(format!("more rows than the {} grid nodes", grid.n())));
        };
        if (row[0] - x).abs() > tol {
            return Err(format(format!("row {} has x = {} but the grid node is {x}", m + 1, row[0])));
        }
        for (j, col) in columns.iter_mut().enumerate() {
            col.push(Complex64::new(row[1 + 2 * j], row[2 + 2 * j]));
        }
    }
    if columns[0].len() != grid.n() {
        return Err(format(format!("{} rows for a grid of {} nodes", columns[0].len(), grid.n())));
    }
    let [a, b, c] = columns.map(|v| Field::new(grid, v));
    let field = |f: Result<Field, SpectralError>| f.map_err(|e| format(e.to_string()));
    State::new(field(a)?, field(b)?, field(c)?).map_err(|e| format(e.to_string()))
}

pub fn write_trace(path: &Path, trace: &EvolutionTrace) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(TRACE_HEADER).map_err(csv_err(path))?;
    for (i, &t) in trace.times.iter().enumerate() {
        let row = [t, trace.energy_drift[i], trace.mass_drifts[0][i], trace.mass_drifts[1][i], trace.mass_drifts[2][i]];
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Run metadata kept apart from the deterministic results.
#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub unix_time: u64,
}

pub fn write_metadata(dir: &Path, command: &str) -> Result<(), IoError> {
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = Metadata { command, version: env!("CARGO_PKG_VERSION"), unix_time };
    write_json(&dir.join("metadata.json"), &meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cnls_core::model::equal_coupling_state;
    use cnls_core::spectral::make_grid;

    #[test]
    fn profile_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.csv");
        let g = make_grid(128, 30.0).unwrap();
        let s = equal_coupling_state(1.0, 1.0, 1.0, 2.0, &g).unwrap();
        let s = s.map(|j, f| f.scaled(Complex64::from_polar(1.0, 0.3 * j as f64)));
        write_profile(&path, &s).unwrap();
        let back = read_profile(&path, &g).unwrap();
        assert_eq!(back.max_distance(&s).unwrap(), 0.0);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,re_u1,im_u1,re_u2,im_u2,re_u3,im_u3\n"));
    }

    #[test]
    fn profile_on_other_grid_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.csv");
        let g = make_grid(128, 30.0).unwrap();
        write_profile(&path, &State::zeros(&g)).unwrap();
        assert!(matches!(read_profile(&path, &make_grid(256, 30.0).unwrap()), Err(IoError::Format { .. })));
        assert!(matches!(read_profile(&path, &make_grid(128, 20.0).unwrap()), Err(IoError::Format { .. })));
        assert!(matches!(read_profile(&dir.path().join("missing.csv"), &g), Err(IoError::Csv { .. })));
    }
}
