use std::sync::Arc;

use super::{minimize, SolveError, SolverConfig};
use crate::model::{CouplingModel, MassTriple};
use crate::spectral::Grid;

/// Masses `(r1, s1, t1) + (r2, s2, t2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSplit {
    pub first: [f64; 3],
    pub second: [f64; 3],
}

impl MassSplit {
    pub fn total(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| self.first[j] + self.second[j])
    }

    /// Every mass is non-negative and each part carries positive total mass.
    pub fn validate(&self) -> Result<(), SolveError> {
        let ok = self.first.iter().chain(&self.second).all(|m| *m >= 0.0 && m.is_finite());
        if !ok {
            return Err(SolveError::Precondition("split masses must be non-negative".into()));
        }
        if self.first.iter().sum::<f64>() <= 0.0 || self.second.iter().sum::<f64>() <= 0.0 {
            return Err(SolveError::Precondition("each part of the split needs positive total mass".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubadditivityVerdict {
    /// Margin below `-2 * tolerance`.
    Strict,
    /// Margin within `+-2 * tolerance`.
    Inconclusive,
    /// Margin above `+2 * tolerance`.
    Violated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubadditivityReport {
    pub split: MassSplit,
    pub lambda_total: f64,
    pub lambda_first: f64,
    pub lambda_second: f64,
    /// `lambda(total) - lambda(first) - lambda(second)`.
    pub margin: f64,
    /// Solver tolerance attached to the margin.
    pub tolerance: f64,
    pub verdict: SubadditivityVerdict,
}

/// Solve the three problems of a split concurrently and report the margin.
pub fn subadditivity_check(
    model: &CouplingModel,
    split: &MassSplit,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<SubadditivityReport, SolveError> {
    split.validate()?;
    let solve = |m: [f64; 3]| -> Result<f64, SolveError> {
        Ok(minimize(model, &MassTriple::try_from(m)?, grid, cfg)?.lambda)
    };
    let (total, (first, second)) = rayon::join(
        || solve(split.total()),
        || rayon::join(|| solve(split.first), || solve(split.second)),
    );
    let (lambda_total, lambda_first, lambda_second) = (total?, first?, second?);
    let margin = lambda_total - lambda_first - lambda_second;
    let tolerance = cfg.energy_tol.max(cfg.residual_tol);
    let verdict = if margin < -2.0 * tolerance {
        SubadditivityVerdict::Strict
    } else if margin > 2.0 * tolerance {
        SubadditivityVerdict::Violated
    } else {
        SubadditivityVerdict::Inconclusive
    };
    Ok(SubadditivityReport { split: *split, lambda_total, lambda_first, lambda_second, margin, tolerance, verdict })
}
