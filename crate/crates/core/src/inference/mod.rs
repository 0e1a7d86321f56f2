//! Samplers and variational optimisation over prepared models.

mod hmc;
mod vi;

pub use hmc::{hmc, interleaved_hmc, leapfrog, transition, HmcConfig, HmcState, Trajectory};
pub use vi::{advi, optimize_elbo, Guide, LambdaVar, ViConfig, ViOutcome};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("could not find a finite starting point after {tries} jittered starts")]
    Initialization { tries: usize },
    #[error("ELBO stayed non-finite for {streak} consecutive steps")]
    DiagnosticFailure { streak: usize, trace: Vec<f64> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reparam(#[from] crate::reparam::ReparamError),
    #[error(transparent)]
    Type(#[from] crate::levels::TypeError),
}

/// Posterior draws on the constrained scale, one row per kept iteration,
/// plus per-draw diagnostics.
#[derive(Debug, Clone)]
pub struct Draws {
    /// Column labels: parameters first, then generated quantities.
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub divergent: Vec<bool>,
    /// Fraction of accepted transitions over the kept iterations.
    pub accept_rate: f64,
    /// Unconstrained positions of the kept draws (for diagnostics).
    pub unconstrained: Vec<Vec<f64>>,
    /// Potential energy at each kept draw.
    pub potentials: Vec<f64>,
}

impl Draws {
    pub fn divergence_count(&self) -> usize {
        self.divergent.iter().filter(|d| **d).count()
    }

    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let idx = self.labels.iter().position(|l| l == label)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Sample mean and standard deviation of a column.
    pub fn mean_std(&self, label: &str) -> Option<(f64, f64)> {
        let xs = self.column(label)?;
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Some((mean, var.sqrt()))
    }

    /// CSV with a header row and one row per draw; the last column is
    /// the `divergent__` flag.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.labels.join(","));
        out.push_str(",divergent__\n");
        for (row, div) in self.rows.iter().zip(&self.divergent) {
            for v in row {
                out.push_str(&format!("{v:?},"));
            }
            out.push_str(if *div { "1\n" } else { "0\n" });
        }
        out
    }
}

/// Monte Carlo estimate: the mean of `f` over the draws.
pub fn estimate_expectation(draws: &Draws, f: impl Fn(&[f64]) -> f64) -> f64 {
    let n = draws.rows.len().max(1) as f64;
    draws.rows.iter().map(|r| f(r)).sum::<f64>() / n
}
