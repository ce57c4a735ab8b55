//! Perron root of the branching matrix over a (mu_b, n, λ) grid.

use firesale::stability::BranchingModel;
use firesale::{DegreeLaw, MonteCarloParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub mu_b: Vec<f64>,
    pub n: Vec<f64>,
    pub lambda: Vec<f64>,
    pub alpha: f64,
    pub k_max: usize,
    pub samples: usize,
    pub seed: u64,
}

pub struct PhaseRow {
    pub mu_b: f64,
    pub n: f64,
    pub lambda: f64,
    pub xi1: f64,
    /// Some grid neighbour lies on the other side of `xi1 = 1`.
    pub boundary: bool,
}

impl PhaseGrid {
    pub fn validate(&self) -> Result<(), CliError> {
        for (name, values) in [
            ("mu-b", &self.mu_b),
            ("n", &self.n),
            ("lambda", &self.lambda),
        ] {
            if values.is_empty() {
                return Err(CliError::Usage(format!("--{name}: empty value list")));
            }
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(CliError::Usage(format!(
                    "--{name}: values must be finite and > 0, got {v}"
                )));
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(CliError::Usage(format!(
                "--alpha must be finite and > 0, got {}",
                self.alpha
            )));
        }
        if self.k_max == 0 || self.samples == 0 {
            return Err(CliError::Usage("--k-max and --samples must be >= 1".into()));
        }
        Ok(())
    }

    /// Rows ordered by mu_b, then n, then λ.
    pub fn evaluate(&self) -> Result<Vec<PhaseRow>, CliError> {
        self.validate()?;
        let mc = MonteCarloParams {
            k_max: self.k_max,
            samples: self.samples,
            seed: self.seed,
        };
        let max_n = self.n.iter().copied().fold(0.0, f64::max);
        let xi: Vec<Vec<f64>> = self
            .mu_b
            .par_iter()
            .map(|&mu_b| {
                let model = BranchingModel::new(DegreeLaw::Poisson { mean: mu_b }, max_n, mc)?;
                let mut out = Vec::with_capacity(self.n.len() * self.lambda.len());
                for &n in &self.n {
                    for &lambda in &self.lambda {
                        out.push(model.xi1(n, lambda, self.alpha)?);
                    }
                }
                Ok(out)
            })
            .collect::<firesale::Result<_>>()
            .map_err(|e| CliError::Runtime(e.to_string()))?;

        let (nn, nl) = (self.n.len(), self.lambda.len());
        let unstable = |i: usize, j: usize, k: usize| xi[i][j * nl + k] > 1.0;
        let mut rows = Vec::with_capacity(self.mu_b.len() * nn * nl);
        for (i, &mu_b) in self.mu_b.iter().enumerate() {
            for (j, &n) in self.n.iter().enumerate() {
                for (k, &lambda) in self.lambda.iter().enumerate() {
                    let here = unstable(i, j, k);
                    let neighbours = [
                        (i.checked_sub(1), Some(j), Some(k)),
                        (
                            Some(i + 1).filter(|&x| x < self.mu_b.len()),
                            Some(j),
                            Some(k),
                        ),
                        (Some(i), j.checked_sub(1), Some(k)),
                        (Some(i), Some(j + 1).filter(|&x| x < nn), Some(k)),
                        (Some(i), Some(j), k.checked_sub(1)),
                        (Some(i), Some(j), Some(k + 1).filter(|&x| x < nl)),
                    ];
                    let boundary = neighbours.iter().any(|&(a, b, c)| match (a, b, c) {
                        (Some(a), Some(b), Some(c)) => unstable(a, b, c) != here,
                        _ => false,
                    });
                    rows.push(PhaseRow {
                        mu_b,
                        n,
                        lambda,
                        xi1: xi[i][j * nl + k],
                        boundary,
                    });
                }
            }
        }
        Ok(rows)
    }
}

pub const PHASE_CSV_HEADER: &str = "mu_b,n,lambda,alpha,xi1,unstable,boundary";

pub fn to_csv(grid: &PhaseGrid, rows: &[PhaseRow]) -> Vec<u8> {
    let mut out = String::from(PHASE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.mu_b,
            r.n,
            r.lambda,
            grid.alpha,
            r.xi1,
            u8::from(r.xi1 > 1.0),
            u8::from(r.boundary)
        ));
    }
    out.into_bytes()
}

/// Smallest λ on the grid with `xi1 > 1`, with its (mu_b, n).
pub fn min_unstable_lambda(rows: &[PhaseRow]) -> Option<&PhaseRow> {
    rows.iter()
        .filter(|r| r.xi1 > 1.0)
        .min_by(|a, b| a.lambda.total_cmp(&b.lambda))
}
