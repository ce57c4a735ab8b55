//! Failure probability of a bank given a failed co-holder of one asset.
//!
//! A bank of degree `h` shares asset `a` (degree `ℓ`) with a failed bank of
//! degree `k`. The failed bank sells its `1/k` shares out of the asset's
//! float `1/h + 1/k + sum_i 1/m_i`, where `m_i` are the degrees of the other
//! `ℓ - 2` holders, drawn from the size-biased degree law. The bank fails
//! when `(1/h) (1 - f(x)) > 1/λ`.
//!
//! The loss decreases as the co-holders' sum `S = sum_i 1/m_i` grows, so
//! `F(h, k, ℓ)` is the empirical probability that `S_{ℓ-2}` falls in the
//! failing region. [`FailureKernel`] stores sorted Monte-Carlo samples of
//! `S_j` for every `j` and answers each query with a binary search. Sample
//! path `r` is the running sum of one sequence `m_1, m_2, ...` with its own
//! seeded stream, so `S_j` grows pathwise in `j` and every query reuses the
//! same draws.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gamma::ln_gamma;
use crate::seed;
use crate::{Error, Result};

/// Degree distribution of the banks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DegreeLaw {
    Poisson { mean: f64 },
    Regular { degree: usize },
}

impl DegreeLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            DegreeLaw::Poisson { mean } => mean,
            DegreeLaw::Regular { degree } => degree as f64,
        }
    }

    pub fn pmf(&self, h: usize) -> f64 {
        match *self {
            DegreeLaw::Poisson { mean } => poisson_pmf(mean, h),
            DegreeLaw::Regular { degree } => f64::from(u8::from(h == degree)),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            DegreeLaw::Poisson { mean } if !(mean.is_finite() && mean > 0.0) => Err(Error::param(
                "mu_b",
                format!("must be finite and > 0, got {mean}"),
            )),
            DegreeLaw::Regular { degree: 0 } => Err(Error::param("degree", "must be >= 1")),
            _ => Ok(()),
        }
    }
}

pub(crate) fn poisson_pmf(mean: f64, k: usize) -> f64 {
    if mean == 0.0 {
        return f64::from(u8::from(k == 0));
    }
    let k = k as f64;
    (k * mean.ln() - mean - ln_gamma(k + 1.0)).exp()
}

/// Degree of a bank reached along a random link when bank degrees are
/// Poisson(`mu_b`): `P(m) = m P_b(m) / mu_b`, i.e. `1 + Poisson(mu_b)`.
pub fn sample_size_biased_degree<R: Rng + ?Sized>(mu_b: f64, rng: &mut R) -> Result<usize> {
    let law = Poisson::new(mu_b).map_err(|e| Error::param("mu_b", e.to_string()))?;
    Ok(1 + law.sample(rng) as usize)
}

/// `true` when a bank of degree `h` fails after a degree-`k` co-holder
/// liquidates, with `others = sum 1/m_i` over the remaining holders.
#[inline]
pub fn fails(h: usize, k: usize, others: f64, lambda: f64, alpha: f64) -> bool {
    let (h, k) = (h as f64, k as f64);
    let x = (1.0 / k) / (1.0 / h + 1.0 / k + others);
    -(-alpha * x).exp_m1() / h > 1.0 / lambda
}

#[derive(Debug, Clone)]
pub struct FailureKernel {
    law: DegreeLaw,
    samples: usize,
    seed: u64,
    /// `sums[j]`: sorted samples of the sum of `1/m` over `j` co-holders.
    sums: Vec<Vec<f64>>,
}

impl FailureKernel {
    /// Samples co-holder sums for asset degrees up to `max_asset_degree`.
    pub fn new(law: DegreeLaw, max_asset_degree: usize, samples: usize, seed: u64) -> Result<Self> {
        law.validate()?;
        if samples == 0 {
            return Err(Error::param("samples", "must be >= 1"));
        }
        let max_others = max_asset_degree.saturating_sub(2);
        let sums = match law {
            DegreeLaw::Regular { degree } => (0..=max_others)
                .map(|j| vec![j as f64 / degree as f64; samples])
                .collect(),
            DegreeLaw::Poisson { mean } => {
                let draw = Poisson::new(mean).map_err(|e| Error::param("mu_b", e.to_string()))?;
                let paths: Vec<Vec<f64>> = (0..samples as u64)
                    .into_par_iter()
                    .map(|r| {
                        let mut rng = seed::rng(seed::point_seed(seed, r));
                        let mut s = 0.0;
                        let mut path = Vec::with_capacity(max_others + 1);
                        path.push(0.0);
                        for _ in 0..max_others {
                            let m = 1.0 + draw.sample(&mut rng);
                            s += 1.0 / m;
                            path.push(s);
                        }
                        path
                    })
                    .collect();
                (0..=max_others)
                    .into_par_iter()
                    .map(|j| {
                        let mut col: Vec<f64> = paths.iter().map(|p| p[j]).collect();
                        col.sort_by(f64::total_cmp);
                        col
                    })
                    .collect()
            }
        };
        Ok(Self {
            law,
            samples,
            seed,
            sums,
        })
    }

    pub fn law(&self) -> DegreeLaw {
        self.law
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Largest asset degree this kernel can answer for.
    pub fn max_asset_degree(&self) -> usize {
        self.sums.len() + 1
    }

    /// `F(h, k, ℓ)`; zero for `h >= λ`. Panics if `ℓ` exceeds
    /// [`Self::max_asset_degree`].
    pub fn failure_probability(
        &self,
        h: usize,
        k: usize,
        ell: usize,
        lambda: f64,
        alpha: f64,
    ) -> f64 {
        debug_assert!(h >= 1 && k >= 1 && ell >= 2);
        if h as f64 >= lambda {
            return 0.0;
        }
        let sums = &self.sums[ell - 2];
        let failing = sums.partition_point(|&s| fails(h, k, s, lambda, alpha));
        failing as f64 / self.samples as f64
    }
}

/// Monte-Carlo estimate of `F(h, k, ℓ)` for Poisson(`mu_b`) bank degrees.
#[allow(clippy::too_many_arguments)]
pub fn estimate_f(
    h: usize,
    k: usize,
    ell: usize,
    lambda: f64,
    alpha: f64,
    mu_b: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if h == 0 || k == 0 {
        return Err(Error::param("degree", "h and k must be >= 1"));
    }
    if ell < 2 {
        return Err(Error::param("ell", "asset degree must be >= 2"));
    }
    let kernel = FailureKernel::new(DegreeLaw::Poisson { mean: mu_b }, ell, samples, seed)?;
    Ok(kernel.failure_probability(h, k, ell, lambda, alpha))
}
