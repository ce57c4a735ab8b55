//! Seeded ensembles of cascades and one-dimensional parameter sweeps.
//!
//! Each run draws a fresh Poisson network, builds uniform balance sheets,
//! shocks a uniformly chosen asset or bank and runs the cascade to its
//! fixed point. Runs execute on the current rayon pool; every run owns its
//! random stream (see [`crate::seed`]) and results are reduced in run
//! order, so the statistics do not depend on the number of workers.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::FinancialSystem;
use crate::cascade::{run_cascade, Shock, ShockKind};
use crate::network::BipartiteNetwork;
use crate::seed;
use crate::{Error, Result};

/// Standard errors above zero a sweep point must clear to count as inside
/// the contagion window.
pub const DEFAULT_NOISE_SIGMAS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockSpec {
    pub kind: ShockKind,
    /// Devaluation of the shocked asset; ignored for bank shocks.
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
}

fn default_magnitude() -> f64 {
    crate::DEFAULT_ASSET_SHOCK
}

impl Default for ShockSpec {
    fn default() -> Self {
        Self {
            kind: ShockKind::Asset,
            magnitude: crate::DEFAULT_ASSET_SHOCK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_banks: usize,
    pub n_assets: usize,
    pub mean_bank_degree: f64,
    pub leverage: f64,
    pub alpha: f64,
    pub shock: ShockSpec,
    pub runs: usize,
    pub global_threshold: f64,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_banks: 10_000,
            n_assets: 10_000,
            mean_bank_degree: 5.0,
            leverage: crate::DEFAULT_LEVERAGE,
            alpha: crate::DEFAULT_ALPHA,
            shock: ShockSpec::default(),
            runs: 1000,
            global_threshold: crate::DEFAULT_GLOBAL_THRESHOLD,
            base_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_banks == 0 {
            return Err(Error::param("n_banks", "must be at least 1"));
        }
        if self.n_assets == 0 {
            return Err(Error::param("n_assets", "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(Error::param("runs", "must be at least 1"));
        }
        let mu = self.mean_bank_degree;
        if !(mu.is_finite() && mu >= 0.0 && mu <= self.n_assets as f64) {
            return Err(Error::param(
                "mean_bank_degree",
                format!("must lie in [0, n_assets], got {mu}"),
            ));
        }
        if !(self.leverage.is_finite() && self.leverage > 0.0) {
            return Err(Error::param(
                "leverage",
                format!("must be > 0, got {}", self.leverage),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::param(
                "alpha",
                format!("must be > 0, got {}", self.alpha),
            ));
        }
        if self.shock.kind == ShockKind::Asset
            && !(self.shock.magnitude > 0.0 && self.shock.magnitude <= 1.0)
        {
            return Err(Error::param(
                "shock.magnitude",
                format!("must lie in (0, 1], got {}", self.shock.magnitude),
            ));
        }
        if !(0.0..=1.0).contains(&self.global_threshold) {
            return Err(Error::param(
                "global_threshold",
                format!("must lie in [0, 1], got {}", self.global_threshold),
            ));
        }
        Ok(())
    }
}

/// Outcome of one ensemble member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub failed_fraction: f64,
    pub is_global: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub runs: usize,
    pub contagion_probability: f64,
    /// Binomial standard error `sqrt(p (1 - p) / runs)`.
    pub probability_stderr: f64,
    /// Mean failed fraction over global cascades only; `None` without any.
    pub conditional_extent_mean: Option<f64>,
    pub conditional_extent_count: usize,
    /// Mean failed fraction over all runs.
    pub mean_failed_fraction: f64,
}

impl EnsembleStats {
    /// Reduces outcomes in the given order.
    pub fn from_outcomes(outcomes: &[RunOutcome]) -> Self {
        let runs = outcomes.len();
        let (mut count, mut global_sum, mut all_sum) = (0usize, 0.0, 0.0);
        for o in outcomes {
            all_sum += o.failed_fraction;
            if o.is_global {
                count += 1;
                global_sum += o.failed_fraction;
            }
        }
        let p = count as f64 / runs as f64;
        Self {
            runs,
            contagion_probability: p,
            probability_stderr: (p * (1.0 - p) / runs as f64).sqrt(),
            conditional_extent_mean: (count > 0).then(|| global_sum / count as f64),
            conditional_extent_count: count,
            mean_failed_fraction: all_sum / runs as f64,
        }
    }
}

/// Network, balance sheets and shock of member `run` of sweep point `point`.
pub fn prepare_run(
    cfg: &ExperimentConfig,
    point: u64,
    run: u64,
) -> Result<(FinancialSystem, Shock)> {
    let mut rng = seed::rng(seed::run_seed(cfg.base_seed, point, run));
    let net = BipartiteNetwork::poisson(
        cfg.n_banks,
        cfg.n_assets,
        cfg.mean_bank_degree,
        rng.next_u64(),
    )?;
    let sys = FinancialSystem::uniform(net, cfg.leverage, cfg.alpha)?;
    let shock = match cfg.shock.kind {
        ShockKind::Asset => Shock::AssetDevaluation {
            asset: rng.random_range(0..cfg.n_assets),
            magnitude: cfg.shock.magnitude,
        },
        ShockKind::Bank => Shock::BankFailure {
            bank: rng.random_range(0..cfg.n_banks),
        },
    };
    Ok((sys, shock))
}

/// Runs member `run` of sweep point `point`.
pub fn simulate_run(cfg: &ExperimentConfig, point: u64, run: u64) -> Result<RunOutcome> {
    let (mut sys, shock) = prepare_run(cfg, point, run)?;
    let r = run_cascade(&mut sys, shock, cfg.global_threshold)?;
    Ok(RunOutcome {
        failed_fraction: r.failed_fraction,
        is_global: r.is_global,
    })
}

fn run_point(cfg: &ExperimentConfig, point: u64) -> Result<EnsembleStats> {
    cfg.validate()?;
    let outcomes = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|run| simulate_run(cfg, point, run))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleStats::from_outcomes(&outcomes))
}

/// Contagion probability and conditional extent over `cfg.runs` seeded runs.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleStats> {
    run_point(cfg, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    MeanBankDegree,
    Leverage,
    Alpha,
    /// `n = N / M`, varied through the number of assets at fixed N.
    Crowding,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::MeanBankDegree => "mu_b",
            SweepAxis::Leverage => "lambda",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Crowding => "n",
        }
    }

    /// The configuration at `value` along this axis.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = cfg.clone();
        match self {
            SweepAxis::MeanBankDegree => c.mean_bank_degree = value,
            SweepAxis::Leverage => c.leverage = value,
            SweepAxis::Alpha => c.alpha = value,
            SweepAxis::Crowding => {
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::param(
                        "n",
                        format!("crowding must be > 0, got {value}"),
                    ));
                }
                c.n_assets = ((c.n_banks as f64 / value).round() as usize).max(1);
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mu_b" | "mean_bank_degree" => SweepAxis::MeanBankDegree,
            "lambda" | "leverage" => SweepAxis::Leverage,
            "alpha" => SweepAxis::Alpha,
            "n" | "crowding" => SweepAxis::Crowding,
            other => {
                return Err(Error::param(
                    "axis",
                    format!("expected one of mu_b, lambda, alpha, n; got `{other}`"),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub config: ExperimentConfig,
    pub stats: EnsembleStats,
}

impl SweepRow {
    pub fn crowding(&self) -> f64 {
        self.config.n_banks as f64 / self.config.n_assets as f64
    }
}

/// One ensemble per value; point `i` uses seeds derived from `(base_seed, i)`.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::param("values", "sweep needs at least one value"));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(cfg, v))
        .collect::<Result<Vec<_>>>()?;
    configs
        .into_par_iter()
        .zip(values.par_iter())
        .enumerate()
        .map(|(i, (config, &value))| {
            let stats = run_point(&config, i as u64)?;
            Ok(SweepRow {
                axis,
                value,
                config,
                stats,
            })
        })
        .collect()
}

/// Smallest and largest axis values whose contagion probability clears the
/// default noise floor (two standard errors above zero).
pub fn estimate_transition(rows: &[SweepRow]) -> Option<(f64, f64)> {
    estimate_transition_with_floor(rows, DEFAULT_NOISE_SIGMAS)
}

pub fn estimate_transition_with_floor(rows: &[SweepRow], sigmas: f64) -> Option<(f64, f64)> {
    rows.iter()
        .filter(|r| {
            let s = &r.stats;
            s.contagion_probability > 0.0 && s.contagion_probability > sigmas * s.probability_stderr
        })
        .map(|r| r.value)
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

pub const SWEEP_CSV_HEADER: &str =
    "axis,value,mu_b,n,lambda,alpha,shock_kind,runs,p_contagion,p_stderr,cond_extent,cond_count,base_seed";

/// Writes rows in the sweep CSV layout. An empty `cond_extent` means no
/// global cascade was observed at that point.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        let c = &r.config;
        let s = &r.stats;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.axis,
            r.value,
            c.mean_bank_degree,
            r.crowding(),
            c.leverage,
            c.alpha,
            c.shock.kind.as_str(),
            s.runs,
            s.contagion_probability,
            s.probability_stderr,
            s.conditional_extent_mean
                .map(|e| e.to_string())
                .unwrap_or_default(),
            s.conditional_extent_count,
            c.base_seed
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ShockKind) -> ExperimentConfig {
        ExperimentConfig {
            n_banks: 400,
            n_assets: 400,
            mean_bank_degree: 3.0,
            shock: ShockSpec {
                kind,
                magnitude: 0.35,
            },
            runs: 60,
            base_seed: 17,
            ..ExperimentConfig::default()
        }
    }

    fn row(value: f64, p: f64, runs: usize) -> SweepRow {
        let count = (p * runs as f64).round() as usize;
        let outcomes: Vec<_> = (0..runs)
            .map(|i| RunOutcome {
                failed_fraction: if i < count { 0.9 } else { 0.0 },
                is_global: i < count,
            })
            .collect();
        SweepRow {
            axis: SweepAxis::MeanBankDegree,
            value,
            config: ExperimentConfig::default(),
            stats: EnsembleStats::from_outcomes(&outcomes),
        }
    }

    #[test]
    fn no_links_no_contagion() {
        for kind in [ShockKind::Asset, ShockKind::Bank] {
            let cfg = ExperimentConfig {
                mean_bank_degree: 0.0,
                ..small(kind)
            };
            let s = run_ensemble(&cfg).unwrap();
            assert_eq!(s.contagion_probability, 0.0);
            assert_eq!(s.conditional_extent_mean, None);
        }
    }

    #[test]
    fn unleveraged_banks_never_cascade() {
        let cfg = ExperimentConfig {
            leverage: 1.0,
            ..small(ShockKind::Bank)
        };
        let s = run_ensemble(&cfg).unwrap();
        assert_eq!(s.contagion_probability, 0.0);
        // Only the shocked bank itself ever fails.
        assert!((s.mean_failed_fraction - 1.0 / 400.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_count_matches_probability() {
        let s = run_ensemble(&small(ShockKind::Bank)).unwrap();
        assert_eq!(
            s.conditional_extent_count as f64 / s.runs as f64,
            s.contagion_probability
        );
        assert!((0.0..=1.0).contains(&s.contagion_probability));
    }

    #[test]
    fn thread_count_is_invisible() {
        let cfg = small(ShockKind::Asset);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one
            .install(|| sweep(&cfg, SweepAxis::MeanBankDegree, &[1.5, 3.0]))
            .unwrap();
        let b = four
            .install(|| sweep(&cfg, SweepAxis::MeanBankDegree, &[1.5, 3.0]))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_points_are_seeded_independently() {
        let cfg = small(ShockKind::Bank);
        let rows = sweep(&cfg, SweepAxis::Leverage, &[20.0, 20.0]).unwrap();
        // Same parameters, different point index: different draws.
        assert_ne!(
            rows[0].stats.mean_failed_fraction,
            rows[1].stats.mean_failed_fraction
        );
    }

    #[test]
    fn crowding_axis_changes_asset_count() {
        let cfg = small(ShockKind::Asset);
        let c = SweepAxis::Crowding.apply(&cfg, 2.0).unwrap();
        assert_eq!(c.n_assets, 200);
        assert!(SweepAxis::Crowding.apply(&cfg, 0.0).is_err());
    }

    #[test]
    fn sweep_rejects_empty_values_and_bad_config() {
        let cfg = small(ShockKind::Asset);
        assert!(sweep(&cfg, SweepAxis::Alpha, &[]).is_err());
        assert!(sweep(&cfg, SweepAxis::Alpha, &[-1.0]).is_err());
        let bad = ExperimentConfig { runs: 0, ..cfg };
        assert!(run_ensemble(&bad).is_err());
    }

    #[test]
    fn transition_of_all_zero_table_is_absent() {
        let rows: Vec<_> = (1..=7).map(|v| row(v as f64, 0.0, 100)).collect();
        assert_eq!(estimate_transition(&rows), None);
    }

    #[test]
    fn transition_of_synthetic_window() {
        let ps = [0.0, 0.0, 0.3, 0.5, 0.2, 0.0, 0.0];
        let rows: Vec<_> = ps
            .iter()
            .enumerate()
            .map(|(i, &p)| row(i as f64 + 1.0, p, 100))
            .collect();
        assert_eq!(estimate_transition(&rows), Some((3.0, 5.0)));
    }

    #[test]
    fn transition_ignores_points_below_noise_floor() {
        // One cascade in 100 runs: p = 0.01, stderr ~ 0.00995, below 2 sigma.
        let rows = vec![row(1.0, 0.01, 100), row(2.0, 0.2, 100), row(3.0, 0.0, 100)];
        assert_eq!(estimate_transition(&rows), Some((2.0, 2.0)));
    }

    #[test]
    fn axis_names_parse() {
        for axis in [
            SweepAxis::MeanBankDegree,
            SweepAxis::Leverage,
            SweepAxis::Alpha,
            SweepAxis::Crowding,
        ] {
            assert_eq!(axis.as_str().parse::<SweepAxis>().unwrap(), axis);
        }
        assert!("beta".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![row(2.0, 0.5, 10), row(3.0, 0.0, 10)];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.split(',').count() == 13));
        assert!(lines[2].contains(",0,0,,0,"));
    }
}
