//! `firesale`: reproducible fire-sale contagion experiments.
//!
//! Every command writes one output file plus `<output>.manifest.json`;
//! `firesale replay <manifest>` regenerates the output byte for byte.
//! Exit status: 0 success, 2 usage or configuration error, 1 runtime failure.

mod config;
mod manifest;
mod phase;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use firesale::montecarlo::{prepare_run, write_sweep_csv};
use firesale::seed::splitmix64;
use firesale::{
    run_cascade, sweep, BipartiteNetwork, FinancialSystem, Shock, ShockKind, SweepAxis,
};

use config::RunConfig;
use manifest::{Invocation, OutputRecord, RunManifest};
use phase::PhaseGrid;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

const CONFIG_HELP: &str = "JSON experiment config. Keys (all optional, defaults in brackets): \
n_banks [10000], n_assets [10000], mean_bank_degree [5], leverage [20], alpha [1.0536], \
shock {kind: asset|bank [asset], magnitude [0.35], target [drawn from seed]}, runs [1000], \
threshold [0.05], seed [0]; `cascade` also accepts an explicit `network` \
{n_banks, n_assets, links: [[bank, asset], ...]} or `system` (balance sheets and prices).";

#[derive(Parser)]
#[command(
    name = "firesale",
    version,
    about = "Fire-sale contagion on bipartite bank-asset networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one cascade and write its result as JSON.
    Cascade {
        #[arg(long, help = CONFIG_HELP)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Contagion probability and conditional extent along one parameter axis (CSV).
    Sweep {
        #[arg(long, help = CONFIG_HELP)]
        config: PathBuf,
        /// mu_b, n (crowding N/M; sets n_assets = round(n_banks / n)), lambda or alpha.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values and/or inclusive ranges `start:stop:step`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Overrides the config run count.
        #[arg(long)]
        runs: Option<usize>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        threads: Threads,
    },
    /// Largest eigenvalue of the branching matrix over a (mu_b, n, lambda) grid (CSV).
    Phase {
        /// Mean bank degrees: list and/or ranges `start:stop:step`.
        #[arg(long = "mu-b", default_value = "1:20:1")]
        mu_b: String,
        /// Crowding values N/M.
        #[arg(long, default_value = "1")]
        n: String,
        /// Leverage values.
        #[arg(long, default_value = "20")]
        lambda: String,
        #[arg(long, default_value_t = firesale::DEFAULT_ALPHA)]
        alpha: f64,
        /// Largest bank degree kept as a type.
        #[arg(long, default_value_t = 200)]
        k_max: usize,
        /// Monte-Carlo sample paths for the failure kernel.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        threads: Threads,
    },
    /// Regenerate the output recorded in a manifest and check its digest.
    Replay {
        manifest: PathBuf,
        /// Write here instead of the recorded path.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        threads: Threads,
    },
}

#[derive(Args)]
struct Threads {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Cascade {
            config,
            seed,
            output,
        } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            record(Invocation::Cascade { config }, &output, None)
        }
        Command::Sweep {
            config,
            axis,
            values,
            runs,
            seed,
            output,
            threads,
        } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(runs) = runs {
                config.runs = runs;
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let values = parse_values("values", &values)?;
            record(
                Invocation::Sweep {
                    config,
                    axis,
                    values,
                },
                &output,
                threads.threads,
            )
        }
        Command::Phase {
            mu_b,
            n,
            lambda,
            alpha,
            k_max,
            samples,
            seed,
            output,
            threads,
        } => {
            let grid = PhaseGrid {
                mu_b: parse_values("mu-b", &mu_b)?,
                n: parse_values("n", &n)?,
                lambda: parse_values("lambda", &lambda)?,
                alpha,
                k_max,
                samples,
                seed,
            };
            record(Invocation::Phase { grid }, &output, threads.threads)
        }
        Command::Replay {
            manifest,
            output,
            threads,
        } => replay(&manifest, output, threads.threads),
    }
}

/// Runs `inv`, writes its output and the manifest next to it.
fn record(inv: Invocation, output: &Path, threads: Option<usize>) -> Result<(), CliError> {
    let started_at = manifest::now();
    let content = with_threads(threads, || execute(&inv))?;
    write_file(output, &content)?;
    let m = RunManifest {
        tool: "firesale".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: inv.seed(),
        invocation: inv,
        threads,
        started_at,
        finished_at: manifest::now(),
        outputs: vec![OutputRecord::new(output, &content)],
    };
    let path = manifest::manifest_path(output);
    m.write(&path)?;
    println!("wrote {} and {}", output.display(), path.display());
    Ok(())
}

fn replay(path: &Path, output: Option<PathBuf>, threads: Option<usize>) -> Result<(), CliError> {
    let m = RunManifest::load(path)?;
    let recorded = m
        .outputs
        .first()
        .ok_or_else(|| CliError::Usage("manifest lists no outputs".into()))?;
    let content = with_threads(threads, || execute(&m.invocation))?;
    let target = output.unwrap_or_else(|| PathBuf::from(&recorded.path));
    write_file(&target, &content)?;
    let sha = manifest::digest(&content);
    if sha != recorded.sha256 {
        return Err(CliError::Runtime(format!(
            "replayed output {} differs from the recorded one (sha256 {sha}, expected {})",
            target.display(),
            recorded.sha256
        )));
    }
    println!("reproduced {} (sha256 {sha})", target.display());
    Ok(())
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::Usage("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(f),
    }
}

fn execute(inv: &Invocation) -> Result<Vec<u8>, CliError> {
    match inv {
        Invocation::Cascade { config } => cascade(config),
        Invocation::Sweep {
            config,
            axis,
            values,
        } => {
            if config.network.is_some() || config.system.is_some() {
                return Err(CliError::Usage(
                    "sweep draws fresh networks; remove `network` / `system` from the config"
                        .into(),
                ));
            }
            if values.is_empty() {
                return Err(CliError::Usage("--values: empty value list".into()));
            }
            let cfg = config.experiment()?;
            for &v in values {
                axis.apply(&cfg, v)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
            let rows = sweep(&cfg, *axis, values).map_err(|e| CliError::Runtime(e.to_string()))?;
            let mut out = Vec::new();
            write_sweep_csv(&mut out, &rows).map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(out)
        }
        Invocation::Phase { grid } => {
            let rows = grid.evaluate()?;
            match phase::min_unstable_lambda(&rows) {
                Some(r) => println!(
                    "minimum unstable leverage on the grid: {} (mu_b = {}, n = {}, xi1 = {:.4})",
                    r.lambda, r.mu_b, r.n, r.xi1
                ),
                None => println!("no unstable point on the grid"),
            }
            Ok(phase::to_csv(grid, &rows))
        }
    }
}

fn cascade(config: &RunConfig) -> Result<Vec<u8>, CliError> {
    let usage = |e: firesale::Error| CliError::Usage(e.to_string());
    let explicit = |sys: FinancialSystem| {
        let kind = config.shock.kind;
        let count = match kind {
            ShockKind::Asset => sys.n_assets(),
            ShockKind::Bank => sys.n_banks(),
        };
        if count == 0 {
            return Err(CliError::Usage(format!("no {} to shock", kind.as_str())));
        }
        let target = config
            .shock
            .target
            .unwrap_or((splitmix64(config.seed) % count as u64) as usize);
        Ok((sys, make_shock(kind, target, config.shock.magnitude)))
    };
    let (mut sys, shock) = if let Some(system) = &config.system {
        explicit(FinancialSystem::try_from(system.clone()).map_err(usage)?)?
    } else if let Some(network) = &config.network {
        let net = BipartiteNetwork::try_from(network.clone()).map_err(usage)?;
        explicit(FinancialSystem::uniform(net, config.leverage, config.alpha).map_err(usage)?)?
    } else {
        // Same network and shock as run 0 of a one-point ensemble.
        let cfg = config.experiment()?;
        let (sys, drawn) = prepare_run(&cfg, 0, 0).map_err(usage)?;
        let shock = match config.shock.target {
            Some(t) => make_shock(cfg.shock.kind, t, cfg.shock.magnitude),
            None => drawn,
        };
        (sys, shock)
    };
    let result = run_cascade(&mut sys, shock, config.threshold).map_err(usage)?;
    let mut out = serde_json::to_string_pretty(&result).expect("result serializes");
    out.push('\n');
    Ok(out.into_bytes())
}

fn make_shock(kind: ShockKind, target: usize, magnitude: f64) -> Shock {
    match kind {
        ShockKind::Asset => Shock::AssetDevaluation {
            asset: target,
            magnitude,
        },
        ShockKind::Bank => Shock::BankFailure { bank: target },
    }
}

pub(crate) fn write_file(path: &Path, content: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Parses `0.5,1,2:14:1` into a flat list; ranges include their end point.
fn parse_values(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: String| CliError::Usage(format!("--{flag}: {msg}"));
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("`{s}` is not a number")))
    };
    let mut values = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts[..] {
            [v] => values.push(num(v)?),
            [start, stop, step] => {
                let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
                if !(step > 0.0 && stop >= start) {
                    return Err(bad(format!(
                        "range `{item}` needs start <= stop and step > 0"
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                for i in 0..=count {
                    let v = start + i as f64 * step;
                    values.push((v * 1e12).round() / 1e12);
                }
            }
            _ => {
                return Err(bad(format!(
                    "`{item}` is neither a number nor start:stop:step"
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(bad("empty value list".into()));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("v", "1,2.5").unwrap(), vec![1.0, 2.5]);
        assert_eq!(
            parse_values("v", "0.5,1:3:1").unwrap(),
            vec![0.5, 1.0, 2.0, 3.0]
        );
        assert_eq!(
            parse_values("v", "0.1:0.3:0.1").unwrap(),
            vec![0.1, 0.2, 0.3]
        );
        assert!(parse_values("v", "").is_err());
        assert!(parse_values("v", " , ").is_err());
        assert!(parse_values("v", "1:0:1").is_err());
        assert!(parse_values("v", "x").is_err());
        assert!(parse_values("v", "1:2").is_err());
    }
}
