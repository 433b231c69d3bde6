use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use qsync_core::syncplan::default_step_grid;
use qsync_core::TimePs;
use qsync_harness::config::{CountModeConfig, MethodConfig, ScenarioConfig};
use qsync_harness::drift::{drift_experiment, write_drift_csv, DriftParams};
use qsync_harness::{attack_demo, optimize_t, run_scenario, serve_scenario, PRESET_NAMES};
use qsync_link::Endpoint;

/// Synchronization calibration simulator for a gated-detector QKD receiver.
#[derive(Parser)]
#[command(name = "qsync", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON scenario config file.
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset: method1-paper, method2-paper, legacy-attack,
    /// drift-16d, stats-sampled.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ScenarioConfig> {
        match (&self.config, &self.preset) {
            (Some(path), None) => {
                Ok(ScenarioConfig::from_file(path).context("loading config file")?)
            }
            (None, Some(name)) => Ok(qsync_harness::preset(name)?),
            (None, None) => Ok(ScenarioConfig::default()),
            (Some(_), Some(_)) => bail!("--config and --preset are mutually exclusive"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one synchronization calibration and write the report bundle.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for histogram.csv, windows.csv, summary.json.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's count mode.
        #[arg(long, value_enum)]
        mode: Option<CountModeConfig>,
        /// Override the config's method.
        #[arg(long, value_enum)]
        method: Option<MethodConfig>,
        /// Query a remote pulse source (host:port or socket path) instead of
        /// the in-process model.
        #[arg(long, value_name = "ENDPOINT")]
        source: Option<String>,
    },
    /// Tabulate the two-stage cost over the coarse-step grid and print the
    /// optimum.
    OptimizeT {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run legacy and method1 under the same H/V shift attack and compare
    /// mismatch reports.
    AttackDemo {
        #[command(flatten)]
        config: ConfigArgs,
        /// Arrival time of H pulses, picoseconds.
        #[arg(long)]
        t0: i64,
        /// Arrival time of V pulses, picoseconds.
        #[arg(long)]
        t1: i64,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Simulate one calibration per day under common-mode drift and
    /// per-detector jitter.
    Drift {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        days: u32,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Reflective bound of the common-mode walk, ps.
        #[arg(long, default_value_t = 200)]
        amplitude: i64,
        /// Maximum daily step of the walk, ps.
        #[arg(long, default_value_t = 60)]
        step: i64,
        /// Per-detector daily jitter sigma, ps.
        #[arg(long, default_value_t = 3.0)]
        jitter: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve the configured scenario as a pulse-source emulator.
    Serve {
        #[command(flatten)]
        config: ConfigArgs,
        /// host:port or socket path to listen on.
        #[arg(long, value_name = "ENDPOINT")]
        listen: String,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, seed, mode, method, source } => {
            let mut cfg = config.load()?;
            if let Some(seed) = seed {
                cfg.run.seed = seed;
            }
            if let Some(mode) = mode {
                cfg.run.count_mode = mode;
            }
            if let Some(method) = method {
                cfg.run.method = method;
            }
            let endpoint = source
                .map(|s| s.parse::<Endpoint>())
                .transpose()?;
            let artifacts = run_scenario(&cfg, &out, endpoint.as_ref())?;
            let s = &artifacts.summary;
            println!(
                "method={} simulated_time_ms={} max_pairwise_skew_ps={} mismatch_ratio={:.6}",
                s.method,
                s.simulated_time_ms,
                s.mismatch.max_pairwise_skew_ps,
                s.mismatch.mismatch_ratio
            );
            if let (Some(t_l), Some(n_l), Some(t_h), Some(n_h)) = (s.t_l, s.n_l, s.t_h, s.n_h) {
                println!("t_l={t_l} n_l={n_l} t_h={t_h} n_h={n_h}");
            }
            println!("bundle written to {}", out.display());
        }
        Command::OptimizeT { config, out } => {
            let cfg = config.load()?;
            let (_, best_t, best_cost) = optimize_t(&cfg, &default_step_grid(), &out)?;
            println!("optimal t = {} ps, total = {} ms", best_t.ps(), best_cost);
            println!("table written to {}", out.join("optimize.csv").display());
        }
        Command::AttackDemo { config, t0, t1, out } => {
            let cfg = config.load()?;
            let demo = attack_demo(&cfg, TimePs::new(t0), TimePs::new(t1), &out)?;
            println!(
                "legacy:  skew={} ps ratio={:.4}",
                demo.legacy.mismatch.max_pairwise_skew_ps, demo.legacy.mismatch.mismatch_ratio
            );
            println!(
                "method1: skew={} ps ratio={:.4}",
                demo.method1.mismatch.max_pairwise_skew_ps, demo.method1.mismatch.mismatch_ratio
            );
            println!("reports written to {}", out.display());
        }
        Command::Drift { config, days, out, amplitude, step, jitter, seed } => {
            let cfg = config.load()?;
            let params = DriftParams {
                days,
                amplitude_ps: amplitude,
                daily_step_ps: step,
                jitter_ps: jitter,
                seed: seed.unwrap_or(cfg.run.seed),
            };
            let rows = drift_experiment(&cfg, &params)?;
            let path = write_drift_csv(&rows, &out)?;
            println!("{} rows written to {}", rows.len(), path.display());
        }
        Command::Serve { config, listen } => {
            let cfg = config.load()?;
            let endpoint: Endpoint = listen.parse()?;
            let server = serve_scenario(&cfg, &endpoint)?;
            println!("serving on {} (presets: {})", server.endpoint(), PRESET_NAMES.join(", "));
            server.join();
        }
    }
    Ok(())
}
