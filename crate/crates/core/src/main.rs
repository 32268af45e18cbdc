//! Command-line workbench: scenario simulation, PPO training, controller
//! comparison, feedforward-mismatch calibration and phase-plane export.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use flightlab::env::{EnvConfig, FlightEnv, OBS_RANGES};
use flightlab::harness::{
    calibrate_delta, compare_controllers, phase_plane_export, run_scenario, write_trajectory_csv,
    ControllerKind, InitialCondition, PhaseChannel, ScenarioConfig, TrajectoryRow,
};
use flightlab::learner::{load_weights, save_weights, train, PolicyNetwork, PpoConfig};
use flightlab::smc::SmcGains;

#[derive(Parser)]
#[command(name = "flightlab", about = "Flight-control workbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop scenario and write trajectory + metrics.
    Simulate {
        /// Scenario config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the random-initial-condition seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the controller kind (rl | smc | hybrid).
        #[arg(long)]
        controller: Option<String>,
    },
    /// Train a policy on the flight environment with PPO.
    Train {
        /// Output weight file.
        #[arg(long)]
        out: PathBuf,
        /// Optional PPO config JSON; defaults are used otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        timesteps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training metrics CSV (appended).
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Resume from an existing weight file instead of a fresh network.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Hidden layer sizes, comma separated.
        #[arg(long, default_value = "256,128")]
        hidden: String,
    },
    /// Run several scenario configs over the same initial state and
    /// tabulate their metrics.
    Compare {
        /// Scenario config JSONs (two or more).
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep random states and report the feedforward mismatch of a policy
    /// against the model-inverting ideal (delta-bar calibration).
    CalibrateDelta {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSON path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a trajectory CSV into phase-plane points for one channel.
    PhasePlane {
        #[arg(long)]
        trajectory: PathBuf,
        /// alpha | beta | mu
        #[arg(long, default_value = "alpha")]
        channel: String,
        /// Body-rate norm threshold for high-rate tagging (rad/s).
        #[arg(long, default_value_t = 0.17)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out, seed, controller } => simulate(config, out, seed, controller),
        Command::Train { out, config, timesteps, seed, metrics, resume, hidden } => {
            train_cmd(out, config, timesteps, seed, metrics, resume, hidden)
        }
        Command::Compare { configs, out, seed } => compare(configs, out, seed),
        Command::CalibrateDelta { weights, samples, seed, out } => {
            calibrate(weights, samples, seed, out)
        }
        Command::PhasePlane { trajectory, channel, threshold, out } => {
            phase_plane(trajectory, channel, threshold, out)
        }
    }
}

fn apply_overrides(
    cfg: &mut ScenarioConfig,
    seed: Option<u64>,
    controller: Option<&str>,
) -> Result<()> {
    if let Some(seed) = seed {
        cfg.initial = InitialCondition::Random { seed };
    }
    if let Some(kind) = controller {
        cfg.controller = match kind {
            "rl" => ControllerKind::Rl,
            "smc" => ControllerKind::Smc,
            "hybrid" => ControllerKind::Hybrid,
            other => bail!("unknown controller kind {other}"),
        };
    }
    Ok(())
}

fn simulate(
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    controller: Option<String>,
) -> Result<()> {
    let mut cfg = ScenarioConfig::load(&config)?;
    apply_overrides(&mut cfg, seed, controller.as_deref())?;
    cfg.validate()?;
    std::fs::create_dir_all(&out)?;
    let result = run_scenario(&cfg)?;
    let traj_path = out.join("trajectory.csv");
    write_trajectory_csv(&result.trajectory, &traj_path)?;
    let metrics_path = out.join("metrics.json");
    std::fs::write(&metrics_path, serde_json::to_string_pretty(&result.metrics)?)?;
    println!("end: {:?}", result.end);
    println!("trajectory: {}", traj_path.display());
    println!("metrics: {}", metrics_path.display());
    Ok(())
}

fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().context("bad hidden size"))
        .collect()
}

fn train_cmd(
    out: PathBuf,
    config: Option<PathBuf>,
    timesteps: Option<usize>,
    seed: u64,
    metrics: Option<PathBuf>,
    resume: Option<PathBuf>,
    hidden: String,
) -> Result<()> {
    let mut ppo = match config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => PpoConfig::default(),
    };
    if let Some(t) = timesteps {
        ppo.total_timesteps = t;
    }
    ppo.seed = seed;

    let mut network = match resume {
        Some(p) => load_weights(&p)?,
        None => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            PolicyNetwork::new(&OBS_RANGES, 3, &parse_hidden(&hidden)?, -0.5, &mut rng)
        }
    };
    let mut env = FlightEnv::with_surrogate(EnvConfig::default(), seed.wrapping_add(1));
    let outcome = train(&mut env, &ppo, &mut network, metrics.as_deref())?;
    save_weights(&network, &out)?;
    let last = outcome.metrics.iter().rev().find(|m| m.episodes > 0);
    println!(
        "trained {} steps, {} iterations, last mean return {:.1}",
        outcome.timesteps,
        outcome.metrics.len(),
        last.map(|m| m.mean_return).unwrap_or(f64::NAN)
    );
    println!("weights: {}", out.display());
    Ok(())
}

fn compare(configs: Vec<PathBuf>, out: PathBuf, seed: Option<u64>) -> Result<()> {
    if configs.len() < 2 {
        bail!("compare needs at least two --config arguments");
    }
    std::fs::create_dir_all(&out)?;
    let mut results = Vec::new();
    for path in &configs {
        let mut cfg = ScenarioConfig::load(path)?;
        apply_overrides(&mut cfg, seed, None)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        let result = run_scenario(&cfg)?;
        write_trajectory_csv(&result.trajectory, &out.join(format!("{label}.csv")))?;
        results.push((label, result));
    }
    let refs: Vec<(String, &flightlab::harness::ScenarioResult)> =
        results.iter().map(|(l, r)| (l.clone(), r)).collect();
    let table = compare_controllers(&refs)?;
    let path = out.join("comparison.json");
    std::fs::write(&path, serde_json::to_string_pretty(&table)?)?;
    println!("comparison: {}", path.display());
    Ok(())
}

fn calibrate(weights: PathBuf, samples: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let policy = load_weights(&weights)?;
    let cal = calibrate_delta(
        &policy,
        &SmcGains::default(),
        flightlab::flightdyn::surrogate::DEFAULT_ETA,
        samples,
        seed,
    )?;
    let json = serde_json::to_string_pretty(&cal)?;
    match out {
        Some(p) => {
            std::fs::write(&p, json)?;
            println!("calibration: {}", p.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn phase_plane(trajectory: PathBuf, channel: String, threshold: f64, out: PathBuf) -> Result<()> {
    let channel: PhaseChannel = channel.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    let mut reader = csv::Reader::from_path(&trajectory)?;
    let rows: Vec<TrajectoryRow> = reader.deserialize().collect::<Result<_, _>>()?;
    let points = phase_plane_export(&rows, channel, threshold)?;
    let mut writer = csv::Writer::from_path(&out)?;
    for p in &points {
        writer.serialize(p)?;
    }
    writer.flush()?;
    println!("phase plane: {} ({} points)", out.display(), points.len());
    Ok(())
}
