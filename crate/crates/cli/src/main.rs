//! Command-line front end for turbo stopping-rule simulations.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use turbostop::sim::{write_csv_rows, SimConfig, Simulator};

#[derive(Parser)]
#[command(
    name = "turbostop",
    version,
    about = "Turbo decoding stopping-rule simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON simulation config.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; a `<out>.manifest.json` is written alongside.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `sim.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// BER / FER / average iterations for every SNR and rule.
    Sweep(Common),
    /// Approximate MI of both decoders per half iteration for one frame,
    /// at the first SNR of the grid under the first listed rule.
    Trajectory {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        frame: u64,
    },
    /// CE-ratio and epsilon-ratio curves at the first SNR of the grid.
    Ratios {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        packets: u64,
    },
}

fn load(common: &Common) -> Result<Simulator> {
    let mut cfg = SimConfig::from_path(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.sim.master_seed = seed;
    }
    Ok(Simulator::new(cfg)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_manifest(sim: &Simulator, command: &str, out: &Path) -> Result<()> {
    let mut path = out.as_os_str().to_owned();
    path.push(".manifest.json");
    let path = PathBuf::from(path);
    serde_json::to_writer_pretty(create(&path)?, &sim.manifest(command))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    match cli.command {
        Command::Sweep(common) => {
            let sim = load(&common)?;
            let report = sim.run_sweep()?;
            report.write_csv(create(&common.out)?)?;
            write_manifest(&sim, "sweep", &common.out)?;
            for row in &report.rows {
                eprintln!(
                    "{:>6.2} dB  {:<22} frames {:>7}  BER {:.3e}  FER {:.3e}  avg it {:.3}",
                    row.snr_db, row.rule, row.frames, row.ber, row.fer, row.avg_iterations
                );
            }
        }
        Command::Trajectory { common, frame } => {
            let sim = load(&common)?;
            let cfg = sim.config();
            let trajectory = sim.record_trajectory(cfg.channel.ebno_db[0], frame, &cfg.rules[0])?;
            write_csv_rows(create(&common.out)?, &trajectory.points)?;
            write_manifest(&sim, "trajectory", &common.out)?;
            eprintln!(
                "frame {frame}: {} iterations, {} bit errors",
                trajectory.iterations_used, trajectory.bit_errors
            );
        }
        Command::Ratios { common, packets } => {
            let sim = load(&common)?;
            let rows = sim.record_ratio_curves(sim.config().channel.ebno_db[0], packets)?;
            write_csv_rows(create(&common.out)?, &rows)?;
            write_manifest(&sim, "ratios", &common.out)?;
        }
    }
    eprintln!("done in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
