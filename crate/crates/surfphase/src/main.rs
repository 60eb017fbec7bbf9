use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use surfphase::commands::{self, STUDY_LEVELS};
use surfphase::runner::{self, RunOptions};
use surfphase::{AppError, SimulationConfig};

#[derive(Parser, Debug)]
#[command(name = "surfphase", version, about = "Phase separation and surface flow on implicit surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Configuration file (`section.key = value` lines).
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides `ic.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Stops a run after this many accepted steps.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time-dependent simulation.
    Run(Common),
    /// Area and normal convergence of the discrete surface.
    GeomCheck(Common),
    /// Manufactured-solution study for the surface Helmholtz problem.
    Converge(Common),
    /// Repeats `run` for seeds 0..n and averages the Lyapunov energy.
    SeedSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        n: u64,
    },
}

fn load(common: &Common) -> Result<SimulationConfig, AppError> {
    let mut cfg = SimulationConfig::load(&common.config)?;
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_report(cfg: &SimulationConfig, name: &str, text: &str) -> Result<(), AppError> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| AppError::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join(name);
    let body = format!("# config_hash {}\n{text}", cfg.hash());
    std::fs::write(&path, body).map_err(|e| AppError::io(&path, e))
}

fn execute(command: Command) -> Result<(), AppError> {
    match command {
        Command::Run(common) => {
            let cfg = load(&common)?;
            let opts = RunOptions { max_steps: common.max_steps, ..Default::default() };
            let report = runner::run(&cfg, &opts)?;
            if !common.quiet {
                let last = report.rows.last().expect("the initial state is always logged");
                println!(
                    "{} steps ({} rejected) to t = {}, E_lyap = {:.6e}, {} snapshots in {}",
                    report.accepted,
                    report.rejected,
                    last.t,
                    last.e_lyap,
                    report.snapshots.len(),
                    cfg.output_dir.display()
                );
            }
        }
        Command::GeomCheck(common) => {
            let cfg = load(&common)?;
            let table = commands::geometry_table(&commands::geometry_study(&cfg, &STUDY_LEVELS)?);
            write_report(&cfg, "geom_check.csv", &table)?;
            if !common.quiet {
                print!("{table}");
            }
        }
        Command::Converge(common) => {
            let cfg = load(&common)?;
            let (_, table) = commands::convergence_table(&cfg, &STUDY_LEVELS)?;
            write_report(&cfg, "converge.csv", &table)?;
            if !common.quiet {
                print!("{table}");
            }
        }
        Command::SeedSweep { common, n } => {
            let cfg = load(&common)?;
            let mean = commands::seed_sweep(&cfg, n, common.max_steps)?;
            if !common.quiet {
                println!("t,mean_E_lyap");
                for (t, e) in mean {
                    println!("{t},{e:.6e}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = match &cli.command {
        Command::Run(c) | Command::GeomCheck(c) | Command::Converge(c) => c.quiet,
        Command::SeedSweep { common, .. } => common.quiet,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" }))
        .init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
