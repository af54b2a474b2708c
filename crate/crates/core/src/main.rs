use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinn::harness::{
    find_sweep_csvs, load_rows, persist_trial, report_costs, run_sweep, run_trial, HarnessError,
    SweepConfig, TrainConfig,
};

/// Train physics-informed networks, with or without symmetry losses.
#[derive(Parser)]
#[command(name = "spinn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one forward problem.
    Trial(TrialArgs),
    /// Run a matched-seed PINN/SPINN sweep from a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Identify the Burgers coefficients from interior observations.
    Inverse(InverseArgs),
    /// Summarize SPINN/PINN training-time ratios of sweeps under a directory.
    ReportCosts {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    neurons: Option<usize>,
    #[arg(long)]
    n_u: Option<usize>,
    #[arg(long)]
    spinn: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Base configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrialArgs {
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    hidden_layers: Option<usize>,
    #[arg(long)]
    n_colloc: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct InverseArgs {
    /// Hidden layers.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[command(flatten)]
    common: Common,
}

fn base_config(c: &Common, default: TrainConfig) -> Result<TrainConfig, HarnessError> {
    let mut cfg = match &c.config {
        Some(p) => TrainConfig::load(p)?,
        None => default,
    };
    if let Some(v) = c.neurons {
        cfg.neurons = v;
    }
    if let Some(v) = c.n_u {
        cfg.n_u = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.max_iter {
        cfg.optimizer.lbfgs.max_iterations = v;
    }
    cfg.spinn |= c.spinn;
    Ok(cfg)
}

fn single(cfg: TrainConfig, out: Option<&PathBuf>) -> Result<ExitCode, HarnessError> {
    let art = run_trial(&cfg)?;
    if let Some(dir) = out {
        let path = persist_trial(dir, &art)?;
        eprintln!("wrote {}", path.display());
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&art.result).expect("results serialize")
    );
    Ok(if art.diverged() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Trial(a) => {
            let mut cfg = base_config(&a.common, TrainConfig::new("kdv", 2, 20, 100, 700))?;
            if let Some(p) = a.problem {
                cfg.problem = p;
            }
            if let Some(v) = a.hidden_layers {
                cfg.hidden_layers = v;
            }
            if let Some(v) = a.n_colloc {
                cfg.n_colloc = v;
            }
            single(cfg, a.common.out.as_ref())
        }
        Command::Inverse(a) => {
            let mut cfg = base_config(&a.common, TrainConfig::new("inverse_burgers", 4, 40, 1000, 0))?;
            cfg.problem = "inverse_burgers".into();
            if let Some(v) = a.layers {
                cfg.hidden_layers = v;
            }
            if let Some(v) = a.noise {
                cfg.noise = v;
            }
            single(cfg, a.common.out.as_ref())
        }
        Command::Sweep { config, out } => {
            let cfg = SweepConfig::load(&config)?;
            let outcome = run_sweep(&cfg, Some(&out))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.summary).expect("summaries serialize")
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::ReportCosts { input } => {
            let paths = find_sweep_csvs(&input)?;
            if paths.is_empty() {
                return Err(HarnessError::BadConfig(format!(
                    "no sweep.csv under {}",
                    input.display()
                )));
            }
            let report = report_costs(&load_rows(&paths)?);
            println!("{report}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
