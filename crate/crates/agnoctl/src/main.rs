use std::path::PathBuf;
use std::process::ExitCode;

use agnoctl::{run_experiment, ExperimentConfig, Mode, RunOptions};
use clap::Parser;

/// Run one agnostic-control experiment.
#[derive(Debug, Parser)]
#[command(name = "agnoctl", version)]
struct Cli {
    mode: Mode,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    save_field: Option<PathBuf>,
    #[arg(long)]
    load_field: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("AGNOCTL_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("AGNOCTL_THREADS must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = ExperimentConfig::load(&cli.config).and_then(|mut cfg| {
        if let Some(seed) = cli.seed {
            cfg.mc.seed = seed;
        }
        let opts = RunOptions {
            out_dir: cli.out.clone(),
            save_field: cli.save_field.clone(),
            load_field: cli.load_field.clone(),
        };
        run_experiment(cli.mode, &cfg, &opts)
    });
    match result {
        Ok(report) => {
            println!("{}", report.results_csv.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
