use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rhp_hqp::scenario::{compare_runs, emit_outputs, run_scenario, summarize, Mode, Scenario};
use rhp_hqp::Error;

/// Scenario runner for the recursive hierarchical projection HQP controller.
#[derive(Parser)]
#[command(name = "rhp-hqp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios and write their outputs.
    ///
    /// With a single scenario, outputs go to `--out` itself. Otherwise each
    /// scenario writes to `<base>/<name>`, where the base is `--out`, then
    /// `$RHP_HQP_OUT`, then `out`.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the mode given in the scenario file.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Per-cycle divergence of commands and joint positions of two logs.
    /// Exits with 1 when some cycle exceeds the threshold.
    Compare {
        log_a: PathBuf,
        log_b: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
    },
    /// Parse and check a scenario without running it.
    Validate { config: PathBuf },
}

fn output_dir(out: Option<&Path>, single: bool, name: &str) -> PathBuf {
    match out {
        Some(dir) if single => dir.to_path_buf(),
        Some(dir) => dir.join(name),
        None => {
            let base = std::env::var_os("RHP_HQP_OUT").map_or_else(|| PathBuf::from("out"), PathBuf::from);
            base.join(name)
        }
    }
}

fn run_one(config: &Path, out: Option<&Path>, single: bool, mode: Option<Mode>) -> Result<String, Error> {
    let mut scenario = Scenario::from_path(config)?;
    if let Some(mode) = mode {
        scenario.mode = mode;
    }
    let log = run_scenario(&scenario)?;
    let dir = output_dir(out, single, &scenario.name);
    emit_outputs(&log, &dir)?;
    let s = summarize(&log);
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
    Ok(format!(
        "{} [{}]: {} cycles -> {}\n  max position error {} m, max orientation error {} rad, min d_min {} m, mean solve {} s",
        scenario.name,
        scenario.mode.as_str(),
        s.cycles,
        dir.display(),
        show(s.max_position_error),
        show(s.max_orientation_error),
        show(s.min_d_min),
        show(s.mean_solve_time),
    ))
}

fn fail(e: &Error) -> ExitCode {
    let category = e.category();
    eprintln!("error[{category:?}]: {e}");
    ExitCode::from(category.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { configs, out, mode } => {
            let mode = match mode.as_deref().map(str::parse::<Mode>).transpose() {
                Ok(m) => m,
                Err(e) => return fail(&e),
            };
            let single = configs.len() == 1;
            // Scenarios share nothing, so each gets its own thread.
            let results: Vec<Result<String, Error>> = std::thread::scope(|s| {
                let handles: Vec<_> = configs
                    .iter()
                    .map(|c| s.spawn(|| run_one(c, out.as_deref(), single, mode)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("scenario thread panicked"))
                    .collect()
            });
            let mut code = ExitCode::SUCCESS;
            for (config, result) in configs.iter().zip(results) {
                match result {
                    Ok(report) => println!("{report}"),
                    Err(e) => {
                        eprint!("{}: ", config.display());
                        code = fail(&e);
                    }
                }
            }
            code
        }
        Command::Compare {
            log_a,
            log_b,
            threshold,
        } => match compare_runs(&log_a, &log_b, threshold) {
            Ok(report) => {
                println!("{report}");
                if report.first_exceeding.is_some() {
                    ExitCode::from(1)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => fail(&e),
        },
        Command::Validate { config } => match Scenario::from_path(&config) {
            Ok(s) => {
                println!(
                    "{}: ok ({} joints, {} tasks, {} candidates, {} cycles)",
                    config.display(),
                    s.chain.dof(),
                    s.tasks.len(),
                    s.candidates.len(),
                    s.cycles()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
