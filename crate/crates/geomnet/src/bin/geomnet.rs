//! Command-line interface.
//!
//! ```text
//! geomnet train --config PATH [--seed N] [--epochs N] [--no-pt] [--no-ltml]
//!               [--k N] [--kprime N] [--out DIR]
//! geomnet eval --params PATH --config PATH [--seed N] [--k N] [--kprime N]
//! geomnet selfcheck [--seed N] [--sizes 2,3,4]
//! ```
//!
//! Exit codes: 0 success, 1 configuration error, 2 numeric failure,
//! 3 self-check failure. `GEOMNET_THREADS` caps per-batch worker threads.

use std::path::PathBuf;
use std::process::ExitCode;

use geomnet::cli::{self, Overrides, RunConfig};
use geomnet::diag;
use geomnet::error::GeomError;

fn exit_code_for(err: &GeomError) -> u8 {
    match err {
        GeomError::Numeric(_) | GeomError::Degenerate(_) => 2,
        _ => 1,
    }
}

struct Args {
    positional: Vec<String>,
    config: Option<PathBuf>,
    params: Option<PathBuf>,
    seed: Option<u64>,
    epochs: Option<usize>,
    no_pt: bool,
    no_ltml: bool,
    k: Option<usize>,
    k_prime: Option<usize>,
    out: Option<PathBuf>,
    sizes: Vec<usize>,
}

fn parse_args() -> Result<Args, String> {
    let mut args = Args {
        positional: Vec::new(),
        config: None,
        params: None,
        seed: None,
        epochs: None,
        no_pt: false,
        no_ltml: false,
        k: None,
        k_prime: None,
        out: None,
        sizes: vec![2, 3, 4],
    };
    let mut it = std::env::args().skip(1);
    while let Some(arg) = it.next() {
        let mut value_of = |name: &str| -> Result<String, String> {
            it.next().ok_or_else(|| format!("{name} needs a value"))
        };
        match arg.as_str() {
            "--config" => args.config = Some(PathBuf::from(value_of("--config")?)),
            "--params" => args.params = Some(PathBuf::from(value_of("--params")?)),
            "--seed" => {
                args.seed = Some(
                    value_of("--seed")?
                        .parse()
                        .map_err(|_| "--seed needs an integer".to_string())?,
                )
            }
            "--epochs" => {
                args.epochs = Some(
                    value_of("--epochs")?
                        .parse()
                        .map_err(|_| "--epochs needs an integer".to_string())?,
                )
            }
            "--no-pt" => args.no_pt = true,
            "--no-ltml" => args.no_ltml = true,
            "--k" => {
                args.k = Some(
                    value_of("--k")?
                        .parse()
                        .map_err(|_| "--k needs an integer".to_string())?,
                )
            }
            "--kprime" => {
                args.k_prime = Some(
                    value_of("--kprime")?
                        .parse()
                        .map_err(|_| "--kprime needs an integer".to_string())?,
                )
            }
            "--out" => args.out = Some(PathBuf::from(value_of("--out")?)),
            "--sizes" => {
                args.sizes = value_of("--sizes")?
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| "--sizes needs a comma-separated list".to_string())?;
            }
            other if other.starts_with("--") => return Err(format!("unknown flag {other}")),
            other => args.positional.push(other.to_string()),
        }
    }
    Ok(args)
}

const USAGE: &str = "usage:
  geomnet train --config PATH [--seed N] [--epochs N] [--no-pt] [--no-ltml] [--k N] [--kprime N] [--out DIR]
  geomnet eval --params PATH --config PATH [--seed N]
  geomnet selfcheck [--seed N] [--sizes 2,3,4]";

fn load_config(args: &Args) -> Result<RunConfig, GeomError> {
    let mut run = match &args.config {
        Some(path) => cli::parse_config_file(path)?,
        None => return Err(GeomError::Config("--config PATH is required".to_string())),
    };
    let overrides = Overrides {
        seed: args.seed,
        epochs: args.epochs,
        no_pt: args.no_pt,
        no_ltml: args.no_ltml,
        k: args.k,
        k_prime: args.k_prime,
        out: args.out.clone(),
    };
    overrides.apply(&mut run);
    Ok(run)
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}\n{USAGE}");
            return ExitCode::from(1);
        }
    };
    let command = match args.positional.first().map(String::as_str) {
        Some(c) => c.to_string(),
        None => {
            eprintln!("{USAGE}");
            return ExitCode::from(1);
        }
    };
    match command.as_str() {
        "train" => {
            let run = match load_config(&args) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code_for(&e));
                }
            };
            match cli::run_train(&run) {
                Ok(summary) => {
                    println!(
                        "trained {} epochs: loss {:.6}, train accuracy {:.4}",
                        summary.epochs_run, summary.final_loss, summary.final_train_accuracy
                    );
                    if let Some(acc) = summary.test_accuracy {
                        println!("test accuracy {acc:.4}");
                    }
                    println!("parameters: {}", summary.params_path.display());
                    println!("metrics: {}", summary.metrics_path.display());
                    let counters = diag::counters();
                    if counters.eig_clamps > 0 || counters.kmeans_reductions > 0 {
                        println!(
                            "warnings: {} eigenvalue clamps, {} k-means reductions, {} skipped steps",
                            counters.eig_clamps, counters.kmeans_reductions, counters.skipped_steps
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code_for(&e))
                }
            }
        }
        "eval" => {
            let run = match load_config(&args) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code_for(&e));
                }
            };
            let params = match &args.params {
                Some(p) => p.clone(),
                None => {
                    eprintln!("error: eval needs --params PATH");
                    return ExitCode::from(1);
                }
            };
            match cli::run_eval(&params, &run) {
                Ok(eval) => {
                    println!(
                        "accuracy {:.4} over {} sequences",
                        eval.accuracy, eval.total
                    );
                    println!("confusion (rows = truth, columns = predicted):");
                    for row in &eval.confusion {
                        let cells: Vec<String> = row.iter().map(|c| format!("{c:4}")).collect();
                        println!("  {}", cells.join(" "));
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code_for(&e))
                }
            }
        }
        "selfcheck" => {
            let seed = args.seed.unwrap_or(424242);
            match cli::run_selfcheck(seed, &args.sizes) {
                Ok(reports) => {
                    let mut all_passed = true;
                    for r in &reports {
                        println!("{}", r.line());
                        all_passed &= r.passed;
                    }
                    if all_passed {
                        println!("self-check passed ({} families)", reports.len());
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("self-check failed");
                        ExitCode::from(3)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        other => {
            eprintln!("unknown command '{other}'\n{USAGE}");
            ExitCode::from(1)
        }
    }
}
