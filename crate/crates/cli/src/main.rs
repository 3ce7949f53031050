//! metriclab: run verification suites on model geodesic spaces.
//!
//! Usage:
//! ```text
//! metriclab run --config <path> [--seed N] [--out <path>] [--suite <name>]
//! metriclab replay --witness <path>
//! ```

use metriclab_cli::config::{ExperimentConfig, SuiteName};
use metriclab_cli::{replay, run};
use std::path::PathBuf;
use std::process::ExitCode;

fn usage() -> String {
    "usage:\n  metriclab run --config <path> [--seed N] [--out <path>] [--suite <name>]\n  metriclab replay --witness <path>\n\nsuites: curvature | angles | strainers | tangent | dimension | strata | all"
        .to_string()
}

enum Command {
    Run {
        config: PathBuf,
        seed: Option<u64>,
        out: Option<PathBuf>,
        suite: Option<SuiteName>,
    },
    Replay {
        witness: PathBuf,
    },
}

fn parse_args(args: &[String]) -> Result<Command, String> {
    let mut it = args.iter();
    let cmd = it.next().ok_or_else(usage)?;
    match cmd.as_str() {
        "run" => {
            let mut config = None;
            let mut seed = None;
            let mut out = None;
            let mut suite = None;
            while let Some(flag) = it.next() {
                match flag.as_str() {
                    "--config" => {
                        config = Some(PathBuf::from(it.next().ok_or("--config needs a path")?))
                    }
                    "--seed" => {
                        seed = Some(
                            it.next()
                                .ok_or("--seed needs a value")?
                                .parse::<u64>()
                                .map_err(|_| "--seed must be an integer".to_string())?,
                        )
                    }
                    "--out" => out = Some(PathBuf::from(it.next().ok_or("--out needs a path")?)),
                    "--suite" => {
                        suite = Some(
                            SuiteName::parse(it.next().ok_or("--suite needs a name")?)
                                .map_err(|e| e.to_string())?,
                        )
                    }
                    other => return Err(format!("unknown flag {other}\n{}", usage())),
                }
            }
            Ok(Command::Run {
                config: config.ok_or_else(|| format!("missing --config\n{}", usage()))?,
                seed,
                out,
                suite,
            })
        }
        "replay" => {
            let mut witness = None;
            while let Some(flag) = it.next() {
                match flag.as_str() {
                    "--witness" => {
                        witness = Some(PathBuf::from(it.next().ok_or("--witness needs a path")?))
                    }
                    other => return Err(format!("unknown flag {other}\n{}", usage())),
                }
            }
            Ok(Command::Replay {
                witness: witness.ok_or_else(|| format!("missing --witness\n{}", usage()))?,
            })
        }
        other => Err(format!("unknown command {other}\n{}", usage())),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let command = match parse_args(&args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    match command {
        Command::Run {
            config,
            seed,
            out,
            suite,
        } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let mut parsed = match ExperimentConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = seed {
                parsed.seed = seed;
            }
            if let Some(out) = out {
                parsed.out = Some(out);
            }
            if let Some(suite) = suite {
                parsed.suite = suite;
            }
            match run(&parsed) {
                Ok((report, code)) => {
                    for check in &report.checks {
                        println!(
                            "{:<24} {:?} residual {:.3e}",
                            check.check, check.verdict, check.residual
                        );
                    }
                    if parsed.out.is_none() {
                        println!("{}", report.to_json());
                    }
                    ExitCode::from(code as u8)
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Replay { witness } => match replay(&witness) {
            Ok(result) => {
                if result.version_mismatch() {
                    eprintln!(
                        "warning: report was written by tool version {}, this is {}; evaluating anyway",
                        result.report_version.as_deref().unwrap_or("?"),
                        env!("CARGO_PKG_VERSION")
                    );
                }
                let mut worst = 0.0f64;
                for o in &result.outcomes {
                    match o.stored {
                        Some(stored) => {
                            let gap = (stored - o.replayed).abs();
                            worst = worst.max(gap);
                            println!(
                                "{:<24} stored {:.6e} replayed {:.6e} gap {:.3e}",
                                o.check, stored, o.replayed, gap
                            );
                        }
                        None => println!("{:<24} replayed {:.6e}", o.check, o.replayed),
                    }
                }
                if worst > 1e-12 {
                    eprintln!("warning: replays drifted beyond 1e-12");
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
    }
}
