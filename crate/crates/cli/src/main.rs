mod render;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use run::{Command, Outcome, Settings};

const SEED_ENV: &str = "ENCLOSURE_ATLAS_SEED";

/// Enclosure decompositions of quantum Markov semigroups.
///
/// Exit codes: 0 success, 1 unreadable or malformed input, 2 invalid model
/// or arguments, 3 analysis failure or negative verdict.
#[derive(Parser, Debug)]
#[command(name = "enclosure-atlas", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Decompose a Lindblad model or Kraus channel and verify the result.
    Analyze(Common),
    /// Compare the minimal open quantum random walk of a rate matrix with the chain.
    Oqrw(Common),
    /// Check identifiability of the extremal invariant states.
    Identifiability {
        #[command(flatten)]
        common: Common,
        /// Longest outcome word searched in discrete mode.
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        #[arg(long, value_enum, default_value_t = IdMode::Auto)]
        mode: IdMode,
        /// Number of leading diffusive channels when a Lindblad file is read in qnd mode.
        #[arg(long, default_value_t = 0)]
        diffusive: usize,
    },
    /// Write a built-in example model file; lists the examples when no name is given.
    Examples {
        name: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Model file (several with --batch).
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Relative cutoff for rank decisions.
    #[arg(long)]
    tol_rank: Option<f64>,
    /// Acceptance threshold for residuals.
    #[arg(long)]
    tol_residual: Option<f64>,
    /// Random seed; falls back to the file, then to ENCLOSURE_ATLAS_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Structured)]
    format: Format,
    /// Analyze several files concurrently; file i uses seed + i.
    #[arg(long)]
    batch: bool,
    /// Output file (a directory with --batch).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum IdMode {
    Auto,
    Continuous,
    Discrete,
    Qnd,
}

fn env_seed() -> Result<Option<u64>, String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{SEED_ENV} must be an unsigned integer, got {v:?}")),
        Err(_) => Ok(None),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command, common: Common) -> ExitCode {
    let env = match env_seed() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if !common.batch && common.paths.len() > 1 {
        eprintln!("error: several input files need --batch");
        return ExitCode::from(2);
    }
    let settings = Settings {
        command,
        tol_rank: common.tol_rank,
        tol_residual: common.tol_residual,
        seed: common.seed,
        env_seed: env,
        format: common.format,
    };
    if !common.batch {
        let out = run::run_file(&common.paths[0], &settings, 0);
        return finish(&out, common.output.as_deref());
    }
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = common
            .paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let settings = &settings;
                s.spawn(move || run::run_file(p, settings, i as u64))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let code = outcomes.iter().map(|o| o.code).max().unwrap_or(0);
    for (p, o) in common.paths.iter().zip(&outcomes) {
        if let Some(e) = &o.error {
            eprintln!("{}: error: {e}", p.display());
        }
    }
    let result = match &common.output {
        Some(dir) => std::fs::create_dir_all(dir)
            .map_err(|e| format!("cannot create {}: {e}", dir.display()))
            .and_then(|_| {
                common.paths.iter().zip(&outcomes).try_for_each(|(p, o)| {
                    if o.body.is_empty() {
                        return Ok(());
                    }
                    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    let ext = if settings.format == Format::Text { "txt" } else { "json" };
                    write_out(Some(&dir.join(format!("{stem}.report.{ext}"))), &o.body)
                })
            }),
        None => write_out(None, &run::batch_body(&common.paths, &outcomes, settings.format)),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}

fn finish(out: &Outcome, output: Option<&Path>) -> ExitCode {
    if let Some(e) = &out.error {
        eprintln!("error: {e}");
    }
    if !out.body.is_empty() {
        if let Err(e) = write_out(output, &out.body) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(out.code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Analyze(common) => execute(Command::Analyze, common),
        Cmd::Oqrw(common) => execute(Command::Oqrw, common),
        Cmd::Identifiability {
            common,
            max_len,
            mode,
            diffusive,
        } => execute(
            Command::Identifiability {
                max_len,
                mode,
                diffusive,
            },
            common,
        ),
        Cmd::Examples { name, output } => {
            let out = run::examples(name.as_deref());
            finish(&out, output.as_deref())
        }
    }
}
