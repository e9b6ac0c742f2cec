//! Command-line front end: computes conformal invariants, frame checks, and
//! rigidity verdicts over parameter grids, emitting one deterministic TOML
//! result document per run.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{config_echo_tables, RunConfig};
use report::{Doc, Value};
use run::{ExitClass, Outcome};

#[derive(Parser)]
#[command(
    name = "darboux",
    version,
    about = "Conformal hypersurface geometry: invariants, moving frames, rigidity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Write the result document here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Seed for random-direction sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Omit the timestamp so identical configs give byte-identical output.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fundamental forms and the conformal quadratic element per grid point.
    Invariant,
    /// Moving-frame residuals plus connection and structure checks.
    Frame,
    /// Apply a Moebius transformation chain, emitting the composed surface.
    MobiusApply,
    /// Decide conformal equivalence of surface and surface_bar.
    Equivalence,
    /// Non-factorizability residual of the quadratic element per grid point.
    LemmaCheck,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Invariant => "invariant",
            Command::Frame => "frame",
            Command::MobiusApply => "mobius-apply",
            Command::Equivalence => "equivalence",
            Command::LemmaCheck => "lemma-check",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(class) => ExitCode::from(class.code() as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> Result<ExitClass, String> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| "--config <PATH> is required".to_string())?;
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| format!("cannot read {}: {e}", config_path.display()))?;
    let config = RunConfig::from_toml(&text).map_err(|e| e.to_string())?;

    let outcome: Outcome = match cli.command {
        Command::Invariant => run::run_invariant(&config, cli.seed)?,
        Command::Frame => run::run_frame(&config)?,
        Command::MobiusApply => run::run_mobius_apply(&config)?,
        Command::Equivalence => run::run_equivalence(&config)?,
        Command::LemmaCheck => run::run_lemma_check(&config)?,
    };

    let mut doc = Doc::new();
    doc.push("command", Value::Str(cli.command.name().into()));
    doc.push("tool_version", Value::Str(env!("CARGO_PKG_VERSION").into()));
    doc.push("seed", Value::Int(cli.seed as i64));
    if !cli.no_timestamp {
        let now = time::OffsetDateTime::now_utc()
            .format(&time::format_description::well_known::Rfc3339)
            .map_err(|e| e.to_string())?;
        doc.push("timestamp", Value::Str(now));
    }
    doc.push("exit_class", Value::Str(outcome.exit.label().into()));

    for (name, table) in config_echo_tables(&config) {
        doc.push_table(&name, table);
    }
    for (name, table) in outcome.tables {
        doc.push_table(&name, table);
    }
    for (name, tables) in outcome.table_arrays {
        doc.push_table_array(&name, tables);
    }
    if !outcome.errors.is_empty() {
        doc.push_table_array("errors", outcome.errors);
    }

    let rendered = doc.render();
    match &cli.out {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(outcome.exit)
}
