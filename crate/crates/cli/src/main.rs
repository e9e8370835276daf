use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use widomlab::harness::{self, Experiment, Verdict};
use widomlab::linalg;
use widomlab::operators;
use widomlab::Result;

#[derive(Parser)]
#[command(name = "widomlab", version, about = "Trace asymptotics of truncated Wiener-Hopf operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate W0 and W1 for the config.
    Coeff(Common),
    /// Build the operator at one L and write its spectrum (JSON) or a binary dump (`.bin`).
    Operator {
        #[command(flatten)]
        common: Common,
        /// Scaling parameter; defaults to the first configured L.
        #[arg(long)]
        l: Option<f64>,
    },
    /// Run the L-sweep and write the trace table as CSV.
    Sweep(Common),
    /// Sweep, fit the two-term model and compare with theory.
    Verify(Common),
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut w = open_out(path)?;
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn configured_path(p: &Option<String>) -> Option<PathBuf> {
    p.as_ref().map(PathBuf::from)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Coeff(c) => {
            let exp = Experiment::from_file(&c.config)?;
            let th = harness::config_coefficients(&exp)?;
            write_json(c.out.as_deref(), &json!({"W0": th.w0, "W1": th.w1, "est_error": th.est_error}))?;
        }
        Command::Operator { common: c, l } => {
            let exp = Experiment::from_file(&c.config)?;
            let scale_l = l.unwrap_or(exp.config.l_values[0]);
            let op = exp.build_operator(scale_l)?;
            if c.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "bin")) {
                operators::write_dump_file(&op, c.out.as_deref().unwrap())?;
            } else {
                let eigenvalues = if op.hermitian {
                    Some(linalg::hermitian_eigenvalues(op.matrix.as_ref())?)
                } else {
                    None
                };
                let tr = op.trace();
                write_json(
                    c.out.as_deref(),
                    &json!({
                        "L": scale_l,
                        "N": op.grid.points_per_axis,
                        "dim": op.dim(),
                        "provenance": op.provenance,
                        "hermitian": op.hermitian,
                        "trace": [tr.re, tr.im],
                        "eigenvalues": eigenvalues,
                    }),
                )?;
            }
        }
        Command::Sweep(c) => {
            let exp = Experiment::from_file(&c.config)?;
            let rows = harness::run_sweep(&exp)?;
            let out = c.out.or_else(|| configured_path(&exp.config.output.table));
            harness::write_table_csv(&rows, open_out(out.as_deref())?)?;
        }
        Command::Verify(c) => {
            let exp = Experiment::from_file(&c.config)?;
            let (rows, report) = harness::verify(&exp)?;
            if let Some(table) = configured_path(&exp.config.output.table) {
                harness::write_table_csv(&rows, File::create(table)?)?;
            }
            let out = c.out.or_else(|| configured_path(&exp.config.output.report));
            let value = serde_json::to_value(&report).expect("report serializes");
            write_json(out.as_deref(), &value)?;
            if report.verdict == Verdict::FAIL {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
