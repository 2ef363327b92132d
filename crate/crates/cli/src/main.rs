//! `ndsent`: runs one experiment from a JSON config and writes a CSV table
//! plus a JSON report.
//!
//! Exit codes: 0 success, 2 config/usage/parse error, 3 budget exceeded,
//! 4 verification failed, 1 anything else (I/O).

mod config;
mod report;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use ndsentropy::catalog::{catalog_entry, list_ids};
use ndsentropy::{Budget, Error};
use serde_json::json;

use config::{ExperimentConfig, Resolved};
use report::{config_hash, write_json, Report};

#[derive(Parser, Debug)]
#[command(name = "ndsent", version, about = "Entropy experiments on nonautonomous piecewise-affine systems")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, required_unless_present_any = ["list", "export"])]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Accepted for compatibility; computations are single-threaded and
    /// results never depend on it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
    /// Maximum number of cells or pieces in any intermediate object.
    #[arg(long)]
    budget: Option<usize>,
    /// Check results against the catalog expectations.
    #[arg(long)]
    verify: bool,
    /// List catalog system ids.
    #[arg(long)]
    list: bool,
    /// Print a catalog entry as JSON.
    #[arg(long, value_name = "ID")]
    export: Option<String>,
}

enum Failure {
    Lib(Error),
    Verify(usize),
    Io(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Lib(Error::Budget { .. }) => 3,
            Failure::Lib(_) => 2,
            Failure::Verify(_) => 4,
            Failure::Io(_) => 1,
        }
    }

    fn diagnostic(&self) -> serde_json::Value {
        let (kind, message) = match self {
            Failure::Lib(e) => {
                let kind = match e {
                    Error::Domain(_) => "domain",
                    Error::Parse(_) => "parse",
                    Error::Usage(_) => "usage",
                    Error::Budget { .. } => "budget",
                    Error::Composition(_) => "composition",
                };
                (kind, e.to_string())
            }
            Failure::Verify(n) => ("verification", format!("{n} check(s) failed")),
            Failure::Io(e) => ("io", format!("{e:#}")),
        };
        json!({ "error": kind, "message": message, "exit_code": self.code() })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help, --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let d = json!({ "error": "usage", "message": e.to_string().trim_end(), "exit_code": 2 });
            eprintln!("{d}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.diagnostic());
            ExitCode::from(f.code())
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if cli.list {
        for id in list_ids() {
            println!("{id}");
        }
        return Ok(());
    }
    if let Some(id) = &cli.export {
        let entry = catalog_entry(id).ok_or_else(|| Error::Usage(format!("unknown catalog id {id:?}")))?;
        let text = serde_json::to_string_pretty(&entry.to_doc()).map_err(anyhow::Error::from)?;
        println!("{text}");
        return Ok(());
    }
    let path = cli.config.as_ref().expect("clap requires --config");
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    let config = ExperimentConfig::parse(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let resolved = Resolved::load(&config, dir)?;
    let budget = cli.budget.map_or_else(Budget::default, |cells| Budget { cells });

    let outcome = run::run(&config, &resolved, budget, cli.verify)?;

    std::fs::create_dir_all(&cli.out)
        .map_err(|e| anyhow::anyhow!("creating {}: {e}", cli.out.display()))?;
    let stem = config.output.clone().unwrap_or_else(|| config.kind.name().to_string());
    let csv_name = format!("{stem}.csv");
    outcome.table.write(&cli.out.join(&csv_name))?;

    let canonical = config.canonical();
    let config_value: serde_json::Value = serde_json::from_str(&canonical).map_err(anyhow::Error::from)?;
    let failed = outcome.checks.iter().filter(|c| !c.pass).count();
    let report = Report {
        tool: "ndsent",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config_hash(&canonical),
        config: &config_value,
        kind: config.kind.name(),
        system: resolved.system.id().to_string(),
        measure: resolved.measure_id.clone(),
        seed: config.seed,
        budget_cells: budget.cells,
        csv: csv_name,
        expectations: resolved.expectations(),
        summary: outcome.summary,
        verification: cli.verify.then_some(outcome.checks),
    };
    write_json(&cli.out.join(format!("{stem}.json")), &report)?;
    if cli.verify && failed > 0 {
        return Err(Failure::Verify(failed));
    }
    Ok(())
}
