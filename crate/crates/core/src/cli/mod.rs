//! The `campanato` command line: scenario files in, trace CSVs and JSON
//! reports out.
//!
//! Exit codes: 0 success, 1 a verdict other than certified or pass under
//! `--strict`, 2 usage, configuration or schema errors, 3 unknown registry
//! ids, 4 numerical failures (solver, fixed point, fit, calibration).

mod execute;
mod report;
mod scenario;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

pub use execute::{execute, report_name, Outcome, RunReport, MIN_SWEEP_SLOPE, REPORT_VERSION};
pub use report::{collect_paths, load_report, load_sorted, summary_csv, table, verdict_rank};
pub use scenario::{
    boundary_from_id, FamilyExpectation, FieldsBlock, GridBlock, ModulusBlock, Resolved, Scenario, ScenarioMode,
    Source, ValidationBlock, SCENARIO_VERSION,
};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REGISTRY: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Registry(_) => EXIT_REGISTRY,
        Error::Solver { .. } | Error::FixedPoint { .. } | Error::Fit(_) | Error::Calibration(_) => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

const DEFAULT_OUT: &str = "out";

#[derive(Parser, Debug)]
#[command(name = "campanato", version, about = "Multiscale C1 / C1,1 regularity probes for semilinear elliptic equations")]
pub struct Cli {
    /// Exit with status 1 unless every verdict is certified or pass.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run scenario files.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Summarise report files or directories of them.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Fit the approximation constants on the default sweep.
    Calibrate,
    /// Convergence orders and maximum-principle checks of the solver.
    ValidateSolver {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Invariants and Dini classification of the built-in moduli.
    CheckModulus,
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

fn write_outcome(dir: &Path, o: &Outcome) -> Result<()> {
    for (name, contents) in &o.artifacts {
        write_atomic(dir, name, contents)?;
    }
    let json = serde_json::to_string_pretty(&o.report).map_err(|e| Error::Schema(e.to_string()))?;
    write_atomic(dir, &report_name(&o.report.scenario_id), &(json + "\n"))
}

fn print_outcome(o: &Outcome) {
    let r = &o.report;
    println!("{:<24} {:<14} {}", r.scenario_id, r.verdict, r.reason);
}

/// Validates every scenario before running any, so a bad file leaves no
/// outputs behind.
fn run(paths: &[PathBuf], out: Option<&Path>, strict: bool) -> Result<i32> {
    let mut loaded = Vec::new();
    for p in paths {
        let s = Scenario::load(p).map_err(|e| annotate(e, p))?;
        let resolved = s.validate().map_err(|e| annotate(e, p))?;
        loaded.push((s, resolved));
    }
    let mut ids: Vec<&str> = loaded.iter().map(|(s, _)| s.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::config("id", format!("duplicate scenario id `{}`", w[0])));
    }
    // scenarios run concurrently; outputs are written in input order
    let results: Vec<(Scenario, Result<Outcome>)> = loaded
        .into_par_iter()
        .map(|(s, resolved)| {
            let r = execute(&s, resolved);
            (s, r)
        })
        .collect();
    let mut code = EXIT_OK;
    for (s, result) in results {
        let dir = out
            .map(Path::to_path_buf)
            .or_else(|| s.output.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        match result {
            Ok(o) => {
                write_outcome(&dir, &o)?;
                print_outcome(&o);
                if strict && !o.report.ok() {
                    code = code.max(EXIT_FAILED);
                }
            }
            Err(e) => {
                eprintln!("error: scenario `{}`: {e}", s.id);
                code = code.max(exit_code(&e));
            }
        }
    }
    Ok(code)
}

fn annotate(e: Error, p: &Path) -> Error {
    match e {
        Error::Config { key, message } => Error::Config {
            key,
            message: format!("{message} (in {})", p.display()),
        },
        other => other,
    }
}

fn builtin(id: &str, mode: ScenarioMode, seed: u64) -> Scenario {
    Scenario {
        v: SCENARIO_VERSION,
        id: id.into(),
        mode,
        seed,
        fields: Default::default(),
        grid: Default::default(),
        solver: Default::default(),
        picard: Default::default(),
        iteration: Default::default(),
        calibration: Default::default(),
        validation: Default::default(),
        modulus: Default::default(),
        output: None,
    }
}

fn run_builtin(s: Scenario, out: Option<&Path>, strict: bool) -> Result<i32> {
    s.validate()?;
    let o = execute(&s, None)?;
    write_outcome(out.unwrap_or(Path::new(DEFAULT_OUT)), &o)?;
    println!("{}", serde_json::to_string_pretty(&o.report.results).unwrap_or_default());
    print_outcome(&o);
    Ok(if strict && !o.report.ok() { EXIT_FAILED } else { EXIT_OK })
}

fn report(paths: &[PathBuf], out: Option<&Path>, strict: bool) -> Result<i32> {
    let reports = load_sorted(paths)?;
    print!("{}", table(&reports));
    if let Some(dir) = out {
        write_atomic(dir, "summary.csv", &summary_csv(&reports)?)?;
    }
    Ok(if strict && !reports.iter().all(RunReport::ok) { EXIT_FAILED } else { EXIT_OK })
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Error::config("threads", "at least one thread required"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::config("threads", e.to_string()))?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Run { scenarios } => run(scenarios, out, cli.strict),
        Command::Report { paths } => report(paths, out, cli.strict),
        Command::Calibrate => run_builtin(builtin("calibration", ScenarioMode::Lemma25Sweep, 0), out, cli.strict),
        Command::ValidateSolver { seed } => run_builtin(
            builtin("solver_validation", ScenarioMode::SolverValidation, *seed),
            out,
            cli.strict,
        ),
        Command::CheckModulus => run_builtin(builtin("modulus_check", ScenarioMode::ModulusCheck, 0), out, cli.strict),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
