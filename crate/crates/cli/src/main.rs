//! `valuecycle`: check scenario files, run them, run detectors over series
//! CSVs and replay the built-in demos.
//!
//! Exit codes: 0 success, 1 domain failure, 2 I/O or usage failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use valuecycle::analysis::{self, parse_col_map, SeriesTable};
use valuecycle::demos::{self, DemoError};
use valuecycle::dsl::{DetectorDecl, DetectorKind, Span};
use valuecycle::output::{self, Format};
use valuecycle::{check_scenario, parse_scenario, Diagnostic, Event, ScenarioAst};

#[derive(Parser)]
#[command(
    name = "valuecycle",
    version,
    about = "Cycles of value: conservation ledgers, tick engine and detectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a scenario file; diagnostics go to stderr.
    Check { file: PathBuf },
    /// Run a scenario and write its series, logs and detector events.
    Run {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        /// Run these detectors instead of the scenario's `detect` items.
        #[arg(long = "detector")]
        detectors: Vec<String>,
    },
    /// Run a detector over series CSVs and print the events as JSON.
    Detect {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        detector: String,
        /// `role=column` or `role=file:column`, e.g. `vgn=1:vg`.
        #[arg(long = "col-map")]
        col_map: Vec<String>,
        /// Tolerance for max_vg / stable_market.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run a built-in demo and compare it against its closed forms.
    Demo {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn domain(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn io(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io(format!("cannot read {}: {e}", path.display())))
}

fn report(path: &Path, diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{}:{d}", path.display());
    }
}

/// Parses and checks; prints every diagnostic. Fails on any error.
fn load(path: &Path) -> Result<ScenarioAst, Failure> {
    let text = read(path)?;
    let ast = parse_scenario(&text).map_err(|diags| {
        report(path, &diags);
        domain(format!("{}: scenario has errors", path.display()))
    })?;
    let diags = check_scenario(&ast);
    report(path, &diags);
    if diags.iter().any(Diagnostic::is_error) {
        return Err(domain(format!("{}: scenario has errors", path.display())));
    }
    Ok(ast)
}

fn detector_kind(name: &str) -> Result<DetectorKind, Failure> {
    DetectorKind::from_name(name).ok_or_else(|| {
        let names: Vec<&str> = DetectorKind::ALL.iter().map(|d| d.as_str()).collect();
        domain(format!(
            "unknown detector '{name}'; valid detectors: {}",
            names.join(", ")
        ))
    })
}

fn events_json(events: &[Event]) -> String {
    serde_json::to_string_pretty(events).expect("events serialise")
}

fn cmd_check(file: &Path) -> Result<(), Failure> {
    load(file).map(|_| ())
}

fn cmd_run(
    file: &Path,
    out: &Path,
    seed: Option<u64>,
    format: OutputFormat,
    detectors: &[String],
) -> Result<(), Failure> {
    let mut ast = load(file)?;
    if let Some(seed) = seed {
        ast.seed = seed;
    }
    if !detectors.is_empty() {
        ast.detectors = detectors
            .iter()
            .map(|name| {
                Ok(DetectorDecl {
                    kind: detector_kind(name)?,
                    args: Vec::new(),
                    span: Span::default(),
                })
            })
            .collect::<Result<_, Failure>>()?;
    }
    let result = valuecycle::run(&ast).map_err(|e| domain(e.to_string()))?;
    let events = analysis::run_scenario_detectors(&ast, &result).map_err(|e| domain(e.to_string()))?;
    let format = match format {
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Json => Format::Json,
    };
    output::write_run(out, &result, &events, format).map_err(|e| io(format!("cannot write {}: {e}", out.display())))?;
    for w in &result.warnings {
        eprintln!("warning: tick {}: {}", w.tick, w.message);
    }
    println!(
        "{}: {} ticks, {} event(s) written to {}",
        result.scenario,
        result.horizon,
        events.len(),
        out.display()
    );
    Ok(())
}

fn cmd_detect(csv: &[PathBuf], detector: &str, col_map: &[String], tol: Option<f64>) -> Result<(), Failure> {
    let kind = detector_kind(detector)?;
    let mapping = col_map
        .iter()
        .map(|m| parse_col_map(m).map_err(|e| domain(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut tables = Vec::new();
    for path in csv {
        let text = read(path)?;
        tables.push(SeriesTable::parse(&text).map_err(|e| domain(format!("{}: {e}", path.display())))?);
    }
    let events = analysis::detect_tables(kind, &tables, &mapping, tol).map_err(|e| domain(e.to_string()))?;
    println!("{}", events_json(&events));
    Ok(())
}

fn cmd_demo(name: &str, out: Option<&Path>) -> Result<(), Failure> {
    let outcome = demos::run_demo(name).map_err(|e| match e {
        DemoError::Unknown(_) => {
            let names: Vec<&str> = demos::demo_names().collect();
            domain(format!("{e}; demos: {}", names.join(", ")))
        }
        DemoError::Io(e) => io(e.to_string()),
        e => domain(e.to_string()),
    })?;
    if let Some(dir) = out {
        outcome
            .write(dir)
            .map_err(|e| io(format!("cannot write {}: {e}", dir.display())))?;
    }
    print!("{}", outcome.report.render());
    if outcome.report.pass {
        Ok(())
    } else {
        Err(domain(format!("demo {name} failed")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check { file } => cmd_check(file),
        Command::Run {
            file,
            out,
            seed,
            format,
            detectors,
        } => cmd_run(file, out, *seed, *format, detectors),
        Command::Detect {
            csv,
            detector,
            col_map,
            tol,
        } => cmd_detect(csv, detector, col_map, *tol),
        Command::Demo { name, out } => cmd_demo(name, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
