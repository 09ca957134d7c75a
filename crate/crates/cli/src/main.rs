use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use serde::Serialize;
use serde_json::{json, Map, Value};

use equilib_cli::output::{ErrorInfo, ErrorObject, RunResult};
use equilib_cli::problem::{self, Problem, Task, ValidationError};
use equilib_cli::svg;
use equilib_cli::tasks::{self, TaskError};

/// Equilibrium configurations of repelling particles on the line and circle.
#[derive(Debug, Parser)]
#[command(name = "equilib", version)]
struct Cli {
    #[arg(value_enum)]
    task: Task,
    /// Problem file (JSON, schema_version 1).
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Overrides options.rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides options.residual_tol.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Force law as KIND:PARAM, e.g. inverse_power:2 or exp:1.
    #[arg(long)]
    law: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
}

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

fn write_json<T: Serialize>(path: Option<&Path>, v: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn object<'a>(v: &'a mut Value, key: &str) -> anyhow::Result<&'a mut Map<String, Value>> {
    let root = v.as_object_mut().context("problem is not an object")?;
    root.entry(key).or_insert_with(|| json!({}));
    root[key].as_object_mut().with_context(|| format!("{key} is not an object"))
}

/// Folds command-line overrides into the problem file.
fn apply_flags(cli: &Cli, raw: &mut Value) -> Result<(), ValidationError> {
    let obj = raw
        .as_object_mut()
        .ok_or_else(|| ValidationError::schema("problem file must be a JSON object"))?;
    match obj.get("task") {
        None => {
            obj.insert("task".into(), json!(cli.task.name()));
        }
        Some(t) if t.as_str() == Some(cli.task.name()) => {}
        Some(t) => {
            return Err(ValidationError::schema(format!(
                "task: file says {t}, command line says {}",
                cli.task.name()
            )))
        }
    }
    if let Some(l) = &cli.law {
        obj.insert("law".into(), json!(l));
    }
    let bad = |e: anyhow::Error| ValidationError::schema(e.to_string());
    for (key, v) in [("n", cli.n.map(|n| json!(n))), ("a", cli.a.map(|a| json!(a))), ("b", cli.b.map(|b| json!(b)))] {
        if let Some(v) = v {
            object(raw, "params").map_err(bad)?.insert(key.into(), v);
        }
    }
    if let Some(s) = cli.seed {
        object(raw, "options").map_err(bad)?.insert("rng_seed".into(), json!(s));
    }
    if let Some(t) = cli.tol {
        object(raw, "options").map_err(bad)?.insert("residual_tol".into(), json!(t));
    }
    Ok(())
}

fn fail_invalid(path: Option<&Path>, e: ValidationError) -> anyhow::Result<ExitCode> {
    eprintln!("error: {e}");
    write_json(
        path,
        &ErrorObject {
            error: ErrorInfo {
                kind: e.kind,
                message: e.message,
            },
        },
    )?;
    Ok(ExitCode::from(EXIT_INVALID))
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let mut raw = match &cli.problem {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(v) => v,
                Err(e) => return fail_invalid(cli.out.as_deref(), ValidationError::schema(format!("problem file: {e}"))),
            }
        }
        None => json!({"schema_version": problem::SCHEMA_VERSION}),
    };
    if let Err(e) = apply_flags(cli, &mut raw) {
        return fail_invalid(cli.out.as_deref(), e);
    }
    let problem = match Problem::from_value(raw) {
        Ok(p) => p,
        Err(e) => return fail_invalid(cli.out.as_deref(), e),
    };
    let out = cli.out.clone().or_else(|| problem.outputs.json.clone().map(PathBuf::from));
    let csv = cli.csv.clone().or_else(|| problem.outputs.csv.clone().map(PathBuf::from));
    let svg = cli.svg.clone().or_else(|| problem.outputs.svg.clone().map(PathBuf::from));
    log::info!("running {}", problem.task.name());

    let mut result = RunResult {
        task: problem.task.name().into(),
        input: problem.raw.clone(),
        options: problem.options,
        output: Value::Null,
        residual_report: None,
        iterations: None,
        converged: false,
        error: None,
    };
    match tasks::run(&problem) {
        Ok(o) => {
            if let Some(note) = &o.note {
                eprint!("{note}");
            }
            if let Some(path) = &csv {
                match &o.table {
                    Some(t) => t
                        .write(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?)
                        .with_context(|| format!("writing {}", path.display()))?,
                    None => eprintln!("warning: {} has no tabular output", problem.task.name()),
                }
            }
            if let Some(path) = &svg {
                match &o.plot {
                    Some(c) => fs::write(path, svg::render_gap_plot(c, o.residual_report.as_ref()))
                        .with_context(|| format!("writing {}", path.display()))?,
                    None => eprintln!("warning: {} has no plot", problem.task.name()),
                }
            }
            result.output = o.output;
            result.residual_report = o.residual_report;
            result.iterations = o.iterations;
            result.converged = true;
            write_json(out.as_deref(), &result)?;
            Ok(ExitCode::SUCCESS)
        }
        Err(TaskError::Invalid(e)) => fail_invalid(out.as_deref(), e),
        Err(TaskError::Failed(e)) => {
            eprintln!("error: {e}");
            if let equilib::EquilibError::NoConvergence { iterations, .. } = e {
                result.iterations = Some(iterations);
            }
            result.error = Some(ErrorInfo {
                kind: e.kind().into(),
                message: e.to_string(),
            });
            write_json(out.as_deref(), &result)?;
            Ok(ExitCode::from(EXIT_NO_CONVERGENCE))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EQUILIB_LOG", "error")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_IO)
        }
    }
}
