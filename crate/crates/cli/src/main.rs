//! `nhqm`: run a scenario described by a JSON configuration file.

mod config;
mod scenario;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use nhqm::io::{round_json, write_csv};
use nhqm::prelude::Registry;

use config::Config;
use scenario::{Context, Kind, Outcome, RunError};

#[derive(Parser)]
#[command(name = "nhqm", version, about = "Biorthogonal quantum mechanics scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Right/left eigensystem of a Hamiltonian.
    Diagonalize(RunArgs),
    /// Time evolution of a canonical state.
    Evolve(RunArgs),
    /// Geometric phase around a closed loop.
    Berry(RunArgs),
    /// Berry connections and curvature at a point.
    Curvature(RunArgs),
    /// Slow transport around a loop.
    Adiabatic(RunArgs),
    /// Second-quantized Hamiltonian on a truncated Fock space.
    Fock(RunArgs),
    /// Stationary non-Hermitian Gross-Pitaevskii problem.
    Gp(RunArgs),
    /// List the registered Hamiltonian and potential builders.
    Builders {
        /// Print the catalog as JSON.
        #[arg(long)]
        json: bool,
        /// Register a matrix file before listing.
        #[arg(long, value_name = "NAME=FILE")]
        register: Vec<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Write `<prefix>.json`, CSV tables and snapshots.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (kind, args) = match cli.command {
        Command::Diagonalize(a) => (Kind::Diagonalize, a),
        Command::Evolve(a) => (Kind::Evolve, a),
        Command::Berry(a) => (Kind::Berry, a),
        Command::Curvature(a) => (Kind::Curvature, a),
        Command::Adiabatic(a) => (Kind::Adiabatic, a),
        Command::Fock(a) => (Kind::Fock, a),
        Command::Gp(a) => (Kind::Gp, a),
        Command::Builders { json, register } => return report(builders(json, &register)),
    };
    report(run(kind, &args))
}

fn report(r: Result<u8, RunError>) -> ExitCode {
    match r {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn builders(json: bool, register: &[String]) -> Result<u8, RunError> {
    let mut reg = Registry::default();
    for spec in register {
        let (name, file) = spec
            .split_once('=')
            .ok_or_else(|| RunError::Io(format!("--register expects NAME=FILE, got `{spec}`")))?;
        reg.register_matrix_file(name, Path::new(file))?;
    }
    let catalog = reg.catalog();
    let mut out = String::new();
    if json {
        out = pretty(&json!({ "builders": catalog }));
    } else {
        for b in &catalog {
            let params: Vec<String> = b
                .parameters
                .iter()
                .map(|p| match p.default {
                    Some(d) => format!("{}={d}", p.name),
                    None => p.name.clone(),
                })
                .collect();
            out.push_str(&format!("{:<20} {:<12} {}\n", b.name, b.kind, b.description));
            if !b.coordinates.is_empty() {
                out.push_str(&format!("{:<20} coordinates: {}\n", "", b.coordinates.join(", ")));
            }
            if !params.is_empty() {
                out.push_str(&format!("{:<20} parameters: {}\n", "", params.join(", ")));
            }
        }
    }
    print!("{out}");
    Ok(0)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn threads() -> Result<usize, RunError> {
    match std::env::var("NHQM_THREADS") {
        Err(_) => Ok(0),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(RunError::Io(format!("NHQM_THREADS must be a positive integer, got `{s}`"))),
        },
    }
}

fn run(kind: Kind, args: &RunArgs) -> Result<u8, RunError> {
    let cfg = Config::load(&args.config)?;
    let root = cfg.root();
    let Some(sweep) = root.section("sweep")? else {
        let ctx = Context { cfg: &cfg, seed: args.seed };
        let mut outcome = scenario::run(kind, &ctx)?;
        stamp(&mut outcome.summary, args.seed);
        emit(&outcome, args.out.as_deref(), "")?;
        return Ok(0);
    };

    let parameter = sweep.require_str("parameter")?;
    let values = sweep.require_f64_list("values")?;
    if values.is_empty() {
        return Err(sweep.invalid("values", "must not be empty").into());
    }
    let configs: Vec<Config> = values.iter().map(|v| cfg.with_parameter(parameter, *v)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads()?)
        .build()
        .map_err(|e| RunError::Io(e.to_string()))?;
    let results: Vec<Result<Outcome, RunError>> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| scenario::run(kind, &Context { cfg: c, seed: args.seed }))
            .collect()
    });

    let mut code = 0;
    let mut points = vec![];
    for (k, (value, result)) in values.iter().zip(&results).enumerate() {
        match result {
            Ok(outcome) => {
                points.push(json!({ "index": k, "value": value, "status": 0, "summary": outcome.summary }));
                if let Some(prefix) = &args.out {
                    write_tables(outcome, prefix, &format!("_{k}"))?;
                }
            }
            Err(e) => {
                eprintln!("error: {parameter} = {value}: {e}");
                code = code.max(e.exit_code());
                points.push(json!({ "index": k, "value": value, "status": e.exit_code(), "error": e.to_string() }));
            }
        }
    }
    let mut summary = json!({
        "kind": kind.name(),
        "sweep": { "parameter": parameter, "values": values },
        "points": points,
    });
    stamp(&mut summary, args.seed);
    emit(&Outcome { summary, tables: vec![], snapshots: vec![] }, args.out.as_deref(), "")?;
    Ok(code)
}

fn stamp(summary: &mut Value, seed: u64) {
    if let Value::Object(m) = summary {
        m.insert("seed".into(), Value::from(seed));
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_tables(outcome: &Outcome, prefix: &Path, tag: &str) -> Result<(), RunError> {
    for t in &outcome.tables {
        let path = with_suffix(prefix, &format!("{tag}_{}.csv", t.name));
        let f = File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(f);
        write_csv(&mut w, &t.header, t.rows.iter().cloned())?;
        w.flush().map_err(|e| io_err(&path, e))?;
    }
    for (name, doc) in &outcome.snapshots {
        write_text(&with_suffix(prefix, &format!("{tag}_{name}.json")), &pretty(doc))?;
    }
    Ok(())
}

fn emit(outcome: &Outcome, prefix: Option<&Path>, tag: &str) -> Result<(), RunError> {
    let text = pretty(&round_json(outcome.summary.clone()));
    print!("{text}");
    if let Some(prefix) = prefix {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        write_text(&with_suffix(prefix, &format!("{tag}.json")), &text)?;
        write_tables(outcome, prefix, tag)?;
    }
    Ok(())
}
