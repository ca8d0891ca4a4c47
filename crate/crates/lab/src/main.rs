//! fatou-lab: runs a verification suite described by a TOML config and
//! writes JSON, CSV and SVG reports.

mod config;
mod registry;
mod suites;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::suites::{Check, LevelRow, Outcome};

/// Version of the JSON report layout; bump on any breaking change.
const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "fatou-lab", version, about = "Config-driven runner for the fatou-core verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite a config file describes.
    Run {
        config: PathBuf,
        /// Directory for the report files.
        #[arg(long, default_value = "fatou-lab-out")]
        out_dir: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Multiplies every tolerance; values above 1 loosen the checks.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
        /// Worker threads; all cores if absent.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the built-in groups, densities and suites.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", registry::listing());
            ExitCode::SUCCESS
        }
        Command::Run { config, out_dir, seed, tolerance_scale, jobs } => {
            match run(&config, &out_dir, seed, tolerance_scale, jobs) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(1),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

/// Ok(passed) once a report is written; Err only when nothing could run.
fn run(path: &Path, out_dir: &Path, seed: Option<u64>, scale: f64, jobs: Option<usize>) -> Result<bool> {
    if !(scale > 0.0 && scale.is_finite()) {
        bail!("--tolerance-scale must be positive, got {scale}");
    }
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().context("cannot size the worker pool")?;
    }
    let mut cfg = config::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;

    let outcome = suites::run(&cfg, scale);
    let passed = match &outcome {
        Ok(o) => o.checks.iter().all(|c| c.passed),
        Err(_) => false,
    };
    let files = write_outputs(&cfg, out_dir, scale, &outcome)?;
    match &outcome {
        Ok(o) => print_summary(&cfg, &o.checks),
        Err(e) => eprintln!("suite {} failed to run: {e:#}", cfg.suite.name()),
    }
    for f in files {
        println!("wrote {}", out_dir.join(f).display());
    }
    println!("{}", if passed { "PASS" } else { "FAIL" });
    Ok(passed)
}

fn print_summary(cfg: &ExperimentConfig, checks: &[Check]) {
    println!("suite {} (seed {})", cfg.suite.name(), cfg.seed);
    for c in checks {
        let value = c.value.map(|v| format!(" = {v:.3e}")).unwrap_or_default();
        let bound = match (c.lower, c.upper) {
            (Some(l), Some(u)) => format!(" in [{l}, {u}]"),
            (None, Some(u)) => format!(" <= {u:.1e}"),
            (Some(l), None) => format!(" >= {l}"),
            (None, None) => String::new(),
        };
        let detail = if c.detail.is_empty() { String::new() } else { format!("  ({})", c.detail) };
        println!("  {} {}{value}{bound}{detail}", if c.passed { "PASS" } else { "FAIL" }, c.name);
    }
}

fn report_json(cfg: &ExperimentConfig, scale: f64, outcome: &Result<Outcome>, files: &[String]) -> Value {
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "suite": cfg.suite,
        "seed": cfg.seed,
        "tolerance_scale": scale,
        "config": cfg,
        "files": files,
    });
    let obj = doc.as_object_mut().expect("object literal");
    match outcome {
        Ok(o) => {
            obj.insert("passed".into(), json!(o.checks.iter().all(|c| c.passed)));
            obj.insert("constants".into(), o.constants.clone());
            obj.insert("checks".into(), json!(o.checks));
            obj.insert("details".into(), o.details.clone());
        }
        Err(e) => {
            obj.insert("passed".into(), json!(false));
            obj.insert("error".into(), json!(format!("{e:#}")));
        }
    }
    doc
}

/// Writes every output and returns the file names, JSON last.
fn write_outputs(cfg: &ExperimentConfig, dir: &Path, scale: f64, outcome: &Result<Outcome>) -> Result<Vec<String>> {
    let stem = &cfg.output.name;
    let mut files = Vec::new();
    if let Ok(o) = outcome {
        let name = format!("{stem}-checks.csv");
        write_csv(&dir.join(&name), &o.checks, |w, c: &Check| {
            w.write_record([
                c.name.clone(),
                c.passed.to_string(),
                opt(c.value),
                opt(c.lower),
                opt(c.upper),
                c.detail.clone(),
            ])
        }, &["check", "passed", "value", "lower", "upper", "detail"])?;
        files.push(name);
        if !o.levels.is_empty() {
            let name = format!("{stem}-levels.csv");
            write_csv(&dir.join(&name), &o.levels, |w, r: &LevelRow| w.serialize(r), &[])?;
            files.push(name);
        }
        if let (Some(plot), true) = (&o.plot, cfg.output.plots) {
            let name = format!("{stem}-convergence.svg");
            fs::write(dir.join(&name), plot.render())?;
            files.push(name);
        }
    }
    let name = format!("{stem}.json");
    files.push(name.clone());
    let doc = report_json(cfg, scale, outcome, &files);
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(dir.join(&name), text).with_context(|| format!("cannot write {name}"))?;
    Ok(files)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `header` is written first when nonempty; serde rows bring their own.
fn write_csv<T>(
    path: &Path,
    rows: &[T],
    mut write: impl FnMut(&mut csv::Writer<fs::File>, &T) -> csv::Result<()>,
    header: &[&str],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    if !header.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        write(&mut w, r)?;
    }
    w.flush()?;
    Ok(())
}
