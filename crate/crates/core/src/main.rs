use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use kernclust::experiments::{self, DiagnosticGrid, ExperimentSpec, Panel, Template};
use kernclust::metrics::EvalReport;
use kernclust::model::{self, MixtureConfig};
use kernclust::pipeline::{self, Method, PipelineOptions};
use kernclust::{par, Error, Result};

#[derive(Parser)]
#[command(name = "kernclust", version, about = "Kernel clustering experiments on Gaussian mixtures with outliers")]
struct Cli {
    /// Worker threads (1 forces the sequential path).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a data set and write it as CSV.
    Gen {
        /// Mixture JSON: a full config, or `{n, m, r, p, d2, sigma, seed}`.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// One pipeline run; prints a JSON report.
    Cluster {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "sdp")]
        method: Method,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment sweep; writes raw.csv and aggregate.csv.
    Sweep {
        /// ExperimentSpec JSON. Without it `--panel` picks a built-in spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_parser = parse_panel)]
        panel: Option<Panel>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Replaces the spec's seed_base.
        #[arg(long)]
        seed: Option<u64>,
        /// Replaces the spec's method list; repeat or comma-separate.
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Check the consistency inequalities over a config grid.
    Diagnose {
        /// DiagnosticGrid JSON; the built-in grid otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Added to every config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_panel(s: &str) -> std::result::Result<Panel, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown panel {s:?}"))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DataSpec {
    Full(MixtureConfig),
    Simple {
        #[serde(flatten)]
        template: Template,
        #[serde(default)]
        seed: u64,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<MixtureConfig> {
    let spec: DataSpec = read_json(path)?;
    let mut cfg = match spec {
        DataSpec::Full(c) => c,
        DataSpec::Simple { template, seed } => template.config(seed)?,
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

#[derive(Serialize)]
struct SdpSummary {
    objective: f64,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
    converged: bool,
    polished: bool,
}

#[derive(Serialize)]
struct ClusterReport {
    method: Method,
    n: usize,
    m: usize,
    r: usize,
    p: usize,
    seed: u64,
    eta: Option<f64>,
    runtime_ms: f64,
    sdp: Option<SdpSummary>,
    report: EvalReport,
    labels: Vec<usize>,
}

/// Ok(true) means every checked inequality held.
fn run(cli: Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        par::init_threads(t);
    }
    match cli.cmd {
        Cmd::Gen { spec, out, seed } => {
            let cfg = load_config(&spec, seed)?;
            let data = model::generate_mixture(&cfg)?;
            match out {
                Some(dir) => data.write_csv(create(&dir, "data.csv")?)?,
                None => data.write_csv(io::stdout().lock())?,
            }
            Ok(true)
        }
        Cmd::Cluster { spec, method, eta, seed, out } => {
            let cfg = load_config(&spec, seed)?;
            let data = model::generate_mixture(&cfg)?;
            let run = pipeline::run_pipeline(&data, method, eta, cfg.r, cfg.seed, &PipelineOptions::default())?;
            let report = pipeline::evaluate(&run, &data, Some(&cfg))?;
            let ok = report.violations().next().is_none();
            let rep = ClusterReport {
                method,
                n: cfg.n,
                m: cfg.m,
                r: cfg.r,
                p: cfg.p,
                seed: cfg.seed,
                eta: run.eta,
                runtime_ms: run.runtime_ms,
                sdp: run.sdp.as_ref().map(|s| SdpSummary {
                    objective: s.objective,
                    iterations: s.iterations,
                    primal_residual: s.primal_residual,
                    dual_residual: s.dual_residual,
                    converged: s.converged,
                    polished: s.polished,
                }),
                report,
                labels: run.labels.clone(),
            };
            let text = serde_json::to_string_pretty(&rep)?;
            println!("{text}");
            if let Some(dir) = out {
                let mut w = create(&dir, "report.json")?;
                writeln!(w, "{text}")?;
            }
            Ok(ok)
        }
        Cmd::Sweep { spec, panel, out, seed, method, replicates } => {
            let mut spec: ExperimentSpec = match (spec, panel) {
                (Some(path), _) => read_json(&path)?,
                (None, Some(panel)) => ExperimentSpec::for_panel(panel)?,
                (None, None) => return Err(Error::InvalidArgument("give --spec or --panel".into())),
            };
            if let Some(s) = seed {
                spec.seed_base = s;
            }
            if !method.is_empty() {
                spec.methods = method;
            }
            if let Some(k) = replicates {
                spec.replicates = k;
            }
            let result = experiments::run_sweep(&spec)?;
            experiments::write_rows(&result.rows, create(&out, "raw.csv")?)?;
            experiments::write_aggregates(&result.aggregates, create(&out, "aggregate.csv")?)?;
            let failed = result.rows.iter().filter(|r| !r.error.is_empty()).count();
            eprintln!("{} rows, {} flagged, written to {}", result.rows.len(), failed, out.display());
            Ok(true)
        }
        Cmd::Diagnose { spec, out, seed } => {
            let mut grid = match spec {
                Some(path) => read_json(&path)?,
                None => DiagnosticGrid::default_grid(),
            };
            if let Some(s) = seed {
                for c in &mut grid.configs {
                    c.seed = c.seed.wrapping_add(s);
                }
            }
            let rows = experiments::run_diagnostics(&grid)?;
            match out {
                Some(dir) => experiments::write_diagnostics(&rows, create(&dir, "diagnostics.csv")?)?,
                None => experiments::write_diagnostics(&rows, io::stdout().lock())?,
            }
            let violations = experiments::total_violations(&rows);
            let errors = rows.iter().filter(|r| !r.error.is_empty()).count();
            eprintln!("{} configs, {} violations, {} errors", rows.len(), violations, errors);
            Ok(violations == 0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
