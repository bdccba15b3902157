//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{
    ensemble_csv, ensemble_report, simulate_and_report, write_simulation_outputs, SimulationSpec,
    SweepParameter, SweepSpec,
};
use crate::graphs::{GraphFamily, GraphSpec};
use crate::output::{write_json, write_text};
use crate::rng::derive_seed;
use crate::spectra::{
    eig_symmetric, path_spectrum_closed_form, ring_spectrum_closed_form, Spectrum,
};
use crate::stability::analyze;

#[derive(Debug, Parser)]
#[command(
    name = "crossnet",
    version,
    about = "Cross-diffusion induced instability on networks"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Master seed (overrides CROSSNET_SEED and the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Graph block as inline JSON, e.g. '{"family":"ring","n":100,"k":10}'.
    #[arg(long, global = true)]
    pub graph: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Graph generation.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
    /// Laplacian spectrum of the configured graph.
    Spectrum {
        /// Use the closed form (rings and paths only).
        #[arg(long)]
        closed_form: bool,
    },
    /// Equilibrium, instability region and unstable modes of the configured graph.
    Stability,
    /// Integrate perturbed runs and report pattern metrics.
    Simulate {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        perturbation: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
    },
    /// Spectral statistics over random-graph realizations.
    Ensemble {
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Configuration utilities.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum GraphAction {
    /// Write the configured graph as an edge list.
    Gen,
}

#[derive(Debug, Subcommand)]
pub enum ConfigAction {
    /// Print the fully resolved configuration.
    Dump,
}

/// Exit status for an error: 2 configuration, 3 numerical, 4 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::InvalidGraph(_) | Error::Parse(_) => 2,
        Error::Io(_) | Error::Json(_) => 4,
        _ => 3,
    }
}

pub fn error_json(e: &Error) -> serde_json::Value {
    let kind = match exit_code(e) {
        2 => "config",
        3 => "numerical",
        _ => "io",
    };
    json!({ "error": kind, "message": e.to_string(), "exit_code": exit_code(e) })
}

/// Resolve the configuration: defaults, then file, then `CROSSNET_SEED`, then flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Error::Parse(format!("cannot read {}: {io}", path.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.output {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = g.threads {
        cfg.threads = t;
    }
    if let Some(text) = &g.graph {
        cfg.graph =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("--graph: {e}")))?;
    }
    match &cli.command {
        Command::Simulate {
            runs,
            perturbation,
            t_max,
        } => {
            if let Some(r) = runs {
                cfg.experiment.runs = *r;
            }
            if let Some(p) = perturbation {
                cfg.experiment.perturbation = *p;
            }
            if let Some(t) = t_max {
                cfg.integrator.t_max = *t;
            }
        }
        Command::Ensemble {
            realizations: Some(r),
        } => cfg.experiment.realizations = *r,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parse arguments, run, and return the process exit status.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match resolve_config(&cli).and_then(|cfg| run(&cli.command, &cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

pub fn run(command: &Command, cfg: &RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(command, cfg))
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<()> {
    let dir = cfg.output_dir.as_path();
    match command {
        Command::Config {
            action: ConfigAction::Dump,
        } => {
            print!("{}", cfg.to_json()?);
            Ok(())
        }
        Command::Graph {
            action: GraphAction::Gen,
        } => cmd_graph(cfg, dir),
        Command::Spectrum { closed_form } => cmd_spectrum(cfg, dir, *closed_form),
        Command::Stability => cmd_stability(cfg, dir),
        Command::Simulate { .. } => cmd_simulate(cfg, dir),
        Command::Ensemble { .. } => cmd_ensemble(cfg, dir),
    }
}

fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    extra: serde_json::Value,
) -> Result<()> {
    write_json(
        dir,
        "manifest.json",
        &json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg,
            "details": extra,
        }),
    )
}

fn graph_details(spec: &GraphSpec) -> Result<serde_json::Value> {
    let g = spec.generate()?;
    Ok(json!({
        "family": spec.family,
        "graph_seed": spec.seed,
        "n_nodes": g.n_nodes(),
        "n_edges": g.n_edges(),
        "connected": g.is_connected(),
    }))
}

pub fn cmd_graph(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let (spec, _) = cfg.effective_model()?;
    let g = spec.generate()?;
    write_text(dir, "edges.txt", &g.to_edge_list())?;
    write_manifest(dir, "graph gen", cfg, graph_details(&spec)?)
}

fn spectrum_of(spec: &GraphSpec, closed_form: bool) -> Result<Spectrum> {
    if closed_form {
        let eigenvalues = match spec.family {
            GraphFamily::Ring { n, k } => ring_spectrum_closed_form(n, k)?,
            GraphFamily::Path { n } => path_spectrum_closed_form(n)?,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "no closed-form spectrum for {other:?}"
                )))
            }
        };
        return Ok(Spectrum {
            eigenvalues,
            eigenvectors: None,
        });
    }
    eig_symmetric(&spec.generate()?.laplacian(), false)
}

pub fn cmd_spectrum(cfg: &RunConfig, dir: &Path, closed_form: bool) -> Result<()> {
    let (spec, _) = cfg.effective_model()?;
    let s = spectrum_of(&spec, closed_form)?;
    write_text(dir, "spectrum.csv", &s.to_csv())?;
    let mut details = graph_details(&spec)?;
    details["closed_form"] = json!(closed_form);
    write_manifest(dir, "spectrum", cfg, details)
}

pub fn cmd_stability(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let (spec, params) = cfg.effective_model()?;
    let s = spectrum_of(&spec, false)?;
    let rep = analyze(&params, Some(&s.eigenvalues))?;
    write_json(dir, "report.json", &rep.to_json())?;
    write_text(dir, "spectrum.csv", &s.to_csv())?;
    write_manifest(dir, "stability", cfg, graph_details(&spec)?)
}

pub fn cmd_simulate(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let (graph, params) = cfg.effective_model()?;
    let spec = SimulationSpec {
        graph,
        params,
        integrator: cfg.integrator,
        perturbation: cfg.experiment.perturbation,
        seeds: (0..cfg.experiment.runs as u64)
            .map(|r| derive_seed(cfg.seed, r))
            .collect(),
    };
    let (report, results) = simulate_and_report(&spec)?;
    write_simulation_outputs(dir, &spec, &report, &results)?;
    let s = spectrum_of(&graph, false)?;
    write_text(dir, "spectrum.csv", &s.to_csv())?;
    write_manifest(dir, "simulate", cfg, graph_details(&graph)?)
}

pub fn cmd_ensemble(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let (graph, params) = cfg.effective_model()?;
    let (parameter, values) = match &cfg.experiment.sweep {
        Some(s) => (s.parameter, s.values.clone()),
        None => (SweepParameter::N, vec![graph.family.n_nodes() as f64]),
    };
    let spec = SweepSpec {
        graph,
        parameter,
        values,
        params,
        realizations: cfg.experiment.realizations,
        seed: cfg.seed,
    };
    let report = ensemble_report(&spec)?;
    write_text(dir, "ensemble.csv", &ensemble_csv(&report))?;
    let summary: Vec<_> = report
        .points
        .iter()
        .map(|p| {
            json!({
                "value": p.value,
                "family": p.family,
                "K": p.k_label,
                "K_half": p.k_half,
                "realizations": p.stats.realizations,
                "unstable_realizations": p.unstable_realizations,
                "unstable_fraction": p.unstable_fraction,
                "mean_unstable_modes": p.mean_unstable_modes,
            })
        })
        .collect();
    write_json(
        dir,
        "report.json",
        &json!({
            "lambda_star_1": report.lambda_star_1,
            "lambda_star_2": report.lambda_star_2,
            "points": summary,
        }),
    )?;
    write_manifest(
        dir,
        "ensemble",
        cfg,
        json!({ "sweep_parameter": parameter }),
    )
}
