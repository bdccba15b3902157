//! Run configuration shared by the CLI subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{IntegratorConfig, DEFAULT_PERTURBATION};
use crate::error::{invalid, Error, Result};
use crate::experiments::SweepParameter;
use crate::graphs::{GraphFamily, GraphSpec};
use crate::pde_bridge::PdeParams;
use crate::stability::SktParams;

/// Environment variable overriding the master seed.
pub const SEED_ENV: &str = "CROSSNET_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Relative amplitude of the initial perturbation of the homogeneous state.
    pub perturbation: f64,
    /// Number of simulation runs; run `r` perturbs with seed `derive_seed(seed, r)`.
    pub runs: usize,
    /// Graphs per ensemble point.
    pub realizations: usize,
    /// Swept graph parameter for `ensemble`; without it the graph block is a single point.
    pub sweep: Option<SweepConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            perturbation: DEFAULT_PERTURBATION,
            runs: 1,
            realizations: 200,
            sweep: None,
        }
    }
}

/// 1-D mesh replacing the graph block: path graph on `n` nodes with diffusion
/// coefficients scaled by `1/h²`, `h = ell/(n − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeBlock {
    pub ell: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub graph: GraphSpec,
    pub skt: SktParams,
    pub integrator: IntegratorConfig,
    pub experiment: ExperimentConfig,
    pub pde: Option<PdeBlock>,
    pub output_dir: PathBuf,
    /// Master seed for perturbations and ensembles.
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            graph: GraphSpec::new(GraphFamily::Ring { n: 100, k: 10 }),
            skt: SktParams::table1(),
            integrator: IntegratorConfig::default(),
            experiment: ExperimentConfig::default(),
            pde: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Replace the master seed with `CROSSNET_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| {
                Error::Parse(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.family.validate()?;
        self.skt.validate()?;
        self.integrator.validate()?;
        let e = &self.experiment;
        if !(0.0..1.0).contains(&e.perturbation) {
            return Err(invalid(format!(
                "experiment.perturbation must lie in [0, 1), got {}",
                e.perturbation
            )));
        }
        if e.runs == 0 || e.realizations == 0 {
            return Err(invalid(
                "experiment.runs and experiment.realizations must be >= 1",
            ));
        }
        if let Some(s) = &e.sweep {
            if s.values.is_empty() {
                return Err(invalid("experiment.sweep.values must be non-empty"));
            }
        }
        if let Some(p) = self.pde {
            self.pde_params(p)?;
        }
        Ok(())
    }

    fn pde_params(&self, p: PdeBlock) -> Result<PdeParams> {
        PdeParams::new(self.skt, p.ell, p.n)
    }

    /// Graph and parameters after applying the `pde` block, if any.
    pub fn effective_model(&self) -> Result<(GraphSpec, SktParams)> {
        match self.pde {
            Some(block) => {
                let p = self.pde_params(block)?;
                Ok((
                    GraphSpec::new(GraphFamily::Path { n: p.n }),
                    p.scaled_params(),
                ))
            }
            None => Ok((self.graph, self.skt)),
        }
    }
}
