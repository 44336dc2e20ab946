use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, AlgorithmConfig};
use crate::error::{Error, Result};
use crate::objectives::ProblemSpec;
use crate::topology::GraphKind;

fn default_p() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: GraphKind,
    /// Defaults to `problem.n`.
    #[serde(default)]
    pub n: Option<usize>,
    /// Edge probability, only read for `erdos_renyi`.
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_name() -> Algorithm {
    Algorithm::Giant
}
fn default_epsilon() -> f64 {
    1.0
}
fn default_k() -> usize {
    1
}
fn default_max_iters() -> usize {
    5000
}
fn default_grad_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    #[serde(default = "default_name")]
    pub name: Algorithm,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    /// Levenberg shift added to local Hessians (Network-GIANT only).
    #[serde(default)]
    pub hessian_shift: f64,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        AlgorithmSection {
            name: default_name(),
            epsilon: default_epsilon(),
            k: default_k(),
            max_iters: default_max_iters(),
            grad_tol: default_grad_tol(),
            hessian_shift: 0.0,
        }
    }
}

impl AlgorithmSection {
    pub fn to_config(&self) -> AlgorithmConfig {
        AlgorithmConfig {
            epsilon: self.epsilon,
            consensus_rounds: self.k,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            hessian_shift: self.hessian_shift,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunerConfig {
    pub epsilon_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub tuner: Option<TunerConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Seeds the initial iterates.
    #[serde(default)]
    pub run_seed: u64,
}

impl ExperimentConfig {
    pub fn topology_n(&self) -> usize {
        self.topology.n.unwrap_or(self.problem.n)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem
            .validate()
            .map_err(|e| Error::Validation(format!("problem: {e}")))?;
        if self.topology_n() != self.problem.n {
            return Err(Error::Validation(format!(
                "topology.n ({}) must equal problem.n ({})",
                self.topology_n(),
                self.problem.n
            )));
        }
        if self.topology.kind == GraphKind::ErdosRenyi && !(self.topology.p > 0.0 && self.topology.p <= 1.0) {
            return Err(Error::Validation(format!(
                "topology.p must be in (0, 1], got {}",
                self.topology.p
            )));
        }
        self.algorithm.to_config().validate()?;
        if let Some(t) = &self.tuner {
            if t.epsilon_grid.is_empty() {
                return Err(Error::Validation("tuner.epsilon_grid must not be empty".into()));
            }
            if let Some(bad) = t.epsilon_grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
                return Err(Error::Validation(format!(
                    "tuner.epsilon_grid entries must be > 0, got {bad}"
                )));
            }
        }
        Ok(())
    }
}

/// Parses and validates a JSON config. Unknown fields are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
