//! Experiment files.
//!
//! ```toml
//! name = "fig1"
//! algorithm = "cg_ode"          # or: algorithms = ["cg_ode", "defw"]
//! seed = 0
//! output = "fig1.csv"
//!
//! [graph]
//! kind = "directed_ring"        # undirected_ring | complete | explicit
//! n_agents = 4
//!
//! [objective]
//! type = "fig1"                 # random | isotropic | explicit
//!
//! [set]
//! type = "cube"                 # box | simplex | l1ball | polytope
//! radius = 2.0
//!
//! [schedule]
//! kind = "inverse_linear"
//! t0 = 1.0
//!
//! [integrator]
//! method = "euler"
//! step = 0.05
//! horizon = 200.0
//! record_every = 1.0
//!
//! [init]
//! x0 = [[-1.8, 1.8], [-1.8, -1.8], [1.8, 1.8], [1.8, -1.8]]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dcpf_core::dynamics::Method;
use dcpf_core::Schedule;
use serde::Deserialize;

use crate::error::{config_err, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    CgOde,
    CgDiscrete,
    Defw,
    Projected,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CgOde => "cg_ode",
            Self::CgDiscrete => "cg_discrete",
            Self::Defw => "defw",
            Self::Projected => "projected",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cg_ode" => Ok(Self::CgOde),
            "cg_discrete" => Ok(Self::CgDiscrete),
            "defw" => Ok(Self::Defw),
            "projected" => Ok(Self::Projected),
            _ => Err(config_err(format!("unknown algorithm {s:?}"))),
        }
    }
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    DirectedRing {
        n_agents: usize,
        #[serde(default = "unit")]
        weight: f64,
    },
    UndirectedRing {
        n_agents: usize,
        #[serde(default = "unit")]
        weight: f64,
    },
    Complete {
        n_agents: usize,
        #[serde(default = "unit")]
        weight: f64,
    },
    /// `adjacency[i][j] > 0` means agent `j` sends to agent `i`.
    Explicit { adjacency: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub q: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    /// The four-agent planar instance with optimum at the origin.
    Fig1,
    /// Seeded rotated quadratics; the seed defaults to the experiment seed.
    Random {
        dim: usize,
        #[serde(default = "default_conditioning")]
        conditioning: f64,
        seed: Option<u64>,
    },
    /// `f_i(x) = scale / 2 * ||x - center_i||^2`.
    Isotropic { centers: Vec<Vec<f64>>, scale: f64 },
    Explicit { costs: Vec<CostConfig> },
}

fn default_conditioning() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetConfig {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `||x||_inf <= radius` in the objective's dimension.
    Cube { radius: f64 },
    Simplex { radius: f64 },
    #[serde(rename = "l1ball")]
    L1Ball { radius: f64 },
    Polytope { vertices: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_method")]
    pub method: Method,
    pub step: f64,
    pub horizon: f64,
    pub record_every: f64,
    #[serde(default = "default_true")]
    pub exact_feasibility: bool,
}

fn default_method() -> Method {
    Method::Euler
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub seed: Option<u64>,
    pub x0: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSection {
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub n_iters: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_delta() -> f64 {
    0.5
}

fn default_record_every() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectedSection {
    pub step: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub record_every: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchSetKind {
    /// Box LMO against projection onto the cross-polytope with `2n`
    /// listed vertices.
    BoxVsPolytope,
    Box,
    Simplex,
    #[serde(rename = "l1ball")]
    L1Ball,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub dims: Vec<usize>,
    pub set_kind: BenchSetKind,
    pub repeats: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub algorithm: Option<Algorithm>,
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub seed: u64,
    /// CSV file name; relative paths resolve against the output directory.
    #[serde(alias = "output_path")]
    pub output: Option<PathBuf>,
    pub graph: Option<GraphConfig>,
    pub objective: Option<ObjectiveConfig>,
    pub set: Option<SetConfig>,
    #[serde(default)]
    pub schedule: Schedule,
    pub integrator: Option<IntegratorSection>,
    #[serde(default)]
    pub init: InitConfig,
    pub discrete: Option<DiscreteSection>,
    pub projected: Option<ProjectedSection>,
    pub bench: Option<BenchSection>,
    /// Raw text of the file this config came from.
    #[serde(skip)]
    pub source: String,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    /// Algorithms to run: `algorithms` if given, else the single `algorithm`.
    pub fn algorithm_list(&self) -> Vec<Algorithm> {
        if self.algorithms.is_empty() {
            self.algorithm.into_iter().collect()
        } else {
            self.algorithms.clone()
        }
    }

    /// Output file name, defaulting to `<name>.csv`.
    pub fn output_name(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.csv", self.name)))
    }

    pub fn graph(&self) -> Result<&GraphConfig> {
        self.graph.as_ref().ok_or_else(|| config_err("missing [graph] section"))
    }

    pub fn objective(&self) -> Result<&ObjectiveConfig> {
        self.objective
            .as_ref()
            .ok_or_else(|| config_err("missing [objective] section"))
    }

    pub fn set(&self) -> Result<&SetConfig> {
        self.set.as_ref().ok_or_else(|| config_err("missing [set] section"))
    }
}

impl FromStr for ExperimentConfig {
    type Err = HarnessError;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text)?;
        if cfg.name.trim().is_empty() {
            return Err(config_err("name must not be empty"));
        }
        if cfg.algorithm.is_some() && !cfg.algorithms.is_empty() {
            return Err(config_err("give either `algorithm` or `algorithms`, not both"));
        }
        cfg.source = text.to_owned();
        Ok(cfg)
    }
}
