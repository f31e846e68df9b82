//! Per-verb settings: defaults, then the JSON overlay, then flags.

use std::fs;
use std::path::Path;

use kinetica::fluctuations::KuboOptions;
use kinetica::kinetics::FixedPointOptions;
use kinetica::lattice::{LatticeConfig, Profile};
use kinetica::model::ReactionNetwork;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, Common};

pub fn load_network(path: &Path) -> Result<ReactionNetwork, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    kinetica::dsl::parse_network(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Reads the overlay named by `--config`, or the defaults when absent.
pub fn overlay<T: DeserializeOwned + Default>(common: &Common) -> Result<T, CliError> {
    match &common.config {
        None => Ok(T::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Config,
    Environment,
    Entropy,
}

/// `--seed`, then the overlay's `seed`, then `KINETICA_SEED`, then entropy.
pub fn resolve_seed(flag: Option<u64>, from_config: Option<u64>) -> Result<(u64, SeedSource), CliError> {
    if let Some(s) = flag {
        return Ok((s, SeedSource::Flag));
    }
    if let Some(s) = from_config {
        return Ok((s, SeedSource::Config));
    }
    if let Ok(v) = std::env::var("KINETICA_SEED") {
        let s = v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("KINETICA_SEED is not a u64: {v:?}")))?;
        return Ok((s, SeedSource::Environment));
    }
    Ok((kinetica::ssa::rng::entropy_seed(), SeedSource::Entropy))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub tolerance: f64,
    /// Poisson parameters for the unitarity and detailed-balance reports
    /// when no reversible measure exists (default: all ones).
    pub b: Option<Vec<f64>>,
    #[serde(rename = "M")]
    pub m: f64,
    /// Upper corner of the truncated state box (default: 6 per species).
    pub box_upper: Option<Vec<u64>>,
    pub max_states: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            b: None,
            m: 1.0,
            box_upper: None,
            max_states: 20_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(rename = "M")]
    pub m: f64,
    pub t_end: f64,
    /// Equal sampling intervals on `[0, t_end]`.
    pub samples: usize,
    pub replicas: usize,
    /// Deterministic start `round(M c0)` (default: all ones).
    pub c0: Option<Vec<f64>>,
    /// Product-Poisson start with means `M b`; overrides `c0`.
    pub poisson_b: Option<Vec<f64>>,
    pub max_events: u64,
    pub seed: Option<u64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            m: 100.0,
            t_end: 10.0,
            samples: 100,
            replicas: 1,
            c0: None,
            poisson_b: None,
            max_events: 100_000_000,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointsConfig {
    pub seeds: Option<Vec<Vec<f64>>>,
    pub options: FixedPointOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmpiricalConfig {
    #[serde(rename = "M")]
    pub m: f64,
    pub replicas: usize,
    pub t_end: f64,
    pub samples: usize,
    pub burn_in: f64,
    pub max_lag: usize,
    pub max_events: u64,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        Self {
            m: 1000.0,
            replicas: 64,
            t_end: 20.0,
            samples: 200,
            burn_in: 2.0,
            max_lag: 10,
            max_events: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluctuationsConfig {
    /// Fixed point to linearise at; found from `seeds` when absent.
    pub c_bar: Option<Vec<f64>>,
    pub seeds: Option<Vec<Vec<f64>>>,
    pub tolerance: f64,
    /// Lags at which the OU covariance is tabulated.
    pub lags: Vec<f64>,
    pub kubo: KuboOptions,
    pub empirical: Option<EmpiricalConfig>,
    pub seed: Option<u64>,
}

impl Default for FluctuationsConfig {
    fn default() -> Self {
        Self {
            c_bar: None,
            seeds: None,
            tolerance: 1e-9,
            lags: (0..=10).map(|k| 0.25 * k as f64).collect(),
            kubo: KuboOptions::default(),
            empirical: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeCmdConfig {
    pub lattice: Option<LatticeConfig>,
    pub profiles: Option<Vec<Profile>>,
    pub tau_grid: Vec<f64>,
    pub replicas: usize,
    pub max_events: u64,
    /// PDE cells per axis; the reference solution is skipped when `false`.
    pub pde: bool,
    pub pde_cells: Option<Vec<usize>>,
    pub seed: Option<u64>,
}

impl Default for LatticeCmdConfig {
    fn default() -> Self {
        Self {
            lattice: None,
            profiles: None,
            tau_grid: vec![0.0, 0.5, 1.0],
            replicas: 1,
            max_events: 1_000_000_000,
            pde: true,
            pde_cells: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceKind {
    #[default]
    Meanfield,
    Scaling,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub kind: ConvergenceKind,
    pub seed: Option<u64>,
    pub replicas: usize,
    // mean-field
    pub c0: Option<Vec<f64>>,
    #[serde(rename = "M_list")]
    pub m_list: Vec<f64>,
    pub t_end: f64,
    pub samples: usize,
    // lattice scaling
    pub lattice: Option<LatticeConfig>,
    pub profiles: Option<Vec<Profile>>,
    pub macro_length: Option<Vec<f64>>,
    pub epsilons: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub pde_cells_per_unit: usize,
    pub max_events: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            kind: ConvergenceKind::Meanfield,
            seed: None,
            replicas: 128,
            c0: None,
            m_list: vec![100.0, 1000.0, 10000.0],
            t_end: 10.0,
            samples: 20,
            lattice: None,
            profiles: None,
            macro_length: None,
            epsilons: vec![0.1, 0.05, 0.025],
            tau_grid: vec![1.0],
            pde_cells_per_unit: 400,
            max_events: 1_000_000_000,
        }
    }
}

/// Seeds for the fixed-point search when none are configured: a log grid
/// for one species, otherwise the corners of `{0.1, 1, 10}^V` (uniform
/// vectors only beyond five species).
pub fn default_seeds(v: usize) -> Vec<Vec<f64>> {
    let levels = [0.1, 1.0, 10.0];
    if v == 1 {
        return [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0]
            .iter()
            .map(|&x| vec![x])
            .collect();
    }
    if v > 5 {
        return levels.iter().map(|&x| vec![x; v]).collect();
    }
    let mut out = vec![Vec::new()];
    for _ in 0..v {
        out = out
            .into_iter()
            .flat_map(|p| {
                levels.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}
