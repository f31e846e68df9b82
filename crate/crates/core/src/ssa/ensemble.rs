//! Independent replicas with derived seeds.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{initial_stream, sub_seed};
use super::{simulate, SimConfig, SsaError, SsaTrajectory};
use crate::model::{ReactionNetwork, State};
use crate::reversibility::PoissonParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    Deterministic { counts: Vec<u64> },
    /// Independent `Poisson(M b_v)` counts.
    Poisson { b: Vec<f64> },
}

impl InitialLaw {
    pub fn poisson(b: &PoissonParams) -> Self {
        InitialLaw::Poisson { b: b.b.clone() }
    }

    fn draw(&self, m: f64, seed: u64) -> Vec<u64> {
        match self {
            InitialLaw::Deterministic { counts } => counts.clone(),
            InitialLaw::Poisson { b } => {
                let mut rng = initial_stream(seed);
                b.iter()
                    .map(|&bv| {
                        let mean = m * bv;
                        if mean > 0.0 {
                            let p = Poisson::new(mean).expect("positive finite mean");
                            p.sample(&mut rng) as u64
                        } else {
                            0
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replica {
    pub index: usize,
    pub sub_seed: u64,
    pub initial: Vec<u64>,
    pub outcome: Result<SsaTrajectory, String>,
}

impl Replica {
    pub fn trajectory(&self) -> Option<&SsaTrajectory> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub config: SimConfig,
    pub initial_law: InitialLaw,
    pub replicas: Vec<Replica>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaStatus {
    pub index: usize,
    pub sub_seed: u64,
    pub status: String,
    pub events: Option<u64>,
    pub truncated: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub master_seed: u64,
    pub seed_source: String,
    pub sub_seeds: Vec<u64>,
    pub config: SimConfig,
    pub initial_law: InitialLaw,
    pub replicas: Vec<ReplicaStatus>,
}

impl Ensemble {
    /// Replicas that finished without error and without truncation.
    pub fn complete(&self) -> Vec<&SsaTrajectory> {
        self.replicas
            .iter()
            .filter_map(Replica::trajectory)
            .filter(|t| !t.truncated)
            .collect()
    }

    /// Mean count per sample time and species over complete replicas.
    pub fn mean_counts(&self) -> Vec<Vec<f64>> {
        let done = self.complete();
        let nt = self.config.sample_grid.len();
        let v = done.first().map_or(0, |t| t.counts.first().map_or(0, Vec::len));
        let mut mean = vec![vec![0.0; v]; nt];
        for tr in &done {
            for (acc, n) in mean.iter_mut().zip(&tr.counts) {
                for (a, x) in acc.iter_mut().zip(n) {
                    *a += *x as f64;
                }
            }
        }
        let k = done.len().max(1) as f64;
        mean.iter_mut().flatten().for_each(|x| *x /= k);
        mean
    }

    pub fn manifest(&self, seed_source: &str) -> EnsembleManifest {
        EnsembleManifest {
            master_seed: self.config.seed,
            seed_source: seed_source.to_string(),
            sub_seeds: self.replicas.iter().map(|r| r.sub_seed).collect(),
            config: self.config.clone(),
            initial_law: self.initial_law.clone(),
            replicas: self
                .replicas
                .iter()
                .map(|r| match &r.outcome {
                    Ok(t) => ReplicaStatus {
                        index: r.index,
                        sub_seed: r.sub_seed,
                        status: if t.truncated { "truncated" } else { "ok" }.into(),
                        events: Some(t.events),
                        truncated: t.truncated,
                        error: None,
                    },
                    Err(e) => ReplicaStatus {
                        index: r.index,
                        sub_seed: r.sub_seed,
                        status: "failed".into(),
                        events: None,
                        truncated: false,
                        error: Some(e.clone()),
                    },
                })
                .collect(),
        }
    }
}

/// Runs `replicas` independent simulations. Replica `i` uses the sub-seed
/// `sub_seed(config.seed, i)`; with `workers = Some(k)` the work runs on a
/// dedicated pool of `k` threads. Output is identical for any worker count.
pub fn run_ensemble(
    net: &ReactionNetwork,
    law: &InitialLaw,
    config: &SimConfig,
    replicas: usize,
    workers: Option<usize>,
) -> Result<Ensemble, SsaError> {
    config.validate()?;
    if replicas == 0 {
        return Err(SsaError::NoReplicas);
    }
    let v = net.num_species();
    let len = match law {
        InitialLaw::Deterministic { counts } => counts.len(),
        InitialLaw::Poisson { b } => {
            if b.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(SsaError::Input("Poisson parameters must be non-negative".into()));
            }
            b.len()
        }
    };
    if len != v {
        return Err(SsaError::Dimension { got: len, expected: v });
    }
    let job = |i: usize| {
        let seed = sub_seed(config.seed, i as u64);
        let initial = law.draw(config.m, seed);
        let cfg = SimConfig {
            seed,
            ..config.clone()
        };
        let state = State {
            counts: initial.clone(),
            scale: config.m,
        };
        let outcome = simulate(net, &state, &cfg).map_err(|e| e.to_string());
        Replica {
            index: i,
            sub_seed: seed,
            initial,
            outcome,
        }
    };
    let run = || (0..replicas).into_par_iter().map(job).collect::<Vec<_>>();
    let reps = match workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| SsaError::Pool(e.to_string()))?
            .install(run),
        None => run(),
    };
    Ok(Ensemble {
        config: config.clone(),
        initial_law: law.clone(),
        replicas: reps,
    })
}
