//! Exact simulation of the jump process with mass-action propensities.
//!
//! [`simulate`] is the direct method: exponential waiting times with the
//! total rate, reaction chosen proportionally to its propensity, and only the
//! propensities that read a changed species are recomputed after an event.

pub mod convergence;
pub mod ensemble;
pub mod rng;
pub mod stationarity;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{csv_document, g17};
use crate::model::{falling_product, ReactionNetwork, State};

pub use convergence::{meanfield_convergence, ConvergenceRow, ConvergenceTable};
pub use ensemble::{run_ensemble, Ensemble, EnsembleManifest, InitialLaw, Replica};
pub use stationarity::{stationarity_test, StationarityEntry, StationarityReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsaError {
    #[error("scale M must be positive and finite, got {0}")]
    Scale(f64),
    #[error("end time must be non-negative and finite, got {0}")]
    Horizon(f64),
    #[error("sample grid must be increasing and inside [0, t_end]")]
    Grid,
    #[error("max_events must be positive")]
    EventCap,
    #[error("state has {got} species, network has {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("total propensity overflowed at t = {t}")]
    RateOverflow { t: f64 },
    #[error("at least one replica is required")]
    NoReplicas,
    #[error("{0}")]
    Input(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Kinetics(#[from] crate::kinetics::KineticsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(rename = "M")]
    pub m: f64,
    pub t_end: f64,
    pub sample_grid: Vec<f64>,
    pub seed: u64,
    pub max_events: u64,
}

impl SimConfig {
    /// Config with `n` equal sampling intervals on `[0, t_end]`; `n = 0`
    /// samples `t_end` only.
    pub fn uniform(m: f64, t_end: f64, n: usize, seed: u64) -> Self {
        let sample_grid = if n == 0 {
            vec![t_end]
        } else {
            (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
        };
        Self {
            m,
            t_end,
            sample_grid,
            seed,
            max_events: 100_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), SsaError> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(SsaError::Scale(self.m));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(SsaError::Horizon(self.t_end));
        }
        let g = &self.sample_grid;
        if g.windows(2).any(|w| w[1] <= w[0]) || g.iter().any(|&t| !(0.0..=self.t_end).contains(&t)) {
            return Err(SsaError::Grid);
        }
        if self.max_events == 0 {
            return Err(SsaError::EventCap);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaTrajectory {
    /// Sample times actually reached (a prefix of the grid when truncated).
    pub times: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
    pub events: u64,
    /// Number of firings of each reaction.
    pub fire_counts: Vec<u64>,
    /// `int_0^t lambda_r(n(s)) ds` up to the stopping time.
    pub propensity_integrals: Vec<f64>,
    pub first_event_time: Option<f64>,
    pub last_event_time: Option<f64>,
    /// Time at which every propensity vanished, if that happened.
    pub absorbed_at: Option<f64>,
    /// True when `max_events` stopped the run before `t_end`.
    pub truncated: bool,
}

impl SsaTrajectory {
    /// CSV with header `t,n_<name>...`.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut header = vec!["t".to_string()];
        header.extend(names.iter().map(|n| format!("n_{n}")));
        let rows = self.times.iter().zip(&self.counts).map(|(t, n)| {
            let mut row = vec![g17(*t)];
            row.extend(n.iter().map(|x| x.to_string()));
            row
        });
        csv_document(&header, rows)
    }
}

/// Precomputed propensity data shared by every event of a run.
pub(crate) struct Propensities<'a> {
    net: &'a ReactionNetwork,
    prefactor: Vec<f64>,
    nets: Vec<Vec<(usize, i64)>>,
    /// Reactions whose propensity must be refreshed after reaction `r`.
    dependents: Vec<Vec<usize>>,
}

impl<'a> Propensities<'a> {
    pub(crate) fn new(net: &'a ReactionNetwork, m: f64) -> Self {
        let reactions = net.reactions();
        let prefactor = reactions
            .iter()
            .map(|r| r.rate * m.powi(1 - r.order() as i32))
            .collect();
        let nets: Vec<Vec<(usize, i64)>> = reactions
            .iter()
            .map(|r| {
                r.net()
                    .into_iter()
                    .enumerate()
                    .filter(|(_, d)| *d != 0)
                    .collect()
            })
            .collect();
        let dependents = nets
            .iter()
            .map(|changed| {
                (0..reactions.len())
                    .filter(|&s| changed.iter().any(|&(v, _)| reactions[s].reactants[v] > 0))
                    .collect()
            })
            .collect();
        Self {
            net,
            prefactor,
            nets,
            dependents,
        }
    }

    pub(crate) fn eval(&self, r: usize, counts: &[u64]) -> f64 {
        self.prefactor[r] * falling_product(&self.net.reactions()[r].reactants, counts)
    }

    pub(crate) fn apply(&self, r: usize, counts: &mut [u64]) {
        for &(v, d) in &self.nets[r] {
            counts[v] = (counts[v] as i64 + d) as u64;
        }
    }

    pub(crate) fn dependents(&self, r: usize) -> &[usize] {
        &self.dependents[r]
    }
}

/// Simulates one trajectory from `initial`, driven by the generator `rng`.
pub fn simulate_with<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    initial: &State,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<SsaTrajectory, SsaError> {
    cfg.validate()?;
    if initial.counts.len() != net.num_species() {
        return Err(SsaError::Dimension {
            got: initial.counts.len(),
            expected: net.num_species(),
        });
    }
    let nr = net.num_reactions();
    let props = Propensities::new(net, cfg.m);
    let mut n = initial.counts.clone();
    let mut lam: Vec<f64> = (0..nr).map(|r| props.eval(r, &n)).collect();
    let grid = &cfg.sample_grid;
    let mut out = SsaTrajectory {
        times: Vec::with_capacity(grid.len()),
        counts: Vec::with_capacity(grid.len()),
        events: 0,
        fire_counts: vec![0; nr],
        propensity_integrals: vec![0.0; nr],
        first_event_time: None,
        last_event_time: None,
        absorbed_at: None,
        truncated: false,
    };
    let mut next = 0;
    let mut t = 0.0;
    loop {
        let total: f64 = lam.iter().sum();
        if !total.is_finite() {
            return Err(SsaError::RateOverflow { t });
        }
        if total == 0.0 {
            out.absorbed_at = Some(t);
            while next < grid.len() {
                out.times.push(grid[next]);
                out.counts.push(n.clone());
                next += 1;
            }
            break;
        }
        let tau: f64 = Exp1.sample(rng);
        let t_new = t + tau / total;
        while next < grid.len() && grid[next] < t_new {
            out.times.push(grid[next]);
            out.counts.push(n.clone());
            next += 1;
        }
        if t_new > cfg.t_end {
            for (acc, l) in out.propensity_integrals.iter_mut().zip(&lam) {
                *acc += l * (cfg.t_end - t);
            }
            break;
        }
        if out.events == cfg.max_events {
            out.truncated = true;
            break;
        }
        for (acc, l) in out.propensity_integrals.iter_mut().zip(&lam) {
            *acc += l * (t_new - t);
        }
        let mut u = rng.random::<f64>() * total;
        let mut r = nr - 1;
        for (i, l) in lam.iter().enumerate() {
            if u < *l {
                r = i;
                break;
            }
            u -= l;
        }
        // guard against rounding landing on a zero-propensity tail entry
        while lam[r] == 0.0 {
            r -= 1;
        }
        props.apply(r, &mut n);
        for &s in props.dependents(r) {
            lam[s] = props.eval(s, &n);
        }
        out.events += 1;
        out.fire_counts[r] += 1;
        out.first_event_time.get_or_insert(t_new);
        out.last_event_time = Some(t_new);
        t = t_new;
    }
    Ok(out)
}

/// Simulates one trajectory with the generator keyed by `cfg.seed`.
pub fn simulate(
    net: &ReactionNetwork,
    initial: &State,
    cfg: &SimConfig,
) -> Result<SsaTrajectory, SsaError> {
    simulate_with(net, initial, cfg, &mut rng::stream(cfg.seed))
}
