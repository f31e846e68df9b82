//! Exact event-driven simulation of the lattice process.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Field, LatticeConfig, LatticeError, Profile};
use crate::model::{falling_product, ReactionNetwork};
use crate::ssa::rng::{initial_stream, stream, sub_seed};

/// Binary tree of partial sums over site rates. Updating a leaf recomputes
/// its ancestors from their children, so no rounding accumulates.
struct SumTree {
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(leaves: &[f64]) -> Self {
        let size = leaves.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * size];
        nodes[size..size + leaves.len()].copy_from_slice(leaves);
        for i in (1..size).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { size, nodes }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn set(&mut self, leaf: usize, value: f64) {
        let mut i = leaf + self.size;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative interval contains `u`, and the offset of `u`
    /// inside it.
    fn find(&self, mut u: f64) -> (usize, f64) {
        let mut i = 1;
        while i < self.size {
            let left = self.nodes[2 * i];
            if u < left || self.nodes[2 * i + 1] == 0.0 {
                i *= 2;
            } else {
                u -= left;
                i = 2 * i + 1;
            }
        }
        let mut leaf = i - self.size;
        // rounding can land on an empty leaf; fall back to a neighbour
        while self.nodes[leaf + self.size] == 0.0 && leaf > 0 {
            leaf -= 1;
            u = self.nodes[leaf + self.size];
        }
        (leaf, u.min(self.nodes[leaf + self.size]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeRun {
    pub fields: Vec<Field<u32>>,
    pub reaction_events: u64,
    pub jump_events: u64,
    pub seed: u64,
}

struct Engine<'a> {
    net: &'a ReactionNetwork,
    cfg: &'a LatticeConfig,
    v: usize,
    rho: f64,
    nets: Vec<Vec<(usize, i64)>>,
    /// `[species][axis * 2 + (0 plus, 1 minus)]`.
    jumps: Vec<Vec<f64>>,
    jump_totals: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(net: &'a ReactionNetwork, cfg: &'a LatticeConfig) -> Self {
        let jumps: Vec<Vec<f64>> = cfg
            .jump_rates
            .iter()
            .map(|axes| axes.iter().flat_map(|r| [r.plus, r.minus]).collect())
            .collect();
        let jump_totals = jumps.iter().map(|j| j.iter().sum()).collect();
        let nets = net
            .reactions()
            .iter()
            .map(|r| {
                r.net()
                    .into_iter()
                    .enumerate()
                    .filter(|(_, d)| *d != 0)
                    .collect()
            })
            .collect();
        Self {
            net,
            cfg,
            v: net.num_species(),
            rho: cfg.reaction_rate_scale(),
            nets,
            jumps,
            jump_totals,
        }
    }

    fn reaction_rate(&self, r: usize, counts: &[u64]) -> f64 {
        let rx = &self.net.reactions()[r];
        self.rho * (rx.rate * falling_product(&rx.reactants, counts))
    }

    fn site_counts(&self, n: &[u32], site: usize) -> Vec<u64> {
        n[site * self.v..(site + 1) * self.v]
            .iter()
            .map(|&x| x as u64)
            .collect()
    }

    fn site_rate(&self, n: &[u32], site: usize) -> f64 {
        let c = self.site_counts(n, site);
        let mut total = 0.0;
        for r in 0..self.nets.len() {
            total += self.reaction_rate(r, &c);
        }
        for (s, jt) in self.jump_totals.iter().enumerate() {
            total += c[s] as f64 * jt;
        }
        total
    }

    fn neighbour(&self, site: usize, axis: usize, plus: bool) -> usize {
        let mut x = self.cfg.site_coords(site);
        let e = self.cfg.extent[axis];
        x[axis] = if plus { (x[axis] + 1) % e } else { (x[axis] + e - 1) % e };
        let mut idx = 0;
        for (a, &xa) in x.iter().enumerate().rev() {
            idx = idx * self.cfg.extent[a] + xa;
        }
        idx
    }

    /// Applies the event at offset `u` inside `site`'s rate; returns the
    /// second site touched by a jump.
    fn fire(&self, n: &mut [u32], site: usize, mut u: f64) -> (Option<usize>, bool) {
        let c = self.site_counts(n, site);
        let mut last: Option<(usize, bool)> = None;
        for r in 0..self.nets.len() {
            let rate = self.reaction_rate(r, &c);
            if rate > 0.0 {
                if u < rate {
                    self.apply_reaction(n, site, r);
                    return (None, true);
                }
                last = Some((r, true));
            }
            u -= rate;
        }
        for s in 0..self.v {
            for (k, &lam) in self.jumps[s].iter().enumerate() {
                let rate = c[s] as f64 * lam;
                if rate > 0.0 {
                    if u < rate {
                        return (Some(self.apply_jump(n, site, s, k)), false);
                    }
                    last = Some((s * 2 * self.cfg.dimension + k, false));
                }
                u -= rate;
            }
        }
        match last {
            Some((r, true)) => {
                self.apply_reaction(n, site, r);
                (None, true)
            }
            Some((code, false)) => {
                let w = 2 * self.cfg.dimension;
                (Some(self.apply_jump(n, site, code / w, code % w)), false)
            }
            None => (None, true),
        }
    }

    fn apply_reaction(&self, n: &mut [u32], site: usize, r: usize) {
        for &(s, d) in &self.nets[r] {
            let i = site * self.v + s;
            n[i] = (n[i] as i64 + d) as u32;
        }
    }

    fn apply_jump(&self, n: &mut [u32], site: usize, s: usize, k: usize) -> usize {
        let target = self.neighbour(site, k / 2, k % 2 == 0);
        n[site * self.v + s] -= 1;
        n[target * self.v + s] += 1;
        target
    }
}

/// Independent `Poisson(c_v(0, X))` counts per site.
pub fn initial_counts(cfg: &LatticeConfig, profiles: &[Profile], seed: u64) -> Vec<u32> {
    let mut rng = initial_stream(seed);
    let mut out = Vec::with_capacity(cfg.sites() * profiles.len());
    for site in 0..cfg.sites() {
        let x = cfg.macro_coords(&cfg.site_coords(site));
        for p in profiles {
            let mean = p.eval(&x);
            let k = if mean > 0.0 {
                Poisson::new(mean).expect("finite mean").sample(&mut rng) as u32
            } else {
                0
            };
            out.push(k);
        }
    }
    out
}

/// Simulates one lattice replica and records the counts at each macroscopic
/// time of `tau_grid`.
pub fn simulate_lattice(
    net: &ReactionNetwork,
    cfg: &LatticeConfig,
    profiles: &[Profile],
    tau_grid: &[f64],
    seed: u64,
    max_events: u64,
) -> Result<LatticeRun, LatticeError> {
    cfg.validate(net)?;
    if profiles.len() != net.num_species() {
        return Err(LatticeError::Config("one profile per species is required".into()));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) || tau_grid.iter().any(|&t| t < 0.0) {
        return Err(LatticeError::Config("tau grid must be increasing and non-negative".into()));
    }
    let n0 = initial_counts(cfg, profiles, seed);
    simulate_from(net, cfg, n0, tau_grid, seed, max_events)
}

pub(crate) fn simulate_from(
    net: &ReactionNetwork,
    cfg: &LatticeConfig,
    mut n: Vec<u32>,
    tau_grid: &[f64],
    seed: u64,
    max_events: u64,
) -> Result<LatticeRun, LatticeError> {
    let eng = Engine::new(net, cfg);
    let sites = cfg.sites();
    let rates: Vec<f64> = (0..sites).map(|s| eng.site_rate(&n, s)).collect();
    let mut tree = SumTree::new(&rates);
    let mut rng = stream(seed);
    let ts = cfg.time_scale();
    let t_end = tau_grid.last().copied().unwrap_or(0.0) * ts;
    let mut run = LatticeRun {
        fields: Vec::with_capacity(tau_grid.len()),
        reaction_events: 0,
        jump_events: 0,
        seed,
    };
    let mut next = 0;
    let mut t = 0.0;
    loop {
        let total = tree.total();
        if !total.is_finite() {
            return Err(LatticeError::RateOverflow);
        }
        let t_new = if total > 0.0 {
            let e: f64 = Exp1.sample(&mut rng);
            t + e / total
        } else {
            f64::INFINITY
        };
        while next < tau_grid.len() && tau_grid[next] * ts < t_new {
            run.fields.push(Field {
                tau: tau_grid[next],
                values: n.clone(),
            });
            next += 1;
        }
        if t_new > t_end || next == tau_grid.len() {
            break;
        }
        if run.reaction_events + run.jump_events >= max_events {
            return Err(LatticeError::EventBudget(max_events));
        }
        let u = rng.random::<f64>() * total;
        let (site, offset) = tree.find(u);
        let (other, reaction) = eng.fire(&mut n, site, offset);
        if reaction {
            run.reaction_events += 1;
        } else {
            run.jump_events += 1;
        }
        tree.set(site, eng.site_rate(&n, site));
        if let Some(o) = other {
            tree.set(o, eng.site_rate(&n, o));
        }
        t = t_new;
    }
    Ok(run)
}

/// Independent replicas with sub-seeds `sub_seed(seed, i)`; results do not
/// depend on the worker count.
pub fn run_lattice_ensemble(
    net: &ReactionNetwork,
    cfg: &LatticeConfig,
    profiles: &[Profile],
    tau_grid: &[f64],
    replicas: usize,
    seed: u64,
    max_events: u64,
    workers: Option<usize>,
) -> Result<Vec<LatticeRun>, LatticeError> {
    let job = |i: usize| {
        simulate_lattice(
            net,
            cfg,
            profiles,
            tau_grid,
            sub_seed(seed, i as u64),
            max_events,
        )
    };
    let run = || (0..replicas).into_par_iter().map(job).collect::<Result<Vec<_>, _>>();
    match workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| LatticeError::Pool(e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Replica mean of the sampled fields.
pub fn mean_fields(runs: &[LatticeRun]) -> Vec<Field<f64>> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    first
        .fields
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let mut acc = vec![0.0; f.values.len()];
            for r in runs {
                for (a, &x) in acc.iter_mut().zip(&r.fields[k].values) {
                    *a += x as f64;
                }
            }
            acc.iter_mut().for_each(|a| *a /= runs.len() as f64);
            Field {
                tau: f.tau,
                values: acc,
            }
        })
        .collect()
}
