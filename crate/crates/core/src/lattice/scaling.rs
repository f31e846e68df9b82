//! Convergence of block-averaged lattice fields to the reference PDE as the
//! lattice spacing shrinks.

use serde::{Deserialize, Serialize};

use super::pde::{reference_pde, PdeGrid};
use super::sim::run_lattice_ensemble;
use super::{LatticeConfig, LatticeError, Profile};
use crate::io::{csv_document, g17};
use crate::model::ReactionNetwork;
use crate::ssa::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    /// Macroscopic domain length per axis; must be a whole number of units.
    pub macro_length: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    /// PDE cells per macroscopic unit along each axis.
    pub pde_cells_per_unit: usize,
    pub max_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    /// `max |block mean - PDE cell mean|` over times, blocks and species.
    pub max_error: f64,
    /// Largest standard error of a block mean across replicas.
    pub max_stderr: f64,
    pub sites: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    pub decreasing: bool,
}

impl ScalingTable {
    pub fn to_csv(&self) -> String {
        let header: Vec<String> = ["epsilon", "max_error", "max_stderr", "sites"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        csv_document(
            &header,
            self.rows.iter().map(|r| {
                vec![
                    g17(r.epsilon),
                    g17(r.max_error),
                    g17(r.max_stderr),
                    r.sites.to_string(),
                ]
            }),
        )
    }
}

fn whole(x: f64, what: &str) -> Result<usize, LatticeError> {
    let k = x.round();
    if k < 1.0 || (x - k).abs() > 1e-9 * k {
        return Err(LatticeError::Config(format!("{what} must be a positive integer, got {x}")));
    }
    Ok(k as usize)
}

/// Averages `values` (`cells` grid, `v` species per cell) over blocks of
/// `per_block[a]` cells along each axis; output is indexed like the input
/// with `blocks[a]` cells per axis.
fn block_average(values: &[f64], cells: &[usize], per_block: &[usize], v: usize) -> Vec<f64> {
    let blocks: Vec<usize> = cells.iter().zip(per_block).map(|(c, p)| c / p).collect();
    let nb: usize = blocks.iter().product();
    let mut out = vec![0.0; nb * v];
    let total: usize = cells.iter().product();
    for i in 0..total {
        let mut rest = i;
        let mut b = 0;
        let mut stride = 1;
        for a in 0..cells.len() {
            let x = rest % cells[a];
            rest /= cells[a];
            b += (x / per_block[a]) * stride;
            stride *= blocks[a];
        }
        for s in 0..v {
            out[b * v + s] += values[i * v + s];
        }
    }
    let size: usize = per_block.iter().product();
    out.iter_mut().for_each(|x| *x /= size as f64);
    out
}

/// Runs the lattice at every `epsilon` on the same macroscopic domain and
/// compares unit-cell block averages of the replica mean with the PDE.
pub fn scaling_convergence(
    net: &ReactionNetwork,
    base: &LatticeConfig,
    profiles: &[Profile],
    opts: &ScalingOptions,
    workers: Option<usize>,
) -> Result<ScalingTable, LatticeError> {
    let d = base.dimension;
    if opts.macro_length.len() != d {
        return Err(LatticeError::Config("macro_length needs one entry per axis".into()));
    }
    if opts.replicas < 2 {
        return Err(LatticeError::Config("at least two replicas are required".into()));
    }
    let units: Vec<usize> = opts
        .macro_length
        .iter()
        .map(|&l| whole(l, "macro length"))
        .collect::<Result<_, _>>()?;
    let v = net.num_species();
    let mut rows = Vec::with_capacity(opts.epsilons.len());
    for (k, &eps) in opts.epsilons.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.epsilon = eps;
        let per_unit: Vec<usize> = (0..d)
            .map(|a| whole(1.0 / cfg.axis_scale(a), "sites per unit length"))
            .collect::<Result<_, _>>()?;
        cfg.extent = units.iter().zip(&per_unit).map(|(u, p)| u * p).collect();
        cfg.validate(net)?;
        let seed = derive_seed(opts.seed, "scaling", k as u64);
        let runs = run_lattice_ensemble(
            net,
            &cfg,
            profiles,
            &opts.tau_grid,
            opts.replicas,
            seed,
            opts.max_events,
            workers,
        )?;
        let pde_cells: Vec<usize> = units.iter().map(|u| u * opts.pde_cells_per_unit).collect();
        let pde = reference_pde(net, &cfg, profiles, &opts.tau_grid, &PdeGrid::new(pde_cells.clone()))?;
        let r = runs.len() as f64;
        let mut max_error = 0.0f64;
        let mut max_stderr = 0.0f64;
        for (t, pf) in pde.fields.iter().enumerate() {
            let reference = block_average(&pf.values, &pde_cells, &vec![opts.pde_cells_per_unit; d], v);
            let per_replica: Vec<Vec<f64>> = runs
                .iter()
                .map(|run| {
                    let vals: Vec<f64> = run.fields[t].values.iter().map(|&x| x as f64).collect();
                    block_average(&vals, &cfg.extent, &per_unit, v)
                })
                .collect();
            for j in 0..reference.len() {
                let mean = per_replica.iter().map(|b| b[j]).sum::<f64>() / r;
                let var = per_replica.iter().map(|b| (b[j] - mean).powi(2)).sum::<f64>() / (r - 1.0);
                max_error = max_error.max((mean - reference[j]).abs());
                max_stderr = max_stderr.max((var / r).sqrt());
            }
        }
        rows.push(ScalingRow {
            epsilon: eps,
            max_error,
            max_stderr,
            sites: cfg.sites(),
            seed,
        });
    }
    let decreasing = rows.windows(2).all(|w| w[1].max_error < w[0].max_error);
    Ok(ScalingTable { rows, decreasing })
}
