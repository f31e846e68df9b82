//! Fixed points of the kinetic equations on conservation-law leaves.
//!
//! Each seed is integrated until `||F||` stays small, then polished with a
//! Gauss-Newton iteration on `[F(c); H (c - seed)] = 0`, where the rows of
//! `H` span the first integrals. A second Newton run starts at the seed
//! itself so that unstable points, which the flow never approaches, are
//! found when a seed is close to them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ode::{integrate_with, StepControl};
use super::{check_concentrations, ode_first_integrals, KineticsError};
use crate::model::ReactionNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub c: Vec<f64>,
    pub stability: Stability,
    /// Eigenvalues `(re, im)` of the Jacobian restricted to the leaf.
    pub eigenvalues: Vec<(f64, f64)>,
    /// `max_v |F_v(c)|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: Vec<f64>,
    /// Point reached by integrating from the seed (its basin).
    pub basin: Option<usize>,
    /// Point reached by Newton's method started at the seed.
    pub newton: Option<usize>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub points: Vec<FixedPoint>,
    pub seeds: Vec<SeedOutcome>,
}

impl FixedPointResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fixed points serialise")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointOptions {
    /// `||F||_inf` threshold for quasi-stationarity.
    pub quasi_tol: f64,
    /// Consecutive accepted steps below `quasi_tol`.
    pub sustained_steps: usize,
    pub t_max: f64,
    pub max_newton: usize,
    /// Largest accepted `||F||_inf` after polishing.
    pub residual_tol: f64,
    pub dedup_radius: f64,
    /// `|Re lambda|` below this is marginal.
    pub marginal: f64,
    pub step: StepControl,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            quasi_tol: 1e-6,
            sustained_steps: 10,
            t_max: 1e5,
            max_newton: 100,
            residual_tol: 1e-9,
            dedup_radius: 1e-6,
            marginal: 1e-8,
            // near a stiff equilibrium the explicit steps sit at the stability
            // limit, where |F| jitters at about rtol times the stiffness
            step: StepControl {
                atol: 1e-12,
                rtol: 1e-10,
                ..StepControl::default()
            },
        }
    }
}

/// Orthonormal rows spanning the first integrals and an orthonormal basis
/// (columns) of the leaf tangent space.
pub(crate) fn leaf_frames(net: &ReactionNetwork) -> (DMatrix<f64>, DMatrix<f64>) {
    let v = net.num_species();
    let laws = ode_first_integrals(net);
    let mut h = DMatrix::from_fn(laws.len(), v, |i, j| laws[i][j] as f64);
    // Gram-Schmidt on the rows (the integer basis is independent)
    for i in 0..h.nrows() {
        for j in 0..i {
            let d = h.row(i).dot(&h.row(j));
            let rj = h.row(j).clone_owned();
            let ri = h.row(i) - rj * d;
            h.row_mut(i).copy_from(&ri);
        }
        let n = h.row(i).norm();
        h.row_mut(i).scale_mut(1.0 / n);
    }
    let proj = DMatrix::identity(v, v) - h.transpose() * &h;
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<usize> = (0..v).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let basis = DMatrix::from_fn(v, cols.len(), |r, c| eig.eigenvectors[(r, cols[c])]);
    (h, basis)
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, y| m.max(y.abs()))
}

fn newton(
    net: &ReactionNetwork,
    h: &DMatrix<f64>,
    start: &[f64],
    anchor: &[f64],
    opts: &FixedPointOptions,
) -> Result<Vec<f64>, String> {
    let v = start.len();
    let k = h.nrows();
    let target = h * DVector::from_column_slice(anchor);
    let mut c = start.to_vec();
    for _ in 0..opts.max_newton {
        let f = net.ode_rhs(&c);
        let j = net.jacobian(&c);
        let mut a = DMatrix::zeros(v + k, v);
        a.rows_mut(0, v).copy_from(&j);
        a.rows_mut(v, k).copy_from(h);
        let cv = DVector::from_column_slice(&c);
        let mut rhs = DVector::zeros(v + k);
        for i in 0..v {
            rhs[i] = -f[i];
        }
        let hc = h * &cv - &target;
        for i in 0..k {
            rhs[v + i] = -hc[i];
        }
        let delta = a
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| format!("least-squares solve failed: {e}"))?;
        for (ci, d) in c.iter_mut().zip(delta.iter()) {
            *ci += d;
        }
        if c.iter().any(|x| !x.is_finite()) || max_abs(&c) > opts.step.blowup {
            return Err("Newton iteration diverged".into());
        }
        if delta.amax() <= 1e-13 * (1.0 + max_abs(&c)) {
            let residual = max_abs(&net.ode_rhs(&c));
            if residual > opts.residual_tol {
                return Err(format!("Newton stalled with residual {residual:e}"));
            }
            if c.iter().any(|&x| x < -1e-9) {
                return Err("Newton converged outside the non-negative orthant".into());
            }
            c.iter_mut().for_each(|x| *x = x.max(0.0));
            return Ok(c);
        }
    }
    Err(format!("Newton did not converge in {} iterations", opts.max_newton))
}

fn classify(
    net: &ReactionNetwork,
    basis: &DMatrix<f64>,
    c: &[f64],
    marginal: f64,
) -> (Stability, Vec<(f64, f64)>) {
    let j = basis.transpose() * net.jacobian(c) * basis;
    let ev: Vec<(f64, f64)> = if j.nrows() == 0 {
        Vec::new()
    } else {
        j.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
    };
    let stability = if ev.iter().any(|(re, _)| *re > marginal) {
        Stability::Unstable
    } else if ev.iter().all(|(re, _)| *re < -marginal) {
        Stability::Stable
    } else {
        Stability::Marginal
    };
    (stability, ev)
}

struct SeedRun {
    basin: Option<Vec<f64>>,
    newton: Option<Vec<f64>>,
    diagnostics: Vec<String>,
}

fn run_seed(
    net: &ReactionNetwork,
    h: &DMatrix<f64>,
    seed: &[f64],
    opts: &FixedPointOptions,
) -> SeedRun {
    let mut out = SeedRun {
        basin: None,
        newton: None,
        diagnostics: Vec::new(),
    };
    let mut below = 0usize;
    let mut rhs = vec![0.0; seed.len()];
    let integrated = integrate_with(
        |c, dc| net.ode_rhs_into(c, dc),
        seed,
        0.0,
        &[opts.t_max],
        &opts.step,
        |_, c| {
            net.ode_rhs_into(c, &mut rhs);
            if max_abs(&rhs) < opts.quasi_tol {
                below += 1;
            } else {
                below = 0;
            }
            below >= opts.sustained_steps
        },
    );
    match integrated {
        Ok(tr) => {
            if below < opts.sustained_steps {
                out.diagnostics
                    .push(format!("not quasi-stationary by t = {}", opts.t_max));
            }
            match newton(net, h, tr.last(), seed, opts) {
                Ok(c) => out.basin = Some(c),
                Err(e) => out.diagnostics.push(format!("polish: {e}")),
            }
        }
        Err(e) => out.diagnostics.push(format!("integration: {e}")),
    }
    match newton(net, h, seed, seed, opts) {
        Ok(c) => out.newton = Some(c),
        Err(e) => out.diagnostics.push(format!("direct Newton: {e}")),
    }
    out
}

/// Locates fixed points reachable from `seeds`; failures are recorded per
/// seed and never abort the search.
pub fn find_fixed_points(
    net: &ReactionNetwork,
    seeds: &[Vec<f64>],
    opts: &FixedPointOptions,
) -> Result<FixedPointResult, KineticsError> {
    for s in seeds {
        check_concentrations(net, s)?;
    }
    let (h, basis) = leaf_frames(net);
    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|s| run_seed(net, &h, s, opts))
        .collect();
    let mut points: Vec<FixedPoint> = Vec::new();
    let mut intern = |c: Vec<f64>| -> usize {
        if let Some(i) = points.iter().position(|p| {
            p.c.iter()
                .zip(&c)
                .all(|(a, b)| (a - b).abs() <= opts.dedup_radius)
        }) {
            return i;
        }
        let (stability, eigenvalues) = classify(net, &basis, &c, opts.marginal);
        let residual = max_abs(&net.ode_rhs(&c));
        points.push(FixedPoint {
            c,
            stability,
            eigenvalues,
            residual,
        });
        points.len() - 1
    };
    let mut outcomes = Vec::with_capacity(seeds.len());
    for (seed, run) in seeds.iter().zip(runs) {
        let basin = run.basin.map(&mut intern);
        let newton = run.newton.map(&mut intern);
        outcomes.push(SeedOutcome {
            seed: seed.clone(),
            basin,
            newton,
            diagnostics: run.diagnostics,
        });
    }
    Ok(FixedPointResult {
        points,
        seeds: outcomes,
    })
}
