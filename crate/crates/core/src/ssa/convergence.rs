//! Convergence of `n / M` to the kinetic equations as `M` grows.

use serde::{Deserialize, Serialize};

use super::ensemble::{run_ensemble, InitialLaw};
use super::rng::derive_seed;
use super::{SimConfig, SsaError};
use crate::kinetics::{integrate, StepControl};
use crate::model::{ReactionNetwork, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "M")]
    pub m: f64,
    /// `max_{t, v} |mean n_v(t) / M - c_v(t)|`.
    pub error: f64,
    pub replicas_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln error` against `ln M`.
    pub exponent: f64,
    pub decreasing: bool,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        use crate::io::{csv_document, g17};
        let header = vec!["M".to_string(), "error".to_string(), "replicas".to_string()];
        csv_document(
            &header,
            self.rows
                .iter()
                .map(|r| vec![g17(r.m), g17(r.error), r.replicas_used.to_string()]),
        )
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs one ensemble per scale `M` from `round(M c0)` and compares the
/// ensemble-mean concentration with the kinetic solution on `t_grid`.
pub fn meanfield_convergence(
    net: &ReactionNetwork,
    c0: &[f64],
    m_list: &[f64],
    t_grid: &[f64],
    replicas: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<ConvergenceTable, SsaError> {
    let t_end = *t_grid.last().ok_or(SsaError::Grid)?;
    let ode = integrate(net, c0, t_end, t_grid, &StepControl::default())?;
    let mut rows = Vec::with_capacity(m_list.len());
    for (j, &m) in m_list.iter().enumerate() {
        let init = State::from_concentrations(c0, m).map_err(|e| SsaError::Input(e.to_string()))?;
        let cfg = SimConfig {
            m,
            t_end,
            sample_grid: t_grid.to_vec(),
            seed: derive_seed(seed, "meanfield", j as u64),
            max_events: u64::MAX,
        };
        let law = InitialLaw::Deterministic {
            counts: init.counts,
        };
        let ens = run_ensemble(net, &law, &cfg, replicas, workers)?;
        let mean = ens.mean_counts();
        let mut err = 0.0f64;
        for (mt, ct) in mean.iter().zip(&ode.states) {
            for (x, c) in mt.iter().zip(ct) {
                err = err.max((x / m - c).abs());
            }
        }
        rows.push(ConvergenceRow {
            m,
            error: err,
            replicas_used: ens.complete().len(),
        });
    }
    let lx: Vec<f64> = rows.iter().map(|r| r.m.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
    let exponent = if rows.len() >= 2 { fit_slope(&lx, &ly) } else { f64::NAN };
    let decreasing = rows.windows(2).all(|w| w[1].error < w[0].error);
    Ok(ConvergenceTable {
        rows,
        exponent,
        decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_network;
    use crate::kinetics::uniform_grid;

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = [1.0f64, 10.0, 100.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 10.0, 100.0].iter().map(|v| (v.powf(-0.5)).ln()).collect();
        assert!((fit_slope(&x, &y) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn large_m_single_trajectory_tracks_decay() {
        let net = parse_network("A -> B @ 1").unwrap();
        let grid = uniform_grid(2.0, 10);
        let tab = meanfield_convergence(&net, &[1.0, 0.0], &[1e5], &grid, 1, 3, None).unwrap();
        // 5% of the smallest value e^-2 on the grid
        assert!(tab.rows[0].error < 0.05 * (-2.0f64).exp());
    }

    #[test]
    fn error_decreases_for_isomerisation() {
        let net = parse_network("A <=> B @ 1, 2").unwrap();
        let grid = uniform_grid(3.0, 15);
        let tab =
            meanfield_convergence(&net, &[1.0, 0.0], &[1e2, 1e3, 1e4], &grid, 64, 8, None).unwrap();
        assert!(tab.decreasing, "{tab:?}");
    }
}
