//! Fluctuations `xi = (n - <n>) / sqrt(M)` extracted from an ensemble.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FluctuationError;
use crate::io::{csv_document, g17};
use crate::ssa::Ensemble;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSeries {
    pub times: Vec<f64>,
    /// `xi[replica][time][species]`.
    pub xi: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "M")]
    pub m: f64,
    pub source_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaggedCovariance {
    pub lag_times: Vec<f64>,
    /// Estimates of `<xi_v(t + lag) xi_w(t)>`, one matrix per lag.
    pub value: Vec<DMatrix<f64>>,
    pub stderr: Vec<DMatrix<f64>>,
    pub replicas: usize,
    pub origins: usize,
}

impl LaggedCovariance {
    /// Long-form CSV `lag,v,w,value,stderr`.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let header: Vec<String> = ["lag", "v", "w", "value", "stderr"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for (k, lag) in self.lag_times.iter().enumerate() {
            for (v, nv) in names.iter().enumerate() {
                for (w, nw) in names.iter().enumerate() {
                    rows.push(vec![
                        g17(*lag),
                        nv.to_string(),
                        nw.to_string(),
                        g17(self.value[k][(v, w)]),
                        g17(self.stderr[k][(v, w)]),
                    ]);
                }
            }
        }
        csv_document(&header, rows)
    }
}

/// Centres every complete replica on the ensemble mean at each sample time
/// and estimates the lagged covariance for lags `0..=max_lag` grid steps,
/// averaging over all time origins at or after `burn_in`.
///
/// Each replica yields its own time-averaged estimate; the reported value is
/// their mean scaled by `R / (R - 1)` (the ensemble mean is estimated from
/// the same replicas), and the standard error is their standard deviation
/// over `sqrt(R)`, which accounts for correlation between time origins.
pub fn empirical_fluctuations(
    ens: &Ensemble,
    burn_in: f64,
    max_lag: usize,
    min_replicas: usize,
) -> Result<(FluctuationSeries, LaggedCovariance), FluctuationError> {
    let done = ens.complete();
    let r = done.len();
    if r < min_replicas.max(2) {
        return Err(FluctuationError::TooFewReplicas {
            got: r,
            min: min_replicas.max(2),
        });
    }
    let grid = &ens.config.sample_grid;
    let nt = grid.len();
    if nt >= 3 {
        let dt = grid[1] - grid[0];
        if grid
            .windows(2)
            .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0))
        {
            return Err(FluctuationError::NonUniformGrid);
        }
    }
    let start = grid.iter().position(|&t| t >= burn_in).unwrap_or(nt);
    if start + max_lag >= nt {
        return Err(FluctuationError::Input(format!(
            "no time origins after burn-in {burn_in} leave room for lag {max_lag}"
        )));
    }
    let m = ens.config.m;
    let mean = ens.mean_counts();
    let sqrt_m = m.sqrt();
    let xi: Vec<Vec<Vec<f64>>> = done
        .iter()
        .map(|tr| {
            tr.counts
                .iter()
                .zip(&mean)
                .map(|(n, mu)| {
                    n.iter()
                        .zip(mu)
                        .map(|(x, y)| (*x as f64 - y) / sqrt_m)
                        .collect()
                })
                .collect()
        })
        .collect();
    let v = mean.first().map_or(0, Vec::len);
    let correction = r as f64 / (r as f64 - 1.0);
    let mut value = Vec::with_capacity(max_lag + 1);
    let mut stderr = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let origins = nt - lag - start;
        let per_replica: Vec<DMatrix<f64>> = xi
            .iter()
            .map(|x| {
                let mut acc = DMatrix::zeros(v, v);
                for t in start..start + origins {
                    for a in 0..v {
                        for b in 0..v {
                            acc[(a, b)] += x[t + lag][a] * x[t][b];
                        }
                    }
                }
                acc / origins as f64
            })
            .collect();
        let mean_est = per_replica.iter().fold(DMatrix::zeros(v, v), |s, p| s + p) / r as f64;
        let var = per_replica
            .iter()
            .fold(DMatrix::zeros(v, v), |s, p| s + (p - &mean_est).map(|x| x * x))
            / (r as f64 - 1.0);
        value.push(&mean_est * correction);
        stderr.push(var.map(|x| (x / r as f64).sqrt() * correction));
    }
    let dt = if nt >= 2 { grid[1] - grid[0] } else { 0.0 };
    let series = FluctuationSeries {
        times: grid.clone(),
        xi,
        m,
        source_seed: ens.config.seed,
    };
    let cov = LaggedCovariance {
        lag_times: (0..=max_lag).map(|k| k as f64 * dt).collect(),
        value,
        stderr,
        replicas: r,
        origins: nt - start,
    };
    Ok((series, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_network;
    use crate::ssa::{run_ensemble, InitialLaw, SimConfig};

    #[test]
    fn centring_gives_zero_mean() {
        let net = parse_network("A <=> B @ 1, 1").unwrap();
        let cfg = SimConfig::uniform(100.0, 4.0, 40, 3);
        let ens = run_ensemble(&net, &InitialLaw::Poisson { b: vec![0.5, 0.5] }, &cfg, 32, None)
            .unwrap();
        let (series, cov) = empirical_fluctuations(&ens, 1.0, 3, 8).unwrap();
        for t in 0..series.times.len() {
            for v in 0..2 {
                let s: f64 = series.xi.iter().map(|x| x[t][v]).sum();
                assert!(s.abs() < 1e-9);
            }
        }
        assert_eq!(cov.value.len(), 4);
        let csv = cov.to_csv(&["A", "B"]);
        assert!(csv.starts_with("lag,v,w,value,stderr\n0,A,A,"));
        assert_eq!(csv.lines().count(), 1 + 4 * 4);
    }

    #[test]
    fn too_few_replicas() {
        let net = parse_network("A <=> B @ 1, 1").unwrap();
        let cfg = SimConfig::uniform(10.0, 1.0, 10, 3);
        let ens = run_ensemble(&net, &InitialLaw::Deterministic { counts: vec![5, 5] }, &cfg, 4, None)
            .unwrap();
        assert!(matches!(
            empirical_fluctuations(&ens, 0.0, 1, 64),
            Err(FluctuationError::TooFewReplicas { .. })
        ));
    }
}
