//! Goodness of fit of ensemble marginals to the product-Poisson measure.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use super::ensemble::{run_ensemble, InitialLaw};
use super::{SimConfig, SsaError};
use crate::model::ReactionNetwork;
use crate::reversibility::PoissonParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityOptions {
    /// Family-wise significance level, split across species and times.
    pub alpha: f64,
    /// Largest accepted `|z|` of a factorial-moment check.
    pub z_max: f64,
    /// Minimum expected count per merged bin.
    pub min_expected: f64,
}

impl Default for StationarityOptions {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            z_max: 3.0,
            min_expected: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityEntry {
    pub species: String,
    pub t: f64,
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    /// z-scores of the factorial moments of order 1, 2, 3.
    pub moment_z: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub passed: bool,
    pub per_test_alpha: f64,
    pub replicas: usize,
    pub entries: Vec<StationarityEntry>,
    pub notes: Vec<String>,
}

/// Chi-square statistic of `samples` against `Poisson(mu)` with bins merged
/// until each expects at least `min_expected` observations.
pub fn poisson_chi_square(samples: &[u64], mu: f64, min_expected: f64) -> Option<(f64, usize)> {
    let r = samples.len() as f64;
    let pois = Poisson::new(mu).ok()?;
    let k_max = (mu + 12.0 * mu.sqrt() + 12.0).ceil() as u64;
    let mut observed = vec![0.0; k_max as usize + 1];
    for &s in samples {
        observed[s.min(k_max) as usize] += 1.0;
    }
    let mut expected: Vec<f64> = (0..k_max).map(|k| r * pois.pmf(k)).collect();
    expected.push(r * pois.sf(k_max - 1));
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (ok, ek) in observed.iter().zip(&expected) {
        o += ok;
        e += ek;
        if e >= min_expected {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => bins.push((o, e)),
        }
    }
    if bins.len() < 2 {
        return None;
    }
    let chi2 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    Some((chi2, bins.len() - 1))
}

fn falling(n: u64, k: u32) -> f64 {
    (0..k as u64).map(|j| n.saturating_sub(j) as f64).product()
}

/// z-score of the sample mean of `n (n-1) ... (n-k+1)` against its
/// Poisson value `mu^k`, using the Poisson variance of that statistic.
pub fn factorial_moment_z(samples: &[u64], mu: f64, k: u32) -> f64 {
    let r = samples.len() as f64;
    let mean = samples.iter().map(|&n| falling(n, k)).sum::<f64>() / r;
    let target = mu.powi(k as i32);
    // E[(n)_k^2] = sum_j C(k, j)^2 j! mu^(2k - j)
    let mut second = 0.0;
    let mut binom = 1.0;
    let mut fact = 1.0;
    for j in 0..=k {
        if j > 0 {
            binom = binom * (k - j + 1) as f64 / j as f64;
            fact *= j as f64;
        }
        second += binom * binom * fact * mu.powi((2 * k - j) as i32);
    }
    let var = second - target * target;
    (mean - target) / (var / r).sqrt()
}

/// Starts `replicas` runs from the product-Poisson law at `b` and tests
/// every species marginal at every sample time of `cfg`.
pub fn stationarity_test(
    net: &ReactionNetwork,
    b: &PoissonParams,
    cfg: &SimConfig,
    replicas: usize,
    opts: &StationarityOptions,
    workers: Option<usize>,
) -> Result<StationarityReport, SsaError> {
    let names = net.species_names();
    let tests = (names.len() * cfg.sample_grid.len()).max(1);
    let mut report = StationarityReport {
        passed: true,
        per_test_alpha: opts.alpha / tests as f64,
        replicas,
        entries: Vec::new(),
        notes: Vec::new(),
    };
    if net.num_reactions() == 0 {
        report
            .notes
            .push("network has no reactions; every law is stationary".into());
        return Ok(report);
    }
    let ens = run_ensemble(net, &InitialLaw::poisson(b), cfg, replicas, workers)?;
    let done = ens.complete();
    if done.len() < replicas {
        report
            .notes
            .push(format!("{} replicas failed or were truncated", replicas - done.len()));
    }
    for (ti, &t) in cfg.sample_grid.iter().enumerate() {
        for (v, name) in names.iter().enumerate() {
            let mu = cfg.m * b.b[v];
            let samples: Vec<u64> = done.iter().map(|tr| tr.counts[ti][v]).collect();
            let (chi2, dof) = poisson_chi_square(&samples, mu, opts.min_expected).ok_or_else(|| {
                SsaError::Input(format!(
                    "{} replicas are too few to form two bins of expected count {}",
                    samples.len(),
                    opts.min_expected
                ))
            })?;
            let p_value = ChiSquared::new(dof as f64)
                .map(|d| d.sf(chi2))
                .unwrap_or(f64::NAN);
            let moment_z = [1, 2, 3].map(|k| factorial_moment_z(&samples, mu, k));
            if !(p_value >= report.per_test_alpha) || moment_z.iter().any(|z| z.abs() > opts.z_max)
            {
                report.passed = false;
            }
            report.entries.push(StationarityEntry {
                species: name.to_string(),
                t,
                chi2,
                dof,
                p_value,
                moment_z,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_network;
    use crate::kinetics::schloegl_network;

    #[test]
    fn exact_poisson_samples_pass() {
        use rand_distr::Distribution;
        let mut rng = crate::ssa::rng::stream(4);
        let d = rand_distr::Poisson::new(7.5).unwrap();
        let s: Vec<u64> = (0..5000).map(|_| d.sample(&mut rng) as u64).collect();
        let (chi2, dof) = poisson_chi_square(&s, 7.5, 5.0).unwrap();
        let p = ChiSquared::new(dof as f64).unwrap().sf(chi2);
        assert!(p > 0.001, "p = {p}");
        for k in 1..=3 {
            assert!(factorial_moment_z(&s, 7.5, k).abs() < 4.0);
        }
    }

    #[test]
    fn shifted_samples_fail() {
        let s: Vec<u64> = (0..2000).map(|i| 8 + (i % 3)).collect();
        assert!(factorial_moment_z(&s, 7.0, 1) > 10.0);
    }

    #[test]
    fn balanced_schloegl_is_stationary() {
        let net = schloegl_network(1.0, 2.0, 3.0, 6.0).unwrap();
        let b = PoissonParams::new(vec![0.5]).unwrap();
        let cfg = SimConfig::uniform(40.0, 2.0, 4, 2024);
        let rep = stationarity_test(&net, &b, &cfg, 2000, &StationarityOptions::default(), None)
            .unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn irreversible_decay_drifts() {
        let net = parse_network("A -> B @ 1").unwrap();
        let b = PoissonParams::new(vec![1.0, 1.0]).unwrap();
        let cfg = SimConfig::uniform(30.0, 2.0, 2, 5);
        let rep = stationarity_test(&net, &b, &cfg, 1000, &StationarityOptions::default(), None)
            .unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn no_reactions_is_trivially_stationary() {
        let net = crate::model::ReactionNetwork::new(&["A"]).unwrap();
        let b = PoissonParams::new(vec![1.0]).unwrap();
        let cfg = SimConfig::uniform(10.0, 1.0, 1, 0);
        let rep = stationarity_test(&net, &b, &cfg, 10, &StationarityOptions::default(), None)
            .unwrap();
        assert!(rep.passed && rep.entries.is_empty());
    }
}
