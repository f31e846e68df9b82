//! Mean-field kinetics: integration of `dc/dt = F(c)`, fixed points,
//! Boltzmann entropy and the Poisson Kullback-Leibler divergence.

pub mod fixed_points;
pub mod ode;
pub mod schloegl;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact;
use crate::io::{csv_document, g17};
use crate::model::ReactionNetwork;
use crate::reversibility::PoissonParams;

pub use fixed_points::{find_fixed_points, FixedPoint, FixedPointOptions, FixedPointResult, Stability};
pub use ode::{integrate_with, ClipEvent, StepControl, Trajectory};
pub use schloegl::{schloegl_classify, schloegl_network, SchloeglCase, SchloeglClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error("concentration vector has {got} entries, network has {expected} species")]
    Dimension { got: usize, expected: usize },
    #[error("concentrations must be non-negative and finite")]
    NegativeConcentration,
    #[error("end time must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("sample times must be strictly increasing and not before the start")]
    SampleTimes,
    #[error("trajectory blew up at t = {t} (max concentration {norm:e})")]
    BlowUp { t: f64, norm: f64 },
    #[error("step size underflow at t = {t} (h = {h:e}); the system is probably stiff")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64 },
    #[error("non-finite error estimate at t = {t}")]
    NonFinite { t: f64 },
    #[error("all four Schloegl rate constants are zero")]
    SchloeglAllZero,
    #[error("rate constants must be non-negative and finite")]
    NegativeRate,
}

fn check_concentrations(net: &ReactionNetwork, c: &[f64]) -> Result<(), KineticsError> {
    if c.len() != net.num_species() {
        return Err(KineticsError::Dimension {
            got: c.len(),
            expected: net.num_species(),
        });
    }
    if c.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(KineticsError::NegativeConcentration);
    }
    Ok(())
}

/// Integrates the kinetic equations from `c0` and records the state at each
/// time of `samples` (all in `[0, t_end]`; `t_end` is always appended when
/// missing).
pub fn integrate(
    net: &ReactionNetwork,
    c0: &[f64],
    t_end: f64,
    samples: &[f64],
    ctrl: &StepControl,
) -> Result<Trajectory, KineticsError> {
    check_concentrations(net, c0)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(KineticsError::Horizon(t_end));
    }
    if samples.iter().any(|&s| s > t_end) {
        return Err(KineticsError::SampleTimes);
    }
    let mut grid = samples.to_vec();
    if grid.last() != Some(&t_end) {
        grid.push(t_end);
    }
    integrate_with(|c, dc| net.ode_rhs_into(c, dc), c0, 0.0, &grid, ctrl, |_, _| false)
}

/// Evenly spaced sample grid `0, dt, ..., t_end` with `n` intervals.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

/// Integer basis of the first integrals of the kinetic equations, i.e.
/// vectors orthogonal to every net reaction vector including inputs and
/// outputs.
pub fn ode_first_integrals(net: &ReactionNetwork) -> Vec<Vec<i64>> {
    let rows: Vec<Vec<i64>> = net.reactions().iter().map(|r| r.net()).collect();
    exact::integer_nullspace(&rows, net.num_species())
}

/// Boltzmann entropy `sum_v c_v ln(e c0_v / c_v)`; zero entries contribute 0.
pub fn entropy(c: &[f64], c0: &[f64]) -> f64 {
    c.iter()
        .zip(c0)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, r)| x * (1.0 + (r / x).ln()))
        .sum()
}

/// Kullback-Leibler divergence of the product-Poisson law with means `M p`
/// from the one with means `M q`, `sum_v M (p ln(p/q) + q - p)`.
pub fn kl_poisson(q: &PoissonParams, p: &PoissonParams, m: f64) -> f64 {
    kl_poisson_raw(q.as_slice(), p.as_slice(), m)
}

/// As [`kl_poisson`] on plain slices; `p_v = 0` contributes `M q_v`.
pub fn kl_poisson_raw(q: &[f64], p: &[f64], m: f64) -> f64 {
    m * q
        .iter()
        .zip(p)
        .map(|(&qv, &pv)| {
            let log_term = if pv > 0.0 { pv * (pv / qv).ln() } else { 0.0 };
            log_term + qv - pv
        })
        .sum::<f64>()
}

/// `-M (H(c, c_bar) - sum c_bar)`, which equals the divergence of the
/// Poisson law at `c` from the one at `c_bar`.
pub fn neg_m_h_tilde(c: &[f64], c_bar: &[f64], m: f64) -> f64 {
    -m * (entropy(c, c_bar) - c_bar.iter().sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySeries {
    pub times: Vec<f64>,
    pub h: Vec<f64>,
    pub reference: Vec<f64>,
}

impl EntropySeries {
    pub fn from_trajectory(traj: &Trajectory, reference: &[f64]) -> Self {
        Self {
            times: traj.times.clone(),
            h: traj.states.iter().map(|c| entropy(c, reference)).collect(),
            reference: reference.to_vec(),
        }
    }

    /// Forward finite-difference slopes between consecutive samples.
    pub fn slopes(&self) -> Vec<f64> {
        self.times
            .windows(2)
            .zip(self.h.windows(2))
            .map(|(t, h)| (h[1] - h[0]) / (t[1] - t[0]))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let header = vec!["t".to_string(), "H".to_string()];
        let rows = self
            .times
            .iter()
            .zip(&self.h)
            .map(|(t, h)| vec![g17(*t), g17(*h)]);
        csv_document(&header, rows)
    }
}
