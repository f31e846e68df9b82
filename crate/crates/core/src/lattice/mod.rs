//! Reaction networks on a periodic lattice with random-walk transport.
//!
//! Every site carries an independent copy of the network at `M = 1`; each
//! particle of species `v` additionally jumps along axis `a` in the positive
//! or negative direction at rates `lambda_{+a,v}`, `lambda_{-a,v}`. Three
//! space-time scalings connect the lattice to macroscopic variables:
//!
//! | scaling       | space                    | time           | reaction rates |
//! |---------------|--------------------------|----------------|----------------|
//! | `euler`       | `X = eps x`              | `tau = eps t`  | `x eps`        |
//! | `diffusive`   | `X = eps x`              | `tau = eps^2 t`| `x eps^2`      |
//! | `anisotropic` | `X = eps x, Y = eps^2 y` | `tau = eps^2 t`| `x eps^2`      |
//!
//! with limits `dc/dtau = -m . grad c + F(c)` (euler),
//! `dc/dtau = D lap c + F(c)` (diffusive) and
//! `dc/dtau = -m_y dc/dY + D_x d2c/dX2 + F(c)` (anisotropic), where
//! `m = lambda_+ - lambda_-` and `D = (lambda_+ + lambda_-) / 2` per axis.

pub mod pde;
pub mod scaling;
pub mod sim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{csv_document, g17};
use crate::model::ReactionNetwork;

pub use pde::{reference_pde, PdeGrid, PdeSolution};
pub use scaling::{scaling_convergence, ScalingOptions, ScalingRow, ScalingTable};
pub use sim::{initial_counts, mean_fields, run_lattice_ensemble, simulate_lattice, LatticeRun};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("{0}")]
    Config(String),
    #[error("event budget of {0} exceeded")]
    EventBudget(u64),
    #[error("time step {dt} violates the stability limit {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("total event rate is not finite")]
    RateOverflow,
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    Euler,
    Diffusive,
    Anisotropic,
}

/// Jump rates of one species along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRates {
    pub plus: f64,
    pub minus: f64,
}

impl AxisRates {
    pub fn drift(&self) -> f64 {
        self.plus - self.minus
    }

    pub fn diffusion(&self) -> f64 {
        0.5 * (self.plus + self.minus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub dimension: usize,
    /// Sites per axis.
    pub extent: Vec<usize>,
    /// `jump_rates[v][axis]`.
    pub jump_rates: Vec<Vec<AxisRates>>,
    pub epsilon: f64,
    pub scaling: Scaling,
}

impl LatticeConfig {
    pub fn sites(&self) -> usize {
        self.extent.iter().product()
    }

    /// Macroscopic length of one lattice spacing along `axis`.
    pub fn axis_scale(&self, axis: usize) -> f64 {
        match (self.scaling, axis) {
            (Scaling::Anisotropic, 1) => self.epsilon * self.epsilon,
            _ => self.epsilon,
        }
    }

    /// Microscopic time per unit of macroscopic time.
    pub fn time_scale(&self) -> f64 {
        match self.scaling {
            Scaling::Euler => 1.0 / self.epsilon,
            Scaling::Diffusive | Scaling::Anisotropic => 1.0 / (self.epsilon * self.epsilon),
        }
    }

    /// Factor applied to every reaction propensity.
    pub fn reaction_rate_scale(&self) -> f64 {
        match self.scaling {
            Scaling::Euler => self.epsilon,
            Scaling::Diffusive | Scaling::Anisotropic => self.epsilon * self.epsilon,
        }
    }

    /// Drift vector `m_v` of species `v`.
    pub fn drift(&self, v: usize) -> Vec<f64> {
        self.jump_rates[v].iter().map(AxisRates::drift).collect()
    }

    pub fn macro_length(&self, axis: usize) -> f64 {
        self.extent[axis] as f64 * self.axis_scale(axis)
    }

    /// Macroscopic coordinates of the site with integer coordinates `x`.
    pub fn macro_coords(&self, x: &[usize]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(a, &xi)| xi as f64 * self.axis_scale(a))
            .collect()
    }

    pub fn site_coords(&self, site: usize) -> Vec<usize> {
        let mut rest = site;
        self.extent
            .iter()
            .map(|&e| {
                let x = rest % e;
                rest /= e;
                x
            })
            .collect()
    }

    pub fn validate(&self, net: &ReactionNetwork) -> Result<(), LatticeError> {
        let d = self.dimension;
        if !(1..=2).contains(&d) {
            return Err(LatticeError::Dimension(d));
        }
        let bad = |m: &str| Err(LatticeError::Config(m.to_string()));
        if self.extent.len() != d || self.extent.iter().any(|&e| e == 0) {
            return bad("extent needs one positive entry per axis");
        }
        if self.jump_rates.len() != net.num_species() || self.jump_rates.iter().any(|r| r.len() != d) {
            return bad("jump_rates needs one entry per species and axis");
        }
        if self
            .jump_rates
            .iter()
            .flatten()
            .any(|r| !(r.plus >= 0.0 && r.minus >= 0.0 && r.plus.is_finite() && r.minus.is_finite()))
        {
            return bad("jump rates must be non-negative and finite");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("epsilon must lie in (0, 1]");
        }
        let drifts: Vec<Vec<f64>> = (0..net.num_species()).map(|v| self.drift(v)).collect();
        match self.scaling {
            Scaling::Euler => {
                if drifts.iter().flatten().all(|&m| m == 0.0) {
                    return bad("euler scaling needs a non-zero drift");
                }
            }
            Scaling::Diffusive => {
                if drifts.iter().flatten().any(|&m| m != 0.0) {
                    return bad("diffusive scaling needs zero drift for every species");
                }
            }
            Scaling::Anisotropic => {
                if d != 2 {
                    return bad("anisotropic scaling needs a two-dimensional lattice");
                }
                if drifts.iter().any(|m| m[0] != 0.0 || m[1] == 0.0) {
                    return bad("anisotropic scaling needs m_x = 0 and m_y != 0 for every species");
                }
            }
        }
        Ok(())
    }
}

/// Smooth initial concentration profile of one species in macroscopic
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `mean + amplitude sin(2 pi X_axis / period + phase)`.
    Sine {
        mean: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `high` on `[start, end)` along `axis`, `low` elsewhere.
    Step {
        low: f64,
        high: f64,
        start: f64,
        end: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `base + height exp(-|X - center|^2 / (2 width^2))`.
    Gaussian {
        base: f64,
        height: f64,
        center: Vec<f64>,
        width: f64,
    },
}

impl Profile {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = match self {
            Profile::Constant { value } => *value,
            Profile::Sine {
                mean,
                amplitude,
                period,
                phase,
                axis,
            } => mean + amplitude * (std::f64::consts::TAU * x[*axis] / period + phase).sin(),
            Profile::Step {
                low,
                high,
                start,
                end,
                axis,
            } => {
                if x[*axis] >= *start && x[*axis] < *end {
                    *high
                } else {
                    *low
                }
            }
            Profile::Gaussian {
                base,
                height,
                center,
                width,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                base + height * (-r2 / (2.0 * width * width)).exp()
            }
        };
        v.max(0.0)
    }
}

/// Per-site, per-species values at one macroscopic time; `values[site * V + v]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field<T> {
    pub tau: f64,
    pub values: Vec<T>,
}

/// Long-form CSV `tau,X[,Y],species,value` for fields on a grid whose cell
/// `i` along `axis` sits at `origin[axis] + i * spacing[axis]`.
pub fn fields_csv<T: Copy + Into<f64>>(
    fields: &[Field<T>],
    extent: &[usize],
    spacing: &[f64],
    origin: &[f64],
    names: &[&str],
) -> String {
    let mut header = vec!["tau".to_string(), "X".to_string()];
    if extent.len() == 2 {
        header.push("Y".into());
    }
    header.push("species".into());
    header.push("value".into());
    let v = names.len();
    let mut rows = Vec::new();
    for f in fields {
        let sites = f.values.len() / v.max(1);
        for site in 0..sites {
            let mut rest = site;
            let coords: Vec<f64> = extent
                .iter()
                .enumerate()
                .map(|(a, &e)| {
                    let i = rest % e;
                    rest /= e;
                    origin[a] + i as f64 * spacing[a]
                })
                .collect();
            for (s, name) in names.iter().enumerate() {
                let mut row = vec![g17(f.tau)];
                row.extend(coords.iter().map(|c| g17(*c)));
                row.push(name.to_string());
                row.push(g17(f.values[site * v + s].into()));
                rows.push(row);
            }
        }
    }
    csv_document(&header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_network;

    fn cfg(scaling: Scaling, rates: Vec<Vec<AxisRates>>, dim: usize) -> LatticeConfig {
        LatticeConfig {
            dimension: dim,
            extent: vec![10; dim],
            jump_rates: rates,
            epsilon: 0.1,
            scaling,
        }
    }

    #[test]
    fn scaling_rules_are_checked() {
        let net = parse_network("A <=> B @ 1, 1").unwrap();
        let drift = AxisRates { plus: 0.5, minus: 0.0 };
        let sym = AxisRates { plus: 0.5, minus: 0.5 };
        assert!(cfg(Scaling::Euler, vec![vec![drift]; 2], 1).validate(&net).is_ok());
        assert!(cfg(Scaling::Euler, vec![vec![sym]; 2], 1).validate(&net).is_err());
        assert!(cfg(Scaling::Diffusive, vec![vec![sym]; 2], 1).validate(&net).is_ok());
        assert!(cfg(Scaling::Diffusive, vec![vec![drift]; 2], 1).validate(&net).is_err());
        assert!(cfg(Scaling::Anisotropic, vec![vec![sym, drift]; 2], 2).validate(&net).is_ok());
        assert!(cfg(Scaling::Anisotropic, vec![vec![drift, drift]; 2], 2).validate(&net).is_err());
        assert!(cfg(Scaling::Anisotropic, vec![vec![sym]; 2], 1).validate(&net).is_err());
    }

    #[test]
    fn scales_per_scaling() {
        let c = cfg(Scaling::Anisotropic, vec![], 2);
        assert!((c.axis_scale(0) - 0.1).abs() < 1e-15);
        assert!((c.axis_scale(1) - 0.01).abs() < 1e-15);
        assert!((c.time_scale() - 100.0).abs() < 1e-9);
        assert!((c.reaction_rate_scale() - 0.01).abs() < 1e-15);
        assert_eq!(c.site_coords(23), vec![3, 2]);
    }

    #[test]
    fn profile_evaluation() {
        let p = Profile::Sine {
            mean: 1.0,
            amplitude: 0.5,
            period: 4.0,
            phase: 0.0,
            axis: 0,
        };
        assert!((p.eval(&[1.0]) - 1.5).abs() < 1e-15);
        let s = Profile::Step {
            low: 0.0,
            high: 2.0,
            start: 1.0,
            end: 2.0,
            axis: 0,
        };
        assert_eq!(s.eval(&[1.5]), 2.0);
        assert_eq!(s.eval(&[2.0]), 0.0);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"kind\":\"sine\""));
    }

    #[test]
    fn csv_layout() {
        let f = vec![Field {
            tau: 0.5,
            values: vec![1.0f64, 2.0, 3.0, 4.0],
        }];
        let csv = fields_csv(&f, &[2], &[0.5], &[0.0], &["A", "B"]);
        assert_eq!(
            csv,
            "tau,X,species,value\n0.5,0,A,1\n0.5,0,B,2\n0.5,0.5,A,3\n0.5,0.5,B,4\n"
        );
    }
}
