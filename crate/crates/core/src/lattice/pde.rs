//! Deterministic reference solution of the macroscopic transport equation.
//!
//! Finite volumes on a periodic grid: first-order upwind advection, the
//! standard three-point Laplacian, and the reaction term `F(c)` evaluated
//! cell by cell. Time stepping is the two-stage strong-stability-preserving
//! Runge-Kutta (Heun) scheme, landing exactly on every requested time.

use serde::{Deserialize, Serialize};

use super::{Field, LatticeConfig, LatticeError, Profile, Scaling};
use crate::kinetics::ClipEvent;
use crate::model::ReactionNetwork;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeGrid {
    /// Cells per axis covering the macroscopic domain of the lattice.
    pub cells: Vec<usize>,
    /// Fixed time step; chosen from the stability limit when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_safety() -> f64 {
    0.4
}

impl PdeGrid {
    pub fn new(cells: Vec<usize>) -> Self {
        Self {
            cells,
            dt: None,
            safety: default_safety(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub fields: Vec<Field<f64>>,
    pub cells: Vec<usize>,
    pub spacing: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
    /// Largest stable step for the explicit scheme on this grid.
    pub dt_limit: f64,
    pub clip_events: Vec<ClipEvent>,
}

impl PdeSolution {
    /// Cell centres sit at `(i + 1/2) h` along each axis.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let origin: Vec<f64> = self.spacing.iter().map(|h| 0.5 * h).collect();
        super::fields_csv(&self.fields, &self.cells, &self.spacing, &origin, names)
    }
}

/// Per-species advection velocity and diffusion coefficient along each axis.
pub fn transport_coefficients(cfg: &LatticeConfig) -> Vec<Vec<(f64, f64)>> {
    cfg.jump_rates
        .iter()
        .map(|axes| {
            axes.iter()
                .enumerate()
                .map(|(a, r)| match (cfg.scaling, a) {
                    (Scaling::Euler, _) => (r.drift(), 0.0),
                    (Scaling::Diffusive, _) => (0.0, r.diffusion()),
                    (Scaling::Anisotropic, 0) => (0.0, r.diffusion()),
                    (Scaling::Anisotropic, _) => (r.drift(), 0.0),
                })
                .collect()
        })
        .collect()
}

struct Stencil {
    cells: Vec<usize>,
    h: Vec<f64>,
    coeffs: Vec<Vec<(f64, f64)>>,
    v: usize,
}

impl Stencil {
    fn shift(&self, i: usize, axis: usize, plus: bool) -> usize {
        let stride: usize = self.cells[..axis].iter().product();
        let n = self.cells[axis];
        let x = (i / stride) % n;
        let x2 = if plus { (x + 1) % n } else { (x + n - 1) % n };
        i + x2 * stride - x * stride
    }

    fn rhs(&self, net: &ReactionNetwork, c: &[f64], out: &mut [f64]) {
        let v = self.v;
        let total: usize = self.cells.iter().product();
        let mut f = vec![0.0; v];
        for i in 0..total {
            net.ode_rhs_into(&c[i * v..(i + 1) * v], &mut f);
            for s in 0..v {
                let ci = c[i * v + s];
                let mut d = f[s];
                for (a, &(u, diff)) in self.coeffs[s].iter().enumerate() {
                    if u == 0.0 && diff == 0.0 {
                        continue;
                    }
                    let lo = c[self.shift(i, a, false) * v + s];
                    let hi = c[self.shift(i, a, true) * v + s];
                    let h = self.h[a];
                    if u > 0.0 {
                        d -= u * (ci - lo) / h;
                    } else if u < 0.0 {
                        d -= u * (hi - ci) / h;
                    }
                    d += diff * (hi - 2.0 * ci + lo) / (h * h);
                }
                out[i * v + s] = d;
            }
        }
    }
}

/// Solves the macroscopic limit of `cfg` from `profiles` and reports the
/// cell values at each time of `tau_grid`.
pub fn reference_pde(
    net: &ReactionNetwork,
    cfg: &LatticeConfig,
    profiles: &[Profile],
    tau_grid: &[f64],
    grid: &PdeGrid,
) -> Result<PdeSolution, LatticeError> {
    cfg.validate(net)?;
    let v = net.num_species();
    if profiles.len() != v {
        return Err(LatticeError::Config("one profile per species is required".into()));
    }
    if grid.cells.len() != cfg.dimension || grid.cells.iter().any(|&n| n == 0) {
        return Err(LatticeError::Config("grid needs one positive cell count per axis".into()));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) || tau_grid.iter().any(|&t| t < 0.0) {
        return Err(LatticeError::Config("tau grid must be increasing and non-negative".into()));
    }
    let h: Vec<f64> = (0..cfg.dimension)
        .map(|a| cfg.macro_length(a) / grid.cells[a] as f64)
        .collect();
    let st = Stencil {
        cells: grid.cells.clone(),
        h: h.clone(),
        coeffs: transport_coefficients(cfg),
        v,
    };
    let total: usize = grid.cells.iter().product();
    let mut c = Vec::with_capacity(total * v);
    for i in 0..total {
        let mut rest = i;
        let x: Vec<f64> = grid
            .cells
            .iter()
            .zip(&h)
            .map(|(&n, &hh)| {
                let k = rest % n;
                rest /= n;
                (k as f64 + 0.5) * hh
            })
            .collect();
        c.extend(profiles.iter().map(|p| p.eval(&x)));
    }

    // explicit stability: transport rate plus the stiffest reaction row
    let transport = st
        .coeffs
        .iter()
        .map(|axes| {
            axes.iter()
                .zip(&h)
                .map(|(&(u, d), &hh)| u.abs() / hh + 2.0 * d / (hh * hh))
                .sum::<f64>()
        })
        .fold(0.0f64, f64::max);
    let reaction = (0..total)
        .map(|i| {
            let j = net.jacobian(&c[i * v..(i + 1) * v]);
            (0..v)
                .map(|r| j.row(r).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0f64, f64::max)
        })
        .fold(0.0f64, f64::max);
    let dt_limit = 1.0 / (transport + reaction).max(f64::MIN_POSITIVE);
    let dt = match grid.dt {
        Some(dt) if dt > dt_limit || dt <= 0.0 => {
            return Err(LatticeError::Cfl { dt, limit: dt_limit })
        }
        Some(dt) => dt,
        None => grid.safety * dt_limit,
    };

    let mut sol = PdeSolution {
        fields: Vec::with_capacity(tau_grid.len()),
        cells: grid.cells.clone(),
        spacing: h,
        dt,
        steps: 0,
        dt_limit,
        clip_events: Vec::new(),
    };
    let mut k1 = vec![0.0; c.len()];
    let mut k2 = vec![0.0; c.len()];
    let mut stage = vec![0.0; c.len()];
    let mut t = 0.0;
    for &target in tau_grid {
        while target - t > 1e-12 * target.max(1.0) {
            let step = dt.min(target - t);
            st.rhs(net, &c, &mut k1);
            for i in 0..c.len() {
                stage[i] = c[i] + step * k1[i];
            }
            st.rhs(net, &stage, &mut k2);
            for i in 0..c.len() {
                c[i] = 0.5 * (c[i] + stage[i] + step * k2[i]);
            }
            t += step;
            sol.steps += 1;
            for (i, x) in c.iter_mut().enumerate() {
                if *x < 0.0 {
                    sol.clip_events.push(ClipEvent {
                        t,
                        species: i % v,
                        value: *x,
                    });
                    *x = 0.0;
                }
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(LatticeError::Config(format!("solution diverged at tau = {t}")));
            }
        }
        t = target;
        sol.fields.push(Field {
            tau: target,
            values: c.clone(),
        });
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_network;
    use crate::kinetics::{integrate, StepControl};
    use crate::lattice::AxisRates;

    fn diffusive(extent: usize, v: usize) -> LatticeConfig {
        LatticeConfig {
            dimension: 1,
            extent: vec![extent],
            jump_rates: vec![vec![AxisRates { plus: 0.5, minus: 0.5 }]; v],
            epsilon: 0.1,
            scaling: Scaling::Diffusive,
        }
    }

    #[test]
    fn uniform_profile_follows_the_ode() {
        let net = parse_network("A <=> B @ 2, 1\n2 A -> 0 @ 0.5\n0 -> A @ 1").unwrap();
        let cfg = diffusive(20, 2);
        let prof = [Profile::Constant { value: 1.5 }, Profile::Constant { value: 0.2 }];
        let taus = [0.5, 1.0, 2.0];
        let pde = reference_pde(&net, &cfg, &prof, &taus, &PdeGrid::new(vec![50])).unwrap();
        let ode = integrate(&net, &[1.5, 0.2], 2.0, &taus, &StepControl::default()).unwrap();
        for (f, y) in pde.fields.iter().zip(&ode.states) {
            for cell in f.values.chunks(2) {
                for (a, b) in cell.iter().zip(y) {
                    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn heat_kernel_variance_grows_linearly() {
        let net = ReactionNetwork::new(&["A"]).unwrap();
        let mut cfg = diffusive(400, 1);
        cfg.epsilon = 0.05;
        let prof = [Profile::Gaussian {
            base: 0.0,
            height: 1.0,
            center: vec![10.0],
            width: 0.5,
        }];
        let sol = reference_pde(&net, &cfg, &prof, &[0.0, 1.0, 2.0], &PdeGrid::new(vec![800])).unwrap();
        let var = |f: &Field<f64>| {
            let xs: Vec<f64> = (0..800).map(|i| (i as f64 + 0.5) * sol.spacing[0]).collect();
            let mass: f64 = f.values.iter().sum();
            let mean: f64 = xs.iter().zip(&f.values).map(|(x, c)| x * c).sum::<f64>() / mass;
            xs.iter()
                .zip(&f.values)
                .map(|(x, c)| (x - mean).powi(2) * c)
                .sum::<f64>()
                / mass
        };
        let v: Vec<f64> = sol.fields.iter().map(var).collect();
        assert!((v[1] - v[0] - 1.0).abs() < 1e-3, "{v:?}");
        assert!((v[2] - v[1] - 1.0).abs() < 1e-3, "{v:?}");
    }

    #[test]
    fn advection_translates_profiles() {
        let net = ReactionNetwork::new(&["A"]).unwrap();
        let cfg = LatticeConfig {
            dimension: 1,
            extent: vec![40],
            jump_rates: vec![vec![AxisRates { plus: 1.0, minus: 0.0 }]],
            epsilon: 0.1,
            scaling: Scaling::Euler,
        };
        let prof = [Profile::Sine {
            mean: 1.0,
            amplitude: 0.5,
            period: 4.0,
            phase: 0.0,
            axis: 0,
        }];
        let sol = reference_pde(&net, &cfg, &prof, &[1.0], &PdeGrid::new(vec![4000])).unwrap();
        for (i, c) in sol.fields[0].values.iter().enumerate() {
            let x = (i as f64 + 0.5) * sol.spacing[0];
            let exact = prof[0].eval(&[x - 1.0]);
            assert!((c - exact).abs() < 2e-3);
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let net = ReactionNetwork::new(&["A"]).unwrap();
        let cfg = diffusive(10, 1);
        let mut grid = PdeGrid::new(vec![100]);
        grid.dt = Some(1.0);
        let err = reference_pde(&net, &cfg, &[Profile::Constant { value: 1.0 }], &[1.0], &grid);
        assert!(matches!(err, Err(LatticeError::Cfl { .. })));
    }

    #[test]
    fn anisotropic_coefficients() {
        let cfg = LatticeConfig {
            dimension: 2,
            extent: vec![10, 100],
            jump_rates: vec![vec![
                AxisRates { plus: 0.5, minus: 0.5 },
                AxisRates { plus: 0.3, minus: 0.1 },
            ]],
            epsilon: 0.1,
            scaling: Scaling::Anisotropic,
        };
        let c = transport_coefficients(&cfg);
        assert_eq!(c[0][0], (0.0, 0.5));
        assert!((c[0][1].0 - 0.2).abs() < 1e-15 && c[0][1].1 == 0.0);
    }
}
