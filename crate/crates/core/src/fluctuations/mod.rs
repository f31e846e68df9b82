//! Linear response around a fixed point `c_bar`.
//!
//! With `lambda = dF/dc(c_bar)` and `beta^-1 = diag(c_bar)`, the equilibrium
//! fluctuations form an Ornstein-Uhlenbeck process with covariance
//! `phi(t) = exp(lambda t) beta^-1`. The kinetic-coefficient matrix is
//! `gamma = lambda beta^-1`; it is symmetric (Onsager relations) when the
//! network is chemically reversible, and the Kubo identity states
//! `int_0^inf -lambda^2 phi(t) dt = gamma`.
//!
//! First integrals make `lambda` singular. They are handled with an
//! orthonormal basis of the leaf tangent space: stability and spectral gaps
//! are computed on `B^T lambda B`.

pub mod empirical;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::matrix_csv;
use crate::kinetics::fixed_points::leaf_frames;
use crate::model::ReactionNetwork;
use crate::quadrature;

pub use empirical::{empirical_fluctuations, FluctuationSeries, LaggedCovariance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluctuationError {
    #[error("fixed point has {got} entries, network has {expected} species")]
    Dimension { got: usize, expected: usize },
    #[error("fixed point component {0} is not strictly positive")]
    ZeroComponent(usize),
    #[error("linearisation is not stable on the leaf (largest real part {0:e})")]
    NotHurwitz(f64),
    #[error("ensemble has {got} usable replicas, at least {min} required")]
    TooFewReplicas { got: usize, min: usize },
    #[error("sample grid must be uniform for lagged covariances")]
    NonUniformGrid,
    #[error("{0}")]
    Input(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub names: Vec<String>,
    pub fixed_point: Vec<f64>,
    /// `lambda_vu = dF_v / dc_u` at the fixed point.
    pub lambda: DMatrix<f64>,
    pub beta_inv: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    /// Orthonormal columns spanning the leaf tangent space.
    pub tangent: DMatrix<f64>,
}

impl Linearization {
    pub fn lambda_csv(&self) -> String {
        matrix_csv(&self.name_refs(), &self.lambda)
    }

    pub fn gamma_csv(&self) -> String {
        matrix_csv(&self.name_refs(), &self.gamma)
    }

    pub fn name_refs(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    /// `B^T lambda B`.
    pub fn reduced_lambda(&self) -> DMatrix<f64> {
        self.tangent.transpose() * &self.lambda * &self.tangent
    }

    /// `min_i -Re mu_i` over the eigenvalues of the reduced matrix;
    /// positive iff the dynamics is stable on the leaf.
    pub fn spectral_gap(&self) -> f64 {
        let r = self.reduced_lambda();
        if r.nrows() == 0 {
            return f64::INFINITY;
        }
        r.complex_eigenvalues()
            .iter()
            .map(|z| -z.re)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn linearize(net: &ReactionNetwork, c_bar: &[f64]) -> Result<Linearization, FluctuationError> {
    let v = net.num_species();
    if c_bar.len() != v {
        return Err(FluctuationError::Dimension {
            got: c_bar.len(),
            expected: v,
        });
    }
    if let Some(i) = c_bar.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(FluctuationError::ZeroComponent(i));
    }
    let lambda = net.jacobian(c_bar);
    let beta_inv = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(c_bar));
    let gamma = &lambda * &beta_inv;
    let (_, tangent) = leaf_frames(net);
    Ok(Linearization {
        names: net.species_names().iter().map(|s| s.to_string()).collect(),
        fixed_point: c_bar.to_vec(),
        lambda,
        beta_inv,
        gamma,
        tangent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnsagerVerdict {
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsagerReport {
    pub verdict: OnsagerVerdict,
    /// `max |lambda_vu c_u - lambda_uv c_v|` over `max |gamma|`.
    pub max_residual: f64,
}

pub fn check_onsager(lin: &Linearization, tol: f64) -> OnsagerReport {
    let g = &lin.gamma;
    let scale = g.amax();
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..i {
            worst = worst.max((g[(i, j)] - g[(j, i)]).abs());
        }
    }
    let max_residual = if scale > 0.0 { worst / scale } else { 0.0 };
    OnsagerReport {
        verdict: if max_residual <= tol {
            OnsagerVerdict::Symmetric
        } else {
            OnsagerVerdict::Asymmetric
        },
        max_residual,
    }
}

/// `phi(t) = exp(lambda t) beta^-1`; for `t < 0` the reversible-case
/// extension `phi(-t) = phi(t)^T` is returned.
pub fn ou_covariance(lin: &Linearization, t: f64) -> DMatrix<f64> {
    if t < 0.0 {
        return ou_covariance(lin, -t).transpose();
    }
    (&lin.lambda * t).exp() * &lin.beta_inv
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KuboOptions {
    /// Integration horizon; chosen from the spectral gap when `None`.
    pub horizon: Option<f64>,
    /// Target max-norm of the neglected tail when choosing the horizon.
    pub tail_tol: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for KuboOptions {
    fn default() -> Self {
        Self {
            horizon: None,
            tail_tol: 1e-10,
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KuboResult {
    /// `int_0^T -lambda^2 phi(t) dt`.
    pub lhs: DMatrix<f64>,
    /// `gamma = lambda beta^-1`.
    pub rhs: DMatrix<f64>,
    /// `|lhs - gamma|_max`.
    pub residual: f64,
    /// `|lhs + gamma|_max`, the residual under the opposite sign.
    pub residual_opposite: f64,
    /// `+1` when `lhs` is closer to `gamma` than to `-gamma`.
    pub sign: f64,
    pub horizon: f64,
    pub spectral_gap: f64,
    /// `|lambda exp(lambda T) beta^-1|_max`, the exact value of the tail.
    pub tail: f64,
    pub quadrature_error: f64,
}

fn kubo_tail(lin: &Linearization, t: f64) -> f64 {
    (&lin.lambda * (&lin.lambda * t).exp() * &lin.beta_inv).amax()
}

pub fn kubo_check(lin: &Linearization, opts: &KuboOptions) -> Result<KuboResult, FluctuationError> {
    let gap = lin.spectral_gap();
    if !(gap > 0.0) {
        return Err(FluctuationError::NotHurwitz(-gap));
    }
    let horizon = match opts.horizon {
        Some(t) => t,
        None => {
            let scale = (lin.lambda.amax() * lin.beta_inv.amax()).max(f64::MIN_POSITIVE);
            let mut t = if gap.is_finite() {
                ((scale / opts.tail_tol).ln() / gap).max(0.0)
            } else {
                0.0
            };
            // non-normal transients can make the bound optimistic
            let step = std::f64::consts::LN_10 / gap;
            for _ in 0..64 {
                if kubo_tail(lin, t) <= opts.tail_tol {
                    break;
                }
                t += step;
            }
            t
        }
    };
    let v = lin.lambda.nrows();
    let lam2 = &lin.lambda * &lin.lambda;
    let quad = quadrature::integrate(
        |t| {
            let m = -(&lam2 * (&lin.lambda * t).exp() * &lin.beta_inv);
            m.as_slice().to_vec()
        },
        0.0,
        horizon,
        opts.abs_tol,
        opts.rel_tol,
        opts.max_intervals,
    );
    let lhs = DMatrix::from_column_slice(v, v, &quad.value);
    let residual = (&lhs - &lin.gamma).amax();
    let residual_opposite = (&lhs + &lin.gamma).amax();
    Ok(KuboResult {
        sign: if residual <= residual_opposite { 1.0 } else { -1.0 },
        rhs: lin.gamma.clone(),
        lhs,
        residual,
        residual_opposite,
        horizon,
        spectral_gap: gap,
        tail: kubo_tail(lin, horizon),
        quadrature_error: quad.error,
    })
}
