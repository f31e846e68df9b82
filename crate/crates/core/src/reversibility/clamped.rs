//! Reversibility after fixing some concentrations.
//!
//! With detailed balance at `b`, clamping species `W` at `c_v` keeps the
//! reduced system reversible iff `h(v) = ln(c_v / b_v)` on `W` extends to an
//! additive first integral of the full network.

use serde::{Deserialize, Serialize};

use super::{PoissonParams, ReversibilityError};
use crate::exact;
use crate::model::ReactionNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClampVerdict {
    Reversible,
    GenericallyIrreversible,
}

/// Linear combination of clamped log-ratios that must vanish but does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconsistencyCertificate {
    /// `(species name, coefficient)`; the weighted sum of `ln(c_v/b_v)`
    /// must be zero for every extension.
    pub coefficients: Vec<(String, f64)>,
    pub mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampedReport {
    pub verdict: ClampVerdict,
    /// The extended first integral `h` over all species.
    pub extension: Option<Vec<f64>>,
    pub certificate: Option<InconsistencyCertificate>,
    pub clamped_count: usize,
    pub conservation_dim: usize,
    /// True when `|W| > dim L`, where generic clamped values break reversibility.
    pub generically_irreversible_by_dimension: bool,
}

pub fn clamped_reversibility_test(
    net: &ReactionNetwork,
    b: &PoissonParams,
    clamped: &[(usize, f64)],
    tol: f64,
) -> Result<ClampedReport, ReversibilityError> {
    let v = net.num_species();
    if b.len() != v {
        return Err(ReversibilityError::Length {
            got: b.len(),
            expected: v,
        });
    }
    for &(i, c) in clamped {
        if i >= v {
            return Err(ReversibilityError::SpeciesIndex(i));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(ReversibilityError::NonPositiveFixed(i, c));
        }
    }
    let laws = net.conservation_laws();
    let k = laws.len();
    let mut report = ClampedReport {
        verdict: ClampVerdict::Reversible,
        extension: Some(vec![0.0; v]),
        certificate: None,
        clamped_count: clamped.len(),
        conservation_dim: k,
        generically_irreversible_by_dimension: clamped.len() > k,
    };
    if clamped.is_empty() {
        return Ok(report);
    }
    // one equation per clamped species: sum_j x_j L_j(v) = ln(c_v / b_v)
    let rows: Vec<Vec<i64>> = clamped
        .iter()
        .map(|&(i, _)| laws.iter().map(|h| h[i]).collect())
        .collect();
    let targets: Vec<f64> = clamped
        .iter()
        .map(|&(i, c)| (c / b.as_slice()[i]).ln())
        .collect();
    let solved = exact::solve(&rows, &targets, k);
    for (rel, mismatch) in &solved.relations {
        let coeffs = rel.coefficients_f64();
        let scale = coeffs
            .iter()
            .map(|(i, c)| (c * targets[*i]).abs())
            .sum::<f64>()
            .max(1.0);
        if mismatch.abs() > tol * scale {
            report.verdict = ClampVerdict::GenericallyIrreversible;
            report.extension = None;
            report.certificate = Some(InconsistencyCertificate {
                coefficients: coeffs
                    .iter()
                    .map(|(i, c)| (net.species()[clamped[*i].0].name.clone(), *c))
                    .collect(),
                mismatch: *mismatch,
            });
            return Ok(report);
        }
    }
    let mut h = vec![0.0; v];
    for (x, law) in solved.solution.iter().zip(&laws) {
        for (hv, &l) in h.iter_mut().zip(law) {
            *hv += x * l as f64;
        }
    }
    report.extension = Some(h);
    Ok(report)
}
