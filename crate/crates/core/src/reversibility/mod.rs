//! Reversibility hierarchy of a reaction network.
//!
//! Each check produces a [`ReversibilityReport`] with a status, an optional
//! witness Poisson parameter vector and per-item relative residuals:
//!
//! - [`check_unitarity`]: balance, for every complex `d`, of the weighted
//!   rates of reactions consuming `d` and producing `d`;
//! - [`check_poisson_invariance_flows`]: in/out probability flows of the
//!   product-Poisson measure at sampled states;
//! - [`check_detailed_balance`]: equality of forward and backward weighted
//!   rates for every declared inverse pair;
//! - [`solve_reversible_measure`]: constructs Poisson parameters from the
//!   equilibrium constants when they are consistent around every cycle;
//! - [`kolmogorov`]: cycle criterion on a truncated state space;
//! - [`clamped`]: whether fixing some concentrations keeps detailed balance.

pub mod clamped;
pub mod kolmogorov;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact;
use crate::model::{ReactionNetwork, State};

pub use clamped::{clamped_reversibility_test, ClampVerdict, ClampedReport};
pub use kolmogorov::{kolmogorov_check, kolmogorov_criterion, RateGraph, StateBox};

/// Default relative tolerance for every residual.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReversibilityError {
    #[error("expected {expected} Poisson parameters, got {got}")]
    Length { got: usize, expected: usize },
    #[error("Poisson parameter {0} must be positive and finite, got {1}")]
    NonPositive(usize, f64),
    #[error("state box has {0} states, above the cap of {1}")]
    BoxTooLarge(u128, usize),
    #[error("state has {got} species, network has {expected}")]
    StateLength { got: usize, expected: usize },
    #[error("species index {0} out of range")]
    SpeciesIndex(usize),
    #[error("fixed concentration {1} of species {0} must be positive")]
    NonPositiveFixed(usize, f64),
}

/// Parameters `b` of the product-Poisson measure with means `M b_v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonParams {
    pub b: Vec<f64>,
}

impl PoissonParams {
    pub fn new(b: Vec<f64>) -> Result<Self, ReversibilityError> {
        for (i, &x) in b.iter().enumerate() {
            if !(x > 0.0 && x.is_finite()) {
                return Err(ReversibilityError::NonPositive(i, x));
            }
        }
        Ok(Self { b })
    }

    pub fn for_network(net: &ReactionNetwork, b: Vec<f64>) -> Result<Self, ReversibilityError> {
        if b.len() != net.num_species() {
            return Err(ReversibilityError::Length {
                got: b.len(),
                expected: net.num_species(),
            });
        }
        Self::new(b)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Fails,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversibilityReport {
    pub check: String,
    pub status: Status,
    pub witness: Option<PoissonParams>,
    pub residuals: Vec<Residual>,
    pub equilibrium_constants: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl ReversibilityReport {
    fn new(check: &str) -> Self {
        Self {
            check: check.to_string(),
            status: Status::Holds,
            witness: None,
            residuals: Vec::new(),
            equilibrium_constants: None,
            notes: Vec::new(),
        }
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.value).fold(0.0, f64::max)
    }

    fn push(&mut self, id: String, value: f64) {
        self.residuals.push(Residual { id, value });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// `|x - y| / max(|x|, |y|)`, zero when both vanish.
pub(crate) fn relative_gap(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if scale == 0.0 {
        0.0
    } else {
        (x - y).abs() / scale
    }
}

fn vector_label(v: &[u32]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Stueckelberg (unitarity) condition at Poisson parameters `b`.
pub fn check_unitarity(net: &ReactionNetwork, b: &PoissonParams, tol: f64) -> ReversibilityReport {
    let mut report = ReversibilityReport::new("unitarity");
    let mut groups: BTreeMap<Vec<u32>, (f64, f64)> = BTreeMap::new();
    for (i, r) in net.reactions().iter().enumerate() {
        if r.is_null() {
            report
                .notes
                .push(format!("reaction {i} has d- = d+ and cancels within its own group; excluded"));
            continue;
        }
        let w = r.poisson_weight(b.as_slice());
        let consumed = groups.entry(r.reactants.clone()).or_insert((0.0, 0.0));
        consumed.0 += w;
        consumed.1 += w;
        let produced = groups.entry(r.products.clone()).or_insert((0.0, 0.0));
        produced.0 -= w;
        produced.1 += w;
    }
    for (d, (sum, magnitude)) in groups {
        let rel = if magnitude > 0.0 { sum.abs() / magnitude } else { 0.0 };
        report.push(format!("d={}", vector_label(&d)), rel);
        if rel > tol {
            report.status = Status::Fails;
        }
    }
    if report.holds() {
        report.witness = Some(b.clone());
    }
    report
}

fn ln_factorial_ratio(to: u64, from: u64) -> f64 {
    // ln(to!) - ln(from!)
    if to >= from {
        (from + 1..=to).map(|k| (k as f64).ln()).sum()
    } else {
        -(to + 1..=from).map(|k| (k as f64).ln()).sum::<f64>()
    }
}

/// Compares the probability flow out of and into each sampled state under
/// the product-Poisson measure with means `M b_v`. Flows are evaluated
/// relative to `mu(n)`, using the telescoped ratio `mu(n')/mu(n)`.
pub fn check_poisson_invariance_flows(
    net: &ReactionNetwork,
    b: &PoissonParams,
    states: &[State],
    tol: f64,
) -> Result<ReversibilityReport, ReversibilityError> {
    let mut report = ReversibilityReport::new("poisson_invariance_flows");
    for s in states {
        if s.counts.len() != net.num_species() {
            return Err(ReversibilityError::StateLength {
                got: s.counts.len(),
                expected: net.num_species(),
            });
        }
        let log_means: Vec<f64> = b.as_slice().iter().map(|x| (s.scale * x).ln()).collect();
        let mut out_flow = 0.0;
        let mut in_flow = 0.0;
        for (r, rx) in net.reactions().iter().enumerate() {
            out_flow += net.propensity(r, s);
            // predecessor n' = n + d- - d+
            let mut prev = Vec::with_capacity(s.counts.len());
            let mut admissible = true;
            for v in 0..s.counts.len() {
                let x = s.counts[v] as i64 + rx.reactants[v] as i64 - rx.products[v] as i64;
                if x < 0 {
                    admissible = false;
                    break;
                }
                prev.push(x as u64);
            }
            if !admissible {
                continue;
            }
            let mut log_ratio = 0.0;
            for v in 0..prev.len() {
                let dn = prev[v] as i64 - s.counts[v] as i64;
                if dn != 0 {
                    log_ratio += dn as f64 * log_means[v] - ln_factorial_ratio(prev[v], s.counts[v]);
                }
            }
            let prev_state = State {
                counts: prev,
                scale: s.scale,
            };
            let rate = net.propensity(r, &prev_state);
            if rate > 0.0 {
                in_flow += log_ratio.exp() * rate;
            }
        }
        let rel = relative_gap(in_flow, out_flow);
        let label: Vec<u64> = s.counts.clone();
        report.push(format!("n={label:?}"), rel);
        if rel > tol {
            report.status = Status::Fails;
        }
    }
    if report.holds() {
        report.witness = Some(b.clone());
    }
    Ok(report)
}

/// Chemical detailed balance for every declared inverse pair.
pub fn check_detailed_balance(
    net: &ReactionNetwork,
    b: &PoissonParams,
    tol: f64,
) -> ReversibilityReport {
    let mut report = ReversibilityReport::new("detailed_balance");
    let mut constants = BTreeMap::new();
    for r in 0..net.num_reactions() {
        if net.inverse_of(r).is_none() {
            report.push(format!("unpaired:r{r}"), 1.0);
            report.notes.push(format!("reaction {r} has no declared inverse"));
            report.status = Status::Fails;
        }
    }
    for (r, s) in net.inverse_pairs() {
        let rx = &net.reactions()[r];
        let sx = &net.reactions()[s];
        let lhs = rx.poisson_weight(b.as_slice());
        let rhs = sx.poisson_weight(b.as_slice());
        let rel = relative_gap(lhs, rhs);
        report.push(format!("pair:r{r}/r{s}"), rel);
        constants.insert(format!("r{r}"), (sx.rate / rx.rate).ln());
        if rel > tol {
            report.status = Status::Fails;
        }
    }
    report.equilibrium_constants = Some(constants);
    if report.holds() {
        report.witness = Some(b.clone());
    }
    report
}

/// Builds Poisson parameters satisfying detailed balance from the
/// equilibrium constants `l_r = ln(a_r' / a_r)`.
///
/// Solves `sum_v alpha_v (d-(v,r) - d+(v,r)) = l_r` for one reaction per
/// inverse pair. The integer system is reduced exactly; every dependent
/// equation is a cycle whose equilibrium constants must sum to zero. The
/// returned `b = exp(alpha)` has no component along the conservation laws.
pub fn solve_reversible_measure(net: &ReactionNetwork, tol: f64) -> ReversibilityReport {
    let mut report = ReversibilityReport::new("reversible_measure");
    for r in 0..net.num_reactions() {
        if net.inverse_of(r).is_none() {
            report.push(format!("unpaired:r{r}"), 1.0);
            report.notes.push(format!("reaction {r} has no declared inverse"));
            report.status = Status::Fails;
        }
    }
    if report.status == Status::Fails {
        return report;
    }
    let pairs = net.inverse_pairs();
    let mut rows = Vec::with_capacity(pairs.len());
    let mut rhs = Vec::with_capacity(pairs.len());
    let mut constants = BTreeMap::new();
    for &(r, s) in &pairs {
        let rx = &net.reactions()[r];
        rows.push(
            rx.reactants
                .iter()
                .zip(&rx.products)
                .map(|(&m, &p)| m as i64 - p as i64)
                .collect::<Vec<i64>>(),
        );
        let l = (net.reactions()[s].rate / rx.rate).ln();
        constants.insert(format!("r{r}"), l);
        rhs.push(l);
    }
    let solved = exact::solve(&rows, &rhs, net.num_species());
    for (rel, mismatch) in &solved.relations {
        let coeffs = rel.coefficients_f64();
        let scale = coeffs
            .iter()
            .map(|(i, k)| (k * rhs[*i]).abs())
            .sum::<f64>()
            .max(1.0);
        let terms: Vec<String> = coeffs
            .iter()
            .map(|(i, k)| format!("{:+}*r{}", k, pairs[*i].0))
            .collect();
        report.push(format!("cycle:{}", terms.join(" ")), mismatch.abs());
        if mismatch.abs() > tol * scale {
            report.status = Status::Inconsistent;
        }
    }
    report.equilibrium_constants = Some(constants);
    if report.holds() {
        let b = solved.solution.iter().map(|a| a.exp()).collect();
        report.witness = Some(PoissonParams { b });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_network;

    fn params(b: &[f64]) -> PoissonParams {
        PoissonParams::new(b.to_vec()).unwrap()
    }

    #[test]
    fn schloegl_balanced_ratio_is_unitary() {
        let net = parse_network("0 <=> X @ 1, 2\n2 X <=> 3 X @ 3, 6").unwrap();
        let rep = check_unitarity(&net, &params(&[0.5]), DEFAULT_TOLERANCE);
        assert!(rep.holds(), "{rep:?}");
        assert!(check_detailed_balance(&net, &params(&[0.5]), DEFAULT_TOLERANCE).holds());
    }

    #[test]
    fn closed_schloegl_witness() {
        let net = parse_network("2 X <=> 3 X @ 2, 1").unwrap();
        assert!(check_unitarity(&net, &params(&[2.0]), DEFAULT_TOLERANCE).holds());
        assert!(!check_unitarity(&net, &params(&[1.0]), DEFAULT_TOLERANCE).holds());
    }

    #[test]
    fn irreversible_conversion_fails_unitarity() {
        let net = parse_network("A -> B @ 1").unwrap();
        let rep = check_unitarity(&net, &params(&[0.7, 1.3]), DEFAULT_TOLERANCE);
        assert_eq!(rep.status, Status::Fails);
        let ids: Vec<&str> = rep.residuals.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["d=(0,1)", "d=(1,0)"]);
        assert!(rep.residuals.iter().all(|r| r.value == 1.0));
    }

    #[test]
    fn flows_detect_one_sided_inflow() {
        let net = parse_network("A -> B @ 1").unwrap();
        let s = State::new(vec![0, 1], 10.0).unwrap();
        let rep = check_poisson_invariance_flows(&net, &params(&[1.0, 1.0]), &[s], 1e-9).unwrap();
        assert_eq!(rep.status, Status::Fails);
        assert_eq!(rep.residuals[0].value, 1.0);
    }

    #[test]
    fn flows_balance_for_unitary_network() {
        let net = parse_network("0 <=> X @ 1, 2\n2 X <=> 3 X @ 3, 6").unwrap();
        let states: Vec<State> = (0..40)
            .map(|n| State::new(vec![n], 20.0).unwrap())
            .collect();
        let rep = check_poisson_invariance_flows(&net, &params(&[0.5]), &states, 1e-10).unwrap();
        assert!(rep.holds(), "{}", rep.max_residual());
    }

    #[test]
    fn empty_network_is_vacuously_invariant() {
        let net = ReactionNetwork::new(&["A"]).unwrap();
        let s = State::new(vec![3], 1.0).unwrap();
        let rep = check_poisson_invariance_flows(&net, &params(&[1.0]), &[s], 1e-9).unwrap();
        assert!(rep.holds());
        let rep = solve_reversible_measure(&net, 1e-9);
        assert!(rep.holds());
        assert_eq!(rep.witness.unwrap().b, vec![1.0]);
    }

    #[test]
    fn dimerisation_detailed_balance() {
        let net = parse_network("A + A <=> B @ 1, 2").unwrap();
        assert!(check_detailed_balance(&net, &params(&[2.0, 2.0]), 1e-12).holds());
        assert!(!check_detailed_balance(&net, &params(&[1.0, 2.0]), 1e-12).holds());
    }

    #[test]
    fn unpaired_reaction_is_structural_failure() {
        let net = parse_network("A <=> B @ 1, 1\nB -> C @ 1").unwrap();
        let rep = check_detailed_balance(&net, &params(&[1.0, 1.0, 1.0]), 1e-9);
        assert_eq!(rep.status, Status::Fails);
        assert!(rep.residuals.iter().any(|r| r.id == "unpaired:r2"));
        assert_eq!(solve_reversible_measure(&net, 1e-9).status, Status::Fails);
    }

    #[test]
    fn measure_for_conversion() {
        let net = parse_network("A <=> B @ 2, 1").unwrap();
        let rep = solve_reversible_measure(&net, 1e-12);
        assert!(rep.holds());
        let b = rep.witness.clone().unwrap().b;
        assert!((b[1] / b[0] - 2.0).abs() < 1e-12);
        // no component along the conserved direction (1, 1)
        assert!((b[0].ln() + b[1].ln()).abs() < 1e-12);
        let l = rep.equilibrium_constants.unwrap()["r0"];
        assert!((l - 0.5f64.ln()).abs() < 1e-15);
        assert!(check_detailed_balance(&net, &rep.witness.unwrap(), 1e-11).holds());
    }

    #[test]
    fn inconsistent_three_cycle() {
        let net = parse_network("A <=> B @ 1, 2\nB <=> C @ 1, 3\nC <=> A @ 1, 5").unwrap();
        let rep = solve_reversible_measure(&net, 1e-9);
        assert_eq!(rep.status, Status::Inconsistent);
        assert!(rep.witness.is_none());
        let cycle = rep.residuals.iter().find(|r| r.id.starts_with("cycle")).unwrap();
        let expected = (2.0f64).ln() + (3.0f64).ln() + (5.0f64).ln();
        assert!((cycle.value - expected).abs() < 1e-12);
    }

    #[test]
    fn consistent_three_cycle() {
        let net = parse_network("A <=> B @ 1, 2\nB <=> C @ 1, 3\nC <=> A @ 6, 1").unwrap();
        let rep = solve_reversible_measure(&net, 1e-9);
        assert!(rep.holds(), "{rep:?}");
        assert!(check_detailed_balance(&net, rep.witness.as_ref().unwrap(), 1e-8).holds());
    }

    #[test]
    fn null_reactions_are_excluded_from_unitarity() {
        let net = parse_network("A + B -> A + B @ 1").unwrap();
        let rep = check_unitarity(&net, &params(&[1.0, 1.0]), 1e-9);
        assert!(rep.holds());
        assert_eq!(rep.notes.len(), 1);
    }

    #[test]
    fn report_serialises_with_documented_fields() {
        let net = parse_network("A <=> B @ 2, 1").unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&solve_reversible_measure(&net, 1e-9).to_json()).unwrap();
        assert_eq!(json["status"], "holds");
        assert!(json["witness"]["b"].is_array());
        assert!(json["residuals"].is_array());
        assert!(json["equilibrium_constants"]["r0"].is_number());
    }
}
