//! Kolmogorov cycle criterion on finite rate graphs.
//!
//! A candidate measure is built along a breadth-first spanning tree with
//! `pi_j = pi_i * lambda_ij / lambda_ji`; the chain is reversible iff every
//! non-tree edge then satisfies `pi_i lambda_ij = pi_j lambda_ji`, which is
//! equivalent to the product condition around every cycle.

use std::collections::{BTreeMap, VecDeque};

use super::{ReversibilityError, ReversibilityReport, Status};
use crate::model::{ReactionNetwork, State};

/// Continuous-time jump chain on states `0..n` with summed transition rates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateGraph {
    out: Vec<BTreeMap<usize, f64>>,
}

impl RateGraph {
    pub fn new(n: usize) -> Self {
        Self {
            out: vec![BTreeMap::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    /// Adds `rate` to the `i -> j` transition. Self-loops are ignored.
    pub fn add_rate(&mut self, i: usize, j: usize, rate: f64) {
        if i != j && rate > 0.0 {
            *self.out[i].entry(j).or_insert(0.0) += rate;
        }
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.out[i].get(&j).copied().unwrap_or(0.0)
    }

    /// Neighbours in the undirected support graph, sorted.
    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut nb: Vec<Vec<usize>> = vec![Vec::new(); self.len()];
        for (i, row) in self.out.iter().enumerate() {
            for &j in row.keys() {
                nb[i].push(j);
                nb[j].push(i);
            }
        }
        for v in nb.iter_mut() {
            v.sort_unstable();
            v.dedup();
        }
        nb
    }
}

/// Finite box `0 <= n_v <= upper_v` of the state space at scale `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    pub upper: Vec<u64>,
    pub scale: f64,
}

impl StateBox {
    pub fn size(&self) -> u128 {
        self.upper.iter().map(|&u| u as u128 + 1).product()
    }

    fn index(&self, n: &[u64]) -> Option<usize> {
        let mut idx = 0usize;
        for (v, &x) in n.iter().enumerate().rev() {
            if x > self.upper[v] {
                return None;
            }
            idx = idx * (self.upper[v] as usize + 1) + x as usize;
        }
        Some(idx)
    }

    fn state(&self, mut idx: usize) -> Vec<u64> {
        self.upper
            .iter()
            .map(|&u| {
                let w = u as usize + 1;
                let x = idx % w;
                idx /= w;
                x as u64
            })
            .collect()
    }
}

/// Chain of a network restricted to a box; reactions leaving it are dropped.
#[derive(Debug, Clone)]
pub struct TruncatedChain {
    pub graph: RateGraph,
    pub states: Vec<Vec<u64>>,
}

pub fn truncated_chain(
    net: &ReactionNetwork,
    bx: &StateBox,
    max_states: usize,
) -> Result<TruncatedChain, ReversibilityError> {
    if bx.upper.len() != net.num_species() {
        return Err(ReversibilityError::StateLength {
            got: bx.upper.len(),
            expected: net.num_species(),
        });
    }
    let size = bx.size();
    if size > max_states as u128 {
        return Err(ReversibilityError::BoxTooLarge(size, max_states));
    }
    let n = size as usize;
    let mut graph = RateGraph::new(n);
    let mut states = Vec::with_capacity(n);
    for i in 0..n {
        let counts = bx.state(i);
        let s = State {
            counts: counts.clone(),
            scale: bx.scale,
        };
        for (r, rx) in net.reactions().iter().enumerate() {
            let rate = net.propensity(r, &s);
            if rate == 0.0 {
                continue;
            }
            let next: Vec<u64> = counts
                .iter()
                .zip(rx.net())
                .map(|(&x, d)| (x as i64 + d) as u64)
                .collect();
            if let Some(j) = bx.index(&next) {
                graph.add_rate(i, j, rate);
            }
        }
        states.push(counts);
    }
    Ok(TruncatedChain { graph, states })
}

/// Outcome of the criterion together with the tree-built log-measure.
#[derive(Debug, Clone)]
pub struct KolmogorovOutcome {
    pub report: ReversibilityReport,
    /// `ln pi` per state, normalised to 0 at the root of each component.
    pub log_measure: Vec<f64>,
    pub components: usize,
}

pub fn kolmogorov_check(graph: &RateGraph, tol: f64) -> KolmogorovOutcome {
    let mut report = ReversibilityReport::new("kolmogorov");
    let n = graph.len();
    let nb = graph.neighbours();
    let mut log_pi = vec![f64::NAN; n];
    let mut parent = vec![usize::MAX; n];
    let mut components = 0;
    for root in 0..n {
        if !log_pi[root].is_nan() {
            continue;
        }
        components += 1;
        log_pi[root] = 0.0;
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for &j in &nb[i] {
                if !log_pi[j].is_nan() {
                    continue;
                }
                let (fwd, bwd) = (graph.rate(i, j), graph.rate(j, i));
                if fwd > 0.0 && bwd > 0.0 {
                    log_pi[j] = log_pi[i] + fwd.ln() - bwd.ln();
                } else {
                    log_pi[j] = log_pi[i];
                    report.residuals.push(super::Residual {
                        id: format!("one-sided:{i}-{j}"),
                        value: 1.0,
                    });
                }
                parent[j] = i;
                queue.push_back(j);
            }
        }
    }
    for i in 0..n {
        for &j in &nb[i] {
            if j <= i || parent[j] == i || parent[i] == j {
                continue;
            }
            let (fwd, bwd) = (graph.rate(i, j), graph.rate(j, i));
            let value = if fwd > 0.0 && bwd > 0.0 {
                let gap = (log_pi[i] + fwd.ln() - log_pi[j] - bwd.ln()).abs();
                -(-gap).exp_m1()
            } else {
                1.0
            };
            report.residuals.push(super::Residual {
                id: format!("edge:{i}-{j}"),
                value,
            });
        }
    }
    if report.residuals.iter().any(|r| r.value > tol) {
        report.status = Status::Fails;
    }
    if components > 1 {
        report
            .notes
            .push(format!("{components} communicating components checked separately"));
    }
    KolmogorovOutcome {
        report,
        log_measure: log_pi,
        components,
    }
}

/// Kolmogorov criterion for the network's chain truncated to `bx`.
pub fn kolmogorov_criterion(
    net: &ReactionNetwork,
    bx: &StateBox,
    tol: f64,
    max_states: usize,
) -> Result<KolmogorovOutcome, ReversibilityError> {
    let chain = truncated_chain(net, bx, max_states)?;
    let mut out = kolmogorov_check(&chain.graph, tol);
    out.report
        .notes
        .push("chain truncated to a finite box; transitions leaving the box are dropped".into());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_network;

    #[test]
    fn birth_death_chain_is_reversible() {
        let net = parse_network("0 -> X @ 3\nX -> 0 @ 1\n2 X -> 3 X @ 0.5").unwrap();
        let bx = StateBox {
            upper: vec![30],
            scale: 5.0,
        };
        let out = kolmogorov_criterion(&net, &bx, 1e-9, 10_000).unwrap();
        assert!(out.report.holds());
        assert!(out.report.residuals.is_empty());
    }

    #[test]
    fn three_state_cycle_with_drift_fails() {
        let mut g = RateGraph::new(3);
        for i in 0..3 {
            g.add_rate(i, (i + 1) % 3, 2.0);
            g.add_rate((i + 1) % 3, i, 1.0);
        }
        let out = kolmogorov_check(&g, 1e-9);
        assert_eq!(out.report.status, Status::Fails);
        // products around the cycle are 8 and 1
        let r = out.report.max_residual();
        assert!((r - 7.0 / 8.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn one_sided_edge_fails() {
        let mut g = RateGraph::new(2);
        g.add_rate(0, 1, 1.0);
        assert_eq!(kolmogorov_check(&g, 1e-9).report.status, Status::Fails);
    }

    #[test]
    fn detailed_balance_network_is_reversible_on_boxes() {
        let net = parse_network("A + A <=> B @ 1, 2\nB <=> C @ 0.5, 1.5").unwrap();
        for upper in [vec![4, 3, 2], vec![6, 2, 5]] {
            let bx = StateBox { upper, scale: 3.0 };
            let out = kolmogorov_criterion(&net, &bx, 1e-9, 1000).unwrap();
            assert!(out.report.holds(), "{:?}", out.report);
        }
    }

    #[test]
    fn box_cap_is_enforced() {
        let net = parse_network("A <=> B @ 1, 1").unwrap();
        let bx = StateBox {
            upper: vec![100, 100],
            scale: 1.0,
        };
        assert!(matches!(
            kolmogorov_criterion(&net, &bx, 1e-9, 1000),
            Err(ReversibilityError::BoxTooLarge(..))
        ));
    }
}
