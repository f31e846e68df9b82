//! Random network generators and brute-force oracles shared by the
//! property and acceptance suites.

#![allow(dead_code)]

use kinetica::reversibility::kolmogorov::truncated_chain;
use kinetica::reversibility::{RateGraph, StateBox};
use kinetica::ReactionNetwork;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(v: usize) -> Vec<String> {
    (0..v).map(|i| format!("S{i}")).collect()
}

fn complex_with_total(rng: &mut ChaCha8Rng, v: usize, total: u32) -> Vec<u32> {
    let mut c = vec![0u32; v];
    for _ in 0..total {
        c[rng.random_range(0..v)] += 1;
    }
    c
}

/// Complex with at most `max_total` molecules, entries at most 2.
fn random_complex(rng: &mut ChaCha8Rng, v: usize, max_total: u32) -> Vec<u32> {
    loop {
        let total = rng.random_range(0..=max_total);
        let c = complex_with_total(rng, v, total);
        if c.iter().all(|&x| x <= 2) {
            return c;
        }
    }
}

/// Distinct unordered complex pairs. With `conservative` both sides carry
/// the same number of molecules, so the total count is conserved.
pub fn random_pairs(
    rng: &mut ChaCha8Rng,
    v: usize,
    k: usize,
    max_total: u32,
    conservative: bool,
) -> Vec<(Vec<u32>, Vec<u32>)> {
    let mut out: Vec<(Vec<u32>, Vec<u32>)> = Vec::new();
    let mut attempts = 0;
    while out.len() < k && attempts < 100_000 {
        attempts += 1;
        let (x, y) = if conservative {
            let total = rng.random_range(1..=max_total);
            (
                complex_with_total(rng, v, total),
                complex_with_total(rng, v, total),
            )
        } else {
            (random_complex(rng, v, max_total), random_complex(rng, v, max_total))
        };
        if x == y || x.iter().chain(&y).any(|&e| e > 2) {
            continue;
        }
        if out.iter().any(|(p, q)| (p == &x && q == &y) || (p == &y && q == &x)) {
            continue;
        }
        out.push((x, y));
    }
    assert!(!out.is_empty(), "no admissible complex pair on {v} species");
    out
}

pub fn monomial(b: &[f64], d: &[u32]) -> f64 {
    b.iter().zip(d).map(|(x, &e)| x.powi(e as i32)).product()
}

/// Network whose declared pairs satisfy detailed balance at `b`.
pub fn balanced_network(pairs: &[(Vec<u32>, Vec<u32>)], forward: &[f64], b: &[f64]) -> ReactionNetwork {
    let mut net = ReactionNetwork::new(&names(b.len())).unwrap();
    for ((x, y), &a) in pairs.iter().zip(forward) {
        let back = a * monomial(b, x) / monomial(b, y);
        net.add_reversible(x.clone(), y.clone(), a, back).unwrap();
    }
    net
}

pub fn paired_network(v: usize, pairs: &[(Vec<u32>, Vec<u32>)], rates: &[(f64, f64)]) -> ReactionNetwork {
    let mut net = ReactionNetwork::new(&names(v)).unwrap();
    for ((x, y), &(f, g)) in pairs.iter().zip(rates) {
        net.add_reversible(x.clone(), y.clone(), f, g).unwrap();
    }
    net
}

pub fn random_b(rng: &mut ChaCha8Rng, v: usize) -> Vec<f64> {
    (0..v).map(|_| rng.random_range(0.3..3.0)).collect()
}

pub fn random_rates(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(0.2..5.0)).collect()
}

/// Detailed-balance network on `1..=max_v` species with `1..=max_pairs`
/// pairs, together with its balancing parameters.
pub fn random_balanced(
    rng: &mut ChaCha8Rng,
    max_v: usize,
    max_pairs: usize,
    conservative: bool,
) -> (ReactionNetwork, Vec<f64>) {
    // one species admits no conservative pair
    let v = rng.random_range(if conservative { 2 } else { 1 }..=max_v);
    let k = rng.random_range(1..=max_pairs);
    let max_total = if conservative { 2 } else { 3 };
    let pairs = random_pairs(rng, v, k, max_total, conservative);
    let b = random_b(rng, v);
    let a = random_rates(rng, pairs.len());
    (balanced_network(&pairs, &a, &b), b)
}

/// Network with declared inverse pairs and unrelated rate constants.
pub fn random_paired(rng: &mut ChaCha8Rng, max_v: usize, max_pairs: usize) -> ReactionNetwork {
    let v = rng.random_range(1..=max_v);
    let k = rng.random_range(1..=max_pairs);
    let pairs = random_pairs(rng, v, k, 3, false);
    let rates: Vec<(f64, f64)> = pairs
        .iter()
        .map(|_| (rng.random_range(0.2..5.0), rng.random_range(0.2..5.0)))
        .collect();
    paired_network(v, &pairs, &rates)
}

/// Copy of `net` with the rate of reaction `r` multiplied by `factor`.
pub fn with_rate(net: &ReactionNetwork, r: usize, factor: f64) -> ReactionNetwork {
    let mut out = ReactionNetwork::new(&net.species_names()).unwrap();
    for (i, rx) in net.reactions().iter().enumerate() {
        let rate = if i == r { rx.rate * factor } else { rx.rate };
        out.add_reaction(rx.reactants.clone(), rx.products.clone(), rate).unwrap();
    }
    for (p, q) in net.inverse_pairs() {
        out.declare_inverse(p, q).unwrap();
    }
    out
}

/// Copy of `net` with every rate multiplied by `factor`.
pub fn scaled(net: &ReactionNetwork, factor: f64) -> ReactionNetwork {
    let mut out = ReactionNetwork::new(&net.species_names()).unwrap();
    for rx in net.reactions() {
        out.add_reaction(rx.reactants.clone(), rx.products.clone(), rx.rate * factor)
            .unwrap();
    }
    for (p, q) in net.inverse_pairs() {
        out.declare_inverse(p, q).unwrap();
    }
    out
}

/// Truncated chain of a random network: detailed-balanced, arbitrary
/// paired rates, or balanced with one rate perturbed. Boxes keep at most
/// 200 states and few enough cycles for exhaustive enumeration.
pub fn random_chain(rng: &mut ChaCha8Rng) -> RateGraph {
    let v = rng.random_range(1..=3);
    let k = rng.random_range(1..=4);
    let pairs = random_pairs(rng, v, k, 2, false);
    let net = match rng.random_range(0..3) {
        0 => {
            let b = random_b(rng, v);
            let a = random_rates(rng, pairs.len());
            balanced_network(&pairs, &a, &b)
        }
        1 => {
            let rates: Vec<(f64, f64)> = pairs
                .iter()
                .map(|_| (rng.random_range(0.2..5.0), rng.random_range(0.2..5.0)))
                .collect();
            paired_network(v, &pairs, &rates)
        }
        _ => {
            let b = random_b(rng, v);
            let a = random_rates(rng, pairs.len());
            let net = balanced_network(&pairs, &a, &b);
            let r = rng.random_range(0..net.num_reactions());
            with_rate(&net, r, rng.random_range(1.5..3.0))
        }
    };
    let upper: Vec<u64> = match v {
        1 => vec![rng.random_range(5..200)],
        2 => vec![rng.random_range(1..=4), rng.random_range(1..=4)],
        _ => (0..3).map(|_| rng.random_range(1..=2)).collect(),
    };
    let bx = StateBox {
        upper,
        scale: rng.random_range(1.0..5.0),
    };
    truncated_chain(&net, &bx, 200).unwrap().graph
}

/// Outcome of checking every simple cycle of a chain.
pub enum CycleVerdict {
    Reversible,
    NotReversible,
    /// More than the allowed number of cycles.
    TooMany,
}

/// Markov reversibility by exhaustion: every transition must have its
/// reverse and every simple cycle of length at least three must have equal
/// rate products in both directions (relative gap at most `tol`).
pub fn all_cycles_verdict(g: &RateGraph, tol: f64, max_cycles: u64) -> CycleVerdict {
    let n = g.len();
    let nb = g.neighbours();
    for i in 0..n {
        for &j in &nb[i] {
            if g.rate(i, j) <= 0.0 || g.rate(j, i) <= 0.0 {
                return CycleVerdict::NotReversible;
            }
        }
    }
    let mut search = CycleSearch {
        g,
        nb: &nb,
        tol,
        max_cycles,
        count: 0,
        blocked: vec![false; n],
        waiting: vec![Vec::new(); n],
        stack: Vec::new(),
        verdict: None,
    };
    for s in 0..n {
        search.blocked.iter_mut().for_each(|x| *x = false);
        search.waiting.iter_mut().for_each(Vec::clear);
        search.circuit(s, s);
        if let Some(v) = search.verdict.take() {
            return v;
        }
    }
    CycleVerdict::Reversible
}

/// Johnson's elementary-circuit search on the symmetric digraph of the
/// support; each undirected cycle is visited once per orientation and
/// checked once.
struct CycleSearch<'a> {
    g: &'a RateGraph,
    nb: &'a [Vec<usize>],
    tol: f64,
    max_cycles: u64,
    count: u64,
    blocked: Vec<bool>,
    waiting: Vec<Vec<usize>>,
    stack: Vec<usize>,
    verdict: Option<CycleVerdict>,
}

impl CycleSearch<'_> {
    fn unblock(&mut self, u: usize) {
        self.blocked[u] = false;
        while let Some(w) = self.waiting[u].pop() {
            if self.blocked[w] {
                self.unblock(w);
            }
        }
    }

    fn check(&mut self) {
        let p = &self.stack;
        if p.len() < 3 || p[1] > p[p.len() - 1] {
            return;
        }
        self.count += 1;
        if self.count > self.max_cycles {
            self.verdict = Some(CycleVerdict::TooMany);
            return;
        }
        let (mut fwd, mut bwd) = (0.0, 0.0);
        for k in 0..p.len() {
            let (a, b) = (p[k], p[(k + 1) % p.len()]);
            fwd += self.g.rate(a, b).ln();
            bwd += self.g.rate(b, a).ln();
        }
        if -(-(fwd - bwd).abs()).exp_m1() > self.tol {
            self.verdict = Some(CycleVerdict::NotReversible);
        }
    }

    fn circuit(&mut self, v: usize, s: usize) -> bool {
        let mut found = false;
        self.stack.push(v);
        self.blocked[v] = true;
        let nb = self.nb;
        for &w in nb[v].iter().filter(|&&w| w >= s) {
            if self.verdict.is_some() {
                break;
            }
            if w == s {
                self.check();
                found = true;
            } else if !self.blocked[w] && self.circuit(w, s) {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in nb[v].iter().filter(|&&w| w >= s) {
                if !self.waiting[w].contains(&v) {
                    self.waiting[w].push(v);
                }
            }
        }
        self.stack.pop();
        found
    }
}

/// Central five-point derivative of `f` at `x` along coordinate `u`.
pub fn five_point(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], u: usize, h: f64) -> Vec<f64> {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[u] += s * h;
        f(&y)
    };
    let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
    (0..m2.len())
        .map(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h))
        .collect()
}
