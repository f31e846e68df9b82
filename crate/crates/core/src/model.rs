//! Reaction-network data model.
//!
//! A network is a list of species and mass-action reactions `d- -> d+` with
//! positive rate constants. Input (`0 -> A`) and output (`A -> 0`) reactions
//! are ordinary reactions whose kind is read off their stoichiometry; the
//! canonical `M^(1 - m-)` scaling of the propensity gives them the usual
//! `M a_in` and `a_out n` rates without special cases.

use std::collections::HashMap;
use std::ops::Deref;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate species name `{0}`")]
    DuplicateSpecies(String),
    #[error("invalid species name `{0}`")]
    InvalidName(String),
    #[error("stoichiometric vector has length {got}, network has {expected} species")]
    Dimension { got: usize, expected: usize },
    #[error("rate constant must be positive and finite, got {0}")]
    NonPositiveRate(f64),
    #[error("reaction has empty reactant and product complexes")]
    EmptyReaction,
    #[error("reactions {0} and {1} are not mutual inverses")]
    NotInverse(usize, usize),
    #[error("reaction {0} already has an inverse")]
    AlreadyPaired(usize),
    #[error("reaction index {0} out of range")]
    ReactionIndex(usize),
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("species index {0} out of range")]
    SpeciesIndex(usize),
    #[error("fixed concentration of `{0}` must be positive, got {1}")]
    NonPositiveFixed(String, f64),
    #[error("cannot clamp every species")]
    ClampAll,
    #[error("every reaction involves only clamped species; the reduced system is empty")]
    EmptyReduction,
    #[error("cluster network needs at least two cluster sizes, got {0}")]
    ClusterSize(usize),
    #[error("expected {expected} parameters, got {got}")]
    ParamLength { got: usize, expected: usize },
    #[error("parameter {0} must be positive and finite, got {1}")]
    NonPositiveParam(usize, f64),
    #[error("atom counts of `{species}` have {got} entries, expected {expected}")]
    AtomDimension {
        species: String,
        got: usize,
        expected: usize,
    },
    #[error("concentration {0} must be non-negative and finite, got {1}")]
    BadConcentration(usize, f64),
    #[error("scale M must be positive and finite, got {0}")]
    BadScale(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub name: String,
    /// Atoms of each declared type in one molecule, if known.
    pub atoms: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionKind {
    Bulk,
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    /// Substrate multiplicities `d-(v, r)`.
    pub reactants: Vec<u32>,
    /// Product multiplicities `d+(v, r)`.
    pub products: Vec<u32>,
    /// Rate constant `a_r`.
    pub rate: f64,
}

fn unit_index(v: &[u32]) -> Option<usize> {
    let mut idx = None;
    for (i, &x) in v.iter().enumerate() {
        match (x, idx) {
            (0, _) => {}
            (1, None) => idx = Some(i),
            _ => return None,
        }
    }
    idx
}

impl Reaction {
    /// `m-(r)`, the total number of consumed molecules.
    pub fn order(&self) -> u32 {
        self.reactants.iter().sum()
    }

    pub fn kind(&self) -> ReactionKind {
        let empty = |v: &[u32]| v.iter().all(|&x| x == 0);
        if empty(&self.reactants) && unit_index(&self.products).is_some() {
            ReactionKind::Input
        } else if empty(&self.products) && unit_index(&self.reactants).is_some() {
            ReactionKind::Output
        } else {
            ReactionKind::Bulk
        }
    }

    /// Net change `d+ - d-` applied to the state when the reaction fires.
    pub fn net(&self) -> Vec<i64> {
        self.products
            .iter()
            .zip(&self.reactants)
            .map(|(&p, &r)| p as i64 - r as i64)
            .collect()
    }

    /// True when firing leaves the state unchanged (`d- = d+`).
    pub fn is_null(&self) -> bool {
        self.reactants == self.products
    }

    /// Mass-action monomial `a_r * prod_w c_w^{d-(w,r)}`.
    pub fn flux(&self, c: &[f64]) -> f64 {
        let mut f = self.rate;
        for (&d, &x) in self.reactants.iter().zip(c) {
            if d > 0 {
                f *= x.powi(d as i32);
            }
        }
        f
    }

    /// `prod_v b_v^{d-(v,r)}` weighted by the rate; the per-reaction term of
    /// the unitarity and detailed-balance conditions.
    pub fn poisson_weight(&self, b: &[f64]) -> f64 {
        self.flux(b)
    }
}

/// Molecule counts together with the volume scale `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub counts: Vec<u64>,
    pub scale: f64,
}

impl State {
    pub fn new(counts: Vec<u64>, scale: f64) -> Result<Self, ModelError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(ModelError::BadScale(scale));
        }
        Ok(Self { counts, scale })
    }

    /// `round(M c)` with ties to even.
    pub fn from_concentrations(c: &[f64], scale: f64) -> Result<Self, ModelError> {
        let counts = c
            .iter()
            .map(|&x| (x * scale).round_ties_even().max(0.0) as u64)
            .collect();
        Self::new(counts, scale)
    }
}

/// Non-negative concentration vector of the mean-field limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentrations(Vec<f64>);

impl Concentrations {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        for (i, &x) in values.iter().enumerate() {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(ModelError::BadConcentration(i, x));
            }
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Concentrations {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A transport channel joining species `species` of two networks, with
/// unary transfer rates `rate_12 n_1` and `rate_21 n_2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportChannel {
    pub species: String,
    pub rate_12: f64,
    pub rate_21: f64,
}

/// Network produced by clamping species at fixed concentrations.
#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    pub network: ReactionNetwork,
    /// Original index of each remaining species.
    pub kept_species: Vec<usize>,
    /// Original index of each remaining reaction.
    pub kept_reactions: Vec<usize>,
    /// Original reactions dropped because they involve clamped species only.
    pub dropped_reactions: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    atom_types: Vec<String>,
    reactions: Vec<Reaction>,
    inverse: Vec<Option<usize>>,
}

pub(crate) fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_positive(params: &[f64], expected: usize) -> Result<(), ModelError> {
    if params.len() != expected {
        return Err(ModelError::ParamLength {
            got: params.len(),
            expected,
        });
    }
    for (i, &x) in params.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(ModelError::NonPositiveParam(i, x));
        }
    }
    Ok(())
}

impl ReactionNetwork {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, ModelError> {
        let mut net = Self::default();
        for n in names {
            net.add_species(n.as_ref())?;
        }
        Ok(net)
    }

    pub fn add_species(&mut self, name: &str) -> Result<usize, ModelError> {
        if !valid_name(name) || name == "atoms" || name == "species" {
            return Err(ModelError::InvalidName(name.to_string()));
        }
        if self.species.iter().any(|s| s.name == name) {
            return Err(ModelError::DuplicateSpecies(name.to_string()));
        }
        self.species.push(Species {
            name: name.to_string(),
            atoms: None,
        });
        for r in &mut self.reactions {
            r.reactants.push(0);
            r.products.push(0);
        }
        Ok(self.species.len() - 1)
    }

    pub fn add_reaction(
        &mut self,
        reactants: Vec<u32>,
        products: Vec<u32>,
        rate: f64,
    ) -> Result<usize, ModelError> {
        let v = self.species.len();
        for len in [reactants.len(), products.len()] {
            if len != v {
                return Err(ModelError::Dimension { got: len, expected: v });
            }
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(ModelError::NonPositiveRate(rate));
        }
        if reactants.iter().chain(&products).all(|&x| x == 0) {
            return Err(ModelError::EmptyReaction);
        }
        self.reactions.push(Reaction {
            reactants,
            products,
            rate,
        });
        self.inverse.push(None);
        Ok(self.reactions.len() - 1)
    }

    /// Adds `reactants -> products` and its inverse as a declared pair.
    pub fn add_reversible(
        &mut self,
        reactants: Vec<u32>,
        products: Vec<u32>,
        forward: f64,
        backward: f64,
    ) -> Result<(usize, usize), ModelError> {
        if !(backward > 0.0 && backward.is_finite()) {
            return Err(ModelError::NonPositiveRate(backward));
        }
        let f = self.add_reaction(reactants.clone(), products.clone(), forward)?;
        let b = self.add_reaction(products, reactants, backward)?;
        self.declare_inverse(f, b)?;
        Ok((f, b))
    }

    pub fn declare_inverse(&mut self, r: usize, s: usize) -> Result<(), ModelError> {
        let n = self.reactions.len();
        for i in [r, s] {
            if i >= n {
                return Err(ModelError::ReactionIndex(i));
            }
            if self.inverse[i].is_some() {
                return Err(ModelError::AlreadyPaired(i));
            }
        }
        let (a, b) = (&self.reactions[r], &self.reactions[s]);
        if r == s || a.reactants != b.products || a.products != b.reactants {
            return Err(ModelError::NotInverse(r, s));
        }
        self.inverse[r] = Some(s);
        self.inverse[s] = Some(r);
        Ok(())
    }

    /// Pairs every unpaired reaction with the unique unpaired reaction of
    /// swapped stoichiometry, when that partner is unambiguous. Returns the
    /// number of pairs added.
    pub fn infer_inverse_pairs(&mut self) -> usize {
        let mut added = 0;
        for r in 0..self.reactions.len() {
            if self.inverse[r].is_some() {
                continue;
            }
            let candidates = |net: &Self, r: usize| -> Vec<usize> {
                (0..net.reactions.len())
                    .filter(|&s| {
                        s != r
                            && net.inverse[s].is_none()
                            && net.reactions[s].reactants == net.reactions[r].products
                            && net.reactions[s].products == net.reactions[r].reactants
                    })
                    .collect()
            };
            let c = candidates(self, r);
            if c.len() == 1 && candidates(self, c[0]).len() == 1 {
                self.inverse[r] = Some(c[0]);
                self.inverse[c[0]] = Some(r);
                added += 1;
            }
        }
        added
    }

    /// Declares atom types and per-species atom counts.
    pub fn set_atoms(
        &mut self,
        atom_types: Vec<String>,
        counts: Vec<Option<Vec<u32>>>,
    ) -> Result<(), ModelError> {
        if counts.len() != self.species.len() {
            return Err(ModelError::ParamLength {
                got: counts.len(),
                expected: self.species.len(),
            });
        }
        for (s, c) in self.species.iter().zip(&counts) {
            if let Some(c) = c {
                if c.len() != atom_types.len() {
                    return Err(ModelError::AtomDimension {
                        species: s.name.clone(),
                        got: c.len(),
                        expected: atom_types.len(),
                    });
                }
            }
        }
        for (s, c) in self.species.iter_mut().zip(counts) {
            s.atoms = c;
        }
        self.atom_types = atom_types;
        Ok(())
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn species_names(&self) -> Vec<&str> {
        self.species.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn atom_types(&self) -> &[String] {
        &self.atom_types
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn inverse_of(&self, r: usize) -> Option<usize> {
        self.inverse.get(r).copied().flatten()
    }

    /// Declared inverse pairs `(r, r')` with `r < r'`.
    pub fn inverse_pairs(&self) -> Vec<(usize, usize)> {
        self.inverse
            .iter()
            .enumerate()
            .filter_map(|(r, s)| s.filter(|&s| r < s).map(|s| (r, s)))
            .collect()
    }

    /// Closed iff no input or output reactions are present.
    pub fn is_closed(&self) -> bool {
        self.reactions
            .iter()
            .all(|r| r.kind() == ReactionKind::Bulk)
    }

    /// Jump rate `lambda_r(n)` of reaction `r` at `state`.
    pub fn propensity(&self, r: usize, state: &State) -> f64 {
        let rx = &self.reactions[r];
        let prefactor = rx.rate * state.scale.powi(1 - rx.order() as i32);
        falling_product(&rx.reactants, &state.counts) * prefactor
    }

    /// Right-hand side of the mean-field kinetic equations.
    pub fn ode_rhs(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.species.len()];
        self.ode_rhs_into(c, &mut out);
        out
    }

    pub fn ode_rhs_into(&self, c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for r in &self.reactions {
            let flux = r.flux(c);
            if flux == 0.0 {
                continue;
            }
            for v in 0..out.len() {
                let (p, s) = (r.products[v], r.reactants[v]);
                if p != s {
                    out[v] += (p as f64 - s as f64) * flux;
                }
            }
        }
    }

    /// Analytic Jacobian `dF_v/dc_u` of [`ode_rhs`](Self::ode_rhs).
    pub fn jacobian(&self, c: &[f64]) -> DMatrix<f64> {
        let v = self.species.len();
        let mut jac = DMatrix::zeros(v, v);
        for r in &self.reactions {
            for u in 0..v {
                let du = r.reactants[u];
                if du == 0 {
                    continue;
                }
                let mut deriv = r.rate * du as f64 * c[u].powi(du as i32 - 1);
                for w in 0..v {
                    if w != u && r.reactants[w] > 0 {
                        deriv *= c[w].powi(r.reactants[w] as i32);
                    }
                }
                if deriv == 0.0 {
                    continue;
                }
                for row in 0..v {
                    let net = r.products[row] as f64 - r.reactants[row] as f64;
                    if net != 0.0 {
                        jac[(row, u)] += net * deriv;
                    }
                }
            }
        }
        jac
    }

    /// Net stoichiometric vectors `d+ - d-` of the bulk reactions.
    pub fn bulk_net_vectors(&self) -> Vec<Vec<i64>> {
        self.reactions
            .iter()
            .filter(|r| r.kind() == ReactionKind::Bulk)
            .map(Reaction::net)
            .collect()
    }

    /// Integer basis of the additive first integrals of the bulk reactions.
    pub fn conservation_laws(&self) -> Vec<Vec<i64>> {
        exact::integer_nullspace(&self.bulk_net_vectors(), self.species.len())
    }

    /// Fixes the species in `clamped` at the given concentrations and
    /// absorbs their monomials into the remaining rate constants.
    pub fn clamp_species(&self, clamped: &[(usize, f64)]) -> Result<ReducedNetwork, ModelError> {
        let v = self.species.len();
        let mut fixed = vec![None; v];
        for &(i, c) in clamped {
            if i >= v {
                return Err(ModelError::SpeciesIndex(i));
            }
            if !(c > 0.0 && c.is_finite()) {
                return Err(ModelError::NonPositiveFixed(self.species[i].name.clone(), c));
            }
            fixed[i] = Some(c);
        }
        let kept_species: Vec<usize> = (0..v).filter(|&i| fixed[i].is_none()).collect();
        if kept_species.is_empty() {
            return Err(ModelError::ClampAll);
        }
        let mut net = ReactionNetwork::default();
        for &i in &kept_species {
            net.species.push(self.species[i].clone());
        }
        net.atom_types = self.atom_types.clone();
        let mut kept_reactions = Vec::new();
        let mut dropped_reactions = Vec::new();
        let mut warnings = Vec::new();
        let mut new_index = vec![None; self.reactions.len()];
        for (ri, r) in self.reactions.iter().enumerate() {
            let reactants: Vec<u32> = kept_species.iter().map(|&i| r.reactants[i]).collect();
            let products: Vec<u32> = kept_species.iter().map(|&i| r.products[i]).collect();
            if reactants.iter().chain(&products).all(|&x| x == 0) {
                dropped_reactions.push(ri);
                continue;
            }
            let mut rate = r.rate;
            for (i, f) in fixed.iter().enumerate() {
                if let Some(c) = f {
                    rate *= c.powi(r.reactants[i] as i32);
                }
            }
            new_index[ri] = Some(net.reactions.len());
            net.reactions.push(Reaction {
                reactants,
                products,
                rate,
            });
            net.inverse.push(None);
            kept_reactions.push(ri);
        }
        if net.reactions.is_empty() && !self.reactions.is_empty() {
            return Err(ModelError::EmptyReduction);
        }
        if !dropped_reactions.is_empty() {
            warnings.push(format!(
                "dropped {} reaction(s) involving only clamped species: {:?}",
                dropped_reactions.len(),
                dropped_reactions
            ));
        }
        for (r, s) in self.inverse_pairs() {
            if let (Some(a), Some(b)) = (new_index[r], new_index[s]) {
                net.inverse[a] = Some(b);
                net.inverse[b] = Some(a);
            }
        }
        Ok(ReducedNetwork {
            network: net,
            kept_species,
            kept_reactions,
            dropped_reactions,
            warnings,
        })
    }

    /// Disjoint union of two networks plus unary transport reactions
    /// `v_1 <=> v_2` for every channel. Species are suffixed `_1` and `_2`.
    pub fn join_with_transport(
        net1: &ReactionNetwork,
        net2: &ReactionNetwork,
        channels: &[TransportChannel],
    ) -> Result<ReactionNetwork, ModelError> {
        let mut names: Vec<String> = Vec::new();
        for (net, suffix) in [(net1, "_1"), (net2, "_2")] {
            for s in &net.species {
                names.push(format!("{}{suffix}", s.name));
            }
        }
        let mut out = ReactionNetwork::new(&names)?;
        let v1 = net1.num_species();
        let v = out.num_species();
        let embed = |x: &[u32], offset: usize| {
            let mut full = vec![0u32; v];
            full[offset..offset + x.len()].copy_from_slice(x);
            full
        };
        for (net, offset) in [(net1, 0usize), (net2, v1)] {
            let base = out.reactions.len();
            for r in &net.reactions {
                out.add_reaction(embed(&r.reactants, offset), embed(&r.products, offset), r.rate)?;
            }
            for (r, s) in net.inverse_pairs() {
                out.declare_inverse(base + r, base + s)?;
            }
        }
        // merge atom tables by type name
        let mut atom_types = net1.atom_types.clone();
        for t in &net2.atom_types {
            if !atom_types.contains(t) {
                atom_types.push(t.clone());
            }
        }
        if !atom_types.is_empty() {
            let mut counts = Vec::with_capacity(v);
            for net in [net1, net2] {
                for s in &net.species {
                    counts.push(s.atoms.as_ref().map(|a| {
                        atom_types
                            .iter()
                            .map(|t| {
                                net.atom_types
                                    .iter()
                                    .position(|x| x == t)
                                    .map_or(0, |k| a[k])
                            })
                            .collect()
                    }));
                }
            }
            out.set_atoms(atom_types, counts)?;
        }
        for ch in channels {
            let i1 = net1
                .species_index(&ch.species)
                .ok_or_else(|| ModelError::UnknownSpecies(ch.species.clone()))?;
            let i2 = net2
                .species_index(&ch.species)
                .ok_or_else(|| ModelError::UnknownSpecies(ch.species.clone()))?;
            let mut left = vec![0u32; v];
            let mut right = vec![0u32; v];
            left[i1] = 1;
            right[v1 + i2] = 1;
            out.add_reversible(left, right, ch.rate_12, ch.rate_21)?;
        }
        Ok(out)
    }

    /// Aggregation-fragmentation network on clusters `m1..m{v_max}`.
    ///
    /// Attachment `m1 + mn -> m(n+1)` runs at `a[n-1]` and detachment at
    /// `a_n b_1 b_n / b_(n+1)`, which makes every pair satisfy detailed
    /// balance at the Poisson parameters `b`.
    pub fn cluster_network(v_max: usize, b: &[f64], a: &[f64]) -> Result<ReactionNetwork, ModelError> {
        if v_max < 2 {
            return Err(ModelError::ClusterSize(v_max));
        }
        check_positive(b, v_max)?;
        check_positive(a, v_max - 1)?;
        let names: Vec<String> = (1..=v_max).map(|n| format!("m{n}")).collect();
        let mut net = ReactionNetwork::new(&names)?;
        for n in 1..v_max {
            let mut left = vec![0u32; v_max];
            left[0] += 1;
            left[n - 1] += 1;
            let mut right = vec![0u32; v_max];
            right[n] = 1;
            let attach = a[n - 1];
            let detach = attach * b[0] * b[n - 1] / b[n];
            net.add_reversible(left, right, attach, detach)?;
        }
        Ok(net)
    }

    /// Builds a network from named complexes, for tests and programmatic use.
    pub fn from_named(
        species: &[&str],
        reactions: &[(&[(&str, u32)], &[(&str, u32)], f64)],
    ) -> Result<Self, ModelError> {
        let mut net = Self::new(species)?;
        let index: HashMap<&str, usize> = species.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let vec_of = |terms: &[(&str, u32)]| -> Result<Vec<u32>, ModelError> {
            let mut v = vec![0u32; species.len()];
            for (name, k) in terms {
                let i = *index
                    .get(name)
                    .ok_or_else(|| ModelError::UnknownSpecies(name.to_string()))?;
                v[i] += k;
            }
            Ok(v)
        };
        for (lhs, rhs, rate) in reactions {
            net.add_reaction(vec_of(lhs)?, vec_of(rhs)?, *rate)?;
        }
        Ok(net)
    }
}

/// `prod_v n_v (n_v - 1) ... (n_v - d_v + 1)`, zero if any factor would cross zero.
pub fn falling_product(d: &[u32], counts: &[u64]) -> f64 {
    let mut value = 1.0;
    for (&k, &n) in d.iter().zip(counts) {
        if k as u64 > n {
            return 0.0;
        }
        for j in 0..k as u64 {
            value *= (n - j) as f64;
        }
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dimer() -> ReactionNetwork {
        ReactionNetwork::from_named(&["A", "B"], &[(&[("A", 2)], &[("B", 1)], 1.0)]).unwrap()
    }

    #[test]
    fn propensity_uses_falling_factorials() {
        let net = dimer();
        let s = State::new(vec![3, 0], 1.0).unwrap();
        assert_eq!(net.propensity(0, &s), 6.0);
    }

    #[test]
    fn propensity_carries_canonical_scaling() {
        let net = dimer();
        let s = State::new(vec![3, 0], 10.0).unwrap();
        assert!((net.propensity(0, &s) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn propensity_vanishes_without_enough_molecules() {
        let net = dimer();
        let s = State::new(vec![1, 5], 1.0).unwrap();
        assert_eq!(net.propensity(0, &s), 0.0);
    }

    #[test]
    fn input_and_output_rates_follow_scaling() {
        let net = ReactionNetwork::from_named(
            &["A"],
            &[(&[], &[("A", 1)], 2.0), (&[("A", 1)], &[], 3.0)],
        )
        .unwrap();
        assert_eq!(net.reactions()[0].kind(), ReactionKind::Input);
        assert_eq!(net.reactions()[1].kind(), ReactionKind::Output);
        assert!(!net.is_closed());
        let s = State::new(vec![4], 50.0).unwrap();
        assert_eq!(net.propensity(0, &s), 100.0);
        assert_eq!(net.propensity(1, &s), 12.0);
        assert_eq!(net.ode_rhs(&[1.5]), vec![2.0 - 4.5]);
    }

    #[test]
    fn rhs_of_conversion() {
        let net =
            ReactionNetwork::from_named(&["A", "B"], &[(&[("A", 1)], &[("B", 1)], 2.0)]).unwrap();
        assert_eq!(net.ode_rhs(&[1.0, 0.0]), vec![-2.0, 2.0]);
    }

    #[test]
    fn rhs_of_closed_schloegl_is_c2_minus_c3() {
        let net = ReactionNetwork::from_named(
            &["X"],
            &[(&[("X", 2)], &[("X", 3)], 1.0), (&[("X", 3)], &[("X", 2)], 1.0)],
        )
        .unwrap();
        for c in [0.0, 0.3, 1.0, 2.5] {
            let f = net.ode_rhs(&[c])[0];
            assert!((f - (c * c - c * c * c)).abs() < 1e-14);
        }
    }

    #[test]
    fn rhs_vanishes_at_origin_for_closed_networks() {
        let net = dimer();
        assert_eq!(net.ode_rhs(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn conservation_of_conversion() {
        let net =
            ReactionNetwork::from_named(&["A", "B"], &[(&[("A", 1)], &[("B", 1)], 1.0)]).unwrap();
        assert_eq!(net.conservation_laws(), vec![vec![1, 1]]);
    }

    #[test]
    fn conservation_ignores_inputs() {
        let net = ReactionNetwork::from_named(
            &["A", "B"],
            &[(&[("A", 1)], &[("B", 1)], 1.0), (&[], &[("A", 1)], 1.0)],
        )
        .unwrap();
        assert_eq!(net.conservation_laws(), vec![vec![1, 1]]);
    }

    #[test]
    fn clamping_absorbs_monomials() {
        let net = ReactionNetwork::from_named(
            &["E", "S", "P"],
            &[(&[("E", 1), ("S", 1)], &[("E", 1), ("P", 1)], 1.0)],
        )
        .unwrap();
        let red = net.clamp_species(&[(0, 2.0)]).unwrap();
        assert_eq!(red.network.species_names(), vec!["S", "P"]);
        let r = &red.network.reactions()[0];
        assert_eq!(r.reactants, vec![1, 0]);
        assert_eq!(r.products, vec![0, 1]);
        assert_eq!(r.rate, 2.0);
    }

    #[test]
    fn clamping_nothing_is_identity() {
        let net = dimer();
        let red = net.clamp_species(&[]).unwrap();
        assert_eq!(red.network, net);
    }

    #[test]
    fn clamping_errors() {
        let net = ReactionNetwork::from_named(
            &["A", "B", "C"],
            &[(&[("A", 1)], &[("B", 1)], 1.0)],
        )
        .unwrap();
        assert_eq!(
            net.clamp_species(&[(0, 1.0), (1, 1.0)]).unwrap_err(),
            ModelError::EmptyReduction
        );
        assert_eq!(
            net.clamp_species(&[(0, 1.0), (1, 1.0), (2, 1.0)]).unwrap_err(),
            ModelError::ClampAll
        );
        assert!(matches!(
            net.clamp_species(&[(0, 0.0)]),
            Err(ModelError::NonPositiveFixed(..))
        ));
    }

    #[test]
    fn join_counts() {
        let mut ab = ReactionNetwork::new(&["A", "B"]).unwrap();
        ab.add_reversible(vec![1, 0], vec![0, 1], 1.0, 2.0).unwrap();
        let joined = ReactionNetwork::join_with_transport(
            &ab,
            &ab,
            &[TransportChannel {
                species: "A".into(),
                rate_12: 1.0,
                rate_21: 1.0,
            }],
        )
        .unwrap();
        assert_eq!(joined.num_species(), 4);
        assert_eq!(joined.num_reactions(), 6);
        assert_eq!(joined.inverse_pairs().len(), 3);
        let empty = ReactionNetwork::join_with_transport(&ab, &ab, &[]).unwrap();
        assert_eq!(empty.num_reactions(), 4);
        assert_eq!(empty.conservation_laws().len(), 2);
        assert!(matches!(
            ReactionNetwork::join_with_transport(
                &ab,
                &ab,
                &[TransportChannel {
                    species: "Z".into(),
                    rate_12: 1.0,
                    rate_21: 1.0
                }]
            ),
            Err(ModelError::UnknownSpecies(_))
        ));
    }

    #[test]
    fn cluster_network_smallest_case() {
        let net = ReactionNetwork::cluster_network(2, &[1.0, 1.0], &[1.0]).unwrap();
        let r = net.reactions();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].reactants, vec![2, 0]);
        assert_eq!(r[0].products, vec![0, 1]);
        assert_eq!(r[1].rate, 1.0);
        assert_eq!(net.inverse_of(0), Some(1));
        assert!(ReactionNetwork::cluster_network(1, &[1.0], &[]).is_err());
    }

    #[test]
    fn cluster_network_geometric_parameters() {
        let q: f64 = 0.7;
        let v = 6;
        let b: Vec<f64> = (1..=v).map(|n| q.powi(n as i32)).collect();
        let a = vec![1.0; v - 1];
        let net = ReactionNetwork::cluster_network(v, &b, &a).unwrap();
        for n in 1..v {
            let detach = net.reactions()[2 * (n - 1) + 1].rate;
            // a_n b_1 b_n = a'_{n+1} b_{n+1}
            let lhs = a[n - 1] * b[0] * b[n - 1];
            let rhs = detach * b[n];
            assert!((lhs - rhs).abs() <= 1e-14 * lhs);
            // with b_n = q^n the detachment rate is q^{1 + n - (n+1)} = 1
            assert!((detach - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_inference_pairs_unambiguous_reactions() {
        let mut net = ReactionNetwork::from_named(
            &["X"],
            &[(&[("X", 2)], &[("X", 3)], 1.0), (&[("X", 3)], &[("X", 2)], 1.0)],
        )
        .unwrap();
        assert_eq!(net.infer_inverse_pairs(), 1);
        assert_eq!(net.inverse_pairs(), vec![(0, 1)]);
    }

    #[test]
    fn declare_inverse_rejects_non_inverse() {
        let mut net = ReactionNetwork::from_named(
            &["A", "B"],
            &[(&[("A", 1)], &[("B", 1)], 1.0), (&[("A", 1)], &[("B", 1)], 1.0)],
        )
        .unwrap();
        assert_eq!(net.declare_inverse(0, 1), Err(ModelError::NotInverse(0, 1)));
    }
}
