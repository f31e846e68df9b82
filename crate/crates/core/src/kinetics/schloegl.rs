//! The one-species Schloegl model `0 <=> X`, `2X <=> 3X`.

use serde::{Deserialize, Serialize};

use super::KineticsError;
use crate::model::ReactionNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchloeglCase {
    /// `a23 = a32 = 0`.
    InputOutput,
    /// `a01 = a10 = 0`.
    Closed,
    /// All four present with `a23 / a32 = a01 / a10`.
    BalancedRatio,
    NonUnitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchloeglClass {
    pub case: SchloeglCase,
    /// Poisson parameter `b` at which unitarity holds.
    pub witness: Option<f64>,
}

/// Which unitarity case, if any, the rate constants fall in.
///
/// Unitarity at `b > 0` requires `a01 = a10 b` and `a23 = a32 b`; a missing
/// partner (for example a pure source with `a10 = 0`) leaves no admissible
/// `b` and is classified non-unitary.
pub fn schloegl_classify(
    a01: f64,
    a10: f64,
    a23: f64,
    a32: f64,
) -> Result<SchloeglClass, KineticsError> {
    let a = [a01, a10, a23, a32];
    if a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(KineticsError::NegativeRate);
    }
    if a.iter().all(|&x| x == 0.0) {
        return Err(KineticsError::SchloeglAllZero);
    }
    let pair = |f: f64, g: f64| (f > 0.0 && g > 0.0).then(|| f / g);
    let non_unitary = SchloeglClass {
        case: SchloeglCase::NonUnitary,
        witness: None,
    };
    let class = if a23 == 0.0 && a32 == 0.0 {
        match pair(a01, a10) {
            Some(b) => SchloeglClass {
                case: SchloeglCase::InputOutput,
                witness: Some(b),
            },
            None => non_unitary,
        }
    } else if a01 == 0.0 && a10 == 0.0 {
        match pair(a23, a32) {
            Some(b) => SchloeglClass {
                case: SchloeglCase::Closed,
                witness: Some(b),
            },
            None => non_unitary,
        }
    } else {
        match (pair(a01, a10), pair(a23, a32)) {
            (Some(b1), Some(b2)) if (b1 - b2).abs() <= 1e-12 * b1.max(b2) => SchloeglClass {
                case: SchloeglCase::BalancedRatio,
                witness: Some(b1),
            },
            _ => non_unitary,
        }
    };
    Ok(class)
}

/// Builds the Schloegl network on species `X`, omitting zero-rate reactions
/// and pairing the two directions whenever both are present.
pub fn schloegl_network(a01: f64, a10: f64, a23: f64, a32: f64) -> Result<ReactionNetwork, KineticsError> {
    schloegl_classify(a01, a10, a23, a32)?;
    let mut net = ReactionNetwork::new(&["X"]).expect("valid species name");
    for (lo, hi, fwd, bwd) in [(0u32, 1u32, a01, a10), (2, 3, a23, a32)] {
        let add = |net: &mut ReactionNetwork, l: u32, r: u32, k: f64| {
            net.add_reaction(vec![l], vec![r], k).expect("positive rate")
        };
        match (fwd > 0.0, bwd > 0.0) {
            (true, true) => {
                net.add_reversible(vec![lo], vec![hi], fwd, bwd)
                    .expect("positive rates");
            }
            (true, false) => {
                add(&mut net, lo, hi, fwd);
            }
            (false, true) => {
                add(&mut net, hi, lo, bwd);
            }
            (false, false) => {}
        }
    }
    Ok(net)
}

/// Recognises a one-species network made only of Schloegl reactions and
/// returns its `(a01, a10, a23, a32)`; repeated reactions add up.
pub fn schloegl_pattern(net: &ReactionNetwork) -> Option<[f64; 4]> {
    if net.num_species() != 1 || net.num_reactions() == 0 {
        return None;
    }
    let mut a = [0.0; 4];
    for r in net.reactions() {
        let slot = match (r.reactants[0], r.products[0]) {
            (0, 1) => 0,
            (1, 0) => 1,
            (2, 3) => 2,
            (3, 2) => 3,
            _ => return None,
        };
        a[slot] += r.rate;
    }
    Some(a)
}
