//! Line-oriented text format for reaction networks.
//!
//! ```text
//! # Schloegl model
//! 0 <=> X @ 1, 2
//! 2 X <=> 3 X @ 3, 6
//! atoms:
//! X: C=1
//! ```
//!
//! One reaction per line: terms `k Name` joined by `+` (a missing `k` means
//! 1, a lone `0` is the empty complex), an arrow `->` or `<=>`, then a rate
//! clause `@ a` (or `@ a_f, a_b` for `<=>`, which declares an inverse pair).
//! Lines starting with `#` are comments. An optional `species:` line fixes
//! the species order; otherwise species are numbered by first appearance.
//! A trailing `atoms:` block gives per-species atom counts as
//! `Name: b1=k1 b2=k2`.

use std::fmt;

use thiserror::Error;

use crate::io::g17;
use crate::model::{valid_name, ModelError, ReactionNetwork};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown species `{0}` in atoms block")]
    UnknownSpecies(String),
    #[error("rate must be positive and finite, got {0}")]
    NonPositiveRate(String),
    #[error("duplicate species name `{0}`")]
    DuplicateSpecies(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parse failure with 1-based line and column.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.kind)
    }
}

struct LineCtx<'a> {
    line_no: usize,
    text: &'a str,
}

impl LineCtx<'_> {
    fn err_at(&self, byte: usize, kind: ParseErrorKind) -> ParseError {
        let column = self.text[..byte.min(self.text.len())].chars().count() + 1;
        ParseError {
            line: self.line_no,
            column,
            kind,
        }
    }

    fn syntax(&self, byte: usize, msg: impl Into<String>) -> ParseError {
        self.err_at(byte, ParseErrorKind::Syntax(msg.into()))
    }
}

/// Byte offset of `part` inside `whole`; `part` must be a subslice.
fn offset(whole: &str, part: &str) -> usize {
    part.as_ptr() as usize - whole.as_ptr() as usize
}

type Complex = Vec<(String, u32, usize)>;

fn parse_complex(ctx: &LineCtx, side: &str) -> Result<Complex, ParseError> {
    let trimmed = side.trim();
    let start = offset(ctx.text, side) + (side.len() - side.trim_start().len());
    if trimmed.is_empty() {
        return Err(ctx.syntax(start, "empty complex; use `0` for no molecules"));
    }
    if trimmed == "0" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for term in side.split('+') {
        let at = offset(ctx.text, term) + (term.len() - term.trim_start().len());
        let tokens: Vec<&str> = term.split_whitespace().collect();
        let (coeff, name) = match tokens.as_slice() {
            [name] => (1u32, *name),
            [k, name] => {
                let k: u32 = k
                    .parse()
                    .map_err(|_| ctx.syntax(at, format!("invalid coefficient `{k}`")))?;
                if k == 0 {
                    return Err(ctx.syntax(at, "coefficient must be positive"));
                }
                (k, *name)
            }
            [] => return Err(ctx.syntax(at, "empty term")),
            _ => return Err(ctx.syntax(at, format!("malformed term `{}`", term.trim()))),
        };
        if name == "0" {
            return Err(ctx.syntax(at, "`0` must stand alone"));
        }
        if !valid_name(name) {
            return Err(ctx.syntax(at, format!("invalid species name `{name}`")));
        }
        out.push((name.to_string(), coeff, at));
    }
    Ok(out)
}

fn parse_rate(ctx: &LineCtx, token: &str) -> Result<f64, ParseError> {
    let at = offset(ctx.text, token) + (token.len() - token.trim_start().len());
    let t = token.trim();
    if t.is_empty() {
        return Err(ctx.syntax(at, "missing rate value"));
    }
    let x: f64 = t
        .parse()
        .map_err(|_| ctx.syntax(at, format!("invalid rate `{t}`")))?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(ctx.err_at(at, ParseErrorKind::NonPositiveRate(t.to_string())));
    }
    Ok(x)
}

struct PendingReaction {
    lhs: Complex,
    rhs: Complex,
    rates: Vec<f64>,
    line_no: usize,
}

/// Parses the network text format into a validated network.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, ParseError> {
    let mut names: Vec<String> = Vec::new();
    let mut pending: Vec<PendingReaction> = Vec::new();
    let mut atom_types: Vec<String> = Vec::new();
    let mut atom_rows: Vec<(String, Vec<(String, u32)>, usize, usize)> = Vec::new();
    let mut in_atoms = false;

    for (i, raw) in text.lines().enumerate() {
        let ctx = LineCtx {
            line_no: i + 1,
            text: raw,
        };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "atoms:" {
            if in_atoms {
                return Err(ctx.syntax(offset(raw, line), "repeated `atoms:` block"));
            }
            in_atoms = true;
            continue;
        }
        if in_atoms {
            let Some((name, rest)) = line.split_once(':') else {
                return Err(ctx.syntax(offset(raw, line), "expected `Name: type=count ...`"));
            };
            let name = name.trim();
            let at = offset(raw, line);
            let mut counts = Vec::new();
            for item in rest.split_whitespace() {
                let at_item = offset(raw, item);
                let Some((t, k)) = item.split_once('=') else {
                    return Err(ctx.syntax(at_item, format!("expected `type=count`, got `{item}`")));
                };
                if !valid_name(t) {
                    return Err(ctx.syntax(at_item, format!("invalid atom type `{t}`")));
                }
                let k: u32 = k
                    .parse()
                    .map_err(|_| ctx.syntax(at_item, format!("invalid atom count `{k}`")))?;
                if counts.iter().any(|(x, _): &(String, u32)| x == t) {
                    return Err(ctx.syntax(at_item, format!("atom type `{t}` repeated")));
                }
                if !atom_types.iter().any(|x| x == t) {
                    atom_types.push(t.to_string());
                }
                counts.push((t.to_string(), k));
            }
            atom_rows.push((name.to_string(), counts, ctx.line_no, at));
            continue;
        }
        if let Some(rest) = line.strip_prefix("species:") {
            if !pending.is_empty() || !names.is_empty() {
                return Err(ctx.syntax(offset(raw, line), "`species:` must precede all reactions"));
            }
            for name in rest.split_whitespace() {
                let at = offset(raw, name);
                if !valid_name(name) {
                    return Err(ctx.syntax(at, format!("invalid species name `{name}`")));
                }
                if names.iter().any(|n| n == name) {
                    return Err(ctx.err_at(at, ParseErrorKind::DuplicateSpecies(name.to_string())));
                }
                names.push(name.to_string());
            }
            continue;
        }

        let (arrow, reversible) = if let Some(p) = raw.find("<=>") {
            (p, true)
        } else if let Some(p) = raw.find("->") {
            (p, false)
        } else {
            return Err(ctx.syntax(offset(raw, line), "expected `->` or `<=>`"));
        };
        let arrow_len = if reversible { 3 } else { 2 };
        let lhs_text = &raw[..arrow];
        let after = &raw[arrow + arrow_len..];
        let Some(at_pos) = after.find('@') else {
            return Err(ctx.syntax(raw.len(), "missing rate clause `@ rate`"));
        };
        let rhs_text = &after[..at_pos];
        let rate_text = &after[at_pos + 1..];
        let marker = arrow + arrow_len + at_pos;
        if rate_text.trim().is_empty() {
            return Err(ctx.syntax(marker, "rate marker `@` without a rate"));
        }
        let lhs = parse_complex(&ctx, lhs_text)?;
        let rhs = parse_complex(&ctx, rhs_text)?;
        let parts: Vec<&str> = rate_text.split(',').collect();
        let expected = if reversible { 2 } else { 1 };
        if parts.len() != expected {
            return Err(ctx.syntax(
                marker,
                format!("expected {expected} rate(s) after `@`, found {}", parts.len()),
            ));
        }
        let rates = parts
            .iter()
            .map(|p| parse_rate(&ctx, p))
            .collect::<Result<Vec<_>, _>>()?;
        if lhs.is_empty() && rhs.is_empty() {
            return Err(ctx.syntax(offset(raw, line), "reaction `0 -> 0` is empty"));
        }
        for (name, _, _) in lhs.iter().chain(&rhs) {
            if !names.iter().any(|n| n == name) {
                names.push(name.clone());
            }
        }
        pending.push(PendingReaction {
            lhs,
            rhs,
            rates,
            line_no: ctx.line_no,
        });
    }

    let mut net = ReactionNetwork::new(&names).map_err(|e| ParseError {
        line: 1,
        column: 1,
        kind: e.into(),
    })?;
    let to_vec = |c: &Complex| {
        let mut v = vec![0u32; names.len()];
        for (n, k, _) in c {
            let i = names.iter().position(|x| x == n).expect("registered");
            v[i] += k;
        }
        v
    };
    for p in &pending {
        let wrap = |e: ModelError| ParseError {
            line: p.line_no,
            column: 1,
            kind: e.into(),
        };
        let (l, r) = (to_vec(&p.lhs), to_vec(&p.rhs));
        if p.rates.len() == 2 {
            net.add_reversible(l, r, p.rates[0], p.rates[1]).map_err(wrap)?;
        } else {
            net.add_reaction(l, r, p.rates[0]).map_err(wrap)?;
        }
    }
    if !atom_rows.is_empty() {
        let mut counts: Vec<Option<Vec<u32>>> = vec![None; names.len()];
        for (name, row, line_no, at) in atom_rows {
            let err = |kind| ParseError {
                line: line_no,
                column: at + 1,
                kind,
            };
            let Some(i) = names.iter().position(|x| *x == name) else {
                return Err(err(ParseErrorKind::UnknownSpecies(name)));
            };
            if counts[i].is_some() {
                return Err(err(ParseErrorKind::DuplicateSpecies(name)));
            }
            let mut v = vec![0u32; atom_types.len()];
            for (t, k) in row {
                let j = atom_types.iter().position(|x| *x == t).expect("registered");
                v[j] = k;
            }
            counts[i] = Some(v);
        }
        net.set_atoms(atom_types, counts).map_err(|e| ParseError {
            line: 1,
            column: 1,
            kind: e.into(),
        })?;
    }
    Ok(net)
}

fn complex_text(names: &[&str], v: &[u32]) -> String {
    let terms: Vec<String> = v
        .iter()
        .zip(names)
        .filter(|(k, _)| **k > 0)
        .map(|(k, n)| if *k == 1 { n.to_string() } else { format!("{k} {n}") })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// Canonical text form. Declared inverse pairs stored next to each other
/// are written with `<=>`; rates use 17 significant digits.
pub fn serialize_network(net: &ReactionNetwork) -> String {
    let names = net.species_names();
    let mut lines: Vec<String> = Vec::new();
    let mut order: Vec<usize> = Vec::new();
    let mut r = 0;
    let reactions = net.reactions();
    while r < reactions.len() {
        let rx = &reactions[r];
        let paired = net.inverse_of(r) == Some(r + 1);
        for v in [&rx.reactants, &rx.products] {
            for (i, &k) in v.iter().enumerate() {
                if k > 0 && !order.contains(&i) {
                    order.push(i);
                }
            }
        }
        let lhs = complex_text(&names, &rx.reactants);
        let rhs = complex_text(&names, &rx.products);
        if paired {
            lines.push(format!(
                "{lhs} <=> {rhs} @ {}, {}",
                g17(rx.rate),
                g17(reactions[r + 1].rate)
            ));
            r += 2;
        } else {
            lines.push(format!("{lhs} -> {rhs} @ {}", g17(rx.rate)));
            r += 1;
        }
    }
    let mut out = String::new();
    if order != (0..names.len()).collect::<Vec<_>>() {
        out.push_str("species: ");
        out.push_str(&names.join(" "));
        out.push('\n');
    }
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    if !net.atom_types().is_empty() {
        out.push_str("atoms:\n");
        for s in net.species() {
            if let Some(a) = &s.atoms {
                let items: Vec<String> = net
                    .atom_types()
                    .iter()
                    .zip(a)
                    .map(|(t, k)| format!("{t}={k}"))
                    .collect();
                out.push_str(&format!("{}: {}\n", s.name, items.join(" ")));
            }
        }
    }
    out
}
