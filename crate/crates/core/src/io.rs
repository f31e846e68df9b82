//! Number formatting and CSV helpers shared by every exporter.

use std::fmt::Write as _;

/// Formats `x` like C's `%.17g`: 17 significant digits, trailing zeros
/// trimmed, exponent notation outside `[1e-5, 1e17)`.
pub fn g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// Writes a CSV document from a header and rows of already-formatted cells.
pub fn csv_document(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV of a square matrix with species names as the header row and the
/// first column.
pub fn matrix_csv(names: &[&str], m: &nalgebra::DMatrix<f64>) -> String {
    let mut out = String::from("species");
    for n in names {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for (i, n) in names.iter().enumerate() {
        out.push_str(n);
        for j in 0..m.ncols() {
            let _ = write!(out, ",{}", g17(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}
