//! Exact linear algebra over the rationals for integer stoichiometry.
//!
//! Conservation laws, equilibrium-constant consistency and the clamped
//! extension test all reduce to questions about integer matrices. Those are
//! answered here with `BigRational` elimination so that no spurious
//! dependency can appear through roundoff. Only the final right-hand sides
//! (logarithms of rates) are floating point.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

fn rat(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// A linear relation among input rows: `sum_i coefficients[i].1 * row[coefficients[i].0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRelation {
    /// Row that was found to be dependent on earlier rows.
    pub row: usize,
    /// Sparse coefficients over input rows, including `row` itself with coefficient 1.
    pub coefficients: Vec<(usize, BigRational)>,
}

impl RowRelation {
    /// Coefficients as floats, for applying the relation to real data.
    pub fn coefficients_f64(&self) -> Vec<(usize, f64)> {
        self.coefficients
            .iter()
            .map(|(i, c)| (*i, to_f64(c)))
            .collect()
    }
}

/// Result of scanning rows in order and splitting them into an independent
/// set and relations expressing each dependent row.
#[derive(Debug, Clone, Default)]
pub struct RowDependence {
    pub independent: Vec<usize>,
    pub relations: Vec<RowRelation>,
}

struct BasisRow {
    pivot: usize,
    row: Vec<BigRational>,
    combo: Vec<BigRational>,
}

/// Splits integer rows into a maximal independent prefix-greedy subset and
/// exact relations for the rest.
pub fn row_dependence(rows: &[Vec<i64>]) -> RowDependence {
    let nrows = rows.len();
    let mut basis: Vec<BasisRow> = Vec::new();
    let mut out = RowDependence::default();
    for (i, row) in rows.iter().enumerate() {
        let mut r: Vec<BigRational> = row.iter().map(|&x| rat(x)).collect();
        let mut combo = vec![BigRational::zero(); nrows];
        combo[i] = BigRational::one();
        for b in &basis {
            if r[b.pivot].is_zero() {
                continue;
            }
            let f = &r[b.pivot] / &b.row[b.pivot];
            for (x, y) in r.iter_mut().zip(&b.row) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
            for (x, y) in combo.iter_mut().zip(&b.combo) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
        }
        match r.iter().position(|x| !x.is_zero()) {
            Some(pivot) => {
                out.independent.push(i);
                basis.push(BasisRow { pivot, row: r, combo });
            }
            None => {
                let coefficients = combo
                    .into_iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .collect();
                out.relations.push(RowRelation { row: i, coefficients });
            }
        }
    }
    out
}

/// Rank of an integer matrix given by rows.
pub fn rank(rows: &[Vec<i64>]) -> usize {
    row_dependence(rows).independent.len()
}

/// Scales a rational vector to the primitive integer vector on the same ray,
/// with the first non-zero entry positive.
pub fn primitive_integer(v: &[BigRational]) -> Vec<i64> {
    let mut lcm = BigInt::one();
    for x in v {
        lcm = lcm.lcm(x.denom());
    }
    let mut ints: Vec<BigInt> = v.iter().map(|x| (x * &lcm).to_integer()).collect();
    let mut g = BigInt::zero();
    for x in &ints {
        g = g.gcd(x);
    }
    if !g.is_zero() {
        for x in ints.iter_mut() {
            *x = &*x / &g;
        }
    }
    if let Some(first) = ints.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in ints.iter_mut() {
                *x = -&*x;
            }
        }
    }
    ints.iter()
        .map(|x| x.to_i64().expect("primitive integer vector overflows i64"))
        .collect()
}

/// Integer basis of `{h : <row, h> = 0 for every row}`.
pub fn integer_nullspace(rows: &[Vec<i64>], ncols: usize) -> Vec<Vec<i64>> {
    // reduced row echelon form
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| rat(x)).collect())
        .collect();
    let mut pivots: Vec<usize> = Vec::new();
    let mut lead = 0usize;
    for col in 0..ncols {
        let Some(p) = (lead..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(lead, p);
        let inv = m[lead][col].recip();
        for x in m[lead].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = m[lead].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == lead || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(col);
        lead += 1;
        if lead == m.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); ncols];
            v[f] = BigRational::one();
            for (i, &p) in pivots.iter().enumerate() {
                v[p] = -m[i][f].clone();
            }
            primitive_integer(&v)
        })
        .collect()
}

/// Solution of `rows * x = rhs` (one equation per row) with exact handling of
/// the integer coefficient matrix.
#[derive(Debug, Clone)]
pub struct LinearSolve {
    /// Minimum-norm solution of the independent equations.
    pub solution: Vec<f64>,
    /// For every dependent equation: the relation and the mismatch of the
    /// right-hand side along it, `sum_i k_i rhs_i`.
    pub relations: Vec<(RowRelation, f64)>,
}

impl LinearSolve {
    pub fn max_abs_mismatch(&self) -> f64 {
        self.relations
            .iter()
            .map(|(_, r)| r.abs())
            .fold(0.0, f64::max)
    }
}

/// Solves the possibly over- and under-determined system `rows * x = rhs`.
///
/// Dependent equations are reported with their right-hand-side mismatch
/// instead of being folded into a least-squares fit. The returned solution is
/// the one orthogonal to the nullspace of `rows`.
pub fn solve(rows: &[Vec<i64>], rhs: &[f64], ncols: usize) -> LinearSolve {
    assert_eq!(rows.len(), rhs.len());
    let dep = row_dependence(rows);
    let relations = dep
        .relations
        .into_iter()
        .map(|rel| {
            let mismatch = rel
                .coefficients
                .iter()
                .map(|(i, c)| to_f64(c) * rhs[*i])
                .sum();
            (rel, mismatch)
        })
        .collect();
    let indep: Vec<&Vec<i64>> = dep.independent.iter().map(|&i| &rows[i]).collect();
    let k = indep.len();
    let mut solution = vec![0.0; ncols];
    if k > 0 {
        // Gram matrix G = R R^T is integer and invertible for independent R.
        let mut g: Vec<Vec<BigRational>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let dot: i64 = indep[i].iter().zip(indep[j]).map(|(a, b)| a * b).sum();
                        rat(dot)
                    })
                    .collect()
            })
            .collect();
        let ginv = invert(&mut g);
        let y: Vec<f64> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| to_f64(&ginv[i][j]) * rhs[dep.independent[j]])
                    .sum()
            })
            .collect();
        for (i, row) in indep.iter().enumerate() {
            for (x, &d) in solution.iter_mut().zip(row.iter()) {
                *x += d as f64 * y[i];
            }
        }
    }
    LinearSolve {
        solution,
        relations,
    }
}

/// Gauss-Jordan inverse of a square nonsingular rational matrix.
fn invert(m: &mut [Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let n = m.len();
    let mut inv: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let p = (col..n)
            .find(|&i| !m[i][col].is_zero())
            .expect("singular Gram matrix");
        m.swap(col, p);
        inv.swap(col, p);
        let f = m[col][col].recip();
        for x in m[col].iter_mut() {
            *x *= &f;
        }
        for x in inv[col].iter_mut() {
            *x *= &f;
        }
        let prow = m[col].clone();
        let pinv = inv[col].clone();
        for i in 0..n {
            if i == col || m[i][col].is_zero() {
                continue;
            }
            let f = m[i][col].clone();
            for (x, y) in m[i].iter_mut().zip(&prow) {
                *x -= &f * y;
            }
            for (x, y) in inv[i].iter_mut().zip(&pinv) {
                *x -= &f * y;
            }
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[i64], b: &[i64]) -> i64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn nullspace_of_single_conversion() {
        let basis = integer_nullspace(&[vec![-1, 1]], 2);
        assert_eq!(basis, vec![vec![1, 1]]);
    }

    #[test]
    fn nullspace_of_association_is_two_dimensional() {
        let rows = vec![vec![-1, -1, 1]];
        let basis = integer_nullspace(&rows, 3);
        assert_eq!(basis.len(), 2);
        for h in &basis {
            assert_eq!(dot(h, &rows[0]), 0);
        }
        // (1,0,1) and (0,1,1) lie in the span
        assert_eq!(rank(&[basis[0].clone(), basis[1].clone(), vec![1, 0, 1]]), 2);
        assert_eq!(rank(&[basis[0].clone(), basis[1].clone(), vec![0, 1, 1]]), 2);
    }

    #[test]
    fn nullspace_of_empty_matrix_is_identity() {
        let basis = integer_nullspace(&[], 3);
        assert_eq!(basis, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn primitive_vector_is_reduced_and_sign_normalised() {
        let v = vec![
            BigRational::new((-2).into(), 3.into()),
            BigRational::new(4.into(), 3.into()),
        ];
        assert_eq!(primitive_integer(&v), vec![1, -2]);
    }

    #[test]
    fn three_cycle_relation_is_found() {
        let rows = vec![vec![1, -1, 0], vec![0, 1, -1], vec![-1, 0, 1]];
        let dep = row_dependence(&rows);
        assert_eq!(dep.independent, vec![0, 1]);
        assert_eq!(dep.relations.len(), 1);
        let rel = &dep.relations[0];
        assert_eq!(rel.row, 2);
        let coeffs = rel.coefficients_f64();
        assert_eq!(coeffs, vec![(0, 1.0), (1, 1.0), (2, 1.0)]);
    }

    #[test]
    fn solve_reports_mismatch_along_cycles() {
        let rows = vec![vec![1, -1, 0], vec![0, 1, -1], vec![-1, 0, 1]];
        let s = solve(&rows, &[0.5, 0.25, 0.0], 3);
        assert!((s.max_abs_mismatch() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn solve_is_minimum_norm() {
        // x0 - x1 = 1 has minimum-norm solution (1/2, -1/2)
        let s = solve(&[vec![1, -1]], &[1.0], 2);
        assert!((s.solution[0] - 0.5).abs() < 1e-15);
        assert!((s.solution[1] + 0.5).abs() < 1e-15);
        assert!(s.relations.is_empty());
    }
}
