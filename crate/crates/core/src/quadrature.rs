//! Globally adaptive 7-15 Gauss-Kronrod quadrature for vector integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5] and the centre
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult {
    pub value: Vec<f64>,
    /// Sum of the per-interval max-norm error estimates.
    pub error: f64,
    pub intervals: usize,
    pub converged: bool,
}

struct Piece {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rule<F: FnMut(f64) -> Vec<f64>>(f: &mut F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let n = fc.len();
    let mut k: Vec<f64> = fc.iter().map(|x| x * WGK[7]).collect();
    let mut g: Vec<f64> = fc.iter().map(|x| x * WG[3]).collect();
    for (j, &x) in XGK[..7].iter().enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        for i in 0..n {
            let s = f1[i] + f2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut error = 0.0f64;
    for i in 0..n {
        k[i] *= h;
        g[i] *= h;
        error = error.max((k[i] - g[i]).abs());
    }
    Piece {
        a,
        b,
        value: k,
        error,
    }
}

/// Integrates `f` over `[a, b]`, bisecting the interval with the largest
/// error estimate until the total estimate is below
/// `max(abs_tol, rel_tol * |I|_inf)` or `max_intervals` is reached.
pub fn integrate<F: FnMut(f64) -> Vec<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> QuadResult {
    let first = rule(&mut f, a, b);
    let mut total = first.value.clone();
    let mut err = first.error;
    let mut heap = BinaryHeap::from([first]);
    let bound = |total: &[f64]| abs_tol.max(rel_tol * total.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    while err > bound(&total) && heap.len() < max_intervals {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = rule(&mut f, worst.a, mid);
        let right = rule(&mut f, mid, worst.b);
        for i in 0..total.len() {
            total[i] += left.value[i] + right.value[i] - worst.value[i];
        }
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // re-sum to shed the rounding picked up by the running updates
    let mut value = vec![0.0; total.len()];
    let mut error = 0.0;
    for p in heap.iter() {
        for (v, x) in value.iter_mut().zip(&p.value) {
            *v += x;
        }
        error += p.error;
    }
    let converged = error <= bound(&value);
    QuadResult {
        value,
        error,
        intervals: heap.len(),
        converged,
    }
}
