//! Adaptive Gauss–Kronrod (7, 15) quadrature for
//! `v(beta, P) = int_{-P}^{P} e(beta_3 z^3 + beta_2 z^2) dz`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use super::{e, ExpSumError, Result};

pub const DEFAULT_PANEL_BUDGET: usize = 2_000_000;

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
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QuadResult {
    pub re: f64,
    pub im: f64,
    /// Sum of per-panel `|K15 - G7|` estimates.
    pub error: f64,
    pub panels: usize,
}

impl QuadResult {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kron += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kron * h;
    let error = ((kron - gauss) * h).norm();
    Panel { a, b, value, error }
}

/// Absolute-tolerance adaptive integration of `e(beta3 z^3 + beta2 z^2)`
/// over `[-P, P]`. Initial panels are about one local oscillation wide;
/// the worst panel is bisected until the summed error estimate is below
/// `tol`.
pub fn oscillatory_v(beta3: f64, beta2: f64, p: f64, tol: f64, panel_budget: usize) -> Result<QuadResult> {
    if !(tol > 0.0) || !beta3.is_finite() || !beta2.is_finite() || !p.is_finite() || p < 0.0 {
        return Err(ExpSumError::Shape(format!(
            "need tol > 0 and finite P >= 0, got tol={tol}, P={p}"
        )));
    }
    if p == 0.0 {
        return Ok(QuadResult {
            re: 0.0,
            im: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let f = |z: f64| e(z * z * (beta3 * z + beta2));
    let width = 1.0 / (3.0 * beta3.abs() * p * p + 2.0 * beta2.abs() * p + 1.0);
    adaptive_gk(f, -p, p, (2.0 * p / width).ceil().max(1.0), tol, panel_budget)
}

/// Adaptive GK15 integration of `f` over `[a, b]` starting from `wanted`
/// equal panels. If `wanted` exceeds the panel budget a budget-sized
/// partition is evaluated and returned as the best estimate.
pub(crate) fn adaptive_gk<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    wanted: f64,
    tol: f64,
    panel_budget: usize,
) -> Result<QuadResult> {
    let over_budget = wanted > panel_budget as f64;
    let n0 = if over_budget {
        panel_budget.max(1) as f64
    } else {
        wanted.max(1.0)
    };
    let n0 = n0 as usize;
    let h = (b - a) / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(2 * n0);
    for i in 0..n0 {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == n0 { b } else { lo + h };
        heap.push(gk15(&f, lo, hi));
    }
    let totals = |heap: &BinaryHeap<Panel>| {
        heap.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(v, err), pn| {
            (v + pn.value, err + pn.error)
        })
    };
    let (mut value, mut error) = totals(&heap);
    if over_budget && error > tol {
        return Err(ExpSumError::NoConvergence {
            best: value,
            error,
            panels: heap.len(),
        });
    }
    let mut steps = 0usize;
    while error > tol {
        if heap.len() >= panel_budget {
            let (value, error) = totals(&heap);
            return Err(ExpSumError::NoConvergence {
                best: value,
                error,
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel too narrow to split further
            heap.push(worst);
            let (value, error) = totals(&heap);
            return Err(ExpSumError::NoConvergence {
                best: value,
                error,
                panels: heap.len(),
            });
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        steps += 1;
        if steps % 4096 == 0 {
            (value, error) = totals(&heap);
        }
    }
    let (value, error) = totals(&heap);
    Ok(QuadResult {
        re: value.re,
        im: value.im,
        error,
        panels: heap.len(),
    })
}
