//! Weyl sums, complete rational sums and the cubic oscillatory integral.
//!
//! Phases are reduced modulo 1 exactly before any trigonometric call: an
//! `f64` is a dyadic rational `m / 2^k`, so `frac(eta * n)` for an integer
//! `n` is `(m n mod 2^k) / 2^k`, computed in integer arithmetic.

mod complete;
mod minor;
mod quad;

pub use complete::{complete_sum_s, CompleteSumGrid};
pub use minor::{minor_arc_sup_check, minor_arc_sup_over, MinorArcReport};
pub(crate) use quad::adaptive_gk;
pub use quad::{oscillatory_v, QuadResult, DEFAULT_PANEL_BUDGET};

use std::f64::consts::TAU;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Float, ToPrimitive};
use rayon::prelude::*;
use thiserror::Error;

use crate::counting::MixedSystem;
use crate::matrix::IntMatrix;

/// Largest box radius accepted by the Weyl sums.
pub const MAX_SUM_P: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpSumError {
    #[error("P = {0} exceeds the supported maximum {MAX_SUM_P}")]
    TooLarge(u64),
    #[error("modulus must be at least 1")]
    InvalidModulus,
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("quadrature did not converge within {panels} panels: estimate {best} with error {error:.3e}")]
    NoConvergence {
        best: Complex64,
        error: f64,
        panels: usize,
    },
    #[error("minor arc check needs P >= 16, got {0}")]
    SmallP(u64),
    #[error("all {0} sample points lie on major arcs")]
    AllMajor(usize),
}

pub type Result<T> = std::result::Result<T, ExpSumError>;

/// `e(t) = exp(2 pi i t)`.
pub fn e(t: f64) -> Complex64 {
    let r = t - t.round();
    Complex64::from_polar(1.0, TAU * r)
}

/// `frac(x * n)` in `[0, 1)`, exact up to the final rounding.
pub fn frac_mul(x: f64, n: i128) -> f64 {
    debug_assert!(x.is_finite());
    let (mant, exp, sign) = x.integer_decode();
    if mant == 0 || n == 0 || exp >= 0 {
        return 0.0;
    }
    let k = (-exp) as u32;
    let m = sign as i128 * mant as i128;
    let out = match m.checked_mul(n) {
        Some(prod) if k <= 126 => {
            let modulus = 1i128 << k;
            prod.rem_euclid(modulus) as f64 / modulus as f64
        }
        Some(prod) => (prod as f64 * 2f64.powi(-(k as i32))).rem_euclid(1.0),
        None => {
            let modulus = BigInt::from(1) << k;
            let r = (BigInt::from(m) * BigInt::from(n)).mod_floor(&modulus);
            let shift = k.saturating_sub(100);
            let top = (r >> shift).to_f64().unwrap_or(0.0);
            top * 2f64.powi(-((k - shift) as i32))
        }
    };
    if out >= 1.0 {
        0.0
    } else {
        out
    }
}

/// Reduces `t` to `[0, 1)`.
pub fn frac(t: f64) -> f64 {
    let r = t.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn check_p(p: u64) -> Result<()> {
    if p > MAX_SUM_P {
        Err(ExpSumError::TooLarge(p))
    } else {
        Ok(())
    }
}

/// `g(eta) = sum_{|x| <= P} e(eta x^3)`. Odd symmetry makes it real.
pub fn eval_g(eta: f64, p: u64) -> Result<Complex64> {
    check_p(p)?;
    if !eta.is_finite() {
        return Err(ExpSumError::NonFinite);
    }
    let mut re = 1.0;
    for x in 1..=p as i128 {
        re += 2.0 * (TAU * frac_mul(eta, x * x * x)).cos();
    }
    Ok(Complex64::new(re, 0.0))
}

/// `f(alpha, beta) = sum_{|x| <= P} e(alpha x^3 + beta x^2)`.
pub fn eval_f(alpha: f64, beta: f64, p: u64) -> Result<Complex64> {
    check_p(p)?;
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(ExpSumError::NonFinite);
    }
    let mut acc = Complex64::new(1.0, 0.0);
    for x in 1..=p as i128 {
        let x2 = x * x;
        let c = frac_mul(alpha, x2 * x);
        let q = frac_mul(beta, x2);
        acc += e(c + q) + e(q - c);
    }
    Ok(acc)
}

/// `g` over many points, in input order.
pub fn eval_g_batch(etas: &[f64], p: u64) -> Result<Vec<Complex64>> {
    etas.par_iter().map(|&eta| eval_g(eta, p)).collect()
}

/// `f` over many points, in input order.
pub fn eval_f_batch(points: &[(f64, f64)], p: u64) -> Result<Vec<Complex64>> {
    points.par_iter().map(|&(a, b)| eval_f(a, b, p)).collect()
}

/// `oint |g|^4` as an exact integer: the constant term of `g^2 conj(g)^2`
/// viewed as a Laurent polynomial in `e(eta)`.
pub fn fourth_moment_exact(p: u64) -> u128 {
    use std::collections::HashMap;
    let mut pair_sums: HashMap<i128, u128> = HashMap::new();
    let r = p as i128;
    for x in -r..=r {
        for y in -r..=r {
            *pair_sums.entry(x * x * x + y * y * y).or_insert(0) += 1;
        }
    }
    pair_sums.values().map(|c| c * c).sum()
}

/// A point of the torus, coordinates in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(ExpSumError::NonFinite);
        }
        Ok(TorusPoint(coords.into_iter().map(frac).collect()))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

fn linear_form(coeffs: impl Iterator<Item = i128>, point: &[f64]) -> f64 {
    frac(coeffs.zip(point).map(|(c, &x)| frac_mul(x, c)).sum())
}

fn to_i128(m: &IntMatrix) -> Result<Vec<i128>> {
    m.entries()
        .iter()
        .map(|v| {
            v.to_i128()
                .ok_or_else(|| ExpSumError::Shape("coefficient exceeds 128 bits".into()))
        })
        .collect()
}

/// `theta_j = sum_i d_{i,j} eta_i mod 1` for an `R x S` matrix `d`.
pub fn eval_theta(d: &IntMatrix, eta: &TorusPoint) -> Result<TorusPoint> {
    if d.rows() != eta.dim() {
        return Err(ExpSumError::Shape(format!(
            "matrix has {} rows, point has {} coordinates",
            d.rows(),
            eta.dim()
        )));
    }
    let (rows, cols) = (d.rows(), d.cols());
    let entries = to_i128(d)?;
    let theta = (0..cols)
        .map(|j| linear_form((0..rows).map(|i| entries[i * cols + j]), eta.coords()))
        .collect();
    Ok(TorusPoint(theta))
}

/// Per-column `(gamma_3, gamma_2)` for `alpha = (alpha_3 block, alpha_2
/// block)`.
pub fn eval_gamma(sys: &MixedSystem, alpha: &TorusPoint) -> Result<Vec<(f64, f64)>> {
    let (r2, r3, s) = (sys.r2(), sys.r3(), sys.s());
    if alpha.dim() != r2 + r3 {
        return Err(ExpSumError::Shape(format!(
            "system has {} equations, point has {} coordinates",
            r2 + r3,
            alpha.dim()
        )));
    }
    let (a3, a2) = alpha.coords().split_at(r3);
    let c3 = to_i128(sys.c3())?;
    let c2 = to_i128(sys.c2())?;
    Ok((0..s)
        .map(|j| {
            (
                linear_form((0..r3).map(|i| c3[i * s + j]), a3),
                linear_form((0..r2).map(|i| c2[i * s + j]), a2),
            )
        })
        .collect())
}
