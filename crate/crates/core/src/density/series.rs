//! Singular series terms
//! `A(q) = sum_{a mod q, (q, a) = 1} prod_j q^{-1} S(q, Lambda_j(a))`.

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;

use super::{DensityError, Result};
use crate::counting::MixedSystem;
use crate::expsum::CompleteSumGrid;

/// Imaginary residue allowed relative to the summed term magnitudes.
pub const IMAG_TOL: f64 = 1e-8;

/// Coefficients reduced for fast evaluation of `A(q)`.
#[derive(Debug, Clone)]
pub(crate) struct SeriesSystem {
    r3: usize,
    r2: usize,
    s: usize,
    /// `rows[i][j]`, cubic rows first.
    rows: Vec<Vec<i64>>,
}

impl SeriesSystem {
    pub(crate) fn new(sys: &MixedSystem) -> Self {
        SeriesSystem {
            r3: sys.r3(),
            r2: sys.r2(),
            s: sys.s(),
            rows: sys.stacked(),
        }
    }

    fn w(&self) -> usize {
        self.r3 + self.r2
    }

    /// Multiply-adds needed for `A(q)`.
    pub(crate) fn cost(&self, q: u64) -> f64 {
        (q as f64).powi(self.w() as i32) * self.s as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SeriesTerm {
    pub q: u64,
    pub value: f64,
    pub imag: f64,
    /// Sum of term magnitudes, the scale for the imaginary residue check.
    pub mass: f64,
}

/// `A(q)` with the conjugate-pair cancellation checked.
pub fn series_term(sys: &MixedSystem, q: u64) -> Result<SeriesTerm> {
    term(&SeriesSystem::new(sys), q)
}

pub(crate) fn term(sys: &SeriesSystem, q: u64) -> Result<SeriesTerm> {
    if q == 0 {
        return Err(DensityError::Shape("q must be positive".into()));
    }
    if q == 1 {
        return Ok(SeriesTerm {
            q,
            value: 1.0,
            imag: 0.0,
            mass: 1.0,
        });
    }
    let grid = CompleteSumGrid::new(q).expect("q >= 1");
    let qi = q as i64;
    // coefficients reduced mod q, one row per coordinate
    let rows: Vec<Vec<usize>> = sys
        .rows
        .iter()
        .map(|r| r.iter().map(|&c| c.rem_euclid(qi) as usize).collect())
        .collect();
    let scale = (q as f64).powi(-(sys.s as i32));
    let qu = q as usize;
    let (sum, mass) = (0..qu)
        .into_par_iter()
        .map(|a0| {
            let mut lam = vec![0usize; 2 * sys.s];
            let offset = if sys.r3 > 0 { 0 } else { sys.s };
            for (j, &c) in rows[0].iter().enumerate() {
                lam[offset + j] = c * a0 % qu;
            }
            let mut acc = (Complex64::new(0.0, 0.0), 0.0);
            let g = q.gcd(&(a0 as u64));
            if sys.w() == 1 {
                if g == 1 {
                    leaf(&lam, &grid, sys.s, &mut acc);
                }
            } else {
                walk(sys, &rows, &grid, qu, 1, g, &mut lam, &mut acc);
            }
            acc
        })
        .reduce(
            || (Complex64::new(0.0, 0.0), 0.0),
            |a, b| (a.0 + b.0, a.1 + b.1),
        );
    let sum = sum * scale;
    let mass = mass * scale;
    if sum.im.abs() > IMAG_TOL * mass.max(1.0) {
        return Err(DensityError::Integrity(format!(
            "A({q}) has imaginary residue {:.3e} against mass {mass:.3e}",
            sum.im
        )));
    }
    Ok(SeriesTerm {
        q,
        value: sum.re,
        imag: sum.im,
        mass,
    })
}

fn leaf(lam: &[usize], grid: &CompleteSumGrid, s: usize, acc: &mut (Complex64, f64)) {
    let mut prod = Complex64::new(1.0, 0.0);
    for j in 0..s {
        prod *= grid.get(lam[j], lam[s + j]);
    }
    acc.0 += prod;
    acc.1 += prod.norm();
}

/// Runs `a_depth` over `0..q`, adding row `depth` into `Lambda` (cubic in
/// `lam[..s]`, quadratic in `lam[s..]`) one step at a time. After `q`
/// steps the row has been added `q` times, which restores `lam`.
#[allow(clippy::too_many_arguments)]
fn walk(
    sys: &SeriesSystem,
    rows: &[Vec<usize>],
    grid: &CompleteSumGrid,
    q: usize,
    depth: usize,
    g: u64,
    lam: &mut [usize],
    acc: &mut (Complex64, f64),
) {
    let s = sys.s;
    let offset = if depth < sys.r3 { 0 } else { s };
    let row = &rows[depth];
    let last = depth + 1 == sys.w();
    for a in 0..q {
        let ga = g.gcd(&(a as u64));
        if last {
            if ga == 1 {
                leaf(lam, grid, s, acc);
            }
        } else {
            walk(sys, rows, grid, q, depth + 1, ga, lam, acc);
        }
        for j in 0..s {
            let v = lam[offset + j] + row[j];
            lam[offset + j] = if v >= q { v - q } else { v };
        }
    }
}

/// Truncated singular series `sum_{q <= Y} A(q)` with every term.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SeriesReport {
    pub y: u64,
    pub value: f64,
    pub terms: Vec<SeriesTerm>,
}

pub fn singular_series(sys: &MixedSystem, y: u64) -> Result<SeriesReport> {
    if y < 1 {
        return Err(DensityError::Shape("Y must be at least 1".into()));
    }
    let ss = SeriesSystem::new(sys);
    let terms: Vec<SeriesTerm> = (1..=y).map(|q| term(&ss, q)).collect::<Result<_>>()?;
    Ok(SeriesReport {
        y,
        value: terms.iter().map(|t| t.value).sum(),
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsum::complete_sum_s;

    fn sample() -> MixedSystem {
        MixedSystem::from_i64(
            &[vec![1, -2, 3, 1, -1]],
            &[vec![2, 1, -1, -3, 1], vec![1, 4, 1, -1, -2]],
            5,
        )
        .unwrap()
    }

    /// Direct expansion over `[1, q]^w` with the gcd condition.
    fn oracle(sys: &MixedSystem, q: u64) -> Complex64 {
        let rows = sys.stacked();
        let (r3, w, s) = (sys.r3(), sys.w(), sys.s());
        let mut total = Complex64::new(0.0, 0.0);
        let count = q.pow(w as u32);
        for idx in 0..count {
            let mut a = vec![0i64; w];
            let mut t = idx;
            for ai in a.iter_mut() {
                *ai = (t % q) as i64 + 1;
                t /= q;
            }
            let g = a.iter().fold(q as i64, |g, &x| g.gcd(&x));
            if g != 1 {
                continue;
            }
            let mut prod = Complex64::new(1.0, 0.0);
            for j in 0..s {
                let l3: i64 = (0..r3).map(|i| rows[i][j] * a[i]).sum();
                let l2: i64 = (r3..w).map(|i| rows[i][j] * a[i]).sum();
                prod *= complete_sum_s(q, l3, l2).unwrap() / q as f64;
            }
            total += prod;
        }
        total
    }

    #[test]
    fn y_one_is_one() {
        assert_eq!(singular_series(&sample(), 1).unwrap().value, 1.0);
    }

    #[test]
    fn terms_match_direct_expansion() {
        let sys = sample();
        for q in [2u64, 3, 4, 6] {
            let t = series_term(&sys, q).unwrap();
            let o = oracle(&sys, q);
            assert!((t.value - o.re).abs() < 1e-12, "q={q}: {} vs {}", t.value, o.re);
            assert!(o.im.abs() < 1e-12);
        }
    }

    #[test]
    fn multiplicative_in_coprime_moduli() {
        let sys = sample();
        let a2 = series_term(&sys, 2).unwrap().value;
        let a3 = series_term(&sys, 3).unwrap().value;
        let a6 = series_term(&sys, 6).unwrap().value;
        assert!((a6 - a2 * a3).abs() < 1e-12);
        let a4 = series_term(&sys, 4).unwrap().value;
        let a5 = series_term(&sys, 5).unwrap().value;
        let a20 = series_term(&sys, 20).unwrap().value;
        assert!((a20 - a4 * a5).abs() < 1e-12);
    }
}
