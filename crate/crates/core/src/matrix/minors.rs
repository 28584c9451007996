use itertools::Itertools;
use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::Zero;

use super::{bareiss_det, IntMatrix, MatrixError, Result};

/// Largest `min(rows, cols)` accepted by [`is_totally_non_singular`].
pub const MAX_MINOR_DIMENSION: usize = 12;

/// Largest number of column subsets [`is_highly_non_singular`] will enumerate.
pub const MAX_COLUMN_SUBSETS: u128 = 20_000_000;

/// Elementary row operation over the rationals, with integer data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowOp {
    Swap(usize, usize),
    /// Multiply a row by a non-zero integer.
    Scale(usize, BigInt),
    /// `row[target] += factor * row[source]`.
    AddMultiple {
        target: usize,
        source: usize,
        factor: BigInt,
    },
}

fn minor(m: &IntMatrix, rows: &[usize], cols: &[usize]) -> BigInt {
    let mut buf = Vec::with_capacity(rows.len() * cols.len());
    for &i in rows {
        for &j in cols {
            buf.push(m.get(i, j).clone());
        }
    }
    bareiss_det(rows.len(), buf)
}

/// True iff every choice of `rows` columns gives a non-singular square matrix.
pub fn is_highly_non_singular(m: &IntMatrix) -> Result<bool> {
    let (r, s) = (m.rows(), m.cols());
    if r > s {
        return Err(MatrixError::TooManyRows { rows: r, cols: s });
    }
    let subsets = binomial(s as u128, r as u128);
    if subsets > MAX_COLUMN_SUBSETS {
        return Err(MatrixError::TooLarge(format!(
            "{subsets} column subsets for a {r}x{s} matrix"
        )));
    }
    let all_rows: Vec<usize> = (0..r).collect();
    Ok((0..s)
        .combinations(r)
        .all(|cols| !minor(m, &all_rows, &cols).is_zero()))
}

/// True iff no minor of any order vanishes.
pub fn is_totally_non_singular(m: &IntMatrix) -> Result<bool> {
    let (r, s) = (m.rows(), m.cols());
    let k_max = r.min(s);
    if k_max > MAX_MINOR_DIMENSION {
        return Err(MatrixError::TooLarge(format!(
            "minimum dimension {k_max} exceeds {MAX_MINOR_DIMENSION}"
        )));
    }
    if m.entries().iter().any(|v| v.is_zero()) {
        return Ok(false);
    }
    for k in 2..=k_max {
        for rows in (0..r).combinations(k) {
            for cols in (0..s).combinations(k) {
                if minor(m, &rows, &cols).is_zero() {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
