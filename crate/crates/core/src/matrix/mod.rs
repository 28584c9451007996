//! Exact integer matrices.
//!
//! Everything here works over arbitrary-precision integers. Determinants use
//! fraction-free (Bareiss) elimination so every intermediate value stays an
//! integer and minor tests are exact.

mod auxiliary;
mod complify;
mod io;
mod minors;

pub(crate) use io::content_lines;

pub use auxiliary::{
    build_auxiliary, random_tns_block, verify_auxiliary, AuxMatrix, AuxSpec, SAMPLE_BLOCK,
};
pub use complify::{complify, complify_column_source, ColumnSource};
pub use minors::{
    is_highly_non_singular, is_totally_non_singular, RowOp, MAX_MINOR_DIMENSION,
    MAX_COLUMN_SUBSETS,
};

use std::fmt;
use std::ops::Range;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatrixError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("highly non-singular test needs rows <= cols, got {rows}x{cols}")]
    TooManyRows { rows: usize, cols: usize },
    #[error("entries length {len} does not match {rows}x{cols}")]
    EntryCount { rows: usize, cols: usize, len: usize },
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("minor enumeration too large: {0}")]
    TooLarge(String),
    #[error("invalid auxiliary parameters: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("block {index} is not totally non-singular")]
    SingularBlock { index: usize },
    #[error("diagonal entry {index} is zero")]
    ZeroDiagonal { index: usize },
    #[error("matrix is not auxiliary of type {0}")]
    NotAuxiliary(String),
    #[error("entry does not fit in a machine integer")]
    Overflow,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, MatrixError>;

/// Dense row-major integer matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<BigInt>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(MatrixError::EntryCount {
                rows,
                cols,
                len: entries.len(),
            });
        }
        Ok(IntMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_i64(rows: usize, cols: usize, entries: &[i64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&v| BigInt::from(v)).collect())
    }

    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(MatrixError::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            entries.extend(row.iter().map(|&v| BigInt::from(v)));
        }
        Self::new(rows.len(), cols, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            entries: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn diagonal(diag: &[BigInt]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.entries[i * n + i] = d.clone();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[BigInt] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.entries[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero_at(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_zero()
    }

    /// Entries as `i64`, row-major. Fails if any entry overflows.
    pub fn to_i64(&self) -> Result<Vec<i64>> {
        self.entries
            .iter()
            .map(|v| v.to_i64().ok_or(MatrixError::Overflow))
            .collect()
    }

    pub fn max_abs(&self) -> BigInt {
        self.entries
            .iter()
            .map(|v| v.abs())
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    /// Horizontal concatenation `(self | other)`.
    pub fn hconcat(&self, other: &IntMatrix) -> Result<Self> {
        if self.rows != other.rows {
            return Err(MatrixError::Shape(format!(
                "cannot concatenate {} rows with {} rows",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut entries = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            entries.extend_from_slice(self.row(i));
            entries.extend_from_slice(other.row(i));
        }
        Self::new(self.rows, cols, entries)
    }

    /// `(Id_r | self)` for an `r x s` matrix.
    pub fn augment_identity(&self) -> Self {
        Self::identity(self.rows)
            .hconcat(self)
            .expect("identity has matching rows")
    }

    /// Copy of rows `rows` and columns `cols` (0-based, half-open).
    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> Result<Self> {
        if rows.start > rows.end || rows.end > self.rows {
            return Err(MatrixError::OutOfRange(format!(
                "row range {rows:?} for {} rows",
                self.rows
            )));
        }
        if cols.start > cols.end || cols.end > self.cols {
            return Err(MatrixError::OutOfRange(format!(
                "column range {cols:?} for {} columns",
                self.cols
            )));
        }
        Ok(self.select(&rows.collect::<Vec<_>>(), &cols.collect::<Vec<_>>()))
    }

    /// Submatrix on arbitrary row and column index lists. Indices are trusted.
    pub(crate) fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                entries.push(self.get(i, j).clone());
            }
        }
        IntMatrix {
            rows: rows.len(),
            cols: cols.len(),
            entries,
        }
    }

    pub fn delete_column(&self, j: usize) -> Result<Self> {
        if j >= self.cols {
            return Err(MatrixError::OutOfRange(format!(
                "column {j} of {}",
                self.cols
            )));
        }
        let keep: Vec<usize> = (0..self.cols).filter(|&c| c != j).collect();
        Ok(self.select(&(0..self.rows).collect::<Vec<_>>(), &keep))
    }

    pub fn delete_row(&self, i: usize) -> Result<Self> {
        if i >= self.rows {
            return Err(MatrixError::OutOfRange(format!("row {i} of {}", self.rows)));
        }
        let keep: Vec<usize> = (0..self.rows).filter(|&r| r != i).collect();
        Ok(self.select(&keep, &(0..self.cols).collect::<Vec<_>>()))
    }

    /// Removes column `j` and row `i`.
    pub fn remove_column_and_row(&self, j: usize, i: usize) -> Result<Self> {
        self.delete_column(j)?.delete_row(i)
    }

    /// Applies elementary row operations in order.
    pub fn row_reduce_preserving(&self, ops: &[RowOp]) -> Result<Self> {
        let mut m = self.clone();
        for op in ops {
            m.apply_row_op(op)?;
        }
        Ok(m)
    }

    fn apply_row_op(&mut self, op: &RowOp) -> Result<()> {
        let check = |i: usize| {
            if i < self.rows {
                Ok(())
            } else {
                Err(MatrixError::OutOfRange(format!("row {i} of {}", self.rows)))
            }
        };
        match op {
            RowOp::Swap(a, b) => {
                check(*a)?;
                check(*b)?;
                for j in 0..self.cols {
                    self.entries.swap(a * self.cols + j, b * self.cols + j);
                }
            }
            RowOp::Scale(a, factor) => {
                check(*a)?;
                if factor.is_zero() {
                    return Err(MatrixError::Shape("row scaling by zero".into()));
                }
                for j in 0..self.cols {
                    self.entries[a * self.cols + j] *= factor;
                }
            }
            RowOp::AddMultiple {
                target,
                source,
                factor,
            } => {
                check(*target)?;
                check(*source)?;
                if target == source {
                    return Err(MatrixError::Shape(
                        "row addition needs distinct rows".into(),
                    ));
                }
                for j in 0..self.cols {
                    let add = &self.entries[source * self.cols + j] * factor;
                    self.entries[target * self.cols + j] += add;
                }
            }
        }
        Ok(())
    }

    /// Exact determinant by Bareiss elimination.
    pub fn det(&self) -> Result<BigInt> {
        if !self.is_square() {
            return Err(MatrixError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(bareiss_det(self.rows, self.entries.clone()))
    }
}

/// Fraction-free elimination on an `n x n` row-major buffer.
pub(crate) fn bareiss_det(n: usize, mut a: Vec<BigInt>) -> BigInt {
    if n == 0 {
        return BigInt::one();
    }
    let mut negate = false;
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k * n + k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a[i * n + k].is_zero()) else {
                return BigInt::zero();
            };
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            negate = !negate;
        }
        let pivot = a[k * n + k].clone();
        for i in k + 1..n {
            let lead = a[i * n + k].clone();
            for j in k + 1..n {
                let v = &a[i * n + j] * &pivot - &lead * &a[k * n + j];
                // exact by Sylvester's identity
                a[i * n + j] = v / &prev;
            }
            a[i * n + k] = BigInt::zero();
        }
        prev = pivot;
    }
    let d = a[n * n - 1].clone();
    if negate {
        -d
    } else {
        d
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{v}")?;
            }
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cofactor_det(m: &[Vec<i64>]) -> BigInt {
        let n = m.len();
        if n == 0 {
            return BigInt::one();
        }
        if n == 1 {
            return BigInt::from(m[0][0]);
        }
        let mut total = BigInt::zero();
        for c in 0..n {
            let minor: Vec<Vec<i64>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|&(j, _)| j != c)
                        .map(|(_, &v)| v)
                        .collect()
                })
                .collect();
            let term = BigInt::from(m[0][c]) * cofactor_det(&minor);
            if c % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
        total
    }

    #[test]
    fn identity_det_is_one() {
        assert_eq!(IntMatrix::identity(3).det().unwrap(), BigInt::one());
    }

    #[test]
    fn equal_rows_det_is_zero() {
        let m = IntMatrix::from_rows(&[[1, 2, 3], [4, 5, 6], [1, 2, 3]]).unwrap();
        assert_eq!(m.det().unwrap(), BigInt::zero());
    }

    #[test]
    fn non_square_det_rejected() {
        let m = IntMatrix::zeros(2, 3);
        assert!(matches!(m.det(), Err(MatrixError::NotSquare { .. })));
    }

    #[test]
    fn zero_leading_pivot_needs_swap() {
        let m = IntMatrix::from_rows(&[[0, 1], [1, 0]]).unwrap();
        assert_eq!(m.det().unwrap(), BigInt::from(-1));
    }

    #[test]
    fn random_5x5_matches_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rows: Vec<Vec<i64>> = (0..5)
                .map(|_| (0..5).map(|_| rng.gen_range(-9..=9)).collect())
                .collect();
            let m = IntMatrix::from_rows(&rows).unwrap();
            assert_eq!(m.det().unwrap(), cofactor_det(&rows));
        }
    }

    #[test]
    fn submatrix_bounds_checked() {
        let m = IntMatrix::identity(3);
        assert!(m.submatrix(0..4, 0..1).is_err());
        assert_eq!(m.submatrix(1..3, 1..3).unwrap(), IntMatrix::identity(2));
    }

    #[test]
    fn row_ops_preserve_det_up_to_scale() {
        let m = IntMatrix::from_rows(&[[2, 1, 0], [1, 3, 1], [0, 1, 4]]).unwrap();
        let d = m.det().unwrap();
        let ops = [
            RowOp::AddMultiple {
                target: 0,
                source: 2,
                factor: BigInt::from(-3),
            },
            RowOp::Swap(1, 2),
            RowOp::Scale(0, BigInt::from(5)),
        ];
        let reduced = m.row_reduce_preserving(&ops).unwrap();
        assert_eq!(reduced.det().unwrap(), -d * 5);
    }
}
