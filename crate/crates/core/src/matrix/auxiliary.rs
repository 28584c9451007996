//! Linked-block and auxiliary matrices.
//!
//! An auxiliary matrix of type `(n, t, omega)_{r,l}` is `D = (U | V)` with `U`
//! a non-singular diagonal matrix of size `R = (n-1)(r-l) + t` and `V` a
//! staircase of totally non-singular blocks. The first block is
//! `t x (t-l+omega)`, later blocks are `r x (r-l)`, and consecutive blocks
//! share `l` rows. Blocks are placed by their lower-right corner.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{is_totally_non_singular, IntMatrix, MatrixError, Result};

/// The 5x3 totally non-singular block used for the (3,5,0)_{5,2} example.
pub const SAMPLE_BLOCK: [[i64; 3]; 5] = [[1, 9, 1], [2, 7, 7], [8, 4, 3], [3, 1, 7], [3, 7, 9]];

/// Parameters `(n, t, omega)_{r,l}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuxSpec {
    pub n: usize,
    pub t: usize,
    pub omega: usize,
    pub r: usize,
    pub l: usize,
}

impl AuxSpec {
    pub fn new(n: usize, t: usize, omega: usize, r: usize, l: usize) -> Result<Self> {
        let spec = AuxSpec { n, t, omega, r, l };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(MatrixError::InvalidSpec("n must be at least 1".into()));
        }
        if self.r < 2 * self.l {
            return Err(MatrixError::InvalidSpec(format!(
                "need r >= 2l, got r={} l={}",
                self.r, self.l
            )));
        }
        if self.t < self.l {
            return Err(MatrixError::InvalidSpec(format!(
                "need t >= l, got t={} l={}",
                self.t, self.l
            )));
        }
        if self.omega > self.l {
            return Err(MatrixError::InvalidSpec(format!(
                "need omega <= l, got omega={} l={}",
                self.omega, self.l
            )));
        }
        Ok(())
    }

    /// Row count `R = (n-1)(r-l) + t`.
    pub fn row_count(&self) -> usize {
        (self.n - 1) * (self.r - self.l) + self.t
    }

    /// Column count `S = 2R - l + omega`.
    pub fn col_count(&self) -> usize {
        2 * self.row_count() - self.l + self.omega
    }

    /// `(rows, cols)` of block `k` (0-based).
    pub fn block_format(&self, k: usize) -> (usize, usize) {
        if k == 0 {
            (self.t, self.t - self.l + self.omega)
        } else {
            (self.r, self.r - self.l)
        }
    }

    /// 1-based lower-right corners `(i_m, j_m)` of the blocks, in `D` coordinates.
    pub fn block_corners(&self) -> Vec<(usize, usize)> {
        let big_r = self.row_count();
        let (mut i, mut j) = self.block_format(0);
        let mut corners = vec![(i, big_r + j)];
        for _ in 1..self.n {
            i += self.r - self.l;
            j += self.r - self.l;
            corners.push((i, big_r + j));
        }
        corners
    }

    /// 0-based half-open `(rows, cols)` ranges of every block in `D`.
    pub fn block_ranges(&self) -> Vec<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        self.block_corners()
            .into_iter()
            .enumerate()
            .map(|(k, (i, j))| {
                let (h, w) = self.block_format(k);
                (i - h..i, j - w..j)
            })
            .collect()
    }
}

impl fmt::Display for AuxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})_{{{},{}}}",
            self.n, self.t, self.omega, self.r, self.l
        )
    }
}

/// A matrix that has been checked against an [`AuxSpec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxMatrix {
    matrix: IntMatrix,
    spec: AuxSpec,
    block_corners: Vec<(usize, usize)>,
}

impl AuxMatrix {
    /// Wraps `matrix` after running [`verify_auxiliary`].
    pub fn new(matrix: IntMatrix, spec: AuxSpec) -> Result<Self> {
        if !verify_auxiliary(&matrix, &spec)? {
            return Err(MatrixError::NotAuxiliary(spec.to_string()));
        }
        Ok(AuxMatrix {
            block_corners: spec.block_corners(),
            matrix,
            spec,
        })
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.matrix
    }

    pub fn spec(&self) -> &AuxSpec {
        &self.spec
    }

    pub fn block_corners(&self) -> &[(usize, usize)] {
        &self.block_corners
    }

    pub fn into_matrix(self) -> IntMatrix {
        self.matrix
    }
}

/// Assembles `(U | V)` from the blocks and the diagonal of `U`.
pub fn build_auxiliary(blocks: &[IntMatrix], diag: &[BigInt], spec: AuxSpec) -> Result<AuxMatrix> {
    spec.validate()?;
    if blocks.len() != spec.n {
        return Err(MatrixError::Shape(format!(
            "expected {} blocks, got {}",
            spec.n,
            blocks.len()
        )));
    }
    let big_r = spec.row_count();
    let big_s = spec.col_count();
    if diag.len() != big_r {
        return Err(MatrixError::Shape(format!(
            "diagonal has {} entries, expected {big_r}",
            diag.len()
        )));
    }
    if let Some(index) = diag.iter().position(|d| d.is_zero()) {
        return Err(MatrixError::ZeroDiagonal { index });
    }
    for (k, block) in blocks.iter().enumerate() {
        let want = spec.block_format(k);
        if (block.rows(), block.cols()) != want {
            return Err(MatrixError::Shape(format!(
                "block {k} is {}x{}, expected {}x{}",
                block.rows(),
                block.cols(),
                want.0,
                want.1
            )));
        }
        if !is_totally_non_singular(block)? {
            return Err(MatrixError::SingularBlock { index: k });
        }
    }
    let mut m = IntMatrix::zeros(big_r, big_s);
    for (i, d) in diag.iter().enumerate() {
        m.set(i, i, d.clone());
    }
    for (block, (rows, cols)) in blocks.iter().zip(spec.block_ranges()) {
        for (bi, i) in rows.enumerate() {
            for (bj, j) in cols.clone().enumerate() {
                m.set(i, j, block.get(bi, bj).clone());
            }
        }
    }
    AuxMatrix::new(m, spec)
}

/// Checks format, the diagonal left part, the block layout and total
/// non-singularity of every block.
pub fn verify_auxiliary(m: &IntMatrix, spec: &AuxSpec) -> Result<bool> {
    spec.validate()?;
    let big_r = spec.row_count();
    let big_s = spec.col_count();
    if m.rows() != big_r || m.cols() != big_s {
        return Ok(false);
    }
    for i in 0..big_r {
        for j in 0..big_r {
            if (i == j) == m.is_zero_at(i, j) {
                return Ok(false);
            }
        }
    }
    let ranges = spec.block_ranges();
    let mut covered = vec![false; big_r * big_s];
    for (rows, cols) in &ranges {
        for i in rows.clone() {
            for j in cols.clone() {
                covered[i * big_s + j] = true;
            }
        }
    }
    for i in 0..big_r {
        for j in big_r..big_s {
            if !covered[i * big_s + j] && !m.is_zero_at(i, j) {
                return Ok(false);
            }
        }
    }
    for (rows, cols) in ranges {
        if cols.is_empty() {
            continue;
        }
        if !is_totally_non_singular(&m.submatrix(rows, cols)?)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Uniform entries in `[1, 9]`, rejection-sampled until totally non-singular.
pub fn random_tns_block<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> IntMatrix {
    loop {
        let entries: Vec<i64> = (0..rows * cols).map(|_| rng.gen_range(1..=9)).collect();
        let m = IntMatrix::from_i64(rows, cols, &entries).expect("sized");
        if is_totally_non_singular(&m).expect("small block") {
            return m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn block() -> IntMatrix {
        IntMatrix::from_rows(&SAMPLE_BLOCK).unwrap()
    }

    fn ones(n: usize) -> Vec<BigInt> {
        vec![BigInt::from(1); n]
    }

    // The displayed 11x20 matrix, typed in entry by entry.
    fn displayed_11x20() -> IntMatrix {
        let v = SAMPLE_BLOCK;
        let mut rows = vec![vec![0i64; 20]; 11];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1;
        }
        for (anchor_row, anchor_col) in [(0usize, 11usize), (3, 14), (6, 17)] {
            for bi in 0..5 {
                for bj in 0..3 {
                    rows[anchor_row + bi][anchor_col + bj] = v[bi][bj];
                }
            }
        }
        IntMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn derived_sizes() {
        let s = AuxSpec::new(3, 5, 0, 5, 2).unwrap();
        assert_eq!((s.row_count(), s.col_count()), (11, 20));
        assert_eq!(s.block_corners(), vec![(5, 14), (8, 17), (11, 20)]);
    }

    #[test]
    fn invalid_specs() {
        assert!(AuxSpec::new(1, 2, 0, 3, 2).is_err());
        assert!(AuxSpec::new(1, 1, 0, 4, 2).is_err());
        assert!(AuxSpec::new(1, 2, 3, 4, 2).is_err());
        assert!(AuxSpec::new(0, 2, 0, 4, 2).is_err());
    }

    #[test]
    fn builds_the_displayed_matrix() {
        let spec = AuxSpec::new(3, 5, 0, 5, 2).unwrap();
        let aux = build_auxiliary(&[block(), block(), block()], &ones(11), spec).unwrap();
        assert_eq!(aux.matrix(), &displayed_11x20());
    }

    #[test]
    fn wrong_spec_rejected() {
        let m = displayed_11x20();
        assert!(verify_auxiliary(&m, &AuxSpec::new(3, 5, 0, 5, 2).unwrap()).unwrap());
        assert!(!verify_auxiliary(&m, &AuxSpec::new(3, 4, 0, 5, 2).unwrap()).unwrap());
    }

    #[test]
    fn trimmed_variants() {
        let m = displayed_11x20();
        let one = m.submatrix(1..11, 1..20).unwrap();
        assert!(verify_auxiliary(&one, &AuxSpec::new(3, 4, 1, 5, 2).unwrap()).unwrap());
        let two = m.submatrix(2..11, 2..20).unwrap();
        assert!(verify_auxiliary(&two, &AuxSpec::new(3, 3, 2, 5, 2).unwrap()).unwrap());
    }

    #[test]
    fn single_block_with_no_columns_is_diagonal() {
        let spec = AuxSpec::new(1, 3, 0, 6, 3).unwrap();
        assert_eq!((spec.row_count(), spec.col_count()), (3, 3));
        let empty = IntMatrix::zeros(3, 0);
        let aux = build_auxiliary(&[empty], &ones(3), spec).unwrap();
        assert_eq!(aux.matrix(), &IntMatrix::identity(3));
    }

    #[test]
    fn zeroed_block_entry_fails_verification() {
        let spec = AuxSpec::new(2, 5, 0, 5, 2).unwrap();
        let aux = build_auxiliary(&[block(), block()], &ones(8), spec).unwrap();
        let mut m = aux.into_matrix();
        m.set(4, 9, BigInt::zero());
        // the 1x1 minor at that position now vanishes
        assert!(!is_totally_non_singular(&m.submatrix(3..8, 8..11).unwrap()).unwrap());
        assert!(!verify_auxiliary(&m, &spec).unwrap());
    }

    #[test]
    fn stray_entry_outside_blocks_fails() {
        let mut m = displayed_11x20();
        m.set(0, 19, BigInt::from(1));
        assert!(!verify_auxiliary(&m, &AuxSpec::new(3, 5, 0, 5, 2).unwrap()).unwrap());
    }

    #[test]
    fn build_errors() {
        let spec = AuxSpec::new(2, 5, 0, 5, 2).unwrap();
        let mut diag = ones(8);
        assert!(matches!(
            build_auxiliary(&[block()], &diag, spec),
            Err(MatrixError::Shape(_))
        ));
        diag[3] = BigInt::zero();
        assert!(matches!(
            build_auxiliary(&[block(), block()], &diag, spec),
            Err(MatrixError::ZeroDiagonal { index: 3 })
        ));
        let mut bad = block();
        bad.set(0, 0, BigInt::from(2));
        bad.set(1, 0, BigInt::from(4));
        bad.set(1, 1, BigInt::from(18));
        assert!(matches!(
            build_auxiliary(&[block(), bad], &ones(8), spec),
            Err(MatrixError::SingularBlock { index: 1 })
        ));
    }

    #[test]
    fn random_blocks_build() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, t, omega, r, l) in [(1, 3, 1, 4, 2), (2, 2, 0, 4, 1), (3, 4, 2, 5, 2)] {
            let spec = AuxSpec::new(n, t, omega, r, l).unwrap();
            let blocks: Vec<IntMatrix> = (0..n)
                .map(|k| {
                    let (h, w) = spec.block_format(k);
                    random_tns_block(h, w, &mut rng)
                })
                .collect();
            let aux = build_auxiliary(&blocks, &ones(spec.row_count()), spec).unwrap();
            assert_eq!(aux.matrix().cols(), spec.col_count());
        }
    }
}
