//! The doubling step on a pair `(D2, D3)` with `D3` auxiliary of type
//! `(n, r, 0)_{r,l}`.
//!
//! Write `rho = n(r-l)`. The cubic variables split into `rho` "private" rows
//! and `l` shared rows. Doubling keeps one copy of the private rows, keeps the
//! shared rows, and appends a second copy of the private rows in reverse
//! order. The `4 rho + l` output columns are drawn from the input columns by a
//! four-way case split; columns taken from the second copy see the reversed
//! private rows.

use super::{build_auxiliary, AuxMatrix, AuxSpec, IntMatrix, MatrixError, Result};

/// Where an output column of the doubled system comes from (0-based input
/// column index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnSource {
    /// Column of the original system, private rows unchanged.
    Original(usize),
    /// Column of the mirrored copy, private rows reversed.
    Mirrored(usize),
}

/// Source of output column `i` (0-based) for parameters `rho`, `l`.
pub fn complify_column_source(rho: usize, l: usize, i: usize) -> ColumnSource {
    // 1-based index as in the case split
    let c = i + 1;
    if c <= rho + l {
        ColumnSource::Original(c - 1)
    } else if c <= 2 * rho + l {
        ColumnSource::Mirrored(2 * rho + l + 1 - c - 1)
    } else if c <= 3 * rho + l {
        ColumnSource::Original(c - rho - 1)
    } else {
        assert!(c <= 4 * rho + l, "column {i} out of range");
        ColumnSource::Mirrored(5 * rho + 2 * l + 1 - c - 1)
    }
}

/// Doubles `(d2, d3)`: returns `(D2', D3')` with `D3'` auxiliary of type
/// `(2n, r, 0)_{r,l}` and `D2'` of format `l x (4 rho + l)`.
pub fn complify(d2: &IntMatrix, d3: &AuxMatrix) -> Result<(IntMatrix, AuxMatrix)> {
    let spec = *d3.spec();
    if spec.t != spec.r || spec.omega != 0 {
        return Err(MatrixError::NotAuxiliary(format!(
            "complification needs type (n,r,0)_{{r,l}}, got {spec}"
        )));
    }
    let (n, r, l) = (spec.n, spec.r, spec.l);
    let rho = n * (r - l);
    if d2.rows() != l || d2.cols() != 2 * rho + l {
        return Err(MatrixError::Shape(format!(
            "quadratic matrix must be {l}x{}, got {}x{}",
            2 * rho + l,
            d2.rows(),
            d2.cols()
        )));
    }
    let m3 = d3.matrix();
    let out_rows = 2 * rho + l;
    let out_cols = 4 * rho + l;
    let mirrored_row = |k: usize| if k < rho { 2 * rho + l - 1 - k } else { k };

    let mut new3 = IntMatrix::zeros(out_rows, out_cols);
    let mut new2 = IntMatrix::zeros(l, out_cols);
    for i in 0..out_cols {
        let (src, mirrored) = match complify_column_source(rho, l, i) {
            ColumnSource::Original(j) => (j, false),
            ColumnSource::Mirrored(j) => (j, true),
        };
        for k in 0..rho + l {
            let row = if mirrored { mirrored_row(k) } else { k };
            new3.set(row, i, m3.get(k, src).clone());
        }
        for k in 0..l {
            new2.set(k, i, d2.get(k, src).clone());
        }
    }
    let new_spec = AuxSpec::new(2 * n, r, 0, r, l)?;
    // rebuild through the checked constructor so layout errors surface
    let diag: Vec<_> = (0..out_rows).map(|i| new3.get(i, i).clone()).collect();
    let blocks: Vec<IntMatrix> = new_spec
        .block_ranges()
        .into_iter()
        .map(|(rows, cols)| new3.submatrix(rows, cols))
        .collect::<Result<_>>()?;
    let rebuilt = build_auxiliary(&blocks, &diag, new_spec)?;
    if rebuilt.matrix() != &new3 {
        return Err(MatrixError::NotAuxiliary(new_spec.to_string()));
    }
    Ok((new2, rebuilt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{verify_auxiliary, SAMPLE_BLOCK};
    use num_bigint::BigInt;

    fn start() -> (IntMatrix, AuxMatrix) {
        let spec = AuxSpec::new(1, 5, 0, 5, 2).unwrap();
        let block = IntMatrix::from_rows(&SAMPLE_BLOCK).unwrap();
        let d3 = build_auxiliary(&[block], &vec![BigInt::from(1); 5], spec).unwrap();
        let d2 = IntMatrix::from_rows(&[
            [1, 2, 3, 4, 5, 6, 7, 8],
            [2, 3, 5, 7, 11, 13, 17, 19],
        ])
        .unwrap();
        (d2, d3)
    }

    #[test]
    fn column_source_case_split() {
        // rho = 3, l = 2
        let got: Vec<_> = (0..14).map(|i| complify_column_source(3, 2, i)).collect();
        use ColumnSource::*;
        assert_eq!(
            got,
            vec![
                Original(0),
                Original(1),
                Original(2),
                Original(3),
                Original(4),
                Mirrored(2),
                Mirrored(1),
                Mirrored(0),
                Original(5),
                Original(6),
                Original(7),
                Mirrored(7),
                Mirrored(6),
                Mirrored(5),
            ]
        );
    }

    #[test]
    fn doubling_once_and_twice() {
        let (d2, d3) = start();
        let (d2b, d3b) = complify(&d2, &d3).unwrap();
        assert_eq!(d2b.cols(), 4 * 3 + 2);
        assert!(verify_auxiliary(d3b.matrix(), &AuxSpec::new(2, 5, 0, 5, 2).unwrap()).unwrap());
        let (d2c, d3c) = complify(&d2b, &d3b).unwrap();
        assert_eq!(d2c.cols(), 4 * 6 + 2);
        assert!(verify_auxiliary(d3c.matrix(), &AuxSpec::new(4, 5, 0, 5, 2).unwrap()).unwrap());
    }

    #[test]
    fn rejects_wrong_type_and_format() {
        let (d2, d3) = start();
        let short = d2.submatrix(0..2, 0..7).unwrap();
        assert!(matches!(complify(&short, &d3), Err(MatrixError::Shape(_))));
        let spec = AuxSpec::new(1, 3, 1, 4, 2).unwrap();
        let blk = IntMatrix::from_rows(&[[1, 2], [3, 5], [7, 4]]).unwrap();
        let other = build_auxiliary(&[blk], &vec![BigInt::from(1); 3], spec).unwrap();
        assert!(matches!(
            complify(&d2, &other),
            Err(MatrixError::NotAuxiliary(_))
        ));
    }

    #[test]
    fn leading_columns_reproduce_inputs() {
        let (d2, d3) = start();
        let (d2b, d3b) = complify(&d2, &d3).unwrap();
        let rho = 3;
        let l = 2;
        for i in 0..2 * rho + l {
            match complify_column_source(rho, l, i) {
                ColumnSource::Original(j) => {
                    for k in 0..rho + l {
                        assert_eq!(d3b.matrix().get(k, i), d3.matrix().get(k, j));
                    }
                }
                ColumnSource::Mirrored(j) => {
                    for k in 0..rho {
                        assert_eq!(
                            d3b.matrix().get(2 * rho + l - 1 - k, i),
                            d3.matrix().get(k, j)
                        );
                    }
                    for k in rho..rho + l {
                        assert_eq!(d3b.matrix().get(k, i), d3.matrix().get(k, j));
                    }
                }
            }
            let j = match complify_column_source(rho, l, i) {
                ColumnSource::Original(j) | ColumnSource::Mirrored(j) => j,
            };
            assert_eq!(d2b.column(i), d2.column(j));
        }
    }
}
