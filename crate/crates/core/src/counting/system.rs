use num_traits::ToPrimitive;
use serde_json::{json, Value};

use super::CountError;
use crate::matrix::{content_lines, is_highly_non_singular, IntMatrix, MatrixError};

/// Coefficients of `r2` quadratic and `r3` cubic diagonal forms in `s`
/// variables. Equations are ordered cubic rows first, then quadratic rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedSystem {
    c2: IntMatrix,
    c3: IntMatrix,
}

/// Which hypotheses of the asymptotic regime hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct RegimeCheck {
    /// `r3 >= 2 r2 > 0`
    pub shape: bool,
    /// `s >= 6 r3 + floor(14 r2 / 3) + 1`
    pub variables: bool,
}

impl RegimeCheck {
    pub fn holds(&self) -> bool {
        self.shape && self.variables
    }
}

impl MixedSystem {
    pub fn new(c2: IntMatrix, c3: IntMatrix) -> Result<Self, CountError> {
        if c2.cols() != c3.cols() {
            return Err(CountError::Shape(format!(
                "quadratic matrix has {} columns, cubic has {}",
                c2.cols(),
                c3.cols()
            )));
        }
        if c2.rows() + c3.rows() == 0 {
            return Err(CountError::Shape("system has no equations".into()));
        }
        c2.to_i64()?;
        c3.to_i64()?;
        Ok(MixedSystem { c2, c3 })
    }

    pub fn from_i64(c2: &[Vec<i64>], c3: &[Vec<i64>], s: usize) -> Result<Self, CountError> {
        let build = |rows: &[Vec<i64>]| -> Result<IntMatrix, MatrixError> {
            if rows.is_empty() {
                Ok(IntMatrix::zeros(0, s))
            } else {
                IntMatrix::from_rows(rows)
            }
        };
        Self::new(build(c2)?, build(c3)?)
    }

    pub fn c2(&self) -> &IntMatrix {
        &self.c2
    }

    pub fn c3(&self) -> &IntMatrix {
        &self.c3
    }

    pub fn s(&self) -> usize {
        self.c2.cols()
    }

    pub fn r2(&self) -> usize {
        self.c2.rows()
    }

    pub fn r3(&self) -> usize {
        self.c3.rows()
    }

    /// Number of equations `w = r2 + r3`.
    pub fn w(&self) -> usize {
        self.r2() + self.r3()
    }

    /// Normalising exponent `s - 2 r2 - 3 r3`.
    pub fn main_term_exponent(&self) -> i64 {
        self.s() as i64 - 2 * self.r2() as i64 - 3 * self.r3() as i64
    }

    pub fn regime(&self) -> RegimeCheck {
        regime_check(self.r2(), self.r3(), self.s())
    }

    /// High non-singularity of `(C2, C3)`. Empty matrices count as passing.
    pub fn non_singularity(&self) -> Result<(bool, bool), CountError> {
        let check = |m: &IntMatrix| -> Result<bool, CountError> {
            if m.rows() == 0 {
                Ok(true)
            } else {
                Ok(is_highly_non_singular(m)?)
            }
        };
        Ok((check(&self.c2)?, check(&self.c3)?))
    }

    /// Per-equation degrees, cubic rows first.
    pub fn degrees(&self) -> Vec<u32> {
        let mut d = vec![3; self.r3()];
        d.extend(std::iter::repeat(2).take(self.r2()));
        d
    }

    /// Column `j` of the stacked `(C3; C2)` coefficients.
    pub fn column(&self, j: usize) -> Vec<i64> {
        self.c3
            .column(j)
            .iter()
            .chain(self.c2.column(j).iter())
            .map(|v| v.to_i64().expect("checked in constructor"))
            .collect()
    }

    /// Row-major `w x s` stacked coefficients, cubic rows first.
    pub fn stacked(&self) -> Vec<Vec<i64>> {
        let mut rows = Vec::with_capacity(self.w());
        for m in [&self.c3, &self.c2] {
            for i in 0..m.rows() {
                rows.push(
                    m.row(i)
                        .iter()
                        .map(|v| v.to_i64().expect("checked in constructor"))
                        .collect(),
                );
            }
        }
        rows
    }

    /// Text form: a `quadratic` section and a `cubic` section, each followed
    /// by a matrix in the plain-text exchange format.
    pub fn to_text(&self) -> String {
        format!(
            "quadratic\n{}cubic\n{}",
            self.c2.to_text(),
            self.c3.to_text()
        )
    }

    pub fn to_json(&self) -> Value {
        json!({ "quadratic": self.c2.to_json(), "cubic": self.c3.to_json() })
    }

    pub fn parse(text: &str) -> Result<Self, CountError> {
        if text.trim_start().starts_with('{') {
            let v: Value = serde_json::from_str(text)
                .map_err(|e| CountError::Shape(format!("system JSON: {e}")))?;
            let get = |key: &str| -> Result<Option<IntMatrix>, CountError> {
                v.get(key)
                    .map(|m| IntMatrix::from_json(m).map_err(CountError::from))
                    .transpose()
            };
            return Self::assemble(get("quadratic")?, get("cubic")?);
        }
        let mut lines = content_lines(text).peekable();
        let (mut c2, mut c3) = (None, None);
        while let Some(tag) = lines.next() {
            let slot = match tag.to_ascii_lowercase().as_str() {
                "quadratic" => &mut c2,
                "cubic" => &mut c3,
                other => {
                    return Err(CountError::Shape(format!(
                        "expected 'quadratic' or 'cubic', got '{other}'"
                    )))
                }
            };
            *slot = Some(IntMatrix::parse_text_lines(&mut lines)?);
        }
        Self::assemble(c2, c3)
    }

    fn assemble(c2: Option<IntMatrix>, c3: Option<IntMatrix>) -> Result<Self, CountError> {
        let s = c2
            .as_ref()
            .or(c3.as_ref())
            .map(IntMatrix::cols)
            .ok_or_else(|| CountError::Shape("system has no sections".into()))?;
        Self::new(
            c2.unwrap_or_else(|| IntMatrix::zeros(0, s)),
            c3.unwrap_or_else(|| IntMatrix::zeros(0, s)),
        )
    }
}

pub fn regime_check(r2: usize, r3: usize, s: usize) -> RegimeCheck {
    RegimeCheck {
        shape: r2 > 0 && r3 >= 2 * r2,
        variables: s >= 6 * r3 + (14 * r2) / 3 + 1,
    }
}

/// Even powers attached to coefficient columns: `|sum(column i)|^{power}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentPattern {
    entries: Vec<(usize, u32)>,
}

impl MomentPattern {
    pub fn new(entries: Vec<(usize, u32)>) -> Result<Self, CountError> {
        if let Some(&(col, p)) = entries.iter().find(|&&(_, p)| p == 0 || p % 2 != 0) {
            return Err(CountError::Shape(format!(
                "power {p} on column {col} must be even and positive"
            )));
        }
        Ok(MomentPattern { entries })
    }

    /// Consecutive column ranges with a fixed power each.
    pub fn from_runs(runs: &[(usize, u32)]) -> Result<Self, CountError> {
        let mut entries = Vec::new();
        let mut col = 0;
        for &(len, power) in runs {
            for _ in 0..len {
                entries.push((col, power));
                col += 1;
            }
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn variable_count(&self) -> usize {
        self.entries.iter().map(|&(_, p)| p as usize).sum()
    }

    /// Weights for the mean value `I(P, D)`: power 2 on the first `R`
    /// columns and 4 on the remaining `S - R`.
    pub fn mean_value_i(big_r: usize, big_s: usize) -> Self {
        Self::from_runs(&[(big_r, 2), (big_s - big_r, 4)]).expect("even powers")
    }

    /// Weights for `J_n`, with `rho = n (r - l)`.
    pub fn mean_value_j(n: usize, r: usize, l: usize) -> Self {
        let runs = if n == 1 {
            vec![(r, 2), (l, 12), (r - 2 * l, 4)]
        } else {
            let rho = n * (r - l);
            vec![(rho + l, 2), (l, 8), (rho - 2 * l, 4), (l, 8)]
        };
        Self::from_runs(&runs).expect("even powers")
    }
}

/// A counting problem: integer tuples `x` in `[-P, P]^V` with
/// `sum_v coeffs[v][e] * x_v^{degrees[e]} = 0` for every equation `e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountingSystem {
    degrees: Vec<u32>,
    vars: Vec<Vec<i64>>,
}

impl CountingSystem {
    pub fn new(degrees: Vec<u32>, vars: Vec<Vec<i64>>) -> Result<Self, CountError> {
        if let Some(v) = vars.iter().find(|v| v.len() != degrees.len()) {
            return Err(CountError::Shape(format!(
                "variable has {} coefficients for {} equations",
                v.len(),
                degrees.len()
            )));
        }
        Ok(CountingSystem { degrees, vars })
    }

    /// The system itself: one variable per column.
    pub fn from_mixed(sys: &MixedSystem) -> Self {
        CountingSystem {
            degrees: sys.degrees(),
            vars: (0..sys.s()).map(|j| sys.column(j)).collect(),
        }
    }

    /// The signed system behind a moment integral. A column with power
    /// `2m` contributes `m` variables with its coefficients and `m` with
    /// their negatives. Cubic rows come first.
    pub fn from_moment(
        cubic: &IntMatrix,
        quadratic: Option<&IntMatrix>,
        pattern: &MomentPattern,
    ) -> Result<Self, CountError> {
        let cols = cubic.cols();
        if let Some(q) = quadratic {
            if q.cols() != cols {
                return Err(CountError::Shape(format!(
                    "quadratic matrix has {} columns, cubic has {cols}",
                    q.cols()
                )));
            }
        }
        let c3 = cubic.to_i64()?;
        let c2 = quadratic.map(IntMatrix::to_i64).transpose()?;
        let r3 = cubic.rows();
        let r2 = quadratic.map_or(0, IntMatrix::rows);
        let mut degrees = vec![3; r3];
        degrees.extend(std::iter::repeat(2).take(r2));
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for &(col, power) in pattern.entries() {
            if col >= cols {
                return Err(CountError::Shape(format!(
                    "pattern column {col} exceeds {cols} columns"
                )));
            }
            let mut coeffs: Vec<i64> = (0..r3).map(|i| c3[i * cols + col]).collect();
            if let Some(c2) = &c2 {
                coeffs.extend((0..r2).map(|i| c2[i * cols + col]));
            }
            let neg: Vec<i64> = coeffs.iter().map(|c| -c).collect();
            for _ in 0..power / 2 {
                plus.push(coeffs.clone());
                minus.push(neg.clone());
            }
        }
        plus.extend(minus);
        Ok(CountingSystem {
            degrees,
            vars: plus,
        })
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn vars(&self) -> &[Vec<i64>] {
        &self.vars
    }

    pub fn variable_count(&self) -> usize {
        self.vars.len()
    }

    pub fn equation_count(&self) -> usize {
        self.degrees.len()
    }

    /// `max |sum|` a single equation can reach on `[-P, P]^V`.
    pub(crate) fn equation_bounds(&self, p: u64) -> Result<Vec<i128>, CountError> {
        self.degrees
            .iter()
            .enumerate()
            .map(|(e, &d)| {
                let pk = (p as i128)
                    .checked_pow(d)
                    .ok_or_else(|| CountError::Overflow("P^degree".into()))?;
                self.vars.iter().try_fold(0i128, |acc, v| {
                    (v[e] as i128)
                        .abs()
                        .checked_mul(pk)
                        .and_then(|t| acc.checked_add(t))
                        .ok_or_else(|| CountError::Overflow("equation bound".into()))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_examples() {
        assert!(regime_check(1, 2, 17).holds());
        assert!(!regime_check(1, 2, 16).holds());
        assert!(!regime_check(1, 1, 40).holds());
        assert!(!regime_check(0, 2, 40).holds());
        // 6*4 + floor(28/3) + 1 = 34
        assert!(regime_check(2, 4, 34).holds());
        assert!(!regime_check(2, 4, 33).holds());
    }

    #[test]
    fn text_and_json_forms() {
        let sys = MixedSystem::from_i64(
            &[vec![1, -2, 3]],
            &[vec![1, 1, -1], vec![2, 5, 7]],
            3,
        )
        .unwrap();
        assert_eq!(MixedSystem::parse(&sys.to_text()).unwrap(), sys);
        assert_eq!(
            MixedSystem::parse(&sys.to_json().to_string()).unwrap(),
            sys
        );
        assert_eq!(sys.degrees(), vec![3, 3, 2]);
        assert_eq!(sys.column(1), vec![1, 5, -2]);
        assert_eq!(sys.main_term_exponent(), 3 - 2 - 6);
    }

    #[test]
    fn missing_section_is_empty() {
        let sys = MixedSystem::parse("cubic\n1 2\n1 -1\n").unwrap();
        assert_eq!((sys.r2(), sys.r3(), sys.s()), (0, 1, 2));
        assert!(MixedSystem::parse("").is_err());
        assert!(MixedSystem::parse("linear\n1 1\n1\n").is_err());
    }

    #[test]
    fn odd_powers_rejected() {
        assert!(MomentPattern::new(vec![(0, 3)]).is_err());
        assert!(MomentPattern::new(vec![(0, 0)]).is_err());
    }

    #[test]
    fn moment_pattern_shapes() {
        // n = 1: r columns at 2, l at 12, r - 2l at 4; 2r - l columns in all
        let p = MomentPattern::mean_value_j(1, 5, 2);
        assert_eq!(p.entries().len(), 8);
        assert_eq!(p.variable_count(), 5 * 2 + 2 * 12 + 4);
        // n = 2, r = 5, l = 2: rho = 6, 2 rho + l = 14 columns
        let p = MomentPattern::mean_value_j(2, 5, 2);
        assert_eq!(p.entries().len(), 14);
        assert_eq!(p.variable_count(), 8 * 2 + 2 * 8 + 2 * 4 + 2 * 8);
        let p = MomentPattern::mean_value_i(3, 5);
        assert_eq!(p.variable_count(), 3 * 2 + 2 * 4);
    }

    #[test]
    fn moment_system_signs() {
        let d = IntMatrix::from_rows(&[[2, 3]]).unwrap();
        let p = MomentPattern::new(vec![(0, 2), (1, 4)]).unwrap();
        let cs = CountingSystem::from_moment(&d, None, &p).unwrap();
        assert_eq!(
            cs.vars(),
            &[vec![2], vec![3], vec![3], vec![-2], vec![-3], vec![-3]]
        );
    }
}
