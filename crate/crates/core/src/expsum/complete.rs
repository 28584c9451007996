use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{ExpSumError, Result};

/// `S(q, a3, a2) = sum_{x=1}^{q} e((a3 x^3 + a2 x^2) / q)`.
pub fn complete_sum_s(q: u64, a3: i64, a2: i64) -> Result<Complex64> {
    if q == 0 {
        return Err(ExpSumError::InvalidModulus);
    }
    let qi = q as i128;
    let a3 = (a3 as i128).rem_euclid(qi);
    let a2 = (a2 as i128).rem_euclid(qi);
    let mut acc = Complex64::new(0.0, 0.0);
    for x in 1..=qi {
        let x2 = x * x % qi;
        let x3 = x2 * x % qi;
        let k = (a3 * x3 + a2 * x2) % qi;
        acc += root(k as u64, q);
    }
    Ok(acc)
}

fn root(k: u64, q: u64) -> Complex64 {
    // symmetric residue keeps the angle small
    let k = k as f64;
    let q = q as f64;
    let t = if 2.0 * k > q { k - q } else { k };
    Complex64::from_polar(1.0, TAU * t / q)
}

/// `S(q, a3, a2)` for every residue pair, computed once.
#[derive(Debug, Clone)]
pub struct CompleteSumGrid {
    q: u64,
    values: Vec<Complex64>,
}

impl CompleteSumGrid {
    pub fn new(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(ExpSumError::InvalidModulus);
        }
        let qu = q as usize;
        let roots: Vec<Complex64> = (0..q).map(|k| root(k, q)).collect();
        let cubes: Vec<usize> = (0..q as u128).map(|x| (x * x * x % q as u128) as usize).collect();
        let squares: Vec<usize> = (0..q as u128).map(|x| (x * x % q as u128) as usize).collect();
        let mut values = vec![Complex64::new(0.0, 0.0); qu * qu];
        for a3 in 0..qu {
            for a2 in 0..qu {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in 0..qu {
                    let k = (a3 * cubes[x] + a2 * squares[x]) % qu;
                    acc += roots[k];
                }
                values[a3 * qu + a2] = acc;
            }
        }
        Ok(CompleteSumGrid { q, values })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Residues must already lie in `[0, q)`.
    pub fn get(&self, a3: usize, a2: usize) -> Complex64 {
        self.values[a3 * self.q as usize + a2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(complete_sum_s(1, 5, 3).unwrap(), Complex64::new(1.0, 0.0));
        for q in 1..20 {
            assert!((complete_sum_s(q, 0, 0).unwrap() - Complex64::new(q as f64, 0.0)).norm() < 1e-12);
        }
        assert!(complete_sum_s(2, 0, 1).unwrap().norm() < 1e-12);
        assert!((complete_sum_s(7, 0, 1).unwrap().norm() - 7f64.sqrt()).abs() < 1e-9);
        assert!(matches!(complete_sum_s(0, 1, 1), Err(ExpSumError::InvalidModulus)));
    }

    #[test]
    fn grid_matches_direct() {
        for q in [1u64, 2, 6, 9, 13] {
            let grid = CompleteSumGrid::new(q).unwrap();
            for a3 in 0..q {
                for a2 in 0..q {
                    let d = complete_sum_s(q, a3 as i64, a2 as i64).unwrap();
                    assert!((grid.get(a3 as usize, a2 as usize) - d).norm() < 1e-9);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn periodic_in_both_arguments(q in 1u64..=50, a3 in -100i64..100, a2 in -100i64..100) {
            let base = complete_sum_s(q, a3, a2).unwrap();
            prop_assert_eq!(complete_sum_s(q, a3 + q as i64, a2).unwrap(), base);
            prop_assert_eq!(complete_sum_s(q, a3, a2 - q as i64).unwrap(), base);
        }
    }
}
