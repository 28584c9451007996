//! Exact lattice-point counts.
//!
//! Every count here is the number of integer tuples in a box `[-P, P]^V`
//! solving a diagonal system. Moment integrals of exponential sums reduce to
//! such counts by orthogonality, so [`count_mean_value_i`],
//! [`count_mean_value_j`] and [`count_tenth_moment`] build a signed
//! [`CountingSystem`] and hand it to the same engines as [`count_n`].

mod mitm;
mod naive;
mod system;

pub use mitm::{count_mitm, MitmLimits, SplitPlan};
pub use naive::count_naive;
pub use system::{regime_check, CountingSystem, MixedSystem, MomentPattern, RegimeCheck};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_bigint::BigUint;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::matrix::{AuxMatrix, IntMatrix, MatrixError};

#[derive(Debug, Error)]
pub enum CountError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("{side} side needs {tuples:.3e} enumeration steps, limit is {limit:.3e}")]
    Work { side: String, tuples: f64, limit: f64 },
    #[error("{side} side needs {needed_bytes:.3e} bytes, memory budget is {budget_bytes:.3e}")]
    Budget {
        side: String,
        needed_bytes: f64,
        budget_bytes: f64,
    },
    #[error("growth fit: {0}")]
    Fit(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Mitm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Naive => "naive",
            Method::Mitm => "mitm",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Method::Naive),
            "mitm" => Ok(Method::Mitm),
            other => Err(format!("unknown method '{other}' (naive|mitm)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CountOptions {
    pub method: Method,
    /// Memory allowed for the stored side of a meet-in-the-middle join.
    pub budget_bytes: f64,
    /// Largest number of tuples the enumerating side may visit.
    pub max_work: f64,
}

pub const DEFAULT_BUDGET_BYTES: f64 = 8.0 * (1u64 << 30) as f64;

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            method: Method::Mitm,
            budget_bytes: DEFAULT_BUDGET_BYTES,
            max_work: 1e12,
        }
    }
}

impl CountOptions {
    pub fn with_method(method: Method) -> Self {
        CountOptions {
            method,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRecord {
    #[serde(rename = "P")]
    pub p: u64,
    #[serde(serialize_with = "decimal")]
    pub count: BigUint,
    pub method: Method,
    pub elapsed_secs: f64,
}

fn decimal<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl CountRecord {
    pub fn csv_header() -> &'static str {
        "P,count,method,seconds"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6}",
            self.p, self.count, self.method, self.elapsed_secs
        )
    }
}

/// Counts solutions of an arbitrary signed system.
pub fn count_system(
    sys: &CountingSystem,
    p: u64,
    opts: &CountOptions,
) -> Result<CountRecord, CountError> {
    let start = Instant::now();
    let count = match opts.method {
        Method::Naive => count_naive(sys, p, opts.max_work)?,
        Method::Mitm => count_mitm(
            sys,
            p,
            &MitmLimits {
                budget_bytes: opts.budget_bytes,
                max_stream_states: opts.max_work,
            },
        )?,
    };
    Ok(CountRecord {
        p,
        count: BigUint::from(count),
        method: opts.method,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// `N(P)`: solutions of the mixed system in `[-P, P]^s`.
pub fn count_n(sys: &MixedSystem, p: u64, opts: &CountOptions) -> Result<CountRecord, CountError> {
    count_system(&CountingSystem::from_mixed(sys), p, opts)
}

/// Counting system behind `I(P, D)`.
pub fn mean_value_i_system(d: &AuxMatrix) -> Result<CountingSystem, CountError> {
    let spec = d.spec();
    let pattern = MomentPattern::mean_value_i(spec.row_count(), spec.col_count());
    CountingSystem::from_moment(d.matrix(), None, &pattern)
}

pub fn count_mean_value_i(
    d: &AuxMatrix,
    p: u64,
    opts: &CountOptions,
) -> Result<CountRecord, CountError> {
    count_system(&mean_value_i_system(d)?, p, opts)
}

/// Counting system behind `J_n(P)` for `d3` of type `(n, r, 0)_{r,l}` and
/// `d2` of format `l x (2 rho + l)`.
pub fn mean_value_j_system(
    d2: &IntMatrix,
    d3: &AuxMatrix,
    n: usize,
) -> Result<CountingSystem, CountError> {
    let spec = d3.spec();
    if spec.n != n || spec.t != spec.r || spec.omega != 0 {
        return Err(CountError::Shape(format!(
            "cubic matrix must have type ({n},r,0)_{{r,l}}, got {spec}"
        )));
    }
    let (r, l) = (spec.r, spec.l);
    let rho = n * (r - l);
    if d2.rows() != l || d2.cols() != 2 * rho + l {
        return Err(CountError::Shape(format!(
            "quadratic matrix must be {l}x{}, got {}x{}",
            2 * rho + l,
            d2.rows(),
            d2.cols()
        )));
    }
    let pattern = MomentPattern::mean_value_j(n, r, l);
    CountingSystem::from_moment(d3.matrix(), Some(d2), &pattern)
}

pub fn count_mean_value_j(
    d2: &IntMatrix,
    d3: &AuxMatrix,
    n: usize,
    p: u64,
    opts: &CountOptions,
) -> Result<CountRecord, CountError> {
    count_system(&mean_value_j_system(d2, d3, n)?, p, opts)
}

/// `x1^3+..+x5^3 = x6^3+..+x10^3` together with the matching quadratic.
pub fn tenth_moment_system() -> CountingSystem {
    let one = IntMatrix::from_rows(&[[1]]).expect("1x1");
    let pattern = MomentPattern::new(vec![(0, 10)]).expect("even");
    CountingSystem::from_moment(&one, Some(&one), &pattern).expect("consistent shapes")
}

pub fn count_tenth_moment(p: u64, opts: &CountOptions) -> Result<CountRecord, CountError> {
    count_system(&tenth_moment_system(), p, opts)
}

/// `x^3 + y^3 = u^3 + v^3`.
pub fn hua_system() -> CountingSystem {
    let one = IntMatrix::from_rows(&[[1]]).expect("1x1");
    let pattern = MomentPattern::new(vec![(0, 4)]).expect("even");
    CountingSystem::from_moment(&one, None, &pattern).expect("consistent shapes")
}

pub fn count_hua(p: u64, opts: &CountOptions) -> Result<CountRecord, CountError> {
    count_system(&hua_system(), p, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual in `log(count)`.
    pub max_residual: f64,
}

/// Least-squares slope of `log(count)` against `log(P)`.
pub fn estimate_growth_exponent(records: &[CountRecord]) -> Result<GrowthFit, CountError> {
    if records.len() < 3 {
        return Err(CountError::Fit(format!(
            "need at least 3 records, got {}",
            records.len()
        )));
    }
    if records.windows(2).any(|w| w[1].p <= w[0].p) || records[0].p == 0 {
        return Err(CountError::Fit("P must be positive and strictly increasing".into()));
    }
    let mut pts = Vec::with_capacity(records.len());
    for rec in records {
        if rec.count == BigUint::from(0u8) {
            return Err(CountError::Fit(format!("zero count at P={}", rec.p)));
        }
        pts.push(((rec.p as f64).ln(), big_ln(&rec.count)));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok(GrowthFit {
        slope,
        intercept,
        max_residual,
    })
}

/// Natural log of a big integer without overflowing `f64`.
pub(crate) fn big_ln(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 1000 {
        let f: f64 = v.to_string().parse().expect("decimal");
        return f.ln();
    }
    let shift = bits - 64;
    let top: f64 = (v >> shift).to_string().parse().expect("decimal");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{build_auxiliary, AuxSpec, SAMPLE_BLOCK};
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn both(sys: &CountingSystem, p: u64) -> u128 {
        let a = count_naive(sys, p, 1e9).unwrap();
        let limits = MitmLimits {
            budget_bytes: 1e9,
            max_stream_states: 1e9,
        };
        let b = count_mitm(sys, p, &limits).unwrap();
        assert_eq!(a, b, "naive and mitm disagree at P={p}");
        a
    }

    fn diagonal_aux(l: usize) -> AuxMatrix {
        let spec = AuxSpec::new(1, l, 0, 2 * l.max(1), l).unwrap();
        build_auxiliary(&[IntMatrix::zeros(l, 0)], &vec![BigInt::from(1); l], spec).unwrap()
    }

    #[test]
    fn zero_box_has_one_point() {
        let sys = MixedSystem::from_i64(&[vec![1, 2, 3]], &[vec![3, -1, 4]], 3).unwrap();
        let cs = CountingSystem::from_mixed(&sys);
        assert_eq!(both(&cs, 0), 1);
        assert_eq!(both(&tenth_moment_system(), 0), 1);
    }

    #[test]
    fn equal_cubes_are_diagonal() {
        let sys = MixedSystem::from_i64(&[], &[vec![1, -1]], 2).unwrap();
        let cs = CountingSystem::from_mixed(&sys);
        assert_eq!(both(&cs, 3), 7);
    }

    #[test]
    fn hua_small_box() {
        let mut oracle = 0;
        for x in -2i64..=2 {
            for y in -2i64..=2 {
                for u in -2i64..=2 {
                    for v in -2i64..=2 {
                        oracle += (x.pow(3) + y.pow(3) == u.pow(3) + v.pow(3)) as u128;
                    }
                }
            }
        }
        assert_eq!(oracle, 61);
        assert_eq!(both(&hua_system(), 2), 61);
    }

    #[test]
    fn tenth_moment_unit_box() {
        // full enumeration of 3^10 tuples
        assert_eq!(both(&tenth_moment_system(), 1), 4653);
    }

    #[test]
    fn diagonal_auxiliary_law() {
        for l in 1..=4 {
            let d = diagonal_aux(l);
            for p in 0..=6u64 {
                let rec = count_mean_value_i(&d, p, &CountOptions::default()).unwrap();
                assert_eq!(rec.count, BigUint::from(2 * p + 1).pow(l as u32));
            }
        }
    }

    #[test]
    fn j_without_links_matches_i() {
        let spec = AuxSpec::new(1, 3, 0, 3, 0).unwrap();
        let blk = IntMatrix::from_rows(&[[1, 2, 1], [1, 1, 3], [2, 1, 1]]).unwrap();
        let d3 = build_auxiliary(&[blk], &vec![BigInt::from(1); 3], spec).unwrap();
        let d2 = IntMatrix::zeros(0, 6);
        let opts = CountOptions::default();
        for p in 0..=1 {
            let j = count_mean_value_j(&d2, &d3, 1, p, &opts).unwrap();
            let i = count_mean_value_i(&d3, p, &opts).unwrap();
            assert_eq!(j.count, i.count);
        }
    }

    #[test]
    fn j_small_instance_agrees_with_enumeration() {
        // n = 1, r = 2, l = 1: columns (2, 12, 0) -> 16 variables
        let spec = AuxSpec::new(1, 2, 0, 2, 1).unwrap();
        let blk = IntMatrix::from_rows(&[[1], [1]]).unwrap();
        let d3 = build_auxiliary(&[blk], &vec![BigInt::from(1); 2], spec).unwrap();
        let d2 = IntMatrix::from_rows(&[[1, 1, 1]]).unwrap();
        let sys = mean_value_j_system(&d2, &d3, 1).unwrap();
        assert_eq!(sys.variable_count(), 16);
        let rec = count_mean_value_j(&d2, &d3, 1, 0, &CountOptions::default()).unwrap();
        assert_eq!(rec.count, BigUint::from(1u8));
        assert!(count_mean_value_j(&d2, &d3, 2, 1, &CountOptions::default()).is_err());
    }

    #[test]
    fn budget_errors_name_the_side() {
        let opts = CountOptions {
            method: Method::Mitm,
            budget_bytes: 10.0,
            max_work: 1e12,
        };
        let err = count_tenth_moment(8, &opts).unwrap_err();
        assert!(err.to_string().contains("stored"), "{err}");
        let naive = CountOptions {
            method: Method::Naive,
            budget_bytes: 1e9,
            max_work: 1e6,
        };
        let err = count_tenth_moment(8, &naive).unwrap_err();
        assert!(matches!(err, CountError::Work { .. }));
    }

    #[test]
    fn growth_of_exact_power_law() {
        let law = |l: u32| -> Vec<CountRecord> {
            [4u64, 8, 16, 32]
                .iter()
                .map(|&p| CountRecord {
                    p,
                    count: BigUint::from(2 * p + 1).pow(l),
                    method: Method::Naive,
                    elapsed_secs: 0.0,
                })
                .collect()
        };
        for l in 1..=2 {
            let fit = estimate_growth_exponent(&law(l)).unwrap();
            assert!((fit.slope - l as f64).abs() < 0.1, "{fit:?}");
        }
        let recs = law(1);
        let flat: Vec<_> = recs
            .iter()
            .map(|r| CountRecord {
                count: BigUint::from(5u8),
                ..r.clone()
            })
            .collect();
        assert!(estimate_growth_exponent(&flat).unwrap().slope.abs() < 1e-12);
        assert!(estimate_growth_exponent(&recs[..2]).is_err());
        let mut shuffled = recs.clone();
        shuffled.swap(0, 1);
        assert!(estimate_growth_exponent(&shuffled).is_err());
    }

    #[test]
    fn record_serialises_count_as_string() {
        let rec = CountRecord {
            p: 3,
            count: BigUint::from(10u8).pow(30),
            method: Method::Mitm,
            elapsed_secs: 0.5,
        };
        let v = serde_json::to_value(&rec).unwrap();
        assert_eq!(v["count"], "1000000000000000000000000000000");
        assert_eq!(v["P"], 3);
        assert!(rec.to_csv_row().starts_with("3,1000000000000000000000000000000,mitm,"));
    }

    #[test]
    fn big_ln_matches_float() {
        let v = BigUint::from(3u8).pow(2000);
        assert!((big_ln(&v) - 2000.0 * 3f64.ln()).abs() < 1e-9);
        assert!((big_ln(&BigUint::from(1000u32)) - 1000f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sample_block_mean_value_i() {
        let spec = AuxSpec::new(1, 5, 0, 5, 2).unwrap();
        let blk = IntMatrix::from_rows(&SAMPLE_BLOCK).unwrap();
        let d = build_auxiliary(&[blk], &vec![BigInt::from(1); 5], spec).unwrap();
        let sys = mean_value_i_system(&d).unwrap();
        assert_eq!(sys.variable_count(), 5 * 2 + 3 * 4);
        assert_eq!(sys.equation_count(), 5);
    }

    fn small_system() -> impl Strategy<Value = (CountingSystem, u64)> {
        (1usize..=2, 1usize..=6, 0u64..=2).prop_flat_map(|(eqs, vars, p)| {
            let degs = prop::collection::vec(prop_oneof![Just(2u32), Just(3u32)], eqs);
            let coeffs = prop::collection::vec(prop::collection::vec(-3i64..=3, eqs), vars);
            (degs, coeffs, Just(p)).prop_map(|(d, c, p)| (CountingSystem::new(d, c).unwrap(), p))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn naive_equals_mitm((sys, p) in small_system()) {
            both(&sys, p);
        }

        #[test]
        fn monotone_in_p((sys, p) in small_system()) {
            prop_assert!(both(&sys, p) <= both(&sys, p + 1));
        }

        #[test]
        fn column_sign_flip_invariant(
            coeffs in prop::collection::vec(1i64..=4, 2..=3),
            flip in 0usize..3,
            p in 1u64..=2,
        ) {
            let cols = coeffs.len();
            let d = IntMatrix::from_i64(1, cols, &coeffs).unwrap();
            let mut flipped = coeffs.clone();
            flipped[flip % cols] = -flipped[flip % cols];
            let e = IntMatrix::from_i64(1, cols, &flipped).unwrap();
            let pat = MomentPattern::new((0..cols).map(|c| (c, 2)).collect()).unwrap();
            let a = CountingSystem::from_moment(&d, None, &pat).unwrap();
            let b = CountingSystem::from_moment(&e, None, &pat).unwrap();
            prop_assert_eq!(both(&a, p), both(&b, p));
        }
    }
}
