//! Non-singular local solutions: `p`-adic points certified by Hensel's
//! lemma and real points found by damped Newton steps.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::congruence::{is_prime, jacobian, rank_mod_p};
use super::{DensityError, Result};
use crate::counting::MixedSystem;
use crate::matrix::IntMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Place {
    Prime(u64),
    Real,
}

impl FromStr for Place {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "real" || s == "inf" {
            return Ok(Place::Real);
        }
        s.parse::<u64>()
            .ok()
            .filter(|&p| is_prime(p))
            .map(Place::Prime)
            .ok_or_else(|| format!("place must be 'real' or a prime, got '{s}'"))
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Prime(p) => write!(f, "{p}"),
            Place::Real => f.write_str("real"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "place", rename_all = "lowercase")]
pub enum Witness {
    /// `F(x) = 0 mod p^precision` and the minor of the Jacobian on
    /// `columns` has valuation `e` with `precision >= 2 e + 1`.
    Padic {
        p: u64,
        x: Vec<i64>,
        precision: u32,
        minor_valuation: u32,
        columns: Vec<usize>,
    },
    Real {
        x: Vec<f64>,
        residual: f64,
        sigma_min: f64,
    },
}

pub const REAL_RESIDUAL_TOL: f64 = 1e-10;
pub const REAL_SIGMA_MIN: f64 = 1e-6;
const SCAN_LIMIT: f64 = (1u64 << 20) as f64;
const SAMPLE_LIMIT: usize = 1 << 22;
const MAX_PRECISION: u32 = 16;
const LIFT_TRIES: usize = 4096;
const BRANCHING: usize = 3;
const CANDIDATES: usize = 4096;
const ROOTS: usize = 64;
const NEWTON_STARTS: usize = 200;

/// Searches for a non-singular solution at `place`. `Ok(None)` means the
/// search found nothing, not that none exists.
pub fn find_nonsingular_local_solution(
    sys: &MixedSystem,
    place: Place,
    seed: u64,
) -> Result<Option<Witness>> {
    match place {
        Place::Prime(p) if !is_prime(p) => Err(DensityError::Shape(format!("{p} is not prime"))),
        Place::Prime(p) => Ok(padic(sys, p, seed)),
        Place::Real => Ok(real(sys, seed)),
    }
}

/// Re-checks a witness against the system by direct substitution.
pub fn verify_witness(sys: &MixedSystem, witness: &Witness) -> bool {
    let rows = sys.stacked();
    let degrees = sys.degrees();
    match witness {
        Witness::Padic {
            p,
            x,
            precision,
            minor_valuation,
            columns,
        } => {
            if x.len() != sys.s() || columns.len() != sys.w() || *precision < 2 * minor_valuation + 1 {
                return false;
            }
            let q = BigInt::from(*p).pow(*precision);
            let zero = rows.iter().zip(&degrees).all(|(row, &d)| {
                let v: BigInt = row
                    .iter()
                    .zip(x)
                    .map(|(&c, &xi)| BigInt::from(c) * BigInt::from(xi).pow(d))
                    .sum();
                v.mod_floor(&q).is_zero()
            });
            let jac: Vec<Vec<BigInt>> = rows
                .iter()
                .zip(&degrees)
                .map(|(row, &d)| {
                    row.iter()
                        .zip(x)
                        .map(|(&c, &xi)| BigInt::from(c * d as i64) * BigInt::from(xi).pow(d - 1))
                        .collect()
                })
                .collect();
            zero && minor_valuation_exact(&jac, columns, *p) == Some(*minor_valuation)
        }
        Witness::Real { x, .. } => {
            x.len() == sys.s()
                && residual(&rows, &degrees, x) < REAL_RESIDUAL_TOL
                && sigma_min(&rows, &degrees, x) > REAL_SIGMA_MIN
        }
    }
}

fn minor_valuation_exact(jac: &[Vec<BigInt>], columns: &[usize], p: u64) -> Option<u32> {
    let w = jac.len();
    let entries: Vec<BigInt> = jac
        .iter()
        .flat_map(|row| columns.iter().map(|&c| row[c].clone()))
        .collect();
    let det = IntMatrix::new(w, w, entries).ok()?.det().ok()?;
    valuation(&det, p, u32::MAX)
}

/// `v_p(n)`, or `None` when `p^cap` divides `n`.
fn valuation(n: &BigInt, p: u64, cap: u32) -> Option<u32> {
    if n.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    while (&n % &p).is_zero() {
        n /= &p;
        v += 1;
        if v >= cap {
            return None;
        }
    }
    Some(v)
}

fn residues_mod(rows: &[Vec<i64>], degrees: &[u32], x: &[i64], q: i128) -> bool {
    rows.iter().zip(degrees).all(|(row, &d)| {
        row.iter()
            .zip(x)
            .map(|(&c, &xi)| c as i128 * (xi as i128).pow(d) % q)
            .sum::<i128>()
            .rem_euclid(q)
            == 0
    })
}

/// Smallest minor valuation below `cap` over all `w`-column subsets,
/// computed from the Jacobian reduced mod `p^cap`.
fn best_minor(jac: &[Vec<i64>], p: u64, cap: u32) -> Option<(u32, Vec<usize>)> {
    let w = jac.len();
    let s = jac[0].len();
    let q = (p as i64).pow(cap);
    let mut best: Option<(u32, Vec<usize>)> = None;
    for cols in (0..s).combinations(w) {
        let entries: Vec<i64> = jac
            .iter()
            .flat_map(|row| cols.iter().map(|&c| row[c].rem_euclid(q)))
            .collect();
        let det = IntMatrix::from_i64(w, w, &entries).and_then(|m| m.det());
        let Ok(det) = det else { continue };
        let det = det.mod_floor(&BigInt::from(q));
        if let Some(v) = valuation(&det, p, cap) {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                let done = v == 0;
                best = Some((v, cols));
                if done {
                    break;
                }
            }
        }
    }
    best
}

fn padic(sys: &MixedSystem, p: u64, seed: u64) -> Option<Witness> {
    let rows = sys.stacked();
    let degrees = sys.degrees();
    let s = sys.s();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = p as i64;
    let mut level_one = Vec::new();
    let exhaustive = (p as f64).powi(s as i32) <= SCAN_LIMIT;
    // p | d kills the degree-d rows of the Jacobian mod p, so no residue
    // can be non-singular and the scan only gathers lifting roots
    let degenerate = degrees.iter().any(|&d| d as u64 % p == 0);
    let enough = |found: &Vec<Vec<i64>>| degenerate && found.len() >= CANDIDATES;
    let visit = |x: &[i64], level_one: &mut Vec<Vec<i64>>| -> Option<Witness> {
        if !residues_mod(&rows, &degrees, x, p as i128) || x.iter().all(|&v| v == 0) {
            return None;
        }
        let jac = jacobian(&rows, &degrees, x);
        let full = !degenerate && rank_mod_p(jac.clone(), pi) == rows.len();
        match full.then(|| best_minor(&jac, p, 1)).flatten() {
            Some((0, columns)) => Some(Witness::Padic {
                p,
                x: x.to_vec(),
                precision: 1,
                minor_valuation: 0,
                columns,
            }),
            _ => {
                if level_one.len() < CANDIDATES {
                    level_one.push(x.to_vec());
                }
                None
            }
        }
    };
    if exhaustive {
        let mut x = vec![0i64; s];
        loop {
            if let Some(w) = visit(&x, &mut level_one) {
                return Some(w);
            }
            if enough(&level_one) {
                break;
            }
            let mut k = 0;
            loop {
                if k == s {
                    break;
                }
                x[k] += 1;
                if x[k] < pi {
                    break;
                }
                x[k] = 0;
                k += 1;
            }
            if k == s {
                break;
            }
        }
    } else {
        for _ in 0..SAMPLE_LIMIT {
            let x: Vec<i64> = (0..s).map(|_| rng.gen_range(0..pi)).collect();
            if let Some(w) = visit(&x, &mut level_one) {
                return Some(w);
            }
            if enough(&level_one) {
                break;
            }
        }
    }
    // every residue found is singular mod p: lift and look for a minor of
    // valuation e at precision 2e + 1
    let cap = (1..=MAX_PRECISION)
        .take_while(|&k| (p as f64).powi(k as i32) < 2f64.powi(20))
        .last()
        .unwrap_or(1);
    level_one.shuffle(&mut rng);
    for x in level_one.into_iter().take(ROOTS) {
        if let Some(w) = lift(&rows, &degrees, p, x, 1, cap, &mut rng) {
            return Some(w);
        }
    }
    None
}

fn lift(
    rows: &[Vec<i64>],
    degrees: &[u32],
    p: u64,
    x: Vec<i64>,
    k: u32,
    cap: u32,
    rng: &mut ChaCha8Rng,
) -> Option<Witness> {
    let jac = jacobian(rows, degrees, &x);
    if let Some((e, columns)) = best_minor(&jac, p, k) {
        if k > 2 * e {
            return Some(Witness::Padic {
                p,
                x,
                precision: k,
                minor_valuation: e,
                columns,
            });
        }
    }
    if k == cap {
        return None;
    }
    // x^3 mod p^{k+1} is fixed by x mod p^k when p = 3, so the top two
    // digits are redrawn rather than only the next one
    let keep = k.saturating_sub(1).max(1).min(k);
    let base = (p as i64).pow(keep);
    let span = (p as i64).pow(k + 1 - keep);
    let q = (p as i128).pow(k + 1);
    let mut children = Vec::new();
    for _ in 0..LIFT_TRIES {
        let y: Vec<i64> = x
            .iter()
            .map(|&a| a.rem_euclid(base) + base * rng.gen_range(0..span))
            .collect();
        if residues_mod(rows, degrees, &y, q) && !children.contains(&y) {
            children.push(y);
            if children.len() == BRANCHING {
                break;
            }
        }
    }
    children
        .into_iter()
        .find_map(|y| lift(rows, degrees, p, y, k + 1, cap, rng))
}

fn values(rows: &[Vec<i64>], degrees: &[u32], x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        rows.len(),
        rows.iter().zip(degrees).map(|(row, &d)| {
            row.iter()
                .zip(x)
                .map(|(&c, &xi)| c as f64 * xi.powi(d as i32))
                .sum::<f64>()
        }),
    )
}

fn jacobian_f64(rows: &[Vec<i64>], degrees: &[u32], x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.len(), |i, j| {
        let d = degrees[i] as i32;
        rows[i][j] as f64 * d as f64 * x[j].powi(d - 1)
    })
}

fn residual(rows: &[Vec<i64>], degrees: &[u32], x: &[f64]) -> f64 {
    values(rows, degrees, x).amax()
}

fn sigma_min(rows: &[Vec<i64>], degrees: &[u32], x: &[f64]) -> f64 {
    let jac = jacobian_f64(rows, degrees, x);
    jac.singular_values().min()
}

/// Damped Gauss–Newton with minimal-norm steps `-J^T (J J^T)^{-1} F` from
/// random starts in `(-1, 1)^s`.
fn real(sys: &MixedSystem, seed: u64) -> Option<Witness> {
    let rows = sys.stacked();
    let degrees = sys.degrees();
    let s = sys.s();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..NEWTON_STARTS {
        let mut x: Vec<f64> = (0..s).map(|_| rng.gen_range(-0.9..0.9)).collect();
        let mut norm = values(&rows, &degrees, &x).norm();
        for _ in 0..100 {
            if norm < 1e-14 {
                break;
            }
            let f = values(&rows, &degrees, &x);
            let jac = jacobian_f64(&rows, &degrees, &x);
            let gram = &jac * jac.transpose();
            let Some(solved) = gram.lu().solve(&f) else { break };
            let step = jac.transpose() * solved;
            let mut lambda = 1.0;
            let mut improved = false;
            while lambda > 1e-4 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a - lambda * b).collect();
                let n = values(&rows, &degrees, &trial).norm();
                if n < norm {
                    x = trial;
                    norm = n;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if x.iter().any(|v| v.abs() >= 1.0) {
            continue;
        }
        let res = residual(&rows, &degrees, &x);
        let sig = sigma_min(&rows, &degrees, &x);
        if res < REAL_RESIDUAL_TOL && sig > REAL_SIGMA_MIN {
            return Some(Witness::Real {
                x,
                residual: res,
                sigma_min: sig,
            });
        }
    }
    None
}
