//! Solution counts modulo prime powers and the `p`-adic densities built on
//! them.
//!
//! `M(p^i)` is available three ways: plain enumeration of `(Z/p^i)^s`,
//! residue-by-residue lifting (Hensel's lemma settles residues whose
//! Jacobian has full rank mod `p`), and convolution of the per-variable
//! value distributions over the group `(Z/p^i)^w`. The density
//! `p^{-i(s-w)} M(p^i)` also equals `sum_{k <= i} A(p^k)`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::series::{term, SeriesSystem};
use super::{DensityError, Result};
use crate::counting::MixedSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CongruenceMethod {
    Exhaustive,
    Lifting,
    Convolution,
}

impl FromStr for CongruenceMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exhaustive" => Ok(CongruenceMethod::Exhaustive),
            "lifting" => Ok(CongruenceMethod::Lifting),
            "convolution" => Ok(CongruenceMethod::Convolution),
            other => Err(format!(
                "unknown method '{other}' (exhaustive|lifting|convolution)"
            )),
        }
    }
}

impl fmt::Display for CongruenceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CongruenceMethod::Exhaustive => "exhaustive",
            CongruenceMethod::Lifting => "lifting",
            CongruenceMethod::Convolution => "convolution",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CongruenceCount {
    pub p: u64,
    pub i: u32,
    #[serde(serialize_with = "decimal")]
    pub m: u128,
    pub method: CongruenceMethod,
}

fn decimal<S: serde::Serializer>(v: &u128, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Largest enumeration (exhaustive) or state-update count (other
/// methods) attempted.
pub const DEFAULT_CONGRUENCE_BUDGET: f64 = 1e8;

fn modulus(p: u64, i: u32) -> Result<u64> {
    p.checked_pow(i)
        .filter(|&q| q < 1 << 31)
        .ok_or_else(|| DensityError::Overflow(format!("{p}^{i}")))
}

pub(crate) fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

/// All primes `<= n`.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let mut sieve = vec![true; n as usize + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n as usize {
        if sieve[i] {
            for k in (i * i..=n as usize).step_by(i) {
                sieve[k] = false;
            }
        }
        i += 1;
    }
    sieve
        .iter()
        .enumerate()
        .filter_map(|(k, &b)| b.then_some(k as u64))
        .collect()
}

/// `x^3` and `x^2` reduced mod `q` for `x in 0..q`.
fn powers(q: u64) -> (Vec<u64>, Vec<u64>) {
    let q128 = q as u128;
    (0..q)
        .map(|x| {
            let x = x as u128;
            ((x * x % q128 * x % q128) as u64, (x * x % q128) as u64)
        })
        .unzip()
}

/// `M(p^i)`, the number of `x in (Z/p^i)^s` solving every equation mod
/// `p^i`.
pub fn count_congruence(
    sys: &MixedSystem,
    p: u64,
    i: u32,
    method: CongruenceMethod,
    budget: f64,
) -> Result<CongruenceCount> {
    if !is_prime(p) {
        return Err(DensityError::Shape(format!("{p} is not prime")));
    }
    let m = if i == 0 {
        1
    } else {
        let q = modulus(p, i)?;
        if (sys.s() as f64) * (q as f64).log2() >= 127.0 {
            return Err(DensityError::Overflow(format!("{q}^{} exceeds 128 bits", sys.s())));
        }
        match method {
            CongruenceMethod::Exhaustive => exhaustive(sys, q, budget)?,
            CongruenceMethod::Lifting => lifting(sys, p, i, budget)?,
            CongruenceMethod::Convolution => convolution(sys, q, budget)?,
        }
    };
    Ok(CongruenceCount { p, i, m, method })
}

fn budget_error(what: &str, needed: f64, limit: f64) -> DensityError {
    DensityError::Budget {
        what: what.into(),
        needed,
        limit,
    }
}

fn exhaustive(sys: &MixedSystem, q: u64, budget: f64) -> Result<u128> {
    let s = sys.s();
    let needed = (q as f64).powi(s as i32);
    if needed > budget {
        return Err(budget_error("exhaustive enumeration", needed, budget));
    }
    let rows = sys.stacked();
    let degrees = sys.degrees();
    let (cubes, squares) = powers(q);
    // table[j][x][e] = c_{e,j} x^{deg e} mod q
    let table: Vec<Vec<Vec<u64>>> = (0..s)
        .map(|j| {
            (0..q as usize)
                .map(|x| {
                    degrees
                        .iter()
                        .enumerate()
                        .map(|(e, &d)| {
                            let pw = if d == 3 { cubes[x] } else { squares[x] };
                            (rows[e][j].rem_euclid(q as i64) as u64 * pw) % q
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut sums = vec![0u64; degrees.len()];
    Ok(dfs(&table, q, 0, &mut sums))
}

fn dfs(table: &[Vec<Vec<u64>>], q: u64, j: usize, sums: &mut [u64]) -> u128 {
    if j == table.len() {
        return sums.iter().all(|&v| v == 0) as u128;
    }
    let mut n = 0;
    for vals in &table[j] {
        for (s, v) in sums.iter_mut().zip(vals) {
            *s = (*s + v) % q;
        }
        n += dfs(table, q, j + 1, sums);
        for (s, v) in sums.iter_mut().zip(vals) {
            *s = (*s + q - v) % q;
        }
    }
    n
}

/// Rank over `Z/p` of a `w x s` matrix given by rows.
pub(crate) fn rank_mod_p(mut rows: Vec<Vec<i64>>, p: i64) -> usize {
    for r in rows.iter_mut() {
        for v in r.iter_mut() {
            *v = v.rem_euclid(p);
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows.len()).find(|&r| rows[r][c] != 0) else {
            continue;
        };
        rows.swap(rank, piv);
        let inv = mod_inverse(rows[rank][c], p);
        for r in 0..rows.len() {
            if r != rank && rows[r][c] != 0 {
                let f = rows[r][c] * inv % p;
                for k in c..cols {
                    rows[r][k] = (rows[r][k] - f * rows[rank][k]).rem_euclid(p);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn mod_inverse(a: i64, p: i64) -> i64 {
    let (mut t, mut new_t, mut r, mut new_r) = (0i64, 1i64, p, a.rem_euclid(p));
    while new_r != 0 {
        let k = r / new_r;
        (t, new_t) = (new_t, t - k * new_t);
        (r, new_r) = (new_r, r - k * new_r);
    }
    t.rem_euclid(p)
}

/// Integer Jacobian of the system at `x`, rows in equation order.
pub(crate) fn jacobian(rows: &[Vec<i64>], degrees: &[u32], x: &[i64]) -> Vec<Vec<i64>> {
    rows.iter()
        .zip(degrees)
        .map(|(row, &d)| {
            row.iter()
                .zip(x)
                .map(|(&c, &xi)| c * d as i64 * xi.pow(d - 1))
                .collect()
        })
        .collect()
}

fn lifting(sys: &MixedSystem, p: u64, i: u32, budget: f64) -> Result<u128> {
    let s = sys.s();
    let w = sys.w();
    let start = (p as f64).powi(s as i32);
    if start > budget {
        return Err(budget_error("residue lifting", start, budget));
    }
    let rows = sys.stacked();
    let degrees = sys.degrees();
    let q = modulus(p, i)? as i128;
    let free = (s - w) as u32;
    let mut work = 0f64;
    // residues mod p solving the system mod p
    let mut frontier: Vec<Vec<i64>> = Vec::new();
    let mut x = vec![0i64; s];
    let mut total: u128 = 0;
    loop {
        if values(&rows, &degrees, &x, p as i128).iter().all(|&v| v == 0) {
            frontier.push(x.clone());
        }
        if !advance(&mut x, p as i64) {
            break;
        }
    }
    let mut level = 1u32;
    let mut pk = p as i128;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for x in frontier {
            let reduced: Vec<i64> = x.iter().map(|v| v.rem_euclid(p as i64)).collect();
            if level == i {
                total += 1;
            } else if rank_mod_p(jacobian(&rows, &degrees, &reduced), p as i64) == w {
                total += (p as u128).pow((i - level) * free);
            } else {
                work += start;
                if work > budget {
                    return Err(budget_error("residue lifting", work, budget));
                }
                let mut t = vec![0i64; s];
                loop {
                    let y: Vec<i64> = x.iter().zip(&t).map(|(&a, &b)| a + pk as i64 * b).collect();
                    if values(&rows, &degrees, &y, pk * p as i128).iter().all(|&v| v == 0) {
                        // the last level is only counted, never stored
                        if level + 1 == i {
                            total += 1;
                        } else {
                            next.push(y);
                        }
                    }
                    if !advance(&mut t, p as i64) {
                        break;
                    }
                }
            }
        }
        frontier = next;
        level += 1;
        pk *= p as i128;
        debug_assert!(pk <= q * p as i128);
    }
    Ok(total)
}

fn values(rows: &[Vec<i64>], degrees: &[u32], x: &[i64], q: i128) -> Vec<i128> {
    rows.iter()
        .zip(degrees)
        .map(|(row, &d)| {
            row.iter()
                .zip(x)
                .map(|(&c, &xi)| c as i128 * (xi as i128).pow(d))
                .sum::<i128>()
                .rem_euclid(q)
        })
        .collect()
}

fn advance(x: &mut [i64], base: i64) -> bool {
    for v in x.iter_mut() {
        *v += 1;
        if *v < base {
            return true;
        }
        *v = 0;
    }
    false
}

fn convolution(sys: &MixedSystem, q: u64, budget: f64) -> Result<u128> {
    let w = sys.w();
    let s = sys.s();
    let states = (q as f64).powi(w as i32);
    let (cubes, squares) = powers(q);
    // distinct (x^3, x^2) residue pairs with multiplicities
    let mut pairs: Vec<((u64, u64), u128)> = Vec::new();
    {
        let mut map = std::collections::BTreeMap::new();
        for x in 0..q as usize {
            *map.entry((cubes[x], squares[x])).or_insert(0u128) += 1;
        }
        pairs.extend(map);
    }
    let needed = states * pairs.len() as f64 * s as f64;
    if needed > budget {
        return Err(budget_error("group convolution", needed, budget));
    }
    if states * 32.0 > 4e9 {
        return Err(budget_error("group convolution memory", states * 32.0, 4e9));
    }
    let rows = sys.stacked();
    let degrees = sys.degrees();
    let n = states as usize;
    let mut dist = vec![0u128; n];
    dist[0] = 1;
    let mut next = vec![0u128; n];
    for j in 0..s {
        // shift vector per residue pair, one coordinate per equation
        let shifts: Vec<(Vec<u64>, u128)> = pairs
            .iter()
            .map(|&((c3, c2), mult)| {
                let v = degrees
                    .iter()
                    .enumerate()
                    .map(|(e, &d)| {
                        let pw = if d == 3 { c3 } else { c2 };
                        (rows[e][j].rem_euclid(q as i64) as u64 * pw) % q
                    })
                    .collect();
                (v, mult)
            })
            .collect();
        next.iter_mut().for_each(|v| *v = 0);
        for (shift, mult) in &shifts {
            add_shifted(&dist, &mut next, shift, *mult, q as usize, w);
        }
        std::mem::swap(&mut dist, &mut next);
    }
    Ok(dist[0])
}

/// `next[state + shift] += mult * dist[state]` over `(Z/q)^w`, with
/// coordinate 0 varying fastest.
fn add_shifted(dist: &[u128], next: &mut [u128], shift: &[u64], mult: u128, q: usize, w: usize) {
    let mut digits = vec![0usize; w];
    let mut target_digits: Vec<usize> = shift.iter().map(|&v| v as usize).collect();
    let strides: Vec<usize> = (0..w).map(|k| q.pow(k as u32)).collect();
    let mut target: usize = target_digits.iter().zip(&strides).map(|(d, s)| d * s).sum();
    for &v in dist.iter() {
        if v != 0 {
            next[target] += v * mult;
        }
        // increment source digits and keep the shifted target in step
        for k in 0..w {
            digits[k] += 1;
            target_digits[k] += 1;
            target += strides[k];
            if target_digits[k] == q {
                target_digits[k] = 0;
                target -= q * strides[k];
            }
            if digits[k] < q {
                break;
            }
            digits[k] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiP {
    pub p: u64,
    pub value: f64,
    pub i_used: u32,
    /// Final correction `A(p^{i_used})` fell below the stabilization tolerance.
    pub stabilized: bool,
    /// `sum_{k <= i} A(p^k)` for `i = 1..=i_used`.
    pub partials: Vec<f64>,
}

pub const STABILIZATION_TOL: f64 = 1e-9;

/// `p`-adic density as the partial sums `sum_{k <= i} A(p^k)`, taking `i`
/// as large as `i_max` and the work budget allow (at least 1).
pub fn chi_p(sys: &MixedSystem, p: u64, i_max: u32, budget: f64) -> Result<ChiP> {
    if !is_prime(p) {
        return Err(DensityError::Shape(format!("{p} is not prime")));
    }
    if i_max == 0 {
        return Err(DensityError::Shape("i_max must be at least 1".into()));
    }
    let ss = SeriesSystem::new(sys);
    let mut partials = Vec::new();
    let mut total = 1.0;
    let mut last = f64::INFINITY;
    for i in 1..=i_max {
        let q = modulus(p, i)?;
        if i > 1 && (ss.cost(q) > budget || (q as f64).powi(3) > budget) {
            break;
        }
        let a = term(&ss, q)?.value;
        total += a;
        last = a;
        partials.push(total);
    }
    Ok(ChiP {
        p,
        value: total,
        i_used: partials.len() as u32,
        stabilized: partials.len() >= 2 && last.abs() <= STABILIZATION_TOL,
        partials,
    })
}

/// `p^{-i(s-w)} M(p^i)`.
pub fn normalized_count(sys: &MixedSystem, c: &CongruenceCount) -> f64 {
    let free = sys.s() as f64 - sys.w() as f64;
    (c.m as f64) * (c.p as f64).powf(-(c.i as f64) * free)
}
