//! Meet-in-the-middle counting.
//!
//! Each tuple's vector of equation values is folded into a single integer by
//! a balanced mixed-radix code: with `B_e` bounding `|value_e|`, the weight of
//! equation `e` is `prod_{e' < e} (2 B_{e'} + 1)`. Codes add like the vectors
//! they encode and the zero vector is the only one with code zero, so the
//! join compares one integer per tuple.
//!
//! Variables with identical coefficients are interchangeable, so a class of
//! `k` of them is enumerated as multisets of values weighted by their number
//! of orderings. The stored side is tabulated in a hash map; the streamed
//! side is enumerated in parallel and looked up.

use std::hash::Hash;
use std::ops::{Add, Neg};

use num_integer::binomial;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::{CountError, CountingSystem};

/// Packed equation-value code.
pub(crate) trait LinKey:
    Copy + Eq + Hash + Send + Sync + Default + Add<Output = Self> + Neg<Output = Self> + 'static
{
    fn from_i128(v: i128) -> Self;
    /// Conservative bytes per stored entry, hash table overhead included.
    const ENTRY_BYTES: f64;
}

impl LinKey for i64 {
    fn from_i128(v: i128) -> Self {
        v as i64
    }
    const ENTRY_BYTES: f64 = 40.0;
}

impl LinKey for i128 {
    fn from_i128(v: i128) -> Self {
        v
    }
    const ENTRY_BYTES: f64 = 56.0;
}

/// A run of identical variables assigned to one side.
#[derive(Debug, Clone)]
struct ClassPart {
    class: usize,
    size: usize,
}

#[derive(Debug, Clone)]
pub struct SplitPlan {
    /// Number of leading variables (in class order) on the stored side.
    pub stored_vars: usize,
    pub stored_states: f64,
    pub streamed_states: f64,
}

pub struct MitmLimits {
    pub budget_bytes: f64,
    pub max_stream_states: f64,
}

/// Exact count by meet in the middle.
pub fn count_mitm(sys: &CountingSystem, p: u64, limits: &MitmLimits) -> Result<u128, CountError> {
    let v = sys.variable_count();
    let m = 2 * p + 1;
    if (v as f64) * (m as f64).log2() >= 127.0 {
        return Err(CountError::Overflow(format!(
            "(2P+1)^V with P={p}, V={v} exceeds 128 bits"
        )));
    }
    let bounds = sys.equation_bounds(p)?;
    let mut weights = Vec::with_capacity(bounds.len());
    let mut span: i128 = 1;
    for &b in &bounds {
        weights.push(span);
        span = span
            .checked_mul(2 * b + 1)
            .ok_or_else(|| CountError::Overflow("packed key exceeds 128 bits".into()))?;
    }
    if span <= i64::MAX as i128 {
        run::<i64>(sys, p, &weights, span as f64, limits)
    } else {
        run::<i128>(sys, p, &weights, span as f64, limits)
    }
}

fn run<K: LinKey>(
    sys: &CountingSystem,
    p: u64,
    weights: &[i128],
    key_space: f64,
    limits: &MitmLimits,
) -> Result<u128, CountError> {
    // class id per variable, classes in order of first appearance
    let mut class_coeffs: Vec<&Vec<i64>> = Vec::new();
    let mut class_sizes: Vec<usize> = Vec::new();
    for coeffs in sys.vars() {
        match class_coeffs.iter().position(|c| *c == coeffs) {
            Some(i) => class_sizes[i] += 1,
            None => {
                class_coeffs.push(coeffs);
                class_sizes.push(1);
            }
        }
    }
    let values: Vec<Vec<K>> = class_coeffs
        .iter()
        .map(|coeffs| {
            (-(p as i128)..=p as i128)
                .map(|x| {
                    let lin: i128 = sys
                        .degrees()
                        .iter()
                        .zip(coeffs.iter())
                        .zip(weights)
                        .map(|((&d, &c), &w)| c as i128 * x.pow(d) * w)
                        .sum();
                    K::from_i128(lin)
                })
                .collect()
        })
        .collect();

    let plan = plan_split(&class_sizes, 2 * p as usize + 1, key_space, K::ENTRY_BYTES, limits)?;
    let (stored, streamed) = split_parts(&class_sizes, plan.stored_vars);

    let stored_tables: Vec<Vec<(K, u64)>> = stored
        .iter()
        .map(|part| multiset_table(&values[part.class], part.size))
        .collect();
    let streamed_tables: Vec<Vec<(K, u64)>> = streamed
        .iter()
        .map(|part| multiset_table(&values[part.class], part.size))
        .collect();

    let mut table: FxHashMap<K, u64> = FxHashMap::default();
    let reserve = plan.stored_states.min(key_space).min(1e9) as usize;
    table.reserve(reserve);
    for_each_combination(&stored_tables, K::default(), 1, &mut |lin, w| {
        *table.entry(lin).or_insert(0) += w;
    });

    if streamed_tables.is_empty() {
        return Ok(table.get(&K::default()).copied().unwrap_or(0) as u128);
    }
    let (first, rest) = streamed_tables.split_first().expect("non-empty");
    let total = first
        .par_iter()
        .map(|&(lin0, w0)| {
            let mut acc = 0u128;
            for_each_combination(rest, lin0, w0, &mut |lin, w| {
                if let Some(&c) = table.get(&(-lin)) {
                    acc += w as u128 * c as u128;
                }
            });
            acc
        })
        .sum();
    Ok(total)
}

/// Cartesian product of weighted tables, accumulating codes and weights.
fn for_each_combination<K: LinKey, F: FnMut(K, u64)>(
    tables: &[Vec<(K, u64)>],
    lin: K,
    weight: u64,
    f: &mut F,
) {
    match tables {
        [] => f(lin, weight),
        [last] => {
            for &(l, w) in last {
                f(lin + l, weight * w);
            }
        }
        [head, tail @ ..] => {
            for &(l, w) in head {
                for_each_combination(tail, lin + l, weight * w, f);
            }
        }
    }
}

/// All multisets of size `k` drawn from `values`, as (code sum, number of
/// orderings).
fn multiset_table<K: LinKey>(values: &[K], k: usize) -> Vec<(K, u64)> {
    let mut out = Vec::new();
    if k == 0 {
        out.push((K::default(), 1));
        return out;
    }
    // non-decreasing index sequences; weight d!/prod(run!) built incrementally
    fn rec<K: LinKey>(
        values: &[K],
        k: usize,
        depth: usize,
        start: usize,
        run: u64,
        lin: K,
        weight: u64,
        out: &mut Vec<(K, u64)>,
    ) {
        if depth == k {
            out.push((lin, weight));
            return;
        }
        let d = depth as u64 + 1;
        for i in start..values.len() {
            let r = if i == start && depth > 0 { run + 1 } else { 1 };
            rec(values, k, depth + 1, i, r, lin + values[i], weight * d / r, out);
        }
    }
    rec(values, k, 0, 0, 0, K::default(), 1, &mut out);
    out
}

fn split_parts(class_sizes: &[usize], stored_vars: usize) -> (Vec<ClassPart>, Vec<ClassPart>) {
    let mut stored = Vec::new();
    let mut streamed = Vec::new();
    let mut remaining = stored_vars;
    for (class, &size) in class_sizes.iter().enumerate() {
        let take = remaining.min(size);
        remaining -= take;
        if take > 0 {
            stored.push(ClassPart { class, size: take });
        }
        if size > take {
            streamed.push(ClassPart {
                class,
                size: size - take,
            });
        }
    }
    (stored, streamed)
}

fn states(class_sizes: &[usize], range: std::ops::Range<usize>, m: usize) -> f64 {
    // multiset counts of the variables at positions `range` in class order
    let mut pos = 0;
    let mut total = 1.0;
    for &size in class_sizes {
        let lo = range.start.max(pos);
        let hi = range.end.min(pos + size);
        if hi > lo {
            let k = hi - lo;
            total *= binomial((m + k - 1) as u128, k as u128) as f64;
        }
        pos += size;
    }
    total
}

/// Picks the cut (in class order) with the least total enumeration among
/// those whose stored side fits the memory budget and is no larger than the
/// streamed side.
pub(crate) fn plan_split(
    class_sizes: &[usize],
    m: usize,
    key_space: f64,
    entry_bytes: f64,
    limits: &MitmLimits,
) -> Result<SplitPlan, CountError> {
    let v: usize = class_sizes.iter().sum();
    let mut best: Option<SplitPlan> = None;
    let mut smallest_bytes = f64::INFINITY;
    for cut in 0..=v {
        let a = states(class_sizes, 0..cut, m);
        let b = states(class_sizes, cut..v, m);
        if a > b {
            continue;
        }
        let bytes = a.min(key_space) * entry_bytes;
        smallest_bytes = smallest_bytes.min(bytes);
        if bytes > limits.budget_bytes {
            continue;
        }
        let better = match &best {
            None => true,
            Some(cur) => {
                a + b < cur.stored_states + cur.streamed_states
                    || (a + b == cur.stored_states + cur.streamed_states && a < cur.stored_states)
            }
        };
        if better {
            best = Some(SplitPlan {
                stored_vars: cut,
                stored_states: a,
                streamed_states: b,
            });
        }
    }
    let plan = best.ok_or(CountError::Budget {
        side: "stored".into(),
        needed_bytes: smallest_bytes,
        budget_bytes: limits.budget_bytes,
    })?;
    if plan.streamed_states > limits.max_stream_states {
        return Err(CountError::Work {
            side: "streamed".into(),
            tuples: plan.streamed_states,
            limit: limits.max_stream_states,
        });
    }
    Ok(plan)
}
