//! Plain enumeration of every tuple. Kept deliberately simple: it is the
//! reference the meet-in-the-middle path is checked against.

use rayon::prelude::*;

use super::{CountError, CountingSystem};

/// Exact count by visiting all `(2P+1)^V` tuples, parallel over the first
/// variable.
pub fn count_naive(sys: &CountingSystem, p: u64, max_tuples: f64) -> Result<u128, CountError> {
    let v = sys.variable_count();
    let e = sys.equation_count();
    let m = 2 * p as usize + 1;
    let tuples = (m as f64).powi(v as i32);
    if tuples > max_tuples {
        return Err(CountError::Work {
            side: "streamed (naive)".into(),
            tuples,
            limit: max_tuples,
        });
    }
    sys.equation_bounds(p)?
        .iter()
        .try_for_each(|&b| {
            i64::try_from(b)
                .map(|_| ())
                .map_err(|_| CountError::Overflow("equation values exceed i64".into()))
        })?;
    if v == 0 {
        return Ok(1);
    }
    // table[var][xi * e + eq]
    let table: Vec<Vec<i64>> = sys
        .vars()
        .iter()
        .map(|coeffs| {
            let mut t = Vec::with_capacity(m * e);
            for x in -(p as i64)..=p as i64 {
                for (eq, &d) in sys.degrees().iter().enumerate() {
                    t.push(coeffs[eq] * x.pow(d));
                }
            }
            t
        })
        .collect();

    let total = (0..m)
        .into_par_iter()
        .map(|x0| {
            let mut sums = vec![0i64; (v + 1) * e];
            sums[e..2 * e].copy_from_slice(&table[0][x0 * e..(x0 + 1) * e]);
            descend(&table, &mut sums, 1, v, e, m)
        })
        .sum();
    Ok(total)
}

fn descend(table: &[Vec<i64>], sums: &mut [i64], level: usize, v: usize, e: usize, m: usize) -> u128 {
    if level == v {
        return sums[v * e..(v + 1) * e].iter().all(|&s| s == 0) as u128;
    }
    let mut count = 0u128;
    let t = &table[level];
    for xi in 0..m {
        let (head, tail) = sums.split_at_mut((level + 1) * e);
        let prev = &head[level * e..];
        let next = &mut tail[..e];
        for eq in 0..e {
            next[eq] = prev[eq] + t[xi * e + eq];
        }
        if level + 1 == v {
            count += next.iter().all(|&s| s == 0) as u128;
        } else {
            count += descend(table, sums, level + 1, v, e, m);
        }
    }
    count
}
