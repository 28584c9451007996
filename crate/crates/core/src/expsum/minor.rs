use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{eval_g, ExpSumError, Result};
use crate::arcs::{classify_1d, ArcParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinorArcReport {
    pub p: u64,
    pub max_abs: f64,
    /// `P^{3/4}` for comparison.
    pub p_three_quarters: f64,
    pub accepted: usize,
    pub rejected: usize,
}

/// Largest `|g|` over the points that fall on the one-dimensional minor
/// arcs.
pub fn minor_arc_sup_over(points: &[f64], p: u64) -> Result<MinorArcReport> {
    if p < 16 {
        return Err(ExpSumError::SmallP(p));
    }
    let params = ArcParams::cubic_1d(p).expect("P >= 16");
    let values: Vec<Option<f64>> = points
        .par_iter()
        .map(|&eta| -> Result<Option<f64>> {
            let label = classify_1d(eta, &params).map_err(|_| ExpSumError::NonFinite)?;
            if label.is_major() {
                Ok(None)
            } else {
                Ok(Some(eval_g(eta, p)?.norm()))
            }
        })
        .collect::<Result<_>>()?;
    let accepted: Vec<f64> = values.into_iter().flatten().collect();
    if accepted.is_empty() {
        return Err(ExpSumError::AllMajor(points.len()));
    }
    Ok(MinorArcReport {
        p,
        max_abs: accepted.iter().copied().fold(0.0, f64::max),
        p_three_quarters: (p as f64).powf(0.75),
        accepted: accepted.len(),
        rejected: points.len() - accepted.len(),
    })
}

/// [`minor_arc_sup_over`] on `samples` uniform points from a seeded stream.
pub fn minor_arc_sup_check(p: u64, samples: usize, seed: u64) -> Result<MinorArcReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<f64> = (0..samples).map(|_| rng.gen()).collect();
    minor_arc_sup_over(&points, p)
}
