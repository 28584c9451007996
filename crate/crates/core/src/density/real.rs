//! Real density by Monte-Carlo slab volumes with extrapolation in `eps`,
//! and the truncated singular integral by nested adaptive quadrature.

use std::cell::Cell;
use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{DensityError, Result};
use crate::counting::MixedSystem;
use crate::expsum::{adaptive_gk, oscillatory_v, ExpSumError, DEFAULT_PANEL_BUDGET};

pub const DEFAULT_EPS: [f64; 4] = [0.2, 0.14, 0.1, 0.07];
pub const DEFAULT_MC_SAMPLES: u64 = 10_000_000;
/// Strata along the first coordinate.
pub const STRATA: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlabEstimate {
    /// Slab half-width relative to each row's RMS coefficient.
    pub eps: f64,
    pub value: f64,
    pub sigma: f64,
    pub hits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiInfinity {
    pub value: f64,
    pub error: f64,
    pub samples: u64,
    pub seed: u64,
    pub estimates: Vec<SlabEstimate>,
    pub flags: Vec<String>,
}

fn row_scales(rows: &[Vec<i64>]) -> Vec<f64> {
    rows.iter()
        .map(|r| (r.iter().map(|&c| (c * c) as f64).sum::<f64>() / r.len() as f64).sqrt())
        .collect()
}

/// `lim (2 eps)^{-w} vol{z in [-1,1]^s : |F_k(z)| <= eps for all k}`.
///
/// Each row is tested against `eps` times its RMS coefficient, which
/// leaves the limit unchanged. All `eps` values share one stratified
/// sample (`STRATA` slices of the first coordinate, one ChaCha stream per
/// slice), so the run is reproducible for a fixed seed and thread count
/// independent. The limit is a weighted least-squares fit linear in
/// `eps^gamma`, where `gamma = min(2, (s - sum of degrees) / max degree)`
/// is the order at which the singular zero at the origin perturbs the
/// slab average; away from it the average is even and smooth in `eps`.
pub fn chi_infinity(sys: &MixedSystem, eps: &[f64], samples: u64, seed: u64) -> Result<ChiInfinity> {
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(DensityError::Shape("eps values must be positive".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(DensityError::Shape("eps sequence must be strictly decreasing".into()));
    }
    if samples < STRATA as u64 {
        return Err(DensityError::Shape(format!("need at least {STRATA} samples")));
    }
    let rows = sys.stacked();
    let degrees = sys.degrees();
    let scales = row_scales(&rows);
    if scales.iter().any(|&c| c == 0.0) {
        return Err(DensityError::Shape("zero equation row".into()));
    }
    let s = sys.s();
    let per = samples.div_ceil(STRATA as u64);
    let emax = eps[0];
    let hits: Vec<Vec<u64>> = (0..STRATA)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let lo = -1.0 + 2.0 * k as f64 / STRATA as f64;
            let width = 2.0 / STRATA as f64;
            let mut z = vec![0.0; s];
            let mut counts = vec![0u64; eps.len()];
            for _ in 0..per {
                z[0] = lo + width * rng.gen::<f64>();
                for v in z.iter_mut().skip(1) {
                    *v = rng.gen_range(-1.0..1.0);
                }
                let mut m = 0.0f64;
                for ((row, &d), &sc) in rows.iter().zip(&degrees).zip(&scales) {
                    let f: f64 = row
                        .iter()
                        .zip(&z)
                        .map(|(&c, &x)| c as f64 * if d == 3 { x * x * x } else { x * x })
                        .sum();
                    m = m.max(f.abs() / sc);
                    if m > emax {
                        break;
                    }
                }
                for (c, &e) in counts.iter_mut().zip(eps) {
                    if m <= e {
                        *c += 1;
                    }
                }
            }
            counts
        })
        .collect();
    let cube = 2f64.powi(s as i32);
    let estimates: Vec<SlabEstimate> = eps
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let mut mean = 0.0;
            let mut var = 0.0;
            let mut total = 0;
            for h in &hits {
                let frac = h[i] as f64 / per as f64;
                mean += frac / STRATA as f64;
                var += frac * (1.0 - frac) / (per as f64 - 1.0) / (STRATA * STRATA) as f64;
                total += h[i];
            }
            let slab: f64 = scales.iter().map(|sc| 2.0 * e * sc).product();
            SlabEstimate {
                eps: e,
                value: cube * mean / slab,
                sigma: cube * var.sqrt() / slab,
                hits: total,
            }
        })
        .collect();
    let mut flags = Vec::new();
    if estimates.iter().any(|e| e.hits == 0) {
        flags.push("a slab received no samples".to_string());
    }
    let rises = estimates
        .windows(2)
        .any(|p| p[1].value - p[0].value > 3.0 * p[0].sigma.hypot(p[1].sigma));
    let falls = estimates
        .windows(2)
        .any(|p| p[0].value - p[1].value > 3.0 * p[0].sigma.hypot(p[1].sigma));
    if rises && falls {
        flags.push("non-monotone slab estimates".to_string());
    }
    let gamma = correction_order(sys);
    if gamma <= 0.0 {
        flags.push("slab averages have no finite limit at the origin".to_string());
    }
    let (value, error) = extrapolate(&estimates, gamma.max(1e-3));
    if !value.is_finite() || !error.is_finite() {
        flags.push("extrapolation failed".to_string());
    }
    Ok(ChiInfinity {
        value,
        error,
        samples: per * STRATA as u64,
        seed,
        estimates,
        flags,
    })
}

fn correction_order(sys: &MixedSystem) -> f64 {
    let degrees = sys.degrees();
    let total: u32 = degrees.iter().sum();
    let top = *degrees.iter().max().expect("at least one equation") as f64;
    ((sys.s() as f64 - total as f64) / top).min(2.0)
}

/// Weighted fit `value = a + b eps^gamma`; error combines the intercept's
/// standard error with the RMS fit residual.
fn extrapolate(est: &[SlabEstimate], gamma: f64) -> (f64, f64) {
    if est.len() == 1 {
        return (est[0].value, est[0].sigma);
    }
    let floor = est.iter().map(|e| e.sigma).fold(0.0, f64::max).max(1e-300) * 1e-6;
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for e in est {
        let w = 1.0 / e.sigma.max(floor).powi(2);
        let x = e.eps.powf(gamma);
        sw += w;
        sx += w * x;
        sy += w * e.value;
        sxx += w * x * x;
        sxy += w * x * e.value;
    }
    let det = sw * sxx - sx * sx;
    let b = (sw * sxy - sx * sy) / det;
    let a = (sxx * sy - sx * sxy) / det;
    let se = (sxx / det).sqrt();
    let resid = if est.len() > 2 {
        let ss: f64 = est
            .iter()
            .map(|e| (e.value - a - b * e.eps.powf(gamma)).powi(2))
            .sum();
        (ss / (est.len() - 2) as f64).sqrt()
    } else {
        0.0
    };
    (a, se.hypot(resid))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularIntegral {
    pub y: f64,
    pub p: f64,
    /// `J(Y) / P^{s - 2 r2 - 3 r3}`, independent of `P`.
    pub scaled: f64,
    pub scaled_imag: f64,
    pub error: f64,
    pub value: f64,
}

/// Truncated singular integral over `|beta_2| <= Y P^{-2}`,
/// `|beta_3| <= Y P^{-3}`. After `z = P u` it equals
/// `P^{s - 2 r2 - 3 r3}` times the integral over `[-Y, Y]^w` of
/// `prod_j V(Lambda_j(b))` with `V(b3, b2) = int_{-1}^{1} e(b3 u^3 + b2 u^2) du`.
pub fn singular_integral_j(sys: &MixedSystem, y: f64, p: f64, tol: f64) -> Result<SingularIntegral> {
    let w = sys.w();
    if w > 4 {
        return Err(DensityError::Dimension(w));
    }
    if !(y > 0.0 && p > 0.0 && tol > 0.0) {
        return Err(DensityError::Shape("Y, P and tol must be positive".into()));
    }
    let r3 = sys.r3();
    // identical columns share one factor
    let mut columns: BTreeMap<Vec<i64>, i32> = BTreeMap::new();
    for j in 0..sys.s() {
        *columns.entry(sys.column(j)).or_default() += 1;
    }
    let columns: Vec<(Vec<i64>, i32)> = columns.into_iter().collect();
    let v_tol = (tol * 1e-3).min(1e-10);
    let failure: Cell<Option<ExpSumError>> = Cell::new(None);
    let integrand = |b: &[f64]| -> Complex64 {
        let mut prod = Complex64::new(1.0, 0.0);
        for (col, mult) in &columns {
            let b3: f64 = (0..r3).map(|i| col[i] as f64 * b[i]).sum();
            let b2: f64 = (r3..w).map(|i| col[i] as f64 * b[i]).sum();
            match oscillatory_v(b3, b2, 1.0, v_tol, DEFAULT_PANEL_BUDGET) {
                Ok(v) => prod *= v.value().powi(*mult),
                Err(e) => {
                    failure.set(Some(e));
                    return Complex64::new(0.0, 0.0);
                }
            }
        }
        prod
    };
    let rates: Vec<f64> = (0..w)
        .map(|i| columns.iter().map(|(c, m)| c[i].unsigned_abs() as f64 * *m as f64).fold(0.0, f64::max))
        .collect();
    let mut point = vec![0.0; w];
    let (value, error) = nested(&integrand, &mut point, 0, y, &rates, tol, &failure)?;
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    Ok(SingularIntegral {
        y,
        p,
        scaled: value.re,
        scaled_imag: value.im,
        error,
        value: value.re * p.powi(sys.main_term_exponent() as i32),
    })
}

fn nested<F: Fn(&[f64]) -> Complex64>(
    f: &F,
    point: &mut Vec<f64>,
    depth: usize,
    y: f64,
    rates: &[f64],
    tol: f64,
    failure: &Cell<Option<ExpSumError>>,
) -> Result<(Complex64, f64)> {
    let w = point.len();
    let panels = (2.0 * y * rates[depth].max(1.0)).ceil() + 1.0;
    if depth + 1 == w {
        let base = point.clone();
        let r = adaptive_gk(
            |t| {
                let mut b = base.clone();
                b[depth] = t;
                f(&b)
            },
            -y,
            y,
            panels,
            tol,
            DEFAULT_PANEL_BUDGET,
        )?;
        return Ok((r.value(), r.error));
    }
    let inner_tol = tol / (4.0 * y);
    let inner_err = Cell::new(0.0f64);
    let inner_fail: Cell<Option<DensityError>> = Cell::new(None);
    let base = point.clone();
    let r = adaptive_gk(
        |t| {
            let mut b = base.clone();
            b[depth] = t;
            match nested(f, &mut b, depth + 1, y, rates, inner_tol, failure) {
                Ok((v, e)) => {
                    inner_err.set(inner_err.get().max(e));
                    v
                }
                Err(e) => {
                    inner_fail.set(Some(e));
                    Complex64::new(0.0, 0.0)
                }
            }
        },
        -y,
        y,
        panels,
        tol / 2.0,
        DEFAULT_PANEL_BUDGET,
    )?;
    if let Some(e) = inner_fail.take() {
        return Err(e);
    }
    Ok((r.value(), r.error + 2.0 * y * inner_err.get()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn cone_density_is_two_pi() {
        // x^2 + y^2 - z^2 on [-1, 1]^3 has density int 1/r over the unit disc
        let sys = MixedSystem::from_i64(&[vec![1, 1, -1]], &[], 3).unwrap();
        let chi = chi_infinity(&sys, &[0.1, 0.07, 0.05, 0.035], 2_000_000, 11).unwrap();
        assert!(chi.flags.is_empty(), "{:?}", chi.flags);
        assert!((chi.value - TAU).abs() < 3.0 * chi.error, "{} +- {}", chi.value, chi.error);
        assert!(chi.error < 0.05 * TAU);
    }

    #[test]
    fn deterministic_at_fixed_seed() {
        let sys = MixedSystem::from_i64(&[vec![1, -2, 1]], &[vec![1, 1, -1]], 3).unwrap();
        let a = chi_infinity(&sys, &[0.2, 0.1], 100_000, 5).unwrap();
        let b = chi_infinity(&sys, &[0.2, 0.1], 100_000, 5).unwrap();
        assert_eq!(a, b);
        let c = chi_infinity(&sys, &[0.2, 0.1], 100_000, 6).unwrap();
        assert_ne!(a.estimates, c.estimates);
    }

    #[test]
    fn doubling_samples_shrinks_sigma() {
        let sys = MixedSystem::from_i64(&[vec![1, 1, -1]], &[], 3).unwrap();
        let a = chi_infinity(&sys, &[0.1], 1_000_000, 3).unwrap();
        let b = chi_infinity(&sys, &[0.1], 2_000_000, 4).unwrap();
        let ratio = b.estimates[0].sigma / a.estimates[0].sigma;
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.03, "{ratio}");
    }

    #[test]
    fn rejects_bad_eps() {
        let sys = MixedSystem::from_i64(&[vec![1, 1, -1]], &[], 3).unwrap();
        assert!(chi_infinity(&sys, &[0.1, 0.2], 1000, 1).is_err());
        assert!(chi_infinity(&sys, &[], 1000, 1).is_err());
        assert!(chi_infinity(&sys, &[0.1, -0.1], 1000, 1).is_err());
    }

    #[test]
    fn tiny_box_integral_is_box_volume() {
        let sys = MixedSystem::from_i64(&[vec![1, -2, 3]], &[vec![2, 1, -1]], 3).unwrap();
        let y = 1e-3;
        let j = singular_integral_j(&sys, y, 5.0, 1e-14).unwrap();
        let approx = 8.0 * (2.0 * y) * (2.0 * y);
        assert!((j.scaled / approx - 1.0).abs() < 1e-3);
        // unscaled value carries P^{s - 2 r2 - 3 r3} = 5^{-2}
        assert!((j.value - j.scaled / 25.0).abs() < 1e-15);
    }

    #[test]
    fn single_cubic_matches_grid_oracle() {
        // int_{-Y}^{Y} V(b, 0) V(-2b, 0) V(b, 0) db on Simpson grids
        let sys = MixedSystem::from_i64(&[], &[vec![1, -2, 1]], 3).unwrap();
        let y = 2.0;
        let j = singular_integral_j(&sys, y, 1.0, 1e-9).unwrap();
        let simpson = |n: usize, a: f64, b: f64, g: &dyn Fn(f64) -> Complex64| {
            let h = (b - a) / n as f64;
            let mut s = g(a) + g(b);
            for i in 1..n {
                s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let v = |b3: f64| simpson(4000, -1.0, 1.0, &|u| crate::expsum::e(b3 * u * u * u));
        let oracle = simpson(2000, -y, y, &|b| v(b) * v(b) * v(-2.0 * b));
        assert!((j.scaled - oracle.re).abs() < 1e-7, "{} vs {}", j.scaled, oracle.re);
        assert!(oracle.im.abs() < 1e-9 && j.scaled_imag.abs() < 1e-8);
    }

    #[test]
    fn truncated_integral_tracks_real_density() {
        let c3 = vec![1, -1, 1, -1, 1, -1, 1, -1, 2, -2, 2, -2];
        let c2 = vec![1, 1, -1, -1, 1, 1, -1, -1, 1, 1, -1, -1];
        let sys = MixedSystem::from_i64(&[c2], &[c3], 12).unwrap();
        let chi = chi_infinity(&sys, &[0.2, 0.14, 0.1, 0.07], 4_000_000, 2).unwrap();
        assert!(chi.flags.is_empty());
        let j = singular_integral_j(&sys, 2.0, 3.0, 1e-4).unwrap();
        let bar = 3.0 * chi.error + j.error;
        assert!((j.scaled - chi.value).abs() <= bar, "{} vs {} +- {bar}", j.scaled, chi.value);
        // s - 2 r2 - 3 r3 = 7
        assert!((j.value / j.scaled / 3f64.powi(7) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_guard() {
        let rows: Vec<Vec<i64>> = (0..5).map(|i| vec![1, i, 2, -1, 1, 1]).collect();
        let sys = MixedSystem::from_i64(&rows[..2], &rows[2..], 6).unwrap();
        assert!(matches!(
            singular_integral_j(&sys, 1.0, 1.0, 1e-6),
            Err(DensityError::Dimension(5))
        ));
    }
}
