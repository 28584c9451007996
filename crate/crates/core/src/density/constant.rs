//! Assembly of `c = chi_inf * prod_p chi_p` with an empirical prime tail.

use rayon::prelude::*;
use serde::Serialize;

use super::congruence::{chi_p, primes_up_to, ChiP};
use super::real::{chi_infinity, singular_integral_j, ChiInfinity, SingularIntegral, DEFAULT_EPS, DEFAULT_MC_SAMPLES};
use super::series::{singular_series, SeriesReport};
use super::witness::{find_nonsingular_local_solution, Place, Witness};
use super::{DensityError, Result};
use crate::counting::MixedSystem;

/// Primes up to this bound enter the tail sum individually.
pub const TAIL_SIEVE: u64 = 1_000_000;
/// Only primes above this bound calibrate the tail constant.
pub const TAIL_CALIBRATION_FLOOR: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityParams {
    pub prime_bound: u64,
    pub i_max: u32,
    /// Largest `q^w s` spent on one `A(q)`.
    pub work_budget: f64,
    pub series_y: u64,
    pub eps: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
    /// `p`-adic witnesses are searched for primes up to this bound.
    pub witness_bound: u64,
    /// `(Y, P, tol)` for the truncated singular integral, if wanted.
    pub singular_integral: Option<(f64, f64, f64)>,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            prime_bound: 97,
            i_max: 8,
            work_budget: 2e8,
            series_y: 40,
            eps: DEFAULT_EPS.to_vec(),
            samples: DEFAULT_MC_SAMPLES,
            seed: 1,
            witness_bound: 7,
            singular_integral: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBound {
    /// `max p |chi_p - 1|` over the calibrating primes.
    pub constant: f64,
    pub prime_bound: u64,
    /// Bound on `|log prod_{p > bound} chi_p|` from `sum C / p^2`.
    pub relative: f64,
    pub calibrated: bool,
}

/// Tail envelope `sum_{p > bound} C / p^2` with `C` the largest observed
/// `p |chi_p - 1|` for `p > 20`; primes past `TAIL_SIEVE` are covered by
/// `C / (N ln N)`.
pub fn prime_tail(chi_ps: &[ChiP], prime_bound: u64) -> TailBound {
    let calibrating: Vec<&ChiP> = chi_ps.iter().filter(|c| c.p > TAIL_CALIBRATION_FLOOR).collect();
    let calibrated = !calibrating.is_empty();
    let pool: Vec<&ChiP> = if calibrated { calibrating } else { chi_ps.iter().collect() };
    let constant = pool
        .iter()
        .map(|c| c.p as f64 * (c.value - 1.0).abs())
        .fold(0.0, f64::max);
    let n = TAIL_SIEVE as f64;
    let relative = if prime_bound >= TAIL_SIEVE {
        constant / (prime_bound as f64 * (prime_bound as f64).ln())
    } else {
        primes_up_to(TAIL_SIEVE)
            .into_iter()
            .filter(|&p| p > prime_bound)
            .map(|p| constant / (p as f64 * p as f64))
            .sum::<f64>()
            + constant / (n * n.ln())
    };
    TailBound {
        constant,
        prime_bound,
        relative,
        calibrated,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub c: f64,
    pub error: f64,
    pub flags: Vec<String>,
}

/// `c = chi_inf prod chi_p` with relative errors added in quadrature:
/// the real density's error bar, `|A(p^i)|` at the last level of each
/// unstabilized prime, and the tail bound.
pub fn assemble_constant(chi_inf: &ChiInfinity, chi_ps: &[ChiP], tail: &TailBound) -> ConstantEstimate {
    let mut flags: Vec<String> = chi_inf.flags.iter().map(|f| format!("chi_inf: {f}")).collect();
    let product: f64 = chi_ps.iter().map(|c| c.value).product();
    let c = chi_inf.value * product;
    let mut rel2 = if chi_inf.value != 0.0 {
        (chi_inf.error / chi_inf.value).powi(2)
    } else {
        f64::INFINITY
    };
    let mut loose = Vec::new();
    for cp in chi_ps {
        let last = match cp.partials.len() {
            0 => 0.0,
            1 => cp.partials[0] - 1.0,
            n => cp.partials[n - 1] - cp.partials[n - 2],
        };
        if !cp.stabilized {
            loose.push(cp.p);
            rel2 += (last / cp.value).powi(2);
        }
    }
    if !loose.is_empty() {
        flags.push(format!("chi_p not stabilized for p in {loose:?}"));
    }
    if !tail.calibrated {
        flags.push(format!("tail constant calibrated on primes <= {TAIL_CALIBRATION_FLOOR}"));
    }
    rel2 += tail.relative.powi(2);
    ConstantEstimate {
        c,
        error: c.abs() * rel2.sqrt(),
        flags,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalWitness {
    pub place: String,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub params: DensityParams,
    pub chi_infinity: ChiInfinity,
    pub chi_p: Vec<ChiP>,
    pub series: SeriesReport,
    pub singular_integral: Option<SingularIntegral>,
    pub tail: TailBound,
    pub witnesses: Vec<LocalWitness>,
    pub c: f64,
    pub c_error: f64,
    /// Non-singular real and `p`-adic witnesses exist at every searched place.
    pub positivity_supported: bool,
    pub flags: Vec<String>,
}

impl DensityReport {
    pub fn flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

pub fn compute_constant_c(sys: &MixedSystem, params: &DensityParams) -> Result<DensityReport> {
    if params.prime_bound < 2 || params.i_max == 0 || params.series_y == 0 || params.work_budget <= 0.0 {
        return Err(DensityError::Shape(
            "prime bound, i_max, Y and work budget must be positive".into(),
        ));
    }
    let primes = primes_up_to(params.prime_bound);
    let chi_ps: Vec<ChiP> = primes
        .par_iter()
        .map(|&p| chi_p(sys, p, params.i_max, params.work_budget))
        .collect::<Result<_>>()?;
    let chi_inf = chi_infinity(sys, &params.eps, params.samples, params.seed)?;
    let series = singular_series(sys, params.series_y)?;
    let singular_integral = params
        .singular_integral
        .map(|(y, p, tol)| singular_integral_j(sys, y, p, tol))
        .transpose()?;
    let tail = prime_tail(&chi_ps, params.prime_bound);
    let estimate = assemble_constant(&chi_inf, &chi_ps, &tail);
    let mut places = vec![Place::Real];
    places.extend(
        primes
            .iter()
            .filter(|&&p| p <= params.witness_bound)
            .map(|&p| Place::Prime(p)),
    );
    let witnesses: Vec<LocalWitness> = places
        .par_iter()
        .map(|&place| {
            Ok(LocalWitness {
                place: place.to_string(),
                witness: find_nonsingular_local_solution(sys, place, params.seed)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut flags = estimate.flags;
    let missing: Vec<&str> = witnesses
        .iter()
        .filter(|w| w.witness.is_none())
        .map(|w| w.place.as_str())
        .collect();
    if !missing.is_empty() {
        flags.push(format!("no non-singular witness at {missing:?}: c may be nonpositive"));
    }
    Ok(DensityReport {
        params: params.clone(),
        chi_infinity: chi_inf,
        chi_p: chi_ps,
        series,
        singular_integral,
        tail,
        positivity_supported: missing.is_empty(),
        witnesses,
        c: estimate.c,
        c_error: estimate.error,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::SlabEstimate;

    fn stub_inf(value: f64, error: f64) -> ChiInfinity {
        ChiInfinity {
            value,
            error,
            samples: 0,
            seed: 0,
            estimates: vec![SlabEstimate {
                eps: 0.1,
                value,
                sigma: error,
                hits: 1,
            }],
            flags: vec![],
        }
    }

    fn unit_chi(p: u64) -> ChiP {
        ChiP {
            p,
            value: 1.0,
            i_used: 2,
            stabilized: true,
            partials: vec![1.0, 1.0],
        }
    }

    #[test]
    fn unit_local_factors_give_real_density() {
        let chi = stub_inf(3.25, 0.01);
        let chi_ps: Vec<ChiP> = primes_up_to(50).into_iter().map(unit_chi).collect();
        let tail = prime_tail(&chi_ps, 50);
        assert_eq!(tail.constant, 0.0);
        assert_eq!(tail.relative, 0.0);
        let est = assemble_constant(&chi, &chi_ps, &tail);
        assert_eq!(est.c, 3.25);
        assert!((est.error - 0.01).abs() < 1e-15);
        assert!(est.flags.is_empty());
    }

    #[test]
    fn tail_envelope() {
        let mut chi_ps: Vec<ChiP> = primes_up_to(30).into_iter().map(unit_chi).collect();
        chi_ps.iter_mut().find(|c| c.p == 29).unwrap().value = 1.0 + 2.0 / 29.0;
        chi_ps.iter_mut().find(|c| c.p == 5).unwrap().value = 1.5;
        let tail = prime_tail(&chi_ps, 30);
        assert!((tail.constant - 2.0).abs() < 1e-12);
        assert!(tail.calibrated);
        // sum_{p > 30} 1 / p^2 = 0.452247... - sum_{p <= 30} 1 / p^2
        let head: f64 = primes_up_to(30).iter().map(|&p| 1.0 / (p * p) as f64).sum();
        let want = 2.0 * (0.452_247_420_041_065_5 - head);
        assert!((tail.relative - want).abs() < 1e-6, "{} vs {want}", tail.relative);
        let early = prime_tail(&chi_ps[..3], 5);
        assert!(!early.calibrated);
    }

    #[test]
    fn unstabilized_primes_are_flagged() {
        let mut chi_ps = vec![unit_chi(2)];
        chi_ps[0].stabilized = false;
        chi_ps[0].partials = vec![1.1, 1.2];
        chi_ps[0].value = 1.2;
        let tail = prime_tail(&chi_ps, 2);
        let est = assemble_constant(&stub_inf(1.0, 0.0), &chi_ps, &tail);
        assert_eq!(est.flags.len(), 2);
        assert!(est.error >= 0.1);
    }

    #[test]
    fn full_report_on_a_small_system() {
        let sys = MixedSystem::from_i64(
            &[vec![1, -2, 3, 1, -1, 2, 1, 1, -1, 2]],
            &[vec![2, 1, -1, -3, 1, 1, 2, -1, 1, 1], vec![1, 4, 1, -1, -2, -3, 1, 1, 2, -1]],
            10,
        )
        .unwrap();
        let params = DensityParams {
            prime_bound: 23,
            i_max: 3,
            work_budget: 1e7,
            series_y: 10,
            samples: 400_000,
            ..DensityParams::default()
        };
        let report = compute_constant_c(&sys, &params).unwrap();
        assert_eq!(report.chi_p.len(), 9);
        assert!(report.c.is_finite() && report.c_error.is_finite());
        assert!(report.witnesses.iter().all(|w| w.witness.is_some()));
        assert!(report.positivity_supported);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["params"]["prime_bound"], 23);
        // a definite quadratic row leaves only the singular real zero
        let definite = MixedSystem::from_i64(&[vec![1, 1, 2, 1]], &[vec![1, -1, 2, -2]], 4).unwrap();
        let params = DensityParams {
            prime_bound: 5,
            i_max: 2,
            series_y: 3,
            samples: 10_000,
            witness_bound: 2,
            ..DensityParams::default()
        };
        let report = compute_constant_c(&definite, &params).unwrap();
        assert!(!report.positivity_supported);
        assert!(report.flags.iter().any(|f| f.contains("nonpositive")));
    }
}
