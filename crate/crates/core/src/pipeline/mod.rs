//! End-to-end runs: random regime systems, the asymptotic comparison of
//! `N(P) / P^{s - 2 r2 - 3 r3}` against `c`, and log-log exponent suites.

mod config;

pub use config::{ExperimentConfig, SystemSource};

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha1::{Digest, Sha1};
use thiserror::Error;

use crate::counting::{
    big_ln, count_hua, count_mean_value_i, count_n, count_tenth_moment, estimate_growth_exponent,
    regime_check, CountError, CountOptions, CountRecord, GrowthFit, MixedSystem,
};
use crate::density::{compute_constant_c, DensityError, DensityReport};
use crate::matrix::{build_auxiliary, random_tns_block, AuxMatrix, AuxSpec, IntMatrix, MatrixError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("outside the asymptotic regime: {0}")]
    Regime(String),
    #[error("no highly non-singular system after {0} attempts")]
    Rejection(usize),
    #[error("config: {0}")]
    Config(String),
    #[error("no P value could be counted within budget")]
    NothingCounted,
    #[error(transparent)]
    Count(#[from] CountError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub const GENERATION_ATTEMPTS: usize = 10_000;

/// Random system with coefficient magnitudes in `[1, 9]` and random signs,
/// redrawn until both coefficient matrices are highly non-singular.
pub fn generate_system(
    r2: usize,
    r3: usize,
    s: usize,
    seed: u64,
    allow_out_of_regime: bool,
) -> Result<MixedSystem, PipelineError> {
    let regime = regime_check(r2, r3, s);
    if !allow_out_of_regime && !regime.holds() {
        let why = if regime.shape {
            format!("s = {s} is below 6 r3 + 14 r2 / 3 + 1")
        } else {
            format!("need r3 >= 2 r2 > 0, got r2 = {r2}, r3 = {r3}")
        };
        return Err(PipelineError::Regime(why));
    }
    if r2 + r3 == 0 || s == 0 {
        return Err(PipelineError::Config("need at least one equation and variable".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize| -> Vec<Vec<i64>> {
        (0..rows)
            .map(|_| {
                (0..s)
                    .map(|_| {
                        let m = rng.gen_range(1..=9);
                        if rng.gen::<bool>() {
                            m
                        } else {
                            -m
                        }
                    })
                    .collect()
            })
            .collect()
    };
    for _ in 0..GENERATION_ATTEMPTS {
        let c2 = draw(r2);
        let c3 = draw(r3);
        let sys = MixedSystem::from_i64(&c2, &c3, s)?;
        if sys.non_singularity()? == (true, true) {
            return Ok(sys);
        }
    }
    Err(PipelineError::Rejection(GENERATION_ATTEMPTS))
}

/// Git blob hash (`git hash-object`) of the given bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_system(source: &SystemSource, allow_out_of_regime: bool) -> Result<MixedSystem, PipelineError> {
    match source {
        SystemSource::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Ok(MixedSystem::parse(&text)?)
        }
        SystemSource::Generated { r2, r3, s, seed } => {
            generate_system(*r2, *r3, *s, *seed, allow_out_of_regime)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticRow {
    #[serde(rename = "P")]
    pub p: u64,
    #[serde(serialize_with = "decimal")]
    pub count: num_bigint::BigUint,
    pub ratio: f64,
    pub seconds: f64,
}

fn decimal<S: serde::Serializer>(v: &num_bigint::BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedSize {
    #[serde(rename = "P")]
    pub p: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assessment {
    pub exponent: i64,
    pub rows: Vec<AsymptoticRow>,
    pub c: f64,
    pub band: f64,
    pub last_within_band: bool,
    pub deviations_shrink: bool,
    pub verdict: Verdict,
}

/// Ratios `N(P) / P^exponent` against `c`. Consistent when the last ratio
/// is within a factor `band` of `c` and `|ratio - c|` never grows.
pub fn assess(records: &[CountRecord], exponent: i64, c: f64, band: f64) -> Assessment {
    let rows: Vec<AsymptoticRow> = records
        .iter()
        .map(|r| AsymptoticRow {
            p: r.p,
            count: r.count.clone(),
            ratio: (big_ln(&r.count) - exponent as f64 * (r.p as f64).ln()).exp(),
            seconds: r.elapsed_secs,
        })
        .collect();
    let last_within_band = rows
        .last()
        .is_some_and(|r| c > 0.0 && r.ratio >= c / band && r.ratio <= c * band);
    let deviations_shrink = rows
        .windows(2)
        .all(|w| (w[1].ratio - c).abs() <= (w[0].ratio - c).abs());
    let verdict = if rows.len() < 2 || !(c > 0.0) {
        Verdict::Inconclusive
    } else if last_within_band && deviations_shrink {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    Assessment {
        exponent,
        rows,
        c,
        band,
        last_within_band,
        deviations_shrink,
        verdict,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub config: ExperimentConfig,
    pub system: String,
    pub input_hash: String,
    pub assessment: Assessment,
    pub skipped: Vec<SkippedSize>,
    pub density: DensityReport,
}

pub fn count_options(cfg: &ExperimentConfig) -> CountOptions {
    CountOptions {
        method: cfg.method,
        budget_bytes: cfg.budget_gib * (1u64 << 30) as f64,
        max_work: cfg.max_work,
    }
}

/// Counts `N(P)` for every configured `P`, computes `c` and compares.
/// Sizes that exceed the counting budget are skipped and listed.
pub fn verify_asymptotic(cfg: &ExperimentConfig) -> Result<AsymptoticReport, PipelineError> {
    cfg.validate()?;
    let sys = load_system(&cfg.system, cfg.allow_out_of_regime)?;
    let opts = count_options(cfg);
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for &p in &cfg.p_list {
        match count_n(&sys, p, &opts) {
            Ok(rec) => records.push(rec),
            Err(e @ (CountError::Budget { .. } | CountError::Work { .. })) => skipped.push(SkippedSize {
                p,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e.into()),
        }
    }
    if records.is_empty() {
        return Err(PipelineError::NothingCounted);
    }
    let density = compute_constant_c(&sys, &cfg.density)?;
    let assessment = assess(&records, sys.main_term_exponent(), density.c, cfg.band);
    let system = sys.to_text();
    Ok(AsymptoticReport {
        config: cfg.clone(),
        input_hash: content_hash(format!("{}{}", cfg.to_text(), system).as_bytes()),
        system,
        assessment,
        skipped,
        density,
    })
}

/// Auxiliary matrix of the given type with random totally non-singular
/// blocks and a random diagonal, all entries in `[1, 9]`.
pub fn random_auxiliary(spec: AuxSpec, seed: u64) -> Result<AuxMatrix, PipelineError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks: Vec<IntMatrix> = (0..spec.n)
        .map(|k| {
            let (r, c) = spec.block_format(k);
            if r == 0 || c == 0 {
                IntMatrix::zeros(r, c)
            } else {
                random_tns_block(r, c, &mut rng)
            }
        })
        .collect();
    let diag: Vec<BigInt> = (0..spec.row_count())
        .map(|_| BigInt::from(rng.gen_range(1..=9)))
        .collect();
    Ok(build_auxiliary(&blocks, &diag, spec)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "suite", rename_all = "lowercase")]
pub enum Suite {
    /// Mean value `I(P, D)` over a random auxiliary matrix of this type.
    Prop22 { spec: AuxSpec, seed: u64 },
    /// `x^3 + y^3 = u^3 + v^3`.
    Hua,
    /// The ten-variable mixed moment.
    Mv23,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Prop22 { .. } => "prop22",
            Suite::Hua => "hua",
            Suite::Mv23 => "mv23",
        }
    }

    /// Predicted exponent ceiling before slack.
    pub fn predicted(&self) -> f64 {
        match self {
            Suite::Prop22 { spec, .. } => {
                let AuxSpec { n, t, omega, r, l } = *spec;
                3.0 * ((n - 1) * (r - l) + t + omega) as f64 - 2.0 * l as f64
            }
            Suite::Hua => 2.0,
            Suite::Mv23 => 31.0 / 6.0,
        }
    }

    pub fn default_slack(&self) -> f64 {
        match self {
            Suite::Prop22 { .. } => 0.1,
            Suite::Hua => 0.3,
            Suite::Mv23 => 0.4,
        }
    }

    pub fn default_sizes(&self) -> Vec<u64> {
        match self {
            Suite::Prop22 { .. } => vec![4, 8, 16, 32],
            Suite::Hua => vec![8, 16, 32, 64, 128],
            Suite::Mv23 => vec![4, 8, 16, 32],
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    /// `hua`, `mv23`, or `prop22:n,t,omega,r,l`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hua" => Ok(Suite::Hua),
            "mv23" => Ok(Suite::Mv23),
            _ => {
                let body = s
                    .strip_prefix("prop22:")
                    .ok_or_else(|| format!("unknown suite '{s}' (prop22:n,t,omega,r,l|hua|mv23)"))?;
                let v: Vec<usize> = body
                    .split(',')
                    .map(|x| x.trim().parse().map_err(|_| format!("bad integer '{x}'")))
                    .collect::<Result<_, _>>()?;
                let [n, t, omega, r, l] = v[..] else {
                    return Err("prop22 needs n,t,omega,r,l".into());
                };
                let spec = AuxSpec::new(n, t, omega, r, l).map_err(|e| e.to_string())?;
                Ok(Suite::Prop22 { spec, seed: 1 })
            }
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Suite::Prop22 { spec, .. } => write!(
                f,
                "prop22:{},{},{},{},{}",
                spec.n, spec.t, spec.omega, spec.r, spec.l
            ),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub records: Vec<CountRecord>,
    pub fit: GrowthFit,
    pub predicted: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Fits the log-log slope of the suite's counts and compares it with the
/// predicted ceiling plus `slack`.
pub fn exponent_suite(
    suite: &Suite,
    sizes: &[u64],
    opts: &CountOptions,
    slack: f64,
) -> Result<SuiteReport, PipelineError> {
    if sizes.len() < 3 {
        return Err(PipelineError::Config(format!(
            "slope fit needs at least 3 sizes, got {}",
            sizes.len()
        )));
    }
    let aux = match suite {
        Suite::Prop22 { spec, seed } => Some(random_auxiliary(*spec, *seed)?),
        _ => None,
    };
    let records: Vec<CountRecord> = sizes
        .iter()
        .map(|&p| match suite {
            Suite::Prop22 { .. } => count_mean_value_i(aux.as_ref().expect("built"), p, opts),
            Suite::Hua => count_hua(p, opts),
            Suite::Mv23 => count_tenth_moment(p, opts),
        })
        .collect::<Result<_, _>>()?;
    let fit = estimate_growth_exponent(&records)?;
    let predicted = suite.predicted();
    Ok(SuiteReport {
        suite: *suite,
        pass: fit.slope <= predicted + slack,
        records,
        fit,
        predicted,
        slack,
    })
}
