//! Major/minor arc classification.
//!
//! Three families are supported:
//!
//! * `Cubic1d`: `q <= P^{3/4}`, `|q eta - a| <= P^{-9/4}`.
//! * `M`: `q <= P^{3/4}`, `|q alpha_{k,i} - a_{k,i}| <= P^{3/4-k}`.
//! * `N`: `q <= X = P^{1/(6w)}`, `|alpha_{k,i} - a_{k,i}/q| <= X P^{-k}`.
//!
//! All membership tests are decided exactly: a coordinate is the dyadic
//! rational `m / 2^K`, and each condition becomes an inequality between
//! integers. Boundary cases count as major.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArcError {
    #[error("P must be at least 2, got {0}")]
    SmallP(u64),
    #[error("degree tags: {0}")]
    Degrees(String),
    #[error("non-finite coordinate")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, ArcError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArcLevel {
    #[serde(rename = "1d")]
    Cubic1d,
    M,
    N,
}

impl FromStr for ArcLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "1d" => Ok(ArcLevel::Cubic1d),
            "M" | "m" => Ok(ArcLevel::M),
            "N" | "n" => Ok(ArcLevel::N),
            other => Err(format!("unknown arc level '{other}' (1d|M|N)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum ArcLabel {
    Major { q: u64, a: Vec<u64> },
    Minor,
}

impl ArcLabel {
    pub fn is_major(&self) -> bool {
        matches!(self, ArcLabel::Major { .. })
    }
}

impl fmt::Display for ArcLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArcLabel::Major { q, a } => {
                let a: Vec<String> = a.iter().map(u64::to_string).collect();
                write!(f, "major q={q} a={}", a.join(","))
            }
            ArcLabel::Minor => f.write_str("minor"),
        }
    }
}

/// Box radius `P`, arc family, and the equation counts fixing `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArcParams {
    pub p: u64,
    pub level: ArcLevel,
    pub r3: usize,
    pub r2: usize,
}

impl ArcParams {
    pub fn new(p: u64, level: ArcLevel, r3: usize, r2: usize) -> Result<Self> {
        if p < 2 {
            return Err(ArcError::SmallP(p));
        }
        if r3 + r2 == 0 {
            return Err(ArcError::Degrees("no coordinates".into()));
        }
        Ok(ArcParams { p, level, r3, r2 })
    }

    pub fn cubic_1d(p: u64) -> Result<Self> {
        Self::new(p, ArcLevel::Cubic1d, 1, 0)
    }

    pub fn w(&self) -> usize {
        self.r3 + self.r2
    }

    /// `X = P^{1/(6w)}`.
    pub fn x(&self) -> f64 {
        (self.p as f64).powf(1.0 / (6 * self.w()) as f64)
    }

    /// Largest admissible denominator.
    pub fn q_max(&self) -> u64 {
        match self.level {
            // q^4 <= P^3
            ArcLevel::Cubic1d | ArcLevel::M => {
                largest_root(|q| BigInt::from(q).pow(4) <= BigInt::from(self.p).pow(3), self.p)
            }
            // q^{6w} <= P
            ArcLevel::N => largest_root(
                |q| BigInt::from(q).pow(6 * self.w() as u32) <= BigInt::from(self.p),
                self.p,
            ),
        }
    }

    /// Degree of each coordinate: cubic block then quadratic block.
    pub fn degrees(&self) -> Vec<u32> {
        let mut d = vec![3; self.r3];
        d.extend(std::iter::repeat(2).take(self.r2));
        d
    }

    fn condition(&self, degree: u32) -> Condition {
        let w6 = 6 * self.w() as u32;
        match self.level {
            ArcLevel::Cubic1d => Condition { e: 4, pa: 9, qb: 0, pc: 0 },
            ArcLevel::M => Condition { e: 4, pa: 4 * degree - 3, qb: 0, pc: 0 },
            ArcLevel::N => Condition { e: w6, pa: w6 * degree, qb: w6, pc: 1 },
        }
    }

    /// Radius in `|q alpha - a|` units.
    fn radius(&self, degree: u32, q: u64) -> f64 {
        let p = self.p as f64;
        match self.level {
            ArcLevel::Cubic1d => p.powf(-2.25),
            ArcLevel::M => p.powf(0.75 - degree as f64),
            ArcLevel::N => q as f64 * self.x() * p.powi(-(degree as i32)),
        }
    }
}

fn largest_root(ok: impl Fn(u64) -> bool, hi: u64) -> u64 {
    let (mut lo, mut hi) = (1u64, hi.max(1));
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// `|q alpha - a|` within radius, as `d^e P^pa <= q^qb 2^{e K} P^pc`
/// where `alpha = m / 2^K` and `d = |q m - a 2^K|`.
#[derive(Debug, Clone, Copy)]
struct Condition {
    e: u32,
    pa: u32,
    qb: u32,
    pc: u32,
}

/// Exact dyadic form `m / 2^K` of a finite double.
#[derive(Debug, Clone)]
struct Dyadic {
    value: f64,
    m: BigInt,
    k: u32,
}

impl Dyadic {
    fn new(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(ArcError::NonFinite);
        }
        let x = crate::expsum::frac(x);
        let (mant, exp, sign) = x.integer_decode();
        let mut m = BigInt::from(mant) * sign;
        let k = if exp >= 0 {
            m <<= exp as usize;
            0
        } else {
            (-exp) as u32
        };
        Ok(Dyadic { value: x, m, k })
    }

    /// Nearest numerator for denominator `q` and whether it is within the
    /// radius.
    fn check(&self, q: u64, cond: Condition, radius: f64, p: u64) -> Option<u64> {
        let qa = q as f64 * self.value;
        let a = qa.round();
        let t = (qa - a).abs();
        let slack = q as f64 * 1e-15 + radius * 1e-9;
        if t > radius + slack {
            return None;
        }
        let a = a as u64;
        if t >= radius - slack {
            if !self.exact(q, a, cond, p) {
                return None;
            }
        }
        Some(if a == 0 { q } else { a })
    }

    fn exact(&self, q: u64, a: u64, cond: Condition, p: u64) -> bool {
        let d = (BigInt::from(q) * &self.m - (BigInt::from(a) << self.k as usize)).abs();
        if d.is_zero() {
            return true;
        }
        let p = BigInt::from(p);
        let lhs = d.pow(cond.e) * p.pow(cond.pa);
        let rhs = (BigInt::from(q).pow(cond.qb) << (cond.e as usize * self.k as usize)) * p.pow(cond.pc);
        lhs <= rhs
    }
}

/// Continued-fraction convergent denominators of `m / 2^K` up to `q_max`.
fn convergent_denominators(x: &Dyadic, q_max: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    let (mut num, mut den) = (x.m.clone(), BigInt::one() << x.k as usize);
    let (mut q_prev, mut q_cur) = (BigInt::one(), BigInt::zero());
    let limit = BigInt::from(q_max);
    loop {
        if den.is_zero() {
            break;
        }
        let (a, r) = num.div_mod_floor(&den);
        let q_next = &a * &q_cur + &q_prev;
        if q_next > limit {
            break;
        }
        if q_next > BigInt::from(*out.last().expect("starts with 1")) {
            out.push(q_next.to_u64().expect("bounded by q_max"));
        }
        q_prev = std::mem::replace(&mut q_cur, q_next);
        num = std::mem::replace(&mut den, r);
    }
    out
}

/// One-dimensional cubic arcs; the witness has least `q`.
pub fn classify_1d(eta: f64, params: &ArcParams) -> Result<ArcLabel> {
    let one_d = ArcParams {
        level: ArcLevel::Cubic1d,
        ..*params
    };
    let x = Dyadic::new(eta)?;
    let cond = one_d.condition(3);
    let radius = one_d.radius(3, 1);
    for q in convergent_denominators(&x, one_d.q_max()) {
        if let Some(a) = x.check(q, cond, radius, one_d.p) {
            return Ok(ArcLabel::Major { q, a: vec![a] });
        }
    }
    Ok(ArcLabel::Minor)
}

/// Simultaneous approximation at level `M` or `N`: one `q` serves every
/// coordinate. Coordinates follow [`ArcParams::degrees`].
pub fn classify_multi(alpha: &[f64], params: &ArcParams) -> Result<ArcLabel> {
    if params.level == ArcLevel::Cubic1d {
        return match alpha {
            [eta] => classify_1d(*eta, params),
            _ => Err(ArcError::Degrees("1d level takes one coordinate".into())),
        };
    }
    if alpha.len() != params.w() {
        return Err(ArcError::Degrees(format!(
            "expected {} coordinates ({} cubic, {} quadratic), got {}",
            params.w(),
            params.r3,
            params.r2,
            alpha.len()
        )));
    }
    let coords: Vec<Dyadic> = alpha.iter().map(|&a| Dyadic::new(a)).collect::<Result<_>>()?;
    let degrees = params.degrees();
    'q: for q in 1..=params.q_max() {
        let mut a = Vec::with_capacity(coords.len());
        for (x, &deg) in coords.iter().zip(&degrees) {
            match x.check(q, params.condition(deg), params.radius(deg, q), params.p) {
                Some(ai) => a.push(ai),
                None => continue 'q,
            }
        }
        return Ok(ArcLabel::Major { q, a });
    }
    Ok(ArcLabel::Minor)
}

/// Every denominator that admits a witness, not only the least.
pub fn all_witnesses(alpha: &[f64], params: &ArcParams) -> Result<Vec<(u64, Vec<u64>)>> {
    let coords: Vec<Dyadic> = alpha.iter().map(|&a| Dyadic::new(a)).collect::<Result<_>>()?;
    let degrees = if params.level == ArcLevel::Cubic1d {
        vec![3; coords.len()]
    } else {
        params.degrees()
    };
    if degrees.len() != coords.len() {
        return Err(ArcError::Degrees("coordinate count mismatch".into()));
    }
    let mut out = Vec::new();
    'q: for q in 1..=params.q_max() {
        let mut a = Vec::with_capacity(coords.len());
        for (x, &deg) in coords.iter().zip(&degrees) {
            match x.check(q, params.condition(deg), params.radius(deg, q), params.p) {
                Some(ai) => a.push(ai),
                None => continue 'q,
            }
        }
        out.push((q, a));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArcMeasure {
    /// Exact measure when `disjoint`, otherwise an upper bound capped at 1.
    pub measure: f64,
    pub disjoint: bool,
    pub q_max: u64,
}

/// Jordan totient `J_w(q)`: tuples in `[1, q]^w` with `gcd(q, a) = 1`.
pub fn jordan_totient(q: u64, w: u32) -> f64 {
    let mut n = q;
    let mut out = (q as f64).powi(w as i32);
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out *= 1.0 - (p as f64).powi(-(w as i32));
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out *= 1.0 - (n as f64).powi(-(w as i32));
    }
    out
}

/// Total measure of the major-arc union.
pub fn arc_measure(params: &ArcParams) -> ArcMeasure {
    let q_max = params.q_max();
    let degrees = match params.level {
        ArcLevel::Cubic1d => vec![3],
        _ => params.degrees(),
    };
    let w = degrees.len() as u32;
    let mut total = 0.0;
    for q in 1..=q_max {
        let volume: f64 = degrees
            .iter()
            .map(|&d| 2.0 * params.radius(d, q) / q as f64)
            .product();
        total += jordan_totient(q, w) * volume;
    }
    // distinct fractions differ by >= 1/(q q') in some coordinate
    let max_half_width = degrees
        .iter()
        .map(|&d| params.radius(d, q_max))
        .fold(0.0, f64::max);
    let disjoint = 2.0 * q_max as f64 * max_half_width < 1.0;
    ArcMeasure {
        measure: if disjoint { total } else { total.min(1.0) },
        disjoint,
        q_max,
    }
}
