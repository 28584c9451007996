//! `key = value` experiment files.
//!
//! ```text
//! # reference run
//! generate = 1, 2, 17, 7     # r2, r3, s, seed (or: system = path/to/file)
//! P = 2, 3, 4
//! method = mitm
//! budget_gib = 4
//! band = 2
//! prime_bound = 97
//! ```

use std::path::PathBuf;

use serde::Serialize;

use super::PipelineError;
use crate::counting::{Method, DEFAULT_BUDGET_BYTES};
use crate::density::DensityParams;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemSource {
    File { path: PathBuf },
    Generated { r2: usize, r3: usize, s: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub system: SystemSource,
    pub p_list: Vec<u64>,
    pub method: Method,
    pub budget_gib: f64,
    pub max_work: f64,
    /// Ratios must lie within a factor `band` of `c`.
    pub band: f64,
    pub allow_out_of_regime: bool,
    pub density: DensityParams,
    pub output: Option<PathBuf>,
}

fn list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).collect()
}

impl ExperimentConfig {
    pub fn new(system: SystemSource, p_list: Vec<u64>) -> Result<Self, PipelineError> {
        let cfg = ExperimentConfig {
            system,
            p_list,
            method: Method::Mitm,
            budget_gib: DEFAULT_BUDGET_BYTES / (1u64 << 30) as f64,
            max_work: 1e12,
            band: 2.0,
            allow_out_of_regime: false,
            density: DensityParams::default(),
            output: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.p_list.is_empty() {
            return Err(PipelineError::Config("P list is empty".into()));
        }
        if self.p_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PipelineError::Config("P list must be strictly increasing".into()));
        }
        if !(self.budget_gib > 0.0) || !(self.max_work > 0.0) {
            return Err(PipelineError::Config("budgets must be positive".into()));
        }
        if !(self.band > 1.0) {
            return Err(PipelineError::Config("band must exceed 1".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut system = None;
        let mut p_list = None;
        let mut cfg = ExperimentConfig {
            system: SystemSource::File { path: PathBuf::new() },
            p_list: Vec::new(),
            method: Method::Mitm,
            budget_gib: DEFAULT_BUDGET_BYTES / (1u64 << 30) as f64,
            max_work: 1e12,
            band: 2.0,
            allow_out_of_regime: false,
            density: DensityParams::default(),
            output: None,
        };
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| PipelineError::Config(format!("line {}: {msg}", n + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<f64, PipelineError> {
                v.parse::<f64>().map_err(|_| bad(format!("{key}: '{v}' is not a number")))
            };
            let int = |v: &str| -> Result<u64, PipelineError> {
                v.parse::<u64>().map_err(|_| bad(format!("{key}: '{v}' is not an integer")))
            };
            match key {
                "system" => system = Some(SystemSource::File { path: value.into() }),
                "generate" => {
                    let parts = list(value);
                    if parts.len() != 4 {
                        return Err(bad("generate needs r2, r3, s, seed".into()));
                    }
                    system = Some(SystemSource::Generated {
                        r2: int(parts[0])? as usize,
                        r3: int(parts[1])? as usize,
                        s: int(parts[2])? as usize,
                        seed: int(parts[3])?,
                    });
                }
                "P" => p_list = Some(list(value).into_iter().map(int).collect::<Result<Vec<_>, _>>()?),
                "method" => cfg.method = value.parse().map_err(bad)?,
                "budget_gib" => cfg.budget_gib = num(value)?,
                "max_work" => cfg.max_work = num(value)?,
                "band" => cfg.band = num(value)?,
                "allow_out_of_regime" => {
                    cfg.allow_out_of_regime = value
                        .parse()
                        .map_err(|_| bad(format!("'{value}' is not true/false")))?
                }
                "prime_bound" => cfg.density.prime_bound = int(value)?,
                "imax" => cfg.density.i_max = int(value)? as u32,
                "work_budget" => cfg.density.work_budget = num(value)?,
                "series_Y" => cfg.density.series_y = int(value)?,
                "eps" => cfg.density.eps = list(value).into_iter().map(num).collect::<Result<_, _>>()?,
                "samples" => cfg.density.samples = int(value)?,
                "seed" => cfg.density.seed = int(value)?,
                "witness_bound" => cfg.density.witness_bound = int(value)?,
                "out" => cfg.output = Some(value.into()),
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        cfg.system = system.ok_or_else(|| PipelineError::Config("missing 'system' or 'generate'".into()))?;
        cfg.p_list = p_list.ok_or_else(|| PipelineError::Config("missing 'P'".into()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[String]| v.join(", ");
        let mut out = String::new();
        match &self.system {
            SystemSource::File { path } => out += &format!("system = {}\n", path.display()),
            SystemSource::Generated { r2, r3, s, seed } => {
                out += &format!("generate = {r2}, {r3}, {s}, {seed}\n")
            }
        }
        let d = &self.density;
        out += &format!(
            "P = {}\nmethod = {}\nbudget_gib = {}\nmax_work = {:e}\nband = {}\nallow_out_of_regime = {}\n",
            join(&self.p_list.iter().map(u64::to_string).collect::<Vec<_>>()),
            self.method,
            self.budget_gib,
            self.max_work,
            self.band,
            self.allow_out_of_regime
        );
        out += &format!(
            "prime_bound = {}\nimax = {}\nwork_budget = {:e}\nseries_Y = {}\neps = {}\nsamples = {}\nseed = {}\nwitness_bound = {}\n",
            d.prime_bound,
            d.i_max,
            d.work_budget,
            d.series_y,
            join(&d.eps.iter().map(f64::to_string).collect::<Vec<_>>()),
            d.samples,
            d.seed,
            d.witness_bound
        );
        if let Some(path) = &self.output {
            out += &format!("out = {}\n", path.display());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# reference
generate = 1, 2, 17, 7
P = 2, 3, 4   # small sizes
method = naive
budget_gib = 1.5
eps = 0.2, 0.1
seed = 9
";

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.p_list, vec![2, 3, 4]);
        assert_eq!(cfg.method, Method::Naive);
        assert_eq!(cfg.budget_gib, 1.5);
        assert_eq!(cfg.density.eps, vec![0.2, 0.1]);
        assert_eq!(cfg.density.seed, 9);
        assert_eq!(
            cfg.system,
            SystemSource::Generated { r2: 1, r3: 2, s: 17, seed: 7 }
        );
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "generate = 1, 2, 17, 7\nP =",
            "generate = 1, 2, 17, 7\nP = 3, 2",
            "generate = 1, 2, 17, 7\nP = 2\nbudget_gib = 0",
            "P = 2",
            "generate = 1, 2, 17\nP = 2",
            "generate = 1, 2, 17, 7\nP = 2\ncolour = red",
            "generate = 1, 2, 17, 7\nP = 2\nmethod",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
        assert!(ExperimentConfig::new(SystemSource::File { path: "x".into() }, vec![]).is_err());
    }
}
