use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use cubquad::arcs::{classify_multi, ArcLevel, ArcParams};
use cubquad::counting::{
    count_mean_value_i, count_mean_value_j, count_n, count_tenth_moment, CountOptions,
    CountRecord, Method, MixedSystem,
};
use cubquad::density::{
    chi_infinity, chi_p, compute_constant_c, primes_up_to, singular_series, DensityParams,
    DEFAULT_EPS, DEFAULT_MC_SAMPLES,
};
use cubquad::expsum::{complete_sum_s, eval_f, eval_g, oscillatory_v, DEFAULT_PANEL_BUDGET};
use cubquad::matrix::{
    is_highly_non_singular, is_totally_non_singular, verify_auxiliary, AuxMatrix, AuxSpec,
    IntMatrix,
};
use cubquad::pipeline::{
    content_hash, exponent_suite, verify_asymptotic, ExperimentConfig, Suite,
};

#[derive(Parser, Serialize)]
#[command(name = "cubquad", version, about = "Cubic and quadratic diagonal systems at desk scale")]
struct Cli {
    /// Memory for the stored side of a meet-in-the-middle count.
    #[arg(long, global = true, default_value_t = 8.0)]
    budget_gib: f64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    out: OutFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "lowercase")]
enum Command {
    /// Matrix property checks.
    #[command(subcommand)]
    Matrix(MatrixCmd),
    /// Exact solution counts in a box.
    Count(CountArgs),
    /// Exponential sums and the oscillatory integral.
    Expsum(ExpsumArgs),
    /// Major/minor arc classification.
    #[command(subcommand)]
    Arcs(ArcsCmd),
    /// Local densities and the constant c.
    Density(DensityArgs),
    /// Counts against the predicted main term, driven by a config file.
    Verify { config: PathBuf },
    /// Growth-exponent suite: hua, mv23 or prop22:n,t,omega,r,l.
    Suite(SuiteArgs),
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "lowercase")]
enum MatrixCmd {
    Check {
        #[arg(long, value_enum)]
        kind: MatrixKind,
        /// Auxiliary type as n,t,omega,r,l.
        #[arg(long)]
        spec: Option<String>,
        file: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MatrixKind {
    Hns,
    Tns,
    Aux,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum CountKind {
    #[value(name = "N")]
    #[serde(rename = "N")]
    N,
    #[value(name = "meanI")]
    #[serde(rename = "meanI")]
    MeanI,
    #[value(name = "meanJ")]
    #[serde(rename = "meanJ")]
    MeanJ,
    #[value(name = "moment10")]
    #[serde(rename = "moment10")]
    Moment10,
}

#[derive(Args, Serialize)]
struct CountArgs {
    #[arg(value_enum)]
    kind: CountKind,
    /// Box radii, comma separated.
    #[arg(long = "P", value_delimiter = ',', required = true)]
    p: Vec<u64>,
    #[arg(long, default_value = "mitm")]
    method: String,
    /// Mixed system file (for N).
    #[arg(long)]
    system: Option<PathBuf>,
    /// Auxiliary matrix file (for meanI, and the cubic matrix for meanJ).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Quadratic matrix file (for meanJ).
    #[arg(long)]
    quadratic: Option<PathBuf>,
    /// Auxiliary type as n,t,omega,r,l.
    #[arg(long)]
    spec: Option<String>,
    #[arg(long, default_value_t = 1e12)]
    max_work: f64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum SumKind {
    /// g(eta) over |x| <= P.
    #[value(name = "g")]
    #[serde(rename = "g")]
    G,
    /// f(alpha, beta) over |x| <= P.
    #[value(name = "f")]
    #[serde(rename = "f")]
    F,
    /// S(q, a3, a2), complete sum.
    #[value(name = "S")]
    #[serde(rename = "S")]
    S,
    /// v(beta3, beta2) = integral over [-P, P].
    #[value(name = "v")]
    #[serde(rename = "v")]
    V,
}

#[derive(Args, Serialize)]
struct ExpsumArgs {
    #[arg(value_enum)]
    kind: SumKind,
    /// Point coordinates; read one point per stdin line when omitted.
    #[arg(allow_negative_numbers = true)]
    args: Vec<String>,
    #[arg(long = "P", default_value_t = 100)]
    p: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "lowercase")]
enum ArcsCmd {
    /// Reads one point per stdin line.
    Classify {
        #[arg(long)]
        level: String,
        #[arg(long = "P")]
        p: u64,
        /// Number of coordinates.
        #[arg(long, default_value_t = 1)]
        w: usize,
        /// How many of the trailing coordinates are quadratic.
        #[arg(long, default_value_t = 0)]
        r2: usize,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum DensityKind {
    Series,
    Chip,
    Chiinf,
    Constant,
}

#[derive(Args, Serialize)]
struct DensityArgs {
    #[arg(value_enum)]
    kind: DensityKind,
    #[arg(long)]
    system: PathBuf,
    /// Series truncation.
    #[arg(long = "Y", default_value_t = 40)]
    y: u64,
    /// Largest prime for chi_p.
    #[arg(long, default_value_t = 97)]
    pmax: u64,
    #[arg(long, default_value_t = 8)]
    imax: u32,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    samples: u64,
    /// Slab half-widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 2e8)]
    work_budget: f64,
    #[arg(long, default_value_t = 7)]
    witness_bound: u64,
}

#[derive(Args, Serialize)]
struct SuiteArgs {
    name: String,
    /// Box radii, comma separated.
    #[arg(long = "P", value_delimiter = ',')]
    p: Vec<u64>,
    #[arg(long, default_value = "mitm")]
    method: String,
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long, default_value_t = 1e12)]
    max_work: f64,
}

/// Result plus everything needed to reproduce it.
struct Output {
    config: Value,
    input_hash: String,
    result: Value,
    csv: Vec<String>,
}

impl Output {
    fn emit(&self, format: OutFormat) {
        match format {
            OutFormat::Json => {
                let doc = json!({
                    "config": self.config,
                    "input_hash": self.input_hash,
                    "result": self.result,
                });
                println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            }
            OutFormat::Csv => {
                println!("# config: {}", self.config);
                println!("# input_hash: {}", self.input_hash);
                for line in &self.csv {
                    println!("{line}");
                }
            }
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_spec(text: &str) -> Result<AuxSpec> {
    let v: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| anyhow!("bad spec entry '{t}'")))
        .collect::<Result<_>>()?;
    match v[..] {
        [n, t, omega, r, l] => Ok(AuxSpec::new(n, t, omega, r, l)?),
        _ => bail!("spec needs n,t,omega,r,l"),
    }
}

fn floats(tokens: &[&str]) -> Result<Vec<f64>> {
    tokens
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| anyhow!("'{t}' is not a number")))
        .collect()
}

fn stdin_lines() -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in io::stdin().lock().lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push(t.to_string());
        }
    }
    Ok(out)
}

fn hash_inputs(config: &Value, inputs: &[&str]) -> String {
    let mut buf = config.to_string();
    for text in inputs {
        buf.push('\n');
        buf.push_str(text);
    }
    content_hash(buf.as_bytes())
}

fn count_rows(records: &[CountRecord]) -> Vec<String> {
    std::iter::once(CountRecord::csv_header().to_string())
        .chain(records.iter().map(CountRecord::to_csv_row))
        .collect()
}

fn run_matrix(cmd: &MatrixCmd) -> Result<(Value, Vec<String>, Vec<String>)> {
    let MatrixCmd::Check { kind, spec, file } = cmd;
    let text = read(file)?;
    let m = IntMatrix::parse(&text)?;
    let holds = match kind {
        MatrixKind::Hns => is_highly_non_singular(&m)?,
        MatrixKind::Tns => is_totally_non_singular(&m)?,
        MatrixKind::Aux => {
            let spec = parse_spec(spec.as_deref().ok_or_else(|| anyhow!("--spec is required for aux"))?)?;
            verify_auxiliary(&m, &spec)?
        }
    };
    let result = json!({ "rows": m.rows(), "cols": m.cols(), "holds": holds });
    Ok((result, vec!["holds".into(), holds.to_string()], vec![text]))
}

fn run_count(a: &CountArgs, budget_gib: f64) -> Result<(Value, Vec<String>, Vec<String>)> {
    let opts = CountOptions {
        method: a.method.parse::<Method>().map_err(|e| anyhow!(e))?,
        budget_bytes: budget_gib * (1u64 << 30) as f64,
        max_work: a.max_work,
    };
    let need = |p: &Option<PathBuf>, flag: &str| -> Result<String> {
        read(p.as_ref().ok_or_else(|| anyhow!("--{flag} is required"))?)
    };
    let mut inputs = Vec::new();
    let records: Vec<CountRecord> = match a.kind {
        CountKind::N => {
            let text = need(&a.system, "system")?;
            let sys = MixedSystem::parse(&text)?;
            inputs.push(text);
            a.p.iter().map(|&p| count_n(&sys, p, &opts)).collect::<Result<_, _>>()?
        }
        CountKind::MeanI => {
            let text = need(&a.matrix, "matrix")?;
            let spec = parse_spec(a.spec.as_deref().ok_or_else(|| anyhow!("--spec is required"))?)?;
            let d = AuxMatrix::new(IntMatrix::parse(&text)?, spec)?;
            inputs.push(text);
            a.p.iter().map(|&p| count_mean_value_i(&d, p, &opts)).collect::<Result<_, _>>()?
        }
        CountKind::MeanJ => {
            let t3 = need(&a.matrix, "matrix")?;
            let t2 = need(&a.quadratic, "quadratic")?;
            let spec = parse_spec(a.spec.as_deref().ok_or_else(|| anyhow!("--spec is required"))?)?;
            let d3 = AuxMatrix::new(IntMatrix::parse(&t3)?, spec)?;
            let d2 = IntMatrix::parse(&t2)?;
            inputs.extend([t3, t2]);
            a.p.iter()
                .map(|&p| count_mean_value_j(&d2, &d3, spec.n, p, &opts))
                .collect::<Result<_, _>>()?
        }
        CountKind::Moment10 => a.p.iter().map(|&p| count_tenth_moment(p, &opts)).collect::<Result<_, _>>()?,
    };
    Ok((serde_json::to_value(&records)?, count_rows(&records), inputs))
}

fn eval_sum(a: &ExpsumArgs, tokens: &[&str]) -> Result<(f64, f64)> {
    let z = match (a.kind, tokens) {
        (SumKind::G, [eta]) => eval_g(floats(&[eta])?[0], a.p)?,
        (SumKind::F, [al, be]) => {
            let v = floats(&[al, be])?;
            eval_f(v[0], v[1], a.p)?
        }
        (SumKind::S, [q, a3, a2]) => complete_sum_s(q.parse()?, a3.parse()?, a2.parse()?)?,
        (SumKind::V, [b3, b2]) => {
            let v = floats(&[b3, b2])?;
            oscillatory_v(v[0], v[1], a.p as f64, a.tol, DEFAULT_PANEL_BUDGET)?.value()
        }
        (SumKind::G, _) => bail!("g takes ETA"),
        (SumKind::F, _) => bail!("f takes ALPHA BETA"),
        (SumKind::S, _) => bail!("S takes Q A3 A2"),
        (SumKind::V, _) => bail!("v takes BETA3 BETA2"),
    };
    Ok((z.re, z.im))
}

fn run_expsum(a: &ExpsumArgs) -> Result<(Value, Vec<String>, Vec<String>)> {
    let lines = if a.args.is_empty() { stdin_lines()? } else { vec![a.args.join(" ")] };
    let mut pairs = Vec::with_capacity(lines.len());
    for line in &lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        pairs.push(eval_sum(a, &tokens).with_context(|| format!("point '{line}'"))?);
    }
    let csv = pairs.iter().map(|(re, im)| format!("{re:.17e} {im:.17e}")).collect();
    Ok((json!(pairs), csv, vec![lines.join("\n")]))
}

fn run_arcs(cmd: &ArcsCmd) -> Result<(Value, Vec<String>, Vec<String>)> {
    let ArcsCmd::Classify { level, p, w, r2 } = cmd;
    let level: ArcLevel = level.parse().map_err(|e: String| anyhow!(e))?;
    if *r2 > *w {
        bail!("--r2 exceeds --w");
    }
    let params = ArcParams::new(*p, level, w - r2, *r2)?;
    let lines = stdin_lines()?;
    let mut labels = Vec::with_capacity(lines.len());
    let mut csv = Vec::with_capacity(lines.len());
    for line in &lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let label = classify_multi(&floats(&tokens)?, &params)?;
        csv.push(label.to_string());
        labels.push(label);
    }
    Ok((serde_json::to_value(&labels)?, csv, vec![lines.join("\n")]))
}

fn run_density(a: &DensityArgs, seed: u64) -> Result<(Value, Vec<String>, Vec<String>)> {
    let text = read(&a.system)?;
    let sys = MixedSystem::parse(&text)?;
    let eps = if a.eps.is_empty() { DEFAULT_EPS.to_vec() } else { a.eps.clone() };
    let result = match a.kind {
        DensityKind::Series => serde_json::to_value(singular_series(&sys, a.y)?)?,
        DensityKind::Chip => {
            let chis = primes_up_to(a.pmax)
                .into_iter()
                .map(|p| chi_p(&sys, p, a.imax, a.work_budget))
                .collect::<Result<Vec<_>, _>>()?;
            serde_json::to_value(chis)?
        }
        DensityKind::Chiinf => serde_json::to_value(chi_infinity(&sys, &eps, a.samples, seed)?)?,
        DensityKind::Constant => {
            let params = DensityParams {
                prime_bound: a.pmax,
                i_max: a.imax,
                work_budget: a.work_budget,
                series_y: a.y,
                eps,
                samples: a.samples,
                seed,
                witness_bound: a.witness_bound,
                singular_integral: None,
            };
            serde_json::to_value(compute_constant_c(&sys, &params)?)?
        }
    };
    let csv = vec![serde_json::to_string(&result)?];
    Ok((result, csv, vec![text]))
}

fn run_verify(path: &Path, budget_gib: Option<f64>) -> Result<(Value, Vec<String>, Vec<String>)> {
    let text = read(path)?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(b) = budget_gib {
        cfg.budget_gib = b;
    }
    let report = verify_asymptotic(&cfg)?;
    let a = &report.assessment;
    let mut csv = vec![
        format!("# c: {} +- {}", report.density.c, report.density.c_error),
        format!("# verdict: {:?}", a.verdict),
        "P,count,ratio,seconds".to_string(),
    ];
    csv.extend(a.rows.iter().map(|r| format!("{},{},{},{:.6}", r.p, r.count, r.ratio, r.seconds)));
    for s in &report.skipped {
        csv.push(format!("# skipped P={}: {}", s.p, s.reason));
    }
    let result = serde_json::to_value(&report)?;
    if let Some(out) = &cfg.output {
        fs::write(out, serde_json::to_string_pretty(&result)?)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok((result, csv, vec![text]))
}

fn run_suite(a: &SuiteArgs, budget_gib: f64, seed: u64) -> Result<(Value, Vec<String>, Vec<String>)> {
    let mut suite: Suite = a.name.parse().map_err(|e| anyhow!("{e}"))?;
    if let Suite::Prop22 { seed: s, .. } = &mut suite {
        *s = seed;
    }
    let sizes = if a.p.is_empty() { suite.default_sizes() } else { a.p.clone() };
    let opts = CountOptions {
        method: a.method.parse::<Method>().map_err(|e| anyhow!(e))?,
        budget_bytes: budget_gib * (1u64 << 30) as f64,
        max_work: a.max_work,
    };
    let report = exponent_suite(&suite, &sizes, &opts, a.slack.unwrap_or(suite.default_slack()))?;
    let mut csv = vec![
        format!(
            "# slope: {:.4} predicted: {} slack: {} pass: {}",
            report.fit.slope, report.predicted, report.slack, report.pass
        ),
    ];
    csv.extend(count_rows(&report.records));
    Ok((serde_json::to_value(&report)?, csv, Vec::new()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let config = serde_json::to_value(&cli)?;
    let budget_given = std::env::args().any(|a| a.starts_with("--budget-gib"));
    let (result, csv, inputs) = match &cli.command {
        Command::Matrix(cmd) => run_matrix(cmd)?,
        Command::Count(a) => run_count(a, cli.budget_gib)?,
        Command::Expsum(a) => run_expsum(a)?,
        Command::Arcs(cmd) => run_arcs(cmd)?,
        Command::Density(a) => run_density(a, cli.seed)?,
        Command::Verify { config } => run_verify(config, budget_given.then_some(cli.budget_gib))?,
        Command::Suite(a) => run_suite(a, cli.budget_gib, cli.seed)?,
    };
    let inputs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    Output {
        input_hash: hash_inputs(&config, &inputs),
        config,
        result,
        csv,
    }
    .emit(cli.out);
    Ok(())
}
