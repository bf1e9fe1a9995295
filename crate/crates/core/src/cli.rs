//! Command-line front end.
//!
//! Every report embeds the library version and the resolved configuration.
//! The worker count and output path are left out of the embedded
//! configuration because they do not affect results, so reports are
//! byte-identical across thread counts.
//!
//! Exit status: 0 on success, 2 on invalid input, 1 on numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::asym;
use crate::error::Error;
use crate::family::{parse_rational, OffspringSpec};
use crate::gw;
use crate::lagrange::{self, LagrangeSolution};
use crate::series::Coeff;
use crate::sim::{self, McConfig};
use crate::trees::{self, SubclassPredicate};

pub const SCHEMA: &str = "v1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Grid points this close to the apex are moved off it.
pub const APEX_NUDGE: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "gwtrees", version, about = "Parametric Galton-Watson trees via Lagrange inversion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Apex tau, radius rho and class of the offspring series.
    Apex(ApexArgs),
    /// Lagrange coefficients A_n of g = z psi(g).
    Coeffs(CoeffsArgs),
    /// Extinction probability q(t) over a grid, optionally with Monte Carlo.
    Extinction(ExtinctionArgs),
    /// Total-progeny law P(|T_t| = n).
    Progeny(ProgenyArgs),
    /// Monte Carlo extinction estimates with analytic references.
    Simulate(SimulateArgs),
    /// All plane trees of a given size with their weights.
    Enumerate(EnumerateArgs),
    /// Ratios A_n rho^n n^{3/2} / C.
    Asymptotics(AsymptoticsArgs),
    /// Conditional probabilities of a tree subclass.
    Conditional(ConditionalArgs),
    /// Run a command described by a TOML file of `flag = value` pairs.
    Run(RunArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Exp,
    Planetree,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
pub struct SpecArgs {
    #[arg(long, value_enum, required_unless_present = "coeffs", conflicts_with = "coeffs")]
    pub preset: Option<Preset>,
    /// JSON spec, or a list of coefficients b_0, b_1, ...
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    /// Radius for a coefficient list (a number or "inf").
    #[arg(long, requires = "coeffs")]
    pub radius: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct McArgs {
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long, default_value_t = sim::DEFAULT_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: u64,
    #[arg(long, default_value_t = sim::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    #[serde(skip)]
    pub workers: u64,
}

impl McArgs {
    fn config(&self, default_runs: u64) -> McConfig {
        McConfig {
            runs: self.runs.unwrap_or(default_runs),
            budget: self.budget,
            seed: self.seed,
            workers: self.workers as usize,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ApexArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct CoeffsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[arg(short = 'N', long = "order", default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub order: u64,
    /// Also print A_n as exact rationals.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct ExtinctionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// `start:stop:step` (stop excluded) or a comma-separated list.
    #[arg(long = "t")]
    pub t: String,
    #[arg(short = 'N', long = "order", default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub order: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct ProgenyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[arg(long = "t")]
    pub t: String,
    #[arg(short = 'N', long = "order", default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub order: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[arg(long = "t")]
    pub t: String,
    #[arg(short = 'N', long = "order", default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub order: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct EnumerateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[arg(short = 'n', long = "size", value_parser = clap::value_parser!(u64).range(1..))]
    pub size: u64,
    #[arg(long, default_value = "all")]
    pub pred: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct AsymptoticsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[arg(short = 'N', long = "order", default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..))]
    pub order: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct ConditionalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[arg(long)]
    pub pred: String,
    /// Tree size for the size-conditioned law.
    #[arg(short = 'n', long = "size", value_parser = clap::value_parser!(u64).range(1..))]
    pub size: u64,
    /// Parameters at which to evaluate the extinction-conditioned law.
    #[arg(long = "t")]
    pub t: Option<String>,
    #[arg(short = 'N', long = "order", default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub order: u64,
    /// Precision against which the truncation tail is judged.
    #[arg(long, default_value_t = 1e-6)]
    pub precision: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
}

/// Failure of a CLI invocation, split by exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::InvalidSpec(_)
            | Error::InvalidSeries(_)
            | Error::Domain { .. }
            | Error::SizeCap { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    if let Command::Run(run) = command {
        let argv = config_to_argv(&run.config)?;
        let cli = Cli::try_parse_from(argv).map_err(|e| usage(e.to_string().trim().to_string()))?;
        if matches!(cli.command, Command::Run(_)) {
            return Err(usage("a config file cannot invoke `run`"));
        }
        return execute(cli.command);
    }
    let config = serde_json::to_value(&command).expect("command serializes");
    let (report, output) = match &command {
        Command::Apex(a) => (apex(a)?, &a.output),
        Command::Coeffs(a) => (coeffs(a)?, &a.output),
        Command::Extinction(a) => (extinction(a)?, &a.output),
        Command::Progeny(a) => (progeny(a)?, &a.output),
        Command::Simulate(a) => (simulate(a)?, &a.output),
        Command::Enumerate(a) => (enumerate(a)?, &a.output),
        Command::Asymptotics(a) => (asymptotics(a)?, &a.output),
        Command::Conditional(a) => (conditional(a)?, &a.output),
        Command::Run(_) => unreachable!(),
    };
    let bytes = report.render(config, output.format)?;
    match &output.out {
        Some(path) => fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::Numeric(e.to_string())),
    }
}

/// Turns `key = value` pairs into command-line flags: single-letter keys
/// become `-k`, others `--key`; `true` adds a bare flag, arrays are joined
/// with commas. The `command` key names the subcommand.
pub fn config_to_argv(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| usage(format!("{}: {}", path.display(), e.message())))?;
    let command = table
        .get("command")
        .and_then(toml::Value::as_str)
        .ok_or_else(|| usage(format!("{}: missing string key `command`", path.display())))?;
    let mut argv = vec!["gwtrees".to_string(), command.to_string()];
    for (key, value) in &table {
        if key == "command" {
            continue;
        }
        let flag = if key.chars().count() == 1 {
            format!("-{key}")
        } else {
            format!("--{}", key.replace('_', "-"))
        };
        let scalar = |v: &toml::Value| -> CliResult<String> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                _ => Err(usage(format!("unsupported value for `{key}`"))),
            }
        };
        match value {
            toml::Value::Boolean(true) => argv.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts: CliResult<Vec<String>> = items.iter().map(scalar).collect();
                argv.push(flag);
                argv.push(parts?.join(","));
            }
            other => {
                argv.push(flag);
                argv.push(scalar(other)?);
            }
        }
    }
    Ok(argv)
}

/// Builds the offspring spec named by the source flags.
pub fn load_spec(args: &SpecArgs) -> CliResult<OffspringSpec> {
    match (&args.preset, &args.coeffs) {
        (Some(Preset::Exp), _) => Ok(OffspringSpec::exp()),
        (Some(Preset::Planetree), _) => Ok(OffspringSpec::geometric()),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".into());
            parse_spec_text(&text, args.radius.as_deref(), &name)
        }
        (None, None) => Err(usage("one of --preset or --coeffs is required")),
    }
}

/// A JSON spec object, or a coefficient list separated by commas or
/// whitespace (optionally bracketed). A list without a radius is a polynomial.
pub fn parse_spec_text(text: &str, radius: Option<&str>, name: &str) -> CliResult<OffspringSpec> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        if radius.is_some() {
            return Err(usage("--radius cannot be combined with a JSON spec"));
        }
        return Ok(OffspringSpec::from_json_str(trimmed)?);
    }
    let coeffs: Vec<BigRational> = trimmed
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(parse_rational)
        .collect::<Result<_, _>>()?;
    let spec = match radius {
        None => OffspringSpec::polynomial(coeffs)?,
        Some(r) => OffspringSpec::explicit(coeffs, parse_radius(r)?)?,
    };
    Ok(spec.with_name(name))
}

fn parse_radius(text: &str) -> CliResult<f64> {
    match text.trim() {
        "inf" | "infinity" | "Inf" => Ok(f64::INFINITY),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|r| *r > 0.0)
            .ok_or_else(|| usage(format!("invalid radius {other:?}"))),
    }
}

/// A grid point, possibly moved off the apex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub t: f64,
    pub nudged: bool,
}

/// `start:stop:step` (start included, stop excluded) or `a,b,c`.
pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| usage(format!("invalid grid value {s:?}")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 {
                return Err(usage("grid step must be positive"));
            }
            let mut out = Vec::new();
            let mut k = 0u64;
            loop {
                let t = start + k as f64 * step;
                if t >= stop - 1e-12 * step {
                    break;
                }
                out.push(t);
                k += 1;
                if k > 1_000_000 {
                    return Err(usage("grid has more than 10^6 points"));
                }
            }
            if out.is_empty() {
                return Err(usage("empty grid"));
            }
            Ok(out)
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(usage(format!("invalid grid {text:?}"))),
    }
}

/// Checks `t in [0, R)` and moves points within [`APEX_NUDGE`] of `tau`
/// off the apex, keeping their side (`tau` itself goes below).
pub fn resolve_grid(values: &[f64], spec: &OffspringSpec, tau: Option<f64>) -> CliResult<Vec<GridPoint>> {
    values
        .iter()
        .map(|&t| {
            spec.check_domain(t)?;
            Ok(match tau {
                Some(tau) if (t - tau).abs() <= APEX_NUDGE => GridPoint {
                    t: if t > tau { tau + APEX_NUDGE } else { tau - APEX_NUDGE },
                    nudged: true,
                },
                _ => GridPoint { t, nudged: false },
            })
        })
        .collect()
}

/// Tabular result with a summary, rendered as CSV or JSON.
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub spec: Value,
    pub summary: Map<String, Value>,
}

/// Numbers as JSON numbers; infinities as `"inf"`/`"-inf"`, NaN as null.
fn num(x: f64) -> Value {
    match x {
        f64::INFINITY => Value::from("inf"),
        f64::NEG_INFINITY => Value::from("-inf"),
        _ => Value::from(x),
    }
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Report {
    fn new(spec: &OffspringSpec, columns: Vec<&'static str>) -> Self {
        Report {
            columns,
            rows: Vec::new(),
            spec: spec.to_json(),
            summary: Map::new(),
        }
    }

    pub fn render(&self, config: Value, format: Format) -> CliResult<Vec<u8>> {
        match format {
            Format::Json => {
                let results: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .columns
                            .iter()
                            .map(|c| c.to_string())
                            .zip(row.iter().cloned())
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let doc = json!({
                    "schema": SCHEMA,
                    "version": VERSION,
                    "config": config,
                    "spec": self.spec,
                    "results": results,
                    "summary": self.summary,
                });
                let mut bytes = serde_json::to_vec_pretty(&doc).expect("report serializes");
                bytes.push(b'\n');
                Ok(bytes)
            }
            Format::Csv => {
                let mut bytes = Vec::new();
                writeln!(bytes, "# gwtrees {VERSION} schema {SCHEMA}").expect("vec write");
                writeln!(bytes, "# config: {config}").expect("vec write");
                writeln!(bytes, "# spec: {}", self.spec).expect("vec write");
                if !self.summary.is_empty() {
                    writeln!(bytes, "# summary: {}", Value::Object(self.summary.clone())).expect("vec write");
                }
                let mut w = csv::Writer::from_writer(bytes);
                let io = |e: csv::Error| CliError::Numeric(e.to_string());
                w.write_record(&self.columns).map_err(io)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(cell)).map_err(io)?;
                }
                w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))
            }
        }
    }
}

fn solve(spec: &OffspringSpec, order: u64) -> CliResult<LagrangeSolution> {
    Ok(LagrangeSolution::solve(spec, order as usize)?)
}

fn apex(a: &ApexArgs) -> CliResult<Report> {
    let spec = load_spec(&a.spec)?;
    let class = spec.classify()?;
    let rho = lagrange::radius(&spec)?;
    let mut r = Report::new(
        &spec,
        vec!["name", "class", "tau", "rho", "limit_mean", "psi_tau", "sigma_tau", "lattice"],
    );
    let tau = class.tau();
    let psi_tau = tau.map(|t| spec.psi(t)).transpose()?;
    let sigma = tau.map(|t| spec.variance(t).map(f64::sqrt)).transpose()?;
    r.rows.push(vec![
        Value::from(spec.name()),
        Value::from(if class.is_k_star() { "k-star" } else { "k-plain" }),
        opt(tau),
        num(rho),
        num(class.limit_mean()),
        opt(psi_tau),
        opt(sigma),
        Value::from(spec.lattice_period()),
    ]);
    Ok(r)
}

fn coeffs(a: &CoeffsArgs) -> CliResult<Report> {
    let spec = load_spec(&a.spec)?;
    let sol = solve(&spec, a.order)?;
    let mut columns = vec!["n", "a_n", "log_a_n", "a_n_rho_n"];
    let exact = if a.exact {
        columns.push("a_n_exact");
        Some(lagrange::solve_exact(&spec, a.order as usize)?)
    } else {
        None
    };
    let mut r = Report::new(&spec, columns);
    for n in 1..=sol.order() {
        let mut row = vec![Value::from(n), num(sol.a(n)), num(sol.log_a(n)), num(sol.a_rho_n(n))];
        if let Some(e) = &exact {
            row.push(Value::from(e.a[n].to_string()));
        }
        r.rows.push(row);
    }
    r.summary.insert("rho".into(), num(sol.rho()));
    r.summary.insert("tau".into(), opt(sol.tau()));
    r.summary.insert("lattice".into(), Value::from(sol.lattice_period()));
    Ok(r)
}

fn extinction(a: &ExtinctionArgs) -> CliResult<Report> {
    let spec = load_spec(&a.spec)?;
    let sol = solve(&spec, a.order)?;
    let grid = resolve_grid(&parse_grid(&a.t)?, &spec, sol.tau())?;
    let mut columns = vec!["t", "nudged", "mean", "q", "method", "tail_bound"];
    if a.mc.runs.is_some() {
        columns.extend(["mc_estimate", "mc_ci_low", "mc_ci_high", "censor_bound"]);
    }
    let mut r = Report::new(&spec, columns);
    for p in grid {
        let e = gw::extinction(&sol, p.t)?;
        let mut row = vec![
            num(p.t),
            Value::from(p.nudged),
            num(spec.mean(p.t)?),
            num(e.q),
            Value::from(e.method.as_str()),
            opt(e.tail_bound),
        ];
        if a.mc.runs.is_some() {
            let cfg = a.mc.config(sim::DEFAULT_RUNS);
            let mc = sim::mc_extinction(&spec, p.t, &cfg)?;
            row.extend([
                num(mc.extinct.estimate),
                num(mc.extinct.ci_low),
                num(mc.extinct.ci_high),
                num(gw::censoring_bound(&sol, p.t, cfg.budget as usize)?),
            ]);
        }
        r.rows.push(row);
    }
    r.summary.insert("tau".into(), opt(sol.tau()));
    r.summary.insert("rho".into(), num(sol.rho()));
    Ok(r)
}

fn progeny(a: &ProgenyArgs) -> CliResult<Report> {
    let spec = load_spec(&a.spec)?;
    let sol = solve(&spec, a.order)?;
    let grid = resolve_grid(&parse_grid(&a.t)?, &spec, sol.tau())?;
    let mut r = Report::new(&spec, vec!["t", "n", "prob", "cumulative"]);
    let mut laws = Vec::new();
    for p in grid {
        let law = gw::progeny_law(&sol, p.t, sol.order())?;
        let mut acc = 0.0;
        for (n, &prob) in law.probs.iter().enumerate().skip(1) {
            acc += prob;
            r.rows.push(vec![num(p.t), Value::from(n), num(prob), num(acc)]);
        }
        laws.push(json!({
            "t": p.t,
            "nudged": p.nudged,
            "q": law.q,
            "survival_mass": law.survival_mass,
            "tail_finite": law.tail_finite,
        }));
    }
    r.summary.insert("laws".into(), Value::Array(laws));
    Ok(r)
}

fn simulate(a: &SimulateArgs) -> CliResult<Report> {
    let spec = load_spec(&a.spec)?;
    let sol = solve(&spec, a.order)?;
    let grid = resolve_grid(&parse_grid(&a.t)?, &spec, sol.tau())?;
    let cfg = a.mc.config(sim::DEFAULT_RUNS);
    let mut r = Report::new(
        &spec,
        vec![
            "t",
            "runs",
            "budget",
            "extinct",
            "estimate",
            "std_error",
            "ci_low",
            "ci_high",
            "q_reference",
            "censor_bound",
            "reference_in_ci",
            "mean_extinct_size",
        ],
    );
    for p in grid {
        let mc = sim::mc_extinction(&spec, p.t, &cfg)?;
        let q = gw::extinction(&sol, p.t)?.q;
        let bound = gw::censoring_bound(&sol, p.t, cfg.budget as usize)?;
        r.rows.push(vec![
            num(p.t),
            Value::from(cfg.runs),
            Value::from(cfg.budget),
            Value::from(mc.extinct.hits),
            num(mc.extinct.estimate),
            num(mc.extinct.std_error),
            num(mc.extinct.ci_low),
            num(mc.extinct.ci_high),
            num(q),
            num(bound),
            Value::from(mc.extinct.contains(q)),
            num(mc.mean_extinct_size),
        ]);
    }
    Ok(r)
}

fn enumerate(a: &EnumerateArgs) -> CliResult<Report> {
    let spec = load_spec(&a.spec)?;
    let pred = SubclassPredicate::from_name(&a.pred)?;
    let n = a.size as usize;
    let mut r = Report::new(&spec, vec!["index", "tree", "height", "leaves", "weight", "weight_f64", "accepted"]);
    let mut total = BigRational::from_integer(0.into());
    let mut accepted = total.clone();
    let mut count = 0usize;
    for (i, tree) in trees::enumerate(n)?.enumerate() {
        let w = trees::weight(&tree, &spec);
        let ok = pred.accepts(&tree);
        total += w.clone();
        if ok {
            accepted += w.clone();
        }
        count += 1;
        r.rows.push(vec![
            Value::from(i),
            Value::from(tree.to_parens()),
            Value::from(tree.height()),
            Value::from(tree.leaves()),
            Value::from(w.to_string()),
            num(w.to_f64()),
            Value::from(ok),
        ]);
    }
    r.summary.insert("n".into(), Value::from(n));
    r.summary.insert("count".into(), Value::from(count));
    r.summary.insert("weight_sum".into(), Value::from(total.to_string()));
    r.summary.insert("pred".into(), Value::from(pred.name()));
    r.summary.insert("pred_weight_sum".into(), Value::from(accepted.to_string()));
    Ok(r)
}

fn asymptotics(a: &AsymptoticsArgs) -> CliResult<Report> {
    let spec = load_spec(&a.spec)?;
    let sol = solve(&spec, a.order)?;
    let prof = asym::profile(&sol)?;
    let rows = asym::an_ratio_check(&sol, &prof, sol.order())?;
    let mut r = Report::new(&spec, vec!["n", "a_n_rho_n_n32", "ratio"]);
    for row in rows {
        r.rows.push(vec![Value::from(row.n), num(row.scaled), num(row.ratio)]);
    }
    r.summary = match serde_json::to_value(prof).expect("profile serializes") {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    Ok(r)
}

fn conditional(a: &ConditionalArgs) -> CliResult<Report> {
    let spec = load_spec(&a.spec)?;
    let pred = SubclassPredicate::from_name(&a.pred)?;
    let n = a.size as usize;
    let exact = gw::conditional_size_prob(&pred, &spec, n)?;
    let mut columns = vec!["t", "nudged", "size_exact", "extinction_value", "extinction_tail", "tail_dominates"];
    if a.mc.runs.is_some() {
        columns.extend(["mc_size_selected", "mc_size_frequency", "mc_ci_low", "mc_ci_high", "exact_in_ci"]);
    }
    let mut r = Report::new(&spec, columns);
    r.summary.insert("pred".into(), Value::from(pred.name()));
    r.summary.insert("n".into(), Value::from(n));
    r.summary.insert("size_exact".into(), Value::from(exact.to_string()));
    r.summary.insert("size_exact_f64".into(), num(exact.to_f64()));
    if let Some(grid) = &a.t {
        let sol = solve(&spec, a.order)?;
        for p in resolve_grid(&parse_grid(grid)?, &spec, sol.tau())? {
            let c = gw::conditional_extinction_prob(&pred, &sol, p.t, a.order as usize, a.precision)?;
            let mut row = vec![
                num(p.t),
                Value::from(p.nudged),
                num(exact.to_f64()),
                num(c.value),
                num(c.tail_bound),
                Value::from(c.tail_dominates),
            ];
            if a.mc.runs.is_some() {
                let cfg = a.mc.config(sim::DEFAULT_RUNS);
                let mc = sim::mc_conditional_size(&spec, p.t, &pred, n, &cfg)?;
                row.extend([
                    Value::from(mc.frequency.trials),
                    num(mc.frequency.estimate),
                    num(mc.frequency.ci_low),
                    num(mc.frequency.ci_high),
                    Value::from(mc.frequency.contains(exact.to_f64())),
                ]);
            }
            r.rows.push(row);
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0.25:1.0:0.25").unwrap(), vec![0.25, 0.5, 0.75]);
        assert_eq!(parse_grid("1,2.5,3").unwrap(), vec![1.0, 2.5, 3.0]);
        assert_eq!(parse_grid("2").unwrap(), vec![2.0]);
        assert_eq!(parse_grid("0:1:0.1").unwrap().len(), 10);
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn apex_nudge() {
        let spec = OffspringSpec::exp();
        let g = resolve_grid(&[0.5, 1.0, 1.0 + 5e-10, 1.0 - 5e-10], &spec, Some(1.0)).unwrap();
        assert!(!g[0].nudged);
        assert_eq!(g[1], GridPoint { t: 1.0 - APEX_NUDGE, nudged: true });
        assert_eq!(g[2], GridPoint { t: 1.0 + APEX_NUDGE, nudged: true });
        assert_eq!(g[3].t, 1.0 - APEX_NUDGE);
        let geo = OffspringSpec::geometric();
        assert!(matches!(
            resolve_grid(&[1.0], &geo, Some(0.5)),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn spec_text() {
        let s = parse_spec_text("1, 1, 0, 1", None, "cubic").unwrap();
        assert_eq!(s.name(), "cubic");
        assert_eq!(s.degree(), Some(3));
        let s = parse_spec_text("[1 1/2 1/6]", Some("inf"), "e3").unwrap();
        assert_eq!(s.radius(), f64::INFINITY);
        let s = parse_spec_text(r#"{"kind":"preset-exp","radius":"inf","name":"exp"}"#, None, "x").unwrap();
        assert_eq!(s.name(), "exp");
        assert!(parse_spec_text("1, x", None, "bad").is_err());
        assert!(parse_spec_text("0, 1", None, "bad").is_err());
        assert!(parse_spec_text("{}", Some("1"), "bad").is_err());
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(Error::Parse("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::NotKStar).exit_code(), 1);
        assert_eq!(
            CliError::from(Error::TailTooLarge { tail: 1.0, limit: 0.5 }).exit_code(),
            1
        );
    }

    #[test]
    fn csv_layout() {
        let spec = OffspringSpec::exp();
        let mut r = Report::new(&spec, vec!["n", "x", "label"]);
        r.rows.push(vec![Value::from(1), num(0.5), Value::from("a")]);
        r.rows.push(vec![Value::from(2), Value::Null, Value::from("b,c")]);
        let text = String::from_utf8(r.render(json!({"command": "test"}), Format::Csv).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# gwtrees {VERSION} schema v1"));
        assert_eq!(lines[1], r#"# config: {"command":"test"}"#);
        assert_eq!(&lines[3..], &["n,x,label", "1,0.5,a", "2,,\"b,c\""]);

        let doc: Value = serde_json::from_slice(&r.render(json!({}), Format::Json).unwrap()).unwrap();
        assert_eq!(doc["schema"], "v1");
        assert_eq!(doc["results"][0]["x"], 0.5);
        assert_eq!(doc["results"][1]["x"], Value::Null);
    }

    #[test]
    fn config_excludes_workers_and_out() {
        let cli = Cli::try_parse_from([
            "gwtrees", "simulate", "--preset", "exp", "--t", "2", "--workers", "4", "--out", "/tmp/x.csv",
        ])
        .unwrap();
        let v = serde_json::to_value(&cli.command).unwrap();
        assert_eq!(v["command"], "simulate");
        assert_eq!(v["preset"], "exp");
        assert!(v.get("workers").is_none());
        assert!(v.get("out").is_none());
        assert_eq!(v["budget"], 10_000);
    }

    #[test]
    fn toml_config_to_flags() {
        let dir = std::env::temp_dir().join(format!("gwtrees-cli-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        fs::write(
            &path,
            "command = \"coeffs\"\npreset = \"exp\"\nN = 6\nexact = true\nformat = \"json\"\n",
        )
        .unwrap();
        let argv = config_to_argv(&path).unwrap();
        assert_eq!(argv[..2], ["gwtrees", "coeffs"]);
        let cli = Cli::try_parse_from(&argv).unwrap();
        match cli.command {
            Command::Coeffs(c) => {
                assert_eq!(c.order, 6);
                assert!(c.exact);
                assert_eq!(c.output.format, Format::Json);
            }
            other => panic!("{other:?}"),
        }
        fs::write(&path, "preset = \"exp\"\n").unwrap();
        assert!(config_to_argv(&path).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_source_is_usage_error() {
        let e = Cli::try_parse_from(["gwtrees", "apex"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = Cli::try_parse_from(["gwtrees", "apex", "--preset", "exp", "--coeffs", "x"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
