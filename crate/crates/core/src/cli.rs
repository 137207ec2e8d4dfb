//! Command-line front end.
//!
//! Every run prints one JSON report on stdout. With `--out` (or `VARINF_OUT`)
//! the report and a CSV of the estimator traces are also written to that
//! directory as `<command>.json` and `<command>.csv`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::certify::{CertVerdict, Certifier, CertifyConfig, Property};
use crate::chain::IndexSubset;
use crate::corpus;
use crate::decouple::{Analyzer, DecoupleConfig, Estimate};
use crate::error::{Error, Result};
use crate::ext::ExtValue;
use crate::functions::{parse_family, parse_function, parse_region, print_region, FunctionFamily};
use crate::geometry::{dist, Region};
use crate::multiplier::{self, MultiplierConfig};
use crate::report::{traces_csv, Report};
use crate::varprinciple::{ekeland_on_grid, evp_holds, GridSpace};

#[derive(Parser, Debug)]
#[command(name = "varinf", version, about = "Decoupled infima, uniform lsc certificates and fuzzy multiplier search")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Global {
    /// Seed for every randomized search.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for the JSON report and CSV traces.
    #[arg(long, global = true, env = "VARINF_OUT")]
    #[serde(skip)]
    out: Option<PathBuf>,
    /// Exit with status 1 on a Fails verdict or a failing corpus entry.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads; all logical cores by default.
    #[arg(long, global = true)]
    #[serde(skip)]
    threads: Option<usize>,
    /// Absolute certificate tolerance instead of 1e-4 (1 + |scale|).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    delta_levels: Option<usize>,
    #[arg(long, global = true)]
    multistarts: Option<usize>,
    #[arg(long, global = true)]
    grid_density: Option<usize>,
    #[arg(long, global = true)]
    grid_budget: Option<usize>,
    #[arg(long, global = true)]
    inner_budget: Option<usize>,
    #[arg(long, global = true)]
    theta_centers: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct FamilyArgs {
    /// Family file in the `.fam` format.
    #[arg(long, conflicts_with = "fixture")]
    family: Option<PathBuf>,
    /// Name of a built-in fixture.
    #[arg(long)]
    fixture: Option<String>,
    /// Region `U`, e.g. "[-2,2]" or "(box (0 1) (0 1))"; defaults to the family's.
    #[arg(long, allow_hyphen_values = true)]
    region: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a function or every fixed member of a family at points.
    Eval {
        #[arg(long, conflicts_with_all = ["family", "fixture"])]
        expr: Option<String>,
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long = "at", required = true, allow_hyphen_values = true)]
        at: Vec<String>,
    },
    /// Upper sum of a family at points.
    Sum {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long = "at", required = true, allow_hyphen_values = true)]
        at: Vec<String>,
    },
    /// Uniform infimum.
    Lambda {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long)]
        quasi: bool,
    },
    /// Firm constant.
    Theta {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long)]
        quasi: bool,
    },
    /// Gap constant.
    Delta {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long)]
        quasi: bool,
    },
    /// Certify a property: uniform-lsc, firm-uniform-lsc, quasi-uniform-lsc,
    /// firm-quasi-uniform-lsc, weak-delta, weak-firm, inf-stable,
    /// inf-quasi-stable, joint-lsc (needs --at), inf-compact (needs --t0).
    Certify {
        property: String,
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long)]
        t0: Option<usize>,
    },
    /// Ekeland point of the upper sum on a grid of the region.
    Ekeland {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 41)]
        density: usize,
    },
    /// Fuzzy multiplier points at a local minimizer of the upper sum.
    Multiplier {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long)]
        eps: f64,
        /// Member ids that must be included, e.g. "0,1".
        #[arg(long)]
        s0: Option<String>,
        /// Take the lower semicontinuity hypothesis on trust.
        #[arg(long)]
        assume: bool,
        #[arg(long)]
        density: Option<usize>,
    },
    /// Fuzzy sum rule for a given subgradient x*.
    Sumrule {
        #[command(flatten)]
        fam: FamilyArgs,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long, allow_hyphen_values = true)]
        xstar: String,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        s0: Option<String>,
        #[arg(long)]
        density: Option<usize>,
    },
    /// Run the regression corpus.
    Corpus {
        #[arg(long, conflicts_with = "ids")]
        all: bool,
        ids: Vec<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eval { .. } => "eval",
            Command::Sum { .. } => "sum",
            Command::Lambda { .. } => "lambda",
            Command::Theta { .. } => "theta",
            Command::Delta { .. } => "delta",
            Command::Certify { .. } => "certify",
            Command::Ekeland { .. } => "ekeland",
            Command::Multiplier { .. } => "multiplier",
            Command::Sumrule { .. } => "sumrule",
            Command::Corpus { .. } => "corpus",
        }
    }
}

/// Everything that determines a run, echoed into its report.
#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub family: Option<String>,
    pub family_name: Option<String>,
    pub region: Option<String>,
    pub seed: u64,
    pub tol: Option<f64>,
    pub budgets: Value,
    pub params: Value,
}

/// Errors that come from bad input rather than from the computation.
fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse { .. }
            | Error::InvalidParameter(_)
            | Error::Dimension { .. }
            | Error::NonFiniteCoordinate
            | Error::Empty(_)
            | Error::Io(_)
            | Error::NotInDomain
    )
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn from_error(e: Error, source: &str) -> Self {
        let message = match &e {
            Error::Parse { line, column, message } => format!("{source}:{line}:{column}: {message}"),
            other => format!("{source}: {other}"),
        };
        Failure {
            code: if is_usage(&e) { 2 } else { 1 },
            message,
        }
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit code:
/// 0 on success, 1 on a failed computation or, with `--strict`, a Fails
/// verdict, 2 on a usage or input error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("varinf: {e}");
            return 2;
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("varinf: {}", f.message);
            f.code
        }
    }
}

struct Output {
    config: RunConfig,
    result: Value,
    estimates: Vec<Estimate>,
    /// A Fails verdict or failed corpus entry.
    failed: bool,
}

fn run(cli: &Cli) -> std::result::Result<i32, Failure> {
    let g = &cli.global;
    let out = dispatch(&cli.command, g)?;
    let report = Report::new(&out.config, &out.result);
    let json = report.to_json().map_err(|e| Failure::from_error(e, "report"))?;
    {
        use std::io::Write;
        // A closed pipe on stdout is not an error of the run.
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "{json}").and_then(|_| stdout.flush());
    }
    if let Some(dir) = &g.out {
        write_outputs(dir, cli.command.name(), &json, &out.estimates)
            .map_err(|e| Failure::from_error(e, &dir.display().to_string()))?;
    }
    Ok(if g.strict && out.failed { 1 } else { 0 })
}

fn write_outputs(dir: &Path, name: &str, json: &str, estimates: &[Estimate]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{name}.json")), format!("{json}\n"))?;
    let refs: Vec<&Estimate> = estimates.iter().collect();
    std::fs::write(dir.join(format!("{name}.csv")), traces_csv(&refs)?)?;
    Ok(())
}

fn budgets(g: &Global) -> Value {
    json!({
        "delta_levels": g.delta_levels,
        "multistarts": g.multistarts,
        "grid_density": g.grid_density,
        "grid_budget": g.grid_budget,
        "inner_budget": g.inner_budget,
        "theta_centers": g.theta_centers,
    })
}

fn apply_budgets(cfg: &mut DecoupleConfig, g: &Global) {
    if let Some(v) = g.delta_levels {
        cfg.delta_levels = v;
    }
    if let Some(v) = g.multistarts {
        cfg.multistarts = v;
    }
    if let Some(v) = g.grid_density {
        cfg.grid_density = v;
    }
    if let Some(v) = g.grid_budget {
        cfg.grid_budget = v;
    }
    if let Some(v) = g.inner_budget {
        cfg.inner_budget = v;
    }
    if let Some(v) = g.theta_centers {
        cfg.theta_centers = v;
    }
    cfg.seed = g.seed;
}

struct Loaded {
    family: FunctionFamily,
    source: String,
    region: Option<Region>,
}

fn load(fam: &FamilyArgs) -> std::result::Result<Loaded, Failure> {
    let (family, source) = match (&fam.family, &fam.fixture) {
        (Some(path), None) => {
            let source = path.display().to_string();
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("{source}: {e}")))?;
            (parse_family(&text).map_err(|e| Failure::from_error(e, &source))?, source)
        }
        (None, Some(name)) => {
            let family = corpus::fixture(name).map_err(|e| Failure::from_error(e, name))?;
            (family, format!("fixture:{name}"))
        }
        _ => return Err(Failure::usage("give exactly one of --family or --fixture")),
    };
    let region = match &fam.region {
        Some(r) => Some(parse_region(r).map_err(|e| Failure::from_error(e, "--region"))?),
        None => family.region().cloned(),
    };
    Ok(Loaded { family, source, region })
}

impl Loaded {
    fn region(&self) -> std::result::Result<Region, Failure> {
        self.region
            .clone()
            .ok_or_else(|| Failure::usage(format!("{}: no region; pass --region", self.source)))
    }

    fn config(&self, command: &str, g: &Global, params: Value) -> RunConfig {
        RunConfig {
            command: command.into(),
            family: Some(self.source.clone()),
            family_name: Some(self.family.name().to_string()),
            region: self.region.as_ref().map(print_region),
            seed: g.seed,
            tol: g.tol,
            budgets: budgets(g),
            params,
        }
    }
}

fn parse_point(s: &str, what: &str) -> std::result::Result<Vec<f64>, Failure> {
    let inner = s.trim().trim_start_matches(['[', '(']).trim_end_matches([']', ')']);
    let coords: std::result::Result<Vec<f64>, _> = inner
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(str::parse::<f64>)
        .collect();
    match coords {
        Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(Failure::usage(format!("{what}: cannot read a point from '{s}'"))),
    }
}

fn parse_ids(s: &Option<String>) -> std::result::Result<IndexSubset, Failure> {
    let Some(s) = s else { return Ok(IndexSubset::new(vec![])) };
    s.split(',')
        .filter(|w| !w.trim().is_empty())
        .map(|w| w.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(IndexSubset::new)
        .map_err(|_| Failure::usage(format!("--s0: cannot read member ids from '{s}'")))
}

fn to_value<T: Serialize>(v: &T) -> std::result::Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure { code: 1, message: e.to_string() })
}

fn dispatch(cmd: &Command, g: &Global) -> std::result::Result<Output, Failure> {
    let name = cmd.name();
    match cmd {
        Command::Eval { expr, fam, at } => {
            let points: Vec<Vec<f64>> = at.iter().map(|p| parse_point(p, "--at")).collect::<std::result::Result<_, _>>()?;
            let (members, config): (Vec<(String, crate::functions::ExtFunction)>, RunConfig) = match expr {
                Some(src) => {
                    let f = parse_function(src).map_err(|e| Failure::from_error(e, "--expr"))?;
                    let config = RunConfig {
                        command: name.into(),
                        family: None,
                        family_name: None,
                        region: None,
                        seed: g.seed,
                        tol: g.tol,
                        budgets: budgets(g),
                        params: json!({ "expr": src, "at": points }),
                    };
                    (vec![("f".into(), f)], config)
                }
                None => {
                    let l = load(fam)?;
                    let config = l.config(name, g, json!({ "at": points }));
                    let members = l.family.members().iter().map(|m| (m.label.clone(), (*m.func).clone())).collect();
                    (members, config)
                }
            };
            let mut rows = Vec::new();
            for p in &points {
                let mut values = Vec::new();
                for (label, f) in &members {
                    f.check_dim(p.len()).map_err(|e| Failure::from_error(e, "--at"))?;
                    values.push(json!({ "label": label, "value": f.eval(p) }));
                }
                rows.push(json!({ "point": p, "values": values }));
            }
            Ok(Output { config, result: Value::Array(rows), estimates: vec![], failed: false })
        }
        Command::Sum { fam, at } => {
            let l = load(fam)?;
            let points: Vec<Vec<f64>> = at.iter().map(|p| parse_point(p, "--at")).collect::<std::result::Result<_, _>>()?;
            let mut rows = Vec::new();
            for p in &points {
                let s = l.family.upper_sum(p).map_err(|e| Failure::from_error(e, "--at"))?;
                rows.push(json!({
                    "point": p,
                    "value": s.value,
                    "radius": s.radius,
                    "inconclusive": s.inconclusive,
                    "prefix_sums": s.prefix_sums,
                }));
            }
            let config = l.config(name, g, json!({ "at": points }));
            Ok(Output { config, result: Value::Array(rows), estimates: vec![], failed: false })
        }
        Command::Lambda { fam, quasi } | Command::Theta { fam, quasi } | Command::Delta { fam, quasi } => {
            let l = load(fam)?;
            let mut cfg = DecoupleConfig::new(l.region()?);
            apply_budgets(&mut cfg, g);
            let an = Analyzer::new(&l.family, &cfg).map_err(|e| Failure::from_error(e, &l.source))?;
            let est = match (name, *quasi) {
                ("lambda", false) => an.lambda(),
                ("lambda", true) => an.quasi_lambda(),
                ("theta", false) => Ok(an.theta()),
                ("theta", true) => an.quasi_theta(),
                ("delta", false) => an.delta(),
                _ => an.quasi_delta(),
            }
            .map_err(|e| Failure::from_error(e, &l.source))?;
            let config = l.config(name, g, json!({ "quasi": quasi }));
            Ok(Output { config, result: to_value(&est)?, estimates: vec![est], failed: false })
        }
        Command::Certify { property, fam, at, t0 } => {
            let prop = Property::parse(property)
                .ok_or_else(|| Failure::usage(format!("unknown property '{property}'")))?;
            let l = load(fam)?;
            let mut cfg = CertifyConfig::new(l.region()?);
            cfg.tol = g.tol;
            apply_budgets(&mut cfg.decouple, g);
            let c = Certifier::new(&l.family, &cfg).map_err(|e| Failure::from_error(e, &l.source))?;
            let point = at.as_deref().map(|p| parse_point(p, "--at")).transpose()?;
            let cert = match prop {
                Property::JointLsc => {
                    let x = point.as_ref().ok_or_else(|| Failure::usage("joint-lsc needs --at"))?;
                    c.joint_lsc(x)
                }
                Property::InfCompactSufficient => {
                    let t = t0.ok_or_else(|| Failure::usage("inf-compact needs --t0"))?;
                    c.inf_compact_sufficient(t)
                }
                p => c.certify(p),
            }
            .map_err(|e| Failure::from_error(e, &l.source))?;
            let failed = matches!(cert.verdict, CertVerdict::Fails { .. });
            let config = l.config(name, g, json!({ "property": prop.name(), "at": point, "t0": t0 }));
            Ok(Output { config, result: to_value(&cert)?, estimates: cert.estimates.clone(), failed })
        }
        Command::Ekeland { fam, at, eps, density } => {
            let l = load(fam)?;
            let region = l.region()?;
            let x = parse_point(at, "--at")?;
            let result = ekeland(&l.family, &region, &x, *eps, *density, g.seed)?;
            let config = l.config(name, g, json!({ "at": x, "eps": eps, "density": density }));
            Ok(Output { config, result, estimates: vec![], failed: false })
        }
        Command::Multiplier { fam, at, delta, eps, s0, assume, density } => {
            let l = load(fam)?;
            let x = parse_point(at, "--at")?;
            let s0 = parse_ids(s0)?;
            let cfg = multiplier_config(&l.family, g, *assume, *density);
            let r = multiplier::multiplier_search(&l.family, &x, *delta, *eps, &s0, &cfg)
                .map_err(|e| Failure::from_error(e, &l.source))?;
            let estimates = r.certificate.as_ref().map(|c| c.estimates.clone()).unwrap_or_default();
            let config = l.config(
                name,
                g,
                json!({ "at": x, "delta": delta, "eps": eps, "s0": s0, "assume": assume, "density": cfg.density }),
            );
            Ok(Output { config, result: to_value(&r)?, estimates, failed: false })
        }
        Command::Sumrule { fam, at, xstar, delta, eps, s0, density } => {
            let l = load(fam)?;
            let x = parse_point(at, "--at")?;
            let xs = parse_point(xstar, "--xstar")?;
            let s0 = parse_ids(s0)?;
            let cfg = multiplier_config(&l.family, g, false, *density);
            let r = multiplier::fuzzy_sum_rule(&l.family, &x, &xs, *delta, *eps, &s0, &cfg)
                .map_err(|e| Failure::from_error(e, &l.source))?;
            let estimates = r.certificate.as_ref().map(|c| c.estimates.clone()).unwrap_or_default();
            let config = l.config(
                name,
                g,
                json!({ "at": x, "xstar": xs, "delta": delta, "eps": eps, "s0": s0, "density": cfg.density }),
            );
            Ok(Output { config, result: to_value(&r)?, estimates, failed: false })
        }
        Command::Corpus { all, ids } => {
            if !*all && ids.is_empty() {
                return Err(Failure::usage("corpus: pass --all or entry ids"));
            }
            let r = corpus::run_corpus(ids, g.seed).map_err(|e| Failure::from_error(e, "corpus"))?;
            let config = RunConfig {
                command: name.into(),
                family: None,
                family_name: None,
                region: None,
                seed: g.seed,
                tol: g.tol,
                budgets: budgets(g),
                params: json!({ "all": all, "ids": ids }),
            };
            let failed = !r.all_pass;
            Ok(Output { config, result: to_value(&r)?, estimates: vec![], failed })
        }
    }
}

fn multiplier_config(family: &FunctionFamily, g: &Global, assume: bool, density: Option<usize>) -> MultiplierConfig {
    let mut cfg = MultiplierConfig::new(family.dim());
    cfg.seed = g.seed;
    apply_budgets(&mut cfg.decouple, g);
    if assume {
        cfg = cfg.assume_certificate();
    }
    if let Some(d) = density {
        cfg.density = d;
    }
    cfg
}

/// Grid Ekeland on the upper sum, started at the grid point nearest `x`.
fn ekeland(
    family: &FunctionFamily,
    region: &Region,
    x: &[f64],
    eps: f64,
    density: usize,
    seed: u64,
) -> std::result::Result<Value, Failure> {
    if x.len() != family.dim() {
        return Err(Failure::from_error(
            Error::Dimension { expected: family.dim(), got: x.len() },
            "--at",
        ));
    }
    let points = region.grid(density);
    if points.is_empty() {
        return Err(Failure::usage("region grid is empty"));
    }
    let mut values = Vec::with_capacity(points.len());
    for p in &points {
        let v = family.upper_sum(p).map_err(|e| Failure::from_error(e, "ekeland"))?.value;
        if v.is_neg_infinity() {
            return Err(Failure {
                code: 1,
                message: format!("upper sum is -inf at {p:?}; no Ekeland point exists"),
            });
        }
        values.push(v.value());
    }
    let start = (0..points.len())
        .min_by(|a, b| dist(&points[*a], x).total_cmp(&dist(&points[*b], x)))
        .expect("nonempty grid");
    if !values[start].is_finite() {
        return Err(Failure::usage(format!(
            "upper sum is not finite at the start point {:?}",
            points[start]
        )));
    }
    let space = GridSpace::from_points(points.clone()).map_err(|e| Failure::from_error(e, "ekeland"))?;
    let f = |u: &[Vec<f64>]| -> ExtValue {
        family
            .upper_sum(&u[0])
            .ok()
            .and_then(|s| ExtValue::new(s.value.value()).ok())
            .unwrap_or(ExtValue::INFINITY)
    };
    let r = ekeland_on_grid(&f, &space, &[start], eps, seed).map_err(|e| Failure::from_error(e, "ekeland"))?;
    let verified = r.exhaustive && evp_holds(&f, &space, &[start], &r.index, eps);
    Ok(json!({
        "start": points[start],
        "start_value": values[start],
        "grid_points": points.len(),
        "evp_verified": verified,
        "ekeland": to_value(&r)?,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points() {
        assert_eq!(parse_point("[1, -2]", "x").unwrap(), vec![1.0, -2.0]);
        assert_eq!(parse_point("0.5", "x").unwrap(), vec![0.5]);
        assert!(parse_point("a", "x").is_err());
        assert!(parse_point("", "x").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(cli_main(["varinf", "frobnicate"]), 2);
        assert_eq!(cli_main(["varinf", "lambda"]), 2);
        assert_eq!(cli_main(["varinf", "corpus"]), 2);
        assert_eq!(cli_main(["varinf", "certify", "nonsense", "--fixture", "abs-twin"]), 2);
    }

    #[test]
    fn eval_runs() {
        assert_eq!(cli_main(["varinf", "eval", "--expr", "(abs 0)", "--at", "-1.5"]), 0);
    }
}
