//! The `halfline` command line.

use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use halfline_core::cbf::{log_grid, validate_cbf};
use halfline_core::numerics::{integrate_de_semi_infinite, laplace_of_sampled, DeRule};
use halfline_core::spectral::{check_conditions, Spectral, SpectralValue, Support};
use halfline_core::{build_model, Complex64, Eigenfunction, Model, ModelSpec, Tolerance, WhContext};
use rayon::prelude::*;

use crate::io::{parse_model, Cell, Command, Format, GridSpec, ModelArg, RunConfig, Table};
use crate::montecarlo::{simulate_replicas, write_dump, McEstimate, SubordinatorSampler};
use crate::parallel::{thread_pool, RayonExecutor, THREADS_ENV};
use crate::{Error, Result};

/// Exit status when a validation or Monte Carlo comparison fails.
pub const EXIT_CHECK_FAILED: i32 = 3;
/// Exit status for hard errors.
pub const EXIT_ERROR: i32 = 1;

const DEFAULT_TOL: f64 = 1e-6;
const DEFAULT_N: usize = 100_000;
const DEFAULT_DT: f64 = 1e-3;
const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "halfline",
    version,
    about = "Eigenfunctions, survival probabilities and heat kernels of subordinate Brownian motion on the half-line"
)]
pub struct Cli {
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the table here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Sub>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Model, e.g. `stable:1.5`, `relativistic:1`, `gamma`, `rational:5/1,1/5`, `stable:1+cp-exp`.
    #[arg(long, short, value_parser = parse_model_arg)]
    pub model: Option<ModelArg>,
    /// Absolute tolerance of the numerical integrals.
    #[arg(long)]
    pub tol: Option<f64>,
}

fn parse_model_arg(s: &str) -> Result<ModelArg> {
    parse_model(s).map(ModelArg::Spec)
}

/// Grids are `a,b,c` or `min:max:count[:lin|log]`.
#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Phase shift and normalising constant.
    Theta {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, short, value_parser = GridSpec::parse)]
        lambda: Option<GridSpec>,
    },
    /// Eigenfunction `F = sin(lambda x + theta) - G`.
    Eigenfunction {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, short, value_parser = GridSpec::parse)]
        lambda: Option<GridSpec>,
        #[arg(long, short, value_parser = GridSpec::parse)]
        x: Option<GridSpec>,
    },
    /// Closed-form against numerical Laplace transform of the eigenfunction.
    Laplace {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, short, value_parser = GridSpec::parse)]
        lambda: Option<GridSpec>,
        /// Laplace variables (default: lambda/2, lambda, 2 lambda).
        #[arg(long, value_parser = GridSpec::parse)]
        xi: Option<GridSpec>,
    },
    /// Probability of not having left the half-line by time t.
    Survival {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, short, value_parser = GridSpec::parse)]
        t: Option<GridSpec>,
        #[arg(long, short, value_parser = GridSpec::parse)]
        x: Option<GridSpec>,
    },
    /// Density of the first exit time.
    FptDensity {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, short, value_parser = GridSpec::parse)]
        t: Option<GridSpec>,
        #[arg(long, short, value_parser = GridSpec::parse)]
        x: Option<GridSpec>,
    },
    /// Transition density of the killed process.
    Heatkernel {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, short, value_parser = GridSpec::parse)]
        t: Option<GridSpec>,
        #[arg(long, short, value_parser = GridSpec::parse)]
        x: Option<GridSpec>,
        #[arg(long, short, value_parser = GridSpec::parse)]
        y: Option<GridSpec>,
    },
    /// Spectral transform of a test function: `gaussian:C,W`, `exp:R` or `tent:A,B,C`.
    Transform {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, short, value_parser = GridSpec::parse)]
        lambda: Option<GridSpec>,
        #[arg(long, short)]
        function: Option<String>,
    },
    /// Numerical self-checks; exits with status 3 when one fails.
    Validate {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, short, value_parser = GridSpec::parse)]
        lambda: Option<GridSpec>,
    },
    /// Spectral survival against Monte Carlo; exits with status 3 when |z| >= 3.
    McCompare {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, short, value_parser = GridSpec::parse)]
        t: Option<GridSpec>,
        #[arg(long, short, value_parser = GridSpec::parse)]
        x: Option<GridSpec>,
        #[arg(long, short)]
        n: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Binary dump of the simulated paths: little-endian f64 triples
        /// (position, alive, steps), one block per (t, x) in table order.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

impl Cli {
    /// The flags as a configuration to lay over the file.
    pub fn to_config(&self) -> RunConfig {
        let mut c = RunConfig {
            threads: self.threads,
            format: self.format,
            output: self.output.clone(),
            ..Default::default()
        };
        let Some(sub) = &self.command else { return c };
        let m = match sub {
            Sub::Theta { m, lambda } => {
                c.command = Some(Command::Theta);
                c.lambda = lambda.clone();
                m
            }
            Sub::Eigenfunction { m, lambda, x } => {
                c.command = Some(Command::Eigenfunction);
                c.lambda = lambda.clone();
                c.x = x.clone();
                m
            }
            Sub::Laplace { m, lambda, xi } => {
                c.command = Some(Command::Laplace);
                c.lambda = lambda.clone();
                c.xi = xi.clone();
                m
            }
            Sub::Survival { m, t, x } => {
                c.command = Some(Command::Survival);
                c.t = t.clone();
                c.x = x.clone();
                m
            }
            Sub::FptDensity { m, t, x } => {
                c.command = Some(Command::FptDensity);
                c.t = t.clone();
                c.x = x.clone();
                m
            }
            Sub::Heatkernel { m, t, x, y } => {
                c.command = Some(Command::Heatkernel);
                c.t = t.clone();
                c.x = x.clone();
                c.y = y.clone();
                m
            }
            Sub::Transform { m, lambda, function } => {
                c.command = Some(Command::Transform);
                c.lambda = lambda.clone();
                c.function = function.clone();
                m
            }
            Sub::Validate { m, lambda } => {
                c.command = Some(Command::Validate);
                c.lambda = lambda.clone();
                m
            }
            Sub::McCompare { m, t, x, n, dt, seed, dump } => {
                c.command = Some(Command::McCompare);
                c.t = t.clone();
                c.x = x.clone();
                c.n = *n;
                c.dt = *dt;
                c.seed = *seed;
                c.dump = dump.clone();
                m
            }
        };
        c.model = m.model.clone();
        c.tol = m.tol;
        c
    }
}

/// A finished run: the table and whether a check in it failed.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub failed: bool,
}

/// Parses `args` (including the program name), runs the command and writes
/// the table to `stdout` or the requested file. Returns the exit status.
pub fn main_with_args<I, T, W>(args: I, stdout: &mut W, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(&cli, stdout) {
        Ok(false) => 0,
        Ok(true) => EXIT_CHECK_FAILED,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute<W: Write>(cli: &Cli, stdout: &mut W) -> Result<bool> {
    let flags = cli.to_config();
    let cfg = match &cli.config {
        Some(path) => RunConfig::from_json_file(path)?.merged(flags),
        None => flags,
    };
    let pool = thread_pool(cfg.threads)?;
    let report = pool.install(|| run(&cfg))?;
    let format = cfg.format.unwrap_or_default();
    match &cfg.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
            report.table.write(format, BufWriter::new(f))?;
        }
        None => report.table.write(format, &mut *stdout)?,
    }
    Ok(report.failed)
}

struct Inputs {
    spec: ModelSpec,
    model: Model,
    tol: f64,
}

fn inputs(cfg: &RunConfig) -> Result<Inputs> {
    let spec = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::Config("no model given (use --model)".into()))?
        .resolve()?;
    let model = build_model(&spec)?;
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    Ok(Inputs { spec, model, tol })
}

fn grid(g: &Option<GridSpec>, name: &str) -> Result<Vec<f64>> {
    g.as_ref()
        .ok_or_else(|| Error::Config(format!("missing --{name}")))?
        .values()
}

fn grid_or(g: &Option<GridSpec>, default: f64) -> Result<Vec<f64>> {
    match g {
        Some(g) => g.values(),
        None => Ok(vec![default]),
    }
}

/// Runs one command on the current rayon pool.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    let command = cfg
        .command
        .ok_or_else(|| Error::Config("no command given (on the command line or in the configuration)".into()))?;
    let inp = inputs(cfg)?;
    let table = match command {
        Command::Theta => theta(&inp, &grid_or(&cfg.lambda, 1.0)?)?,
        Command::Eigenfunction => eigenfunction(&inp, &grid_or(&cfg.lambda, 1.0)?, &grid(&cfg.x, "x")?)?,
        Command::Laplace => laplace(&inp, &grid_or(&cfg.lambda, 1.0)?, cfg.xi.as_ref())?,
        Command::Survival => survival(&inp, &grid(&cfg.t, "t")?, &grid(&cfg.x, "x")?, false)?,
        Command::FptDensity => survival(&inp, &grid(&cfg.t, "t")?, &grid(&cfg.x, "x")?, true)?,
        Command::Heatkernel => heat_kernel(&inp, &grid(&cfg.t, "t")?, &grid(&cfg.x, "x")?, &grid(&cfg.y, "y")?)?,
        Command::Transform => {
            let f = cfg
                .function
                .as_deref()
                .ok_or_else(|| Error::Config("missing --function".into()))?;
            transform(&inp, &grid_or(&cfg.lambda, 1.0)?, f)?
        }
        Command::Validate => return validate(&inp, &grid_or(&cfg.lambda, 1.0)?),
        Command::McCompare => return mc_compare(&inp, cfg),
    };
    Ok(Report { table, failed: false })
}

fn theta(inp: &Inputs, lambdas: &[f64]) -> Result<Table> {
    let rows: Vec<(f64, f64, f64)> = lambdas
        .par_iter()
        .map(|&l| {
            let ctx = WhContext::new(&inp.model, l)?;
            Ok((l, ctx.theta()?, ctx.c_lambda()))
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["lambda", "theta", "theta_over_pi", "c_lambda"]);
    for (l, th, c) in rows {
        t.push(vec![l.into(), th.into(), (th / std::f64::consts::PI).into(), c.into()]);
    }
    Ok(t)
}

fn eigenfunction(inp: &Inputs, lambdas: &[f64], xs: &[f64]) -> Result<Table> {
    let mut t = Table::new(&["lambda", "x", "F", "sin_part", "G"]);
    for &l in lambdas {
        let ef = Eigenfunction::new(&inp.model, l)?;
        let rows: Vec<(f64, f64)> = xs
            .par_iter()
            .map(|&x| {
                if !(x >= 0.0) || !x.is_finite() {
                    return Err(Error::Config(format!("x must be finite and non-negative, got {x}")));
                }
                Ok(((l * x + ef.theta()).sin(), ef.f(x)?))
            })
            .collect::<Result<_>>()?;
        for (&x, (s, f)) in xs.iter().zip(rows) {
            t.push(vec![l.into(), x.into(), f.into(), s.into(), (s - f).into()]);
        }
    }
    Ok(t)
}

fn laplace(inp: &Inputs, lambdas: &[f64], xi: Option<&GridSpec>) -> Result<Table> {
    let mut t = Table::new(&["lambda", "xi", "closed_form", "numerical", "error_estimate", "rel_diff"]);
    for &l in lambdas {
        let ef = Eigenfunction::new(&inp.model, l)?;
        let xis = match xi {
            Some(g) => g.values()?,
            None => vec![0.5 * l, l, 2.0 * l],
        };
        let rows: Vec<(f64, f64, f64)> = xis
            .par_iter()
            .map(|&s| {
                let cf = ef.laplace_f(Complex64::new(s, 0.0))?.re;
                let num = laplace_of_sampled(|x| ef.f(x).unwrap_or(f64::NAN), s, 2.0, l, Tolerance::new(inp.tol * 1e-2, 0.0))?;
                Ok((cf, num.value, num.error_estimate))
            })
            .collect::<Result<_>>()?;
        for (&s, (cf, num, err)) in xis.iter().zip(rows) {
            t.push(vec![
                l.into(),
                s.into(),
                cf.into(),
                num.into(),
                err.into(),
                ((num - cf).abs() / cf.abs()).into(),
            ]);
        }
    }
    Ok(t)
}

fn spectral_columns(v: &SpectralValue) -> Vec<Cell> {
    vec![
        v.value.into(),
        v.error_estimate.into(),
        v.truncation.into(),
        (v.nodes as u64).into(),
        v.converged.into(),
        v.outside_proved_regime.into(),
        v.clipped.into(),
    ]
}

const SPECTRAL_COLUMNS: [&str; 6] = [
    "error_estimate",
    "truncation",
    "nodes",
    "converged",
    "outside_proved_regime",
    "clipped",
];

fn header(lead: &[&str], value: &str) -> Vec<String> {
    lead.iter()
        .copied()
        .chain([value])
        .chain(SPECTRAL_COLUMNS)
        .map(String::from)
        .collect()
}

fn survival(inp: &Inputs, ts: &[f64], xs: &[f64], density: bool) -> Result<Table> {
    let exec = RayonExecutor;
    let sp = Spectral::with_executor(&inp.model, Tolerance::absolute(inp.tol), &exec)?;
    let mut t = Table {
        columns: header(&["t", "x"], if density { "density" } else { "survival" }),
        rows: Vec::new(),
    };
    for &time in ts {
        let vals = if density { sp.fpt_density(time, xs)? } else { sp.survival(time, xs)? };
        for (&x, v) in xs.iter().zip(&vals) {
            let mut row = vec![time.into(), x.into()];
            row.extend(spectral_columns(v));
            t.rows.push(row);
        }
    }
    Ok(t)
}

fn heat_kernel(inp: &Inputs, ts: &[f64], xs: &[f64], ys: &[f64]) -> Result<Table> {
    let exec = RayonExecutor;
    let sp = Spectral::with_executor(&inp.model, Tolerance::absolute(inp.tol), &exec)?;
    let pairs: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let mut t = Table {
        columns: header(&["t", "x", "y"], "density"),
        rows: Vec::new(),
    };
    for &time in ts {
        let vals = sp.heat_kernel(time, &pairs)?;
        for (&(x, y), v) in pairs.iter().zip(&vals) {
            let mut row = vec![time.into(), x.into(), y.into()];
            row.extend(spectral_columns(v));
            t.rows.push(row);
        }
    }
    Ok(t)
}

type TestFunction = Box<dyn Fn(f64) -> f64 + Sync>;

/// `gaussian:C,W` is `exp(-((x - C) / W)^2)`, `exp:R` is `exp(-R x)` and
/// `tent:A,B,C` rises linearly from 0 at `A` to 1 at `B` and falls to 0 at `C`.
pub fn parse_test_function(s: &str) -> Result<(TestFunction, Support)> {
    let (kind, args) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("test function must look like 'gaussian:2,0.5', got '{s}'")))?;
    let nums: Vec<f64> = args
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("test function parameter '{v}' is not a number")))
        })
        .collect::<Result<_>>()?;
    let arity = |n: usize| -> Result<()> {
        if nums.len() == n && nums.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Parse(format!("'{kind}' takes {n} finite parameters, got '{args}'")))
        }
    };
    match kind {
        "gaussian" => {
            arity(2)?;
            let (c, w) = (nums[0], nums[1]);
            if !(w > 0.0) {
                return Err(Error::Parse(format!("gaussian width must be positive, got {w}")));
            }
            // exp(-u^2) < 1e-17 beyond |u| = 6.3
            let (lo, hi) = ((c - 6.3 * w).max(0.0), c + 6.3 * w);
            if hi <= 0.0 {
                return Err(Error::Parse("gaussian lies entirely on the negative half-line".into()));
            }
            // one break per width keeps every quadrature panel well resolved
            let mut breaks = vec![lo];
            breaks.extend((-6..=6).map(|k| c + k as f64 * w).filter(|&b| b > lo && b < hi));
            breaks.push(hi);
            Ok((Box::new(move |x| (-((x - c) / w).powi(2)).exp()), Support::Compact(breaks)))
        }
        "exp" => {
            arity(1)?;
            let r = nums[0];
            if !(r > 0.0) {
                return Err(Error::Parse(format!("exp rate must be positive, got {r}")));
            }
            Ok((Box::new(move |x| (-r * x).exp()), Support::Exponential { rate: r, bound: 1.0 }))
        }
        "tent" => {
            arity(3)?;
            let (a, b, c) = (nums[0], nums[1], nums[2]);
            if !(0.0 <= a && a < b && b < c) {
                return Err(Error::Parse(format!("tent needs 0 <= A < B < C, got {a},{b},{c}")));
            }
            let f = move |x: f64| {
                if x <= a || x >= c {
                    0.0
                } else if x <= b {
                    (x - a) / (b - a)
                } else {
                    (c - x) / (c - b)
                }
            };
            Ok((Box::new(f), Support::Compact(vec![a, b, c])))
        }
        other => Err(Error::Parse(format!("unknown test function '{other}'"))),
    }
}

fn transform(inp: &Inputs, lambdas: &[f64], function: &str) -> Result<Table> {
    let (f, support) = parse_test_function(function)?;
    let exec = RayonExecutor;
    let sp = Spectral::with_executor(&inp.model, Tolerance::absolute(inp.tol), &exec)?;
    let vals = sp.pi_transform(&*f, &support, lambdas)?;
    let mut t = Table::new(&["lambda", "value", "error_estimate", "converged"]);
    for (&l, v) in lambdas.iter().zip(vals) {
        t.push(vec![l.into(), v.value.into(), v.error_estimate.into(), v.converged.into()]);
    }
    Ok(t)
}

struct Row {
    check: String,
    lambda: Option<f64>,
    status: &'static str,
    worst: f64,
    limit: f64,
    note: String,
}

impl Row {
    fn new(check: &str, lambda: Option<f64>, worst: f64, limit: f64) -> Self {
        Row {
            check: check.into(),
            lambda,
            status: if worst <= limit { "pass" } else { "fail" },
            worst,
            limit,
            note: String::new(),
        }
    }
}

fn eigen_checks(model: &Model, l: f64) -> Result<Vec<Row>> {
    let ef = Eigenfunction::new(model, l)?;
    if let Some(&xi) = ef.atoms().first() {
        return Ok(vec![Row {
            check: "eigenfunction".into(),
            lambda: Some(l),
            status: "skip",
            worst: f64::NAN,
            limit: f64::NAN,
            note: format!("density has an atom at xi = {xi:.12}"),
        }]);
    }
    let mut rows = Vec::new();
    let th = ef.theta();
    rows.push(Row::new("theta in [0, pi/2)", Some(l), (-th).max(th - FRAC_PI_2 + 1e-300).max(0.0), 0.0));

    let ctx = ef.context();
    let mut wh = 0.0f64;
    for xi in log_grid(1e-2 * l, 1e2 * l, 20) {
        let d = ctx.psi_dagger_boundary(xi)?;
        wh = wh.max((d.norm_sqr() / ctx.psi_lambda(xi * xi) - 1.0).abs());
    }
    rows.push(Row::new("Wiener-Hopf factorisation", Some(l), wh, 1e-6));

    let cf = ef.laplace_f(Complex64::new(l, 0.0))?.re;
    let num = laplace_of_sampled(|x| ef.f(x).unwrap_or(f64::NAN), l, 2.0, l, Tolerance::new(1e-9, 0.0))?;
    rows.push(Row::new("Laplace transform of F", Some(l), (num.value - cf).abs() / cf.abs(), 1e-4));

    let rule = DeRule::default();
    let mass = integrate_de_semi_infinite(|x| ef.g(x).map(|r| r.value).unwrap_or(f64::NAN), 0.0, 1.0 / l, Tolerance::new(1e-10, 1e-9), &rule)?;
    rows.push(Row::new("mass of G", Some(l), (mass.value - ef.g_mass()).abs(), 1e-5));

    let st = th.sin();
    let mut bound = 0.0f64;
    for x in log_grid(1e-6 / l, 1e3 / l, 28) {
        let g = ef.g(x)?.value;
        bound = bound.max(-g).max(g - st);
    }
    rows.push(Row::new("0 <= G <= sin theta", Some(l), bound.max(0.0), 1e-10));
    Ok(rows)
}

fn validate(inp: &Inputs, lambdas: &[f64]) -> Result<Report> {
    let mut rows = Vec::new();
    let cbf = validate_cbf(&inp.model, &log_grid(1e-6, 1e6, 121));
    for c in &cbf.checks {
        let mut r = Row::new(&c.name, None, c.worst, if c.passed { c.worst } else { 0.0 });
        r.status = if c.passed { "pass" } else { "fail" };
        r.limit = f64::NAN;
        rows.push(r);
    }
    let per_lambda: Vec<Vec<Row>> = lambdas
        .par_iter()
        .map(|&l| eigen_checks(&inp.model, l))
        .collect::<Result<_>>()?;
    rows.extend(per_lambda.into_iter().flatten());
    let cond = check_conditions(&inp.model, 1.0)?;
    rows.push(Row {
        check: "conditions at t = 1".into(),
        lambda: None,
        status: "info",
        worst: cond.a1_sup,
        limit: 2.0,
        note: format!(
            "a1 {} a2 {} a3 {} pdt {} fptd {} fptd(all t) {}",
            cond.a1_ok, cond.a2_ok, cond.a3_ok, cond.pdt_ok, cond.fptd_ok, cond.fptd_all_t_ok
        ),
    });
    let failed = rows.iter().any(|r| r.status == "fail");
    let mut t = Table::new(&["model", "check", "lambda", "status", "worst", "limit", "note"]);
    let name = crate::io::model_string(&inp.spec);
    for r in rows {
        t.push(vec![
            name.clone().into(),
            r.check.into(),
            r.lambda.map_or(Cell::Text(String::new()), Cell::Num),
            r.status.into(),
            r.worst.into(),
            r.limit.into(),
            r.note.into(),
        ]);
    }
    Ok(Report { table: t, failed })
}

fn mc_compare(inp: &Inputs, cfg: &RunConfig) -> Result<Report> {
    let ts = grid(&cfg.t, "t")?;
    let xs = grid(&cfg.x, "x")?;
    let n = cfg.n.unwrap_or(DEFAULT_N);
    let dt = cfg.dt.unwrap_or(DEFAULT_DT);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let sampler = SubordinatorSampler::from_spec(&inp.spec)?;
    let exec = RayonExecutor;
    let sp = Spectral::with_executor(&inp.model, Tolerance::absolute(inp.tol), &exec)?;
    let mut dump = match &cfg.dump {
        Some(p) => Some(BufWriter::new(
            File::create(p).map_err(|e| Error::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => None,
    };
    let mut t = Table::new(&[
        "t",
        "x",
        "spectral",
        "spectral_error",
        "mc",
        "mc_stderr",
        "z",
        "n",
        "dt",
        "seed",
        "within_3_stderr",
    ]);
    let mut failed = false;
    for &time in &ts {
        let spectral = sp.survival(time, &xs)?;
        for (&x, s) in xs.iter().zip(&spectral) {
            let (paths, _) = simulate_replicas(&sampler, x, time, dt, n, seed)?;
            if let Some(w) = dump.as_mut() {
                write_dump(&mut *w, &paths)?;
            }
            let ind: Vec<f64> = paths.iter().map(|p| if p.alive { 1.0 } else { 0.0 }).collect();
            let est = McEstimate::from_samples(&ind, dt, seed);
            let z = est.z_score(s.value);
            let ok = z.abs() < 3.0;
            failed |= !ok;
            t.push(vec![
                time.into(),
                x.into(),
                s.value.into(),
                s.error_estimate.into(),
                est.value.into(),
                est.stderr.into(),
                z.into(),
                (n as u64).into(),
                dt.into(),
                seed.into(),
                ok.into(),
            ]);
        }
    }
    Ok(Report { table: t, failed })
}
