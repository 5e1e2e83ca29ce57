//! Model strings, grids, run configuration files and table output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use halfline_core::{ModelSpec, RationalTerm};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parses a compact model description.
///
/// | string                   | exponent                          |
/// |--------------------------|-----------------------------------|
/// | `brownian`               | `xi`                              |
/// | `stable:A`               | `xi^(A/2)`                        |
/// | `relativistic:M`         | `sqrt(M^2 + xi) - M`              |
/// | `stable-drift:A,B`       | `xi^(A/2) + B xi`                 |
/// | `gamma`                  | `log(1 + xi)`                     |
/// | `log-log`                | `log(1 + log(1 + xi))`            |
/// | `cp-exp`                 | `xi / (1 + xi)`                   |
/// | `rational:W/P,W/P,...`   | `sum W xi / (xi + P)`             |
/// | `scaled:C:MODEL`         | `C` times a single model          |
/// | `MODEL+MODEL+...`        | sum of models                     |
pub fn parse_model(s: &str) -> Result<ModelSpec> {
    let s = s.trim();
    let terms: Vec<&str> = s.split('+').collect();
    let spec = if terms.len() > 1 {
        ModelSpec::Sum {
            terms: terms.iter().map(|t| parse_term(t)).collect::<Result<_>>()?,
        }
    } else {
        parse_term(s)?
    };
    halfline_core::build_model(&spec)?;
    Ok(spec)
}

fn number(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: expected a number, got '{s}'")))
}

fn parse_term(s: &str) -> Result<ModelSpec> {
    let s = s.trim();
    let (kind, args) = match s.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (s, None),
    };
    let need = |what: &str| -> Result<&str> {
        args.ok_or_else(|| Error::Parse(format!("model '{kind}' needs {what}, e.g. '{kind}:{}'", example(kind))))
    };
    let none = || -> Result<()> {
        match args {
            Some(a) => Err(Error::Parse(format!("model '{kind}' takes no parameters, got '{a}'"))),
            None => Ok(()),
        }
    };
    Ok(match kind {
        "brownian" => {
            none()?;
            ModelSpec::brownian()
        }
        "stable" => ModelSpec::Stable { alpha: number(need("alpha")?, "stable alpha")? },
        "relativistic" => ModelSpec::Relativistic { m: number(need("m")?, "relativistic mass")? },
        "stable-drift" => {
            let a = need("alpha,beta")?;
            let (alpha, beta) = a
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("stable-drift needs 'alpha,beta', got '{a}'")))?;
            ModelSpec::StablePlusDrift {
                alpha: number(alpha, "stable alpha")?,
                beta: number(beta, "drift")?,
            }
        }
        "gamma" => {
            none()?;
            ModelSpec::Gamma
        }
        "log-log" => {
            none()?;
            ModelSpec::LogLog
        }
        "cp-exp" => {
            none()?;
            ModelSpec::CpExponential
        }
        "rational" => {
            let terms = need("weight/pole pairs")?
                .split(',')
                .map(|p| {
                    let (w, q) = p
                        .split_once('/')
                        .ok_or_else(|| Error::Parse(format!("rational term must be 'weight/pole', got '{p}'")))?;
                    Ok(RationalTerm {
                        weight: number(w, "rational weight")?,
                        pole: number(q, "rational pole")?,
                    })
                })
                .collect::<Result<_>>()?;
            ModelSpec::Rational { terms }
        }
        "scaled" => {
            let a = need("factor and model")?;
            let (c, inner) = a
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("scaled needs 'factor:model', got '{a}'")))?;
            ModelSpec::Scaled {
                factor: number(c, "scale factor")?,
                inner: Box::new(parse_term(inner)?),
            }
        }
        other => return Err(Error::Parse(format!("unknown model '{other}'"))),
    })
}

fn example(kind: &str) -> &'static str {
    match kind {
        "stable" => "1.5",
        "relativistic" => "1",
        "stable-drift" => "1,0.5",
        "rational" => "5/1,1/5",
        "scaled" => "2:gamma",
        _ => "...",
    }
}

/// Inverse of [`parse_model`].
pub fn model_string(spec: &ModelSpec) -> String {
    match spec {
        ModelSpec::Stable { alpha } => format!("stable:{alpha}"),
        ModelSpec::Relativistic { m } => format!("relativistic:{m}"),
        ModelSpec::StablePlusDrift { alpha, beta } => format!("stable-drift:{alpha},{beta}"),
        ModelSpec::Gamma => "gamma".into(),
        ModelSpec::LogLog => "log-log".into(),
        ModelSpec::CpExponential => "cp-exp".into(),
        ModelSpec::Rational { terms } => {
            let t: Vec<String> = terms.iter().map(|t| format!("{}/{}", t.weight, t.pole)).collect();
            format!("rational:{}", t.join(","))
        }
        ModelSpec::Sum { terms } => terms.iter().map(model_string).collect::<Vec<_>>().join("+"),
        ModelSpec::Scaled { factor, inner } => format!("scaled:{factor}:{}", model_string(inner)),
    }
}

/// A model given either as a string or as the tagged JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelArg {
    Text(String),
    Spec(ModelSpec),
}

impl ModelArg {
    pub fn resolve(&self) -> Result<ModelSpec> {
        match self {
            ModelArg::Text(s) => parse_model(s),
            ModelArg::Spec(s) => {
                halfline_core::build_model(s)?;
                Ok(s.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Lin,
    Log,
}

/// Sample points: an explicit list or `count` points from `min` to `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range {
        min: f64,
        max: f64,
        count: usize,
        #[serde(default)]
        scale: Scale,
    },
}

impl GridSpec {
    /// `a,b,c` or `min:max:count[:lin|log]`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() < 3 || parts.len() > 4 {
                return Err(Error::Parse(format!("grid must be 'min:max:count[:lin|log]', got '{s}'")));
            }
            let count = parts[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("grid count must be a positive integer, got '{}'", parts[2])))?;
            let scale = match parts.get(3).map(|p| p.trim()) {
                None | Some("lin") => Scale::Lin,
                Some("log") => Scale::Log,
                Some(o) => return Err(Error::Parse(format!("grid scale must be 'lin' or 'log', got '{o}'"))),
            };
            Ok(GridSpec::Range {
                min: number(parts[0], "grid min")?,
                max: number(parts[1], "grid max")?,
                count,
                scale,
            })
        } else {
            Ok(GridSpec::List(
                s.split(',').map(|v| number(v, "grid value")).collect::<Result<_>>()?,
            ))
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range { min, max, count, scale } => {
                if *count == 0 {
                    return Err(Error::Config("grid count must be at least 1".into()));
                }
                if !(min.is_finite() && max.is_finite() && min <= max) {
                    return Err(Error::Config(format!("grid needs finite min <= max, got {min}..{max}")));
                }
                if *count == 1 {
                    vec![*min]
                } else {
                    let step = 1.0 / (*count - 1) as f64;
                    match scale {
                        Scale::Lin => (0..*count).map(|i| min + (max - min) * i as f64 * step).collect(),
                        Scale::Log => {
                            if !(*min > 0.0) {
                                return Err(Error::Config(format!("log grid needs min > 0, got {min}")));
                            }
                            let (a, b) = (min.ln(), max.ln());
                            (0..*count).map(|i| (a + (b - a) * i as f64 * step).exp()).collect()
                        }
                    }
                }
            }
        };
        if v.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::Config(format!("grid value {x} is not finite")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Theta,
    Eigenfunction,
    Laplace,
    Survival,
    FptDensity,
    Heatkernel,
    Transform,
    Validate,
    McCompare,
}

/// Everything a run needs. Every field is optional so that a configuration
/// file and command-line flags can be merged, flags taking precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub model: Option<ModelArg>,
    pub lambda: Option<GridSpec>,
    pub x: Option<GridSpec>,
    pub y: Option<GridSpec>,
    pub t: Option<GridSpec>,
    pub xi: Option<GridSpec>,
    /// Test function for `transform`, e.g. `gaussian:2,0.5`.
    pub function: Option<String>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    /// Binary dump of Monte Carlo replicas.
    pub dump: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: RunConfig) -> RunConfig {
        RunConfig {
            command: over.command.or(self.command),
            model: over.model.or(self.model),
            lambda: over.lambda.or(self.lambda),
            x: over.x.or(self.x),
            y: over.y.or(self.y),
            t: over.t.or(self.t),
            xi: over.xi.or(self.xi),
            function: over.function.or(self.function),
            tol: over.tol.or(self.tol),
            seed: over.seed.or(self.seed),
            n: over.n.or(self.n),
            dt: over.dt.or(self.dt),
            output: over.output.or(self.output),
            format: over.format.or(self.format),
            threads: over.threads.or(self.threads),
            dump: over.dump.or(self.dump),
        }
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A finite number with 17 significant digits: positional notation for
/// moderate magnitudes, scientific otherwise.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-3..15).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, v)
    } else {
        sci
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|c| match c {
                Cell::Num(v) => format_number(*v),
                Cell::Int(v) => v.to_string(),
                Cell::Bool(b) => b.to_string(),
                Cell::Text(s) => s.clone(),
            }))?;
        }
        out.flush()?;
        Ok(())
    }

    /// `{"columns": [...], "rows": [[...], ...]}`; non-finite numbers are `null`.
    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::from("{\n  \"columns\": ");
        s.push_str(&serde_json::to_string(&self.columns)?);
        s.push_str(",\n  \"rows\": [");
        for (i, row) in self.rows.iter().enumerate() {
            s.push_str(if i == 0 { "\n    [" } else { ",\n    [" });
            for (j, c) in row.iter().enumerate() {
                if j > 0 {
                    s.push_str(", ");
                }
                match c {
                    Cell::Num(v) if v.is_finite() => s.push_str(&format_number(*v)),
                    Cell::Num(_) => s.push_str("null"),
                    Cell::Int(v) => write!(s, "{v}").expect("write to string"),
                    Cell::Bool(b) => write!(s, "{b}").expect("write to string"),
                    Cell::Text(t) => s.push_str(&serde_json::to_string(t)?),
                }
            }
            s.push(']');
        }
        s.push_str(if self.rows.is_empty() { "]\n}\n" } else { "\n  ]\n}\n" });
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn write<W: Write>(&self, format: Format, w: W) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(w),
            Format::Json => self.write_json(w),
        }
    }
}
