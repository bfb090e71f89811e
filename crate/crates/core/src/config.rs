//! Flat `key = value` run configuration.
//!
//! ```text
//! # canonical problem
//! dim = 1
//! lower = 0
//! upper = 1
//! n = 1023
//! f = constant:1
//! a = 1
//! b = 1
//! mu = 0.1
//! ```
//!
//! Keys: `dim`, `lower`, `upper`, `n`, `lower2`, `upper2`, `n2` (2D only),
//! `f` (`constant:<c>`, `profile:<name>` or `file:<path>`), `a`, `b`, `mu`,
//! `mu_min`, `mu_max`, `mu_steps`, `cg_tol`, `double_root_tol` (relative to
//! `mu_crit`) and `out_dir`. Exactly one of `mu` or the `mu_min`/`mu_max`
//! range must be given.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::elliptic::DEFAULT_POISSON_TOL;
use crate::grid::{Axis, DomainSpec, GridField};
use crate::reduction::DEFAULT_DOUBLE_ROOT_REL_TOL;

const KEYS: &[&str] = &[
    "dim",
    "lower",
    "upper",
    "n",
    "lower2",
    "upper2",
    "n2",
    "f",
    "a",
    "b",
    "mu",
    "mu_min",
    "mu_max",
    "mu_steps",
    "cg_tol",
    "double_root_tol",
    "out_dir",
];

const DEFAULT_N: usize = 255;
const DEFAULT_MU_STEPS: usize = 81;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid {field}: {message}")]
    Validation {
        field: &'static str,
        message: String,
    },

    #[error("cannot read source file {path}: {message}")]
    SourceFile { path: PathBuf, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Product of `sin(pi (x - lower) / L)` over the axes.
    Sine,
    /// Product of `4 (x - lower)(upper - x) / L^2` over the axes.
    Parabola,
}

impl Profile {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "sine" => Some(Profile::Sine),
            "parabola" => Some(Profile::Parabola),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Profile::Sine => "sine",
            Profile::Parabola => "parabola",
        }
    }

    fn eval(&self, axis: &Axis, x: f64) -> f64 {
        let s = (x - axis.lower) / axis.length();
        match self {
            Profile::Sine => (PI * s).sin(),
            Profile::Parabola => 4.0 * s * (1.0 - s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Constant(f64),
    Profile(Profile),
    /// One value per line, row-major interior ordering.
    File(PathBuf),
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Constant(c) => write!(f, "constant:{c}"),
            SourceSpec::Profile(p) => write!(f, "profile:{}", p.name()),
            SourceSpec::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuSpec {
    Single(f64),
    Range { min: f64, max: f64, steps: usize },
}

impl MuSpec {
    /// Sample points of a range, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        match *self {
            MuSpec::Single(mu) => vec![mu],
            MuSpec::Range { min, max, steps } => {
                let last = (steps - 1) as f64;
                // Weighted form keeps the grid exactly antisymmetric when min = -max.
                (0..steps)
                    .map(|k| ((last - k as f64) * min + k as f64 * max) / last)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub source: SourceSpec,
    pub a: f64,
    pub b: f64,
    pub mu: MuSpec,
    pub cg_tol: f64,
    /// Double-root window relative to `mu_crit`.
    pub double_root_tol: f64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn source_field(&self) -> Result<GridField, ConfigError> {
        let domain = Arc::new(self.domain.clone());
        match &self.source {
            SourceSpec::Constant(c) => Ok(GridField::sample(domain, |_, _| *c)),
            SourceSpec::Profile(profile) => {
                let axes = self.domain.axes().to_vec();
                Ok(GridField::sample(domain, move |x, y| {
                    let mut value = profile.eval(&axes[0], x);
                    if let Some(axis) = axes.get(1) {
                        value *= profile.eval(axis, y);
                    }
                    value
                }))
            }
            SourceSpec::File(path) => {
                let io_err = |message: String| ConfigError::SourceFile {
                    path: path.clone(),
                    message,
                };
                let text = std::fs::read_to_string(path).map_err(|e| io_err(e.to_string()))?;
                let values = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .enumerate()
                    .map(|(k, l)| {
                        l.parse::<f64>()
                            .map_err(|_| io_err(format!("value {} is not a number: {l:?}", k + 1)))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                GridField::from_values(domain, values).map_err(|e| io_err(e.to_string()))
            }
        }
    }
}

fn parse_f64(
    entries: &BTreeMap<&str, (usize, &str)>,
    key: &'static str,
) -> Result<Option<f64>, ConfigError> {
    entries
        .get(key)
        .map(|&(line, raw)| {
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ConfigError::Parse {
                    line,
                    message: format!("{key}: expected a number, got {raw:?}"),
                })
        })
        .transpose()
}

fn parse_usize(
    entries: &BTreeMap<&str, (usize, &str)>,
    key: &'static str,
) -> Result<Option<usize>, ConfigError> {
    entries
        .get(key)
        .map(|&(line, raw)| {
            raw.parse::<usize>().map_err(|_| ConfigError::Parse {
                line,
                message: format!("{key}: expected a non-negative integer, got {raw:?}"),
            })
        })
        .transpose()
}

fn parse_source(line: usize, raw: &str) -> Result<SourceSpec, ConfigError> {
    let err = |message: String| ConfigError::Parse { line, message };
    let (kind, arg) = raw.split_once(':').ok_or_else(|| {
        err(format!(
            "f: expected constant:<c>, profile:<name> or file:<path>, got {raw:?}"
        ))
    })?;
    match kind.trim() {
        "constant" => {
            let c: f64 = arg
                .trim()
                .parse()
                .map_err(|_| err(format!("f: bad constant {arg:?}")))?;
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(
                    "f",
                    format!("constant source must be positive, got {c}"),
                ));
            }
            Ok(SourceSpec::Constant(c))
        }
        "profile" => Profile::parse(arg.trim())
            .map(SourceSpec::Profile)
            .ok_or_else(|| {
                invalid(
                    "f",
                    format!("unknown profile {:?} (known: sine, parabola)", arg.trim()),
                )
            }),
        "file" if !arg.trim().is_empty() => Ok(SourceSpec::File(PathBuf::from(arg.trim()))),
        _ => Err(err(format!("f: unknown source kind {kind:?}"))),
    }
}

fn positive(field: &'static str, value: f64) -> Result<f64, ConfigError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(field, format!("must be positive, got {value}")))
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected key = value, got {content:?}"),
        })?;
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(ConfigError::Parse {
                line,
                message: format!("unknown key {key:?}"),
            });
        };
        if entries.insert(known, (line, value.trim())).is_some() {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key {key:?}"),
            });
        }
    }

    let dim = parse_usize(&entries, "dim")?.unwrap_or(1);
    if dim != 1 && dim != 2 {
        return Err(invalid("dim", format!("must be 1 or 2, got {dim}")));
    }
    if dim == 1 {
        for key in ["lower2", "upper2", "n2"] {
            if entries.contains_key(key) {
                return Err(invalid("dim", format!("{key} is only valid when dim = 2")));
            }
        }
    }

    let n = parse_usize(&entries, "n")?.unwrap_or(DEFAULT_N);
    if n < 3 {
        return Err(invalid(
            "n",
            format!("need at least 3 interior nodes, got {n}"),
        ));
    }
    let mut axes = vec![Axis {
        lower: parse_f64(&entries, "lower")?.unwrap_or(0.0),
        upper: parse_f64(&entries, "upper")?.unwrap_or(1.0),
        n,
    }];
    if dim == 2 {
        let n2 = parse_usize(&entries, "n2")?.unwrap_or(n);
        if n2 < 3 {
            return Err(invalid(
                "n2",
                format!("need at least 3 interior nodes, got {n2}"),
            ));
        }
        axes.push(Axis {
            lower: parse_f64(&entries, "lower2")?.unwrap_or(0.0),
            upper: parse_f64(&entries, "upper2")?.unwrap_or(1.0),
            n: n2,
        });
    }
    let domain = DomainSpec::new(axes).map_err(|e| invalid("domain", e.to_string()))?;

    let source = match entries.get("f") {
        Some(&(line, raw)) => parse_source(line, raw)?,
        None => SourceSpec::Constant(1.0),
    };

    let a = positive("a", parse_f64(&entries, "a")?.unwrap_or(1.0))?;
    let b = positive("b", parse_f64(&entries, "b")?.unwrap_or(1.0))?;
    let cg_tol = parse_f64(&entries, "cg_tol")?.unwrap_or(DEFAULT_POISSON_TOL);
    if !(cg_tol > 0.0 && cg_tol < 1.0) {
        return Err(invalid(
            "cg_tol",
            format!("must lie in (0, 1), got {cg_tol}"),
        ));
    }
    let double_root_tol =
        parse_f64(&entries, "double_root_tol")?.unwrap_or(DEFAULT_DOUBLE_ROOT_REL_TOL);
    if !(double_root_tol > 0.0) {
        return Err(invalid(
            "double_root_tol",
            format!("must be positive, got {double_root_tol}"),
        ));
    }

    let single = parse_f64(&entries, "mu")?;
    let range_given = ["mu_min", "mu_max", "mu_steps"]
        .iter()
        .any(|k| entries.contains_key(k));
    let mu = match (single, range_given) {
        (Some(_), true) => {
            return Err(invalid(
                "mu",
                "give either mu or mu_min/mu_max/mu_steps, not both",
            ));
        }
        (Some(mu), false) => MuSpec::Single(mu),
        (None, true) => {
            let min = parse_f64(&entries, "mu_min")?.ok_or_else(|| invalid("mu_min", "missing"))?;
            let max = parse_f64(&entries, "mu_max")?.ok_or_else(|| invalid("mu_max", "missing"))?;
            let steps = parse_usize(&entries, "mu_steps")?.unwrap_or(DEFAULT_MU_STEPS);
            if !(min < max) {
                return Err(invalid(
                    "mu_max",
                    format!("need mu_min < mu_max, got [{min}, {max}]"),
                ));
            }
            if steps < 2 {
                return Err(invalid(
                    "mu_steps",
                    format!("need at least 2 steps, got {steps}"),
                ));
            }
            MuSpec::Range { min, max, steps }
        }
        (None, false) => return Err(invalid("mu", "missing: give mu or mu_min/mu_max")),
    };

    let out_dir = entries
        .get("out_dir")
        .map(|&(_, raw)| PathBuf::from(raw))
        .unwrap_or_else(|| PathBuf::from("out"));

    Ok(RunConfig {
        domain,
        source,
        a,
        b,
        mu,
        cg_tol,
        double_root_tol,
        out_dir,
    })
}
