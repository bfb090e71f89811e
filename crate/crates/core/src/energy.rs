//! The energy functional `I(u) = a/2 |u|^2 - b/4 |u|^4 - mu (f, u)`, its
//! derivative, and the closed-form thresholds that organize its critical
//! levels.

use std::fmt;

use crate::elliptic::validate_source;
use crate::error::{require_positive, Error, Result};
use crate::grid::{h1_inner, l2_inner, GridField};

#[derive(Debug, Clone)]
pub struct ProblemParams {
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub f: GridField,
}

impl ProblemParams {
    pub fn new(a: f64, b: f64, mu: f64, f: GridField) -> Result<Self> {
        require_positive("a", a)?;
        require_positive("b", b)?;
        if !mu.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: "must be finite".into(),
            });
        }
        validate_source(&f)?;
        Ok(Self { a, b, mu, f })
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }

    /// Absolute tolerance for comparing energy levels.
    pub fn energy_tol(&self) -> f64 {
        energy_tol(self.a, self.b)
    }
}

pub(crate) fn energy_tol(a: f64, b: f64) -> f64 {
    1e-10 * (a * a / b).max(1.0)
}

pub fn energy_eval(p: &ProblemParams, u: &GridField) -> Result<f64> {
    let s = h1_inner(u, u)?;
    let linear = l2_inner(&p.f, u)?;
    Ok(0.5 * p.a * s - 0.25 * p.b * s * s - p.mu * linear)
}

/// `<I'(u), v> = (a - b |u|^2) <u, v> - mu (f, v)`.
pub fn gateaux(p: &ProblemParams, u: &GridField, v: &GridField) -> Result<f64> {
    let s = h1_inner(u, u)?;
    Ok((p.a - p.b * s) * h1_inner(u, v)? - p.mu * l2_inner(&p.f, v)?)
}

/// `|3b/4 |u|^4 - a/2 |u|^2 - I(u)|`, which equals `|<I'(u), u>|` and
/// vanishes at critical points.
pub fn critical_identity_residual(p: &ProblemParams, u: &GridField) -> Result<f64> {
    let s = h1_inner(u, u)?;
    Ok((0.75 * p.b * s * s - 0.5 * p.a * s - energy_eval(p, u)?).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsCase {
    NoSequence,
    LowBand,
    MidBand,
    NoncompactLevel,
    HighBand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsClassification {
    pub case: PsCase,
    /// Candidate values of `lim |u_n|^2`.
    pub limit_norms_sq: Vec<f64>,
}

/// Candidate squared norms of Palais-Smale sequences at level `c`, the
/// roots `a/(3b) (1 +- sqrt(1 + 12 b c / a^2))` of `3b/4 s^2 - a/2 s = c`.
///
/// Level comparisons use the absolute tolerance `1e-10 max(1, a^2/b)`.
pub fn ps_limit_norms(a: f64, b: f64, c: f64) -> PsClassification {
    let tol = energy_tol(a, b);
    let floor = -a * a / (12.0 * b);
    let noncompact = a * a / (4.0 * b);
    let base = a / (3.0 * b);
    let root = || (1.0 + 12.0 * b * c / (a * a)).max(0.0).sqrt();

    if c < floor - tol {
        return PsClassification {
            case: PsCase::NoSequence,
            limit_norms_sq: vec![],
        };
    }
    if c <= floor + tol {
        return PsClassification {
            case: PsCase::LowBand,
            limit_norms_sq: vec![base],
        };
    }
    if c <= tol {
        let r = root();
        let lower = if c.abs() <= tol {
            0.0
        } else {
            base * (1.0 - r)
        };
        let upper = base * (1.0 + r);
        return PsClassification {
            case: PsCase::LowBand,
            limit_norms_sq: vec![lower, upper],
        };
    }
    if (c - noncompact).abs() <= tol {
        return PsClassification {
            case: PsCase::NoncompactLevel,
            limit_norms_sq: vec![a / b],
        };
    }
    let case = if c < noncompact {
        PsCase::MidBand
    } else {
        PsCase::HighBand
    };
    PsClassification {
        case,
        limit_norms_sq: vec![base * (1.0 + root())],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    /// `a/(3b) < 2a/(3b) < a/b < 4a/(3b)`.
    pub norm_bands: [f64; 4],
    /// `-a^2/(12b) < 0 < a^2/(9b) < a^2/(4b) < a^2/b`.
    pub energy_levels: [f64; 5],
    pub mountain_radius: f64,
    pub mountain_height: f64,
}

pub fn thresholds(a: f64, b: f64) -> ThresholdTable {
    let band = a / b;
    let level = a * a / b;
    ThresholdTable {
        norm_bands: [band / 3.0, 2.0 * band / 3.0, band, 4.0 * band / 3.0],
        energy_levels: [-level / 12.0, 0.0, level / 9.0, level / 4.0, level],
        mountain_radius: (2.0 * band / 3.0).sqrt(),
        mountain_height: level / 9.0,
    }
}

/// Squared-norm band of a state relative to the threshold table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormBand {
    /// `|u|^2 < a/(3b)`
    Inner,
    /// `a/(3b) <= |u|^2 < 2a/(3b)`
    Lower,
    /// `2a/(3b) <= |u|^2 < a/b`
    Upper,
    /// `a/b <= |u|^2 < 4a/(3b)`
    Beyond,
    /// `|u|^2 >= 4a/(3b)`
    Outer,
}

impl NormBand {
    pub fn classify(table: &ThresholdTable, norm_sq: f64) -> Self {
        let [third, two_thirds, one, four_thirds] = table.norm_bands;
        if norm_sq < third {
            NormBand::Inner
        } else if norm_sq < two_thirds {
            NormBand::Lower
        } else if norm_sq < one {
            NormBand::Upper
        } else if norm_sq < four_thirds {
            NormBand::Beyond
        } else {
            NormBand::Outer
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NormBand::Inner => "(0,a/3b)",
            NormBand::Lower => "[a/3b,2a/3b)",
            NormBand::Upper => "[2a/3b,a/b)",
            NormBand::Beyond => "[a/b,4a/3b)",
            NormBand::Outer => "[4a/3b,inf)",
        }
    }
}

impl fmt::Display for NormBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevConstants {
    pub mu_star1: f64,
    pub mu_star: f64,
    pub r_bound: f64,
}

/// Closed-form thresholds that need the Sobolev constant `s_const` and the
/// dual norm `norm_f` of the source. Neither is computed here.
pub fn sobolev_constants(a: f64, b: f64, s_const: f64, norm_f: f64, mu: f64) -> SobolevConstants {
    SobolevConstants {
        mu_star1: a / (18.0 * b) * (6.0 * a * b * s_const).sqrt() / norm_f,
        mu_star: a / (72.0 * b) * (3.0 * a * b * s_const).sqrt() / norm_f,
        r_bound: 2.0 / b
            * (a + (a * a + b * mu * mu / (2.0 * a * s_const) * norm_f * norm_f).sqrt()),
    }
}
