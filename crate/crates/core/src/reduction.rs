//! Scalar algebra of the reduction `u = t U`.
//!
//! Every solution of the nonlocal problem is a multiple `t U` of the Poisson
//! solution, and `t` solves `g(t) = (a - b alpha t^2) t - mu = 0`. This module
//! finds those roots in closed form and classifies them against the
//! stationary points `t_m = -t_M`, `t_M = sqrt(a / (3 b alpha))`.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{require_positive, Error, Result};
use crate::grid::{h1_inner, GridField};

/// Default relative width of the double-root window around `mu_crit`.
pub const DEFAULT_DOUBLE_ROOT_REL_TOL: f64 = 1e-10;

pub fn g_eval(a: f64, b: f64, alpha: f64, mu: f64, t: f64) -> f64 {
    (a - b * alpha * t * t) * t - mu
}

fn g_prime(a: f64, b: f64, alpha: f64, t: f64) -> f64 {
    a - 3.0 * b * alpha * t * t
}

/// Returns `(t_m, t_M)`, the local minimum and maximum of `g`.
pub fn stationary_points(a: f64, b: f64, alpha: f64) -> (f64, f64) {
    let t_max = (a / (3.0 * b * alpha)).sqrt();
    (-t_max, t_max)
}

/// The critical parameter `2 a sqrt(3ab) / (9 b |U|)`, equal to `g(t_M) + mu`.
pub fn mu_crit(a: f64, b: f64, norm_u: f64) -> f64 {
    2.0 * a * (3.0 * a * b).sqrt() / (9.0 * b * norm_u)
}

/// The eigenvalue-based lower estimate `2 a lambda1 sqrt(3ab) / (9 b |f|_2)`
/// exactly as derived from `|U|^{-1} >= lambda1 |f|_2^{-1}`.
pub fn mu_crit_lower_bound(a: f64, b: f64, lambda1: f64, norm_f_l2: f64) -> f64 {
    2.0 * a * lambda1 * (3.0 * a * b).sqrt() / (9.0 * b * norm_f_l2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Three,
    Two,
    One,
    /// `mu = 0`: the roots along the `U` ray are reported but the problem
    /// has a whole sphere of solutions.
    MuZero,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Three => "three",
            Regime::Two => "two",
            Regime::One => "one",
            Regime::MuZero => "mu-zero",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Position of a root relative to the stationary points `-t_M < t_M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bracket {
    Below,
    Between,
    Above,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicRoots {
    /// Distinct real roots in ascending order.
    pub roots: Vec<f64>,
    pub multiplicity: Vec<u8>,
    pub brackets: Vec<Bracket>,
    pub regime: Regime,
}

impl CubicRoots {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    fn negated(&self) -> Self {
        let flip = |b: &Bracket| match b {
            Bracket::Below => Bracket::Above,
            Bracket::Above => Bracket::Below,
            Bracket::Between => Bracket::Between,
        };
        Self {
            roots: self.roots.iter().rev().map(|t| -t).collect(),
            multiplicity: self.multiplicity.iter().rev().copied().collect(),
            brackets: self.brackets.iter().rev().map(flip).collect(),
            regime: self.regime,
        }
    }
}

fn polish(a: f64, b: f64, alpha: f64, mu: f64, t0: f64) -> f64 {
    let mut best = t0;
    let mut best_res = g_eval(a, b, alpha, mu, t0).abs();
    let mut t = t0;
    for step in 0..6 {
        let slope = g_prime(a, b, alpha, t);
        if slope == 0.0 {
            break;
        }
        t -= g_eval(a, b, alpha, mu, t) / slope;
        let res = g_eval(a, b, alpha, mu, t).abs();
        if res < best_res {
            best = t;
            best_res = res;
        } else if step >= 1 {
            break;
        }
    }
    best
}

/// All real roots of `b alpha t^3 - a t + mu = 0`.
///
/// The regime is decided by comparing `|mu|` with `mu_crit` inside the
/// absolute window `double_root_tol`. Three real roots come from the
/// trigonometric formula, a single one from Cardano's formula, and the
/// double root at the boundary is placed at the stationary point.
pub fn solve_reduced(
    a: f64,
    b: f64,
    alpha: f64,
    mu: f64,
    double_root_tol: f64,
) -> Result<CubicRoots> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::DegenerateReduction(alpha));
    }
    require_positive("a", a)?;
    require_positive("b", b)?;
    if !mu.is_finite() {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: "must be finite".into(),
        });
    }
    if mu < 0.0 {
        return Ok(solve_nonnegative(a, b, alpha, -mu, double_root_tol).negated());
    }
    Ok(solve_nonnegative(a, b, alpha, mu, double_root_tol))
}

fn solve_nonnegative(a: f64, b: f64, alpha: f64, mu: f64, tol: f64) -> CubicRoots {
    let (_, t_max) = stationary_points(a, b, alpha);
    let critical = mu_crit(a, b, alpha.sqrt());

    if mu == 0.0 {
        let edge = (a / (b * alpha)).sqrt();
        return CubicRoots {
            roots: vec![-edge, 0.0, edge],
            multiplicity: vec![1, 1, 1],
            brackets: vec![Bracket::Below, Bracket::Between, Bracket::Above],
            regime: Regime::MuZero,
        };
    }

    // Depressed form t^3 + p t + q = 0.
    let p = -a / (b * alpha);
    let q = mu / (b * alpha);

    if (mu - critical).abs() <= tol.max(0.0) {
        // g(t_M) = 0: double root at t_M, simple root at -2 t_M (roots sum to 0).
        let simple = polish(a, b, alpha, mu, -2.0 * t_max);
        return CubicRoots {
            roots: vec![simple, t_max],
            multiplicity: vec![1, 2],
            brackets: vec![Bracket::Below, Bracket::Above],
            regime: Regime::Two,
        };
    }

    if mu < critical {
        let amplitude = 2.0 * (-p / 3.0).sqrt();
        let cos_arg = ((3.0 * q) / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phase = cos_arg.acos() / 3.0;
        let mut roots: Vec<f64> = (0..3)
            .map(|k| amplitude * (phase - 2.0 * PI * k as f64 / 3.0).cos())
            .map(|t| polish(a, b, alpha, mu, t))
            .collect();
        roots.sort_by(f64::total_cmp);
        return CubicRoots {
            roots,
            multiplicity: vec![1, 1, 1],
            brackets: vec![Bracket::Below, Bracket::Between, Bracket::Above],
            regime: Regime::Three,
        };
    }

    // One real root. Pick the cube-root branch free of cancellation.
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let s = -q / 2.0 - q.signum() * disc.sqrt();
    let first = s.cbrt();
    let root = polish(a, b, alpha, mu, first - p / (3.0 * first));
    CubicRoots {
        roots: vec![root],
        multiplicity: vec![1],
        brackets: vec![if root < -t_max {
            Bracket::Below
        } else {
            Bracket::Above
        }],
        regime: Regime::One,
    }
}

/// Roots of `t (a - b alpha t^2) = a - b alpha`, the rescalings that map a
/// known solution onto the others.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaleRoots {
    /// `1` first, then `t1 >= t2` when real.
    pub roots: Vec<f64>,
    /// Set when `t1 == t2`.
    pub repeated: bool,
}

pub fn rescale_roots(a: f64, b: f64, alpha: f64) -> RescaleRoots {
    // 4a/(b alpha) - 3 written over a common denominator.
    let numerator = 4.0 * a - 3.0 * b * alpha;
    if numerator.abs() <= 64.0 * f64::EPSILON * 4.0 * a {
        return RescaleRoots {
            roots: vec![1.0, -0.5, -0.5],
            repeated: true,
        };
    }
    if numerator < 0.0 {
        return RescaleRoots {
            roots: vec![1.0],
            repeated: false,
        };
    }
    let root = (numerator / (b * alpha)).sqrt();
    RescaleRoots {
        roots: vec![1.0, 0.5 * (-1.0 + root), 0.5 * (-1.0 - root)],
        repeated: false,
    }
}

/// Rescales `u` onto the sphere `|V|^2 = a / b`, where the nonlocal
/// coefficient vanishes and `V` solves the problem with `mu = 0`.
pub fn zero_mu_scaling(a: f64, b: f64, u: &GridField) -> Result<GridField> {
    require_positive("a", a)?;
    require_positive("b", b)?;
    let norm = h1_inner(u, u)?.sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(u.scaled((a * b).sqrt() / (b * norm)))
}
