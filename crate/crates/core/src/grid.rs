//! Uniform interior-node grids on intervals and rectangles.
//!
//! Only interior nodes are stored; the homogeneous Dirichlet condition is
//! implicit in every stencil and quadrature below. Nodes are ordered
//! row-major: the first axis varies fastest.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    /// Number of interior nodes.
    pub n: usize,
}

impl Axis {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn h(&self) -> f64 {
        (self.upper - self.lower) / (self.n + 1) as f64
    }

    /// Coordinate of interior node `i` (zero based).
    pub fn coord(&self, i: usize) -> f64 {
        self.lower + (i + 1) as f64 * self.h()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    axes: Vec<Axis>,
}

impl DomainSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for (k, axis) in axes.iter().enumerate() {
            if !(axis.lower.is_finite() && axis.upper.is_finite()) || axis.upper <= axis.lower {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: need lower < upper, got [{}, {}]",
                    axis.lower, axis.upper
                )));
            }
            if axis.n < 3 {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: need at least 3 interior nodes, got {}",
                    axis.n
                )));
            }
        }
        Ok(Self { axes })
    }

    pub fn interval(lower: f64, upper: f64, n: usize) -> Result<Self> {
        Self::new(vec![Axis { lower, upper, n }])
    }

    pub fn rectangle(x: (f64, f64), nx: usize, y: (f64, f64), ny: usize) -> Result<Self> {
        Self::new(vec![
            Axis {
                lower: x.0,
                upper: x.1,
                n: nx,
            },
            Axis {
                lower: y.0,
                upper: y.1,
                n: ny,
            },
        ])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Area (or length) of one grid cell, the quadrature weight of a node.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::h).product()
    }

    /// Largest mesh width over all axes.
    pub fn h_max(&self) -> f64 {
        self.axes.iter().map(Axis::h).fold(0.0, f64::max)
    }

    /// Coordinates of the node with flat index `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        match self.axes.as_slice() {
            [x] => [x.coord(idx), 0.0],
            [x, y] => [x.coord(idx % x.n), y.coord(idx / x.n)],
            _ => unreachable!("dimension validated at construction"),
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}d", self.dim())?;
        for axis in &self.axes {
            write!(f, " [{}, {}] n={}", axis.lower, axis.upper, axis.n)?;
        }
        Ok(())
    }
}

/// Nodal values of a function vanishing on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: Arc<DomainSpec>,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(domain: Arc<DomainSpec>) -> Self {
        let values = vec![0.0; domain.len()];
        Self { domain, values }
    }

    pub fn from_values(domain: Arc<DomainSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidDomain(format!(
                "expected {} node values, got {}",
                domain.len(),
                values.len()
            )));
        }
        Ok(Self { domain, values })
    }

    /// Samples `func(x, y)` at every interior node (`y` is 0 in 1D).
    pub fn sample(domain: Arc<DomainSpec>, func: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..domain.len())
            .map(|idx| {
                let [x, y] = domain.point(idx);
                func(x, y)
            })
            .collect();
        Self { domain, values }
    }

    pub fn domain(&self) -> &Arc<DomainSpec> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> Self {
        Self {
            domain: Arc::clone(&self.domain),
            values: self.values.iter().map(|&v| op(v)).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &GridField, beta: f64) -> Result<Self> {
        self.check_same_domain(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| alpha * u + beta * v)
            .collect();
        Ok(Self {
            domain: Arc::clone(&self.domain),
            values,
        })
    }

    /// Discrete L2 norm, `sqrt(l2_inner(u, u))`.
    pub fn l2_norm(&self) -> f64 {
        (self.domain.cell_volume() * dot(&self.values, &self.values)).sqrt()
    }

    pub fn check_same_domain(&self, other: &GridField) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) || self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Stiffness form of the H1_0 inner product: the sum over all grid edges
/// (boundary edges included) of the product of forward differences. Equals
/// `l2_inner(-lap_h u, v)` for the 3/5-point Laplacian up to roundoff.
pub fn h1_inner(u: &GridField, v: &GridField) -> Result<f64> {
    u.check_same_domain(v)?;
    let domain = u.domain();
    let vol = domain.cell_volume();
    let (uv, vv) = (u.values(), v.values());
    let mut total = 0.0;
    match domain.axes() {
        [x] => {
            total += edge_sum(uv, vv, 0, 1, x.n) / (x.h() * x.h());
        }
        [x, y] => {
            let mut sx = 0.0;
            for row in 0..y.n {
                sx += edge_sum(uv, vv, row * x.n, 1, x.n);
            }
            let mut sy = 0.0;
            for col in 0..x.n {
                sy += edge_sum(uv, vv, col, x.n, y.n);
            }
            total += sx / (x.h() * x.h()) + sy / (y.h() * y.h());
        }
        _ => unreachable!("dimension validated at construction"),
    }
    Ok(total * vol)
}

/// Sum of difference products along one grid line of `len` nodes starting
/// at `start` with the given `stride`, padded by zero boundary values.
fn edge_sum(u: &[f64], v: &[f64], start: usize, stride: usize, len: usize) -> f64 {
    let mut prev_u = 0.0;
    let mut prev_v = 0.0;
    let mut acc = 0.0;
    for k in 0..len {
        let idx = start + k * stride;
        acc += (u[idx] - prev_u) * (v[idx] - prev_v);
        prev_u = u[idx];
        prev_v = v[idx];
    }
    acc + prev_u * prev_v
}

/// Nodal quadrature of the L2 inner product with weight equal to the cell
/// volume (the trapezoid rule with zero boundary values).
pub fn l2_inner(u: &GridField, v: &GridField) -> Result<f64> {
    u.check_same_domain(v)?;
    Ok(u.domain().cell_volume() * dot(u.values(), v.values()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignClass {
    Positive,
    Negative,
    Indefinite,
    Zero,
}

impl SignClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignClass::Positive => "positive",
            SignClass::Negative => "negative",
            SignClass::Indefinite => "indefinite",
            SignClass::Zero => "zero",
        }
    }
}

impl fmt::Display for SignClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies the sign of a field relative to `tol * max|u|`.
pub fn sign_classify(u: &GridField, tol: f64) -> SignClass {
    let peak = u.max_abs();
    if peak == 0.0 {
        return SignClass::Zero;
    }
    let threshold = tol.max(0.0) * peak;
    if u.values().iter().all(|&v| v > threshold) {
        SignClass::Positive
    } else if u.values().iter().all(|&v| v < -threshold) {
        SignClass::Negative
    } else {
        SignClass::Indefinite
    }
}
