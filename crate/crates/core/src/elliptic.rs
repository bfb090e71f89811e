//! Discrete Dirichlet Laplacian, conjugate gradients, the auxiliary Poisson
//! solve behind the reduction, and the smallest Dirichlet eigenvalue.

use std::sync::Arc;

use crate::error::{require_positive, Error, Result};
use crate::grid::{dot, h1_inner, l2_inner, DomainSpec, GridField};

pub const DEFAULT_POISSON_TOL: f64 = 1e-10;
pub const DEFAULT_EIGEN_TOL: f64 = 1e-8;

/// The positive definite operator `-lap_h` on interior nodes: 3-point
/// stencil in 1D, 5-point in 2D, each axis scaled by `1/h^2`.
#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    domain: Arc<DomainSpec>,
    inv_h2: [f64; 2],
}

impl LaplacianOperator {
    pub fn new(domain: Arc<DomainSpec>) -> Self {
        let mut inv_h2 = [0.0; 2];
        for (slot, axis) in inv_h2.iter_mut().zip(domain.axes()) {
            *slot = 1.0 / (axis.h() * axis.h());
        }
        Self { domain, inv_h2 }
    }

    pub fn domain(&self) -> &Arc<DomainSpec> {
        &self.domain
    }

    /// `out = -lap_h x` on raw node arrays.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let axes = self.domain.axes();
        let nx = axes[0].n;
        let cx = self.inv_h2[0];
        match axes.len() {
            1 => {
                for i in 0..nx {
                    let left = if i > 0 { x[i - 1] } else { 0.0 };
                    let right = if i + 1 < nx { x[i + 1] } else { 0.0 };
                    out[i] = cx * (2.0 * x[i] - left - right);
                }
            }
            _ => {
                let ny = axes[1].n;
                let cy = self.inv_h2[1];
                for j in 0..ny {
                    for i in 0..nx {
                        let k = j * nx + i;
                        let left = if i > 0 { x[k - 1] } else { 0.0 };
                        let right = if i + 1 < nx { x[k + 1] } else { 0.0 };
                        let down = if j > 0 { x[k - nx] } else { 0.0 };
                        let up = if j + 1 < ny { x[k + nx] } else { 0.0 };
                        out[k] = cx * (2.0 * x[k] - left - right) + cy * (2.0 * x[k] - down - up);
                    }
                }
            }
        }
    }

    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        if u.domain().as_ref() != self.domain.as_ref() {
            return Err(Error::DomainMismatch);
        }
        let mut out = vec![0.0; u.values().len()];
        self.apply_into(u.values(), &mut out);
        GridField::from_values(Arc::clone(u.domain()), out)
    }
}

fn check_tolerance(rel_tol: f64, max_iter: usize) -> Result<()> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidParameter {
            name: "rel_tol",
            reason: format!("must lie in (0, 1), got {rel_tol}"),
        });
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter {
            name: "max_iter",
            reason: "must be at least 1".into(),
        });
    }
    Ok(())
}

/// Plain conjugate gradients from a zero initial guess. Converged when
/// `|A x - rhs|_2 <= rel_tol * |rhs|_2`.
pub fn solve_cg(
    op: &LaplacianOperator,
    rhs: &GridField,
    rel_tol: f64,
    max_iter: usize,
) -> Result<GridField> {
    let zero = GridField::zeros(Arc::clone(rhs.domain()));
    solve_cg_from(op, rhs, &zero, rel_tol, max_iter)
}

/// Conjugate gradients starting from `guess`.
pub fn solve_cg_from(
    op: &LaplacianOperator,
    rhs: &GridField,
    guess: &GridField,
    rel_tol: f64,
    max_iter: usize,
) -> Result<GridField> {
    check_tolerance(rel_tol, max_iter)?;
    rhs.check_same_domain(guess)?;
    if rhs.domain().as_ref() != op.domain().as_ref() {
        return Err(Error::DomainMismatch);
    }

    let b = rhs.values();
    let n = b.len();
    let target = rel_tol * dot(b, b).sqrt();
    let mut x = guess.values().to_vec();
    let mut ax = vec![0.0; n];
    op.apply_into(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let mut rr = dot(&r, &r);

    if rr.sqrt() <= target {
        return GridField::from_values(Arc::clone(rhs.domain()), x);
    }

    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= target {
            // The recursive residual drifts; confirm with a true residual.
            op.apply_into(&x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
            rr = dot(&r, &r);
            if rr.sqrt() <= target {
                return GridField::from_values(Arc::clone(rhs.domain()), x);
            }
            p.copy_from_slice(&r);
            continue;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }

    op.apply_into(&x, &mut ax);
    let residual = b
        .iter()
        .zip(&ax)
        .map(|(bi, axi)| (bi - axi) * (bi - axi))
        .sum::<f64>()
        .sqrt();
    Err(Error::IterationLimit {
        iterations: max_iter,
        residual,
    })
}

/// Iteration cap used when callers have no better estimate.
pub fn default_max_iter(domain: &DomainSpec) -> usize {
    10 * domain.len() + 100
}

/// The scalar compression of the nonlocal problem: the Poisson solution
/// `U` with `-lap U = f` and its squared gradient norm `alpha`.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub u: GridField,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
}

impl ReducedProblem {
    pub fn norm_u(&self) -> f64 {
        self.alpha.sqrt()
    }
}

pub(crate) fn validate_source(f: &GridField) -> Result<()> {
    if let Some((node, &value)) = f.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::InvalidSource { node, value });
    }
    if f.values().iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateSource);
    }
    Ok(())
}

/// Solves `-lap_h U = f` and returns `alpha = |U|^2`, checking the weak-form
/// identity `alpha = (f, U)` against the solver tolerance.
pub fn reduce_problem(f: &GridField, a: f64, b: f64, rel_tol: f64) -> Result<ReducedProblem> {
    require_positive("a", a)?;
    require_positive("b", b)?;
    validate_source(f)?;
    let op = LaplacianOperator::new(Arc::clone(f.domain()));
    let u = solve_cg(&op, f, rel_tol, default_max_iter(f.domain()))?;
    let alpha = h1_inner(&u, &u)?;
    let f_dot_u = l2_inner(f, &u)?;
    let tol = 10.0 * rel_tol * f.l2_norm() * u.l2_norm();
    if (alpha - f_dot_u).abs() > tol {
        return Err(Error::IdentityViolation {
            lhs: alpha,
            rhs: f_dot_u,
            tol,
        });
    }
    Ok(ReducedProblem { u, alpha, a, b })
}

/// Smallest eigenvalue of the discrete Dirichlet Laplacian by inverse power
/// iteration. Stops once successive Rayleigh quotients agree to `rel_tol`.
pub fn smallest_eigenvalue(domain: &Arc<DomainSpec>, rel_tol: f64, max_iter: usize) -> Result<f64> {
    check_tolerance(rel_tol, max_iter)?;
    let op = LaplacianOperator::new(Arc::clone(domain));
    let inner_tol = (rel_tol * 1e-2).max(1e-14);
    let inner_iter = default_max_iter(domain);
    let n = domain.len();

    let mut x = GridField::sample(Arc::clone(domain), |_, _| 1.0);
    let mut ax = vec![0.0; n];
    let mut previous = f64::INFINITY;
    for _ in 0..max_iter {
        let y = solve_cg(&op, &x, inner_tol, inner_iter)?;
        let norm = dot(y.values(), y.values()).sqrt();
        x = y.scaled(1.0 / norm);
        op.apply_into(x.values(), &mut ax);
        let lambda = dot(x.values(), &ax);
        if (lambda - previous).abs() <= rel_tol * lambda {
            return Ok(lambda);
        }
        previous = lambda;
    }
    Err(Error::IterationLimit {
        iterations: max_iter,
        residual: previous,
    })
}
