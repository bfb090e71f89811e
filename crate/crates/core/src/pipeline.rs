//! End-to-end enumeration of solutions: one Poisson solve, one cubic, and a
//! verification pass over every resulting branch. Also hosts the steepest
//! descent oracle for the local minimizer.

use std::fmt;
use std::sync::Arc;

use crate::elliptic::{
    default_max_iter, reduce_problem, solve_cg, LaplacianOperator, ReducedProblem,
    DEFAULT_POISSON_TOL,
};
use crate::energy::{energy_eval, thresholds, NormBand, ProblemParams};
use crate::error::{Error, Result};
use crate::grid::{dot, h1_inner, sign_classify, GridField, SignClass};
use crate::reduction::{
    mu_crit, solve_reduced, zero_mu_scaling, CubicRoots, Regime, DEFAULT_DOUBLE_ROOT_REL_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub cg_tol: f64,
    /// Width of the double-root window, relative to `mu_crit`.
    pub double_root_rel_tol: f64,
    /// Largest admissible weak residual of an emitted branch.
    pub residual_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            cg_tol: DEFAULT_POISSON_TOL,
            double_root_rel_tol: DEFAULT_DOUBLE_ROOT_REL_TOL,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Local minimizer near the origin (middle root).
    U1Like,
    /// Mountain-pass type solution, `a/3b < |u|^2 < a/b`.
    U2Like,
    /// Opposite-sign solution with `|u|^2 > a/b`.
    U3Like,
    Double,
    Single,
    Trivial,
    /// One member of the `mu = 0` sphere `|u|^2 = a/b`.
    FamilyRepresentative,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::U1Like => "u1-like",
            Role::U2Like => "u2-like",
            Role::U3Like => "u3-like",
            Role::Double => "double",
            Role::Single => "single",
            Role::Trivial => "trivial",
            Role::FamilyRepresentative => "family-representative",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolutionBranch {
    pub multiplier: f64,
    pub field: GridField,
    pub norm_sq: f64,
    pub energy: f64,
    pub sign_class: SignClass,
    pub band: NormBand,
    pub residual: f64,
    pub role: Role,
}

#[derive(Debug, Clone)]
pub struct SolutionSet {
    pub mu: f64,
    pub mu_crit: f64,
    pub roots: CubicRoots,
    pub branches: Vec<SolutionBranch>,
    /// `mu = 0`: the branches hold a single representative of a continuum.
    pub infinite_family: bool,
}

impl SolutionSet {
    pub fn regime(&self) -> Regime {
        self.roots.regime
    }

    pub fn find(&self, role: Role) -> Option<&SolutionBranch> {
        self.branches.iter().find(|b| b.role == role)
    }
}

/// Strong-form discrete residual
/// `|(a - b|u|^2)(-lap_h u) - mu f|_2 / |mu f|_2`.
///
/// With `mu = 0` the denominator falls back to `a |lap_h u|_2`, so the value
/// measures how far the nonlocal coefficient is from annihilating `u`.
pub fn weak_residual(p: &ProblemParams, u: &GridField) -> Result<f64> {
    u.check_same_domain(&p.f)?;
    let s = h1_inner(u, u)?;
    let coeff = p.a - p.b * s;
    let lap = LaplacianOperator::new(Arc::clone(u.domain())).apply(u)?;
    let residual = lap.combine(coeff, &p.f, -p.mu)?;
    let numerator = dot(residual.values(), residual.values()).sqrt();
    let source = p.mu.abs() * dot(p.f.values(), p.f.values()).sqrt();
    let denominator = if source > 0.0 {
        source
    } else {
        p.a * dot(lap.values(), lap.values()).sqrt()
    };
    if denominator == 0.0 {
        return Ok(numerator);
    }
    Ok(numerator / denominator)
}

fn assign_roles(mu: f64, roots: &CubicRoots) -> Vec<Role> {
    match roots.regime {
        Regime::Three if mu > 0.0 => vec![Role::U3Like, Role::U1Like, Role::U2Like],
        Regime::Three => vec![Role::U2Like, Role::U1Like, Role::U3Like],
        Regime::Two => roots
            .multiplicity
            .iter()
            .map(|&m| if m == 2 { Role::Double } else { Role::Single })
            .collect(),
        Regime::One => vec![Role::Single],
        Regime::MuZero => roots
            .roots
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    Role::Trivial
                } else {
                    Role::FamilyRepresentative
                }
            })
            .collect(),
    }
}

/// Builds and measures the branch `t U`.
pub fn make_branch(
    p: &ProblemParams,
    reduced: &ReducedProblem,
    multiplier: f64,
    role: Role,
) -> Result<SolutionBranch> {
    branch_from_field(p, reduced.u.scaled(multiplier), multiplier, role)
}

fn branch_from_field(
    p: &ProblemParams,
    field: GridField,
    multiplier: f64,
    role: Role,
) -> Result<SolutionBranch> {
    let norm_sq = h1_inner(&field, &field)?;
    Ok(SolutionBranch {
        multiplier,
        norm_sq,
        energy: energy_eval(p, &field)?,
        sign_class: sign_classify(&field, 0.0),
        band: NormBand::classify(&thresholds(p.a, p.b), norm_sq),
        residual: weak_residual(p, &field)?,
        role,
        field,
    })
}

/// Enumerates every solution for `p.mu` from an already reduced problem.
pub fn solve_with_reduction(
    p: &ProblemParams,
    reduced: &ReducedProblem,
    opts: &SolverOptions,
) -> Result<SolutionSet> {
    let critical = mu_crit(p.a, p.b, reduced.norm_u());
    let roots = solve_reduced(
        p.a,
        p.b,
        reduced.alpha,
        p.mu,
        opts.double_root_rel_tol * critical,
    )?;
    let roles = assign_roles(p.mu, &roots);

    let infinite_family = roots.regime == Regime::MuZero;
    let mut branches = Vec::with_capacity(roots.count());
    if infinite_family {
        let field = zero_mu_scaling(p.a, p.b, &reduced.u)?;
        let multiplier = (p.a * p.b).sqrt() / (p.b * reduced.norm_u());
        branches.push(branch_from_field(
            p,
            field,
            multiplier,
            Role::FamilyRepresentative,
        )?);
    } else {
        for (&t, &role) in roots.roots.iter().zip(&roles) {
            branches.push(make_branch(p, reduced, t, role)?);
        }
    }

    for branch in &branches {
        if !(branch.residual <= opts.residual_tol) {
            return Err(Error::VerificationFailure {
                branch: format!("{} (T = {:e})", branch.role, branch.multiplier),
                residual: branch.residual,
                tol: opts.residual_tol,
            });
        }
    }

    Ok(SolutionSet {
        mu: p.mu,
        mu_crit: critical,
        roots,
        branches,
        infinite_family,
    })
}

/// Reduces the problem and enumerates every solution.
pub fn solve_all(p: &ProblemParams, opts: &SolverOptions) -> Result<(ReducedProblem, SolutionSet)> {
    let reduced = reduce_problem(&p.f, p.a, p.b, opts.cg_tol)?;
    let set = solve_with_reduction(p, &reduced, opts)?;
    Ok((reduced, set))
}

/// Largest relative deviation `|u - c ubar| / |u|` over ordered branch pairs,
/// with `c = (a - b|ubar|^2) / (a - b|u|^2)`.
pub fn check_linear_dependence(a: f64, b: f64, branches: &[SolutionBranch]) -> Result<f64> {
    if branches.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "branches",
            reason: format!("need at least two branches, got {}", branches.len()),
        });
    }
    let coeffs: Vec<f64> = branches.iter().map(|br| a - b * br.norm_sq).collect();
    if let Some(idx) = coeffs.iter().position(|&c| c.abs() <= 1e-14 * a) {
        return Err(Error::DegenerateCoefficient(idx));
    }
    let mut worst: f64 = 0.0;
    for (i, u) in branches.iter().enumerate() {
        let norm = u.norm_sq.sqrt();
        for (j, ubar) in branches.iter().enumerate() {
            if i == j {
                continue;
            }
            let diff = u.field.combine(1.0, &ubar.field, -coeffs[j] / coeffs[i])?;
            worst = worst.max(h1_inner(&diff, &diff)?.sqrt() / norm);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub field: GridField,
    pub iterations: usize,
    /// H1 norm of the Riesz gradient at the returned field.
    pub grad_norm: f64,
}

/// Steepest descent on the discretized energy in the H1_0 metric, with
/// Armijo backtracking (step halving, slope factor 1e-4).
///
/// The start must lie in `|u0|^2 < a/(3b)`; leaving `|u|^2 < 2a/(3b)`
/// aborts with [`Error::BallEscape`].
pub fn descent_minimize(
    p: &ProblemParams,
    u0: &GridField,
    step0: f64,
    grad_tol: f64,
    max_iter: usize,
) -> Result<DescentOutcome> {
    const ARMIJO: f64 = 1e-4;
    u0.check_same_domain(&p.f)?;
    if !(step0 > 0.0) || !(grad_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "step0/grad_tol",
            reason: "must be positive".into(),
        });
    }
    let start_sq = h1_inner(u0, u0)?;
    let inner = p.a / (3.0 * p.b);
    if start_sq >= inner {
        return Err(Error::InvalidParameter {
            name: "u0",
            reason: format!("|u0|^2 = {start_sq:e} must be below a/(3b) = {inner:e}"),
        });
    }
    let limit = 2.0 * p.a / (3.0 * p.b);

    // Riesz representative of u -> (f, u) in the H1_0 inner product.
    let op = LaplacianOperator::new(Arc::clone(p.f.domain()));
    let source_rep = solve_cg(&op, &p.f, 1e-13, default_max_iter(p.f.domain()))?;

    let gradient = |u: &GridField| -> Result<(GridField, f64)> {
        let s = h1_inner(u, u)?;
        let g = u.combine(p.a - p.b * s, &source_rep, -p.mu)?;
        let norm_sq = h1_inner(&g, &g)?;
        Ok((g, norm_sq))
    };

    let mut u = u0.clone();
    let mut energy = energy_eval(p, &u)?;
    for iter in 0..max_iter {
        let (g, g_sq) = gradient(&u)?;
        if g_sq.sqrt() <= grad_tol {
            return Ok(DescentOutcome {
                field: u,
                iterations: iter,
                grad_norm: g_sq.sqrt(),
            });
        }
        let mut step = step0;
        loop {
            let trial = u.combine(1.0, &g, -step)?;
            let trial_energy = energy_eval(p, &trial)?;
            // Energy differences below roundoff carry no sign information.
            let slack = 8.0 * f64::EPSILON * energy.abs().max(trial_energy.abs());
            if trial_energy <= energy - ARMIJO * step * g_sq + slack {
                u = trial;
                energy = trial_energy;
                break;
            }
            step *= 0.5;
            if step < 1e-20 * step0 {
                return Err(Error::IterationLimit {
                    iterations: iter,
                    residual: g_sq.sqrt(),
                });
            }
        }
        let norm_sq = h1_inner(&u, &u)?;
        if norm_sq >= limit {
            return Err(Error::BallEscape { norm_sq, limit });
        }
    }
    let (_, g_sq) = gradient(&u)?;
    if g_sq.sqrt() <= grad_tol {
        return Ok(DescentOutcome {
            field: u,
            iterations: max_iter,
            grad_norm: g_sq.sqrt(),
        });
    }
    Err(Error::IterationLimit {
        iterations: max_iter,
        residual: g_sq.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::solve_cg_from;
    use crate::grid::DomainSpec;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn canonical(n: usize, mu: f64) -> ProblemParams {
        let d = Arc::new(DomainSpec::interval(0.0, 1.0, n).unwrap());
        ProblemParams::new(1.0, 1.0, mu, GridField::sample(d, |_, _| 1.0)).unwrap()
    }

    fn rel_diff(u: &GridField, v: &GridField) -> f64 {
        let d = u.combine(1.0, v, -1.0).unwrap();
        (h1_inner(&d, &d).unwrap() / h1_inner(v, v).unwrap()).sqrt()
    }

    #[test]
    fn three_branches_at_small_mu() {
        let (_, set) = solve_all(&canonical(1023, 0.1), &SolverOptions::default()).unwrap();
        assert_eq!(set.regime(), Regime::Three);
        let t: Vec<f64> = set.branches.iter().map(|b| b.multiplier).collect();
        let expected = [-3.5130588752994715, 0.10008354236377453, 3.4129753329356969];
        for (got, want) in t.iter().zip(expected) {
            assert_relative_eq!(*got, want, max_relative = 1e-5);
        }
        let roles: Vec<Role> = set.branches.iter().map(|b| b.role).collect();
        assert_eq!(roles, vec![Role::U3Like, Role::U1Like, Role::U2Like]);
        for b in &set.branches {
            assert!(b.residual <= 1e-8);
        }
        let u1 = set.find(Role::U1Like).unwrap();
        let u3 = set.find(Role::U3Like).unwrap();
        assert_eq!(u1.sign_class, SignClass::Positive);
        assert_eq!(
            set.find(Role::U2Like).unwrap().sign_class,
            SignClass::Positive
        );
        assert_eq!(u3.sign_class, SignClass::Negative);
        assert!(1.0 - u1.norm_sq > 0.0 && 1.0 - u3.norm_sq < 0.0);
    }

    #[test]
    fn negative_mu_mirrors_roles() {
        let opts = SolverOptions::default();
        let (_, plus) = solve_all(&canonical(255, 0.3), &opts).unwrap();
        let (_, minus) = solve_all(&canonical(255, -0.3), &opts).unwrap();
        for role in [Role::U1Like, Role::U2Like, Role::U3Like] {
            let (p, m) = (plus.find(role).unwrap(), minus.find(role).unwrap());
            assert_relative_eq!(p.multiplier, -m.multiplier, max_relative = 1e-12);
            assert_relative_eq!(p.energy, m.energy, max_relative = 1e-10);
        }
    }

    #[test]
    fn single_branch_above_mu_crit() {
        let (_, set) = solve_all(&canonical(1023, 1.5), &SolverOptions::default()).unwrap();
        assert_eq!(set.regime(), Regime::One);
        assert_eq!(set.branches.len(), 1);
        assert_eq!(set.branches[0].role, Role::Single);
    }

    #[test]
    fn double_branch_at_mu_crit() {
        let base = canonical(1023, 0.1);
        let reduced = reduce_problem(&base.f, 1.0, 1.0, 1e-10).unwrap();
        let critical = mu_crit(1.0, 1.0, reduced.norm_u());
        let set =
            solve_with_reduction(&base.with_mu(critical), &reduced, &SolverOptions::default())
                .unwrap();
        assert_eq!(set.regime(), Regime::Two);
        assert_eq!(set.branches.len(), 2);
        let double = set.find(Role::Double).unwrap();
        assert_relative_eq!(double.multiplier, 2.0, max_relative = 1e-5);
        assert_relative_eq!(
            set.find(Role::Single).unwrap().multiplier,
            -4.0,
            max_relative = 1e-5
        );
    }

    #[test]
    fn zero_mu_yields_family_marker() {
        let (_, set) = solve_all(&canonical(255, 0.0), &SolverOptions::default()).unwrap();
        assert!(set.infinite_family);
        assert_eq!(set.regime(), Regime::MuZero);
        assert_eq!(set.branches.len(), 1);
        let rep = &set.branches[0];
        assert_eq!(rep.role, Role::FamilyRepresentative);
        assert_relative_eq!(rep.norm_sq, 1.0, max_relative = 1e-12);
        assert!(rep.residual <= 1e-10);
    }

    #[test]
    fn residual_for_unit_multiplier() {
        let p = canonical(511, 0.1);
        let reduced = reduce_problem(&p.f, 1.0, 1.0, 1e-10).unwrap();
        let q = p.with_mu(1.0 - reduced.alpha);
        assert!(weak_residual(&q, &reduced.u).unwrap() <= 1e-8);
    }

    #[test]
    fn residual_of_random_field_is_large() {
        let p = canonical(127, 0.1);
        let mut rng = StdRng::seed_from_u64(9);
        let values = (0..127).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = GridField::from_values(Arc::clone(p.f.domain()), values).unwrap();
        assert!(weak_residual(&p, &w).unwrap() > 1e-1);
    }

    #[test]
    fn branches_are_linearly_dependent() {
        let p = canonical(1023, 0.1);
        let (reduced, set) = solve_all(&p, &SolverOptions::default()).unwrap();
        assert!(check_linear_dependence(1.0, 1.0, &set.branches).unwrap() <= 1e-9);
        let alpha = reduced.alpha;
        for bi in &set.branches {
            for bj in &set.branches {
                let (ti, tj) = (bi.multiplier, bj.multiplier);
                let rebuilt = (1.0 - tj * tj * alpha) / (1.0 - ti * ti * alpha) * tj;
                assert!((rebuilt - ti).abs() <= 1e-12 * ti.abs().max(1.0));
            }
        }
    }

    #[test]
    fn linear_dependence_across_independent_solves() {
        let p = canonical(511, 0.2);
        let opts = SolverOptions::default();
        let (reduced, set) = solve_all(&p, &opts).unwrap();
        // Re-solve the Poisson problem from a random start.
        let mut rng = StdRng::seed_from_u64(21);
        let guess = GridField::from_values(
            Arc::clone(p.f.domain()),
            (0..511).map(|_| rng.gen_range(0.0..0.2)).collect(),
        )
        .unwrap();
        let op = LaplacianOperator::new(Arc::clone(p.f.domain()));
        let other_u = solve_cg_from(&op, &p.f, &guess, 1e-10, 20_000).unwrap();
        let other = ReducedProblem {
            alpha: h1_inner(&other_u, &other_u).unwrap(),
            u: other_u,
            ..reduced
        };
        let twin = solve_with_reduction(&p, &other, &opts).unwrap();
        let pair = vec![set.branches[0].clone(), twin.branches[1].clone()];
        assert!(check_linear_dependence(1.0, 1.0, &pair).unwrap() <= 1e-8);
    }

    #[test]
    fn linear_dependence_needs_two_nondegenerate_branches() {
        let p = canonical(63, 0.0);
        let (reduced, set) = solve_all(&p, &SolverOptions::default()).unwrap();
        assert!(check_linear_dependence(1.0, 1.0, &set.branches).is_err());
        let zero = make_branch(&p, &reduced, 0.0, Role::Trivial).unwrap();
        let pair = vec![zero, set.branches[0].clone()];
        assert_eq!(
            check_linear_dependence(1.0, 1.0, &pair),
            Err(Error::DegenerateCoefficient(1))
        );
    }

    #[test]
    fn descent_finds_the_local_minimizer() {
        let p = canonical(1023, 0.1);
        let (reduced, set) = solve_all(&p, &SolverOptions::default()).unwrap();
        let target = &set.find(Role::U1Like).unwrap().field;
        let out = descent_minimize(&p, &reduced.u.scaled(0.01), 1.0, 1e-12, 10_000).unwrap();
        assert!(rel_diff(&out.field, target) <= 1e-5);
        assert!(
            energy_eval(&p, &out.field).unwrap()
                < energy_eval(&p, &reduced.u.scaled(0.01)).unwrap()
        );
    }

    #[test]
    fn descent_from_critical_point_returns_immediately() {
        let p = canonical(255, 0.1);
        let (_, set) = solve_all(&p, &SolverOptions::default()).unwrap();
        let u1 = &set.find(Role::U1Like).unwrap().field;
        let out = descent_minimize(&p, u1, 1.0, 1e-8, 10).unwrap();
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn descent_at_zero_mu_stays_at_zero() {
        let p = canonical(63, 0.0);
        let zero = GridField::zeros(Arc::clone(p.f.domain()));
        let out = descent_minimize(&p, &zero, 1.0, 1e-12, 10).unwrap();
        assert_eq!(out.field.max_abs(), 0.0);
    }

    #[test]
    fn descent_rejects_starts_outside_the_ball() {
        let p = canonical(63, 0.1);
        let reduced = reduce_problem(&p.f, 1.0, 1.0, 1e-10).unwrap();
        let far = reduced.u.scaled(3.0);
        assert!(descent_minimize(&p, &far, 1.0, 1e-10, 100).is_err());
    }

    #[test]
    fn descent_escapes_when_mu_is_too_large() {
        // Past mu_crit there is no local minimizer; descent runs off.
        let p = canonical(63, 3.0);
        let reduced = reduce_problem(&p.f, 1.0, 1.0, 1e-10).unwrap();
        let out = descent_minimize(&p, &reduced.u.scaled(0.01), 1.0, 1e-10, 10_000);
        assert!(matches!(out, Err(Error::BallEscape { .. })), "{out:?}");
    }

    #[test]
    fn verification_failure_is_reported() {
        let p = canonical(255, 0.1);
        let opts = SolverOptions {
            residual_tol: 1e-16,
            ..SolverOptions::default()
        };
        match solve_all(&p, &opts) {
            Err(Error::VerificationFailure { branch, .. }) => assert!(branch.contains("like")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
