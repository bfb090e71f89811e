//! Report generation for the command-line verbs.
//!
//! Every number is printed with 17 significant digits and every iteration
//! order is fixed, so identical configurations produce identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::config::{ConfigError, MuSpec, RunConfig, SourceSpec};
use crate::elliptic::{
    reduce_problem, smallest_eigenvalue, LaplacianOperator, ReducedProblem, DEFAULT_EIGEN_TOL,
};
use crate::energy::{critical_identity_residual, energy_eval, ps_limit_norms, ProblemParams};
use crate::error::Error;
use crate::grid::{dot, h1_inner, l2_inner, GridField, SignClass};
use crate::pipeline::{
    check_linear_dependence, descent_minimize, make_branch, solve_with_reduction, weak_residual,
    Role, SolutionBranch, SolutionSet, SolverOptions,
};
use crate::reduction::{
    g_eval, mu_crit, mu_crit_lower_bound, rescale_roots, solve_reduced, zero_mu_scaling, Regime,
};

pub const SOLVE_REPORT: &str = "solution.txt";
pub const BIFURCATION_TABLE: &str = "bifurcation.csv";
pub const VERIFY_REPORT: &str = "verify.txt";

pub const BIFURCATION_COLUMNS: [&str; 15] = [
    "mu",
    "regime",
    "count",
    "T1",
    "T2",
    "T3",
    "norm_sq_1",
    "norm_sq_2",
    "norm_sq_3",
    "energy_1",
    "energy_2",
    "energy_3",
    "residual_1",
    "residual_2",
    "residual_3",
];

const EIGEN_MAX_ITER: usize = 1000;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Solver(#[from] Error),

    #[error("{0} verification check(s) failed")]
    ChecksFailed(usize),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit status: 1 validation, 2 solver failure, 3 verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Solver(
                Error::InvalidDomain(_)
                | Error::InvalidParameter { .. }
                | Error::InvalidSource { .. }
                | Error::DegenerateSource,
            ) => 1,
            RunError::Solver(Error::VerificationFailure { .. }) | RunError::ChecksFailed(_) => 3,
            RunError::Solver(_) | RunError::Io { .. } => 2,
        }
    }
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Everything a report needs that depends only on the grid, source and
/// coefficients, computed once per run.
#[derive(Debug, Clone)]
pub struct ProblemContext {
    pub params: ProblemParams,
    pub reduced: ReducedProblem,
    pub lambda1: f64,
    pub mu_crit: f64,
    pub mu_crit_lower_bound: f64,
    pub options: SolverOptions,
}

impl ProblemContext {
    pub fn build(cfg: &RunConfig) -> Result<Self, RunError> {
        let f = cfg.source_field()?;
        let mu0 = match cfg.mu {
            MuSpec::Single(mu) => mu,
            MuSpec::Range { min, .. } => min,
        };
        let params = ProblemParams::new(cfg.a, cfg.b, mu0, f)?;
        let reduced = reduce_problem(&params.f, cfg.a, cfg.b, cfg.cg_tol)?;
        let lambda1 = smallest_eigenvalue(params.f.domain(), DEFAULT_EIGEN_TOL, EIGEN_MAX_ITER)?;
        let options = SolverOptions {
            cg_tol: cfg.cg_tol,
            double_root_rel_tol: cfg.double_root_tol,
            ..SolverOptions::default()
        };
        Ok(Self {
            mu_crit: mu_crit(cfg.a, cfg.b, reduced.norm_u()),
            mu_crit_lower_bound: mu_crit_lower_bound(cfg.a, cfg.b, lambda1, params.f.l2_norm()),
            params,
            reduced,
            lambda1,
            options,
        })
    }

    fn header_lines(&self, cfg: &RunConfig) -> Vec<(&'static str, String)> {
        vec![
            ("grid", cfg.domain.to_string()),
            ("source", cfg.source.to_string()),
            ("a", fmt_num(cfg.a)),
            ("b", fmt_num(cfg.b)),
            ("alpha", fmt_num(self.reduced.alpha)),
            ("mu_crit", fmt_num(self.mu_crit)),
            ("lambda1", fmt_num(self.lambda1)),
            ("mu_crit_lower_bound", fmt_num(self.mu_crit_lower_bound)),
        ]
    }

    pub fn solve(&self, mu: f64) -> Result<SolutionSet, Error> {
        solve_with_reduction(&self.params.with_mu(mu), &self.reduced, &self.options)
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    let io = |source| RunError::Io {
        path: path.clone(),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(&path, text).map_err(io)?;
    Ok(path)
}

fn single_mu(cfg: &RunConfig, verb: &str) -> Result<f64, RunError> {
    match cfg.mu {
        MuSpec::Single(mu) => Ok(mu),
        MuSpec::Range { .. } => Err(RunError::Config(ConfigError::Validation {
            field: "mu",
            message: format!("{verb} needs a single mu, not a range"),
        })),
    }
}

pub fn render_solve(cfg: &RunConfig) -> Result<String, RunError> {
    let mu = single_mu(cfg, "solve")?;
    let ctx = ProblemContext::build(cfg)?;
    let set = ctx.solve(mu)?;

    let mut out = String::from("# kirchhoff solution report\n");
    for (key, value) in ctx.header_lines(cfg) {
        let _ = writeln!(out, "{key} = {value}");
    }
    let _ = writeln!(out, "mu = {}", fmt_num(mu));
    let _ = writeln!(out, "regime = {}", set.regime());
    if set.infinite_family {
        let _ = writeln!(out, "count = infinite");
        let _ = writeln!(out, "family = infinite");
    } else {
        let _ = writeln!(out, "count = {}", set.branches.len());
        let _ = writeln!(out, "family = finite");
    }
    for (idx, branch) in set.branches.iter().enumerate() {
        let _ = writeln!(out, "\n[branch {}]", idx + 1);
        let _ = writeln!(out, "role = {}", branch.role);
        let _ = writeln!(out, "multiplier = {}", fmt_num(branch.multiplier));
        let _ = writeln!(out, "norm_sq = {}", fmt_num(branch.norm_sq));
        let _ = writeln!(out, "energy = {}", fmt_num(branch.energy));
        let _ = writeln!(out, "sign = {}", branch.sign_class);
        let _ = writeln!(out, "band = {}", branch.band);
        let _ = writeln!(out, "residual = {}", fmt_num(branch.residual));
    }
    Ok(out)
}

/// Writes the solution report into `cfg.out_dir`.
pub fn run_solve(cfg: &RunConfig) -> Result<PathBuf, RunError> {
    let text = render_solve(cfg)?;
    write_file(&cfg.out_dir, SOLVE_REPORT, &text)
}

#[derive(Debug, Clone)]
pub struct BifurcationRow {
    pub mu: f64,
    pub regime: Regime,
    pub branches: Vec<SolutionBranch>,
}

impl BifurcationRow {
    fn count_label(&self) -> String {
        match self.regime {
            Regime::MuZero => "inf".into(),
            _ => self.branches.len().to_string(),
        }
    }

    fn to_csv(&self) -> String {
        let slot = |pick: fn(&SolutionBranch) -> f64| -> [String; 3] {
            std::array::from_fn(|k| {
                self.branches
                    .get(k)
                    .map(|b| fmt_num(pick(b)))
                    .unwrap_or_default()
            })
        };
        let mut cells = vec![
            fmt_num(self.mu),
            self.regime.to_string(),
            self.count_label(),
        ];
        cells.extend(slot(|b| b.multiplier));
        cells.extend(slot(|b| b.norm_sq));
        cells.extend(slot(|b| b.energy));
        cells.extend(slot(|b| b.residual));
        cells.join(",")
    }
}

/// One table row. At `mu = 0` the row lists the three solutions on the `U`
/// ray (the trivial one and the two on the sphere `|u|^2 = a/b`).
pub fn bifurcation_row(ctx: &ProblemContext, mu: f64) -> Result<BifurcationRow, Error> {
    if mu == 0.0 {
        let p = ctx.params.with_mu(0.0);
        let roots = solve_reduced(p.a, p.b, ctx.reduced.alpha, 0.0, 0.0)?;
        let branches = roots
            .roots
            .iter()
            .map(|&t| {
                let role = if t == 0.0 {
                    Role::Trivial
                } else {
                    Role::FamilyRepresentative
                };
                make_branch(&p, &ctx.reduced, t, role)
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(BifurcationRow {
            mu,
            regime: Regime::MuZero,
            branches,
        });
    }
    let set = ctx.solve(mu)?;
    Ok(BifurcationRow {
        mu,
        regime: set.regime(),
        branches: set.branches,
    })
}

pub fn bifurcation_rows(ctx: &ProblemContext, mus: &[f64]) -> Result<Vec<BifurcationRow>, Error> {
    let mut sorted = mus.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().map(|&mu| bifurcation_row(ctx, mu)).collect()
}

pub fn render_bifurcation(cfg: &RunConfig) -> Result<String, RunError> {
    let MuSpec::Range { .. } = cfg.mu else {
        return Err(RunError::Config(ConfigError::Validation {
            field: "mu",
            message: "bifurcate needs mu_min/mu_max/mu_steps".into(),
        }));
    };
    let ctx = ProblemContext::build(cfg)?;
    let rows = bifurcation_rows(&ctx, &cfg.mu.values())?;

    let mut out = String::new();
    for (key, value) in ctx.header_lines(cfg) {
        let _ = writeln!(out, "# {key} = {value}");
    }
    let _ = writeln!(out, "{}", BIFURCATION_COLUMNS.join(","));
    for row in &rows {
        let _ = writeln!(out, "{}", row.to_csv());
    }
    Ok(out)
}

/// Writes the bifurcation table into `cfg.out_dir`.
pub fn run_bifurcation(cfg: &RunConfig) -> Result<PathBuf, RunError> {
    let text = render_bifurcation(cfg)?;
    write_file(&cfg.out_dir, BIFURCATION_TABLE, &text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Recorded for reference, never fails the run.
    Note,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifySummary {
    pub mu: f64,
    pub checks: Vec<Check>,
}

impl VerifySummary {
    pub fn failures(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .count()
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# kirchhoff verification\n");
        let _ = writeln!(out, "# structural checks at mu = {}", fmt_num(self.mu));
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Note => "NOTE",
            };
            let _ = write!(
                out,
                "{status} {} measured={} tol={}",
                c.name,
                fmt_num(c.measured),
                fmt_num(c.tolerance)
            );
            if !c.detail.is_empty() {
                let _ = write!(out, " {}", c.detail);
            }
            out.push('\n');
        }
        let _ = writeln!(out, "# {} failed of {}", self.failures(), self.checks.len());
        out
    }
}

struct Checks(Vec<Check>);

impl Checks {
    /// Passes when `measured <= tolerance`.
    fn at_most(&mut self, name: &'static str, measured: f64, tolerance: f64, detail: String) {
        let status = if measured <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        self.0.push(Check {
            name,
            status,
            measured,
            tolerance,
            detail,
        });
    }

    fn holds(&mut self, name: &'static str, ok: bool, measured: f64, detail: String) {
        let status = if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        self.0.push(Check {
            name,
            status,
            measured,
            tolerance: 0.0,
            detail,
        });
    }

    fn note(&mut self, name: &'static str, measured: f64, reference: f64, detail: String) {
        self.0.push(Check {
            name,
            status: CheckStatus::Note,
            measured,
            tolerance: reference,
            detail,
        });
    }
}

fn random_field(domain: &Arc<crate::grid::DomainSpec>, rng: &mut StdRng) -> GridField {
    let values = (0..domain.len())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    GridField::from_values(Arc::clone(domain), values).expect("length matches domain")
}

fn rel_h1_diff(u: &GridField, v: &GridField) -> Result<f64, Error> {
    let d = u.combine(1.0, v, -1.0)?;
    Ok((h1_inner(&d, &d)? / h1_inner(v, v)?).sqrt())
}

/// Runs the invariant suites of every module on the configured problem.
pub fn verify(cfg: &RunConfig) -> Result<VerifySummary, RunError> {
    let ctx = ProblemContext::build(cfg)?;
    let (a, b) = (cfg.a, cfg.b);
    let reduced = &ctx.reduced;
    let f = &ctx.params.f;
    let domain = Arc::clone(f.domain());
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut checks = Checks(Vec::new());

    // Poisson reduction.
    let f_dot_u = l2_inner(f, &reduced.u)?;
    let scale = f.l2_norm() * reduced.u.l2_norm();
    checks.at_most(
        "alpha_identity",
        (reduced.alpha - f_dot_u).abs() / scale,
        10.0 * cfg.cg_tol,
        format!("alpha={}", fmt_num(reduced.alpha)),
    );
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let v = random_field(&domain, &mut rng);
        let gap = (h1_inner(&reduced.u, &v)? - l2_inner(f, &v)?).abs();
        worst = worst.max(gap / (f.l2_norm() * v.l2_norm()));
    }
    checks.at_most(
        "weak_form_identity",
        worst,
        10.0 * cfg.cg_tol,
        String::new(),
    );
    let min_u = reduced
        .u
        .values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    checks.holds(
        "poisson_positivity",
        min_u > 0.0,
        min_u,
        "min node of U".into(),
    );

    // Eigenvalue and Poincare.
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let v = random_field(&domain, &mut rng);
        let h1 = h1_inner(&v, &v)?;
        worst = worst.max((ctx.lambda1 * l2_inner(&v, &v)? - h1) / h1);
    }
    checks.at_most(
        "poincare_inequality",
        worst,
        1e-10,
        format!("lambda1={}", fmt_num(ctx.lambda1)),
    );
    let inv_norm_u = 1.0 / reduced.norm_u();
    let norm_f = f.l2_norm();
    let sharp = ctx.lambda1.sqrt() / norm_f;
    checks.holds(
        "poisson_bound_sqrt_lambda1",
        inv_norm_u >= sharp * (1.0 - 1e-6),
        inv_norm_u,
        format!("sqrt(lambda1)/|f|_2={}", fmt_num(sharp)),
    );
    checks.note(
        "poisson_bound_lambda1_printed",
        inv_norm_u,
        ctx.lambda1 / norm_f,
        format!("holds={}", inv_norm_u >= ctx.lambda1 / norm_f),
    );
    checks.note(
        "mu_crit_vs_lower_bound",
        ctx.mu_crit,
        ctx.mu_crit_lower_bound,
        format!("holds={}", ctx.mu_crit >= ctx.mu_crit_lower_bound),
    );

    // Discretization error against closed forms, with h^2-scaled tolerances.
    let mut exact_lambda = 0.0;
    let mut lambda_tol = 1e-7;
    for axis in cfg.domain.axes() {
        let k = std::f64::consts::PI / axis.length();
        exact_lambda += k * k;
        lambda_tol += (k * axis.h()).powi(2) / 6.0;
    }
    checks.at_most(
        "lambda1_discretization",
        (ctx.lambda1 - exact_lambda).abs() / exact_lambda,
        lambda_tol,
        format!("exact={}", fmt_num(exact_lambda)),
    );
    if let (SourceSpec::Constant(c), [axis]) = (&cfg.source, cfg.domain.axes()) {
        let len = axis.length();
        let exact_alpha = c * c * len.powi(3) / 12.0;
        checks.at_most(
            "alpha_discretization",
            (reduced.alpha - exact_alpha).abs() / exact_alpha,
            2.0 * (axis.h() / len).powi(2) + 1e-8,
            format!("exact={}", fmt_num(exact_alpha)),
        );
    }

    // Regime boundary.
    let window = cfg.double_root_tol * ctx.mu_crit;
    let mut mismatches = 0;
    for sign in [1.0, -1.0] {
        for (factor, expected) in [(1.0 - 1e-6, 3), (1.0, 2), (1.0 + 1e-6, 1)] {
            let roots = solve_reduced(a, b, reduced.alpha, sign * factor * ctx.mu_crit, window)?;
            if roots.count() != expected {
                mismatches += 1;
            }
        }
    }
    checks.at_most(
        "regime_boundary_scan",
        mismatches as f64,
        0.0,
        String::new(),
    );

    // Structural checks in the three-solution regime.
    let mu_s = match cfg.mu {
        MuSpec::Single(mu) if mu != 0.0 && mu.abs() < ctx.mu_crit - window => mu.abs(),
        _ => ctx.mu_crit / 10.0,
    };
    let p = ctx.params.with_mu(mu_s);
    let set = ctx.solve(mu_s)?;
    let branch = |role| {
        set.find(role)
            .expect("three-solution regime assigns every role")
    };
    let (u1, u2, u3) = (
        branch(Role::U1Like),
        branch(Role::U2Like),
        branch(Role::U3Like),
    );

    let mut root_err: f64 = 0.0;
    for &t in &set.roots.roots {
        root_err = root_err.max(g_eval(a, b, reduced.alpha, mu_s, t).abs() / a.max(mu_s).max(1.0));
    }
    checks.at_most("root_identity", root_err, 1e-12, String::new());

    let worst_residual = set
        .branches
        .iter()
        .map(|br| br.residual)
        .fold(0.0, f64::max);
    checks.at_most(
        "weak_residual",
        worst_residual,
        ctx.options.residual_tol,
        String::new(),
    );

    let third = a / (3.0 * b);
    let bands_ok = u1.norm_sq < third
        && third < u2.norm_sq
        && u2.norm_sq < a / b
        && a / b < u3.norm_sq
        && u3.norm_sq < 4.0 * third;
    checks.holds(
        "norm_band_order",
        bands_ok,
        u2.norm_sq,
        format!(
            "norm_sq=[{}, {}, {}]",
            fmt_num(u1.norm_sq),
            fmt_num(u2.norm_sq),
            fmt_num(u3.norm_sq)
        ),
    );
    let signs_ok = u1.sign_class == SignClass::Positive
        && u2.sign_class == SignClass::Positive
        && u3.sign_class == SignClass::Negative;
    checks.holds(
        "sign_structure",
        signs_ok,
        0.0,
        format!(
            "signs=[{}, {}, {}]",
            u1.sign_class, u2.sign_class, u3.sign_class
        ),
    );
    let level = a * a / (4.0 * b);
    let energy_ok = u1.energy < 0.0 && u2.energy < level && u3.energy > level;
    checks.holds(
        "energy_order",
        energy_ok,
        u2.energy,
        format!(
            "energy=[{}, {}, {}]",
            fmt_num(u1.energy),
            fmt_num(u2.energy),
            fmt_num(u3.energy)
        ),
    );

    let mut crit: f64 = 0.0;
    let mut ps_miss: f64 = 0.0;
    for br in &set.branches {
        crit = crit.max(critical_identity_residual(&p, &br.field)? / br.energy.abs().max(1.0));
        let gap = ps_limit_norms(a, b, br.energy)
            .limit_norms_sq
            .iter()
            .map(|s| (s - br.norm_sq).abs() / br.norm_sq)
            .fold(f64::INFINITY, f64::min);
        ps_miss = ps_miss.max(gap);
    }
    checks.at_most("critical_identity", crit, 1e-10, String::new());
    checks.at_most("ps_level_consistency", ps_miss, 1e-8, String::new());

    let dependence = check_linear_dependence(a, b, &set.branches)?;
    checks.at_most("linear_dependence", dependence, 1e-9, String::new());

    let mut rebuild: f64 = 0.0;
    for &pivot in &set.roots.roots {
        let mut rebuilt: Vec<f64> = rescale_roots(a, b, pivot * pivot * reduced.alpha)
            .roots
            .iter()
            .map(|s| s * pivot)
            .collect();
        rebuilt.sort_by(f64::total_cmp);
        for (x, y) in rebuilt.iter().zip(&set.roots.roots) {
            rebuild = rebuild.max((x - y).abs() / y.abs().max(1.0));
        }
    }
    checks.at_most("rescale_consistency", rebuild, 1e-10, String::new());

    let start = reduced.u.scaled(0.01);
    let descent = descent_minimize(&p, &start, 1.0, 1e-9, 10_000)?;
    checks.at_most(
        "descent_oracle",
        rel_h1_diff(&descent.field, &u1.field)?,
        1e-4,
        format!("iterations={}", descent.iterations),
    );

    // The mu = 0 sphere.
    let zero = ctx.params.with_mu(0.0);
    let op = LaplacianOperator::new(Arc::clone(&domain));
    let mut sphere: f64 = 0.0;
    let mut annihilation: f64 = 0.0;
    for _ in 0..10 {
        let v = zero_mu_scaling(a, b, &random_field(&domain, &mut rng))?;
        let norm_sq = h1_inner(&v, &v)?;
        sphere = sphere.max((norm_sq - a / b).abs() / (a / b));
        let lap = op.apply(&v)?;
        let coeff_lap = lap.scaled(a - b * norm_sq);
        let rel =
            (dot(coeff_lap.values(), coeff_lap.values()) / dot(lap.values(), lap.values())).sqrt();
        annihilation = annihilation.max(rel / a).max(weak_residual(&zero, &v)?);
    }
    checks.at_most("zero_mu_sphere", sphere, 1e-12, String::new());
    checks.at_most("zero_mu_annihilation", annihilation, 1e-10, String::new());

    // Energy along the ray matches the scalar profile.
    let mut ray: f64 = 0.0;
    for k in 0..20 {
        let t = -4.0 + 0.4 * k as f64;
        let al = reduced.alpha;
        let exact = 0.5 * a * t * t * al - 0.25 * b * t.powi(4) * al * al - mu_s * t * al;
        let got = energy_eval(&p, &reduced.u.scaled(t))?;
        ray = ray.max((got - exact).abs() / exact.abs().max(1e-3));
    }
    checks.at_most("ray_energy_identity", ray, 1e-8, String::new());

    Ok(VerifySummary {
        mu: mu_s,
        checks: checks.0,
    })
}

/// Writes the verification summary; fails with [`RunError::ChecksFailed`]
/// after writing when any check fails.
pub fn run_verify(cfg: &RunConfig) -> Result<PathBuf, RunError> {
    let summary = verify(cfg)?;
    let path = write_file(&cfg.out_dir, VERIFY_REPORT, &summary.render())?;
    match summary.failures() {
        0 => Ok(path),
        n => Err(RunError::ChecksFailed(n)),
    }
}
