//! Solutions of the nonlocal problem `-(a - b |grad u|^2) lap u = mu f` with
//! zero boundary values on intervals and rectangles.
//!
//! The nonlocal coefficient is a single scalar, so every solution is a
//! multiple `t U` of the Poisson solution `-lap U = f`, with `t` a real root
//! of `(a - b alpha t^2) t = mu` and `alpha = |U|^2`. The crate computes `U`
//! on a finite-difference grid, enumerates the roots, and verifies the
//! resulting branches against the variational structure of the problem.

pub mod config;
pub mod elliptic;
pub mod energy;
pub mod error;
pub mod grid;
pub mod pipeline;
pub mod reduction;
pub mod report;

pub use error::{Error, Result};
pub use grid::{DomainSpec, GridField};
