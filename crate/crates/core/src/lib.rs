//! Finite-dimensional machinery for moment problems on algebras generated by
//! seminormed vector spaces.
//!
//! Everything here works on truncations: Hilbertian seminorms on `R^n` are
//! Gram matrices, elements of the symmetric algebra are degree-bounded sparse
//! polynomials, and measures are finitely atomic. The modules mirror the
//! layers of the theory:
//!
//! * [`seminorm`] and [`trace`]: Hilbertian seminorms, dual norms, kernels and
//!   the relative trace `tr(p/q)`.
//! * [`gaussian`]: Gaussian measures attached to a seminorm and the
//!   quantitative concentration lemma for discrete measures on the dual.
//! * [`algebra`] and [`graded`]: the truncated symmetric algebra, characters
//!   and the graded seminorms built from a seminorm on the generators.
//! * [`moment`] and [`carleman`]: moment functionals, moment/localizing
//!   matrices, continuity constants and quasi-analyticity diagnostics.
//! * [`concentration`] and [`scenario`]: families of marginal measures,
//!   p-concentration certificates, compact-mass bounds and the end-to-end
//!   representation pipeline.
//! * [`solver`]: atomic measure recovery from truncated moment sequences.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod carleman;
pub mod concentration;
pub mod error;
pub mod extended;
pub mod gaussian;
pub mod graded;
pub mod linalg;
pub mod measure;
pub mod moment;
pub mod scenario;
pub mod seminorm;
pub mod solver;
pub mod tolerances;
pub mod trace;

pub use algebra::{AlgebraElement, Character, MultiIndex};
pub use concentration::{MeasureFamily, SubalgebraIndex};
pub use moment::{MomentFunctional, QuadraticModuleSpec};
pub use scenario::{verify_main_theorem_scenario, ScenarioInput, ScenarioReport};
pub use solver::{solve_multivariate, solve_univariate, SolverResult};
pub use error::{Error, Result};
pub use extended::Extended;
pub use measure::DiscreteMeasure;

pub use seminorm::{DualFunctional, GramForm, OrthonormalSystem};
pub use trace::TraceReport;
