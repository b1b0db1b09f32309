//! Numerical thresholds shared across modules.

/// Default relative eigenvalue cutoff for rank and kernel decisions.
pub const PSD_TOL: f64 = 1e-10;

/// Symmetry check on incoming Gram matrices (relative to the largest entry).
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Relative agreement between two routes to the same trace.
pub const TRACE_AGREEMENT: f64 = 1e-9;

/// Slack allowed in inequality checks (relative).
pub const INEQUALITY_SLACK: f64 = 1e-9;

/// Singular values below this fraction of the largest count as rank deficiency.
pub const FLAT_RANK_TOL: f64 = 1e-9;

/// Weights below this are treated as genuinely negative by the solver.
pub const NEGATIVE_WEIGHT_TOL: f64 = 1e-8;

/// Condition number beyond which basis extraction is refused.
pub const MAX_CONDITION: f64 = 1e10;

/// Moment agreement used when comparing marginals.
pub const MOMENT_MATCH_TOL: f64 = 1e-10;

/// Number of standard errors a Monte-Carlo estimate may deviate.
pub const MC_SIGMAS: f64 = 4.0;
