//! Numerical tolerances shared across the crate.

/// Coordinate membership slack for `contains` and grid output checks.
pub const MEMBERSHIP: f64 = 1e-9;

/// Slack allowed when comparing a lower bound against its upper bound.
pub const BOUND_ORDER: f64 = 1e-12;

/// Slack on `sum(theta) == 1`.
pub const SIMPLEX_SUM: f64 = 1e-10;

/// Absolute tolerance for merging equal partial sums in the convolution DP.
pub const DP_MERGE: f64 = 1e-12;

/// Final bracket width of golden-section refinement.
pub const GOLDEN_XTOL: f64 = 1e-8;

/// Pre-scan and refinement must agree to this for a nested search to count as certified.
pub const NESTED_AGREEMENT: f64 = 1e-6;

/// Resolution of the feasibility probe run when a domain is built.
pub const PROBE_RESOLUTION: usize = 64;
