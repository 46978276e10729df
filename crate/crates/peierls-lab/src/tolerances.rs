//! Numerical thresholds shared across modules.

/// `|g⁻¹(ξ,ξ)| ≤ NULL_REL·|ξ|²` counts as null.
pub const NULL_REL: f64 = 1e-12;

/// Relative threshold for support estimation from gradient densities.
pub const SUPPORT_REL: f64 = 1e-10;

/// Floor relative to the largest gradient over all probes.
pub const SUPPORT_FLOOR: f64 = 1e-13;

/// Relative band around zero for the hyperbolicity classifier.
pub const CLASSIFY_REL: f64 = 1e-9;

/// Arc-containment slack for metric comparisons (radians).
pub const CONE_ANGLE: f64 = 1e-10;

/// Slack applied to cone slopes before rounding to lattice reach.
pub const REACH_SLACK: f64 = 1e-9;

/// Budgets for algebraic identities that are exact in exact arithmetic.
pub const IDENTITY_REL: f64 = 1e-9;

/// Budget for finite-difference cross-checks.
pub const FD_REL: f64 = 1e-6;
