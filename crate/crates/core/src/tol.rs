//! Numerical tolerances shared by every module.

/// Absolute tolerance on bandwidth quantities (Gb/s). A link with no more
/// than this much available bandwidth is treated as saturated.
pub const BANDWIDTH: f64 = 1e-9;

/// Relative tolerance used when comparing completion times.
pub const CT_REL: f64 = 1e-9;

/// Primal feasibility tolerance of the simplex solver.
pub const LP_FEASIBILITY: f64 = 1e-7;

/// Reduced-cost (dual feasibility) tolerance of the simplex solver.
pub const LP_REDUCED_COST: f64 = 1e-9;

/// Smallest pivot magnitude the simplex ratio test will accept.
pub const LP_PIVOT: f64 = 1e-9;

/// True when `a` is no larger than `b` up to a relative tolerance.
pub fn rel_le(a: f64, b: f64, rel: f64) -> bool {
    a <= b + rel * b.abs().max(a.abs())
}

/// Relative difference, guarded against division by zero.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
