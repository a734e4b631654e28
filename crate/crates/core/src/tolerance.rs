//! Numerical tolerances shared by the LP kernel and the depth code.

/// Smallest admissible pivot magnitude (simplex and Cholesky).
pub const PIVOT_TOL: f64 = 1e-12;

/// Residual phase-one objective above which an LP is declared infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-7;

/// Reduced-cost threshold for optimality.
pub const OPTIMALITY_TOL: f64 = 1e-9;

/// Depth values within this distance outside `[0, 1]` are clamped.
pub const DEPTH_CLAMP_TOL: f64 = 1e-9;
