//! Default numerical tolerances shared across modules.

/// Samples used to validate monotonicity and locate inflections.
pub const PROFILE_GRID_POINTS: usize = 4097;
/// `U''` counts as zero below this fraction of `sup |U''|`.
pub const INFLECTION_REL_TOL: f64 = 1e-10;
/// Residual of `U(x) = c` relative to the range of `U`.
pub const INVERT_REL_TOL: f64 = 1e-13;

pub const ODE_RTOL: f64 = 1e-10;
pub const ODE_ATOL: f64 = 1e-12;
/// Divisor in `r_loc = min(mu, distance to the walls) / factor`.
pub const R_LOC_FACTOR: f64 = 8.0;
/// Order of the local series about a critical layer.
pub const SERIES_TERMS: usize = 12;
/// Relative agreement required when the series order is doubled.
pub const SERIES_SELF_TEST_TOL: f64 = 1e-9;

/// `Y` is undefined when `|y(0)| < Y0_TOL * mu * sinh(h / mu)`.
pub const Y0_TOL: f64 = 1e-8;
/// `c` is flagged as sitting at `U(0)` within this fraction of the range.
pub const AT_SURFACE_REL_TOL: f64 = 1e-6;

/// Residual target for `k_-`.
pub const K_MINUS_FTOL: f64 = 1e-10;
/// Finite-difference nodes for the Sturm-Liouville problems.
pub const SL_NODES: usize = 2001;
/// Residual of the shooting polish for Sturm-Liouville eigenvalues.
pub const SL_POLISH_FTOL: f64 = 1e-6;
/// `k_C` is polished until `|y(0)|` drops below this.
pub const K_C_POLISH_TOL: f64 = 1e-8;
/// `k_C - k_1` below this marks a nearly-degenerate pair.
pub const ILL_CONDITIONED_GAP: f64 = 1e-4;

/// Contour margin as a fraction of `U(0) - U(-h)`.
pub const CONTOUR_MARGIN_REL: f64 = 1e-4;
/// Maximum argument jump between consecutive contour nodes.
pub const MAX_ARG_JUMP: f64 = std::f64::consts::FRAC_PI_4;
/// Step bounds for branch continuation in `k`.
pub const TRACE_STEP_MIN: f64 = 1e-5;
pub const TRACE_STEP_MAX: f64 = 0.1;
/// Residual accepted by the Newton corrector, relative to `|dF/dc|`.
pub const NEWTON_TOL: f64 = 1e-11;
/// Finite-difference step for bifurcation slopes.
pub const SLOPE_FD_STEP: f64 = 1e-6;
/// Quadtree depth for locating unstable modes.
pub const CENSUS_MAX_DEPTH: usize = 12;
/// `|dF/dc|` below this (relative to `1 + g`) marks a multiple root.
pub const SIMPLE_ROOT_TOL: f64 = 1e-6;
/// Residual `|F|` accepted on a traced branch, relative to `1 + g`.
pub const BRANCH_FTOL: f64 = 1e-8;
/// Newton iterations allowed when polishing a large-k seed.
pub const SEED_NEWTON_STEPS: usize = 8;
/// Grid points on the range scanned for sign changes of `Re F` in a census.
pub const WEAK_SCAN_POINTS: usize = 64;
