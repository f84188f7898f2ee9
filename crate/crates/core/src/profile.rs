//! Monotone shear profiles `U(x2)` on the channel `[-h, 0]`.

use num_complex::Complex64;

use crate::expr::{ParseError, ProfileExpr};
use crate::scalar::Jet;
use crate::tolerances::{INFLECTION_REL_TOL, INVERT_REL_TOL, PROFILE_GRID_POINTS};

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("cannot parse profile: {0}")]
    Parse(#[from] ParseError),
    #[error("depth must be positive and finite, got {0}")]
    InvalidDepth(f64),
    #[error("profile is not strictly increasing near x2 = {x}")]
    NotMonotone { x: f64 },
    #[error("profile or a derivative is not finite at x2 = {x}")]
    NotSmoothEnough { x: f64 },
    #[error("value {c} is outside the range of the profile on the extended interval")]
    OutOfRange { c: f64 },
}

/// A point where `U''` changes sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inflection {
    /// Depth of the sign change.
    pub x: f64,
    /// Inflection value `U(x)`.
    pub value: f64,
    /// `U'''(x)`.
    pub third: f64,
    /// Sign of `U'''(x)`, zero when it vanishes to tolerance.
    pub sign: i8,
}

/// The sub-interval of `[-h, 0]` where `1/|U - c|` exceeds `rho0 * mu^(-3/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval3Split {
    pub mu: f64,
    pub rho0: f64,
    /// `None` when the near-singular zone is empty.
    pub inner: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ShearProfile {
    expr: ProfileExpr,
    derivatives: [ProfileExpr; 4],
    depth: f64,
    margin: f64,
    bottom: f64,
    surface: f64,
    min_slope: f64,
    min_slope_interior: f64,
    max_curvature: f64,
    inflections: Vec<Inflection>,
    degenerate_zeros: Vec<f64>,
}

/// `mu = (1 + k^2)^(-1/2)`.
pub fn mu(k: f64) -> f64 {
    1.0 / (1.0 + k * k).sqrt()
}

impl ShearProfile {
    pub fn parse(text: &str, depth: f64) -> Result<Self, ProfileError> {
        Self::new(ProfileExpr::parse(text)?, depth)
    }

    pub fn new(expr: ProfileExpr, depth: f64) -> Result<Self, ProfileError> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(ProfileError::InvalidDepth(depth));
        }
        let d1 = expr.derivative();
        let d2 = d1.derivative();
        let d3 = d2.derivative();
        let d4 = d3.derivative();
        let mut profile = Self {
            expr,
            derivatives: [d1, d2, d3, d4],
            depth,
            margin: 0.0,
            bottom: 0.0,
            surface: 0.0,
            min_slope: 0.0,
            min_slope_interior: 0.0,
            max_curvature: 0.0,
            inflections: Vec::new(),
            degenerate_zeros: Vec::new(),
        };

        let grid = uniform(-depth, 0.0, PROFILE_GRID_POINTS);
        for &x in &grid {
            let vals = [profile.u(x), profile.du(x), profile.d2u(x), profile.d3u(x), profile.d4u(x)];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(ProfileError::NotSmoothEnough { x });
            }
            if vals[1] <= 0.0 {
                return Err(ProfileError::NotMonotone { x });
            }
        }
        profile.min_slope_interior = refine_extremum(&grid, |x| profile.du(x), false);
        profile.max_curvature = refine_extremum(&grid, |x| profile.d2u(x).abs(), true);
        profile.margin = margin_from(depth, profile.min_slope_interior, profile.max_curvature);

        let extended = uniform(-depth - profile.margin, profile.margin, PROFILE_GRID_POINTS);
        for &x in &extended {
            let (v, dv, d2v) = (profile.u(x), profile.du(x), profile.d2u(x));
            if !(v.is_finite() && dv.is_finite() && d2v.is_finite()) {
                return Err(ProfileError::NotSmoothEnough { x });
            }
            if dv <= 0.0 {
                return Err(ProfileError::NotMonotone { x });
            }
        }
        profile.min_slope = refine_extremum(&extended, |x| profile.du(x), false);
        profile.bottom = profile.u(-depth);
        profile.surface = profile.u(0.0);
        profile.locate_inflections(&grid);
        Ok(profile)
    }

    fn locate_inflections(&mut self, grid: &[f64]) {
        let scale = self.max_curvature;
        if scale == 0.0 {
            return;
        }
        let tol = INFLECTION_REL_TOL * scale;
        let curv: Vec<f64> = grid.iter().map(|&x| self.d2u(x)).collect();
        let sign = |v: f64| {
            if v.abs() <= tol {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        };

        let mut last: Option<(usize, i32)> = None;
        for (i, &v) in curv.iter().enumerate() {
            let s = sign(v);
            if s == 0 {
                continue;
            }
            if let Some((j, sj)) = last {
                if sj != s {
                    let x = bisect_sign(|x| self.d2u(x), grid[j], grid[i]);
                    if x > -self.depth && x < 0.0 {
                        let third = self.d3u(x);
                        let sign = if third.abs() <= tol.max(f64::EPSILON) {
                            0
                        } else if third > 0.0 {
                            1
                        } else {
                            -1
                        };
                        self.inflections.push(Inflection { x, value: self.u(x), third, sign });
                    }
                }
            }
            last = Some((i, s));
        }

        // touching zeros of U'' that do not change sign
        for i in 1..grid.len() - 1 {
            let (a, b, c) = (curv[i - 1].abs(), curv[i].abs(), curv[i + 1].abs());
            if !(b <= a && b <= c) || curv[i - 1] * curv[i + 1] < 0.0 {
                continue;
            }
            let (x, v) = golden_min(|x| self.d2u(x).abs(), grid[i - 1], grid[i + 1]);
            let flanks_agree = self.d2u(grid[i - 1]) * self.d2u(grid[i + 1]) > 0.0;
            if v <= tol && flanks_agree && !self.degenerate_zeros.iter().any(|z| (z - x).abs() < 1e-9) {
                log::warn!("U'' touches zero without changing sign at x2 = {x:.12}; not an inflection");
                self.degenerate_zeros.push(x);
            }
        }
    }

    pub fn expr(&self) -> &ProfileExpr {
        &self.expr
    }

    /// The `n`-th derivative as an expression, `n` in `1..=4`.
    pub fn derivative_expr(&self, n: usize) -> &ProfileExpr {
        &self.derivatives[n - 1]
    }

    pub fn u(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }
    pub fn du(&self, x: f64) -> f64 {
        self.derivatives[0].eval(x)
    }
    pub fn d2u(&self, x: f64) -> f64 {
        self.derivatives[1].eval(x)
    }
    pub fn d3u(&self, x: f64) -> f64 {
        self.derivatives[2].eval(x)
    }
    pub fn d4u(&self, x: f64) -> f64 {
        self.derivatives[3].eval(x)
    }

    pub fn u_complex(&self, z: Complex64) -> Complex64 {
        self.expr.eval(z)
    }
    pub fn d2u_complex(&self, z: Complex64) -> Complex64 {
        self.derivatives[1].eval(z)
    }

    /// Taylor coefficients of `U` and `U''` about `x0`.
    pub fn taylor(&self, x0: f64) -> (Jet, Jet) {
        let t = Jet::variable(x0);
        (self.expr.eval(t), self.derivatives[1].eval(t))
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }
    /// Extension margin `h0`.
    pub fn margin(&self) -> f64 {
        self.margin
    }
    /// `U(-h)`.
    pub fn u_min(&self) -> f64 {
        self.bottom
    }
    /// `U(0)`.
    pub fn u_max(&self) -> f64 {
        self.surface
    }
    pub fn range(&self) -> f64 {
        self.surface - self.bottom
    }
    /// `inf U'` over the extended interval `[-h - h0, h0]`.
    pub fn min_slope(&self) -> f64 {
        self.min_slope
    }
    /// `inf U'` over `[-h, 0]`.
    pub fn min_slope_interior(&self) -> f64 {
        self.min_slope_interior
    }
    /// `sup |U''|` over `[-h, 0]`.
    pub fn max_curvature(&self) -> f64 {
        self.max_curvature
    }
    pub fn inflections(&self) -> &[Inflection] {
        &self.inflections
    }
    pub fn degenerate_zeros(&self) -> &[f64] {
        &self.degenerate_zeros
    }

    /// `rho0 = 4 / (h0 * inf U')`.
    pub fn rho0(&self) -> f64 {
        4.0 / (self.margin * self.min_slope)
    }

    /// Recompute `h0` from the stored slope and curvature bounds.
    pub fn recompute_margin(&self) -> f64 {
        margin_from(self.depth, self.min_slope_interior, self.max_curvature)
    }

    pub fn inflection_near(&self, value: f64, tol: f64) -> Option<&Inflection> {
        self.inflections.iter().find(|inf| (inf.value - value).abs() <= tol)
    }

    /// Solve `U(x) = c` on the extended interval with safeguarded Newton.
    pub fn invert(&self, c: f64) -> Result<f64, ProfileError> {
        let mut lo = -self.depth - self.margin;
        let mut hi = self.margin;
        let (ulo, uhi) = (self.u(lo), self.u(hi));
        if !(c >= ulo && c <= uhi) {
            return Err(ProfileError::OutOfRange { c });
        }
        let tol = INVERT_REL_TOL * self.range();
        if (ulo - c).abs() <= tol {
            return Ok(lo);
        }
        if (uhi - c).abs() <= tol {
            return Ok(hi);
        }
        let mut x = lo + (c - ulo) / (uhi - ulo) * (hi - lo);
        for _ in 0..200 {
            let r = self.u(x) - c;
            if r.abs() <= tol {
                return Ok(x);
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = x - r / self.du(x);
            x = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
            if hi - lo < 4.0 * f64::EPSILON * (1.0 + x.abs()) {
                return Ok(x);
            }
        }
        Ok(x)
    }

    /// Near-singular zone of the Rayleigh coefficient for wavenumber `k`
    /// and wave speed `c`.
    pub fn split_intervals(&self, k: f64, c: Complex64) -> Interval3Split {
        let mu = mu(k);
        let rho0 = self.rho0();
        let reach = mu.powf(1.5) / rho0;
        let inner = if c.im.abs() >= reach {
            None
        } else {
            let half = (reach * reach - c.im * c.im).sqrt();
            let (lo_val, hi_val) = (c.re - half, c.re + half);
            if hi_val <= self.bottom || lo_val >= self.surface {
                None
            } else {
                let lo = if lo_val <= self.bottom { -self.depth } else { self.invert(lo_val).unwrap_or(-self.depth) };
                let hi = if hi_val >= self.surface { 0.0 } else { self.invert(hi_val).unwrap_or(0.0) };
                Some((lo, hi))
            }
        };
        Interval3Split { mu, rho0, inner }
    }

    /// Threshold below which a complex `c` counts as touching the range of `U`.
    pub fn regular_threshold(&self, k: f64) -> f64 {
        mu(k) / (2.0 * self.rho0())
    }

    /// Distance from `c` to the segment `[U(-h), U(0)]`.
    pub fn distance_to_range(&self, c: Complex64) -> f64 {
        let dx = if c.re < self.bottom {
            self.bottom - c.re
        } else if c.re > self.surface {
            c.re - self.surface
        } else {
            0.0
        };
        dx.hypot(c.im)
    }

    /// `U''/(U - c)`, with the removable singularity at an inflection value
    /// handled by l'Hopital.
    pub fn rayleigh_potential(&self, x: f64, c: f64) -> f64 {
        let diff = self.u(x) - c;
        if diff.abs() <= 1e-9 * self.range() {
            let xc = self.invert(c).unwrap_or(x);
            if self.d2u(xc).abs() <= INFLECTION_REL_TOL * self.max_curvature.max(1.0) {
                return self.d3u(xc) / self.du(xc);
            }
        }
        self.d2u(x) / diff
    }
}

fn margin_from(depth: f64, min_slope: f64, max_curvature: f64) -> f64 {
    if max_curvature == 0.0 {
        depth / 2.0
    } else {
        (depth / 2.0).min(min_slope / (4.0 * max_curvature))
    }
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn refine_extremum(grid: &[f64], f: impl Fn(f64) -> f64, maximise: bool) -> f64 {
    let sign = if maximise { 1.0 } else { -1.0 };
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| (i, sign * f(x)))
        .fold((0, f64::NEG_INFINITY), |acc, item| if item.1 > acc.1 { item } else { acc });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (_, v) = golden_min(|x| -sign * f(x), lo, hi);
    let refined = -v * sign;
    let at_grid = f(grid[best]);
    if maximise {
        refined.max(at_grid)
    } else {
        refined.min(at_grid)
    }
}

fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn bisect_sign(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn couette_has_no_inflection_and_half_depth_margin() {
        let p = ShearProfile::parse("x2", 1.0).unwrap();
        assert!(p.inflections().is_empty());
        assert_eq!(p.margin(), 0.5);
        assert_eq!(p.u_min(), -1.0);
        assert_eq!(p.u_max(), 0.0);
    }

    #[test]
    fn tanh_profile_inflection() {
        let p = ShearProfile::parse("tanh(2*(x2+1))", 2.0).unwrap();
        assert_eq!(p.inflections().len(), 1);
        let inf = p.inflections()[0];
        assert!((inf.x + 1.0).abs() < 1e-11);
        assert!(inf.value.abs() < 1e-11);
        assert_eq!(inf.sign, -1);
    }

    #[test]
    fn cubic_profile_inflection_sign() {
        let p = ShearProfile::parse("1 + x2 + ((1+x2)^3)/2", 2.0).unwrap();
        let inf = p.inflections()[0];
        assert!((inf.x + 1.0).abs() < 1e-11);
        assert!(inf.value.abs() < 1e-11);
        assert_eq!(inf.sign, 1);
    }

    #[test]
    fn non_monotone_profile_rejected() {
        let err = ShearProfile::parse("sin(10*x2)", 1.0).unwrap_err();
        match err {
            ProfileError::NotMonotone { x } => assert!(10.0 * (10.0 * x).cos() <= 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singular_profile_rejected() {
        assert!(matches!(
            ShearProfile::parse("x2 + 1/(x2+0.5)^2", 1.0),
            Err(ProfileError::NotSmoothEnough { .. }) | Err(ProfileError::NotMonotone { .. })
        ));
    }

    #[test]
    fn touching_zero_of_curvature_is_reported_not_kept() {
        // U'' = 12 (x2 + 0.5)^2 touches zero at -0.5
        let p = ShearProfile::parse("x2 + (x2+0.5)^4", 1.0).unwrap();
        assert!(p.inflections().is_empty());
        assert_eq!(p.degenerate_zeros().len(), 1);
        assert!((p.degenerate_zeros()[0] + 0.5).abs() < 1e-3);
    }

    #[test]
    fn inversion_outside_extended_range_fails() {
        let p = ShearProfile::parse("x2", 1.0).unwrap();
        assert!(matches!(p.invert(-2.0), Err(ProfileError::OutOfRange { .. })));
        assert!((p.invert(-0.25).unwrap() + 0.25).abs() < 1e-13);
    }

    #[test]
    fn near_singular_zone_for_couette() {
        let p = ShearProfile::parse("x2", 1.0).unwrap();
        assert!(p.split_intervals(0.0, Complex64::new(10.0, 0.0)).inner.is_none());
        let s = p.split_intervals(0.0, Complex64::new(-0.5, 0.0));
        let (a, b) = s.inner.unwrap();
        assert!((a + 0.625).abs() < 1e-12 && (b + 0.375).abs() < 1e-12);
    }
}
