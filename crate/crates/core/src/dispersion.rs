//! The dispersion function built from the surface values of the Rayleigh
//! solution:
//!
//! * `Y(k, c) = y'(0)/y(0)`;
//! * `F(k, c) = Y (U(0) - c)^2 - U'(0)(U(0) - c) - g`, and `F - sigma k^2`
//!   with surface tension;
//! * the pole-free form `Fbold = (U(0) - c)^2 y'(0) - (U'(0)(U(0) - c) + g) y(0)`
//!   (less `sigma k^2 y(0)`), whose zeros are the same as those of `F`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::contour::{winding, ContourError, Region};
use crate::profile::{mu, ShearProfile};
use crate::quadrature;
use crate::rayleigh::{self, RayError, SolverOptions, SurfaceValues};
use crate::tolerances::{AT_SURFACE_REL_TOL, CONTOUR_MARGIN_REL, Y0_TOL};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error("c = {c} is at U(0), where Y has a logarithmic singularity")]
    AtU0 { c: Complex64 },
    #[error("y(0) vanishes at k = {k}, c = {c}")]
    Y0Vanishes { k: f64, c: Complex64 },
    #[error("c = {c} is not strictly inside the range of U")]
    NotOnRange { c: f64 },
    #[error("could not verify that y(0) has no zeros: {0}")]
    PreconditionUnverified(String),
}

/// Gravity and surface tension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    pub g: f64,
    pub sigma: f64,
}

impl Physics {
    pub fn gravity(g: f64) -> Self {
        Self { g, sigma: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleValidity {
    Ok,
    Y0Vanishes,
    AtU0,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSample {
    pub k: f64,
    pub c: Complex64,
    /// `Y(k, c)`, absent when `y(0)` vanishes or `c` sits at `U(0)`.
    pub y: Option<Complex64>,
    /// `F(k, c)` without surface tension.
    pub f: Option<Complex64>,
    /// `F(k, c) - sigma k^2`.
    pub f_sigma: Option<Complex64>,
    /// Mantissa of the pole-free form (with surface tension); the true
    /// value is `fbold * exp(ln_scale)`.
    pub fbold: Complex64,
    pub ln_scale: f64,
    pub sigma: f64,
    pub validity: SampleValidity,
}

/// `|y(0)|` below this (in log form) counts as vanishing.
fn ln_y0_floor(profile: &ShearProfile, k: f64) -> f64 {
    let m = mu(k);
    let arg = profile.depth() / m;
    let ln_sinh = arg + (-(-2.0 * arg).exp_m1()).ln() - std::f64::consts::LN_2;
    Y0_TOL.ln() + m.ln() + ln_sinh
}

fn at_surface(profile: &ShearProfile, c: Complex64) -> bool {
    (c - Complex64::new(profile.u_max(), 0.0)).norm() < AT_SURFACE_REL_TOL * profile.range()
}

fn sample_from(profile: &ShearProfile, physics: &Physics, k: f64, c: Complex64, s: &SurfaceValues) -> DispersionSample {
    let du0 = profile.du(0.0);
    let rel = Complex64::new(profile.u_max(), 0.0) - c;
    let robin = du0 * rel + physics.g;
    let cap = physics.sigma * k * k;
    let fbold = rel * rel * s.yp - (robin + cap) * s.y;
    let vanishes = s.ln_abs_y() < ln_y0_floor(profile, k);
    let near_surface = at_surface(profile, c);
    let validity = if near_surface {
        SampleValidity::AtU0
    } else if vanishes {
        SampleValidity::Y0Vanishes
    } else {
        SampleValidity::Ok
    };
    let (y, f) = if vanishes {
        (None, None)
    } else {
        let y = s.log_derivative();
        let f = y * rel * rel - du0 * rel - physics.g;
        (if near_surface { None } else { Some(y) }, Some(f))
    };
    DispersionSample {
        k,
        c,
        y,
        f,
        f_sigma: f.map(|f| f - cap),
        fbold,
        ln_scale: s.ln_scale,
        sigma: physics.sigma,
        validity,
    }
}

/// `Y(k, c)`; on the range of `U` this is the limit from above.
pub fn eval_y(
    profile: &ShearProfile,
    k: f64,
    c: Complex64,
    opts: &SolverOptions,
) -> Result<Complex64, DispersionError> {
    if at_surface(profile, c) {
        return Err(DispersionError::AtU0 { c });
    }
    let s = rayleigh::shoot(profile, k, c, opts)?;
    if s.ln_abs_y() < ln_y0_floor(profile, k) {
        return Err(DispersionError::Y0Vanishes { k, c });
    }
    Ok(s.log_derivative())
}

/// Full dispersion sample at `(k, c)`.
pub fn eval_f(
    profile: &ShearProfile,
    physics: &Physics,
    k: f64,
    c: Complex64,
    opts: &SolverOptions,
) -> Result<DispersionSample, DispersionError> {
    if c == Complex64::new(profile.u_max(), 0.0) {
        // F -> -g at the end of the range; y(0) itself stays finite
        let nudged = c + Complex64::new(0.0, 1e-8 * profile.range());
        let s = rayleigh::shoot(profile, k, nudged, opts)?;
        let mut sample = sample_from(profile, physics, k, c, &s);
        let cap = physics.sigma * k * k;
        sample.fbold = -(physics.g + cap) * s.y;
        sample.f = Some(Complex64::new(-physics.g, 0.0));
        sample.f_sigma = Some(Complex64::new(-physics.g - cap, 0.0));
        sample.y = None;
        return Ok(sample);
    }
    let s = rayleigh::shoot(profile, k, c, opts)?;
    Ok(sample_from(profile, physics, k, c, &s))
}

/// Same as [`eval_f`] but continued analytically from the upper half plane
/// slightly across the interior of the range of `U`.
pub fn eval_f_continued(
    profile: &ShearProfile,
    physics: &Physics,
    k: f64,
    c: Complex64,
    opts: &SolverOptions,
) -> Result<DispersionSample, DispersionError> {
    if c.im >= 0.0 {
        return eval_f(profile, physics, k, c, opts);
    }
    let s = rayleigh::shoot_continued(profile, k, c, opts)?;
    Ok(sample_from(profile, physics, k, c, &s))
}

/// `Im Y` on the range from the critical-layer value of the solution:
/// `pi U''(x_c) y(x_c)^2 / (U'(x_c) |y(0)|^2)`.
pub fn eval_yi_formula(profile: &ShearProfile, k: f64, c: f64, opts: &SolverOptions) -> Result<f64, DispersionError> {
    if !(c > profile.u_min() && c < profile.u_max()) {
        return Err(DispersionError::NotOnRange { c });
    }
    let s = rayleigh::shoot(profile, k, Complex64::new(c, 0.0), opts)?;
    if s.ln_abs_y() < ln_y0_floor(profile, k) {
        return Err(DispersionError::Y0Vanishes { k, c: Complex64::new(c, 0.0) });
    }
    let cl = s.critical.expect("limit solution carries critical-layer data");
    let ratio = (cl.y_at_xc / s.y.norm()).powi(2).re * (2.0 * (cl.ln_scale - s.ln_scale)).exp();
    Ok(PI * profile.d2u(cl.x_c) * ratio / profile.du(cl.x_c))
}

/// `k coth(k h)`, with the `1/h` limit at `k = 0`.
pub fn far_field_y(k: f64, depth: f64) -> f64 {
    if k.abs() < 1e-8 {
        1.0 / depth
    } else {
        k / (k * depth).tanh()
    }
}

/// Residual of the Cauchy representation
/// `Y(c) = (1/pi) int Y_I(c')/(c' - c) dc' + k coth(k h)`.
pub fn cauchy_residual(
    profile: &ShearProfile,
    k: f64,
    c: Complex64,
    opts: &SolverOptions,
) -> Result<f64, DispersionError> {
    verify_no_channel_modes(profile, k, opts)?;
    let y = eval_y(profile, k, c, opts)?;
    let h = profile.depth();
    let integrand = |x: f64, part: usize| -> Result<f64, DispersionError> {
        let u = profile.u(x);
        let yi = eval_yi_formula(profile, k, u, opts)?;
        let kernel = profile.du(x) / (Complex64::new(u, 0.0) - c);
        Ok(if part == 0 { yi * kernel.re } else { yi * kernel.im })
    };
    let mut parts = [0.0; 2];
    for (part, slot) in parts.iter_mut().enumerate() {
        let mut f = |x: f64| integrand(x, part);
        *slot = quadrature::integrate(&mut f, -h, 0.0, 1e-9, 30)?;
    }
    let rep = Complex64::new(parts[0], parts[1]) / PI + far_field_y(k, h);
    Ok((y - rep).norm())
}

/// Check that `y(0)` has no zeros off the range of `U`: no sign change on
/// the real axis outside the range and zero winding over the half disk
/// containing the range.
pub fn verify_no_channel_modes(profile: &ShearProfile, k: f64, opts: &SolverOptions) -> Result<(), DispersionError> {
    let range = profile.range();
    let (lo, hi) = (profile.u_min(), profile.u_max());
    let y0 = |c: Complex64| rayleigh::shoot(profile, k, c, opts).map(|s| s.y);
    let unverified = |msg: String| DispersionError::PreconditionUnverified(msg);

    let reach = 3.0 * range;
    for side in [-1.0, 1.0] {
        let base = if side < 0.0 { lo } else { hi };
        let mut prev: Option<f64> = None;
        for i in 1..=200 {
            let c = base + side * reach * (i as f64 / 200.0).powi(2);
            let v = y0(Complex64::new(c, 0.0))?.re;
            if let Some(p) = prev {
                if p * v <= 0.0 {
                    return Err(unverified(format!("y(0) changes sign near c = {c}")));
                }
            }
            prev = Some(v);
        }
    }
    let margin = CONTOUR_MARGIN_REL * range;
    let region = Region::UpperSemidisk { center: 0.5 * (lo + hi), radius: 0.5 * range + margin, floor: margin };
    match winding(&|c| y0(c), &region, 64) {
        Ok(w) if w.count == 0 => Ok(()),
        Ok(w) => Err(unverified(format!("y(0) has {} zero(s) in the upper half disk", w.count))),
        Err(ContourError::Function(e)) => Err(e.into()),
        Err(e) => Err(unverified(e.to_string())),
    }
}

/// Scan table rows `k, c_R, c_I, Re F, Im F`.
pub fn scan_csv(samples: &[DispersionSample]) -> String {
    let mut out = String::from("k,c_re,c_im,re_f,im_f\n");
    for s in samples {
        let f = s.f_sigma.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        out.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n", s.k, s.c.re, s.c.im, f.re, f.im));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn couette() -> ShearProfile {
        ShearProfile::parse("x2", 1.0).unwrap()
    }

    #[test]
    fn couette_y_is_k_coth_k() {
        let y = eval_y(&couette(), 2.0, Complex64::new(0.5, 0.0), &SolverOptions::default()).unwrap();
        assert!((y.re - 2.0 / 2f64.tanh()).abs() < 1e-9);
    }

    #[test]
    fn couette_long_wave_values() {
        let p = couette();
        let opts = SolverOptions::default();
        let c = Complex64::new(-2.0, 0.0);
        assert!((eval_y(&p, 0.0, c, &opts).unwrap().re - 1.0).abs() < 1e-10);
        let s = eval_f(&p, &Physics::gravity(1.0), 0.0, c, &opts).unwrap();
        assert!((s.f.unwrap().re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn couette_f_on_range_is_real_polynomial() {
        let p = couette();
        let s = eval_f(&p, &Physics::gravity(1.0), 1.0, Complex64::new(0.6, 0.0), &SolverOptions::default()).unwrap();
        let expect = 1.0 / 1f64.tanh() * 0.36 + 0.6 - 1.0;
        assert!((s.f.unwrap().re - expect).abs() < 1e-9);
        assert!((s.f.unwrap().re - 0.07270).abs() < 1e-5);
    }

    #[test]
    fn surface_value_gives_minus_g() {
        let p = ShearProfile::parse("tanh(2*(x2+1))", 2.0).unwrap();
        let s =
            eval_f(&p, &Physics::gravity(1.0), 1.0, Complex64::new(p.u_max(), 0.0), &SolverOptions::default()).unwrap();
        assert_eq!(s.f.unwrap(), Complex64::new(-1.0, 0.0));
        assert_eq!(s.validity, SampleValidity::AtU0);
    }

    #[test]
    fn yi_formula_matches_limit() {
        let p = ShearProfile::parse("tanh(2*(x2+1))", 2.0).unwrap();
        let opts = SolverOptions::default();
        for c in [-0.8, -0.2, 0.3, 0.9] {
            let y = eval_y(&p, 1.0, Complex64::new(c, 0.0), &opts).unwrap();
            let yi = eval_yi_formula(&p, 1.0, c, &opts).unwrap();
            assert!((y.im - yi).abs() < 1e-8 * (1.0 + y.norm()), "c = {c}: {} vs {yi}", y.im);
        }
    }
}
