//! Neutral modes with the wave speed on the range of `U`: the bottom-speed
//! mode at `k_-`, and the modes at inflection values together with their
//! Sturm-Liouville cross-checks.

use num_complex::Complex64;

use crate::dispersion::{self, DispersionError, Physics};
use crate::profile::{Inflection, ShearProfile};
use crate::rayleigh::{self, Grid, SolverOptions};
use crate::roots::{brent, golden_max, RootError};
use crate::sturm::Tridiagonal;
use crate::tolerances::{ILL_CONDITIONED_GAP, K_C_POLISH_TOL, K_MINUS_FTOL, SL_NODES};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ModeError {
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error("{0} is not an inflection value of the profile")]
    NotInflection(f64),
    #[error("no sign change of {what} found up to k = {k_max}")]
    NoBracket { what: &'static str, k_max: f64 },
    #[error("root finding for {what} did not converge")]
    NoConvergence { what: &'static str },
}

impl From<RootError<DispersionError>> for ModeError {
    fn from(e: RootError<DispersionError>) -> Self {
        match e {
            RootError::Objective(d) => ModeError::Dispersion(d),
            RootError::NotBracketed { hi, .. } => ModeError::NoBracket { what: "dispersion", k_max: hi },
            RootError::NoConvergence(_) => ModeError::NoConvergence { what: "dispersion" },
        }
    }
}

impl From<crate::rayleigh::RayError> for ModeError {
    fn from(e: crate::rayleigh::RayError) -> Self {
        ModeError::Dispersion(e.into())
    }
}

/// Wavenumbers at which the bottom speed `U(-h)` is a neutral wave speed.
#[derive(Debug, Clone, PartialEq)]
pub struct BottomSpeedModes {
    /// Roots of `F_sigma(., U(-h))`, ascending. Exactly one when `sigma = 0`.
    pub roots: Vec<f64>,
    /// `g_# = max_k F_sigma(k, U(-h)) + g`, only with surface tension.
    pub g_sharp: Option<f64>,
}

impl BottomSpeedModes {
    pub fn k_minus(&self) -> Option<f64> {
        self.roots.first().copied()
    }
}

/// A Sturm-Liouville eigenvalue `-k^2 <= 0` and its shooting refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlPair {
    pub eigenvalue: f64,
    pub k_sl: f64,
    pub k_polished: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InflectionClass {
    /// No Dirichlet-unstable wavenumber; one singular mode `k_0`.
    ChannelStable,
    /// `k_C` exists but `g < F0`; one singular mode `k_0`.
    ChannelUnstableSingle,
    /// `k_C` exists and `g > F0`; two singular modes `k_1 < k_C < k_0`.
    ChannelUnstablePair,
    /// `g = F0`; `k_1 = 0`.
    Marginal,
}

impl InflectionClass {
    pub fn label(self) -> &'static str {
        match self {
            InflectionClass::ChannelStable => "channel_stable",
            InflectionClass::ChannelUnstableSingle => "channel_unstable_single",
            InflectionClass::ChannelUnstablePair => "channel_unstable_pair",
            InflectionClass::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InflectionModes {
    pub inflection: Inflection,
    pub k_c: Option<f64>,
    pub f0: Option<f64>,
    /// `k_0`, the largest element of the singular set.
    pub k0: f64,
    pub k1: Option<f64>,
    pub class: InflectionClass,
    pub ill_conditioned: bool,
    pub eigenfunction_positive: bool,
    pub sl_pairs: Vec<SlPair>,
}

impl InflectionModes {
    /// The singular set `S`, ascending.
    pub fn singular_set(&self) -> Vec<f64> {
        self.k1.into_iter().chain(std::iter::once(self.k0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeutralModeReport {
    pub g: f64,
    pub u_bottom: f64,
    pub sigma: f64,
    pub bottom: BottomSpeedModes,
    pub inflections: Vec<InflectionModes>,
}

fn real_f(
    profile: &ShearProfile,
    physics: &Physics,
    k: f64,
    c: f64,
    opts: &SolverOptions,
) -> Result<f64, DispersionError> {
    let s = dispersion::eval_f(profile, physics, k, Complex64::new(c, 0.0), opts)?;
    s.f_sigma.map(|f| f.re).ok_or(DispersionError::Y0Vanishes { k, c: Complex64::new(c, 0.0) })
}

/// The pole-free dispersion function, unscaled, at real `c`.
fn real_fbold(
    profile: &ShearProfile,
    physics: &Physics,
    k: f64,
    c: f64,
    opts: &SolverOptions,
) -> Result<f64, DispersionError> {
    let s = dispersion::eval_f(profile, physics, k, Complex64::new(c, 0.0), opts)?;
    Ok(s.fbold.re * s.ln_scale.exp())
}

fn real_y0(profile: &ShearProfile, k: f64, c: f64, opts: &SolverOptions) -> Result<f64, DispersionError> {
    let s = rayleigh::shoot(profile, k, Complex64::new(c, 0.0), opts)?;
    Ok(s.y.re * s.ln_scale.exp())
}

/// Roots of `F_sigma(k, U(-h))` in `k >= 0`.
pub fn find_k_minus(
    profile: &ShearProfile,
    physics: &Physics,
    opts: &SolverOptions,
) -> Result<BottomSpeedModes, ModeError> {
    let c = profile.u_min();
    let ftol = K_MINUS_FTOL * physics.g.max(1.0);
    if physics.sigma == 0.0 {
        let f = |k: f64| real_f(profile, physics, k, c, opts);
        let mut hi = 1.0;
        while f(hi)? < 0.0 {
            hi *= 2.0;
            if hi > 1e5 {
                return Err(ModeError::NoBracket { what: "F(k, U(-h))", k_max: hi });
            }
        }
        let root = brent(f, 0.0, hi, 1e-14, ftol)?;
        return Ok(BottomSpeedModes { roots: vec![root], g_sharp: None });
    }

    // concave in K = k^2
    let fk = |kk: f64| real_f(profile, physics, kk.max(0.0).sqrt(), c, opts);
    let mut big = 1.0;
    while fk(2.0 * big)? > fk(big)? {
        big *= 2.0;
        if big > 1e10 {
            return Err(ModeError::NoBracket { what: "max F_sigma", k_max: big.sqrt() });
        }
    }
    let (k_star, f_max) = golden_max(fk, 0.0, 2.0 * big, 1e-12 * big)?;
    let g_sharp = Some(f_max + physics.g);
    let mut roots = Vec::new();
    if f_max.abs() <= ftol {
        roots.push(k_star.sqrt());
    } else if f_max > 0.0 {
        let lower = brent(fk, 0.0, k_star, 1e-14, ftol)?;
        let mut far = 2.0 * k_star.max(1.0);
        while fk(far)? > 0.0 {
            far *= 2.0;
        }
        let upper = brent(fk, k_star, far, 1e-14, ftol)?;
        roots.push(lower.sqrt());
        roots.push(upper.sqrt());
    }
    Ok(BottomSpeedModes { roots, g_sharp })
}

enum Boundary {
    /// `y'(0) = beta y(0)`.
    Robin(f64),
    Dirichlet,
}

/// Second-order finite differences for `-y'' + U''/(U - c0) y` on `[-h, 0]`
/// with `y(-h) = 0`.
fn sl_matrix(profile: &ShearProfile, c0: f64, nodes: usize, boundary: &Boundary) -> Tridiagonal {
    let h = profile.depth();
    let dx = h / (nodes - 1) as f64;
    let inv = 1.0 / (dx * dx);
    let potential = |j: usize| profile.rayleigh_potential(-h + j as f64 * dx, c0);
    let (last, robin) = match boundary {
        Boundary::Robin(beta) => (nodes - 1, Some(*beta)),
        Boundary::Dirichlet => (nodes - 2, None),
    };
    let mut diag: Vec<f64> = (1..=last).map(|j| 2.0 * inv + potential(j)).collect();
    let mut off = vec![-inv; last - 1];
    if let Some(beta) = robin {
        // ghost node y_N = y_{N-2} + 2 dx beta y_{N-1}, symmetrised with a
        // half-weight mass at the surface node
        *diag.last_mut().expect("non-empty grid") = (2.0 - 2.0 * dx * beta) * inv + potential(last);
        *off.last_mut().expect("at least two unknowns") = -std::f64::consts::SQRT_2 * inv;
    }
    Tridiagonal { diag, off }
}

fn richardson_eigenvalues(profile: &ShearProfile, c0: f64, boundary: &Boundary, floor: f64) -> Vec<f64> {
    let coarse = sl_matrix(profile, c0, SL_NODES, boundary).eigenvalues_below(0.0);
    let fine = sl_matrix(profile, c0, 2 * SL_NODES - 1, boundary).eigenvalues_below(0.0);
    let mut out = Vec::new();
    for (i, &f) in fine.iter().enumerate() {
        let extrapolated = match coarse.get(i) {
            Some(&c) => (4.0 * f - c) / 3.0,
            None => f,
        };
        if extrapolated >= floor && extrapolated <= 0.0 {
            out.push(extrapolated);
        } else if extrapolated > 0.0 && f <= 0.0 {
            out.push(0.0);
        }
    }
    out
}

fn robin_coefficient(profile: &ShearProfile, g: f64, c0: f64) -> f64 {
    let rel = profile.u_max() - c0;
    (profile.du(0.0) * rel + g) / (rel * rel)
}

fn check_inflection(profile: &ShearProfile, c0: f64) -> Result<Inflection, ModeError> {
    profile.inflection_near(c0, 1e-9 * profile.range().max(1.0)).copied().ok_or(ModeError::NotInflection(c0))
}

/// Non-positive eigenvalues `-k^2` of the Robin problem at an inflection
/// value, each polished to a root of the dispersion function.
pub fn sl_negative_eigenvalues(
    profile: &ShearProfile,
    physics: &Physics,
    c0: f64,
    opts: &SolverOptions,
) -> Result<Vec<SlPair>, ModeError> {
    check_inflection(profile, c0)?;
    let floor = -(50.0 / profile.depth()).powi(2);
    // the Robin condition is k-independent only without surface tension
    let physics = &Physics::gravity(physics.g);
    let beta = robin_coefficient(profile, physics.g, c0);
    let eigen = richardson_eigenvalues(profile, c0, &Boundary::Robin(beta), floor);
    let fb = |k: f64| real_fbold(profile, physics, k, c0, opts);
    let mut pairs = Vec::new();
    for lambda in eigen {
        let k_sl = (-lambda).max(0.0).sqrt();
        let k_polished = polish_root(&fb, k_sl)?;
        let residual = real_f(profile, physics, k_polished, c0, opts).map(f64::abs).unwrap_or(f64::NAN);
        pairs.push(SlPair { eigenvalue: lambda, k_sl, k_polished, residual });
    }
    Ok(pairs)
}

/// Root of `f` near `guess` on `k >= 0`, bracketed by a window that grows
/// to at most a quarter of `guess`. Returns `guess` unchanged when no sign
/// change is found, which happens for a double root at `k = 0`.
fn polish_root(f: &impl Fn(f64) -> Result<f64, DispersionError>, guess: f64) -> Result<f64, ModeError> {
    let f0 = f(guess)?;
    if f0 == 0.0 {
        return Ok(guess);
    }
    let max_width = 0.25 * guess + 1e-3;
    let mut width = 1e-6 * guess.max(1e-3);
    while width <= max_width {
        let lo = (guess - width).max(0.0);
        let hi = guess + width;
        if f(lo)? * f0 <= 0.0 {
            return Ok(brent(f, lo, guess, 1e-14, 0.0)?);
        }
        if f(hi)? * f0 <= 0.0 {
            return Ok(brent(f, guess, hi, 1e-14, 0.0)?);
        }
        width *= 2.0;
    }
    Ok(guess)
}

/// The Dirichlet-unstable wavenumber `k_C = sqrt(-lambda_1)` when the
/// lowest Dirichlet eigenvalue is negative.
pub fn find_k_c(profile: &ShearProfile, c0: f64, opts: &SolverOptions) -> Result<Option<f64>, ModeError> {
    check_inflection(profile, c0)?;
    let eigen = richardson_eigenvalues(profile, c0, &Boundary::Dirichlet, f64::NEG_INFINITY);
    let Some(&lambda) = eigen.first() else {
        return Ok(None);
    };
    if lambda == 0.0 {
        return Ok(Some(0.0));
    }
    let guess = (-lambda).sqrt();
    let y0 = |k: f64| real_y0(profile, k, c0, opts);
    let mut k = polish_root(&y0, guess)?;
    // tighten onto |y(0)| below the polish tolerance if Brent stopped on width
    for _ in 0..4 {
        let v = y0(k)?;
        if v.abs() < K_C_POLISH_TOL {
            break;
        }
        let dk = 1e-7 * k.max(1e-3);
        let slope = (y0(k + dk)? - y0(k - dk)?) / (2.0 * dk);
        k -= v / slope;
    }
    Ok(Some(k))
}

/// `F0 = (U(0) - c0)^2 Y(0, c0) - U'(0)(U(0) - c0)`.
pub fn eval_f0(profile: &ShearProfile, c0: f64, opts: &SolverOptions) -> Result<f64, ModeError> {
    let y = dispersion::eval_y(profile, 0.0, Complex64::new(c0, 0.0), opts)?;
    let rel = profile.u_max() - c0;
    Ok(rel * rel * y.re - profile.du(0.0) * rel)
}

/// Growth estimate for where `F(., c)` turns positive.
fn k_scale(profile: &ShearProfile, g: f64, c: f64) -> f64 {
    let rel = profile.u_max() - c;
    ((profile.du(0.0) * rel + g) / (rel * rel)).max(1.0)
}

/// The singular set `S` of wavenumbers with a neutral mode at `c0`.
pub fn find_s(
    profile: &ShearProfile,
    physics: &Physics,
    c0: f64,
    opts: &SolverOptions,
) -> Result<InflectionModes, ModeError> {
    let inflection = check_inflection(profile, c0)?;
    let k_c = find_k_c(profile, c0, opts)?;
    let f0 = match eval_f0(profile, c0, opts) {
        Ok(v) => Some(v),
        Err(ModeError::Dispersion(DispersionError::Y0Vanishes { .. })) => None,
        Err(e) => return Err(e),
    };
    let g = physics.g;
    let f = |k: f64| real_f(profile, physics, k, c0, opts);
    let k_max = (4.0 * k_scale(profile, g, c0)).min(200.0 / profile.depth()).max(k_c.unwrap_or(0.0) * 2.0 + 1.0);

    // k_0: F rises from -infinity just above k_C (or from F(0) < 0)
    let mut lo = match k_c {
        Some(kc) => kc * (1.0 + 1e-7) + 1e-9,
        None => 0.0,
    };
    let mut step = (k_max - lo) / 64.0;
    let mut hi = lo + step;
    while f(hi)? < 0.0 {
        lo = hi;
        hi += step;
        if hi > 4.0 * k_max {
            return Err(ModeError::NoBracket { what: "k_0", k_max: hi });
        }
        step *= 1.2;
    }
    let k0 = brent(f, lo, hi, 1e-14, 1e-13)?;

    let mut k1 = None;
    let mut class = if k_c.is_some() { InflectionClass::ChannelUnstableSingle } else { InflectionClass::ChannelStable };
    let mut ill_conditioned = false;
    if let (Some(kc), Some(f0)) = (k_c, f0) {
        let gap = g - f0;
        if gap.abs() <= 1e-12 * g.max(1.0) {
            k1 = Some(0.0);
            class = InflectionClass::Marginal;
        } else if gap > 0.0 {
            let root = brent(f, 0.0, kc * (1.0 - 1e-7), 1e-14, 1e-13)?;
            ill_conditioned = kc - root < ILL_CONDITIONED_GAP;
            k1 = Some(root);
            class = InflectionClass::ChannelUnstablePair;
        }
    }

    let sol = rayleigh::solve_limit(profile, k0, c0, opts, &Grid::Uniform(401))?;
    let eigenfunction_positive = (1..sol.grid.len()).all(|i| sol.y[i].re > 0.0);
    let sl_pairs = sl_negative_eigenvalues(profile, physics, c0, opts)?;

    Ok(InflectionModes { inflection, k_c, f0, k0, k1, class, ill_conditioned, eigenfunction_positive, sl_pairs })
}

/// Everything about neutral modes on the range of `U` for one profile.
pub fn neutral_modes(
    profile: &ShearProfile,
    physics: &Physics,
    opts: &SolverOptions,
) -> Result<NeutralModeReport, ModeError> {
    let bottom = find_k_minus(profile, physics, opts)?;
    let inflections = profile
        .inflections()
        .iter()
        .map(|inf| find_s(profile, physics, inf.value, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NeutralModeReport { g: physics.g, u_bottom: profile.u_min(), sigma: physics.sigma, bottom, inflections })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_else(|| "none".to_string())
}

impl NeutralModeReport {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("g={:.12e}\nsigma={:.12e}\n", self.g, self.sigma));
        out.push_str(&format!("k_minus={}\n", fmt_opt(self.bottom.k_minus())));
        if self.sigma > 0.0 {
            out.push_str(&format!("g_sharp={}\n", fmt_opt(self.bottom.g_sharp)));
            let roots: Vec<String> = self.bottom.roots.iter().map(|k| format!("{k:.12e}")).collect();
            out.push_str(&format!("k_sharp={}\n", roots.join(";")));
        }
        out.push_str(&format!("inflections={}\n", self.inflections.len()));
        for (i, m) in self.inflections.iter().enumerate() {
            let p = format!("inflection.{i}");
            out.push_str(&format!("{p}.x2={:.12e}\n", m.inflection.x));
            out.push_str(&format!("{p}.c0={:.12e}\n", m.inflection.value));
            out.push_str(&format!("{p}.u3_sign={}\n", m.inflection.sign));
            out.push_str(&format!("{p}.k_c={}\n", fmt_opt(m.k_c)));
            out.push_str(&format!("{p}.f0={}\n", fmt_opt(m.f0)));
            out.push_str(&format!("{p}.k0={:.12e}\n", m.k0));
            out.push_str(&format!("{p}.k1={}\n", fmt_opt(m.k1)));
            out.push_str(&format!("{p}.class={}\n", m.class.label()));
            out.push_str(&format!("{p}.ill_conditioned={}\n", m.ill_conditioned));
            out.push_str(&format!("{p}.eigenfunction_positive={}\n", m.eigenfunction_positive));
            out.push_str(&format!("{p}.sl_count={}\n", m.sl_pairs.len()));
        }
        out
    }

    /// One row per singular neutral mode: `kind, c, k, k_sl, residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,c,k,k_sl,residual\n");
        for k in &self.bottom.roots {
            out.push_str(&format!("bottom,{:.12e},{:.12e},,\n", self.u_bottom, k));
        }
        for m in &self.inflections {
            for k in m.singular_set() {
                let sl = m.sl_pairs.iter().min_by(|a, b| (a.k_polished - k).abs().total_cmp(&(b.k_polished - k).abs()));
                out.push_str(&format!(
                    "inflection,{:.12e},{:.12e},{},{}\n",
                    m.inflection.value,
                    k,
                    sl.map(|p| format!("{:.12e}", p.k_sl)).unwrap_or_default(),
                    sl.map(|p| format!("{:.3e}", p.residual)).unwrap_or_default()
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn couette_k_minus_solves_k_coth_k() {
        let p = ShearProfile::parse("x2", 1.0).unwrap();
        let modes = find_k_minus(&p, &Physics::gravity(1.0), &SolverOptions::default()).unwrap();
        let k = modes.k_minus().unwrap();
        assert!((k / k.tanh() - 2.0).abs() < 1e-9);
        assert!((k - 1.91501).abs() < 1e-5);
    }

    #[test]
    fn couette_k_minus_g3() {
        let p = ShearProfile::parse("x2", 1.0).unwrap();
        let k = find_k_minus(&p, &Physics::gravity(3.0), &SolverOptions::default()).unwrap().k_minus().unwrap();
        assert!((k / k.tanh() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn non_inflection_rejected() {
        let p = ShearProfile::parse("tanh(2*(x2+1))", 2.0).unwrap();
        let err = sl_negative_eigenvalues(&p, &Physics::gravity(1.0), 0.5, &SolverOptions::default()).unwrap_err();
        assert_eq!(err, ModeError::NotInflection(0.5));
    }

    #[test]
    fn strong_surface_tension_removes_bottom_modes() {
        let p = ShearProfile::parse("x2", 1.0).unwrap();
        let modes = find_k_minus(&p, &Physics { g: 1.0, sigma: 5.0 }, &SolverOptions::default()).unwrap();
        assert!(modes.roots.is_empty());
        assert!(modes.g_sharp.unwrap() < 1.0);
    }
}
