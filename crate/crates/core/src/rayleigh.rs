//! Shooting for the Rayleigh equation
//! `-y'' + (k^2 + U''/(U - c)) y = 0` on `[-h, 0]` with `y(-h) = 0`,
//! `y'(-h) = 1`.
//!
//! Off the range of `U` the equation is integrated along the real axis, or
//! along a small half-circle detour around the critical point when `c` is
//! close to the range. On the range itself the solution is the limit from
//! the upper half plane, obtained by matching to a Frobenius pair at the
//! critical layer.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::ode::{Marcher, OdeError, State, Tolerances};
use crate::profile::{mu, ProfileError, ShearProfile};
use crate::scalar::JET_LEN;
use crate::tolerances::{ODE_ATOL, ODE_RTOL, R_LOC_FACTOR, SERIES_SELF_TEST_TOL, SERIES_TERMS};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RayError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("critical layer at the free surface (c = U(0))")]
    CriticalAtBoundary,
    #[error("local series about x2 = {x_c} did not converge")]
    SeriesDiverged { x_c: f64 },
    #[error("c = {c} is on the range of U; use the limiting solution")]
    OnRange { c: Complex64 },
    #[error("c = {c} is too far below the range of U to continue from above")]
    NotContinuable { c: Complex64 },
    #[error("profile inversion failed: {0}")]
    Profile(String),
}

impl From<ProfileError> for RayError {
    fn from(e: ProfileError) -> Self {
        RayError::Profile(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub r_loc_factor: f64,
    pub series_terms: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rtol: ODE_RTOL, atol: ODE_ATOL, r_loc_factor: R_LOC_FACTOR, series_terms: SERIES_TERMS }
    }
}

impl SolverOptions {
    fn tolerances(&self) -> Tolerances {
        Tolerances { rtol: self.rtol, atol: self.atol }
    }
}

/// Local data at the critical layer `U(x_c) = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalLayer {
    pub x_c: f64,
    pub mu: f64,
    /// Coefficient of the logarithm, `U''(x_c)/U'(x_c)`.
    pub q: f64,
    /// `lim y' - q y(x_c) log(U'(x_c)|x - x_c|/mu)` from below, scaled.
    pub b2_minus: Complex64,
    /// `y(x_c)`, scaled.
    pub y_at_xc: Complex64,
    /// Radius of the series window actually used.
    pub r_loc: f64,
    /// Scaled quantities above are multiplied by `exp(ln_scale)`.
    pub ln_scale: f64,
}

/// `y(0)` and `y'(0)`, stored as mantissas times `exp(ln_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceValues {
    pub y: Complex64,
    pub yp: Complex64,
    pub ln_scale: f64,
    pub critical: Option<CriticalLayer>,
}

impl SurfaceValues {
    /// `y'(0)/y(0)`.
    pub fn log_derivative(&self) -> Complex64 {
        self.yp / self.y
    }
    /// `y(0)` unscaled; overflows for very large `k h`.
    pub fn y_true(&self) -> Complex64 {
        self.y * self.ln_scale.exp()
    }
    pub fn yp_true(&self) -> Complex64 {
        self.yp * self.ln_scale.exp()
    }
    /// `ln |y(0)|`.
    pub fn ln_abs_y(&self) -> f64 {
        self.y.norm().ln() + self.ln_scale
    }
}

/// A sampled solution on a grid of depths.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySolution {
    pub k: f64,
    pub c: Complex64,
    pub grid: Vec<f64>,
    pub y: Vec<Complex64>,
    pub yp: Vec<Complex64>,
    /// Per-node scale: the true value is `y[i] * exp(ln_scale[i])`.
    pub ln_scale: Vec<f64>,
    pub critical: Option<CriticalLayer>,
}

impl RaySolution {
    pub fn surface(&self) -> SurfaceValues {
        let last = self.grid.len() - 1;
        SurfaceValues { y: self.y[last], yp: self.yp[last], ln_scale: self.ln_scale[last], critical: self.critical }
    }

    pub fn y_true(&self, i: usize) -> Complex64 {
        self.y[i] * self.ln_scale[i].exp()
    }

    pub fn yp_true(&self, i: usize) -> Complex64 {
        self.yp[i] * self.ln_scale[i].exp()
    }

    /// Debug dump with columns `x2, Re y, Im y, Re yp, Im yp`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x2,re_y,im_y,re_yp,im_yp\n");
        for i in 0..self.grid.len() {
            let (y, yp) = (self.y_true(i), self.yp_true(i));
            out.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n", self.grid[i], y.re, y.im, yp.re, yp.im));
        }
        out
    }
}

/// Output grid for [`solve_regular`] and [`solve_limit`].
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Endpoints,
    Uniform(usize),
    Nodes(Vec<f64>),
}

impl Grid {
    fn nodes(&self, depth: f64) -> Vec<f64> {
        match self {
            Grid::Endpoints => vec![-depth, 0.0],
            Grid::Uniform(n) => {
                let n = (*n).max(2);
                (0..n).map(|i| -depth + depth * i as f64 / (n - 1) as f64).collect()
            }
            Grid::Nodes(v) => {
                let mut v = v.clone();
                v.sort_by(f64::total_cmp);
                v
            }
        }
    }
}

/// Which way the integration path avoids the critical point.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Route {
    RealAxis,
    /// Half circle of radius `r` about `x_c`, in the lower half plane when
    /// `below` is set.
    Detour {
        x_c: f64,
        r: f64,
        below: bool,
    },
}

/// Stored node: depth, state and the log of its rescaling factor.
type Sample = (f64, State, f64);

struct Sampler<'a> {
    profile: &'a ShearProfile,
    k2: f64,
    c: Complex64,
    marcher: Marcher,
    samples: Vec<Sample>,
}

impl Sampler<'_> {
    fn real_rhs(profile: &ShearProfile, k2: f64, c: Complex64) -> impl FnMut(f64, &State) -> State + '_ {
        move |x: f64, y: &State| {
            let pot = profile.d2u(x) / (profile.u(x) - c);
            [y[1], y[0] * (pot + k2)]
        }
    }

    /// March along the real axis from `a` to `b`, recording `nodes` in
    /// `(a, b]` on the way.
    fn march(&mut self, a: f64, b: f64, mut state: State, nodes: &[f64]) -> Result<State, RayError> {
        let mut rhs = Self::real_rhs(self.profile, self.k2, self.c);
        let mut pos = a;
        for &x in nodes.iter().filter(|&&x| x > a && x < b) {
            state = self.marcher.advance(&mut rhs, pos, x, state)?;
            self.samples.push((x, state, self.marcher.ln_scale));
            pos = x;
        }
        state = self.marcher.advance(&mut rhs, pos, b, state)?;
        if nodes.contains(&b) {
            self.samples.push((b, state, self.marcher.ln_scale));
        }
        Ok(state)
    }

    fn arc(&mut self, x_c: f64, r: f64, below: bool, state: State) -> Result<State, RayError> {
        let profile = self.profile;
        let (k2, c) = (self.k2, self.c);
        let mut rhs = move |theta: f64, y: &State| {
            let e = Complex64::from_polar(1.0, theta);
            let z = x_c + r * e;
            let dz = Complex64::new(0.0, r) * e;
            let pot = profile.d2u_complex(z) / (profile.u_complex(z) - c);
            [y[1] * dz, y[0] * (pot + k2) * dz]
        };
        let end = if below { 2.0 * PI } else { 0.0 };
        Ok(self.marcher.advance(&mut rhs, PI, end, state)?)
    }
}

fn initial_state() -> State {
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
}

fn choose_route(
    profile: &ShearProfile,
    k: f64,
    c: Complex64,
    opts: &SolverOptions,
    force_below: bool,
) -> Result<Route, RayError> {
    let (lo, hi) = (profile.u_min(), profile.u_max());
    if !(c.re > lo && c.re < hi) {
        if force_below && c.im < 0.0 {
            return Err(RayError::NotContinuable { c });
        }
        return Ok(Route::RealAxis);
    }
    let x_c = profile.invert(c.re)?;
    let wall = (x_c + profile.depth()).min(-x_c);
    let r = mu(k).min(wall) / opts.r_loc_factor;
    let reach = profile.du(x_c) * r;
    if force_below && c.im < 0.0 {
        if -c.im < 0.5 * reach && r > 0.0 {
            return Ok(Route::Detour { x_c, r, below: true });
        }
        return Err(RayError::NotContinuable { c });
    }
    if c.im.abs() < reach && r > 1e-12 * profile.depth() {
        Ok(Route::Detour { x_c, r, below: c.im > 0.0 })
    } else {
        Ok(Route::RealAxis)
    }
}

fn run_regular(
    profile: &ShearProfile,
    k: f64,
    c: Complex64,
    opts: &SolverOptions,
    nodes: &[f64],
    route: Route,
) -> Result<(SurfaceValues, Vec<Sample>), RayError> {
    let h = profile.depth();
    let mut s = Sampler { profile, k2: k * k, c, marcher: Marcher::new(opts.tolerances()), samples: Vec::new() };
    if nodes.first() == Some(&-h) {
        s.samples.push((-h, initial_state(), 0.0));
    }
    let state = match route {
        Route::RealAxis => s.march(-h, 0.0, initial_state(), nodes)?,
        Route::Detour { x_c, r, below } => {
            let left = s.march(-h, x_c - r, initial_state(), nodes)?;
            let inner: Vec<f64> = nodes.iter().copied().filter(|&x| x > x_c - r && x < x_c + r).collect();
            if !inner.is_empty() {
                // nodes hidden by the detour are reached along the real axis
                let mut side = Sampler { profile, k2: k * k, c, marcher: s.marcher, samples: Vec::new() };
                side.march(x_c - r, x_c + r, left, &inner)?;
                s.samples.extend(side.samples);
            }
            let right = s.arc(x_c, r, below, left)?;
            s.march(x_c + r, 0.0, right, nodes)?
        }
    };
    s.samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let surface = SurfaceValues { y: state[0], yp: state[1], ln_scale: s.marcher.ln_scale, critical: None };
    Ok((surface, s.samples))
}

fn into_solution(k: f64, c: Complex64, samples: Vec<Sample>, critical: Option<CriticalLayer>) -> RaySolution {
    let mut sol = RaySolution {
        k,
        c,
        grid: Vec::with_capacity(samples.len()),
        y: Vec::with_capacity(samples.len()),
        yp: Vec::with_capacity(samples.len()),
        ln_scale: Vec::with_capacity(samples.len()),
        critical,
    };
    for (x, st, ls) in samples {
        sol.grid.push(x);
        sol.y.push(st[0]);
        sol.yp.push(st[1]);
        sol.ln_scale.push(ls);
    }
    sol
}

/// Solution for `c` off the range of `U`.
pub fn solve_regular(
    profile: &ShearProfile,
    k: f64,
    c: Complex64,
    opts: &SolverOptions,
    grid: &Grid,
) -> Result<RaySolution, RayError> {
    if c.im == 0.0 && c.re >= profile.u_min() && c.re <= profile.u_max() {
        return Err(RayError::OnRange { c });
    }
    let route = choose_route(profile, k, c, opts, false)?;
    let nodes = grid.nodes(profile.depth());
    let (_, samples) = run_regular(profile, k, c, opts, &nodes, route)?;
    Ok(into_solution(k, c, samples, None))
}

/// Limit from the upper half plane for real `c` in `[U(-h), U(0))`.
pub fn solve_limit(
    profile: &ShearProfile,
    k: f64,
    c: f64,
    opts: &SolverOptions,
    grid: &Grid,
) -> Result<RaySolution, RayError> {
    let nodes = grid.nodes(profile.depth());
    let cz = Complex64::new(c, 0.0);
    if c < profile.u_min() || c > profile.u_max() {
        let (_, samples) = run_regular(profile, k, cz, opts, &nodes, Route::RealAxis)?;
        return Ok(into_solution(k, cz, samples, None));
    }
    let (_, samples, critical) = run_limit(profile, k, c, opts, &nodes)?;
    Ok(into_solution(k, cz, samples, Some(critical)))
}

/// `y(0)`, `y'(0)` for any `c`; on the range of `U` the upper limit is used.
pub fn shoot(profile: &ShearProfile, k: f64, c: Complex64, opts: &SolverOptions) -> Result<SurfaceValues, RayError> {
    if c.im == 0.0 && c.re >= profile.u_min() && c.re <= profile.u_max() {
        let (surface, _, _) = run_limit(profile, k, c.re, opts, &[])?;
        return Ok(surface);
    }
    let route = choose_route(profile, k, c, opts, false)?;
    Ok(run_regular(profile, k, c, opts, &[], route)?.0)
}

/// Analytic continuation of the upper-half-plane solution slightly across
/// the interior of the range of `U`.
pub fn shoot_continued(
    profile: &ShearProfile,
    k: f64,
    c: Complex64,
    opts: &SolverOptions,
) -> Result<SurfaceValues, RayError> {
    if c.im >= 0.0 {
        return shoot(profile, k, c, opts);
    }
    let route = choose_route(profile, k, c, opts, true)?;
    Ok(run_regular(profile, k, c, opts, &[], route)?.0)
}

// ---- Frobenius crossing ----

/// Coefficients of the local pair about a critical layer:
/// `phi1 = sum a[n] t^n` and `phi2 = psi + q phi1 log t` with
/// `psi = sum b[n] t^n`, where `t = x - x_c`.
#[derive(Debug, Clone)]
pub struct LocalPair {
    pub q: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct PairValues {
    phi1: Complex64,
    dphi1: Complex64,
    phi2: Complex64,
    dphi2: Complex64,
}

impl LocalPair {
    pub fn new(profile: &ShearProfile, x_c: f64, k: f64, terms: usize) -> Self {
        let terms = terms.clamp(2, JET_LEN - 2);
        let (mut u, curv) = profile.taylor(x_c);
        u.coef[0] = 0.0;
        let slope_part = u.shift_down();
        let ratio = curv / slope_part;
        let mut coeff: Vec<f64> = ratio.coef[..=terms].to_vec();
        coeff[1] += k * k;
        let at_inflection =
            profile.inflections().iter().any(|inflection| (inflection.x - x_c).abs() <= 1e-10 * profile.depth());
        if at_inflection {
            coeff[0] = 0.0;
        }
        let q = coeff[0];

        let mut a = vec![0.0; terms + 1];
        a[1] = 1.0;
        for m in 1..terms {
            let acc: f64 = (0..m).map(|j| coeff[j] * a[m - j]).sum();
            a[m + 1] = acc / (m * (m + 1)) as f64;
        }
        let mut b = vec![0.0; terms + 1];
        b[0] = 1.0;
        for m in 1..terms {
            let acc: f64 = (0..=m).map(|j| coeff[j] * b[m - j]).sum();
            b[m + 1] = (acc - q * (2 * m + 1) as f64 * a[m + 1]) / (m * (m + 1)) as f64;
        }
        Self { q, a, b }
    }

    fn eval(&self, t: f64) -> PairValues {
        let mut phi1 = 0.0;
        let mut dphi1 = 0.0;
        let mut psi = 0.0;
        let mut dpsi = 0.0;
        for n in (0..self.a.len()).rev() {
            phi1 = phi1 * t + self.a[n];
            psi = psi * t + self.b[n];
            if n > 0 {
                dphi1 = dphi1 * t + n as f64 * self.a[n];
                dpsi = dpsi * t + n as f64 * self.b[n];
            }
        }
        let log = Complex64::new(t.abs().ln(), if t > 0.0 { PI } else { 0.0 });
        let phi2 = psi + self.q * phi1 * log;
        let dphi2 = dpsi + self.q * (dphi1 * log + phi1 / t);
        PairValues { phi1: phi1.into(), dphi1: dphi1.into(), phi2, dphi2 }
    }
}

struct Crossing {
    alpha: Complex64,
    beta: Complex64,
    right: State,
}

fn cross(pair: &LocalPair, left: Option<(f64, State)>, t_right: f64) -> Crossing {
    let (alpha, beta) = match left {
        None => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
        Some((t, st)) => {
            let v = pair.eval(t);
            let det = v.phi1 * v.dphi2 - v.phi2 * v.dphi1;
            ((st[0] * v.dphi2 - st[1] * v.phi2) / det, (v.phi1 * st[1] - v.dphi1 * st[0]) / det)
        }
    };
    let v = pair.eval(t_right);
    let right = [alpha * v.phi1 + beta * v.phi2, alpha * v.dphi1 + beta * v.dphi2];
    Crossing { alpha, beta, right }
}

fn run_limit(
    profile: &ShearProfile,
    k: f64,
    c: f64,
    opts: &SolverOptions,
    nodes: &[f64],
) -> Result<(SurfaceValues, Vec<Sample>, CriticalLayer), RayError> {
    if c >= profile.u_max() {
        return Err(RayError::CriticalAtBoundary);
    }
    let h = profile.depth();
    let x_c = if c <= profile.u_min() { -h } else { profile.invert(c)?.max(-h) };
    if x_c >= 0.0 {
        return Err(RayError::CriticalAtBoundary);
    }
    let m = mu(k);
    let (to_bed, to_surface) = (x_c + h, -x_c);
    let mut radius = m.min(to_bed.max(to_surface)) / opts.r_loc_factor;

    let mut s = Sampler {
        profile,
        k2: k * k,
        c: Complex64::new(c, 0.0),
        marcher: Marcher::new(opts.tolerances()),
        samples: Vec::new(),
    };
    if nodes.first() == Some(&-h) {
        s.samples.push((-h, initial_state(), 0.0));
    }

    for _attempt in 0..8 {
        let t_left = -radius.min(to_bed);
        let t_right = radius.min(to_surface);
        let fresh = Sampler {
            profile,
            k2: k * k,
            c: Complex64::new(c, 0.0),
            marcher: Marcher::new(opts.tolerances()),
            samples: s.samples.clone(),
        };
        let mut s = fresh;
        let left = if -t_left < to_bed {
            Some((t_left, s.march(-h, x_c + t_left, initial_state(), nodes)?))
        } else if to_bed > 0.0 {
            Some((-to_bed, initial_state()))
        } else {
            None
        };
        let pair = LocalPair::new(profile, x_c, k, opts.series_terms);
        let check = LocalPair::new(profile, x_c, k, 2 * opts.series_terms);
        let cr = cross(&pair, left, t_right);
        let cr2 = cross(&check, left, t_right);
        let scale = cr2.right[0].norm() + t_right * cr2.right[1].norm();
        let gap = (cr.right[0] - cr2.right[0]).norm() + t_right * (cr.right[1] - cr2.right[1]).norm();
        if gap > SERIES_SELF_TEST_TOL * scale {
            log::debug!("series self-test failed at x_c = {x_c} (gap {gap:e}); shrinking window");
            radius *= 0.5;
            continue;
        }
        let pair = check;
        let Crossing { alpha, beta, right } = cr2;
        let in_window = |x: f64| x > x_c + t_left && x < x_c + t_right;
        for &x in nodes.iter().filter(|&&x| in_window(x) || (x == x_c + t_right && t_right == to_surface)) {
            let t = x - x_c;
            if t == 0.0 {
                let y = beta;
                let yp = Complex64::new(f64::NAN, f64::NAN);
                s.samples.push((x, [y, yp], s.marcher.ln_scale));
                continue;
            }
            let v = pair.eval(t);
            s.samples.push((x, [alpha * v.phi1 + beta * v.phi2, alpha * v.dphi1 + beta * v.dphi2], s.marcher.ln_scale));
        }
        let slope = profile.du(x_c);
        let critical = CriticalLayer {
            x_c,
            mu: m,
            q: pair.q,
            b2_minus: alpha + beta * pair.q - beta * pair.q * (slope / m).ln(),
            y_at_xc: beta,
            r_loc: radius,
            ln_scale: s.marcher.ln_scale,
        };
        let state = if t_right < to_surface { s.march(x_c + t_right, 0.0, right, nodes)? } else { right };
        s.samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        s.samples.dedup_by(|a, b| a.0 == b.0);
        let surface =
            SurfaceValues { y: state[0], yp: state[1], ln_scale: s.marcher.ln_scale, critical: Some(critical) };
        return Ok((surface, s.samples, critical));
    }
    Err(RayError::SeriesDiverged { x_c })
}

/// Sup over the grid of `|mu^-1 y - sinh((x+h)/mu)| / (mu^alpha sinh((x+h)/mu))`.
pub fn asymptotic_bounds_check(
    profile: &ShearProfile,
    k: f64,
    c: Complex64,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<f64, RayError> {
    let grid = Grid::Uniform(401);
    let sol = if c.im == 0.0 && c.re >= profile.u_min() && c.re <= profile.u_max() {
        solve_limit(profile, k, c.re, opts, &grid)?
    } else {
        solve_regular(profile, k, c, opts, &grid)?
    };
    let m = mu(k);
    let h = profile.depth();
    let mut worst: f64 = 0.0;
    for i in 0..sol.grid.len() {
        let arg = (sol.grid[i] + h) / m;
        if arg <= 0.0 || !sol.y[i].re.is_finite() {
            continue;
        }
        let ln_sinh = arg + (-(-2.0 * arg).exp_m1()).ln() - std::f64::consts::LN_2;
        let ratio = sol.y[i] / m * (sol.ln_scale[i] - ln_sinh).exp();
        worst = worst.max((ratio - 1.0).norm() / m.powf(alpha));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn couette() -> ShearProfile {
        ShearProfile::parse("x2", 1.0).unwrap()
    }

    #[test]
    fn couette_outside_range_is_sinh() {
        let p = couette();
        let s = shoot(&p, 2.0, Complex64::new(0.5, 0.0), &SolverOptions::default()).unwrap();
        assert!((s.y_true() - Complex64::new(2f64.sinh() / 2.0, 0.0)).norm() < 1e-9);
        assert!((s.yp_true() - Complex64::new(2f64.cosh(), 0.0)).norm() < 1e-9);
    }

    #[test]
    fn couette_limit_has_no_log_and_matches_sinh() {
        let p = couette();
        let sol = solve_limit(&p, 1.0, -0.5, &SolverOptions::default(), &Grid::Uniform(11)).unwrap();
        let s = sol.surface();
        assert!((s.y_true() - Complex64::new(1f64.sinh(), 0.0)).norm() < 1e-10);
        let cl = sol.critical.unwrap();
        assert_eq!(cl.q, 0.0);
        for (i, &x) in sol.grid.iter().enumerate() {
            assert!((sol.y_true(i).re - (x + 1.0).sinh()).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn local_pair_satisfies_equation_for_quadratic_profile() {
        let p = ShearProfile::parse("x2 + x2^2/4 + 0.5", 1.0).unwrap();
        let x_c = p.invert(0.5).unwrap();
        let pair = LocalPair::new(&p, x_c, 1.3, 20);
        let t: f64 = 0.01;
        let residual = |f: &dyn Fn(f64) -> f64| {
            let d2 = (f(t + 1e-4) - 2.0 * f(t) + f(t - 1e-4)) / 1e-8;
            let pot = p.d2u(x_c + t) / (p.u(x_c + t) - 0.5) + 1.3 * 1.3;
            d2 - pot * f(t)
        };
        let phi1 = |t: f64| pair.eval(t).phi1.re;
        assert!(residual(&phi1).abs() < 1e-4);
        let phi2 = |t: f64| pair.eval(t).phi2.re;
        assert!(residual(&phi2).abs() < 1e-3);
    }

    #[test]
    fn detour_just_above_range_approaches_frobenius_limit() {
        let p = ShearProfile::parse("tanh(2*(x2+1))", 2.0).unwrap();
        let opts = SolverOptions::default();
        let c = 0.3;
        let limit = shoot(&p, 1.5, Complex64::new(c, 0.0), &opts).unwrap();
        let near = shoot(&p, 1.5, Complex64::new(c, 1e-9), &opts).unwrap();
        let (a, b) = (limit.log_derivative(), near.log_derivative());
        assert!((a - b).norm() < 1e-7 * a.norm(), "{a} vs {b}");
        assert!(a.im.abs() > 1e-6);
    }

    #[test]
    fn boundary_critical_layer_is_rejected() {
        let p = couette();
        assert_eq!(
            solve_limit(&p, 1.0, 0.0, &SolverOptions::default(), &Grid::Endpoints).unwrap_err(),
            RayError::CriticalAtBoundary
        );
    }
}
