//! Eigenvalue counting by the argument principle and continuation of
//! dispersion roots `c(k)` in the wave number.

use num_complex::Complex64;

use crate::contour::{winding, ContourError, Region};
use crate::dispersion::{self, DispersionError, Physics};
use crate::modes::{self, ModeError, NeutralModeReport};
use crate::profile::ShearProfile;
use crate::rayleigh::{RayError, SolverOptions};
use crate::roots::brent;
use crate::tolerances::{
    BRANCH_FTOL, CENSUS_MAX_DEPTH, CONTOUR_MARGIN_REL, NEWTON_TOL, SEED_NEWTON_STEPS, SIMPLE_ROOT_TOL, SLOPE_FD_STEP,
    TRACE_STEP_MAX, TRACE_STEP_MIN, WEAK_SCAN_POINTS,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TraceError {
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Mode(#[from] ModeError),
    #[error("contour passes through a zero of the dispersion function near c = {at}")]
    ContourThroughZero { at: Complex64 },
    #[error("Newton polishing of the large-k seed at k = {k} did not converge")]
    SeedDiverged { k: f64 },
    #[error("lost the root near k = {k}, c = {c}")]
    LostRoot { k: f64, c: Complex64 },
    #[error("dF/dc vanishes at k = {k}, c = {c}")]
    DegenerateRoot { k: f64, c: f64 },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
}

impl From<RayError> for TraceError {
    fn from(e: RayError) -> Self {
        TraceError::Dispersion(e.into())
    }
}

impl From<ContourError<TraceError>> for TraceError {
    fn from(e: ContourError<TraceError>) -> Self {
        match e {
            ContourError::ContourThroughZero { at } => TraceError::ContourThroughZero { at },
            ContourError::Function(e) => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchLabel {
    CPlus,
    /// The branch starting below `U(-h)` at small `k`.
    CMinusLower,
    /// The branch approaching `U(0)` from below at large `k`.
    CMinusUpper,
    Inflection,
}

impl BranchLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchLabel::CPlus => "c_plus",
            BranchLabel::CMinusLower => "c_minus_lower",
            BranchLabel::CMinusUpper => "c_minus_upper",
            BranchLabel::Inflection => "inflection_branch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// The branch met the range of `U` at real `c_end`.
    ReachedSegment {
        k_end: f64,
        c_end: f64,
    },
    /// `dF/dc` vanished: another branch collides here.
    Collision {
        k: f64,
        c: Complex64,
    },
    KRangeEnd,
    /// The root sank below the contour margin and could not be followed.
    IndexLost,
}

impl Termination {
    pub fn tag(&self) -> String {
        match self {
            Termination::ReachedSegment { c_end, .. } => format!("reached_segment({c_end:.10e})"),
            Termination::Collision { c, .. } => format!("collision({:.10e}{:+.10e}i)", c.re, c.im),
            Termination::KRangeEnd => "k_range_end".to_string(),
            Termination::IndexLost => "index_lost".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub k: f64,
    pub c: Complex64,
    pub residual: f64,
    pub dfdc: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub label: BranchLabel,
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

impl Branch {
    pub fn last(&self) -> &BranchPoint {
        self.points.last().expect("branches hold at least the seed")
    }

    /// `c` at `k` by linear interpolation between traced points.
    pub fn c_at(&self, k: f64) -> Option<Complex64> {
        self.points.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let (lo, hi) = if a.k <= b.k { (a, b) } else { (b, a) };
            if k >= lo.k && k <= hi.k && hi.k > lo.k {
                let t = (k - lo.k) / (hi.k - lo.k);
                Some(lo.c + (hi.c - lo.c) * t)
            } else {
                None
            }
        })
    }

    /// Columns `k, re_c, im_c, abs_f, abs_dfdc, label, termination`; the
    /// termination tag is on the last row only.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,re_c,im_c,abs_f,abs_dfdc,label,termination\n");
        let n = self.points.len();
        for (i, p) in self.points.iter().enumerate() {
            let term = if i + 1 == n { self.termination.tag() } else { String::new() };
            out.push_str(&format!(
                "{:.12e},{:.15e},{:.15e},{:.3e},{:.6e},{},{}\n",
                p.k,
                p.c.re,
                p.c.im,
                p.residual,
                p.dfdc.norm(),
                self.label.as_str(),
                term
            ));
        }
        out
    }
}

/// A mode with `|Im c|` below the contour margin, found from the large-k
/// seed and a first-order correction off the real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakMode {
    pub c: Complex64,
    /// `|Im c|` exceeds `100 eps |c|`.
    pub certified: bool,
    /// Sign of `U''` at the critical layer of `Re c`.
    pub predicted_sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeCensus {
    pub k: f64,
    pub index_upper: i32,
    pub unstable: Vec<Complex64>,
    pub neutral_nonsingular: Vec<f64>,
    pub singular_neutral: Vec<f64>,
    pub weak: Vec<WeakMode>,
    /// Cells that would not split below the depth limit: centre and index.
    pub multiple: Vec<(Complex64, i32)>,
    /// Cells whose children failed to reproduce the parent index.
    pub flagged_cells: usize,
}

impl ModeCensus {
    pub fn csv_header() -> &'static str {
        "k,n_unstable,index,modes\n"
    }

    /// One row: `k, n_unstable, index, re:im;re:im;...`.
    pub fn csv_row(&self) -> String {
        let modes: Vec<String> = self
            .unstable
            .iter()
            .copied()
            .chain(self.neutral_nonsingular.iter().chain(&self.singular_neutral).map(|&c| Complex64::new(c, 0.0)))
            .chain(self.weak.iter().map(|w| w.c))
            .map(|c| format!("{:.12e}:{:.12e}", c.re, c.im))
            .collect();
        format!("{:.12e},{},{},{}\n", self.k, self.unstable.len(), self.index_upper, modes.join(";"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BifurcationSlope {
    pub slope: Complex64,
    pub dfdk: Complex64,
    pub dfdc: Complex64,
}

impl BifurcationSlope {
    /// `+1` when the branch enters the upper half plane for increasing `k`.
    pub fn unstable_side(&self) -> i8 {
        if self.slope.im > 0.0 {
            1
        } else if self.slope.im < 0.0 {
            -1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedBranch {
    pub k1: f64,
    /// Traced points on `[-k1, k1]`, mirrored about `k = 0`.
    pub branch: Branch,
    pub index_at_zero: i32,
}

struct Newton {
    c: Complex64,
    f: Complex64,
    dfdc: Complex64,
    iterations: usize,
}

/// A profile with physical constants and solver settings.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub profile: &'a ShearProfile,
    pub physics: Physics,
    pub opts: SolverOptions,
}

impl<'a> Problem<'a> {
    pub fn new(profile: &'a ShearProfile, physics: Physics, opts: SolverOptions) -> Self {
        Self { profile, physics, opts }
    }

    fn range(&self) -> f64 {
        self.profile.range()
    }

    fn mid(&self) -> f64 {
        0.5 * (self.profile.u_min() + self.profile.u_max())
    }

    /// Contour distance kept from the range of `U`.
    pub fn margin(&self) -> f64 {
        CONTOUR_MARGIN_REL * self.range()
    }

    fn f_scale(&self) -> f64 {
        1.0 + self.physics.g
    }

    fn in_range(&self, c: f64) -> bool {
        c >= self.profile.u_min() && c <= self.profile.u_max()
    }

    /// `F_sigma(k, c)`, continued slightly below the interior of the range.
    pub fn f(&self, k: f64, c: Complex64) -> Result<Complex64, TraceError> {
        let s = dispersion::eval_f_continued(self.profile, &self.physics, k, c, &self.opts)?;
        s.f_sigma.ok_or(TraceError::Dispersion(DispersionError::Y0Vanishes { k, c }))
    }

    /// The pole-free dispersion function up to a positive factor.
    fn fbold(&self, k: f64, c: Complex64) -> Result<Complex64, TraceError> {
        let s = dispersion::eval_f(self.profile, &self.physics, k, c, &self.opts)?;
        Ok(s.fbold)
    }

    fn fbold_scaled(&self, k: f64, c: f64, ln_ref: f64) -> Result<f64, TraceError> {
        let s = dispersion::eval_f(self.profile, &self.physics, k, Complex64::new(c, 0.0), &self.opts)?;
        Ok(s.fbold.re * (s.ln_scale - ln_ref).exp())
    }

    fn fd_step(&self, c: Complex64) -> f64 {
        1e-7 * self.range().max(c.norm()).max(1e-3)
    }

    fn dfdc(&self, k: f64, c: Complex64) -> Result<Complex64, TraceError> {
        let h = self.fd_step(c);
        Ok((self.f(k, c + h)? - self.f(k, c - h)?) / (2.0 * h))
    }

    fn newton(&self, k: f64, start: Complex64, max_iter: usize) -> Result<Newton, TraceError> {
        let mut c = start;
        let max_jump = 0.25 * self.range().max(1e-3);
        for it in 1..=max_iter {
            let f = self.f(k, c)?;
            let h = self.fd_step(c);
            let fp = (self.f(k, c + h)? - f) / h;
            if fp.norm() == 0.0 || !fp.re.is_finite() {
                break;
            }
            let mut delta = f / fp;
            if delta.norm() > max_jump {
                delta *= max_jump / delta.norm();
            }
            c -= delta;
            if delta.norm() <= NEWTON_TOL * c.norm().max(1.0) {
                let f = self.f(k, c)?;
                if f.norm() <= BRANCH_FTOL * self.f_scale() {
                    let dfdc = self.dfdc(k, c)?;
                    return Ok(Newton { c, f, dfdc, iterations: it });
                }
            }
        }
        Err(TraceError::LostRoot { k, c })
    }

    /// Winding number of the pole-free dispersion function on the boundary
    /// of `region`. A contour through a zero is retried on regions grown or
    /// shrunk by up to twice the margin.
    pub fn index_count(&self, k: f64, region: &Region) -> Result<i32, TraceError> {
        let f = |c: Complex64| self.fbold(k, c);
        let delta = self.margin();
        let mut last = None;
        for d in [0.0, delta, -delta, 2.0 * delta, -2.0 * delta] {
            let r = if d == 0.0 { *region } else { region.perturbed(d) };
            match winding(&f, &r, 64) {
                Ok(w) => return Ok(w.count),
                Err(ContourError::ContourThroughZero { at }) => last = Some(at),
                Err(ContourError::Function(e)) => return Err(e),
            }
        }
        Err(TraceError::ContourThroughZero { at: last.unwrap_or_default() })
    }

    /// The semicircle region lifted by the contour margin.
    pub fn upper_region(&self) -> Region {
        let delta = self.margin();
        Region::UpperSemidisk { center: self.mid(), radius: 0.5 * self.range() + delta, floor: delta }
    }

    /// `R - |c - mid|` for the disk with diameter `[U(-h), U(0)]`.
    pub fn semicircle_slack(&self, c: Complex64) -> f64 {
        0.5 * self.range() - (c - Complex64::new(self.mid(), 0.0)).norm()
    }

    /// `50 max(1, U'(0)^2 / g)`.
    pub fn k_seed(&self) -> f64 {
        50.0 * (self.profile.du(0.0).powi(2) / self.physics.g).max(1.0)
    }

    /// Closed-form large-k approximations of `(c+, c-)`.
    pub fn seed_guess(&self, k: f64) -> (f64, f64) {
        let u0 = self.profile.u_max();
        let du0 = self.profile.du(0.0);
        let g_eff = self.physics.g + self.physics.sigma * k * k;
        let shift = u0 - du0 / (2.0 * k);
        let root = (g_eff / k * (1.0 + du0 * du0 / (4.0 * g_eff * k))).sqrt();
        (shift + root, shift - root)
    }

    /// Large-k seeds polished to roots: `c+` above `U(0)` and `c-`, which
    /// lies on the range once `sqrt(g/k)` is small.
    pub fn seed_large_k(&self, k: f64) -> Result<(Complex64, Complex64), TraceError> {
        let (plus, minus) = self.seed_guess(k);
        let c_plus =
            self.newton(k, Complex64::new(plus, 0.0), SEED_NEWTON_STEPS).map_err(|_| TraceError::SeedDiverged { k })?.c;
        let c_minus = if self.in_range(minus) {
            self.polish_weak(k, minus)?.c
        } else {
            self.newton(k, Complex64::new(minus, 0.0), SEED_NEWTON_STEPS).map_err(|_| TraceError::SeedDiverged { k })?.c
        };
        Ok((c_plus, c_minus))
    }

    /// Root near the range with an imaginary part too small to resolve by
    /// direct evaluation: Newton on `Re F` along the range, then
    /// `Im c = -Im F / (d Re F / dc)` with `Im F` from the critical-layer
    /// formula.
    pub fn polish_weak(&self, k: f64, guess: f64) -> Result<WeakMode, TraceError> {
        let real_f = |c: f64| -> Result<f64, TraceError> { Ok(self.f(k, Complex64::new(c, 0.0))?.re) };
        let mut c = guess;
        let mut converged = false;
        let mut slope = 0.0;
        for _ in 0..SEED_NEWTON_STEPS {
            let h = self.fd_step(Complex64::new(c, 0.0));
            let f = real_f(c)?;
            slope = (real_f(c + h)? - real_f(c - h)?) / (2.0 * h);
            let step = f / slope;
            c -= step;
            if !self.in_range(c) {
                break;
            }
            if step.abs() <= NEWTON_TOL * c.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(TraceError::SeedDiverged { k });
        }
        let yi = dispersion::eval_yi_formula(self.profile, k, c, &self.opts)?;
        let rel = self.profile.u_max() - c;
        let im = -yi * rel * rel / slope;
        let x_c = self.profile.invert(c).map_err(|e| TraceError::PreconditionFailed(e.to_string()))?;
        let curvature = self.profile.d2u(x_c);
        let c = Complex64::new(c, im);
        Ok(WeakMode {
            c,
            certified: im.abs() > 1e2 * f64::EPSILON * c.norm(),
            predicted_sign: if curvature > 0.0 {
                1
            } else if curvature < 0.0 {
                -1
            } else {
                0
            },
        })
    }

    /// `C'(k0) = -dF/dk / dF/dc_R` at a real root `c0` on the range.
    pub fn bifurcation_slope(&self, k0: f64, c0: f64) -> Result<BifurcationSlope, TraceError> {
        let cz = Complex64::new(c0, 0.0);
        let f0 = self.f(k0, cz)?;
        if f0.norm() > 1e-6 * self.f_scale() {
            return Err(TraceError::PreconditionFailed(format!("|F(k0, c0)| = {:.3e} is not small", f0.norm())));
        }
        let hk = SLOPE_FD_STEP * k0.abs().max(1.0);
        let dfdk = if k0 > hk {
            (self.f(k0 + hk, cz)? - self.f(k0 - hk, cz)?) / (2.0 * hk)
        } else {
            (self.f(k0 + hk, cz)? - f0) / hk
        };
        let hc = SLOPE_FD_STEP * self.range();
        let dfdc = if c0 - hc < self.profile.u_min() {
            (4.0 * self.f(k0, cz + hc)? - self.f(k0, cz + 2.0 * hc)? - 3.0 * f0) / (2.0 * hc)
        } else {
            (self.f(k0, cz + hc)? - self.f(k0, cz - hc)?) / (2.0 * hc)
        };
        if dfdc.norm() < SIMPLE_ROOT_TOL * self.f_scale() {
            return Err(TraceError::DegenerateRoot { k: k0, c: c0 });
        }
        Ok(BifurcationSlope { slope: -dfdk / dfdc, dfdk, dfdc })
    }

    /// Root at `k` just past a segment point `(k0, c0)`, from one Newton
    /// step off the real axis followed by a full correction.
    fn leave_segment(&self, k0: f64, c0: f64, dk: f64) -> Result<Option<Newton>, TraceError> {
        let slope = self.bifurcation_slope(k0, c0)?;
        let k = k0 + dk;
        let c_r = (c0 + slope.slope.re * dk).clamp(self.profile.u_min(), self.profile.u_max());
        let cz = Complex64::new(c_r, 0.0);
        let f = self.f(k, cz)?;
        let mut guess = cz - f / slope.dfdc;
        if guess.im <= 0.0 {
            guess = cz + slope.slope * dk;
        }
        if guess.im <= 1e2 * f64::EPSILON * guess.norm() {
            return Ok(None);
        }
        let root = match self.newton(k, guess, 12) {
            Ok(root) => root,
            Err(TraceError::LostRoot { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        // reject roots of some other branch
        let reach = 2.0 * (slope.slope * dk).norm() + 1e-8 * self.range();
        let local = (root.c - Complex64::new(c0, 0.0)).norm() <= reach;
        Ok((root.c.im > 0.0 && local).then_some(root))
    }

    /// Real `(k, c)` on the range where a complex branch lands, from a 2x2
    /// Newton solve of `F(k, c) = 0` along the range.
    fn land_on_segment(&self, k_guess: f64, c_guess: f64) -> Result<(f64, f64), TraceError> {
        let (lo, hi) = (self.profile.u_min(), self.profile.u_max());
        let (mut k, mut c) = (k_guess, c_guess.clamp(lo, hi));
        let hk = SLOPE_FD_STEP * k.abs().max(1.0);
        let hc = SLOPE_FD_STEP * self.range();
        for _ in 0..30 {
            let cz = Complex64::new(c, 0.0);
            let f = self.f(k, cz)?;
            let fk = (self.f(k + hk, cz)? - f) / hk;
            let fc = if c + hc > hi { (f - self.f(k, cz - hc)?) / hc } else { (self.f(k, cz + hc)? - f) / hc };
            let det = fk.re * fc.im - fc.re * fk.im;
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let dk = (f.re * fc.im - fc.re * f.im) / det;
            let dc = (fk.re * f.im - f.re * fk.im) / det;
            k -= dk;
            c = (c - dc).clamp(lo, hi);
            if dk.abs() < 1e-12 * k.abs().max(1.0) && dc.abs() < 1e-12 * self.range() {
                return Ok((k, c));
            }
        }
        Err(TraceError::LostRoot { k, c: Complex64::new(c, 0.0) })
    }

    /// `k` where a real branch meets `U(-h)`, bracketed by `[ka, kb]`.
    fn bottom_crossing(&self, ka: f64, kb: f64) -> Result<Option<f64>, TraceError> {
        let c = Complex64::new(self.profile.u_min(), 0.0);
        let fa = self.f(ka, c)?.re;
        let fb = self.f(kb, c)?.re;
        if fa * fb > 0.0 {
            return Ok(None);
        }
        let f = |k: f64| self.f(k, c).map(|v| v.re);
        brent(f, ka.min(kb), ka.max(kb), 1e-13, 0.0).map(Some).map_err(|e| match e {
            crate::roots::RootError::Objective(e) => e,
            _ => TraceError::LostRoot { k: kb, c },
        })
    }

    /// Root near `guess` at fixed `k`.
    pub fn polish(&self, k: f64, guess: Complex64) -> Result<BranchPoint, TraceError> {
        let n = self.newton(k, guess, 20)?;
        Ok(self.point(k, &n))
    }

    fn point(&self, k: f64, n: &Newton) -> BranchPoint {
        BranchPoint { k, c: n.c, residual: n.f.norm(), dfdc: n.dfdc }
    }

    /// Natural-parameter continuation of a root from `(k_start, c_start)`
    /// to `k_target`.
    pub fn trace_branch(
        &self,
        label: BranchLabel,
        k_start: f64,
        c_start: Complex64,
        k_target: f64,
        step_max: f64,
    ) -> Result<Branch, TraceError> {
        let seed = self.newton(k_start, c_start, 20)?;
        let points = vec![self.point(k_start, &seed)];
        self.continue_branch(label, points, k_target, step_max)
    }

    fn continue_branch(
        &self,
        label: BranchLabel,
        mut points: Vec<BranchPoint>,
        k_target: f64,
        step_max: f64,
    ) -> Result<Branch, TraceError> {
        let step_max = step_max.clamp(TRACE_STEP_MIN, TRACE_STEP_MAX);
        let dir = if k_target >= points[0].k { 1.0 } else { -1.0 };
        let mut step = step_max.clamp(TRACE_STEP_MIN, 0.01);
        let mut easy = 0;
        let (lo, hi) = (self.profile.u_min(), self.profile.u_max());
        let delta = self.margin();
        loop {
            let cur = *points.last().expect("seeded");
            if (k_target - cur.k) * dir <= 0.0 {
                return Ok(Branch { label, points, termination: Termination::KRangeEnd });
            }
            if cur.dfdc.norm() < SIMPLE_ROOT_TOL * self.f_scale() {
                return Ok(Branch { label, points, termination: Termination::Collision { k: cur.k, c: cur.c } });
            }
            let dk = (step * dir).clamp(-(k_target - cur.k).abs(), (k_target - cur.k).abs());
            let k_new = cur.k + dk;
            let rate = match points.len() {
                1 => -(self.f(cur.k + 1e-6 * dir, cur.c)? - self.f(cur.k, cur.c)?) / (1e-6 * dir) / cur.dfdc,
                n => {
                    let prev = points[n - 2];
                    (cur.c - prev.c) / (cur.k - prev.k)
                }
            };
            let mut predicted = cur.c + rate * dk;
            let real_branch = cur.c.im == 0.0 && !self.in_range(cur.c.re);
            if real_branch {
                predicted.im = 0.0;
            }

            // a real branch running into the bottom of the range
            if real_branch && cur.c.re < lo && predicted.re >= lo {
                if let Some(k_end) = self.bottom_crossing(cur.k, k_new)? {
                    return self.through_bottom(label, points, k_end, k_target, step_max, dir);
                }
                step *= 0.5;
                if step < TRACE_STEP_MIN {
                    return Err(TraceError::LostRoot { k: k_new, c: predicted });
                }
                continue;
            }

            let attempt = self.newton(k_new, predicted, 8);
            let accepted = match attempt {
                Ok(n) => {
                    let drift = (n.c - predicted).norm();
                    let tolerance = (0.25 * (predicted - cur.c).norm()).max(1e-8 * self.range());
                    let crosses = cur.c.im > 0.0 && n.c.im <= 0.0 && self.in_range(n.c.re);
                    let enters = real_branch && n.c.im != 0.0;
                    if enters && cur.c.re < lo {
                        if let Some(k_end) = self.bottom_crossing(cur.k, k_new)? {
                            return self.through_bottom(label, points, k_end, k_target, step_max, dir);
                        }
                    }
                    if crosses || enters {
                        return self.finish_on_segment(label, points, cur, k_new, n.c);
                    }
                    (drift <= tolerance).then_some(n)
                }
                Err(TraceError::Dispersion(DispersionError::Ray(RayError::NotContinuable { .. })))
                    if cur.c.im > 0.0 && self.in_range(cur.c.re) =>
                {
                    return self.finish_on_segment(label, points, cur, k_new, predicted);
                }
                Err(TraceError::LostRoot { .. }) => None,
                Err(TraceError::Dispersion(_)) => None,
                Err(e) => return Err(e),
            };
            match accepted {
                Some(n) => {
                    points.push(self.point(k_new, &n));
                    if n.iterations <= 3 {
                        easy += 1;
                        if easy >= 4 {
                            step = (2.0 * step).min(step_max);
                            easy = 0;
                        }
                    } else {
                        easy = 0;
                    }
                }
                None => {
                    easy = 0;
                    step *= 0.5;
                    if step < TRACE_STEP_MIN {
                        let near = cur.c.im.abs() < delta && cur.c.re > lo && cur.c.re < hi;
                        if near {
                            return Ok(Branch { label, points, termination: Termination::IndexLost });
                        }
                        return Err(TraceError::LostRoot { k: k_new, c: predicted });
                    }
                }
            }
        }
    }

    fn finish_on_segment(
        &self,
        label: BranchLabel,
        mut points: Vec<BranchPoint>,
        cur: BranchPoint,
        k_new: f64,
        c_new: Complex64,
    ) -> Result<Branch, TraceError> {
        // linear guess for where Im c reaches zero
        let t = if cur.c.im > 0.0 && c_new.im < cur.c.im { cur.c.im / (cur.c.im - c_new.im) } else { 1.0 };
        let t = t.clamp(0.0, 1.0);
        let k_guess = cur.k + t * (k_new - cur.k);
        let c_guess = cur.c.re + t * (c_new.re - cur.c.re);
        let (k_end, c_end) = self.land_on_segment(k_guess, c_guess)?;
        let cz = Complex64::new(c_end, 0.0);
        let f = self.f(k_end, cz)?;
        let hc = SLOPE_FD_STEP * self.range();
        let dfdc = if c_end + hc > self.profile.u_max() {
            (f - self.f(k_end, cz - hc)?) / hc
        } else {
            (self.f(k_end, cz + hc)? - f) / hc
        };
        points.push(BranchPoint { k: k_end, c: cz, residual: f.norm(), dfdc });
        Ok(Branch { label, points, termination: Termination::ReachedSegment { k_end, c_end } })
    }

    fn through_bottom(
        &self,
        label: BranchLabel,
        mut points: Vec<BranchPoint>,
        k_end: f64,
        k_target: f64,
        step_max: f64,
        dir: f64,
    ) -> Result<Branch, TraceError> {
        let c_end = self.profile.u_min();
        let cz = Complex64::new(c_end, 0.0);
        let f = self.f(k_end, cz)?;
        let hc = SLOPE_FD_STEP * self.range();
        let dfdc = (self.f(k_end, cz + hc)? - f) / hc;
        points.push(BranchPoint { k: k_end, c: cz, residual: f.norm(), dfdc });
        let landed = Termination::ReachedSegment { k_end, c_end };
        let dk = dir * 1e-3;
        if (k_target - k_end) * dir <= dk.abs() {
            return Ok(Branch { label, points, termination: landed });
        }
        match self.leave_segment(k_end, c_end, dk)? {
            Some(n) => {
                points.push(self.point(k_end + dk, &n));
                self.continue_branch(label, points, k_target, step_max)
            }
            None => Ok(Branch { label, points, termination: landed }),
        }
    }

    /// Continuation from a real root `(k0, c0)` on the range into the
    /// upper half plane, in the direction of `k` given by the sign of
    /// `k_target - k0`.
    pub fn trace_from_segment(
        &self,
        label: BranchLabel,
        k0: f64,
        c0: f64,
        k_target: f64,
        step_max: f64,
    ) -> Result<Option<Branch>, TraceError> {
        let dir = if k_target >= k0 { 1.0 } else { -1.0 };
        let cz = Complex64::new(c0, 0.0);
        let f = self.f(k0, cz)?;
        let slope = self.bifurcation_slope(k0, c0)?;
        let mut points = vec![BranchPoint { k: k0, c: cz, residual: f.norm(), dfdc: slope.dfdc }];
        let mut dk = 1e-3 * dir;
        for _ in 0..4 {
            if let Some(n) = self.leave_segment(k0, c0, dk)? {
                points.push(self.point(k0 + dk, &n));
                return self.continue_branch(label, points, k_target, step_max).map(Some);
            }
            dk *= 4.0;
        }
        Ok(None)
    }

    /// Located modes at one `k`.
    pub fn mode_census(&self, k: f64, neutral: Option<&NeutralModeReport>) -> Result<ModeCensus, TraceError> {
        let region = self.upper_region();
        let index_upper = self.index_count(k, &region)?;
        let mut census = ModeCensus {
            k,
            index_upper,
            unstable: Vec::new(),
            neutral_nonsingular: Vec::new(),
            singular_neutral: Vec::new(),
            weak: Vec::new(),
            multiple: Vec::new(),
            flagged_cells: 0,
        };
        if index_upper > 0 {
            let (lo, hi) = region.bounding_box();
            self.locate(k, Region::Rectangle { lo, hi }, index_upper, 0, &mut census)?;
        }
        census.unstable.sort_by(|a, b| a.re.total_cmp(&b.re));
        census.neutral_nonsingular = self.real_roots(k)?;
        if let Some(report) = neutral {
            let tol = 1e-9 * k.abs().max(1.0);
            if report.bottom.roots.iter().any(|&km| (km - k.abs()).abs() < tol) {
                census.singular_neutral.push(self.profile.u_min());
            }
            for m in &report.inflections {
                if m.singular_set().iter().any(|&s| (s - k.abs()).abs() < tol) {
                    census.singular_neutral.push(m.inflection.value);
                }
            }
        }
        census.weak = self.weak_modes(k.abs())?;
        Ok(census)
    }

    /// Roots within `margin()` of the interior of the range, found from sign
    /// changes of `Re F` on a uniform grid plus the large-k seed.
    fn weak_modes(&self, k: f64) -> Result<Vec<WeakMode>, TraceError> {
        let (lo, range) = (self.profile.u_min(), self.range());
        let grid: Vec<f64> =
            (0..WEAK_SCAN_POINTS).map(|i| lo + range * (i as f64 + 0.5) / WEAK_SCAN_POINTS as f64).collect();
        let mut values = Vec::with_capacity(grid.len());
        for &c in &grid {
            values.push(self.f(k, Complex64::new(c, 0.0)).ok().map(|f| f.re));
        }
        let mut guesses: Vec<f64> = grid
            .windows(2)
            .zip(values.windows(2))
            .filter_map(|(c, f)| match (f[0], f[1]) {
                (Some(a), Some(b)) if a.signum() != b.signum() => Some(c[0] + (c[1] - c[0]) * a / (a - b)),
                _ => None,
            })
            .collect();
        if k >= self.k_seed() {
            let (_, minus) = self.seed_guess(k);
            if self.in_range(minus) {
                guesses.push(minus);
            }
        }
        let mut found: Vec<WeakMode> = Vec::new();
        for guess in guesses {
            let weak = match self.polish_weak(k, guess) {
                Ok(w) => w,
                Err(TraceError::SeedDiverged { .. }) => continue,
                Err(e) => {
                    log::debug!("weak-mode polish at k = {k}, c = {guess}: {e}");
                    continue;
                }
            };
            let duplicate = found.iter().any(|w| (w.c.re - weak.c.re).abs() < 1e-8 * range);
            if weak.c.im.abs() < self.margin() && !duplicate {
                found.push(weak);
            }
        }
        found.sort_by(|a, b| a.c.re.total_cmp(&b.c.re));
        Ok(found)
    }

    fn locate(
        &self,
        k: f64,
        cell: Region,
        count: i32,
        depth: usize,
        census: &mut ModeCensus,
    ) -> Result<(), TraceError> {
        if count <= 0 {
            return Ok(());
        }
        let (lo, hi) = cell.bounding_box();
        if count == 1 {
            if let Ok(n) = self.newton(k, cell.center(), 30) {
                let pad = 1e-9 * self.range();
                let inside =
                    n.c.re > lo.re - pad && n.c.re < hi.re + pad && n.c.im > lo.im - pad && n.c.im < hi.im + pad;
                if inside {
                    census.unstable.push(n.c);
                    return Ok(());
                }
            }
        }
        if depth >= CENSUS_MAX_DEPTH {
            census.multiple.push((cell.center(), count));
            return Ok(());
        }
        for frac in [0.5, 0.4837, 0.5291] {
            let children = split(lo, hi, frac);
            let counts: Result<Vec<i32>, TraceError> = children.iter().map(|c| self.index_count(k, c)).collect();
            match counts {
                Ok(counts) => {
                    if counts.iter().sum::<i32>() != count {
                        census.flagged_cells += 1;
                    }
                    for (child, n) in children.iter().zip(counts) {
                        self.locate(k, *child, n, depth + 1, census)?;
                    }
                    return Ok(());
                }
                Err(TraceError::ContourThroughZero { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        census.flagged_cells += 1;
        census.multiple.push((cell.center(), count));
        Ok(())
    }

    /// Real roots outside the range, from sign changes of the pole-free
    /// function on windows beside the range, widened until `F > 0` at the
    /// far end.
    pub fn real_roots(&self, k: f64) -> Result<Vec<f64>, TraceError> {
        let (lo, hi) = (self.profile.u_min(), self.profile.u_max());
        let mut roots = Vec::new();
        for side in [-1.0, 1.0] {
            let edge = if side < 0.0 { lo } else { hi };
            let mut width = self.range();
            loop {
                let far = edge + side * width;
                let f_far = self.f(k, Complex64::new(far, 0.0));
                if matches!(f_far, Ok(v) if v.re > 0.0) || width > 64.0 * self.range() {
                    break;
                }
                width *= 2.0;
            }
            let n = 240;
            let nodes: Vec<f64> = (0..=n).map(|j| edge + side * width * j as f64 / n as f64).collect();
            let ln_ref =
                dispersion::eval_f(self.profile, &self.physics, k, Complex64::new(edge, 0.0), &self.opts)?.ln_scale;
            let values: Vec<f64> = nodes.iter().map(|&c| self.fbold_scaled(k, c, ln_ref)).collect::<Result<_, _>>()?;
            for j in 0..n {
                let (a, b) = (nodes[j], nodes[j + 1]);
                let (fa, fb) = (values[j], values[j + 1]);
                if j == 0 && fa == 0.0 {
                    continue;
                }
                if fb == 0.0 {
                    roots.push(b);
                } else if fa * fb < 0.0 {
                    let f = |c: f64| self.fbold_scaled(k, c, ln_ref);
                    let r = brent(f, a.min(b), a.max(b), 1e-15 * self.range().max(1.0), 0.0).map_err(|e| match e {
                        crate::roots::RootError::Objective(e) => e,
                        _ => TraceError::LostRoot { k, c: Complex64::new(a, 0.0) },
                    })?;
                    roots.push(r);
                }
            }
        }
        roots.sort_by(f64::total_cmp);
        Ok(roots)
    }

    /// The even branch joining `(-k1, c0)` and `(k1, c0)` through the upper
    /// half plane when `g` lies above `F0(c0)`.
    pub fn closed_low_k_branch(&self, c0: f64) -> Result<Option<ClosedBranch>, TraceError> {
        let inflection = self
            .profile
            .inflection_near(c0, 1e-9 * self.range().max(1.0))
            .copied()
            .ok_or(TraceError::Mode(ModeError::NotInflection(c0)))?;
        if inflection.sign >= 0 {
            return Err(TraceError::PreconditionFailed("U''' must be negative at the inflection".into()));
        }
        let f0 = modes::eval_f0(self.profile, c0, &self.opts)?;
        if f0 <= 0.0 {
            return Err(TraceError::PreconditionFailed(format!("F0 = {f0:.6e} is not positive")));
        }
        let s = modes::find_s(self.profile, &self.physics, c0, &self.opts)?;
        let Some(k1) = s.k1.filter(|&k| k > 0.0) else {
            return Ok(None);
        };
        let Some(half) = self.trace_from_segment(BranchLabel::Inflection, k1, c0, 0.0, TRACE_STEP_MAX)? else {
            return Err(TraceError::PreconditionFailed("branch does not enter the upper half plane below k1".into()));
        };
        if half.termination != Termination::KRangeEnd {
            return Err(TraceError::PreconditionFailed(format!("branch ended early: {}", half.termination.tag())));
        }
        let mut points: Vec<BranchPoint> = half.points.iter().map(|p| BranchPoint { k: -p.k, ..*p }).collect();
        points.extend(half.points.iter().rev().skip(1));
        let index_at_zero = self.index_count(0.0, &self.upper_region())?;
        Ok(Some(ClosedBranch {
            k1,
            branch: Branch {
                label: BranchLabel::Inflection,
                points,
                termination: Termination::ReachedSegment { k_end: k1, c_end: c0 },
            },
            index_at_zero,
        }))
    }
}

fn split(lo: Complex64, hi: Complex64, frac: f64) -> [Region; 4] {
    let mid = Complex64::new(lo.re + frac * (hi.re - lo.re), lo.im + frac * (hi.im - lo.im));
    [
        Region::Rectangle { lo, hi: mid },
        Region::Rectangle { lo: Complex64::new(mid.re, lo.im), hi: Complex64::new(hi.re, mid.im) },
        Region::Rectangle { lo: Complex64::new(lo.re, mid.im), hi: Complex64::new(mid.re, hi.im) },
        Region::Rectangle { lo: mid, hi },
    ]
}
