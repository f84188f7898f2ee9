use num_complex::Complex64;
use rayon::prelude::*;
use shearflow::dispersion::eval_f;
use shearflow::modes;
use shearflow::tracer::Problem;
use shearflow::{Physics, ShearProfile, SolverOptions};

use crate::commands::{self, branch_mode_at};
use crate::config::RunConfig;
use crate::CliError;

pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }

    fn failed(name: impl Into<String>, error: impl std::fmt::Display) -> Self {
        Self { name: name.into(), passed: false, detail: format!("error: {error}") }
    }
}

struct Context<'a> {
    profile: &'a ShearProfile,
    physics: Physics,
    opts: SolverOptions,
}

impl Context<'_> {
    fn f(&self, k: f64, c: f64) -> Result<Complex64, String> {
        let s = eval_f(self.profile, &Physics::gravity(self.physics.g), k, Complex64::new(c, 0.0), &self.opts)
            .map_err(|e| e.to_string())?;
        s.f.ok_or_else(|| format!("F undefined at k={k}, c={c}"))
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn run(name: &str, body: impl FnOnce() -> Result<(bool, String), String>) -> CheckLine {
    match body() {
        Ok((passed, detail)) => CheckLine::new(name, passed, detail),
        Err(e) => CheckLine::failed(name, e),
    }
}

fn surface_identity(cx: &Context) -> CheckLine {
    run("surface_speed_identity", || {
        let g = cx.physics.g;
        let mut worst: f64 = 0.0;
        for k in [0.0, 1.0, 5.0, 20.0] {
            worst = worst.max((cx.f(k, cx.profile.u_max())? + g).norm());
        }
        Ok((worst < 1e-8 * g.max(1.0), format!("max |F(k; U(0)) + g| = {worst:.2e}")))
    })
}

fn surface_slope(cx: &Context) -> CheckLine {
    run("fd_surface_slope", || {
        let top = cx.profile.u_max();
        let h = 2e-6 * cx.profile.range();
        let (f0, f1, f2) = (cx.f(1.0, top)?, cx.f(1.0, top + h)?, cx.f(1.0, top + 2.0 * h)?);
        let derivative = (4.0 * f1 - f2 - 3.0 * f0) / (2.0 * h);
        let gap = (derivative - cx.profile.du(0.0)).norm();
        Ok((gap < 1e-4, format!("|dF/dc - U'(0)| = {gap:.2e} at U(0)")))
    })
}

fn long_wave_identity(cx: &Context) -> CheckLine {
    run("long_wave_identity", || {
        let p = cx.profile;
        let mut worst: f64 = 0.0;
        for i in 0..6 {
            let c = if i < 3 {
                p.u_max() + (0.2 + 0.6 * i as f64) * p.range()
            } else {
                p.u_min() - (0.2 + 0.6 * (i - 3) as f64) * p.range()
            };
            let integral = simpson(|x| (p.u(x) - c).powi(-2), -p.depth(), 0.0, 20000);
            let exact = 1.0 / integral - cx.physics.g;
            worst = worst.max((cx.f(0.0, c)? - exact).norm() / exact.abs().max(1.0));
        }
        Ok((worst < 1e-8, format!("max deviation from 1/int (U-c)^-2 - g: {worst:.2e}")))
    })
}

fn k_squared_shape(cx: &Context) -> CheckLine {
    run("fd_k_squared_shape", || {
        let p = cx.profile;
        let mut min_first = f64::INFINITY;
        let mut max_second = f64::NEG_INFINITY;
        for i in 0..10 {
            let big_k = 0.05 + 0.7 * i as f64;
            let c = if i % 2 == 0 { p.u_max() + 0.3 * p.range() } else { p.u_min() - 0.3 * p.range() };
            let dk = 1e-3 * big_k.max(0.1);
            let at = |kk: f64| cx.f(kk.sqrt(), c).map(|f| f.re);
            let (fm, f0, fp) = (at(big_k - dk)?, at(big_k)?, at(big_k + dk)?);
            min_first = min_first.min((fp - fm) / (2.0 * dk));
            max_second = max_second.max((fp - 2.0 * f0 + fm) / (dk * dk));
        }
        Ok((
            min_first > 0.0 && max_second < 0.0,
            format!("min dF/dK = {min_first:.3e}; max d2F/dK2 = {max_second:.3e}"),
        ))
    })
}

fn bottom_bracket(cx: &Context) -> CheckLine {
    run("bottom_speed_bracket", || {
        let modes = modes::find_k_minus(cx.profile, &cx.physics, &cx.opts).map_err(|e| e.to_string())?;
        let bottom = cx.profile.u_min();
        let sigma = cx.physics.sigma;
        let Some(k_minus) = modes.roots.first().copied() else {
            return Ok((sigma > 0.0, format!("no roots; g_sharp = {:?}", modes.g_sharp)));
        };
        let upper = modes.roots.get(1).copied().unwrap_or(f64::INFINITY);
        let extent = 1.5 * modes.roots.last().copied().unwrap_or(k_minus).max(2.0 * k_minus);
        let mut consistent = true;
        for i in 0..40 {
            let k = extent * (i as f64 + 0.5) / 40.0;
            let f = cx.f(k, bottom)?.re - sigma * k * k;
            let inside = k > k_minus && k < upper;
            if (k - k_minus).abs() > 1e-6 && (k - upper).abs() > 1e-6 && (f > 0.0) != inside {
                consistent = false;
            }
        }
        Ok((consistent, format!("roots {:?}; sign pattern on 40 points consistent = {consistent}", modes.roots)))
    })
}

fn inflection_checks(cx: &Context) -> Vec<CheckLine> {
    let mut lines = Vec::new();
    for (i, inflection) in cx.profile.inflections().iter().enumerate() {
        let c0 = inflection.value;
        lines.push(run(&format!("sl_duality_{i}"), || {
            let gravity = Physics::gravity(cx.physics.g);
            let s = modes::find_s(cx.profile, &gravity, c0, &cx.opts).map_err(|e| e.to_string())?;
            let pairs =
                modes::sl_negative_eigenvalues(cx.profile, &gravity, c0, &cx.opts).map_err(|e| e.to_string())?;
            let set = s.singular_set();
            let worst = pairs
                .iter()
                .map(|pair| set.iter().map(|&k| (pair.k_sl - k).abs()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            Ok((
                pairs.len() == set.len() && worst < 1e-5,
                format!("|S| = {}; Robin count = {}; max |k_sl - k| = {worst:.1e}", set.len(), pairs.len()),
            ))
        }));
        lines.push(run(&format!("long_wave_classifier_{i}"), || {
            let f0 = modes::eval_f0(cx.profile, c0, &cx.opts).map_err(|e| e.to_string())?;
            let k_c = modes::find_k_c(cx.profile, c0, &cx.opts).map_err(|e| e.to_string())?;
            Ok(((f0 > 0.0) == k_c.is_some(), format!("F0 = {f0:.6e}; k_C = {k_c:?}")))
        }));
    }
    lines
}

fn census_checks(config: &RunConfig, cx: &Context) -> Result<Vec<CheckLine>, CliError> {
    let problem = Problem::new(cx.profile, cx.physics, cx.opts);
    let report = commands::neutral_report(config, cx.profile)?;
    let branches = match commands::trace_all(config, &problem, &report) {
        Ok(b) => b,
        Err(e) => return Ok(vec![CheckLine::failed("branch_trace", e)]),
    };
    let floor = 10.0 * problem.margin();
    Ok(config
        .census
        .k_list
        .par_iter()
        .map(|&k| {
            run(&format!("census_branch_k={k}"), || {
                let census = problem.mode_census(k, Some(&report)).map_err(|e| e.to_string())?;
                let slack = census.unstable.iter().map(|&c| problem.semicircle_slack(c)).fold(f64::INFINITY, f64::min);
                let expected: Vec<Complex64> = branches.iter().filter_map(|b| branch_mode_at(b, k, floor)).collect();
                let mut worst: f64 = 0.0;
                for guess in &expected {
                    let point = problem.polish(k, *guess).map_err(|e| e.to_string())?;
                    let gap = census.unstable.iter().map(|c| (c - point.c).norm()).fold(f64::INFINITY, f64::min);
                    worst = worst.max(gap);
                }
                let counted = census.index_upper as usize
                    == census.unstable.len() + census.multiple.iter().map(|m| m.1 as usize).sum::<usize>();
                let passed = counted && slack >= -1e-8 && worst < 1e-7;
                Ok((
                    passed,
                    format!(
                        "index {}; located {}; branch modes {}; max branch gap {:.1e}; min semicircle slack {:.2e}",
                        census.index_upper,
                        census.unstable.len(),
                        expected.len(),
                        worst,
                        if slack.is_finite() { slack } else { 0.0 }
                    ),
                ))
            })
        })
        .collect())
}

pub fn verify(config: &RunConfig) -> Result<Vec<CheckLine>, CliError> {
    let profile = commands::load_profile(config)?;
    let cx = Context { profile: &profile, physics: config.physics(), opts: config.solver() };
    let mut lines = vec![
        surface_identity(&cx),
        surface_slope(&cx),
        long_wave_identity(&cx),
        k_squared_shape(&cx),
        bottom_bracket(&cx),
    ];
    lines.extend(inflection_checks(&cx));
    lines.extend(census_checks(config, &cx)?);
    Ok(lines)
}

pub fn to_csv(lines: &[CheckLine]) -> String {
    let mut out = String::from("check,status,detail\n");
    for line in lines {
        let status = if line.passed { "pass" } else { "fail" };
        out.push_str(&format!("{},{},\"{}\"\n", line.name, status, line.detail.replace('"', "'")));
    }
    out
}
