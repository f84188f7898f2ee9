use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use shearflow::dispersion::{self, eval_f};
use shearflow::modes::{self, NeutralModeReport};
use shearflow::tracer::{Branch, BranchLabel, ModeCensus, Problem, Termination};
use shearflow::ShearProfile;

use crate::config::RunConfig;
use crate::CliError;

pub fn load_profile(config: &RunConfig) -> Result<ShearProfile, CliError> {
    Ok(ShearProfile::parse(&config.profile.expr, config.profile.h)?)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn write_effective_config(config: &RunConfig) -> Result<(), CliError> {
    write_file(&config.output.dir, "effective_config.toml", &config.to_toml())
}

pub fn check(config: &RunConfig) -> Result<(), CliError> {
    let profile = load_profile(config)?;
    let mut out = String::new();
    let _ = writeln!(out, "profile: U(x2) = {} on [-{}, 0]", config.profile.expr, config.profile.h);
    let _ = writeln!(out, "monotone: yes");
    let _ = writeln!(out, "range: [{:.12e}, {:.12e}]", profile.u_min(), profile.u_max());
    let _ = writeln!(out, "min U': {:.12e}", profile.min_slope());
    let _ = writeln!(out, "h0: {:.12e}", profile.margin());
    if profile.inflections().is_empty() {
        let _ = writeln!(out, "inflections: none");
    } else {
        let _ = writeln!(out, "inflections: {}", profile.inflections().len());
        for inflection in profile.inflections() {
            let sign = match inflection.sign {
                1 => "U'''>0",
                -1 => "U'''<0",
                _ => "U'''=0 (degenerate)",
            };
            let _ = writeln!(out, "  x2={:.12e} c0={:.12e} {sign}", inflection.x, inflection.value);
        }
    }
    for zero in profile.degenerate_zeros() {
        let _ = writeln!(out, "warning: U'' touches zero without changing sign at x2={zero:.6e}");
    }
    print!("{out}");
    Ok(())
}

pub fn neutral_report(config: &RunConfig, profile: &ShearProfile) -> Result<NeutralModeReport, CliError> {
    Ok(modes::neutral_modes(profile, &config.physics(), &config.solver())?)
}

pub fn neutral(config: &RunConfig) -> Result<(), CliError> {
    let profile = load_profile(config)?;
    let report = neutral_report(config, &profile)?;
    let dir = &config.output.dir;
    write_file(dir, "neutral.txt", &report.to_text())?;
    write_file(dir, "neutral.csv", &report.to_csv())?;
    write_effective_config(config)?;
    match report.bottom.k_minus() {
        Some(k) => println!("k_minus = {k:.10}"),
        None => println!("no bottom-speed neutral mode (g above g_sharp)"),
    }
    if report.sigma > 0.0 {
        let roots: Vec<String> = report.bottom.roots.iter().map(|k| format!("{k:.10}")).collect();
        println!("k_sharp = [{}], g_sharp = {:.10?}", roots.join(", "), report.bottom.g_sharp);
    }
    if report.inflections.is_empty() {
        println!("inflections: none");
    }
    for m in &report.inflections {
        let set: Vec<String> = m.singular_set().iter().map(|k| format!("{k:.10}")).collect();
        println!(
            "c0 = {:.10}: S = {{{}}}, k_C = {}, F0 = {}, class = {}",
            m.inflection.value,
            set.join(", "),
            m.k_c.map_or("none".into(), |k| format!("{k:.10}")),
            m.f0.map_or("undefined".into(), |f| format!("{f:.10}")),
            m.class.label()
        );
    }
    Ok(())
}

/// Whether `branch` already starts or ends at `(k, c)` and runs from there
/// in the direction `dir` of `k`.
fn covers(branch: &Branch, k: f64, c: f64, dir: f64) -> bool {
    let near = |i: usize| (branch.points[i].k - k).abs() < 1e-6 && (branch.points[i].c - c).norm() < 1e-6;
    let n = branch.points.len();
    if n < 2 {
        return false;
    }
    (near(0) && (branch.points[1].k - k) * dir > 0.0) || (near(n - 1) && (branch.points[n - 2].k - k) * dir > 0.0)
}

/// All branches on `[k_min, k_max]`: the real branches seeded at `k_min`,
/// the branch leaving the bottom of the range, and every branch leaving a
/// singular neutral mode at an inflection value.
pub fn trace_all(config: &RunConfig, problem: &Problem, report: &NeutralModeReport) -> Result<Vec<Branch>, CliError> {
    let (k_min, k_max, step) = (config.trace.k_min, config.trace.k_max, config.trace.step_max);
    let profile = problem.profile;
    let roots = problem.real_roots(k_min)?;
    let above = roots
        .iter()
        .copied()
        .filter(|&c| c > profile.u_max())
        .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.max(c))));
    let below = roots
        .iter()
        .copied()
        .filter(|&c| c < profile.u_min())
        .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.min(c))));

    let mut seeds: Vec<(BranchLabel, f64)> = Vec::new();
    if let Some(c) = above {
        seeds.push((BranchLabel::CPlus, c));
    }
    if let Some(c) = below {
        seeds.push((BranchLabel::CMinusLower, c));
    }
    let real: Result<Vec<Branch>, CliError> = seeds
        .par_iter()
        .map(|&(label, c)| Ok(problem.trace_branch(label, k_min, Complex64::new(c, 0.0), k_max, step)?))
        .collect();
    let mut branches = real?;

    if below.is_none() {
        if let Some(k_minus) = report.bottom.k_minus().filter(|&k| k > k_min && k < k_max) {
            if let Some(b) =
                problem.trace_from_segment(BranchLabel::CMinusUpper, k_minus, profile.u_min(), k_max, step)?
            {
                branches.push(b);
            }
        }
    }

    let mut starts: Vec<(f64, f64, f64)> = Vec::new();
    for m in &report.inflections {
        for k in m.singular_set() {
            if k <= 0.0 || k <= k_min || k >= k_max {
                continue;
            }
            for (target, dir) in [(k_min, -1.0), (k_max, 1.0)] {
                if !branches.iter().any(|b| covers(b, k, m.inflection.value, dir)) {
                    starts.push((k, m.inflection.value, target));
                }
            }
        }
    }
    let from_inflections: Result<Vec<Option<Branch>>, CliError> = starts
        .par_iter()
        .map(|&(k, c0, target)| Ok(problem.trace_from_segment(BranchLabel::Inflection, k, c0, target, step)?))
        .collect();
    for b in from_inflections?.into_iter().flatten() {
        let first = b.points[0];
        let dir = (b.points[1].k - first.k).signum();
        if !branches.iter().any(|other| covers(other, first.k, first.c.re, dir)) {
            branches.push(b);
        }
    }
    Ok(branches)
}

fn branch_file_names(branches: &[Branch]) -> Vec<String> {
    let mut counts = std::collections::HashMap::new();
    branches
        .iter()
        .map(|b| {
            let n = counts.entry(b.label.as_str()).or_insert(0);
            *n += 1;
            format!("branch_{}_{}.csv", b.label.as_str(), n)
        })
        .collect()
}

pub fn trace(config: &RunConfig) -> Result<(), CliError> {
    let profile = load_profile(config)?;
    let problem = Problem::new(&profile, config.physics(), config.solver());
    let report = neutral_report(config, &profile)?;
    let branches = trace_all(config, &problem, &report)?;
    for (branch, name) in branches.iter().zip(branch_file_names(&branches)) {
        write_file(&config.output.dir, &name, &branch.to_csv())?;
        let first = branch.points[0];
        let last = branch.last();
        let max_im = branch.points.iter().map(|p| p.c.im).fold(0.0, f64::max);
        println!(
            "{name}: {} points, k {:.6} -> {:.6}, c {:.6}{:+.6}i -> {:.6}{:+.6}i, max Im c {:.3e}, {}",
            branch.points.len(),
            first.k,
            last.k,
            first.c.re,
            first.c.im,
            last.c.re,
            last.c.im,
            max_im,
            branch.termination.tag()
        );
    }
    if branches.is_empty() {
        warn!("no branch could be seeded on [{}, {}]", config.trace.k_min, config.trace.k_max);
    }
    write_effective_config(config)
}

pub fn census_rows(
    config: &RunConfig,
    problem: &Problem,
    report: &NeutralModeReport,
) -> Result<Vec<ModeCensus>, CliError> {
    config
        .census
        .k_list
        .par_iter()
        .map(|&k| {
            info!("census at k = {k}");
            Ok(problem.mode_census(k, Some(report))?)
        })
        .collect()
}

pub fn census(config: &RunConfig) -> Result<(), CliError> {
    let profile = load_profile(config)?;
    let problem = Problem::new(&profile, config.physics(), config.solver());
    let report = neutral_report(config, &profile)?;
    let rows = census_rows(config, &problem, &report)?;
    let mut csv = ModeCensus::csv_header().to_string();
    for row in &rows {
        csv.push_str(&row.csv_row());
        let unstable: Vec<String> = row.unstable.iter().map(|c| format!("{:.8}{:+.8}i", c.re, c.im)).collect();
        println!(
            "k = {:.6}: index {}, unstable [{}], neutral {:?}, singular {:?}{}",
            row.k,
            row.index_upper,
            unstable.join(", "),
            row.neutral_nonsingular,
            row.singular_neutral,
            if row.weak.is_empty() {
                String::new()
            } else {
                let weak: Vec<String> = row.weak.iter().map(|w| format!("{:.8}{:+.3e}i", w.c.re, w.c.im)).collect();
                format!(", weak [{}]", weak.join(", "))
            }
        );
        if row.flagged_cells > 0 || !row.multiple.is_empty() {
            warn!("k = {}: {} flagged cells, multiple roots {:?}", row.k, row.flagged_cells, row.multiple);
        }
    }
    write_file(&config.output.dir, "census.csv", &csv)?;
    write_effective_config(config)
}

pub fn scan(config: &RunConfig) -> Result<(), CliError> {
    let profile = load_profile(config)?;
    let physics = config.physics();
    let opts = config.solver();
    let s = &config.scan;
    let range = profile.range();
    let re_lo = profile.u_min() - s.re_padding * range;
    let re_hi = profile.u_max() + s.re_padding * range;
    let mut grid = Vec::new();
    for &k in &config.census.k_list {
        for j in 0..s.im_points {
            let im = if s.im_points == 1 { 0.0 } else { s.im_extent * range * j as f64 / (s.im_points - 1) as f64 };
            for i in 0..s.re_points {
                let re = re_lo + (re_hi - re_lo) * i as f64 / (s.re_points - 1) as f64;
                grid.push((k, Complex64::new(re, im)));
            }
        }
    }
    let samples: Vec<_> = grid
        .par_iter()
        .filter_map(|&(k, c)| match eval_f(&profile, &physics, k, c, &opts) {
            Ok(sample) => Some(sample),
            Err(e) => {
                warn!("skipping k = {k}, c = {c}: {e}");
                None
            }
        })
        .collect();
    write_file(&config.output.dir, "scan.csv", &dispersion::scan_csv(&samples))?;
    println!("scan: {} of {} grid points written", samples.len(), grid.len());
    write_effective_config(config)
}

/// `(k, c)` on a branch at `k` when the branch is in the open upper half plane there.
pub fn branch_mode_at(branch: &Branch, k: f64, floor: f64) -> Option<Complex64> {
    let c = branch.c_at(k)?;
    let interior = branch.points.first().is_some_and(|p| p.k.min(branch.last().k) < k && p.k.max(branch.last().k) > k);
    (c.im > floor && interior && !matches!(branch.termination, Termination::IndexLost)).then_some(c)
}
