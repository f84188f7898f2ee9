use num_complex::Complex64;
use shearflow::contour::{winding, Region};
use shearflow::dispersion::{eval_f, Physics};
use shearflow::modes::{eval_f0, find_k_minus, find_s, neutral_modes};
use shearflow::tracer::{BranchLabel, Problem, Termination};
use shearflow::{ShearProfile, SolverOptions};

fn couette() -> ShearProfile {
    ShearProfile::parse("x2", 1.0).unwrap()
}

fn tanh2() -> ShearProfile {
    ShearProfile::parse("tanh(2*(x2+1))", 2.0).unwrap()
}

fn cubic() -> ShearProfile {
    ShearProfile::parse("1+x2+((1+x2)^3)/2", 2.0).unwrap()
}

fn problem(p: &ShearProfile, g: f64) -> Problem<'_> {
    Problem::new(p, Physics::gravity(g), SolverOptions::default())
}

/// Roots of `k coth(k) c^2 + c - g` for Couette flow with unit depth.
fn couette_roots(k: f64, g: f64) -> (f64, f64) {
    let a = if k == 0.0 { 1.0 } else { k / k.tanh() };
    let disc = (1.0 + 4.0 * a * g).sqrt();
    ((-1.0 + disc) / (2.0 * a), (-1.0 - disc) / (2.0 * a))
}

struct Critical {
    k_minus: f64,
    k0: f64,
}

fn tanh2_critical(g: f64) -> Critical {
    let p = tanh2();
    let opts = SolverOptions::default();
    let phys = Physics::gravity(g);
    Critical {
        k_minus: find_k_minus(&p, &phys, &opts).unwrap().k_minus().unwrap(),
        k0: find_s(&p, &phys, 0.0, &opts).unwrap().k0,
    }
}

#[test]
fn couette_index_examples() {
    let p = couette();
    let pr = problem(&p, 1.0);
    assert_eq!(pr.index_count(1.0, &pr.upper_region()).unwrap(), 0);
    let (plus, _) = couette_roots(1.0, 1.0);
    assert!((plus - 0.571359).abs() < 1e-6);
    let rect = Region::Rectangle { lo: Complex64::new(0.45, -0.1), hi: Complex64::new(0.75, 0.1) };
    assert_eq!(pr.index_count(1.0, &rect).unwrap(), 1);
}

#[test]
fn unstable_window_has_index_one() {
    let crit = tanh2_critical(1.0);
    let p = tanh2();
    let pr = problem(&p, 1.0);
    let k = 0.5 * (crit.k_minus + crit.k0);
    assert_eq!(pr.index_count(k, &pr.upper_region()).unwrap(), 1);
}

#[test]
fn couette_large_k_seed() {
    let p = couette();
    let pr = problem(&p, 1.0);
    let (plus_guess, _) = pr.seed_guess(100.0);
    assert!((plus_guess - 0.095125).abs() < 1e-6);
    let (exact, _) = couette_roots(100.0, 1.0);
    assert!((plus_guess - exact).abs() < 1e-4);
    let (plus, _) = pr.seed_large_k(100.0).unwrap();
    assert!((plus.re - exact).abs() < 1e-9 && plus.im.abs() < 1e-12);
}

#[test]
fn large_k_speeds_approach_shallow_water_scaling() {
    let p = tanh2();
    let pr = problem(&p, 1.0);
    let mut previous = (f64::INFINITY, f64::INFINITY);
    for k in [50.0, 100.0, 200.0, 400.0] {
        let (plus, minus) = pr.seed_large_k(k).unwrap();
        let scale = (1.0 / k).sqrt();
        let err_plus = ((plus.re - p.u_max()) / scale - 1.0).abs();
        let err_minus = ((minus.re - p.u_max()) / scale + 1.0).abs();
        assert!(err_plus < previous.0 && err_minus < previous.1, "k={k}");
        previous = (err_plus, err_minus);
    }
    assert!(previous.0 < 0.15 && previous.1 < 0.15);
}

#[test]
fn weak_large_k_mode_sign_follows_curvature() {
    let p = tanh2();
    let pr = problem(&p, 1.0);
    let (_, minus) = pr.seed_guess(60.0);
    let weak = pr.polish_weak(60.0, minus).unwrap();
    let curvature = p.d2u(p.invert(weak.c.re).unwrap());
    assert_eq!(weak.predicted_sign as f64, curvature.signum());
    if weak.c.im != 0.0 {
        assert_eq!(weak.c.im.signum(), curvature.signum());
    }
}

#[test]
fn couette_real_branches() {
    let p = couette();
    let pr = problem(&p, 1.0);
    let (plus0, minus0) = couette_roots(0.0, 1.0);
    assert!((plus0 - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);

    let plus = pr.trace_branch(BranchLabel::CPlus, 0.0, Complex64::new(plus0, 0.0), 4.0, 0.1).unwrap();
    assert_eq!(plus.termination, Termination::KRangeEnd);
    assert!(plus.points.windows(2).all(|w| w[1].c.re < w[0].c.re));
    for pt in &plus.points {
        assert!(pt.c.re > 0.0);
        assert!((pt.c.re - couette_roots(pt.k, 1.0).0).abs() < 1e-8);
    }

    let minus = pr.trace_branch(BranchLabel::CMinusLower, 0.0, Complex64::new(minus0, 0.0), 4.0, 0.1).unwrap();
    assert!(minus.points.windows(2).all(|w| w[1].c.re >= w[0].c.re));
    match minus.termination {
        Termination::ReachedSegment { k_end, c_end } => {
            assert!((k_end - 1.915008).abs() < 1e-5, "{k_end}");
            assert!((c_end + 1.0).abs() < 1e-12);
        }
        other => panic!("unexpected termination {other:?}"),
    }
}

#[test]
fn tanh_branch_from_bottom_to_inflection() {
    let crit = tanh2_critical(1.0);
    let p = tanh2();
    let pr = problem(&p, 1.0);
    let branch =
        pr.trace_from_segment(BranchLabel::CMinusUpper, crit.k_minus, p.u_min(), crit.k0 + 1.0, 0.05).unwrap().unwrap();
    assert!(branch.points[1..branch.points.len() - 1].iter().all(|pt| pt.c.im > 0.0));
    match branch.termination {
        Termination::ReachedSegment { k_end, c_end } => {
            assert!((k_end - crit.k0).abs() < 1e-5, "{k_end} vs {}", crit.k0);
            assert!(c_end.abs() < 1e-6);
        }
        other => panic!("unexpected termination {other:?}"),
    }
}

#[test]
fn bifurcation_slopes() {
    let crit = tanh2_critical(1.0);
    let p = tanh2();
    let pr = problem(&p, 1.0);
    let bottom = pr.bifurcation_slope(crit.k_minus, p.u_min()).unwrap();
    assert!(bottom.slope.im.abs() < 1e-6);
    assert!(bottom.slope.re > 0.0);

    // U''' < 0 at the inflection: unstable below k0
    let top = pr.bifurcation_slope(crit.k0, 0.0).unwrap();
    assert_eq!(top.unstable_side(), -1);

    let q = cubic();
    let pq = problem(&q, 1.0);
    let k0 = find_s(&q, &Physics::gravity(1.0), 0.0, &SolverOptions::default()).unwrap().k0;
    assert_eq!(pq.bifurcation_slope(k0, 0.0).unwrap().unstable_side(), 1);
}

#[test]
fn couette_census() {
    let p = couette();
    let pr = problem(&p, 1.0);
    let report = neutral_modes(&p, &Physics::gravity(1.0), &SolverOptions::default()).unwrap();
    let below = pr.mode_census(1.0, Some(&report)).unwrap();
    let (plus, minus) = couette_roots(1.0, 1.0);
    assert_eq!(below.index_upper, 0);
    assert!(below.unstable.is_empty());
    assert_eq!(below.neutral_nonsingular.len(), 2);
    assert!((below.neutral_nonsingular[0] - minus).abs() < 1e-8);
    assert!((below.neutral_nonsingular[1] - plus).abs() < 1e-8);

    let above = pr.mode_census(3.0, Some(&report)).unwrap();
    assert_eq!(above.index_upper, 0);
    assert_eq!(above.neutral_nonsingular.len(), 1);
    assert!((above.neutral_nonsingular[0] - couette_roots(3.0, 1.0).0).abs() < 1e-8);
}

#[test]
fn tanh_census_inside_and_beyond_window() {
    let crit = tanh2_critical(1.0);
    let p = tanh2();
    let pr = problem(&p, 1.0);
    let inside = pr.mode_census(0.5 * (crit.k_minus + crit.k0), None).unwrap();
    assert_eq!(inside.index_upper, 1);
    assert_eq!(inside.unstable.len(), 1);
    assert!(pr.semicircle_slack(inside.unstable[0]) >= -1e-8);
    assert!(inside.neutral_nonsingular.iter().any(|&c| c > p.u_max()));

    let beyond = pr.mode_census(crit.k0 + 1.0, None).unwrap();
    assert_eq!(beyond.index_upper, 0);
    assert!(beyond.unstable.is_empty());

    let far = pr.mode_census(60.0, None).unwrap();
    assert_eq!(far.index_upper, 0);
    assert_eq!(far.weak.len(), 1);
}

#[test]
fn census_matches_traced_branch() {
    let crit = tanh2_critical(1.0);
    let p = tanh2();
    let pr = problem(&p, 1.0);
    let branch =
        pr.trace_from_segment(BranchLabel::CMinusUpper, crit.k_minus, p.u_min(), crit.k0 + 1.0, 0.05).unwrap().unwrap();
    let n = branch.points.len();
    for pt in [&branch.points[n / 4], &branch.points[n / 2], &branch.points[3 * n / 4]] {
        assert!(pt.c.im > pr.margin());
        let census = pr.mode_census(pt.k, None).unwrap();
        assert!(census.unstable.iter().any(|c| (c - pt.c).norm() < 1e-7), "k={} {:?}", pt.k, census.unstable);
    }
}

#[test]
fn index_constant_between_critical_wave_numbers() {
    let crit = tanh2_critical(1.0);
    let p = tanh2();
    let pr = problem(&p, 1.0);
    let region = pr.upper_region();
    let pad = 0.02;
    for (lo, hi, expected) in [(0.0, crit.k_minus, 0), (crit.k_minus, crit.k0, 1), (crit.k0, crit.k0 + 2.0, 0)] {
        for i in 0..20 {
            let k = lo + pad + (hi - lo - 2.0 * pad) * i as f64 / 19.0;
            assert_eq!(pr.index_count(k, &region).unwrap(), expected, "k={k}");
        }
    }
}

#[test]
fn lower_half_plane_mirrors_upper() {
    let crit = tanh2_critical(1.0);
    let p = tanh2();
    let phys = Physics::gravity(1.0);
    let opts = SolverOptions::default();
    let pr = problem(&p, 1.0);
    let k = 0.5 * (crit.k_minus + crit.k0);
    let (lo, hi) = pr.upper_region().bounding_box();
    let upper = Region::Rectangle { lo, hi };
    let lower =
        Region::Rectangle { lo: lo.conj() - Complex64::new(0.0, hi.im - lo.im), hi: Complex64::new(hi.re, -lo.im) };
    let f = |c: Complex64| eval_f(&p, &phys, k, c, &opts).map(|s| s.fbold);
    assert_eq!(winding(&f, &upper, 64).unwrap().count, 1);
    assert_eq!(winding(&f, &lower, 64).unwrap().count, 1);

    let census = pr.mode_census(k, None).unwrap();
    let c = census.unstable[0];
    let direct = eval_f(&p, &phys, k, c, &opts).unwrap().f.unwrap();
    let mirrored = eval_f(&p, &phys, k, c.conj(), &opts).unwrap().f.unwrap();
    assert!((mirrored - direct.conj()).norm() < 1e-9);
}

#[test]
fn dispersion_and_branches_are_even_in_k() {
    let p = couette();
    let pr = problem(&p, 1.0);
    let (plus0, _) = couette_roots(0.0, 1.0);
    let right = pr.trace_branch(BranchLabel::CPlus, 0.0, Complex64::new(plus0, 0.0), 2.0, 0.1).unwrap();
    let left = pr.trace_branch(BranchLabel::CPlus, 0.0, Complex64::new(plus0, 0.0), -2.0, 0.1).unwrap();
    for k in [0.3, 0.7, 1.1, 1.5, 1.9] {
        let (r, l) = (right.c_at(k).unwrap(), left.c_at(-k).unwrap());
        assert!((r - l).norm() < 1e-6, "k={k}");
    }
    let t = tanh2();
    let pt = problem(&t, 1.0);
    for k in [0.3, 0.7, 1.1, 1.5, 1.9] {
        let c = Complex64::new(-0.3, 0.2);
        assert!((pt.f(k, c).unwrap() - pt.f(-k, c).unwrap()).norm() < 1e-12);
    }
}

#[test]
fn closed_low_wave_number_branch() {
    let p = tanh2();
    let opts = SolverOptions::default();
    let f0 = eval_f0(&p, 0.0, &opts).unwrap();

    let above = problem(&p, 1.05 * f0);
    let closed = above.closed_low_k_branch(0.0).unwrap().unwrap();
    assert_eq!(closed.index_at_zero, 1);
    let points = &closed.branch.points;
    let n = points.len();
    for i in 0..n {
        let (a, b) = (&points[i], &points[n - 1 - i]);
        assert!((a.k + b.k).abs() < 1e-12 && (a.c - b.c).norm() < 1e-12);
    }
    assert!(points[0].c.norm() < 1e-12 && (points[0].k + closed.k1).abs() < 1e-12);
    let middle = closed.branch.c_at(0.0).unwrap();
    assert!(middle.im > 0.0);
    assert_eq!(above.index_count(0.2 * closed.k1, &above.upper_region()).unwrap(), 1);

    let below = problem(&p, 0.95 * f0);
    assert!(below.closed_low_k_branch(0.0).unwrap().is_none());
    assert_eq!(below.index_count(0.0, &below.upper_region()).unwrap(), 0);

    let k1 = |eps: f64| find_s(&p, &Physics::gravity(f0 + eps), 0.0, &opts).unwrap().k1.unwrap();
    let ratio = k1(0.04) / k1(0.01);
    assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
}

#[test]
fn branch_endpoints_across_gravity_regimes() {
    let p = tanh2();
    let opts = SolverOptions::default();
    for g in [1.0, 1.09, 1.5] {
        let phys = Physics::gravity(g);
        let pr = problem(&p, g);
        let k_minus = find_k_minus(&p, &phys, &opts).unwrap().k_minus().unwrap();
        let s = find_s(&p, &phys, 0.0, &opts).unwrap();
        let mut allowed = vec![(k_minus, p.u_min()), (s.k0, 0.0)];
        if let Some(k1) = s.k1 {
            allowed.push((k1, 0.0));
        }
        let near_allowed =
            |k: f64, c: f64| allowed.iter().any(|&(ka, ca)| (ka - k).abs() < 1e-4 && (ca - c).abs() < 1e-6);

        let from_bottom =
            pr.trace_from_segment(BranchLabel::CMinusUpper, k_minus, p.u_min(), 6.0, 0.05).unwrap().unwrap();
        match from_bottom.termination {
            Termination::ReachedSegment { k_end, c_end } => assert!(near_allowed(k_end, c_end), "g={g}"),
            other => panic!("g={g}: {other:?}"),
        }
        match s.k1 {
            None => assert!(g < eval_f0(&p, 0.0, &opts).unwrap()),
            Some(k1) => {
                let closed = pr.closed_low_k_branch(0.0).unwrap().unwrap();
                assert!((closed.k1 - k1).abs() < 1e-12);
                if k1 >= k_minus {
                    // the branch leaving k1 upward ends at another allowed endpoint
                    let up = pr.trace_from_segment(BranchLabel::Inflection, k1, 0.0, 6.0, 0.05).unwrap();
                    if let Some(up) = up {
                        if let Termination::ReachedSegment { k_end, c_end } = up.termination {
                            assert!(near_allowed(k_end, c_end), "g={g}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn census_reports_unstable_modes_below_the_contour_margin() {
    let p = ShearProfile::parse("tanh(0.5*(x2+1))", 2.0).unwrap();
    let pr = problem(&p, 1.0);
    let k_minus = find_k_minus(&p, &Physics::gravity(1.0), &SolverOptions::default()).unwrap().k_minus().unwrap();
    let branch = pr.trace_from_segment(BranchLabel::CMinusUpper, k_minus, p.u_min(), 6.0, 0.05).unwrap().unwrap();
    for k in [2.0, 3.0, 4.0, 5.0] {
        let traced = branch.c_at(k).unwrap();
        assert!(traced.im > 0.0 && traced.im < pr.margin());
        let census = pr.mode_census(k, None).unwrap();
        assert_eq!(census.index_upper, 0);
        let weak = census.weak.iter().find(|w| (w.c.re - traced.re).abs() < 1e-4).expect("weak mode on the branch");
        assert!(weak.certified && weak.predicted_sign == 1);
        assert!((weak.c.im / traced.im - 1.0).abs() < 0.02, "k={k}: {} vs {}", weak.c, traced);
    }
}
