use num_complex::Complex64;
use shearflow::dispersion::{cauchy_residual, eval_f, eval_y, eval_yi_formula, Physics};
use shearflow::profile::ProfileError;
use shearflow::rayleigh::{asymptotic_bounds_check, shoot, solve_limit, solve_regular, Grid};
use shearflow::{ShearProfile, SolverOptions};

fn couette() -> ShearProfile {
    ShearProfile::parse("x2", 1.0).unwrap()
}

fn tanh_profile(a: f64) -> ShearProfile {
    ShearProfile::parse(&format!("tanh({a}*(x2+1))"), 2.0).unwrap()
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

/// `y(0)` at `c + i eps`, extrapolated to `eps -> 0` from three levels.
fn eps_limit_y0(p: &ShearProfile, k: f64, c: f64) -> Complex64 {
    let y = |eps: f64| shoot(p, k, Complex64::new(c, eps), &opts()).unwrap().y_true();
    let (a, b, d) = (y(1e-3), y(1e-4), y(1e-5));
    let first = (b * 10.0 - a) / 9.0;
    let second = (d * 10.0 - b) / 9.0;
    (second * 100.0 - first) / 99.0
}

#[test]
fn inversion_examples() {
    assert_eq!(couette().invert(-0.5).unwrap(), -0.5);
    assert!((tanh_profile(2.0).invert(0.0).unwrap() + 1.0).abs() < 1e-13);
    assert!(matches!(couette().invert(-2.0), Err(ProfileError::OutOfRange { .. })));
}

#[test]
fn near_singular_zone_examples() {
    let p = couette();
    assert!(p.split_intervals(0.0, Complex64::new(10.0, 0.0)).inner.is_none());

    let split = p.split_intervals(0.0, Complex64::new(-0.5, 0.0));
    let (lo, hi) = split.inner.unwrap();
    let threshold = split.rho0 * split.mu.powf(-1.5);
    let inside: Vec<f64> =
        (0..=20000).map(|i| -1.0 + i as f64 / 20000.0).filter(|&x| 1.0 / (p.u(x) + 0.5).abs() > threshold).collect();
    assert!((inside[0] - lo).abs() < 1e-4 && (inside[inside.len() - 1] - hi).abs() < 1e-4);
    assert!((0.5 * (lo + hi) + 0.5).abs() < 1e-12);

    let t = tanh_profile(2.0);
    let (a5, b5) = t.split_intervals(5.0, Complex64::new(0.0, 0.0)).inner.unwrap();
    let (a20, b20) = t.split_intervals(20.0, Complex64::new(0.0, 0.0)).inner.unwrap();
    assert!(a5 < -1.0 && b5 > -1.0);
    assert!(a5 < a20 && b20 < b5);
}

#[test]
fn couette_closed_forms() {
    let p = couette();
    for c in [Complex64::new(2.0, 0.0), Complex64::new(0.3, 0.2), Complex64::new(-3.0, -1.0)] {
        let sol = solve_regular(&p, 2.0, c, &opts(), &Grid::Endpoints).unwrap();
        let last = sol.grid.len() - 1;
        assert!((sol.y_true(last) - (2.0f64.sinh() / 2.0)).norm() < 1e-9);
        assert!((sol.yp_true(last) - 2.0f64.cosh()).norm() < 1e-9);
    }
    let sol = solve_regular(&p, 0.0, Complex64::new(-2.0, 0.0), &opts(), &Grid::Endpoints).unwrap();
    assert!((sol.y_true(1) - 1.0).norm() < 1e-10);

    let limit = solve_limit(&p, 1.0, -0.5, &opts(), &Grid::Endpoints).unwrap();
    let y0 = limit.y_true(limit.grid.len() - 1);
    assert!((y0.re - 1.0f64.sinh()).abs() < 1e-9);
    assert_eq!(y0.im, 0.0);
}

#[test]
fn limit_solution_off_inflection_has_imaginary_part_of_curvature_sign() {
    let p = tanh_profile(2.0);
    let c = p.u(-0.5);
    assert!(p.d2u(-0.5) < 0.0);
    let limit = shoot(&p, 1.0, Complex64::new(c, 0.0), &opts()).unwrap().y_true();
    let reference = eps_limit_y0(&p, 1.0, c);
    assert!(limit.im < 0.0);
    assert!((limit - reference).norm() < 1e-6 * reference.norm());
}

#[test]
fn limit_solution_at_inflection_value_is_real() {
    for p in [tanh_profile(2.0), tanh_profile(0.5), ShearProfile::parse("1+x2+((1+x2)^3)/2", 2.0).unwrap()] {
        let sol = solve_limit(&p, 1.3, 0.0, &opts(), &Grid::Uniform(81)).unwrap();
        assert!(sol.y.iter().all(|y| y.im == 0.0));
    }
}

#[test]
fn sinh_comparison_ratios_stay_bounded() {
    let p = tanh_profile(2.0);
    let c = Complex64::new(p.u_max() + 1.0, 0.0);
    let ratios: Vec<f64> =
        [20.0, 40.0, 80.0].iter().map(|&k| asymptotic_bounds_check(&p, k, c, 0.4, &opts()).unwrap()).collect();
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min > 0.0 && max / min < 10.0, "{ratios:?}");

    let through = asymptotic_bounds_check(&p, 40.0, Complex64::new(p.u(-1.0), 0.0), 0.4, &opts()).unwrap();
    assert!(through.is_finite());

    // with mu = (1 + k^2)^(-1/2) the Couette solution is sinh(k(x+h))/k, not
    // mu sinh((x+h)/mu), so the ratio is small but not zero
    let small = asymptotic_bounds_check(&couette(), 40.0, Complex64::new(2.0, 0.0), 0.4, &opts()).unwrap();
    assert!(small < 0.1, "{small}");
}

#[test]
fn dispersion_examples() {
    let p = couette();
    let phys = Physics::gravity(1.0);
    let y = eval_y(&p, 2.0, Complex64::new(3.0, 0.5), &opts()).unwrap();
    assert!((y - 2.0 / 2.0f64.tanh()).norm() < 1e-9);
    assert!((eval_y(&p, 0.0, Complex64::new(-2.0, 0.0), &opts()).unwrap() - 1.0).norm() < 1e-10);
    assert!((eval_y(&p, 0.0, Complex64::new(-1.0, 0.0), &opts()).unwrap() - 1.0).norm() < 1e-9);

    let f = eval_f(&p, &phys, 0.0, Complex64::new(-2.0, 0.0), &opts()).unwrap().f.unwrap();
    assert!((f - 1.0).norm() < 1e-9);
    let f = eval_f(&p, &phys, 1.0, Complex64::new(0.6, 0.0), &opts()).unwrap().f.unwrap();
    let expected = 0.36 / 1.0f64.tanh() + 0.6 - 1.0;
    assert!((f.re - expected).abs() < 1e-10 && f.im == 0.0);
    assert!((f.re - 0.07270).abs() < 1e-5);

    for profile in [couette(), tanh_profile(2.0), tanh_profile(0.5)] {
        for k in [0.0, 1.0, 5.0, 20.0] {
            let s = eval_f(&profile, &phys, k, Complex64::new(profile.u_max(), 0.0), &opts()).unwrap();
            assert_eq!(s.f.unwrap(), Complex64::new(-1.0, 0.0));
        }
        let y = eval_y(&profile, 0.0, Complex64::new(profile.u_min(), 0.0), &opts()).unwrap();
        assert!(close(y.re, profile.du(0.0) / profile.range(), 1e-8));
    }
}

#[test]
fn imaginary_part_formula_examples() {
    let t = tanh_profile(2.0);
    assert_eq!(eval_yi_formula(&t, 1.0, 0.0, &opts()).unwrap(), 0.0);
    assert_eq!(eval_yi_formula(&couette(), 1.0, -0.4, &opts()).unwrap(), 0.0);

    let c = t.u(-1.5);
    let formula = eval_yi_formula(&t, 1.0, c, &opts()).unwrap();
    assert!(formula > 0.0);
    let y = eps_limit_y0(&t, 1.0, c);
    let yp = {
        let d = |eps: f64| shoot(&t, 1.0, Complex64::new(c, eps), &opts()).unwrap().yp_true();
        let (a, b, e) = (d(1e-3), d(1e-4), d(1e-5));
        let first = (b * 10.0 - a) / 9.0;
        let second = (e * 10.0 - b) / 9.0;
        (second * 100.0 - first) / 99.0
    };
    assert!(close((yp / y).im, formula, 1e-6));
    let direct = eval_y(&t, 1.0, Complex64::new(c, 0.0), &opts()).unwrap();
    assert!(close(direct.im, formula, 1e-6));
}

#[test]
fn cauchy_representation_examples() {
    let c = couette();
    for z in [Complex64::new(1.0, 0.0), Complex64::new(-0.5, 0.5)] {
        assert!(cauchy_residual(&c, 2.0, z, &opts()).unwrap() < 1e-10);
    }
    let t = tanh_profile(0.5);
    for z in [Complex64::new(t.u_max() + 0.5, 0.0), Complex64::new(t.u_min() - 0.5, 0.0)] {
        assert!(cauchy_residual(&t, 6.0, z, &opts()).unwrap() < 1e-5);
    }
}

#[test]
fn pole_free_form_approaches_sinh_scaling_far_away() {
    // |Fbold - (U(0) - c)^2 cosh(kh)| relative to |c|^2 decays as |c| grows
    let t = tanh_profile(2.0);
    let phys = Physics::gravity(1.0);
    let k = 2.0;
    let deviation = |r: f64| {
        let c = Complex64::new(0.0, r);
        let s = eval_f(&t, &phys, k, c, &opts()).unwrap();
        let fbold = s.fbold * s.ln_scale.exp();
        let rel = t.u_max() - c;
        (fbold - rel * rel * (k * t.depth()).cosh()).norm() / rel.norm_sqr()
    };
    let (d1, d2) = (deviation(1e3), deviation(2e3));
    assert!(d2 < d1 && d1 < 1.0, "{d1} {d2}");
}
