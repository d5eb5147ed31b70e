//! Acceptance gate: one PASS/FAIL line per criterion. Exits non-zero when any
//! criterion fails.

use misfit_cli::{crossover_bracket, default_material, dislocations_win, run_corrector, run_pyramid_scaling, RunConfig};
use misfit_core::corrector::{
    cubic_scaling_check, nonlinear_energy, resolve_scaled, solve_corrector, HexMesh, NewtonOptions, SolverOptions,
    SvkDensity,
};
use misfit_core::material::{area_gap, plastic_energy};
use misfit_core::pyramid::{
    build_array, divergence_log_rate, energy_p, rectangular_loop, ArrayField, CirculationOptions, DoublePyramid,
    QuadratureSpec, Shape, TransitionField,
};
use misfit_core::search::golden_section_by;
use misfit_core::theta::{PolynomialFamily, GOLDEN_MAX_ITER, GOLDEN_TOL};
use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};
use twofloat::TwoFloat;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut worst_gap, mut worst_res, mut beyond) = (0.0f64, 0.0f64, 0usize);
    let mut ok = true;
    for _ in 0..10_000 {
        let fam = PolynomialFamily::new(
            log_uniform(&mut rng, 1e-3, 1e3),
            log_uniform(&mut rng, 1e-2, 1e9),
            rng.random_range(1.0 + 1e-6..1.5),
            log_uniform(&mut rng, 1e-3, 1e3),
        )
        .unwrap();
        let (_, plus) = fam.critical_points();
        let res = fam.derivative(plus).abs() / fam.derivative_scale(plus);
        worst_res = worst_res.max(res);
        ok &= res <= 1e-10;
        let lo = 1.0 / fam.alpha();
        if plus <= 1.0 {
            let g = fam.golden_section_theta(GOLDEN_TOL, GOLDEN_MAX_ITER);
            let gap = (plus - g.x).abs();
            worst_gap = worst_gap.max(gap);
            ok &= gap <= 1e-8;
        } else {
            // P_tot' < 0 at 1/alpha and has a single root above it, bounded by (1 + u)/alpha
            beyond += 1;
            let hi = 2.0 * (1.0 + fam.c() / fam.big_r()) / fam.alpha();
            let g = golden_section_by(lo, hi, GOLDEN_TOL * hi, GOLDEN_MAX_ITER, |x, y| fam.energy_difference(x, y) < 0.0);
            let gap = (plus - g.x).abs() / plus;
            worst_gap = worst_gap.max(gap);
            ok &= gap <= 1e-8;
        }
    }
    let t = start.elapsed();
    outcome(
        ok && within(t, 10.0),
        format!("max theta gap {worst_gap:.2e}, max residual {worst_res:.2e}, {beyond} draws with theta_plus > 1, {t:.2?}"),
    )
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let (a, s, k, r) = (1.1f64, 1.0, 1.0, 1e6);
    let sol = PolynomialFamily::new(k, r, a, s).unwrap().minimize();
    let lim = s * s / (a.powi(3) * k);
    let el = sol.p_el / r / lim;
    let pl = (s * r * r * (1.0 - 1.0 / (a * a)) - sol.p_pl) / r / (2.0 * lim);
    let t = start.elapsed();
    outcome(
        (el - 1.0).abs() <= 0.01 && (pl - 1.0).abs() <= 0.01 && within(t, 1.0),
        format!("E_el ratio {el:.8}, E_pl defect ratio {pl:.8}, {t:.2?}"),
    )
}

fn div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q = a / b;
    q + (a - q * b) / b.hi()
}

fn ac3() -> Outcome {
    let fam = PolynomialFamily::new(1.0, 1.0, 1.1, 1.0).unwrap();
    let c = fam.c();
    let coeffs = fam.taylor_f(3).unwrap();
    let expected = [1.0, 2.0 * c, -1.5 * c * c, 3.0 * c * c * c];
    let coeffs_ok = coeffs.iter().zip(expected).all(|(a, b)| (a - b).abs() <= 1e-15 * b.abs());
    let remainder = |r: f64| {
        let u = div(TwoFloat::from(c), TwoFloat::from(r));
        let one = TwoFloat::from(1.0);
        let f = (one + u * 4.0 + u * u).sqrt();
        f64::from(f - (one + u * 2.0 - u * u * 1.5 + u * u * u * 3.0))
    };
    let ratios: Vec<f64> = [1e3, 1e4, 1e5].iter().map(|&r| remainder(r / 2.0) / remainder(r)).collect();
    let ok = coeffs_ok && ratios.iter().all(|q| (q / 16.0 - 1.0).abs() <= 0.2);
    outcome(ok, format!("remainder ratios {ratios:.4?}"))
}

/// `E_tot(theta) - E_tot(1) = (1 - theta) [sigma R^2 (1 + theta) - k R^3 Q(theta)]`.
fn energy_gap(k: f64, r: f64, a: f64, s: f64, theta: f64) -> f64 {
    let q = a * a * (theta * theta + theta + 1.0) - 2.0 * a * (theta + 1.0) + 1.0;
    (1.0 - theta) * (s * r * r * (1.0 + theta) - k * r * r * r * q)
}

fn ac4() -> Outcome {
    let (k, a, s) = (1.0, 1.1f64, 1.0);
    let c = crossover_bracket(k, a, s, (1e-3, 1e9), 1e-6).unwrap();
    let Some(r_star) = c.r_star() else {
        return outcome(false, format!("not found in [{}, {}]", c.lo, c.hi));
    };
    let grid_min = |r: f64| {
        (0..=20_000)
            .map(|i| 1.0 / a + (1.0 - 1.0 / a) * i as f64 / 20_000.0)
            .map(|t| energy_gap(k, r, a, s, t))
            .fold(f64::INFINITY, f64::min)
    };
    let below = !dislocations_win(k, 0.5 * r_star, a, s).unwrap() && grid_min(0.5 * r_star) >= 0.0;
    let above = dislocations_win(k, 2.0 * r_star, a, s).unwrap() && grid_min(2.0 * r_star) < 0.0;
    let oracle = 2.0 * s / (k * (3.0 * a - 1.0) * (a - 1.0));
    let width = c.hi / c.lo - 1.0;
    outcome(
        below && above && width <= 1e-6 && (r_star / oracle - 1.0).abs() <= 1e-6,
        format!("R* = {r_star:.8} (threshold where theta_plus = 1: {oracle:.8}), width {width:.1e}"),
    )
}

fn ac5() -> Outcome {
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let field = |d: f64, l: f64| TransitionField::new(DoublePyramid::new(d, Shape::Pyramid).unwrap(), Matrix3::identity() * l);
    let big = energy_p(&field(2.0, 3.0), 1.5, &spec).unwrap();
    let unit = energy_p(&field(1.0, 1.0), 1.5, &spec).unwrap();
    let ratio = big / unit / (8.0 * 3f64.powf(1.5));
    let t = start.elapsed();
    outcome((ratio - 1.0).abs() <= 0.005 && within(t, 60.0), format!("ratio / 8 3^1.5 = {ratio:.10}, {t:.2?}"))
}

fn ac6() -> Outcome {
    let field = TransitionField::new(DoublePyramid::new(1.0, Shape::Pyramid).unwrap(), Matrix3::identity());
    let rep = divergence_log_rate(&field, &[1e-2, 1e-3, 1e-4], &QuadratureSpec::default()).unwrap();
    let drift = rep.drift.unwrap();
    outcome(rep.slope > 0.0 && drift <= 0.10, format!("c = {:.6}, drift {drift:.4}", rep.slope))
}

fn ac7() -> Outcome {
    let cfg = RunConfig::new(default_material(), "unused");
    let run = run_pyramid_scaling(&cfg).unwrap();
    let m = &cfg.material;
    let rep = &run.report;
    let (a, p, b) = (m.alpha, cfg.p, m.b);
    let bracket = b * ((a - 1.0).powf(p - 1.0) * 2f64.powf(p - 1.0) * rep.m_hat
        + (2f64.powf(p - 1.0) * 3f64.powf(0.5 * p) + 1.0) / 3.0 / (a - 1.0));
    let sides: Vec<f64> = rep.records.iter().map(|r| (r.r / m.delta()).round()).collect();
    let inside = rep
        .records
        .iter()
        .all(|r| r.energy > 0.0 && r.energy <= r.r * r.r * bracket && (r.bound / (r.r * r.r * bracket) - 1.0).abs() < 1e-12);
    let steps = &run.refinement;
    let last_two = (steps[steps.len() - 1].e_hat / steps[steps.len() - 2].e_hat - 1.0).abs();
    outcome(
        (rep.slope - 2.0).abs() <= 0.05 && inside && sides == [4.0, 8.0, 16.0, 32.0] && last_two <= 0.005,
        format!("slope {:.6}, E/r^2 = {:.6} <= {bracket:.6}, refinement change {last_two:.1e}", rep.slope, run.e_hat),
    )
}

fn ac8() -> Outcome {
    let a = build_array(4.0 * 10.0, 1.1, 1.0).unwrap();
    let field = ArrayField::new(a.clone()).unwrap();
    let opts = CirculationOptions::default();
    let mut worst = 0.0f64;
    for s in &a.segments {
        for (w, h, d) in [(2.5, 7.0, 1.0), (0.3, 1.0, 0.2), (4.0, 12.0, 3.0)] {
            let c = field.circulation(&rectangular_loop(s, w, h, d), &opts).unwrap();
            let jump = (a.centers[s.j] - a.centers[s.i]) * (a.alpha - 1.0);
            let expected = Vector3::new(jump.x, jump.y, 0.0);
            worst = worst.max((c - expected).norm() / expected.norm());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst_free = 0.0f64;
    for k in 0..100 {
        let i = rng.random_range(1..3) + a.per_side * rng.random_range(1..3);
        let c = a.centers[i];
        let (ox, oy) = (c.x + rng.random_range(-3.0..3.0), c.y + rng.random_range(-3.0..3.0));
        let w = rng.random_range(0.2..1.5);
        let h = rng.random_range(0.3..8.0);
        let lp = if k % 2 == 0 {
            vec![
                Point3::new(ox - w, oy, -0.5),
                Point3::new(ox - w, oy, h),
                Point3::new(ox + w, oy, h),
                Point3::new(ox + w, oy, -0.5),
            ]
        } else {
            let z = rng.random_range(0.05..8.0);
            vec![
                Point3::new(ox - w, oy - w, z),
                Point3::new(ox + 3.0 * w, oy - w, z),
                Point3::new(ox + 3.0 * w, oy + 2.0 * w, z),
                Point3::new(ox - w, oy + 2.0 * w, z),
            ]
        };
        worst_free = worst_free.max(field.circulation(&lp, &opts).unwrap().norm());
    }
    outcome(
        worst <= 0.01 && worst_free <= 1e-6 * a.b,
        format!(
            "{} segments: max rel error {worst:.2e}; segment-free loops: max |circulation| {worst_free:.2e}",
            a.segments.len()
        ),
    )
}

fn ac9() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig::new(default_material(), "unused");
    let run = run_corrector(&cfg).unwrap();
    let c: Vec<f64> = run.levels.iter().map(|l| l.c_el).collect();
    let (order, limit) = run.richardson.unwrap();
    let t = start.elapsed();
    let ok = c.iter().all(|&v| v > 0.0) && c.windows(2).all(|w| w[1] <= w[0]) && (order - 2.0).abs() <= 0.5;
    outcome(
        ok && within(t, 300.0),
        format!("C_el(4, 8, 16) = {c:.6?}, order {order:.3}, limit {limit:.6}, {t:.2?}"),
    )
}

fn ac10() -> Outcome {
    let m = default_material();
    let mesh = HexMesh::unit_box(8, m.h).unwrap().with_grading(2.0).unwrap();
    let w = SvkDensity::new(m.mu, m.lambda, m.alpha).unwrap();
    let c = solve_corrector(&mesh, &w.linearized(), &SolverOptions::default()).unwrap().c_el;
    let s = 1e-3;
    let sol = nonlinear_energy(&mesh, 1.0 / (m.alpha + s), m.alpha, &w, &NewtonOptions::default()).unwrap();
    let ratio = sol.energy / (s * s) / c;
    outcome((ratio - 1.0).abs() <= 0.05, format!("E / (theta^-1 - alpha)^2 / C_el = {ratio:.6}"))
}

fn ac11() -> Outcome {
    let mesh = HexMesh::unit_box(4, 1.0).unwrap().with_grading(2.0).unwrap();
    let (alpha, theta) = (1.05, 1.0);
    let w = SvkDensity::new(1.0, 0.5, alpha).unwrap();
    let opts = NewtonOptions::default();
    let rep = cubic_scaling_check(&mesh, theta, alpha, &w, &[1.0, 2.0, 4.0], &opts).unwrap();
    let algebraic = rep.records.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    let resolved = resolve_scaled(&mesh, theta, alpha, &w, 2.0, &opts).unwrap();
    let resolve_gap = (resolved.energy / rep.records[1].predicted - 1.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut plastic_gap = 0.0f64;
    for _ in 0..1000 {
        let th = rng.random_range(0.5..1.0);
        let r = log_uniform(&mut rng, 1e-2, 1e6);
        let s = log_uniform(&mut rng, 1e-3, 1e3);
        let one = plastic_energy(th, r, s).unwrap();
        let two = s * area_gap(th * r, th).unwrap();
        plastic_gap = plastic_gap.max((one - two).abs() / one);
    }
    outcome(
        algebraic <= 1e-10 && resolve_gap <= 1e-8 && plastic_gap <= 1e-12,
        format!("algebraic {algebraic:.1e}, re-solve {resolve_gap:.1e}, plastic forms {plastic_gap:.1e}"),
    )
}

type Check = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let checks: [Check; 11] = [
        ("AC1", "closed-form optimality", ac1),
        ("AC2", "asymptotic split", ac2),
        ("AC3", "Taylor coefficients", ac3),
        ("AC4", "crossover existence", ac4),
        ("AC5", "pyramid scaling identity", ac5),
        ("AC6", "log divergence", ac6),
        ("AC7", "quadratic interface law", ac7),
        ("AC8", "Burgers circulation", ac8),
        ("AC9", "corrector positivity and convergence", ac9),
        ("AC10", "linearization limit", ac10),
        ("AC11", "scaling identities", ac11),
    ];
    let mut failed = 0;
    for (id, name, check) in checks {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!("[{}] {id} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
