use misfit_cli::*;
use misfit_core::theta::PolynomialFamily;
use proptest::prelude::*;
use std::fs;
use std::path::Path;
use std::process::Command;

fn config(dir: &Path) -> RunConfig {
    RunConfig::new(default_material(), dir)
}

/// Threshold where `theta_plus` reaches 1: `P_tot'(1) = 0`.
fn threshold(k: f64, alpha: f64, sigma: f64) -> f64 {
    2.0 * sigma / (k * (3.0 * alpha - 1.0) * (alpha - 1.0))
}

#[test]
fn sweep_radii_are_geometric() {
    let r = SweepSpec::default().radii();
    assert_eq!(r.len(), 37);
    assert_eq!(r[0], 1e3);
    assert_eq!(r[36], 1e6);
    for i in 0..12 {
        assert!((r[i + 12] / r[i] - 10.0).abs() < 1e-12);
    }
}

#[test]
fn sweep_follows_asymptotic_laws() {
    let mut cfg = config(Path::new("unused"));
    cfg.sweep = SweepSpec { r_min: 1e2, r_max: 1e7, points: 41 };
    let (a, s, k) = (1.1f64, 1.0, 1.0);
    let rep = run_theta_sweep(&cfg, k).unwrap();
    let recs = &rep.records;
    for w in recs.windows(2) {
        assert!(w[1].theta_star < w[0].theta_star);
        // R rel_err decays along the sweep for both parts
        assert!(w[1].big_r * w[1].rel_err_el < w[0].big_r * w[0].rel_err_el);
        assert!(w[1].big_r * w[1].rel_err_pl < w[0].big_r * w[0].rel_err_pl);
    }
    assert!(rep.errors_shrink);
    for r in recs {
        assert!(r.theta_star >= 1.0 / a && r.theta_star <= 1.0);
        assert!((r.e_tot - (r.e_el + r.e_pl)).abs() <= 1e-12 * r.e_tot);
        assert!(r.crossover_flag);
    }
    let last = recs.last().unwrap();
    assert!((last.theta_star - 1.0 / a).abs() < 1e-6);
    assert!((last.e_el / last.big_r / (s * s / (a.powi(3) * k)) - 1.0).abs() < 1e-6);
    assert!((last.e_pl / (last.big_r * last.big_r) / (s * (1.0 - 1.0 / (a * a))) - 1.0).abs() < 1e-6);
    assert!((rep.el_slope - 1.0).abs() < 1e-3);
}

#[test]
fn asymptotic_errors_match_reference() {
    // 50-digit references; double precision alone loses these beyond R ~ 1e5
    let cases = [
        ((1.0, 1.1, 1.0), 1e2, 6.0518263899749242e-5, 3.8299185121183304e-6),
        ((1.0, 1.1, 1.0), 1e4, 6.1968448619288582e-9, 3.5799761628378201e-12),
        ((1.0, 1.1, 1.0), 1e7, 6.1983456048087989e-15, 3.5776918125603633e-21),
        ((1.0, 1.1, 1.0), 1e9, 6.1983470924117205e-19, 3.5776895509473058e-27),
        ((0.49, 1.05, 2.5), 1e2, 0.0015688108619645391, 0.019253771367477929),
        ((0.49, 1.05, 2.5), 1e4, 1.7685127155883952e-7, 1.1286260727266374e-9),
        ((0.49, 1.05, 2.5), 1e7, 1.7708018205378092e-13, 1.1192925507179147e-18),
        ((0.49, 1.05, 2.5), 1e9, 1.7708040921201275e-17, 1.1192833907395879e-24),
    ];
    for ((k, a, s), r, el, pl) in cases {
        let (got_el, got_pl) = asymptotic_errors(k, r, a, s);
        assert!((got_el / el - 1.0).abs() < 1e-9, "R = {r}: {got_el} vs {el}");
        assert!((got_pl / pl - 1.0).abs() < 1e-9, "R = {r}: {got_pl} vs {pl}");
    }
}

#[test]
fn sweep_records_are_minimal_on_a_grid() {
    let (k, a, s) = (0.7, 1.1, 1.3);
    for r in [3.0, 40.0, 1e3, 1e5] {
        let rec = sweep_record(k, r, a, s).unwrap();
        let fam = PolynomialFamily::new(k, r, a, s).unwrap();
        let grid_min = (0..=100_000)
            .map(|i| 1.0 / a + (1.0 - 1.0 / a) * i as f64 / 100_000.0)
            .map(|t| k * r.powi(3) * t * (a * t - 1.0).powi(2) + s * r * r * (1.0 - t * t))
            .fold(f64::INFINITY, f64::min);
        assert!(rec.e_tot <= grid_min * (1.0 + 1e-12), "R = {r}");
        assert!((fam.p_tot(rec.theta_star) / rec.e_tot - 1.0).abs() < 1e-9);
    }
}

#[test]
fn crossover_matches_threshold() {
    let a = 1.1;
    for (k, s) in [(1.0, 1.0), (0.5, 1.0), (2.0, 1.0), (1.0, 10.0), (1.0, 100.0), (0.3, 0.02)] {
        let c = crossover_bracket(k, a, s, (1e-3, 1e9), CROSSOVER_REL_WIDTH).unwrap();
        assert!(c.found);
        assert!(c.hi / c.lo - 1.0 <= 1e-6);
        let oracle = threshold(k, a, s);
        assert!(c.lo <= oracle * (1.0 + 1e-12) && oracle <= c.hi * (1.0 + 1e-12), "{c:?} vs {oracle}");
    }
}

#[test]
fn crossover_trends() {
    let r = |k: f64, s: f64| crossover_bracket(k, 1.1, s, (1e-3, 1e9), 1e-6).unwrap().r_star().unwrap();
    let by_k: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&k| r(k, 1.0)).collect();
    assert!(by_k[0] > by_k[1] && by_k[1] > by_k[2], "{by_k:?}");
    let by_sigma: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|&s| r(1.0, s)).collect();
    assert!(by_sigma[0] < by_sigma[1] && by_sigma[1] < by_sigma[2], "{by_sigma:?}");
}

#[test]
fn crossover_not_found_reports_bounds() {
    // threshold is about 8.7 for these parameters
    for range in [(1e-3, 1.0), (100.0, 1e9)] {
        let c = crossover_bracket(1.0, 1.1, 1.0, range, 1e-6).unwrap();
        assert!(!c.found);
        assert_eq!((c.lo, c.hi), range);
        assert_eq!(c.r_star(), None);
    }
    assert!(matches!(crossover_bracket(1.0, 1.1, 1.0, (5.0, 1.0), 1e-6), Err(CliError::Validation(_))));
}

#[test]
fn threshold_orders_sweep_flags() {
    let mut cfg = config(Path::new("unused"));
    cfg.sweep = SweepSpec { r_min: 1.0, r_max: 100.0, points: 60 };
    let k = 1.3;
    let r_star = find_crossover(&cfg, k).unwrap().r_star().unwrap();
    let rep = run_theta_sweep(&cfg, k).unwrap();
    assert!(rep.records.iter().any(|r| r.crossover_flag) && rep.records.iter().any(|r| !r.crossover_flag));
    for r in &rep.records {
        assert_eq!(r.crossover_flag, r.big_r > r_star, "R = {}", r.big_r);
    }
}

#[test]
fn pyramid_run_reports_quadratic_law() {
    let cfg = config(Path::new("unused"));
    let run = run_pyramid_scaling(&cfg).unwrap();
    assert!((run.report.slope - 2.0).abs() <= 0.05);
    let a = cfg.material.alpha;
    assert!((run.sigma_alpha_theta - run.e_hat / (a * a - 1.0)).abs() < 1e-14 * run.sigma_alpha_theta);
    let steps = &run.refinement;
    assert_eq!(steps.len(), REFINEMENT_LEVELS.len());
    let n = steps.len();
    assert!((steps[n - 1].e_hat / steps[n - 2].e_hat - 1.0).abs() <= 0.005);
    assert_eq!(steps[n - 1].e_hat, run.e_hat);
    assert_eq!(run.circulation.len(), 8);
    for c in &run.circulation {
        assert!(c.rel_error <= 0.01, "{c:?}");
    }
}

#[test]
fn circulation_samples_depend_on_seed_only() {
    let m = default_material();
    let a = circulation_samples(&m, 3).unwrap();
    let b = circulation_samples(&m, 3).unwrap();
    let c = circulation_samples(&m, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.iter().map(|s| s.segment).collect::<Vec<_>>(), c.iter().map(|s| s.segment).collect::<Vec<_>>());
}

#[test]
fn divergence_run_is_logarithmic() {
    let rep = run_divergence(&config(Path::new("unused"))).unwrap();
    assert_eq!(rep.eps, DIVERGENCE_EPS.to_vec());
    assert!(rep.slope > 0.0);
    assert!(rep.drift.unwrap() <= 0.10);
}

#[test]
fn corrector_run_is_monotone() {
    let mut cfg = config(Path::new("unused"));
    cfg.mesh = 8;
    let run = run_corrector(&cfg).unwrap();
    let n: Vec<usize> = run.levels.iter().map(|l| l.n).collect();
    assert_eq!(n, [2, 4, 8]);
    for w in run.levels.windows(2) {
        assert!(w[1].c_el <= w[0].c_el);
    }
    assert_eq!(run.c_el_estimate(), run.levels[2].c_el);
    assert!(run.richardson.is_some());
    let heights: Vec<f64> = run.height_sensitivity.iter().map(|r| r.0).collect();
    assert_eq!(heights, [0.5, 1.0, 2.0]);
    assert_eq!(run.height_sensitivity[1].1, run.levels[1].c_el);
    assert!(run.height_sensitivity.iter().all(|r| r.1.is_finite() && r.1 > 0.0));
    assert!(run.height_spread().unwrap() >= 0.0);
}

#[test]
fn empty_sweep_writes_header_only() {
    let mut buf = Vec::new();
    write_sweep_csv(&[], &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), format!("{SWEEP_HEADER}\n"));
}

#[test]
fn numbers_carry_seventeen_digits() {
    let rec = sweep_record(1.0, 1e3, 1.1, 1.0).unwrap();
    let mut buf = Vec::new();
    write_sweep_csv(&[rec], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let row = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields.len(), SWEEP_HEADER.split(',').count());
    let mantissa = fields[1].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
    assert_eq!(fields[1].parse::<f64>().unwrap(), rec.theta_star);
    assert!(!text.contains('\r'));
}

fn run_all(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut cfg = config(dir);
    cfg.modes = Modes::all();
    cfg.mesh = 8;
    cfg.seed = 5;
    let out = run(&cfg).unwrap();
    emit_outputs(&out, dir).unwrap()
}

#[test]
fn outputs_are_reproducible_and_complete() {
    let one = tempfile::tempdir().unwrap();
    let two = tempfile::tempdir().unwrap();
    let a = run_all(one.path());
    let b = run_all(two.path());
    let names: Vec<_> = a.iter().map(|p| p.file_name().unwrap().to_owned()).collect();
    for want in ["sweep.csv", "corrector.csv", "pyramid.csv", "summary.txt", "diverge.csv"] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    let summary = fs::read_to_string(one.path().join("summary.txt")).unwrap();
    let keys: Vec<&str> = summary.lines().map(|l| l.split(" = ").next().unwrap()).collect();
    let mut unique = keys.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), keys.len());
    for want in ["C_el", "R_star", "E_alpha_hat", "pyramid_slope", "sweep_el_slope", "divergence_slope"] {
        assert!(keys.contains(&want), "missing {want}");
    }
    for line in summary.lines() {
        let value = line.split(" = ").nth(1).unwrap();
        assert!(value.parse::<f64>().is_ok(), "{line}");
    }
}

#[test]
fn rerun_truncates_previous_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.modes.sweep = true;
    cfg.k = Some(1.0);
    cfg.sweep.points = 10;
    emit_outputs(&run(&cfg).unwrap(), dir.path()).unwrap();
    cfg.sweep.points = 3;
    emit_outputs(&run(&cfg).unwrap(), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn sweep_without_k_solves_finest_corrector() {
    let mut cfg = config(Path::new("unused"));
    cfg.modes.sweep = true;
    cfg.mesh = 4;
    cfg.sweep.points = 3;
    let out = run(&cfg).unwrap();
    let c = out.corrector.as_ref().unwrap();
    assert_eq!(c.levels.len(), 1);
    assert_eq!(out.sweep.as_ref().unwrap().k, c.c_el_estimate());
    assert!(out.summary().lines.iter().all(|(name, _)| name != "corrector_order"));
}

#[test]
fn invalid_configs_are_rejected() {
    let base = config(Path::new("unused"));
    let mut bad = Vec::new();
    let mut c = base.clone();
    c.sweep.points = 1;
    bad.push(c);
    let mut c = base.clone();
    c.sweep.r_min = 0.0;
    bad.push(c);
    let mut c = base.clone();
    c.sweep.r_max = c.sweep.r_min;
    bad.push(c);
    let mut c = base.clone();
    c.mesh = 6;
    bad.push(c);
    let mut c = base.clone();
    c.p = 2.0;
    bad.push(c);
    let mut c = base.clone();
    c.k = Some(-1.0);
    bad.push(c);
    let mut c = base.clone();
    c.grading = 0.5;
    bad.push(c);
    for c in bad {
        let err = c.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }
    assert!(base.validate().is_ok());
}

#[test]
fn exit_codes_by_error_class() {
    let numerical = CliError::Core(misfit_core::Error::NoConvergence { iterations: 3, residual: 1.0 });
    assert_eq!(numerical.exit_code(), 3);
    assert_eq!(CliError::Consistency("x".into()).exit_code(), 3);
    assert_eq!(CliError::Core(misfit_core::Error::InvalidParameter("x".into())).exit_code(), 2);
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mat.cfg");
    fs::write(&path, "alpha = 1.05\nmu = 2\nnu = 0.3\nsigma = 0.5\nh = 0.5\n").unwrap();
    let cfg = RunConfig::from_file(&path, dir.path()).unwrap();
    assert_eq!(cfg.material.alpha, 1.05);
    assert_eq!(cfg.material.h, 0.5);
    assert_eq!(cfg.material_path.as_deref(), Some(path.as_path()));
    fs::write(&path, "alpha = 1.05\nkappa = 1\n").unwrap();
    assert_eq!(RunConfig::from_file(&path, dir.path()).unwrap_err().exit_code(), 2);
}

fn misfit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_misfit"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();
    let ok = misfit(&["sweep", "--k", "1", "--points", "5", "--out", out_s, "--threads", "2"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 6);
    assert!(String::from_utf8_lossy(&ok.stdout).contains("sweep_el_slope = "));

    assert_eq!(misfit(&["sweep", "--points", "1", "--out", out_s]).status.code(), Some(2));
    assert_eq!(misfit(&["corrector", "--mesh", "6", "--out", out_s]).status.code(), Some(2));
    assert_eq!(misfit(&["frobnicate"]).status.code(), Some(2));
    let bad_cfg = dir.path().join("bad.cfg");
    fs::write(&bad_cfg, "alpha = 0.9\nmu = 1\nnu = 0.3\n").unwrap();
    assert_eq!(misfit(&["crossover", "--config", bad_cfg.to_str().unwrap()]).status.code(), Some(2));
    // the output path is an existing file
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let io = misfit(&["crossover", "--k", "1", "--out", blocker.to_str().unwrap()]);
    assert_eq!(io.status.code(), Some(1));
}

#[test]
fn binary_crossover_not_found_is_success() {
    let dir = tempfile::tempdir().unwrap();
    let out = misfit(&["crossover", "--k", "1e-9", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.starts_with("R_star = not found in ["), "{summary}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_are_additive_and_admissible(
        k in 1e-2f64..1e2,
        r in 1e-1f64..1e7,
        a in 1.001f64..1.5,
        s in 1e-2f64..1e2,
    ) {
        let rec = sweep_record(k, r, a, s).unwrap();
        prop_assert!(rec.theta_star >= 1.0 / a && rec.theta_star <= 1.0);
        prop_assert!((rec.e_tot - (rec.e_el + rec.e_pl)).abs() <= 1e-12 * rec.e_tot);
        let t = threshold(k, a, s);
        if r > t * (1.0 + 1e-9) {
            prop_assert!(rec.crossover_flag);
        }
        if r < t * (1.0 - 1e-9) {
            prop_assert!(!rec.crossover_flag);
        }
    }
}
