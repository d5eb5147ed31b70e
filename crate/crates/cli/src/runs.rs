//! The individual stages of the pipeline.

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use log::{info, warn};
use misfit_core::corrector::{
    richardson, solve_corrector, CorrectorSolution, ElasticTensor, HexMesh, SolverOptions, SvkDensity,
};
use misfit_core::material::MaterialParams;
use misfit_core::pyramid::{
    build_array, divergence_log_rate, quadratic_upper_bound, rectangular_loop, ArrayField, CirculationOptions,
    DivergenceReport, DoublePyramid, EnvelopeDensity, QuadratureSpec, Shape, TransitionField, UpperBoundReport,
};
use misfit_core::search::log_bisect;
use misfit_core::stats::loglog_slope;
use misfit_core::theta::{PolynomialFamily, GOLDEN_MAX_ITER, GOLDEN_TOL};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use twofloat::TwoFloat;

/// Largest admissible gap between the closed-form minimizer and golden section.
pub const THETA_AGREEMENT: f64 = 1e-8;
pub const CROSSOVER_REL_WIDTH: f64 = 1e-6;
pub const DIVERGENCE_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Side lengths of the pyramid array in units of the cell size.
pub const ARRAY_SIDES: [f64; 4] = [4.0, 8.0, 16.0, 32.0];
/// Quadrature levels for the refinement study of the cell energy.
pub const REFINEMENT_LEVELS: [usize; 4] = [2, 4, 6, 8];
const CIRCULATION_SAMPLES: usize = 8;

// ---------------------------------------------------------------- corrector

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorLevel {
    pub n: usize,
    pub cells: [usize; 3],
    pub free_dofs: usize,
    pub c_el: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct CorrectorRun {
    pub levels: Vec<CorrectorLevel>,
    pub finest: CorrectorSolution,
    /// Observed order and extrapolated limit, when three levels were solved.
    pub richardson: Option<(f64, f64)>,
    /// `(h, C_el)` on the middle mesh for box heights `h/2`, `h` and `2h`.
    pub height_sensitivity: Vec<(f64, f64)>,
}

impl CorrectorRun {
    /// The finest-mesh constant, used as `k` downstream.
    pub fn c_el_estimate(&self) -> f64 {
        self.finest.c_el
    }

    /// Largest relative deviation of the height study from the configured height.
    pub fn height_spread(&self) -> Option<f64> {
        let h = self.height_sensitivity.get(1)?.1;
        self.height_sensitivity.iter().map(|&(_, c)| ((c - h) / h).abs()).reduce(f64::max)
    }
}

/// Linearization of the Saint Venant-Kirchhoff density at `alpha I`.
pub fn corrector_tensor(m: &MaterialParams) -> Result<ElasticTensor> {
    Ok(SvkDensity::new(m.mu, m.lambda, m.alpha)?.linearized())
}

pub fn corrector_mesh(cfg: &RunConfig, n: usize) -> Result<HexMesh> {
    box_mesh(cfg, n, cfg.material.h)
}

fn box_mesh(cfg: &RunConfig, n: usize, h: f64) -> Result<HexMesh> {
    Ok(HexMesh::unit_box(n, h)?.with_grading(cfg.grading)?)
}

fn solve_level(cfg: &RunConfig, tensor: &ElasticTensor, n: usize) -> Result<(CorrectorLevel, CorrectorSolution)> {
    let mesh = corrector_mesh(cfg, n)?;
    info!("corrector: n = {n}, cells {:?}, {} unknowns", mesh.cells, mesh.free_dofs());
    let sol = solve_corrector(&mesh, tensor, &SolverOptions::default())?;
    info!("corrector: n = {n}, C_el = {:.10e} after {} iterations", sol.c_el, sol.iterations);
    let level = CorrectorLevel {
        n,
        cells: mesh.cells,
        free_dofs: mesh.free_dofs(),
        c_el: sol.c_el,
        iterations: sol.iterations,
        residual: sol.residual,
    };
    Ok((level, sol))
}

/// Solves on `mesh/4`, `mesh/2` and `mesh`, then repeats `mesh/2` with the box
/// height halved and doubled.
pub fn run_corrector(cfg: &RunConfig) -> Result<CorrectorRun> {
    let tensor = corrector_tensor(&cfg.material)?;
    let mut levels = Vec::new();
    let mut finest = None;
    for n in [cfg.mesh / 4, cfg.mesh / 2, cfg.mesh] {
        let (level, sol) = solve_level(cfg, &tensor, n)?;
        levels.push(level);
        finest = Some(sol);
    }
    if levels.windows(2).any(|w| w[1].c_el > w[0].c_el) {
        warn!("corrector constants are not monotone under refinement");
    }
    let richardson = Some(richardson(levels[0].c_el, levels[1].c_el, levels[2].c_el));
    let h = cfg.material.h;
    let mut height_sensitivity = Vec::new();
    for hh in [0.5 * h, h, 2.0 * h] {
        let c_el = if hh == h {
            levels[1].c_el
        } else {
            let mesh = box_mesh(cfg, cfg.mesh / 2, hh)?;
            let c = solve_corrector(&mesh, &tensor, &SolverOptions::default())?.c_el;
            info!("corrector: height {hh}, C_el = {c:.10e}");
            c
        };
        height_sensitivity.push((hh, c_el));
    }
    Ok(CorrectorRun {
        levels,
        finest: finest.expect("three levels solved"),
        richardson,
        height_sensitivity,
    })
}

/// Solves on the finest mesh only.
pub fn run_corrector_finest(cfg: &RunConfig) -> Result<CorrectorRun> {
    let tensor = corrector_tensor(&cfg.material)?;
    let (level, finest) = solve_level(cfg, &tensor, cfg.mesh)?;
    Ok(CorrectorRun {
        levels: vec![level],
        finest,
        richardson: None,
        height_sensitivity: Vec::new(),
    })
}

// ---------------------------------------------------------------- sweep

/// One point of the `R` sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentRecord {
    pub big_r: f64,
    pub theta_star: f64,
    pub e_el: f64,
    pub e_pl: f64,
    pub e_tot: f64,
    pub e_el_asym: f64,
    pub e_pl_asym: f64,
    pub rel_err_el: f64,
    pub rel_err_pl: f64,
    /// Set when the optimal `theta` beats the coherent state `theta = 1`.
    pub crossover_flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub k: f64,
    pub records: Vec<ExperimentRecord>,
    /// Log-log slope of `E_el` against `R`.
    pub el_slope: f64,
    /// `E_pl / R^2` at the largest `R`.
    pub pl_limit: f64,
    /// Whether `R rel_err_el` and `R rel_err_pl` are smaller at the end of
    /// the sweep than at its start.
    pub errors_shrink: bool,
}

fn with_r(r: f64, e: misfit_core::Error) -> CliError {
    use misfit_core::Error as E;
    match e {
        E::InvalidParameter(m) => CliError::Core(E::InvalidParameter(format!("R = {r}: {m}"))),
        E::Domain(m) => CliError::Core(E::Domain(format!("R = {r}: {m}"))),
        other => CliError::Core(other),
    }
}

fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    // one correction step; the plain quotient is only good to double precision
    let q = a / b;
    q + (a - q * b) / b.hi()
}

/// Relative deviations of the energies at `theta_plus` from their leading-order
/// laws, in double-double.
///
/// Both deviations are `O(1/R)` in absolute terms against energies of order
/// `R` and `R^2`, so in double precision they drown in rounding beyond
/// `R ~ 1e5`. Uses `alpha theta_plus - 1 = u (5 + u + f) / (3 (1 + f))`.
pub fn asymptotic_errors(k: f64, big_r: f64, alpha: f64, sigma: f64) -> (f64, f64) {
    let t = TwoFloat::from;
    let (a, k, r, s) = (t(alpha), t(k), t(big_r), t(sigma));
    let one = t(1.0);
    let u = dd_div(s, a * k * r);
    let f = (one + u * 4.0 + u * u).sqrt();
    let g = dd_div(u * (t(5.0) + u + f), (one + f) * 3.0);
    let el = dd_div(k * r * r * r * (one + g) * g * g, a);
    let el_asym = dd_div(s * s * r, a * a * a * k);
    let pl_asym = s * r * r * (one - dd_div(one, a * a)) - el_asym * 2.0;
    // E_pl - E_pl_asym = 2 E_el_asym - sigma R^2 (2g + g^2) / alpha^2
    let pl_dev = el_asym * 2.0 - dd_div(s * r * r * (g * 2.0 + g * g), a * a);
    (
        (f64::from(el - el_asym) / f64::from(el_asym)).abs(),
        (f64::from(pl_dev) / f64::from(pl_asym)).abs(),
    )
}

/// Optimizes `theta` at one `R` and cross-checks the minimizer by golden section.
pub fn sweep_record(k: f64, big_r: f64, alpha: f64, sigma: f64) -> Result<ExperimentRecord> {
    let fam = PolynomialFamily::new(k, big_r, alpha, sigma).map_err(|e| with_r(big_r, e))?;
    let sol = fam.minimize();
    let golden = fam.golden_section_theta(GOLDEN_TOL, GOLDEN_MAX_ITER);
    let agrees = if sol.endpoint {
        // golden section may stop in a local minimum; ours must be no worse
        fam.energy_difference(sol.theta_star, golden.x) <= 0.0
    } else {
        (sol.theta_star - golden.x).abs() <= THETA_AGREEMENT
    };
    if !agrees {
        return Err(CliError::Consistency(format!(
            "R = {big_r}: closed-form theta {} and golden section {} disagree",
            sol.theta_star, golden.x
        )));
    }
    let (e_el_asym, e_pl_asym) = fam.asymptotic_energies();
    let (rel_err_el, rel_err_pl) = if sol.endpoint {
        (
            ((sol.p_el - e_el_asym) / e_el_asym).abs(),
            ((sol.p_pl - e_pl_asym) / e_pl_asym).abs(),
        )
    } else {
        asymptotic_errors(k, big_r, alpha, sigma)
    };
    Ok(ExperimentRecord {
        big_r,
        theta_star: sol.theta_star,
        e_el: sol.p_el,
        e_pl: sol.p_pl,
        e_tot: sol.p_tot,
        e_el_asym,
        e_pl_asym,
        rel_err_el,
        rel_err_pl,
        crossover_flag: fam.energy_difference(sol.theta_star, 1.0) < 0.0,
    })
}

/// Sweeps `R` with the bulk constant frozen to `k`.
pub fn run_theta_sweep(cfg: &RunConfig, k: f64) -> Result<SweepReport> {
    let (alpha, sigma) = (cfg.material.alpha, cfg.material.sigma);
    let records = cfg
        .sweep
        .radii()
        .par_iter()
        .map(|&r| sweep_record(k, r, alpha, sigma))
        .collect::<Result<Vec<_>>>()?;
    let rs: Vec<f64> = records.iter().map(|r| r.big_r).collect();
    let els: Vec<f64> = records.iter().map(|r| r.e_el).collect();
    let (first, last) = (records[0], records[records.len() - 1]);
    let scaled = |rec: &ExperimentRecord| (rec.big_r * rec.rel_err_el, rec.big_r * rec.rel_err_pl);
    let (el0, pl0) = scaled(&first);
    let (el1, pl1) = scaled(&last);
    let errors_shrink = el1 < el0 && pl1 < pl0;
    if !errors_shrink {
        warn!("scaled asymptotic errors do not shrink along the sweep");
    }
    Ok(SweepReport {
        k,
        el_slope: loglog_slope(&rs, &els),
        pl_limit: last.e_pl / (last.big_r * last.big_r),
        records,
        errors_shrink,
    })
}

// ---------------------------------------------------------------- crossover

/// Final bracket of the threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    pub lo: f64,
    pub hi: f64,
    pub found: bool,
}

impl Crossover {
    /// Geometric midpoint of the bracket.
    pub fn r_star(&self) -> Option<f64> {
        self.found.then(|| (self.lo * self.hi).sqrt())
    }
}

/// Whether `min_theta E_tot < E_tot(1)` at `R`.
pub fn dislocations_win(k: f64, big_r: f64, alpha: f64, sigma: f64) -> Result<bool> {
    let fam = PolynomialFamily::new(k, big_r, alpha, sigma).map_err(|e| with_r(big_r, e))?;
    Ok(fam.energy_difference(fam.minimize().theta_star, 1.0) < 0.0)
}

/// Bisection in `log R` for the sign change of `E_tot(theta_star) - E_tot(1)`.
pub fn crossover_bracket(k: f64, alpha: f64, sigma: f64, range: (f64, f64), rel_width: f64) -> Result<Crossover> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Validation(format!("crossover range [{lo}, {hi}] is empty")));
    }
    if dislocations_win(k, lo, alpha, sigma)? || !dislocations_win(k, hi, alpha, sigma)? {
        info!("crossover: no sign change in [{lo:e}, {hi:e}]");
        return Ok(Crossover { lo, hi, found: false });
    }
    let mut failure = None;
    let (a, b) = log_bisect(lo, hi, rel_width, |r| match dislocations_win(k, r, alpha, sigma) {
        Ok(win) => win,
        Err(e) => {
            failure.get_or_insert(e);
            true
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Crossover { lo: a, hi: b, found: true })
}

pub fn find_crossover(cfg: &RunConfig, k: f64) -> Result<Crossover> {
    crossover_bracket(k, cfg.material.alpha, cfg.material.sigma, cfg.crossover_range, CROSSOVER_REL_WIDTH)
}

// ---------------------------------------------------------------- pyramid

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementStep {
    pub levels: usize,
    pub points: usize,
    pub cell_energy: f64,
    /// `energy / r^2` at the largest side.
    pub e_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirculationSample {
    pub segment: usize,
    pub expected: Vector3<f64>,
    pub measured: Vector3<f64>,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidRun {
    pub report: UpperBoundReport,
    /// Upper estimate of the interface energy density `energy / r^2`.
    pub e_hat: f64,
    /// `e_hat / (alpha^2 - 1)`.
    pub sigma_alpha_theta: f64,
    pub refinement: Vec<RefinementStep>,
    pub circulation: Vec<CirculationSample>,
}

pub fn run_pyramid_scaling(cfg: &RunConfig) -> Result<PyramidRun> {
    let m = &cfg.material;
    let delta = m.delta();
    let sides: Vec<f64> = ARRAY_SIDES.iter().map(|s| s * delta).collect();
    let w = EnvelopeDensity::new(m.alpha, cfg.p, 1.0)?;
    let spec = QuadratureSpec::default();
    let report = quadratic_upper_bound(&sides, m.alpha, m.b, &w, &spec)?;
    let last = report.records[report.records.len() - 1];
    let e_hat = last.energy / (last.r * last.r);
    info!("pyramid: slope {:.4}, E_hat = {e_hat:.6e}", report.slope);

    let r_max = sides[sides.len() - 1];
    let refinement = REFINEMENT_LEVELS
        .par_iter()
        .map(|&levels| {
            let spec = QuadratureSpec { levels, ..spec };
            let rep = quadratic_upper_bound(&[r_max], m.alpha, m.b, &w, &spec)?;
            let rec = rep.records[0];
            Ok(RefinementStep {
                levels,
                points: spec.points,
                cell_energy: rep.cell_energy,
                e_hat: rec.energy / (rec.r * rec.r),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PyramidRun {
        circulation: circulation_samples(m, cfg.seed)?,
        sigma_alpha_theta: e_hat / (m.alpha * m.alpha - 1.0),
        e_hat,
        report,
        refinement,
    })
}

/// Circulation around randomly chosen segments of an eight-by-eight array, with
/// random loop sizes.
pub fn circulation_samples(m: &MaterialParams, seed: u64) -> Result<Vec<CirculationSample>> {
    let array = build_array(8.0 * m.delta(), m.alpha, m.b)?;
    let field = ArrayField::new(array.clone())?;
    let opts = CirculationOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = array.delta;
    (0..CIRCULATION_SAMPLES)
        .map(|_| {
            let segment = rng.random_range(0..array.segments.len());
            let s = &array.segments[segment];
            let half_width = d * rng.random_range(0.05..0.45);
            let height = d * rng.random_range(0.1..1.5);
            let depth = d * rng.random_range(0.02..0.5);
            let measured = field.circulation(&rectangular_loop(s, half_width, height, depth), &opts)?;
            let jump = (array.centers[s.j] - array.centers[s.i]) * (array.alpha - 1.0);
            let expected = Vector3::new(jump.x, jump.y, 0.0);
            Ok(CirculationSample {
                segment,
                expected,
                measured,
                rel_error: (measured - expected).norm() / expected.norm(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------- divergence

/// Quadratic energy of one array cell, cut at heights `eps delta` above the
/// base rim.
pub fn run_divergence(cfg: &RunConfig) -> Result<DivergenceReport> {
    let m = &cfg.material;
    let geometry = DoublePyramid::new(m.delta(), Shape::Pyramid)?;
    let field = TransitionField::new(geometry, Matrix3::identity() * (m.alpha - 1.0));
    let report = divergence_log_rate(&field, &DIVERGENCE_EPS, &QuadratureSpec::default())?;
    info!("divergence: slope {:.6e}, drift {:?}", report.slope, report.drift);
    Ok(report)
}
