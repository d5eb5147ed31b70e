//! Nonlinear elasticity about the well `alpha SO(3)` with
//! `W(F) = V(½ (F^T F - alpha^2 I))`, `V(E) = mu |E|^2 + (lambda/2) (tr E)^2`.
//!
//! The unknown is the displacement `d = v - alpha x`, which keeps the strain
//! free of cancellation when `v` is close to `alpha x`.

use super::linear::{assemble_free, element_values, gather_free, sum_cells, ElementMatrix, ElementRule, ElementVector};
use super::mesh::HexMesh;
use super::sparse::{pcg, SolverOptions};
use super::tensor::{ElasticTensor, Tensor4};
use super::CorrectorProblem;
use crate::error::{domain, invalid, Error};
use crate::kinematics::dist_sq_to_scaled_rotations;
use crate::stats::loglog_slope;
use crate::Result;
use log::{debug, warn};
use nalgebra::{Matrix3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvkDensity {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl SvkDensity {
    pub fn new(mu: f64, lambda: f64, alpha: f64) -> Result<Self> {
        ElasticTensor::isotropic(mu, lambda)?;
        if !(alpha > 0.0) {
            return Err(domain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { mu, lambda, alpha })
    }

    /// Tensor of the quadratic expansion about `alpha I`: `alpha^2 (2 mu, lambda)`.
    pub fn linearized(&self) -> ElasticTensor {
        let a2 = self.alpha * self.alpha;
        ElasticTensor::Isotropic {
            mu: a2 * self.mu,
            lambda: a2 * self.lambda,
        }
    }

    /// Local constant `C1` in `W(F) >= C1 dist^2(F, alpha SO(3))` near the well.
    pub fn growth_constant(&self) -> f64 {
        let gamma = (2.0 * self.mu).min(2.0 * self.mu + 3.0 * self.lambda);
        0.5 * self.alpha * self.alpha * gamma
    }

    fn v(&self, e: &Matrix3<f64>) -> f64 {
        self.mu * e.norm_squared() + 0.5 * self.lambda * e.trace().powi(2)
    }

    /// `W(F)`.
    pub fn eval(&self, f: &Matrix3<f64>) -> f64 {
        let e = (f.transpose() * f - Matrix3::identity() * (self.alpha * self.alpha)) * 0.5;
        self.v(&e)
    }

    /// Green strain of `F = alpha I + G`, without forming `F^T F`.
    fn strain(&self, g: &Matrix3<f64>) -> Matrix3<f64> {
        ((g + g.transpose()) * self.alpha + g.transpose() * g) * 0.5
    }

    /// `W(alpha I + G)`.
    pub fn eval_displacement(&self, g: &Matrix3<f64>) -> f64 {
        self.v(&self.strain(g))
    }

    /// First Piola stress and material tangent at `F = alpha I + G`.
    fn stress_tangent(&self, g: &Matrix3<f64>) -> (Matrix3<f64>, Tensor4) {
        let f = Matrix3::identity() * self.alpha + g;
        let e = self.strain(g);
        let s = e * (2.0 * self.mu) + Matrix3::identity() * (self.lambda * e.trace());
        let p = f * s;
        let ff = f * f.transpose();
        let mut c = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let mut v = self.mu * f[(i, l)] * f[(k, j)] + self.lambda * f[(i, j)] * f[(k, l)];
                        if i == k {
                            v += s[(j, l)];
                        }
                        if j == l {
                            v += self.mu * ff[(i, k)];
                        }
                        c[i][j][k][l] = v;
                    }
                }
            }
        }
        (p, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop when the Newton decrement or the energy decrease falls below
    /// `tol` times the energy of the initial guess.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub linear: SolverOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            max_halvings: 30,
            linear: SolverOptions {
                tol: 1e-11,
                max_iter: None,
            },
        }
    }
}

/// Bottom data `v = rotation theta^-1 x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearProblem {
    pub theta: f64,
    pub alpha: f64,
    pub rotation: Matrix3<f64>,
}

impl NonlinearProblem {
    pub fn new(theta: f64, alpha: f64) -> Self {
        Self {
            theta,
            alpha,
            rotation: Matrix3::identity(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub energy: f64,
    pub iterations: usize,
    /// Nodal deformation `v`.
    pub deformation: Vec<Vector3<f64>>,
    /// Smallest `det ∇v` over the Gauss points.
    pub min_det: f64,
    /// Gauss points with `det ∇v <= 0`.
    pub det_violations: usize,
    /// `∫ dist^2(∇v, alpha SO(3))`.
    pub well_distance: f64,
}

struct Discrete<'a> {
    mesh: &'a HexMesh,
    w: &'a SvkDensity,
}

impl Discrete<'_> {
    fn rule(&self, cell: usize) -> ElementRule {
        ElementRule::new(self.mesh.cell_size(cell))
    }

    fn energy(&self, d: &[Vector3<f64>]) -> f64 {
        sum_cells(self.mesh, |cell| {
            let de = element_values(self.mesh, cell, d);
            let rule = self.rule(cell);
            (0..8)
                .map(|gp| rule.weights[gp] * self.w.eval_displacement(&rule.gradient(gp, &de)))
                .sum()
        })
    }

    fn residual(&self, d: &[Vector3<f64>]) -> Vec<f64> {
        gather_free(self.mesh, |cell| {
            let de = element_values(self.mesh, cell, d);
            let rule = self.rule(cell);
            let mut r = ElementVector::zeros();
            for gp in 0..8 {
                let (p, _) = self.w.stress_tangent(&rule.gradient(gp, &de));
                let wt = rule.weights[gp];
                for a in 0..8 {
                    let pa = p * rule.grads[gp][a] * wt;
                    for i in 0..3 {
                        r[3 * a + i] += pa[i];
                    }
                }
            }
            r
        })
    }

    fn tangent(&self, d: &[Vector3<f64>]) -> super::sparse::CsrMatrix {
        let mats: Vec<ElementMatrix> = {
            use rayon::prelude::*;
            (0..self.mesh.cell_count())
                .into_par_iter()
                .map(|cell| {
                    let de = element_values(self.mesh, cell, d);
                    let rule = self.rule(cell);
                    let mut k = ElementMatrix::zeros();
                    for gp in 0..8 {
                        let (_, c) = self.w.stress_tangent(&rule.gradient(gp, &de));
                        rule.add_stiffness(gp, &c, &mut k);
                    }
                    (k + k.transpose()) * 0.5
                })
                .collect()
        };
        assemble_free(self.mesh, |cell| mats[cell])
    }

    fn diagnostics(&self, d: &[Vector3<f64>]) -> (f64, usize, f64) {
        let alpha = self.w.alpha;
        let mut min_det = f64::INFINITY;
        let mut bad = 0;
        let mut dist = 0.0;
        for cell in 0..self.mesh.cell_count() {
            let de = element_values(self.mesh, cell, d);
            let rule = self.rule(cell);
            for gp in 0..8 {
                let f = Matrix3::identity() * alpha + rule.gradient(gp, &de);
                let det = f.determinant();
                min_det = min_det.min(det);
                if det <= 0.0 {
                    bad += 1;
                }
                dist += rule.weights[gp] * dist_sq_to_scaled_rotations(&f, alpha);
            }
        }
        (min_det, bad, dist)
    }
}

/// Minimizes `∫ W(∇v)` over trilinear `v` with the bottom data of `problem`,
/// starting from `alpha x + (theta^-1 - alpha) u0` (rotated) where `u0` is the
/// linear corrector for the linearized tensor.
pub fn solve_nonlinear(
    mesh: &HexMesh,
    problem: &NonlinearProblem,
    w: &SvkDensity,
    opts: &NewtonOptions,
) -> Result<NonlinearSolution> {
    let NonlinearProblem { theta, alpha, rotation } = *problem;
    let inv = 1.0 / alpha;
    if !(theta > inv - 0.05 && theta < inv + 0.05) {
        return Err(domain(format!(
            "theta = {theta} is outside the window ({:.6}, {:.6}) around 1/alpha",
            inv - 0.05,
            inv + 0.05
        )));
    }
    if (w.alpha - alpha).abs() > 1e-15 * alpha {
        return Err(invalid("density and problem use different alpha"));
    }
    if (rotation.transpose() * rotation - Matrix3::identity()).norm() > 1e-12 || rotation.determinant() <= 0.0 {
        return Err(invalid("boundary rotation is not in SO(3)"));
    }
    let s = 1.0 / theta - alpha;
    let corrector = CorrectorProblem::assemble(mesh, &w.linearized())?.solve(&opts.linear)?;
    let nb = mesh.dirichlet_count();
    let mut d: Vec<Vector3<f64>> = (0..mesh.node_count())
        .map(|id| {
            let x = mesh.node_position(id).coords;
            let guess = rotation * (corrector.displacement[id] * s) + (rotation - Matrix3::identity()) * x * alpha;
            if id < nb {
                // exact boundary values
                rotation * x / theta - x * alpha
            } else {
                guess
            }
        })
        .collect();
    let disc = Discrete {
        mesh,
        w,
    };
    let mut energy = disc.energy(&d);
    let scale = energy;
    let mut iterations = 0;
    if scale > 0.0 {
        let mut converged = false;
        while iterations < opts.max_iter {
            iterations += 1;
            let r = disc.residual(&d);
            let k = disc.tangent(&d);
            let neg: Vec<f64> = r.iter().map(|x| -x).collect();
            let step = pcg(&k, &neg, &opts.linear)
                .map_err(|e| Error::NewtonFailure(format!("linear solve failed in Newton step {iterations}: {e}")))?
                .x;
            let decrement: f64 = neg.iter().zip(&step).map(|(a, b)| a * b).sum();
            debug!("newton {iterations}: energy {energy:.6e}, decrement {decrement:.3e}");
            if decrement < 0.0 {
                return Err(Error::NewtonFailure(format!("tangent is not positive in step {iterations}")));
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_halvings {
                let trial: Vec<Vector3<f64>> = d
                    .iter()
                    .enumerate()
                    .map(|(id, v)| {
                        if id < nb {
                            *v
                        } else {
                            let k = 3 * (id - nb);
                            v + Vector3::new(step[k], step[k + 1], step[k + 2]) * t
                        }
                    })
                    .collect();
                let e = disc.energy(&trial);
                if e <= energy + 1e-15 * scale {
                    accepted = Some((trial, e));
                    break;
                }
                t *= 0.5;
            }
            let Some((trial, e)) = accepted else {
                if 0.5 * decrement <= opts.tol * scale {
                    converged = true;
                    break;
                }
                return Err(Error::NewtonFailure(format!(
                    "step halving exhausted in Newton step {iterations}"
                )));
            };
            let drop = energy - e;
            d = trial;
            energy = e;
            if 0.5 * decrement <= opts.tol * scale || drop <= opts.tol * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NewtonFailure(format!(
                "no convergence within {} Newton steps",
                opts.max_iter
            )));
        }
    }
    let (min_det, det_violations, well_distance) = disc.diagnostics(&d);
    if det_violations > 0 {
        warn!("{det_violations} Gauss points with det ∇v <= 0 (min {min_det:.3e})");
    }
    let deformation = d
        .iter()
        .enumerate()
        .map(|(id, v)| v + mesh.node_position(id).coords * alpha)
        .collect();
    Ok(NonlinearSolution {
        energy,
        iterations,
        deformation,
        min_det,
        det_violations,
        well_distance,
    })
}

/// Discrete elastic energy `E(theta)` on `mesh` with `v = theta^-1 x` on the bottom.
pub fn nonlinear_energy(
    mesh: &HexMesh,
    theta: f64,
    alpha: f64,
    w: &SvkDensity,
    opts: &NewtonOptions,
) -> Result<NonlinearSolution> {
    solve_nonlinear(mesh, &NonlinearProblem::new(theta, alpha), w, opts)
}

/// `∫ W(∇v)` for a nodal deformation on `mesh`.
pub fn deformation_energy(mesh: &HexMesh, w: &SvkDensity, v: &[Vector3<f64>]) -> Result<f64> {
    if v.len() != mesh.node_count() {
        return Err(invalid("field does not match the mesh"));
    }
    let d: Vec<Vector3<f64>> = v
        .iter()
        .enumerate()
        .map(|(id, x)| x - mesh.node_position(id).coords * w.alpha)
        .collect();
    let disc = Discrete {
        mesh,
        w,
    };
    Ok(disc.energy(&d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRecord {
    pub big_r: f64,
    /// `R theta`, the side of the deformed box.
    pub scale: f64,
    pub energy: f64,
    /// `(R theta)^3` times the unit energy.
    pub predicted: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct CubicScalingReport {
    pub base_energy: f64,
    pub records: Vec<ScalingRecord>,
    /// Log-log slope of energy against `R`.
    pub slope: f64,
}

/// Maps the unit minimizer to the box of side `R theta` by
/// `v_R(x) = R theta v(x / (R theta))` and evaluates its energy there.
pub fn cubic_scaling_check(
    mesh: &HexMesh,
    theta: f64,
    alpha: f64,
    w: &SvkDensity,
    r_list: &[f64],
    opts: &NewtonOptions,
) -> Result<CubicScalingReport> {
    if r_list.iter().any(|&r| !(r > 0.0)) {
        return Err(invalid("scales must be positive"));
    }
    let unit = nonlinear_energy(mesh, theta, alpha, w, opts)?;
    let records = r_list
        .iter()
        .map(|&big_r| {
            let scale = big_r * theta;
            let scaled = mesh.scaled(scale)?;
            let v: Vec<Vector3<f64>> = unit.deformation.iter().map(|v| v * scale).collect();
            let energy = deformation_energy(&scaled, w, &v)?;
            let predicted = scale.powi(3) * unit.energy;
            Ok(ScalingRecord {
                big_r,
                scale,
                energy,
                predicted,
                rel_error: ((energy - predicted) / predicted).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = if records.len() > 1 {
        let rs: Vec<f64> = records.iter().map(|r| r.big_r).collect();
        let es: Vec<f64> = records.iter().map(|r| r.energy).collect();
        loglog_slope(&rs, &es)
    } else {
        f64::NAN
    };
    Ok(CubicScalingReport {
        base_energy: unit.energy,
        records,
        slope,
    })
}

/// Solves directly on the box of side `R theta`.
pub fn resolve_scaled(
    mesh: &HexMesh,
    theta: f64,
    alpha: f64,
    w: &SvkDensity,
    big_r: f64,
    opts: &NewtonOptions,
) -> Result<NonlinearSolution> {
    nonlinear_energy(&mesh.scaled(big_r * theta)?, theta, alpha, w, opts)
}
