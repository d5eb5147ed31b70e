//! Trilinear elements, row-wise assembly and the linear corrector problem.

use super::mesh::{HexMesh, LOCAL};
use super::sparse::{pcg, CsrMatrix, SolverOptions};
use super::tensor::{ElasticTensor, Tensor4};
use crate::quadrature::UnitRule;
use crate::Result;
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rayon::prelude::*;
use std::collections::HashMap;
use std::io::Write;

pub type ElementMatrix = SMatrix<f64, 24, 24>;
pub type ElementVector = SVector<f64, 24>;

/// Shape-function gradients and weights at the 2x2x2 Gauss points of a cell.
#[derive(Debug, Clone)]
pub(crate) struct ElementRule {
    /// `grads[gp][a]` is `∇N_a` at Gauss point `gp`.
    pub grads: [[Vector3<f64>; 8]; 8],
    /// Gauss weight times Jacobian.
    pub weights: [f64; 8],
}

impl ElementRule {
    pub fn new(h: [f64; 3]) -> Self {
        let volume = h[0] * h[1] * h[2];
        let rule = UnitRule::new(2);
        let mut grads = [[Vector3::zeros(); 8]; 8];
        let mut weights = [0.0; 8];
        for (gp, o) in LOCAL.iter().enumerate() {
            let s = [rule.nodes[o[0]], rule.nodes[o[1]], rule.nodes[o[2]]];
            weights[gp] = rule.weights[o[0]] * rule.weights[o[1]] * rule.weights[o[2]] * volume;
            for (a, n) in LOCAL.iter().enumerate() {
                let f = |k: usize| if n[k] == 1 { s[k] } else { 1.0 - s[k] };
                let df = |k: usize| if n[k] == 1 { 1.0 } else { -1.0 };
                grads[gp][a] = Vector3::new(
                    df(0) * f(1) * f(2) / h[0],
                    f(0) * df(1) * f(2) / h[1],
                    f(0) * f(1) * df(2) / h[2],
                );
            }
        }
        Self { grads, weights }
    }

    /// `Σ_a u_a ⊗ ∇N_a` at one Gauss point.
    pub fn gradient(&self, gp: usize, u: &ElementVector) -> Matrix3<f64> {
        let mut g = Matrix3::zeros();
        for a in 0..8 {
            let ua = Vector3::new(u[3 * a], u[3 * a + 1], u[3 * a + 2]);
            g += ua * self.grads[gp][a].transpose();
        }
        g
    }

    /// `K[(a,i),(b,k)] += w ∂_j N_a C_ijkl ∂_l N_b` at one Gauss point.
    pub fn add_stiffness(&self, gp: usize, c: &Tensor4, k: &mut ElementMatrix) {
        let w = self.weights[gp];
        let g = &self.grads[gp];
        for a in 0..8 {
            for b in 0..8 {
                for i in 0..3 {
                    for kk in 0..3 {
                        let mut s = 0.0;
                        for j in 0..3 {
                            for l in 0..3 {
                                s += g[a][j] * c[i][j][kk][l] * g[b][l];
                            }
                        }
                        k[(3 * a + i, 3 * b + kk)] += w * s;
                    }
                }
            }
        }
    }
}

pub(crate) fn element_stiffness(rule: &ElementRule, tensor: &ElasticTensor) -> ElementMatrix {
    let c = tensor.to_array();
    let mut k = ElementMatrix::zeros();
    for gp in 0..8 {
        rule.add_stiffness(gp, &c, &mut k);
    }
    // exact symmetry regardless of the summation order
    (k + k.transpose()) * 0.5
}

pub(crate) fn element_values(mesh: &HexMesh, cell: usize, u: &[Vector3<f64>]) -> ElementVector {
    let mut out = ElementVector::zeros();
    for (a, &node) in mesh.cell_nodes(cell).iter().enumerate() {
        for i in 0..3 {
            out[3 * a + i] = u[node][i];
        }
    }
    out
}

/// Constant-coefficient element matrices, one per distinct cell shape.
#[derive(Debug, Clone)]
pub(crate) struct ElementTable {
    index: Vec<usize>,
    mats: Vec<ElementMatrix>,
}

impl ElementTable {
    pub fn new(mesh: &HexMesh, tensor: &ElasticTensor) -> Self {
        let mut keys: HashMap<[u64; 3], usize> = HashMap::new();
        let mut sizes = Vec::new();
        let index = (0..mesh.cell_count())
            .map(|cell| {
                let h = mesh.cell_size(cell);
                *keys.entry(h.map(f64::to_bits)).or_insert_with(|| {
                    sizes.push(h);
                    sizes.len() - 1
                })
            })
            .collect();
        let mats = sizes
            .par_iter()
            .map(|&h| element_stiffness(&ElementRule::new(h), tensor))
            .collect();
        Self { index, mats }
    }

    pub fn get(&self, cell: usize) -> &ElementMatrix {
        &self.mats[self.index[cell]]
    }
}

/// Stiffness restricted to the free degrees of freedom, assembled row by row:
/// each free node sums the blocks of its cells in a fixed order.
pub(crate) fn assemble_free<M>(mesh: &HexMesh, element: M) -> CsrMatrix
where
    M: Fn(usize) -> ElementMatrix + Sync,
{
    let nb = mesh.dirichlet_count();
    let rows: Vec<Vec<(usize, f64)>> = (nb..mesh.node_count())
        .into_par_iter()
        .flat_map_iter(|p| {
            let pc = mesh.node_coords(p);
            let mut blocks: [Option<Matrix3<f64>>; 27] = [None; 27];
            let mut cols = [0usize; 27];
            for (cell, a) in mesh.node_cells(p) {
                let k = element(cell);
                for (b, &q) in mesh.cell_nodes(cell).iter().enumerate() {
                    if mesh.is_dirichlet(q) {
                        continue;
                    }
                    let qc = mesh.node_coords(q);
                    let slot = (qc[0] + 1 - pc[0]) + 3 * (qc[1] + 1 - pc[1]) + 9 * (qc[2] + 1 - pc[2]);
                    cols[slot] = q;
                    let block = blocks[slot].get_or_insert_with(Matrix3::zeros);
                    *block += k.fixed_view::<3, 3>(3 * a, 3 * b);
                }
            }
            (0..3).map(move |i| {
                let mut row = Vec::with_capacity(81);
                for slot in 0..27 {
                    if let Some(block) = &blocks[slot] {
                        for kk in 0..3 {
                            row.push((3 * (cols[slot] - nb) + kk, block[(i, kk)]));
                        }
                    }
                }
                row
            })
        })
        .collect();
    CsrMatrix::from_rows(rows)
}

/// Free-node part of `Σ_e v_e`, summed per node in a fixed order.
pub(crate) fn gather_free<V>(mesh: &HexMesh, element: V) -> Vec<f64>
where
    V: Fn(usize) -> ElementVector + Sync,
{
    let nb = mesh.dirichlet_count();
    (nb..mesh.node_count())
        .into_par_iter()
        .flat_map_iter(|p| {
            let mut acc = Vector3::zeros();
            for (cell, a) in mesh.node_cells(p) {
                let v = element(cell);
                acc += Vector3::new(v[3 * a], v[3 * a + 1], v[3 * a + 2]);
            }
            [acc.x, acc.y, acc.z]
        })
        .collect()
}

/// Deterministic parallel sum of a per-cell quantity.
pub(crate) fn sum_cells<F>(mesh: &HexMesh, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let parts: Vec<f64> = (0..mesh.cell_count()).into_par_iter().map(&f).collect();
    parts.iter().sum()
}

/// The discrete corrector problem: minimize `½ ∫ A[e(u), e(u)]` over
/// trilinear `u` with `u = x` on the bottom face.
#[derive(Debug, Clone)]
pub struct CorrectorProblem {
    pub mesh: HexMesh,
    pub tensor: ElasticTensor,
    elements: ElementTable,
    /// Stiffness on the free degrees of freedom.
    pub matrix: CsrMatrix,
    /// Load from eliminating the boundary values.
    pub rhs: Vec<f64>,
}

impl CorrectorProblem {
    pub fn assemble(mesh: &HexMesh, tensor: &ElasticTensor) -> Result<Self> {
        // re-validate in case the tensor was built directly from the enum
        match tensor {
            ElasticTensor::Isotropic { mu, lambda } => {
                ElasticTensor::isotropic(*mu, *lambda)?;
            }
            ElasticTensor::Full(c) => {
                ElasticTensor::full(**c)?;
            }
        }
        let elements = ElementTable::new(mesh, tensor);
        let matrix = assemble_free(mesh, |cell| *elements.get(cell));
        let boundary = boundary_values(mesh);
        let rhs = gather_free(mesh, |cell| {
            let u = element_values(mesh, cell, &boundary);
            -(elements.get(cell) * u)
        });
        Ok(Self {
            mesh: mesh.clone(),
            tensor: tensor.clone(),
            elements,
            matrix,
            rhs,
        })
    }

    /// Full nodal field from free values, with `u = x` on the bottom.
    pub fn expand(&self, free: &[f64]) -> Vec<Vector3<f64>> {
        let nb = self.mesh.dirichlet_count();
        (0..self.mesh.node_count())
            .map(|id| {
                if id < nb {
                    self.mesh.node_position(id).coords
                } else {
                    let k = 3 * (id - nb);
                    Vector3::new(free[k], free[k + 1], free[k + 2])
                }
            })
            .collect()
    }

    pub fn restrict(&self, full: &[Vector3<f64>]) -> Vec<f64> {
        full[self.mesh.dirichlet_count()..]
            .iter()
            .flat_map(|v| [v.x, v.y, v.z])
            .collect()
    }

    /// `½ ∫ A[e(u), e(u)]` for a full nodal field.
    pub fn energy(&self, u: &[Vector3<f64>]) -> f64 {
        0.5 * self.bilinear(u, u)
    }

    /// `∫ A[e(u), e(v)]`.
    pub fn bilinear(&self, u: &[Vector3<f64>], v: &[Vector3<f64>]) -> f64 {
        sum_cells(&self.mesh, |cell| {
            let ue = element_values(&self.mesh, cell, u);
            let ve = element_values(&self.mesh, cell, v);
            ue.dot(&(self.elements.get(cell) * ve))
        })
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<CorrectorSolution> {
        let out = pcg(&self.matrix, &self.rhs, opts)?;
        let displacement = self.expand(&out.x);
        let c_el = self.energy(&displacement);
        Ok(CorrectorSolution {
            mesh: self.mesh.clone(),
            displacement,
            c_el,
            residual: out.residual,
            iterations: out.iterations,
        })
    }
}

fn boundary_values(mesh: &HexMesh) -> Vec<Vector3<f64>> {
    (0..mesh.node_count())
        .map(|id| {
            if mesh.is_dirichlet(id) {
                mesh.node_position(id).coords
            } else {
                Vector3::zeros()
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CorrectorSolution {
    pub mesh: HexMesh,
    /// Nodal displacement, in node order.
    pub displacement: Vec<Vector3<f64>>,
    /// Discrete corrector constant.
    pub c_el: f64,
    /// Final CG residual relative to the initial one.
    pub residual: f64,
    pub iterations: usize,
}

impl CorrectorSolution {
    /// Writes `id,x,y,z,u1,u2,u3` rows.
    pub fn write_node_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "id,x,y,z,u1,u2,u3")?;
        for (id, u) in self.displacement.iter().enumerate() {
            let p = self.mesh.node_position(id);
            writeln!(
                out,
                "{id},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.x, p.y, p.z, u.x, u.y, u.z
            )?;
        }
        Ok(())
    }
}

/// Solves the corrector problem on `mesh`.
pub fn solve_corrector(mesh: &HexMesh, tensor: &ElasticTensor, opts: &SolverOptions) -> Result<CorrectorSolution> {
    CorrectorProblem::assemble(mesh, tensor)?.solve(opts)
}

/// Observed order and extrapolated limit from three values on meshes refined
/// by a factor two each time.
pub fn richardson(coarse: f64, mid: f64, fine: f64) -> (f64, f64) {
    let ratio = (coarse - mid) / (mid - fine);
    let order = ratio.log2();
    let limit = fine - (mid - fine) / (ratio - 1.0);
    (order, limit)
}
