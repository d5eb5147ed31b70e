//! Corrector problem of linearized elasticity on the box `S_1 x (0, h)` with
//! `u = x` on the bottom face and traction-free elsewhere, discretized by
//! trilinear hexahedra, plus the nonlinear problem it linearizes.

mod linear;
mod mesh;
mod nonlinear;
mod sparse;
mod tensor;

pub use linear::{richardson, solve_corrector, CorrectorProblem, CorrectorSolution};
pub use mesh::HexMesh;
pub use nonlinear::{
    cubic_scaling_check, deformation_energy, nonlinear_energy, resolve_scaled, solve_nonlinear, CubicScalingReport,
    NewtonOptions, NonlinearProblem, NonlinearSolution, ScalingRecord, SvkDensity,
};
pub use sparse::{pcg, CgOutcome, CsrMatrix, SolverOptions};
pub use tensor::{ElasticTensor, Tensor4, POISSON_CAP};
