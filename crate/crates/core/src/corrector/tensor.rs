use crate::error::{domain, invalid};
use crate::Result;
use log::warn;
use nalgebra::{Matrix3, Matrix6, SymmetricEigen};

pub type Tensor4 = [[[[f64; 3]; 3]; 3]; 3];

/// Largest Poisson ratio accepted before the trilinear element locks.
pub const POISSON_CAP: f64 = 0.45;

#[derive(Debug, Clone, PartialEq)]
pub enum ElasticTensor {
    /// `A[e, e] = 2 mu |e|^2 + lambda (tr e)^2`.
    Isotropic { mu: f64, lambda: f64 },
    Full(Box<Tensor4>),
}

impl ElasticTensor {
    pub fn isotropic(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0) || !(3.0 * lambda + 2.0 * mu > 0.0) {
            return Err(domain(format!(
                "tensor is not coercive: need mu > 0 and 3 lambda + 2 mu > 0 (mu = {mu}, lambda = {lambda})"
            )));
        }
        Ok(Self::Isotropic { mu, lambda })
    }

    /// Isotropic tensor from shear modulus and Poisson ratio, with the ratio
    /// capped at [`POISSON_CAP`].
    pub fn from_poisson(mu: f64, nu: f64) -> Result<Self> {
        if !(nu > -1.0 && nu < 0.5) {
            return Err(domain(format!("Poisson ratio must lie in (-1, 1/2), got {nu}")));
        }
        let nu = if nu > POISSON_CAP {
            warn!("Poisson ratio {nu} capped at {POISSON_CAP} to avoid locking");
            POISSON_CAP
        } else {
            nu
        };
        Self::isotropic(mu, 2.0 * mu * nu / (1.0 - 2.0 * nu))
    }

    /// A general tensor; must have the major and minor symmetries and be
    /// positive definite on symmetric matrices.
    pub fn full(c: Tensor4) -> Result<Self> {
        let scale = c.iter().flatten().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let tol = 1e-12 * scale.max(1.0);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let v = c[i][j][k][l];
                        if (v - c[j][i][k][l]).abs() > tol
                            || (v - c[i][j][l][k]).abs() > tol
                            || (v - c[k][l][i][j]).abs() > tol
                        {
                            return Err(invalid("elastic tensor lacks the major or minor symmetries"));
                        }
                    }
                }
            }
        }
        let min = SymmetricEigen::new(mandel(&c)).eigenvalues.min();
        if !(min > 0.0) {
            return Err(domain(format!("tensor is not coercive: smallest Mandel eigenvalue {min}")));
        }
        Ok(Self::Full(Box::new(c)))
    }

    pub fn to_array(&self) -> Tensor4 {
        match self {
            Self::Full(c) => **c,
            Self::Isotropic { mu, lambda } => {
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                let mut c = [[[[0.0; 3]; 3]; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            for l in 0..3 {
                                c[i][j][k][l] =
                                    lambda * d(i, j) * d(k, l) + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
                            }
                        }
                    }
                }
                c
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Self::Isotropic { mu, lambda } => Self::Isotropic {
                mu: mu * s,
                lambda: lambda * s,
            },
            Self::Full(c) => {
                let mut c = **c;
                c.iter_mut().flatten().flatten().flatten().for_each(|x| *x *= s);
                Self::Full(Box::new(c))
            }
        }
    }

    /// Coercivity constant: smallest `A[e, e] / |e|^2` over symmetric `e`.
    pub fn coercivity(&self) -> f64 {
        match self {
            Self::Isotropic { mu, lambda } => (2.0 * mu).min(2.0 * mu + 3.0 * lambda),
            Self::Full(c) => SymmetricEigen::new(mandel(c)).eigenvalues.min(),
        }
    }

    /// `A[e, e]` for a (not necessarily symmetric) gradient; only the
    /// symmetric part contributes.
    pub fn quadratic(&self, g: &Matrix3<f64>) -> f64 {
        let e = (g + g.transpose()) * 0.5;
        match self {
            Self::Isotropic { mu, lambda } => 2.0 * mu * e.norm_squared() + lambda * e.trace().powi(2),
            Self::Full(c) => {
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            for l in 0..3 {
                                s += e[(i, j)] * c[i][j][k][l] * e[(k, l)];
                            }
                        }
                    }
                }
                s
            }
        }
    }
}

fn mandel(c: &Tensor4) -> Matrix6<f64> {
    const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
    let w = |p: usize| if p < 3 { 1.0 } else { std::f64::consts::SQRT_2 };
    Matrix6::from_fn(|p, q| {
        let (i, j) = PAIRS[p];
        let (k, l) = PAIRS[q];
        w(p) * w(q) * c[i][j][k][l]
    })
}
