//! Double-pyramid transition layer.
//!
//! Two pyramids share the base square `(-delta/2, delta/2)^2 x {0}`; the
//! inner one `C1` has height `delta/2`, the outer one `C2` height `delta`.
//! The transition field is `0` on `C1`, `A x` outside `C2`, and is filled in
//! by linear interpolation:
//!
//! * in the tip `S = C2 ∩ {delta/2 < z < delta}` along each angular section
//!   (for the square pyramid: on the four tetrahedra cut by the diagonal
//!   planes), giving `v = A x - l(x) A (0, 0, delta/2)` where `l` is the
//!   barycentric weight of the inner apex;
//! * in the layer `T = (C2 \ C1) ∩ {0 < z < delta/2}` along horizontal radial
//!   segments from `∂C1` to `∂C2`.
//!
//! Both shapes share one formula once the horizontal radius is measured with
//! the right gauge: the max-norm for the pyramid, the Euclidean norm for the
//! cone. The layer has thickness `z/2`, so `|∇v| ~ 1/z` near the base rim.

mod array;
mod energy;

pub use array::{
    build_array, quadratic_upper_bound, rectangular_loop, ArrayField, CirculationOptions,
    DislocationArray, DislocationSegment, EnvelopeDensity, UpperBoundRecord, UpperBoundReport,
};
pub use energy::{
    divergence_log_rate, energy_functional, energy_p, layer_energy_above, layer_gradient_bound,
    DivergenceReport, QuadratureSpec,
};

use crate::error::invalid;
use crate::Result;
use nalgebra::{Matrix3, Point3, Vector3};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Square base; tiles the interface.
    Pyramid,
    /// Disk base of diameter `delta`.
    Cone,
}

/// Pieces of the closed upper half-space, in classification precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `C1`, where the field vanishes.
    Inner,
    /// `S`, the tip of `C2` above `delta/2`.
    Tip,
    /// `T`, between the pyramids below `delta/2`.
    Layer,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublePyramid {
    delta: f64,
    shape: Shape,
}

impl DoublePyramid {
    pub fn new(delta: f64, shape: Shape) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(invalid(format!("delta must be positive, got {delta}")));
        }
        Ok(Self { delta, shape })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Horizontal radius and its gradient in the `(x, y)` plane.
    ///
    /// On the axis, and on the diagonals of the max-norm, the gradient is one
    /// of the one-sided values; these sets have measure zero.
    pub(crate) fn gauge(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        match self.shape {
            Shape::Pyramid => {
                if x.abs() >= y.abs() {
                    (x.abs(), [sign(x), 0.0])
                } else {
                    (y.abs(), [0.0, sign(y)])
                }
            }
            Shape::Cone => {
                let rho = x.hypot(y);
                if rho > 0.0 {
                    (rho, [x / rho, y / rho])
                } else {
                    (0.0, [1.0, 0.0])
                }
            }
        }
    }

    /// Region of a point with `z >= 0`; boundaries go to the first region in
    /// the order `Inner`, `Tip`, `Layer`, `Exterior`.
    pub fn classify(&self, p: &Point3<f64>) -> Region {
        let d = self.delta;
        let (t, _) = self.gauge(p.x, p.y);
        let z = p.z;
        if z >= 0.0 && z <= 0.5 * d && t <= 0.5 * d - z {
            Region::Inner
        } else if z >= 0.5 * d && z <= d && t <= 0.5 * (d - z) {
            Region::Tip
        } else if z >= 0.0 && z <= 0.5 * d && t <= 0.5 * d - 0.5 * z {
            Region::Layer
        } else {
            Region::Exterior
        }
    }

    pub fn inner_volume(&self) -> f64 {
        self.outer_volume() / 2.0
    }

    pub fn outer_volume(&self) -> f64 {
        let d3 = self.delta.powi(3);
        match self.shape {
            Shape::Pyramid => d3 / 3.0,
            Shape::Cone => std::f64::consts::PI * d3 / 12.0,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// The piecewise transition deformation with far-field gradient `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionField {
    geometry: DoublePyramid,
    a: Matrix3<f64>,
}

impl TransitionField {
    pub fn new(geometry: DoublePyramid, a: Matrix3<f64>) -> Self {
        Self { geometry, a }
    }

    pub fn geometry(&self) -> &DoublePyramid {
        &self.geometry
    }

    pub fn far_field(&self) -> &Matrix3<f64> {
        &self.a
    }

    /// Value and analytic gradient at a point of the closed upper half-space.
    pub fn eval(&self, p: &Point3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let region = self.geometry.classify(p);
        self.eval_in(region, p)
    }

    pub(crate) fn eval_in(&self, region: Region, p: &Point3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let d = self.geometry.delta;
        let a = &self.a;
        match region {
            Region::Inner => (Vector3::zeros(), Matrix3::zeros()),
            Region::Exterior => (a * p.coords, *a),
            Region::Tip => {
                let (t, g) = self.geometry.gauge(p.x, p.y);
                let weight = 2.0 * (d - p.z - 2.0 * t) / d;
                let grad_weight = Vector3::new(-4.0 * g[0] / d, -4.0 * g[1] / d, -2.0 / d);
                let apex = a.column(2) * (0.5 * d);
                let value = a * p.coords - apex * weight;
                let grad = a - apex * grad_weight.transpose();
                (value, grad)
            }
            Region::Layer => {
                let (t, g) = self.geometry.gauge(p.x, p.y);
                let z = p.z;
                let inner = 0.5 * d - z;
                let outer = 0.5 * d - 0.5 * z;
                // fraction of the way from ∂C1 to ∂C2 along the radial segment
                let w = 2.0 * (t - inner) / z;
                let grad_w = Vector3::new(2.0 * g[0] / z, 2.0 * g[1] / z, 2.0 * (0.5 * d - t) / (z * z));
                // radial projection onto ∂C2 at the same height
                let s = outer / t;
                let y = Vector3::new(p.x * s, p.y * s, z);
                let mut grad_y = Matrix3::zeros();
                for i in 0..2 {
                    let xi = if i == 0 { p.x } else { p.y };
                    for j in 0..2 {
                        let delta_ij = if i == j { 1.0 } else { 0.0 };
                        grad_y[(i, j)] = s * (delta_ij - xi * g[j] / t);
                    }
                    grad_y[(i, 2)] = -0.5 * xi / t;
                }
                grad_y[(2, 2)] = 1.0;
                let ay = a * y;
                let value = ay * w;
                let grad = ay * grad_w.transpose() + a * grad_y * w;
                (value, grad)
            }
        }
    }

    /// Writes `x,y,z,v1,v2,v3,g11,g12,...,g33` rows for the given points.
    pub fn write_samples<W: Write>(&self, points: &[Point3<f64>], mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,z,v1,v2,v3,g11,g12,g13,g21,g22,g23,g31,g32,g33")?;
        for p in points {
            let (v, g) = self.eval(p);
            let mut row = vec![p.x, p.y, p.z, v.x, v.y, v.z];
            for i in 0..3 {
                for j in 0..3 {
                    row.push(g[(i, j)]);
                }
            }
            let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}
