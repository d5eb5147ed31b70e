//! Quadrature of energy densities over the outer pyramid.
//!
//! Each region is split into four angular sectors on which the horizontal
//! gauge is smooth, and integrated with a tensor Gauss rule in
//! `(z, radius, angle)`. In the layer the radius runs over `[delta/2 - z,
//! delta/2 - z/2]` and the height is graded geometrically toward `z = 0`; the
//! last interval `[0, z_L]` uses `z = z_L s^m` with `m = 1/(2 - p)`, which
//! removes the `z^(1-p)` singularity of a `p`-growth integrand.

use super::{Region, Shape, TransitionField};
use crate::error::{domain, invalid, Error};
use crate::quadrature::UnitRule;
use crate::stats::linear_slope;
use crate::Result;
use nalgebra::{Matrix3, Point3};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Geometric intervals in the layer before the final power-graded one.
    pub levels: usize,
    pub ratio: f64,
    /// Gauss points per dimension.
    pub points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            levels: 8,
            ratio: 0.5,
            points: 8,
        }
    }
}

impl QuadratureSpec {
    fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(invalid(format!("grading ratio must lie in (0, 1), got {}", self.ratio)));
        }
        if self.points == 0 {
            return Err(invalid("quadrature needs at least one point"));
        }
        Ok(())
    }
}

/// Energy split by region of the outer pyramid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub inner: f64,
    pub tip: f64,
    pub layer: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.inner + self.tip + self.layer
    }
}

/// Horizontal point in angular sector `q` at gauge radius `t`, with `s` in
/// `[-1, 1]` sweeping the sector, and the area Jacobian `dA / (dt ds)`.
fn sector_point(shape: Shape, q: usize, t: f64, s: f64) -> (f64, f64, f64) {
    match shape {
        Shape::Pyramid => {
            let (dx, dy) = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][q];
            (t * (dx - s * dy), t * (dy + s * dx), t)
        }
        Shape::Cone => {
            let phi = std::f64::consts::FRAC_PI_2 * (q as f64 + 0.5 * s);
            (t * phi.cos(), t * phi.sin(), t * std::f64::consts::FRAC_PI_4)
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Tip,
    Layer { lo: f64, hi: f64 },
    /// `[0, hi]` with `z = hi s^m`.
    LayerRoot { hi: f64, m: f64 },
}

fn layer_intervals(delta: f64, spec: &QuadratureSpec, z_min: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut hi = 0.5 * delta;
    while hi > z_min {
        let lo = (hi * spec.ratio).max(z_min);
        out.push((lo, hi));
        hi = lo;
    }
    out
}

struct Integrator<'a> {
    field: &'a TransitionField,
    rule: UnitRule,
}

impl Integrator<'_> {
    /// Calls `visit(z, gradient, weight)` at every node of one sector piece.
    fn visit<V: FnMut(f64, &Matrix3<f64>, f64)>(&self, q: usize, piece: Piece, mut visit: V) {
        let d = self.field.geometry().delta();
        let shape = self.field.geometry().shape();
        let rule = &self.rule;
        let heights: Vec<(f64, f64)> = match piece {
            Piece::Tip => rule.on(0.5 * d, d).collect(),
            Piece::Layer { lo, hi } => rule.on(lo, hi).collect(),
            Piece::LayerRoot { hi, m } => rule
                .on(0.0, 1.0)
                .map(|(s, w)| (hi * s.powf(m), w * hi * m * s.powf(m - 1.0)))
                .collect(),
        };
        let region = match piece {
            Piece::Tip => Region::Tip,
            _ => Region::Layer,
        };
        for (z, wz) in heights {
            let (t0, len) = match region {
                Region::Tip => (0.0, 0.5 * (d - z)),
                _ => (0.5 * d - z, 0.5 * z),
            };
            for (u, wu) in rule.on(0.0, 1.0) {
                let t = t0 + u * len;
                for (s, ws) in rule.on(-1.0, 1.0) {
                    let (x, y, jac) = sector_point(shape, q, t, s);
                    let (_, g) = self.field.eval_in(region, &Point3::new(x, y, z));
                    visit(z, &g, wz * wu * len * ws * jac);
                }
            }
        }
    }
}

fn sum_pieces<P>(field: &TransitionField, spec: &QuadratureSpec, pieces: &[Piece], phi: &P) -> Vec<f64>
where
    P: Fn(&Matrix3<f64>) -> f64 + Sync,
{
    let integrator = Integrator {
        field,
        rule: UnitRule::new(spec.points),
    };
    let tasks: Vec<(usize, Piece)> = pieces
        .iter()
        .flat_map(|&piece| (0..4).map(move |q| (q, piece)))
        .collect();
    // collect before summing so the result does not depend on the thread count
    let parts: Vec<f64> = tasks
        .par_iter()
        .map(|&(q, piece)| {
            let mut acc = 0.0;
            integrator.visit(q, piece, |_, g, w| acc += w * phi(g));
            acc
        })
        .collect();
    parts
}

fn root_exponent(growth_p: f64) -> f64 {
    if growth_p > 1.0 {
        (1.0 / (2.0 - growth_p)).min(64.0)
    } else {
        1.0
    }
}

/// Integrates `phi(∇v)` over the outer pyramid. `growth_p` is the growth of
/// `phi` at infinity and only tunes the grading at the base rim.
pub fn energy_functional<P>(
    field: &TransitionField,
    phi: P,
    growth_p: f64,
    spec: &QuadratureSpec,
) -> Result<EnergyBreakdown>
where
    P: Fn(&Matrix3<f64>) -> f64 + Sync,
{
    spec.validate()?;
    if !(growth_p < 2.0) {
        return Err(domain(format!("growth exponent {growth_p} makes the layer integral diverge")));
    }
    let d = field.geometry().delta();
    let tip: f64 = sum_pieces(field, spec, &[Piece::Tip], &phi).iter().sum();
    let mut pieces: Vec<Piece> = (0..spec.levels)
        .map(|k| {
            let hi = 0.5 * d * spec.ratio.powi(k as i32);
            Piece::Layer { lo: hi * spec.ratio, hi }
        })
        .collect();
    pieces.push(Piece::LayerRoot {
        hi: 0.5 * d * spec.ratio.powi(spec.levels as i32),
        m: root_exponent(growth_p),
    });
    let layer: f64 = sum_pieces(field, spec, &pieces, &phi).iter().sum();
    let inner = phi(&Matrix3::zeros()) * field.geometry().inner_volume();
    Ok(EnergyBreakdown { inner, tip, layer })
}

/// `∫_{C2} |∇v|^p`, Frobenius norm.
pub fn energy_p(field: &TransitionField, p: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(1.0..2.0).contains(&p) {
        return Err(domain(format!("energy_p needs 1 <= p < 2, got {p}")));
    }
    Ok(energy_functional(field, |g| g.norm().powf(p), p, spec)?.total())
}

/// `∫_{T ∩ {z > z_min}} |∇v|^p`.
pub fn layer_energy_above(field: &TransitionField, p: f64, z_min: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let d = field.geometry().delta();
    if !(z_min > 0.0 && z_min < 0.5 * d) {
        return Err(domain(format!("cut height {z_min} must lie in (0, delta/2)")));
    }
    let pieces: Vec<Piece> = layer_intervals(d, spec, z_min)
        .into_iter()
        .map(|(lo, hi)| Piece::Layer { lo, hi })
        .collect();
    Ok(sum_pieces(field, spec, &pieces, &|g: &Matrix3<f64>| g.norm().powf(p))
        .iter()
        .sum())
}

/// Largest `z |∇v|` over the layer quadrature nodes.
pub fn layer_gradient_bound(field: &TransitionField, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let d = field.geometry().delta();
    let z_min = 0.5 * d * spec.ratio.powi(spec.levels as i32);
    let integrator = Integrator {
        field,
        rule: UnitRule::new(spec.points),
    };
    let mut best = 0.0f64;
    for (lo, hi) in layer_intervals(d, spec, z_min) {
        for q in 0..4 {
            integrator.visit(q, Piece::Layer { lo, hi }, |z, g, _| best = best.max(z * g.norm()));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub eps: Vec<f64>,
    /// `∫_{T ∩ {z > eps delta}} |∇v|^2` for each `eps`.
    pub integrals: Vec<f64>,
    /// Slopes against `ln(1/eps)` between consecutive cuts.
    pub local_slopes: Vec<f64>,
    /// Least-squares slope over all cuts.
    pub slope: f64,
    /// Relative change between the last two local slopes; `None` with fewer
    /// than three cuts.
    pub drift: Option<f64>,
}

/// Measures the logarithmic blow-up of the quadratic energy at the base rim.
pub fn divergence_log_rate(
    field: &TransitionField,
    eps_list: &[f64],
    spec: &QuadratureSpec,
) -> Result<DivergenceReport> {
    if field.far_field().iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("far field A = 0 gives a vanishing field".into()));
    }
    if eps_list.len() < 2 {
        return Err(invalid("need at least two cut heights"));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
        return Err(domain("cut heights must lie in (0, 1/2)"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("cut heights must be strictly decreasing"));
    }
    let d = field.geometry().delta();
    let integrals = eps_list
        .iter()
        .map(|&e| layer_energy_above(field, 2.0, e * d, spec))
        .collect::<Result<Vec<_>>>()?;
    let logs: Vec<f64> = eps_list.iter().map(|e| (1.0 / e).ln()).collect();
    let local_slopes: Vec<f64> = (1..eps_list.len())
        .map(|i| (integrals[i] - integrals[i - 1]) / (logs[i] - logs[i - 1]))
        .collect();
    let slope = linear_slope(&logs, &integrals);
    let drift = match local_slopes.len() {
        0 | 1 => None,
        n => Some(((local_slopes[n - 1] - local_slopes[n - 2]) / local_slopes[n - 1]).abs()),
    };
    Ok(DivergenceReport {
        eps: eps_list.to_vec(),
        integrals,
        local_slopes,
        slope,
        drift,
    })
}
