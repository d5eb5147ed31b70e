//! Periodic array of double pyramids on the interface square `S_r`.
//!
//! The square `(-r/2, r/2)^2` is tiled by `m^2` cells `Q_i` of side
//! `delta = b/(alpha - 1)`. Above cell `i` the displacement is
//! `u_i(x) = (alpha - 1) x_i + V(x - x_i)` with `V` the transition field for
//! `A = (alpha - 1) I`; below the interface `u = 0`. Each wall between
//! adjacent cells carries a dislocation segment with Burgers vector
//! `(alpha - 1)(x_j - x_i)`.

use super::energy::{energy_functional, energy_p, QuadratureSpec};
use super::{DoublePyramid, Shape, TransitionField};
use crate::error::{domain, invalid, Error};
use crate::kinematics::dist_sq_to_scaled_rotations;
use crate::quadrature::UnitRule;
use crate::stats::loglog_slope;
use crate::Result;
use log::info;
use nalgebra::{Matrix3, Point3, Vector2, Vector3};
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct DislocationSegment {
    pub i: usize,
    pub j: usize,
    pub start: Point3<f64>,
    pub end: Point3<f64>,
    pub burgers: Vector3<f64>,
}

impl DislocationSegment {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DislocationArray {
    /// Side of the tiled square, after rounding.
    pub r: f64,
    pub requested_r: f64,
    pub rounded: bool,
    pub alpha: f64,
    pub b: f64,
    pub delta: f64,
    /// Cells per side; cell `(ix, iy)` has index `ix + per_side * iy`.
    pub per_side: usize,
    pub centers: Vec<Vector2<f64>>,
    pub segments: Vec<DislocationSegment>,
}

impl DislocationArray {
    pub fn cell_count(&self) -> usize {
        self.per_side * self.per_side
    }

    pub fn total_segment_length(&self) -> f64 {
        self.segments.iter().map(DislocationSegment::length).sum()
    }

    /// Line-length estimate `2 r^2 / delta`.
    pub fn length_estimate(&self) -> f64 {
        2.0 * self.r * self.r / self.delta
    }

    /// Cell whose closed footprint contains `(x, y)`; shared walls go to the
    /// cell with the larger index.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        let half = 0.5 * self.r;
        let tol = 1e-12 * self.r;
        if x.abs() > half + tol || y.abs() > half + tol {
            return None;
        }
        let m = self.per_side;
        let idx = |c: f64| (((c + half) / self.delta).floor().max(0.0) as usize).min(m - 1);
        Some(idx(x) + m * idx(y))
    }
}

/// Tiles `S_r` by cells of side `b/(alpha - 1)`.
///
/// A side that is not a multiple of the cell size is rounded down to the
/// nearest multiple of twice the cell size, and the rounding is recorded.
pub fn build_array(r: f64, alpha: f64, b: f64) -> Result<DislocationArray> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(domain(format!("alpha must exceed 1, got {alpha}")));
    }
    if !(b > 0.0) || !(r > 0.0) || !r.is_finite() {
        return Err(invalid("r and b must be positive"));
    }
    let delta = b / (alpha - 1.0);
    let ratio = r / delta;
    let tol = 1e-9 * ratio.max(1.0);
    if ratio < 1.0 - tol {
        return Err(Error::Geometry(format!("r = {r} is smaller than one cell ({delta})")));
    }
    let (per_side, rounded) = if (ratio - ratio.round()).abs() <= tol {
        (ratio.round() as usize, false)
    } else {
        (2 * (r / (2.0 * delta)).floor() as usize, true)
    };
    if per_side == 0 {
        return Err(Error::Geometry(format!(
            "rounding r = {r} down to a multiple of 2 delta leaves no cells"
        )));
    }
    let side = per_side as f64 * delta;
    if rounded {
        info!("r = {r} is not a multiple of delta = {delta}; using r = {side}");
    }
    let m = per_side;
    let half = 0.5 * side;
    let coord = |k: usize| -half + (k as f64 + 0.5) * delta;
    let wall = |k: usize| -half + k as f64 * delta;
    let centers: Vec<Vector2<f64>> = (0..m * m)
        .map(|i| Vector2::new(coord(i % m), coord(i / m)))
        .collect();
    let mut segments = Vec::with_capacity(2 * m * m.saturating_sub(1));
    for iy in 0..m {
        for ix in 0..m {
            let i = ix + m * iy;
            if ix + 1 < m {
                let x = wall(ix + 1);
                segments.push(DislocationSegment {
                    i,
                    j: i + 1,
                    start: Point3::new(x, wall(iy), 0.0),
                    end: Point3::new(x, wall(iy + 1), 0.0),
                    burgers: Vector3::new(b, 0.0, 0.0),
                });
            }
            if iy + 1 < m {
                let y = wall(iy + 1);
                segments.push(DislocationSegment {
                    i,
                    j: i + m,
                    start: Point3::new(wall(ix), y, 0.0),
                    end: Point3::new(wall(ix + 1), y, 0.0),
                    burgers: Vector3::new(0.0, b, 0.0),
                });
            }
        }
    }
    Ok(DislocationArray {
        r: side,
        requested_r: r,
        rounded,
        alpha,
        b,
        delta,
        per_side,
        centers,
        segments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirculationOptions {
    /// Minimum distance between the loop and any segment; `None` means
    /// `delta / 256`.
    pub margin: Option<f64>,
    pub points: usize,
    /// Equal parts per smooth piece of a loop edge.
    pub subdivisions: usize,
}

impl Default for CirculationOptions {
    fn default() -> Self {
        Self {
            margin: None,
            points: 16,
            subdivisions: 4,
        }
    }
}

/// The assembled displacement of the whole array.
#[derive(Debug, Clone)]
pub struct ArrayField {
    array: DislocationArray,
    cell: TransitionField,
}

impl ArrayField {
    pub fn new(array: DislocationArray) -> Result<Self> {
        let geometry = DoublePyramid::new(array.delta, Shape::Pyramid)?;
        let cell = TransitionField::new(geometry, Matrix3::identity() * (array.alpha - 1.0));
        Ok(Self { array, cell })
    }

    pub fn array(&self) -> &DislocationArray {
        &self.array
    }

    pub fn cell_field(&self) -> &TransitionField {
        &self.cell
    }

    fn center3(&self, i: usize) -> Vector3<f64> {
        let c = self.array.centers[i];
        Vector3::new(c.x, c.y, 0.0)
    }

    /// `u_i` extended to all of space above the interface.
    pub fn cell_displacement(&self, i: usize, p: &Point3<f64>) -> Vector3<f64> {
        let c = self.center3(i);
        let (v, _) = self.cell.eval(&(p - c));
        c * (self.array.alpha - 1.0) + v
    }

    pub fn displacement(&self, p: &Point3<f64>) -> Option<Vector3<f64>> {
        let i = self.array.cell_of(p.x, p.y)?;
        if p.z < 0.0 {
            return Some(Vector3::zeros());
        }
        Some(self.cell_displacement(i, p))
    }

    /// Deformation gradient `I + ∇u`.
    pub fn strain(&self, p: &Point3<f64>) -> Option<Matrix3<f64>> {
        let i = self.array.cell_of(p.x, p.y)?;
        if p.z < 0.0 {
            return Some(Matrix3::identity());
        }
        let (_, g) = self.cell.eval(&(p - self.center3(i)));
        Some(Matrix3::identity() + g)
    }

    /// `∮ F dl` around the closed polygon through `vertices`.
    pub fn circulation(&self, vertices: &[Point3<f64>], opts: &CirculationOptions) -> Result<Vector3<f64>> {
        if vertices.len() < 3 {
            return Err(invalid("a loop needs at least three vertices"));
        }
        let margin = opts.margin.unwrap_or(self.array.delta / 256.0);
        let half = 0.5 * self.array.r;
        for v in vertices {
            if v.x.abs() > half || v.y.abs() > half {
                return Err(Error::Geometry(format!("loop vertex {v:?} leaves the interface square")));
            }
        }
        let n = vertices.len();
        for k in 0..n {
            let (a, b) = (vertices[k], vertices[(k + 1) % n]);
            for s in &self.array.segments {
                let d = segment_distance(&a, &b, &s.start, &s.end);
                if d < margin {
                    return Err(Error::Geometry(format!(
                        "loop passes within {d:.3e} of the segment between cells {} and {}",
                        s.i, s.j
                    )));
                }
            }
        }
        let rule = UnitRule::new(opts.points);
        let mut total = Vector3::zeros();
        for k in 0..n {
            let (a, b) = (vertices[k], vertices[(k + 1) % n]);
            let dir = b - a;
            let breaks = self.breakpoints(&a, &b);
            for w in breaks.windows(2) {
                let step = (w[1] - w[0]) / opts.subdivisions.max(1) as f64;
                for part in 0..opts.subdivisions.max(1) {
                    let lo = w[0] + part as f64 * step;
                    for (t, wt) in rule.on(lo, lo + step) {
                        let f = self
                            .strain(&(a + dir * t))
                            .ok_or_else(|| Error::Geometry("loop leaves the interface square".into()))?;
                        total += f * dir * wt;
                    }
                }
            }
        }
        Ok(total)
    }

    /// Parameters in `[0, 1]` where the edge `a -> b` crosses a surface on
    /// which the strain is not smooth.
    fn breakpoints(&self, a: &Point3<f64>, b: &Point3<f64>) -> Vec<f64> {
        let d = self.array.delta;
        let m = self.array.per_side;
        let half = 0.5 * self.array.r;
        let mut planes: Vec<(Vector3<f64>, f64)> = vec![
            (Vector3::z(), 0.0),
            (Vector3::z(), 0.5 * d),
            (Vector3::z(), d),
        ];
        for k in 0..=m {
            let w = -half + k as f64 * d;
            planes.push((Vector3::x(), w));
            planes.push((Vector3::y(), w));
        }
        let (lo_x, hi_x) = (a.x.min(b.x) - d, a.x.max(b.x) + d);
        let (lo_y, hi_y) = (a.y.min(b.y) - d, a.y.max(b.y) + d);
        for c in &self.array.centers {
            if c.x < lo_x || c.x > hi_x || c.y < lo_y || c.y > hi_y {
                continue;
            }
            for s in [-1.0, 1.0] {
                for (k, e) in [Vector3::x(), Vector3::y()].into_iter().enumerate() {
                    planes.push((e * s + Vector3::z(), 0.5 * d + s * c[k]));
                    planes.push((e * s + Vector3::z() * 0.5, 0.5 * d + s * c[k]));
                }
            }
            planes.push((Vector3::new(1.0, -1.0, 0.0), c.x - c.y));
            planes.push((Vector3::new(1.0, 1.0, 0.0), c.x + c.y));
        }
        let dir = b - a;
        let mut ts = vec![0.0, 1.0];
        for (normal, offset) in planes {
            let den = normal.dot(&dir);
            if den.abs() < 1e-300 {
                continue;
            }
            let t = (offset - normal.dot(&a.coords)) / den;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        ts
    }
}

/// Rectangle in the plane normal to the segment through its midpoint, going up
/// through cell `i` and down through cell `j`.
pub fn rectangular_loop(
    segment: &DislocationSegment,
    half_width: f64,
    height: f64,
    depth: f64,
) -> Vec<Point3<f64>> {
    let mid = Point3::from((segment.start.coords + segment.end.coords) * 0.5);
    let along = (segment.end - segment.start).normalize();
    // from cell i toward cell j
    let across = Vector3::new(along.y, -along.x, 0.0) * segment.burgers.dot(&Vector3::new(along.y, -along.x, 0.0)).signum();
    let up = Vector3::z();
    vec![
        mid - across * half_width - up * depth,
        mid - across * half_width + up * height,
        mid + across * half_width + up * height,
        mid + across * half_width - up * depth,
    ]
}

/// Distance between the segments `[p0, p1]` and `[q0, q1]`.
pub(crate) fn segment_distance(p0: &Point3<f64>, p1: &Point3<f64>, q0: &Point3<f64>, q1: &Point3<f64>) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return r.norm();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

/// `C2 min(dist^2(F, alpha SO(3)), |F|^p + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeDensity {
    pub alpha: f64,
    pub p: f64,
    pub c2: f64,
}

impl EnvelopeDensity {
    pub fn new(alpha: f64, p: f64, c2: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(domain(format!("alpha must exceed 1, got {alpha}")));
        }
        if !(1.0..2.0).contains(&p) {
            return Err(domain(format!("growth exponent must lie in [1, 2), got {p}")));
        }
        if !(c2 > 0.0) {
            return Err(invalid(format!("C2 must be positive, got {c2}")));
        }
        Ok(Self { alpha, p, c2 })
    }

    pub fn eval(&self, f: &Matrix3<f64>) -> f64 {
        let well = dist_sq_to_scaled_rotations(f, self.alpha);
        let growth = f.norm().powf(self.p) + 1.0;
        self.c2 * well.min(growth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBoundRecord {
    pub r: f64,
    pub q: usize,
    pub energy: f64,
    pub bound: f64,
    /// Log-log slope fitted over all records.
    pub slope_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperBoundReport {
    pub records: Vec<UpperBoundRecord>,
    pub slope: f64,
    /// `∫_{C2} W(I + ∇V)` for one cell.
    pub cell_energy: f64,
    /// `∫ |∇v|^p` for the unit pyramid with `A = I`.
    pub m_hat: f64,
    /// Bulk constant `C2 (2^(p-1) 3^(p/2) + 1) |C2_1|`.
    pub c_hat: f64,
    /// Gradient constant `C2 2^(p-1)`.
    pub kappa: f64,
}

impl UpperBoundReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,q,energy,bound,slope_estimate")?;
        for rec in &self.records {
            writeln!(
                out,
                "{:.16e},{},{:.16e},{:.16e},{:.16e}",
                rec.r, rec.q, rec.energy, rec.bound, rec.slope_estimate
            )?;
        }
        Ok(())
    }
}

/// Energy of the array construction for each side length, with the bound
/// `r^2 b [(alpha-1)^(p-1) kappa m_hat + (alpha-1)^(-1) c_hat]`.
pub fn quadratic_upper_bound(
    r_list: &[f64],
    alpha: f64,
    b: f64,
    w: &EnvelopeDensity,
    spec: &QuadratureSpec,
) -> Result<UpperBoundReport> {
    if r_list.is_empty() {
        return Err(invalid("no side lengths given"));
    }
    if (w.alpha - alpha).abs() > 1e-15 * alpha {
        return Err(invalid("density and array use different alpha"));
    }
    let p = w.p;
    let arrays = r_list
        .iter()
        .map(|&r| build_array(r, alpha, b))
        .collect::<Result<Vec<_>>>()?;
    let field = ArrayField::new(arrays[0].clone())?;
    let cell_energy = energy_functional(
        field.cell_field(),
        |g| w.eval(&(Matrix3::identity() + g)),
        p,
        spec,
    )?
    .total();
    let unit = TransitionField::new(DoublePyramid::new(1.0, Shape::Pyramid)?, Matrix3::identity());
    let m_hat = energy_p(&unit, p, spec)?;
    let kappa = w.c2 * 2f64.powf(p - 1.0);
    let c_hat = w.c2 * (2f64.powf(p - 1.0) * 3f64.powf(0.5 * p) + 1.0) / 3.0;
    let coefficient = b * ((alpha - 1.0).powf(p - 1.0) * kappa * m_hat + c_hat / (alpha - 1.0));
    let rs: Vec<f64> = arrays.iter().map(|a| a.r).collect();
    let energies: Vec<f64> = arrays.iter().map(|a| a.cell_count() as f64 * cell_energy).collect();
    let slope = if rs.len() > 1 { loglog_slope(&rs, &energies) } else { f64::NAN };
    let records = arrays
        .iter()
        .zip(&energies)
        .map(|(a, &energy)| UpperBoundRecord {
            r: a.r,
            q: a.cell_count(),
            energy,
            bound: a.r * a.r * coefficient,
            slope_estimate: slope,
        })
        .collect();
    Ok(UpperBoundReport {
        records,
        slope,
        cell_energy,
        m_hat,
        c_hat,
        kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_enumeration() {
        let a = build_array(20.0, 1.1, 1.0).unwrap();
        assert_eq!(a.cell_count(), 4);
        assert_eq!(a.segments.len(), 4);
        let pairs: Vec<_> = a.segments.iter().map(|s| (s.i, s.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        for s in &a.segments {
            assert_eq!(s.burgers.norm(), 1.0);
            let diff = (a.centers[s.j] - a.centers[s.i]) * (a.alpha - 1.0);
            assert!((Vector3::new(diff.x, diff.y, 0.0) - s.burgers).norm() < 1e-12);
        }
    }

    #[test]
    fn single_cell_and_too_small() {
        let a = build_array(10.0, 1.1, 1.0).unwrap();
        assert_eq!(a.cell_count(), 1);
        assert!(a.segments.is_empty());
        assert!(matches!(build_array(9.0, 1.1, 1.0), Err(Error::Geometry(_))));
        // 15 rounds down to zero multiples of 2 delta
        assert!(matches!(build_array(15.0, 1.1, 1.0), Err(Error::Geometry(_))));
    }

    #[test]
    fn rounding_is_recorded() {
        let a = build_array(47.0, 1.1, 1.0).unwrap();
        assert!(a.rounded);
        assert_eq!(a.per_side, 4);
        assert!((a.r - 40.0).abs() < 1e-9);
    }

    #[test]
    fn segment_distance_cases() {
        let p = |x, y, z| Point3::new(x, y, z);
        assert!((segment_distance(&p(0., 0., 0.), &p(1., 0., 0.), &p(0., 1., 1.), &p(1., 1., 1.)) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(segment_distance(&p(-1., 0., 0.), &p(1., 0., 0.), &p(0., -1., 0.), &p(0., 1., 0.)), 0.0);
        assert!((segment_distance(&p(0., 0., 0.), &p(1., 0., 0.), &p(2., 0., 0.), &p(3., 0., 0.)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_vanishes_on_well() {
        let w = EnvelopeDensity::new(1.1, 1.5, 1.0).unwrap();
        assert!(w.eval(&(Matrix3::identity() * 1.1)) < 1e-28);
        assert!((w.eval(&Matrix3::identity()) - 3.0 * 0.01).abs() < 1e-14);
    }
}
