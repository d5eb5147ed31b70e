//! Matrix helpers shared by the energy densities.

use nalgebra::Matrix3;

/// Squared Frobenius distance from `f` to `scale * SO(3)`.
pub fn dist_sq_to_scaled_rotations(f: &Matrix3<f64>, scale: f64) -> f64 {
    let mut sv = f.singular_values();
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    if f.determinant() >= 0.0 {
        sv.iter().map(|s| (s - scale).powi(2)).sum()
    } else {
        (sv[0] - scale).powi(2) + (sv[1] - scale).powi(2) + (sv[2] + scale).powi(2)
    }
}
