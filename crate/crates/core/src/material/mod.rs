//! Material constants and closed-form energies of the interface model.
//!
//! All functions are pure. Units are whatever the caller uses consistently;
//! only the lattice spacing `b` carries a length scale.

mod config;

pub use config::{parse_config, read_config, ParamFile};

use crate::error::{domain, invalid};
use crate::Result;
use std::f64::consts::PI;

/// Where the line-energy coefficient came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaSource {
    Given,
    /// Computed from the Lamé moduli and the core energy by [`sigma_from_lame`].
    Derived,
}

/// Validated material record.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    pub alpha: f64,
    /// Commensurability index with `alpha = 1 + 1/n`, when enforced.
    pub n: Option<u32>,
    pub b: f64,
    pub mu: f64,
    pub nu: f64,
    pub lambda: f64,
    pub gamma_ch: f64,
    pub h: f64,
    pub sigma: f64,
    pub sigma_source: SigmaSource,
}

/// Unvalidated inputs; every field is optional until [`MaterialInput::build`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialInput {
    pub alpha: Option<f64>,
    pub n: Option<u32>,
    pub b: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma_ch: Option<f64>,
    pub h: Option<f64>,
    pub sigma: Option<f64>,
}

impl MaterialInput {
    pub fn build(&self) -> Result<MaterialParams> {
        let alpha = match (self.alpha, self.n) {
            (Some(a), _) => a,
            (None, Some(n)) if n > 0 => 1.0 + 1.0 / n as f64,
            _ => return Err(invalid("alpha (or n) is required")),
        };
        let b = self.b.unwrap_or(1.0);
        let mu = self.mu.ok_or_else(|| invalid("mu is required"))?;
        let nu = self.nu.ok_or_else(|| invalid("nu is required"))?;
        let gamma_ch = self.gamma_ch.unwrap_or(0.0);
        let h = self.h.unwrap_or(1.0);

        if !(alpha > 1.0) {
            return Err(invalid(format!("alpha must exceed 1, got {alpha}")));
        }
        if let Some(n) = self.n {
            if n == 0 {
                return Err(invalid("n must be a positive integer"));
            }
            let expected = 1.0 + 1.0 / n as f64;
            if (alpha - expected).abs() >= 1e-12 {
                return Err(invalid(format!(
                    "alpha = {alpha} is not 1 + 1/n for n = {n}"
                )));
            }
        }
        if !(nu > 0.0 && nu < 0.5) {
            return Err(invalid(format!("nu must lie in (0, 1/2), got {nu}")));
        }
        if !(mu > 0.0) || !(b > 0.0) || !(h > 0.0) {
            return Err(invalid("mu, b and h must be positive"));
        }
        if !(gamma_ch >= 0.0) {
            return Err(invalid("gamma_ch must be non-negative"));
        }
        let lambda = self.lambda.unwrap_or_else(|| lambda_from_poisson(mu, nu));
        let (sigma, sigma_source) = match self.sigma {
            Some(s) => (s, SigmaSource::Given),
            None => (
                sigma_from_lame(b, mu, nu, alpha, gamma_ch)?,
                SigmaSource::Derived,
            ),
        };
        if !(sigma > 0.0) {
            return Err(invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(MaterialParams {
            alpha,
            n: self.n,
            b,
            mu,
            nu,
            lambda,
            gamma_ch,
            h,
            sigma,
            sigma_source,
        })
    }
}

impl MaterialParams {
    /// Line energy per unit length from linear elasticity (see [`gamma_lin`]).
    pub fn gamma_lin(&self) -> Result<f64> {
        gamma_lin(self.b, self.mu, self.nu, self.alpha)
    }

    /// Line-tension coefficient recomputed from the Lamé data, regardless of
    /// whether `sigma` was given.
    pub fn lame_sigma(&self) -> Result<f64> {
        sigma_from_lame(self.b, self.mu, self.nu, self.alpha, self.gamma_ch)
    }

    /// Size of the transition squares in the semi-discrete construction.
    pub fn delta(&self) -> f64 {
        self.b / (self.alpha - 1.0)
    }
}

/// First Lamé modulus from shear modulus and Poisson ratio.
pub fn lambda_from_poisson(mu: f64, nu: f64) -> f64 {
    2.0 * mu * nu / (1.0 - 2.0 * nu)
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("theta must lie in (0, 1], got {theta}")))
    }
}

/// Dislocation (plastic) energy `sigma R^2 (1 - theta^2)`.
pub fn plastic_energy(theta: f64, big_r: f64, sigma: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(big_r > 0.0) || !(sigma > 0.0) {
        return Err(domain("R and sigma must be positive"));
    }
    Ok(sigma * big_r * big_r * (1.0 - theta * theta))
}

/// Plastic energy of the coaxial two-wire configuration, `sigma h R^2 (1 - theta)`.
pub fn coaxial_plastic_energy(theta: f64, big_r: f64, h: f64, sigma: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(big_r > 0.0) || !(sigma > 0.0) || !(h > 0.0) {
        return Err(domain("R, h and sigma must be positive"));
    }
    Ok(sigma * h * big_r * big_r * (1.0 - theta))
}

/// Linear-elastic energy per unit length of an interface edge dislocation,
/// `b^2 mu / (2 pi (1 - nu)) ln(1 / (alpha - 1))`.
///
/// The log is the ratio of dislocation spacing to core size; it is only
/// positive for `alpha < 2`, so larger misfits are rejected.
pub fn gamma_lin(b: f64, mu: f64, nu: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(domain(format!("alpha must exceed 1, got {alpha}")));
    }
    if alpha >= 2.0 {
        return Err(domain(format!(
            "alpha = {alpha} >= 2 gives a non-positive line energy"
        )));
    }
    if !(nu < 1.0) {
        return Err(domain(format!("nu must be below 1, got {nu}")));
    }
    Ok(b * b * mu / (2.0 * PI * (1.0 - nu)) * (1.0 / (alpha - 1.0)).ln())
}

/// `sigma = (gamma_lin + gamma_ch) / b`.
pub fn sigma_from_lame(b: f64, mu: f64, nu: f64, alpha: f64, gamma_ch: f64) -> Result<f64> {
    if !(gamma_ch >= 0.0) {
        return Err(domain("gamma_ch must be non-negative"));
    }
    Ok((gamma_lin(b, mu, nu, alpha)? + gamma_ch) / b)
}

/// Total dislocation length in the deformed configuration,
/// `(2 r^2 / b) (theta^-2 - theta^-1)`.
pub fn dislocation_length(r: f64, theta: f64, b: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(b > 0.0) {
        return Err(domain("b must be positive"));
    }
    let inv = 1.0 / theta;
    Ok(2.0 * r * r / b * (inv * inv - inv))
}

/// Small-misfit dislocation length `area_gap / b`; this is the form that
/// enters the plastic energy.
pub fn dislocation_length_small_misfit(r: f64, theta: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(domain("b must be positive"));
    }
    Ok(area_gap(r, theta)? / b)
}

/// Area of `S_{r/theta}` minus area of `S_r`.
pub fn area_gap(r: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(r * r * (1.0 / (theta * theta) - 1.0))
}

/// Inversion formula for `sigma` from the observed upper-base size, written
/// exactly as `(C_el / 2) (R_up^2 / (alpha R) - R / alpha^2)`.
///
/// This expression vanishes at `R_up = R / sqrt(alpha)`. It does not invert
/// the optimal-theta relation `R_up = alpha theta R`; use
/// [`sigma_from_upper_base`] for that.
pub fn sigma_from_observable(c_el: f64, big_r: f64, r_up: f64, alpha: f64) -> Result<f64> {
    if !(big_r > 0.0) || !(r_up > 0.0) {
        return Err(domain("R and R_up must be positive"));
    }
    Ok(0.5 * c_el * (r_up * r_up / (alpha * big_r) - big_r / (alpha * alpha)))
}

/// Recovers `sigma` from the upper-base size `R_up = alpha theta R`, using
/// `theta^2 = alpha^-2 (1 + 2 c / R)` with `c = sigma / (alpha C_el)`:
/// `sigma = (alpha C_el / 2) (R_up^2 / R - R)`. Exact to first order in `1/R`.
pub fn sigma_from_upper_base(c_el: f64, big_r: f64, r_up: f64, alpha: f64) -> Result<f64> {
    if !(big_r > 0.0) || !(r_up > 0.0) {
        return Err(domain("R and R_up must be positive"));
    }
    // R_up^2 / R - R = (R_up - R)(R_up + R) / R avoids cancelling two O(R) terms.
    Ok(0.5 * alpha * c_el * (r_up - big_r) * (r_up + big_r) / big_r)
}

/// Which transition-square size the geometry uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionScale {
    /// `delta = b / (alpha - 1)`, the semi-discrete array construction.
    SemiDiscrete,
    /// `delta = b / (theta^-1 - 1)`, matching `v(S_r) = S_R`.
    DeformedMatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    pub big_r: f64,
    pub theta: f64,
    pub r: f64,
    pub delta: f64,
    pub scale: TransitionScale,
}

impl GeometryParams {
    pub fn new(
        big_r: f64,
        theta: f64,
        alpha: f64,
        b: f64,
        scale: TransitionScale,
    ) -> Result<Self> {
        if !(big_r > 0.0) {
            return Err(domain("R must be positive"));
        }
        if !(theta >= 1.0 / alpha && theta <= 1.0) {
            return Err(domain(format!(
                "theta = {theta} outside [1/alpha, 1] = [{}, 1]",
                1.0 / alpha
            )));
        }
        let delta = match scale {
            TransitionScale::SemiDiscrete => b / (alpha - 1.0),
            TransitionScale::DeformedMatch => {
                if theta == 1.0 {
                    f64::INFINITY
                } else {
                    b / (1.0 / theta - 1.0)
                }
            }
        };
        Ok(Self {
            big_r,
            theta,
            r: theta * big_r,
            delta,
            scale,
        })
    }

    /// True when `r (alpha - 1) / (2 b)` is a positive integer.
    pub fn is_commensurable(&self, alpha: f64, b: f64) -> bool {
        let m = self.r * (alpha - 1.0) / (2.0 * b);
        let k = m.round();
        k >= 1.0 && (m - k).abs() <= 1e-9 * m.max(1.0)
    }
}
