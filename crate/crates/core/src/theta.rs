//! Optimization of the scalar energy `P_tot(theta) = k R^3 theta (alpha theta - 1)^2
//! + sigma R^2 (1 - theta^2)` over `theta` in `[1/alpha, 1]`.
//!
//! The elastic part is the linearized bulk energy of an overlayer of size
//! `theta R` matched to an underlayer of size `R`; the plastic part charges the
//! area gap at line tension `sigma`. `P_tot'` is a quadratic in `theta`, so the
//! minimizer is known in closed form; [`PolynomialFamily::golden_section_theta`]
//! recovers it independently from energy comparisons alone.

use crate::error::{domain, invalid};
use crate::search::{golden_section_by, GoldenResult};
use crate::Result;

/// Golden-section tolerance in `theta` used for cross-checks.
pub const GOLDEN_TOL: f64 = 1e-12;
pub const GOLDEN_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialFamily {
    k: f64,
    big_r: f64,
    alpha: f64,
    sigma: f64,
}

/// Constrained minimizer of [`PolynomialFamily::p_tot`] and the energies there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSolution {
    pub theta_star: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub f_value: f64,
    pub p_el: f64,
    pub p_pl: f64,
    pub p_tot: f64,
    /// `P_tot''(theta_star)`; non-negative whenever `endpoint` is false.
    pub second_derivative: f64,
    /// Set when `theta_plus > 1`, i.e. the interior critical point lies outside
    /// the admissible interval and the minimum sits at an endpoint.
    pub endpoint: bool,
}

impl PolynomialFamily {
    pub fn new(k: f64, big_r: f64, alpha: f64, sigma: f64) -> Result<Self> {
        if !(k > 0.0) || !(big_r > 0.0) || !(sigma > 0.0) {
            return Err(invalid(format!(
                "k, R and sigma must be positive (k = {k}, R = {big_r}, sigma = {sigma})"
            )));
        }
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(invalid(format!("alpha must exceed 1, got {alpha}")));
        }
        Ok(Self {
            k,
            big_r,
            alpha,
            sigma,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn big_r(&self) -> f64 {
        self.big_r
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `c = sigma / (alpha k)`.
    pub fn c(&self) -> f64 {
        self.sigma / (self.alpha * self.k)
    }

    pub fn with_r(&self, big_r: f64) -> Result<Self> {
        Self::new(self.k, big_r, self.alpha, self.sigma)
    }

    pub fn p_el(&self, theta: f64) -> f64 {
        let d = self.alpha * theta - 1.0;
        self.k * self.big_r.powi(3) * theta * d * d
    }

    pub fn p_pl(&self, theta: f64) -> f64 {
        self.sigma * self.big_r * self.big_r * (1.0 - theta * theta)
    }

    pub fn p_tot(&self, theta: f64) -> f64 {
        self.p_el(theta) + self.p_pl(theta)
    }

    /// `P_tot(a) - P_tot(b)` in factored form.
    ///
    /// With `p = alpha a - 1`, `q = alpha b - 1` the difference is
    /// `R^2 (a - b) [k R (p^2 + p q + q^2 + p + q) - sigma (a + b)]`, which
    /// stays accurate when `a` and `b` are both close to the minimizer.
    pub fn energy_difference(&self, a: f64, b: f64) -> f64 {
        let p = self.alpha * a - 1.0;
        let q = self.alpha * b - 1.0;
        let bracket = self.k * self.big_r * (p * p + p * q + q * q + p + q) - self.sigma * (a + b);
        self.big_r * self.big_r * (a - b) * bracket
    }

    /// `P_tot'(theta) = R^2 [3 alpha^2 k R theta^2 - 2 (2 alpha k R + sigma) theta + k R]`.
    pub fn derivative(&self, theta: f64) -> f64 {
        let (a, k, r, s) = (self.alpha, self.k, self.big_r, self.sigma);
        r * r * (3.0 * a * a * k * r * theta * theta - 2.0 * (2.0 * a * k * r + s) * theta + k * r)
    }

    /// Sum of the magnitudes of the terms in [`Self::derivative`]; the natural
    /// scale for its rounding error.
    pub fn derivative_scale(&self, theta: f64) -> f64 {
        let (a, k, r, s) = (self.alpha, self.k, self.big_r, self.sigma);
        r * r
            * (3.0 * a * a * k * r * theta * theta
                + 2.0 * (2.0 * a * k * r + s) * theta.abs()
                + k * r)
    }

    pub fn second_derivative(&self, theta: f64) -> f64 {
        let (a, k, r, s) = (self.alpha, self.k, self.big_r, self.sigma);
        r * r * (6.0 * a * a * k * r * theta - 2.0 * (2.0 * a * k * r + s))
    }

    /// `f(R) = sqrt(1 + 4c/R + c^2/R^2)`.
    pub fn f_value(&self) -> f64 {
        let u = self.c() / self.big_r;
        (1.0 + u * (4.0 + u)).sqrt()
    }

    /// Roots `(theta_minus, theta_plus)` of `P_tot'`.
    ///
    /// `theta_plus = (2 + c/R + f) / (3 alpha)` has no cancellation; the
    /// smaller root comes from the product `theta_plus theta_minus = 1 / (3 alpha^2)`.
    pub fn critical_points(&self) -> (f64, f64) {
        let u = self.c() / self.big_r;
        let plus = (2.0 + u + self.f_value()) / (3.0 * self.alpha);
        let minus = 1.0 / (3.0 * self.alpha * self.alpha * plus);
        (minus, plus)
    }

    /// Minimizer over `[1/alpha, 1]`.
    pub fn minimize(&self) -> ThetaSolution {
        let lo = 1.0 / self.alpha;
        let (theta_minus, theta_plus) = self.critical_points();
        let endpoint = theta_plus > 1.0;
        let theta_star = if !endpoint {
            theta_plus.max(lo)
        } else {
            // Candidates in increasing order so ties resolve toward smaller theta.
            let mut candidates = vec![lo];
            for t in [theta_minus, theta_plus] {
                if t > lo && t < 1.0 {
                    candidates.push(t);
                }
            }
            candidates.push(1.0);
            candidates.sort_by(|a, b| a.total_cmp(b));
            let mut best = candidates[0];
            for &t in &candidates[1..] {
                if self.energy_difference(t, best) < 0.0 {
                    best = t;
                }
            }
            best
        };
        let p_el = if theta_star == theta_plus {
            // alpha theta_plus - 1 = (u + f - 1) / 3 without cancellation
            let u = self.c() / self.big_r;
            let f = self.f_value();
            let gap = (u + u * (4.0 + u) / (1.0 + f)) / 3.0;
            self.k * self.big_r.powi(3) * theta_plus * gap * gap
        } else {
            self.p_el(theta_star)
        };
        let p_pl = self.p_pl(theta_star);
        ThetaSolution {
            theta_star,
            theta_plus,
            theta_minus,
            f_value: self.f_value(),
            p_el,
            p_pl,
            p_tot: p_el + p_pl,
            second_derivative: self.second_derivative(theta_star),
            endpoint,
        }
    }

    /// Golden-section minimizer of `P_tot` on `[1/alpha, 1]`, comparing
    /// energies through [`Self::energy_difference`].
    pub fn golden_section_theta(&self, tol: f64, max_iter: usize) -> GoldenResult {
        golden_section_by(1.0 / self.alpha, 1.0, tol, max_iter, |x, y| {
            self.energy_difference(x, y) < 0.0
        })
    }

    /// Coefficients of `f(R)` in powers `R^0 .. R^-order`.
    pub fn taylor_f(&self, order: usize) -> Result<Vec<f64>> {
        taylor_f_coefficients(self.c(), order)
    }

    /// Leading-order energies `(E_el, E_pl)` at the optimum:
    /// `sigma^2 R / (alpha^3 k)` and `sigma R^2 (1 - alpha^-2) - 2 sigma^2 R / (alpha^3 k)`.
    pub fn asymptotic_energies(&self) -> (f64, f64) {
        let (a, k, r, s) = (self.alpha, self.k, self.big_r, self.sigma);
        let el = s * s / (a.powi(3) * k) * r;
        let pl = s * r * r * (1.0 - 1.0 / (a * a)) - 2.0 * el;
        (el, pl)
    }

    /// First-order expansion `theta_star^2 ~ alpha^-2 (1 + 2 c / R)`.
    pub fn theta_sq_expansion(&self) -> f64 {
        (1.0 + 2.0 * self.c() / self.big_r) / (self.alpha * self.alpha)
    }
}

/// `[1, 2c, -3/2 c^2, 3 c^3]` truncated after `order`.
pub fn taylor_f_coefficients(c: f64, order: usize) -> Result<Vec<f64>> {
    if order > 3 {
        return Err(domain(format!("expansion order {order} > 3 is not supported")));
    }
    let all = [1.0, 2.0 * c, -1.5 * c * c, 3.0 * c * c * c];
    Ok(all[..=order].to_vec())
}

/// Evaluates a coefficient list as a polynomial in `1/R`.
pub fn eval_inverse_series(coeffs: &[f64], big_r: f64) -> f64 {
    let x = 1.0 / big_r;
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Stable real roots of `a x^2 + b x + c` with `a != 0`, ascending.
/// Returns `None` for a negative discriminant.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (x1, x2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some(if x1 <= x2 { (x1, x2) } else { (x2, x1) })
}
