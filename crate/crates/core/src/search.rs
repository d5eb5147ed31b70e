//! Bracketing searches: golden-section minimization and bisection.

/// `(sqrt(5) - 1) / 2`
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    pub x: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Golden-section search on `[lo, hi]` driven by a comparison
/// `less(x, y) == (f(x) < f(y))`.
///
/// Taking a comparison instead of function values lets callers evaluate
/// `f(x) - f(y)` in a cancellation-free form, which keeps the bracket
/// meaningful far below `sqrt(eps)` in `x`.
pub fn golden_section_by<L>(mut lo: f64, mut hi: f64, tol: f64, max_iter: usize, mut less: L) -> GoldenResult
where
    L: FnMut(f64, f64) -> bool,
{
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut iterations = 0;
    while hi - lo > tol && iterations < max_iter {
        if less(c, d) {
            hi = d;
            d = c;
            c = hi - INV_PHI * (hi - lo);
        } else {
            lo = c;
            c = d;
            d = lo + INV_PHI * (hi - lo);
        }
        iterations += 1;
    }
    GoldenResult {
        x: 0.5 * (lo + hi),
        iterations,
        converged: hi - lo <= tol,
    }
}

/// Golden-section search on plain function values.
pub fn golden_section<F>(lo: f64, hi: f64, tol: f64, max_iter: usize, mut f: F) -> GoldenResult
where
    F: FnMut(f64) -> f64,
{
    golden_section_by(lo, hi, tol, max_iter, |x, y| f(x) < f(y))
}

/// Bisection in `log` space for the first `x` in `[lo, hi]` where `pred`
/// becomes true, assuming `pred(lo) == false` and `pred(hi) == true`.
/// Returns the final bracket `(a, b)` with `b / a - 1 <= rel_tol`.
pub fn log_bisect<P>(mut lo: f64, mut hi: f64, rel_tol: f64, mut pred: P) -> (f64, f64)
where
    P: FnMut(f64) -> bool,
{
    while hi / lo - 1.0 > rel_tol {
        let mid = (lo * hi).sqrt();
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}
