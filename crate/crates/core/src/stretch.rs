//! The radial stretch `Θ(z) = |z|^{p-1} z` and its inverse.

use num_complex::Complex64;

/// Slack added to both lemma bounds to absorb rounding.
pub const LEMMA_SLACK: f64 = 1e-12;

/// `Θ(z) = |z|^{p-1} z`, with `Θ(0) = 0`.
pub fn theta(z: Complex64, p: f64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        Complex64::new(0.0, 0.0)
    } else if p == 1.0 {
        z
    } else {
        z * r.powf(p - 1.0)
    }
}

/// `Θ^{-1}(w) = |w|^{1/p-1} w`.
pub fn theta_inv(w: Complex64, p: f64) -> Complex64 {
    theta(w, 1.0 / p)
}

/// `|w|^e w - |z|^e z`; for `w ≈ z` evaluated as `|w|^e (w - z) + (|w|^e - |z|^e) z`
/// to avoid cancellation.
pub fn power_map_diff(w: Complex64, z: Complex64, e: f64) -> Complex64 {
    let (rw, rz) = (w.norm(), z.norm());
    let d = w - z;
    if rw == 0.0 || rz == 0.0 || e == 0.0 || d.norm() > 0.5 * rw.max(rz) {
        return theta(w, e + 1.0) - theta(z, e + 1.0);
    }
    // |w| - |z| from (|w|² - |z|²) = Re((w - z) conj(w + z))
    let dr = (d * (w + z).conj()).re / (rw + rz);
    let gap = (e * (dr / rz).ln_1p()).exp_m1() * rz.powf(e);
    d * rw.powf(e) + z * gap
}

/// `Θw - Θz`, accurate for nearby arguments.
pub fn theta_diff(w: Complex64, z: Complex64, p: f64) -> Complex64 {
    power_map_diff(w, z, p - 1.0)
}

/// `Θ^{-1}w - Θ^{-1}z`, accurate for nearby arguments.
pub fn theta_inv_diff(w: Complex64, z: Complex64, p: f64) -> Complex64 {
    power_map_diff(w, z, 1.0 / p - 1.0)
}

/// `|Θw - Θz| ≤ 2^{1-p} |w - z|^p`.
pub fn check_holder_lemma(w: Complex64, z: Complex64, p: f64) -> bool {
    let lhs = theta_diff(w, z, p).norm();
    let rhs = 2f64.powf(1.0 - p) * (w - z).norm().powf(p);
    lhs <= rhs + LEMMA_SLACK
}

/// `|Θ^{-1}w - Θ^{-1}z| ≤ (1/p) |w - z| max(|w|, |z|)^{(1-p)/p}`.
pub fn check_lipschitz_lemma(w: Complex64, z: Complex64, p: f64) -> bool {
    let lhs = theta_inv_diff(w, z, p).norm();
    let m = w.norm().max(z.norm());
    let rhs = (w - z).norm() * m.powf((1.0 - p) / p) / p;
    lhs <= rhs + LEMMA_SLACK
}
