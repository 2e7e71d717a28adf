//! Double-exponential quadrature and a few scalar solvers.

use std::f64::consts::FRAC_PI_2;

const T_MAX: f64 = 6.5;
const MIN_LEVEL: u32 = 3;
const MAX_LEVEL: u32 = 11;

/// Tanh-sinh quadrature of `f` over `(a, b)`.
///
/// The integrand is never evaluated at the endpoints, so integrable endpoint
/// singularities and cusps are fine. Interior kinks should be split out with
/// [`integrate_pieces`].
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let c = 0.5 * (a + b);
    let d = 0.5 * (b - a);

    // Sum of w(t) * (f(left) + f(right)) over nodes t = i * step, for i >= 1,
    // plus the centre term; refined by halving the step.
    let node = |t: f64| -> Option<f64> {
        let u = FRAC_PI_2 * t.sinh();
        let q = (-2.0 * u).exp();
        if q == 0.0 {
            return None;
        }
        let dist = 2.0 * d * q / (1.0 + q);
        if dist == 0.0 {
            return None;
        }
        let w = d * FRAC_PI_2 * t.cosh() * 4.0 * q / ((1.0 + q) * (1.0 + q));
        let xl = a + dist;
        let xr = b - dist;
        // next to an integrable singularity the integrand may overflow where
        // its weighted contribution is far below rounding; drop those nodes
        let mut s = 0.0;
        for x in [xl, xr] {
            if x > a && x < b {
                let v = f(x);
                if v.is_finite() {
                    s += v;
                }
            }
        }
        Some(w * s)
    };

    let mut total = d * FRAC_PI_2 * f(c);
    let mut step = 1.0;
    let mut i = 1;
    while (i as f64) * step <= T_MAX {
        match node(i as f64 * step) {
            Some(v) => total += v,
            None => break,
        }
        i += 1;
    }
    let mut estimate = total * step;

    for level in 1..=MAX_LEVEL {
        step *= 0.5;
        let mut i = 1usize;
        while (i as f64) * step <= T_MAX {
            match node(i as f64 * step) {
                Some(v) => total += v,
                None => break,
            }
            i += 2;
        }
        let next = total * step;
        let diff = (next - estimate).abs();
        estimate = next;
        if level >= MIN_LEVEL && diff <= rel_tol * next.abs() {
            break;
        }
    }
    estimate
}

/// Integrates over consecutive intervals of the sorted `points`.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], rel_tol: f64) -> f64 {
    points
        .windows(2)
        .map(|w| tanh_sinh(&f, w[0], w[1], rel_tol))
        .sum()
}

/// Sorts, drops non-finite values and collapses near-duplicates.
pub fn clean_breakpoints(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|x, y| x.total_cmp(y));
    let scale = (hi - lo).abs().max(1.0);
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for x in pts {
        match out.last() {
            Some(&last) if (x - last).abs() <= 1e-14 * scale => {}
            _ => out.push(x),
        }
    }
    if let Some(last) = out.last_mut() {
        *last = hi;
    }
    out
}

/// Bisection for a sign change of `g` on `[lo, hi]`.
pub fn bisect<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimisation of `g` on `[lo, hi]`. Returns `(x, g(x))`.
pub fn golden_min<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..iters {
        if g1 <= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - r * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + r * (hi - lo);
            g2 = g(x2);
        }
    }
    if g1 <= g2 {
        (x1, g1)
    } else {
        (x2, g2)
    }
}
