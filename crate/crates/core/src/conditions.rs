//! Admissibility of a synthesizer: the bite quantity
//! `σ = ∫_0^1 |λ Pψ(bx) - 1|^p dx`, sufficient conditions, the power-singular
//! threshold integral and the under-synthesis multiplier.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dictionary::{Family, SynthesizerSpec};
use crate::error::{Error, Result};
use crate::numerics::quad::{bisect, clean_breakpoints, golden_min, integrate_pieces, tanh_sinh};
use crate::numerics::LatticeConfig;

const SIGMA_TOL: f64 = 1e-12;
/// `σ` within this of 1 counts as `σ = 1`, beyond quadrature accuracy.
pub const SIGMA_MARGIN: f64 = 1e-9;
const CROSSING_SAMPLES: usize = 256;
const CELL_SAMPLES: usize = 1024;

/// Search window for `|λ|`.
pub const LAMBDA_WINDOW: (f64, f64) = (1e-3, 1e3);
/// Values of `min_t F(t) - 1` in `[-TACHEV_BAND, 0)` are reported as boundary cases.
pub const TACHEV_BAND: f64 = 1e-3;
/// Margin for the strict inequality of the quadratic condition.
pub const QUADRATIC_MARGIN: f64 = 1e-9;

fn cell_breakpoints(psi: &SynthesizerSpec, period: f64) -> Vec<f64> {
    let pts = psi
        .breakpoints()
        .into_iter()
        .map(|x| (x / period).rem_euclid(1.0))
        .collect();
    clean_breakpoints(pts, 0.0, 1.0)
}

/// `η(x) = P_{period}ψ(period·x)` on `[0, 1)`.
fn eta(psi: &SynthesizerSpec, period: f64, x: f64) -> Complex64 {
    psi.periodized(period, period * x)
}

/// Adds the points where the real function `g` changes sign inside each piece.
fn add_crossings<G: Fn(f64) -> f64>(g: G, pts: &[f64]) -> Vec<f64> {
    let mut out = pts.to_vec();
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let step = (hi - lo) / CROSSING_SAMPLES as f64;
        let mut x0 = lo + 0.5 * step;
        let mut g0 = g(x0);
        for i in 1..CROSSING_SAMPLES {
            let x1 = lo + (i as f64 + 0.5) * step;
            let g1 = g(x1);
            if g0 != 0.0 && g1 != 0.0 && (g0 < 0.0) != (g1 < 0.0) {
                out.push(bisect(&g, x0, x1));
            }
            x0 = x1;
            g0 = g1;
        }
    }
    clean_breakpoints(out, 0.0, 1.0)
}

fn sigma_with_period(psi: &SynthesizerSpec, p: f64, period: f64, lambda: Complex64) -> f64 {
    if lambda == Complex64::new(0.0, 0.0) {
        return 1.0;
    }
    let mut pts = cell_breakpoints(psi, period);
    if psi.is_real() && lambda.im == 0.0 && !psi.is_piecewise_constant() {
        pts = add_crossings(|x| lambda.re * eta(psi, period, x).re - 1.0, &pts);
    }
    integrate_pieces(|x| (lambda * eta(psi, period, x) - 1.0).norm().powf(p), &pts, SIGMA_TOL)
}

/// `∫_0^1 |λ Pψ(bx) - 1|^p dx`.
pub fn bite_sigma(psi: &SynthesizerSpec, cfg: &LatticeConfig, lambda: Complex64) -> Result<f64> {
    psi.validate(cfg.p())?;
    Ok(sigma_with_period(psi, cfg.p(), cfg.b(), lambda))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaSearch {
    pub lambda: Complex64Json,
    pub sigma: f64,
    /// The best `|λ|` sits on the edge of the search window.
    pub on_window_boundary: bool,
}

impl LambdaSearch {
    pub fn lambda(&self) -> Complex64 {
        self.lambda.into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Complex64Json {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Complex64Json {
    fn from(z: Complex64) -> Self {
        Complex64Json { re: z.re, im: z.im }
    }
}

impl From<Complex64Json> for Complex64 {
    fn from(z: Complex64Json) -> Self {
        Complex64::new(z.re, z.im)
    }
}

fn best_of(psi: &SynthesizerSpec, p: f64, period: f64, cands: Vec<(f64, f64)>) -> (f64, f64, f64) {
    let sig: Vec<f64> = cands
        .par_iter()
        .map(|&(lr, th)| sigma_with_period(psi, p, period, Complex64::from_polar(10f64.powf(lr), th)))
        .collect();
    let mut best = (cands[0].0, cands[0].1, sig[0]);
    for (c, s) in cands.iter().zip(sig) {
        if s < best.2 {
            best = (c.0, c.1, s);
        }
    }
    best
}

fn search_lambda(psi: &SynthesizerSpec, p: f64, period: f64) -> LambdaSearch {
    let (lo, hi) = (LAMBDA_WINDOW.0.log10(), LAMBDA_WINDOW.1.log10());
    let skip_phase = psi.is_nonnegative();
    let n_r = 61;
    let n_th = if skip_phase { 1 } else { 16 };
    let dr = (hi - lo) / (n_r - 1) as f64;
    let dth = 2.0 * PI / 16.0;
    let mut cands = Vec::with_capacity(n_r * n_th);
    for i in 0..n_r {
        // exact powers of ten on the coarse grid
        let lr = (i as f64 - (n_r - 1) as f64 / 2.0) / ((n_r - 1) as f64 / (hi - lo));
        for t in 0..n_th {
            cands.push((lr, t as f64 * dth));
        }
    }
    let mut best = best_of(psi, p, period, cands);

    let mut span_r = dr;
    let mut span_th = dth;
    for _ in 0..2 {
        let mut cands = vec![(best.0, best.1)];
        for i in -10..=10 {
            let lr = (best.0 + span_r * i as f64 / 10.0).clamp(lo, hi);
            if skip_phase {
                cands.push((lr, 0.0));
            } else {
                for t in -10..=10 {
                    cands.push((lr, best.1 + span_th * t as f64 / 10.0));
                }
            }
        }
        best = best_of(psi, p, period, cands);
        span_r /= 10.0;
        span_th /= 10.0;
    }
    let lambda = Complex64::from_polar(10f64.powf(best.0), best.1);
    let on_window_boundary = best.0 <= lo + 1e-12 || best.0 >= hi - 1e-12;
    LambdaSearch { lambda: lambda.into(), sigma: best.2, on_window_boundary }
}

/// Coarse-to-fine search for the `λ` minimizing `σ`.
pub fn find_lambda(psi: &SynthesizerSpec, cfg: &LatticeConfig) -> Result<LambdaSearch> {
    psi.validate(cfg.p())?;
    Ok(search_lambda(psi, cfg.p(), cfg.b()))
}

/// One of the three sufficient conditions.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub holds: bool,
    pub applicable: bool,
    pub witness: BTreeMap<String, f64>,
    pub note: String,
}

impl ConditionCheck {
    fn not_applicable(note: impl Into<String>) -> Self {
        ConditionCheck { holds: false, applicable: false, witness: BTreeMap::new(), note: note.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub synthesizer: serde_json::Value,
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub lambda_star: Option<Complex64Json>,
    pub lambda_on_window_boundary: bool,
    pub condition_a: ConditionCheck,
    pub condition_b: ConditionCheck,
    pub condition_c: ConditionCheck,
    pub tachev: Option<TachevReport>,
    pub multiplier_beta: Option<u32>,
    pub notes: Vec<String>,
}

impl AdmissibilityReport {
    /// `σ < 1`, or one of the sufficient conditions.
    pub fn admissible(&self) -> bool {
        self.sigma < 1.0 - SIGMA_MARGIN || self.condition_a.holds || self.condition_b.holds || self.condition_c.holds
    }

    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        v["admissible"] = serde_json::Value::Bool(self.admissible());
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Evaluates the sufficient conditions and the bite search for `ψ`.
pub fn sufficient_conditions(psi: &SynthesizerSpec, cfg: &LatticeConfig) -> Result<AdmissibilityReport> {
    psi.validate(cfg.p())?;
    let p = cfg.p();
    let b = cfg.b();
    let mut notes = Vec::new();

    let integral = psi.integral();
    let l1 = integral.map(|_| psi.integrate(|v| v.norm()));
    let tol_zero = 1e-9 * l1.unwrap_or(0.0).max(f64::MIN_POSITIVE);

    let condition_a = match integral {
        None => ConditionCheck::not_applicable("ψ is not integrable"),
        Some(i) => {
            let mut w = BTreeMap::new();
            w.insert("integral_re".into(), i.re);
            w.insert("integral_im".into(), i.im);
            w.insert("l1_norm".into(), l1.unwrap_or(0.0));
            let holds = i.norm() > tol_zero;
            if !holds {
                notes.push("∫ψ = 0: the integral obstruction rules out admissibility at p = 1".into());
            }
            ConditionCheck { holds, applicable: true, witness: w, note: String::new() }
        }
    };

    let samples: Vec<Complex64> = (0..CELL_SAMPLES).map(|i| eta(psi, b, i as f64 / CELL_SAMPLES as f64)).collect();
    let eta_max = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let scale_ref = (0..CELL_SAMPLES)
        .map(|i| psi.periodized_abs(b, b * i as f64 / CELL_SAMPLES as f64))
        .fold(0.0, f64::max);
    let nontrivial = eta_max > 1e-9 * scale_ref.max(f64::MIN_POSITIVE);

    let condition_b = if p >= 1.0 {
        ConditionCheck::not_applicable("requires p < 1")
    } else if let Some(i) = integral {
        let (below, above) = if psi.is_real() { psi.bounds() } else { (false, false) };
        let mut w = BTreeMap::new();
        w.insert("integral_abs".into(), i.norm());
        w.insert("periodization_max_abs".into(), eta_max);
        w.insert("bounded_below".into(), below as u8 as f64);
        w.insert("bounded_above".into(), above as u8 as f64);
        let mut note = String::new();
        if !psi.is_real() {
            note = "Pψ is not real-valued".into();
        } else if !(below && above) {
            note = format!("unbounded {} (not applicable on that side)", if below { "above" } else { "below" });
        }
        let holds = i.norm() <= tol_zero && psi.is_real() && nontrivial && (below || above);
        ConditionCheck { holds, applicable: true, witness: w, note }
    } else {
        ConditionCheck::not_applicable("ψ is not integrable")
    };

    let condition_c = if p >= 1.0 {
        ConditionCheck::not_applicable("requires p < 1")
    } else if psi.integrability_limit() <= 2.0 {
        ConditionCheck::not_applicable("Pψ is not square integrable on the cell")
    } else {
        let pts = cell_breakpoints(psi, b);
        let abs2 = integrate_pieces(|x| eta(psi, b, x).norm_sqr(), &pts, SIGMA_TOL);
        let sq_re = integrate_pieces(|x| { let v = eta(psi, b, x); v.re * v.re - v.im * v.im }, &pts, SIGMA_TOL);
        let sq_im = integrate_pieces(|x| { let v = eta(psi, b, x); 2.0 * v.re * v.im }, &pts, SIGMA_TOL);
        let lhs = p * abs2;
        let rhs = (2.0 - p) * Complex64::new(sq_re, sq_im).norm();
        let mut w = BTreeMap::new();
        w.insert("p_int_abs_sq".into(), lhs);
        w.insert("two_minus_p_abs_int_sq".into(), rhs);
        let holds = nontrivial && lhs < rhs - QUADRATIC_MARGIN * rhs.max(1.0);
        ConditionCheck { holds, applicable: true, witness: w, note: String::new() }
    };

    let search = search_lambda(psi, p, b);
    if search.on_window_boundary {
        notes.push("best |λ| lies on the edge of the search window".into());
    }
    let tachev = match psi.family() {
        Family::PowerSingular { beta } if b == 1.0 && psi.shift() == 0.0 && p < 1.0 => Some(tachev_classify(*beta, p)?),
        _ => None,
    };
    let multiplier_beta = if integral.is_some() { undersynth_multiplier(psi, cfg, 8)? } else { None };

    Ok(AdmissibilityReport {
        synthesizer: psi.to_json(),
        p,
        a: cfg.a(),
        b,
        sigma: search.sigma,
        lambda_star: (search.sigma < 1.0).then_some(search.lambda),
        lambda_on_window_boundary: search.on_window_boundary,
        condition_a,
        condition_b,
        condition_c,
        tachev,
        multiplier_beta,
        notes,
    })
}

fn check_tachev_domain(beta: f64, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("p must lie in (0, 1] (got {p})")));
    }
    if !(beta > 0.0 && beta * p < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0, 1/p) = (0, {}) (got {beta})", 1.0 / p)));
    }
    Ok(())
}

/// `F(t) - 1` where `F(t) = ∫_0^1 |1 - (tx)^{-β}|^p dx`.
///
/// For `t > 1` this is evaluated as `G(t)/t` with `G(t) = ∫_0^t (|1 - y^{-β}|^p - 1) dy`,
/// so its sign survives even when it is far below rounding of `F` itself.
pub fn tachev_excess(t: f64, beta: f64, p: f64) -> Result<f64> {
    check_tachev_domain(beta, p)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive (got {t})")));
    }
    const TOL: f64 = 1e-14;
    if t <= 1.0 {
        // (tx)^{-β} ≥ 1 on the whole interval
        let f = tanh_sinh(|x| ((t * x).powf(-beta) - 1.0).powf(p), 0.0, 1.0, TOL);
        return Ok(f - 1.0);
    }
    let head = tanh_sinh(|y| (y.powf(-beta) - 1.0).powf(p) - 1.0, 0.0, 1.0, TOL);
    // y = e^u on [1, t]; (1 - ε)^p - 1 computed without cancellation
    let tail = tanh_sinh(
        |u| u.exp() * (p * (-(-beta * u).exp()).ln_1p()).exp_m1(),
        0.0,
        t.ln(),
        TOL,
    );
    Ok((head + tail) / t)
}

/// `F(t) = ∫_0^1 |1 - (tx)^{-β}|^p dx`.
pub fn tachev_f(t: f64, beta: f64, p: f64) -> Result<f64> {
    Ok(1.0 + tachev_excess(t, beta, p)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TachevClass {
    Admissible,
    Inadmissible,
    Boundary,
}

impl TachevClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            TachevClass::Admissible => "admissible",
            TachevClass::Inadmissible => "inadmissible",
            TachevClass::Boundary => "boundary",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TachevReport {
    pub beta: f64,
    pub p: f64,
    pub threshold: f64,
    /// From comparing `β` with `2/(p+1)`.
    pub class: TachevClass,
    pub t_min: f64,
    /// `min_t F(t) - 1` over the sweep.
    pub min_excess: f64,
    pub numeric: TachevClass,
    pub agrees: bool,
}

/// Default sweep range of `t` for the numeric cross-check.
pub const TACHEV_T_RANGE: (f64, f64) = (1e-2, 1e12);

/// Minimizes `F(t) - 1` over log-spaced `t` in `range`, then refines. Returns `(t, F(t) - 1)`.
pub fn tachev_min(beta: f64, p: f64, range: (f64, f64), per_decade: usize) -> Result<(f64, f64)> {
    check_tachev_domain(beta, p)?;
    let (lo, hi) = (range.0.log10(), range.1.log10());
    if !(hi > lo) || per_decade == 0 {
        return Err(Error::InvalidParameter("empty t range".into()));
    }
    let n = ((hi - lo) * per_decade as f64).ceil() as usize + 1;
    let logs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let vals = logs
        .par_iter()
        .map(|&l| tachev_excess(10f64.powf(l), beta, p))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for i in 1..n {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    let a = logs[best.saturating_sub(1)];
    let b = logs[(best + 1).min(n - 1)];
    let (l, v) = golden_min(|l| tachev_excess(10f64.powf(l), beta, p).unwrap_or(f64::INFINITY), a, b, 60);
    if v < vals[best] {
        Ok((10f64.powf(l), v))
    } else {
        Ok((10f64.powf(logs[best]), vals[best]))
    }
}

/// Threshold classification of `x^{-β} 1_{[0,1)}`, cross-checked by a sweep of `F`.
pub fn tachev_classify(beta: f64, p: f64) -> Result<TachevReport> {
    tachev_classify_on(beta, p, TACHEV_T_RANGE, 8)
}

/// As [`tachev_classify`] with an explicit sweep of `t`.
pub fn tachev_classify_on(beta: f64, p: f64, range: (f64, f64), per_decade: usize) -> Result<TachevReport> {
    check_tachev_domain(beta, p)?;
    let threshold = 2.0 / (p + 1.0);
    let class = if beta < threshold { TachevClass::Admissible } else { TachevClass::Inadmissible };
    let (t_min, min_excess) = tachev_min(beta, p, range, per_decade)?;
    let numeric = if min_excess < -TACHEV_BAND {
        TachevClass::Admissible
    } else if min_excess >= 0.0 {
        TachevClass::Inadmissible
    } else {
        TachevClass::Boundary
    };
    let agrees = numeric == TachevClass::Boundary || numeric == class;
    Ok(TachevReport { beta, p, threshold, class, t_min, min_excess, numeric, agrees })
}

/// Smallest `β ≤ beta_max` whose periodization `P_{bβ}ψ` is nontrivial.
pub fn undersynth_multiplier(psi: &SynthesizerSpec, cfg: &LatticeConfig, beta_max: u32) -> Result<Option<u32>> {
    psi.validate(cfg.p())?;
    if psi.integral().is_none() {
        return Err(Error::UnsupportedSynthesizer(format!("{} is not integrable", psi.name())));
    }
    for m in 1..=beta_max {
        let period = cfg.b() * m as f64;
        let xs = (0..CELL_SAMPLES).map(|i| period * i as f64 / CELL_SAMPLES as f64);
        let (mx, reference) = xs.fold((0.0f64, 0.0f64), |(mx, r), x| {
            (mx.max(psi.periodized(period, x).norm()), r.max(psi.periodized_abs(period, x)))
        });
        if reference > 0.0 && mx > 1e-9 * reference {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// `σ` of the synthesizer with lattice step `b·β`.
pub fn bite_sigma_multiplied(psi: &SynthesizerSpec, cfg: &LatticeConfig, beta: u32, lambda: Complex64) -> Result<f64> {
    psi.validate(cfg.p())?;
    Ok(sigma_with_period(psi, cfg.p(), cfg.b() * beta as f64, lambda))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PathPoint {
    pub t: f64,
    pub sigma: f64,
    /// `(1-t)^p σ(ψ)`
    pub predicted: f64,
    /// Relative error of `σ_t^{1/p}` against `(1-t) σ(ψ)^{1/p}`.
    pub rel_err: f64,
}

/// `ψ_t = (1-t)ψ + t b^{-1} 1_{[0,b)}`.
pub fn path_synthesizer(psi: &SynthesizerSpec, cfg: &LatticeConfig, t: f64) -> Result<SynthesizerSpec> {
    SynthesizerSpec::combination(vec![(1.0 - t, psi.clone()), (t, SynthesizerSpec::normalized_indicator(cfg.b())?)])
}

/// `σ(ψ_t)` with `λ = 1` at `count` uniformly spaced `t ∈ [0, 1]`.
pub fn path_demo(psi: &SynthesizerSpec, cfg: &LatticeConfig, count: usize) -> Result<Vec<PathPoint>> {
    let p = cfg.p();
    let one = Complex64::new(1.0, 0.0);
    let base = bite_sigma(psi, cfg, one)?;
    let n = count.max(2);
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let sigma = bite_sigma(&path_synthesizer(psi, cfg, t)?, cfg, one)?;
            let want = (1.0 - t) * base.powf(1.0 / p);
            let got = sigma.powf(1.0 / p);
            let rel_err = if want > 0.0 { (got - want).abs() / want } else { got };
            Ok(PathPoint { t, sigma, predicted: (1.0 - t).powf(p) * base, rel_err })
        })
        .collect()
}
