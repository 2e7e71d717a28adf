//! Open-mapping iteration `y_{m+1} = y_m - S_j(λ T_j y_m)` producing coefficients with `Sc ≈ f`.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::{analyze_scale, analyzer_sup, check_analyzer};
use crate::conditions::{bite_sigma, find_lambda, undersynth_multiplier, Complex64Json, SIGMA_MARGIN};
use crate::dictionary::{atom_support, SynthesizerSpec};
use crate::error::{Error, Result};
use crate::numerics::{lp_power, LatticeConfig, Signal};
use crate::synthesis::{atoms_inside, finest_resolved_scale, resolves, synthesize, CoeffSeq};

/// Relative slack on the per-step coefficient bound.
pub const STEP_COEFF_SLACK: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct DecomposeOptions {
    /// Working contraction factor; defaults to `σ + (1-σ)/4`, capped at 0.9.
    pub sigma_prime: Option<f64>,
    pub tol_rel: f64,
    pub max_iter: usize,
    pub j_min: u32,
    /// Defaults to the finest scale the grid resolves.
    pub j_max: Option<u32>,
    /// Skips the λ search.
    pub lambda: Option<Complex64>,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { sigma_prime: None, tol_rel: 1e-3, max_iter: 200, j_min: 0, j_max: None, lambda: None }
    }
}

/// Finite union of open intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    intervals: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() || intervals.iter().any(|(a, b)| a.is_nan() || b.is_nan() || a >= b) {
            return Err(Error::InvalidParameter("domain needs nonempty intervals (lo, hi) with lo < hi".into()));
        }
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(Domain { intervals })
    }

    pub fn whole_line() -> Self {
        Domain { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    /// `[lo, hi]` lies inside one of the open intervals.
    pub fn contains(&self, lo: f64, hi: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < lo && hi < b)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub m: usize,
    pub j: u32,
    /// `d_p(0, y_{m+1}) / d_p(0, y_m)`
    pub ratio: f64,
    /// `d_p(0, y_{m+1})`
    pub residual_power: f64,
}

#[derive(Clone, Debug)]
pub struct StepParams<'a> {
    pub psi: &'a SynthesizerSpec,
    pub phi: &'a SynthesizerSpec,
    pub cfg: &'a LatticeConfig,
    pub lambda: Complex64,
    pub sigma_prime: f64,
    pub j_min: u32,
    pub j_max: u32,
    pub domain: Option<&'a Domain>,
}

#[derive(Clone, Debug)]
pub struct Step {
    pub j: u32,
    pub x: CoeffSeq,
    pub y_next: Signal,
    pub ratio: f64,
}

/// Smallest `j ∈ [j_min, j_max]` with `d_p(S_j(λT_j y), y) ≤ σ' d_p(0, y)`.
pub fn contraction_step(y: &Signal, params: &StepParams) -> Result<Step> {
    let cfg = params.cfg;
    let p = cfg.p();
    let d_y = lp_power(y, p)?;
    if d_y <= 0.0 {
        return Err(Error::InvalidParameter("contraction step needs a nonzero residual".into()));
    }
    let grid = y.grid();
    let coeff_cap = (params.lambda.norm() * cfg.b().powf(1.0 - 1.0 / p)).powf(p)
        * analyzer_sup(params.phi, cfg.b())
        * d_y
        * (1.0 + STEP_COEFF_SLACK);
    let mut best: (f64, Option<u32>) = (f64::INFINITY, None);
    let mut eligible = 0usize;
    for j in params.j_min..=params.j_max {
        if !resolves(params.psi, cfg, grid, j) || !resolves(params.phi, cfg, grid, j) {
            continue;
        }
        let x = analyze_scale(y, j, params.phi, cfg)?.scaled(params.lambda);
        if let Some(dom) = params.domain {
            let kept = x.filtered(|jj, k, _| {
                let (lo, hi) = atom_support(params.psi, cfg, jj, k);
                dom.contains(lo, hi)
            });
            if kept.len() < x.len() {
                continue;
            }
        }
        if !atoms_inside(&x, params.psi, cfg, grid) {
            continue;
        }
        eligible += 1;
        let s = synthesize(&x, params.psi, cfg, grid)?;
        let y_next = y.sub(&s)?;
        let ratio = lp_power(&y_next, p)? / d_y;
        if ratio < best.0 {
            best = (ratio, Some(j));
        }
        if ratio <= params.sigma_prime {
            if x.lp_power(p) > coeff_cap {
                return Err(Error::Numerical(format!(
                    "coefficient bound violated at j={j}: {} > {coeff_cap}",
                    x.lp_power(p)
                )));
            }
            return Ok(Step { j, x, y_next, ratio });
        }
    }
    if eligible == 0 && params.domain.is_some() {
        return Err(Error::AdaptationFailure(format!(
            "no scale in [{}, {}] keeps every coefficient adapted to the domain",
            params.j_min, params.j_max
        )));
    }
    Err(Error::ContractionFailure {
        j_min: params.j_min,
        j_max: params.j_max,
        sigma_prime: params.sigma_prime,
        best_ratio: best.0,
        best_j: best.1,
        completed: 0,
        trace: Vec::new(),
    })
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub coeffs: CoeffSeq,
    /// `d_p(Sc, f)`
    pub residual_power: f64,
    /// `Σ |c|^p`
    pub coeff_power: f64,
    /// `(1-σ')^{-1} |λ|^p b^{p-1} ‖P|φ|‖_∞ d_p(0, f)`
    pub bound: f64,
    pub iterations: usize,
    pub scale_trace: Vec<TraceEntry>,
    pub f_power: f64,
    pub sigma: f64,
    pub sigma_prime: f64,
    pub lambda: Complex64,
    pub tol_rel: f64,
    /// Translation multiplier of an under-synthesized run (1 otherwise).
    pub multiplier: u32,
    pub converged: bool,
}

#[derive(Serialize)]
struct Header<'a> {
    converged: bool,
    iterations: usize,
    f_power: f64,
    residual_power: f64,
    coeff_power: f64,
    bound: f64,
    sigma: f64,
    sigma_prime: f64,
    lambda: Complex64Json,
    tol_rel: f64,
    multiplier_beta: u32,
    num_coeffs: usize,
    trace: &'a [TraceEntry],
}

impl DecompositionResult {
    fn empty(f_power: f64, sigma: f64, sigma_prime: f64, lambda: Complex64, tol_rel: f64) -> Self {
        DecompositionResult {
            coeffs: CoeffSeq::new(),
            residual_power: 0.0,
            coeff_power: 0.0,
            bound: 0.0,
            iterations: 0,
            scale_trace: Vec::new(),
            f_power,
            sigma,
            sigma_prime,
            lambda,
            tol_rel,
            multiplier: 1,
            converged: true,
        }
    }

    pub fn header_json(&self) -> Result<String> {
        let h = Header {
            converged: self.converged,
            iterations: self.iterations,
            f_power: self.f_power,
            residual_power: self.residual_power,
            coeff_power: self.coeff_power,
            bound: self.bound,
            sigma: self.sigma,
            sigma_prime: self.sigma_prime,
            lambda: self.lambda.into(),
            tol_rel: self.tol_rel,
            multiplier_beta: self.multiplier,
            num_coeffs: self.coeffs.len(),
            trace: &self.scale_trace,
        };
        Ok(serde_json::to_string_pretty(&h)?)
    }

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "j", "residual_power"])?;
        for t in &self.scale_trace {
            w.write_record([t.m.to_string(), t.j.to_string(), t.residual_power.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn default_sigma_prime(sigma: f64) -> f64 {
    let s = sigma + 0.25 * (1.0 - sigma);
    if sigma < 0.9 {
        s.min(0.9)
    } else {
        s
    }
}

fn run(
    f: &Signal,
    psi: &SynthesizerSpec,
    phi: &SynthesizerSpec,
    cfg: &LatticeConfig,
    opts: &DecomposeOptions,
    domain: Option<&Domain>,
) -> Result<DecompositionResult> {
    let p = cfg.p();
    psi.validate(p)?;
    check_analyzer(phi)?;
    if !(opts.tol_rel > 0.0 && opts.tol_rel < 1.0) {
        return Err(Error::InvalidParameter(format!("tolerance must lie in (0, 1) (got {})", opts.tol_rel)));
    }
    let (lambda, sigma) = match opts.lambda {
        Some(l) => (l, bite_sigma(psi, cfg, l)?),
        None => {
            let s = find_lambda(psi, cfg)?;
            (s.lambda(), s.sigma)
        }
    };
    if sigma >= 1.0 - SIGMA_MARGIN {
        return Err(Error::Inadmissible { sigma });
    }
    let sigma_prime = opts.sigma_prime.unwrap_or_else(|| default_sigma_prime(sigma));
    if !(sigma < sigma_prime && sigma_prime < 1.0) {
        return Err(Error::InvalidParameter(format!("need sigma = {sigma} < sigma' = {sigma_prime} < 1")));
    }
    let grid = f.grid();
    let finest = finest_resolved_scale(psi, cfg, grid)
        .zip(finest_resolved_scale(phi, cfg, grid))
        .map(|(a, b)| a.min(b));
    let j_max = match (opts.j_max, finest) {
        (_, None) => return Err(Error::Resolution { j: opts.j_min, max_j: None }),
        (Some(j), Some(fj)) if j > fj => return Err(Error::Resolution { j, max_j: Some(fj) }),
        (Some(j), _) => j,
        (None, Some(fj)) => fj,
    };
    if opts.j_min > j_max {
        return Err(Error::InvalidParameter(format!("j_min = {} exceeds j_max = {j_max}", opts.j_min)));
    }

    let f_power = lp_power(f, p)?;
    let mut result = DecompositionResult::empty(f_power, sigma, sigma_prime, lambda, opts.tol_rel);
    result.bound = (lambda.norm() * cfg.b().powf(1.0 - 1.0 / p)).powf(p) * analyzer_sup(phi, cfg.b()) * f_power
        / (1.0 - sigma_prime);
    if f_power == 0.0 {
        return Ok(result);
    }
    if let Some(dom) = domain {
        let (lo, hi) = f.support().expect("nonzero signal has a support");
        if !dom.contains(lo, hi) {
            return Err(Error::AdaptationFailure(format!(
                "support [{lo}, {hi}] of f is not at positive distance from the domain boundary"
            )));
        }
    }

    let mut y = f.clone();
    let mut residual = f_power;
    let mut j_min = opts.j_min;
    while residual > opts.tol_rel * f_power && result.iterations < opts.max_iter {
        let params = StepParams { psi, phi, cfg, lambda, sigma_prime, j_min, j_max, domain };
        let step = match contraction_step(&y, &params) {
            Ok(s) => s,
            Err(Error::ContractionFailure { j_min, j_max, sigma_prime, best_ratio, best_j, .. }) => {
                return Err(Error::ContractionFailure {
                    j_min,
                    j_max,
                    sigma_prime,
                    best_ratio,
                    best_j,
                    completed: result.iterations,
                    trace: result.scale_trace,
                })
            }
            Err(e) => return Err(e),
        };
        result.coeffs.merge(&step.x);
        residual = lp_power(&step.y_next, p)?;
        result.scale_trace.push(TraceEntry { m: result.iterations, j: step.j, ratio: step.ratio, residual_power: residual });
        result.iterations += 1;
        j_min = step.j;
        y = step.y_next;
    }
    result.residual_power = residual;
    result.coeff_power = result.coeffs.lp_power(p);
    result.converged = residual <= opts.tol_rel * f_power;
    Ok(result)
}

/// Decomposes `f` over the affine system of `ψ`.
pub fn decompose(
    f: &Signal,
    psi: &SynthesizerSpec,
    phi: &SynthesizerSpec,
    cfg: &LatticeConfig,
    opts: &DecomposeOptions,
) -> Result<DecompositionResult> {
    run(f, psi, phi, cfg, opts, None)
}

/// As [`decompose`], keeping only atoms whose support lies inside `domain`.
pub fn decompose_adapted(
    f: &Signal,
    domain: &Domain,
    psi: &SynthesizerSpec,
    phi: &SynthesizerSpec,
    cfg: &LatticeConfig,
    opts: &DecomposeOptions,
) -> Result<DecompositionResult> {
    if psi.is_decaying() {
        return Err(Error::UnsupportedSynthesizer(format!(
            "adapted decompositions need a compactly supported synthesizer, {} only decays",
            psi.name()
        )));
    }
    run(f, psi, phi, cfg, opts, Some(domain))
}

/// Decomposes with translation step `bβ`, `β` the smallest multiplier with `P_{bβ}ψ ≢ 0`,
/// and re-indexes the result onto the `b`-lattice.
pub fn decompose_undersynth(
    f: &Signal,
    psi: &SynthesizerSpec,
    cfg: &LatticeConfig,
    opts: &DecomposeOptions,
    beta_max: u32,
) -> Result<DecompositionResult> {
    if !psi.is_real() {
        return Err(Error::UnsupportedSynthesizer("under-synthesis needs a real-valued synthesizer".into()));
    }
    let (below, above) = psi.bounds();
    if !(below || above) {
        return Err(Error::UnsupportedSynthesizer("under-synthesis needs a one-sided bound".into()));
    }
    let Some(beta) = undersynth_multiplier(psi, cfg, beta_max)? else {
        return Err(Error::Inadmissible { sigma: 1.0 });
    };
    let wide = cfg.with_b(cfg.b() * beta as f64)?;
    let phi = SynthesizerSpec::normalized_indicator(wide.b())?;
    let mut r = run(f, psi, &phi, &wide, opts, None)?;
    r.coeffs = r.coeffs.dilate_index(beta as i64);
    r.multiplier = beta;
    Ok(r)
}

/// `coeff_power^{1/p} / ‖f‖_p`, the achieved equivalence constant.
pub fn atomic_ratio(f: &Signal, result: &DecompositionResult, p: f64) -> Result<f64> {
    if !result.converged {
        return Err(Error::InvalidParameter("atomic ratio needs a converged decomposition".into()));
    }
    let fp = lp_power(f, p)?;
    if fp == 0.0 {
        return Err(Error::InvalidParameter("atomic ratio of the zero signal".into()));
    }
    Ok((result.coeff_power / fp).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::atom_eval;
    use crate::numerics::{dp_distance, Grid};
    use crate::signals;

    fn cfg() -> LatticeConfig {
        LatticeConfig::new(0.5, 2.0, 1.0).unwrap()
    }

    fn ind() -> SynthesizerSpec {
        SynthesizerSpec::indicator(0.0, 1.0).unwrap()
    }

    fn phi() -> SynthesizerSpec {
        SynthesizerSpec::normalized_indicator(1.0).unwrap()
    }

    fn grid() -> Grid {
        Grid::covering(-4.0, 4.0, 13).unwrap()
    }

    fn check_invariants(f: &Signal, psi: &SynthesizerSpec, r: &DecompositionResult, c: &LatticeConfig) {
        let mut prev = r.f_power;
        for t in &r.scale_trace {
            assert!(t.residual_power <= r.sigma_prime * prev * (1.0 + 1e-12));
            prev = t.residual_power;
        }
        assert!(r.coeff_power <= r.bound * 1.01);
        let s = synthesize(&r.coeffs, psi, c, f.grid()).unwrap();
        let d = dp_distance(&s, f, c.p()).unwrap();
        // rounding floor of the p-th power metric on O(1) values
        let floor = f.grid().len() as f64 * f.grid().h() * (1e-13f64).powf(c.p());
        assert!((d - r.residual_power).abs() <= 1e-9 * r.f_power + floor, "{d} vs {}", r.residual_power);
    }

    #[test]
    fn zero_signal() {
        let f = Signal::zeros(grid());
        let r = decompose(&f, &ind(), &phi(), &cfg(), &DecomposeOptions::default()).unwrap();
        assert!(r.coeffs.is_empty());
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn zero_residual_is_rejected() {
        let psi = ind();
        let p = phi();
        let c = cfg();
        let params = StepParams { psi: &psi, phi: &p, cfg: &c, lambda: Complex64::new(1.0, 0.0), sigma_prime: 0.5, j_min: 0, j_max: 5, domain: None };
        assert!(contraction_step(&Signal::zeros(grid()), &params).is_err());
    }

    #[test]
    fn indicator_decomposes_bump() {
        let f = signals::gaussian_bump(grid());
        let r = decompose(&f, &ind(), &phi(), &cfg(), &DecomposeOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.residual_power <= 1e-3 * r.f_power);
        check_invariants(&f, &ind(), &r, &cfg());
        let ratio = atomic_ratio(&f, &r, 0.5).unwrap();
        assert!(ratio >= (1.0 - 1e-3f64).powi(2) - 1e-12);
        assert!(ratio <= (1.01 * r.bound / r.f_power).powi(2));
    }

    #[test]
    fn single_atom_meets_iteration_bound() {
        let c = cfg();
        let psi = ind();
        let f = Signal::from_fn(grid(), |x| atom_eval(&psi, &c, 3, 5, x) * 2.5).unwrap();
        let r = decompose(&f, &psi, &phi(), &c, &DecomposeOptions::default()).unwrap();
        assert!(r.converged);
        let cap = (1e-3f64.ln() / r.sigma_prime.ln()).ceil() as usize;
        assert!(r.iterations <= cap, "{} > {cap}", r.iterations);
        check_invariants(&f, &psi, &r, &c);
    }

    #[test]
    fn haar_residual_halves_per_scale() {
        // T_j of a Haar atom at its own scale vanishes, so each step moves one scale finer
        let c = cfg();
        let psi = SynthesizerSpec::haar();
        let f = Signal::from_fn(grid(), |x| atom_eval(&psi, &c, 3, 5, x)).unwrap();
        let opts = DecomposeOptions { tol_rel: 0.2, ..Default::default() };
        let r = decompose(&f, &psi, &phi(), &c, &opts).unwrap();
        for (i, t) in r.scale_trace.iter().enumerate() {
            assert_eq!(t.j, 4 + i as u32);
            assert!((t.ratio - 0.5f64.sqrt()).abs() < 1e-6);
        }
        check_invariants(&f, &psi, &r, &c);
    }

    #[test]
    fn whole_line_domain_matches_plain_run() {
        let f = signals::triangle(grid());
        let a = decompose(&f, &ind(), &phi(), &cfg(), &DecomposeOptions::default()).unwrap();
        let b = decompose_adapted(&f, &Domain::whole_line(), &ind(), &phi(), &cfg(), &DecomposeOptions::default()).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
        assert_eq!(a.scale_trace, b.scale_trace);
    }

    #[test]
    fn adapted_atoms_stay_inside() {
        let g = Grid::covering(-1.0, 3.0, 13).unwrap();
        let f = Signal::from_real_fn(g, |x| {
            let u = (x - 0.5) / 0.25;
            if u.abs() < 1.0 { (1.0 - u * u).powi(2) } else { 0.0 }
        })
        .unwrap();
        let dom = Domain::new(vec![(0.0, 1.0)]).unwrap();
        let c = cfg();
        let r = decompose_adapted(&f, &dom, &ind(), &phi(), &c, &DecomposeOptions::default()).unwrap();
        assert!(r.converged);
        for ((j, k), v) in r.coeffs.iter() {
            if v.norm() > 0.0 {
                let (lo, hi) = atom_support(&ind(), &c, j, k);
                assert!(0.0 < lo && hi < 1.0);
            }
        }
        // Haar stalls well above 1e-3 on this grid, so use a loose tolerance
        let opts = DecomposeOptions { tol_rel: 0.5, ..Default::default() };
        let r = decompose_adapted(&f, &dom, &SynthesizerSpec::haar(), &phi(), &c, &opts).unwrap();
        assert!(r.converged);
        assert!(r.coeffs.iter().all(|((j, k), _)| {
            let (lo, hi) = atom_support(&SynthesizerSpec::haar(), &c, j, k);
            0.0 < lo && hi < 1.0
        }));
    }

    #[test]
    fn touching_boundary_fails() {
        let g = Grid::covering(-1.0, 2.0, 12).unwrap();
        let f = Signal::from_real_fn(g, |x| if (0.0..0.5).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        let dom = Domain::new(vec![(0.0, 1.0)]).unwrap();
        let r = decompose_adapted(&f, &dom, &ind(), &phi(), &cfg(), &DecomposeOptions::default());
        assert!(matches!(r, Err(Error::AdaptationFailure(_))));
    }

    #[test]
    fn inadmissible_synthesizer_is_rejected() {
        let f = signals::gaussian_bump(grid());
        let sd = SynthesizerSpec::step_difference(ind());
        let r = decompose(&f, &sd, &phi(), &cfg(), &DecomposeOptions::default());
        assert!(matches!(r, Err(Error::Inadmissible { .. })));
    }

    #[test]
    fn undersynth_with_unit_multiplier_is_plain() {
        let f = signals::triangle(grid());
        let opts = DecomposeOptions { tol_rel: 0.5, ..Default::default() };
        let a = decompose(&f, &SynthesizerSpec::haar(), &phi(), &cfg(), &opts).unwrap();
        let b = decompose_undersynth(&f, &SynthesizerSpec::haar(), &cfg(), &opts, 8).unwrap();
        assert_eq!(b.multiplier, 1);
        assert_eq!(a.coeffs, b.coeffs);
    }

    #[test]
    fn undersynth_step_difference_uses_even_translates() {
        let f = signals::triangle(grid());
        let sd = SynthesizerSpec::step_difference(ind());
        let opts = DecomposeOptions { tol_rel: 0.5, ..Default::default() };
        let r = decompose_undersynth(&f, &sd, &cfg(), &opts, 8).unwrap();
        assert_eq!(r.multiplier, 2);
        assert!(r.converged);
        assert!(r.coeffs.iter().all(|((_, k), _)| k % 2 == 0));
        check_invariants(&f, &sd, &r, &cfg());
    }

    #[test]
    fn contraction_failure_reports_best_ratio() {
        let f = signals::gaussian_bump(grid());
        let opts = DecomposeOptions { j_max: Some(2), ..Default::default() };
        match decompose(&f, &SynthesizerSpec::haar(), &phi(), &cfg(), &opts) {
            Err(Error::ContractionFailure { best_ratio, .. }) => assert!(best_ratio.is_finite()),
            other => panic!("expected contraction failure, got {other:?}"),
        }
    }
}
