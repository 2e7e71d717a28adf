//! The nonlinear analysis map `T_j`, the pointwise sampler `U_j` and quasi-interpolation.

use num_complex::Complex64;

use crate::dictionary::SynthesizerSpec;
use crate::error::{Error, Result};
use crate::numerics::{check_exponent, Signal, LatticeConfig};
use crate::stretch::{theta, theta_inv};
use crate::synthesis::{finest_resolved_scale, resolves, synthesize, CoeffSeq};

const SUP_SAMPLES: usize = 1024;

/// Analyzers must be bounded with compact support.
pub fn check_analyzer(phi: &SynthesizerSpec) -> Result<()> {
    if !phi.is_bounded() || phi.integrability_limit().is_finite() {
        return Err(Error::UnsupportedAnalyzer(format!(
            "{} is not bounded; the analyzer must be bounded with compact support",
            phi.name()
        )));
    }
    Ok(())
}

/// `‖P|φ|‖_∞` estimated on a uniform grid over one cell.
pub fn analyzer_sup(phi: &SynthesizerSpec, b: f64) -> f64 {
    (0..SUP_SAMPLES)
        .map(|i| phi.periodized_abs(b, b * i as f64 / SUP_SAMPLES as f64))
        .fold(0.0, f64::max)
}

/// `b^{1-1/p} ‖P|φ|‖_∞^{1/p}`, the operator bound of `T_j`.
pub fn analysis_bound_constant(phi: &SynthesizerSpec, cfg: &LatticeConfig) -> f64 {
    let p = cfg.p();
    cfg.b().powf(1.0 - 1.0 / p) * analyzer_sup(phi, cfg.b()).powf(1.0 / p)
}

/// `C = 2^{p(1-p)} p^{-p} b^{p-1} ‖P|φ|‖_∞`, so that
/// `d(T f, T g) ≤ C [d(f, 0) + d(0, g)]^{1-p} d(f, g)^p`.
pub fn holder_constant(phi: &SynthesizerSpec, cfg: &LatticeConfig) -> f64 {
    let p = cfg.p();
    2f64.powf(p * (1.0 - p)) * p.powf(-p) * cfg.b().powf(p - 1.0) * analyzer_sup(phi, cfg.b())
}

/// `(T_j f)_k = b Θ^{-1}( ∫ Θ(f(x)) conj(φ(a^j x - bk)) dx )`.
pub fn analyze_scale(f: &Signal, j: u32, phi: &SynthesizerSpec, cfg: &LatticeConfig) -> Result<CoeffSeq> {
    check_exponent(cfg.p())?;
    check_analyzer(phi)?;
    let grid = f.grid();
    if !resolves(phi, cfg, grid, j) {
        return Err(Error::Resolution { j, max_j: finest_resolved_scale(phi, cfg, grid) });
    }
    let mut out = CoeffSeq::new();
    let Some((first, last)) = f.nonzero_bounds() else {
        return Ok(out);
    };
    let p = cfg.p();
    let b = cfg.b();
    let aj = cfg.a().powi(j as i32);
    let (lo, hi) = phi.support();
    let k_lo = ((aj * grid.point(first) - hi) / b).floor() as i64;
    let k_hi = ((aj * grid.point(last) - lo) / b).ceil() as i64;
    let mut acc = vec![Complex64::new(0.0, 0.0); (k_hi - k_lo + 1) as usize];
    let h = grid.h();
    for i in first..=last {
        let v = f.values()[i];
        if v.norm_sqr() == 0.0 {
            continue;
        }
        let tv = theta(v, p) * h;
        let x = aj * grid.point(i);
        let k0 = ((x - hi) / b).floor() as i64;
        let k1 = ((x - lo) / b).ceil() as i64;
        for k in k0.max(k_lo)..=k1.min(k_hi) {
            let w = phi.eval(x - b * k as f64);
            if w.norm_sqr() != 0.0 {
                acc[(k - k_lo) as usize] += tv * w.conj();
            }
        }
    }
    for (idx, s) in acc.into_iter().enumerate() {
        if s.norm_sqr() != 0.0 {
            out.insert(j, k_lo + idx as i64, theta_inv(s, p) * b);
        }
    }
    Ok(out)
}

/// `(U_j f)_k = a^{-j/p} b f(a^{-j} bk)`, read at the nearest grid node.
pub fn sample_pointwise(f: &Signal, j: u32, cfg: &LatticeConfig) -> Result<CoeffSeq> {
    check_exponent(cfg.p())?;
    let mut out = CoeffSeq::new();
    let Some((first, last)) = f.nonzero_bounds() else {
        return Ok(out);
    };
    let grid = f.grid();
    let inv = cfg.a().powi(-(j as i32));
    let cell = inv * cfg.b();
    let norm = inv.powf(1.0 / cfg.p()) * cfg.b();
    let k0 = (grid.point(first) / cell).floor() as i64 - 1;
    let k1 = (grid.point(last) / cell).ceil() as i64 + 1;
    for k in k0..=k1 {
        let v = f.nearest(cell * k as f64);
        if v.norm_sqr() != 0.0 {
            out.insert(j, k, v * norm);
        }
    }
    Ok(out)
}

/// `max_{j ≤ j_max} ‖T_j f‖_{ℓ^p}`, an equivalent quasi-norm on `L^p`.
pub fn analysis_metric(f: &Signal, j_max: u32, phi: &SynthesizerSpec, cfg: &LatticeConfig) -> Result<f64> {
    let mut best: f64 = 0.0;
    for j in 0..=j_max {
        best = best.max(analyze_scale(f, j, phi, cfg)?.lp_norm(cfg.p()));
    }
    Ok(best)
}

/// `S_j T_j f` on the grid of `f`.
pub fn quasi_interp(
    f: &Signal,
    j: u32,
    psi: &SynthesizerSpec,
    phi: &SynthesizerSpec,
    cfg: &LatticeConfig,
) -> Result<Signal> {
    let coeffs = analyze_scale(f, j, phi, cfg)?;
    synthesize(&coeffs, psi, cfg, f.grid())
}
