//! Single-scale Riesz property: cell pieces, the lower constant on the p-sphere,
//! injectivity of the periodized modulations and empirical two-sided bounds.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dictionary::SynthesizerSpec;
use crate::error::{Error, Result};
use crate::numerics::quad::integrate_pieces;
use crate::numerics::{lp_norm, Grid, LatticeConfig, Signal};
use crate::synthesis::{synthesize, CoeffSeq};

pub const RANK_TOL: f64 = 1e-8;
pub const REPRESENTATION_TOL: f64 = 1e-8;
pub const INJECTIVITY_TOL: f64 = 1e-6;
pub const DEFAULT_RESTARTS: usize = 64;
pub const MAX_WIDTH: usize = 32;
pub const SAMPLES_PER_CELL: usize = 64;

/// `ψ` cut into the pieces `ψ^{(ℓ)} = ψ(· + bℓ)` on one cell `[0, b)`.
#[derive(Clone, Debug)]
pub struct PieceSystem {
    pub cell: Grid,
    pub b: f64,
    /// Lattice index of the first piece.
    pub first: i64,
    pub pieces: Vec<Signal>,
    /// Positions in `pieces` of an independent subfamily.
    pub independent: Vec<usize>,
    /// `t[ℓ][m]` with `ψ^{(ℓ)} = Σ_m t[ℓ][m] ψ^{(independent[m])}`.
    pub t: Vec<Vec<Complex64>>,
    /// Gram singular values of the independent subfamily, descending.
    pub singular_values: Vec<f64>,
}

fn inner(u: &Signal, v: &Signal, h: f64) -> Complex64 {
    u.values().iter().zip(v.values()).map(|(a, b)| a * b.conj()).sum::<Complex64>() * h
}

fn gram(sel: &[&Signal], h: f64) -> DMatrix<Complex64> {
    let n = sel.len();
    DMatrix::from_fn(n, n, |r, c| inner(sel[c], sel[r], h))
}

fn gram_singular_values(g: &DMatrix<Complex64>) -> Vec<f64> {
    let mut s: Vec<f64> = g.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn split_pieces(psi: &SynthesizerSpec, cfg: &LatticeConfig, cell: &Grid) -> Result<PieceSystem> {
    if psi.is_decaying() {
        return Err(Error::UnsupportedSynthesizer(format!("{} has no compact support", psi.name())));
    }
    let b = cfg.b();
    if cell.x0().abs() > 1e-12 * b || (cell.end() - b).abs() > 1e-9 * b {
        return Err(Error::GridMismatch(format!("cell grid [{}, {}) is not [0, {b})", cell.x0(), cell.end())));
    }
    let (lo, hi) = psi.support();
    let first = (lo / b).floor() as i64;
    let last = (hi / b).ceil() as i64 - 1;
    let pieces: Vec<Signal> = (first..=last.max(first))
        .map(|l| Signal::from_fn(*cell, |x| psi.eval(x + b * l as f64)))
        .collect::<Result<_>>()?;
    let h = cell.h();

    let mut independent: Vec<usize> = Vec::new();
    let mut singular_values = Vec::new();
    for (l, piece) in pieces.iter().enumerate() {
        if piece.is_zero() {
            continue;
        }
        let mut trial = independent.clone();
        trial.push(l);
        let sel: Vec<&Signal> = trial.iter().map(|&i| &pieces[i]).collect();
        let s = gram_singular_values(&gram(&sel, h));
        if s[s.len() - 1] > RANK_TOL * s[0] {
            independent = trial;
            singular_values = s;
        }
    }

    let sel: Vec<&Signal> = independent.iter().map(|&i| &pieces[i]).collect();
    let g = gram(&sel, h);
    let mut t = Vec::with_capacity(pieces.len());
    for (l, piece) in pieces.iter().enumerate() {
        if let Some(pos) = independent.iter().position(|&i| i == l) {
            let mut row = vec![Complex64::new(0.0, 0.0); independent.len()];
            row[pos] = Complex64::new(1.0, 0.0);
            t.push(row);
            continue;
        }
        if independent.is_empty() {
            t.push(Vec::new());
            continue;
        }
        let rhs = DVector::from_fn(sel.len(), |r, _| inner(piece, sel[r], h));
        let coef = g
            .clone()
            .svd(true, true)
            .solve(&rhs, RANK_TOL * singular_values[0])
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let row: Vec<Complex64> = coef.iter().copied().collect();
        let mut resid = piece.clone();
        for (c, s) in row.iter().zip(&sel) {
            resid = resid.sub(&s.scaled(*c))?;
        }
        let scale = inner(piece, piece, h).re.sqrt().max(f64::MIN_POSITIVE);
        let r = inner(&resid, &resid, h).re.sqrt() / scale;
        if piece.is_zero() || r < REPRESENTATION_TOL {
            t.push(row);
        } else {
            return Err(Error::Numerical(format!("piece {l} is not represented by the independent pieces (residual {r:e})")));
        }
    }
    Ok(PieceSystem { cell: *cell, b, first, pieces, independent, t, singular_values })
}

impl PieceSystem {
    /// `Σ_ℓ ψ^{(ℓ)}(x - bℓ)` read back from the cell samples.
    pub fn reconstruct(&self, x: f64) -> Complex64 {
        let l = (x / self.b).floor() as i64;
        let idx = l - self.first;
        if idx < 0 || idx as usize >= self.pieces.len() {
            return Complex64::new(0.0, 0.0);
        }
        self.pieces[idx as usize].value_at(x - self.b * l as f64)
    }

    /// `min_ξ Σ_m |τ_m(ξ)|²` with `τ_m(ξ) = Σ_ℓ t_{ℓ,m} e^{2πiξℓ}`, over `count` points of `[0, 1)`.
    pub fn trig_energy_min(&self, count: usize) -> f64 {
        let m = self.independent.len();
        (0..count.max(1))
            .into_par_iter()
            .map(|i| {
                let xi = i as f64 / count.max(1) as f64;
                (0..m)
                    .map(|mm| {
                        self.t
                            .iter()
                            .enumerate()
                            .filter(|(_, row)| !row.is_empty())
                            .map(|(l, row)| row[mm] * Complex64::from_polar(1.0, 2.0 * PI * xi * (self.first + l as i64) as f64))
                            .sum::<Complex64>()
                            .norm_sqr()
                    })
                    .sum::<f64>()
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Value {
        let c = |z: &Complex64| json!([z.re, z.im]);
        json!({
            "b": self.b,
            "cell": {"x0": self.cell.x0(), "h": self.cell.h(), "n": self.cell.len()},
            "first": self.first,
            "independent": self.independent.iter().map(|&i| self.first + i as i64).collect::<Vec<_>>(),
            "singular_values": self.singular_values,
            "t": self.t.iter().map(|row| row.iter().map(c).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "pieces": self.pieces.iter().map(|s| s.values().iter().map(c).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

fn combo_norm(pieces: &[&Signal], v: &[Complex64], p: f64, h: f64) -> f64 {
    let n = pieces[0].values().len();
    let mut acc = 0.0;
    for i in 0..n {
        let s: Complex64 = pieces.iter().zip(v).map(|(pc, c)| pc.values()[i] * c).sum();
        acc += s.norm().powf(p);
    }
    (acc * h).powf(1.0 / p)
}

fn normalize(v: &mut [Complex64], p: f64) {
    let r = v.iter().map(|z| z.norm().powf(p)).sum::<f64>().powf(1.0 / p);
    if r > 0.0 {
        v.iter_mut().for_each(|z| *z /= r);
    }
}

fn descend(pieces: &[&Signal], mut v: Vec<Complex64>, p: f64, h: f64) -> f64 {
    normalize(&mut v, p);
    let mut best = combo_norm(pieces, &v, p, h);
    let mut delta = 0.5;
    let mut evals = 0usize;
    while delta > 1e-9 && evals < 20_000 {
        let mut improved = false;
        for m in 0..v.len() {
            let moves = [
                Complex64::new(1.0 + delta, 0.0),
                Complex64::new(1.0 / (1.0 + delta), 0.0),
                Complex64::from_polar(1.0, delta * PI),
                Complex64::from_polar(1.0, -delta * PI),
            ];
            for mv in moves {
                let mut w = v.clone();
                w[m] *= mv;
                normalize(&mut w, p);
                let val = combo_norm(pieces, &w, p, h);
                evals += 1;
                if val < best {
                    best = val;
                    v = w;
                    improved = true;
                }
            }
        }
        if !improved {
            delta *= 0.5;
        }
    }
    best
}

/// Smallest `‖Σ_m v_m ψ^{(m)}‖_{L^p(bC)}` found over `Σ|v_m|^p = 1`.
///
/// The search is multi-start local descent, so the value is an upper estimate of the true minimum.
pub fn lower_riesz_constant(system: &PieceSystem, p: f64, restarts: usize, seed: u64) -> f64 {
    let sel: Vec<&Signal> = system.independent.iter().map(|&i| &system.pieces[i]).collect();
    let n = sel.len();
    if n == 0 {
        return 0.0;
    }
    let h = system.cell.h();
    let vertices = (0..n).map(|m| {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[m] = Complex64::new(1.0, 0.0);
        combo_norm(&sel, &v, p, h)
    });
    let vertex_best = vertices.fold(f64::INFINITY, f64::min);
    if n == 1 {
        return vertex_best;
    }
    let results: Vec<f64> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let v: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            descend(&sel, v, p, h)
        })
        .collect();
    results.into_iter().fold(vertex_best, f64::min)
}

fn fourier(psi: &SynthesizerSpec, omega: f64) -> Complex64 {
    let pts = psi.breakpoints();
    if psi.is_piecewise_constant() {
        let mut acc = Complex64::new(0.0, 0.0);
        for w in pts.windows(2) {
            let v = psi.eval(0.5 * (w[0] + w[1]));
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let seg = if omega == 0.0 {
                Complex64::new(w[1] - w[0], 0.0)
            } else {
                let k = -2.0 * PI * omega;
                (Complex64::from_polar(1.0, k * w[1]) - Complex64::from_polar(1.0, k * w[0])) / Complex64::new(0.0, k)
            };
            acc += v * seg;
        }
        return acc;
    }
    let width = 0.25 / (omega.abs() + 1.0);
    let mut fine = Vec::new();
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
        for i in 0..n {
            fine.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
        }
    }
    fine.push(*pts.last().unwrap());
    let e = |x: f64| psi.eval(x) * Complex64::from_polar(1.0, -2.0 * PI * omega * x);
    let re = integrate_pieces(|x| e(x).re, &fine, 1e-10);
    let im = integrate_pieces(|x| e(x).im, &fine, 1e-10);
    Complex64::new(re, im)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InjectivityScan {
    pub ok: bool,
    pub worst_xi: f64,
    pub worst_value: f64,
}

/// Scans `ξ ∈ [0, 1/b)` for `max_{|ℓ| ≤ ell_max} |ψ̂(ℓ/b - ξ)|`.
pub fn injectivity_scan(psi: &SynthesizerSpec, cfg: &LatticeConfig, xi_count: usize, ell_max: u32) -> InjectivityScan {
    let b = cfg.b();
    let count = xi_count.max(1);
    let values: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let xi = i as f64 / (count as f64 * b);
            let m = (-(ell_max as i64)..=ell_max as i64)
                .map(|l| fourier(psi, l as f64 / b - xi).norm())
                .fold(0.0, f64::max);
            (xi, m)
        })
        .collect();
    let (worst_xi, worst_value) = values
        .into_iter()
        .fold((0.0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
    InjectivityScan { ok: worst_value > INJECTIVITY_TOL, worst_xi, worst_value }
}

/// `s_k = e^{-2πiξbk}` for `k = 0..width` at scale `j`.
pub fn near_kernel_sequence(xi: f64, width: usize, j: u32, cfg: &LatticeConfig) -> CoeffSeq {
    let mut c = CoeffSeq::new();
    for k in 0..width as i64 {
        c.insert(j, k, Complex64::from_polar(1.0, -2.0 * PI * xi * cfg.b() * k as f64));
    }
    c
}

/// Grid covering every atom `ψ_{j,k}`, `k ∈ [k_lo, k_hi]`, with `samples_per_cell` nodes per lattice cell.
pub fn atom_grid(psi: &SynthesizerSpec, cfg: &LatticeConfig, j: u32, k_lo: i64, k_hi: i64, samples_per_cell: usize) -> Result<Grid> {
    let b = cfg.b();
    let cell = b * cfg.a().powi(-(j as i32));
    let (lo, hi) = psi.support();
    let c0 = (lo / b).floor() as i64 + k_lo - 1;
    let c1 = (hi / b).ceil() as i64 + k_hi + 1;
    let h = cell / samples_per_cell as f64;
    Grid::new(c0 as f64 * cell, h, (c1 - c0) as usize * samples_per_cell)
}

/// `‖S_j s‖_p / ‖s‖_{ℓ^p}`
pub fn riesz_ratio(psi: &SynthesizerSpec, cfg: &LatticeConfig, s: &CoeffSeq, samples_per_cell: usize) -> Result<f64> {
    let (Some(((j, k_lo), _)), Some(((_, k_hi), _))) = (s.iter().next(), s.iter().last()) else {
        return Err(Error::InvalidParameter("empty sequence".into()));
    };
    if s.scales().len() != 1 {
        return Err(Error::InvalidParameter("riesz ratio is a single-scale quantity".into()));
    }
    let grid = atom_grid(psi, cfg, j, k_lo, k_hi, samples_per_cell)?;
    let f = synthesize(s, psi, cfg, &grid)?;
    Ok(lp_norm(&f, cfg.p())? / s.lp_norm(cfg.p()))
}

/// Min and max of `‖S_j s‖_p / ‖s‖_{ℓ^p}` over random complex Gaussian `s` of width at most 32.
pub fn empirical_riesz_bounds(psi: &SynthesizerSpec, cfg: &LatticeConfig, j: u32, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if psi.is_decaying() {
        return Err(Error::UnsupportedSynthesizer(format!("{} has no compact support", psi.name())));
    }
    psi.validate(cfg.p())?;
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let width = rng.gen_range(1..=MAX_WIDTH);
            let mut s = CoeffSeq::new();
            for k in 0..width as i64 {
                s.insert(j, k, Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            }
            riesz_ratio(psi, cfg, &s, SAMPLES_PER_CELL)
        })
        .collect::<Result<_>>()?;
    Ok(ratios.iter().fold((f64::INFINITY, 0.0), |(lo, hi), &r| (lo.min(r), hi.max(r))))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RieszRow {
    pub p: f64,
    pub j: u32,
    pub c_estimate: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub min_xi_energy: f64,
}

pub fn write_rows<W: Write>(rows: &[RieszRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "j", "C_estimate", "ratio_min", "ratio_max", "min_xi_energy"])?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            r.j.to_string(),
            r.c_estimate.to_string(),
            r.ratio_min.to_string(),
            r.ratio_max.to_string(),
            r.min_xi_energy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Cell grid `[0, b)` with `2^log2n` nodes.
pub fn cell_grid(cfg: &LatticeConfig, log2n: u32) -> Result<Grid> {
    Grid::covering(0.0, cfg.b(), log2n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> LatticeConfig {
        LatticeConfig::new(0.5, 2.0, 1.0).unwrap()
    }

    fn cell() -> Grid {
        cell_grid(&cfg(), 10).unwrap()
    }

    fn ind(lo: f64, hi: f64) -> SynthesizerSpec {
        SynthesizerSpec::indicator(lo, hi).unwrap()
    }

    #[test]
    fn indicator_is_one_piece() {
        let s = split_pieces(&ind(0.0, 1.0), &cfg(), &cell()).unwrap();
        assert_eq!(s.pieces.len(), 1);
        assert_eq!(s.independent, vec![0]);
        assert_eq!(s.t, vec![vec![Complex64::new(1.0, 0.0)]]);
        assert_eq!(lower_riesz_constant(&s, 0.5, 8, 0), 1.0);
    }

    #[test]
    fn haar_is_one_piece() {
        let s = split_pieces(&SynthesizerSpec::haar(), &cfg(), &cell()).unwrap();
        assert_eq!(s.pieces.len(), 1);
        assert_eq!(s.independent, vec![0]);
        assert!((lower_riesz_constant(&s, 0.5, 8, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn double_indicator_pieces_are_dependent() {
        let s = split_pieces(&ind(0.0, 2.0), &cfg(), &cell()).unwrap();
        assert_eq!(s.pieces.len(), 2);
        assert_eq!(s.independent, vec![0]);
        assert!((s.t[1][0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(lower_riesz_constant(&s, 0.5, 8, 0), 1.0);
    }

    #[test]
    fn pieces_reconstruct() {
        let psi = SynthesizerSpec::bspline(3).unwrap();
        let s = split_pieces(&psi, &cfg(), &cell()).unwrap();
        assert_eq!(s.pieces.len(), 3);
        let h = cell().h();
        for i in -10..3 * 1024 + 10 {
            let x = i as f64 * h;
            assert!((s.reconstruct(x) - psi.eval(x)).norm() < 1e-12);
        }
    }

    #[test]
    fn disjoint_pieces_match_sphere_sweep() {
        // pieces 1 on [0, 1/2) and 2 on [1/2, 1)
        let psi = SynthesizerSpec::combination(vec![(1.0, ind(0.0, 0.5)), (2.0, ind(1.5, 2.0))]).unwrap();
        let s = split_pieces(&psi, &cfg(), &cell()).unwrap();
        assert_eq!(s.independent.len(), 2);
        let c = lower_riesz_constant(&s, 0.5, 16, 1);
        // sweep of the p-sphere |v1|^p + |v2|^p = 1
        let oracle = (0..=10_000)
            .map(|i| {
                let u = i as f64 / 10_000.0;
                let (v1, v2) = (u * u, (1.0 - u) * (1.0 - u));
                (0.5 * v1.sqrt() + 0.5 * (2.0 * v2).sqrt()).powi(2)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((c - oracle).abs() < 1e-9, "{c} vs {oracle}");
    }

    #[test]
    fn overlapping_pieces_search_phase() {
        // overlapping independent pieces 1 + x and 1 - x on [0, 1)
        let psi = SynthesizerSpec::combination(vec![(1.0, ind(0.0, 1.0)), (1.0, SynthesizerSpec::bspline(2).unwrap())]).unwrap();
        let s = split_pieces(&psi, &cfg(), &cell()).unwrap();
        let c = lower_riesz_constant(&s, 0.5, 32, 3);
        assert!(c > 0.0 && c.is_finite());
        let again = lower_riesz_constant(&s, 0.5, 32, 3);
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_decaying() {
        assert!(split_pieces(&SynthesizerSpec::mexican_hat(), &cfg(), &cell()).is_err());
    }

    #[test]
    fn fourier_matches_closed_form() {
        // indicator of [0,1): |ψ̂(ω)| = |sin(πω)/(πω)|
        for omega in [0.0, 0.3, 1.7, -2.5] {
            let f = fourier(&ind(0.0, 1.0), omega).norm();
            let e = if omega == 0.0 { 1.0 } else { ((PI * omega).sin() / (PI * omega)).abs() };
            assert!((f - e).abs() < 1e-12);
        }
        let hat = SynthesizerSpec::bspline(2).unwrap();
        for omega in [0.0, 0.3, 1.7] {
            let e = if omega == 0.0 { 1.0 } else { ((PI * omega).sin() / (PI * omega)).powi(2) };
            assert!((fourier(&hat, omega).norm() - e).abs() < 1e-9);
        }
    }

    #[test]
    fn injectivity() {
        assert!(injectivity_scan(&ind(0.0, 1.0), &cfg(), 64, 4).ok);
        assert!(injectivity_scan(&SynthesizerSpec::haar(), &cfg(), 64, 4).ok);
        let sd = SynthesizerSpec::step_difference(ind(0.0, 1.0));
        let r = injectivity_scan(&sd, &cfg(), 64, 4);
        assert!(!r.ok);
        assert_eq!(r.worst_xi, 0.0);
        let s = split_pieces(&sd, &cfg(), &cell()).unwrap();
        assert!(s.trig_energy_min(64) < 1e-20);
        let s = split_pieces(&SynthesizerSpec::haar(), &cfg(), &cell()).unwrap();
        assert!(s.trig_energy_min(64) > 0.5);
    }

    #[test]
    fn spike_ratio_is_norm() {
        let mut s = CoeffSeq::new();
        s.insert(2, 3, Complex64::new(0.0, -2.0));
        let psi = ind(0.0, 2.0).times(Complex64::new(3.0, 0.0));
        let r = riesz_ratio(&psi, &cfg(), &s, 64).unwrap();
        assert!((r - 12.0).abs() < 1e-12, "{r}");
        // the rectangle rule loses a little at the zeros of the hat
        let psi = SynthesizerSpec::bspline(2).unwrap();
        let r = riesz_ratio(&psi, &cfg(), &s, 256).unwrap();
        let n = psi.lp_norm(0.5).unwrap();
        assert!((r - n).abs() < 1e-3 * n, "{r} vs {n}");
    }

    #[test]
    fn haar_ratios_are_one() {
        for j in 1..=3 {
            let (lo, hi) = empirical_riesz_bounds(&SynthesizerSpec::haar(), &cfg(), j, 50, 0).unwrap();
            assert!((lo - 1.0).abs() < 1e-9 && (hi - 1.0).abs() < 1e-9, "{lo} {hi}");
        }
    }

    #[test]
    fn telescoping_sequence_collapses() {
        let sd = SynthesizerSpec::step_difference(ind(0.0, 1.0));
        let norm = sd.lp_norm(0.5).unwrap();
        let mut prev = f64::INFINITY;
        for w in [4, 16, 64] {
            let r = riesz_ratio(&sd, &cfg(), &near_kernel_sequence(0.0, w, 1, &cfg()), 64).unwrap();
            assert!(r < prev);
            prev = r;
        }
        assert!(prev < 0.1 * norm);
        // ratio^p = 2 / w exactly
        assert!((prev - (2.0f64 / 64.0).powi(2) * 1.0).abs() < 1e-12 * norm.max(1.0) + 1e-12);
    }
}
