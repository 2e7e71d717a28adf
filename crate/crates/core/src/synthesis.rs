//! Coefficient sequences and the synthesis operator `S_j s = Σ_k s_k ψ_{j,k}`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dictionary::{atom_eval, atom_support, SynthesizerSpec};
use crate::error::{Error, Result};
use crate::numerics::{check_exponent, Grid, LatticeConfig, Signal};

/// Grid nodes required per atom cell `b a^{-j}` when sampling is not exact.
pub const OVERSAMPLING: f64 = 8.0;

const MAX_SCALE: u32 = 60;

/// Sparse coefficients indexed by `(j, k)`, kept in lexicographic order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoeffSeq {
    entries: BTreeMap<(u32, i64), Complex64>,
}

#[derive(Serialize, Deserialize)]
struct Line {
    j: u32,
    k: i64,
    re: f64,
    im: f64,
}

impl CoeffSeq {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, j: u32, k: i64, v: Complex64) {
        self.entries.insert((j, k), v);
    }

    pub fn accumulate(&mut self, j: u32, k: i64, v: Complex64) {
        *self.entries.entry((j, k)).or_insert(Complex64::new(0.0, 0.0)) += v;
    }

    pub fn merge(&mut self, other: &CoeffSeq) {
        for (&(j, k), v) in &other.entries {
            self.accumulate(j, k, *v);
        }
    }

    pub fn get(&self, j: u32, k: i64) -> Complex64 {
        self.entries.get(&(j, k)).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, i64), Complex64)> + '_ {
        self.entries.iter().map(|(key, v)| (*key, *v))
    }

    pub fn scales(&self) -> Vec<u32> {
        let mut js: Vec<u32> = self.entries.keys().map(|(j, _)| *j).collect();
        js.dedup();
        js
    }

    pub fn scaled(&self, c: Complex64) -> CoeffSeq {
        CoeffSeq {
            entries: self.entries.iter().map(|(key, v)| (*key, v * c)).collect(),
        }
    }

    /// Keeps the entries satisfying `keep`.
    pub fn filtered<F: Fn(u32, i64, Complex64) -> bool>(&self, keep: F) -> CoeffSeq {
        CoeffSeq {
            entries: self
                .entries
                .iter()
                .filter(|((j, k), v)| keep(*j, *k, **v))
                .map(|(key, v)| (*key, *v))
                .collect(),
        }
    }

    /// Re-indexes `k -> factor·k`.
    pub fn dilate_index(&self, factor: i64) -> CoeffSeq {
        CoeffSeq {
            entries: self.entries.iter().map(|((j, k), v)| ((*j, k * factor), *v)).collect(),
        }
    }

    /// `Σ |c_{j,k}|^p`.
    pub fn lp_power(&self, p: f64) -> f64 {
        self.entries.values().map(|v| v.norm().powf(p)).sum()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.lp_power(p).powf(1.0 / p)
    }

    /// One JSON object per line: `{"j":..,"k":..,"re":..,"im":..}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (&(j, k), v) in &self.entries {
            serde_json::to_writer(&mut out, &Line { j, k, re: v.re, im: v.im })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<CoeffSeq> {
        let mut c = CoeffSeq::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: Line = serde_json::from_str(&line)?;
            if !l.re.is_finite() || !l.im.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite coefficient at ({}, {})", l.j, l.k)));
            }
            c.insert(l.j, l.k, Complex64::new(l.re, l.im));
        }
        Ok(c)
    }
}

fn is_integer(v: f64) -> bool {
    (v - v.round()).abs() <= 1e-9 * v.abs().max(1.0)
}

/// True when every translate of the scale-`j` atoms has its breakpoints on grid nodes,
/// so left-endpoint sampling represents the piecewise-constant atoms exactly.
pub fn exactly_representable(psi: &SynthesizerSpec, cfg: &LatticeConfig, grid: &Grid, j: u32) -> bool {
    if !psi.is_piecewise_constant() {
        return false;
    }
    let h = grid.h();
    let inv = cfg.a().powi(-(j as i32));
    let step = inv * cfg.b() / h;
    step.round() >= 1.0
        && is_integer(step)
        && is_integer(grid.x0() / h)
        && psi.breakpoints().iter().all(|&x| is_integer(inv * x / h))
}

/// Resolution rule: exact representation, or at least `OVERSAMPLING` nodes per atom cell.
pub fn resolves(psi: &SynthesizerSpec, cfg: &LatticeConfig, grid: &Grid, j: u32) -> bool {
    exactly_representable(psi, cfg, grid, j) || grid.h() * OVERSAMPLING <= cfg.b() * cfg.a().powi(-(j as i32)) * (1.0 + 1e-12)
}

/// Largest `j` such that all scales `0..=j` are resolved.
pub fn finest_resolved_scale(psi: &SynthesizerSpec, cfg: &LatticeConfig, grid: &Grid) -> Option<u32> {
    let mut last = None;
    for j in 0..=MAX_SCALE {
        if resolves(psi, cfg, grid, j) {
            last = Some(j);
        } else {
            break;
        }
    }
    last
}

/// True when every atom with a coefficient lies inside `[grid.x0, grid.end]`.
pub fn atoms_inside(c: &CoeffSeq, psi: &SynthesizerSpec, cfg: &LatticeConfig, grid: &Grid) -> bool {
    let slack = 1e-12 * (grid.end() - grid.x0());
    c.iter().all(|((j, k), _)| {
        let (lo, hi) = atom_support(psi, cfg, j, k);
        lo >= grid.x0() - slack && hi <= grid.end() + slack
    })
}

/// `Σ c_{j,k} ψ_{j,k}` sampled on `grid`. Atoms are truncated to the grid.
pub fn synthesize(c: &CoeffSeq, psi: &SynthesizerSpec, cfg: &LatticeConfig, grid: &Grid) -> Result<Signal> {
    check_exponent(cfg.p())?;
    psi.validate(cfg.p())?;
    for j in c.scales() {
        if !resolves(psi, cfg, grid, j) {
            return Err(Error::Resolution { j, max_j: finest_resolved_scale(psi, cfg, grid) });
        }
    }
    let mut out = Signal::zeros(*grid);
    let vals = out.values_mut();
    for ((j, k), v) in c.iter() {
        if v.norm_sqr() == 0.0 {
            continue;
        }
        let (lo, hi) = atom_support(psi, cfg, j, k);
        for i in grid.index_range(lo, hi) {
            vals[i] += v * atom_eval(psi, cfg, j, k, grid.point(i));
        }
    }
    Ok(out)
}

/// Single-scale synthesis `S_j s`.
pub fn synthesize_scale(
    j: u32,
    s: &[(i64, Complex64)],
    psi: &SynthesizerSpec,
    cfg: &LatticeConfig,
    grid: &Grid,
) -> Result<Signal> {
    let mut c = CoeffSeq::new();
    for &(k, v) in s {
        c.insert(j, k, v);
    }
    synthesize(&c, psi, cfg, grid)
}
