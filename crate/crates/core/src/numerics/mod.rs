//! Grids, sampled signals, the L^p quasi-metric and periodization.

pub mod quad;

use std::io::{Read, Write};
use std::ops::Range;

use num_complex::Complex64;

use crate::dictionary::SynthesizerSpec;
use crate::error::{Error, Result};

/// Uniform grid `x_i = x0 + i*h`, `i = 0..n`. Each node owns the cell `[x_i, x_i + h)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    x0: f64,
    h: f64,
    n: usize,
}

impl Grid {
    pub fn new(x0: f64, h: f64, n: usize) -> Result<Self> {
        if !x0.is_finite() || !h.is_finite() || h <= 0.0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid needs finite x0, h > 0 and n > 0 (got x0={x0}, h={h}, n={n})"
            )));
        }
        Ok(Grid { x0, h, n })
    }

    /// `2^log2n` cells spanning `[lo, hi)`.
    pub fn covering(lo: f64, hi: f64, log2n: u32) -> Result<Self> {
        if !(hi > lo) || log2n > 30 {
            return Err(Error::InvalidParameter(format!(
                "bad grid range {lo}:{hi}:{log2n}"
            )));
        }
        let n = 1usize << log2n;
        Grid::new(lo, (hi - lo) / n as f64, n)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    /// Right end of the last cell.
    pub fn end(&self) -> f64 {
        self.x0 + self.n as f64 * self.h
    }

    /// Index of the cell containing `x`, possibly out of range.
    pub fn cell_of(&self, x: f64) -> i64 {
        ((x - self.x0) / self.h).floor() as i64
    }

    /// Indices whose nodes may fall in `[lo, hi]`, padded by one node and clipped.
    pub fn index_range(&self, lo: f64, hi: f64) -> Range<usize> {
        let a = ((lo - self.x0) / self.h).floor() as i64 - 1;
        let b = ((hi - self.x0) / self.h).ceil() as i64 + 2;
        let a = a.clamp(0, self.n as i64) as usize;
        let b = b.clamp(0, self.n as i64) as usize;
        a..b.max(a)
    }

    /// Integer offset of `other`'s origin in units of `h`, if the grids share a lattice.
    pub fn offset_to(&self, other: &Grid) -> Result<i64> {
        if ((self.h - other.h) / self.h).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!(
                "steps differ: {} vs {}",
                self.h, other.h
            )));
        }
        let shift = (other.x0 - self.x0) / self.h;
        let rounded = shift.round();
        if (shift - rounded).abs() > 1e-6 {
            return Err(Error::GridMismatch(format!(
                "origins {} and {} are not a whole number of steps apart",
                self.x0, other.x0
            )));
        }
        Ok(rounded as i64)
    }
}

/// Complex samples on a grid; zero outside it.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Signal {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidSignal(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "non-finite value at node {i} (x = {})",
                grid.point(i)
            )));
        }
        Ok(Signal { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Signal {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: Grid, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Signal::new(grid, values)
    }

    pub fn from_real_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<Self> {
        Signal::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Value of the cell containing `x` (the grid's step-function reading).
    pub fn value_at(&self, x: f64) -> Complex64 {
        let i = self.grid.cell_of(x);
        if i < 0 || i as usize >= self.values.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[i as usize]
        }
    }

    /// Value at the node nearest to `x`, zero off the grid.
    pub fn nearest(&self, x: f64) -> Complex64 {
        let i = ((x - self.grid.x0) / self.grid.h).round();
        if i < 0.0 || i >= self.values.len() as f64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[i as usize]
        }
    }

    /// First and last nonzero node.
    pub fn nonzero_bounds(&self) -> Option<(usize, usize)> {
        let first = self.values.iter().position(|v| v.norm_sqr() > 0.0)?;
        let last = self.values.iter().rposition(|v| v.norm_sqr() > 0.0)?;
        Some((first, last))
    }

    /// Smallest interval `[lo, hi)` outside which the step function vanishes.
    pub fn support(&self) -> Option<(f64, f64)> {
        self.nonzero_bounds()
            .map(|(a, b)| (self.grid.point(a), self.grid.point(b) + self.grid.h))
    }

    pub fn is_zero(&self) -> bool {
        self.nonzero_bounds().is_none()
    }

    pub fn scaled(&self, c: Complex64) -> Signal {
        Signal {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `self - other` on the union of both grids.
    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.combine(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.combine(other, |a, b| a + b)
    }

    fn combine<F: Fn(Complex64, Complex64) -> Complex64>(&self, other: &Signal, op: F) -> Result<Signal> {
        let off = self.grid.offset_to(&other.grid)?;
        let start = off.min(0);
        let end = (self.grid.n as i64).max(off + other.grid.n as i64);
        let grid = Grid::new(self.grid.point(0) + start as f64 * self.grid.h, self.grid.h, (end - start) as usize)?;
        let zero = Complex64::new(0.0, 0.0);
        let values = (start..end)
            .map(|i| {
                let a = if i >= 0 && i < self.grid.n as i64 { self.values[i as usize] } else { zero };
                let j = i - off;
                let b = if j >= 0 && j < other.grid.n as i64 { other.values[j as usize] } else { zero };
                op(a, b)
            })
            .collect();
        Signal::new(grid, values)
    }

    /// Writes `x,re,im` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "re", "im"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([
                self.grid.point(i).to_string(),
                v.re.to_string(),
                v.im.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `x,re,im` rows (header optional) and checks the spacing is uniform.
    pub fn read_csv<R: Read>(input: R) -> Result<Signal> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut xs = Vec::new();
        let mut vals = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidSignal("rows need at least x,re".into()));
            }
            let x: f64 = match rec[0].parse() {
                Ok(x) => x,
                Err(_) if xs.is_empty() => continue,
                Err(_) => return Err(Error::InvalidSignal(format!("bad x value `{}`", &rec[0]))),
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidSignal(format!("bad number `{s}`")))
            };
            let re = parse(&rec[1])?;
            let im = if rec.len() > 2 { parse(&rec[2])? } else { 0.0 };
            xs.push(x);
            vals.push(Complex64::new(re, im));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidSignal("need at least two samples".into()));
        }
        let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        for (i, x) in xs.iter().enumerate() {
            if (x - (xs[0] + i as f64 * h)).abs() > 1e-9 * h.abs().max(1e-300) * (1.0 + i as f64) {
                return Err(Error::InvalidSignal(format!("non-uniform spacing at row {i}")));
            }
        }
        Signal::new(Grid::new(xs[0], h, xs.len())?, vals)
    }
}

/// Exponent, dilation and translation of the affine lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeConfig {
    p: f64,
    a: f64,
    b: f64,
}

impl LatticeConfig {
    pub fn new(p: f64, a: f64, b: f64) -> Result<Self> {
        check_exponent(p)?;
        if !(a.is_finite() && a > 1.0) {
            return Err(Error::InvalidParameter(format!("dilation a must exceed 1 (got {a})")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter(format!("translation b must be positive (got {b})")));
        }
        Ok(LatticeConfig { p, a, b })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn with_b(&self, b: f64) -> Result<Self> {
        LatticeConfig::new(self.p, self.a, b)
    }
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig { p: 0.5, a: 2.0, b: 1.0 }
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("exponent p must lie in (0, 1] (got {p})")))
    }
}

/// `∫|f|^p` by the rectangle rule on the signal's grid.
pub fn lp_power(f: &Signal, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(raw_lp_power(f.values(), p) * f.grid().h())
}

pub(crate) fn raw_lp_power(values: &[Complex64], p: f64) -> f64 {
    if p == 1.0 {
        values.iter().map(|v| v.norm()).sum()
    } else {
        values.iter().map(|v| v.norm().powf(p)).sum()
    }
}

/// `(∫|f|^p)^{1/p}`.
pub fn lp_norm(f: &Signal, p: f64) -> Result<f64> {
    Ok(lp_power(f, p)?.powf(1.0 / p))
}

/// The metric `d_p(f, g) = ∫|f - g|^p`.
pub fn dp_distance(f: &Signal, g: &Signal, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if f.grid() == g.grid() {
        let s: f64 = f
            .values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| (a - b).norm().powf(p))
            .sum();
        return Ok(s * f.grid().h());
    }
    lp_power(&f.sub(g)?, p)
}

/// Samples `b m Σ_k ψ(x - b m k)` on a grid covering one period `[0, b m)`.
pub fn periodize(psi: &SynthesizerSpec, cfg: &LatticeConfig, m: u32, cell: &Grid) -> Result<Signal> {
    if m == 0 {
        return Err(Error::InvalidParameter("multiplier must be at least 1".into()));
    }
    let period = cfg.b() * m as f64;
    if cell.x0().abs() > 1e-12 * period || (cell.end() - period).abs() > 1e-9 * period {
        return Err(Error::GridMismatch(format!(
            "cell grid [{}, {}) does not cover one period [0, {period})",
            cell.x0(),
            cell.end()
        )));
    }
    Signal::from_fn(*cell, |x| psi.periodized(period, x))
}
