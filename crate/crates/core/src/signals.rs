//! Built-in test signals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Grid, Signal};

pub const NAMES: [&str; 4] = ["bump", "triangle", "smoothed_step", "random_pc"];

/// `exp(-2x²)` cut off at `|x| = 3`.
pub fn gaussian_bump(grid: Grid) -> Signal {
    Signal::from_real_fn(grid, |x| if x.abs() < 3.0 { (-2.0 * x * x).exp() } else { 0.0 }).unwrap()
}

pub fn triangle(grid: Grid) -> Signal {
    Signal::from_real_fn(grid, |x| (1.0 - x.abs()).max(0.0)).unwrap()
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Plateau of height 1 on `[-1, 1]` with C¹ ramps on `[-2, -1]` and `[1, 2]`.
pub fn smoothed_step(grid: Grid) -> Signal {
    Signal::from_real_fn(grid, |x| smoothstep(x + 2.0) * smoothstep(2.0 - x)).unwrap()
}

/// Piecewise constant on 16 equal pieces of `[-2, 2]` with uniform values in `[-1, 1]`.
pub fn random_piecewise_constant(grid: Grid, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Signal::from_real_fn(grid, |x| {
        if (-2.0..2.0).contains(&x) {
            vals[((x + 2.0) * 4.0) as usize]
        } else {
            0.0
        }
    })
    .unwrap()
}

pub fn by_name(name: &str, grid: Grid, seed: u64) -> Result<Signal> {
    match name {
        "bump" => Ok(gaussian_bump(grid)),
        "triangle" => Ok(triangle(grid)),
        "smoothed_step" => Ok(smoothed_step(grid)),
        "random_pc" => Ok(random_piecewise_constant(grid, seed)),
        _ => Err(Error::InvalidParameter(format!("unknown signal '{name}', expected one of {}", NAMES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let g = Grid::covering(-4.0, 4.0, 10).unwrap();
        let s = smoothed_step(g);
        assert_eq!(s.value_at(0.0).re, 1.0);
        assert_eq!(s.value_at(-3.0).re, 0.0);
        assert!((s.value_at(1.5).re - 0.5).abs() < 1e-12);
        assert_eq!(triangle(g).value_at(0.0).re, 1.0);
        assert_eq!(gaussian_bump(g).value_at(3.5).re, 0.0);
    }

    #[test]
    fn random_is_seeded() {
        let g = Grid::covering(-4.0, 4.0, 10).unwrap();
        assert_eq!(random_piecewise_constant(g, 7), random_piecewise_constant(g, 7));
        assert_ne!(random_piecewise_constant(g, 7), random_piecewise_constant(g, 8));
        assert!(by_name("nope", g, 0).is_err());
    }
}
