//! Affine systems `ψ_{j,k}(x) = a^{j/p} ψ(a^j x - bk)` in `L^p`, `0 < p ≤ 1`: synthesis,
//! nonlinear analysis, admissibility tests and constructive atomic decompositions.

pub mod analysis;
pub mod cli;
pub mod conditions;
pub mod decomposer;
pub mod dictionary;
pub mod error;
pub mod numerics;
pub mod riesz;
pub mod signals;
pub mod stretch;
pub mod synthesis;

pub use decomposer::{decompose, DecomposeOptions, DecompositionResult};
pub use dictionary::SynthesizerSpec;
pub use error::{Error, Result};
pub use numerics::{Grid, LatticeConfig, Signal};
pub use synthesis::CoeffSeq;
