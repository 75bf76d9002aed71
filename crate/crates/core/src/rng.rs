//! Seeded random streams.
//!
//! One root seed drives everything. Each consumer (scenario geometry,
//! channel evolution, per-method training noise) draws from its own ChaCha
//! stream keyed by `(drop, sweep point, purpose)`, so results do not depend
//! on the order or parallelism in which drops execute.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMat, CVec, C64};

pub type SimRng = ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Geometry,
    Channel,
    /// Training noise and initialization of the method with the given slot.
    Method(u16),
    /// Second training instance of a method (separate-design UL instance).
    MethodAux(u16),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Geometry => 1,
            Purpose::Channel => 2,
            Purpose::Method(m) => 0x100 + m as u64,
            Purpose::MethodAux(m) => 0x8000 + m as u64,
        }
    }
}

/// Independent stream for `(drop, point, purpose)` under `root`.
pub fn stream(root: u64, drop: usize, point: usize, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    let id = ((drop as u64) << 32) | ((point as u64 & 0xffff) << 16) | purpose.code();
    rng.set_stream(id);
    rng
}

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Circularly-symmetric complex Gaussian with total variance `var`
/// (two independent real normals of variance `var / 2`).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, var: f64) -> CVec {
    CVec::from_fn(len, |_, _| complex_normal(rng, var))
}

/// Matrix of i.i.d. CN(0, var) entries, filled column-major.
pub fn complex_normal_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng, var))
}
