//! Small dense complex linear-algebra helpers shared by the designs and
//! the pilot-domain estimators.
//!
//! Every pseudoinverse in the crate goes through [`HermitianEig`], which
//! truncates eigenvalues below [`RANK_CUTOFF`] times the largest magnitude.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Relative singular-value cutoff used by all pseudoinverses.
pub const RANK_CUTOFF: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn norm_sq(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a b^H`
pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}

/// `a^H b`
#[inline]
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

/// Eigendecomposition of a Hermitian matrix, `A = U diag(mu) U^H`.
///
/// The input is symmetrized first so round-off asymmetry from
/// accumulated outer products does not leak into the eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEig {
    pub fn new(a: &CMat) -> Self {
        assert!(a.is_square(), "HermitianEig needs a square matrix");
        let sym = (a + a.adjoint()) * c(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        HermitianEig {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Coordinates `U^H r` of a vector in the eigenbasis.
    pub fn project(&self, r: &CVec) -> CVec {
        self.vectors.adjoint() * r
    }

    /// `(A + shift I)^† r` given the eigen-coordinates of `r`, with the
    /// relative cutoff applied to the shifted spectrum.
    pub fn solve_projected(&self, coords: &CVec, shift: f64) -> CVec {
        let max = self.values.iter().fold(0.0_f64, |m, v| m.max((v + shift).abs()));
        let tol = RANK_CUTOFF * max;
        let mut scaled = coords.clone();
        for (i, z) in scaled.iter_mut().enumerate() {
            let d = self.values[i] + shift;
            if d.abs() > tol && max > 0.0 {
                *z /= d;
            } else {
                *z = C64::new(0.0, 0.0);
            }
        }
        &self.vectors * scaled
    }

    /// `(A + shift I)^† r`
    pub fn solve_shifted(&self, r: &CVec, shift: f64) -> CVec {
        self.solve_projected(&self.project(r), shift)
    }
}

/// `A^† r` for Hermitian `A`.
pub fn hermitian_pinv_solve(a: &CMat, r: &CVec) -> CVec {
    HermitianEig::new(a).solve_shifted(r, 0.0)
}

/// Solves `A x = r` for Hermitian positive-definite `A` by Cholesky,
/// falling back to the truncated pseudoinverse when `A` is singular.
pub fn hpd_solve(a: &CMat, r: &CVec) -> CVec {
    match a.clone().cholesky() {
        Some(ch) => ch.solve(r),
        None => hermitian_pinv_solve(a, r),
    }
}

/// Relative error `||a - b|| / max(||b||, tiny)`.
pub fn rel_err(a: &CVec, b: &CVec) -> f64 {
    let diff = (a - b).norm();
    let denom = b.norm().max(1e-300);
    diff / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(seed: u64, n: usize) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g = CMat::from_fn(n, n + 2, |_, _| c(next(), next()));
        &g * g.adjoint()
    }

    #[test]
    fn shifted_solve_matches_cholesky() {
        let a = herm(3, 4);
        let r = CVec::from_fn(4, |i, _| c(i as f64 + 1.0, -0.5));
        let shift = 0.3;
        let x = HermitianEig::new(&a).solve_shifted(&r, shift);
        let reg = &a + CMat::identity(4, 4) * c(shift, 0.0);
        let y = hpd_solve(&reg, &r);
        assert!(rel_err(&x, &y) < 1e-12);
    }

    #[test]
    fn pinv_of_rank_one_recovers_direction() {
        let f = CVec::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.25)]);
        let a = outer(&f, &f);
        let x = hermitian_pinv_solve(&a, &f);
        // (f f^H)^† f = f / ||f||^2
        let expected = &f / c(norm_sq(&f), 0.0);
        assert!(rel_err(&x, &expected) < 1e-12);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let a = CMat::zeros(3, 3);
        let r = CVec::from_element(3, c(1.0, 0.0));
        assert_eq!(hermitian_pinv_solve(&a, &r).norm(), 0.0);
    }
}
