//! Orthogonal pilot books built from rows of a DFT matrix.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, C64};

/// `count` mutually orthogonal pilots of length `tau`, `p_i^H p_j = tau delta_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    tau: usize,
    pilots: Vec<CVec>,
}

/// `exp(2 pi i num / den)` with the quarter turns returned exactly.
fn unit_root(num: usize, den: usize) -> C64 {
    let num = num % den;
    if 4 * num % den == 0 {
        return match 4 * num / den {
            0 => c(1.0, 0.0),
            1 => c(0.0, 1.0),
            2 => c(-1.0, 0.0),
            _ => c(0.0, -1.0),
        };
    }
    let phase = 2.0 * PI * num as f64 / den as f64;
    c(phase.cos(), phase.sin())
}

impl PilotBook {
    pub fn new(count: usize, tau: usize) -> Result<Self> {
        if tau == 0 || count > tau {
            return Err(Error::InvalidArgument(format!(
                "cannot build {count} orthogonal pilots of length {tau}"
            )));
        }
        let pilots = (0..count)
            .map(|i| CVec::from_iterator(tau, (0..tau).map(|t| unit_root(i * t % tau, tau))))
            .collect();
        Ok(PilotBook { tau, pilots })
    }

    #[inline]
    pub fn tau(&self) -> usize {
        self.tau
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pilots.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pilots.is_empty()
    }

    #[inline]
    pub fn pilot(&self, i: usize) -> &CVec {
        &self.pilots[i]
    }

    pub fn gram(&self) -> CMat {
        let n = self.pilots.len();
        CMat::from_fn(n, n, |i, j| self.pilots[i].dotc(&self.pilots[j]))
    }
}

pub fn make_pilots(count: usize, tau: usize) -> Result<PilotBook> {
    PilotBook::new(count, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_book_is_exactly_orthogonal() {
        let book = make_pilots(4, 4).unwrap();
        assert_eq!(book.gram(), CMat::identity(4, 4) * c(4.0, 0.0));
    }

    #[test]
    fn single_pilot_energy() {
        for tau in [1, 3, 7, 16] {
            let book = make_pilots(1, tau).unwrap();
            assert!((book.pilot(0).norm_squared() - tau as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn large_book_off_diagonal() {
        let book = make_pilots(32, 32).unwrap();
        let g = book.gram();
        for i in 0..32 {
            for j in 0..32 {
                if i == j {
                    assert!((g[(i, j)].re - 32.0).abs() < 1e-10);
                } else {
                    assert!(g[(i, j)].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn longer_pilots_stay_orthogonal() {
        let book = make_pilots(5, 20).unwrap();
        let g = book.gram();
        assert!((g - CMat::identity(5, 5) * c(20.0, 0.0)).norm() < 1e-10);
        for p in 0..5 {
            for e in book.pilot(p).iter() {
                assert!((e.norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_too_many_pilots() {
        assert!(make_pilots(5, 4).is_err());
        assert!(make_pilots(0, 0).is_err());
    }
}
