use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on the unit torus [0,1)^d with `n` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceGrid {
    dim: usize,
    n: usize,
}

/// Integer frequency vector; the second component is 0 when d = 1.
pub type Freq = [i64; 2];

impl SpaceGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        Ok(SpaceGrid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Finest dyadic block index J = log2(N) - 1.
    pub fn finest_block(&self) -> i32 {
        self.n.trailing_zeros() as i32 - 1
    }

    /// Same dimension, twice the points per axis (used for de-aliasing).
    pub fn doubled(&self) -> SpaceGrid {
        SpaceGrid { dim: self.dim, n: 2 * self.n }
    }

    /// Signed frequency of FFT index `i` on an axis of length `n`.
    pub fn axis_freq(n: usize, i: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Frequency of the flat spectral index `idx` (row-major, axis 0 slowest).
    pub fn freq(&self, idx: usize) -> Freq {
        match self.dim {
            1 => [Self::axis_freq(self.n, idx), 0],
            _ => [
                Self::axis_freq(self.n, idx / self.n),
                Self::axis_freq(self.n, idx % self.n),
            ],
        }
    }

    /// Coordinates of the flat grid index `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.h();
        match self.dim {
            1 => [idx as f64 * h, 0.0],
            _ => [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h],
        }
    }

    /// True when some component of `k` sits on the Nyquist frequency.
    pub fn is_nyquist(&self, k: Freq) -> bool {
        let half = (self.n / 2) as i64;
        k[..self.dim].iter().any(|&c| c.abs() == half)
    }
}

pub fn norm2(k: Freq) -> i64 {
    k[0] * k[0] + k[1] * k[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(SpaceGrid::new(1, 12).is_err());
        assert!(SpaceGrid::new(1, 4).is_err());
        assert!(SpaceGrid::new(3, 16).is_err());
        assert_eq!(SpaceGrid::new(2, 16).unwrap().len(), 256);
    }

    #[test]
    fn frequency_layout() {
        let g = SpaceGrid::new(1, 8).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.freq(i)[0]).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        let g2 = SpaceGrid::new(2, 8).unwrap();
        assert_eq!(g2.freq(8 * 7 + 1), [-1, 1]);
        assert_eq!(g.finest_block(), 2);
    }
}
