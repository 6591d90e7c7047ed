//! Periodic square simulation grid and its 2D FFT plans.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// N×N points on a box of side L with periodic boundaries. Point (i, j) sits
/// at r = (i·L/N, j·L/N); fields are stored row-major with `i` (x) slowest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D<T> {
    pub n: usize,
    pub length: T,
}

impl<T: Real> Grid2D<T> {
    pub fn new(n: usize, length: T) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Config(format!("grid size must be a power of two >= 4, got {n}")));
        }
        if !(length > T::zero()) {
            return Err(Error::Config("box length must be positive".into()));
        }
        Ok(Self { n, length })
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> T {
        self.length / T::lit(self.n as f64)
    }

    /// Area element dx·dy.
    pub fn cell_area(&self) -> T {
        let h = self.spacing();
        h * h
    }

    pub fn coord(&self, i: usize) -> T {
        T::lit(i as f64) * self.spacing()
    }

    /// Reciprocal step 2π/L.
    pub fn dk(&self) -> T {
        T::lit(2.0) * T::PI() / self.length
    }

    /// Largest representable wavenumber component, πN/L.
    pub fn k_max(&self) -> T {
        T::PI() * T::lit(self.n as f64) / self.length
    }

    /// Signed integer frequency of FFT bin `i` (0, 1, …, N/2−1, −N/2, …, −1).
    pub fn freq_index(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// FFT bin holding integer frequency `m`, if representable without aliasing.
    pub fn bin_of(&self, m: i64) -> Option<usize> {
        let n = self.n as i64;
        if m >= -(n / 2) && m < n / 2 {
            Some(m.rem_euclid(n) as usize)
        } else {
            None
        }
    }

    pub fn wavenumber(&self, i: usize) -> T {
        T::lit(self.freq_index(i) as f64) * self.dk()
    }

    /// Minimum-image displacement of `x` from `c` along one axis.
    pub fn wrap_displacement(&self, x: T, c: T) -> T {
        let l = self.length;
        let mut d = x - c;
        d = d - l * (d / l).round();
        d
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }
}

/// Forward/inverse 2D FFT over a [`Grid2D`]. Both directions are unnormalized.
pub struct Fft2<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scratch: Vec<Cplx<T>>,
}

impl<T: Real> Fft2<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self { n, forward, inverse, scratch: vec![Complex::new(T::zero(), T::zero()); len] }
    }

    pub fn forward(&mut self, data: &mut [Cplx<T>]) {
        self.run(data, true);
    }

    pub fn inverse(&mut self, data: &mut [Cplx<T>]) {
        self.run(data, false);
    }

    fn run(&mut self, data: &mut [Cplx<T>], forward: bool) {
        assert_eq!(data.len(), self.n * self.n, "field size does not match FFT plan");
        let plan = if forward { &self.forward } else { &self.inverse };
        plan.process_with_scratch(data, &mut self.scratch);
        transpose_square(data, self.n);
        plan.process_with_scratch(data, &mut self.scratch);
        transpose_square(data, self.n);
    }
}

fn transpose_square<C>(data: &mut [C], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid2D::new(100, 1.0f64).is_err());
        assert!(Grid2D::new(64, 0.0f64).is_err());
    }

    #[test]
    fn bins_and_frequencies() {
        let g = Grid2D::new(8, 1.0f64).unwrap();
        let f: Vec<i64> = (0..8).map(|i| g.freq_index(i)).collect();
        assert_eq!(f, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        for m in -4..4 {
            assert_eq!(g.freq_index(g.bin_of(m).unwrap()), m);
        }
        assert_eq!(g.bin_of(4), None);
    }

    #[test]
    fn fft2_single_harmonic() {
        // inverse transform of a unit coefficient at (mx, my) is exp(i q·r)
        let g = Grid2D::new(16, 3.0f64).unwrap();
        let mut fft = Fft2::new(16);
        let mut c = vec![Complex::new(0.0, 0.0); g.len()];
        c[g.index(g.bin_of(3).unwrap(), g.bin_of(-2).unwrap())] = Complex::new(1.0, 0.0);
        fft.inverse(&mut c);
        for i in 0..16 {
            for j in 0..16 {
                let ph = g.dk() * (3.0 * g.coord(i) - 2.0 * g.coord(j));
                let z = c[g.index(i, j)];
                assert!((z.re - ph.cos()).abs() < 1e-12 && (z.im - ph.sin()).abs() < 1e-12);
            }
        }
        fft.forward(&mut c);
        let k = g.index(g.bin_of(3).unwrap(), g.bin_of(-2).unwrap());
        assert!((c[k].re - 256.0).abs() < 1e-9);
    }
}
