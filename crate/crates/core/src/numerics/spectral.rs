//! Periodic pseudospectral toolkit: exact spatial derivatives, band
//! projection, and quadrature on a uniform grid.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::NumericsError;

/// Uniform periodic grid on `[0, length)` with a power-of-two point count.
///
/// Derivatives are computed in Fourier space, so they are exact (to rounding)
/// for trigonometric polynomials the grid resolves. Cloning shares the FFT
/// plans.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("length", &self.length).finish()
    }
}

impl Grid {
    /// A grid needs a power-of-two size (at least 16) and a positive length.
    pub fn new(n: usize, length: f64) -> Result<Grid, NumericsError> {
        if n < 16 || !n.is_power_of_two() {
            return Err(NumericsError::InvalidGrid(format!(
                "grid size must be a power of two and at least 16, got {n}"
            )));
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(NumericsError::InvalidGrid(format!(
                "grid length must be positive and finite, got {length}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Grid {
            n,
            length,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Grid spacing.
    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Sample locations `0, dx, 2 dx, ...`.
    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|i| i as f64 * dx).collect()
    }

    fn to_spectrum(&self, values: &[f64]) -> Vec<Complex<f64>> {
        assert_eq!(values.len(), self.n, "array length does not match the grid");
        let mut buf: Vec<Complex<f64>> =
            values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    fn to_values(&self, mut spectrum: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut spectrum);
        let scale = 1.0 / self.n as f64;
        spectrum.into_iter().map(|c| c.re * scale).collect()
    }

    /// Signed integer frequency of spectral bin `j`.
    fn signed(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Spectral derivative of the given order; order zero copies the input.
    ///
    /// Odd orders zero the Nyquist mode, which has no odd-symmetric real
    /// representation on the grid.
    pub fn deriv(&self, values: &[f64], order: u32) -> Vec<f64> {
        if order == 0 {
            return values.to_vec();
        }
        let mut spec = self.to_spectrum(values);
        let base = 2.0 * std::f64::consts::PI / self.length;
        let nyquist = self.n / 2;
        for (j, c) in spec.iter_mut().enumerate() {
            if j == nyquist && order % 2 == 1 {
                *c = Complex::new(0.0, 0.0);
                continue;
            }
            let k = base * self.signed(j) as f64;
            *c *= Complex::new(0.0, k).powu(order);
        }
        self.to_values(spec)
    }

    /// Zero every mode above two thirds of the Nyquist band, the standard
    /// dealiasing cut for quadratic products.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let cut = (self.n / 3) as i64;
        let mut spec = self.to_spectrum(values);
        for (j, c) in spec.iter_mut().enumerate() {
            if self.signed(j).abs() > cut {
                *c = Complex::new(0.0, 0.0);
            }
        }
        self.to_values(spec)
    }

    /// Integral over one period (exact for resolved trigonometric data).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.n, "array length does not match the grid");
        values.iter().sum::<f64>() * self.dx()
    }
}
