//! Trigonometric differentiation and quadrature on an equispaced periodic grid.
//!
//! The derivative is applied as the antisymmetric circulant matrix of the
//! trigonometric interpolant (Nyquist mode differentiated to zero). Pairing
//! `u_{i+m}` with `u_{i-m}` under one coefficient keeps constants in the
//! kernel exactly and makes discrete summation by parts exact.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGrid {
    n: usize,
    coeffs: Vec<f64>,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(invalid("grid.n_theta", format!("must be a power of two >= 16, found {n}")));
        }
        let h = TAU / n as f64;
        // coeffs[m] for m = 1..n/2-1; index 0 unused
        let coeffs = (0..n / 2)
            .map(|m| {
                if m == 0 {
                    0.0
                } else {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    -0.5 * sign / (m as f64 * h / 2.0).tan()
                }
            })
            .collect();
        Ok(Self { n, coeffs })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Grid spacing `2 pi / N`, also the trapezoid weight.
    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.spacing()
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.theta(k)).collect()
    }

    /// Entry `D[i][j]` of the differentiation matrix.
    pub fn matrix_entry(&self, i: usize, j: usize) -> f64 {
        let m = (j + self.n - i) % self.n;
        if m == 0 || m == self.n / 2 {
            0.0
        } else if m < self.n / 2 {
            self.coeffs[m]
        } else {
            -self.coeffs[self.n - m]
        }
    }

    pub fn derivative(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for m in 1..n / 2 {
                    acc += self.coeffs[m] * (u[(i + m) % n] - u[(i + n - m) % n]);
                }
                acc
            })
            .collect()
    }

    /// Derivative of a strided complex field: `u[i * stride + j]`, component `j`.
    pub fn derivative_complex(&self, u: &[Complex64], stride: usize) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        for i in 0..n {
            for j in 0..stride {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 1..n / 2 {
                    acc += (u[((i + m) % n) * stride + j] - u[((i + n - m) % n) * stride + j]) * self.coeffs[m];
                }
                out[i * stride + j] = acc;
            }
        }
        out
    }

    /// Trapezoid rule over the circle.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.spacing() * u.iter().sum::<f64>()
    }

    /// Periodic antiderivative of `u - mean(u)` vanishing at `theta = 0`.
    pub fn antiderivative_zero_mean(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let coeffs = dft(u);
        let mut values = vec![0.0; n];
        for (k, value) in values.iter_mut().enumerate() {
            let theta = self.theta(k);
            let mut acc = 0.0;
            for (m, c) in coeffs.iter().enumerate().skip(1) {
                let freq = signed_mode(m, n);
                if freq == 0 || m == n / 2 {
                    continue;
                }
                let f = freq as f64;
                // integral of e^{i f s} from 0 to theta
                let e = (Complex64::new(0.0, f * theta).exp() - 1.0) / Complex64::new(0.0, f);
                acc += (c * e).re;
            }
            *value = acc / n as f64;
        }
        values
    }
}

/// Unnormalised DFT `c_m = sum_k u_k e^{-2 pi i m k / N}`.
pub fn dft(u: &[f64]) -> Vec<Complex64> {
    let n = u.len();
    (0..n)
        .map(|m| u.iter().enumerate().map(|(k, &x)| Complex64::from_polar(x, -TAU * (m * k) as f64 / n as f64)).sum())
        .collect()
}

/// Signed frequency of DFT index `m` in `(-N/2, N/2]`.
pub fn signed_mode(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}
