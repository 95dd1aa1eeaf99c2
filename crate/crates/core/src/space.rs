//! The target Hamiltonian space: `C^n` with a weighted circle action.
//!
//! The circle acts by `z_j -> g^{w_j} z_j`, the symplectic form is the
//! standard `omega(u, v) = sum_j Im(conj(u_j) v_j)` with `J = i`, and the
//! moment map is `mu(z) = 1/2 sum_j w_j |z_j|^2 - tau`.
//!
//! The generating vector field of `xi` is `xi~_z = -i xi w_j z_j`, the
//! derivative of `exp(-t xi) . z`. With this sign `d mu_xi = omega(xi~, .)`
//! holds and the loops `theta -> exp(theta eta) . x0` with `x0` on the zero
//! level solve the critical equations `dx/dtheta + eta~_x = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VortexError};

/// Weighted circle action on `C^n` with a central moment shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleSpace {
    weights: Vec<i64>,
    tau: f64,
}

/// A point of `C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(pub Vec<Complex64>);

/// An element of the Lie algebra of the circle, identified with `R`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LieValue(pub f64);

impl CircleSpace {
    pub fn new(weights: Vec<i64>, tau: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("space.weights", "need at least one coordinate"));
        }
        if let Some(w) = weights.iter().find(|&&w| w < 1) {
            return Err(invalid("space.weights", format!("weights must be positive integers, found {w}")));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(invalid("space.tau", format!("must be positive and finite, found {tau}")));
        }
        Ok(Self { weights, tau })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        if p.0.len() != self.dim() {
            return Err(VortexError::DimensionMismatch { expected: self.dim(), found: p.0.len() });
        }
        Ok(())
    }

    /// `mu(z) = 1/2 sum w_j |z_j|^2 - tau`.
    pub fn moment_map(&self, p: &Point) -> LieValue {
        LieValue(self.moment_of(&p.0))
    }

    /// Slice form of [`CircleSpace::moment_map`].
    #[inline]
    pub fn moment_of(&self, z: &[Complex64]) -> f64 {
        let s: f64 = self.weights.iter().zip(z).map(|(&w, zj)| w as f64 * zj.norm_sqr()).sum();
        0.5 * s - self.tau
    }

    /// Differential of the moment map at `z` applied to `v`.
    #[inline]
    pub fn moment_differential(&self, z: &[Complex64], v: &[Complex64]) -> f64 {
        self.weights.iter().zip(z.iter().zip(v)).map(|(&w, (zj, vj))| w as f64 * (zj.conj() * vj).re).sum()
    }

    /// Generating vector field of `xi` at `p`, components `-i xi w_j z_j`.
    pub fn infinitesimal_action(&self, xi: LieValue, p: &Point) -> Vec<Complex64> {
        self.weights.iter().zip(&p.0).map(|(&w, z)| Complex64::new(0.0, -xi.0 * w as f64) * z).collect()
    }

    /// `z_j -> e^{i w_j g} z_j`.
    pub fn group_act(&self, angle: f64, p: &Point) -> Point {
        Point(self.weights.iter().zip(&p.0).map(|(&w, z)| Complex64::from_polar(1.0, w as f64 * angle) * z).collect())
    }

    /// Gradient of `mu` in the flat metric, `w_j z_j`.
    pub fn moment_gradient(&self, p: &Point) -> Vec<Complex64> {
        self.weights.iter().zip(&p.0).map(|(&w, z)| z * w as f64).collect()
    }
}

impl Point {
    pub fn zeros(n: usize) -> Self {
        Point(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Standard symplectic form `sum_j Im(conj(u_j) v_j)`.
#[inline]
pub fn symplectic_form(u: &[Complex64], v: &[Complex64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a.conj() * b).im).sum()
}

/// The metric `omega(v1, J v2) = Re <v1, v2>`.
#[inline]
pub fn riemannian_pairing(v1: &[Complex64], v2: &[Complex64]) -> f64 {
    v1.iter().zip(v2).map(|(a, b)| (a.conj() * b).re).sum()
}
