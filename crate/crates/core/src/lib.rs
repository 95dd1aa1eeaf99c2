//! Numerical and combinatorial laboratory for symplectic vortices on
//! cylinders with a circle action on `C^n`.
//!
//! * [`space`]: the weighted circle action, moment map and metric.
//! * [`loops`]: the discretised loop space, the action functional and its
//!   gradient, gauge action and holonomy.
//! * [`critical`]: critical loops by twisted sector, Hessian spectra and
//!   degree shifts.
//! * [`flow`]: the downward gradient flow (vortex equation in temporal
//!   gauge), energy identities and exponential decay.
//! * [`index`]: virtual dimensions of moduli spaces with cylindrical ends.
//! * [`webs`]: webs of stable weighted trees and their partial order.
//! * [`config`] and [`cli`]: the experiment front end.

pub mod cli;
pub mod config;
pub mod critical;
pub mod error;
pub mod flow;
pub mod index;
pub mod loops;
pub mod space;
pub mod spectral;
pub mod webs;

pub use error::{Result, VortexError};
