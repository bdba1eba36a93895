//! Numerical core for inverse problems on coupled wave systems
//! `□u + q(t,x)u = 0` with time-dependent matrix potentials.
//!
//! The modules build on each other: [`geometry`] and [`potential`] describe the
//! problem, [`solver`] marches it, [`probes`] builds exponentially weighted
//! plane-wave solutions, and [`identity`] / [`reconstruct`] combine them into
//! Fourier samples of a potential difference. [`carleman`] audits the weighted
//! energy inequality that controls the unmeasured boundary terms.

pub mod carleman;
pub mod error;
pub mod geometry;
pub mod identity;
pub mod potential;
pub mod probes;
pub mod reconstruct;
pub mod solver;

pub use error::{MwipError, Result};
pub use num_complex::Complex64 as C64;
