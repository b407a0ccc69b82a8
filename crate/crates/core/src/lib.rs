//! Numerical laboratory for a two-species cross-diffusion system on an interval.
//!
//! The population pressures are `(1+d) rho + eta` and `rho + (1+d) eta`; the
//! sign of the perturbation `d` decides between mixing (`d > 0`) and
//! segregation (`-1 < d < 0`). The crate provides
//!
//! - [`grid`]: uniform cell grid, cell-averaged densities, quadrature and norms,
//! - [`energy`]: local, nonlocal and relaxed free energies with their first variations,
//! - [`dynamics`]: a conservative upwind finite-volume solver for the gradient flow,
//! - [`minimise`]: projected steepest descent under mass constraints, plus
//!   overlap, gap and Euler–Lagrange diagnostics,
//! - [`transport`]: exact 1D quadratic optimal transport and the JKO step,
//! - [`closedform`]: explicit segregated critical points with a gap,
//! - [`initial`]: the block, partially mixed and random initial data,
//! - [`plot`]: dependency-free SVG line plots,
//! - [`cli`]: the experiment runner behind the `crossdiff` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod closedform;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod initial;
pub mod minimise;
pub mod plot;
pub mod transport;

pub use energy::{EnergyForm, EnergySpec, Functional, Kernel};
pub use error::{Error, Result};
pub use grid::{DensityField, DensityPair, Field, Grid1D, Norm};
