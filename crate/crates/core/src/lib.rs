//! Bayesian structure learning for sparse Gaussian graphical models.
//!
//! The crate provides GWishart samplers (block Gibbs over clique covers and
//! Hamiltonian Monte Carlo with several mass matrices), a joint sampler over
//! graphs and precision matrices, and a graphical lasso baseline.

pub mod diagnostics;
pub mod error;
pub mod ggm;
pub mod glasso;
pub mod graph;
pub mod gwishart;
pub mod hmc;
pub mod numkernel;
pub mod trace;

pub use error::{Error, Result};
pub use graph::{CliqueCover, FreeIndexSet, Graph};
pub use gwishart::{GWishartParams, PrecisionState};
pub use numkernel::{Rng, SymMatrix};
pub use trace::Trace;
