//! Dense linear algebra and seedable random primitives shared by every sampler.

mod linalg;
mod random;

pub use linalg::{cholesky, inv_pd, logdet_pd, CholFactor, SymMatrix};
pub use random::{sample_mvn_precision, sample_std_gaussian, sample_wishart, sample_wishart_factored, Rng};
