use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::linalg::{cholesky, CholFactor, SymMatrix};
use crate::error::{Error, Result};

/// Seedable ChaCha8 generator.
///
/// Child generators are derived with [`Rng::stream`]: the same 64-bit seed
/// with a distinct ChaCha stream id gives an independent sequence, so chain
/// `k` of an experiment seeded with `s` always uses `Rng::stream(s, k)`.
#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self(inner)
    }

    /// Derives a child generator from the next output of this one.
    pub fn split(&mut self) -> Self {
        Self::seed_from_u64(self.0.next_u64())
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

pub fn sample_std_gaussian(rng: &mut Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

/// Draws `y ~ N(0, Λ⁻¹)` by solving `Φ y = z` where `Λ = ΦᵀΦ`.
pub fn sample_mvn_precision(rng: &mut Rng, precision_chol: &CholFactor) -> DVector<f64> {
    let z = sample_std_gaussian(rng, precision_chol.dim());
    precision_chol.solve_upper(&z)
}

/// Draws from the Wishart with density `∝ |A|^{(b-2)/2} exp(-tr(D A)/2)`.
///
/// This is the textbook Wishart with `n = b + dim - 1` degrees of freedom and
/// scale `D⁻¹`, drawn with the Bartlett decomposition. Mean `(b + dim - 1) D⁻¹`.
pub fn sample_wishart(rng: &mut Rng, b: f64, d_scale: &SymMatrix) -> Result<SymMatrix> {
    let factor = cholesky(d_scale)?;
    sample_wishart_factored(rng, b, &factor)
}

/// As [`sample_wishart`] with a precomputed factor of `D`.
pub fn sample_wishart_factored(rng: &mut Rng, b: f64, d_chol: &CholFactor) -> Result<SymMatrix> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("Wishart degrees of freedom b = {b}")));
    }
    let dim = d_chol.dim();
    let dof = b + dim as f64 - 1.0;
    let mut bartlett = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let chi = ChiSquared::new(dof - i as f64).expect("positive chi-square dof");
        bartlett[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            bartlett[(i, j)] = StandardNormal.sample(rng);
        }
    }
    // D⁻¹ = Φ⁻¹Φ⁻ᵀ, so A = (Φ⁻¹B)(Φ⁻¹B)ᵀ.
    let c = d_chol.solve_upper_mat(&bartlett);
    let a = &c * c.transpose();
    Ok(SymMatrix::from_upper_fn(dim, |i, j| a[(i, j)]))
}
