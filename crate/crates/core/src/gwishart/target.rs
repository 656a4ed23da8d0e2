use nalgebra::DVector;

use super::GWishartParams;
use crate::graph::FreeIndexSet;
use crate::hmc::Target;
use crate::numkernel::{cholesky, SymMatrix};

/// GWishart energy on the free coordinates `Λ_𝒱`, for HMC.
///
/// Points whose embedded matrix fails the Cholesky test are invalid.
#[derive(Debug, Clone)]
pub struct GWishartTarget {
    free: FreeIndexSet,
    half_b_minus_two: f64,
    /// Coefficients of the linear term: `tr(DΛ)/2 = Σ linear[u] x[u]`.
    linear: DVector<f64>,
}

impl GWishartTarget {
    pub fn new(params: &GWishartParams) -> Self {
        let free = params.free().clone();
        let d = params.d();
        let linear = DVector::from_iterator(
            free.len(),
            free.pairs().iter().map(|&(i, j)| if i == j { 0.5 * d.get(i, i) } else { d.get(i, j) }),
        );
        Self { free, half_b_minus_two: 0.5 * (params.b() - 2.0), linear }
    }

    pub fn free(&self) -> &FreeIndexSet {
        &self.free
    }

    fn embed(&self, x: &DVector<f64>) -> SymMatrix {
        super::embed(x, &self.free)
    }
}

impl Target for GWishartTarget {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn energy(&self, x: &DVector<f64>) -> Option<f64> {
        let chol = cholesky(&self.embed(x)).ok()?;
        Some(-self.half_b_minus_two * chol.logdet() + self.linear.dot(x))
    }

    fn energy_and_gradient(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let chol = cholesky(&self.embed(x)).ok()?;
        let e = -self.half_b_minus_two * chol.logdet() + self.linear.dot(x);
        let sigma = chol.inverse();
        let h = self.half_b_minus_two;
        let grad = DVector::from_iterator(
            self.free.len(),
            self.free.pairs().iter().zip(self.linear.iter()).map(|(&(i, j), &c)| {
                let scale = if i == j { h } else { 2.0 * h };
                c - scale * sigma.get(i, j)
            }),
        );
        Some((e, grad))
    }
}
