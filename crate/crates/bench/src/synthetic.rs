//! Synthetic sparse GGM test cases.

use ggm_core::graph::{heuristic_clique_cover, random_graph};
use ggm_core::gwishart::{BlockGibbsPlan, GWishartParams};
use ggm_core::numkernel::{sample_mvn_precision, Rng, SymMatrix};
use ggm_core::{Graph, PrecisionState};
use nalgebra::DMatrix;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticCase {
    pub p: usize,
    pub s: f64,
    pub n_over_q: f64,
}

impl SyntheticCase {
    /// Expected number of free variables, `p + s·p(p-1)/2`.
    pub fn q(&self) -> f64 {
        let p = self.p as f64;
        p + self.s * p * (p - 1.0) / 2.0
    }

    pub fn n(&self) -> usize {
        (self.n_over_q * self.q()).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || !(0.0..=1.0).contains(&self.s) || self.n() < 1 {
            return Err(BenchError::Config(format!("invalid case {self:?}")));
        }
        Ok(())
    }
}

/// Sweeps used to draw the true precision.
pub const GENERATOR_SWEEPS: usize = 1000;

/// Draws `G` with Bernoulli(s) edges, takes `Λ` as the 1000th block Gibbs
/// sample (heuristic cover, started at the identity) from `W_G(1, pI)`, and
/// draws `n` rows from `N(0, Λ⁻¹)`.
pub fn generate_case(case: &SyntheticCase, rng: &mut Rng) -> Result<(Graph, PrecisionState, DMatrix<f64>)> {
    case.validate()?;
    let p = case.p;
    let graph = random_graph(rng, p, case.s)?;
    let prior = GWishartParams::new(1.0, SymMatrix::identity(p).scale(p as f64), graph.clone())?;
    let cover = heuristic_clique_cover(rng, &graph);
    let plan = BlockGibbsPlan::new(&prior, &cover)?;
    let mut lambda = PrecisionState::identity(p);
    for _ in 0..GENERATOR_SWEEPS {
        lambda = plan.sweep(&lambda, rng)?;
    }
    let n = case.n();
    let mut y = DMatrix::zeros(n, p);
    for r in 0..n {
        y.row_mut(r).copy_from(&sample_mvn_precision(rng, lambda.chol()).transpose());
    }
    Ok((graph, lambda, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_follow_q() {
        let case = SyntheticCase { p: 10, s: 0.5, n_over_q: 5.0 };
        assert_eq!(case.q(), 32.5);
        assert_eq!(case.n(), 163);
        assert!(SyntheticCase { p: 3, s: 0.0, n_over_q: 0.0 }.validate().is_err());
    }

    #[test]
    fn reproducible_and_pattern_respecting() {
        let case = SyntheticCase { p: 6, s: 0.4, n_over_q: 2.0 };
        let a = generate_case(&case, &mut Rng::seed_from_u64(5)).unwrap();
        let b = generate_case(&case, &mut Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
        assert!(a.1.respects(&a.0));
        assert_eq!(a.2.shape(), (case.n(), 6));
    }

    #[test]
    fn empty_graph_gives_uncorrelated_columns() {
        let case = SyntheticCase { p: 3, s: 0.0, n_over_q: 2000.0 };
        let (g, lambda, y) = generate_case(&case, &mut Rng::seed_from_u64(6)).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!((0..3).all(|i| (0..3).all(|j| i == j || lambda.lambda().get(i, j) == 0.0)));
        let n = y.nrows() as f64;
        let cov = y.tr_mul(&y) / n;
        for i in 0..3 {
            for j in 0..i {
                let corr = cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
                assert!(corr.abs() < 4.0 / n.sqrt(), "{corr}");
            }
        }
    }
}
