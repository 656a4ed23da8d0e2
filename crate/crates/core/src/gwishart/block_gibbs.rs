use nalgebra::DMatrix;

use super::{GWishartParams, PrecisionState};
use crate::error::Result;
use crate::graph::CliqueCover;
use crate::numkernel::{cholesky, sample_wishart_factored, CholFactor, Rng};
use crate::trace::Trace;

struct Block {
    clique: Vec<usize>,
    rest: Vec<usize>,
    d_chol: CholFactor,
}

/// A clique cover prepared for repeated sweeps: complements and the
/// factors of `D_{I,I}` are computed once.
pub struct BlockGibbsPlan {
    blocks: Vec<Block>,
    b: f64,
}

impl BlockGibbsPlan {
    pub fn new(params: &GWishartParams, cover: &CliqueCover) -> Result<Self> {
        cover.validate(params.graph())?;
        let p = params.p();
        let blocks = cover
            .cliques
            .iter()
            .map(|clique| {
                let rest: Vec<usize> = (0..p).filter(|v| !clique.contains(v)).collect();
                let d_chol = cholesky(&params.d().select(clique))?;
                Ok(Block { clique: clique.clone(), rest, d_chol })
            })
            .collect::<Result<_>>()?;
        Ok(Self { blocks, b: params.b() })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// One sweep over the cover. For each clique `I` with complement `R`:
    /// `Λ_II ← A + Λ_IR Λ_RR⁻¹ Λ_RI` with `A ~ W(b, D_II)`.
    pub fn sweep(&self, state: &PrecisionState, rng: &mut Rng) -> Result<PrecisionState> {
        let mut lambda = state.lambda().clone();
        for block in &self.blocks {
            let a = sample_wishart_factored(rng, self.b, &block.d_chol)?;
            let k = block.clique.len();
            let mut updated = a.into_matrix();
            if !block.rest.is_empty() {
                let rest_chol = cholesky(&lambda.select(&block.rest))?;
                let cross = DMatrix::from_fn(block.rest.len(), k, |r, c| lambda.get(block.rest[r], block.clique[c]));
                let x = rest_chol.solve_upper_transpose_mat(&cross);
                updated += x.tr_mul(&x);
            }
            for a in 0..k {
                for c in a..k {
                    let v = if a == c { updated[(a, a)] } else { 0.5 * (updated[(a, c)] + updated[(c, a)]) };
                    lambda.set(block.clique[a], block.clique[c], v);
                }
            }
        }
        let chol = cholesky(&lambda)?;
        Ok(PrecisionState::from_parts(lambda, chol))
    }
}

pub fn block_gibbs_step(
    state: &PrecisionState,
    params: &GWishartParams,
    cover: &CliqueCover,
    rng: &mut Rng,
) -> Result<PrecisionState> {
    BlockGibbsPlan::new(params, cover)?.sweep(state, rng)
}

/// Runs `burn_in` sweeps, then records `Λ_𝒱` after each of `n_samples` sweeps.
pub fn sample_block_gibbs(
    params: &GWishartParams,
    cover: &CliqueCover,
    init: &PrecisionState,
    n_samples: usize,
    burn_in: usize,
    rng: &mut Rng,
) -> Result<Trace> {
    let plan = BlockGibbsPlan::new(params, cover)?;
    let mut state = init.clone();
    for _ in 0..burn_in {
        state = plan.sweep(&state, rng)?;
    }
    let mut trace = Trace::with_capacity(params.free().len(), n_samples);
    for _ in 0..n_samples {
        state = plan.sweep(&state, rng)?;
        trace.push_vector(&state.free_vector(params.free()));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{heuristic_clique_cover, maximal_cliques, random_graph, Graph};
    use crate::numkernel::{sample_wishart, SymMatrix};

    #[test]
    fn scalar_gwishart_mean() {
        // p = 1: Gamma(b/2, rate D/2), mean b/D, variance 2b/D².
        let (b, d) = (5.0, 2.0);
        let params = GWishartParams::new(b, SymMatrix::from_diagonal(&[d]), Graph::empty(1)).unwrap();
        let cover = maximal_cliques(params.graph());
        let mut rng = Rng::seed_from_u64(21);
        let n = 100_000;
        let trace = sample_block_gibbs(&params, &cover, &PrecisionState::identity(1), n, 0, &mut rng).unwrap();
        let mean = trace.column_means()[0];
        let sd = (2.0 * b / (d * d) / n as f64).sqrt();
        assert!((mean - b / d).abs() < 3.0 * sd, "mean {mean}");
    }

    #[test]
    fn full_graph_step_matches_wishart_moments() {
        let d = SymMatrix::from_rows(&[&[2.0, 0.3, 0.0], &[0.3, 1.0, -0.2], &[0.0, -0.2, 1.5]]).unwrap();
        let params = GWishartParams::new(4.0, d.clone(), Graph::complete(3)).unwrap();
        let cover = maximal_cliques(params.graph());
        let mut rng = Rng::seed_from_u64(22);
        let n = 40_000;
        let trace = sample_block_gibbs(&params, &cover, &PrecisionState::identity(3), n, 0, &mut rng).unwrap();
        let bg = trace.column_means();
        let mut direct = vec![0.0; 6];
        for _ in 0..n {
            let a = sample_wishart(&mut rng, 4.0, &d).unwrap();
            for (k, &(i, j)) in params.free().pairs().iter().enumerate() {
                direct[k] += a.get(i, j) / n as f64;
            }
        }
        let v = crate::numkernel::inv_pd(&cholesky(&d).unwrap());
        for (k, &(i, j)) in params.free().pairs().iter().enumerate() {
            // Var(A_ij) = n(V_ij² + V_ii V_jj), n = b + p - 1 = 6.
            let var = 6.0 * (v.get(i, j).powi(2) + v.get(i, i) * v.get(j, j));
            let sd = (2.0 * var / n as f64).sqrt();
            assert!((bg[k] - direct[k]).abs() < 3.0 * sd, "coord {k}: {} vs {}", bg[k], direct[k]);
        }
    }

    #[test]
    fn zero_pattern_preserved() {
        let mut rng = Rng::seed_from_u64(23);
        let g = random_graph(&mut rng, 12, 0.3).unwrap();
        let params = GWishartParams::new(3.0, SymMatrix::identity(12).scale(12.0), g.clone()).unwrap();
        let cover = heuristic_clique_cover(&mut rng, &g);
        let plan = BlockGibbsPlan::new(&params, &cover).unwrap();
        let mut state = PrecisionState::identity(12);
        for _ in 0..1000 {
            state = plan.sweep(&state, &mut rng).unwrap();
        }
        assert!(state.respects(&g));
        assert!(PrecisionState::new(state.lambda().clone(), &g).is_ok());
    }

    #[test]
    fn zero_samples_gives_empty_trace() {
        let params = GWishartParams::new(3.0, SymMatrix::identity(2), Graph::complete(2)).unwrap();
        let cover = maximal_cliques(params.graph());
        let trace = sample_block_gibbs(&params, &cover, &PrecisionState::identity(2), 0, 3, &mut Rng::seed_from_u64(0)).unwrap();
        assert!(trace.is_empty());
    }

    #[test]
    fn invalid_cover_rejected() {
        let params = GWishartParams::new(3.0, SymMatrix::identity(3), Graph::complete(3)).unwrap();
        let cover = CliqueCover { cliques: vec![vec![0, 1]] };
        assert!(BlockGibbsPlan::new(&params, &cover).is_err());
    }
}
