//! Browser bindings: GWishart sampling, clique covers and the glasso path.

use ggm_core::glasso::{glasso_fit_from, GlassoConfig};
use ggm_core::graph::{heuristic_clique_cover, maximal_cliques, random_graph};
use ggm_core::gwishart::{sample_block_gibbs, BlockGibbsPlan, GWishartTarget, WishartPrecision};
use ggm_core::hmc::{sample_hmc, HmcConfig};
use ggm_core::numkernel::{sample_mvn_precision, Rng, SymMatrix};
use ggm_core::{GWishartParams, PrecisionState};
use nalgebra::DMatrix;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn params(p: usize, s: f64, b: f64, rng: &mut Rng) -> ggm_core::Result<GWishartParams> {
    let graph = random_graph(rng, p, s)?;
    GWishartParams::new(b, SymMatrix::identity(p), graph)
}

/// Draws `samples` values of `Λ₀₀` from `W_G(b, I)` on a random graph with
/// edge probability `s`, by block Gibbs (`"bg"`) or HMC (`"hmc"`).
pub fn sample_first_diagonal(p: usize, s: f64, b: f64, samples: usize, sampler: &str, seed: u64) -> ggm_core::Result<Vec<f64>> {
    let mut rng = Rng::seed_from_u64(seed);
    let params = params(p, s, b, &mut rng)?;
    let init = PrecisionState::identity(p);
    let trace = match sampler {
        "hmc" => {
            let mass = WishartPrecision::estimate(b, params.d(), 20 * p * p + 200, &mut rng)?.restrict(params.free())?;
            let config = HmcConfig::new(0.2, 1.5, mass)?;
            let target = GWishartTarget::new(&params);
            sample_hmc(&target, &config, &init.free_vector(params.free()), samples, 100, &mut rng)?.trace
        }
        _ => sample_block_gibbs(&params, &heuristic_clique_cover(&mut rng, params.graph()), &init, samples, 100, &mut rng)?,
    };
    Ok(trace.column(0))
}

/// `[edges, maximal cliques, heuristic cover size]` for a random graph.
pub fn cover_sizes(p: usize, s: f64, seed: u64) -> ggm_core::Result<Vec<f64>> {
    let mut rng = Rng::seed_from_u64(seed);
    let g = random_graph(&mut rng, p, s)?;
    let hcc = heuristic_clique_cover(&mut rng, &g);
    Ok(vec![g.edge_count() as f64, maximal_cliques(&g).len() as f64, hcc.len() as f64])
}

/// Off-diagonal non-zeros of glasso fits across `grid` penalties on data
/// from a random sparse model; returns `[γ₀, nz₀, γ₁, nz₁, …]`.
pub fn glasso_path(p: usize, s: f64, n: usize, grid: usize, seed: u64) -> ggm_core::Result<Vec<f64>> {
    let mut rng = Rng::seed_from_u64(seed);
    let prior = params(p, s, 3.0, &mut rng)?;
    let cover = heuristic_clique_cover(&mut rng, prior.graph());
    let plan = BlockGibbsPlan::new(&prior, &cover)?;
    let mut lambda = PrecisionState::identity(p);
    for _ in 0..100 {
        lambda = plan.sweep(&lambda, &mut rng)?;
    }
    let mut y = DMatrix::zeros(n, p);
    for r in 0..n {
        y.row_mut(r).copy_from(&sample_mvn_precision(&mut rng, lambda.chol()).transpose());
    }
    let cov = SymMatrix::symmetrize(&(y.tr_mul(&y) / n as f64));
    let gamma_max = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).map(|(i, j)| cov.get(i, j).abs()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(2 * grid);
    let mut warm: Option<SymMatrix> = None;
    for k in (1..=grid).rev() {
        let gamma = gamma_max * k as f64 / grid as f64;
        let fit = glasso_fit_from(&cov, GlassoConfig::new(gamma), warm.as_ref())?;
        out.extend([gamma, fit.off_diagonal_nonzeros() as f64]);
        warm = Some(fit.precision);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = sampleFirstDiagonal)]
pub fn sample_first_diagonal_js(p: usize, s: f64, b: f64, samples: usize, sampler: &str, seed: u32) -> Result<Vec<f64>, JsValue> {
    sample_first_diagonal(p, s, b, samples, sampler, seed as u64).map_err(js_err)
}

#[wasm_bindgen(js_name = coverSizes)]
pub fn cover_sizes_js(p: usize, s: f64, seed: u32) -> Result<Vec<f64>, JsValue> {
    cover_sizes(p, s, seed as u64).map_err(js_err)
}

#[wasm_bindgen(js_name = glassoPath)]
pub fn glasso_path_js(p: usize, s: f64, n: usize, grid: usize, seed: u32) -> Result<Vec<f64>, JsValue> {
    glasso_path(p, s, n, grid, seed as u64).map_err(js_err)
}

