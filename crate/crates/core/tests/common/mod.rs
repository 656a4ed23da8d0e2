#![allow(dead_code)]

use ggm_core::numkernel::{cholesky, sample_mvn_precision, Rng, SymMatrix};
use ggm_core::Graph;
use nalgebra::DMatrix;
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

/// `log Γ_p(x)`.
pub fn ln_mvgamma(p: usize, x: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * std::f64::consts::PI.ln() + (1..=p).map(|k| ln_gamma(x + (1.0 - k as f64) / 2.0)).sum::<f64>()
}

/// `log ∫ |Λ|^{(b-2)/2} exp(-tr(DΛ)/2) dΛ` over all positive-definite `Λ`.
pub fn log_normalizer_complete(b: f64, d: &SymMatrix) -> f64 {
    let p = d.dim() as f64;
    let nu = b + p - 1.0;
    let logdet = cholesky(d).unwrap().logdet();
    nu * p / 2.0 * 2f64.ln() - nu / 2.0 * logdet + ln_mvgamma(d.dim(), nu / 2.0)
}

/// Decomposable graph: `Π I(C) / Π I(S)` over cliques and separators.
pub fn log_normalizer_decomposable(b: f64, d: &SymMatrix, cliques: &[Vec<usize>], separators: &[Vec<usize>]) -> f64 {
    let term = |set: &Vec<usize>| log_normalizer_complete(b, &d.select(set));
    cliques.iter().map(term).sum::<f64>() - separators.iter().map(term).sum::<f64>()
}

/// Every graph on at most three vertices is decomposable.
pub fn log_normalizer_small(b: f64, d: &SymMatrix, g: &Graph) -> f64 {
    let p = g.p();
    assert!(p <= 3);
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let (cliques, seps): (Vec<Vec<usize>>, Vec<Vec<usize>>) = match edges.len() {
        0 => ((0..p).map(|v| vec![v]).collect(), vec![]),
        1 => {
            let (i, j) = edges[0];
            let mut c = vec![vec![i, j]];
            c.extend((0..p).filter(|&v| v != i && v != j).map(|v| vec![v]));
            (c, vec![])
        }
        2 if p == 3 => {
            let hub = (0..3).find(|&v| g.degree(v) == 2).unwrap();
            let leaves: Vec<usize> = (0..3).filter(|&v| v != hub).collect();
            (vec![vec![leaves[0], hub], vec![hub, leaves[1]]], vec![vec![hub]])
        }
        _ => (vec![(0..p).collect()], vec![]),
    };
    log_normalizer_decomposable(b, d, &cliques, &seps)
}

/// Exact `P(G | Y)` over all graphs on `p ≤ 3` vertices with `s ~ Beta(a, b)`
/// integrated out.
pub fn graph_posterior(p: usize, b0: f64, d0: &SymMatrix, gram: &SymMatrix, n: usize, a_s: f64, b_s: f64) -> Vec<(Graph, f64)> {
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let m = pairs.len();
    let post_d = d0.add(gram);
    let mut out: Vec<(Graph, f64)> = (0..1usize << m)
        .map(|mask| {
            let edges: Vec<(usize, usize)> = (0..m).filter(|k| mask >> k & 1 == 1).map(|k| pairs[k]).collect();
            let g = Graph::from_edges(p, &edges).unwrap();
            let e = edges.len() as f64;
            let log_prior = ln_beta(a_s + e, b_s + m as f64 - e) - ln_beta(a_s, b_s);
            let lw = log_prior + log_normalizer_small(b0 + n as f64, &post_d, &g) - log_normalizer_small(b0, d0, &g);
            (g, lw)
        })
        .collect();
    let max = out.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = out.iter().map(|x| (x.1 - max).exp()).sum();
    for x in &mut out {
        x.1 = (x.1 - max).exp() / total;
    }
    out
}

pub fn edge_inclusion(posterior: &[(Graph, f64)], i: usize, j: usize) -> f64 {
    posterior.iter().filter(|(g, _)| g.has_edge(i, j)).map(|x| x.1).sum()
}

pub fn gaussian_rows(rng: &mut Rng, lambda: &SymMatrix, n: usize) -> DMatrix<f64> {
    let chol = cholesky(lambda).unwrap();
    let mut y = DMatrix::zeros(n, lambda.dim());
    for r in 0..n {
        y.row_mut(r).copy_from(&sample_mvn_precision(rng, &chol).transpose());
    }
    y
}
