//! GWishart density machinery and samplers.
//!
//! Densities use the convention
//! `p(Λ) ∝ |Λ|^{(b-2)/2} exp(-tr(DΛ)/2)` on positive-definite matrices whose
//! off-diagonal zeros follow the graph. Vectors over the free coordinates are
//! always ordered as in [`FreeIndexSet`].

mod block_gibbs;
mod laplace;
mod mass;
mod target;

pub use block_gibbs::{block_gibbs_step, sample_block_gibbs, BlockGibbsPlan};
pub use laplace::{laplace_mode, LaplaceOptions};
pub use mass::{
    mass_from_trace, mass_identity, mass_laplace, mass_wishart_conditioned, wishart_draw_trace, MassFactor,
    WishartPrecision,
};
pub use target::GWishartTarget;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::{FreeIndexSet, Graph};
use crate::numkernel::{cholesky, CholFactor, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct GWishartParams {
    b: f64,
    d: SymMatrix,
    d_chol: CholFactor,
    graph: Graph,
    free: FreeIndexSet,
}

impl GWishartParams {
    pub fn new(b: f64, d: SymMatrix, graph: Graph) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("degrees of freedom b = {b}")));
        }
        if d.dim() != graph.p() {
            return Err(Error::DimensionMismatch { expected: graph.p(), got: d.dim() });
        }
        let d_chol = cholesky(&d)?;
        let free = FreeIndexSet::new(&graph);
        Ok(Self { b, d, d_chol, graph, free })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn d(&self) -> &SymMatrix {
        &self.d
    }

    pub fn d_chol(&self) -> &CholFactor {
        &self.d_chol
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn free(&self) -> &FreeIndexSet {
        &self.free
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    /// Same `(b, D)` on another graph.
    pub fn with_graph(&self, graph: Graph) -> Self {
        assert_eq!(graph.p(), self.p());
        let free = FreeIndexSet::new(&graph);
        Self { b: self.b, d: self.d.clone(), d_chol: self.d_chol.clone(), graph, free }
    }
}

/// Conjugate update: `W_G(b + n, D + YᵀY)`.
pub fn posterior_params(prior: &GWishartParams, data_gram: &SymMatrix, n: usize) -> Result<GWishartParams> {
    if data_gram.dim() != prior.p() {
        return Err(Error::DimensionMismatch { expected: prior.p(), got: data_gram.dim() });
    }
    GWishartParams::new(prior.b + n as f64, prior.d.add(data_gram), prior.graph.clone())
}

/// A precision matrix in `M⁺(G)` with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionState {
    lambda: SymMatrix,
    chol: CholFactor,
}

impl PrecisionState {
    pub fn new(lambda: SymMatrix, graph: &Graph) -> Result<Self> {
        if lambda.dim() != graph.p() {
            return Err(Error::DimensionMismatch { expected: graph.p(), got: lambda.dim() });
        }
        for i in 0..graph.p() {
            for j in i + 1..graph.p() {
                if !graph.has_edge(i, j) && lambda.get(i, j) != 0.0 {
                    return Err(Error::PatternViolation(i, j));
                }
            }
        }
        let chol = cholesky(&lambda)?;
        Ok(Self { lambda, chol })
    }

    pub fn identity(p: usize) -> Self {
        let lambda = SymMatrix::identity(p);
        let chol = cholesky(&lambda).expect("identity is PD");
        Self { lambda, chol }
    }

    /// Rebuilds from free-coordinate values.
    pub fn from_free_vector(x: &DVector<f64>, free: &FreeIndexSet) -> Result<Self> {
        let lambda = embed(x, free);
        let chol = cholesky(&lambda)?;
        Ok(Self { lambda, chol })
    }

    pub(crate) fn from_parts(lambda: SymMatrix, chol: CholFactor) -> Self {
        Self { lambda, chol }
    }

    pub fn lambda(&self) -> &SymMatrix {
        &self.lambda
    }

    pub fn chol(&self) -> &CholFactor {
        &self.chol
    }

    pub fn into_lambda(self) -> SymMatrix {
        self.lambda
    }

    pub fn free_vector(&self, free: &FreeIndexSet) -> DVector<f64> {
        vectorize(&self.lambda, free)
    }

    pub fn respects(&self, graph: &Graph) -> bool {
        (0..graph.p()).all(|i| (i + 1..graph.p()).all(|j| graph.has_edge(i, j) || self.lambda.get(i, j) == 0.0))
    }
}

/// `Λ_𝒱` in free-index order.
pub fn vectorize(m: &SymMatrix, free: &FreeIndexSet) -> DVector<f64> {
    DVector::from_iterator(free.len(), free.pairs().iter().map(|&(i, j)| m.get(i, j)))
}

/// Inverse of [`vectorize`]: non-free entries are exact zeros.
pub fn embed(x: &DVector<f64>, free: &FreeIndexSet) -> SymMatrix {
    assert_eq!(x.len(), free.len(), "free vector length");
    let mut m = SymMatrix::zeros(free.p());
    for (k, &(i, j)) in free.pairs().iter().enumerate() {
        m.set(i, j, x[k]);
    }
    m
}

/// `E(Λ) = -((b-2)/2) log|Λ| + tr(DΛ)/2`.
pub fn energy(state: &PrecisionState, params: &GWishartParams) -> f64 {
    -0.5 * (params.b - 2.0) * state.chol.logdet() + 0.5 * params.d.trace_product(&state.lambda)
}

/// Gradient of [`energy`] with respect to the free coordinates.
pub fn grad_energy(state: &PrecisionState, params: &GWishartParams) -> DVector<f64> {
    let sigma = state.chol.inverse();
    let half = 0.5 * (params.b - 2.0);
    DVector::from_iterator(
        params.free.len(),
        params.free.pairs().iter().map(|&(i, j)| {
            if i == j {
                -half * sigma.get(i, i) + 0.5 * params.d.get(i, i)
            } else {
                -2.0 * half * sigma.get(i, j) + params.d.get(i, j)
            }
        }),
    )
}

/// Hessian of [`energy`] over the free coordinates.
///
/// With `Σ = Λ⁻¹` and `Eᵤ` the symmetric unit matrix of coordinate `u`,
/// `Hᵤᵥ = ((b-2)/2) tr(Σ Eᵤ Σ Eᵥ)`.
pub fn hessian_energy(state: &PrecisionState, params: &GWishartParams) -> SymMatrix {
    let sigma = state.chol.inverse();
    let half = 0.5 * (params.b - 2.0);
    let pairs = params.free.pairs();
    let expand = |(i, j): (usize, usize)| -> ([(usize, usize); 2], usize) {
        if i == j {
            ([(i, i), (i, i)], 1)
        } else {
            ([(i, j), (j, i)], 2)
        }
    };
    SymMatrix::from_upper_fn(pairs.len(), |u, v| {
        let (eu, nu) = expand(pairs[u]);
        let (ev, nv) = expand(pairs[v]);
        let mut acc = 0.0;
        for &(a, b) in &eu[..nu] {
            for &(c, d) in &ev[..nv] {
                acc += sigma.get(b, c) * sigma.get(d, a);
            }
        }
        half * acc
    })
}
