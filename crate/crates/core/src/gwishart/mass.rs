use nalgebra::{DMatrix, DVector};

use super::{hessian_energy, vectorize, GWishartParams, PrecisionState};
use crate::error::{Error, Result};
use crate::graph::FreeIndexSet;
use crate::numkernel::{cholesky, sample_wishart_factored, CholFactor, Rng, SymMatrix};
use crate::trace::Trace;

/// HMC mass matrix `M` with its factor and explicit inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFactor {
    mass: SymMatrix,
    chol: CholFactor,
    inv_mass: DMatrix<f64>,
}

impl MassFactor {
    pub fn new(mass: SymMatrix) -> Result<Self> {
        let chol = cholesky(&mass)?;
        let inv_mass = chol.inverse().into_matrix();
        Ok(Self { mass, chol, inv_mass })
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    pub fn mass(&self) -> &SymMatrix {
        &self.mass
    }

    pub fn chol(&self) -> &CholFactor {
        &self.chol
    }

    /// `M⁻¹ v`.
    pub fn apply_inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.inv_mass * v
    }

    /// Momentum draw `p ~ N(0, M)` from standard normal `z`.
    pub fn momentum_from_standard(&self, z: &DVector<f64>) -> DVector<f64> {
        self.chol.mul_upper_transpose(z)
    }

    /// `½ pᵀ M⁻¹ p`.
    pub fn kinetic(&self, p: &DVector<f64>) -> f64 {
        0.5 * p.dot(&self.apply_inverse(p))
    }
}

pub fn mass_identity(dim: usize) -> MassFactor {
    MassFactor::new(SymMatrix::identity(dim)).expect("identity is PD")
}

const BATCH: usize = 256;

/// Streaming unbiased covariance; rows are processed in fixed-size batches
/// so identical row sequences give bit-identical results.
struct CovAccumulator {
    dim: usize,
    n: usize,
    shift: Option<Vec<f64>>,
    sum: DVector<f64>,
    outer: DMatrix<f64>,
    batch: DMatrix<f64>,
    filled: usize,
}

impl CovAccumulator {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            n: 0,
            shift: None,
            sum: DVector::zeros(dim),
            outer: DMatrix::zeros(dim, dim),
            batch: DMatrix::zeros(BATCH, dim),
            filled: 0,
        }
    }

    fn push(&mut self, row: &[f64]) {
        let shift = self.shift.get_or_insert_with(|| row.to_vec());
        for (k, (&v, &s)) in row.iter().zip(shift.iter()).enumerate() {
            self.batch[(self.filled, k)] = v - s;
        }
        self.filled += 1;
        self.n += 1;
        if self.filled == BATCH {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.filled == 0 {
            return;
        }
        let rows = self.batch.rows(0, self.filled);
        // `tr_mul` works by dot products; an explicit transpose reaches the
        // blocked GEMM kernel.
        self.outer.gemm(1.0, &rows.transpose(), &rows, 1.0);
        for r in 0..self.filled {
            for k in 0..self.dim {
                self.sum[k] += rows[(r, k)];
            }
        }
        self.filled = 0;
    }

    fn covariance(mut self) -> SymMatrix {
        self.flush();
        let n = self.n as f64;
        let mean = &self.sum / n;
        let cov = (&self.outer - &mean * mean.transpose() * n) / (n - 1.0);
        SymMatrix::symmetrize(&cov)
    }
}

/// Inverse of an empirical covariance, retrying once with a ridge of
/// `1e-10 · mean(diag)`.
fn precision_from_covariance(cov: SymMatrix) -> Result<SymMatrix> {
    let chol = match cholesky(&cov) {
        Ok(c) => c,
        Err(_) => {
            let diag = cov.diagonal();
            let ridge = 1e-10 * diag.iter().sum::<f64>() / diag.len() as f64;
            let mut jittered = cov;
            for i in 0..jittered.dim() {
                jittered.set(i, i, jittered.get(i, i) + ridge);
            }
            cholesky(&jittered).map_err(|_| Error::DegenerateTrace("empirical covariance is rank deficient".into()))?
        }
    };
    Ok(chol.inverse())
}

/// `M = Σ̂⁻¹` from the empirical covariance of a preliminary trace.
pub fn mass_from_trace(trace: &Trace) -> Result<MassFactor> {
    if trace.len() <= trace.dim() {
        return Err(Error::DegenerateTrace(format!("{} samples for dimension {}", trace.len(), trace.dim())));
    }
    let mut acc = CovAccumulator::new(trace.dim());
    trace.rows().for_each(|r| acc.push(r));
    MassFactor::new(precision_from_covariance(acc.covariance())?)
        .map_err(|_| Error::DegenerateTrace("precision estimate is not positive definite".into()))
}

/// `M = ∇²E` at the mode.
pub fn mass_laplace(params: &GWishartParams, mode: &PrecisionState) -> Result<MassFactor> {
    MassFactor::new(hessian_energy(mode, params))
}

/// Empirical precision `K` of `Λ_𝒲` under the full-graph Wishart `W(b, D)`.
///
/// The mass for any graph is the submatrix of `K` on that graph's free
/// coordinates, so one estimate serves every graph sharing `(b, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartPrecision {
    full: FreeIndexSet,
    k: SymMatrix,
}

impl WishartPrecision {
    pub fn estimate(b: f64, d: &SymMatrix, n_prelim: usize, rng: &mut Rng) -> Result<Self> {
        let p = d.dim();
        let full = FreeIndexSet::full(p);
        if n_prelim <= full.len() {
            return Err(Error::DegenerateTrace(format!("{n_prelim} preliminary draws for {} coordinates", full.len())));
        }
        let d_chol = cholesky(d)?;
        let mut acc = CovAccumulator::new(full.len());
        for _ in 0..n_prelim {
            let draw = sample_wishart_factored(rng, b, &d_chol)?;
            acc.push(vectorize(&draw, &full).as_slice());
        }
        let k = precision_from_covariance(acc.covariance())?;
        Ok(Self { full, k })
    }

    pub fn p(&self) -> usize {
        self.full.p()
    }

    pub fn k(&self) -> &SymMatrix {
        &self.k
    }

    /// `K_{𝒱,𝒱}` for the given free set.
    pub fn restrict(&self, free: &FreeIndexSet) -> Result<MassFactor> {
        assert_eq!(free.p(), self.p(), "graph size");
        let idx: Vec<usize> = free
            .pairs()
            .iter()
            .map(|&(i, j)| self.full.index_of(i, j).expect("full index set contains every pair"))
            .collect();
        MassFactor::new(self.k.select(&idx))
    }
}

pub fn mass_wishart_conditioned(params: &GWishartParams, n_prelim: usize, rng: &mut Rng) -> Result<MassFactor> {
    WishartPrecision::estimate(params.b(), params.d(), n_prelim, rng)?.restrict(params.free())
}

/// Full-graph Wishart draws vectorized over `𝒲`, in the order used by
/// [`WishartPrecision::estimate`].
pub fn wishart_draw_trace(b: f64, d: &SymMatrix, n: usize, rng: &mut Rng) -> Result<Trace> {
    let full = FreeIndexSet::full(d.dim());
    let d_chol = cholesky(d)?;
    let mut trace = Trace::with_capacity(full.len(), n);
    for _ in 0..n {
        trace.push_vector(&vectorize(&sample_wishart_factored(rng, b, &d_chol)?, &full));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_graph, Graph};
    use crate::gwishart::{laplace_mode, LaplaceOptions};
    use crate::numkernel::sample_std_gaussian;

    #[test]
    fn identity_mass() {
        let m = mass_identity(3);
        assert_eq!(m.mass(), &SymMatrix::identity(3));
        assert_eq!(m.chol().upper(), &DMatrix::identity(3, 3));
        assert_eq!(mass_identity(1).dim(), 1);
    }

    #[test]
    fn trace_of_standard_normals_gives_identity() {
        let mut rng = Rng::seed_from_u64(41);
        let mut trace = Trace::new(4);
        for _ in 0..50_000 {
            trace.push_vector(&sample_std_gaussian(&mut rng, 4));
        }
        let m = mass_from_trace(&trace).unwrap();
        // sd of a precision entry estimate ≈ sqrt(2/n) ≈ 0.006.
        assert!(m.mass().max_abs_diff(&SymMatrix::identity(4)) < 0.03);
    }

    #[test]
    fn constant_trace_is_degenerate() {
        let mut trace = Trace::new(2);
        for _ in 0..10 {
            trace.push(&[1.0, 2.0]);
        }
        assert!(matches!(mass_from_trace(&trace), Err(Error::DegenerateTrace(_))));
        let mut short = Trace::new(3);
        short.push(&[1.0, 2.0, 3.0]);
        assert!(matches!(mass_from_trace(&short), Err(Error::DegenerateTrace(_))));
    }

    #[test]
    fn laplace_scalar_mass() {
        let params = GWishartParams::new(4.0, SymMatrix::from_diagonal(&[2.0]), Graph::empty(1)).unwrap();
        let mode = laplace_mode(&params, None, LaplaceOptions::default()).unwrap();
        let m = mass_laplace(&params, &mode).unwrap();
        assert!((m.mass().get(0, 0) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn laplace_mass_rejects_indefinite_hessian() {
        // b < 2 flips the sign of the curvature.
        let params = GWishartParams::new(1.0, SymMatrix::identity(2), Graph::complete(2)).unwrap();
        assert!(mass_laplace(&params, &PrecisionState::identity(2)).is_err());
    }

    #[test]
    fn full_graph_conditioned_equals_trace_estimate() {
        let d = SymMatrix::from_rows(&[&[3.0, 0.5, 0.0], &[0.5, 2.0, 0.1], &[0.0, 0.1, 4.0]]).unwrap();
        let params = GWishartParams::new(12.0, d.clone(), Graph::complete(3)).unwrap();
        let m4 = mass_wishart_conditioned(&params, 2000, &mut Rng::seed_from_u64(5)).unwrap();
        let trace = wishart_draw_trace(12.0, &d, 2000, &mut Rng::seed_from_u64(5)).unwrap();
        let m2 = mass_from_trace(&trace).unwrap();
        assert_eq!(m4.mass(), m2.mass());
    }

    #[test]
    fn graph_edit_mass_is_submatrix_of_same_k() {
        let mut rng = Rng::seed_from_u64(43);
        let g = random_graph(&mut rng, 5, 0.5).unwrap();
        let d = SymMatrix::identity(5).scale(5.0);
        let k = WishartPrecision::estimate(20.0, &d, 1000, &mut rng).unwrap();
        let mut g2 = g.clone();
        g2.toggle_edge(0, 1);
        for graph in [g, g2] {
            let free = FreeIndexSet::new(&graph);
            let m = k.restrict(&free).unwrap();
            let full = FreeIndexSet::full(5);
            for (a, &(i, j)) in free.pairs().iter().enumerate() {
                for (c, &(k2, l)) in free.pairs().iter().enumerate() {
                    let expected = k.k().get(full.index_of(i, j).unwrap(), full.index_of(k2, l).unwrap());
                    assert_eq!(m.mass().get(a, c), expected);
                }
            }
        }
    }

    #[test]
    fn too_few_preliminary_draws() {
        let params = GWishartParams::new(12.0, SymMatrix::identity(3), Graph::complete(3)).unwrap();
        assert!(mass_wishart_conditioned(&params, 6, &mut Rng::seed_from_u64(0)).is_err());
    }
}
