//! Spike-and-slab Gaussian graphical model.
//!
//! `G | s` has independent Bernoulli(s) edges, `s ~ Beta(a_s, b_s)` and
//! `Λ | G ~ W_G(b₀, D₀)`. The joint sampler alternates a precision refresh
//! under `W_G(b₀ + n, D₀ + U)`, reversible-jump edge flips and a conjugate
//! update of `s`.
//!
//! An edge flip relabels the pair `(i, j)` to the last two positions and
//! edits the single Cholesky element `Φ_{p-2,p-1}`. Setting it to the
//! completion value `φ₀` makes `Λᵢⱼ` zero; any other value gives a matrix
//! with the edge present. The unknown ratio of prior normalizing constants
//! is replaced by an exchange-style estimate built from an auxiliary draw
//! under the prior on the proposed graph.

use std::io::{self, BufRead, Write};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Beta, Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{edgewise_cover, heuristic_clique_cover, maximal_cliques, CliqueCover, FreeIndexSet, Graph};
use crate::gwishart::{BlockGibbsPlan, GWishartParams, GWishartTarget, PrecisionState, WishartPrecision};
use crate::hmc::{HmcChain, HmcConfig};
use crate::numkernel::{cholesky, Rng, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoverStrategy {
    MaximalCliques,
    Edgewise,
    Heuristic,
}

impl CoverStrategy {
    pub fn cover(self, g: &Graph, rng: &mut Rng) -> CliqueCover {
        match self {
            Self::MaximalCliques => maximal_cliques(g),
            Self::Edgewise => edgewise_cover(g),
            Self::Heuristic => heuristic_clique_cover(rng, g),
        }
    }
}

/// Mass matrix for HMC refreshes; must work for every graph.
#[derive(Debug, Clone)]
pub enum HmcMass {
    Identity,
    /// Posterior Wishart precision, restricted to each graph's free set.
    Wishart(Arc<WishartPrecision>),
}

#[derive(Debug, Clone)]
pub enum InnerSampler {
    Hmc { alpha: f64, beta: f64, mass: HmcMass },
    BlockGibbs(CoverStrategy),
}

#[derive(Debug, Clone)]
pub struct GgmConfig {
    pub b0: f64,
    pub d0: SymMatrix,
    pub a_s: f64,
    pub b_s: f64,
    /// Standard deviation of the Cholesky-element proposal.
    pub sigma_e: f64,
    pub inner: InnerSampler,
    pub refresh_steps: usize,
    /// Block Gibbs sweeps for the auxiliary prior draw.
    pub aux_sweeps: usize,
    pub aux_cover: CoverStrategy,
    /// Edge proposals per iteration; `None` scans all pairs.
    pub proposals_per_iteration: Option<usize>,
}

impl GgmConfig {
    /// Prior `W_G(1 + n₀, (p + n₀) I)` with `n₀ = 10`, `s ~ Beta(1, 1)`,
    /// block Gibbs refreshes over maximal cliques.
    pub fn new(p: usize) -> Self {
        let n0 = 10.0;
        Self {
            b0: 1.0 + n0,
            d0: SymMatrix::identity(p).scale(p as f64 + n0),
            a_s: 1.0,
            b_s: 1.0,
            sigma_e: 0.1,
            inner: InnerSampler::BlockGibbs(CoverStrategy::MaximalCliques),
            refresh_steps: 1,
            aux_sweeps: 1,
            aux_cover: CoverStrategy::MaximalCliques,
            proposals_per_iteration: None,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let positive = [self.b0, self.a_s, self.b_s, self.sigma_e].iter().all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.aux_sweeps == 0 {
            return Err(Error::InvalidParameter("GGM hyperparameters must be positive".into()));
        }
        if self.d0.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: self.d0.dim() });
        }
        if let InnerSampler::Hmc { alpha, beta, .. } = self.inner {
            if !(alpha > 0.0 && beta > 0.0) {
                return Err(Error::InvalidParameter(format!("HMC alpha = {alpha}, beta = {beta}")));
            }
        }
        Ok(())
    }

    pub fn prior(&self, graph: Graph) -> Result<GWishartParams> {
        GWishartParams::new(self.b0, self.d0.clone(), graph)
    }
}

/// Sufficient statistics of zero-mean data.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSummary {
    pub n: usize,
    pub p: usize,
    /// `U = YᵀY`.
    pub gram: SymMatrix,
}

impl DataSummary {
    /// From an `n × p` matrix of observations.
    pub fn from_rows(y: &DMatrix<f64>) -> Self {
        Self { n: y.nrows(), p: y.ncols(), gram: SymMatrix::symmetrize(&y.tr_mul(y)) }
    }

    pub fn empty(p: usize) -> Self {
        Self { n: 0, p, gram: SymMatrix::zeros(p) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GgmState {
    pub graph: Graph,
    pub precision: PrecisionState,
    pub s: f64,
}

impl GgmState {
    pub fn new(graph: Graph, precision: PrecisionState, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("edge probability s = {s}")));
        }
        if !precision.respects(&graph) {
            return Err(Error::InvalidParameter("precision does not respect the graph".into()));
        }
        Ok(Self { graph, precision, s })
    }

    /// Empty graph with the diagonal posterior mean `(b₀ + n) / (D₀ + U)ᵢᵢ`.
    pub fn empty(data: &DataSummary, config: &GgmConfig) -> Result<Self> {
        let b = config.b0 + data.n as f64;
        let diag: Vec<f64> = (0..data.p).map(|i| b / (config.d0.get(i, i) + data.gram.get(i, i))).collect();
        let graph = Graph::empty(data.p);
        let precision = PrecisionState::new(SymMatrix::from_diagonal(&diag), &graph)?;
        Self::new(graph, precision, 0.5)
    }

    /// Complete graph at the conjugate posterior mean
    /// `(b₀ + n + p − 1)(D₀ + U)⁻¹`.
    pub fn initial(data: &DataSummary, config: &GgmConfig) -> Result<Self> {
        let nu = config.b0 + data.n as f64 + data.p as f64 - 1.0;
        let graph = Graph::complete(data.p);
        let precision = PrecisionState::new(cholesky(&config.d0.add(&data.gram))?.inverse().scale(nu), &graph)?;
        Self::new(graph, precision, 0.5)
    }
}

fn posterior(graph: &Graph, data: &DataSummary, config: &GgmConfig) -> Result<GWishartParams> {
    GWishartParams::new(config.b0 + data.n as f64, config.d0.add(&data.gram), graph.clone())
}

/// Replaces the precision with `refresh_steps` transitions of the inner
/// sampler targeting `W_G(b₀ + n, D₀ + U)`.
pub fn refresh_precision(state: &GgmState, data: &DataSummary, config: &GgmConfig, rng: &mut Rng) -> Result<GgmState> {
    if config.refresh_steps == 0 {
        return Ok(state.clone());
    }
    let params = posterior(&state.graph, data, config)?;
    let precision = match &config.inner {
        InnerSampler::BlockGibbs(strategy) => {
            let plan = BlockGibbsPlan::new(&params, &strategy.cover(&state.graph, rng))?;
            let mut current = state.precision.clone();
            for _ in 0..config.refresh_steps {
                current = plan.sweep(&current, rng)?;
            }
            current
        }
        InnerSampler::Hmc { alpha, beta, mass } => {
            let mass = match mass {
                HmcMass::Identity => crate::gwishart::mass_identity(params.free().len()),
                HmcMass::Wishart(k) => k.restrict(params.free())?,
            };
            let hmc = HmcConfig::new(*alpha, *beta, mass)?;
            let target = GWishartTarget::new(&params);
            let mut chain = HmcChain::new(&target, &hmc, state.precision.free_vector(params.free()))?;
            for _ in 0..config.refresh_steps {
                chain.step(rng);
            }
            PrecisionState::from_free_vector(chain.position(), params.free())?
        }
    };
    Ok(GgmState { graph: state.graph.clone(), precision, s: state.s })
}

/// Upper Cholesky quantities of `Λ` relabelled so that `(i, j)` sit at
/// positions `a = p-2`, `c = p-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFactor {
    pub i: usize,
    pub j: usize,
    pub phi_aa: f64,
    pub phi_ac: f64,
    /// The value of `Φ_ac` that makes `Λᵢⱼ = 0`.
    pub phi0: f64,
}

pub fn edge_factor(lambda: &SymMatrix, i: usize, j: usize) -> Result<EdgeFactor> {
    let p = lambda.dim();
    assert!(i != j && i < p && j < p, "edge ({i}, {j}) for p = {p}");
    let mut order: Vec<usize> = (0..p).filter(|&v| v != i && v != j).collect();
    order.extend([i, j]);
    let phi = cholesky(&lambda.select(&order))?;
    let u = phi.upper();
    let (a, c) = (p - 2, p - 1);
    let cross: f64 = (0..a).map(|m| u[(m, a)] * u[(m, c)]).sum();
    Ok(EdgeFactor { i, j, phi_aa: u[(a, a)], phi_ac: u[(a, c)], phi0: -cross / u[(a, a)] })
}

/// `Λ` with `Φ_ac` replaced by `phi`. Only `Λᵢⱼ` and `Λⱼⱼ` change; `phi =
/// φ₀` gives an exact zero at `(i, j)`.
pub fn edit_edge(lambda: &SymMatrix, f: &EdgeFactor, phi: f64) -> SymMatrix {
    let mut out = lambda.clone();
    let off = if phi == f.phi0 { 0.0 } else { f.phi_aa * (phi - f.phi0) };
    out.set(f.i, f.j, off);
    out.set(f.j, f.j, lambda.get(f.j, f.j) - f.phi_ac * f.phi_ac + phi * phi);
    out
}

/// Unnormalized `log f(Λ; b, D) = ((b-2)/2) log|Λ| - tr(DΛ)/2`.
fn log_density(state: &PrecisionState, b: f64, d: &SymMatrix) -> f64 {
    0.5 * (b - 2.0) * state.chol().logdet() - 0.5 * d.trace_product(state.lambda())
}

fn log_proposal(x: f64, mean: f64, sigma: f64) -> f64 {
    -0.5 * ((x - mean) / sigma).powi(2)
}

/// Proposes flipping a uniformly chosen pair.
pub fn edge_flip_move(state: &GgmState, data: &DataSummary, config: &GgmConfig, rng: &mut Rng) -> Result<(GgmState, bool)> {
    let p = state.graph.p();
    if p < 2 {
        return Err(Error::InvalidParameter("edge moves need p >= 2".into()));
    }
    let i = rng.random_range(0..p);
    let mut j = rng.random_range(0..p - 1);
    if j >= i {
        j += 1;
    }
    edge_flip_pair(state, data, config, (i.min(j), i.max(j)), rng)
}

/// Proposes flipping the given pair. Failed factorizations reject.
pub fn edge_flip_pair(
    state: &GgmState,
    data: &DataSummary,
    config: &GgmConfig,
    (i, j): (usize, usize),
    rng: &mut Rng,
) -> Result<(GgmState, bool)> {
    match propose_flip(state, data, config, i, j, rng) {
        Ok(Some(next)) => Ok((next, true)),
        Ok(None) | Err(Error::NotPositiveDefinite { .. }) => Ok((state.clone(), false)),
        Err(e) => Err(e),
    }
}

fn propose_flip(state: &GgmState, data: &DataSummary, config: &GgmConfig, i: usize, j: usize, rng: &mut Rng) -> Result<Option<GgmState>> {
    let sigma = config.sigma_e;
    let normal = |rng: &mut Rng, mean: f64| Normal::new(mean, sigma).expect("sigma validated").sample(rng);
    let adding = !state.graph.has_edge(i, j);
    let mut proposed_graph = state.graph.clone();
    proposed_graph.set_edge(i, j, adding);
    let lambda = state.precision.lambda();

    let f = edge_factor(lambda, i, j)?;
    let (new_phi, log_fwd) = if adding {
        let phi = normal(rng, f.phi0);
        (phi, f.phi_aa.ln() - log_proposal(phi, f.phi0, sigma))
    } else {
        (f.phi0, log_proposal(f.phi_ac, f.phi0, sigma) - f.phi_aa.ln())
    };
    let proposed = PrecisionState::new(edit_edge(lambda, &f, new_phi), &proposed_graph)?;

    // Auxiliary draw under the prior on the proposed graph, then the reverse
    // edit back to the current graph.
    let prior = config.prior(proposed_graph.clone())?;
    let plan = BlockGibbsPlan::new(&prior, &config.aux_cover.cover(&proposed_graph, rng))?;
    let mut aux = proposed.clone();
    for _ in 0..config.aux_sweeps {
        aux = plan.sweep(&aux, rng)?;
    }
    let fa = edge_factor(aux.lambda(), i, j)?;
    let (aux_phi, log_aux) = if adding {
        (fa.phi0, log_proposal(fa.phi_ac, fa.phi0, sigma) - fa.phi_aa.ln())
    } else {
        let phi = normal(rng, fa.phi0);
        (phi, fa.phi_aa.ln() - log_proposal(phi, fa.phi0, sigma))
    };
    let aux_back = PrecisionState::new(edit_edge(aux.lambda(), &fa, aux_phi), &state.graph)?;

    let post_b = config.b0 + data.n as f64;
    let post_d = config.d0.add(&data.gram);
    let log_prior_odds = if adding { (state.s / (1.0 - state.s)).ln() } else { ((1.0 - state.s) / state.s).ln() };
    let log_ratio = log_prior_odds
        + log_density(&proposed, post_b, &post_d)
        - log_density(&state.precision, post_b, &post_d)
        + log_density(&aux_back, config.b0, &config.d0)
        - log_density(&aux, config.b0, &config.d0)
        + log_fwd
        + log_aux;
    let u: f64 = rng.random();
    if log_ratio.is_finite() && u.ln() < log_ratio {
        Ok(Some(GgmState { graph: proposed_graph, precision: proposed, s: state.s }))
    } else {
        Ok(None)
    }
}

/// `s ~ Beta(a_s + #edges, b_s + #non-edges)`.
pub fn sample_s(state: &GgmState, config: &GgmConfig, rng: &mut Rng) -> GgmState {
    let p = state.graph.p();
    let edges = state.graph.edge_count() as f64;
    let pairs = (p * p.saturating_sub(1) / 2) as f64;
    let beta = Beta::new(config.a_s + edges, config.b_s + pairs - edges).expect("positive Beta parameters");
    // Clamp away from the endpoints so the prior odds stay finite.
    let s = beta.sample(rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    GgmState { s, ..state.clone() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    pub iter: usize,
    pub timestamp_ms: f64,
    pub s: f64,
    pub graph: Graph,
    /// Upper-triangular `Λ` values, row-wise, zeros at missing edges.
    pub values: Vec<f64>,
}

impl JointSample {
    pub fn precision(&self) -> Result<PrecisionState> {
        let full = FreeIndexSet::full(self.graph.p());
        PrecisionState::new(crate::gwishart::embed(&DVector::from_column_slice(&self.values), &full), &self.graph)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointTrace {
    pub p: usize,
    pub samples: Vec<JointSample>,
    pub edge_proposals: usize,
    pub edge_accepts: usize,
}

impl JointTrace {
    pub fn edge_acceptance_rate(&self) -> f64 {
        if self.edge_proposals == 0 {
            0.0
        } else {
            self.edge_accepts as f64 / self.edge_proposals as f64
        }
    }

    /// Posterior edge-inclusion frequencies; the diagonal is 1.
    pub fn edge_probabilities(&self) -> SymMatrix {
        let p = self.p;
        let n = self.samples.len().max(1) as f64;
        SymMatrix::from_upper_fn(p, |i, j| {
            if i == j {
                1.0
            } else {
                self.samples.iter().filter(|s| s.graph.has_edge(i, j)).count() as f64 / n
            }
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let labels = FreeIndexSet::full(self.p).labels();
        writeln!(out, "iter,timestamp_ms,s,edges,{}", labels.join(","))?;
        for s in &self.samples {
            let values: Vec<String> = s.values.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{},{},{}", s.iter, s.timestamp_ms, s.s, edge_bitmask_hex(&s.graph), values.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty joint trace".into()))?.map_err(|e| Error::Parse(e.to_string()))?;
        let width = header.split(',').count();
        let q = width.checked_sub(4).ok_or_else(|| Error::Parse("joint trace header too short".into()))?;
        // q = p(p+1)/2.
        let p = ((((8 * q + 1) as f64).sqrt() as usize).saturating_sub(1)) / 2;
        if p * (p + 1) / 2 != q {
            return Err(Error::Parse(format!("{q} value columns is not triangular")));
        }
        let mut samples = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(Error::Parse(format!("expected {width} fields, got {}", fields.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
            samples.push(JointSample {
                iter: fields[0].parse().map_err(|e| Error::Parse(format!("iter: {e}")))?,
                timestamp_ms: num(fields[1])?,
                s: num(fields[2])?,
                graph: parse_edge_bitmask_hex(p, fields[3])?,
                values: fields[4..].iter().map(|f| num(f)).collect::<Result<_>>()?,
            });
        }
        Ok(Self { p, samples, edge_proposals: 0, edge_accepts: 0 })
    }
}

/// Hex bitmask over pairs `(i, j)`, `i < j`, in row-wise order; pair `k` is
/// bit `k`, most significant digit first.
pub fn edge_bitmask_hex(g: &Graph) -> String {
    let p = g.p();
    let bits: Vec<bool> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).map(|(i, j)| g.has_edge(i, j)).collect();
    let digits = bits.len().div_ceil(4).max(1);
    (0..digits)
        .rev()
        .map(|d| {
            let nibble = (0..4).fold(0u32, |acc, b| acc | ((bits.get(4 * d + b).copied().unwrap_or(false) as u32) << b));
            char::from_digit(nibble, 16).expect("nibble < 16")
        })
        .collect()
}

pub fn parse_edge_bitmask_hex(p: usize, hex: &str) -> Result<Graph> {
    let mut g = Graph::empty(p);
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    for (d, ch) in hex.chars().rev().enumerate() {
        let nibble = ch.to_digit(16).ok_or_else(|| Error::Parse(format!("bad hex digit {ch:?}")))?;
        for b in 0..4 {
            if nibble & (1 << b) != 0 {
                let &(i, j) = pairs.get(4 * d + b).ok_or_else(|| Error::Parse("bitmask longer than pair count".into()))?;
                g.set_edge(i, j, true);
            }
        }
    }
    Ok(g)
}

/// Runs the joint sampler from [`GgmState::initial`], recording every
/// iteration after `burn_in`.
pub fn run_joint_sampler(data: &DataSummary, config: &GgmConfig, n_iter: usize, burn_in: usize, rng: &mut Rng) -> Result<JointTrace> {
    let state = GgmState::initial(data, config)?;
    run_joint_sampler_from(state, data, config, n_iter, burn_in, rng)
}

pub fn run_joint_sampler_from(
    mut state: GgmState,
    data: &DataSummary,
    config: &GgmConfig,
    n_iter: usize,
    burn_in: usize,
    rng: &mut Rng,
) -> Result<JointTrace> {
    let p = data.p;
    config.validate(p)?;
    if state.graph.p() != p || data.gram.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, got: state.graph.p() });
    }
    let full = FreeIndexSet::full(p);
    let mut pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let per_iter = config.proposals_per_iteration.unwrap_or(pairs.len());
    let start = Instant::now();
    let mut trace = JointTrace { p, samples: Vec::with_capacity(n_iter), edge_proposals: 0, edge_accepts: 0 };
    for iter in 0..burn_in + n_iter {
        state = refresh_precision(&state, data, config, rng)?;
        let mut k = 0;
        while k < per_iter && !pairs.is_empty() {
            if k % pairs.len() == 0 {
                pairs.shuffle(rng);
            }
            let (next, accepted) = edge_flip_pair(&state, data, config, pairs[k % pairs.len()], rng)?;
            state = next;
            if iter >= burn_in {
                trace.edge_proposals += 1;
                trace.edge_accepts += accepted as usize;
            }
            k += 1;
        }
        state = sample_s(&state, config, rng);
        if iter >= burn_in {
            trace.samples.push(JointSample {
                iter: iter - burn_in,
                timestamp_ms: start.elapsed().as_secs_f64() * 1e3,
                s: state.s,
                graph: state.graph.clone(),
                values: state.precision.free_vector(&full).as_slice().to_vec(),
            });
        }
    }
    Ok(trace)
}

/// `log p(Y | Λ)` for zero-mean rows with Gram matrix `U`:
/// `(n/2) log|Λ| - tr(UΛ)/2 - (np/2) log 2π`.
pub fn gaussian_loglik_gram(lambda: &SymMatrix, gram: &SymMatrix, n: usize) -> Result<f64> {
    if lambda.dim() != gram.dim() {
        return Err(Error::DimensionMismatch { expected: lambda.dim(), got: gram.dim() });
    }
    let logdet = cholesky(lambda)?.logdet();
    let (n, p) = (n as f64, lambda.dim() as f64);
    Ok(0.5 * n * logdet - 0.5 * gram.trace_product(lambda) - 0.5 * n * p * (2.0 * std::f64::consts::PI).ln())
}

pub fn gaussian_loglik(precision: &PrecisionState, data_test: &DataSummary) -> f64 {
    assert_eq!(precision.lambda().dim(), data_test.p, "dimension");
    let (n, p) = (data_test.n as f64, data_test.p as f64);
    0.5 * n * precision.chol().logdet() - 0.5 * data_test.gram.trace_product(precision.lambda())
        - 0.5 * n * p * (2.0 * std::f64::consts::PI).ln()
}

/// Running mean of the test log likelihood over trace prefixes, paired with
/// each sample's timestamp.
pub fn expected_test_loglik(trace: &JointTrace, data_test: &DataSummary) -> Result<Vec<(f64, f64)>> {
    if trace.samples.is_empty() {
        return Err(Error::InvalidParameter("empty joint trace".into()));
    }
    let mut total = 0.0;
    trace
        .samples
        .iter()
        .enumerate()
        .map(|(k, s)| {
            total += gaussian_loglik(&s.precision()?, data_test);
            Ok((s.timestamp_ms, total / (k + 1) as f64))
        })
        .collect()
}
