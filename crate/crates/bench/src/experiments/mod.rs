//! The benchmark experiments behind each CLI subcommand.
//!
//! Every experiment writes deterministic result files (identical for the same
//! config and seed) and keeps wall-clock measurements in separate `*timing*`
//! files.

mod compare;
mod fit;
mod table1;
mod table2;
mod tune;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use ggm_core::ggm::CoverStrategy;
use ggm_core::graph::FreeIndexSet;
use ggm_core::gwishart::{
    laplace_mode, mass_from_trace, mass_identity, mass_laplace, posterior_params, sample_block_gibbs, GWishartParams,
    GWishartTarget, LaplaceOptions, MassFactor, WishartPrecision,
};
use ggm_core::hmc::{sample_hmc, HmcConfig, HmcRun};
use ggm_core::numkernel::{Rng, SymMatrix};
use ggm_core::{Graph, PrecisionState};
use nalgebra::{DMatrix, DVector};

use crate::config::Config;
use crate::error::{BenchError, Result};
use crate::ingest::{ingest_returns, split_rows, Dataset};
use crate::synthetic::{generate_case, SyntheticCase};

pub use compare::{bayes_vs_empirical, run_compare, CompareOutcome};
pub use fit::{run_ggm_fit, run_glasso_fit};
pub use table1::{run_table1, Table1Output};
pub use table2::{run_table2, Table2Output};
pub use tune::{run_tune_hmc, TuneRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMethod {
    Identity,
    /// Inverse covariance of a preliminary block Gibbs run on the target.
    GWishartPrelim,
    Laplace,
    /// Restriction of the full-graph Wishart precision.
    WishartPrelim,
}

impl MassMethod {
    pub const ALL: [MassMethod; 4] = [Self::Identity, Self::GWishartPrelim, Self::Laplace, Self::WishartPrelim];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(Self::Identity),
            "gwishart" => Ok(Self::GWishartPrelim),
            "laplace" => Ok(Self::Laplace),
            "wishart" => Ok(Self::WishartPrelim),
            _ => Err(BenchError::Config(format!("unknown mass_method {name:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::GWishartPrelim => "gwishart",
            Self::Laplace => "laplace",
            Self::WishartPrelim => "wishart",
        }
    }
}

pub fn parse_cover(name: &str) -> Result<CoverStrategy> {
    match name {
        "mc" => Ok(CoverStrategy::MaximalCliques),
        "hcc" => Ok(CoverStrategy::Heuristic),
        "edgewise" => Ok(CoverStrategy::Edgewise),
        _ => Err(BenchError::Config(format!("unknown cover {name:?}"))),
    }
}

/// Builds the HMC mass for `params`. `cover` and `burn_in` only matter for the
/// preliminary block Gibbs run.
pub fn build_mass(
    method: MassMethod,
    params: &GWishartParams,
    prelim: usize,
    cover: CoverStrategy,
    burn_in: usize,
    rng: &mut Rng,
) -> Result<MassFactor> {
    Ok(match method {
        MassMethod::Identity => mass_identity(params.free().len()),
        MassMethod::GWishartPrelim => {
            let cover = cover.cover(params.graph(), rng);
            let trace = sample_block_gibbs(params, &cover, &PrecisionState::identity(params.p()), prelim, burn_in, rng)?;
            mass_from_trace(&trace)?
        }
        MassMethod::Laplace => mass_laplace(params, &laplace_mode(params, None, LaplaceOptions::default())?)?,
        MassMethod::WishartPrelim => WishartPrecision::estimate(params.b(), params.d(), prelim, rng)?.restrict(params.free())?,
    })
}

/// How HMC chains leave the identity before burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warmup {
    None,
    /// Newton iterations from the identity to the posterior mode.
    Mode,
}

impl Warmup {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "none" => Ok(Self::None),
            "mode" => Ok(Self::Mode),
            _ => Err(BenchError::Config(format!("unknown warmup {name:?}"))),
        }
    }

    pub fn from_config(config: &Config) -> Result<Self> {
        Self::parse(&config.get("warmup", "mode".to_string())?)
    }
}

/// Timed HMC run from the identity.
pub struct TimedHmc {
    pub run: HmcRun,
    pub warmup_seconds: f64,
    /// Burn-in plus recorded samples.
    pub sampling_seconds: f64,
}

pub fn run_hmc(params: &GWishartParams, config: &HmcConfig, samples: usize, burn_in: usize, warmup: Warmup, rng: &mut Rng) -> Result<TimedHmc> {
    let t = Instant::now();
    let init = warm_start(params, warmup)?;
    let warmup_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let run = sample_hmc(&GWishartTarget::new(params), config, &init, samples, burn_in, rng)?;
    Ok(TimedHmc { run, warmup_seconds, sampling_seconds: t.elapsed().as_secs_f64() })
}

pub fn warm_start(params: &GWishartParams, warmup: Warmup) -> Result<DVector<f64>> {
    let identity = PrecisionState::identity(params.p());
    let start = match warmup {
        Warmup::None => identity,
        Warmup::Mode => laplace_mode(params, Some(&identity), LaplaceOptions::default())?,
    };
    Ok(start.free_vector(params.free()))
}

/// A synthetic case with its posterior under the generating prior
/// `W_G(1, pI)` and the true graph.
pub struct PosteriorCase {
    pub graph: Graph,
    pub truth: PrecisionState,
    pub n: usize,
    pub params: GWishartParams,
}

pub fn posterior_case(case: &SyntheticCase, rng: &mut Rng) -> Result<PosteriorCase> {
    let (graph, truth, y) = generate_case(case, rng)?;
    let p = case.p;
    let prior = GWishartParams::new(1.0, SymMatrix::identity(p).scale(p as f64), graph.clone())?;
    let gram = SymMatrix::symmetrize(&y.tr_mul(&y));
    let params = posterior_params(&prior, &gram, y.nrows())?;
    Ok(PosteriorCase { graph, truth, n: y.nrows(), params })
}

/// Synthetic cases from broadcast `p`, `s`, `n_over_q` lists.
pub fn cases(config: &Config, p: &[usize], s: &[f64], n_over_q: &[f64]) -> Result<Vec<SyntheticCase>> {
    let p = config.list("p", p)?;
    let s = config.list("s", s)?;
    let r = config.list("n_over_q", n_over_q)?;
    let len = p.len().max(s.len()).max(r.len());
    let (p, s, r) = (
        crate::config::expand("p", p, len)?,
        crate::config::expand("s", s, len)?,
        crate::config::expand("n_over_q", r, len)?,
    );
    let out: Vec<SyntheticCase> = (0..len).map(|k| SyntheticCase { p: p[k], s: s[k], n_over_q: r[k] }).collect();
    for c in &out {
        c.validate()?;
    }
    Ok(out)
}

/// Train/test data: the `data` price file when given, otherwise a synthetic
/// case split by `train_fraction`.
pub fn load_dataset(config: &Config, default_case: SyntheticCase, rng: &mut Rng) -> Result<(Dataset, Option<Graph>)> {
    let f = config.get("train_fraction", 0.5)?;
    if let Some(path) = config.string("data") {
        return Ok((ingest_returns(Path::new(path), f)?, None));
    }
    let case = SyntheticCase {
        p: config.get("p", default_case.p)?,
        s: config.get("s", default_case.s)?,
        n_over_q: config.get("n_over_q", default_case.n_over_q)?,
    };
    let (graph, _, y) = generate_case(&case, rng)?;
    let (train, test) = split_rows(&y, f)?;
    let names = (0..case.p).map(|i| format!("x{i}")).collect();
    Ok((Dataset { names, train, test }, Some(graph)))
}

/// Seed stream for run `run` of case `case`.
pub fn run_stream(seed: u64, case: usize, run: usize) -> Rng {
    Rng::stream(seed, ((case as u64) << 32) | run as u64)
}

pub fn write_output(dir: &Path, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join(name))?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_matrix_csv(dir: &Path, name: &str, m: &DMatrix<f64>) -> Result<()> {
    write_output(dir, name, |w| {
        for r in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })
}

pub fn free_len(g: &Graph) -> usize {
    FreeIndexSet::new(g).len()
}

fn status_of(e: &BenchError) -> String {
    format!("failed: {e}")
}
