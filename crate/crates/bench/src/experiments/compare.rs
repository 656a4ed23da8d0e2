//! Test log likelihood of the joint Bayesian samplers against glasso and the
//! empirical precision.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ggm_core::ggm::{
    expected_test_loglik, gaussian_loglik_gram, run_joint_sampler, DataSummary, GgmConfig, HmcMass, InnerSampler,
    JointTrace,
};
use ggm_core::glasso::{cv_select_gamma, glasso_fit, GlassoConfig};
use ggm_core::gwishart::WishartPrecision;
use ggm_core::numkernel::{cholesky, Rng, SymMatrix};
use nalgebra::DMatrix;

use super::{load_dataset, parse_cover, write_output, MassMethod};
use crate::config::Config;
use crate::error::{BenchError, Result};
use crate::ingest::Dataset;
use crate::svg::{Plot, Series};
use crate::synthetic::SyntheticCase;

/// Default data: `p = 35`, `s = 0.2`, `n/q = 2`.
pub const DEFAULT_CASE: SyntheticCase = SyntheticCase { p: 35, s: 0.2, n_over_q: 2.0 };

pub struct ChainOutcome {
    pub name: &'static str,
    pub trace: JointTrace,
    /// `(timestamp_ms, running mean of the test log likelihood)`.
    pub series: Vec<(f64, f64)>,
    pub setup_seconds: f64,
    pub sampling_seconds: f64,
}

impl ChainOutcome {
    pub fn expected_test_loglik(&self) -> f64 {
        self.series.last().map_or(f64::NAN, |x| x.1)
    }
}

pub struct GlassoOutcome {
    pub gamma: f64,
    pub cv_grid: Vec<f64>,
    pub cv_scores: Vec<f64>,
    pub precision: SymMatrix,
    pub test_loglik: f64,
    pub seconds: f64,
}

pub struct CompareOutcome {
    pub dataset: Dataset,
    /// NaN when the training covariance is singular.
    pub empirical_loglik: f64,
    pub glasso: Option<GlassoOutcome>,
    pub chains: Vec<ChainOutcome>,
    pub total_seconds: f64,
}

fn loglik(lambda: &SymMatrix, y: &DMatrix<f64>) -> Result<f64> {
    let gram = SymMatrix::symmetrize(&y.tr_mul(y));
    Ok(gaussian_loglik_gram(lambda, &gram, y.nrows())?)
}

fn empirical_loglik(data: &Dataset) -> f64 {
    let n = data.train.nrows() as f64;
    let s = SymMatrix::symmetrize(&(data.train.tr_mul(&data.train) / n));
    cholesky(&s).ok().and_then(|c| loglik(&c.inverse(), &data.test).ok()).unwrap_or(f64::NAN)
}

fn run_glasso(config: &Config, data: &Dataset, rng: &mut Rng) -> Result<GlassoOutcome> {
    let folds: usize = config.get("folds", 5)?;
    let grid_size: usize = config.get("grid_size", 100)?;
    let tol: f64 = config.get("tol", 1e-5)?;
    let t = Instant::now();
    let cv = cv_select_gamma(&data.train, folds, grid_size, tol, rng)?;
    let n = data.train.nrows() as f64;
    let s = SymMatrix::symmetrize(&(data.train.tr_mul(&data.train) / n));
    let fit = glasso_fit(&s, GlassoConfig { tol, ..GlassoConfig::new(cv.gamma) })?;
    let seconds = t.elapsed().as_secs_f64();
    Ok(GlassoOutcome {
        gamma: cv.gamma,
        cv_grid: cv.grid,
        cv_scores: cv.scores,
        test_loglik: loglik(&fit.precision, &data.test)?,
        precision: fit.precision,
        seconds,
    })
}

/// Joint-sampler configuration shared by `compare` and `ggm-fit`.
pub fn ggm_config(config: &Config, p: usize) -> Result<GgmConfig> {
    let mut c = GgmConfig::new(p);
    c.sigma_e = config.get("sigma_e", c.sigma_e)?;
    c.aux_cover = parse_cover(&config.get("cover", "hcc".to_string())?)?;
    Ok(c)
}

/// Runs the HMC-within-joint chain (`mass_method` identity or wishart) and the
/// BG-HCC chain.
fn run_chains(config: &Config, data: &Dataset, rng: &mut Rng) -> Result<Vec<ChainOutcome>> {
    let p = data.train.ncols();
    let iterations: usize = config.get("iterations", 300)?;
    let burn_in: usize = config.get("burn_in", 0)?;
    let prelim: usize = config.get("prelim", 20_000)?;
    let alpha: f64 = config.get("alpha", 0.2)?;
    let beta: f64 = config.get("beta", 1.5)?;
    let train = DataSummary::from_rows(&data.train);
    let test = DataSummary::from_rows(&data.test);
    let base = ggm_config(config, p)?;

    let mut out = Vec::new();
    for name in ["hmc", "bg-hcc"] {
        let mut chain_rng = rng.split();
        let t = Instant::now();
        let mut c = base.clone();
        c.inner = if name == "hmc" {
            let mass = match MassMethod::parse(&config.get("mass_method", "wishart".to_string())?)? {
                MassMethod::Identity => HmcMass::Identity,
                MassMethod::WishartPrelim => {
                    let b = c.b0 + train.n as f64;
                    HmcMass::Wishart(Arc::new(WishartPrecision::estimate(b, &c.d0.add(&train.gram), prelim, &mut chain_rng)?))
                }
                other => return Err(BenchError::Config(format!("mass_method {} is graph specific", other.name()))),
            };
            InnerSampler::Hmc { alpha, beta, mass }
        } else {
            InnerSampler::BlockGibbs(ggm_core::ggm::CoverStrategy::Heuristic)
        };
        let setup_seconds = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let trace = run_joint_sampler(&train, &c, iterations, burn_in, &mut chain_rng)?;
        let sampling_seconds = t.elapsed().as_secs_f64();
        let series = expected_test_loglik(&trace, &test)?;
        out.push(ChainOutcome { name, trace, series, setup_seconds, sampling_seconds });
    }
    Ok(out)
}

fn compare_core(config: &Config, seed: u64, with_glasso: bool) -> Result<CompareOutcome> {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(seed);
    let (dataset, _) = load_dataset(config, DEFAULT_CASE, &mut rng.split())?;
    let glasso_rng = rng.split();
    let chain_rng = rng.split();
    let glasso = if with_glasso { Some(run_glasso(config, &dataset, &mut glasso_rng.clone())?) } else { None };
    let chains = run_chains(config, &dataset, &mut chain_rng.clone())?;
    Ok(CompareOutcome {
        empirical_loglik: empirical_loglik(&dataset),
        dataset,
        glasso,
        chains,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Bayesian chains and the empirical baseline only, without output files.
pub fn bayes_vs_empirical(config: &Config, seed: u64) -> Result<CompareOutcome> {
    compare_core(config, seed, false)
}

/// Mean over samples of each test row's log density, minus the row's log
/// density under `reference`.
fn pointwise_difference(trace: &JointTrace, reference: &SymMatrix, test: &DMatrix<f64>) -> Result<Vec<f64>> {
    let row_logdens = |lambda: &SymMatrix| -> Result<Vec<f64>> {
        let p = lambda.dim() as f64;
        let half_logdet = 0.5 * cholesky(lambda)?.logdet();
        let m = lambda.as_matrix();
        Ok(test
            .row_iter()
            .map(|y| {
                let y = y.transpose();
                half_logdet - 0.5 * y.dot(&(m * &y)) - 0.5 * p * (2.0 * std::f64::consts::PI).ln()
            })
            .collect())
    };
    let mut acc = vec![0.0; test.nrows()];
    for s in &trace.samples {
        for (a, v) in acc.iter_mut().zip(row_logdens(s.precision()?.lambda())?) {
            *a += v;
        }
    }
    let reference = row_logdens(reference)?;
    let k = trace.samples.len() as f64;
    Ok(acc.iter().zip(&reference).map(|(a, r)| a / k - r).collect())
}

pub fn run_compare(config: &Config, seed: u64, out: &Path) -> Result<CompareOutcome> {
    let outcome = compare_core(config, seed, true)?;
    let glasso = outcome.glasso.as_ref().expect("glasso requested");

    write_output(out, "compare_results.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["method", "test_loglik", "gamma", "samples", "edge_acceptance", "mean_edges"])?;
        let nan = f64::NAN.to_string();
        csv.write_record(["empirical".into(), outcome.empirical_loglik.to_string(), nan.clone(), nan.clone(), nan.clone(), nan.clone()])?;
        csv.write_record(["glasso".into(), glasso.test_loglik.to_string(), glasso.gamma.to_string(), nan.clone(), nan.clone(), nan])?;
        for ch in &outcome.chains {
            let k = ch.trace.samples.len();
            let edges = ch.trace.samples.iter().map(|s| s.graph.edge_count() as f64).sum::<f64>() / k as f64;
            csv.write_record([
                ch.name.to_string(),
                ch.expected_test_loglik().to_string(),
                f64::NAN.to_string(),
                k.to_string(),
                ch.trace.edge_acceptance_rate().to_string(),
                edges.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    write_output(out, "compare_series.csv", |w| {
        writeln!(w, "chain,sample,expected_test_loglik")?;
        for ch in &outcome.chains {
            for (k, (_, v)) in ch.series.iter().enumerate() {
                writeln!(w, "{},{},{}", ch.name, k, v)?;
            }
        }
        Ok(())
    })?;
    write_output(out, "compare_cv.csv", |w| {
        writeln!(w, "gamma,score")?;
        for (g, s) in glasso.cv_grid.iter().zip(&glasso.cv_scores) {
            writeln!(w, "{g},{s}")?;
        }
        Ok(())
    })?;
    write_output(out, "compare_pointwise.csv", |w| {
        let diffs = outcome
            .chains
            .iter()
            .map(|ch| pointwise_difference(&ch.trace, &glasso.precision, &outcome.dataset.test))
            .collect::<Result<Vec<_>>>()?;
        let names: Vec<String> = outcome.chains.iter().map(|ch| format!("{}_minus_glasso", ch.name)).collect();
        writeln!(w, "test_row,{}", names.join(","))?;
        for r in 0..outcome.dataset.test.nrows() {
            let vals: Vec<String> = diffs.iter().map(|d| d[r].to_string()).collect();
            writeln!(w, "{r},{}", vals.join(","))?;
        }
        Ok(())
    })?;
    write_output(out, "compare_timing.csv", |w| {
        writeln!(w, "method,setup_seconds,sampling_seconds")?;
        writeln!(w, "glasso,0,{}", glasso.seconds)?;
        for ch in &outcome.chains {
            writeln!(w, "{},{},{}", ch.name, ch.setup_seconds, ch.sampling_seconds)?;
        }
        writeln!(w, "total,0,{}", outcome.total_seconds)?;
        Ok(())
    })?;
    write_output(out, "compare_series_timing.csv", |w| {
        writeln!(w, "chain,sample,timestamp_ms")?;
        for ch in &outcome.chains {
            for (k, (t, _)) in ch.series.iter().enumerate() {
                writeln!(w, "{},{},{}", ch.name, k, t)?;
            }
        }
        Ok(())
    })?;
    let plot = Plot {
        title: "Expected test log likelihood over time".into(),
        x_label: "seconds".into(),
        y_label: "test log likelihood".into(),
        series: outcome
            .chains
            .iter()
            .map(|ch| Series { name: ch.name.to_uppercase(), points: ch.series.iter().map(|&(t, v)| (t / 1e3, v)).collect() })
            .collect(),
        hlines: if outcome.empirical_loglik.is_finite() { vec![("empirical".into(), outcome.empirical_loglik)] } else { vec![] },
        markers: vec![("glasso".into(), glasso.seconds, glasso.test_loglik)],
    };
    write_output(out, "compare.svg", |w| Ok(w.write_all(plot.render().as_bytes())?))?;
    Ok(outcome)
}
