//! Single fits on one dataset: cross-validated glasso and the joint sampler.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ggm_core::ggm::{expected_test_loglik, run_joint_sampler, DataSummary, HmcMass, InnerSampler, JointTrace};
use ggm_core::glasso::{cv_select_gamma, glasso_fit, GlassoConfig, GlassoFit};
use ggm_core::gwishart::WishartPrecision;
use ggm_core::numkernel::{Rng, SymMatrix};

use super::compare::{ggm_config, DEFAULT_CASE};
use super::{load_dataset, parse_cover, write_matrix_csv, write_output};
use crate::config::Config;
use crate::error::{BenchError, Result};

pub fn run_glasso_fit(config: &Config, seed: u64, out: &Path) -> Result<GlassoFit> {
    let mut rng = Rng::seed_from_u64(seed);
    let (data, graph) = load_dataset(config, DEFAULT_CASE, &mut rng.split())?;
    let folds: usize = config.get("folds", 5)?;
    let grid_size: usize = config.get("grid_size", 100)?;
    let tol: f64 = config.get("tol", 1e-5)?;
    let t = Instant::now();
    let cv = cv_select_gamma(&data.train, folds, grid_size, tol, &mut rng.split())?;
    let s = SymMatrix::symmetrize(&(data.train.tr_mul(&data.train) / data.train.nrows() as f64));
    let fit = glasso_fit(&s, GlassoConfig { tol, ..GlassoConfig::new(cv.gamma) })?;
    let seconds = t.elapsed().as_secs_f64();
    let test = DataSummary::from_rows(&data.test);
    let test_loglik = ggm_core::ggm::gaussian_loglik_gram(&fit.precision, &test.gram, test.n)?;

    write_output(out, "glasso_cv.csv", |w| {
        writeln!(w, "gamma,score,min_nonzeros,max_nonzeros")?;
        for k in 0..cv.grid.len() {
            let nz = &cv.nonzeros[k];
            let (lo, hi) = (nz.iter().min().copied().unwrap_or(0), nz.iter().max().copied().unwrap_or(0));
            writeln!(w, "{},{},{lo},{hi}", cv.grid[k], cv.scores[k])?;
        }
        Ok(())
    })?;
    write_output(out, "glasso_fit.csv", |w| {
        writeln!(w, "key,value")?;
        writeln!(w, "gamma,{}", cv.gamma)?;
        writeln!(w, "objective,{}", fit.objective)?;
        writeln!(w, "kkt_violation,{}", fit.kkt_violation)?;
        writeln!(w, "sweeps,{}", fit.sweeps)?;
        writeln!(w, "converged,{}", fit.converged)?;
        writeln!(w, "nonzeros,{}", fit.off_diagonal_nonzeros())?;
        writeln!(w, "test_loglik,{test_loglik}")?;
        writeln!(w, "cv_max_kkt_violation,{}", cv.max_kkt_violation)?;
        writeln!(w, "cv_objective_monotone,{}", cv.monotone)?;
        if let Some(g) = &graph {
            writeln!(w, "true_edges,{}", g.edge_count())?;
        }
        Ok(())
    })?;
    write_matrix_csv(out, "glasso_precision.csv", fit.precision.as_matrix())?;
    write_output(out, "glasso_timing.csv", |w| Ok(writeln!(w, "seconds\n{seconds}")?))?;
    Ok(fit)
}

pub fn run_ggm_fit(config: &Config, seed: u64, out: &Path) -> Result<JointTrace> {
    let mut rng = Rng::seed_from_u64(seed);
    let (data, graph) = load_dataset(config, DEFAULT_CASE, &mut rng.split())?;
    let p = data.train.ncols();
    let iterations: usize = config.get("iterations", 300)?;
    let burn_in: usize = config.get("burn_in", 50)?;
    let train = DataSummary::from_rows(&data.train);
    let mut c = ggm_config(config, p)?;
    let mut chain_rng = rng.split();
    let t = Instant::now();
    c.inner = match config.get("mass_method", "none".to_string())?.as_str() {
        "none" => InnerSampler::BlockGibbs(parse_cover(&config.get("cover", "hcc".to_string())?)?),
        "identity" => InnerSampler::Hmc { alpha: config.get("alpha", 0.01)?, beta: config.get("beta", 0.2)?, mass: HmcMass::Identity },
        "wishart" => {
            let k = WishartPrecision::estimate(c.b0 + train.n as f64, &c.d0.add(&train.gram), config.get("prelim", 20_000)?, &mut chain_rng)?;
            InnerSampler::Hmc { alpha: config.get("alpha", 0.2)?, beta: config.get("beta", 1.5)?, mass: HmcMass::Wishart(Arc::new(k)) }
        }
        other => return Err(BenchError::Config(format!("mass_method {other:?} is not available for ggm-fit"))),
    };
    let setup = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let trace = run_joint_sampler(&train, &c, iterations, burn_in, &mut chain_rng)?;
    let sampling = t.elapsed().as_secs_f64();
    let has_test = data.test.nrows() > 0;
    let series = if has_test { expected_test_loglik(&trace, &DataSummary::from_rows(&data.test))? } else { vec![] };

    write_output(out, "joint_trace.csv", |w| Ok(trace.write_csv(w)?))?;
    write_matrix_csv(out, "edge_probabilities.csv", trace.edge_probabilities().as_matrix())?;
    write_output(out, "ggm_summary.csv", |w| {
        let k = trace.samples.len() as f64;
        writeln!(w, "key,value")?;
        writeln!(w, "samples,{}", trace.samples.len())?;
        writeln!(w, "edge_acceptance,{}", trace.edge_acceptance_rate())?;
        writeln!(w, "mean_s,{}", trace.samples.iter().map(|s| s.s).sum::<f64>() / k)?;
        writeln!(w, "mean_edges,{}", trace.samples.iter().map(|s| s.graph.edge_count() as f64).sum::<f64>() / k)?;
        if let Some((_, v)) = series.last() {
            writeln!(w, "expected_test_loglik,{v}")?;
        }
        if let Some(g) = &graph {
            writeln!(w, "true_edges,{}", g.edge_count())?;
        }
        Ok(())
    })?;
    if let Some(g) = &graph {
        write_output(out, "true_graph.txt", |w| Ok(w.write_all(g.to_edge_list().as_bytes())?))?;
    }
    write_output(out, "ggm_timing.csv", |w| Ok(writeln!(w, "setup_seconds,sampling_seconds\n{setup},{sampling}")?))?;
    Ok(trace)
}
