//! Sampler efficiency on synthetic cases: BG-MC, BG-HCC and HMC with the
//! Wishart-conditioned mass.

use std::path::Path;
use std::time::Instant;

use ggm_core::diagnostics::{ess_report, EssReport};
use ggm_core::ggm::CoverStrategy;
use ggm_core::graph::{heuristic_clique_cover, maximal_cliques};
use ggm_core::gwishart::{sample_block_gibbs, GWishartParams};
use ggm_core::hmc::HmcConfig;
use ggm_core::numkernel::Rng;
use ggm_core::{CliqueCover, PrecisionState};

use super::{Warmup, build_mass, cases, posterior_case, run_hmc, run_stream, status_of, write_output, MassMethod};
use crate::config::{expand, Config};
use crate::error::Result;
use crate::table::RunTable;

pub const SAMPLERS: [&str; 3] = ["bg-mc", "bg-hcc", "hmc"];

pub struct Table1Output {
    /// Keys `case, p, s, n_over_q, sampler`; deterministic metrics.
    pub results: RunTable,
    /// Same keys; wall-clock metrics.
    pub timing: RunTable,
}

struct Measured {
    status: String,
    blocks: f64,
    ess: f64,
    ess_mean: f64,
    acceptance: f64,
    setup: f64,
    warmup: f64,
    sampling: f64,
}

impl Measured {
    fn failed(status: String) -> Self {
        let nan = f64::NAN;
        Self { status, blocks: nan, ess: nan, ess_mean: nan, acceptance: nan, setup: nan, warmup: nan, sampling: nan }
    }

    fn ok(report: &EssReport, blocks: f64, acceptance: f64, setup: f64, warmup: f64) -> Self {
        let ess_mean = report.per_coordinate.iter().sum::<f64>() / report.per_coordinate.len() as f64;
        Self {
            status: "ok".into(),
            blocks,
            ess: report.aggregate,
            ess_mean,
            acceptance,
            setup,
            warmup,
            sampling: report.elapsed_seconds,
        }
    }
}

fn block_gibbs(params: &GWishartParams, cover: CliqueCover, setup: f64, samples: usize, burn_in: usize, rng: &mut Rng) -> Result<Measured> {
    let t = Instant::now();
    let trace = sample_block_gibbs(params, &cover, &PrecisionState::identity(params.p()), samples, burn_in, rng)?;
    let report = ess_report(&trace, t.elapsed().as_secs_f64())?;
    Ok(Measured::ok(&report, cover.len() as f64, f64::NAN, setup, 0.0))
}

#[allow(clippy::too_many_arguments)]
fn hmc(params: &GWishartParams, alpha: f64, beta: f64, prelim: usize, samples: usize, burn_in: usize, warmup: Warmup, rng: &mut Rng) -> Result<Measured> {
    let t = Instant::now();
    let mass = build_mass(MassMethod::WishartPrelim, params, prelim, CoverStrategy::MaximalCliques, 0, rng)?;
    let setup = t.elapsed().as_secs_f64();
    let config = HmcConfig::new(alpha, beta, mass)?;
    let timed = run_hmc(params, &config, samples, burn_in, warmup, rng)?;
    let report = ess_report(&timed.run.trace, timed.sampling_seconds)?;
    Ok(Measured::ok(&report, f64::NAN, timed.run.acceptance_rate, setup, timed.warmup_seconds))
}

pub fn run_table1(config: &Config, seed: u64, out: &Path) -> Result<Table1Output> {
    let cases = cases(config, &[10, 25, 50], &[0.5], &[5.0])?;
    let runs: usize = config.get("runs", 3)?;
    let samples: usize = config.get("samples", 10_000)?;
    let burn_in: usize = config.get("burn_in", 100)?;
    let warmup = Warmup::from_config(config)?;
    let prelim: usize = config.get("prelim", 20_000)?;
    let budget: usize = config.get("clique_budget", 5000)?;
    let alpha = expand("alpha", config.list("alpha", &[0.1])?, cases.len())?;
    let beta = expand("beta", config.list("beta", &[2.0])?, cases.len())?;
    let keys = ["case", "p", "s", "n_over_q", "sampler"];
    let mut results = RunTable::new(&keys, &["n", "edges", "blocks", "ess", "ess_mean", "acceptance"]);
    let mut timing = RunTable::new(&keys, &["setup_seconds", "warmup_seconds", "sampling_seconds", "ess_per_sec"]);

    for (c, case) in cases.iter().enumerate() {
        for run in 0..runs {
            let mut rng = run_stream(seed, c, run);
            let pc = posterior_case(case, &mut rng.split())?;
            let mut streams: Vec<Rng> = (0..SAMPLERS.len()).map(|_| rng.split()).collect();
            for (k, name) in SAMPLERS.iter().enumerate() {
                let r = &mut streams[k];
                let measured = match *name {
                    "bg-mc" => {
                        let t = Instant::now();
                        let cover = maximal_cliques(&pc.graph);
                        let setup = t.elapsed().as_secs_f64();
                        if cover.len() > budget {
                            Measured::failed(format!("skipped: {} maximal cliques", cover.len()))
                        } else {
                            block_gibbs(&pc.params, cover, setup, samples, burn_in, r).unwrap_or_else(|e| Measured::failed(status_of(&e)))
                        }
                    }
                    "bg-hcc" => {
                        let t = Instant::now();
                        let cover = heuristic_clique_cover(r, &pc.graph);
                        let setup = t.elapsed().as_secs_f64();
                        block_gibbs(&pc.params, cover, setup, samples, burn_in, r).unwrap_or_else(|e| Measured::failed(status_of(&e)))
                    }
                    _ => hmc(&pc.params, alpha[c], beta[c], prelim, samples, burn_in, warmup, r)
                        .unwrap_or_else(|e| Measured::failed(status_of(&e))),
                };
                let key = vec![c.to_string(), case.p.to_string(), case.s.to_string(), case.n_over_q.to_string(), name.to_string()];
                results.push(
                    key.clone(),
                    run,
                    measured.status.clone(),
                    vec![pc.n as f64, pc.graph.edge_count() as f64, measured.blocks, measured.ess, measured.ess_mean, measured.acceptance],
                );
                timing.push(key, run, measured.status, vec![measured.setup, measured.warmup, measured.sampling, measured.ess / measured.sampling]);
            }
        }
    }
    write_output(out, "table1_runs.csv", |w| results.write_csv(w))?;
    write_output(out, "table1_summary.csv", |w| results.write_summary_csv(w))?;
    write_output(out, "table1_timing_runs.csv", |w| timing.write_csv(w))?;
    write_output(out, "table1_timing_summary.csv", |w| timing.write_summary_csv(w))?;
    Ok(Table1Output { results, timing })
}
