//! Mass-matrix construction methods compared on one synthetic case.

use std::path::Path;
use std::time::Instant;

use ggm_core::diagnostics::ess_report;
use ggm_core::gwishart::GWishartParams;
use ggm_core::hmc::HmcConfig;
use ggm_core::numkernel::Rng;

use super::{Warmup, build_mass, cases, parse_cover, posterior_case, run_hmc, run_stream, status_of, write_output, MassMethod};
use crate::config::{expand, Config};
use crate::error::Result;
use crate::table::RunTable;

pub struct Table2Output {
    /// Keys `method`; deterministic metrics.
    pub results: RunTable,
    pub timing: RunTable,
}

pub fn run_table2(config: &Config, seed: u64, out: &Path) -> Result<Table2Output> {
    let case = cases(config, &[25], &[0.5], &[5.0])?[0];
    let runs: usize = config.get("runs", 3)?;
    let samples: usize = config.get("samples", 10_000)?;
    let burn_in: usize = config.get("burn_in", 100)?;
    let warmup = Warmup::from_config(config)?;
    let prelim: usize = config.get("prelim", 20_000)?;
    let cover = parse_cover(&config.get("cover", "mc".to_string())?)?;
    let methods = config
        .list("mass_method", &MassMethod::ALL.map(|m| m.name().to_string()))?
        .iter()
        .map(|m| MassMethod::parse(m))
        .collect::<Result<Vec<_>>>()?;
    let alpha = expand("alpha", config.list("alpha", &[0.004, 0.2, 0.2, 0.2])?, methods.len())?;
    let beta = expand("beta", config.list("beta", &[0.1, 1.5, 1.5, 1.5])?, methods.len())?;
    let mut results = RunTable::new(&["method"], &["ess", "ess_mean", "acceptance", "leapfrog_steps"]);
    let mut timing = RunTable::new(&["method"], &["setup_seconds", "warmup_seconds", "sampling_seconds", "ess_per_sec"]);

    for run in 0..runs {
        let mut rng = run_stream(seed, 0, run);
        let pc = posterior_case(&case, &mut rng.split())?;
        let mut streams: Vec<Rng> = methods.iter().map(|_| rng.split()).collect();
        for (k, &method) in methods.iter().enumerate() {
            let measured = measure(&pc.params, method, cover, alpha[k], beta[k], prelim, samples, burn_in, warmup, &mut streams[k]);
            let key = vec![method.name().to_string()];
            match measured {
                Ok(m) => {
                    results.push(key.clone(), run, "ok", vec![m.ess, m.ess_mean, m.acceptance, m.leapfrog]);
                    timing.push(key, run, "ok", vec![m.setup, m.warmup, m.sampling, m.ess / m.sampling]);
                }
                Err(e) => {
                    results.push(key.clone(), run, status_of(&e), vec![f64::NAN; 4]);
                    timing.push(key, run, status_of(&e), vec![f64::NAN; 4]);
                }
            }
        }
    }
    write_output(out, "table2_runs.csv", |w| results.write_csv(w))?;
    write_output(out, "table2_summary.csv", |w| results.write_summary_csv(w))?;
    write_output(out, "table2_timing_runs.csv", |w| timing.write_csv(w))?;
    write_output(out, "table2_timing_summary.csv", |w| timing.write_summary_csv(w))?;
    Ok(Table2Output { results, timing })
}

struct Measured {
    ess: f64,
    ess_mean: f64,
    warmup: f64,
    acceptance: f64,
    leapfrog: f64,
    setup: f64,
    sampling: f64,
}

#[allow(clippy::too_many_arguments)]
fn measure(
    params: &GWishartParams,
    method: MassMethod,
    cover: ggm_core::ggm::CoverStrategy,
    alpha: f64,
    beta: f64,
    prelim: usize,
    samples: usize,
    burn_in: usize,
    warmup: Warmup,
    rng: &mut Rng,
) -> Result<Measured> {
    let t = Instant::now();
    let mass = build_mass(method, params, prelim, cover, burn_in, rng)?;
    let setup = t.elapsed().as_secs_f64();
    let config = HmcConfig::new(alpha, beta, mass)?;
    let timed = run_hmc(params, &config, samples, burn_in, warmup, rng)?;
    let report = ess_report(&timed.run.trace, timed.sampling_seconds)?;
    Ok(Measured {
        ess: report.aggregate,
        ess_mean: report.per_coordinate.iter().sum::<f64>() / report.per_coordinate.len() as f64,
        warmup: timed.warmup_seconds,
        acceptance: timed.run.acceptance_rate,
        leapfrog: timed.run.leapfrog_steps as f64,
        setup,
        sampling: timed.sampling_seconds,
    })
}
