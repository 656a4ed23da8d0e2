//! Step-size tuning: for each trajectory length `β`, bisect the step-size
//! scale `α` towards a target acceptance rate, then keep the `β` with the
//! highest ESS per leapfrog step.

use std::path::Path;

use ggm_core::diagnostics::ess_report;
use std::time::Instant;

use ggm_core::gwishart::{GWishartParams, GWishartTarget, MassFactor};
use ggm_core::hmc::{sample_hmc, HmcConfig};
use ggm_core::numkernel::Rng;
use nalgebra::DVector;

use super::{Warmup, build_mass, cases, parse_cover, posterior_case, run_stream, warm_start, write_output, MassMethod};
use crate::config::Config;
use crate::error::Result;

pub const TARGET_ACCEPTANCE: f64 = 0.65;
const BISECTION_STEPS: usize = 12;
const ALPHA_RANGE: (f64, f64) = (1e-7, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub struct TuneRow {
    pub case: usize,
    pub method: MassMethod,
    pub beta: f64,
    pub alpha: f64,
    pub acceptance: f64,
    pub ess: f64,
    pub leapfrog_steps: usize,
    pub chosen: bool,
}

impl TuneRow {
    pub fn ess_per_step(&self) -> f64 {
        if self.leapfrog_steps == 0 { 0.0 } else { self.ess / self.leapfrog_steps as f64 }
    }
}

fn acceptance(start: &Start, mass: &MassFactor, alpha: f64, beta: f64, samples: usize, burn_in: usize, rng: &mut Rng) -> Result<f64> {
    let config = HmcConfig::new(alpha, beta, mass.clone())?;
    Ok(match sample_hmc(&GWishartTarget::new(start.params), &config, &start.x, samples, burn_in, rng) {
        Ok(run) => run.acceptance_rate,
        Err(ggm_core::Error::AllRejected(_)) => 0.0,
        Err(e) => return Err(e.into()),
    })
}

/// Bisection on `ln α`; acceptance falls as `α` grows.
/// Tuning runs start from a warmed-up position.
pub struct Start<'a> {
    pub params: &'a GWishartParams,
    pub x: DVector<f64>,
}

pub fn tune_alpha(start: &Start, mass: &MassFactor, beta: f64, samples: usize, burn_in: usize, rng: &mut Rng) -> Result<f64> {
    let (mut lo, mut hi) = (ALPHA_RANGE.0.ln(), ALPHA_RANGE.1.ln());
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if acceptance(start, mass, mid.exp(), beta, samples, burn_in, &mut rng.split())? > TARGET_ACCEPTANCE {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

pub fn run_tune_hmc(config: &Config, seed: u64, out: &Path) -> Result<Vec<TuneRow>> {
    let cases = cases(config, &[25], &[0.5], &[5.0])?;
    let samples: usize = config.get("samples", 1000)?;
    let burn_in: usize = config.get("burn_in", 100)?;
    let warmup = Warmup::from_config(config)?;
    let prelim: usize = config.get("prelim", 20_000)?;
    let cover = parse_cover(&config.get("cover", "mc".to_string())?)?;
    let betas: Vec<f64> = config.list("beta", &[0.5, 1.0, 1.5, 2.0, 3.0])?;
    let methods = config
        .list("mass_method", &["wishart".to_string()])?
        .iter()
        .map(|m| MassMethod::parse(m))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (c, case) in cases.iter().enumerate() {
        let mut rng = run_stream(seed, c, 0);
        let pc = posterior_case(case, &mut rng.split())?;
        for &method in &methods {
            let mass = build_mass(method, &pc.params, prelim, cover, burn_in, &mut rng.split())?;
            let first = rows.len();
            let start = Start { params: &pc.params, x: warm_start(&pc.params, warmup)? };
            for &beta in &betas {
                let alpha = tune_alpha(&start, &mass, beta, samples, burn_in, &mut rng.split())?;
                let hmc = HmcConfig::new(alpha, beta, mass.clone())?;
                let t = Instant::now();
                let run = sample_hmc(&GWishartTarget::new(&pc.params), &hmc, &start.x, samples, burn_in, &mut rng.split());
                let secs = t.elapsed().as_secs_f64();
                let row = match run {
                    Ok(run) => TuneRow {
                        case: c,
                        method,
                        beta,
                        alpha,
                        acceptance: run.acceptance_rate,
                        ess: ess_report(&run.trace, secs).map(|r| r.aggregate).unwrap_or(0.0),
                        leapfrog_steps: run.leapfrog_steps,
                        chosen: false,
                    },
                    Err(_) => TuneRow { case: c, method, beta, alpha, acceptance: 0.0, ess: 0.0, leapfrog_steps: 0, chosen: false },
                };
                rows.push(row);
            }
            let best = (first..rows.len())
                .max_by(|&a, &b| rows[a].ess_per_step().total_cmp(&rows[b].ess_per_step()))
                .expect("non-empty beta grid");
            rows[best].chosen = true;
        }
    }

    write_output(out, "tune_hmc.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["case", "mass_method", "beta", "alpha", "acceptance", "ess", "leapfrog_steps", "ess_per_step", "chosen"])?;
        for r in &rows {
            csv.write_record([
                r.case.to_string(),
                r.method.name().to_string(),
                r.beta.to_string(),
                r.alpha.to_string(),
                r.acceptance.to_string(),
                r.ess.to_string(),
                r.leapfrog_steps.to_string(),
                r.ess_per_step().to_string(),
                r.chosen.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    write_output(out, "tuned.conf", |w| {
        let chosen: Vec<&TuneRow> = rows.iter().filter(|r| r.chosen).collect();
        let join = |f: &dyn Fn(&TuneRow) -> f64| chosen.iter().map(|r| format!("{:.4}", f(r))).collect::<Vec<_>>().join(", ");
        writeln!(w, "alpha = {}", join(&|r| r.alpha))?;
        writeln!(w, "beta = {}", join(&|r| r.beta))?;
        Ok(())
    })?;
    Ok(rows)
}
