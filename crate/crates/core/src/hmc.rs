//! Hamiltonian Monte Carlo with a random step size and a fixed target
//! trajectory length.
//!
//! Each transition draws `ε ~ Gamma(shape 2, scale α)` and runs
//! `L = max(1, round(β / ε))` leapfrog steps, so the simulated time stays
//! near `β` while occasional small steps let the chain move close to the
//! boundary of the target's support. Leaving the support during a
//! trajectory rejects the proposal.

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::gwishart::MassFactor;
use crate::numkernel::{sample_std_gaussian, Rng};
use crate::trace::Trace;

/// A density `∝ exp(-E(x))` with a possibly restricted support.
pub trait Target {
    fn dim(&self) -> usize;

    /// `None` outside the support.
    fn energy(&self, x: &DVector<f64>) -> Option<f64>;

    fn energy_and_gradient(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)>;
}

#[derive(Debug, Clone)]
pub struct HmcConfig {
    /// Scale of the Gamma(2, α) step-size distribution.
    pub alpha: f64,
    /// Target trajectory length.
    pub beta: f64,
    pub mass: MassFactor,
}

impl HmcConfig {
    pub fn new(alpha: f64, beta: f64, mass: MassFactor) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("HMC alpha = {alpha}, beta = {beta}")));
        }
        Ok(Self { alpha, beta, mass })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcStepReport {
    pub accepted: bool,
    pub epsilon: f64,
    pub steps: usize,
    /// `H(x₁, p₁) - H(x₀, p₀)`; infinite on a cone exit.
    pub delta_h: f64,
    pub cone_exit: bool,
}

/// The trajectory left the target's support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeExit;

/// Number of leapfrog steps for step size `epsilon`.
pub fn trajectory_steps(beta: f64, epsilon: f64) -> usize {
    (beta / epsilon).round().max(1.0) as usize
}

pub fn draw_step(rng: &mut Rng, config: &HmcConfig) -> (f64, usize) {
    let epsilon = Gamma::new(2.0, config.alpha).expect("alpha validated").sample(rng);
    (epsilon, trajectory_steps(config.beta, epsilon))
}

struct Point {
    x: DVector<f64>,
    energy: f64,
    grad: DVector<f64>,
}

fn integrate<T: Target + ?Sized>(
    start: &Point,
    p0: &DVector<f64>,
    epsilon: f64,
    steps: usize,
    target: &T,
    mass: &MassFactor,
) -> std::result::Result<(Point, DVector<f64>), ConeExit> {
    let mut x = start.x.clone();
    let mut p = p0 - &start.grad * (0.5 * epsilon);
    let mut energy = start.energy;
    let mut grad = start.grad.clone();
    for step in 0..steps {
        x += mass.apply_inverse(&p) * epsilon;
        let (e, g) = target.energy_and_gradient(&x).ok_or(ConeExit)?;
        energy = e;
        grad = g;
        let kick = if step + 1 == steps { 0.5 * epsilon } else { epsilon };
        p -= &grad * kick;
    }
    Ok((Point { x, energy, grad }, p))
}

/// `steps` leapfrog iterations from `(x0, p0)`.
pub fn leapfrog<T: Target + ?Sized>(
    x0: &DVector<f64>,
    p0: &DVector<f64>,
    epsilon: f64,
    steps: usize,
    target: &T,
    mass: &MassFactor,
) -> std::result::Result<(DVector<f64>, DVector<f64>), ConeExit> {
    let (energy, grad) = target.energy_and_gradient(x0).ok_or(ConeExit)?;
    let start = Point { x: x0.clone(), energy, grad };
    integrate(&start, p0, epsilon, steps, target, mass).map(|(pt, p)| (pt.x, p))
}

/// Chain state with its cached energy and gradient.
pub struct HmcChain<'a, T: Target + ?Sized> {
    target: &'a T,
    config: &'a HmcConfig,
    current: Point,
}

impl<'a, T: Target + ?Sized> HmcChain<'a, T> {
    pub fn new(target: &'a T, config: &'a HmcConfig, init: DVector<f64>) -> Result<Self> {
        if init.len() != target.dim() || config.mass.dim() != target.dim() {
            return Err(Error::DimensionMismatch { expected: target.dim(), got: init.len().min(config.mass.dim()) });
        }
        let (energy, grad) = target
            .energy_and_gradient(&init)
            .ok_or_else(|| Error::InvalidParameter("initial point outside the target's support".into()))?;
        Ok(Self { target, config, current: Point { x: init, energy, grad } })
    }

    pub fn position(&self) -> &DVector<f64> {
        &self.current.x
    }

    pub fn energy(&self) -> f64 {
        self.current.energy
    }

    pub fn step(&mut self, rng: &mut Rng) -> HmcStepReport {
        let (epsilon, steps) = draw_step(rng, self.config);
        self.step_with(rng, epsilon, steps)
    }

    pub fn step_with(&mut self, rng: &mut Rng, epsilon: f64, steps: usize) -> HmcStepReport {
        let mass = &self.config.mass;
        let p0 = mass.momentum_from_standard(&sample_std_gaussian(rng, self.target.dim()));
        let h0 = self.current.energy + mass.kinetic(&p0);
        let u: f64 = rng.random();
        match integrate(&self.current, &p0, epsilon, steps, self.target, mass) {
            Err(ConeExit) => HmcStepReport { accepted: false, epsilon, steps, delta_h: f64::INFINITY, cone_exit: true },
            Ok((proposal, p1)) => {
                let delta_h = proposal.energy + mass.kinetic(&p1) - h0;
                let accepted = delta_h.is_finite() && u.ln() < -delta_h;
                if accepted {
                    self.current = proposal;
                }
                HmcStepReport { accepted, epsilon, steps, delta_h, cone_exit: false }
            }
        }
    }
}

/// One transition from `x`.
pub fn hmc_step<T: Target + ?Sized>(
    x: &DVector<f64>,
    target: &T,
    config: &HmcConfig,
    rng: &mut Rng,
) -> Result<(DVector<f64>, HmcStepReport)> {
    let mut chain = HmcChain::new(target, config, x.clone())?;
    let report = chain.step(rng);
    Ok((chain.current.x, report))
}

#[derive(Debug, Clone)]
pub struct HmcRun {
    pub trace: Trace,
    /// Acceptance rate over the recorded samples.
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    pub cone_exits: usize,
    pub leapfrog_steps: usize,
}

pub fn sample_hmc<T: Target + ?Sized>(
    target: &T,
    config: &HmcConfig,
    init: &DVector<f64>,
    n_samples: usize,
    burn_in: usize,
    rng: &mut Rng,
) -> Result<HmcRun> {
    let mut chain = HmcChain::new(target, config, init.clone())?;
    let mut burn_accepted = 0;
    for _ in 0..burn_in {
        burn_accepted += chain.step(rng).accepted as usize;
    }
    if burn_in > 0 && burn_accepted == 0 {
        return Err(Error::AllRejected(burn_in));
    }
    let mut trace = Trace::with_capacity(target.dim(), n_samples);
    let (mut accepted, mut cone_exits, mut leapfrog_steps) = (0, 0, 0);
    for _ in 0..n_samples {
        let report = chain.step(rng);
        accepted += report.accepted as usize;
        cone_exits += report.cone_exit as usize;
        leapfrog_steps += report.steps;
        trace.push_vector(chain.position());
    }
    Ok(HmcRun {
        trace,
        acceptance_rate: if n_samples > 0 { accepted as f64 / n_samples as f64 } else { 0.0 },
        burn_in_acceptance_rate: if burn_in > 0 { burn_accepted as f64 / burn_in as f64 } else { 0.0 },
        cone_exits,
        leapfrog_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gwishart::mass_identity;
    use crate::numkernel::SymMatrix;

    /// `E(x) = ½ xᵀ A x` restricted to `x₀ > bound`.
    struct Quadratic {
        a: SymMatrix,
        bound: Option<f64>,
    }

    impl Target for Quadratic {
        fn dim(&self) -> usize {
            self.a.dim()
        }
        fn energy(&self, x: &DVector<f64>) -> Option<f64> {
            self.energy_and_gradient(x).map(|(e, _)| e)
        }
        fn energy_and_gradient(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
            if self.bound.is_some_and(|b| x[0] <= b) {
                return None;
            }
            let g = self.a.as_matrix() * x;
            Some((0.5 * x.dot(&g), g))
        }
    }

    fn unit(dim: usize) -> Quadratic {
        Quadratic { a: SymMatrix::identity(dim), bound: None }
    }

    #[test]
    fn step_count_rule() {
        assert_eq!(trajectory_steps(1.3, 1.3), 1);
        assert_eq!(trajectory_steps(1.0, 0.1), 10);
        assert_eq!(trajectory_steps(1.0, 5.0), 1);
        assert_eq!(trajectory_steps(1.0, 0.4), 3);
        assert_eq!(trajectory_steps(1.0, 1.0 / 2.5), 3);
    }

    #[test]
    fn step_size_mean() {
        let config = HmcConfig::new(0.3, 1.0, mass_identity(1)).unwrap();
        let mut rng = Rng::seed_from_u64(1);
        let n = 1_000_000;
        let mean = (0..n).map(|_| draw_step(&mut rng, &config).0).sum::<f64>() / n as f64;
        // Gamma(2, 0.3): mean 0.6, sd 0.3·√2.
        let sd = 0.3 * 2f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 0.6).abs() < 3.0 * sd, "mean {mean}");
    }

    #[test]
    fn one_leapfrog_step_by_hand() {
        let (x, p) = leapfrog(&DVector::from_vec(vec![0.0]), &DVector::from_vec(vec![1.0]), 0.1, 1, &unit(1), &mass_identity(1)).unwrap();
        assert!((x[0] - 0.1).abs() < 1e-15);
        assert!((p[0] - 0.995).abs() < 1e-15);
    }

    #[test]
    fn energy_error_is_second_order() {
        let target = Quadratic { a: SymMatrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap(), bound: None };
        let mass = mass_identity(2);
        let x0 = DVector::from_vec(vec![0.7, -0.3]);
        let p0 = DVector::from_vec(vec![0.2, 0.9]);
        let h = |x: &DVector<f64>, p: &DVector<f64>| target.energy(x).unwrap() + mass.kinetic(p);
        let h0 = h(&x0, &p0);
        let delta = |eps: f64| {
            let steps = (1.0 / eps).round() as usize;
            let (x, p) = leapfrog(&x0, &p0, eps, steps, &target, &mass).unwrap();
            (h(&x, &p) - h0).abs()
        };
        let ratio = delta(0.02) / delta(0.01);
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn leapfrog_is_reversible() {
        let target = Quadratic { a: SymMatrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap(), bound: None };
        let mass = MassFactor::new(SymMatrix::from_rows(&[&[1.5, 0.2], &[0.2, 0.7]]).unwrap()).unwrap();
        let mut rng = Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x0 = sample_std_gaussian(&mut rng, 2);
            let p0 = sample_std_gaussian(&mut rng, 2);
            let (x1, p1) = leapfrog(&x0, &p0, 0.13, 17, &target, &mass).unwrap();
            let (x2, p2) = leapfrog(&x1, &-p1, 0.13, 17, &target, &mass).unwrap();
            assert!((x2 - &x0).amax() < 1e-10);
            assert!((p2 + &p0).amax() < 1e-10);
        }
    }

    #[test]
    fn cone_exit_rejects() {
        let target = Quadratic { a: SymMatrix::identity(1), bound: Some(0.0) };
        let mass = mass_identity(1);
        let res = leapfrog(&DVector::from_vec(vec![0.1]), &DVector::from_vec(vec![-5.0]), 0.1, 5, &target, &mass);
        assert_eq!(res, Err(ConeExit));
        let config = HmcConfig::new(0.5, 50.0, mass).unwrap();
        let mut chain = HmcChain::new(&target, &config, DVector::from_vec(vec![0.01])).unwrap();
        let mut rng = Rng::seed_from_u64(3);
        let mut exits = 0;
        for _ in 0..50 {
            let r = chain.step(&mut rng);
            exits += r.cone_exit as usize;
            assert!(chain.position()[0] > 0.0);
            assert!(!(r.cone_exit && r.accepted));
        }
        assert!(exits > 0);
    }

    #[test]
    fn tiny_steps_always_accept() {
        let config = HmcConfig::new(1e-4, 1e-3, mass_identity(3)).unwrap();
        let run = sample_hmc(&unit(3), &config, &DVector::from_vec(vec![0.3, -0.2, 1.0]), 200, 10, &mut Rng::seed_from_u64(4)).unwrap();
        assert!(run.acceptance_rate > 0.999);
    }

    #[test]
    fn gaussian_moments() {
        let config = HmcConfig::new(0.25, 1.5, mass_identity(2)).unwrap();
        let run = sample_hmc(&unit(2), &config, &DVector::zeros(2), 40_000, 100, &mut Rng::seed_from_u64(5)).unwrap();
        let means = run.trace.column_means();
        let var0 = run.trace.column(0).iter().map(|v| v * v).sum::<f64>() / run.trace.len() as f64;
        assert!(means.iter().all(|m| m.abs() < 0.03), "{means:?}");
        assert!((var0 - 1.0).abs() < 0.05, "{var0}");
    }

    #[test]
    fn all_rejected_is_an_error() {
        // Huge steps on a steep quadratic never get accepted.
        let target = Quadratic { a: SymMatrix::identity(2).scale(1e6), bound: None };
        let config = HmcConfig::new(10.0, 10.0, mass_identity(2)).unwrap();
        let res = sample_hmc(&target, &config, &DVector::from_vec(vec![1.0, 1.0]), 10, 20, &mut Rng::seed_from_u64(6));
        assert!(matches!(res, Err(Error::AllRejected(20))));
    }

    #[test]
    fn traces_are_reproducible() {
        let config = HmcConfig::new(0.2, 1.0, mass_identity(2)).unwrap();
        let a = sample_hmc(&unit(2), &config, &DVector::zeros(2), 100, 10, &mut Rng::seed_from_u64(7)).unwrap();
        let b = sample_hmc(&unit(2), &config, &DVector::zeros(2), 100, 10, &mut Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.trace, b.trace);
    }
}
