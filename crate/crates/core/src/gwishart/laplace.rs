use super::{energy, grad_energy, hessian_energy, GWishartParams, PrecisionState};
use crate::error::{Error, Result};
use crate::numkernel::{cholesky, SymMatrix};

#[derive(Debug, Clone, Copy)]
pub struct LaplaceOptions {
    pub max_iterations: usize,
    /// Convergence when `‖∇E‖∞ < gradient_rtol · (1 + |E|)`.
    pub gradient_rtol: f64,
}

impl Default for LaplaceOptions {
    fn default() -> Self {
        Self { max_iterations: 10_000, gradient_rtol: 1e-8 }
    }
}

/// Minimizes the energy over `M⁺(G)`.
///
/// Damped Newton iterations with a halving backtracking line search; a trial
/// point is accepted only once it passes the Cholesky test and satisfies the
/// Armijo condition. Falls back to steepest descent where the Hessian does not
/// factor. `init = None` starts from `(b - 2 + p) · diag(D)⁻¹`.
pub fn laplace_mode(params: &GWishartParams, init: Option<&PrecisionState>, options: LaplaceOptions) -> Result<PrecisionState> {
    if !(params.b() > 2.0) {
        return Err(Error::InvalidParameter(format!("mode requires b > 2, got {}", params.b())));
    }
    let p = params.p();
    let free = params.free();
    let mut state = match init {
        Some(s) => s.clone(),
        None => {
            let scale = params.b() - 2.0 + p as f64;
            let diag: Vec<f64> = params.d().diagonal().iter().map(|d| scale / d).collect();
            PrecisionState::new(SymMatrix::from_diagonal(&diag), params.graph())?
        }
    };
    let mut e = energy(&state, params);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..options.max_iterations {
        let grad = grad_energy(&state, params);
        grad_norm = grad.amax();
        if grad_norm < options.gradient_rtol * (1.0 + e.abs()) {
            return Ok(state);
        }
        let direction = match cholesky(&hessian_energy(&state, params)) {
            Ok(h) => -h.solve(&grad),
            Err(_) => -grad.clone(),
        };
        let slope = grad.dot(&direction);
        let x = state.free_vector(free);
        let mut step = 1.0;
        loop {
            let trial = &x + &direction * step;
            if let Ok(candidate) = PrecisionState::from_free_vector(&trial, free) {
                let e_new = energy(&candidate, params);
                if e_new <= e + 1e-4 * step * slope || (e_new - e).abs() <= 1e-14 * (1.0 + e.abs()) {
                    state = candidate;
                    e = e_new;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-30 {
                return Err(Error::StepOutOfCone);
            }
        }
    }
    Err(Error::NonConvergence { iterations: options.max_iterations, gradient_norm: grad_norm })
}
