//! Damped Newton corrector for the bordered collocation system.

use crate::bvp::linsolve::BorderedFactorization;
use crate::bvp::orbit::OrbitSolution;
use crate::bvp::system::{full_residual, residual_and_factorization, ContinuationEquation, PhaseConstraints};
use crate::error::{Error, Result};

/// Convergence controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Max-norm residual accepted as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 20,
        }
    }
}

/// A converged orbit with the factorization of the Jacobian at that orbit.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub orbit: OrbitSolution,
    /// Number of Jacobian factorizations, including the final one.
    pub iterations: usize,
    pub residual: f64,
    /// Max-norm of the total correction applied to the guess.
    pub correction: f64,
    pub factorization: BorderedFactorization,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Factor on the residual tolerance for close encounters, where forces of
/// of size `1/r²` and their Jacobian put a floor under the attainable
/// residual that grows roughly like `1/r³`.
fn rounding_floor(orbit: &OrbitSolution) -> f64 {
    let r = orbit.min_pair_distance();
    (ENCOUNTER_SCALE / r).powi(3).max(1.0)
}

const ENCOUNTER_SCALE: f64 = 0.1;

/// Newton iteration on collocation + periodicity + phase integrals + the
/// continuation equation.
pub fn newton_correct(
    guess: &OrbitSolution,
    constraints: &PhaseConstraints,
    cont: &ContinuationEquation,
    settings: &NewtonSettings,
) -> Result<NewtonOutcome> {
    let start = guess.to_unknowns();
    let mut u = start.clone();
    let mut orbit = guess.clone();
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    loop {
        let (r, fac) = residual_and_factorization(&orbit, constraints, cont)?;
        iterations += 1;
        let res = max_norm(&r);
        if !res.is_finite() {
            return Err(Error::NoConvergence {
                residual: res,
                iterations,
            });
        }
        let scale = 1.0 + max_norm(&u);
        let tol = settings.tolerance * rounding_floor(&orbit);
        if res < tol || (res < 100.0 * tol && last_step < 1e-13 * scale) {
            let correction = u.iter().zip(&start).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            return Ok(NewtonOutcome {
                orbit,
                iterations,
                residual: res,
                correction,
                factorization: fac,
            });
        }
        if iterations >= settings.max_iterations {
            return Err(Error::NoConvergence {
                residual: res,
                iterations,
            });
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = fac.solve(&neg);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..5 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + alpha * b).collect();
            let candidate = orbit.with_unknowns(&trial);
            if candidate.period > 0.0 {
                if let Ok(rt) = full_residual(&candidate, constraints, cont) {
                    let rn = max_norm(&rt);
                    if rn.is_finite() && (rn < res || alpha < 0.1) {
                        accepted = Some((trial, candidate));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, candidate)) => {
                last_step = alpha * max_norm(&delta);
                u = trial;
                orbit = candidate;
            }
            None => {
                return Err(Error::NoConvergence {
                    residual: res,
                    iterations,
                })
            }
        }
    }
}
