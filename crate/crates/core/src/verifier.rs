//! Independent checks on computed orbits: an explicit adaptive integrator,
//! symmetry residuals, and the vanishing of the unfolding parameters.

use std::cell::Cell;
use std::rc::Rc;

use nalgebra::DVector;
use ode_solvers::dop853::Dop853;
use ode_solvers::dop_shared::{IntegrationError, OutputType};
use ode_solvers::System;

use crate::bvp::orbit::OrbitSolution;
use crate::error::{Error, Result};
use crate::nbody::{
    conserved_quantities, field_into, jacobi_energy, min_pair_distance, unfolding_fields, PhasePoint, SystemConfig,
    UnfoldingParams, COLLISION_GUARD,
};

struct Rotating {
    config: SystemConfig,
    collided: Rc<Cell<Option<f64>>>,
}

impl System<f64, DVector<f64>> for Rotating {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        if let Err(Error::CollisionProximity { distance }) =
            field_into(&self.config, y.as_slice(), &UnfoldingParams::ZERO, dy.as_mut_slice())
        {
            self.collided.set(Some(distance));
            dy.fill(0.0);
        }
    }

    fn solout(&mut self, _t: f64, y: &DVector<f64>, _dy: &DVector<f64>) -> bool {
        let d = min_pair_distance(&self.config, y.as_slice());
        if d < COLLISION_GUARD {
            self.collided.set(Some(d));
        }
        self.collided.get().is_some()
    }
}

/// Uniformly spaced states of an integrated trajectory, endpoint included.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
}

impl Trajectory {
    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("non-empty trajectory")
    }
}

/// Integrates the rotating-frame equations with `λ = 0` using an explicit
/// Runge–Kutta method of order 8 with relative and absolute tolerance `tol`,
/// returning `samples + 1` uniformly spaced states over `[0, duration]`.
pub fn integrate(
    state: &PhasePoint,
    config: &SystemConfig,
    duration: f64,
    tol: f64,
    samples: usize,
) -> Result<Trajectory> {
    if !(duration > 0.0) || samples == 0 {
        return Err(Error::InvalidConfig("duration and sample count must be positive".into()));
    }
    let d0 = min_pair_distance(config, state.as_slice());
    if d0 < COLLISION_GUARD {
        return Err(Error::CollisionProximity { distance: d0 });
    }
    let dt = duration / samples as f64;
    let collided = Rc::new(Cell::new(None));
    let mut times = Vec::with_capacity(samples + 1);
    let mut states = Vec::with_capacity(samples + 1);
    times.push(0.0);
    states.push(state.clone());
    let mut y = DVector::from_column_slice(state.as_slice());
    // the crate's dense interpolant is inaccurate, so each sample is a step endpoint
    for i in 0..samples {
        let system = Rotating {
            config: *config,
            collided: Rc::clone(&collided),
        };
        let (t0, t1) = (i as f64 * dt, (i + 1) as f64 * dt);
        let mut solver = Dop853::new(system, t0, t1, dt, y, tol, tol);
        solver.set_output(OutputType::Sparse);
        let outcome = solver.integrate();
        if let Some(distance) = collided.get() {
            return Err(Error::CollisionProximity { distance });
        }
        match outcome {
            Ok(_) => {}
            Err(IntegrationError::StepSizeUnderflow { x })
            | Err(IntegrationError::MaxNumStepReached { x, .. })
            | Err(IntegrationError::StiffnessDetected { x }) => {
                return Err(Error::StepUnderflow { t: x })
            }
        }
        let (xs, ys) = solver.results().get();
        match (xs.last(), ys.last()) {
            (Some(&x), Some(end)) if (x - t1).abs() <= 1e-12 * t1.max(1.0) => {
                y = end.clone();
            }
            _ => return Err(Error::StepUnderflow { t: t0 }),
        }
        times.push(t1);
        states.push(PhasePoint::from_vec(config, y.as_slice().to_vec())?);
    }
    Ok(Trajectory { times, states })
}

/// Collocation orbit compared with an integrated trajectory from its
/// initial point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    /// `‖x(T) − x(0)‖_∞` of the integrated trajectory.
    pub return_residual: f64,
    /// Largest state deviation between the integrated and collocation orbits.
    pub max_deviation: f64,
    /// Largest relative drift of `Pz`, `L` and the Jacobi energy.
    pub conserved_drift: f64,
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Integrates one period from the orbit's initial point.
pub fn cross_check(orbit: &OrbitSolution, tol: f64, samples: usize) -> Result<CrossCheck> {
    let config = &orbit.config;
    let x0 = orbit.evaluate(0.0);
    let traj = integrate(&x0, config, orbit.period, tol, samples)?;
    let return_residual = max_diff(traj.last().as_slice(), x0.as_slice());
    let mut max_deviation: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let c = orbit.evaluate(t / orbit.period);
        max_deviation = max_deviation.max(max_diff(s.as_slice(), c.as_slice()));
    }
    let q0 = conserved_quantities(&x0, config);
    let e0 = jacobi_energy(&x0, config);
    let mut drift: f64 = 0.0;
    for s in &traj.states {
        let q = conserved_quantities(s, config);
        let e = jacobi_energy(s, config);
        drift = drift
            .max((q.pz - q0.pz).abs() / q0.pz.abs().max(1.0))
            .max((q.angular - q0.angular).abs() / q0.angular.abs().max(1.0))
            .max((e - e0).abs() / e0.abs().max(1.0));
    }
    Ok(CrossCheck {
        return_residual,
        max_deviation,
        conserved_drift: drift,
    })
}

/// Symmetry residuals of an orbit, each a max-norm over a uniform time grid
/// of body positions. Unit time `t ∈ [0, 1)` corresponds to the `2π` scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryResiduals {
    /// `u_j(t) = e^{ijζ} u_n(t + jk/n)`.
    pub traveling_wave: f64,
    /// `u_n(t) = ū_n(−t)`.
    pub reversibility: f64,
    /// `z_j(t) = z_n(t + jk/n)`.
    pub spatial: f64,
    /// `u_n(t) = u_n(t + ½)` and `z_n(t) = −z_n(t + ½)`.
    pub half_period: f64,
    /// `z_j(t) = (−1)^j z_n(t)`; meaningful for `k = n/2`.
    pub alternating_z: f64,
    /// Invariance under `(x, y, z) → (x, −y, −z)` combined with a time
    /// reversal about the best of `t* ∈ {0, ¼, ½, ¾}`.
    pub axial: f64,
}

const SYMMETRY_SAMPLES: usize = 400;

fn planar_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

pub fn symmetry_residuals(orbit: &OrbitSolution) -> SymmetryResiduals {
    let config = &orbit.config;
    let n = config.n();
    let k = orbit.wave_number as f64;
    let zeta = config.zeta();
    let pos = |j: usize, t: f64| orbit.evaluate(t).position(config.ring_slot(j));
    let mut r = SymmetryResiduals {
        traveling_wave: 0.0,
        reversibility: 0.0,
        spatial: 0.0,
        half_period: 0.0,
        alternating_z: 0.0,
        axial: f64::INFINITY,
    };
    let mut axial = [0.0f64; 4];
    for i in 0..SYMMETRY_SAMPLES {
        let t = i as f64 / SYMMETRY_SAMPLES as f64;
        let un = pos(n, t);
        for j in 1..n {
            let uj = pos(j, t);
            let shifted = pos(n, t + j as f64 * k / n as f64);
            let (s, c) = (j as f64 * zeta).sin_cos();
            let rotated = [c * shifted[0] - s * shifted[1], s * shifted[0] + c * shifted[1], 0.0];
            r.traveling_wave = r.traveling_wave.max(planar_dist(uj, rotated));
            r.spatial = r.spatial.max((uj[2] - shifted[2]).abs());
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            r.alternating_z = r.alternating_z.max((uj[2] - sign * un[2]).abs());
        }
        let back = pos(n, -t);
        r.reversibility = r.reversibility.max((un[0] - back[0]).abs()).max((un[1] + back[1]).abs());
        let half = pos(n, t + 0.5);
        r.half_period = r
            .half_period
            .max(planar_dist(un, half))
            .max((un[2] + half[2]).abs());
        for (q, a) in axial.iter_mut().enumerate() {
            let mirror = pos(n, 0.25 * q as f64 - t);
            let dev = (un[0] - mirror[0])
                .abs()
                .max((un[1] + mirror[1]).abs())
                .max((un[2] + mirror[2]).abs());
            *a = a.max(dev);
        }
    }
    r.axial = axial.iter().copied().fold(f64::INFINITY, f64::min);
    r
}

/// The unfolding parameters of a converged orbit and the independence of
/// the three unfolding fields along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnfoldingReport {
    pub lambdas: [f64; 3],
    pub max_abs: f64,
    pub vanishes: bool,
    /// `det G / (G₁₁ G₂₂ G₃₃)` of the time-averaged Gram matrix, in `[0, 1]`.
    pub gram_ratio: f64,
}

/// Largest `|λ|` accepted as zero.
pub const UNFOLDING_TOLERANCE: f64 = 1e-8;

pub fn unfolding_check(orbit: &OrbitSolution) -> UnfoldingReport {
    let lambdas = orbit.lambdas.as_array();
    let max_abs = orbit.lambdas.max_abs();
    let mut g = [[0.0; 3]; 3];
    for i in 0..SYMMETRY_SAMPLES {
        let x = orbit.evaluate(i as f64 / SYMMETRY_SAMPLES as f64);
        let gi = unfolding_fields(&x, &orbit.config).gram();
        for a in 0..3 {
            for b in 0..3 {
                g[a][b] += gi[a][b] / SYMMETRY_SAMPLES as f64;
            }
        }
    }
    let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
        + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    let diag = g[0][0] * g[1][1] * g[2][2];
    let gram_ratio = if diag > 0.0 { det / diag } else { 0.0 };
    UnfoldingReport {
        lambdas,
        max_abs,
        vanishes: max_abs <= UNFOLDING_TOLERANCE,
        gram_ratio,
    }
}
