//! Periodic boundary-value problem: Gauss collocation of the period-scaled,
//! unfolded equations with periodicity and three integral phase conditions.

pub mod linsolve;
pub mod mesh;
pub mod newton;
pub mod orbit;
pub mod system;

pub use linsolve::BorderedFactorization;
pub use mesh::{Mesh, DEFAULT_DEGREE, DEFAULT_INTERVALS, MIN_INTERVALS};
pub use newton::{newton_correct, NewtonOutcome, NewtonSettings};
pub use orbit::{adapt_mesh, evaluate_orbit, OrbitSolution};
pub use system::{assemble_residual, ContinuationEquation, PhaseConstraints};
