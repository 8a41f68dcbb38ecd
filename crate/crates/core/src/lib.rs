//! Continuation of periodic orbit families bifurcating from the polygonal
//! relative equilibrium of the n-body problem, detection of resonant orbits
//! along those families, and extraction of the choreographies they produce in
//! the inertial frame.
//!
//! The crate is organised bottom-up:
//!
//! * [`nbody`]: rotating-frame vector field, equilibria, conserved quantities.
//! * [`spectrum`]: linearisation at the equilibrium and mode classification.
//! * [`bvp`]: Gauss collocation for periodic orbits with phase conditions.
//! * [`continuation`]: pseudo-arclength families, bifurcation detection and
//!   branch switching.
//! * [`choreography`]: resonance arithmetic and inertial-frame paths.
//! * [`verifier`]: independent IVP checks and symmetry residuals.
//! * [`io`]: text formats for branches and choreography paths.
//! * [`cli`]: the `choreo` command-line front end.

pub mod bvp;
pub mod choreography;
pub mod cli;
pub mod continuation;
pub mod verifier;
pub mod error;
pub mod io;
pub mod nbody;
pub mod spectrum;

pub use error::{Error, Result};
