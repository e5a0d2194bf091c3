//! Design and evaluation of passive vibration absorbers on impulsively
//! excited spring-mass-damper chains.
//!
//! The crate models a two-mass primary structure (and general n-mass
//! chains) carrying either an essentially nonlinear attachment — a cubic
//! spring with a viscous damper that can act as a one-way energy sink — or
//! a linear tuned mass damper. It provides:
//!
//! - full-order equations of motion, modal analysis, and energy
//!   bookkeeping ([`model`]);
//! - adaptive time integration, energy traces, and detection of the
//!   impulse threshold that triggers strong energy transfer ([`sim`]);
//! - the averaging-based reduction chain down to a planar Hamiltonian
//!   system whose saddle structure yields a closed-form critical impulse
//!   velocity ([`reduction`]);
//! - Lyapunov-equation absorber tuning with closed forms for the
//!   single-mass primary and a numerical optimizer for the two-mass one
//!   ([`tmdopt`]);
//! - batch sweeps over impulse magnitude, absorber stiffness, and
//!   perturbed plant parameters, with absorber-kind comparison
//!   ([`sweep`]);
//! - CSV/JSON/SVG export ([`export`]) and a thin command-line front end
//!   ([`cli`]).
//!
//! Start with the runnable programs under `examples/`.

pub mod cli;
pub mod error;
pub mod export;
pub mod model;
pub mod reduction;
pub mod sim;
pub mod sweep;
pub mod tmdopt;

pub use error::{Error, Result};
