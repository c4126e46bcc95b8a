//! Modeling, analysis, simulation, and DNA-strand-displacement compilation
//! of mass-action reaction networks under nonlinear positive integral
//! feedback.
//!
//! The controller couples three reactions to a plant network — an
//! autocatalytic reference reaction, an output-driven degradation
//! (measurement) reaction, and a catalytic actuation reaction — and
//! drives the controlled species to a set-point μ with perfect adaptation
//! against constant disturbances and rate-parameter changes, as long as
//! the stability coefficient α stays below a computable threshold ᾱ(μ).
//!
//! Module map:
//!
//! * [`network`] — species, reactions, mass-action rate equations,
//!   Jacobians, linearization, structural checks;
//! * [`controller`] — the integral controller motif (ideal and Hill
//!   variants) and the closed loop;
//! * [`analysis`] — equilibria, spectra, the stability threshold ᾱ,
//!   convergence-rate tuning, disturbance rejection, metabolic power;
//! * [`sim`] — adaptive Runge–Kutta integration with parameter schedules,
//!   time averages, power traces;
//! * [`ssa`] — Gillespie simulation at finite copy numbers;
//! * [`dsd`] — compilation into DNA strand displacement circuits and
//!   fidelity comparison against the ideal dynamics.
//!
//! # Example
//!
//! Drive a degrading species to a set-point of 2 and check both the
//! stability threshold and the simulated steady state:
//!
//! ```
//! use crnctl_core::analysis::{alpha_bar, equilibria};
//! use crnctl_core::controller::{attach_integral_controller, ControllerParams};
//! use crnctl_core::nalgebra::DVector;
//! use crnctl_core::network::{Network, ReactionDef, Species};
//! use crnctl_core::sim::{integrate, Schedule, SimOptions};
//!
//! let plant = Network::new(
//!     vec![Species::new("x", 0.0)],
//!     vec![ReactionDef::mass_action(&[("x", 1)], &[], 1.0)],
//!     "x",
//!     "x",
//! )?;
//!
//! let linear = plant.linearize(&DVector::zeros(1))?;
//! let threshold = alpha_bar(&linear, 2.0)?;
//! assert!(threshold.weakly_spr); // first-order plant: stable for any α
//!
//! let params = ControllerParams::new(2.0, 0.5, 10.0)?;
//! let (x_star, v_star) = equilibria(&linear, &params)?.positive.unwrap();
//! assert!((x_star[0] - 2.0).abs() < 1e-12);
//!
//! let closed = attach_integral_controller(plant, params)?;
//! let traj = integrate(&closed, None, &Schedule::empty(), 60.0, &SimOptions::default())?;
//! let end = traj.last_row();
//! assert!((end[0] - 2.0).abs() < 1e-6); // output at the set-point
//! assert!((end[1] - v_star).abs() < 1e-6);
//! # Ok::<(), crnctl_core::Error>(())
//! ```

// Validation uses `!(v > 0.0)` so that NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controller;
pub mod dsd;
pub mod error;
pub mod network;
pub mod polynomial;
pub mod sim;
pub mod ssa;

pub use error::{Error, Result};

// The linear-algebra types in the public API come from nalgebra; re-export
// it so downstream crates build against the same version.
pub use nalgebra;
