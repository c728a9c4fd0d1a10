//! Fuzzy fractional-order PID control of a pressurized-water reactor model.
//!
//! The crate is organised bottom-up:
//!
//! * [`reactor`] – nonlinear point kinetics with thermal feedback, steady
//!   state, analytic linearization and zero-pole-gain conversion.
//! * [`fracfilter`] – Oustaloup band-limited differintegrators, their
//!   bilinear discretization and fractional Gaussian noise synthesis.
//! * [`fuzzy`] – the two-input Mamdani engine (min implication, max
//!   aggregation, center-of-gravity defuzzification).
//! * [`controller`] – the fuzzy PI^λD^μ law and its named presets.
//! * [`stochastic`] – self-similar delay synthesis, the feedback delay line
//!   and long-range-dependence diagnostics.
//! * [`tuner`] – the ITSE + ISCO objective and a real-coded GA.
//! * [`sim`] – scenario files, the closed loop and reproduction grids.

pub mod controller;
pub mod error;
pub mod fracfilter;
pub mod fuzzy;
pub mod poly;
pub mod reactor;
pub mod sim;
pub mod stochastic;
pub mod tuner;

pub use error::{Error, Result};
