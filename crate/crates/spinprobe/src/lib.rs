//! Simulation and sensitivity analysis of a collisional single-atom spin
//! probe in an ultracold bath.
//!
//! A single probe atom exchanges spin quanta with a cold gas. Endoergic
//! exchanges must pay a Zeeman energy cost out of the collision energy, so
//! the probe's seven-level spin distribution encodes the bath temperature
//! and the applied magnetic field. This crate models that encoding end to
//! end: the fraction of collisions able to pay the cost, the twelve
//! spin-exchange rates, the rate-equation dynamics and steady state, and
//! the Fisher information the spin distribution carries about temperature,
//! field, total energy, or the thermal-to-Zeeman energy ratio.
//!
//! Two conventions worth knowing:
//!
//! * Parameter changes are relative: speeds and Fisher information refer to
//!   a fractional change `delta theta / theta` of the scanned quantity, so
//!   values are dimensionless and comparable across axes.
//! * Statistical speed is normalized so that `F = 8 s^2` reproduces the
//!   classical Fisher information `sum (dP)^2 / P`; see
//!   [`sensitivity::speed_from_distance`].
//!
//! The total energy / energy ratio coordinates use `E_th = k_B T` and
//! `E_Z = mu_B |g_F| B`. Against that convention the canonical reference
//! condition (43 mG, 435 nK) sits at a ratio of 0.602 and a total energy of
//! 1.157 uK.

pub mod config;
pub mod dynamics;
pub mod endo;
pub mod envelope;
pub mod error;
pub mod fit;
pub mod quad;
pub mod rates;
pub mod runner;
pub mod scan;
pub mod sensitivity;
pub mod units;

pub use error::{Error, Result};
