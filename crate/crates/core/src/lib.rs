//! Shortcut-to-adiabaticity transport of Bose-Einstein condensates in
//! atom-chip traps.
//!
//! The pipeline runs from a magnetostatic model of a Z-shaped wire
//! ([`chip_model`]) through ramp design ([`sta_design`]) to classical,
//! scaling-law and mean-field dynamics ([`classical_sim`], [`scaling_sim`],
//! [`gpe_sim`]), collective-mode spectroscopy ([`mode_analysis`]) and
//! delta-kick collimation sequences ([`sequence`]).

pub mod chip_model;
pub mod classical_sim;
pub mod cli;
pub mod config;
pub mod error;
pub mod figures;
pub mod gpe_sim;
pub mod mode_analysis;
pub mod ode;
pub mod output;
pub mod pade;
pub mod scaling_sim;
pub mod scenario;
pub mod sequence;
pub mod sta_design;
pub mod units;

pub use error::{Error, Result};
