//! Command-line surface of the mismatch-relay solver: JSON run configs,
//! single runs, parameter sweeps, quantizer export and LM rates of fixed joints.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{Axis, ChannelSpec, Mode, RunConfig, SweepSpec, Units};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book {}
