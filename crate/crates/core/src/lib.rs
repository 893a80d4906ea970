//! Mismatch capacity of a three-node channel with an oblivious relay.
//!
//! A sender's input `X` reaches a relay as `Y` through a known channel `Θ`.
//! The relay compresses `Y` into `Z` at rate `I(Y;Z) <= B` without knowing the
//! codebook, and a decoder with an additive, possibly mismatched metric
//! `d(x, z)` recovers the message from `Z`. The achievable rate is the LM rate
//! of `P_XZ`, maximized over the input law and the relay's quantizer:
//!
//! ```text
//! C_d(B) = max_{P_X} max_{P_{Z|Y}} I_LM(X;Z)   subject to   I(Y;Z) <= B.
//! ```
//!
//! This crate solves the Lagrangian relaxation `I_LM − λ I(Y;Z)` by
//! alternating maximization over closed-form block updates ([`am`]), searches
//! `λ` to meet a budget `B` ([`solve_for_budget`]), evaluates LM rates of
//! fixed joints through their optimal-transport dual ([`lm_dual`]) and builds
//! the quaternary and AWGN/IQ-imbalance test channels ([`channels`]).
//!
//! All rates are in nats internally; [`prob::nats_to_bits`] converts.
//!
//! ```
//! use mismatch_relay::{channels, prob::bits_to_nats, solve_for_budget, InputMode, RelayProblem, SolverConfig};
//!
//! let theta = channels::quaternary_channel(0.3)?;
//! let metric = channels::metric_from_decoding_rule(0.3)?;
//! let problem = RelayProblem::new(theta, metric)?;
//! let config = SolverConfig {
//!     compression_target: Some(bits_to_nats(0.81)),
//!     input: InputMode::Uniform,
//!     ..SolverConfig::default()
//! };
//! let report = solve_for_budget(&problem, &config)?;
//! assert!((report.rate_yz - bits_to_nats(0.81)).abs() <= 1e-6);
//! # Ok::<(), mismatch_relay::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod am;
mod budget;
pub mod channels;
pub mod error;
pub mod lm_dual;
mod numeric;
pub mod oracle;
pub mod prob;
mod root;

pub use am::{
    solve, AmSolver, BudgetOutcome, BudgetStatus, InputMode, RelayProblem, Residuals, SolverConfig, SolverReport,
    SolverState, Stage,
};
pub use budget::solve_for_budget;
pub use error::{Error, Result};
pub use lm_dual::{lm_rate_fixed_joint, DualState, LmMarginals, LmRate};
pub use prob::{Alphabet, Channel, DecodingMetric, Distribution};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lm-rate.md")]
    mod lm_rate {}
    #[doc = include_str!("../../../book/src/alternating-maximization.md")]
    mod alternating_maximization {}
    #[doc = include_str!("../../../book/src/compression-budget.md")]
    mod compression_budget {}
    #[doc = include_str!("../../../book/src/power-constraint.md")]
    mod power_constraint {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
