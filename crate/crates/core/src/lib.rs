//! Bandit algorithms for reliable cellular handover.
//!
//! Two problems are covered:
//!
//! * **When to hand over.** [`search`] finds the lowest serving-signal
//!   threshold whose handover success rate meets a target, exploiting the
//!   monotone relation between signal strength and success.
//!   [`analysis`] holds the matching closed-form regret bound and the optimal
//!   exploration budget.
//! * **Which cells to measure.** [`handover`] runs a user's measurement loop
//!   with an opportunistic Thompson-sampling policy and the usual benchmark
//!   policies, and aggregates users into campaigns.
//!
//! [`env`] supplies the synthetic radio environment and [`verify`] holds
//! brute-force reference implementations used to check the algorithms.

pub mod analysis;
pub mod bandit;
pub mod env;
pub mod error;
pub mod handover;
pub mod rng;
pub mod search;
pub mod verify;

pub use error::{Error, Result};
pub use rng::RngStream;
