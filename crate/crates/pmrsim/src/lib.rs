//! Deterministic models and simulation of PMR group calls over LTE.
//!
//! The crate covers the downlink side of mission-critical group
//! communication: multicast (eMBMS) versus unicast delivery, activation
//! policies, bearer lifecycles with their latency budgets, per-cell radio
//! resource accounting and a discrete-event engine that ties them together.

pub mod bearer;
pub mod config;
pub mod domain;
pub mod experiments;
pub mod gcse;
pub mod ids;
pub mod radio;
pub mod sim;
pub mod time;

pub use time::SimTime;

/// Keeps the guide's code listings compiling: every chapter is included
/// here as documentation, so `cargo test` runs each fenced example.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/group-calls.md")]
    mod group_calls {}
    #[doc = include_str!("../../../book/src/radio-resources.md")]
    mod radio_resources {}
    #[doc = include_str!("../../../book/src/activation-policies.md")]
    mod activation_policies {}
    #[doc = include_str!("../../../book/src/bearers-and-latency.md")]
    mod bearers_and_latency {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
