//! Exit-relay selection modelling and exit-side traffic analysis for Tor.
//!
//! The network half computes consensus bandwidth weights ([`weights`]), the
//! per-circuit and at-least-once probability of choosing an operator's exits
//! ([`selection`]), a budgeted deployment plan ([`planner`]) and a Monte Carlo
//! check of the analytic model ([`simulator`]). The traffic half triages exit
//! flows ([`traffic`]) and runs a staged device and attack analysis over the
//! survivors ([`analyzer`]). [`cli`] wires both into the `exitlens` binary.

pub mod analyzer;
pub mod cli;
pub mod consensus;
pub mod planner;
pub mod selection;
pub mod simulator;
pub mod traffic;
pub mod weights;
