//! Probability that an attacker's circuits exit through operator-controlled
//! relays, and how long it takes to see every kind of malicious traffic.
//!
//! A client picks each circuit's exit independently, proportionally to the
//! exit-position weighted bandwidth `B_x·Wxx + B_d·Wxd`. An operator relay of
//! bandwidth `b` (run as a pure exit) is therefore chosen with probability
//! `b·Wxx / (B_x·Wxx + B_d·Wxd)` per circuit, and a fleet is missed by one
//! circuit with the product of the complements. After `c` circuits the fleet
//! has been used at least once with probability `1 - P̄^c`.
//!
//! `P̄^c` is evaluated as `exp(c·Σ ln(1 - p_i))` and the complement through
//! `expm1`, so per-circuit probabilities around 1e-5 with `c` in the hundreds
//! of thousands keep full relative precision.

use crate::consensus::{ClassBandwidths, NetworkState};
use crate::weights::WeightSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("degenerate-exit-class: exit-position weighted bandwidth is zero")]
    DegenerateExitClass,
    #[error("fleet bandwidth #{index} must be finite and positive, got {value}")]
    InvalidBandwidth { index: usize, value: f64 },
    #[error("fleet index {index} out of range for a fleet of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(
        "a relay of {bandwidth} Gb/s exceeds the whole exit-position bandwidth \
         ({probability} > 1 per circuit)"
    )]
    ProbabilityAboveOne { bandwidth: f64, probability: f64 },
    #[error("target probability must lie in [0, 1), got {0}")]
    InvalidTarget(f64),
    #[error("unreachable-target: the fleet is never chosen, or needs more than 2^64 circuits")]
    UnreachableTarget,
    #[error("invalid traffic model: {0}")]
    InvalidModel(String),
}

/// Bandwidths (Gb/s) of the operator's exit relays.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExitFleet {
    bandwidths: Vec<f64>,
}

impl ExitFleet {
    pub fn new(bandwidths: Vec<f64>) -> Result<Self, SelectionError> {
        for (index, &value) in bandwidths.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(SelectionError::InvalidBandwidth { index, value });
            }
        }
        Ok(ExitFleet { bandwidths })
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn len(&self) -> usize {
        self.bandwidths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bandwidths.is_empty()
    }

    pub fn total_bandwidth(&self) -> f64 {
        self.bandwidths.iter().sum()
    }

    pub fn push(&mut self, bandwidth: f64) -> Result<(), SelectionError> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(SelectionError::InvalidBandwidth {
                index: self.bandwidths.len(),
                value: bandwidth,
            });
        }
        self.bandwidths.push(bandwidth);
        Ok(())
    }
}

/// The exit position of a weighted network: `Wxx` and the denominator
/// `B_x·Wxx + B_d·Wxd` shared by every per-relay probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitPosition {
    wxx: f64,
    weighted_bandwidth: f64,
}

impl ExitPosition {
    pub fn new(b: &ClassBandwidths, weights: &WeightSet) -> Result<Self, SelectionError> {
        let weighted_bandwidth = b.pure_exit * weights.wxx + b.entry_exit * weights.wxd;
        if weighted_bandwidth.is_nan() || weighted_bandwidth <= 0.0 {
            return Err(SelectionError::DegenerateExitClass);
        }
        Ok(ExitPosition {
            wxx: weights.wxx,
            weighted_bandwidth,
        })
    }

    pub fn of_state(state: &NetworkState, weights: &WeightSet) -> Result<Self, SelectionError> {
        Self::new(state.bandwidths(), weights)
    }

    pub fn weighted_bandwidth(&self) -> f64 {
        self.weighted_bandwidth
    }

    /// Per-circuit probability that a pure exit relay of `bandwidth` is
    /// picked. Zero bandwidth is accepted and gives zero.
    pub fn choice_prob(&self, bandwidth: f64) -> Result<f64, SelectionError> {
        if !bandwidth.is_finite() || bandwidth < 0.0 {
            return Err(SelectionError::InvalidBandwidth {
                index: 0,
                value: bandwidth,
            });
        }
        let probability = bandwidth * self.wxx / self.weighted_bandwidth;
        if probability > 1.0 {
            return Err(SelectionError::ProbabilityAboveOne {
                bandwidth,
                probability,
            });
        }
        Ok(probability)
    }

    /// `Π (1 - P(b_i))`, multiplied out directly.
    pub fn none_chosen(&self, fleet: &ExitFleet) -> Result<f64, SelectionError> {
        fleet
            .bandwidths
            .iter()
            .try_fold(1.0, |acc, &b| Ok(acc * (1.0 - self.choice_prob(b)?)))
    }

    /// `ln Π (1 - P(b_i))`; `-inf` when some relay is certain to be picked.
    pub fn ln_none_chosen(&self, fleet: &ExitFleet) -> Result<f64, SelectionError> {
        fleet
            .bandwidths
            .iter()
            .try_fold(0.0, |acc, &b| Ok(acc + (-self.choice_prob(b)?).ln_1p()))
    }

    pub fn at_least_once(&self, fleet: &ExitFleet, circuits: u64) -> Result<f64, SelectionError> {
        Ok(pc_from_ln_none(self.ln_none_chosen(fleet)?, circuits))
    }

    /// Smallest circuit count whose at-least-once probability reaches `target`.
    pub fn circuits_for_target(&self, fleet: &ExitFleet, target: f64) -> Result<u64, SelectionError> {
        if !(0.0..1.0).contains(&target) {
            return Err(SelectionError::InvalidTarget(target));
        }
        if target == 0.0 {
            return Ok(0);
        }
        let ln_none = self.ln_none_chosen(fleet)?;
        if ln_none == 0.0 {
            return Err(SelectionError::UnreachableTarget);
        }
        if ln_none == f64::NEG_INFINITY {
            return Ok(1);
        }
        let estimate = ((-target).ln_1p() / ln_none).ceil();
        if estimate.is_nan() || estimate >= u64::MAX as f64 {
            return Err(SelectionError::UnreachableTarget);
        }
        // The closed form can land one off after rounding; settle against
        // the same evaluation `at_least_once` uses.
        let mut c = estimate.max(1.0) as u64;
        while c > 1 && pc_from_ln_none(ln_none, c - 1) >= target {
            c -= 1;
        }
        while pc_from_ln_none(ln_none, c) < target {
            c = c.checked_add(1).ok_or(SelectionError::UnreachableTarget)?;
        }
        Ok(c)
    }
}

/// `1 - exp(c·ln P̄)` without cancellation.
pub fn pc_from_ln_none(ln_none: f64, circuits: u64) -> f64 {
    if circuits == 0 {
        return 0.0;
    }
    if ln_none == f64::NEG_INFINITY {
        return 1.0;
    }
    -(circuits as f64 * ln_none).exp_m1()
}

/// Per-circuit probability that fleet relay `index` (0-based) is chosen.
pub fn single_choice_prob(
    fleet: &ExitFleet,
    index: usize,
    state: &NetworkState,
    weights: &WeightSet,
) -> Result<f64, SelectionError> {
    let b = *fleet
        .bandwidths
        .get(index)
        .ok_or(SelectionError::IndexOutOfRange {
            index,
            len: fleet.len(),
        })?;
    ExitPosition::of_state(state, weights)?.choice_prob(b)
}

/// Probability that one circuit avoids every fleet relay.
pub fn none_chosen_prob(
    fleet: &ExitFleet,
    state: &NetworkState,
    weights: &WeightSet,
) -> Result<f64, SelectionError> {
    ExitPosition::of_state(state, weights)?.none_chosen(fleet)
}

/// Probability that at least one of `circuits` circuits exits via the fleet.
pub fn at_least_once_prob(
    fleet: &ExitFleet,
    state: &NetworkState,
    weights: &WeightSet,
    circuits: u64,
) -> Result<f64, SelectionError> {
    ExitPosition::of_state(state, weights)?.at_least_once(fleet, circuits)
}

pub fn circuits_for_target(
    fleet: &ExitFleet,
    state: &NetworkState,
    weights: &WeightSet,
    target: f64,
) -> Result<u64, SelectionError> {
    ExitPosition::of_state(state, weights)?.circuits_for_target(fleet, target)
}

/// Circuit-creation behaviour of the malicious traffic classes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficClassModel {
    rates: Vec<f64>,
    saturation_circuits: u64,
}

impl TrafficClassModel {
    /// `rates` are circuits per second, one per traffic class;
    /// `saturation_circuits` is the circuit count treated as certain capture.
    pub fn new(rates: Vec<f64>, saturation_circuits: u64) -> Result<Self, SelectionError> {
        if rates.is_empty() {
            return Err(SelectionError::InvalidModel("at least one traffic class".into()));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(SelectionError::InvalidModel(format!(
                "circuit rates must be positive, got {r}"
            )));
        }
        if saturation_circuits == 0 {
            return Err(SelectionError::InvalidModel(
                "saturation circuit count must be at least 1".into(),
            ));
        }
        Ok(TrafficClassModel {
            rates,
            saturation_circuits,
        })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn saturation_circuits(&self) -> u64 {
        self.saturation_circuits
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTime {
    /// Seconds until every class has been observed (the slowest class).
    pub all_classes: f64,
    /// Expected seconds for each class to build the saturating circuit count.
    pub per_class: Vec<f64>,
}

/// Circuit creation is a Poisson process per class, so building `g`
/// circuits at rate `λ` takes `g/λ` seconds on average.
pub fn estimate_observation_time(model: &TrafficClassModel) -> ObservationTime {
    let g = model.saturation_circuits as f64;
    let per_class: Vec<f64> = model.rates.iter().map(|&rate| g / rate).collect();
    let all_classes = per_class.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ObservationTime {
        all_classes,
        per_class,
    }
}
