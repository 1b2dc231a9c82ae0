//! Monte Carlo exit selection.
//!
//! Only the exit hop is drawn: each circuit picks an exit with probability
//! proportional to `b·Wxx` (pure exits) or `b·Wxd` (entry-exit relays). A
//! trial is a batch of `c` circuits and counts as a hit when any of them
//! lands on an operator relay.
//!
//! Every trial draws from its own ChaCha8 stream (`seed`, stream = trial
//! index), so [`run`] and [`run_parallel`] produce the same result.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::consensus::{read_roster, NetworkState, NodeClass, NodeRecord, RosterError};
use crate::weights::WeightSet;

/// Identifier of the random source recorded in every result.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64/stream-per-trial";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("degenerate-exit-class: no relay has positive exit weight")]
    DegenerateExitClass,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("fleet id `{0}` is not in the roster")]
    UnknownFleetId(String),
    #[error("scenario {path}: {reason}")]
    Scenario { path: String, reason: String },
    #[error(transparent)]
    Roster(#[from] RosterError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub trials: u64,
    pub circuits_per_trial: u64,
    pub seed: u64,
    pub fleet_ids: BTreeSet<String>,
}

impl SimConfig {
    pub fn validate(&self, state: &NetworkState) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::InvalidConfig("trials must be at least 1".into()));
        }
        if self.circuits_per_trial == 0 {
            return Err(SimError::InvalidConfig("circuits per trial must be at least 1".into()));
        }
        if let Some(id) = self.fleet_ids.iter().find(|id| state.node(id).is_none()) {
            return Err(SimError::UnknownFleetId(id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub trials: u64,
    pub hit_trials: u64,
    pub empirical_pc: f64,
    /// Binomial standard error `sqrt(p(1-p)/trials)`.
    pub stderr: f64,
    pub rng_algorithm: &'static str,
    /// True when the result equals the single-threaded run for the seed.
    pub canonical: bool,
}

impl SimResult {
    fn from_hits(trials: u64, hit_trials: u64) -> Self {
        let p = hit_trials as f64 / trials as f64;
        SimResult {
            trials,
            hit_trials,
            empirical_pc: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            rng_algorithm: RNG_ALGORITHM,
            canonical: true,
        }
    }
}

/// Cumulative exit-weight table over the relays that can be chosen as exit.
#[derive(Debug, Clone)]
pub struct ExitSampler<'a> {
    nodes: Vec<&'a NodeRecord>,
    cumulative: Vec<f64>,
}

impl<'a> ExitSampler<'a> {
    pub fn new(state: &'a NetworkState, weights: &WeightSet) -> Result<Self, SimError> {
        let mut nodes = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for node in state.nodes() {
            let w = exit_weight(node, weights);
            if w > 0.0 {
                acc += w;
                nodes.push(node);
                cumulative.push(acc);
            }
        }
        if nodes.is_empty() {
            return Err(SimError::DegenerateExitClass);
        }
        Ok(ExitSampler { nodes, cumulative })
    }

    pub fn total_weight(&self) -> f64 {
        *self.cumulative.last().expect("sampler is never empty")
    }

    /// Relays with positive exit weight, in roster order.
    pub fn support(&self) -> &[&'a NodeRecord] {
        &self.nodes
    }

    /// Selection probability of the `i`-th supported relay.
    pub fn probability(&self, i: usize) -> f64 {
        let lo = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - lo) / self.total_weight()
    }

    pub fn sample_index<R: RngExt + ?Sized>(&self, rng: &mut R) -> usize {
        let r = rng.random::<f64>() * self.total_weight();
        let i = self.cumulative.partition_point(|&c| c <= r);
        i.min(self.nodes.len() - 1)
    }

    pub fn sample<R: RngExt + ?Sized>(&self, rng: &mut R) -> &'a NodeRecord {
        self.nodes[self.sample_index(rng)]
    }
}

fn exit_weight(node: &NodeRecord, weights: &WeightSet) -> f64 {
    match node.class() {
        NodeClass::PureExit => node.bandwidth * weights.wxx,
        NodeClass::EntryExit => node.bandwidth * weights.wxd,
        NodeClass::PureEntry | NodeClass::Neither => 0.0,
    }
}

/// Draws one exit relay.
pub fn sample_exit<'a, R: RngExt + ?Sized>(
    state: &'a NetworkState,
    weights: &WeightSet,
    rng: &mut R,
) -> Result<&'a NodeRecord, SimError> {
    Ok(ExitSampler::new(state, weights)?.sample(rng))
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

struct Prepared<'a> {
    sampler: ExitSampler<'a>,
    in_fleet: Vec<bool>,
}

fn prepare<'a>(
    state: &'a NetworkState,
    weights: &WeightSet,
    config: &SimConfig,
) -> Result<Prepared<'a>, SimError> {
    config.validate(state)?;
    let sampler = ExitSampler::new(state, weights)?;
    let in_fleet = sampler
        .support()
        .iter()
        .map(|n| config.fleet_ids.contains(&n.id))
        .collect();
    Ok(Prepared { sampler, in_fleet })
}

fn trial_hits(p: &Prepared<'_>, seed: u64, trial: u64, circuits: u64) -> bool {
    if !p.in_fleet.iter().any(|&f| f) {
        return false;
    }
    let mut rng = trial_rng(seed, trial);
    (0..circuits).any(|_| p.in_fleet[p.sampler.sample_index(&mut rng)])
}

/// Single-threaded, canonical run.
pub fn run(state: &NetworkState, weights: &WeightSet, config: &SimConfig) -> Result<SimResult, SimError> {
    let p = prepare(state, weights, config)?;
    let hits = (0..config.trials)
        .filter(|&t| trial_hits(&p, config.seed, t, config.circuits_per_trial))
        .count() as u64;
    Ok(SimResult::from_hits(config.trials, hits))
}

/// Parallel run over trials. Because every trial owns its random stream the
/// result is identical to [`run`].
pub fn run_parallel(
    state: &NetworkState,
    weights: &WeightSet,
    config: &SimConfig,
) -> Result<SimResult, SimError> {
    let p = prepare(state, weights, config)?;
    let hits = (0..config.trials)
        .into_par_iter()
        .filter(|&t| trial_hits(&p, config.seed, t, config.circuits_per_trial))
        .count() as u64;
    Ok(SimResult::from_hits(config.trials, hits))
}

/// Closed-form probability that at least one of `circuits` exits lands on
/// the fleet, using the same per-relay exit weights as the sampler.
pub fn analytic_pc(state: &NetworkState, weights: &WeightSet, config: &SimConfig) -> Result<f64, SimError> {
    let sampler = ExitSampler::new(state, weights)?;
    let ln_none: f64 = (0..sampler.support().len())
        .filter(|&i| config.fleet_ids.contains(&sampler.support()[i].id))
        .map(|i| (-sampler.probability(i)).ln_1p())
        .sum();
    Ok(crate::selection::pc_from_ln_none(ln_none, config.circuits_per_trial))
}

/// A scenario document (TOML):
///
/// ```toml
/// roster = "measured.roster"   # relative to the scenario file
/// fleet = ["op1"]
/// circuits = 1000
/// trials = 200000
/// seed = 7
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub roster: PathBuf,
    #[serde(default)]
    pub fleet: Vec<String>,
    pub circuits: u64,
    pub trials: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads a scenario and resolves its roster path against the scenario's
    /// directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let err = |reason: String| SimError::Scenario {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut scenario = Scenario::parse(&text).map_err(|e| err(e.message().to_string()))?;
        if scenario.roster.is_relative() {
            if let Some(dir) = path.parent() {
                scenario.roster = dir.join(&scenario.roster);
            }
        }
        Ok(scenario)
    }

    pub fn config(&self) -> SimConfig {
        SimConfig {
            trials: self.trials,
            circuits_per_trial: self.circuits,
            seed: self.seed,
            fleet_ids: self.fleet.iter().cloned().collect(),
        }
    }

    pub fn load_state(&self) -> Result<NetworkState, SimError> {
        Ok(read_roster(&self.roster)?)
    }
}
