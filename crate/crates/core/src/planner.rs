//! Greedy, budget-constrained exit deployment.
//!
//! Node options (VPS offerings) are sorted by cost per Gb/s. Walking that
//! order, the planner buys instances of the current option one at a time,
//! up to what the remaining budget affords, and recomputes the probability
//! that `c` attacker circuits hit at least one planned relay. It stops as
//! soon as the desired probability is reached or the budget is spent.
//!
//! Planned relays are modelled as pure exits against the network's existing
//! aggregates: they do not change `B_x` or the weights.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::consensus::NetworkState;
use crate::selection::{ExitFleet, ExitPosition, SelectionError};
use crate::weights::{compute_weights, WeightError, WeightSet};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no-options: nothing to buy but budget and target are both positive")]
    NoOptions,
    #[error("invalid node option `{label}`: {reason}")]
    InvalidOption { label: String, reason: String },
    #[error("invalid planning input: {0}")]
    InvalidInput(String),
    #[error("options file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("plan record: {0}")]
    BadRecord(String),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A purchasable relay configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeOption {
    pub label: String,
    /// Gb/s per instance.
    pub bandwidth: f64,
    /// Currency units per month per instance.
    pub cost: f64,
}

impl NodeOption {
    pub fn new(label: impl Into<String>, bandwidth: f64, cost: f64) -> Result<Self, PlanError> {
        let label = label.into();
        let bad = |reason: &str| PlanError::InvalidOption {
            label: label.clone(),
            reason: reason.to_string(),
        };
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(bad("label must be a single non-empty token"));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(bad("bandwidth must be positive"));
        }
        if !(cost.is_finite() && cost > 0.0) {
            return Err(bad("cost must be positive"));
        }
        Ok(NodeOption {
            label,
            bandwidth,
            cost,
        })
    }

    pub fn cost_per_gbps(&self) -> f64 {
        self.cost / self.bandwidth
    }
}

/// Sorts by cost per Gb/s, then cost, then label.
pub fn sort_options(options: &[NodeOption]) -> Vec<NodeOption> {
    let mut sorted = options.to_vec();
    sorted.sort_by(|a, b| {
        a.cost_per_gbps()
            .total_cmp(&b.cost_per_gbps())
            .then_with(|| a.cost.total_cmp(&b.cost))
            .then_with(|| a.label.cmp(&b.label))
    });
    sorted
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub option: NodeOption,
    pub count: u64,
}

/// State after one purchase.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub label: String,
    pub cost_so_far: f64,
    pub bandwidth_so_far: f64,
    pub pc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentPlan {
    pub placements: Vec<Placement>,
    pub total_cost: f64,
    pub total_bandwidth: f64,
    pub achieved_pc: f64,
    pub circuits_assumed: u64,
    /// One entry per purchased instance, in purchase order.
    pub steps: Vec<PlanStep>,
}

impl DeploymentPlan {
    fn empty(circuits: u64) -> Self {
        DeploymentPlan {
            placements: Vec::new(),
            total_cost: 0.0,
            total_bandwidth: 0.0,
            achieved_pc: 0.0,
            circuits_assumed: circuits,
            steps: Vec::new(),
        }
    }

    pub fn instance_count(&self) -> u64 {
        self.placements.iter().map(|p| p.count).sum()
    }

    /// The purchase order as option labels.
    pub fn purchase_sequence(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.label.as_str()).collect()
    }

    /// Human-readable report: one line per option, then a summary.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for p in &self.placements {
            let _ = writeln!(
                out,
                "{} x{} cost={} bw={}",
                p.option.label,
                p.count,
                fmt_num(p.option.cost * p.count as f64),
                fmt_num(p.option.bandwidth * p.count as f64)
            );
        }
        let _ = writeln!(
            out,
            "total cost={} bw={} pc={:.6} circuits={}",
            fmt_num(self.total_cost),
            fmt_num(self.total_bandwidth),
            self.achieved_pc,
            self.circuits_assumed
        );
        out
    }

    /// Flat `key=value` document mirroring the plan fields.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "total_cost={}", self.total_cost);
        let _ = writeln!(out, "total_bandwidth={}", self.total_bandwidth);
        let _ = writeln!(out, "achieved_pc={}", self.achieved_pc);
        let _ = writeln!(out, "circuits_assumed={}", self.circuits_assumed);
        let _ = writeln!(out, "placements={}", self.placements.len());
        for (i, p) in self.placements.iter().enumerate() {
            let _ = writeln!(out, "placement.{i}.label={}", p.option.label);
            let _ = writeln!(out, "placement.{i}.bandwidth={}", p.option.bandwidth);
            let _ = writeln!(out, "placement.{i}.cost={}", p.option.cost);
            let _ = writeln!(out, "placement.{i}.count={}", p.count);
        }
        out
    }

    /// Reads a document written by [`DeploymentPlan::to_records`]. The
    /// purchase trace is not part of the record and comes back empty.
    pub fn from_records(text: &str) -> Result<Self, PlanError> {
        let mut kv = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PlanError::BadRecord(format!("expected key=value, got `{line}`")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        fn get<T: std::str::FromStr>(kv: &BTreeMap<String, String>, k: &str) -> Result<T, PlanError> {
            kv.get(k)
                .ok_or_else(|| PlanError::BadRecord(format!("missing `{k}`")))?
                .parse()
                .map_err(|_| PlanError::BadRecord(format!("bad value for `{k}`")))
        }
        let n: usize = get(&kv, "placements")?;
        let mut placements = Vec::with_capacity(n);
        for i in 0..n {
            let label: String = get(&kv, &format!("placement.{i}.label"))?;
            let option = NodeOption::new(
                label,
                get(&kv, &format!("placement.{i}.bandwidth"))?,
                get(&kv, &format!("placement.{i}.cost"))?,
            )?;
            placements.push(Placement {
                option,
                count: get(&kv, &format!("placement.{i}.count"))?,
            });
        }
        Ok(DeploymentPlan {
            placements,
            total_cost: get(&kv, "total_cost")?,
            total_bandwidth: get(&kv, "total_bandwidth")?,
            achieved_pc: get(&kv, "achieved_pc")?,
            circuits_assumed: get(&kv, "circuits_assumed")?,
            steps: Vec::new(),
        })
    }
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Plans a deployment against `state`, computing its weights first.
pub fn plan_deployment(
    state: &NetworkState,
    options: &[NodeOption],
    desired_pc: f64,
    budget: f64,
    circuits: u64,
) -> Result<DeploymentPlan, PlanError> {
    let (weights, _) = compute_weights(state)?;
    plan_with_weights(state, &weights, options, desired_pc, budget, circuits)
}

/// Same as [`plan_deployment`] with precomputed weights.
pub fn plan_with_weights(
    state: &NetworkState,
    weights: &WeightSet,
    options: &[NodeOption],
    desired_pc: f64,
    budget: f64,
    circuits: u64,
) -> Result<DeploymentPlan, PlanError> {
    if !(0.0..=1.0).contains(&desired_pc) {
        return Err(PlanError::InvalidInput(format!(
            "desired probability must lie in [0, 1], got {desired_pc}"
        )));
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(PlanError::InvalidInput(format!(
            "budget must be finite and non-negative, got {budget}"
        )));
    }
    if circuits == 0 {
        return Err(PlanError::InvalidInput("circuit count must be at least 1".into()));
    }
    if options.is_empty() {
        if budget > 0.0 && desired_pc > 0.0 {
            return Err(PlanError::NoOptions);
        }
        return Ok(DeploymentPlan::empty(circuits));
    }
    let exit = ExitPosition::of_state(state, weights)?;

    let mut plan = DeploymentPlan::empty(circuits);
    let mut fleet = ExitFleet::default();
    let mut ln_none = 0.0;
    for option in sort_options(options) {
        let remaining = budget - plan.total_cost;
        let max_nodes = (remaining / option.cost).floor();
        if max_nodes < 1.0 {
            continue;
        }
        let slot = plan.placements.len();
        plan.placements.push(Placement {
            option: option.clone(),
            count: 0,
        });
        let mut bought = 0.0;
        while bought < max_nodes {
            // The quotient above is rounded; never let the cost pass the budget.
            if plan.total_cost + option.cost > budget {
                break;
            }
            bought += 1.0;
            plan.placements[slot].count += 1;
            plan.total_cost += option.cost;
            plan.total_bandwidth += option.bandwidth;
            fleet.push(option.bandwidth)?;
            ln_none += (-exit.choice_prob(option.bandwidth)?).ln_1p();
            plan.achieved_pc = crate::selection::pc_from_ln_none(ln_none, circuits);
            plan.steps.push(PlanStep {
                label: option.label.clone(),
                cost_so_far: plan.total_cost,
                bandwidth_so_far: plan.total_bandwidth,
                pc: plan.achieved_pc,
            });
            if plan.achieved_pc >= desired_pc || plan.total_cost >= budget {
                return Ok(plan);
            }
        }
        if plan.placements[slot].count == 0 {
            plan.placements.pop();
        }
    }
    debug_assert_eq!(fleet.len() as u64, plan.instance_count());
    Ok(plan)
}

/// Parses an options file: `<label> <bandwidth_gbps> <monthly_cost>` per
/// line, `#` comments and blank lines ignored.
pub fn parse_options(text: &str) -> Result<Vec<NodeOption>, PlanError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| PlanError::Malformed {
            line: idx + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [label, bw, cost] = fields.as_slice() else {
            return Err(malformed(format!(
                "expected `<label> <bandwidth_gbps> <cost>`, found {} fields",
                fields.len()
            )));
        };
        let bw: f64 = bw.parse().map_err(|_| malformed(format!("bad bandwidth `{bw}`")))?;
        let cost: f64 = cost.parse().map_err(|_| malformed(format!("bad cost `{cost}`")))?;
        out.push(NodeOption::new(*label, bw, cost).map_err(|e| malformed(e.to_string()))?);
    }
    Ok(out)
}

pub fn read_options(path: impl AsRef<Path>) -> Result<Vec<NodeOption>, PlanError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| PlanError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_options(&text)
}
