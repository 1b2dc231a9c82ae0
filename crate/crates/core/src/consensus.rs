//! Node rosters and the aggregated network state.
//!
//! A roster is a line-oriented stand-in for a consensus document. Each
//! non-comment line describes one relay:
//!
//! ```text
//! # id   address    port  bandwidth(Gb/s)  flags
//! n1     10.0.0.1   9001  2.5              guard,exit
//! n2     10.0.0.2   9001  0.8              none
//! ```
//!
//! Flags are a comma-joined subset of `guard` and `exit`, or the single
//! word `none`. Relays are partitioned into four classes by their flags and
//! the per-class bandwidth totals are what the weight and selection models
//! consume.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::net::Ipv4Addr;
use std::path::Path;

use thiserror::Error;

/// Errors raised while reading a roster.
#[derive(Debug, Error)]
pub enum RosterError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate node id `{id}` (first seen on line {first})")]
    DuplicateId {
        line: usize,
        id: String,
        first: usize,
    },
    #[error("invalid node `{id}`: {reason}")]
    InvalidNode { id: String, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The four relay classes induced by the guard and exit flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeClass {
    /// Guard flag only.
    PureEntry,
    /// Exit flag only.
    PureExit,
    /// Both guard and exit ("EE").
    EntryExit,
    /// Neither flag ("N-EE").
    Neither,
}

impl NodeClass {
    pub fn from_flags(is_guard: bool, is_exit: bool) -> Self {
        match (is_guard, is_exit) {
            (true, true) => NodeClass::EntryExit,
            (true, false) => NodeClass::PureEntry,
            (false, true) => NodeClass::PureExit,
            (false, false) => NodeClass::Neither,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeClass::PureEntry => "pure-entry",
            NodeClass::PureExit => "pure-exit",
            NodeClass::EntryExit => "entry-exit",
            NodeClass::Neither => "neither",
        }
    }
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One relay from a roster.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: String,
    pub address: Ipv4Addr,
    pub or_port: u16,
    /// Original (unweighted) bandwidth in Gb/s.
    pub bandwidth: f64,
    pub is_guard: bool,
    pub is_exit: bool,
}

impl NodeRecord {
    pub fn new(
        id: impl Into<String>,
        address: Ipv4Addr,
        or_port: u16,
        bandwidth: f64,
        is_guard: bool,
        is_exit: bool,
    ) -> Result<Self, RosterError> {
        let id = id.into();
        validate_id(&id).map_err(|reason| RosterError::InvalidNode {
            id: id.clone(),
            reason,
        })?;
        validate_bandwidth(bandwidth).map_err(|reason| RosterError::InvalidNode {
            id: id.clone(),
            reason,
        })?;
        Ok(NodeRecord {
            id,
            address,
            or_port,
            bandwidth,
            is_guard,
            is_exit,
        })
    }

    pub fn class(&self) -> NodeClass {
        NodeClass::from_flags(self.is_guard, self.is_exit)
    }

    fn flags_field(&self) -> &'static str {
        match (self.is_guard, self.is_exit) {
            (true, true) => "guard,exit",
            (true, false) => "guard",
            (false, true) => "exit",
            (false, false) => "none",
        }
    }
}

fn validate_id(id: &str) -> Result<(), String> {
    if id.is_empty() {
        return Err("empty id".into());
    }
    if id.chars().any(char::is_whitespace) || id.starts_with('#') {
        return Err("id must be a single token not starting with `#`".into());
    }
    Ok(())
}

fn validate_bandwidth(bw: f64) -> Result<(), String> {
    if !bw.is_finite() || bw < 0.0 {
        return Err(format!("bandwidth must be a finite non-negative number, got {bw}"));
    }
    Ok(())
}

/// Per-class bandwidth totals in Gb/s.
///
/// `total` is always the sum of the four class totals, so the partition
/// identity holds exactly on the floating point values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassBandwidths {
    pub total: f64,
    pub pure_entry: f64,
    pub pure_exit: f64,
    pub entry_exit: f64,
    pub neither: f64,
}

impl ClassBandwidths {
    /// Builds totals directly from class aggregates.
    ///
    /// Negative or non-finite inputs are rejected.
    pub fn new(
        pure_entry: f64,
        pure_exit: f64,
        entry_exit: f64,
        neither: f64,
    ) -> Result<Self, RosterError> {
        for (class, v) in [
            (NodeClass::PureEntry, pure_entry),
            (NodeClass::PureExit, pure_exit),
            (NodeClass::EntryExit, entry_exit),
            (NodeClass::Neither, neither),
        ] {
            validate_bandwidth(v).map_err(|reason| RosterError::InvalidNode {
                id: format!("<{class} aggregate>"),
                reason,
            })?;
        }
        Ok(Self::from_parts(pure_entry, pure_exit, entry_exit, neither))
    }

    fn from_parts(pure_entry: f64, pure_exit: f64, entry_exit: f64, neither: f64) -> Self {
        ClassBandwidths {
            total: pure_entry + pure_exit + entry_exit + neither,
            pure_entry,
            pure_exit,
            entry_exit,
            neither,
        }
    }

    pub fn of(&self, class: NodeClass) -> f64 {
        match class {
            NodeClass::PureEntry => self.pure_entry,
            NodeClass::PureExit => self.pure_exit,
            NodeClass::EntryExit => self.entry_exit,
            NodeClass::Neither => self.neither,
        }
    }
}

/// Parsed roster plus its class aggregates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkState {
    nodes: Vec<NodeRecord>,
    bandwidths: ClassBandwidths,
}

impl NetworkState {
    /// Builds a state from nodes, rejecting duplicate ids.
    pub fn from_nodes(nodes: Vec<NodeRecord>) -> Result<Self, RosterError> {
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if let Some(first) = seen.insert(n.id.as_str(), i + 1) {
                return Err(RosterError::DuplicateId {
                    line: i + 1,
                    id: n.id.clone(),
                    first,
                });
            }
        }
        let bandwidths = aggregate(&nodes);
        Ok(NetworkState { nodes, bandwidths })
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn bandwidths(&self) -> &ClassBandwidths {
        &self.bandwidths
    }

    pub fn node(&self, id: &str) -> Option<&NodeRecord> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of distinct relay addresses; several relays may share a host.
    pub fn distinct_address_count(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| n.address)
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn class_counts(&self) -> ClassCounts {
        let mut counts = ClassCounts::default();
        for n in &self.nodes {
            match n.class() {
                NodeClass::PureEntry => counts.pure_entry += 1,
                NodeClass::PureExit => counts.pure_exit += 1,
                NodeClass::EntryExit => counts.entry_exit += 1,
                NodeClass::Neither => counts.neither += 1,
            }
        }
        counts
    }

    /// Serializes back into roster text that [`parse_roster`] reads to an
    /// equal state.
    pub fn to_roster(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                n.id,
                n.address,
                n.or_port,
                n.bandwidth,
                n.flags_field()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub pure_entry: usize,
    pub pure_exit: usize,
    pub entry_exit: usize,
    pub neither: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.pure_entry + self.pure_exit + self.entry_exit + self.neither
    }
}

fn aggregate(nodes: &[NodeRecord]) -> ClassBandwidths {
    let (mut e, mut x, mut d, mut n) = (0.0, 0.0, 0.0, 0.0);
    for node in nodes {
        match node.class() {
            NodeClass::PureEntry => e += node.bandwidth,
            NodeClass::PureExit => x += node.bandwidth,
            NodeClass::EntryExit => d += node.bandwidth,
            NodeClass::Neither => n += node.bandwidth,
        }
    }
    ClassBandwidths::from_parts(e, x, d, n)
}

/// Parses roster text. Node order follows the input.
pub fn parse_roster(text: &str) -> Result<NetworkState, RosterError> {
    let mut nodes = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let node = parse_line(line).map_err(|reason| RosterError::Malformed {
            line: line_no,
            reason,
        })?;
        if let Some(&first) = seen.get(&node.id) {
            return Err(RosterError::DuplicateId {
                line: line_no,
                id: node.id,
                first,
            });
        }
        seen.insert(node.id.clone(), line_no);
        nodes.push(node);
    }
    let bandwidths = aggregate(&nodes);
    Ok(NetworkState { nodes, bandwidths })
}

pub fn read_roster(path: impl AsRef<Path>) -> Result<NetworkState, RosterError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| RosterError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_roster(&text)
}

fn parse_line(line: &str) -> Result<NodeRecord, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [id, addr, port, bw, flags] = fields.as_slice() else {
        return Err(format!(
            "expected 5 fields `<id> <ipv4> <port> <bandwidth_gbps> <flags>`, found {}",
            fields.len()
        ));
    };
    validate_id(id)?;
    let address: Ipv4Addr = addr
        .parse()
        .map_err(|_| format!("invalid IPv4 address `{addr}`"))?;
    let or_port: u16 = port.parse().map_err(|_| format!("invalid port `{port}`"))?;
    let bandwidth: f64 = bw
        .parse()
        .map_err(|_| format!("invalid bandwidth `{bw}`"))?;
    validate_bandwidth(bandwidth)?;
    let (is_guard, is_exit) = parse_flags(flags)?;
    Ok(NodeRecord {
        id: (*id).to_string(),
        address,
        or_port,
        bandwidth,
        is_guard,
        is_exit,
    })
}

fn parse_flags(field: &str) -> Result<(bool, bool), String> {
    let (mut guard, mut exit, mut none) = (false, false, false);
    for flag in field.split(',') {
        match flag.to_ascii_lowercase().as_str() {
            "guard" => guard = true,
            "exit" => exit = true,
            "none" => none = true,
            other => return Err(format!("unknown flag `{other}`")),
        }
    }
    if none && (guard || exit) {
        return Err("flag `none` cannot be combined with other flags".into());
    }
    Ok((guard, exit))
}

/// Exact-membership set of relay addresses, the offline counterpart of the
/// kernel ipset used to separate relay traffic from server traffic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OrAddressSet {
    addrs: HashSet<Ipv4Addr>,
}

impl OrAddressSet {
    pub fn contains(&self, addr: Ipv4Addr) -> bool {
        self.addrs.contains(&addr)
    }

    pub fn len(&self) -> usize {
        self.addrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addrs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Ipv4Addr> {
        self.addrs.iter()
    }
}

impl FromIterator<Ipv4Addr> for OrAddressSet {
    fn from_iter<T: IntoIterator<Item = Ipv4Addr>>(iter: T) -> Self {
        OrAddressSet {
            addrs: iter.into_iter().collect(),
        }
    }
}

/// Collects every relay address in the state, deduplicated.
pub fn extract_or_ipset(state: &NetworkState) -> OrAddressSet {
    state.nodes.iter().map(|n| n.address).collect()
}
