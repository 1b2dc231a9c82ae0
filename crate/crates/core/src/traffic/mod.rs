//! Offline triage of exit traffic.
//!
//! Flows are classified as relay (internal) or server (external) traffic by
//! OR-address membership, then external flows pass through a fixed chain of
//! irrelevance filters. Byte signatures, a DVRIP header codec and interval
//! statistics support the later manual and automated analysis.

mod dvrip;
mod filter;
mod flow;
mod intervals;
mod signature;

pub use dvrip::{encode_dvrip, parse_dvrip, DvripError, DvripHeader, DVRIP_HEADER_LEN};
pub use filter::{
    classify, filter, parse_asn_list, parse_asn_map, parse_top1m, registrable_domain, triage_flow, AsnMap,
    FilterReason, FilterTables, FilterVerdict, FlowClass,
};
pub use flow::{parse_flows, read_flows, Direction, FlowRecord, Protocol};
pub use intervals::{interval_stats, IntervalStats};
pub use signature::{match_signatures, parse_signatures, read_signatures, Signature, SignatureMatch};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("{what} line {line}: {reason}")]
    Malformed {
        what: &'static str,
        line: usize,
        reason: String,
    },
    #[error("invalid flow `{id}`: {reason}")]
    InvalidFlow { id: String, reason: String },
    #[error("empty-input: no exchanges to summarize")]
    EmptyInput,
    #[error("exchange {index}: next request precedes response ({delta} s)")]
    NegativeInterval { index: usize, delta: f64 },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn read_text(path: &std::path::Path) -> Result<String, TrafficError> {
    std::fs::read_to_string(path).map_err(|source| TrafficError::Io {
        path: path.display().to_string(),
        source,
    })
}
