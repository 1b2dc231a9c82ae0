use std::collections::HashSet;
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use ipnet::Ipv4Net;

use super::{Direction, FlowRecord, Protocol, TrafficError};
use crate::consensus::OrAddressSet;

/// Whether a flow is relay-to-relay traffic or exit-to-server traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowClass {
    Internal,
    External,
}

/// Inbound flows are judged by their source, outbound ones by their
/// destination.
pub fn classify(flow: &FlowRecord, or_set: &OrAddressSet) -> FlowClass {
    let probe = match flow.direction {
        Direction::Inbound => flow.src_ip,
        Direction::Outbound => flow.dst_ip,
    };
    if or_set.contains(probe) {
        FlowClass::Internal
    } else {
        FlowClass::External
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterReason {
    Kept,
    Internal,
    Top1mHost,
    HostingAsn,
    Http5xx,
    TelnetIac,
}

impl FilterReason {
    pub const ALL: [FilterReason; 6] = [
        FilterReason::Kept,
        FilterReason::Internal,
        FilterReason::Top1mHost,
        FilterReason::HostingAsn,
        FilterReason::Http5xx,
        FilterReason::TelnetIac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterReason::Kept => "kept",
            FilterReason::Internal => "internal",
            FilterReason::Top1mHost => "top1m_host",
            FilterReason::HostingAsn => "hosting_asn",
            FilterReason::Http5xx => "http_5xx",
            FilterReason::TelnetIac => "telnet_iac",
        }
    }
}

impl fmt::Display for FilterReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterVerdict {
    pub keep: bool,
    pub reason: FilterReason,
    /// ASN of the remote end, when the map knows it.
    pub asn: Option<u32>,
    /// Set when the ASN check ran and the map had no entry.
    pub asn_lookup_miss: bool,
    /// Offset of the first 0xff in a dropped telnet payload.
    pub iac_offset: Option<usize>,
}

impl FilterVerdict {
    fn new(reason: FilterReason) -> Self {
        FilterVerdict {
            keep: reason == FilterReason::Kept,
            reason,
            asn: None,
            asn_lookup_miss: false,
            iac_offset: None,
        }
    }
}

/// CIDR to ASN table with longest-prefix lookup.
#[derive(Debug, Clone, Default)]
pub struct AsnMap {
    // Sorted by descending prefix length so the first hit is the longest.
    entries: Vec<(Ipv4Net, u32)>,
}

impl AsnMap {
    pub fn new(mut entries: Vec<(Ipv4Net, u32)>) -> Self {
        for e in &mut entries {
            e.0 = e.0.trunc();
        }
        entries.sort_by_key(|e| std::cmp::Reverse(e.0.prefix_len()));
        AsnMap { entries }
    }

    pub fn lookup(&self, ip: Ipv4Addr) -> Option<u32> {
        self.entries.iter().find(|(net, _)| net.contains(&ip)).map(|&(_, asn)| asn)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Lookup tables for [`filter`]; immutable once built.
#[derive(Debug, Clone, Default)]
pub struct FilterTables {
    pub top1m: HashSet<String>,
    pub hosting_asns: HashSet<u32>,
    pub asn_map: AsnMap,
}

fn normalize_host(host: &str) -> String {
    let host = host.trim();
    let host = match host.rsplit_once(':') {
        Some((h, port)) if !port.is_empty() && port.bytes().all(|b| b.is_ascii_digit()) => h,
        _ => host,
    };
    host.trim_end_matches('.').to_ascii_lowercase()
}

/// The public-suffix-plus-one label of `host`, if it has one.
pub fn registrable_domain(host: &str) -> Option<String> {
    let host = normalize_host(host);
    if host.parse::<Ipv4Addr>().is_ok() {
        return None;
    }
    psl::domain_str(&host).map(str::to_string)
}

fn in_top1m(host: &str, top1m: &HashSet<String>) -> bool {
    let host = normalize_host(host);
    if host.is_empty() {
        return false;
    }
    top1m.contains(&host) || registrable_domain(&host).is_some_and(|d| top1m.contains(&d))
}

/// Applies the irrelevance filters to an external flow, first match wins:
/// top-1M host, hosting ASN, HTTP 5xx, telnet IAC.
pub fn filter(flow: &FlowRecord, tables: &FilterTables) -> FilterVerdict {
    if let Some(host) = &flow.host_header {
        if in_top1m(host, &tables.top1m) {
            return FilterVerdict::new(FilterReason::Top1mHost);
        }
    }
    let asn = tables.asn_map.lookup(flow.remote_ip());
    if asn.is_some_and(|a| tables.hosting_asns.contains(&a)) {
        return FilterVerdict {
            asn,
            ..FilterVerdict::new(FilterReason::HostingAsn)
        };
    }
    let mut verdict = if flow.protocol == Protocol::Http && flow.status_code.is_some_and(|c| (500..=599).contains(&c)) {
        FilterVerdict::new(FilterReason::Http5xx)
    } else if let Some(off) = (flow.protocol == Protocol::Telnet)
        .then(|| memchr::memchr(0xff, &flow.payload))
        .flatten()
    {
        FilterVerdict {
            iac_offset: Some(off),
            ..FilterVerdict::new(FilterReason::TelnetIac)
        }
    } else {
        FilterVerdict::new(FilterReason::Kept)
    };
    verdict.asn = asn;
    verdict.asn_lookup_miss = asn.is_none();
    verdict
}

/// Classification followed by filtering.
pub fn triage_flow(flow: &FlowRecord, or_set: &OrAddressSet, tables: &FilterTables) -> FilterVerdict {
    match classify(flow, or_set) {
        FlowClass::Internal => FilterVerdict::new(FilterReason::Internal),
        FlowClass::External => filter(flow, tables),
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// One domain per line.
pub fn parse_top1m(text: &str) -> HashSet<String> {
    data_lines(text)
        .map(|(_, l)| {
            // Ranked lists come as `rank,domain`.
            let d = l.rsplit(',').next().unwrap_or(l);
            normalize_host(d)
        })
        .collect()
}

fn parse_asn(token: &str) -> Option<u32> {
    let t = token.strip_prefix("AS").or_else(|| token.strip_prefix("as")).unwrap_or(token);
    u32::from_str(t).ok()
}

/// One ASN per line, optionally prefixed with `AS`.
pub fn parse_asn_list(text: &str) -> Result<HashSet<u32>, TrafficError> {
    data_lines(text)
        .map(|(line, l)| {
            parse_asn(l).ok_or_else(|| TrafficError::Malformed {
                what: "hosting-asn",
                line,
                reason: format!("bad ASN `{l}`"),
            })
        })
        .collect()
}

/// `<cidr> <asn>` per line.
pub fn parse_asn_map(text: &str) -> Result<AsnMap, TrafficError> {
    let mut entries = Vec::new();
    for (line, l) in data_lines(text) {
        let bad = |reason: String| TrafficError::Malformed {
            what: "asn-map",
            line,
            reason,
        };
        let mut it = l.split_whitespace();
        let (Some(cidr), Some(asn), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad("expected `<cidr> <asn>`".into()));
        };
        let net = cidr
            .parse::<Ipv4Net>()
            .or_else(|_| cidr.parse::<Ipv4Addr>().map(Ipv4Net::from))
            .map_err(|_| bad(format!("bad CIDR `{cidr}`")))?;
        let asn = parse_asn(asn).ok_or_else(|| bad(format!("bad ASN `{asn}`")))?;
        entries.push((net, asn));
    }
    Ok(AsnMap::new(entries))
}
