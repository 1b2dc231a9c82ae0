//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashSet;
use std::net::Ipv4Addr;

use exitlens::consensus::{ClassBandwidths, NetworkState, NodeRecord};
use exitlens::planner::NodeOption;
use exitlens::traffic::{Direction, FlowRecord, Protocol};
use exitlens::weights::{WeightCase, WeightSet};
use rand::{Rng, RngExt};

pub fn data(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

/// Log-uniform class bandwidth, occasionally tiny so that every branch of
/// the case tree is reachable.
fn class_bw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    match rng.random_range(0..10u8) {
        0 => rng.random_range(0.001..0.05),
        _ => 10f64.powf(rng.random_range(-1.0..3.0)),
    }
}

pub fn random_classes<R: Rng + ?Sized>(rng: &mut R) -> ClassBandwidths {
    ClassBandwidths::new(class_bw(rng), class_bw(rng), class_bw(rng), class_bw(rng)).unwrap()
}

/// Case label re-derived from the textual rules. The 2b1/2b2 split solves
/// the 2b1 system (W_ee=1, W_ne=0, W_ed=W_nd, full balance) by substitution
/// and checks the range directly.
pub fn oracle_case(b: &ClassBandwidths) -> WeightCase {
    let (e, x, d, n) = (b.pure_entry, b.pure_exit, b.entry_exit, b.neither);
    let t = (e + x + d + n) / 3.0;
    if e >= t && x >= t {
        return WeightCase::Case1;
    }
    if e < t && x < t {
        let (r, s) = if e < x { (e, x) } else { (x, e) };
        if r + d < s {
            return WeightCase::Case2a;
        }
        if n > t {
            return WeightCase::Case2b3;
        }
        let wnx = (e - n) / x;
        let wxx = 1.0 - wnx;
        let w = (wxx * x + d - e) / (3.0 * d);
        let wxd = 1.0 - 2.0 * w;
        let ok = [wnx, wxx, w, wxd].iter().all(|v| (0.0..=1.0).contains(v));
        return if ok { WeightCase::Case2b1 } else { WeightCase::Case2b2 };
    }
    let scarce = e.min(x);
    match (scarce + d < t, e < x) {
        (true, true) => WeightCase::Case3a1,
        (true, false) => WeightCase::Case3a2,
        (false, true) => WeightCase::Case3b1,
        (false, false) => WeightCase::Case3b2,
    }
}

/// (entry, middle, exit) weighted bandwidth, middle including the pure
/// exit share.
pub fn positions(w: &WeightSet, b: &ClassBandwidths) -> (f64, f64, f64) {
    let (e, x, d, n) = (b.pure_entry, b.pure_exit, b.entry_exit, b.neither);
    (
        w.wee * e + w.wed * d,
        w.wne * e + w.wnd * d + w.wnx * x + n,
        w.wxx * x + w.wxd * d,
    )
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Builds a roster whose class totals are exactly the given values (one
/// relay per non-empty class) plus optional extra pure-exit fleet relays.
pub fn state_with_fleet(b: &ClassBandwidths, fleet: &[f64]) -> NetworkState {
    let mut nodes = Vec::new();
    let mut ip = 1u32;
    let mut push = |id: String, bw: f64, g: bool, x: bool, nodes: &mut Vec<NodeRecord>| {
        let addr = Ipv4Addr::from(0x0a00_0000 + ip);
        ip += 1;
        nodes.push(NodeRecord::new(id, addr, 9001, bw, g, x).unwrap());
    };
    for (id, bw, g, x) in [
        ("e", b.pure_entry, true, false),
        ("x", b.pure_exit, false, true),
        ("d", b.entry_exit, true, true),
        ("n", b.neither, false, false),
    ] {
        if bw > 0.0 {
            push(id.to_string(), bw, g, x, &mut nodes);
        }
    }
    for (i, &bw) in fleet.iter().enumerate() {
        push(format!("op{i}"), bw, false, true, &mut nodes);
    }
    NetworkState::from_nodes(nodes).unwrap()
}

/// The greedy planner, written out plainly: walk the options in cost-effectiveness
/// order, buy each up to what the remaining budget allows, stop as soon as
/// the target is reached or the money is gone. Returns the purchased labels
/// and the probability after each purchase.
pub fn reference_plan(
    options: &[NodeOption],
    b: &ClassBandwidths,
    w: &WeightSet,
    desired: f64,
    budget: f64,
    circuits: u64,
) -> (Vec<String>, Vec<f64>) {
    let mut sorted: Vec<&NodeOption> = options.iter().collect();
    sorted.sort_by(|p, q| {
        let rp = p.cost / p.bandwidth;
        let rq = q.cost / q.bandwidth;
        rp.partial_cmp(&rq)
            .unwrap()
            .then(p.cost.partial_cmp(&q.cost).unwrap())
            .then(p.label.cmp(&q.label))
    });
    let denom = b.pure_exit * w.wxx + b.entry_exit * w.wxd;
    let mut labels = Vec::new();
    let mut pcs = Vec::new();
    let mut cost = 0.0;
    let mut none = 1.0f64;
    for opt in sorted {
        let max_node = ((budget - cost) / opt.cost).floor() as i64;
        for _ in 0..max_node {
            labels.push(opt.label.clone());
            cost += opt.cost;
            none *= 1.0 - opt.bandwidth * w.wxx / denom;
            let pc = 1.0 - none.powf(circuits as f64);
            pcs.push(pc);
            if pc >= desired || cost >= budget {
                return (labels, pcs);
            }
        }
    }
    (labels, pcs)
}

/// Random option list with whole-dollar costs and centi-Gb/s bandwidths.
pub fn random_options<R: Rng + ?Sized>(rng: &mut R) -> Vec<NodeOption> {
    let k = rng.random_range(1..=6usize);
    (0..k)
        .map(|i| {
            let bw = rng.random_range(1..=60u32) as f64 / 100.0;
            let cost = rng.random_range(3..=150u32) as f64;
            NodeOption::new(format!("opt{i}"), bw, cost).unwrap()
        })
        .collect()
}

pub fn random_ip<R: Rng + ?Sized>(rng: &mut R, pool: &[Ipv4Addr]) -> Ipv4Addr {
    if !pool.is_empty() && rng.random_bool(0.3) {
        pool[rng.random_range(0..pool.len())]
    } else {
        Ipv4Addr::from(rng.random::<u32>() & 0x3fff_ffff | 0x4000_0000)
    }
}

pub const HOSTS: &[&str] = &[
    "google.com",
    "www.google.com",
    "mail.google.com:443",
    "bbc.co.uk",
    "news.bbc.co.uk.",
    "camera.example.net",
    "EXAMPLE.NET",
    "device.local-iot.org",
    "192.0.2.7",
    "foo.github.io",
];

/// A synthetic flow over the given address pool with a random protocol,
/// host, status and payload that sometimes carries 0xff.
pub fn random_flow<R: Rng + ?Sized>(rng: &mut R, i: usize, pool: &[Ipv4Addr]) -> FlowRecord {
    let protocol = [Protocol::Http, Protocol::Telnet, Protocol::Ftp, Protocol::Rtsp, Protocol::Other]
        [rng.random_range(0..5usize)];
    let len = rng.random_range(0..40usize);
    let payload: Vec<u8> = (0..len)
        .map(|_| {
            if rng.random_bool(0.02) {
                0xff
            } else {
                rng.random_range(0..0xffu8)
            }
        })
        .collect();
    FlowRecord {
        id: format!("f{i}"),
        direction: if rng.random_bool(0.5) {
            Direction::Inbound
        } else {
            Direction::Outbound
        },
        src_ip: random_ip(rng, pool),
        dst_ip: random_ip(rng, pool),
        protocol,
        host_header: rng
            .random_bool(0.6)
            .then(|| HOSTS[rng.random_range(0..HOSTS.len())].to_string()),
        status_code: (protocol == Protocol::Http && rng.random_bool(0.8)).then(|| rng.random_range(100..700u16)),
        payload,
        request: None,
        timestamp: rng.random_range(1.6e9..1.8e9),
    }
}

/// Top-1M list for [`HOSTS`]: registrable domains google.com and bbc.co.uk.
pub fn top1m() -> HashSet<String> {
    ["google.com", "bbc.co.uk"].iter().map(|s| s.to_string()).collect()
}

/// Registrable domain of each entry of [`HOSTS`], worked out by hand.
pub fn host_domain(host: &str) -> Option<&'static str> {
    match host {
        "google.com" | "www.google.com" | "mail.google.com:443" => Some("google.com"),
        "bbc.co.uk" | "news.bbc.co.uk." => Some("bbc.co.uk"),
        "camera.example.net" | "EXAMPLE.NET" => Some("example.net"),
        "device.local-iot.org" => Some("local-iot.org"),
        "foo.github.io" => Some("foo.github.io"),
        "192.0.2.7" => None,
        other => panic!("unknown host {other}"),
    }
}

/// Longest-prefix match by linear scan over `(network, prefix_len, asn)`.
pub fn lookup_asn(entries: &[(Ipv4Addr, u8, u32)], ip: Ipv4Addr) -> Option<u32> {
    let mask = |len: u8| if len == 0 { 0 } else { u32::MAX << (32 - len) };
    entries
        .iter()
        .filter(|(net, len, _)| u32::from(*net) & mask(*len) == u32::from(ip) & mask(*len))
        .max_by_key(|(_, len, _)| *len)
        .map(|&(_, _, asn)| asn)
}

/// The filter chain evaluated from its textual rules.
pub fn oracle_reason(
    flow: &FlowRecord,
    or_addrs: &[Ipv4Addr],
    top1m: &HashSet<String>,
    hosting: &HashSet<u32>,
    asn_entries: &[(Ipv4Addr, u8, u32)],
) -> &'static str {
    let probe = match flow.direction {
        Direction::Inbound => flow.src_ip,
        Direction::Outbound => flow.dst_ip,
    };
    if or_addrs.contains(&probe) {
        return "internal";
    }
    if let Some(d) = flow.host_header.as_deref().and_then(host_domain) {
        if top1m.contains(d) {
            return "top1m_host";
        }
    }
    let remote = match flow.direction {
        Direction::Inbound => flow.src_ip,
        Direction::Outbound => flow.dst_ip,
    };
    if lookup_asn(asn_entries, remote).is_some_and(|a| hosting.contains(&a)) {
        return "hosting_asn";
    }
    if flow.protocol == Protocol::Http && flow.status_code.is_some_and(|s| (500..=599).contains(&s)) {
        return "http_5xx";
    }
    if flow.protocol == Protocol::Telnet && flow.payload.contains(&0xff) {
        return "telnet_iac";
    }
    "kept"
}

/// Random prefixes, some nested, over the same space as [`random_ip`].
pub fn random_asn_entries<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<(Ipv4Addr, u8, u32)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let len = rng.random_range(2..=24u8);
        let raw = rng.random::<u32>() & 0x3fff_ffff | 0x4000_0000;
        let net = raw & (u32::MAX << (32 - len));
        if seen.insert((net, len)) {
            out.push((Ipv4Addr::from(net), len, 64_512 + out.len() as u32));
        }
    }
    out
}
