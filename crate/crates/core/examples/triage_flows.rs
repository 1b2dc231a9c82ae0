//! Classifies captured flows, drops irrelevant ones and scans the rest
//! for known exploit signatures.

use std::error::Error;
use std::fs;

use exitlens::consensus::{extract_or_ipset, read_roster};
use exitlens::traffic::{
    classify, match_signatures, parse_asn_list, parse_asn_map, parse_top1m, read_flows, read_signatures,
    registrable_domain, triage_flow, FilterTables,
};

fn main() -> Result<(), Box<dyn Error>> {
    let state = read_roster("data/network/measured.roster")?;
    let or_set = extract_or_ipset(&state);
    let tables = FilterTables {
        top1m: parse_top1m(&fs::read_to_string("data/traffic/top1m.csv")?),
        hosting_asns: parse_asn_list(&fs::read_to_string("data/traffic/hosting-asns.txt")?)?,
        asn_map: parse_asn_map(&fs::read_to_string("data/traffic/asn-map.txt")?)?,
    };
    let sigs = read_signatures("data/traffic/sigs.rules")?;

    for flow in read_flows("data/traffic/flows.jsonl")? {
        let class = classify(&flow, &or_set);
        let v = triage_flow(&flow, &or_set, &tables);
        let domain = flow.host_header.as_deref().and_then(registrable_domain);
        print!(
            "{:<16} {:?}/{:<8} {:<9?} {:<11} asn={:<6}",
            flow.id,
            flow.direction,
            flow.protocol.name(),
            class,
            v.reason.name(),
            v.asn.map_or("-".into(), |a| a.to_string())
        );
        if let Some(d) = domain {
            print!(" domain={d}");
        }
        if let Some(off) = v.iac_offset {
            print!(" iac@{off}");
        }
        println!();
        if v.keep {
            for hit in match_signatures(&flow, &sigs) {
                println!("    signature {} at offset {} {:?}", hit.signature.name, hit.offset, hit.signature.metadata);
            }
        }
    }
    Ok(())
}
