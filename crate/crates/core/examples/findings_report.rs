//! Aggregates findings into vendor, device type, attack and month counts.
//!
//! The findings come from the scripted backend replaying recorded answers.

use std::error::Error;

use exitlens::analyzer::{analyze_flows, BackendConfig, FindingsReport, RetrieverConfig};
use exitlens::traffic::read_flows;

fn main() -> Result<(), Box<dyn Error>> {
    let backend = BackendConfig::read("data/analyzer/truthful.toml")?.build()?;
    let retriever = RetrieverConfig::read("data/analyzer/retriever.toml")?.build()?;
    let flows = read_flows("data/analyzer/flows.jsonl")?;
    let findings = analyze_flows(&flows, &*backend, &*retriever);

    for f in &findings {
        println!("{}", f.to_json_line());
    }
    let report = FindingsReport::from_findings(&findings);
    println!("\n{}", report.render());
    Ok(())
}
