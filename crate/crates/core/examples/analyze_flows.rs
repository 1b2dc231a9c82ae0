//! Runs the five-step analysis over a few kept flows and prints each
//! finding together with its step trace.
//!
//! `cargo run --example analyze_flows`

use std::error::Error;

use exitlens::analyzer::{run_pipeline, KeywordBackend, StaticRetriever};
use exitlens::traffic::read_flows;

fn main() -> Result<(), Box<dyn Error>> {
    let flows = read_flows("data/analyzer/flows.jsonl")?;
    let retriever = StaticRetriever::from_jsonl(&std::fs::read_to_string("data/analyzer/search.jsonl")?)?;
    let backend = KeywordBackend::new();

    for flow in &flows {
        let f = run_pipeline(flow, &backend, &retriever);
        println!("== {}", f.flow_ref);
        if let Some(e) = &f.entity {
            println!("   entity      {}", e.describe());
        }
        println!("   iot origin  {:?}", f.is_iot_origin);
        println!("   attack      {:?}", f.attack().map(|a| a.name()));
        println!("   explanation {}", f.explanation);
        for t in &f.step_trace {
            let out: String = t.output.chars().take(70).collect();
            println!("   [{}] {}{}", t.step.label(), out.replace('\n', " "), if t.notes.is_empty() { String::new() } else { format!("  ({})", t.notes.join("; ")) });
        }
    }
    Ok(())
}
