//! Records the keyword backend's answers for a flow file as a replayable
//! script, so the scripted backend can reproduce them exactly.
//!
//! `cargo run --example record_script -- [flows.jsonl] [search.jsonl] [out.jsonl]`

use std::error::Error;

use exitlens::analyzer::{analyze_flows, KeywordBackend, RecordingBackend, StaticRetriever};
use exitlens::traffic::read_flows;

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let flows = args.next().unwrap_or_else(|| "data/analyzer/flows.jsonl".into());
    let search = args.next().unwrap_or_else(|| "data/analyzer/search.jsonl".into());
    let out = args.next().unwrap_or_else(|| "data/analyzer/truthful.jsonl".into());

    let flows = read_flows(&flows)?;
    let retriever = StaticRetriever::from_jsonl(&std::fs::read_to_string(&search)?)?;
    let recorder = RecordingBackend::new(KeywordBackend::new());
    let findings = analyze_flows(&flows, &recorder, &retriever);
    let script = recorder.script();
    std::fs::write(&out, script.to_jsonl())?;
    println!("recorded {} prompts from {} flows into {out}", script.len(), findings.len());
    Ok(())
}
