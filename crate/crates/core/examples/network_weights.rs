//! Computes position weights for a roster and shows which comparisons
//! picked the case.
//!
//! `cargo run --example network_weights -- [roster]`

use std::error::Error;

use exitlens::consensus::read_roster;
use exitlens::weights::compute_weights;

fn main() -> Result<(), Box<dyn Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/network/measured.roster".into());
    let state = read_roster(&path)?;
    let (w, eval) = compute_weights(&state)?;
    let b = state.bandwidths();

    println!("{} relays, {:?}", state.node_count(), state.class_counts());
    println!(
        "B={:.4}  B/3={:.4}  B_e={:.4} B_x={:.4} B_d={:.4} B_n={:.4}",
        b.total, eval.third, b.pure_entry, b.pure_exit, b.entry_exit, b.neither
    );
    println!("case {}", w.case);
    println!("{:#?}", eval.predicates);
    for (name, v) in w.named() {
        println!("  {name} = {v:.10}");
    }
    let pos = w.position_bandwidths(b);
    println!(
        "position bandwidth: entry {:.4} middle {:.4} exit {:.4}",
        pos.entry, pos.middle, pos.exit
    );
    Ok(())
}
