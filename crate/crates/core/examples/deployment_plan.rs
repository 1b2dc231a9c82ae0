//! Greedy exit deployment under a monthly budget.
//!
//! `cargo run --example deployment_plan -- [budget] [circuits] [desired_pc]`

use std::error::Error;

use exitlens::consensus::read_roster;
use exitlens::planner::{plan_deployment, read_options, sort_options};

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let budget: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(196.0);
    let circuits: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let desired: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.99);

    let state = read_roster("data/network/measured.roster")?;
    let options = read_options("data/network/options.txt")?;
    println!("options by cost per Gb/s:");
    for o in sort_options(&options) {
        println!("  {:<6} {:>5} Gb/s  ${:<5} {:.1} $/Gb/s", o.label, o.bandwidth, o.cost, o.cost_per_gbps());
    }

    let plan = plan_deployment(&state, &options, desired, budget, circuits)?;
    println!("\npurchases:");
    for s in &plan.steps {
        println!("  + {:<6} cost {:>6.1} bw {:.2}  pc {:.6}", s.label, s.cost_so_far, s.bandwidth_so_far, s.pc);
    }
    println!("\n{}", plan.report());
    Ok(())
}
