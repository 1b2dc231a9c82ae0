//! How likely is an operator fleet to see at least one of `c` circuits?
//!
//! Prints P_c for a range of circuit counts and fleet sizes on the measured
//! network, and how many circuits each fleet needs for 50/90/99 percent.

use std::error::Error;

use exitlens::consensus::read_roster;
use exitlens::selection::{ExitFleet, ExitPosition};
use exitlens::weights::compute_weights;

fn main() -> Result<(), Box<dyn Error>> {
    let state = read_roster("data/network/measured.roster")?;
    let (w, _) = compute_weights(&state)?;
    let exit = ExitPosition::of_state(&state, &w)?;

    println!("exit-position bandwidth {:.4} Gb/s", exit.weighted_bandwidth());
    for gbps in [0.01, 0.1, 1.0] {
        let fleet = ExitFleet::new(vec![gbps])?;
        println!("\nfleet {gbps} Gb/s: per-circuit p = {:.6e}", exit.choice_prob(gbps)?);
        for c in [100u64, 1_000, 10_000, 120_000] {
            println!("  P_c({c:>6}) = {:.6}", exit.at_least_once(&fleet, c)?);
        }
        for target in [0.5, 0.9, 0.99] {
            println!("  circuits for {target}: {}", exit.circuits_for_target(&fleet, target)?);
        }
    }

    // Three relays of a mixed deployment behave like their sum.
    let mixed = ExitFleet::new(vec![0.05, 0.35, 0.35])?;
    println!("\nmixed fleet {:.2} Gb/s: P_c(1000) = {:.6}", mixed.total_bandwidth(), exit.at_least_once(&mixed, 1000)?);
    Ok(())
}
