//! Simulates exit selection and compares the hit rate with the closed form.
//!
//! `cargo run --release --example monte_carlo -- [scenario.toml]`

use std::error::Error;
use std::time::Instant;

use exitlens::simulator::{analytic_pc, run, run_parallel, Scenario};
use exitlens::weights::compute_weights;

fn main() -> Result<(), Box<dyn Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/network/replica.toml".into());
    let scenario = Scenario::read(&path)?;
    let state = scenario.load_state()?;
    let (w, _) = compute_weights(&state)?;
    let mut cfg = scenario.config();

    let t = Instant::now();
    let par = run_parallel(&state, &w, &cfg)?;
    let analytic = analytic_pc(&state, &w, &cfg)?;
    println!(
        "{} trials x {} circuits: empirical {:.5} +/- {:.5}, analytic {:.5}  ({:.2?})",
        par.trials,
        cfg.circuits_per_trial,
        par.empirical_pc,
        par.stderr,
        analytic,
        t.elapsed()
    );

    // A smaller sequential run reproduces the parallel counts exactly.
    cfg.trials = cfg.trials.min(5_000);
    let a = run(&state, &w, &cfg)?;
    let b = run_parallel(&state, &w, &cfg)?;
    println!("sequential {} hits, parallel {} hits, rng {}", a.hit_trials, b.hit_trials, a.rng_algorithm);
    Ok(())
}
