//! Attack timing: delay between a device's response and the attacker's next
//! request, and the expected time until every traffic class is observed.

use std::error::Error;

use exitlens::selection::{estimate_observation_time, TrafficClassModel};
use exitlens::traffic::interval_stats;

fn main() -> Result<(), Box<dyn Error>> {
    // (response timestamp, next request timestamp) pairs from one session.
    let exchanges = [
        (1717243200.10, 1717243200.42),
        (1717243201.00, 1717243201.31),
        (1717243202.55, 1717243204.05),
        (1717243205.20, 1717243205.48),
        (1717243207.00, 1717243217.00),
    ];
    let s = interval_stats(&exchanges)?;
    println!("{} exchanges: mean {:.3} s, median {:.3} s", s.count, s.avg, s.median);

    let model = TrafficClassModel::new(vec![0.5, 2.0, 12.0], 120_000)?;
    let t = estimate_observation_time(&model);
    for (rate, secs) in model.rates().iter().zip(&t.per_class) {
        println!("class at {rate:>4} circuits/s: {:.1} h", secs / 3600.0);
    }
    println!("all classes: {:.1} days", t.all_classes / 86_400.0);
    Ok(())
}
