//! Explores the states a universal client can reach and prints how many
//! appear at each depth.
//!
//! cargo run --example reach_census -- [adt] [lo] [hi] [depth]

use commute::bench::bundled_model;
use commute::semantics::{reachable_states, DomainBounds};

fn main() -> commute::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |i: usize, d: i64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let model = bundled_model(args.first().map_or("arraystack", String::as_str))?;
    let bounds = DomainBounds { lo: num(1, -1), hi: num(2, 3), client_depth: num(3, 6) as usize, ..DomainBounds::default() };
    let reach = reachable_states(&model, &bounds)?;
    let deepest = reach.depth.iter().copied().max().unwrap_or(0);
    for d in 0..=deepest {
        println!("depth {d}: {}", reach.depth.iter().filter(|&&x| x == d).count());
    }
    println!("{} states, complete: {}", reach.states.len(), reach.complete);
    for s in reach.states.iter().take(8) {
        println!("  {}", s.display(&model));
    }
    Ok(())
}
