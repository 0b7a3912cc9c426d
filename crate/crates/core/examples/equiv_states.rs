//! Decides whether two states are observationally equivalent and prints a
//! shortest distinguishing suffix when they are not.
//!
//! cargo run --example equiv_states -- [adt] [state] [state]

use commute::bench::bundled_model;
use commute::equivalence::{build_obs_space, distinguishing_sequence, equivalent, obs_equiv_partition};
use commute::semantics::{DomainBounds, ObjectState};

fn main() -> commute::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let get = |i: usize, d: &'static str| args.get(i).map_or(d, String::as_str).to_string();
    let model = bundled_model(&get(0, "arraystack"))?;
    let a = ObjectState::parse(&model, &get(1, "top=1,a=[1,2,0,0,0]"))?;
    let b = ObjectState::parse(&model, &get(2, "top=1,a=[3,2,0,0,0]"))?;
    let bounds = DomainBounds::default();
    let space = build_obs_space(&model, &[a.clone(), b.clone()], &bounds)?;
    let partition = obs_equiv_partition(&space);
    println!("{} states, {} blocks, equivalence {}", space.len(), partition.blocks, space.mode);
    if equivalent(&space, &partition, &a, &b)? {
        println!("{} ≃ {}", a.display(&model), b.display(&model));
    } else if let Some(seq) = distinguishing_sequence(&model, &a, &b, &bounds, None)? {
        println!("{} ≄ {}", a.display(&model), b.display(&model));
        for s in &seq.steps {
            println!("  {}{:?} -> {:?} vs {:?}", s.method, s.args, s.returns1, s.returns2);
        }
    }
    Ok(())
}
