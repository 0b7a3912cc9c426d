//! Checks a relational invariant candidate on its own, then splits a
//! condition into its three pieces under that invariant.
//!
//! cargo run --example invariant_pieces -- [adt] [m] [n] [phi] [inv]

use commute::bench::{bundled_model, I_SS};
use commute::commute::{check_pieces, Invariant};
use commute::dsl::{parse_formula, parse_pair_formula};
use commute::equivalence::check_invariant_candidate;
use commute::semantics::DomainBounds;

fn main() -> commute::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let get = |i: usize, d: &'static str| args.get(i).map_or(d, String::as_str).to_string();
    let model = bundled_model(&get(0, "simpleset"))?;
    let (m, n) = (get(1, "isin"), get(2, "add"));
    let inv = parse_pair_formula(&get(4, I_SS), &model.adt)?;
    let bounds = DomainBounds::default();
    let check = check_invariant_candidate(&model, &inv, &bounds, None)?;
    println!("candidate: {} pairs, complete {}", check.pairs_checked, check.complete);
    if let Some(w) = &check.violation {
        println!(
            "  broken by {}{:?} on {} / {}: {:?}",
            w.method,
            w.args,
            w.state1.display(&model),
            w.state2.display(&model),
            w.failure
        );
    }
    let phi = parse_formula(&get(3, "x1 != y1"), &model.adt, &m, &n)?;
    let report = check_pieces(&model, &phi, &Invariant::Formula(inv), &bounds)?;
    for (name, p) in [("piece1", &report.piece1), ("piece2", &report.piece2), ("piece3", &report.piece3)] {
        println!("{name} {}", p.symbol());
    }
    println!("all pass: {}", report.all_pass());
    Ok(())
}
