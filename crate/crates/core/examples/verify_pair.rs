//! Checks a commutativity condition and prints the verdict with a replayed
//! counterexample when it fails.
//!
//! cargo run --example verify_pair -- [adt] [m] [n] [phi]

use commute::bench::bundled_model;
use commute::commute::{replay, verify_condition, Scope};
use commute::dsl::parse_formula;
use commute::report::{render_text, ReportJson};
use commute::semantics::DomainBounds;

fn main() -> commute::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let get = |i: usize, d: &'static str| args.get(i).map_or(d, String::as_str).to_string();
    let model = bundled_model(&get(0, "simpleset"))?;
    let (m, n, text) = (get(1, "add"), get(2, "isin"), get(3, "true"));
    let phi = parse_formula(&text, &model.adt, &m, &n)?;
    let bounds = DomainBounds::default();
    let verdict = verify_condition(&model, &phi, &bounds, Scope::Reachable)?;
    print!("{}", render_text(&model, &ReportJson::new(&model.adt.name, &m, &n, &text, &verdict)));
    if let Some(cex) = &verdict.counterexample {
        replay(&model, cex, bounds.fuel)?;
        println!("counterexample replays");
    }
    Ok(())
}
