//! Verifies one condition and prints its JSON report, with the piece
//! breakdown when an invariant is given.
//!
//! cargo run --example report_json -- [adt] [m] [n] [phi] [inv]

use commute::bench::bundled_model;
use commute::commute::{check_pieces, verify_condition, Invariant, Scope};
use commute::dsl::{parse_formula, parse_pair_formula};
use commute::report::ReportJson;
use commute::semantics::DomainBounds;

fn main() -> commute::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let get = |i: usize, d: &'static str| args.get(i).map_or(d, String::as_str).to_string();
    let model = bundled_model(&get(0, "memory"))?;
    let (m, n, text) = (get(1, "write"), get(2, "write"), get(3, "true"));
    let phi = parse_formula(&text, &model.adt, &m, &n)?;
    let bounds = DomainBounds::default();
    let verdict = verify_condition(&model, &phi, &bounds, Scope::Reachable)?;
    let inv = match get(4, "") {
        t if t.is_empty() => Invariant::ExactPartition,
        t => Invariant::Formula(parse_pair_formula(&t, &model.adt)?),
    };
    let pieces = check_pieces(&model, &phi, &inv, &bounds)?.with_verdict(verdict.kind);
    let report = ReportJson::new(&model.adt.name, &m, &n, &text, &verdict).with_pieces(pieces);
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}
