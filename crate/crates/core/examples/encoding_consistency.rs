//! Interprets the monolithic and three-piece harnesses for benchmark rows
//! and compares them with the direct checker.
//!
//! cargo run --release --example encoding_consistency -- [fig5|fig6|all] [adt]

use std::time::Instant;

use commute::bench::{Suite, Table};
use commute::commute::{verify_condition, Scope, VerdictKind};
use commute::dsl::{parse_formula, parse_pair_formula};
use commute::encode::{build_mono_encoding, build_pieces, interpret_encoding, Outcome, PieceRelation};

fn label(o: &Outcome) -> &'static str {
    match o {
        Outcome::Safe => "safe",
        Outcome::ErrorReachable { .. } => "error",
        Outcome::Inconclusive { .. } => "inconclusive",
    }
}

fn main() -> commute::Result<()> {
    let mut args = std::env::args().skip(1);
    let table = match args.next().as_deref() {
        Some("fig5") => Some(Table::Fig5),
        Some("fig6") => Some(Table::Fig6),
        _ => None,
    };
    let only = args.next();
    let suite = Suite::from_env()?;
    for row in suite.select(table) {
        if row.skip.is_some() || only.as_ref().is_some_and(|a| *a != row.adt) {
            continue;
        }
        let start = Instant::now();
        let model = suite.model(row)?;
        let phi = parse_formula(&row.phi, &model.adt, &row.m, &row.n)?;
        let oracle = verify_condition(&model, &phi, &row.bounds, Scope::Reachable)?;
        let mono = interpret_encoding(&build_mono_encoding(&model, &phi)?, &row.bounds)?;
        let inv = row.inv.as_ref().map(|t| parse_pair_formula(t, &model.adt)).transpose()?;
        let rel = inv.as_ref().map_or(PieceRelation::Observational, PieceRelation::Formula);
        let pieces = build_pieces(&model, &phi, rel)?;
        let mut outcomes = vec![
            interpret_encoding(&pieces.piece1, &row.bounds)?.outcome,
            interpret_encoding(&pieces.piece2, &row.bounds)?.outcome,
        ];
        if let Some(p3) = &pieces.piece3 {
            outcomes.push(interpret_encoding(p3, &row.bounds)?.outcome);
        }
        let joint = outcomes.iter().all(Outcome::is_safe);
        let decided = !matches!(mono.outcome, Outcome::Inconclusive { .. })
            && (joint || outcomes.iter().any(Outcome::is_error));
        let agree = mono.outcome.is_safe() == (oracle.kind == VerdictKind::Valid) && joint == mono.outcome.is_safe();
        let shown: Vec<&str> = outcomes.iter().map(label).collect();
        println!(
            "{:<72} oracle {:<9} mono {:<6} ({:>6} cfg) pieces {:<22} {:>6}ms {}",
            row.label(),
            oracle.kind.to_string(),
            label(&mono.outcome),
            mono.configurations,
            shown.join(","),
            start.elapsed().as_millis(),
            match (decided, agree) {
                (false, _) => "undecided",
                (true, true) => "ok",
                (true, false) => "DISAGREE",
            }
        );
    }
    Ok(())
}
