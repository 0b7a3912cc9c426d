//! One line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use commute::bench::{bundled_model, run_suite, RowStatus, Suite, SuiteRun, Table, I_AS, I_SS};
use commute::commute::{replay, verify_condition, Scope, VerdictKind};
use commute::dsl::{parse_formula, parse_pair_formula};
use commute::encode::{build_mono_encoding, build_pieces, emit_c, interpret_encoding, EmitOptions, Outcome, PieceRelation};
use commute::equivalence::{build_obs_space, check_invariant_candidate, distinguishing_sequence, equivalent, obs_equiv_partition, EquivMode, PairFailure};
use commute::semantics::{invoke, DomainBounds, ObjectState};
use common::*;

const FIG5_LIMIT: Duration = Duration::from_secs(120);
const FIG6_LIMIT: Duration = Duration::from_secs(600);
const FIG5_ROWS: usize = 22;
const FIG6_ROWS: usize = 42;
const MIN_FIG6_ENCODED: usize = 10;
const MAX_BRUTE_FORCE_STATES: usize = 2000;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg.into()) }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn table_run(suite: &Suite, table: Table) -> Result<(SuiteRun, Duration), String> {
    let start = Instant::now();
    let run = run_suite(suite, Some(table), 0, Scope::Reachable).map_err(err)?;
    Ok((run, start.elapsed()))
}

fn verdicts(run: &SuiteRun, rows: usize, skipped: usize, took: Duration, limit: Duration) -> Check {
    let bad: Vec<String> = run
        .results
        .iter()
        .filter(|r| matches!(r.status, RowStatus::Mismatch | RowStatus::Error { .. }))
        .map(|r| r.row.label())
        .collect();
    ensure(bad.is_empty(), format!("mismatched: {}", bad.join("; ")))?;
    ensure(run.matched() == rows, format!("{} of {rows} rows matched", run.matched()))?;
    ensure(run.skipped() == skipped, format!("{} rows skipped, expected {skipped}", run.skipped()))?;
    ensure(took < limit, format!("took {took:?}, limit {limit:?}"))?;
    Ok(format!("{rows}/{rows} match, {skipped} skipped, {} ms", took.as_millis()))
}

fn fig6_verdicts(run: &SuiteRun, took: Duration) -> Check {
    let summary = verdicts(run, FIG6_ROWS, 0, took, FIG6_LIMIT)?;
    let hard = [("queue", "enq", "deq"), ("list", "add", "rm"), ("list", "rm", "contains")];
    for (adt, m, n) in hard {
        let found = run.results.iter().any(|r| {
            r.row.adt == adt
                && r.row.m == m
                && r.row.n == n
                && r.verdict.as_ref().is_some_and(|v| v.kind == VerdictKind::Valid)
        });
        ensure(found, format!("{adt} {m}⋈{n} not Valid"))?;
    }
    Ok(summary)
}

fn replays(suite: &Suite, runs: &[&SuiteRun]) -> Check {
    let mut n = 0;
    for r in runs.iter().flat_map(|run| &run.results) {
        let Some(v) = r.verdict.as_ref().filter(|v| v.kind == VerdictKind::Invalid) else { continue };
        let cex = v.counterexample.as_ref().ok_or_else(|| format!("{}: no counterexample", r.row.label()))?;
        let model = suite.model(&r.row).map_err(err)?;
        replay(&model, cex, r.row.bounds.fuel).map_err(|e| format!("{}: {e}", r.row.label()))?;
        n += 1;
    }
    ensure(n > 0, "no Invalid rows")?;
    Ok(format!("{n}/{n} Invalid counterexamples replay"))
}

fn encoding_consistency(suite: &Suite) -> Check {
    let mut fig5 = 0;
    let mut fig6 = 0;
    for row in suite.select(None) {
        let take = row.skip.is_none()
            && match row.table {
                Table::Fig5 => true,
                Table::Fig6 => matches!(row.adt.as_str(), "simpleset" | "hashtable"),
            };
        if !take {
            continue;
        }
        let model = suite.model(row).map_err(err)?;
        let phi = parse_formula(&row.phi, &model.adt, &row.m, &row.n).map_err(err)?;
        let oracle = verify_condition(&model, &phi, &row.bounds, Scope::Reachable).map_err(err)?;
        let mono = interpret_encoding(&build_mono_encoding(&model, &phi).map_err(err)?, &row.bounds).map_err(err)?.outcome;
        if matches!(mono, Outcome::Inconclusive { .. }) {
            return Err(format!("{}: monolithic encoding inconclusive", row.label()));
        }
        ensure(
            mono.is_safe() == (oracle.kind == VerdictKind::Valid),
            format!("{}: mono {} vs oracle {}", row.label(), mono.is_safe(), oracle.kind),
        )?;
        let inv = row.inv.as_ref().map(|t| parse_pair_formula(t, &model.adt)).transpose().map_err(err)?;
        let pieces = build_pieces(&model, &phi, inv.as_ref().map_or(PieceRelation::Observational, PieceRelation::Formula)).map_err(err)?;
        let mut outs = Vec::new();
        for p in [Some(&pieces.piece1), Some(&pieces.piece2), pieces.piece3.as_ref()].into_iter().flatten() {
            outs.push(interpret_encoding(p, &row.bounds).map_err(err)?.outcome);
        }
        let joint = outs.iter().all(Outcome::is_safe);
        ensure(
            joint || outs.iter().any(Outcome::is_error),
            format!("{}: pieces undecided", row.label()),
        )?;
        ensure(joint == mono.is_safe(), format!("{}: pieces {joint} vs mono {}", row.label(), mono.is_safe()))?;
        match row.table {
            Table::Fig5 => fig5 += 1,
            Table::Fig6 => fig6 += 1,
        }
    }
    ensure(fig5 == FIG5_ROWS, format!("{fig5} fig5 rows encoded"))?;
    ensure(fig6 >= MIN_FIG6_ENCODED, format!("{fig6} fig6 rows encoded"))?;
    Ok(format!("{fig5} fig5 + {fig6} fig6 rows: mono ⇔ oracle, pieces ⇔ mono"))
}

fn equivalence_checks() -> Check {
    let ss = bundled_model("simpleset").map_err(err)?;
    let a = ObjectState::parse(&ss, "a=5,b=3,sz=2").map_err(err)?;
    let b = ObjectState::parse(&ss, "a=3,b=5,sz=2").map_err(err)?;
    let bounds = DomainBounds { lo: -1, hi: 5, ..DomainBounds::default() };
    let space = build_obs_space(&ss, &[a.clone(), b.clone()], &bounds).map_err(err)?;
    let p = obs_equiv_partition(&space);
    ensure(equivalent(&space, &p, &a, &b).map_err(err)?, "simpleset orders not equivalent")?;

    let mem = bundled_model("memory").map_err(err)?;
    let d = DomainBounds::default();
    let x1 = ObjectState::parse(&mem, "x=1").map_err(err)?;
    let x2 = ObjectState::parse(&mem, "x=2").map_err(err)?;
    let space = build_obs_space(&mem, &[x1.clone(), x2.clone()], &d).map_err(err)?;
    let p = obs_equiv_partition(&space);
    ensure(!equivalent(&space, &p, &x1, &x2).map_err(err)?, "memory x=1 and x=2 equivalent")?;
    let seq = distinguishing_sequence(&mem, &x1, &x2, &d, None).map_err(err)?.ok_or("no distinguishing sequence")?;
    let names: Vec<&str> = seq.steps.iter().map(|s| s.method.as_str()).collect();
    ensure(names == ["read"], format!("memory suffix {names:?}"))?;

    let list = model_with("list", &[("LISTCAP", 4)]);
    let l1 = ObjectState::parse(&list, "end=2,list=[1,2,3,0]").map_err(err)?;
    let l2 = ObjectState::parse(&list, "end=2,list=[3,1,2,0]").map_err(err)?;
    let space = build_obs_space(&list, &[l1.clone(), l2.clone()], &d).map_err(err)?;
    ensure(space.mode == EquivMode::Exact, "list space not exact")?;
    let p = obs_equiv_partition(&space);
    ensure(equivalent(&space, &p, &l1, &l2).map_err(err)?, "multiset-equal lists not equivalent")?;
    Ok(format!("simpleset swap ≃, memory ≄ via [read], list multiset ≃ ({} states)", space.len()))
}

fn invariant_checks() -> Check {
    let d = DomainBounds::default();
    for (name, text) in [("simpleset", I_SS), ("arraystack", I_AS)] {
        let model = bundled_model(name).map_err(err)?;
        let rel = parse_pair_formula(text, &model.adt).map_err(err)?;
        let r = check_invariant_candidate(&model, &rel, &d, None).map_err(err)?;
        ensure(r.holds() && r.complete, format!("{name}: candidate rejected or incomplete"))?;
    }
    let mem = bundled_model("memory").map_err(err)?;
    let t = parse_pair_formula("true", &mem.adt).map_err(err)?;
    let r = check_invariant_candidate(&mem, &t, &d, None).map_err(err)?;
    let w = r.violation.ok_or("true accepted on memory")?;
    let m = mem.methods.iter().position(|x| x.name == w.method).ok_or("unknown witness method")?;
    let (_, r1) = invoke(&mem, &w.state1, m, &w.args, d.fuel).map_err(err)?;
    let (_, r2) = invoke(&mem, &w.state2, m, &w.args, d.fuel).map_err(err)?;
    ensure(w.failure == PairFailure::ReturnsDiffer && r1 == w.returns1 && r2 == w.returns2 && r1 != r2, "witness does not reproduce")?;
    Ok(format!("I_SS, I_AS hold; true on memory refuted by {}{:?}", w.method, w.args))
}

fn property_sweep() -> Check {
    let mut states = 0;
    for (name, model, bounds) in small_configs() {
        states += check_congruence(&model, &bounds).map_err(|e| format!("{name}: {e}"))?;
        let n = check_against_sequences(&model, &bounds).map_err(|e| format!("{name}: {e}"))?;
        ensure(n <= MAX_BRUTE_FORCE_STATES, format!("{name}: {n} states"))?;
    }
    let mut verdicts = 0;
    for (name, model, bounds) in configs() {
        let f = scalar_fields(name)[0];
        let k = model.methods.len();
        for i in 0..k {
            for j in 0..k {
                let (m, n) = pick_pair(&model, i, j);
                for (p, q) in [
                    ("true".to_string(), "true".to_string()),
                    ("x1 != y1".into(), "y1 != x1".into()),
                    (format!("{f} < x1 && y1 >= 0"), format!("{f} < y1 && x1 >= 0")),
                ] {
                    let v1 = check(&model, &m, &n, &p, &bounds);
                    let v2 = check(&model, &n, &m, &q, &bounds);
                    ensure(v1.kind == v2.kind, format!("{name} {m}⋈{n} [{p}]: swap changes verdict"))?;
                    verdicts += 2;
                }
                ensure(check(&model, &m, &n, "false", &bounds).kind == VerdictKind::Valid, format!("{name} {m}⋈{n}: false not Valid"))?;
                verdicts += 1;
            }
        }
        let pure = pure_methods(&model, &bounds);
        for m in &pure {
            for n in &pure {
                ensure(check(&model, m, n, "true", &bounds).kind == VerdictKind::Valid, format!("{name} {m}⋈{n}: pure pair not Valid"))?;
                verdicts += 1;
            }
        }
    }
    Ok(format!("{states} states checked for congruence and sequence agreement, {verdicts} verdicts for swap/false/pure"))
}

fn emission(suite: &Suite) -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut files = 0;
    for row in suite.select(Some(Table::Fig5)) {
        if row.skip.is_some() {
            continue;
        }
        let model = suite.model(row).map_err(err)?;
        let phi = parse_formula(&row.phi, &model.adt, &row.m, &row.n).map_err(err)?;
        let inv = row.inv.as_ref().map(|t| parse_pair_formula(t, &model.adt)).transpose().map_err(err)?;
        let rel = || inv.as_ref().map_or(PieceRelation::Observational, PieceRelation::Formula);
        let pieces = build_pieces(&model, &phi, rel()).map_err(err)?;
        let mut progs = vec![build_mono_encoding(&model, &phi).map_err(err)?, pieces.piece1, pieces.piece2];
        progs.extend(pieces.piece3);
        let again = build_pieces(&model, &phi, rel()).map_err(err)?;
        let mut progs2 = vec![build_mono_encoding(&model, &phi).map_err(err)?, again.piece1, again.piece2];
        progs2.extend(again.piece3);
        for (prog, prog2) in progs.iter().zip(&progs2) {
            let file = emit_c(&model, prog, &EmitOptions::default()).map_err(err)?;
            let twin = emit_c(&model, prog2, &EmitOptions::default()).map_err(err)?;
            ensure(file.text == twin.text, format!("{}: emission not deterministic", file.path))?;
            let path = dir.path().join(&file.path);
            std::fs::write(&path, &file.text).map_err(err)?;
            let out = Command::new("cc")
                .args(["-std=c11", "-Wall", "-Werror", "-c", "-o"])
                .arg(dir.path().join("scratch.o"))
                .arg(&path)
                .output()
                .map_err(|e| format!("cc: {e}"))?;
            ensure(out.status.success(), format!("{}: {}", file.path, String::from_utf8_lossy(&out.stderr)))?;
            files += 1;
        }
    }
    Ok(format!("{files} harnesses compile with cc -std=c11 -Wall -Werror, byte-identical on re-emission"))
}

fn main() -> ExitCode {
    let suite = Suite::bundled().expect("bundled suite");
    let fig5 = table_run(&suite, Table::Fig5);
    let fig6 = table_run(&suite, Table::Fig6);
    let results: Vec<(&str, Check)> = vec![
        ("fig5 verdicts", fig5.clone().and_then(|(r, t)| verdicts(&r, FIG5_ROWS, 1, t, FIG5_LIMIT))),
        ("fig6 verdicts", fig6.clone().and_then(|(r, t)| fig6_verdicts(&r, t))),
        (
            "counterexample replay",
            match (&fig5, &fig6) {
                (Ok((a, _)), Ok((b, _))) => replays(&suite, &[a, b]),
                _ => Err("bench run failed".into()),
            },
        ),
        ("encoding consistency", encoding_consistency(&suite)),
        ("observational equivalence", equivalence_checks()),
        ("invariant candidates", invariant_checks()),
        ("property sweep", property_sweep()),
        ("C emission", emission(&suite)),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(detail) => println!("[PASS] {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
