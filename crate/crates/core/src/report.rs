//! JSON and text reports for verdicts and bench runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bench::{Expected, RowStatus, SuiteRun, Table};
use crate::commute::{Counterexample, Failure, PieceFailure, PieceOutcome, PieceReport, Scope, Stats, Verdict, VerdictKind, Which};
use crate::equivalence::{EquivMode, PairFailure};
use crate::ir::Model;
use crate::semantics::{format_trace, DomainBounds, ObjectState};

pub const SCHEMA_VERSION: &str = "report.v1";

/// The JSON schema for [`ReportJson`] and [`BenchJson`].
pub const SCHEMA: &str = include_str!("../schema/report.v1.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundsJson {
    pub lo: i64,
    pub hi: i64,
    pub client_depth: usize,
    pub suffix_depth: usize,
    pub fuel: u64,
    pub state_budget: usize,
    pub consts: BTreeMap<String, i64>,
}

impl BoundsJson {
    pub fn new(b: &DomainBounds, consts: &[(String, i64)]) -> BoundsJson {
        BoundsJson {
            lo: b.lo,
            hi: b.hi,
            client_depth: b.client_depth,
            suffix_depth: b.suffix_depth,
            fuel: b.fuel,
            state_budget: b.state_budget,
            consts: consts.iter().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportJson {
    pub schema: String,
    pub adt: String,
    pub m: String,
    pub n: String,
    pub phi: String,
    pub verdict: VerdictKind,
    pub equivalence_mode: EquivMode,
    pub scope: Scope,
    pub bounds: BoundsJson,
    pub counterexample: Option<Counterexample>,
    pub pieces: Option<PieceReport>,
    pub stats: Stats,
    pub time_ms: u64,
}

impl ReportJson {
    pub fn new(adt: &str, m: &str, n: &str, phi: &str, v: &Verdict) -> ReportJson {
        ReportJson {
            schema: SCHEMA_VERSION.into(),
            adt: adt.into(),
            m: m.into(),
            n: n.into(),
            phi: phi.into(),
            verdict: v.kind,
            equivalence_mode: v.equivalence_mode,
            scope: v.scope,
            bounds: BoundsJson::new(&v.bounds, &v.consts),
            counterexample: v.counterexample.clone(),
            pieces: None,
            stats: v.stats.clone(),
            time_ms: v.stats.wall_ms,
        }
    }

    pub fn with_pieces(mut self, pieces: PieceReport) -> ReportJson {
        self.pieces = Some(pieces);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRowJson {
    pub table: Table,
    pub number: usize,
    pub adt: String,
    pub m: String,
    pub n: String,
    pub phi: String,
    pub expected: Expected,
    pub status: String,
    pub reason: Option<String>,
    pub report: Option<ReportJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchJson {
    pub schema: String,
    pub rows: Vec<BenchRowJson>,
    pub matched: usize,
    pub skipped: usize,
    pub failed: usize,
    pub time_ms: u64,
}

impl BenchJson {
    pub fn new(run: &SuiteRun) -> BenchJson {
        let rows = run
            .results
            .iter()
            .map(|r| {
                let (status, reason) = match &r.status {
                    RowStatus::Match => ("match", None),
                    RowStatus::Mismatch => ("mismatch", None),
                    RowStatus::Skipped { reason } => ("skipped", Some(reason.clone())),
                    RowStatus::Error { message } => ("error", Some(message.clone())),
                };
                let row = &r.row;
                BenchRowJson {
                    table: row.table,
                    number: row.number,
                    adt: row.adt.clone(),
                    m: row.m.clone(),
                    n: row.n.clone(),
                    phi: row.phi.clone(),
                    expected: row.expected,
                    status: status.into(),
                    reason,
                    report: r.verdict.as_ref().map(|v| ReportJson::new(&row.adt, &row.m, &row.n, &row.phi, v)),
                }
            })
            .collect();
        BenchJson {
            schema: SCHEMA_VERSION.into(),
            rows,
            matched: run.matched(),
            skipped: run.skipped(),
            failed: run.failed(),
            time_ms: run.wall_ms,
        }
    }
}

fn vals(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(","))
}

fn state(model: &Model, s: &ObjectState) -> String {
    s.display(model).to_string()
}

pub fn render_counterexample(model: &Model, c: &Counterexample) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "  prefix    {}", format_trace(&c.prefix));
    let _ = writeln!(out, "  state     {}", state(model, &c.pre_state));
    let _ = writeln!(out, "  actions   {}{}  {}{}", c.m, vals(&c.args_a), c.n, vals(&c.args_b));
    let _ = writeln!(out, "  phi vars  x={} y={}", vals(&c.phi_x), vals(&c.phi_y));
    let p = &c.posts;
    let _ = writeln!(out, "  {} then {}: {} returns {} {}", c.m, c.n, state(model, &p.sigma_mn), vals(&p.r_m), vals(&p.r_mn));
    let _ = writeln!(out, "  {} then {}: {} returns {} {}", c.n, c.m, state(model, &p.sigma_nm), vals(&p.r_n), vals(&p.r_nm));
    match &c.failure {
        Failure::ReturnMismatch { which, first, second } => {
            let name = match which {
                Which::M => &c.m,
                Which::N => &c.n,
            };
            let _ = writeln!(out, "  failure   {name} returns {} when first, {} when second", vals(first), vals(second));
        }
        Failure::ObservableDivergence { suffix } => {
            let steps: Vec<String> = suffix
                .steps
                .iter()
                .map(|s| format!("{}{}/{} vs {}", s.method, vals(&s.args), vals(&s.returns1), vals(&s.returns2)))
                .collect();
            let _ = writeln!(out, "  failure   post-states differ observably: {}", steps.join("; "));
        }
        Failure::Unrelated => {
            let _ = writeln!(out, "  failure   post-states are not related");
        }
    }
    out
}

fn render_piece(model: &Model, name: &str, o: &PieceOutcome) -> String {
    let mut out = format!("  {name}  {}", o.symbol());
    match o {
        PieceOutcome::Pass => {}
        PieceOutcome::Skipped { reason } => {
            let _ = write!(out, " ({reason})");
        }
        PieceOutcome::Fail { counterexample } => match counterexample.as_ref() {
            PieceFailure::Commutation(c) => {
                for line in render_counterexample(model, c).lines() {
                    out.push_str("\n  ");
                    out.push_str(line);
                }
            }
            PieceFailure::Relation(p) => {
                let why = match p.failure {
                    PairFailure::ReturnsDiffer => "returns differ",
                    PairFailure::SuccessorsUnrelated => "successors unrelated",
                };
                let _ = write!(
                    out,
                    "\n    related {} / {} on {}{}: {} vs {}, {why}",
                    state(model, &p.state1),
                    state(model, &p.state2),
                    p.method,
                    vals(&p.args),
                    vals(&p.returns1),
                    vals(&p.returns2),
                );
            }
        },
    }
    out.push('\n');
    out
}

pub fn render_text(model: &Model, r: &ReportJson) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}⋈{}  [{}]", r.adt, r.m, r.n, r.phi);
    let _ = writeln!(out, "verdict   {} (equivalence {}, scope {})", r.verdict, r.equivalence_mode, r.scope);
    let b = &r.bounds;
    let consts: Vec<String> = b.consts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(
        out,
        "bounds    values [{},{}], client depth {}, suffix depth {}, {}",
        b.lo,
        b.hi,
        b.client_depth,
        b.suffix_depth,
        if consts.is_empty() { "no constants".to_string() } else { consts.join(" ") }
    );
    if let Some(c) = &r.counterexample {
        out.push_str("counterexample\n");
        out.push_str(&render_counterexample(model, c));
    }
    if let Some(p) = &r.pieces {
        out.push_str("pieces\n");
        out.push_str(&render_piece(model, "piece1", &p.piece1));
        out.push_str(&render_piece(model, "piece2", &p.piece2));
        out.push_str(&render_piece(model, "piece3", &p.piece3));
        if let Some(c) = p.consistent {
            let _ = writeln!(out, "  consistent with verdict: {c}");
        }
    }
    let s = &r.stats;
    let _ = writeln!(
        out,
        "stats     {} reachable, {} observed, {} tuples, {} ms",
        s.reachable_states, s.observed_states, s.tuples_checked, r.time_ms
    );
    out
}

pub fn render_bench(run: &SuiteRun) -> String {
    let mut out = String::new();
    for r in &run.results {
        let got = match (&r.status, &r.verdict) {
            (RowStatus::Skipped { reason }, _) => format!("skipped: {reason}"),
            (RowStatus::Error { message }, _) => format!("error: {message}"),
            (_, Some(v)) => format!("{} {}ms", v.kind, v.stats.wall_ms),
            (_, None) => String::new(),
        };
        let mark = match r.status {
            RowStatus::Match => "ok",
            RowStatus::Mismatch | RowStatus::Error { .. } => "MISMATCH",
            RowStatus::Skipped { .. } => "--",
        };
        let _ = writeln!(out, "{:<8} {:<72} exp {}  {}", mark, r.row.label(), r.row.expected.mark(), got);
    }
    let _ = writeln!(
        out,
        "{} matched, {} skipped, {} failed of {} rows in {} ms",
        run.matched(),
        run.skipped(),
        run.failed(),
        run.results.len(),
        run.wall_ms
    );
    out
}
