//! Command-line front end: `verify`, `bench`, `equiv`, `emit`, `reach`.
//!
//! Exit codes: 0 valid / success, 1 invalid / mismatch, 2 inconclusive,
//! 3 usage or runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{bundled_source, run_suite, Suite, Table};
use crate::commute::{check_pieces, verify_condition, EquivOracle, Invariant, Scope, VerdictKind};
use crate::dsl::{parse_adt, parse_formula, parse_pair_formula, PairFormula};
use crate::encode::{
    build_mono_encoding, build_pieces, emit_c, interpret_encoding, project_trace, EmitOptions, EncodingKind,
    EncodingProgram, Outcome, PieceRelation,
};
use crate::equivalence::{DistinguishingSeq, EquivMode};
use crate::error::{Error, Result};
use crate::ir::Model;
use crate::report::{render_bench, render_text, BenchJson, ReportJson};
use crate::semantics::{format_trace, reachable_states, DomainBounds, ObjectState};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_INCONCLUSIVE: u8 = 2;
pub const EXIT_ERROR: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "commute", version, about = "Bounded checking of commutativity conditions for data-structure methods")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check whether a formula is a commutativity condition for a method pair.
    Verify(VerifyArgs),
    /// Run the bundled benchmark tables against their expected verdicts.
    Bench(BenchArgs),
    /// Decide observational equivalence of two object states.
    Equiv(EquivArgs),
    /// Write C reachability harnesses for a method pair.
    Emit(EmitArgs),
    /// Enumerate states reachable through arbitrary client calls.
    Reach(ReachArgs),
}

#[derive(Args, Debug, Clone)]
struct BoundArgs {
    /// Smallest argument value.
    #[arg(long, allow_negative_numbers = true)]
    lo: Option<i64>,
    /// Largest argument value.
    #[arg(long, allow_negative_numbers = true)]
    hi: Option<i64>,
    #[arg(long)]
    client_depth: Option<usize>,
    #[arg(long)]
    suffix_depth: Option<usize>,
    /// Statement budget per method call.
    #[arg(long)]
    fuel: Option<u64>,
    #[arg(long)]
    state_budget: Option<usize>,
    /// Rebinds a capacity constant, e.g. `--const CAP=3`.
    #[arg(long = "const", value_name = "NAME=VALUE")]
    consts: Vec<String>,
}

impl BoundArgs {
    fn bounds(&self) -> Result<DomainBounds> {
        let d = DomainBounds::default();
        let b = DomainBounds {
            lo: self.lo.unwrap_or(d.lo),
            hi: self.hi.unwrap_or(d.hi),
            client_depth: self.client_depth.unwrap_or(d.client_depth),
            suffix_depth: self.suffix_depth.unwrap_or(d.suffix_depth),
            fuel: self.fuel.unwrap_or(d.fuel),
            state_budget: self.state_budget.unwrap_or(d.state_budget),
        };
        b.validate()?;
        Ok(b)
    }

    fn model(&self, adt: &str) -> Result<Model> {
        let mut def = parse_adt(&adt_source(adt)?)?;
        for binding in &self.consts {
            let (name, value) = binding
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("`{binding}` is not NAME=VALUE")))?;
            let name = name.trim();
            if def.const_value(name).is_none() {
                return Err(Error::Invalid(format!("{} declares no constant `{name}`", def.name)));
            }
            let value = value.trim().parse().map_err(|_| Error::Invalid(format!("`{value}` is not an integer")))?;
            def = def.with_const(name, value);
        }
        Model::new(&def)
    }
}

/// Reads an ADT file, or falls back to a bundled source of that name.
fn adt_source(spec: &str) -> Result<String> {
    let path = Path::new(spec);
    if path.exists() {
        return std::fs::read_to_string(path).map_err(|e| Error::io(path, e));
    }
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or(spec).to_lowercase();
    bundled_source(&name)
        .map(str::to_string)
        .ok_or_else(|| Error::Invalid(format!("{spec}: no such file and no bundled ADT of that name")))
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ScopeArg {
    Reachable,
    All,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Scope {
        match s {
            ScopeArg::Reachable => Scope::Reachable,
            ScopeArg::All => Scope::All,
        }
    }
}

#[derive(Args, Debug)]
struct PairArgs {
    /// ADT source file, or a bundled name such as `memory`.
    adt: String,
    #[arg(short)]
    m: String,
    #[arg(short)]
    n: String,
    /// Candidate condition over `s.`, `x1..`, `y1..`, `rm1..`, `rn1..`.
    #[arg(long, allow_hyphen_values = true)]
    phi: String,
    /// Relation over `s1.`/`s2.` used by pieces 2 and 3.
    #[arg(long, allow_hyphen_values = true)]
    inv: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Also report the three pieces (with observational equivalence when
    /// no `--inv` is given).
    #[arg(long)]
    pieces: bool,
    #[arg(long, value_enum, default_value = "reachable")]
    scope: ScopeArg,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    bounds: BoundArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum TableArg {
    Fig5,
    Fig6,
    All,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(value_enum, default_value = "all")]
    table: TableArg,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "reachable")]
    scope: ScopeArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct EquivArgs {
    adt: String,
    /// State as `field=value,...`, e.g. `a=5,b=3,sz=2`.
    #[arg(allow_hyphen_values = true)]
    state_a: String,
    #[arg(allow_hyphen_values = true)]
    state_b: String,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    bounds: BoundArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum KindArg {
    Mono,
    Pieces,
}

#[derive(Args, Debug)]
struct EmitArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, value_enum, default_value = "mono")]
    kind: KindArg,
    #[arg(long, default_value = ".")]
    emit_dir: PathBuf,
    /// Text for the loop-invariant comment at each client loop.
    #[arg(long)]
    loop_inv: Option<String>,
    /// Also run each harness on the internal interpreter.
    #[arg(long)]
    interpret: bool,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    bounds: BoundArgs,
}

#[derive(Args, Debug)]
struct ReachArgs {
    adt: String,
    /// Print every state with a witness trace.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    bounds: BoundArgs,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Verify(a) => verify(a, out),
        Cmd::Bench(a) => bench(a, out),
        Cmd::Equiv(a) => equiv(a, out),
        Cmd::Emit(a) => emit(a, out),
        Cmd::Reach(a) => reach(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    write_out(out, &text)?;
    write_out(out, "\n")
}

pub fn exit_code(kind: VerdictKind) -> u8 {
    match kind {
        VerdictKind::Valid => EXIT_OK,
        VerdictKind::Invalid => EXIT_INVALID,
        VerdictKind::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn parse_inv(pair: &PairArgs, model: &Model) -> Result<Option<PairFormula>> {
    Ok(pair.inv.as_ref().map(|t| parse_pair_formula(t, &model.adt)).transpose()?)
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> Result<u8> {
    let model = a.bounds.model(&a.pair.adt)?;
    let bounds = a.bounds.bounds()?;
    let phi = parse_formula(&a.pair.phi, &model.adt, &a.pair.m, &a.pair.n)?;
    let verdict = verify_condition(&model, &phi, &bounds, a.scope.into())?;
    let mut report = ReportJson::new(&model.adt.name, &a.pair.m, &a.pair.n, &a.pair.phi, &verdict);
    let inv = match parse_inv(&a.pair, &model)? {
        Some(f) => Some(Invariant::Formula(f)),
        None if a.pieces => Some(Invariant::ExactPartition),
        None => None,
    };
    if let Some(inv) = inv {
        report = report.with_pieces(check_pieces(&model, &phi, &inv, &bounds)?.with_verdict(verdict.kind));
    }
    if a.json {
        json(out, &report)?;
    } else {
        write_out(out, &render_text(&model, &report))?;
    }
    Ok(exit_code(verdict.kind))
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> Result<u8> {
    let suite = Suite::from_env()?;
    let table = match a.table {
        TableArg::Fig5 => Some(Table::Fig5),
        TableArg::Fig6 => Some(Table::Fig6),
        TableArg::All => None,
    };
    let run = run_suite(&suite, table, a.jobs, a.scope.into())?;
    if a.json {
        json(out, &BenchJson::new(&run))?;
    } else {
        write_out(out, &render_bench(&run))?;
    }
    Ok(if run.failed() == 0 { EXIT_OK } else { EXIT_INVALID })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct EquivJson {
    state_a: ObjectState,
    state_b: ObjectState,
    equivalent: bool,
    mode: EquivMode,
    truncated: bool,
    observed_states: usize,
    suffix: Option<DistinguishingSeq>,
}

fn equiv(a: EquivArgs, out: &mut dyn Write) -> Result<u8> {
    let model = a.bounds.model(&a.adt)?;
    let bounds = a.bounds.bounds()?;
    let s1 = ObjectState::parse(&model, &a.state_a)?;
    let s2 = ObjectState::parse(&model, &a.state_b)?;
    let oracle = EquivOracle::new(&model, &[s1.clone(), s2.clone()], &bounds)?;
    let equivalent = oracle.equivalent(&s1, &s2)?;
    let suffix = if equivalent { None } else { Some(oracle.witness(&model, &s1, &s2, &bounds)?) };
    let truncated = oracle.space.truncated;
    if a.json {
        let report = EquivJson {
            state_a: s1,
            state_b: s2,
            equivalent,
            mode: oracle.mode(),
            truncated,
            observed_states: oracle.space.len(),
            suffix,
        };
        json(out, &report)?;
    } else {
        let mut text = format!(
            "{} {} {} ({} states observed, equivalence {})\n",
            s1.display(&model),
            if equivalent { "≃" } else { "≄" },
            s2.display(&model),
            oracle.space.len(),
            oracle.mode()
        );
        if let Some(seq) = &suffix {
            for step in &seq.steps {
                text.push_str(&format!(
                    "  {}({}) returns {:?} vs {:?}\n",
                    step.method,
                    step.args.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                    step.returns1,
                    step.returns2
                ));
            }
        }
        if truncated {
            text.push_str("observation space truncated by the state budget\n");
        }
        write_out(out, &text)?;
    }
    Ok(if truncated && equivalent {
        EXIT_INCONCLUSIVE
    } else if equivalent {
        EXIT_OK
    } else {
        EXIT_INVALID
    })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct EmitJson {
    path: String,
    kind: EncodingKind,
    checksum: String,
    outcome: Option<Outcome>,
    configurations: Option<usize>,
}

fn emit(a: EmitArgs, out: &mut dyn Write) -> Result<u8> {
    let model = a.bounds.model(&a.pair.adt)?;
    let bounds = a.bounds.bounds()?;
    let phi = parse_formula(&a.pair.phi, &model.adt, &a.pair.m, &a.pair.n)?;
    let inv = parse_inv(&a.pair, &model)?;
    let progs: Vec<EncodingProgram> = match a.kind {
        KindArg::Mono => vec![build_mono_encoding(&model, &phi)?],
        KindArg::Pieces => {
            let rel = inv.as_ref().map_or(PieceRelation::Observational, PieceRelation::Formula);
            let p = build_pieces(&model, &phi, rel)?;
            let mut v = vec![p.piece1, p.piece2];
            v.extend(p.piece3);
            v
        }
    };
    std::fs::create_dir_all(&a.emit_dir).map_err(|e| Error::io(&a.emit_dir, e))?;
    let opts = EmitOptions { loop_invariant: a.loop_inv.clone() };
    let mut rows = Vec::new();
    let mut text = String::new();
    let mut code = EXIT_OK;
    for prog in &progs {
        let file = emit_c(&model, prog, &opts)?;
        let path = a.emit_dir.join(&file.path);
        std::fs::write(&path, &file.text).map_err(|e| Error::io(&path, e))?;
        text.push_str(&format!("{}  {}\n", file.checksum, path.display()));
        let (mut outcome, mut configurations) = (None, None);
        if a.interpret {
            let run = interpret_encoding(prog, &bounds)?;
            match &run.outcome {
                Outcome::Safe => text.push_str(&format!("  safe ({} configurations)\n", run.configurations)),
                Outcome::Inconclusive { reason } => {
                    if code == EXIT_OK {
                        code = EXIT_INCONCLUSIVE;
                    }
                    text.push_str(&format!("  inconclusive: {reason}\n"));
                }
                Outcome::ErrorReachable { trace } => {
                    code = EXIT_INVALID;
                    let failure = project_trace(&model, prog, trace, bounds.fuel)?;
                    text.push_str(&format!("  error reachable ({:?})\n", trace.reason));
                    if let crate::commute::PieceFailure::Commutation(c) = &failure {
                        text.push_str(&format!("  prefix {}\n", format_trace(&c.prefix)));
                    }
                }
            }
            configurations = Some(run.configurations);
            outcome = Some(run.outcome);
        }
        rows.push(EmitJson { path: path.display().to_string(), kind: file.kind, checksum: file.checksum, outcome, configurations });
    }
    if a.json {
        json(out, &rows)?;
    } else {
        write_out(out, &text)?;
    }
    Ok(code)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ReachStateJson {
    state: ObjectState,
    depth: usize,
    witness: Vec<crate::semantics::ActionRecord>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ReachJson {
    adt: String,
    bounds: DomainBounds,
    states: usize,
    complete: bool,
    budget_exhausted: bool,
    by_depth: Vec<usize>,
    list: Option<Vec<ReachStateJson>>,
}

fn reach(a: ReachArgs, out: &mut dyn Write) -> Result<u8> {
    let model = a.bounds.model(&a.adt)?;
    let bounds = a.bounds.bounds()?;
    let rs = reachable_states(&model, &bounds)?;
    let max_depth = rs.depth.iter().copied().max().unwrap_or(0);
    let mut by_depth = vec![0; max_depth + 1];
    for d in &rs.depth {
        by_depth[*d] += 1;
    }
    if a.json {
        let list = a.list.then(|| {
            (0..rs.len())
                .map(|i| ReachStateJson { state: rs.states[i].clone(), depth: rs.depth[i], witness: rs.witness(i) })
                .collect()
        });
        let report = ReachJson {
            adt: model.adt.name.clone(),
            bounds,
            states: rs.len(),
            complete: rs.complete,
            budget_exhausted: rs.budget_exhausted,
            by_depth,
            list,
        };
        json(out, &report)?;
    } else {
        let status = if rs.complete {
            "closed"
        } else if rs.budget_exhausted {
            "state budget exhausted"
        } else {
            "client depth reached"
        };
        let mut text = format!("{} reachable states of {} ({status})\n", rs.len(), model.adt.name);
        let counts: Vec<String> = by_depth.iter().enumerate().map(|(d, c)| format!("{d}:{c}")).collect();
        text.push_str(&format!("by depth {}\n", counts.join(" ")));
        if a.list {
            for i in 0..rs.len() {
                text.push_str(&format!("{}  <- {}\n", rs.states[i].display(&model), format_trace(&rs.witness(i))));
            }
        }
        write_out(out, &text)?;
    }
    Ok(EXIT_OK)
}
