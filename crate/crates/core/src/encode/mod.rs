//! Harness programs that reduce commutativity checking to reachability of
//! an error location: the monolithic encoding and its three pieces.
//!
//! A harness is written once in a small structured IR ([`HStmt`]) and then
//! either lowered to a control-flow automaton for interpretation or
//! printed as C for an external reachability checker.

mod emit;
mod interp;
mod lower;

pub use emit::{emit_c, nondet_script, EmitOptions, EmittedFile};
pub use interp::{interpret_encoding, project_trace, Event, HarnessTrace, Interpretation, Outcome};
pub use lower::{EdgeKind, HEdge, HarnessCfa, Tag};

use serde::{Deserialize, Serialize};

use crate::dsl::{CommutFormula, PairFormula};
use crate::error::Result;
use crate::ir::Model;
use crate::semantics::CompiledFormula;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Mono,
    Piece1,
    Piece2,
    Piece3,
}

impl EncodingKind {
    pub fn suffix(self) -> &'static str {
        match self {
            EncodingKind::Mono => "mono",
            EncodingKind::Piece1 => "piece1",
            EncodingKind::Piece2 => "piece2",
            EncodingKind::Piece3 => "piece3",
        }
    }
}

impl std::fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.suffix())
    }
}

/// The three object copies a harness may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Obj {
    O1,
    O2,
    /// Snapshot of the pre-state, kept when φ reads return values.
    O0,
}

impl Obj {
    pub fn index(self) -> usize {
        match self {
            Obj::O1 => 0,
            Obj::O2 => 1,
            Obj::O0 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Obj::O1 => "o1",
            Obj::O2 => "o2",
            Obj::O0 => "o0",
        }
    }
}

/// What a call contributes to a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Role {
    Client,
    /// `m` on o1 (runs first).
    M1,
    /// `n` on o1 (runs second).
    N1,
    /// `n` on o2 (runs first).
    N2,
    /// `m` on o2 (runs second).
    M2,
    /// Observation step on o1 / o2.
    ObsA,
    ObsB,
    /// Invariant-preservation step on o1 / o2.
    StepA,
    StepB,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CallSite {
    pub obj: Obj,
    pub method: usize,
    pub args: Vec<usize>,
    pub rets: Vec<usize>,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ErrorReason {
    /// Returns of the two orders disagree.
    Disagree,
    /// An observation step returned different values on the two copies.
    Observed,
    /// Post-states fall outside the invariant.
    Unrelated,
    /// Related states returned different values.
    StepReturns,
    /// Related states stepped to unrelated ones.
    StepUnrelated,
}

/// Conditions over harness variables and object copies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    Phi { state: Obj },
    Requires { method: usize, args: Vec<usize> },
    Inv { a: Obj, b: Obj },
    /// Some pair of variables differs.
    Differ(Vec<(usize, usize)>),
    Not(Box<Cond>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LoopKind {
    /// Universal client; `while (nondet)` in C.
    Client,
    /// Observation loop; `while (1)` in C.
    Observe,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HStmt {
    Comment(String),
    Init(Obj),
    Havoc(Vec<usize>),
    Assume(Cond),
    Clone { dst: Obj, src: Obj },
    Call(CallSite),
    Loop { kind: LoopKind, body: Vec<HStmt> },
    /// Nondeterministic branch; the chosen index lands in the `ch` variable.
    Choose(Vec<Vec<HStmt>>),
    IfError { cond: Cond, reason: ErrorReason },
    /// Marks the current values of variables for trace projection.
    Record(Vec<usize>),
    /// Resets dead variables so interpretation merges equal configurations;
    /// no effect in C.
    Forget(Vec<usize>),
    ForgetObj(Obj),
}

/// Scalar variables of a harness, by role.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vars {
    pub names: Vec<String>,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub rm: Vec<usize>,
    pub rmn: Vec<usize>,
    pub rn: Vec<usize>,
    pub rnm: Vec<usize>,
    /// Client / observation arguments, the branch choice, and the two
    /// observed return vectors.
    pub c: Vec<usize>,
    pub ch: usize,
    pub ra: Vec<usize>,
    pub rb: Vec<usize>,
}

impl Vars {
    fn new(model: &Model, nx: usize, ny: usize, m: usize, n: usize) -> Vars {
        let mut v = Vars::default();
        let group = |names: &mut Vec<String>, prefix: &str, count: usize| -> Vec<usize> {
            (0..count)
                .map(|i| {
                    names.push(format!("{prefix}{}", i + 1));
                    names.len() - 1
                })
                .collect()
        };
        let max_arity = model.methods.iter().map(|m| m.arity()).max().unwrap_or(0);
        let max_rets = model.methods.iter().map(|m| m.returns).max().unwrap_or(0);
        v.x = group(&mut v.names, "x", nx);
        v.y = group(&mut v.names, "y", ny);
        v.rm = group(&mut v.names, "rm", model.methods[m].returns);
        v.rmn = group(&mut v.names, "rmn", model.methods[n].returns);
        v.rn = group(&mut v.names, "rn", model.methods[n].returns);
        v.rnm = group(&mut v.names, "rnm", model.methods[m].returns);
        v.c = group(&mut v.names, "c", max_arity);
        v.names.push("ch".into());
        v.ch = v.names.len() - 1;
        v.ra = group(&mut v.names, "ra", max_rets);
        v.rb = group(&mut v.names, "rb", max_rets);
        v
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A harness program together with its lowered automaton.
#[derive(Debug, Clone)]
pub struct EncodingProgram {
    pub kind: EncodingKind,
    pub adt: String,
    pub m: usize,
    pub n: usize,
    pub phi: CommutFormula,
    pub inv: Option<PairFormula>,
    pub vars: Vars,
    pub body: Vec<HStmt>,
    pub cfa: HarnessCfa,
}

/// Relation used by pieces 2 and 3.
#[derive(Debug, Clone, Copy)]
pub enum PieceRelation<'a> {
    Formula(&'a PairFormula),
    /// Observational equivalence itself: piece 2 compares by observation,
    /// and piece 3 holds by construction.
    Observational,
}

#[derive(Debug, Clone)]
pub struct Pieces {
    pub piece1: EncodingProgram,
    pub piece2: EncodingProgram,
    /// `None` when the relation is observational equivalence.
    pub piece3: Option<EncodingProgram>,
}

struct Ctx<'a> {
    model: &'a Model,
    phi: &'a CommutFormula,
    m: usize,
    n: usize,
    vars: Vars,
}

impl<'a> Ctx<'a> {
    fn new(model: &'a Model, phi: &'a CommutFormula) -> Result<Ctx<'a>> {
        let m = model.method_index(&phi.m)?;
        let n = model.method_index(&phi.n)?;
        let compiled = CompiledFormula::new(model, phi)?;
        let vars = Vars::new(model, compiled.x_count(), compiled.y_count(), m, n);
        Ok(Ctx { model, phi, m, n, vars })
    }

    fn call(&self, obj: Obj, method: usize, args: &[usize], rets: &[usize], role: Role) -> HStmt {
        let meth = &self.model.methods[method];
        HStmt::Call(CallSite {
            obj,
            method,
            args: args[..meth.arity()].to_vec(),
            rets: rets[..meth.returns].to_vec(),
            role,
        })
    }

    fn requires(&self, method: usize, args: &[usize]) -> Option<HStmt> {
        let meth = &self.model.methods[method];
        meth.requires.as_ref().map(|_| HStmt::Assume(Cond::Requires { method, args: args[..meth.arity()].to_vec() }))
    }

    /// One branch per method: nondet arguments, precondition, then `each`.
    fn per_method(&self, each: impl Fn(usize) -> Vec<HStmt>) -> HStmt {
        let mut branches = Vec::new();
        for (k, meth) in self.model.methods.iter().enumerate() {
            let mut b = Vec::new();
            if meth.arity() > 0 {
                b.push(HStmt::Havoc(self.vars.c[..meth.arity()].to_vec()));
            }
            b.extend(self.requires(k, &self.vars.c));
            b.extend(each(k));
            branches.push(b);
        }
        HStmt::Choose(branches)
    }

    fn scratch_vars(&self) -> Vec<usize> {
        let v = &self.vars;
        let mut out = v.c.clone();
        out.push(v.ch);
        out.extend(&v.ra);
        out.extend(&v.rb);
        out
    }

    /// (A) universal client on `obj`.
    fn client(&self, obj: Obj, label: &str) -> Vec<HStmt> {
        let mut body = vec![self.per_method(|k| vec![self.call(obj, k, &self.vars.c, &self.vars.ra, Role::Client)])];
        body.push(HStmt::Forget(self.scratch_vars()));
        vec![HStmt::Comment(label.into()), HStmt::Loop { kind: LoopKind::Client, body }]
    }

    /// (B) nondet arguments, φ, clone, both orders.
    fn both_orders(&self) -> Vec<HStmt> {
        let v = &self.vars;
        let mut out = vec![HStmt::Comment("(B) both orders from a common state".into())];
        let mut havoc = v.x.clone();
        havoc.extend(&v.y);
        if !havoc.is_empty() {
            out.push(HStmt::Havoc(havoc.clone()));
        }
        out.extend(self.requires(self.m, &v.x));
        out.extend(self.requires(self.n, &v.y));
        out.push(HStmt::Record(havoc));
        let phi_state = if self.phi.uses_returns {
            out.push(HStmt::Clone { dst: Obj::O0, src: Obj::O1 });
            Obj::O0
        } else {
            out.push(HStmt::Assume(Cond::Phi { state: Obj::O1 }));
            Obj::O1
        };
        out.push(HStmt::Clone { dst: Obj::O2, src: Obj::O1 });
        out.push(self.call(Obj::O1, self.m, &v.x, &v.rm, Role::M1));
        out.push(self.call(Obj::O1, self.n, &v.y, &v.rmn, Role::N1));
        out.push(self.call(Obj::O2, self.n, &v.y, &v.rn, Role::N2));
        out.push(self.call(Obj::O2, self.m, &v.x, &v.rnm, Role::M2));
        if self.phi.uses_returns {
            out.push(HStmt::Assume(Cond::Phi { state: phi_state }));
        }
        out
    }

    fn disagreement(&self) -> Cond {
        let v = &self.vars;
        let mut pairs: Vec<(usize, usize)> = v.rm.iter().copied().zip(v.rnm.iter().copied()).collect();
        pairs.extend(v.rn.iter().copied().zip(v.rmn.iter().copied()));
        Cond::Differ(pairs)
    }

    /// Everything but the two copies is dead once both orders have run.
    fn forget_inputs(&self) -> Vec<HStmt> {
        let v = &self.vars;
        let mut dead = v.x.clone();
        for g in [&v.y, &v.rm, &v.rmn, &v.rn, &v.rnm] {
            dead.extend(g.iter());
        }
        let mut out = vec![HStmt::Forget(dead)];
        if self.phi.uses_returns {
            out.push(HStmt::ForgetObj(Obj::O0));
        }
        out
    }

    /// (C) observation loop applying the same action to both copies.
    fn observe(&self) -> Vec<HStmt> {
        let v = &self.vars;
        let step = self.per_method(|k| {
            let r = self.model.methods[k].returns;
            vec![
                self.call(Obj::O1, k, &v.c, &v.ra, Role::ObsA),
                self.call(Obj::O2, k, &v.c, &v.rb, Role::ObsB),
                HStmt::IfError {
                    cond: Cond::Differ(v.ra[..r].iter().copied().zip(v.rb[..r].iter().copied()).collect()),
                    reason: ErrorReason::Observed,
                },
            ]
        });
        vec![
            HStmt::Comment("(C) observe both copies".into()),
            HStmt::Loop { kind: LoopKind::Observe, body: vec![step, HStmt::Forget(self.scratch_vars())] },
        ]
    }

    fn finish(self, kind: EncodingKind, inv: Option<&PairFormula>, body: Vec<HStmt>) -> Result<EncodingProgram> {
        let cfa = lower::lower(self.model, self.phi, inv, &self.vars, &body)?;
        Ok(EncodingProgram {
            kind,
            adt: self.model.adt.name.clone(),
            m: self.m,
            n: self.n,
            phi: self.phi.clone(),
            inv: inv.cloned(),
            vars: self.vars,
            body,
            cfa,
        })
    }
}

fn prologue(ctx: &Ctx) -> Vec<HStmt> {
    let mut body = vec![HStmt::Init(Obj::O1)];
    body.extend(ctx.client(Obj::O1, "(A) universal client"));
    body.extend(ctx.both_orders());
    body
}

pub fn build_mono_encoding(model: &Model, phi: &CommutFormula) -> Result<EncodingProgram> {
    let ctx = Ctx::new(model, phi)?;
    let mut body = prologue(&ctx);
    body.push(HStmt::IfError { cond: ctx.disagreement(), reason: ErrorReason::Disagree });
    body.extend(ctx.forget_inputs());
    body.extend(ctx.observe());
    ctx.finish(EncodingKind::Mono, None, body)
}

pub fn build_piece1(model: &Model, phi: &CommutFormula) -> Result<EncodingProgram> {
    let ctx = Ctx::new(model, phi)?;
    let mut body = prologue(&ctx);
    body.push(HStmt::IfError { cond: ctx.disagreement(), reason: ErrorReason::Disagree });
    ctx.finish(EncodingKind::Piece1, None, body)
}

pub fn build_piece2(model: &Model, phi: &CommutFormula, rel: PieceRelation) -> Result<EncodingProgram> {
    let ctx = Ctx::new(model, phi)?;
    let mut body = prologue(&ctx);
    body.push(HStmt::Assume(Cond::Not(Box::new(ctx.disagreement()))));
    match rel {
        PieceRelation::Formula(inv) => {
            body.push(HStmt::IfError {
                cond: Cond::Not(Box::new(Cond::Inv { a: Obj::O1, b: Obj::O2 })),
                reason: ErrorReason::Unrelated,
            });
            ctx.finish(EncodingKind::Piece2, Some(inv), body)
        }
        PieceRelation::Observational => {
            body.extend(ctx.forget_inputs());
            body.extend(ctx.observe());
            ctx.finish(EncodingKind::Piece2, None, body)
        }
    }
}

/// Piece 3: two client-built states related by `inv`, one shared step,
/// then returns must agree and the successors stay related.
pub fn build_piece3(model: &Model, phi: &CommutFormula, inv: &PairFormula) -> Result<EncodingProgram> {
    let ctx = Ctx::new(model, phi)?;
    let v = &ctx.vars;
    let mut body = vec![HStmt::Init(Obj::O1), HStmt::Init(Obj::O2)];
    body.extend(ctx.client(Obj::O1, "(A) universal client on o1"));
    body.extend(ctx.client(Obj::O2, "(A') universal client on o2"));
    body.push(HStmt::Assume(Cond::Inv { a: Obj::O1, b: Obj::O2 }));
    body.push(HStmt::Comment("one step preserves the relation".into()));
    body.push(ctx.per_method(|k| {
        let r = model.methods[k].returns;
        vec![
            ctx.call(Obj::O1, k, &v.c, &v.ra, Role::StepA),
            ctx.call(Obj::O2, k, &v.c, &v.rb, Role::StepB),
            HStmt::IfError {
                cond: Cond::Differ(v.ra[..r].iter().copied().zip(v.rb[..r].iter().copied()).collect()),
                reason: ErrorReason::StepReturns,
            },
            HStmt::IfError {
                cond: Cond::Not(Box::new(Cond::Inv { a: Obj::O1, b: Obj::O2 })),
                reason: ErrorReason::StepUnrelated,
            },
        ]
    }));
    ctx.finish(EncodingKind::Piece3, Some(inv), body)
}

pub fn build_pieces(model: &Model, phi: &CommutFormula, rel: PieceRelation) -> Result<Pieces> {
    Ok(Pieces {
        piece1: build_piece1(model, phi)?,
        piece2: build_piece2(model, phi, rel)?,
        piece3: match rel {
            PieceRelation::Formula(inv) => Some(build_piece3(model, phi, inv)?),
            PieceRelation::Observational => None,
        },
    })
}

pub fn build_encoding(model: &Model, phi: &CommutFormula, kind: EncodingKind, inv: Option<&PairFormula>) -> Result<EncodingProgram> {
    let need = || crate::error::Error::Invalid(format!("{kind} needs an invariant formula"));
    match kind {
        EncodingKind::Mono => build_mono_encoding(model, phi),
        EncodingKind::Piece1 => build_piece1(model, phi),
        EncodingKind::Piece2 => build_piece2(model, phi, inv.map_or(PieceRelation::Observational, PieceRelation::Formula)),
        EncodingKind::Piece3 => build_piece3(model, phi, inv.ok_or_else(need)?),
    }
}

#[cfg(test)]
mod tests {
    use std::process::Command;

    use super::*;
    use crate::bench::{bundled_model, Suite, Table};
    use crate::commute::{replay, verify_condition, PieceFailure, Scope, VerdictKind};
    use crate::dsl::{parse_formula, parse_pair_formula};
    use crate::semantics::DomainBounds;

    fn setup(adt: &str, m: &str, n: &str, phi: &str) -> (Model, CommutFormula) {
        let model = bundled_model(adt).unwrap();
        let phi = parse_formula(phi, &model.adt, m, n).unwrap();
        (model, phi)
    }

    fn run(prog: &EncodingProgram) -> Outcome {
        interpret_encoding(prog, &DomainBounds::default()).unwrap().outcome
    }

    #[test]
    fn memory_mono_census() {
        let (model, phi) = setup("memory", "read", "write", "true");
        let prog = build_mono_encoding(&model, &phi).unwrap();
        let cfa = &prog.cfa;
        let sites = |role: Role| cfa.sites.iter().filter(|s| s.role == role).count();
        // client: read, write; both orders: four calls; observe: two per method
        assert_eq!(cfa.sites.len(), 2 + 4 + 4);
        assert_eq!(sites(Role::Client), 2);
        assert_eq!(cfa.count(|e| matches!(e.kind, EdgeKind::Iter(_))), 2);
        assert_eq!(cfa.count(|e| e.kind == EdgeKind::Exit), 2);
        let errors = cfa.count(|e| e.to == cfa.error);
        assert_eq!(errors, 1 + 2);
        assert_eq!(cfa.count(|e| matches!(e.tag, Some(Tag::CallEnter(_)))), cfa.sites.len());
        assert_eq!(cfa.count(|e| matches!(e.tag, Some(Tag::CallExit(_)))), cfa.sites.len());
    }

    #[test]
    fn counter_decr_decr_mono_fails() {
        let (model, phi) = setup("counter", "decr", "decr", "true");
        let prog = build_mono_encoding(&model, &phi).unwrap();
        let Outcome::ErrorReachable { trace } = run(&prog) else { panic!("expected an error") };
        assert_eq!(trace.reason, ErrorReason::Disagree);
        let PieceFailure::Commutation(cex) = project_trace(&model, &prog, &trace, 10_000).unwrap() else {
            panic!("expected a commutation failure")
        };
        replay(&model, &cex, 10_000).unwrap();
    }

    #[test]
    fn false_condition_is_safe_everywhere() {
        let (model, phi) = setup("counter", "decr", "incr", "false");
        assert!(run(&build_mono_encoding(&model, &phi).unwrap()).is_safe());
        assert!(run(&build_piece1(&model, &phi).unwrap()).is_safe());
        assert!(run(&build_piece2(&model, &phi, PieceRelation::Observational).unwrap()).is_safe());
    }

    #[test]
    fn piece3_catches_bad_invariant() {
        let (model, phi) = setup("memory", "write", "write", "x1 == y1");
        let inv = parse_pair_formula("true", &model.adt).unwrap();
        let prog = build_piece3(&model, &phi, &inv).unwrap();
        let Outcome::ErrorReachable { trace } = run(&prog) else { panic!("expected an error") };
        assert!(matches!(project_trace(&model, &prog, &trace, 10_000).unwrap(), PieceFailure::Relation(_)));

        let exact = parse_pair_formula("s1.x == s2.x", &model.adt).unwrap();
        assert!(run(&build_piece3(&model, &phi, &exact).unwrap()).is_safe());
    }

    #[test]
    fn piece2_formula_rejects_unrelated_posts() {
        let (model, phi) = setup("memory", "write", "write", "true");
        let inv = parse_pair_formula("s1.x == s2.x", &model.adt).unwrap();
        let prog = build_piece2(&model, &phi, PieceRelation::Formula(&inv)).unwrap();
        let Outcome::ErrorReachable { trace } = run(&prog) else { panic!("expected an error") };
        assert_eq!(trace.reason, ErrorReason::Unrelated);
    }

    #[test]
    fn emission_is_deterministic() {
        let (model, phi) = setup("simpleset", "add", "isin", "x1 != y1");
        let a = emit_c(&model, &build_mono_encoding(&model, &phi).unwrap(), &EmitOptions::default()).unwrap();
        let b = emit_c(&model, &build_mono_encoding(&model, &phi).unwrap(), &EmitOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.path, "simpleset_add_isin_mono.c");
        assert_eq!(a.checksum.len(), 64);
    }

    fn compile(dir: &std::path::Path, files: &[&std::path::Path], out: Option<&std::path::Path>) -> std::process::Output {
        let mut cmd = Command::new("cc");
        cmd.args(["-std=c11", "-Wall", "-Werror"]);
        match out {
            Some(o) => cmd.arg("-o").arg(o),
            None => cmd.arg("-c").arg("-o").arg(dir.join("scratch.o")),
        };
        cmd.args(files).output().unwrap()
    }

    #[test]
    fn fig5_harnesses_compile() {
        let suite = Suite::bundled().unwrap();
        let dir = tempfile::tempdir().unwrap();
        for row in suite.select(Some(Table::Fig5)) {
            if row.skip.is_some() {
                continue;
            }
            let model = suite.model(row).unwrap();
            let phi = parse_formula(&row.phi, &model.adt, &row.m, &row.n).unwrap();
            let inv = row.inv.as_ref().map(|t| parse_pair_formula(t, &model.adt).unwrap());
            let pieces = build_pieces(&model, &phi, inv.as_ref().map_or(PieceRelation::Observational, PieceRelation::Formula)).unwrap();
            let mut progs = vec![build_mono_encoding(&model, &phi).unwrap(), pieces.piece1, pieces.piece2];
            progs.extend(pieces.piece3);
            for prog in &progs {
                let file = emit_c(&model, prog, &EmitOptions::default()).unwrap();
                let path = dir.path().join(&file.path);
                std::fs::write(&path, &file.text).unwrap();
                let out = compile(dir.path(), &[&path], None);
                assert!(out.status.success(), "{}: {}", file.path, String::from_utf8_lossy(&out.stderr));
            }
        }
    }

    const DRIVER: &str = r#"
#include <stdio.h>
#include <stdlib.h>
static const int script[] = { SCRIPT 0 };
static int at = 0;
int __VERIFIER_nondet_int(void) {
  if (at >= (int)(sizeof script / sizeof script[0]) - 1) exit(3);
  return script[at++];
}
void reach_error(void) { exit(42); }
"#;

    /// Builds the harness with a driver replaying `script`; returns the exit code.
    fn drive(model: &Model, prog: &EncodingProgram, script: &[i64]) -> i32 {
        let dir = tempfile::tempdir().unwrap();
        let file = emit_c(model, prog, &EmitOptions::default()).unwrap();
        let harness = dir.path().join(&file.path);
        std::fs::write(&harness, &file.text).unwrap();
        let list: String = script.iter().map(|v| format!("{v}, ")).collect();
        let driver = dir.path().join("driver.c");
        std::fs::write(&driver, DRIVER.replace("SCRIPT", &list)).unwrap();
        let exe = dir.path().join("harness");
        let out = compile(dir.path(), &[&harness, &driver], Some(&exe));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        Command::new(&exe).status().unwrap().code().unwrap_or(-1)
    }

    #[test]
    fn nondet_script_reaches_error_in_compiled_harness() {
        let bounds = DomainBounds::default();
        for (adt, m, n, phi, kind) in [
            ("memory", "read", "write", "true", EncodingKind::Piece1),
            ("memory", "write", "write", "true", EncodingKind::Mono),
            ("counter", "decr", "incr", "true", EncodingKind::Mono),
            ("simpleset", "add", "add", "true", EncodingKind::Mono),
        ] {
            let (model, phi) = setup(adt, m, n, phi);
            let prog = build_encoding(&model, &phi, kind, None).unwrap();
            let verdict = verify_condition(&model, &phi, &bounds, Scope::Reachable).unwrap();
            assert_eq!(verdict.kind, VerdictKind::Invalid);
            let cex = verdict.counterexample.unwrap();
            let script = nondet_script(&model, &prog, &PieceFailure::Commutation(cex), &bounds).unwrap();
            assert_eq!(drive(&model, &prog, &script), 42, "{adt} {m} {n}");
        }
    }

    #[test]
    fn projected_piece3_trace_drives_harness() {
        let (model, phi) = setup("memory", "write", "write", "x1 == y1");
        let inv = parse_pair_formula("true", &model.adt).unwrap();
        let prog = build_piece3(&model, &phi, &inv).unwrap();
        let Outcome::ErrorReachable { trace } = run(&prog) else { panic!("expected an error") };
        let failure = project_trace(&model, &prog, &trace, 10_000).unwrap();
        let script = nondet_script(&model, &prog, &failure, &DomainBounds::default()).unwrap();
        assert_eq!(drive(&model, &prog, &script), 42);
    }

    #[test]
    fn valid_harness_does_not_reach_error_on_short_run() {
        let (model, phi) = setup("memory", "read", "write", "s.x == y1");
        let prog = build_mono_encoding(&model, &phi).unwrap();
        // one write(1), leave the client, then y1 = 1, then observe with read
        assert_eq!(drive(&model, &prog, &[1, 1, 1, 0, 1, 0]), 3);
    }
}
