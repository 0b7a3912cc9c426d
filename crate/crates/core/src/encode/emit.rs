//! C text for harness programs, in the conventions of software
//! reachability verifiers.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Cond, EncodingKind, EncodingProgram, HStmt, LoopKind, Obj};
use crate::commute::{Failure, PieceFailure};
use crate::dsl::{AdtDef, Expr, FieldType, LValue, Stmt, UnOp};
use crate::error::{Error, Result};
use crate::ir::Model;
use crate::semantics::{reachable_states, DomainBounds, ObjectState};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmitOptions {
    /// Comment placed at the head of each client loop, for checkers that
    /// take a loop invariant from the user.
    pub loop_invariant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedFile {
    pub path: String,
    pub kind: EncodingKind,
    pub text: String,
    /// Hex SHA-256 of `text`.
    pub checksum: String,
}

pub fn emit_c(model: &Model, prog: &EncodingProgram, opts: &EmitOptions) -> Result<EmittedFile> {
    let text = Emitter { model, prog, opts, helpers: Vec::new() }.file()?;
    let checksum = Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    });
    let m = &model.methods[prog.m].name;
    let n = &model.methods[prog.n].name;
    let path = format!("{}_{m}_{n}_{}.c", prog.adt.to_lowercase(), prog.kind);
    Ok(EmittedFile { path, kind: prog.kind, text, checksum })
}

fn comment(text: &str) -> String {
    format!("/* {} */", text.replace("*/", "* /"))
}

/// How names in an expression map to C.
#[derive(Clone, Copy)]
enum Names<'a> {
    /// Method bodies, requires clauses, and initializers.
    Code { adt: &'a AdtDef, params: &'a [String] },
    /// Formulas over `s.` or `s1.`/`s2.` pointers.
    Formula,
}

struct Emitter<'a> {
    model: &'a Model,
    prog: &'a EncodingProgram,
    opts: &'a EmitOptions,
    helpers: Vec<String>,
}

impl<'a> Emitter<'a> {
    fn name(&self, names: Names, n: &str, bound: &[String]) -> String {
        if bound.iter().any(|b| b == n) {
            return format!("q_{n}");
        }
        if self.model.const_value(n).is_some() {
            return n.to_string();
        }
        match names {
            Names::Code { adt, params } => {
                if adt.fields.iter().any(|f| f.name == n) && !params.iter().any(|p| p == n) {
                    format!("st->{n}")
                } else {
                    format!("v_{n}")
                }
            }
            Names::Formula => n.to_string(),
        }
    }

    fn expr(&mut self, e: &Expr, names: Names, bound: &[String]) -> String {
        match e {
            Expr::Int(v) if *v < 0 => format!("({v})"),
            Expr::Int(v) => v.to_string(),
            Expr::Bool(b) => (*b as i32).to_string(),
            Expr::Name(n) => self.name(names, n, bound),
            Expr::Qualified { scope, name } => format!("{scope}->{name}"),
            Expr::Index { target, index } => {
                let t = self.expr(target, names, bound);
                let i = self.expr(index, names, bound);
                format!("{t}[{i}]")
            }
            Expr::Unary(op, a) => {
                let inner = self.expr(a, names, bound);
                match op {
                    UnOp::Neg => format!("-({inner})"),
                    UnOp::Not => format!("!({inner})"),
                }
            }
            Expr::Binary(op, a, b) => {
                let l = self.operand(a, names, bound);
                let r = self.operand(b, names, bound);
                format!("{l} {} {r}", op.symbol())
            }
            Expr::Forall { var, lo, hi, body } => {
                let id = self.helpers.len();
                let mut inner: Vec<String> = bound.to_vec();
                inner.push(var.clone());
                let lo = self.expr(lo, names, bound);
                let hi = self.expr(hi, names, bound);
                let body = self.expr(body, names, &inner);
                let outer: String = bound.iter().map(|b| format!(", int q_{b}")).collect();
                let pass: String = bound.iter().map(|b| format!(", q_{b}")).collect();
                let helper = format!(
                    "static int forall_{id}(const struct state_t *s1, const struct state_t *s2{outer}) {{\n  \
                     for (int q_{var} = {lo}; q_{var} <= {hi}; q_{var}++) {{\n    if (!({body})) {{\n      return 0;\n    }}\n  }}\n  return 1;\n}}\n"
                );
                self.helpers.push(helper);
                format!("forall_{id}(s1, s2{pass})")
            }
        }
    }

    fn operand(&mut self, e: &Expr, names: Names, bound: &[String]) -> String {
        let s = self.expr(e, names, bound);
        match e {
            Expr::Binary(..) => format!("({s})"),
            _ => s,
        }
    }

    fn stmts(&mut self, body: &[Stmt], names: Names, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        for s in body {
            match s {
                Stmt::Assign(LValue::Var(n), e) => {
                    let lhs = self.name(names, n, &[]);
                    let rhs = self.expr(e, names, &[]);
                    let _ = writeln!(out, "{pad}{lhs} = {rhs};");
                }
                Stmt::Assign(LValue::Elem(n, i), e) => {
                    let lhs = self.name(names, n, &[]);
                    let i = self.expr(i, names, &[]);
                    let rhs = self.expr(e, names, &[]);
                    let _ = writeln!(out, "{pad}{lhs}[{i}] = {rhs};");
                }
                Stmt::If { cond, then_branch, else_branch } => {
                    let c = self.expr(cond, names, &[]);
                    let _ = writeln!(out, "{pad}if ({c}) {{");
                    self.stmts(then_branch, names, indent + 1, out);
                    if else_branch.is_empty() {
                        let _ = writeln!(out, "{pad}}}");
                    } else {
                        let _ = writeln!(out, "{pad}}} else {{");
                        self.stmts(else_branch, names, indent + 1, out);
                        let _ = writeln!(out, "{pad}}}");
                    }
                }
                Stmt::While { cond, body } => {
                    let c = self.expr(cond, names, &[]);
                    let _ = writeln!(out, "{pad}while ({c}) {{");
                    self.stmts(body, names, indent + 1, out);
                    let _ = writeln!(out, "{pad}}}");
                }
                Stmt::Return(vs) => {
                    for (i, v) in vs.iter().enumerate() {
                        let e = self.expr(v, names, &[]);
                        let _ = writeln!(out, "{pad}*r{} = {e};", i + 1);
                    }
                    let _ = writeln!(out, "{pad}return;");
                }
            }
        }
    }

    fn object(&mut self, out: &mut String) {
        let model = self.model;
        let adt = &model.adt;
        for (name, value) in &adt.consts {
            let _ = writeln!(out, "#define {name} {value}");
        }
        if !adt.consts.is_empty() {
            out.push('\n');
        }
        let code = Names::Code { adt, params: &[] };
        out.push_str("struct state_t {\n");
        for f in &adt.fields {
            match &f.ty {
                FieldType::Int => {
                    let _ = writeln!(out, "  int {};", f.name);
                }
                FieldType::Array(cap) => {
                    let cap = self.expr(cap, code, &[]);
                    let _ = writeln!(out, "  int {}[{cap}];", f.name);
                }
            }
        }
        if adt.fields.is_empty() {
            out.push_str("  int unused;\n");
        }
        out.push_str("};\n\n");

        out.push_str("static void init(struct state_t *st) {\n");
        for (f, layout) in adt.fields.iter().zip(&model.fields) {
            let value = f.init.as_ref().map(|e| self.expr(e, code, &[])).unwrap_or_else(|| "0".into());
            match layout.len {
                None => {
                    let _ = writeln!(out, "  st->{} = {value};", f.name);
                }
                Some(len) => {
                    let _ = writeln!(out, "  for (int i = 0; i < {len}; i++) {{\n    st->{}[i] = {value};\n  }}", f.name);
                }
            }
        }
        out.push_str("}\n");

        for (k, m) in adt.methods.iter().enumerate() {
            let meth = &model.methods[k];
            let names = Names::Code { adt, params: &meth.params };
            let mut sig = String::from("struct state_t *st");
            for p in &m.params {
                let _ = write!(sig, ", int v_{p}");
            }
            for i in 0..m.returns {
                let _ = write!(sig, ", int *r{}", i + 1);
            }
            let _ = writeln!(out, "\nstatic void m_{}({sig}) {{", m.name);
            let locals: Vec<String> =
                meth.locals.iter().filter(|l| !meth.params.contains(l)).map(|l| format!("v_{l} = 0")).collect();
            if !locals.is_empty() {
                let _ = writeln!(out, "  int {};", locals.join(", "));
            }
            let mut body = String::new();
            self.stmts(&m.body, names, 1, &mut body);
            out.push_str(&body);
            out.push_str("}\n");
            if let Some(req) = &m.requires {
                let params: Vec<String> = m.params.iter().map(|p| format!("int v_{p}")).collect();
                let params = if params.is_empty() { "void".to_string() } else { params.join(", ") };
                let e = self.expr(req, names, &[]);
                let _ = writeln!(out, "\nstatic int pre_{}({params}) {{\n  return {e};\n}}", m.name);
            }
        }
    }

    fn formulas(&mut self, uses_phi: bool, out: &mut String) {
        let prog = self.prog;
        let v = &prog.vars;
        if uses_phi {
            let mut params = vec!["const struct state_t *s".to_string()];
            for group in [&v.x, &v.y, &v.rm, &v.rn] {
                params.extend(group.iter().map(|i| format!("int {}", v.names[*i])));
            }
            let e = self.expr(&prog.phi.expr, Names::Formula, &[]);
            let _ = writeln!(out, "\nstatic int phi({}) {{\n  return {e};\n}}", params.join(", "));
        }
        if let Some(inv) = &prog.inv {
            let start = self.helpers.len();
            let e = self.expr(&inv.expr, Names::Formula, &[]);
            for h in &self.helpers[start..] {
                out.push('\n');
                out.push_str(h);
            }
            let _ = writeln!(
                out,
                "\nstatic int inv(const struct state_t *s1, const struct state_t *s2) {{\n  return {e};\n}}"
            );
        }
    }

    fn cond(&self, c: &Cond) -> String {
        let v = &self.prog.vars;
        match c {
            Cond::Phi { state } => {
                let mut args = vec![format!("&{}", state.name())];
                for group in [&v.x, &v.y, &v.rm, &v.rn] {
                    args.extend(group.iter().map(|i| v.names[*i].clone()));
                }
                format!("phi({})", args.join(", "))
            }
            Cond::Requires { method, args } => {
                let args: Vec<&str> = args.iter().map(|a| v.names[*a].as_str()).collect();
                format!("pre_{}({})", self.model.methods[*method].name, args.join(", "))
            }
            Cond::Inv { a, b } => format!("inv(&{}, &{})", a.name(), b.name()),
            Cond::Differ(pairs) if pairs.is_empty() => "0".into(),
            Cond::Differ(pairs) => {
                let parts: Vec<String> =
                    pairs.iter().map(|(a, b)| format!("{} != {}", v.names[*a], v.names[*b])).collect();
                parts.join(" || ")
            }
            Cond::Not(c) => format!("!({})", self.cond(c)),
        }
    }

    fn harness(&self, body: &[HStmt], indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        let v = &self.prog.vars;
        for s in body {
            match s {
                HStmt::Comment(c) => {
                    let _ = writeln!(out, "{pad}{}", comment(c));
                }
                HStmt::Init(o) => {
                    let _ = writeln!(out, "{pad}init(&{});", o.name());
                }
                HStmt::Havoc(vs) => {
                    for x in vs {
                        let _ = writeln!(out, "{pad}{} = __VERIFIER_nondet_int();", v.names[*x]);
                    }
                }
                HStmt::Assume(c) => {
                    let _ = writeln!(out, "{pad}assume_abort_if_not({});", self.cond(c));
                }
                HStmt::Clone { dst, src } => {
                    let _ = writeln!(out, "{pad}{} = {};", dst.name(), src.name());
                }
                HStmt::Call(site) => {
                    let mut args = vec![format!("&{}", site.obj.name())];
                    args.extend(site.args.iter().map(|a| v.names[*a].clone()));
                    args.extend(site.rets.iter().map(|r| format!("&{}", v.names[*r])));
                    let _ = writeln!(out, "{pad}m_{}({});", self.model.methods[site.method].name, args.join(", "));
                }
                HStmt::Loop { kind, body } => {
                    match kind {
                        LoopKind::Client => {
                            if let Some(inv) = &self.opts.loop_invariant {
                                let _ = writeln!(out, "{pad}{}", comment(&format!("loop invariant: {inv}")));
                            }
                            let _ = writeln!(out, "{pad}while (__VERIFIER_nondet_int()) {{");
                        }
                        LoopKind::Observe => {
                            let _ = writeln!(out, "{pad}while (1) {{");
                        }
                    }
                    self.harness(body, indent + 1, out);
                    let _ = writeln!(out, "{pad}}}");
                }
                HStmt::Choose(branches) => {
                    let ch = &v.names[v.ch];
                    let _ = writeln!(out, "{pad}{ch} = __VERIFIER_nondet_int();");
                    for (k, b) in branches.iter().enumerate() {
                        let lead = if k == 0 { pad.clone() } else { format!("{pad}}} else ") };
                        let _ = writeln!(out, "{lead}if ({ch} == {k}) {{");
                        self.harness(b, indent + 1, out);
                    }
                    let _ = writeln!(out, "{pad}}} else {{\n{pad}  assume_abort_if_not(0);\n{pad}}}");
                }
                HStmt::IfError { cond, .. } => {
                    let _ = writeln!(out, "{pad}if ({}) {{\n{pad}  goto ERROR;\n{pad}}}", self.cond(cond));
                }
                HStmt::Record(_) | HStmt::Forget(_) | HStmt::ForgetObj(_) => {}
            }
        }
    }

    fn file(mut self) -> Result<String> {
        let prog = self.prog;
        let mut objs = BTreeSet::new();
        let mut vars = BTreeSet::new();
        let mut uses_phi = false;
        walk(&prog.body, &mut |s| match s {
            HStmt::Init(o) => {
                objs.insert(o.index());
            }
            HStmt::Clone { dst, src } => {
                objs.insert(dst.index());
                objs.insert(src.index());
            }
            HStmt::Havoc(vs) => vars.extend(vs.iter().copied()),
            HStmt::Call(site) => {
                objs.insert(site.obj.index());
                vars.extend(site.args.iter().chain(&site.rets).copied());
            }
            HStmt::Choose(_) => {
                vars.insert(prog.vars.ch);
            }
            HStmt::Assume(c) | HStmt::IfError { cond: c, .. } => cond_vars(c, &prog.vars, &mut vars, &mut uses_phi),
            _ => {}
        });
        if prog.body.iter().all(|s| !has_error(s)) {
            return Err(Error::Invalid("harness has no error location".into()));
        }

        let mut out = String::new();
        let m = &self.model.methods[prog.m].name;
        let n = &self.model.methods[prog.n].name;
        let _ = writeln!(out, "{}", comment(&format!("{} {m}/{n} {} harness", prog.adt, prog.kind)));
        let _ = writeln!(out, "{}", comment(&format!("phi: {}", prog.phi.text)));
        if let Some(inv) = &prog.inv {
            let _ = writeln!(out, "{}", comment(&format!("inv: {}", inv.text)));
        }
        out.push_str(
            "\n#include <stdlib.h>\n\nextern int __VERIFIER_nondet_int(void);\nvoid reach_error(void);\n\n\
             static void assume_abort_if_not(int cond) {\n  if (!cond) {\n    abort();\n  }\n}\n\n",
        );
        self.object(&mut out);
        self.formulas(uses_phi, &mut out);

        out.push_str("\nint main(void) {\n");
        let objs: Vec<&str> = [Obj::O1, Obj::O2, Obj::O0]
            .into_iter()
            .filter(|o| objs.contains(&o.index()))
            .map(|o| o.name())
            .collect();
        let _ = writeln!(out, "  struct state_t {};", objs.join(", "));
        if !vars.is_empty() {
            let decl: Vec<String> = vars.iter().map(|v| format!("{} = 0", prog.vars.names[*v])).collect();
            let _ = writeln!(out, "  int {};", decl.join(", "));
        }
        out.push('\n');
        self.harness(&prog.body, 1, &mut out);
        out.push_str("  return 0;\nERROR:\n  reach_error();\n  abort();\n}\n");
        Ok(out)
    }
}

fn walk<'a>(body: &'a [HStmt], f: &mut dyn FnMut(&'a HStmt)) {
    for s in body {
        f(s);
        match s {
            HStmt::Loop { body, .. } => walk(body, f),
            HStmt::Choose(bs) => bs.iter().for_each(|b| walk(b, f)),
            _ => {}
        }
    }
}

fn has_error(s: &HStmt) -> bool {
    match s {
        HStmt::IfError { .. } => true,
        HStmt::Loop { body, .. } => body.iter().any(has_error),
        HStmt::Choose(bs) => bs.iter().flatten().any(has_error),
        _ => false,
    }
}

fn cond_vars(c: &Cond, v: &super::Vars, out: &mut BTreeSet<usize>, uses_phi: &mut bool) {
    match c {
        Cond::Phi { .. } => {
            *uses_phi = true;
            for g in [&v.x, &v.y, &v.rm, &v.rn] {
                out.extend(g.iter().copied());
            }
        }
        Cond::Requires { args, .. } => out.extend(args.iter().copied()),
        Cond::Inv { .. } => {}
        Cond::Differ(pairs) => pairs.iter().for_each(|(a, b)| {
            out.insert(*a);
            out.insert(*b);
        }),
        Cond::Not(c) => cond_vars(c, v, out, uses_phi),
    }
}

/// Client steps as the harness consumes them: continue, method, arguments.
fn client_script(model: &Model, trace: &[crate::semantics::ActionRecord], out: &mut Vec<i64>) -> Result<()> {
    for a in trace {
        out.push(1);
        out.push(model.method_index(&a.method)? as i64);
        out.extend(&a.args);
    }
    out.push(0);
    Ok(())
}

fn witness(model: &Model, state: &ObjectState, bounds: &DomainBounds) -> Result<Vec<crate::semantics::ActionRecord>> {
    let reach = reachable_states(model, bounds)?;
    let i = reach
        .index
        .get(state)
        .ok_or_else(|| Error::Invalid("state is not reachable within the bounds".into()))?;
    Ok(reach.witness(*i))
}

/// The sequence of `__VERIFIER_nondet_int` results that drives the
/// emitted harness along `failure` to its error call.
pub fn nondet_script(model: &Model, prog: &EncodingProgram, failure: &PieceFailure, bounds: &DomainBounds) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    match (prog.kind, failure) {
        (EncodingKind::Piece3, PieceFailure::Relation(p)) => {
            client_script(model, &witness(model, &p.state1, bounds)?, &mut out)?;
            client_script(model, &witness(model, &p.state2, bounds)?, &mut out)?;
            out.push(model.method_index(&p.method)? as i64);
            out.extend(&p.args);
        }
        (EncodingKind::Piece3, _) | (_, PieceFailure::Relation(_)) => {
            return Err(Error::Invalid("failure kind does not match the harness".into()))
        }
        (_, PieceFailure::Commutation(c)) => {
            client_script(model, &c.prefix, &mut out)?;
            out.extend(&c.phi_x);
            out.extend(&c.phi_y);
            if let Failure::ObservableDivergence { suffix } = &c.failure {
                for step in &suffix.steps {
                    out.push(model.method_index(&step.method)? as i64);
                    out.extend(&step.args);
                }
            }
        }
    }
    Ok(out)
}
