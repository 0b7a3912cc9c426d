//! Lowering of harness programs to automata. Method calls are inlined:
//! an argument-binding edge enters a relocated copy of the method body and
//! a return-binding edge leaves it.

use serde::{Deserialize, Serialize};

use super::{CallSite, Cond, ErrorReason, HStmt, LoopKind, Obj, Vars};
use crate::cfa::{Builder, Op};
use crate::dsl::{BinOp, CommutFormula, PairFormula};
use crate::error::{Error, Result};
use crate::ir::{relocate_stmts, Model, RExpr, RStmt, Resolver, SlotInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Normal,
    /// Enters one more iteration of a bounded loop.
    Iter(LoopKind),
    /// Leaves a loop; resets the iteration count.
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tag {
    CallEnter(usize),
    CallExit(usize),
    Record(Vec<usize>),
    Error(ErrorReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HEdge {
    pub from: usize,
    pub to: usize,
    pub op: Op,
    pub kind: EdgeKind,
    pub tag: Option<Tag>,
}

/// Environment layout: `[o1 | o2 | o0 | vars | frame | scratch]`.
#[derive(Debug, Clone)]
pub struct HarnessCfa {
    pub nodes: usize,
    pub entry: usize,
    pub exit: usize,
    pub error: usize,
    pub edges: Vec<HEdge>,
    pub sites: Vec<CallSite>,
    pub width: usize,
    pub var_base: usize,
    pub frame_base: usize,
    pub env_len: usize,
    out: Vec<Vec<usize>>,
}

impl HarnessCfa {
    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out[node]
    }

    pub fn obj_base(&self, o: Obj) -> usize {
        o.index() * self.width
    }

    pub fn var_slot(&self, v: usize) -> usize {
        self.var_base + v
    }

    pub fn count(&self, pred: impl Fn(&HEdge) -> bool) -> usize {
        self.edges.iter().filter(|e| pred(e)).count()
    }
}

struct Lowerer<'a> {
    model: &'a Model,
    phi: &'a CommutFormula,
    inv: Option<&'a PairFormula>,
    vars: &'a Vars,
    nodes: usize,
    edges: Vec<HEdge>,
    sites: Vec<CallSite>,
    error: usize,
    width: usize,
    var_base: usize,
    frame_base: usize,
    scratch: usize,
    extent: usize,
}

impl<'a> Lowerer<'a> {
    fn node(&mut self) -> usize {
        self.nodes += 1;
        self.nodes - 1
    }

    fn edge(&mut self, from: usize, to: usize, op: Op, kind: EdgeKind, tag: Option<Tag>) {
        if let Op::Assume(e) | Op::Assign(_, e) = &op {
            self.extent = self.extent.max(e.slot_extent());
        }
        self.edges.push(HEdge { from, to, op, kind, tag });
    }

    fn plain(&mut self, from: usize, op: Op) -> usize {
        let to = self.node();
        self.edge(from, to, op, EdgeKind::Normal, None);
        to
    }

    fn var(&self, v: usize) -> u32 {
        (self.var_base + v) as u32
    }

    fn obj(&self, o: Obj) -> usize {
        o.index() * self.width
    }

    fn resolver(&self) -> Resolver {
        let mut r = Resolver::new(&self.model.adt.consts);
        r.scratch = self.scratch as u32;
        r
    }

    fn cond(&self, c: &Cond) -> Result<RExpr> {
        Ok(match c {
            Cond::Phi { state } => {
                let mut r = self.resolver();
                self.model.bind_state(&mut r, "s", self.obj(*state));
                let v = self.vars;
                for (prefix, group) in [("x", &v.x), ("y", &v.y), ("rm", &v.rm), ("rn", &v.rn)] {
                    for (i, var) in group.iter().enumerate() {
                        r.bare.insert(format!("{prefix}{}", i + 1), SlotInfo::Scalar(self.var(*var)));
                    }
                }
                r.expr(&self.phi.expr)?
            }
            Cond::Requires { method, args } => {
                let meth = &self.model.methods[*method];
                let req = meth.requires.as_ref().ok_or_else(|| Error::Invalid("no precondition".into()))?;
                let base = meth.param_base() as u32;
                let slots: Vec<u32> = args.iter().map(|a| self.var(*a)).collect();
                req.relocate(&|s| if s >= base && ((s - base) as usize) < slots.len() { slots[(s - base) as usize] } else { s })
            }
            Cond::Inv { a, b } => {
                let inv = self.inv.ok_or_else(|| Error::Invalid("harness refers to an invariant it was not given".into()))?;
                let mut r = self.resolver();
                self.model.bind_state(&mut r, "s1", self.obj(*a));
                self.model.bind_state(&mut r, "s2", self.obj(*b));
                r.expr(&inv.expr)?
            }
            Cond::Differ(pairs) => pairs
                .iter()
                .map(|(a, b)| RExpr::Bin(BinOp::Ne, Box::new(RExpr::Slot(self.var(*a))), Box::new(RExpr::Slot(self.var(*b)))))
                .reduce(|acc, e| RExpr::Bin(BinOp::Or, Box::new(acc), Box::new(e)))
                .unwrap_or(RExpr::Const(0)),
            Cond::Not(c) => self.cond(c)?.negate(),
        })
    }

    /// Copies a method-style automaton into the harness; returns its entry
    /// and exit nodes.
    fn splice(&mut self, stmts: &[RStmt], ret_base: usize) -> (usize, usize) {
        let mut b = Builder::default();
        let entry = b.node();
        let exit = b.node();
        if let Some(end) = b.lower_block(stmts, entry, exit, ret_base) {
            b.edge(end, exit, Op::Skip);
        }
        let offset = self.nodes;
        self.nodes += b.nodes;
        for e in b.edges {
            if let Op::Store { idx, val, .. } = &e.op {
                self.extent = self.extent.max(idx.slot_extent()).max(val.slot_extent());
            }
            self.edge(e.from + offset, e.to + offset, e.op, EdgeKind::Normal, None);
        }
        (entry + offset, exit + offset)
    }

    fn block(&mut self, stmts: &[HStmt], mut cur: usize) -> Result<usize> {
        for s in stmts {
            cur = self.stmt(s, cur)?;
        }
        Ok(cur)
    }

    fn stmt(&mut self, s: &HStmt, cur: usize) -> Result<usize> {
        Ok(match s {
            HStmt::Comment(_) => cur,
            HStmt::Init(o) => {
                let base = self.obj(*o) as u32;
                let body = relocate_stmts(&self.model.init, &|s| s + base);
                let (entry, exit) = self.splice(&body, 0);
                self.edge(cur, entry, Op::Skip, EdgeKind::Normal, None);
                exit
            }
            HStmt::Havoc(vs) => {
                let mut at = cur;
                for v in vs {
                    at = self.plain(at, Op::Havoc(self.var(*v)));
                }
                at
            }
            HStmt::Assume(c) => {
                let e = self.cond(c)?;
                self.plain(cur, Op::Assume(e))
            }
            HStmt::Clone { dst, src } => {
                let op = Op::Copy { dst: self.obj(*dst) as u32, src: self.obj(*src) as u32, len: self.width as u32 };
                self.plain(cur, op)
            }
            HStmt::Call(site) => self.call(site, cur),
            HStmt::Loop { kind, body } => {
                let head = self.node();
                self.edge(cur, head, Op::Skip, EdgeKind::Normal, None);
                let first = self.node();
                self.edge(head, first, Op::Skip, EdgeKind::Iter(*kind), None);
                let end = self.block(body, first)?;
                self.edge(end, head, Op::Skip, EdgeKind::Normal, None);
                let after = self.node();
                self.edge(head, after, Op::Skip, EdgeKind::Exit, None);
                after
            }
            HStmt::Choose(branches) => {
                let join = self.node();
                let ch = self.var(self.vars.ch);
                for (k, b) in branches.iter().enumerate() {
                    let start = self.node();
                    self.edge(cur, start, Op::Assign(ch, RExpr::Const(k as i64)), EdgeKind::Normal, None);
                    let end = self.block(b, start)?;
                    self.edge(end, join, Op::Skip, EdgeKind::Normal, None);
                }
                join
            }
            HStmt::IfError { cond, reason } => {
                let e = self.cond(cond)?;
                let error = self.error;
                self.edge(cur, error, Op::Assume(e.clone()), EdgeKind::Normal, Some(Tag::Error(*reason)));
                self.plain(cur, Op::Assume(e.negate()))
            }
            HStmt::Record(vs) => {
                let next = self.node();
                self.edge(cur, next, Op::Skip, EdgeKind::Normal, Some(Tag::Record(vs.clone())));
                next
            }
            HStmt::Forget(vs) => {
                if vs.is_empty() {
                    cur
                } else {
                    let pairs = vs.iter().map(|v| (self.var(*v), RExpr::Const(0))).collect();
                    self.plain(cur, Op::Bind(pairs))
                }
            }
            HStmt::ForgetObj(o) => {
                let base = self.obj(*o);
                let pairs = (base..base + self.width).map(|s| (s as u32, RExpr::Const(0))).collect();
                self.plain(cur, Op::Bind(pairs))
            }
        })
    }

    fn call(&mut self, site: &CallSite, cur: usize) -> usize {
        let meth = &self.model.methods[site.method];
        let (w, ob, fb) = (self.width as u32, self.obj(site.obj) as u32, self.frame_base as u32);
        let body = relocate_stmts(&meth.body, &|s| if s < w { ob + s } else { fb + (s - w) });
        let ret_base = self.frame_base + meth.ret_base() - self.width;
        let frame = meth.frame_len();
        let (entry, exit) = self.splice(&body, ret_base);
        let index = self.sites.len();
        self.sites.push(site.clone());

        let mut bind: Vec<(u32, RExpr)> =
            site.args.iter().enumerate().map(|(i, a)| (fb + i as u32, RExpr::Slot(self.var(*a)))).collect();
        bind.extend((meth.arity()..frame).map(|i| (fb + i as u32, RExpr::Const(0))));
        self.edge(cur, entry, Op::Bind(bind), EdgeKind::Normal, Some(Tag::CallEnter(index)));

        let mut out: Vec<(u32, RExpr)> =
            site.rets.iter().enumerate().map(|(i, r)| (self.var(*r), RExpr::Slot((ret_base + i) as u32))).collect();
        out.extend((0..frame).map(|i| (fb + i as u32, RExpr::Const(0))));
        let next = self.node();
        self.edge(exit, next, Op::Bind(out), EdgeKind::Normal, Some(Tag::CallExit(index)));
        next
    }
}

pub(super) fn lower(
    model: &Model,
    phi: &CommutFormula,
    inv: Option<&PairFormula>,
    vars: &Vars,
    body: &[HStmt],
) -> Result<HarnessCfa> {
    let width = model.width;
    let var_base = 3 * width;
    let frame_base = var_base + vars.len();
    let frame = model.methods.iter().map(|m| m.frame_len()).max().unwrap_or(0);
    let scratch = frame_base + frame;
    let mut l = Lowerer {
        model,
        phi,
        inv,
        vars,
        nodes: 0,
        edges: Vec::new(),
        sites: Vec::new(),
        error: 0,
        width,
        var_base,
        frame_base,
        scratch,
        extent: scratch,
    };
    let entry = l.node();
    let exit = l.node();
    l.error = l.node();
    let end = l.block(body, entry)?;
    l.edge(end, exit, Op::Skip, EdgeKind::Normal, None);

    let mut out = vec![Vec::new(); l.nodes];
    for (i, e) in l.edges.iter().enumerate() {
        out[e.from].push(i);
    }
    Ok(HarnessCfa {
        nodes: l.nodes,
        entry,
        exit,
        error: l.error,
        edges: l.edges,
        sites: l.sites,
        width,
        var_base,
        frame_base,
        env_len: l.extent.max(scratch),
        out,
    })
}
