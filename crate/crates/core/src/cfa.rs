//! Control-flow automata: structured method bodies lowered to graphs whose
//! edges carry only assumes and assignments.

use std::fmt;

use crate::dsl::UnOp;
use crate::error::{Error, Result};
use crate::ir::{self, Model, RExpr, RStmt};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Skip,
    Assume(RExpr),
    Assign(u32, RExpr),
    Store { array: std::sync::Arc<str>, base: u32, len: u32, idx: RExpr, val: RExpr },
    /// Simultaneous assignment; right-hand sides read the old environment.
    Bind(Vec<(u32, RExpr)>),
    /// `x := *`; only harness programs use it.
    Havoc(u32),
    Copy { dst: u32, src: u32, len: u32 },
}

impl Op {
    /// Applies a deterministic operation. Assumes must be checked by the
    /// caller; havoc is rejected.
    pub fn apply(&self, env: &mut [i64]) -> Result<()> {
        match self {
            Op::Skip | Op::Assume(_) => {}
            Op::Assign(slot, e) => env[*slot as usize] = e.eval(env)?,
            Op::Store { array, base, len, idx, val } => {
                let i = idx.eval(env)?;
                let v = val.eval(env)?;
                env[ir::index(array, *base, *len, i)?] = v;
            }
            Op::Bind(pairs) => {
                let mut values = Vec::with_capacity(pairs.len());
                for (_, e) in pairs {
                    values.push(e.eval(env)?);
                }
                for ((slot, _), v) in pairs.iter().zip(values) {
                    env[*slot as usize] = v;
                }
            }
            Op::Havoc(_) => return Err(Error::Invalid("havoc edge in a deterministic run".into())),
            Op::Copy { dst, src, len } => {
                let (d, s, n) = (*dst as usize, *src as usize, *len as usize);
                env.copy_within(s..s + n, d);
            }
        }
        Ok(())
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Skip => write!(f, "skip"),
            Op::Assume(e) => write!(f, "assume({e:?})"),
            Op::Assign(s, e) => write!(f, "#{s} := {e:?}"),
            Op::Store { array, idx, val, .. } => write!(f, "{array}[{idx:?}] := {val:?}"),
            Op::Bind(pairs) => {
                let parts: Vec<String> = pairs.iter().map(|(s, e)| format!("#{s} := {e:?}")).collect();
                write!(f, "{}", parts.join(", "))
            }
            Op::Havoc(s) => write!(f, "#{s} := *"),
            Op::Copy { dst, src, len } => write!(f, "#{dst}..+{len} := #{src}..+{len}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub op: Op,
}

/// Incremental graph construction shared by method and harness lowering.
#[derive(Debug, Clone, Default)]
pub struct Builder {
    pub nodes: usize,
    pub edges: Vec<Edge>,
}

impl Builder {
    pub fn node(&mut self) -> usize {
        self.nodes += 1;
        self.nodes - 1
    }

    pub fn edge(&mut self, from: usize, to: usize, op: Op) -> usize {
        self.edges.push(Edge { from, to, op });
        self.edges.len() - 1
    }

    /// Lowers `stmts` starting at `cur`. Returns edges go to `exit` and
    /// write `ret_base..`. Yields the fall-through node, or `None` if
    /// every path returns.
    pub fn lower_block(&mut self, stmts: &[RStmt], mut cur: usize, exit: usize, ret_base: usize) -> Option<usize> {
        for s in stmts {
            cur = self.lower_stmt(s, cur, exit, ret_base)?;
        }
        Some(cur)
    }

    fn lower_stmt(&mut self, s: &RStmt, cur: usize, exit: usize, ret_base: usize) -> Option<usize> {
        match s {
            RStmt::Assign(slot, e) => {
                let next = self.node();
                self.edge(cur, next, Op::Assign(*slot, e.clone()));
                Some(next)
            }
            RStmt::Store { array, base, len, idx, val } => {
                let next = self.node();
                let op = Op::Store { array: array.clone(), base: *base, len: *len, idx: idx.clone(), val: val.clone() };
                self.edge(cur, next, op);
                Some(next)
            }
            RStmt::Return(values) => {
                let pairs = values.iter().enumerate().map(|(i, v)| ((ret_base + i) as u32, v.clone())).collect();
                self.edge(cur, exit, Op::Bind(pairs));
                None
            }
            RStmt::If(c, t, e) => {
                let tn = self.node();
                let en = self.node();
                self.edge(cur, tn, Op::Assume(c.clone()));
                self.edge(cur, en, Op::Assume(RExpr::Un(UnOp::Not, Box::new(c.clone()))));
                let te = self.lower_block(t, tn, exit, ret_base);
                let ee = self.lower_block(e, en, exit, ret_base);
                match (te, ee) {
                    (None, None) => None,
                    (Some(a), None) | (None, Some(a)) => Some(a),
                    (Some(a), Some(b)) => {
                        let join = self.node();
                        self.edge(a, join, Op::Skip);
                        self.edge(b, join, Op::Skip);
                        Some(join)
                    }
                }
            }
            RStmt::While(c, body) => {
                let head = self.node();
                self.edge(cur, head, Op::Skip);
                let bn = self.node();
                let after = self.node();
                self.edge(head, bn, Op::Assume(c.clone()));
                self.edge(head, after, Op::Assume(RExpr::Un(UnOp::Not, Box::new(c.clone()))));
                if let Some(end) = self.lower_block(body, bn, exit, ret_base) {
                    self.edge(end, head, Op::Skip);
                }
                Some(after)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automaton {
    pub nodes: usize,
    pub entry: usize,
    pub exit: usize,
    pub edges: Vec<Edge>,
}

impl Automaton {
    fn lower(stmts: &[RStmt], ret_base: usize) -> Automaton {
        let mut b = Builder::default();
        let entry = b.node();
        let exit = b.node();
        if let Some(end) = b.lower_block(stmts, entry, exit, ret_base) {
            b.edge(end, exit, Op::Skip);
        }
        Automaton { nodes: b.nodes, entry, exit, edges: b.edges }
    }

    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == node)
    }

    /// Runs from entry to exit, following the single enabled edge at
    /// every node.
    pub fn run(&self, env: &mut [i64], fuel: u64) -> Result<()> {
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.nodes];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.from].push(i);
        }
        let mut cur = self.entry;
        let mut left = fuel;
        while cur != self.exit {
            if left == 0 {
                return Err(Error::FuelExhausted { method: String::new(), fuel });
            }
            left -= 1;
            let mut taken = None;
            for &i in &out[cur] {
                let e = &self.edges[i];
                let enabled = match &e.op {
                    Op::Assume(c) => c.holds(env)?,
                    _ => true,
                };
                if enabled {
                    taken = Some(e);
                    break;
                }
            }
            let e = taken.ok_or_else(|| Error::Invalid(format!("no enabled edge at node {cur}")))?;
            e.op.apply(env)?;
            cur = e.to;
        }
        Ok(())
    }
}

/// Per-method automata plus the initializer, all over slot environments
/// laid out as in [`Model`].
#[derive(Debug, Clone)]
pub struct ObjectCfa {
    pub init: Automaton,
    pub methods: Vec<(String, Automaton)>,
}

pub fn build_cfa(model: &Model) -> ObjectCfa {
    let init = Automaton::lower(&model.init, 0);
    let methods = model
        .methods
        .iter()
        .map(|m| (m.name.clone(), Automaton::lower(&m.body, m.ret_base())))
        .collect();
    ObjectCfa { init, methods }
}

impl ObjectCfa {
    pub fn method(&self, name: &str) -> Option<&Automaton> {
        self.methods.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench;

    fn cfa_of(name: &str) -> (Model, ObjectCfa) {
        let model = Model::new(&bench::bundled_adt(name).unwrap()).unwrap();
        let cfa = build_cfa(&model);
        (model, cfa)
    }

    #[test]
    fn memory_write_is_a_three_node_chain() {
        let (_, cfa) = cfa_of("memory");
        let w = cfa.method("write").unwrap();
        assert_eq!(w.nodes, 3);
        assert_eq!(w.edges.len(), 2);
        assert!(matches!(w.edges[0].op, Op::Assign(..)));
        assert!(matches!(&w.edges[1].op, Op::Bind(p) if p.len() == 1));
        assert_eq!(w.edges[1].to, w.exit);
    }

    #[test]
    fn push_branches_on_capacity() {
        let (_, cfa) = cfa_of("arraystack");
        let push = cfa.method("push").unwrap();
        let assumes: Vec<_> = push.out_edges(push.entry).collect();
        assert_eq!(assumes.len(), 2);
        match (&assumes[0].op, &assumes[1].op) {
            (Op::Assume(c), Op::Assume(RExpr::Un(UnOp::Not, d))) => assert_eq!(c, &**d),
            other => panic!("unexpected entry edges {other:?}"),
        }
    }

    #[test]
    fn list_add_has_a_back_edge() {
        let (_, cfa) = cfa_of("list");
        let add = cfa.method("add").unwrap();
        // A loop head is a node reached both from before and after its body.
        let back = add.edges.iter().any(|e| e.to < e.from && matches!(e.op, Op::Skip));
        assert!(back);
    }

    #[test]
    fn every_node_but_exit_has_a_way_out() {
        for name in bench::BUNDLED {
            let (_, cfa) = cfa_of(name);
            for (_, a) in &cfa.methods {
                for n in 0..a.nodes {
                    let outs = a.out_edges(n).count();
                    if n == a.exit {
                        assert_eq!(outs, 0);
                    } else {
                        assert!(outs == 1 || outs == 2, "{name}: node {n} has {outs} out-edges");
                    }
                }
            }
        }
    }
}
