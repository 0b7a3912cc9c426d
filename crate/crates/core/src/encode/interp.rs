//! Exhaustive bounded exploration of a harness automaton.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::lower::{EdgeKind, HEdge, HarnessCfa, Tag};
use super::{EncodingKind, EncodingProgram, ErrorReason, LoopKind, Obj, Role};
use crate::cfa::Op;
use crate::commute::{posts, Counterexample, Failure, PieceFailure, Which};
use crate::equivalence::{DistinguishingSeq, PairCounterexample, PairFailure, SuffixStep};
use crate::error::{Error, Result};
use crate::ir::Model;
use crate::semantics::{replay_trace, ActionRecord, DomainBounds};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Event {
    Call { site: usize, args: Vec<i64>, rets: Vec<i64> },
    Values { values: Vec<i64> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessTrace {
    pub events: Vec<Event>,
    pub reason: ErrorReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "result")]
pub enum Outcome {
    Safe,
    ErrorReachable { trace: HarnessTrace },
    /// The configuration budget ran out first.
    Inconclusive { reason: String },
}

impl Outcome {
    pub fn is_safe(&self) -> bool {
        matches!(self, Outcome::Safe)
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Outcome::ErrorReachable { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Interpretation {
    pub outcome: Outcome,
    pub configurations: usize,
}

struct Config {
    node: usize,
    env: Vec<i64>,
    iters: usize,
    parent: Option<usize>,
    events: Vec<Event>,
}

enum Advance {
    Dead,
    Error(Vec<Event>, ErrorReason),
    Stop(usize, Vec<i64>, Vec<Event>),
}

struct Explorer<'a> {
    cfa: &'a HarnessCfa,
    bounds: &'a DomainBounds,
    /// Nodes whose successor is a function of the environment alone.
    det: Vec<bool>,
}

impl<'a> Explorer<'a> {
    fn new(cfa: &'a HarnessCfa, bounds: &'a DomainBounds) -> Explorer<'a> {
        let det = (0..cfa.nodes)
            .map(|n| {
                let out = cfa.out_edges(n);
                let ordinary = out.iter().all(|&i| {
                    let e = &cfa.edges[i];
                    e.kind == EdgeKind::Normal && !matches!(e.op, Op::Havoc(_))
                });
                let guarded = out.len() <= 1 || out.iter().all(|&i| matches!(cfa.edges[i].op, Op::Assume(_)));
                ordinary && guarded
            })
            .collect();
        Explorer { cfa, bounds, det }
    }

    fn record(&self, edge: &HEdge, env: &[i64], events: &mut Vec<Event>) {
        match &edge.tag {
            Some(Tag::CallExit(site)) => {
                let s = &self.cfa.sites[*site];
                events.push(Event::Call {
                    site: *site,
                    args: s.args.iter().map(|v| env[self.cfa.var_slot(*v)]).collect(),
                    rets: s.rets.iter().map(|v| env[self.cfa.var_slot(*v)]).collect(),
                });
            }
            Some(Tag::Record(vs)) => {
                events.push(Event::Values { values: vs.iter().map(|v| env[self.cfa.var_slot(*v)]).collect() })
            }
            _ => {}
        }
    }

    /// Follows deterministic nodes until a choice point, the exit, the
    /// error node, or a blocked assume.
    fn advance(&self, mut node: usize, mut env: Vec<i64>, mut events: Vec<Event>) -> Result<Advance> {
        let limit = self.bounds.fuel.saturating_mul(8).max(1000);
        let mut steps = 0u64;
        while node != self.cfa.exit && self.det[node] {
            steps += 1;
            if steps > limit {
                return Err(Error::FuelExhausted { method: "harness".into(), fuel: limit });
            }
            let mut taken = None;
            for &i in self.cfa.out_edges(node) {
                let e = &self.cfa.edges[i];
                let enabled = match &e.op {
                    Op::Assume(c) => c.holds(&mut env)?,
                    _ => true,
                };
                if enabled {
                    taken = Some(e);
                    break;
                }
            }
            let Some(e) = taken else { return Ok(Advance::Dead) };
            e.op.apply(&mut env)?;
            self.record(e, &env, &mut events);
            if let Some(Tag::Error(reason)) = &e.tag {
                return Ok(Advance::Error(events, *reason));
            }
            node = e.to;
        }
        Ok(Advance::Stop(node, env, events))
    }

    fn bound(&self, kind: LoopKind) -> usize {
        match kind {
            LoopKind::Client => self.bounds.client_depth,
            LoopKind::Observe => self.bounds.suffix_depth,
        }
    }

    /// Successor environments along one edge out of a choice point.
    fn fire(&self, e: &HEdge, env: &[i64], iters: usize) -> Result<Vec<(Vec<i64>, usize)>> {
        let iters = match e.kind {
            EdgeKind::Iter(k) if iters >= self.bound(k) => return Ok(Vec::new()),
            EdgeKind::Iter(_) => iters + 1,
            EdgeKind::Exit => 0,
            EdgeKind::Normal => iters,
        };
        match &e.op {
            Op::Havoc(slot) => Ok(self
                .bounds
                .domain()
                .map(|v| {
                    let mut next = env.to_vec();
                    next[*slot as usize] = v;
                    (next, iters)
                })
                .collect()),
            Op::Assume(c) => {
                let mut next = env.to_vec();
                if c.holds(&mut next)? {
                    Ok(vec![(next, iters)])
                } else {
                    Ok(Vec::new())
                }
            }
            op => {
                let mut next = env.to_vec();
                op.apply(&mut next)?;
                Ok(vec![(next, iters)])
            }
        }
    }
}

fn collect_events(configs: &[Config], mut at: Option<usize>, tail: Vec<Event>) -> Vec<Event> {
    let mut chunks = vec![tail];
    while let Some(i) = at {
        chunks.push(configs[i].events.clone());
        at = configs[i].parent;
    }
    chunks.into_iter().rev().flatten().collect()
}

/// Explores every run of the harness with nondet values drawn from
/// `[lo, hi]` and loops unrolled up to the client and suffix depths.
/// Returns the first error-reaching run in breadth-first order.
pub fn interpret_encoding(prog: &EncodingProgram, bounds: &DomainBounds) -> Result<Interpretation> {
    bounds.validate()?;
    let cfa = &prog.cfa;
    let ex = Explorer::new(cfa, bounds);
    let mut configs: Vec<Config> = Vec::new();
    let mut seen: HashMap<(usize, Vec<i64>), usize> = HashMap::new();
    let mut queue = VecDeque::new();

    let error = |events, reason, n| Interpretation {
        outcome: Outcome::ErrorReachable { trace: HarnessTrace { events, reason } },
        configurations: n,
    };

    match ex.advance(cfa.entry, vec![0; cfa.env_len], Vec::new())? {
        Advance::Dead => return Ok(Interpretation { outcome: Outcome::Safe, configurations: 0 }),
        Advance::Error(events, reason) => return Ok(error(events, reason, 0)),
        Advance::Stop(node, env, events) => {
            seen.insert((node, env.clone()), 0);
            configs.push(Config { node, env, iters: 0, parent: None, events });
            queue.push_back(0);
        }
    }

    while let Some(ci) = queue.pop_front() {
        let node = configs[ci].node;
        if node == cfa.exit {
            continue;
        }
        for &ei in cfa.out_edges(node) {
            let e = &cfa.edges[ei];
            for (env, iters) in ex.fire(e, &configs[ci].env, configs[ci].iters)? {
                let mut events = Vec::new();
                ex.record(e, &env, &mut events);
                if let Some(Tag::Error(reason)) = &e.tag {
                    return Ok(error(collect_events(&configs, Some(ci), events), *reason, configs.len()));
                }
                match ex.advance(e.to, env, events)? {
                    Advance::Dead => {}
                    Advance::Error(events, reason) => {
                        return Ok(error(collect_events(&configs, Some(ci), events), reason, configs.len()));
                    }
                    Advance::Stop(to, env, events) => {
                        let key = (to, env);
                        if let Some(&old) = seen.get(&key) {
                            if configs[old].iters <= iters {
                                continue;
                            }
                        }
                        if configs.len() >= bounds.state_budget {
                            return Ok(Interpretation {
                                outcome: Outcome::Inconclusive {
                                    reason: format!("configuration budget of {} exhausted", bounds.state_budget),
                                },
                                configurations: configs.len(),
                            });
                        }
                        let idx = configs.len();
                        configs.push(Config { node: to, env: key.1.clone(), iters, parent: Some(ci), events });
                        seen.insert(key, idx);
                        queue.push_back(idx);
                    }
                }
            }
        }
    }
    Ok(Interpretation { outcome: Outcome::Safe, configurations: configs.len() })
}

/// Maps an error-reaching harness run back to the failure it witnesses,
/// in the same form the direct checker reports.
pub fn project_trace(model: &Model, prog: &EncodingProgram, trace: &HarnessTrace, fuel: u64) -> Result<PieceFailure> {
    let calls: Vec<(Role, Obj, ActionRecord)> = trace
        .events
        .iter()
        .filter_map(|ev| match ev {
            Event::Call { site, args, rets } => {
                let s = &prog.cfa.sites[*site];
                let rec = ActionRecord {
                    method: model.methods[s.method].name.clone(),
                    args: args.clone(),
                    returns: rets.clone(),
                };
                Some((s.role, s.obj, rec))
            }
            Event::Values { .. } => None,
        })
        .collect();
    let client = |obj: Obj| -> Vec<ActionRecord> {
        calls.iter().filter(|(r, o, _)| *r == Role::Client && *o == obj).map(|(_, _, a)| a.clone()).collect()
    };
    let by_role = |role: Role| calls.iter().filter(move |(r, _, _)| *r == role).map(|(_, _, a)| a.clone());

    if prog.kind == EncodingKind::Piece3 {
        let state1 = replay_trace(model, &client(Obj::O1), fuel)?;
        let state2 = replay_trace(model, &client(Obj::O2), fuel)?;
        let a = by_role(Role::StepA).next_back().ok_or_else(|| Error::Invalid("trace has no step on o1".into()))?;
        let b = by_role(Role::StepB).next_back().ok_or_else(|| Error::Invalid("trace has no step on o2".into()))?;
        let failure = match trace.reason {
            ErrorReason::StepReturns => PairFailure::ReturnsDiffer,
            ErrorReason::StepUnrelated => PairFailure::SuccessorsUnrelated,
            r => return Err(Error::Invalid(format!("unexpected error reason {r:?} in piece 3"))),
        };
        return Ok(PieceFailure::Relation(PairCounterexample {
            state1,
            state2,
            method: a.method,
            args: a.args,
            returns1: a.returns,
            returns2: b.returns,
            failure,
        }));
    }

    let values = trace
        .events
        .iter()
        .find_map(|ev| match ev {
            Event::Values { values } => Some(values.clone()),
            _ => None,
        })
        .ok_or_else(|| Error::Invalid("trace never fixed the arguments".into()))?;
    let nx = prog.vars.x.len();
    let (phi_x, phi_y) = (values[..nx].to_vec(), values[nx..].to_vec());
    let (m, n) = (&model.methods[prog.m], &model.methods[prog.n]);
    let args_a = phi_x[..m.arity()].to_vec();
    let args_b = phi_y[..n.arity()].to_vec();
    let prefix = client(Obj::O1);
    let pre_state = replay_trace(model, &prefix, fuel)?;
    let p = posts(model, &pre_state, prog.m, &args_a, prog.n, &args_b, fuel)?;
    let failure = match trace.reason {
        ErrorReason::Disagree => {
            let which = p
                .return_disagreement()
                .ok_or_else(|| Error::Invalid("harness reported disagreement the replay does not show".into()))?;
            let (first, second) = match which {
                Which::M => (p.r_m.clone(), p.r_nm.clone()),
                Which::N => (p.r_n.clone(), p.r_mn.clone()),
            };
            Failure::ReturnMismatch { which, first, second }
        }
        ErrorReason::Observed => {
            let a: Vec<ActionRecord> = by_role(Role::ObsA).collect();
            let b: Vec<ActionRecord> = by_role(Role::ObsB).collect();
            let steps = a
                .into_iter()
                .zip(b)
                .map(|(x, y)| SuffixStep { method: x.method, args: x.args, returns1: x.returns, returns2: y.returns })
                .collect();
            Failure::ObservableDivergence { suffix: DistinguishingSeq { steps } }
        }
        ErrorReason::Unrelated => Failure::Unrelated,
        r => return Err(Error::Invalid(format!("unexpected error reason {r:?}"))),
    };
    Ok(PieceFailure::Commutation(Counterexample {
        prefix,
        pre_state,
        m: m.name.clone(),
        args_a,
        n: n.name.clone(),
        args_b,
        phi_x,
        phi_y,
        posts: p,
        failure,
    }))
}
