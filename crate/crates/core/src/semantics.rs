//! Concrete execution over bounded domains: method invocation, the
//! universal client, and formula evaluation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{CommutFormula, PairFormula};
use crate::error::{Error, Result};
use crate::ir::{self, Model, RExpr, Resolver, SlotInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DomainBounds {
    pub lo: i64,
    pub hi: i64,
    pub client_depth: usize,
    pub suffix_depth: usize,
    pub state_budget: usize,
    pub fuel: u64,
}

impl Default for DomainBounds {
    fn default() -> Self {
        DomainBounds { lo: -1, hi: 3, client_depth: 6, suffix_depth: 6, state_budget: 200_000, fuel: 10_000 }
    }
}

impl DomainBounds {
    pub fn validate(&self) -> Result<()> {
        if self.lo > self.hi {
            return Err(Error::Bounds(format!("lo ({}) exceeds hi ({})", self.lo, self.hi)));
        }
        if self.fuel == 0 {
            return Err(Error::Bounds("fuel must be positive".into()));
        }
        if self.state_budget == 0 {
            return Err(Error::Bounds("state budget must be positive".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> impl Iterator<Item = i64> + Clone {
        self.lo..=self.hi
    }
}

/// A valuation of the object's fields, flattened in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectState(pub Vec<i64>);

impl ObjectState {
    pub fn values(&self) -> &[i64] {
        &self.0
    }

    pub fn display<'a>(&'a self, model: &'a Model) -> StateDisplay<'a> {
        StateDisplay { state: self, model }
    }

    /// Reads a scalar field, or the cell of an array field.
    pub fn get(&self, model: &Model, field: &str, cell: usize) -> Option<i64> {
        let fl = model.field(field)?;
        match fl.len {
            None if cell == 0 => Some(self.0[fl.offset]),
            Some(len) if cell < len => Some(self.0[fl.offset + cell]),
            _ => None,
        }
    }

    /// Parses `a=5,b=3,sz=2` or `top=1,a=[4,2,0,0,0]`; unspecified fields
    /// keep their initial values.
    pub fn parse(model: &Model, text: &str) -> Result<ObjectState> {
        let mut state = init_state(model)?;
        let mut rest = text.trim();
        while !rest.is_empty() {
            let eq = rest.find('=').ok_or_else(|| Error::Invalid(format!("expected `field=value` in `{text}`")))?;
            let name = rest[..eq].trim();
            let fl = model
                .field(name)
                .ok_or_else(|| Error::Invalid(format!("unknown field `{name}`")))?
                .clone();
            rest = rest[eq + 1..].trim_start();
            match fl.len {
                None => {
                    let end = rest.find(',').unwrap_or(rest.len());
                    state.0[fl.offset] = parse_int(&rest[..end])?;
                    rest = rest[end..].trim_start_matches(',').trim_start();
                }
                Some(len) => {
                    let body = rest
                        .strip_prefix('[')
                        .ok_or_else(|| Error::Invalid(format!("array field `{name}` needs `[..]`")))?;
                    let close = body.find(']').ok_or_else(|| Error::Invalid("unclosed `[`".into()))?;
                    let cells: Vec<&str> = body[..close].split(',').filter(|c| !c.trim().is_empty()).collect();
                    if cells.len() > len {
                        return Err(Error::Invalid(format!("`{name}` holds at most {len} cells")));
                    }
                    for (k, c) in cells.iter().enumerate() {
                        state.0[fl.offset + k] = parse_int(c)?;
                    }
                    rest = body[close + 1..].trim_start().trim_start_matches(',').trim_start();
                }
            }
        }
        Ok(state)
    }
}

fn parse_int(s: &str) -> Result<i64> {
    s.trim().parse::<i64>().map_err(|_| Error::Invalid(format!("`{}` is not an integer", s.trim())))
}

pub struct StateDisplay<'a> {
    state: &'a ObjectState,
    model: &'a Model,
}

impl fmt::Display for StateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, fl) in self.model.fields.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match fl.len {
                None => write!(f, "{}={}", fl.name, self.state.0[fl.offset])?,
                Some(len) => {
                    let cells: Vec<String> =
                        self.state.0[fl.offset..fl.offset + len].iter().map(|v| v.to_string()).collect();
                    write!(f, "{}=[{}]", fl.name, cells.join(","))?;
                }
            }
        }
        Ok(())
    }
}

/// One method invocation with its arguments and return values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionRecord {
    pub method: String,
    pub args: Vec<i64>,
    pub returns: Vec<i64>,
}

impl fmt::Display for ActionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
        let rets: Vec<String> = self.returns.iter().map(|a| a.to_string()).collect();
        write!(f, "{}({})/[{}]", self.method, args.join(","), rets.join(","))
    }
}

pub fn format_trace(trace: &[ActionRecord]) -> String {
    if trace.is_empty() {
        return "[]".into();
    }
    trace.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("; ")
}

/// A method together with concrete arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    pub method: usize,
    pub args: Vec<i64>,
}

impl Action {
    pub fn record(&self, model: &Model, returns: Vec<i64>) -> ActionRecord {
        ActionRecord { method: model.methods[self.method].name.clone(), args: self.args.clone(), returns }
    }
}

/// All argument vectors over `[lo, hi]^arity` in lexicographic order.
pub fn arg_vectors(arity: usize, bounds: &DomainBounds) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        let mut next = Vec::new();
        for prefix in &out {
            for v in bounds.domain() {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

pub fn satisfies_requires(model: &Model, method: usize, args: &[i64]) -> Result<bool> {
    let m = &model.methods[method];
    match &m.requires {
        None => Ok(true),
        Some(req) => {
            let mut env = vec![0; m.env_len()];
            env[m.param_base()..m.param_base() + args.len()].copy_from_slice(args);
            req.holds(&mut env)
        }
    }
}

/// Argument vectors of one method that satisfy its precondition.
pub fn method_actions(model: &Model, method: usize, bounds: &DomainBounds) -> Result<Vec<Action>> {
    let mut out = Vec::new();
    for args in arg_vectors(model.methods[method].arity(), bounds) {
        if satisfies_requires(model, method, &args)? {
            out.push(Action { method, args });
        }
    }
    Ok(out)
}

/// Every enabled action, in method declaration order then by arguments.
pub fn all_actions(model: &Model, bounds: &DomainBounds) -> Result<Vec<Action>> {
    let mut out = Vec::new();
    for m in 0..model.methods.len() {
        out.extend(method_actions(model, m, bounds)?);
    }
    Ok(out)
}

pub fn init_state(model: &Model) -> Result<ObjectState> {
    let mut env = vec![0; model.width];
    let mut fuel = u64::MAX;
    ir::exec(&model.init, &mut env, 0, &mut fuel)?;
    Ok(ObjectState(env))
}

/// Big-step execution of `method(args)` on a copy of `state`.
pub fn invoke(model: &Model, state: &ObjectState, method: usize, args: &[i64], fuel: u64) -> Result<(ObjectState, Vec<i64>)> {
    let m = &model.methods[method];
    if args.len() != m.arity() {
        return Err(Error::Arity { method: m.name.clone(), expected: m.arity(), got: args.len() });
    }
    let mut env = vec![0; m.env_len()];
    env[..model.width].copy_from_slice(&state.0);
    env[m.param_base()..m.local_base()].copy_from_slice(args);
    if let Some(req) = &m.requires {
        if !req.holds(&mut env).map_err(|e| e.in_method(&m.name))? {
            return Err(Error::Precondition { method: m.name.clone(), args: args.to_vec() });
        }
    }
    let mut left = fuel;
    let returned = ir::exec(&m.body, &mut env, m.ret_base(), &mut left).map_err(|e| match e {
        Error::FuelExhausted { .. } => Error::FuelExhausted { method: m.name.clone(), fuel },
        e => e.in_method(&m.name),
    })?;
    if !returned && m.returns > 0 {
        return Err(Error::Invalid(format!("`{}` fell off its end", m.name)));
    }
    let rets = env[m.ret_base()..m.env_len()].to_vec();
    env.truncate(model.width);
    Ok((ObjectState(env), rets))
}

pub fn invoke_named(model: &Model, state: &ObjectState, method: &str, args: &[i64], fuel: u64) -> Result<(ObjectState, Vec<i64>)> {
    invoke(model, state, model.method_index(method)?, args, fuel)
}

/// Same as [`invoke`] but runs the method's control-flow automaton.
pub fn invoke_cfa(
    model: &Model,
    cfa: &crate::cfa::ObjectCfa,
    state: &ObjectState,
    method: usize,
    args: &[i64],
    fuel: u64,
) -> Result<(ObjectState, Vec<i64>)> {
    let m = &model.methods[method];
    let mut env = vec![0; m.env_len()];
    env[..model.width].copy_from_slice(&state.0);
    env[m.param_base()..m.local_base()].copy_from_slice(args);
    cfa.methods[method].1.run(&mut env, fuel).map_err(|e| match e {
        Error::FuelExhausted { .. } => Error::FuelExhausted { method: m.name.clone(), fuel },
        e => e.in_method(&m.name),
    })?;
    let rets = env[m.ret_base()..m.env_len()].to_vec();
    env.truncate(model.width);
    Ok((ObjectState(env), rets))
}

/// States reachable through the universal client, in BFS order.
#[derive(Debug, Clone)]
pub struct ReachSet {
    pub states: Vec<ObjectState>,
    pub index: HashMap<ObjectState, usize>,
    /// For each state but the initial one: predecessor and the action taken.
    parent: Vec<Option<(usize, ActionRecord)>>,
    pub depth: Vec<usize>,
    /// The fixpoint closed within both client depth and state budget.
    pub complete: bool,
    /// Exploration stopped because the state budget ran out.
    pub budget_exhausted: bool,
}

impl ReachSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, s: &ObjectState) -> bool {
        self.index.contains_key(s)
    }

    pub fn witness(&self, i: usize) -> Vec<ActionRecord> {
        let mut trace = Vec::new();
        let mut cur = i;
        while let Some((p, a)) = &self.parent[cur] {
            trace.push(a.clone());
            cur = *p;
        }
        trace.reverse();
        trace
    }
}

pub fn reachable_states(model: &Model, bounds: &DomainBounds) -> Result<ReachSet> {
    bounds.validate()?;
    let actions = all_actions(model, bounds)?;
    let init = init_state(model)?;
    let mut rs = ReachSet {
        states: vec![init.clone()],
        index: HashMap::from([(init, 0)]),
        parent: vec![None],
        depth: vec![0],
        complete: true,
        budget_exhausted: false,
    };
    let mut level_start = 0;
    for d in 0..=bounds.client_depth {
        let level_end = rs.states.len();
        if level_start == level_end {
            break;
        }
        for i in level_start..level_end {
            for a in &actions {
                let (next, rets) = invoke(model, &rs.states[i], a.method, &a.args, bounds.fuel)
                    .map_err(|e| e.at_trace(rs.witness(i)))?;
                if rs.index.contains_key(&next) {
                    continue;
                }
                if d == bounds.client_depth {
                    rs.complete = false;
                    return Ok(rs);
                }
                if rs.states.len() >= bounds.state_budget {
                    rs.complete = false;
                    rs.budget_exhausted = true;
                    return Ok(rs);
                }
                rs.index.insert(next.clone(), rs.states.len());
                rs.states.push(next);
                rs.parent.push(Some((i, a.record(model, rets))));
                rs.depth.push(d + 1);
            }
        }
        level_start = level_end;
    }
    Ok(rs)
}

/// Replays a trace from the initial state, checking recorded returns.
pub fn replay_trace(model: &Model, trace: &[ActionRecord], fuel: u64) -> Result<ObjectState> {
    let mut state = init_state(model)?;
    for (k, a) in trace.iter().enumerate() {
        let (next, rets) = invoke_named(model, &state, &a.method, &a.args, fuel)?;
        if rets != a.returns {
            return Err(Error::Invalid(format!(
                "step {} `{}`: recorded returns {:?}, replay gave {:?}",
                k + 1,
                a.method,
                a.returns,
                rets
            )));
        }
        state = next;
    }
    Ok(state)
}

/// A condition compiled against `[state | x.. | y.. | rm.. | rn.. | scratch]`.
#[derive(Debug, Clone)]
pub struct CompiledFormula {
    pub expr: RExpr,
    width: usize,
    nx: usize,
    ny: usize,
    nrm: usize,
    nrn: usize,
    env_len: usize,
    pub uses_returns: bool,
}

impl CompiledFormula {
    pub fn new(model: &Model, phi: &CommutFormula) -> Result<CompiledFormula> {
        let m = &model.methods[model.method_index(&phi.m)?];
        let n = &model.methods[model.method_index(&phi.n)?];
        let nx = phi.max_x.max(m.arity());
        let ny = phi.max_y.max(n.arity());
        let (nrm, nrn) = (m.returns, n.returns);
        let mut r = Resolver::new(&model.adt.consts);
        model.bind_state(&mut r, "s", 0);
        let mut at = model.width;
        for (prefix, count) in [("x", nx), ("y", ny), ("rm", nrm), ("rn", nrn)] {
            for i in 0..count {
                r.bare.insert(format!("{prefix}{}", i + 1), SlotInfo::Scalar((at + i) as u32));
            }
            at += count;
        }
        r.scratch = at as u32;
        let expr = r.expr(&phi.expr)?;
        let env_len = expr.slot_extent().max(at);
        Ok(CompiledFormula { expr, width: model.width, nx, ny, nrm, nrn, env_len, uses_returns: phi.uses_returns })
    }

    /// Number of `x` values the formula sees; may exceed `m`'s arity when
    /// `x1` stands for an unconstrained value.
    pub fn x_count(&self) -> usize {
        self.nx
    }

    pub fn y_count(&self) -> usize {
        self.ny
    }

    pub fn eval(&self, state: &ObjectState, xs: &[i64], ys: &[i64], rets: Option<(&[i64], &[i64])>) -> Result<bool> {
        if self.uses_returns && rets.is_none() {
            return Err(Error::Invalid("formula reads return values but none were supplied".into()));
        }
        let mut env = vec![0; self.env_len];
        env[..self.width].copy_from_slice(&state.0);
        let mut at = self.width;
        env[at..at + xs.len().min(self.nx)].copy_from_slice(&xs[..xs.len().min(self.nx)]);
        at += self.nx;
        env[at..at + ys.len().min(self.ny)].copy_from_slice(&ys[..ys.len().min(self.ny)]);
        at += self.ny;
        if let Some((rm, rn)) = rets {
            env[at..at + self.nrm].copy_from_slice(&rm[..self.nrm]);
            at += self.nrm;
            env[at..at + self.nrn].copy_from_slice(&rn[..self.nrn]);
        }
        self.expr.holds(&mut env)
    }
}

/// A relation compiled against `[s1 | s2 | scratch]`.
#[derive(Debug, Clone)]
pub struct CompiledPair {
    pub expr: RExpr,
    width: usize,
    env_len: usize,
}

impl CompiledPair {
    pub fn new(model: &Model, rel: &PairFormula) -> Result<CompiledPair> {
        let mut r = Resolver::new(&model.adt.consts);
        model.bind_state(&mut r, "s1", 0);
        model.bind_state(&mut r, "s2", model.width);
        r.scratch = (2 * model.width) as u32;
        let expr = r.expr(&rel.expr)?;
        let env_len = expr.slot_extent().max(2 * model.width);
        Ok(CompiledPair { expr, width: model.width, env_len })
    }

    pub fn eval(&self, s1: &ObjectState, s2: &ObjectState) -> Result<bool> {
        let mut env = vec![0; self.env_len];
        env[..self.width].copy_from_slice(&s1.0);
        env[self.width..2 * self.width].copy_from_slice(&s2.0);
        self.expr.holds(&mut env)
    }
}

pub fn eval_formula(
    model: &Model,
    phi: &CommutFormula,
    state: &ObjectState,
    xs: &[i64],
    ys: &[i64],
    rets: Option<(&[i64], &[i64])>,
) -> Result<bool> {
    CompiledFormula::new(model, phi)?.eval(state, xs, ys, rets)
}

pub fn eval_pair_formula(model: &Model, rel: &PairFormula, s1: &ObjectState, s2: &ObjectState) -> Result<bool> {
    CompiledPair::new(model, rel)?.eval(s1, s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::bundled_model;
    use crate::dsl::{parse_formula, parse_pair_formula};

    #[test]
    fn initial_states() {
        let ss = bundled_model("simpleset").unwrap();
        assert_eq!(init_state(&ss).unwrap().display(&ss).to_string(), "a=-1,b=-1,sz=0");
        let st = bundled_model("arraystack").unwrap();
        assert_eq!(init_state(&st).unwrap().display(&st).to_string(), "top=-1,a=[0,0,0,0,0]");
        let c = bundled_model("counter").unwrap();
        assert_eq!(init_state(&c).unwrap().0, vec![0]);
    }

    #[test]
    fn invoke_examples() {
        let mem = bundled_model("memory").unwrap();
        let s0 = init_state(&mem).unwrap();
        let (s1, r) = invoke_named(&mem, &s0, "write", &[3], 100).unwrap();
        assert_eq!((s1.0.clone(), r), (vec![3], vec![0]));
        assert_eq!(s0.0, vec![0], "input state must not change");

        let c = bundled_model("counter").unwrap();
        let (s, r) = invoke_named(&c, &init_state(&c).unwrap(), "decr", &[], 100).unwrap();
        assert_eq!((s.0, r), (vec![0], vec![-1]));

        let ss = bundled_model("simpleset").unwrap();
        let pre = ObjectState::parse(&ss, "a=-1,b=7,sz=1").unwrap();
        let (post, r) = invoke_named(&ss, &pre, "add", &[5], 100).unwrap();
        assert_eq!(post.display(&ss).to_string(), "a=5,b=7,sz=2");
        assert!(r.is_empty());
    }

    #[test]
    fn precondition_and_arity_are_enforced() {
        let ss = bundled_model("simpleset").unwrap();
        let s0 = init_state(&ss).unwrap();
        assert!(matches!(invoke_named(&ss, &s0, "add", &[0], 100), Err(Error::Precondition { .. })));
        assert!(matches!(invoke_named(&ss, &s0, "add", &[], 100), Err(Error::Arity { .. })));
    }

    #[test]
    fn fuel_and_bounds_errors() {
        let adt = crate::dsl::parse_adt(
            "adt L { const N = 2; state { a: int[N]; i: int; }
               method spin() { while (1 == 1) { i := i; } return; }
               method poke(k: int) { a[k] := 1; return; } }",
        )
        .unwrap();
        let model = Model::new(&adt).unwrap();
        let s0 = init_state(&model).unwrap();
        assert!(matches!(invoke_named(&model, &s0, "spin", &[], 50), Err(Error::FuelExhausted { .. })));
        let err = invoke_named(&model, &s0, "poke", &[2], 50).unwrap_err();
        assert!(err.to_string().contains("out of bounds"), "{err}");
    }

    #[test]
    fn memory_reach_at_small_domain() {
        let mem = bundled_model("memory").unwrap();
        let b = DomainBounds { lo: 0, hi: 1, ..DomainBounds::default() };
        let rs = reachable_states(&mem, &b).unwrap();
        let mut xs: Vec<i64> = rs.states.iter().map(|s| s.0[0]).collect();
        xs.sort();
        assert_eq!(xs, vec![0, 1]);
        assert!(rs.complete);
    }

    #[test]
    fn simpleset_reaches_both_orders() {
        let ss = bundled_model("simpleset").unwrap();
        let b = DomainBounds { lo: 1, hi: 2, client_depth: 3, ..DomainBounds::default() };
        let rs = reachable_states(&ss, &b).unwrap();
        for text in ["a=1,b=2,sz=2", "a=2,b=1,sz=2"] {
            assert!(rs.contains(&ObjectState::parse(&ss, text).unwrap()), "{text}");
        }
        for i in 0..rs.len() {
            assert_eq!(replay_trace(&ss, &rs.witness(i), 100).unwrap(), rs.states[i]);
        }
    }

    #[test]
    fn zero_depth_yields_only_init() {
        let c = bundled_model("counter").unwrap();
        let b = DomainBounds { client_depth: 0, ..DomainBounds::default() };
        let rs = reachable_states(&c, &b).unwrap();
        assert_eq!(rs.len(), 1);
        assert!(!rs.complete);
    }

    #[test]
    fn formula_examples() {
        let mem = bundled_model("memory").unwrap();
        let phi = parse_formula("s.x == y1", &mem.adt, "read", "write").unwrap();
        let s = ObjectState(vec![4]);
        assert!(eval_formula(&mem, &phi, &s, &[], &[4], None).unwrap());
        assert!(!eval_formula(&mem, &phi, &s, &[], &[3], None).unwrap());

        let st = bundled_model("arraystack").unwrap();
        let phi = parse_formula("s.a[s.top] == x1 && s.top > 1 && s.top < MAX", &st.adt, "push", "pop").unwrap();
        let s = ObjectState::parse(&st, "top=2,a=[0,0,9,0,0]").unwrap();
        assert!(eval_formula(&st, &phi, &s, &[9], &[], None).unwrap());

        let oob = parse_formula("s.a[s.top] == x1", &st.adt, "push", "pop").unwrap();
        let empty = init_state(&st).unwrap();
        assert!(eval_formula(&st, &oob, &empty, &[1], &[], None).is_err());
    }

    #[test]
    fn pair_formula_examples() {
        let ss = bundled_model("simpleset").unwrap();
        let iss = parse_pair_formula(crate::bench::I_SS, &ss.adt).unwrap();
        let a = ObjectState::parse(&ss, "a=5,b=3,sz=2").unwrap();
        let b = ObjectState::parse(&ss, "a=3,b=5,sz=2").unwrap();
        assert!(eval_pair_formula(&ss, &iss, &a, &b).unwrap());

        let st = bundled_model("arraystack").unwrap();
        let ias = parse_pair_formula(crate::bench::I_AS, &st.adt).unwrap();
        let a = ObjectState::parse(&st, "top=1,a=[4,2,7,7,7]").unwrap();
        let b = ObjectState::parse(&st, "top=1,a=[4,2,0,1,3]").unwrap();
        assert!(eval_pair_formula(&st, &ias, &a, &b).unwrap());
        let c = ObjectState::parse(&st, "top=1,a=[4,3,7,7,7]").unwrap();
        assert!(!eval_pair_formula(&st, &ias, &a, &c).unwrap());
    }
}
