//! Observational equivalence over the bounded transition system.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::dsl::PairFormula;
use crate::error::{Error, Result};
use crate::ir::Model;
use crate::semantics::{all_actions, invoke, reachable_states, Action, CompiledPair, DomainBounds, ObjectState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", content = "depth")]
pub enum EquivMode {
    Exact,
    /// Two states are related iff no sequence of at most `d` actions
    /// tells them apart.
    DepthBounded(usize),
}

impl std::fmt::Display for EquivMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EquivMode::Exact => write!(f, "exact"),
            EquivMode::DepthBounded(d) => write!(f, "depth-bounded({d})"),
        }
    }
}

const NONE: u32 = u32::MAX;

/// Closure of a seed set under every domain action, with transition and
/// output tables.
#[derive(Debug, Clone)]
pub struct ObsSpace {
    pub actions: Vec<Action>,
    pub states: Vec<ObjectState>,
    pub index: HashMap<ObjectState, u32>,
    /// Distance from the nearest seed.
    pub dist: Vec<u32>,
    succ: Vec<u32>,
    out: Vec<u32>,
    pub outputs: Vec<Vec<i64>>,
    pub mode: EquivMode,
    /// The depth-bounded space itself hit the state budget.
    pub truncated: bool,
}

struct Explorer<'a> {
    model: &'a Model,
    fuel: u64,
    space: ObsSpace,
    out_ids: HashMap<Vec<i64>, u32>,
}

impl Explorer<'_> {
    fn add(&mut self, s: ObjectState, dist: u32) -> u32 {
        if let Some(&i) = self.space.index.get(&s) {
            return i;
        }
        let i = self.space.states.len() as u32;
        self.space.index.insert(s.clone(), i);
        self.space.states.push(s);
        self.space.dist.push(dist);
        let a = self.space.actions.len();
        self.space.succ.extend(std::iter::repeat_n(NONE, a));
        self.space.out.extend(std::iter::repeat_n(NONE, a));
        i
    }

    fn intern(&mut self, rets: Vec<i64>) -> u32 {
        if let Some(&id) = self.out_ids.get(&rets) {
            return id;
        }
        let id = self.space.outputs.len() as u32;
        self.out_ids.insert(rets.clone(), id);
        self.space.outputs.push(rets);
        id
    }

    /// Computes outputs of state `i`; when `expand`, also its successors.
    /// Returns false if a successor would exceed `budget`.
    fn visit(&mut self, i: u32, expand: bool, budget: usize) -> Result<bool> {
        let a = self.space.actions.len();
        let dist = self.space.dist[i as usize];
        for k in 0..a {
            let act = &self.space.actions[k];
            let (next, rets) = invoke(self.model, &self.space.states[i as usize], act.method, &act.args, self.fuel)?;
            let o = self.intern(rets);
            self.space.out[i as usize * a + k] = o;
            if expand {
                if !self.space.index.contains_key(&next) && self.space.states.len() >= budget {
                    return Ok(false);
                }
                let j = self.add(next, dist + 1);
                self.space.succ[i as usize * a + k] = j;
            }
        }
        Ok(true)
    }
}

impl ObsSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn id(&self, s: &ObjectState) -> Option<u32> {
        self.index.get(s).copied()
    }

    pub fn successor(&self, state: u32, action: usize) -> Option<u32> {
        let v = self.succ[state as usize * self.actions.len() + action];
        (v != NONE).then_some(v)
    }

    pub fn output(&self, state: u32, action: usize) -> &[i64] {
        &self.outputs[self.out[state as usize * self.actions.len() + action] as usize]
    }

    fn out_row(&self, s: usize) -> &[u32] {
        let a = self.actions.len();
        &self.out[s * a..(s + 1) * a]
    }

    fn succ_row(&self, s: usize) -> &[u32] {
        let a = self.actions.len();
        &self.succ[s * a..(s + 1) * a]
    }
}

/// Builds the closure of `seeds`. Falls back to the states within
/// `suffix_depth` steps of the seeds when the closure exceeds the budget.
pub fn build_obs_space(model: &Model, seeds: &[ObjectState], bounds: &DomainBounds) -> Result<ObsSpace> {
    if seeds.is_empty() {
        return Err(Error::Invalid("observation space needs at least one seed".into()));
    }
    let actions = all_actions(model, bounds)?;
    let fresh = |mode| ObsSpace {
        actions: actions.clone(),
        states: Vec::new(),
        index: HashMap::new(),
        dist: Vec::new(),
        succ: Vec::new(),
        out: Vec::new(),
        outputs: Vec::new(),
        mode,
        truncated: false,
    };

    let mut ex = Explorer { model, fuel: bounds.fuel, space: fresh(EquivMode::Exact), out_ids: HashMap::new() };
    for s in seeds {
        ex.add(s.clone(), 0);
    }
    let mut i = 0u32;
    let mut closed = true;
    while (i as usize) < ex.space.states.len() {
        if !ex.visit(i, true, bounds.state_budget.max(seeds.len()))? {
            closed = false;
            break;
        }
        i += 1;
    }
    if closed {
        return Ok(ex.space);
    }

    let d = bounds.suffix_depth as u32;
    let mut ex = Explorer {
        model,
        fuel: bounds.fuel,
        space: fresh(EquivMode::DepthBounded(bounds.suffix_depth)),
        out_ids: HashMap::new(),
    };
    for s in seeds {
        ex.add(s.clone(), 0);
    }
    let mut i = 0u32;
    while (i as usize) < ex.space.states.len() {
        let expand = ex.space.dist[i as usize] < d;
        if !ex.visit(i, expand, bounds.state_budget.max(seeds.len()))? {
            ex.space.truncated = true;
            // Remaining states keep whatever outputs they have; unexplored
            // successors stay unknown.
            i += 1;
            while (i as usize) < ex.space.states.len() {
                ex.visit(i, false, 0)?;
                i += 1;
            }
            break;
        }
        i += 1;
    }
    Ok(ex.space)
}

/// Blocks of states that no (bounded) action sequence distinguishes.
#[derive(Debug, Clone)]
pub struct Partition {
    pub block: Vec<u32>,
    pub blocks: usize,
    pub rounds: usize,
    pub mode: EquivMode,
}

fn renumber<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>) -> (Vec<u32>, usize) {
    let mut ids: HashMap<K, u32> = HashMap::new();
    let mut block = Vec::new();
    for k in keys {
        let next = ids.len() as u32;
        block.push(*ids.entry(k).or_insert(next));
    }
    let n = ids.len();
    (block, n)
}

/// Moore-style refinement: start from single-action output signatures,
/// then split by successor blocks. `max_rounds` counts the initial
/// partition as the first round.
pub fn refine(space: &ObsSpace, max_rounds: Option<usize>) -> Partition {
    let n = space.len();
    if max_rounds == Some(0) {
        return Partition { block: vec![0; n], blocks: n.min(1), rounds: 0, mode: space.mode };
    }
    let (mut block, mut blocks) = renumber((0..n).map(|s| space.out_row(s).to_vec()));
    let mut rounds = 1;
    loop {
        if max_rounds.is_some_and(|m| rounds >= m) {
            break;
        }
        let (next, count) = renumber((0..n).map(|s| {
            let mut key = Vec::with_capacity(space.actions.len() + 1);
            key.push(block[s]);
            key.extend(space.succ_row(s).iter().map(|&t| if t == NONE { NONE } else { block[t as usize] }));
            key
        }));
        rounds += 1;
        let stable = count == blocks;
        block = next;
        blocks = count;
        if stable {
            break;
        }
    }
    Partition { block, blocks, rounds, mode: space.mode }
}

pub fn obs_equiv_partition(space: &ObsSpace) -> Partition {
    match space.mode {
        EquivMode::Exact => refine(space, None),
        EquivMode::DepthBounded(d) => refine(space, Some(d)),
    }
}

impl Partition {
    pub fn same_block(&self, a: u32, b: u32) -> bool {
        self.block[a as usize] == self.block[b as usize]
    }
}

/// Same-block test; both states must belong to the space.
pub fn equivalent(space: &ObsSpace, partition: &Partition, s1: &ObjectState, s2: &ObjectState) -> Result<bool> {
    if s1 == s2 {
        return Ok(true);
    }
    let a = space.id(s1).ok_or_else(|| Error::Invalid("first state is outside the observation space".into()))?;
    let b = space.id(s2).ok_or_else(|| Error::Invalid("second state is outside the observation space".into()))?;
    Ok(partition.same_block(a, b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuffixStep {
    pub method: String,
    pub args: Vec<i64>,
    pub returns1: Vec<i64>,
    pub returns2: Vec<i64>,
}

/// Same actions applied to two states, the last one exposing different
/// returns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistinguishingSeq {
    pub steps: Vec<SuffixStep>,
}

impl DistinguishingSeq {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Shortest distinguishing sequence, found by breadth-first search over
/// state pairs with direct invocation. Ties go to the earlier method, then
/// the smaller arguments. `max_len` bounds the search depth.
pub fn distinguishing_sequence(
    model: &Model,
    s1: &ObjectState,
    s2: &ObjectState,
    bounds: &DomainBounds,
    max_len: Option<usize>,
) -> Result<Option<DistinguishingSeq>> {
    let actions = all_actions(model, bounds)?;
    let mut pairs: Vec<(ObjectState, ObjectState)> = vec![(s1.clone(), s2.clone())];
    let mut parent: Vec<Option<(usize, SuffixStep)>> = vec![None];
    let mut depth = vec![0usize];
    let mut seen: HashSet<(ObjectState, ObjectState)> = HashSet::from([(s1.clone(), s2.clone())]);
    let mut queue = VecDeque::from([0usize]);
    let path = |parent: &Vec<Option<(usize, SuffixStep)>>, mut i: usize, last: SuffixStep| {
        let mut steps = vec![last];
        while let Some((p, st)) = &parent[i] {
            steps.push(st.clone());
            i = *p;
        }
        steps.reverse();
        DistinguishingSeq { steps }
    };
    while let Some(i) = queue.pop_front() {
        if max_len.is_some_and(|m| depth[i] >= m) {
            continue;
        }
        let mut children = Vec::new();
        for a in &actions {
            let (n1, r1) = invoke(model, &pairs[i].0, a.method, &a.args, bounds.fuel)?;
            let (n2, r2) = invoke(model, &pairs[i].1, a.method, &a.args, bounds.fuel)?;
            let step = SuffixStep { method: model.methods[a.method].name.clone(), args: a.args.clone(), returns1: r1, returns2: r2 };
            if step.returns1 != step.returns2 {
                return Ok(Some(path(&parent, i, step)));
            }
            if n1 != n2 && !seen.contains(&(n1.clone(), n2.clone())) {
                children.push((n1, n2, step));
            }
        }
        for (n1, n2, step) in children {
            if !seen.insert((n1.clone(), n2.clone())) {
                continue;
            }
            if seen.len() > bounds.state_budget {
                return Ok(None);
            }
            pairs.push((n1, n2));
            parent.push(Some((i, step)));
            depth.push(depth[i] + 1);
            queue.push_back(pairs.len() - 1);
        }
    }
    Ok(None)
}

/// Why a pair related by a candidate invariant breaks it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PairFailure {
    ReturnsDiffer,
    SuccessorsUnrelated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairCounterexample {
    pub state1: ObjectState,
    pub state2: ObjectState,
    pub method: String,
    pub args: Vec<i64>,
    pub returns1: Vec<i64>,
    pub returns2: Vec<i64>,
    pub failure: PairFailure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantCheck {
    pub violation: Option<PairCounterexample>,
    pub pairs_checked: usize,
    /// The related-pair closure was fully explored within the budget.
    pub complete: bool,
}

impl InvariantCheck {
    pub fn holds(&self) -> bool {
        self.violation.is_none()
    }
}

/// Default seeds: every pair of client-reachable states that `rel`
/// relates, in BFS order.
pub fn related_reachable_pairs(model: &Model, rel: &CompiledPair, bounds: &DomainBounds) -> Result<Vec<(ObjectState, ObjectState)>> {
    let reach = reachable_states(model, bounds)?;
    let mut out = Vec::new();
    for a in &reach.states {
        for b in &reach.states {
            if rel.eval(a, b)? {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    Ok(out)
}

/// Checks that `rel` is preserved by every same-action step and that
/// related states always return the same values.
pub fn check_invariant_candidate(
    model: &Model,
    rel: &PairFormula,
    bounds: &DomainBounds,
    seeds: Option<Vec<(ObjectState, ObjectState)>>,
) -> Result<InvariantCheck> {
    let compiled = CompiledPair::new(model, rel)?;
    let seeds = match seeds {
        Some(s) => s,
        None => related_reachable_pairs(model, &compiled, bounds)?,
    };
    let actions = all_actions(model, bounds)?;
    let mut seen: HashSet<(ObjectState, ObjectState)> = HashSet::new();
    let mut queue: VecDeque<(ObjectState, ObjectState)> = VecDeque::new();
    for (a, b) in seeds {
        if compiled.eval(&a, &b)? && seen.insert((a.clone(), b.clone())) {
            queue.push_back((a, b));
        }
    }
    let mut checked = 0;
    let mut complete = true;
    while let Some((s1, s2)) = queue.pop_front() {
        checked += 1;
        for act in &actions {
            let (n1, r1) = invoke(model, &s1, act.method, &act.args, bounds.fuel)?;
            let (n2, r2) = invoke(model, &s2, act.method, &act.args, bounds.fuel)?;
            let failure = if r1 != r2 {
                Some(PairFailure::ReturnsDiffer)
            } else if !compiled.eval(&n1, &n2)? {
                Some(PairFailure::SuccessorsUnrelated)
            } else {
                None
            };
            if let Some(failure) = failure {
                return Ok(InvariantCheck {
                    violation: Some(PairCounterexample {
                        state1: s1,
                        state2: s2,
                        method: model.methods[act.method].name.clone(),
                        args: act.args.clone(),
                        returns1: r1,
                        returns2: r2,
                        failure,
                    }),
                    pairs_checked: checked,
                    complete,
                });
            }
            if seen.len() >= bounds.state_budget {
                complete = false;
                continue;
            }
            if seen.insert((n1.clone(), n2.clone())) {
                queue.push_back((n1, n2));
            }
        }
    }
    Ok(InvariantCheck { violation: None, pairs_checked: checked, complete })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{bundled_model, I_AS, I_SS};
    use crate::dsl::parse_pair_formula;
    use crate::semantics::invoke_named;

    fn st(model: &Model, text: &str) -> ObjectState {
        ObjectState::parse(model, text).unwrap()
    }

    #[test]
    fn memory_space_is_exact_with_one_block_per_value() {
        let mem = bundled_model("memory").unwrap();
        let b = DomainBounds { lo: 0, hi: 1, ..DomainBounds::default() };
        let space = build_obs_space(&mem, &[st(&mem, "x=0"), st(&mem, "x=1")], &b).unwrap();
        assert_eq!(space.mode, EquivMode::Exact);
        assert_eq!(space.len(), 2);
        let p = obs_equiv_partition(&space);
        assert_eq!(p.blocks, 2);
    }

    #[test]
    fn counter_falls_back_to_depth_bound() {
        let c = bundled_model("counter").unwrap();
        let b = DomainBounds { state_budget: 500, ..DomainBounds::default() };
        let space = build_obs_space(&c, &[st(&c, "x=0")], &b).unwrap();
        assert_eq!(space.mode, EquivMode::DepthBounded(6));
    }

    #[test]
    fn arraystack_reach_closes() {
        let s = bundled_model("arraystack").unwrap();
        let b = DomainBounds::default();
        let reach = reachable_states(&s, &b).unwrap();
        let space = build_obs_space(&s, &reach.states, &b).unwrap();
        assert_eq!(space.mode, EquivMode::Exact);
    }

    #[test]
    fn simpleset_orders_are_equivalent() {
        let ss = bundled_model("simpleset").unwrap();
        let a = st(&ss, "a=5,b=3,sz=2");
        let b = st(&ss, "a=3,b=5,sz=2");
        let bounds = DomainBounds { lo: -1, hi: 5, ..DomainBounds::default() };
        let space = build_obs_space(&ss, &[a.clone(), b.clone()], &bounds).unwrap();
        let p = obs_equiv_partition(&space);
        assert!(equivalent(&space, &p, &a, &b).unwrap());
        assert_eq!(distinguishing_sequence(&ss, &a, &b, &bounds, None).unwrap(), None);
    }

    #[test]
    fn memory_values_are_distinguished_by_read() {
        let mem = bundled_model("memory").unwrap();
        let b = DomainBounds::default();
        let (x1, x2) = (st(&mem, "x=1"), st(&mem, "x=2"));
        let space = build_obs_space(&mem, &[x1.clone(), x2.clone()], &b).unwrap();
        let p = obs_equiv_partition(&space);
        assert!(!equivalent(&space, &p, &x1, &x2).unwrap());
        let seq = distinguishing_sequence(&mem, &x1, &x2, &b, None).unwrap().unwrap();
        assert_eq!(
            seq.steps,
            vec![SuffixStep { method: "read".into(), args: vec![], returns1: vec![1], returns2: vec![2] }]
        );
        assert_eq!(distinguishing_sequence(&mem, &x1, &x1, &b, None).unwrap(), None);
    }

    #[test]
    fn stack_second_element_needs_two_pops() {
        let s = bundled_model("arraystack").unwrap();
        let b = DomainBounds::default();
        let s1 = st(&s, "top=1,a=[1,2,0,0,0]");
        let s2 = st(&s, "top=1,a=[3,2,0,0,0]");
        let seq = distinguishing_sequence(&s, &s1, &s2, &b, None).unwrap().unwrap();
        let names: Vec<&str> = seq.steps.iter().map(|x| x.method.as_str()).collect();
        assert_eq!(names, vec!["pop", "pop"]);
    }

    #[test]
    fn list_multiset_equal_states_share_a_block() {
        let l = bundled_model("list").unwrap();
        let b = DomainBounds::default();
        let s1 = st(&l, "end=1,list=[1,2]");
        let s2 = st(&l, "end=1,list=[2,1]");
        let space = build_obs_space(&l, &[s1.clone(), s2.clone()], &b).unwrap();
        assert_eq!(space.mode, EquivMode::Exact);
        let p = obs_equiv_partition(&space);
        assert!(equivalent(&space, &p, &s1, &s2).unwrap());
    }

    #[test]
    fn queue_enq_deq_orders_agree_from_singleton() {
        let q = bundled_model("queue").unwrap();
        let b = DomainBounds::default();
        let (pre, _) = invoke_named(&q, &crate::semantics::init_state(&q).unwrap(), "enq", &[2], 100).unwrap();
        let (m, _) = invoke_named(&q, &pre, "enq", &[2], 100).unwrap();
        let (mn, _) = invoke_named(&q, &m, "deq", &[], 100).unwrap();
        let (n, _) = invoke_named(&q, &pre, "deq", &[], 100).unwrap();
        let (nm, _) = invoke_named(&q, &n, "enq", &[2], 100).unwrap();
        let space = build_obs_space(&q, &[mn.clone(), nm.clone()], &b).unwrap();
        let p = obs_equiv_partition(&space);
        assert!(equivalent(&space, &p, &mn, &nm).unwrap());
    }

    #[test]
    fn invariant_candidates() {
        let ss = bundled_model("simpleset").unwrap();
        let b = DomainBounds::default();
        let iss = parse_pair_formula(I_SS, &ss.adt).unwrap();
        assert!(check_invariant_candidate(&ss, &iss, &b, None).unwrap().holds());

        let s = bundled_model("arraystack").unwrap();
        let ias = parse_pair_formula(I_AS, &s.adt).unwrap();
        assert!(check_invariant_candidate(&s, &ias, &b, None).unwrap().holds());

        let mem = bundled_model("memory").unwrap();
        let t = parse_pair_formula("true", &mem.adt).unwrap();
        let r = check_invariant_candidate(&mem, &t, &b, None).unwrap();
        let cex = r.violation.unwrap();
        assert_eq!(cex.method, "read");
        assert_eq!(cex.failure, PairFailure::ReturnsDiffer);
        assert_ne!(cex.returns1, cex.returns2);
    }
}
