//! Commutativity verdicts for candidate conditions, counterexamples and
//! their replay, and the three-piece checks.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dsl::{CommutFormula, PairFormula};
use crate::equivalence::{
    build_obs_space, check_invariant_candidate, distinguishing_sequence, obs_equiv_partition, DistinguishingSeq,
    EquivMode, ObsSpace, PairCounterexample, Partition,
};
use crate::error::{Error, Result};
use crate::ir::Model;
use crate::semantics::{
    arg_vectors, invoke, invoke_named, method_actions, reachable_states, replay_trace, Action, ActionRecord,
    CompiledFormula, CompiledPair, DomainBounds, ObjectState, ReachSet,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PostsResult {
    pub sigma_m: ObjectState,
    pub sigma_mn: ObjectState,
    pub sigma_n: ObjectState,
    pub sigma_nm: ObjectState,
    pub r_m: Vec<i64>,
    pub r_mn: Vec<i64>,
    pub r_n: Vec<i64>,
    pub r_nm: Vec<i64>,
}

impl PostsResult {
    /// Which return agreement fails first, if any: `r_m` against `r_nm`,
    /// then `r_n` against `r_mn`.
    pub fn return_disagreement(&self) -> Option<Which> {
        if self.r_m != self.r_nm {
            Some(Which::M)
        } else if self.r_n != self.r_mn {
            Some(Which::N)
        } else {
            None
        }
    }
}

pub fn posts(
    model: &Model,
    sigma: &ObjectState,
    m: usize,
    a: &[i64],
    n: usize,
    b: &[i64],
    fuel: u64,
) -> Result<PostsResult> {
    let (sigma_m, r_m) = invoke(model, sigma, m, a, fuel)?;
    let (sigma_mn, r_mn) = invoke(model, &sigma_m, n, b, fuel)?;
    let (sigma_n, r_n) = invoke(model, sigma, n, b, fuel)?;
    let (sigma_nm, r_nm) = invoke(model, &sigma_n, m, a, fuel)?;
    Ok(PostsResult { sigma_m, sigma_mn, sigma_n, sigma_nm, r_m, r_mn, r_n, r_nm })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VerdictKind {
    Valid,
    Invalid,
    Inconclusive,
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VerdictKind::Valid => "valid",
            VerdictKind::Invalid => "invalid",
            VerdictKind::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Scope {
    #[default]
    Reachable,
    All,
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scope::Reachable => "reachable",
            Scope::All => "all",
        })
    }
}

/// Which Def.-2 return agreement broke: `M` compares `m`'s return when it
/// runs first with its return when it runs second; `N` likewise for `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Which {
    M,
    N,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Failure {
    ReturnMismatch { which: Which, first: Vec<i64>, second: Vec<i64> },
    ObservableDivergence { suffix: DistinguishingSeq },
    /// The post-states fall outside a candidate relation (piece 2 only).
    Unrelated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counterexample {
    /// Client trace from the initial state to the pre-state.
    pub prefix: Vec<ActionRecord>,
    pub pre_state: ObjectState,
    pub m: String,
    pub args_a: Vec<i64>,
    pub n: String,
    pub args_b: Vec<i64>,
    /// Values of `x1..` / `y1..` as the condition saw them.
    pub phi_x: Vec<i64>,
    pub phi_y: Vec<i64>,
    pub posts: PostsResult,
    pub failure: Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Stats {
    pub reachable_states: usize,
    pub observed_states: usize,
    pub tuples_checked: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Verdict {
    pub kind: VerdictKind,
    pub bounds: DomainBounds,
    pub consts: Vec<(String, i64)>,
    pub equivalence_mode: EquivMode,
    pub scope: Scope,
    pub reach_complete: bool,
    pub counterexample: Option<Counterexample>,
    pub stats: Stats,
}

/// Decides observational equivalence for a fixed set of query states.
pub struct EquivOracle {
    pub space: ObsSpace,
    pub partition: Partition,
}

impl EquivOracle {
    pub fn new(model: &Model, seeds: &[ObjectState], bounds: &DomainBounds) -> Result<EquivOracle> {
        let space = build_obs_space(model, seeds, bounds)?;
        let partition = obs_equiv_partition(&space);
        Ok(EquivOracle { space, partition })
    }

    pub fn equivalent(&self, a: &ObjectState, b: &ObjectState) -> Result<bool> {
        crate::equivalence::equivalent(&self.space, &self.partition, a, b)
    }

    pub fn mode(&self) -> EquivMode {
        self.space.mode
    }

    /// A witness of non-equivalence, bounded by the space's mode.
    pub fn witness(&self, model: &Model, a: &ObjectState, b: &ObjectState, bounds: &DomainBounds) -> Result<DistinguishingSeq> {
        let max_len = match self.space.mode {
            EquivMode::Exact => None,
            EquivMode::DepthBounded(d) => Some(d),
        };
        distinguishing_sequence(model, a, b, bounds, max_len)?
            .ok_or_else(|| Error::Invalid("partition separates states but no distinguishing sequence was found".into()))
    }
}

/// Result of checking one pair of actions at one state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionOutcome {
    Commute,
    ReturnMismatch(Which),
    Diverge,
}

pub fn action_commutes(
    model: &Model,
    sigma: &ObjectState,
    act_m: &Action,
    act_n: &Action,
    oracle: &EquivOracle,
    fuel: u64,
) -> Result<ActionOutcome> {
    let p = posts(model, sigma, act_m.method, &act_m.args, act_n.method, &act_n.args, fuel)?;
    if let Some(w) = p.return_disagreement() {
        return Ok(ActionOutcome::ReturnMismatch(w));
    }
    if oracle.equivalent(&p.sigma_mn, &p.sigma_nm)? {
        Ok(ActionOutcome::Commute)
    } else {
        Ok(ActionOutcome::Diverge)
    }
}

/// Argument vectors for one side: the method's own arguments plus any
/// formula-only values, in lexicographic order.
struct Side {
    method: usize,
    actions: Vec<Action>,
    /// (index into `actions`, values seen by the formula)
    vectors: Vec<(usize, Vec<i64>)>,
}

impl Side {
    fn new(model: &Model, method: usize, seen: usize, bounds: &DomainBounds) -> Result<Side> {
        let actions = method_actions(model, method, bounds)?;
        let extra = seen.saturating_sub(model.methods[method].arity());
        let ghosts = arg_vectors(extra, bounds);
        let mut vectors = Vec::new();
        for (i, a) in actions.iter().enumerate() {
            for g in &ghosts {
                let mut v = a.args.clone();
                v.extend_from_slice(g);
                vectors.push((i, v));
            }
        }
        Ok(Side { method, actions, vectors })
    }
}

/// The states and argument tuples a condition quantifies over.
struct Workload<'a> {
    model: &'a Model,
    bounds: DomainBounds,
    reach: ReachSet,
    phi: CompiledFormula,
    m: Side,
    n: Side,
}

/// One enumerated tuple with φ true.
struct Tuple {
    order: usize,
    state: usize,
    a: usize,
    xs: Vec<i64>,
    b: usize,
    ys: Vec<i64>,
    posts: PostsResult,
}

impl<'a> Workload<'a> {
    fn new(model: &'a Model, phi: &CommutFormula, bounds: &DomainBounds, scope: Scope) -> Result<Workload<'a>> {
        bounds.validate()?;
        let reach_bounds = match scope {
            Scope::Reachable => *bounds,
            Scope::All => DomainBounds { client_depth: usize::MAX, ..*bounds },
        };
        let reach = reachable_states(model, &reach_bounds)?;
        let compiled = CompiledFormula::new(model, phi)?;
        let m = Side::new(model, model.method_index(&phi.m)?, compiled.x_count(), bounds)?;
        let n = Side::new(model, model.method_index(&phi.n)?, compiled.y_count(), bounds)?;
        Ok(Workload { model, bounds: *bounds, reach, phi: compiled, m, n })
    }

    /// Visits every φ-satisfying tuple in enumeration order until `f`
    /// returns false. Returns the number of tuples enumerated.
    fn scan(&self, mut f: impl FnMut(Tuple) -> Result<bool>) -> Result<usize> {
        let fuel = self.bounds.fuel;
        let model = self.model;
        let mut order = 0;
        for (si, sigma) in self.reach.states.iter().enumerate() {
            let mut run = || -> Result<Option<usize>> {
                let mut after_m: HashMap<usize, (ObjectState, Vec<i64>)> = HashMap::new();
                let mut after_n: HashMap<usize, (ObjectState, Vec<i64>)> = HashMap::new();
                let mut pair_cache: HashMap<(usize, usize), PostsResult> = HashMap::new();
                let mut local = order;
                for (ai, xs) in &self.m.vectors {
                    for (bi, ys) in &self.n.vectors {
                        local += 1;
                        let key = (*ai, *bi);
                        let mut compute = || -> Result<PostsResult> {
                            if let Some(p) = pair_cache.get(&key) {
                                return Ok(p.clone());
                            }
                            let am = &self.m.actions[*ai];
                            let bn = &self.n.actions[*bi];
                            if !after_m.contains_key(ai) {
                                after_m.insert(*ai, invoke(model, sigma, self.m.method, &am.args, fuel)?);
                            }
                            if !after_n.contains_key(bi) {
                                after_n.insert(*bi, invoke(model, sigma, self.n.method, &bn.args, fuel)?);
                            }
                            let (sigma_m, r_m) = after_m[ai].clone();
                            let (sigma_n, r_n) = after_n[bi].clone();
                            let (sigma_mn, r_mn) = invoke(model, &sigma_m, self.n.method, &bn.args, fuel)?;
                            let (sigma_nm, r_nm) = invoke(model, &sigma_n, self.m.method, &am.args, fuel)?;
                            let p = PostsResult { sigma_m, sigma_mn, sigma_n, sigma_nm, r_m, r_mn, r_n, r_nm };
                            pair_cache.insert(key, p.clone());
                            Ok(p)
                        };
                        let (holds, posts) = if self.phi.uses_returns {
                            let p = compute()?;
                            let h = self.phi.eval(sigma, xs, ys, Some((&p.r_m, &p.r_n)))?;
                            (h, Some(p))
                        } else {
                            (self.phi.eval(sigma, xs, ys, None)?, None)
                        };
                        if !holds {
                            continue;
                        }
                        let posts = match posts {
                            Some(p) => p,
                            None => compute()?,
                        };
                        let t = Tuple { order: local, state: si, a: *ai, xs: xs.clone(), b: *bi, ys: ys.clone(), posts };
                        if !f(t)? {
                            return Ok(None);
                        }
                    }
                }
                Ok(Some(local))
            };
            match run().map_err(|e| e.at_trace(self.reach.witness(si)))? {
                Some(next) => order = next,
                None => return Ok(order),
            }
        }
        Ok(order)
    }

    fn counterexample(&self, t: &Tuple, failure: Failure) -> Counterexample {
        Counterexample {
            prefix: self.reach.witness(t.state),
            pre_state: self.reach.states[t.state].clone(),
            m: self.model.methods[self.m.method].name.clone(),
            args_a: self.m.actions[t.a].args.clone(),
            n: self.model.methods[self.n.method].name.clone(),
            args_b: self.n.actions[t.b].args.clone(),
            phi_x: t.xs.clone(),
            phi_y: t.ys.clone(),
            posts: t.posts.clone(),
            failure,
        }
    }

    fn mismatch(&self, t: &Tuple, which: Which) -> Counterexample {
        let (first, second) = match which {
            Which::M => (t.posts.r_m.clone(), t.posts.r_nm.clone()),
            Which::N => (t.posts.r_n.clone(), t.posts.r_mn.clone()),
        };
        self.counterexample(t, Failure::ReturnMismatch { which, first, second })
    }
}

/// Outcome of checking post-state equivalence over a batch of tuples.
struct Divergence {
    first: Option<(Tuple, DistinguishingSeq)>,
    mode: EquivMode,
    observed: usize,
    truncated: bool,
}

fn first_divergence(model: &Model, pending: Vec<Tuple>, bounds: &DomainBounds) -> Result<Divergence> {
    if pending.is_empty() {
        return Ok(Divergence { first: None, mode: EquivMode::Exact, observed: 0, truncated: false });
    }
    let mut seeds: Vec<ObjectState> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for t in &pending {
        for s in [&t.posts.sigma_mn, &t.posts.sigma_nm] {
            if seen.insert(s.clone()) {
                seeds.push(s.clone());
            }
        }
    }
    let oracle = EquivOracle::new(model, &seeds, bounds)?;
    let mut out = Divergence {
        first: None,
        mode: oracle.mode(),
        observed: oracle.space.len(),
        truncated: oracle.space.truncated,
    };
    for t in pending {
        if !oracle.equivalent(&t.posts.sigma_mn, &t.posts.sigma_nm)? {
            let seq = oracle.witness(model, &t.posts.sigma_mn, &t.posts.sigma_nm, bounds)?;
            out.first = Some((t, seq));
            break;
        }
    }
    Ok(out)
}

/// Checks whether `phi` is a commutativity condition for its method pair
/// within `bounds`.
pub fn verify_condition(model: &Model, phi: &CommutFormula, bounds: &DomainBounds, scope: Scope) -> Result<Verdict> {
    let start = Instant::now();
    let w = Workload::new(model, phi, bounds, scope)?;
    let mut mismatch: Option<(Tuple, Which)> = None;
    let mut pending: Vec<Tuple> = Vec::new();
    let mut checked = 0usize;
    w.scan(|t| {
        checked += 1;
        if let Some(which) = t.posts.return_disagreement() {
            mismatch = Some((t, which));
            return Ok(false);
        }
        if t.posts.sigma_mn != t.posts.sigma_nm {
            pending.push(t);
        }
        Ok(true)
    })?;

    let div = first_divergence(model, pending, bounds)?;
    let counterexample = match (mismatch, div.first) {
        (Some((t, _)), Some((d, seq))) if d.order < t.order => {
            Some(w.counterexample(&d, Failure::ObservableDivergence { suffix: seq }))
        }
        (Some((t, which)), _) => Some(w.mismatch(&t, which)),
        (None, Some((d, seq))) => Some(w.counterexample(&d, Failure::ObservableDivergence { suffix: seq })),
        (None, None) => None,
    };
    let kind = if counterexample.is_some() {
        VerdictKind::Invalid
    } else if w.reach.budget_exhausted || div.truncated {
        VerdictKind::Inconclusive
    } else {
        VerdictKind::Valid
    };
    Ok(Verdict {
        kind,
        bounds: *bounds,
        consts: model.adt.consts.clone(),
        equivalence_mode: div.mode,
        scope,
        reach_complete: w.reach.complete,
        counterexample,
        stats: Stats {
            reachable_states: w.reach.len(),
            observed_states: div.observed,
            tuples_checked: checked,
            wall_ms: start.elapsed().as_millis() as u64,
        },
    })
}

/// Re-executes a counterexample and confirms its failure recurs exactly.
pub fn replay(model: &Model, cex: &Counterexample, fuel: u64) -> Result<()> {
    let sigma = replay_trace(model, &cex.prefix, fuel)?;
    if sigma != cex.pre_state {
        return Err(Error::Invalid("prefix does not lead to the recorded pre-state".into()));
    }
    let m = model.method_index(&cex.m)?;
    let n = model.method_index(&cex.n)?;
    let p = posts(model, &sigma, m, &cex.args_a, n, &cex.args_b, fuel)?;
    if p != cex.posts {
        return Err(Error::Invalid("replayed post-states or returns differ from the record".into()));
    }
    match &cex.failure {
        Failure::ReturnMismatch { which, first, second } => {
            let (f, s) = match which {
                Which::M => (&p.r_m, &p.r_nm),
                Which::N => (&p.r_n, &p.r_mn),
            };
            if f != first || s != second {
                return Err(Error::Invalid("recorded return values do not match the replay".into()));
            }
            if f == s {
                return Err(Error::Invalid("replayed returns agree; no mismatch".into()));
            }
        }
        Failure::ObservableDivergence { suffix } => {
            if p.return_disagreement().is_some() {
                return Err(Error::Invalid("returns already disagree; divergence record is inconsistent".into()));
            }
            let (mut a, mut b) = (p.sigma_mn.clone(), p.sigma_nm.clone());
            let last = suffix.steps.len().checked_sub(1).ok_or_else(|| Error::Invalid("empty suffix".into()))?;
            for (k, step) in suffix.steps.iter().enumerate() {
                let (na, ra) = invoke_named(model, &a, &step.method, &step.args, fuel)?;
                let (nb, rb) = invoke_named(model, &b, &step.method, &step.args, fuel)?;
                if ra != step.returns1 || rb != step.returns2 {
                    return Err(Error::Invalid(format!("suffix step {} returns differ from the record", k + 1)));
                }
                if (ra != rb) != (k == last) {
                    return Err(Error::Invalid(format!("suffix mismatch is not exactly at step {}", last + 1)));
                }
                a = na;
                b = nb;
            }
        }
        Failure::Unrelated => {}
    }
    Ok(())
}

/// The relation pieces 2 and 3 work with.
#[derive(Debug, Clone)]
pub enum Invariant {
    Formula(PairFormula),
    /// Observational equivalence itself, computed by refinement.
    ExactPartition,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "status")]
pub enum PieceOutcome {
    Pass,
    Fail { counterexample: Box<PieceFailure> },
    Skipped { reason: String },
}

impl PieceOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, PieceOutcome::Pass)
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            PieceOutcome::Pass => "pass",
            PieceOutcome::Fail { .. } => "fail",
            PieceOutcome::Skipped { .. } => "skipped",
        }
    }
}
#[allow(clippy::large_enum_variant)]

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum PieceFailure {
    Commutation(Counterexample),
    Relation(PairCounterexample),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PieceReport {
    pub piece1: PieceOutcome,
    pub piece2: PieceOutcome,
    pub piece3: PieceOutcome,
    /// Whether all pieces passing agrees with a direct verdict, when one
    /// was supplied.
    pub consistent: Option<bool>,
}

impl PieceReport {
    pub fn all_pass(&self) -> bool {
        self.piece1.passed() && self.piece2.passed() && self.piece3.passed()
    }

    pub fn with_verdict(mut self, kind: VerdictKind) -> PieceReport {
        self.consistent = match kind {
            VerdictKind::Inconclusive => None,
            k => Some(self.all_pass() == (k == VerdictKind::Valid)),
        };
        self
    }
}

pub fn check_pieces(model: &Model, phi: &CommutFormula, inv: &Invariant, bounds: &DomainBounds) -> Result<PieceReport> {
    let w = Workload::new(model, phi, bounds, Scope::Reachable)?;

    let mut p1 = None;
    w.scan(|t| {
        if let Some(which) = t.posts.return_disagreement() {
            p1 = Some(w.mismatch(&t, which));
            return Ok(false);
        }
        Ok(true)
    })?;
    let piece1 = match p1 {
        Some(c) => PieceOutcome::Fail { counterexample: Box::new(PieceFailure::Commutation(c)) },
        None => PieceOutcome::Pass,
    };

    let piece2 = match inv {
        Invariant::None => PieceOutcome::Skipped { reason: "no invariant candidate".into() },
        Invariant::Formula(rel) => {
            let compiled = CompiledPair::new(model, rel)?;
            let mut bad = None;
            w.scan(|t| {
                if t.posts.return_disagreement().is_some() {
                    return Ok(true);
                }
                if !compiled.eval(&t.posts.sigma_mn, &t.posts.sigma_nm)? {
                    bad = Some(w.counterexample(&t, Failure::Unrelated));
                    return Ok(false);
                }
                Ok(true)
            })?;
            match bad {
                Some(c) => PieceOutcome::Fail { counterexample: Box::new(PieceFailure::Commutation(c)) },
                None => PieceOutcome::Pass,
            }
        }
        Invariant::ExactPartition => {
            let mut pending = Vec::new();
            w.scan(|t| {
                if t.posts.return_disagreement().is_none() && t.posts.sigma_mn != t.posts.sigma_nm {
                    pending.push(t);
                }
                Ok(true)
            })?;
            match first_divergence(model, pending, bounds)?.first {
                Some((t, seq)) => PieceOutcome::Fail {
                    counterexample: Box::new(PieceFailure::Commutation(
                        w.counterexample(&t, Failure::ObservableDivergence { suffix: seq }),
                    )),
                },
                None => PieceOutcome::Pass,
            }
        }
    };

    let piece3 = match inv {
        Invariant::None => PieceOutcome::Skipped { reason: "no invariant candidate".into() },
        Invariant::ExactPartition => PieceOutcome::Pass,
        Invariant::Formula(rel) => match check_invariant_candidate(model, rel, bounds, None)?.violation {
            Some(v) => PieceOutcome::Fail { counterexample: Box::new(PieceFailure::Relation(v)) },
            None => PieceOutcome::Pass,
        },
    };

    Ok(PieceReport { piece1, piece2, piece3, consistent: None })
}
