#![allow(dead_code)]

use std::collections::HashMap;

use commute::bench::{bundled_adt, bundled_model};
use commute::commute::{verify_condition, Scope, Verdict};
use commute::dsl::parse_formula;
use commute::equivalence::{build_obs_space, equivalent, obs_equiv_partition, EquivMode};
use commute::ir::Model;
use commute::semantics::{all_actions, invoke, reachable_states, DomainBounds, ObjectState};

pub fn model_with(name: &str, consts: &[(&str, i64)]) -> Model {
    let mut adt = bundled_adt(name).unwrap();
    for (k, v) in consts {
        adt = adt.with_const(k, *v);
    }
    Model::new(&adt).unwrap()
}

pub fn small(lo: i64, hi: i64, client_depth: usize) -> DomainBounds {
    DomainBounds { lo, hi, client_depth, ..DomainBounds::default() }
}

/// Returns of every action sequence of length 1..=k from `s`, in a fixed
/// order; two states agree on all such sequences iff their vectors match.
pub fn observations(model: &Model, s: &ObjectState, actions: &[(usize, Vec<i64>)], k: usize, out: &mut Vec<Vec<i64>>) {
    if k == 0 {
        return;
    }
    for (m, args) in actions {
        let (next, rets) = invoke(model, s, *m, args, 10_000).unwrap();
        out.push(rets);
        observations(model, &next, actions, k - 1, out);
    }
}

/// Small configurations whose observation spaces close quickly.
pub fn small_configs() -> Vec<(&'static str, Model, DomainBounds)> {
    vec![
        ("memory", model_with("memory", &[]), small(0, 2, 6)),
        ("simpleset", model_with("simpleset", &[]), small(1, 3, 6)),
        ("arraystack", model_with("arraystack", &[("MAXSTACK", 3), ("MAX", 2)]), small(0, 1, 6)),
        ("queue", model_with("queue", &[("MAXQUEUE", 2)]), small(0, 1, 6)),
        ("list", model_with("list", &[("LISTCAP", 2)]), small(0, 1, 6)),
        ("hashtable", model_with("hashtable", &[("CAP", 2)]), small(0, 2, 6)),
    ]
}

pub fn action_list(model: &Model, bounds: &DomainBounds) -> Vec<(usize, Vec<i64>)> {
    all_actions(model, bounds).unwrap().into_iter().map(|a| (a.method, a.args)).collect()
}

/// Groups states by their observations up to length k, for growing k,
/// until the grouping stops changing.
pub fn brute_force_classes(model: &Model, states: &[commute::semantics::ObjectState], bounds: &DomainBounds) -> Vec<usize> {
    let actions = action_list(model, bounds);
    let mut prev: Option<Vec<usize>> = None;
    for k in 1..=states.len() + 1 {
        let mut ids: HashMap<Vec<Vec<i64>>, usize> = HashMap::new();
        let classes: Vec<usize> = states
            .iter()
            .map(|s| {
                let mut obs = Vec::new();
                observations(model, s, &actions, k, &mut obs);
                let next = ids.len();
                *ids.entry(obs).or_insert(next)
            })
            .collect();
        if prev.as_ref().is_some_and(|p| same_grouping(p, &classes)) {
            return classes;
        }
        prev = Some(classes);
    }
    panic!("observations never stabilised")
}

pub fn same_grouping(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// Smaller variants of every bundled ADT, for randomized checks.
pub fn configs() -> Vec<(&'static str, Model, DomainBounds)> {
    let mut v: Vec<_> = small_configs().into_iter().map(|(n, m, b)| (n, m, DomainBounds { client_depth: 4, ..b })).collect();
    for name in ["counter", "accumulator"] {
        v.push((name, bundled_model(name).unwrap(), DomainBounds { state_budget: 300, suffix_depth: 3, ..small(-1, 1, 4) }));
    }
    v
}

pub fn scalar_fields(adt: &str) -> &'static [&'static str] {
    match adt {
        "simpleset" => &["s.a", "s.b", "s.sz"],
        "simpleset_nf" => &["s.a", "s.b"],
        "arraystack" => &["s.top"],
        "queue" => &["s.size", "s.front"],
        "list" => &["s.end"],
        "hashtable" => &["s.keys"],
        _ => &["s.x"],
    }
}

pub fn check(model: &Model, m: &str, n: &str, phi: &str, bounds: &DomainBounds) -> Verdict {
    let f = parse_formula(phi, &model.adt, m, n).unwrap();
    verify_condition(model, &f, bounds, Scope::Reachable).unwrap()
}

pub fn pick_pair(model: &Model, i: usize, j: usize) -> (String, String) {
    let k = model.methods.len();
    (model.methods[i % k].name.clone(), model.methods[j % k].name.clone())
}

/// A method is pure when no reachable state changes under any of its actions.
pub fn pure_methods(model: &Model, bounds: &DomainBounds) -> Vec<String> {
    let reach = reachable_states(model, bounds).unwrap();
    let actions = all_actions(model, bounds).unwrap();
    (0..model.methods.len())
        .filter(|&k| {
            actions
                .iter()
                .filter(|a| a.method == k)
                .all(|a| reach.states.iter().all(|s| invoke(model, s, k, &a.args, bounds.fuel).unwrap().0 == *s))
        })
        .map(|k| model.methods[k].name.clone())
        .collect()
}

/// Checks that the exact partition of the closure of the reachable states
/// is an equivalence that respects outputs and successors.
pub fn check_congruence(model: &Model, bounds: &DomainBounds) -> Result<usize, String> {
    let reach = reachable_states(model, bounds).map_err(|e| e.to_string())?;
    let space = build_obs_space(model, &reach.states, bounds).map_err(|e| e.to_string())?;
    if space.mode != EquivMode::Exact {
        return Err(format!("space is {}", space.mode));
    }
    let p = obs_equiv_partition(&space);
    let n = space.len() as u32;
    let eq = |a: u32, b: u32| equivalent(&space, &p, &space.states[a as usize], &space.states[b as usize]).unwrap();
    for a in 0..n {
        if !eq(a, a) {
            return Err("not reflexive".into());
        }
        for b in 0..n {
            if eq(a, b) != eq(b, a) {
                return Err("not symmetric".into());
            }
            if !eq(a, b) {
                continue;
            }
            if (0..n).any(|c| eq(b, c) && !eq(a, c)) {
                return Err("not transitive".into());
            }
            for k in 0..space.actions.len() {
                if space.output(a, k) != space.output(b, k) {
                    return Err(format!("related states {a} and {b} differ on action {k}"));
                }
                if !eq(space.successor(a, k).unwrap(), space.successor(b, k).unwrap()) {
                    return Err(format!("successors of {a} and {b} under action {k} are unrelated"));
                }
            }
        }
    }
    Ok(space.len())
}

/// Compares the exact partition with grouping by observed action
/// sequences; returns the number of states compared.
pub fn check_against_sequences(model: &Model, bounds: &DomainBounds) -> Result<usize, String> {
    let reach = reachable_states(model, bounds).map_err(|e| e.to_string())?;
    let space = build_obs_space(model, &reach.states, bounds).map_err(|e| e.to_string())?;
    let p = obs_equiv_partition(&space);
    let brute = brute_force_classes(model, &space.states, bounds);
    let blocks: Vec<usize> = p.block.iter().map(|&b| b as usize).collect();
    if same_grouping(&blocks, &brute) {
        Ok(space.len())
    } else {
        Err(format!("partition has {} blocks, sequence enumeration {}", p.blocks, brute.iter().max().map_or(0, |m| m + 1)))
    }
}
