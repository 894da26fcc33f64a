//! Brute-force reference implementations used for differential testing.
//!
//! These trade all efficiency for obviousness and deliberately share no
//! logic with the engine: substitution application, rule firing, and factor
//! evaluation are re-implemented inline, the naive way. They only run on
//! desk-scale inputs (a handful of facts, at most 16 factor-graph atoms).

use std::collections::{BTreeMap, BTreeSet};

use crate::grounding::SupportSet;
use crate::kb::{Atom, Constant, KnowledgeBase, Term};
use crate::scalar::Scalar;
use crate::worlds::{Factor, FactorGraph, FactorKind, FactorWeight, World};

fn naive_subst_term(term: &Term, env: &BTreeMap<String, Constant>) -> Term {
    match term {
        Term::Const(_) => term.clone(),
        Term::Var(v) => Term::Const(env[v].clone()),
        Term::Skolem(sk) => {
            let args: Vec<Term> = sk.args.iter().map(|t| naive_subst_term(t, env)).collect();
            let grounded = crate::kb::SkolemTerm { id: sk.id, args };
            match grounded.ground_label() {
                Some(label) => Term::Const(Constant::new(label).expect("non-empty label")),
                None => Term::Skolem(grounded),
            }
        }
    }
}

fn naive_subst_atom(atom: &Atom, env: &BTreeMap<String, Constant>) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom.args.iter().map(|t| naive_subst_term(t, env)).collect(),
    }
}

/// Every substitution of `vars` over `domain`, the full cross product.
fn all_substitutions(
    vars: &[String],
    domain: &[Constant],
) -> Vec<BTreeMap<String, Constant>> {
    let mut out = vec![BTreeMap::new()];
    for var in vars {
        let mut next = Vec::with_capacity(out.len() * domain.len());
        for env in &out {
            for value in domain {
                let mut extended = env.clone();
                extended.insert(var.clone(), value.clone());
                next.push(extended);
            }
        }
        out = next;
    }
    out
}

fn constants_of(atoms: &BTreeSet<Atom>) -> Vec<Constant> {
    let mut out = BTreeSet::new();
    for atom in atoms {
        for c in atom.constants() {
            out.insert(c.clone());
        }
    }
    out.into_iter().collect()
}

fn naive_close<S: Scalar>(start: BTreeSet<Atom>, kb: &KnowledgeBase<S>) -> BTreeSet<Atom> {
    let mut atoms = start;
    loop {
        let mut added = false;
        let domain = constants_of(&atoms);
        for rule in &kb.rules {
            let vars: Vec<String> = rule.variables().into_iter().map(String::from).collect();
            for env in all_substitutions(&vars, &domain) {
                let holds = rule
                    .body
                    .iter()
                    .all(|b| atoms.contains(&naive_subst_atom(b, &env)));
                if holds {
                    let head = naive_subst_atom(&rule.head, &env);
                    if atoms.insert(head) {
                        added = true;
                    }
                }
            }
        }
        if !added {
            return atoms;
        }
    }
}

/// Reference expansion: try every rule under every substitution over the
/// current constant set, until nothing changes.
pub fn naive_ground<S: Scalar>(kb: &KnowledgeBase<S>) -> BTreeSet<Atom> {
    naive_close(kb.base_atoms(), kb)
}

/// Reference minimal inconsistent subsets: enumerate every subset of the
/// base atoms in ascending size, keep those that derive the contradiction
/// and contain no smaller one.
pub fn brute_force_mis<S: Scalar>(kb: &KnowledgeBase<S>) -> Vec<SupportSet> {
    let base: Vec<Atom> = kb.base_atoms().into_iter().collect();
    let n = base.len();
    debug_assert!(n <= 20, "brute-force MIS only runs on tiny KBs");
    let bot = Atom::bot();
    if !naive_ground(kb).contains(&bot) {
        return Vec::new();
    }
    let mut masks: Vec<u32> = (0..(1u32 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut found: Vec<SupportSet> = Vec::new();
    'subsets: for mask in masks {
        let subset: SupportSet = base
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.clone())
            .collect();
        for mis in &found {
            if mis.is_subset(&subset) {
                continue 'subsets; // a proper superset cannot be minimal
            }
        }
        if naive_close(subset.clone(), kb).contains(&bot) {
            found.push(subset);
        }
    }
    found.sort();
    found
}

fn oracle_world_weight<S: Scalar>(factors: &[Factor<S>], truth: &BTreeSet<Atom>) -> S {
    let mut weight = S::one();
    for factor in factors {
        let is_true = |a: &Atom| truth.contains(a);
        let satisfied = match factor.kind {
            FactorKind::Atom => is_true(&factor.scope[0]),
            FactorKind::Rule { body_len, bot_head } => {
                let body_true = factor.scope[..body_len].iter().all(is_true);
                if bot_head {
                    !body_true
                } else {
                    !body_true || is_true(&factor.scope[body_len])
                }
            }
        };
        match factor.theta {
            FactorWeight::Hard => {
                if !satisfied {
                    return S::zero();
                }
            }
            FactorWeight::Soft(theta) => {
                if satisfied {
                    weight = weight * theta.exp();
                }
            }
        }
    }
    weight
}

/// Reference world distribution: a direct 2^n loop over assignments,
/// weights multiplied out in linear space and normalized at the end.
/// `None` when every world has zero weight.
pub fn enumerate_worlds<S: Scalar>(fg: &FactorGraph<S>) -> Option<Vec<(World, S)>> {
    let n = fg.atoms.len();
    debug_assert!(n <= 16, "world enumeration oracle only runs on tiny graphs");
    let mut weights = Vec::with_capacity(1 << n);
    let mut total = S::zero();
    for mask in 0u64..(1u64 << n) {
        let truth: BTreeSet<Atom> = fg
            .atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.clone())
            .collect();
        let weight = oracle_world_weight(&fg.factors, &truth);
        total = total + weight;
        weights.push((World { true_atoms: truth }, weight));
    }
    if total <= S::zero() {
        return None;
    }
    Some(
        weights
            .into_iter()
            .map(|(world, weight)| (world, weight / total))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::{ground_fixpoint, GroundingConfig};
    use crate::parse::parse_kb;

    const TWEETY: &str = "\
bird(tweety) @ w=1.0 src=d1
penguin(tweety) @ w=0.9 src=d2
flies(X) :- bird(X). w=1.5
notflies(X) :- penguin(X). w=2.0
bot :- flies(X), notflies(X). w=hard
";

    #[test]
    fn naive_ground_matches_the_engine_on_tweety() {
        let kb = parse_kb::<f64>(TWEETY).unwrap();
        let naive = naive_ground(&kb);
        let engine = ground_fixpoint(&kb, &GroundingConfig::default()).unwrap();
        assert_eq!(naive, engine.atoms);
        assert_eq!(naive.len(), 5);
    }

    #[test]
    fn naive_ground_rule_free_and_empty() {
        let kb = parse_kb::<f64>("p(a)\nq(b)").unwrap();
        assert_eq!(naive_ground(&kb), kb.base_atoms());
        let empty = parse_kb::<f64>("").unwrap();
        assert!(naive_ground(&empty).is_empty());
    }

    #[test]
    fn brute_mis_on_tweety() {
        let kb = parse_kb::<f64>(TWEETY).unwrap();
        let mis = brute_force_mis(&kb);
        assert_eq!(mis.len(), 1);
        let names: Vec<String> = mis[0].iter().map(|a| a.to_string()).collect();
        assert_eq!(names, vec!["bird(tweety)", "penguin(tweety)"]);
    }

    #[test]
    fn brute_mis_consistent_kb_is_empty() {
        let kb = parse_kb::<f64>("p(a)\nq(X) :- p(X). w=1.0").unwrap();
        assert!(brute_force_mis(&kb).is_empty());
    }

    #[test]
    fn brute_mis_singletons() {
        let kb = parse_kb::<f64>("p(a)\nbot :- p(X). w=hard").unwrap();
        let mis = brute_force_mis(&kb);
        assert_eq!(mis.len(), 1);
        assert_eq!(mis[0].len(), 1);
    }

    #[test]
    fn enumerate_single_neutral_atom() {
        let atom = Atom::new("a", vec![]);
        let fg = FactorGraph::<f64>::new(
            vec![atom.clone()],
            vec![Factor {
                scope: vec![atom],
                theta: FactorWeight::Soft(0.0),
                kind: FactorKind::Atom,
            }],
            22,
        )
        .unwrap();
        let worlds = enumerate_worlds(&fg).unwrap();
        assert_eq!(worlds.len(), 2);
        assert!((worlds[0].1 - 0.5).abs() < 1e-12);
        assert!((worlds[1].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn enumerate_empty_graph_is_one_world_probability_one() {
        let fg = FactorGraph::<f64>::new(vec![], vec![], 22).unwrap();
        let worlds = enumerate_worlds(&fg).unwrap();
        assert_eq!(worlds.len(), 1);
        assert!(worlds[0].0.true_atoms.is_empty());
        assert!((worlds[0].1 - 1.0).abs() < 1e-12);
    }
}
