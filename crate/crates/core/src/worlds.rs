//! Factor-graph construction over the grounded KB, exact possible-world
//! probabilities, maximum relevant worlds, candidate universes, and the
//! total-probability ranking of candidates.
//!
//! Every grounded atom gets an exponential factor carrying its logit-mapped
//! extraction confidence; every recorded rule grounding gets a factor
//! carrying the rule weight. Hard rules zero out violating worlds; hard
//! contradiction rules act as filters on the worlds where their body holds
//! (the contradiction atom itself is not a random variable).
//!
//! Candidate probabilities are taken over the factor-graph connected
//! components its universe touches — the joint distribution factorizes over
//! components, and this keeps a candidate's score independent of unrelated
//! parts of the KB.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::config::{EngineConfig, LikelihoodCombinator};
use crate::grounding::{apply_atom, consistency_witness, GroundedKB};
use crate::kb::{Atom, KnowledgeBase, RuleWeight};
use crate::matching::SummaryGraph;
use crate::query::{Candidate, ScoredSummary};
use crate::scalar::{cmp_finite, from_f64, from_usize, Scalar};

/// Clamp for the logit-mapped confidences; confidence 1 maps to +30.
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldsError {
    #[error("factor graph has {atoms} atoms, exact enumeration capped at {cap}")]
    CapExceeded { atoms: usize, cap: usize },
    #[error("hard constraints are unsatisfiable: every world has zero weight")]
    Unsatisfiable,
    #[error("factor scope contains an atom missing from the graph: {0}")]
    ScopeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorWeight<S: Scalar> {
    Soft(S),
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Scope is a single atom; contributes `e^theta` when it is true.
    Atom,
    /// Scope is the grounded body followed by the head (`bot_head` scopes
    /// the body only); contributes `e^theta` when the implication holds,
    /// hard variants zero out violating worlds.
    Rule { body_len: usize, bot_head: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor<S: Scalar> {
    pub scope: Vec<Atom>,
    pub theta: FactorWeight<S>,
    pub kind: FactorKind,
}

/// A truth assignment over a factor graph's atoms: listed atoms are true,
/// all others false.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct World {
    pub true_atoms: BTreeSet<Atom>,
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.true_atoms.iter().map(|a| a.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph<S: Scalar> {
    pub atoms: Vec<Atom>,
    pub factors: Vec<Factor<S>>,
    index: BTreeMap<Atom, usize>,
    scopes: Vec<Vec<usize>>,
}

impl<S: Scalar> FactorGraph<S> {
    pub fn new(
        mut atoms: Vec<Atom>,
        factors: Vec<Factor<S>>,
        cap: usize,
    ) -> Result<Self, WorldsError> {
        atoms.sort();
        atoms.dedup();
        if atoms.len() > cap || atoms.len() > 63 {
            return Err(WorldsError::CapExceeded {
                atoms: atoms.len(),
                cap: cap.min(63),
            });
        }
        let index: BTreeMap<Atom, usize> = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        let mut scopes = Vec::with_capacity(factors.len());
        for factor in &factors {
            let mut ids = Vec::with_capacity(factor.scope.len());
            for atom in &factor.scope {
                match index.get(atom) {
                    Some(&i) => ids.push(i),
                    None => return Err(WorldsError::ScopeMismatch(atom.to_string())),
                }
            }
            scopes.push(ids);
        }
        Ok(FactorGraph {
            atoms,
            factors,
            index,
            scopes,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn world_from_mask(&self, mask: u64) -> World {
        let true_atoms = self
            .atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.clone())
            .collect();
        World { true_atoms }
    }

    pub fn mask_from_world(&self, world: &World) -> u64 {
        let mut mask = 0u64;
        for atom in &world.true_atoms {
            if let Some(&i) = self.index.get(atom) {
                mask |= 1 << i;
            }
        }
        mask
    }

    /// Log of the unnormalized world weight; `None` when a hard factor is
    /// violated.
    pub fn log_weight_mask(&self, mask: u64) -> Option<S> {
        let mut total = S::zero();
        for (factor, scope) in self.factors.iter().zip(&self.scopes) {
            let satisfied = match factor.kind {
                FactorKind::Atom => mask & (1 << scope[0]) != 0,
                FactorKind::Rule { body_len, bot_head } => {
                    let body_true = scope[..body_len].iter().all(|&i| mask & (1 << i) != 0);
                    if bot_head {
                        !body_true
                    } else {
                        !body_true || mask & (1 << scope[body_len]) != 0
                    }
                }
            };
            match (factor.theta, satisfied, factor.kind) {
                (FactorWeight::Hard, false, _) => return None,
                (FactorWeight::Hard, true, _) => {}
                // an unsatisfied soft factor (or false atom) contributes 1
                (FactorWeight::Soft(_), false, _) => {}
                (FactorWeight::Soft(theta), true, _) => total = total + theta,
            }
        }
        Some(total)
    }

    /// Connected components over shared factor scopes; returns the component
    /// id of every atom.
    pub fn components(&self) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.atoms.len()).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for scope in &self.scopes {
            for pair in scope.windows(2) {
                let a = find(&mut parent, pair[0]);
                let b = find(&mut parent, pair[1]);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        (0..self.atoms.len())
            .map(|i| find(&mut parent, i))
            .collect()
    }

    /// The subgraph over the atoms of the selected components.
    pub fn restrict(&self, component_ids: &BTreeSet<usize>, cap: usize) -> Result<Self, WorldsError> {
        let components = self.components();
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| component_ids.contains(&components[*i]))
            .map(|(_, a)| a.clone())
            .collect();
        let keep: BTreeSet<&Atom> = atoms.iter().collect();
        let factors: Vec<Factor<S>> = self
            .factors
            .iter()
            .filter(|f| f.scope.iter().all(|a| keep.contains(a)))
            .cloned()
            .collect();
        FactorGraph::new(atoms, factors, cap)
    }
}

// ---------------------------------------------------------------------------
// Construction from the grounded KB
// ---------------------------------------------------------------------------

/// Logit-mapped extraction confidence, clamped to +-30.
pub fn logit_confidence<S: Scalar>(w: S) -> S {
    let clamp = from_f64::<S>(LOGIT_CLAMP);
    if w >= S::one() {
        return clamp;
    }
    let logit = (w / (S::one() - w)).ln();
    if logit > clamp {
        clamp
    } else if logit < -clamp {
        -clamp
    } else {
        logit
    }
}

/// One atom factor per grounded atom (logit-mapped confidence for base
/// facts, neutral 0 for derived atoms) and one rule factor per recorded
/// rule grounding. The contradiction atom is excluded; hard rules deriving
/// it become world filters over their bodies.
pub fn build_factor_graph<S: Scalar>(
    gkb: &GroundedKB,
    kb: &KnowledgeBase<S>,
    cap: usize,
) -> Result<FactorGraph<S>, WorldsError> {
    let atoms: Vec<Atom> = gkb.atoms.iter().filter(|a| !a.is_bot()).cloned().collect();
    if atoms.len() > cap {
        return Err(WorldsError::CapExceeded {
            atoms: atoms.len(),
            cap,
        });
    }
    let mut factors = Vec::with_capacity(atoms.len() + gkb.rule_groundings.len());
    for atom in &atoms {
        let theta = match kb.atom_confidence(atom) {
            Some(w) => logit_confidence(w),
            None => S::zero(),
        };
        factors.push(Factor {
            scope: vec![atom.clone()],
            theta: FactorWeight::Soft(theta),
            kind: FactorKind::Atom,
        });
    }
    for (ridx, theta_sub) in &gkb.rule_groundings {
        let rule = &kb.rules[*ridx];
        let mut body: Vec<Atom> = Vec::with_capacity(rule.body.len());
        for b in &rule.body {
            let grounded = apply_atom(b, theta_sub);
            if !body.contains(&grounded) {
                body.push(grounded);
            }
        }
        let head = apply_atom(&rule.head, theta_sub);
        let bot_head = head.is_bot();
        let body_len = body.len();
        let mut scope = body;
        if !bot_head {
            scope.push(head);
        }
        let theta = match rule.weight {
            RuleWeight::Soft(w) => FactorWeight::Soft(w),
            RuleWeight::Hard => FactorWeight::Hard,
        };
        factors.push(Factor {
            scope,
            theta,
            kind: FactorKind::Rule { body_len, bot_head },
        });
    }
    FactorGraph::new(atoms, factors, cap)
}

// ---------------------------------------------------------------------------
// Exact inference
// ---------------------------------------------------------------------------

/// Unnormalized weight of a world: the product over factors. May overflow
/// for extreme weights; probabilities are computed in log space instead.
pub fn world_weight<S: Scalar>(fg: &FactorGraph<S>, world: &World) -> S {
    match fg.log_weight_mask(fg.mask_from_world(world)) {
        Some(logw) => logw.exp(),
        None => S::zero(),
    }
}

fn log_partition<S: Scalar>(fg: &FactorGraph<S>) -> Option<S> {
    let n = fg.atom_count();
    let mut max = None::<S>;
    let mut logs = Vec::with_capacity(1 << n);
    for mask in 0u64..(1u64 << n) {
        let lw = fg.log_weight_mask(mask);
        if let Some(lw) = lw {
            max = Some(match max {
                Some(m) if m >= lw => m,
                _ => lw,
            });
        }
        logs.push(lw);
    }
    let max = max?;
    let mut total = S::zero();
    for lw in logs.into_iter().flatten() {
        total = total + (lw - max).exp();
    }
    Some(max + total.ln())
}

/// The normalization constant: the sum of world weights over all
/// assignments. Zero when the hard constraints are unsatisfiable.
pub fn partition_function<S: Scalar>(fg: &FactorGraph<S>) -> S {
    match log_partition(fg) {
        Some(logz) => logz.exp(),
        None => S::zero(),
    }
}

/// Normalized probability of one world.
pub fn world_probability<S: Scalar>(fg: &FactorGraph<S>, world: &World) -> Result<S, WorldsError> {
    let logz = log_partition(fg).ok_or(WorldsError::Unsatisfiable)?;
    match fg.log_weight_mask(fg.mask_from_world(world)) {
        Some(logw) => Ok((logw - logz).exp()),
        None => Ok(S::zero()),
    }
}

/// Probabilities for a batch of worlds over one graph.
pub fn world_probabilities<S: Scalar>(
    fg: &FactorGraph<S>,
    worlds: &[World],
) -> Result<Vec<S>, WorldsError> {
    let logz = log_partition(fg).ok_or(WorldsError::Unsatisfiable)?;
    Ok(worlds
        .iter()
        .map(|w| match fg.log_weight_mask(fg.mask_from_world(w)) {
            Some(logw) => (logw - logz).exp(),
            None => S::zero(),
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Universes and ranking
// ---------------------------------------------------------------------------

/// The maximum relevant world where a summary holds: true are exactly the
/// atoms with some support inside the base-support closure of some member
/// hypothesis; everything else is false.
pub fn max_relevant_world(summary: &SummaryGraph, gkb: &GroundedKB) -> World {
    let mis = gkb.minimal_inconsistent_subsets();
    let mut true_atoms = BTreeSet::new();
    for member in &summary.members {
        // Hypotheses are consistency-filtered upstream, so a witness exists.
        let Some(closure) = consistency_witness(gkb, member.atoms(), mis) else {
            debug_assert!(false, "summary member lost its consistency witness");
            continue;
        };
        for atom in gkb.atoms.iter().filter(|a| !a.is_bot()) {
            if true_atoms.contains(atom) {
                continue;
            }
            if gkb
                .provenance
                .supports(atom)
                .iter()
                .any(|c| c.is_subset(&closure))
            {
                true_atoms.insert(atom.clone());
            }
        }
    }
    World { true_atoms }
}

/// One maximum relevant world per summary, duplicates collapsed.
pub fn candidate_universe<S: Scalar>(
    summaries: &[ScoredSummary<S>],
    gkb: &GroundedKB,
) -> BTreeSet<World> {
    summaries
        .iter()
        .map(|s| max_relevant_world(&s.graph, gkb))
        .collect()
}

/// Likelihood that a universe world is the relevant one given the match
/// qualities of the summary that generated it: the configured combination
/// of `(1 - error) * score` over the contributing matches.
pub fn likelihood<S: Scalar>(
    _world: &World,
    summary: &ScoredSummary<S>,
    combinator: LikelihoodCombinator,
) -> S {
    combine_matches(summary.matches.iter().copied(), combinator)
}

fn combine_matches<S: Scalar>(
    matches: impl Iterator<Item = (S, S)>,
    combinator: LikelihoodCombinator,
) -> S {
    let qualities: Vec<S> = matches.map(|(score, eps)| (S::one() - eps) * score).collect();
    if qualities.is_empty() {
        return S::zero();
    }
    match combinator {
        LikelihoodCombinator::Max => qualities
            .into_iter()
            .fold(S::zero(), |a, v| if v > a { v } else { a }),
        LikelihoodCombinator::Mean => {
            let n = from_usize::<S>(qualities.len());
            qualities.into_iter().fold(S::zero(), |a, v| a + v) / n
        }
    }
}

/// One universe world with its likelihood and prior.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldContribution<S: Scalar> {
    pub world: World,
    pub likelihood: S,
    pub prior: S,
}

/// A candidate with its total-probability score and the universe behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedAnswer<S: Scalar> {
    pub candidate: Candidate,
    pub probability: S,
    pub worlds: Vec<WorldContribution<S>>,
}

/// World priors for a restricted graph; the default is exact enumeration,
/// the CLI can substitute the brute-force reference for differential runs.
pub type PriorFn<'a, S> = &'a dyn Fn(&FactorGraph<S>, &[World]) -> Result<Vec<S>, WorldsError>;

/// Score every candidate by total probability over its universe and sort
/// descending (ties lexicographic on the candidate).
pub fn rank_candidates<S: Scalar>(
    justification: &BTreeMap<Candidate, Vec<ScoredSummary<S>>>,
    gkb: &GroundedKB,
    kb: &KnowledgeBase<S>,
    cfg: &EngineConfig<S>,
) -> Result<Vec<RankedAnswer<S>>, WorldsError> {
    rank_candidates_with(justification, gkb, kb, cfg, &world_probabilities)
}

pub fn rank_candidates_with<S: Scalar>(
    justification: &BTreeMap<Candidate, Vec<ScoredSummary<S>>>,
    gkb: &GroundedKB,
    kb: &KnowledgeBase<S>,
    cfg: &EngineConfig<S>,
    priors: PriorFn<'_, S>,
) -> Result<Vec<RankedAnswer<S>>, WorldsError> {
    let fg = build_factor_graph(gkb, kb, cfg.enumeration_cap)?;
    let components = fg.components();
    let mut out = Vec::with_capacity(justification.len());
    for (candidate, summaries) in justification {
        // Universe worlds, each with the matches of every summary mapping
        // onto it.
        let mut worlds: BTreeMap<World, Vec<(S, S)>> = BTreeMap::new();
        for summary in summaries {
            let world = max_relevant_world(&summary.graph, gkb);
            worlds
                .entry(world)
                .or_default()
                .extend(summary.matches.iter().copied());
        }
        let relevant: BTreeSet<usize> = worlds
            .keys()
            .flat_map(|w| w.true_atoms.iter())
            .filter_map(|atom| {
                fg.atoms
                    .iter()
                    .position(|a| a == atom)
                    .map(|i| components[i])
            })
            .collect();
        if relevant.is_empty() {
            out.push(RankedAnswer {
                candidate: candidate.clone(),
                probability: S::zero(),
                worlds: Vec::new(),
            });
            continue;
        }
        let sub = fg.restrict(&relevant, cfg.enumeration_cap)?;
        let world_list: Vec<World> = worlds.keys().cloned().collect();
        let prior_values = priors(&sub, &world_list)?;
        let mut probability = S::zero();
        let mut contributions = Vec::with_capacity(world_list.len());
        for (world, prior) in world_list.into_iter().zip(prior_values) {
            let matches = worlds.remove(&world).unwrap_or_default();
            let like = combine_matches(matches.into_iter(), cfg.likelihood);
            probability = probability + like * prior;
            contributions.push(WorldContribution {
                world,
                likelihood: like,
                prior,
            });
        }
        out.push(RankedAnswer {
            candidate: candidate.clone(),
            probability,
            worlds: contributions,
        });
    }
    out.sort_by(|a, b| {
        cmp_finite(b.probability, a.probability).then_with(|| a.candidate.cmp(&b.candidate))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{SimilarityConfig, SimilarityMetric};
    use crate::grounding::{ground_fixpoint_with_provenance, GroundingConfig};
    use crate::parse::{parse_kb, parse_query};
    use crate::query::{justify, Unifier};

    const TWEETY: &str = "\
bird(tweety) @ w=1.0 src=d1
penguin(tweety) @ w=0.9 src=d2
flies(X) :- bird(X). w=1.5
notflies(X) :- penguin(X). w=2.0
bot :- flies(X), notflies(X). w=hard
";

    fn grounded(text: &str) -> (KnowledgeBase<f64>, GroundedKB) {
        let kb = parse_kb::<f64>(text).unwrap();
        let gkb = ground_fixpoint_with_provenance(&kb, &GroundingConfig::default()).unwrap();
        (kb, gkb)
    }

    fn nullary(name: &str) -> Atom {
        Atom::new(name, vec![])
    }

    fn lemma2(theta_a: f64, theta_b: f64, theta_f: FactorWeight<f64>) -> FactorGraph<f64> {
        let a = nullary("a");
        let b = nullary("b");
        FactorGraph::new(
            vec![a.clone(), b.clone()],
            vec![
                Factor {
                    scope: vec![a.clone()],
                    theta: FactorWeight::Soft(theta_a),
                    kind: FactorKind::Atom,
                },
                Factor {
                    scope: vec![b.clone()],
                    theta: FactorWeight::Soft(theta_b),
                    kind: FactorKind::Atom,
                },
                Factor {
                    scope: vec![a, b],
                    theta: theta_f,
                    kind: FactorKind::Rule {
                        body_len: 2,
                        bot_head: true,
                    },
                },
            ],
            22,
        )
        .unwrap()
    }

    fn world_of(fg: &FactorGraph<f64>, names: &[&str]) -> World {
        World {
            true_atoms: fg
                .atoms
                .iter()
                .filter(|a| names.contains(&a.predicate.as_str()))
                .cloned()
                .collect(),
        }
    }

    #[test]
    fn two_facts_no_rules_build_two_atom_factors() {
        let (kb, gkb) = grounded("p(a)\nq(b)");
        let fg = build_factor_graph(&gkb, &kb, 22).unwrap();
        assert_eq!(fg.atoms.len(), 2);
        assert_eq!(fg.factors.len(), 2);
        assert!(fg.factors.iter().all(|f| f.kind == FactorKind::Atom));
    }

    #[test]
    fn tweety_builds_four_atom_and_three_rule_factors() {
        let (kb, gkb) = grounded(TWEETY);
        let fg = build_factor_graph(&gkb, &kb, 22).unwrap();
        assert_eq!(fg.atoms.len(), 4); // bot excluded
        let atom_factors = fg.factors.iter().filter(|f| f.kind == FactorKind::Atom).count();
        let rule_factors = fg.factors.len() - atom_factors;
        assert_eq!(atom_factors, 4);
        assert_eq!(rule_factors, 3);
        let hard = fg
            .factors
            .iter()
            .filter(|f| matches!(f.theta, FactorWeight::Hard))
            .count();
        assert_eq!(hard, 1);
    }

    #[test]
    fn cap_exceeded_is_an_error() {
        let (kb, gkb) = grounded("p(a)\nq(b)\nr(c)");
        assert!(matches!(
            build_factor_graph(&gkb, &kb, 2),
            Err(WorldsError::CapExceeded { atoms: 3, cap: 2 })
        ));
    }

    #[test]
    fn all_false_world_collects_vacuous_soft_rules() {
        // soft rules with false bodies are satisfied, atoms contribute 1
        let (kb, gkb) = grounded("p(a) @ w=0.5\nq(X) :- p(X). w=1.5");
        let fg = build_factor_graph(&gkb, &kb, 22).unwrap();
        let empty = World::default();
        let w = world_weight(&fg, &empty);
        assert!((w - 1.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn lemma2_hard_violation_zeroes_the_world() {
        let fg = lemma2(0.0, 0.0, FactorWeight::Hard);
        let both = world_of(&fg, &["a", "b"]);
        assert_eq!(world_weight(&fg, &both), 0.0);
        assert_eq!(world_probability(&fg, &both).unwrap(), 0.0);
    }

    #[test]
    fn lemma2_partial_world_weight() {
        // (A=1, B=0) with neutral atom weights and a finite rule weight
        let theta_f = 0.7;
        let fg = lemma2(0.0, 0.0, FactorWeight::Soft(theta_f));
        let only_a = world_of(&fg, &["a"]);
        assert!((world_weight(&fg, &only_a) - theta_f.exp()).abs() < 1e-12);
    }

    #[test]
    fn single_neutral_atom_partitions_to_two() {
        let a = nullary("a");
        let fg = FactorGraph::<f64>::new(
            vec![a.clone()],
            vec![Factor {
                scope: vec![a],
                theta: FactorWeight::Soft(0.0),
                kind: FactorKind::Atom,
            }],
            22,
        )
        .unwrap();
        assert!((partition_function(&fg) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lemma2_partition_matches_the_closed_form() {
        let (ta, tb, tf) = (0.3, -0.4, 1.1);
        let fg = lemma2(ta, tb, FactorWeight::Soft(tf));
        let z = partition_function(&fg);
        let expected = tf.exp() * (1.0 + ta.exp() + tb.exp()) + (ta + tb).exp();
        assert!((z - expected).abs() < 1e-9, "z={z} expected={expected}");
    }

    #[test]
    fn forced_contradiction_leaves_only_the_false_world() {
        // fact p forced true by a hard rule cannot hold with bot :- p
        let (kb, gkb) = grounded("p(a) @ w=0.5\nbot :- p(X). w=hard");
        let fg = build_factor_graph(&gkb, &kb, 22).unwrap();
        let z = partition_function(&fg);
        assert!((z - 1.0).abs() < 1e-12); // only the p=false world survives
        let p_true = world_of(&fg, &["p"]);
        assert_eq!(world_probability(&fg, &p_true).unwrap(), 0.0);
    }

    #[test]
    fn lemma2_soft_probability_point_one() {
        let fg = lemma2(0.0, 0.0, FactorWeight::Soft(3.0f64.ln()));
        let both = world_of(&fg, &["a", "b"]);
        let p = world_probability(&fg, &both).unwrap();
        assert!((p - 0.1).abs() < 1e-12);
    }

    #[test]
    fn uniform_graph_gives_symmetric_worlds() {
        let atoms: Vec<Atom> = ["a", "b", "c"].iter().map(|n| nullary(n)).collect();
        let factors = atoms
            .iter()
            .map(|a| Factor {
                scope: vec![a.clone()],
                theta: FactorWeight::Soft(0.0),
                kind: FactorKind::Atom,
            })
            .collect();
        let fg = FactorGraph::<f64>::new(atoms, factors, 22).unwrap();
        for mask in 0u64..8 {
            let w = fg.world_from_mask(mask);
            let p = world_probability(&fg, &w).unwrap();
            assert!((p - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn unsatisfiable_graph_reports_error() {
        let a = nullary("a");
        // a hard atom-level contradiction: body {a} -> bot and a hard fact a
        let fg = FactorGraph::<f64>::new(
            vec![a.clone()],
            vec![
                Factor {
                    scope: vec![a.clone()],
                    theta: FactorWeight::Hard,
                    kind: FactorKind::Atom,
                },
                Factor {
                    scope: vec![a],
                    theta: FactorWeight::Hard,
                    kind: FactorKind::Rule {
                        body_len: 1,
                        bot_head: true,
                    },
                },
            ],
            22,
        )
        .unwrap();
        // hard atom factor means: worlds where a is false are forbidden
        assert!(matches!(
            world_probability(&fg, &World::default()),
            Err(WorldsError::Unsatisfiable)
        ));
    }

    #[test]
    fn max_relevant_world_closes_over_supports() {
        let (_, gkb) = grounded(TWEETY);
        let q = parse_query("answer(X) :- bird(X).").unwrap();
        let sim = SimilarityConfig::default();
        let j = justify(
            &gkb,
            &q,
            &Unifier::<f64>::Exact,
            &sim,
            SimilarityMetric::Equivalence,
        );
        let summaries = j.values().next().unwrap();
        let world = max_relevant_world(&summaries[0].graph, &gkb);
        let names: Vec<String> = world.true_atoms.iter().map(|a| a.to_string()).collect();
        assert_eq!(names, vec!["bird(tweety)", "flies(tweety)"]);
    }

    #[test]
    fn max_relevant_world_on_base_only_kb_is_the_member() {
        let (_, gkb) = grounded("p(a)\nq(b)");
        let q = parse_query("answer(X) :- p(X).").unwrap();
        let sim = SimilarityConfig::default();
        let j = justify(
            &gkb,
            &q,
            &Unifier::<f64>::Exact,
            &sim,
            SimilarityMetric::Equivalence,
        );
        let summaries = j.values().next().unwrap();
        let world = max_relevant_world(&summaries[0].graph, &gkb);
        let names: Vec<String> = world.true_atoms.iter().map(|a| a.to_string()).collect();
        assert_eq!(names, vec!["p(a)"]);
    }

    #[test]
    fn likelihood_examples() {
        use crate::matching::merge_cluster;
        let member: crate::matching::HypGraph = [nullary("x")].into_iter().collect();
        let graph = merge_cluster(&[member].into_iter().collect()).unwrap();
        let exact = ScoredSummary {
            graph: graph.clone(),
            matches: vec![(1.0, 0.0)],
        };
        let w = World::default();
        assert_eq!(likelihood(&w, &exact, LikelihoodCombinator::Max), 1.0);
        let weighted = ScoredSummary {
            graph: graph.clone(),
            matches: vec![(0.9, 0.2)],
        };
        let got: f64 = likelihood(&w, &weighted, LikelihoodCombinator::Max);
        assert!((got - 0.72).abs() < 1e-12);
        let two = ScoredSummary {
            graph,
            matches: vec![(0.9, 0.2), (0.9, 0.1)],
        };
        let got: f64 = likelihood(&w, &two, LikelihoodCombinator::Max);
        assert!((got - 0.81).abs() < 1e-12);
    }

    #[test]
    fn rank_single_certain_fact() {
        // one fact, rule-free: the universe is the one-atom-true world over
        // a 2-world component
        let (kb, gkb) = grounded("p(a) @ w=0.8");
        let q = parse_query("answer(X) :- p(X).").unwrap();
        let sim = SimilarityConfig::default();
        let j = justify(
            &gkb,
            &q,
            &Unifier::<f64>::Exact,
            &sim,
            SimilarityMetric::Equivalence,
        );
        let cfg = EngineConfig::<f64>::default();
        let ranked = rank_candidates(&j, &gkb, &kb, &cfg).unwrap();
        assert_eq!(ranked.len(), 1);
        let answer = &ranked[0];
        assert_eq!(answer.candidate.to_string(), "answer(a)");
        assert_eq!(answer.worlds.len(), 1);
        // prior of the true world is logit-normalized back to the confidence
        let expect = 0.8;
        assert!((answer.worlds[0].prior - expect).abs() < 1e-9);
        assert!((answer.probability - expect).abs() < 1e-9);
        assert_eq!(answer.worlds[0].likelihood, 1.0);
    }

    #[test]
    fn rank_is_invariant_to_unrelated_padding() {
        let (kb, gkb) = grounded(TWEETY);
        let q = parse_query("answer(X) :- bird(X).").unwrap();
        let sim = SimilarityConfig::default();
        let cfg = EngineConfig::<f64>::default();
        let j = justify(
            &gkb,
            &q,
            &Unifier::<f64>::Exact,
            &sim,
            SimilarityMetric::Equivalence,
        );
        let base = rank_candidates(&j, &gkb, &kb, &cfg).unwrap();

        let padded_text = format!("{TWEETY}unrelated(u1) @ w=0.4\nother(u2) @ w=0.6\nthird(u3)\n");
        let (kb2, gkb2) = grounded(&padded_text);
        let j2 = justify(
            &gkb2,
            &q,
            &Unifier::<f64>::Exact,
            &sim,
            SimilarityMetric::Equivalence,
        );
        let padded = rank_candidates(&j2, &gkb2, &kb2, &cfg).unwrap();
        assert_eq!(base.len(), padded.len());
        for (a, b) in base.iter().zip(&padded) {
            assert_eq!(a.candidate, b.candidate);
            assert!((a.probability - b.probability).abs() < 1e-12);
        }
    }

    #[test]
    fn certain_exact_answer_scores_one() {
        // confidence 1, exact match, universe covers the whole satisfying
        // component: probability within the logit clamp of 1
        let (kb, gkb) = grounded("p(a) @ w=1.0");
        let q = parse_query("answer(X) :- p(X).").unwrap();
        let sim = SimilarityConfig::default();
        let j = justify(
            &gkb,
            &q,
            &Unifier::<f64>::Exact,
            &sim,
            SimilarityMetric::Equivalence,
        );
        let cfg = EngineConfig::<f64>::default();
        let ranked = rank_candidates(&j, &gkb, &kb, &cfg).unwrap();
        assert!((ranked[0].probability - 1.0).abs() < 1e-12);
    }
}
