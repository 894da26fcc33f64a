//! The single similarity metric, approximate matching of query atoms against
//! the grounded KB, clustering and summarization of hypothesis graphs, and
//! graph provenance.
//!
//! One metric drives everything: compilation error, atom-level candidate
//! selection, hypothesis scoring, and clustering. Its ground form is capped
//! strictly below 1 whenever the union of the two graphs is inconsistent, so
//! `sim = 1` implies the union passes the consistency check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::config::{SimilarityConfig, SimilarityMetric, SynonymTable};
use crate::grounding::{apply_atom, GroundedKB, Substitution};
use crate::kb::{Atom, Constant, Term};
use crate::query::{Candidate, CompiledQuery, Hypothesis};
use crate::scalar::{cmp_finite, from_f64, from_usize, Scalar};

/// Similarity of an inconsistent union is capped at `1 - 2^-16`.
pub const INCONSISTENCY_DELTA: f64 = 1.0 / 65536.0;

/// Budget for the exhaustive constant-correspondence search; beyond it the
/// identity correspondence is used.
const CORRESPONDENCE_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("cannot summarize an empty cluster")]
    EmptyCluster,
    #[error("no input subset reproduces the summary (summarizer/UDF mismatch)")]
    ProvenanceMiss,
}

// ---------------------------------------------------------------------------
// Hypothesis graphs
// ---------------------------------------------------------------------------

/// A set of ground atoms viewed as a labeled graph: constants are nodes,
/// binary atoms are edges, unary atoms are node labels, higher arities are
/// hyperedges.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HypGraph(BTreeSet<Atom>);

impl HypGraph {
    pub fn new(atoms: BTreeSet<Atom>) -> Self {
        HypGraph(atoms)
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn union(&self, other: &HypGraph) -> HypGraph {
        HypGraph(&self.0 | &other.0)
    }

    /// Constants appearing anywhere in the graph.
    pub fn nodes(&self) -> BTreeSet<&Constant> {
        self.0.iter().flat_map(Atom::constants).collect()
    }

    /// Binary atoms as labeled edges.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &Term, &Term)> {
        self.0
            .iter()
            .filter(|a| a.arity() == 2)
            .map(|a| (a.predicate.as_str(), &a.args[0], &a.args[1]))
    }

    /// Unary atoms as node labels.
    pub fn node_labels(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.0
            .iter()
            .filter(|a| a.arity() == 1)
            .map(|a| (a.predicate.as_str(), &a.args[0]))
    }

    pub fn is_ground(&self) -> bool {
        self.0.iter().all(Atom::is_ground)
    }
}

impl FromIterator<Atom> for HypGraph {
    fn from_iter<T: IntoIterator<Item = Atom>>(iter: T) -> Self {
        HypGraph(iter.into_iter().collect())
    }
}

impl fmt::Display for HypGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

// ---------------------------------------------------------------------------
// Name and atom similarity
// ---------------------------------------------------------------------------

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized edit similarity, overridden to 1 by the synonym table.
pub fn name_similarity<S: Scalar>(a: &str, b: &str, synonyms: &SynonymTable) -> S {
    if a == b || synonyms.is_synonym(a, b) {
        return S::one();
    }
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return S::one();
    }
    let d = levenshtein(a, b);
    S::one() - from_usize::<S>(d) / from_usize::<S>(max_len)
}

/// Weighted combination with an exact short-circuit so perfect matches are
/// exactly 1 regardless of float rounding in the weights.
fn combine<S: Scalar>(cfg: &SimilarityConfig<S>, pred_term: S, struct_term: S) -> S {
    if pred_term == S::one() && struct_term == S::one() {
        S::one()
    } else {
        cfg.predicate_weight * pred_term + cfg.structure_weight * struct_term
    }
}

/// Similarity of a (possibly open) query atom to a ground atom: predicate
/// name similarity weighted against argument agreement. Variables agree with
/// anything; constants compare by name similarity. Arity must match.
pub fn atom_similarity<S: Scalar>(pattern: &Atom, ground: &Atom, cfg: &SimilarityConfig<S>) -> S {
    if pattern.arity() != ground.arity() {
        return S::zero();
    }
    let pred = name_similarity(&pattern.predicate, &ground.predicate, &cfg.synonyms);
    let args = if pattern.args.is_empty() {
        S::one()
    } else {
        let mut total = S::zero();
        for (p, g) in pattern.args.iter().zip(&ground.args) {
            total = total
                + match (p, g) {
                    (Term::Var(_), _) => S::one(),
                    (Term::Const(c), Term::Const(d)) => {
                        name_similarity(c.label(), d.label(), &cfg.synonyms)
                    }
                    _ => S::zero(),
                };
        }
        total / from_usize(pattern.args.len())
    };
    combine(cfg, pred, args)
}

// ---------------------------------------------------------------------------
// Graph similarity
// ---------------------------------------------------------------------------

fn best_atom_match<S: Scalar>(atom: &Atom, others: &HypGraph, cfg: &SimilarityConfig<S>) -> S {
    others
        .atoms()
        .iter()
        .map(|o| {
            if atom == o {
                S::one()
            } else if atom.arity() == o.arity() {
                // same formula as atom_similarity with both sides fixed
                let pred = name_similarity::<S>(&atom.predicate, &o.predicate, &cfg.synonyms);
                let args = if atom.args.is_empty() {
                    S::one()
                } else {
                    let mut total = S::zero();
                    for (x, y) in atom.args.iter().zip(&o.args) {
                        total = total
                            + match (x, y) {
                                (Term::Const(a), Term::Const(b)) => {
                                    name_similarity(a.label(), b.label(), &cfg.synonyms)
                                }
                                (x, y) if x == y => S::one(),
                                _ => S::zero(),
                            };
                    }
                    total / from_usize(atom.args.len())
                };
                combine(cfg, pred, args)
            } else {
                S::zero()
            }
        })
        .fold(S::zero(), |acc, v| if v > acc { v } else { acc })
}

/// Mean best-match predicate/argument similarity, symmetric over both
/// directions.
fn predicate_term<S: Scalar>(g: &HypGraph, g2: &HypGraph, cfg: &SimilarityConfig<S>) -> S {
    let total_atoms = g.len() + g2.len();
    if total_atoms == 0 {
        return S::one();
    }
    let mut total = S::zero();
    for atom in g.atoms() {
        total = total + best_atom_match(atom, g2, cfg);
    }
    for atom in g2.atoms() {
        total = total + best_atom_match(atom, g, cfg);
    }
    total / from_usize(total_atoms)
}

fn rename_graph(g: &HypGraph, mapping: &BTreeMap<Constant, Constant>) -> BTreeSet<Atom> {
    g.atoms()
        .iter()
        .map(|atom| Atom {
            predicate: atom.predicate.clone(),
            args: atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => match mapping.get(c) {
                        Some(to) => Term::Const(to.clone()),
                        None => t.clone(),
                    },
                    other => other.clone(),
                })
                .collect(),
        })
        .collect()
}

fn jaccard<S: Scalar>(a: &BTreeSet<Atom>, b: &BTreeSet<Atom>) -> S {
    let union = a.union(b).count();
    if union == 0 {
        return S::one();
    }
    let inter = a.intersection(b).count();
    from_usize::<S>(inter) / from_usize::<S>(union)
}

/// Jaccard of the atom sets under the best injective constant
/// correspondence. Falls back to the identity correspondence when the
/// search space exceeds the budget.
fn structure_term<S: Scalar>(g: &HypGraph, g2: &HypGraph) -> S {
    // Canonical orientation keeps the value symmetric.
    let (x, y) = if g.atoms() <= g2.atoms() { (g, g2) } else { (g2, g) };
    let x_consts: Vec<Constant> = x.nodes().into_iter().cloned().collect();
    let y_consts: Vec<Constant> = y.nodes().into_iter().cloned().collect();
    let identity = jaccard::<S>(x.atoms(), y.atoms());
    if x_consts.is_empty() {
        return identity;
    }
    let mut best = identity;
    let mut budget = CORRESPONDENCE_BUDGET;
    let mut mapping: BTreeMap<Constant, Constant> = BTreeMap::new();
    let mut used: BTreeSet<Constant> = BTreeSet::new();
    assign(
        x,
        y,
        &x_consts,
        &y_consts,
        0,
        &mut mapping,
        &mut used,
        &mut best,
        &mut budget,
    );
    best
}

#[allow(clippy::too_many_arguments)]
fn assign<S: Scalar>(
    x: &HypGraph,
    y: &HypGraph,
    x_consts: &[Constant],
    y_consts: &[Constant],
    pos: usize,
    mapping: &mut BTreeMap<Constant, Constant>,
    used: &mut BTreeSet<Constant>,
    best: &mut S,
    budget: &mut usize,
) {
    if *budget == 0 {
        return;
    }
    if pos == x_consts.len() {
        *budget -= 1;
        let renamed = rename_graph(x, mapping);
        let value = jaccard::<S>(&renamed, y.atoms());
        if value > *best {
            *best = value;
        }
        return;
    }
    let source = &x_consts[pos];
    // keep the constant as-is
    assign(x, y, x_consts, y_consts, pos + 1, mapping, used, best, budget);
    for target in y_consts {
        if target == source || used.contains(target) {
            continue;
        }
        mapping.insert(source.clone(), target.clone());
        used.insert(target.clone());
        assign(x, y, x_consts, y_consts, pos + 1, mapping, used, best, budget);
        mapping.remove(source);
        used.remove(target);
    }
}

/// The metric without the consistency cap; safe on open (query) graphs.
pub fn raw_similarity<S: Scalar>(g: &HypGraph, g2: &HypGraph, cfg: &SimilarityConfig<S>) -> S {
    combine(cfg, predicate_term(g, g2, cfg), structure_term(g, g2))
}

/// The similarity metric over ground graphs.
///
/// Returns 1 only when the graphs match perfectly *and* their union passes
/// the consistency check; an inconsistent union is capped at `1 - 2^-16`,
/// preserving the ordering among such pairs. Open graphs (with variables or
/// constants outside the grounded KB) skip the cap.
pub fn similarity<S: Scalar>(
    g: &HypGraph,
    g2: &HypGraph,
    cfg: &SimilarityConfig<S>,
    metric: SimilarityMetric,
    gkb: &GroundedKB,
) -> S {
    let value = match metric {
        SimilarityMetric::Equivalence => {
            if g == g2 {
                S::one()
            } else {
                S::zero()
            }
        }
        SimilarityMetric::Weighted => raw_similarity(g, g2, cfg),
    };
    let union = g.union(g2);
    if union.is_ground() && !gkb.cons(union.atoms()) {
        let cap = S::one() - from_f64::<S>(INCONSISTENCY_DELTA);
        if value > cap {
            return cap;
        }
    }
    value
}

// ---------------------------------------------------------------------------
// Approximate matching
// ---------------------------------------------------------------------------

/// One approximate answer: the matched body subgraph supporting a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxHit<S: Scalar> {
    pub candidate: Candidate,
    pub hypothesis: Hypothesis<S>,
}

/// Match a compiled query against the grounded KB, tolerating imperfect
/// predicate and constant names.
///
/// Per query atom, ground atoms with atom-level similarity at or above
/// `theta_r` are candidates; consistent variable bindings are assembled by a
/// backtracking join (most selective atom first); each assembled body is
/// scored against the grounded query body with the full metric and filtered
/// by the consistency check; the top `k` by score survive.
pub fn approx_match<S: Scalar>(
    gkb: &GroundedKB,
    cq: &CompiledQuery<S>,
    cfg: &SimilarityConfig<S>,
    k: usize,
) -> Vec<ApproxHit<S>> {
    let mut hits = approx_match_unbounded(gkb, cq, cfg);
    hits.truncate(k);
    hits
}

/// As [`approx_match`] without the top-k truncation (every hit clearing
/// `theta_r` and the consistency check, ranked).
pub fn approx_match_unbounded<S: Scalar>(
    gkb: &GroundedKB,
    cq: &CompiledQuery<S>,
    cfg: &SimilarityConfig<S>,
) -> Vec<ApproxHit<S>> {
    let query = &cq.query;
    // Candidate ground atoms per query atom, thresholded by theta_r.
    let mut candidates: Vec<(usize, Vec<&Atom>)> = Vec::with_capacity(query.body.len());
    for (i, pattern) in query.body.iter().enumerate() {
        let mut list: Vec<(&Atom, S)> = gkb
            .atoms
            .iter()
            .filter(|a| !a.is_bot())
            .filter_map(|a| {
                let sim = atom_similarity(pattern, a, cfg);
                (sim >= cfg.theta_r).then_some((a, sim))
            })
            .collect();
        list.sort_by(|(a, sa), (b, sb)| cmp_finite(*sb, *sa).then_with(|| a.cmp(b)));
        candidates.push((i, list.into_iter().map(|(a, _)| a).collect()));
    }
    // Most selective atom first.
    candidates.sort_by_key(|(i, list)| (list.len(), *i));

    let mut assembled: BTreeMap<(BTreeSet<Atom>, Atom), S> = BTreeMap::new();
    let mut chosen: Vec<&Atom> = Vec::with_capacity(candidates.len());
    assemble(
        gkb,
        query,
        cfg,
        &candidates,
        0,
        &Substitution::new(),
        &mut chosen,
        &mut assembled,
    );

    let mut hits: Vec<ApproxHit<S>> = assembled
        .into_iter()
        .map(|((body, head), score)| ApproxHit {
            candidate: Candidate(head),
            hypothesis: Hypothesis {
                body_atoms: body,
                score,
                compiled_error: cq.error,
            },
        })
        .collect();
    hits.sort_by(|a, b| {
        cmp_finite(b.hypothesis.score, a.hypothesis.score)
            .then_with(|| a.hypothesis.body_atoms.cmp(&b.hypothesis.body_atoms))
            .then_with(|| a.candidate.cmp(&b.candidate))
    });
    hits
}

#[allow(clippy::too_many_arguments)]
fn assemble<'a, S: Scalar>(
    gkb: &GroundedKB,
    query: &crate::kb::Query,
    cfg: &SimilarityConfig<S>,
    candidates: &[(usize, Vec<&'a Atom>)],
    pos: usize,
    theta: &Substitution,
    chosen: &mut Vec<&'a Atom>,
    out: &mut BTreeMap<(BTreeSet<Atom>, Atom), S>,
) {
    if pos == candidates.len() {
        let head = apply_atom(&query.head, theta);
        if head.is_bot() || !head.is_ground() {
            return;
        }
        let body: BTreeSet<Atom> = chosen.iter().map(|a| (*a).clone()).collect();
        if !gkb.cons(&body) {
            return;
        }
        let target: HypGraph = query.body.iter().map(|b| apply_atom(b, theta)).collect();
        let body_graph = HypGraph::new(body.clone());
        let score = similarity(&body_graph, &target, cfg, SimilarityMetric::Weighted, gkb);
        let entry = out.entry((body, head)).or_insert(S::zero());
        if score > *entry {
            *entry = score;
        }
        return;
    }
    let (query_pos, list) = &candidates[pos];
    let pattern = &query.body[*query_pos];
    'next: for ground in list {
        let mut next = theta.clone();
        for (p, g) in pattern.args.iter().zip(&ground.args) {
            let Term::Const(value) = g else { continue 'next };
            if let Term::Var(v) = p {
                match next.get(v) {
                    Some(bound) if bound != value => continue 'next,
                    Some(_) => {}
                    None => {
                        next.insert(v.clone(), value.clone());
                    }
                }
            }
            // constant or skolem pattern positions carry no binding; any
            // mismatch was already priced into the atom similarity
        }
        chosen.push(ground);
        assemble(gkb, query, cfg, candidates, pos + 1, &next, chosen, out);
        chosen.pop();
    }
}

// ---------------------------------------------------------------------------
// Clustering and summarization
// ---------------------------------------------------------------------------

/// The information-preserving merge of a cluster of hypothesis graphs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SummaryGraph {
    pub merged: HypGraph,
    pub members: BTreeSet<HypGraph>,
    pub support_counts: BTreeMap<Atom, usize>,
}

/// Default summarization UDF: atom-set union with per-atom multiplicities,
/// members retained verbatim.
pub fn merge_cluster(cluster: &BTreeSet<HypGraph>) -> Result<SummaryGraph, MatchError> {
    if cluster.is_empty() {
        return Err(MatchError::EmptyCluster);
    }
    let mut merged = BTreeSet::new();
    let mut support_counts: BTreeMap<Atom, usize> = BTreeMap::new();
    for graph in cluster {
        for atom in graph.atoms() {
            merged.insert(atom.clone());
            *support_counts.entry(atom.clone()).or_insert(0) += 1;
        }
    }
    Ok(SummaryGraph {
        merged: HypGraph::new(merged),
        members: cluster.clone(),
        support_counts,
    })
}

/// The summary a single pivot generates: its `theta_r`-ball within the
/// ambient set (the pivot always belongs to its own ball), split greedily
/// until the merged graph passes the consistency check.
pub fn pivot_summary<S: Scalar>(
    pivot: &HypGraph,
    ambient: &BTreeSet<HypGraph>,
    cfg: &SimilarityConfig<S>,
    metric: SimilarityMetric,
    gkb: &GroundedKB,
) -> SummaryGraph {
    let mut ball: Vec<(&HypGraph, S)> = ambient
        .iter()
        .filter(|g| *g != pivot)
        .filter_map(|g| {
            let sim = similarity(pivot, g, cfg, metric, gkb);
            (sim > cfg.theta_r).then_some((g, sim))
        })
        .collect();
    loop {
        let cluster: BTreeSet<HypGraph> = std::iter::once(pivot.clone())
            .chain(ball.iter().map(|(g, _)| (*g).clone()))
            .collect();
        let merged: BTreeSet<Atom> = cluster
            .iter()
            .flat_map(|g| g.atoms().iter().cloned())
            .collect();
        if ball.is_empty() || gkb.cons(&merged) {
            return merge_cluster(&cluster).expect("cluster contains the pivot");
        }
        // Drop the member least similar to the pivot and retry.
        let victim = ball
            .iter()
            .enumerate()
            .min_by(|(_, (ga, sa)), (_, (gb, sb))| {
                cmp_finite(*sa, *sb).then_with(|| ga.cmp(gb))
            })
            .map(|(i, _)| i)
            .expect("ball not empty");
        ball.remove(victim);
    }
}

/// Cluster the pivot set by `theta_r`-balls taken in the ambient set and
/// merge each ball; duplicate summaries collapse.
pub fn summarize_within<S: Scalar>(
    pivots: &BTreeSet<HypGraph>,
    ambient: &BTreeSet<HypGraph>,
    cfg: &SimilarityConfig<S>,
    metric: SimilarityMetric,
    gkb: &GroundedKB,
) -> Vec<SummaryGraph> {
    let mut out = BTreeSet::new();
    for pivot in pivots {
        out.insert(pivot_summary(pivot, ambient, cfg, metric, gkb));
    }
    out.into_iter().collect()
}

/// One summary per pivot over its own ball: the clustering-and-summarization
/// step applied to a whole hypothesis set.
pub fn summarize<S: Scalar>(
    graphs: &BTreeSet<HypGraph>,
    cfg: &SimilarityConfig<S>,
    metric: SimilarityMetric,
    gkb: &GroundedKB,
) -> Vec<SummaryGraph> {
    summarize_within(graphs, graphs, cfg, metric, gkb)
}

/// The input graphs whose ball-summary is exactly `s`: the maximal subset
/// G' of `all` with `summarize_within(G', all) = {s}`. Errors when no input
/// reproduces the summary.
pub fn graph_provenance<S: Scalar>(
    s: &SummaryGraph,
    all: &BTreeSet<HypGraph>,
    cfg: &SimilarityConfig<S>,
    metric: SimilarityMetric,
    gkb: &GroundedKB,
) -> Result<BTreeSet<HypGraph>, MatchError> {
    let pivots: BTreeSet<HypGraph> = all
        .iter()
        .filter(|g| &pivot_summary(g, all, cfg, metric, gkb) == s)
        .cloned()
        .collect();
    if pivots.is_empty() {
        return Err(MatchError::ProvenanceMiss);
    }
    Ok(pivots)
}
