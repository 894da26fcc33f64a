//! Query answering over the grounded KB: consistent unifications, candidate
//! answers, hypotheses and their summaries, the justification map, schema
//! alignment, and the query compiler that generalizes exact unification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::config::{EngineConfig, SimilarityConfig, SimilarityMetric};
use crate::grounding::{apply_atom, unify_body, GroundedKB};
use crate::kb::{body_variables, Atom, Constant, KnowledgeBase, Query, Term};
use crate::matching::{
    approx_match, name_similarity, raw_similarity, summarize_within, HypGraph, SummaryGraph,
};
use crate::scalar::{cmp_finite, Scalar};

/// A query variant produced by the compiler, with its interpretation error.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledQuery<S: Scalar> {
    pub query: Query,
    /// Interpretation error in [0, 1]; 0 for the identity compilation.
    pub error: S,
    /// Which compiler step produced it.
    pub origin: String,
}

/// A ground head instance some unification produced; never the
/// contradiction atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Candidate(pub Atom);

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A consistent grounded query body supporting a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<S: Scalar> {
    pub body_atoms: BTreeSet<Atom>,
    /// Similarity of the matched body to the query; 1 for exact matches.
    pub score: S,
    /// Interpretation error of the compiled query that produced the match.
    pub compiled_error: S,
}

/// A summary with the match qualities of its member hypotheses, `(score,
/// error)` per member in member order; the world likelihood is computed
/// from these.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSummary<S: Scalar> {
    pub graph: SummaryGraph,
    pub matches: Vec<(S, S)>,
}

// ---------------------------------------------------------------------------
// Exact unification
// ---------------------------------------------------------------------------

/// Every grounding of the query whose body passes the consistency check,
/// as `(grounded body, grounded head)` pairs.
pub fn consistent_unifications(
    gkb: &GroundedKB,
    q: &Query,
) -> BTreeSet<(BTreeSet<Atom>, Atom)> {
    let mut out = BTreeSet::new();
    for theta in unify_body(&gkb.atoms, &q.body) {
        let body: BTreeSet<Atom> = q.body.iter().map(|b| apply_atom(b, &theta)).collect();
        let head = apply_atom(&q.head, &theta);
        if head.is_bot() {
            continue;
        }
        if gkb.cons(&body) {
            out.insert((body, head));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Compiler context and unifier selection
// ---------------------------------------------------------------------------

/// Everything the compiler needs: the schema and domain to align against,
/// the similarity settings, and the variant caps.
pub struct CompileContext<'a, S: Scalar> {
    pub kb: &'a KnowledgeBase<S>,
    pub gkb: &'a GroundedKB,
    pub sim: &'a SimilarityConfig<S>,
    pub ground_universals: bool,
    pub max_variants: usize,
}

impl<'a, S: Scalar> CompileContext<'a, S> {
    pub fn new(kb: &'a KnowledgeBase<S>, gkb: &'a GroundedKB, cfg: &'a EngineConfig<S>) -> Self {
        CompileContext {
            kb,
            gkb,
            sim: &cfg.similarity,
            ground_universals: cfg.ground_universals,
            max_variants: cfg.max_variants,
        }
    }
}

/// Which unification algorithm generates candidates and hypotheses.
pub enum Unifier<'a, S: Scalar> {
    /// Plain exact unification of the input query.
    Exact,
    /// Exact unification of every compiled variant (compiler generalization).
    Compiled(&'a CompileContext<'a, S>),
    /// Approximate matching of every compiled variant; `usize` is the
    /// per-variant top-k.
    Approx(&'a CompileContext<'a, S>, usize),
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SymbolKind {
    Predicate,
    Constant,
}

/// A rewrite correspondence from a query symbol to a KB symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence<S: Scalar> {
    pub kind: SymbolKind,
    pub from: String,
    pub to: String,
    pub sim: S,
}

/// Correspondences from query predicates/constants to KB schema
/// predicates/constants: synonym-table entries (similarity 1) plus
/// normalized-string-similarity matches at or above the threshold.
/// Predicates only correspond at equal arity.
pub fn align<S: Scalar>(
    queries: &[Query],
    kb: &KnowledgeBase<S>,
    sim_cfg: &SimilarityConfig<S>,
) -> Vec<Correspondence<S>> {
    let mut query_preds: BTreeMap<&str, usize> = BTreeMap::new();
    let mut query_consts: BTreeSet<&Constant> = BTreeSet::new();
    for q in queries {
        for atom in &q.body {
            query_preds.entry(&atom.predicate).or_insert(atom.arity());
            query_consts.extend(atom.constants());
        }
        query_consts.extend(q.head.constants());
    }
    let domain = kb.domain();

    let mut out = Vec::new();
    for (pred, arity) in &query_preds {
        for (schema_pred, schema_arity) in &kb.predicates {
            if schema_pred == crate::kb::BOT_PREDICATE || schema_arity != arity {
                continue;
            }
            let sim = name_similarity::<S>(pred, schema_pred, &sim_cfg.synonyms);
            if sim >= sim_cfg.theta_r {
                out.push(Correspondence {
                    kind: SymbolKind::Predicate,
                    from: pred.to_string(),
                    to: schema_pred.clone(),
                    sim,
                });
            }
        }
    }
    for from in &query_consts {
        for to in &domain {
            let sim = name_similarity::<S>(from.label(), to.label(), &sim_cfg.synonyms);
            if sim >= sim_cfg.theta_r {
                out.push(Correspondence {
                    kind: SymbolKind::Constant,
                    from: from.label().to_string(),
                    to: to.label().to_string(),
                    sim,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        (a.kind, &a.from, &a.to)
            .cmp(&(b.kind, &b.from, &b.to))
            .then_with(|| cmp_finite(b.sim, a.sim))
    });
    out
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

fn rewrite_query(q: &Query, choice: &[&Correspondence<impl Scalar>]) -> Query {
    let pred_map: BTreeMap<&str, &str> = choice
        .iter()
        .filter(|c| c.kind == SymbolKind::Predicate)
        .map(|c| (c.from.as_str(), c.to.as_str()))
        .collect();
    let const_map: BTreeMap<&str, &str> = choice
        .iter()
        .filter(|c| c.kind == SymbolKind::Constant)
        .map(|c| (c.from.as_str(), c.to.as_str()))
        .collect();
    let rewrite_term = |t: &Term| match t {
        Term::Const(c) => match const_map.get(c.label()) {
            Some(to) => Term::Const(Constant::new(*to).expect("correspondence target non-empty")),
            None => t.clone(),
        },
        other => other.clone(),
    };
    let rewrite_atom = |a: &Atom, rename_pred: bool| Atom {
        predicate: if rename_pred {
            pred_map
                .get(a.predicate.as_str())
                .map(|p| p.to_string())
                .unwrap_or_else(|| a.predicate.clone())
        } else {
            a.predicate.clone()
        },
        args: a.args.iter().map(rewrite_term).collect(),
    };
    Query {
        body: q.body.iter().map(|a| rewrite_atom(a, true)).collect(),
        // the head predicate is the answer slot, never a KB symbol
        head: rewrite_atom(&q.head, false),
    }
}

/// Compile a query into executable variants.
///
/// Always contains the identity compilation with error 0. Adds schema
/// alignment rewrites (each combination of applicable correspondences),
/// groundings of body-only variables over the KB domain when enabled, and
/// their compositions. A rewrite's error is `1 - sim` of the original query
/// graph against the rewritten one; groundings inherit their parent's error.
pub fn compile<S: Scalar>(q: &Query, ctx: &CompileContext<'_, S>) -> Vec<CompiledQuery<S>> {
    let q_graph: HypGraph = q.body.iter().cloned().collect();
    let mut variants: Vec<CompiledQuery<S>> = vec![CompiledQuery {
        query: q.clone(),
        error: S::zero(),
        origin: "identity".into(),
    }];

    // Scenario 1: schema-alignment rewrites.
    let correspondences: Vec<Correspondence<S>> =
        align(std::slice::from_ref(q), ctx.kb, ctx.sim)
            .into_iter()
            .filter(|c| c.from != c.to)
            .collect();
    // Group the options per rewritten symbol and take every combination.
    let mut grouped: BTreeMap<(SymbolKind, String), Vec<Correspondence<S>>> = BTreeMap::new();
    for c in correspondences {
        grouped
            .entry((c.kind, c.from.clone()))
            .or_default()
            .push(c);
    }
    let groups: Vec<Vec<Correspondence<S>>> = grouped.into_values().collect();
    let mut combos: Vec<Vec<&Correspondence<S>>> = vec![Vec::new()];
    for group in &groups {
        let mut next = Vec::new();
        for combo in &combos {
            next.push(combo.clone()); // leave this symbol alone
            for option in group {
                let mut extended = combo.clone();
                extended.push(option);
                next.push(extended);
            }
            if next.len() > ctx.max_variants * 4 {
                break;
            }
        }
        combos = next;
    }
    for combo in combos.iter().filter(|c| !c.is_empty()) {
        let rewritten = rewrite_query(q, combo);
        let sim = raw_similarity(
            &q_graph,
            &rewritten.body.iter().cloned().collect(),
            ctx.sim,
        );
        let mut error = S::one() - sim;
        if error < S::zero() {
            error = S::zero();
        }
        let origin: Vec<String> = combo
            .iter()
            .map(|c| format!("align:{}->{}", c.from, c.to))
            .collect();
        variants.push(CompiledQuery {
            query: rewritten,
            error,
            origin: origin.join("+"),
        });
    }

    // Scenario 2 (and compositions): ground body-only variables over the
    // domain of the grounded KB. Grounding preserves meaning, so these keep
    // their parent's error.
    if ctx.ground_universals {
        let domain: Vec<Constant> = ctx
            .gkb
            .atoms
            .iter()
            .flat_map(Atom::constants)
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut grounded = Vec::new();
        for variant in &variants {
            let head_vars = variant.query.head.variables();
            let bound: Vec<String> = body_variables(&variant.query.body)
                .into_iter()
                .filter(|v| !head_vars.contains(v))
                .map(String::from)
                .collect();
            if bound.is_empty() || domain.is_empty() {
                continue;
            }
            let mut assignments: Vec<BTreeMap<String, Constant>> = vec![BTreeMap::new()];
            for var in &bound {
                let mut next = Vec::new();
                for partial in &assignments {
                    for value in &domain {
                        let mut extended = partial.clone();
                        extended.insert(var.clone(), value.clone());
                        next.push(extended);
                    }
                }
                if next.len() > ctx.max_variants * 4 {
                    next.truncate(ctx.max_variants * 4);
                }
                assignments = next;
            }
            for theta in assignments {
                let body: Vec<Atom> = variant
                    .query
                    .body
                    .iter()
                    .map(|a| apply_atom(a, &theta))
                    .collect();
                let bindings: Vec<String> =
                    theta.iter().map(|(v, c)| format!("{v}={c}")).collect();
                grounded.push(CompiledQuery {
                    query: Query {
                        body,
                        head: variant.query.head.clone(),
                    },
                    error: variant.error,
                    origin: format!("{}+ground:{}", variant.origin, bindings.join(",")),
                });
            }
        }
        variants.extend(grounded);
    }

    // Deduplicate identical variants keeping the smallest error, order by
    // (error, body, origin), and respect the cap.
    let mut best: BTreeMap<Query, CompiledQuery<S>> = BTreeMap::new();
    for variant in variants {
        match best.get(&variant.query) {
            Some(existing)
                if cmp_finite(existing.error, variant.error) != std::cmp::Ordering::Greater => {}
            _ => {
                best.insert(variant.query.clone(), variant);
            }
        }
    }
    let mut out: Vec<CompiledQuery<S>> = best.into_values().collect();
    out.sort_by(|a, b| {
        cmp_finite(a.error, b.error)
            .then_with(|| a.query.cmp(&b.query))
            .then_with(|| a.origin.cmp(&b.origin))
    });
    out.truncate(ctx.max_variants.max(1));
    out
}

/// The compiler generalization: the union over all compiled variants of
/// their consistent unifications, each tagged with the variant's error;
/// duplicates keep the smallest error.
pub fn unify_compiled<S: Scalar>(
    gkb: &GroundedKB,
    q: &Query,
    ctx: &CompileContext<'_, S>,
) -> Vec<(BTreeSet<Atom>, Atom, S)> {
    let mut best: BTreeMap<(BTreeSet<Atom>, Atom), S> = BTreeMap::new();
    for cq in compile(q, ctx) {
        for (body, head) in consistent_unifications(gkb, &cq.query) {
            let entry = best.entry((body, head)).or_insert(cq.error);
            if cq.error < *entry {
                *entry = cq.error;
            }
        }
    }
    best.into_iter()
        .map(|((body, head), error)| (body, head, error))
        .collect()
}

// ---------------------------------------------------------------------------
// Candidates, hypotheses, justification
// ---------------------------------------------------------------------------

/// Match qualities per candidate: body graph -> (score, error), keeping the
/// best quality per body.
fn evidence<S: Scalar>(
    gkb: &GroundedKB,
    q: &Query,
    unifier: &Unifier<'_, S>,
) -> BTreeMap<Candidate, BTreeMap<HypGraph, (S, S)>> {
    let mut out: BTreeMap<Candidate, BTreeMap<HypGraph, (S, S)>> = BTreeMap::new();
    let mut record = |head: Atom, body: BTreeSet<Atom>, score: S, error: S| {
        let graph = HypGraph::new(body);
        let per_body = out.entry(Candidate(head)).or_default();
        let entry = per_body.entry(graph).or_insert((score, error));
        let quality = |(s, e): (S, S)| (S::one() - e) * s;
        if quality((score, error)) > quality(*entry)
            || (quality((score, error)) == quality(*entry) && error < entry.1)
        {
            *entry = (score, error);
        }
    };
    match unifier {
        Unifier::Exact => {
            for (body, head) in consistent_unifications(gkb, q) {
                record(head, body, S::one(), S::zero());
            }
        }
        Unifier::Compiled(ctx) => {
            for (body, head, error) in unify_compiled(gkb, q, ctx) {
                record(head, body, S::one(), error);
            }
        }
        Unifier::Approx(ctx, k) => {
            for cq in compile(q, ctx) {
                for hit in approx_match(gkb, &cq, ctx.sim, *k) {
                    record(
                        hit.candidate.0,
                        hit.hypothesis.body_atoms,
                        hit.hypothesis.score,
                        hit.hypothesis.compiled_error,
                    );
                }
            }
        }
    }
    out
}

/// All candidate answers the chosen unification algorithm produces.
pub fn candidates<S: Scalar>(
    gkb: &GroundedKB,
    q: &Query,
    unifier: &Unifier<'_, S>,
) -> BTreeSet<Candidate> {
    evidence(gkb, q, unifier).into_keys().collect()
}

/// The raw (unsummarized) hypotheses supporting a candidate.
pub fn hypotheses_raw<S: Scalar>(
    gkb: &GroundedKB,
    q: &Query,
    candidate: &Candidate,
    unifier: &Unifier<'_, S>,
) -> Vec<Hypothesis<S>> {
    evidence(gkb, q, unifier)
        .remove(candidate)
        .map(|per_body| {
            per_body
                .into_iter()
                .map(|(graph, (score, error))| Hypothesis {
                    body_atoms: graph.atoms().clone(),
                    score,
                    compiled_error: error,
                })
                .collect()
        })
        .unwrap_or_default()
}

fn summarize_candidate<S: Scalar>(
    gkb: &GroundedKB,
    per_body: BTreeMap<HypGraph, (S, S)>,
    sim_cfg: &SimilarityConfig<S>,
    metric: SimilarityMetric,
) -> Vec<ScoredSummary<S>> {
    let graphs: BTreeSet<HypGraph> = per_body.keys().cloned().collect();
    summarize_within(&graphs, &graphs, sim_cfg, metric, gkb)
        .into_iter()
        .map(|summary| {
            let matches: Vec<(S, S)> = summary
                .members
                .iter()
                .map(|m| per_body.get(m).copied().unwrap_or((S::zero(), S::zero())))
                .collect();
            ScoredSummary {
                graph: summary,
                matches,
            }
        })
        .collect()
}

/// The summarized hypotheses for one candidate. With the equivalence
/// similarity the summaries are exactly the raw hypotheses, one singleton
/// each.
pub fn hypotheses<S: Scalar>(
    gkb: &GroundedKB,
    q: &Query,
    candidate: &Candidate,
    unifier: &Unifier<'_, S>,
    sim_cfg: &SimilarityConfig<S>,
    metric: SimilarityMetric,
) -> Vec<ScoredSummary<S>> {
    evidence(gkb, q, unifier)
        .remove(candidate)
        .map(|per_body| summarize_candidate(gkb, per_body, sim_cfg, metric))
        .unwrap_or_default()
}

/// The justification map: every candidate paired with its summarized
/// hypotheses. Keys are exactly the candidate set and every value is
/// non-empty.
pub fn justify<S: Scalar>(
    gkb: &GroundedKB,
    q: &Query,
    unifier: &Unifier<'_, S>,
    sim_cfg: &SimilarityConfig<S>,
    metric: SimilarityMetric,
) -> BTreeMap<Candidate, Vec<ScoredSummary<S>>> {
    evidence(gkb, q, unifier)
        .into_iter()
        .map(|(candidate, per_body)| {
            let summaries = summarize_candidate(gkb, per_body, sim_cfg, metric);
            (candidate, summaries)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EngineConfig;
    use crate::grounding::{ground_fixpoint_with_provenance, GroundingConfig};
    use crate::parse::{parse_kb, parse_query};

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

    #[test]
    fn exact_unification_on_tweety() {
        let (_, gkb) = grounded(TWEETY);
        let q = parse_query("answer(X) :- bird(X).").unwrap();
        let got = consistent_unifications(&gkb, &q);
        assert_eq!(got.len(), 1);
        let (body, head) = got.iter().next().unwrap();
        assert_eq!(head.to_string(), "answer(tweety)");
        let names: Vec<String> = body.iter().map(|a| a.to_string()).collect();
        assert_eq!(names, vec!["bird(tweety)"]);
    }

    #[test]
    fn unification_failing_cons_is_dropped() {
        let (_, gkb) = grounded(TWEETY);
        let q = parse_query("answer(X) :- flies(X), notflies(X).").unwrap();
        // the match exists but its body embeds the minimal inconsistent subset
        assert!(consistent_unifications(&gkb, &q).is_empty());
    }

    #[test]
    fn empty_grounded_kb_unifies_to_nothing() {
        let (_, gkb) = grounded("");
        let q = parse_query("answer(X) :- bird(X).").unwrap();
        assert!(consistent_unifications(&gkb, &q).is_empty());
    }

    #[test]
    fn candidates_project_heads() {
        let (_, gkb) = grounded(TWEETY);
        let q = parse_query("answer(X) :- bird(X).").unwrap();
        let got = candidates(&gkb, &q, &Unifier::<f64>::Exact);
        assert_eq!(got.len(), 1);
        assert_eq!(got.iter().next().unwrap().to_string(), "answer(tweety)");
    }

    #[test]
    fn candidates_on_a_chain_join() {
        let (_, gkb) = grounded("p(a,b)\np(b,c)");
        let q = parse_query("answer(X,Z) :- p(X,Y), p(Y,Z).").unwrap();
        let got = candidates(&gkb, &q, &Unifier::<f64>::Exact);
        let names: Vec<String> = got.iter().map(|c| c.to_string()).collect();
        assert_eq!(names, vec!["answer(a,c)"]);
    }

    #[test]
    fn inconsistent_only_matches_produce_no_candidates() {
        let (_, gkb) = grounded("p(a)\nq(a)\nbot :- p(X), q(X). w=hard");
        let q = parse_query("answer(X) :- p(X), q(X).").unwrap();
        assert!(candidates(&gkb, &q, &Unifier::<f64>::Exact).is_empty());
    }

    #[test]
    fn hypotheses_for_tweety_candidate() {
        let (_, gkb) = grounded(TWEETY);
        let q = parse_query("answer(X) :- bird(X).").unwrap();
        let candidate = Candidate(
            parse_kb::<f64>("answer(tweety)").unwrap().facts[0].atom.clone(),
        );
        let sim = SimilarityConfig::default();
        let got = hypotheses(
            &gkb,
            &q,
            &candidate,
            &Unifier::<f64>::Exact,
            &sim,
            SimilarityMetric::Equivalence,
        );
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].matches, vec![(1.0, 0.0)]);
        assert_eq!(got[0].graph.merged.to_string(), "{bird(tweety)}");
    }

    #[test]
    fn unknown_candidate_has_no_hypotheses() {
        let (_, gkb) = grounded(TWEETY);
        let q = parse_query("answer(X) :- bird(X).").unwrap();
        let ghost = Candidate(
            parse_kb::<f64>("answer(nobody)").unwrap().facts[0]
                .atom
                .clone(),
        );
        let sim = SimilarityConfig::default();
        let got = hypotheses(
            &gkb,
            &q,
            &ghost,
            &Unifier::<f64>::Exact,
            &sim,
            SimilarityMetric::Equivalence,
        );
        assert!(got.is_empty());
    }

    #[test]
    fn justify_keys_equal_candidates_and_values_nonempty() {
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
        let cands = candidates(&gkb, &q, &Unifier::<f64>::Exact);
        assert_eq!(j.keys().cloned().collect::<BTreeSet<_>>(), cands);
        assert!(j.values().all(|v| !v.is_empty()));
    }

    #[test]
    fn justify_empty_when_no_candidates() {
        let (_, gkb) = grounded("p(a)");
        let q = parse_query("answer(X) :- q(X).").unwrap();
        let sim = SimilarityConfig::default();
        let j = justify(
            &gkb,
            &q,
            &Unifier::<f64>::Exact,
            &sim,
            SimilarityMetric::Equivalence,
        );
        assert!(j.is_empty());
    }

    #[test]
    fn diamond_candidate_has_two_hypotheses() {
        let (_, gkb) = grounded("edge(top,left)\nedge(top,right)\nedge(left,bottom)\nedge(right,bottom)");
        let q = parse_query("answer(X,Z) :- edge(X,Y), edge(Y,Z).").unwrap();
        let sim = SimilarityConfig::default();
        let j = justify(
            &gkb,
            &q,
            &Unifier::<f64>::Exact,
            &sim,
            SimilarityMetric::Equivalence,
        );
        assert_eq!(j.len(), 1);
        let (candidate, summaries) = j.iter().next().unwrap();
        assert_eq!(candidate.to_string(), "answer(top,bottom)");
        assert_eq!(summaries.len(), 2);
    }

    #[test]
    fn compile_identity_only_without_alignment_material() {
        let (kb, gkb) = grounded("p(a)");
        let cfg = EngineConfig::<f64>::default();
        let ctx = CompileContext::new(&kb, &gkb, &cfg);
        let q = parse_query("answer(X) :- p(X).").unwrap();
        let variants = compile(&q, &ctx);
        // exact predicate yields only the identity correspondence
        assert_eq!(variants.len(), 1);
        assert_eq!(variants[0].error, 0.0);
        assert_eq!(variants[0].origin, "identity");
        assert_eq!(variants[0].query, q);
    }

    #[test]
    fn compile_synonym_rewrite_carries_similarity_error() {
        let (kb, gkb) = grounded("bornIn(ray,alton)");
        let mut cfg = EngineConfig::<f64>::default();
        cfg.similarity.synonyms =
            crate::config::SynonymTable::from_pairs([("birthPlace", "bornIn")]);
        let ctx = CompileContext::new(&kb, &gkb, &cfg);
        let q = parse_query("answer(U) :- birthPlace(X,U).").unwrap();
        let variants = compile(&q, &ctx);
        assert_eq!(variants.len(), 2);
        assert_eq!(variants[0].error, 0.0);
        let rewritten = &variants[1];
        assert_eq!(rewritten.query.body[0].predicate, "bornIn");
        // error = 1 - raw similarity of the two query graphs
        let expected = 1.0
            - raw_similarity::<f64>(
                &q.body.iter().cloned().collect(),
                &rewritten.query.body.iter().cloned().collect(),
                &cfg.similarity,
            );
        assert!((rewritten.error - expected).abs() < 1e-12);
        assert!(rewritten.error > 0.0);
    }

    #[test]
    fn compile_grounds_body_only_universals() {
        let (kb, gkb) = grounded("p(a,x)\np(b,y)\nq(a)\nq(b)");
        let mut cfg = EngineConfig::<f64>::default();
        cfg.ground_universals = true;
        let ctx = CompileContext::new(&kb, &gkb, &cfg);
        let q = parse_query("answer(Y) :- p(X,Y), q(X).").unwrap();
        let variants = compile(&q, &ctx);
        // identity + one variant per domain constant binding X
        let grounded: Vec<&CompiledQuery<f64>> = variants
            .iter()
            .filter(|v| v.origin.contains("ground:"))
            .collect();
        assert_eq!(grounded.len(), 4); // D = {a, b, x, y}
        assert!(grounded.iter().all(|v| v.error == 0.0));
        assert!(grounded
            .iter()
            .any(|v| v.origin == "identity+ground:X=a"));
    }

    #[test]
    fn unify_compiled_reduces_to_exact_for_identity_compiler() {
        let (kb, gkb) = grounded(TWEETY);
        let cfg = EngineConfig::<f64>::default();
        let ctx = CompileContext::new(&kb, &gkb, &cfg);
        let q = parse_query("answer(X) :- bird(X).").unwrap();
        let via_compiler: BTreeSet<(BTreeSet<Atom>, Atom)> = unify_compiled(&gkb, &q, &ctx)
            .into_iter()
            .map(|(b, h, e)| {
                assert_eq!(e, 0.0);
                (b, h)
            })
            .collect();
        assert_eq!(via_compiler, consistent_unifications(&gkb, &q));
    }

    #[test]
    fn unify_compiled_reaches_through_alignment() {
        let (kb, gkb) = grounded("convictedOfKilling(ray,mlk)\nbirthPlace(ray,alton)");
        let cfg = EngineConfig::<f64>::default();
        let ctx = CompileContext::new(&kb, &gkb, &cfg);
        let q = parse_query("answer(U) :- birthPlace(X,U), convictedKiller(X, mlk).").unwrap();
        let got = unify_compiled(&gkb, &q, &ctx);
        assert_eq!(got.len(), 1);
        let (_, head, error) = &got[0];
        assert_eq!(head.to_string(), "answer(alton)");
        assert!(*error > 0.0);
    }

    #[test]
    fn unify_compiled_empty_when_every_variant_fails() {
        let (kb, gkb) = grounded("zzzz(a)");
        let cfg = EngineConfig::<f64>::default();
        let ctx = CompileContext::new(&kb, &gkb, &cfg);
        let q = parse_query("answer(X) :- pppp(X,Y).").unwrap();
        assert!(unify_compiled(&gkb, &q, &ctx).is_empty());
    }

    #[test]
    fn align_finds_exact_synonym_and_edit_matches() {
        let (kb, _) = grounded("birthPlace(ray,alton)\nq(a)");
        let mut sim_cfg = SimilarityConfig::<f64>::default();
        sim_cfg.synonyms = crate::config::SynonymTable::from_pairs([("bornIn", "birthPlace")]);
        let q1 = parse_query("answer(U) :- birthPlace(X,U).").unwrap();
        let q2 = parse_query("answer(U) :- bornIn(X,U).").unwrap();
        let q3 = parse_query("answer(U) :- birthplace(X,U).").unwrap();
        let corr = align(&[q1, q2, q3], &kb, &sim_cfg);
        let find = |from: &str, to: &str| {
            corr.iter()
                .find(|c| c.from == from && c.to == to)
                .unwrap_or_else(|| panic!("missing {from}->{to}"))
        };
        assert_eq!(find("birthPlace", "birthPlace").sim, 1.0);
        assert_eq!(find("bornIn", "birthPlace").sim, 1.0);
        let fuzzy = find("birthplace", "birthPlace");
        assert!((fuzzy.sim - 0.9).abs() < 1e-12);
    }
}
