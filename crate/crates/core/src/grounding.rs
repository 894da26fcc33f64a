//! Unification, fixed-point knowledge expansion, why-provenance, and
//! inconsistency bookkeeping.
//!
//! Expansion keeps, next to the growing atom set, a provenance map from each
//! ground atom to the family of base-fact sets sufficient to derive it. When
//! a rule fires, the head atom gains one combined support per choice of body
//! supports (the cross-product combination), so the supports of the
//! contradiction atom are exactly the inconsistent base subsets, and their
//! minimal elements are the minimal inconsistent subsets.
//!
//! Support families are kept as antichains (only subset-minimal sets
//! survive) and are capped; on overflow the smallest sets win.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::kb::{Atom, Constant, KnowledgeBase, Rule, SkolemTerm, Term};
use crate::parse::normalize_term;
use crate::scalar::Scalar;

/// Variable bindings produced by unification.
pub type Substitution = BTreeMap<String, Constant>;

/// A set of base atoms sufficient to derive something.
pub type SupportSet = BTreeSet<Atom>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundError {
    #[error("expansion did not reach a fixed point within {rounds} rounds (iteration cap; check rule safety)")]
    IterationCap { rounds: usize },
}

/// Default round limit; a well-behaved finite KB saturates far below this.
pub const DEFAULT_ITERATION_CAP: usize = 10_000;

/// Default per-atom support-family size.
pub const DEFAULT_SUPPORT_CAP: usize = 64;

/// Limit on support combinations generated by a single rule firing.
const FIRING_PRODUCT_CAP: usize = 10_000;

#[derive(Debug, Clone)]
pub struct GroundingConfig {
    pub support_cap: usize,
    pub iteration_cap: usize,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        GroundingConfig {
            support_cap: DEFAULT_SUPPORT_CAP,
            iteration_cap: DEFAULT_ITERATION_CAP,
        }
    }
}

// ---------------------------------------------------------------------------
// Substitution application
// ---------------------------------------------------------------------------

pub fn apply_term(term: &Term, theta: &Substitution) -> Term {
    match term {
        Term::Const(_) => term.clone(),
        Term::Var(v) => match theta.get(v) {
            Some(c) => Term::Const(c.clone()),
            None => term.clone(),
        },
        Term::Skolem(sk) => normalize_term(Term::Skolem(SkolemTerm {
            id: sk.id,
            args: sk.args.iter().map(|t| apply_term(t, theta)).collect(),
        })),
    }
}

pub fn apply_atom(atom: &Atom, theta: &Substitution) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom.args.iter().map(|t| apply_term(t, theta)).collect(),
    }
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// Parse a ground skolem constant label back into its id and arguments.
/// Labels are the printed form `sk_<id>` or `sk_<id>(arg,...)`.
fn parse_skolem_label(label: &str) -> Option<(u32, Vec<Constant>)> {
    let rest = label.strip_prefix("sk_")?;
    let paren = rest.find('(');
    let (digits, args_text) = match paren {
        Some(i) => (&rest[..i], Some(&rest[i..])),
        None => (rest, None),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let id: u32 = digits.parse().ok()?;
    let Some(args_text) = args_text else {
        return Some((id, Vec::new()));
    };
    let inner = args_text.strip_prefix('(')?.strip_suffix(')')?;
    let mut args = Vec::new();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    let mut current = String::new();
    for c in inner.chars() {
        match c {
            '\\' if in_string && !escaped => {
                escaped = true;
                current.push(c);
                continue;
            }
            '"' if !escaped => in_string = !in_string,
            '(' if !in_string => depth += 1,
            ')' if !in_string => depth = depth.checked_sub(1)?,
            ',' if !in_string && depth == 0 => {
                args.push(unquote_label(&current)?);
                current.clear();
                escaped = false;
                continue;
            }
            _ => {}
        }
        escaped = false;
        current.push(c);
    }
    if in_string || depth != 0 {
        return None;
    }
    args.push(unquote_label(&current)?);
    Some((id, args))
}

fn unquote_label(text: &str) -> Option<Constant> {
    let label = if let Some(stripped) = text.strip_prefix('"') {
        let inner = stripped.strip_suffix('"')?;
        let mut out = String::new();
        let mut escaped = false;
        for c in inner.chars() {
            if escaped {
                out.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else {
                out.push(c);
            }
        }
        out
    } else {
        text.to_string()
    };
    Constant::new(label).ok()
}

/// Match a (possibly open) pattern term against a ground constant, extending
/// the substitution. Skolem patterns match constants whose label is a print
/// of the same skolem id, unifying the arguments recursively.
fn match_term(pattern: &Term, value: &Constant, theta: &mut Substitution) -> bool {
    match pattern {
        Term::Const(c) => c == value,
        Term::Var(v) => match theta.get(v) {
            Some(bound) => bound == value,
            None => {
                theta.insert(v.clone(), value.clone());
                true
            }
        },
        Term::Skolem(_) => match apply_term(pattern, theta) {
            Term::Const(c) => &c == value,
            Term::Skolem(open) => match parse_skolem_label(value.label()) {
                Some((id, args)) if id == open.id && args.len() == open.args.len() => args
                    .iter()
                    .zip(&open.args)
                    .all(|(v, p)| match_term(p, v, theta)),
                _ => false,
            },
            Term::Var(_) => unreachable!("apply_term never returns a bare variable for a skolem"),
        },
    }
}

fn match_atom(pattern: &Atom, ground: &Atom, theta: &Substitution) -> Option<Substitution> {
    if pattern.predicate != ground.predicate || pattern.arity() != ground.arity() {
        return None;
    }
    let mut theta = theta.clone();
    for (p, g) in pattern.args.iter().zip(&ground.args) {
        let Term::Const(value) = g else {
            return None; // ground atoms only hold constants
        };
        if !match_term(p, value, &mut theta) {
            return None;
        }
    }
    Some(theta)
}

struct AtomIndex<'a> {
    by_pred: BTreeMap<&'a str, BTreeMap<usize, Vec<&'a Atom>>>,
}

impl<'a> AtomIndex<'a> {
    fn build(atoms: impl IntoIterator<Item = &'a Atom>) -> Self {
        let mut by_pred: BTreeMap<&'a str, BTreeMap<usize, Vec<&'a Atom>>> = BTreeMap::new();
        for atom in atoms {
            by_pred
                .entry(atom.predicate.as_str())
                .or_default()
                .entry(atom.arity())
                .or_default()
                .push(atom);
        }
        AtomIndex { by_pred }
    }

    fn candidates<'b>(&'b self, pattern: &Atom) -> &'b [&'a Atom] {
        self.by_pred
            .get(pattern.predicate.as_str())
            .and_then(|by_arity| by_arity.get(&pattern.arity()))
            .map(|list| list.as_slice())
            .unwrap_or(&[])
    }
}

fn join(
    index: &AtomIndex<'_>,
    delta: Option<(&BTreeSet<Atom>, usize)>,
    body: &[Atom],
    pos: usize,
    theta: Substitution,
    out: &mut BTreeSet<Substitution>,
) {
    if pos == body.len() {
        out.insert(theta);
        return;
    }
    let pattern = &body[pos];
    for ground in index.candidates(pattern) {
        if let Some((delta_atoms, delta_pos)) = delta {
            if pos == delta_pos && !delta_atoms.contains(*ground) {
                continue;
            }
        }
        if let Some(next) = match_atom(pattern, ground, &theta) {
            join(index, delta, body, pos + 1, next, out);
        }
    }
}

/// All substitutions grounding every atom of `body` into `atoms`.
pub fn unify_body(atoms: &BTreeSet<Atom>, body: &[Atom]) -> BTreeSet<Substitution> {
    let index = AtomIndex::build(atoms);
    let mut out = BTreeSet::new();
    join(&index, None, body, 0, Substitution::new(), &mut out);
    out
}

/// All substitutions grounding the rule body into the atom set.
pub fn unify<S: Scalar>(atoms: &BTreeSet<Atom>, rule: &Rule<S>) -> BTreeSet<Substitution> {
    unify_body(atoms, &rule.body)
}

// ---------------------------------------------------------------------------
// Expansion
// ---------------------------------------------------------------------------

/// One naive expansion step: fire every rule once over the given atoms.
pub fn expansion_step<S: Scalar>(atoms: &BTreeSet<Atom>, rules: &[Rule<S>]) -> BTreeSet<Atom> {
    let mut out = atoms.clone();
    for rule in rules {
        for theta in unify_body(atoms, &rule.body) {
            out.insert(apply_atom(&rule.head, &theta));
        }
    }
    out
}

/// Per-atom families of supporting base-fact sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProvenanceMap {
    map: BTreeMap<Atom, BTreeSet<SupportSet>>,
}

impl ProvenanceMap {
    /// The initial map: every base atom supports itself.
    pub fn base(atoms: &BTreeSet<Atom>) -> Self {
        let mut map = BTreeMap::new();
        for atom in atoms {
            let mut family = BTreeSet::new();
            family.insert(BTreeSet::from([atom.clone()]));
            map.insert(atom.clone(), family);
        }
        ProvenanceMap { map }
    }

    pub fn supports(&self, atom: &Atom) -> &BTreeSet<SupportSet> {
        static EMPTY: BTreeSet<SupportSet> = BTreeSet::new();
        self.map.get(atom).unwrap_or(&EMPTY)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom, &BTreeSet<SupportSet>)> {
        self.map.iter()
    }

    /// Insert keeping the family an antichain; on overflow the largest set
    /// (by size, then lexicographically) is evicted. Returns whether the
    /// family changed.
    fn insert(&mut self, atom: &Atom, support: SupportSet, cap: usize) -> bool {
        let family = self.map.entry(atom.clone()).or_default();
        if family.iter().any(|m| m.is_subset(&support)) {
            return false;
        }
        family.retain(|m| !support.is_subset(m));
        family.insert(support.clone());
        if family.len() > cap {
            let worst = family
                .iter()
                .max_by(|a, b| (a.len(), *a).cmp(&(b.len(), *b)))
                .cloned()
                .expect("non-empty family");
            family.remove(&worst);
            if worst == support {
                return false;
            }
        }
        true
    }
}

/// One provenance-tracking expansion step over the full rule set.
pub fn expansion_step_with_provenance<S: Scalar>(
    atoms: &BTreeSet<Atom>,
    provenance: &ProvenanceMap,
    rules: &[Rule<S>],
    support_cap: usize,
) -> (BTreeSet<Atom>, ProvenanceMap) {
    let mut out_atoms = atoms.clone();
    let mut out_prov = provenance.clone();
    for rule in rules {
        for theta in unify_body(atoms, &rule.body) {
            let head = apply_atom(&rule.head, &theta);
            for support in combined_supports(provenance, &rule.body, &theta) {
                out_prov.insert(&head, support, support_cap);
            }
            out_atoms.insert(head);
        }
    }
    (out_atoms, out_prov)
}

/// Cross-product combination: one support per body atom, unioned.
fn combined_supports(
    provenance: &ProvenanceMap,
    body: &[Atom],
    theta: &Substitution,
) -> Vec<SupportSet> {
    let families: Vec<&BTreeSet<SupportSet>> = body
        .iter()
        .map(|b| provenance.supports(&apply_atom(b, theta)))
        .collect();
    if families.iter().any(|f| f.is_empty()) {
        return Vec::new();
    }
    let mut acc: Vec<SupportSet> = vec![SupportSet::new()];
    for family in families {
        let mut next = Vec::new();
        'outer: for partial in &acc {
            for support in family {
                let mut union = partial.clone();
                union.extend(support.iter().cloned());
                next.push(union);
                if next.len() >= FIRING_PRODUCT_CAP {
                    break 'outer;
                }
            }
        }
        next.sort();
        next.dedup();
        acc = next;
    }
    acc
}

/// The expansion fixed point with its provenance and the rule groundings
/// discovered along the way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedKB {
    pub atoms: BTreeSet<Atom>,
    pub provenance: ProvenanceMap,
    /// `(rule index, substitution)` pairs whose bodies hold in the fixed point.
    pub rule_groundings: BTreeSet<(usize, Substitution)>,
    mis: Vec<SupportSet>,
}

impl GroundedKB {
    /// Subset-minimal base-fact sets that derive the contradiction atom.
    /// Populated by [`ground_fixpoint_with_provenance`]; empty for the
    /// atoms-only fixpoint.
    pub fn minimal_inconsistent_subsets(&self) -> &[SupportSet] {
        &self.mis
    }

    /// True when no support choice for the candidate atoms embeds a minimal
    /// inconsistent subset. See [`consistency_witness`].
    pub fn cons(&self, candidate: &BTreeSet<Atom>) -> bool {
        consistency_witness(self, candidate, &self.mis).is_some()
    }
}

/// Atoms-only expansion to the least fixed point (semi-naive).
pub fn ground_fixpoint<S: Scalar>(
    kb: &KnowledgeBase<S>,
    cfg: &GroundingConfig,
) -> Result<GroundedKB, GroundError> {
    expand(kb, cfg, false)
}

/// Expansion to the least fixed point of both the atom set and the
/// provenance map; minimal inconsistent subsets are minimized eagerly.
pub fn ground_fixpoint_with_provenance<S: Scalar>(
    kb: &KnowledgeBase<S>,
    cfg: &GroundingConfig,
) -> Result<GroundedKB, GroundError> {
    expand(kb, cfg, true)
}

fn expand<S: Scalar>(
    kb: &KnowledgeBase<S>,
    cfg: &GroundingConfig,
    with_provenance: bool,
) -> Result<GroundedKB, GroundError> {
    let base = kb.base_atoms();
    let mut atoms = base.clone();
    let mut provenance = ProvenanceMap::base(&base);
    let mut groundings = BTreeSet::new();
    // Delta: atoms that are new or whose support family changed last round.
    let mut delta = atoms.clone();
    let mut rounds = 0usize;

    while !delta.is_empty() {
        rounds += 1;
        if rounds > cfg.iteration_cap {
            return Err(GroundError::IterationCap { rounds });
        }
        let index = AtomIndex::build(atoms.iter());
        let mut fresh_atoms = BTreeSet::new();
        let mut changed = BTreeSet::new();
        for (ridx, rule) in kb.rules.iter().enumerate() {
            let mut thetas = BTreeSet::new();
            for delta_pos in 0..rule.body.len() {
                join(
                    &index,
                    Some((&delta, delta_pos)),
                    &rule.body,
                    0,
                    Substitution::new(),
                    &mut thetas,
                );
            }
            for theta in thetas {
                let head = apply_atom(&rule.head, &theta);
                debug_assert!(head.is_ground(), "safe rule grounded an open head");
                if with_provenance {
                    for support in combined_supports(&provenance, &rule.body, &theta) {
                        if provenance.insert(&head, support, cfg.support_cap) {
                            changed.insert(head.clone());
                        }
                    }
                }
                if !atoms.contains(&head) {
                    fresh_atoms.insert(head.clone());
                }
                groundings.insert((ridx, theta));
            }
        }
        atoms.extend(fresh_atoms.iter().cloned());
        delta = &fresh_atoms | &changed;
    }

    let mis = if with_provenance {
        provenance.supports(&Atom::bot()).iter().cloned().collect()
    } else {
        Vec::new()
    };
    Ok(GroundedKB {
        atoms,
        provenance,
        rule_groundings: groundings,
        mis,
    })
}

// ---------------------------------------------------------------------------
// Consistency
// ---------------------------------------------------------------------------

fn embeds_mis(union: &SupportSet, mis: &[SupportSet]) -> bool {
    mis.iter().any(|m| m.is_subset(union))
}

/// A candidate atom set is consistent iff there exists a choice of one
/// support per atom whose union embeds no minimal inconsistent subset.
pub fn cons(gkb: &GroundedKB, candidate: &BTreeSet<Atom>, mis: &[SupportSet]) -> bool {
    consistency_witness(gkb, candidate, mis).is_some()
}

/// The witnessing base-fact set for a consistent candidate: the first
/// MIS-free union of per-atom supports, searching smallest supports first.
/// `None` when every choice embeds a minimal inconsistent subset (or some
/// atom has no support at all).
pub fn consistency_witness(
    gkb: &GroundedKB,
    candidate: &BTreeSet<Atom>,
    mis: &[SupportSet],
) -> Option<SupportSet> {
    let mut choices: Vec<Vec<&SupportSet>> = Vec::with_capacity(candidate.len());
    for atom in candidate {
        let family = gkb.provenance.supports(atom);
        if family.is_empty() {
            return None;
        }
        let mut options: Vec<&SupportSet> = family.iter().collect();
        options.sort_by(|a, b| (a.len(), *a).cmp(&(b.len(), *b)));
        choices.push(options);
    }
    // Fewest alternatives first keeps the backtracking shallow.
    choices.sort_by_key(|options| options.len());

    fn search(
        choices: &[Vec<&SupportSet>],
        pos: usize,
        union: SupportSet,
        mis: &[SupportSet],
    ) -> Option<SupportSet> {
        if embeds_mis(&union, mis) {
            return None;
        }
        if pos == choices.len() {
            return Some(union);
        }
        for option in &choices[pos] {
            let mut next = union.clone();
            next.extend(option.iter().cloned());
            if let Some(found) = search(choices, pos + 1, next, mis) {
                return Some(found);
            }
        }
        None
    }
    search(&choices, 0, SupportSet::new(), mis)
}

/// Render a support set the way reports print it.
pub fn render_support(support: &SupportSet) -> String {
    let parts: Vec<String> = support.iter().map(|a| a.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

/// Render a family of support sets, sorted for stable output.
pub fn render_support_family<'a>(family: impl IntoIterator<Item = &'a SupportSet>) -> String {
    let mut parts: Vec<String> = family.into_iter().map(render_support).collect();
    parts.sort();
    format!("{{{}}}", parts.join(", "))
}

impl fmt::Display for GroundedKB {
    /// `atom <tab> {support sets}` lines, sorted by atom.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for atom in &self.atoms {
            writeln!(
                f,
                "{}\t{}",
                atom,
                render_support_family(self.provenance.supports(atom))
            )?;
        }
        Ok(())
    }
}
