//! Domain types: constants, terms, atoms, weighted facts, weighted rules,
//! queries, and the knowledge base that holds them.
//!
//! Lexical convention: variables are uppercase-initial identifiers, constants
//! are lowercase-initial identifiers (or quoted strings for anything else).
//! The reserved nullary predicate `bot` denotes the contradiction atom; it may
//! only appear as a rule head.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

/// Reserved predicate for the contradiction atom.
pub const BOT_PREDICATE: &str = "bot";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("empty constant label")]
    EmptyConstant,
    #[error("the literal NULL is not a domain value")]
    NullConstant,
    #[error("fact weight {0} outside (0, 1]")]
    WeightOutOfRange(String),
    #[error("fact atom contains variables: {0}")]
    NonGroundFact(String),
    #[error("`{bot}` cannot be asserted as a fact", bot = BOT_PREDICATE)]
    BotFact,
    #[error("`{bot}` cannot appear in a rule body", bot = BOT_PREDICATE)]
    BotInBody,
    #[error("`{bot}` takes no arguments", bot = BOT_PREDICATE)]
    BotArity,
    #[error("rule has an empty body")]
    EmptyBody,
    #[error("unsafe rule: head variable {0} does not occur in the body")]
    UnsafeHead(String),
    #[error("predicate {predicate} used with arity {found}, previously {expected}")]
    ArityConflict {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("query head must not be `{bot}`", bot = BOT_PREDICATE)]
    BotQueryHead,
    #[error("query head has no variables (no answer slot)")]
    GroundQueryHead,
    #[error("rule weight must be positive, got {0}")]
    NonPositiveRuleWeight(String),
}

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

/// An element of the finite domain induced by the knowledge base.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constant(String);

impl Constant {
    pub fn new(label: impl Into<String>) -> Result<Self, KbError> {
        let label = label.into();
        if label.is_empty() {
            return Err(KbError::EmptyConstant);
        }
        if label == "NULL" {
            return Err(KbError::NullConstant);
        }
        Ok(Constant(label))
    }

    pub fn label(&self) -> &str {
        &self.0
    }

    /// True if the label can be printed without quoting.
    pub fn is_plain(&self) -> bool {
        let mut chars = self.0.chars();
        match chars.next() {
            Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_plain() {
            write!(f, "{}", self.0)
        } else {
            write!(f, "\"{}\"", self.0.replace('\\', "\\\\").replace('"', "\\\""))
        }
    }
}

/// A skolem function application standing in for an eliminated existential.
///
/// Arguments are the universal variables the existential fell under. Once all
/// arguments are ground the term denotes a fresh constant whose label is the
/// printed form, e.g. `sk_1(tweety)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SkolemTerm {
    pub id: u32,
    pub args: Vec<Term>,
}

impl SkolemTerm {
    /// Label of the constant this term denotes; `None` while any arg is open.
    pub fn ground_label(&self) -> Option<String> {
        if self.args.is_empty() {
            return Some(format!("sk_{}", self.id));
        }
        let mut parts = Vec::with_capacity(self.args.len());
        for arg in &self.args {
            match arg {
                Term::Const(c) => parts.push(c.to_string()),
                _ => return None,
            }
        }
        Some(format!("sk_{}({})", self.id, parts.join(",")))
    }
}

impl fmt::Display for SkolemTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "sk_{}", self.id)
        } else {
            let parts: Vec<String> = self.args.iter().map(|t| t.to_string()).collect();
            write!(f, "sk_{}({})", self.id, parts.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Constant),
    Var(String),
    Skolem(SkolemTerm),
}

impl Term {
    pub fn constant(label: impl Into<String>) -> Result<Self, KbError> {
        Ok(Term::Const(Constant::new(label)?))
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Const(_) => true,
            Term::Var(_) => false,
            Term::Skolem(sk) => sk.args.iter().all(Term::is_ground),
        }
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => {
                out.insert(v.as_str());
            }
            Term::Skolem(sk) => {
                for arg in &sk.args {
                    arg.collect_vars(out);
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => c.fmt(f),
            Term::Var(v) => write!(f, "{v}"),
            Term::Skolem(sk) => sk.fmt(f),
        }
    }
}

// ---------------------------------------------------------------------------
// Atoms
// ---------------------------------------------------------------------------

/// A predicate symbol applied to terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    /// The contradiction atom.
    pub fn bot() -> Self {
        Atom::new(BOT_PREDICATE, Vec::new())
    }

    pub fn is_bot(&self) -> bool {
        self.predicate == BOT_PREDICATE
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    /// Variable names occurring anywhere in the atom.
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for arg in &self.args {
            arg.collect_vars(&mut out);
        }
        out
    }

    /// Constants occurring directly as arguments.
    pub fn constants(&self) -> impl Iterator<Item = &Constant> {
        self.args.iter().filter_map(|t| match t {
            Term::Const(c) => Some(c),
            _ => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.predicate)
        } else {
            let parts: Vec<String> = self.args.iter().map(|t| t.to_string()).collect();
            write!(f, "{}({})", self.predicate, parts.join(","))
        }
    }
}

/// Variable names of a conjunction of atoms.
pub fn body_variables(body: &[Atom]) -> BTreeSet<&str> {
    let mut out = BTreeSet::new();
    for atom in body {
        for arg in &atom.args {
            arg.collect_vars(&mut out);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Facts and rules
// ---------------------------------------------------------------------------

/// A ground atom with an extraction confidence and the source that asserted it.
#[derive(Debug, Clone, PartialEq)]
pub struct Fact<S: Scalar> {
    pub atom: Atom,
    pub weight: S,
    pub source: String,
}

impl<S: Scalar> Fact<S> {
    pub fn new(atom: Atom, weight: S, source: impl Into<String>) -> Result<Self, KbError> {
        if atom.is_bot() {
            return Err(KbError::BotFact);
        }
        if !atom.is_ground() {
            return Err(KbError::NonGroundFact(atom.to_string()));
        }
        if weight <= S::zero() || weight > S::one() {
            return Err(KbError::WeightOutOfRange(format!("{weight}")));
        }
        Ok(Fact {
            atom,
            weight,
            source: source.into(),
        })
    }
}

/// Soft positive weight or the hard (+infinity) marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleWeight<S: Scalar> {
    Soft(S),
    Hard,
}

impl<S: Scalar> RuleWeight<S> {
    pub fn is_hard(&self) -> bool {
        matches!(self, RuleWeight::Hard)
    }
}

impl<S: Scalar> fmt::Display for RuleWeight<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleWeight::Soft(w) => write!(f, "{w}"),
            RuleWeight::Hard => write!(f, "hard"),
        }
    }
}

/// A skolemized implication `body => head` with a soft or hard weight.
///
/// `universals` / `skolemized` record how many universal variables the rule
/// has and how many existentials were eliminated when it was skolemized.
/// They are derived bookkeeping: rule equality compares body, head, and
/// weight only.
#[derive(Debug, Clone)]
pub struct Rule<S: Scalar> {
    pub body: Vec<Atom>,
    pub head: Atom,
    pub weight: RuleWeight<S>,
    pub universals: usize,
    pub skolemized: usize,
}

impl<S: Scalar> PartialEq for Rule<S> {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body && self.head == other.head && self.weight == other.weight
    }
}

impl<S: Scalar> Rule<S> {
    pub fn new(body: Vec<Atom>, head: Atom, weight: RuleWeight<S>) -> Result<Self, KbError> {
        Self::with_counters(body, head, weight, usize::MAX, 0)
    }

    pub fn with_counters(
        body: Vec<Atom>,
        head: Atom,
        weight: RuleWeight<S>,
        universals: usize,
        skolemized: usize,
    ) -> Result<Self, KbError> {
        if body.is_empty() {
            return Err(KbError::EmptyBody);
        }
        if body.iter().any(Atom::is_bot) {
            return Err(KbError::BotInBody);
        }
        if head.is_bot() && !head.args.is_empty() {
            return Err(KbError::BotArity);
        }
        if let RuleWeight::Soft(w) = weight {
            if w <= S::zero() {
                return Err(KbError::NonPositiveRuleWeight(format!("{w}")));
            }
        }
        let body_vars = body_variables(&body);
        for v in head.variables() {
            if !body_vars.contains(v) {
                return Err(KbError::UnsafeHead(v.to_string()));
            }
        }
        let universals = if universals == usize::MAX {
            body_vars.len()
        } else {
            universals
        };
        Ok(Rule {
            body,
            head,
            weight,
            universals,
            skolemized,
        })
    }

    /// All variables of the rule (safety makes these the body variables).
    pub fn variables(&self) -> BTreeSet<&str> {
        body_variables(&self.body)
    }
}

impl<S: Scalar> fmt::Display for Rule<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.body.iter().map(|a| a.to_string()).collect();
        write!(f, "{} :- {}. w={}", self.head, body.join(", "), self.weight)
    }
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

/// A rule-shaped question: the head is the answer slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Query {
    pub body: Vec<Atom>,
    pub head: Atom,
}

impl Query {
    pub fn new(body: Vec<Atom>, head: Atom) -> Result<Self, KbError> {
        if head.is_bot() {
            return Err(KbError::BotQueryHead);
        }
        if body.is_empty() {
            return Err(KbError::EmptyBody);
        }
        if body.iter().any(Atom::is_bot) {
            return Err(KbError::BotInBody);
        }
        if head.variables().is_empty() {
            return Err(KbError::GroundQueryHead);
        }
        let body_vars = body_variables(&body);
        for v in head.variables() {
            if !body_vars.contains(v) {
                return Err(KbError::UnsafeHead(v.to_string()));
            }
        }
        Ok(Query { body, head })
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.body.iter().map(|a| a.to_string()).collect();
        write!(f, "{} :- {}.", self.head, body.join(", "))
    }
}

// ---------------------------------------------------------------------------
// Knowledge base
// ---------------------------------------------------------------------------

/// Facts plus rules plus the arity table they agree on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase<S: Scalar> {
    pub facts: Vec<Fact<S>>,
    pub rules: Vec<Rule<S>>,
    pub predicates: BTreeMap<String, usize>,
}

impl<S: Scalar> KnowledgeBase<S> {
    pub fn new() -> Self {
        KnowledgeBase {
            facts: Vec::new(),
            rules: Vec::new(),
            predicates: BTreeMap::new(),
        }
    }

    fn register_atom(&mut self, atom: &Atom) -> Result<(), KbError> {
        if atom.is_bot() && !atom.args.is_empty() {
            return Err(KbError::BotArity);
        }
        match self.predicates.get(&atom.predicate) {
            Some(&arity) if arity != atom.arity() => Err(KbError::ArityConflict {
                predicate: atom.predicate.clone(),
                expected: arity,
                found: atom.arity(),
            }),
            Some(_) => Ok(()),
            None => {
                self.predicates.insert(atom.predicate.clone(), atom.arity());
                Ok(())
            }
        }
    }

    pub fn add_fact(&mut self, fact: Fact<S>) -> Result<(), KbError> {
        self.register_atom(&fact.atom)?;
        self.facts.push(fact);
        Ok(())
    }

    pub fn add_rule(&mut self, rule: Rule<S>) -> Result<(), KbError> {
        for atom in rule.body.iter().chain(std::iter::once(&rule.head)) {
            self.register_atom(atom)?;
        }
        self.rules.push(rule);
        Ok(())
    }

    /// The ground atoms asserted by the facts.
    pub fn base_atoms(&self) -> BTreeSet<Atom> {
        self.facts.iter().map(|f| f.atom.clone()).collect()
    }

    /// The finite domain: every constant occurring in a fact.
    pub fn domain(&self) -> BTreeSet<Constant> {
        let mut out = BTreeSet::new();
        for fact in &self.facts {
            for c in fact.atom.constants() {
                out.insert(c.clone());
            }
        }
        out
    }

    /// Extraction confidence of a base atom: the max over asserting sources.
    pub fn atom_confidence(&self, atom: &Atom) -> Option<S> {
        self.facts
            .iter()
            .filter(|f| &f.atom == atom)
            .map(|f| f.weight)
            .fold(None, |acc, w| match acc {
                None => Some(w),
                Some(a) => Some(if w > a { w } else { a }),
            })
    }

    /// Data sources present, in sorted order.
    pub fn sources(&self) -> BTreeSet<&str> {
        self.facts.iter().map(|f| f.source.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(label: &str) -> Term {
        Term::constant(label).unwrap()
    }

    #[test]
    fn null_is_not_a_constant() {
        assert_eq!(Constant::new("NULL"), Err(KbError::NullConstant));
        assert!(Constant::new("null").is_ok());
    }

    #[test]
    fn fact_weight_must_be_in_unit_interval() {
        let atom = Atom::new("bird", vec![c("tweety")]);
        assert!(Fact::new(atom.clone(), 1.0f64, "d1").is_ok());
        assert!(matches!(
            Fact::new(atom.clone(), 0.0f64, "d1"),
            Err(KbError::WeightOutOfRange(_))
        ));
        assert!(matches!(
            Fact::new(atom, 1.5f64, "d1"),
            Err(KbError::WeightOutOfRange(_))
        ));
    }

    #[test]
    fn facts_must_be_ground() {
        let atom = Atom::new("bird", vec![Term::var("X")]);
        assert!(matches!(
            Fact::new(atom, 1.0f64, "d1"),
            Err(KbError::NonGroundFact(_))
        ));
    }

    #[test]
    fn unsafe_rule_rejected() {
        let body = vec![Atom::new("p", vec![Term::var("X")])];
        let head = Atom::new("q", vec![Term::var("Y")]);
        assert_eq!(
            Rule::new(body, head, RuleWeight::Soft(1.0f64)),
            Err(KbError::UnsafeHead("Y".into()))
        );
    }

    #[test]
    fn safe_rule_accepted_and_counts_universals() {
        let body = vec![Atom::new("p", vec![Term::var("X"), Term::var("Y")])];
        let head = Atom::new("q", vec![Term::var("X")]);
        let rule = Rule::new(body, head, RuleWeight::Soft(1.0f64)).unwrap();
        assert_eq!(rule.universals, 2);
        assert_eq!(rule.skolemized, 0);
    }

    #[test]
    fn arity_conflicts_detected() {
        let mut kb = KnowledgeBase::<f64>::new();
        kb.add_fact(Fact::new(Atom::new("p", vec![c("a")]), 1.0, "d1").unwrap())
            .unwrap();
        let err = kb
            .add_fact(Fact::new(Atom::new("p", vec![c("a"), c("b")]), 1.0, "d1").unwrap())
            .unwrap_err();
        assert!(matches!(err, KbError::ArityConflict { .. }));
    }

    #[test]
    fn query_needs_a_variable_answer_slot() {
        let body = vec![Atom::new("p", vec![c("a")])];
        let head = Atom::new("answer", vec![c("a")]);
        assert_eq!(Query::new(body, head), Err(KbError::GroundQueryHead));
    }

    #[test]
    fn quoted_constants_render_with_escapes() {
        let k = Constant::new("two words").unwrap();
        assert_eq!(k.to_string(), "\"two words\"");
        let plain = Constant::new("tweety").unwrap();
        assert_eq!(plain.to_string(), "tweety");
    }
}
