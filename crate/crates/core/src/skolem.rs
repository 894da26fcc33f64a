//! Skolemization of quantified implications in the AE fragment.
//!
//! Variables left out of the prefix are implicitly universal and outermost.
//! Each existential is replaced by a fresh skolem term applied to the
//! universal variables in scope, so the grounding engine only ever sees
//! universally quantified rules.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::kb::{Atom, SkolemTerm, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkolemError {
    #[error("quantifier prefix is not in the AE fragment: forall {0} after an existential")]
    NotAe(String),
    #[error("variable {0} quantified twice")]
    DuplicateQuantifier(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Quantifier {
    ForAll(String),
    Exists(String),
}

/// An implication with an explicit quantifier prefix, before skolemization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub quantifiers: Vec<Quantifier>,
    pub body: Vec<Atom>,
    pub head: Atom,
}

/// Skolemization result: a purely universal implication plus the counters
/// recording how many universals it has and how many existentials were
/// eliminated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skolemized {
    pub body: Vec<Atom>,
    pub head: Atom,
    pub universals: usize,
    pub skolemized: usize,
}

/// Source of fresh skolem ids; one generator is threaded through a whole
/// knowledge base so ids never collide.
#[derive(Debug, Clone, Default)]
pub struct SkolemGen {
    next: u32,
}

impl SkolemGen {
    pub fn new() -> Self {
        SkolemGen { next: 1 }
    }

    fn fresh(&mut self) -> u32 {
        let id = self.next.max(1);
        self.next = id + 1;
        id
    }
}

/// Variables in first-occurrence order over the body atoms, then the head.
fn occurrence_order(body: &[Atom], head: &Atom) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut visit = |atom: &Atom| {
        for v in ordered_vars(atom) {
            if seen.insert(v.clone()) {
                out.push(v);
            }
        }
    };
    for atom in body {
        visit(atom);
    }
    visit(head);
    out
}

fn ordered_vars(atom: &Atom) -> Vec<String> {
    fn walk(term: &Term, out: &mut Vec<String>) {
        match term {
            Term::Const(_) => {}
            Term::Var(v) => out.push(v.clone()),
            Term::Skolem(sk) => {
                for arg in &sk.args {
                    walk(arg, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    for arg in &atom.args {
        walk(arg, &mut out);
    }
    out
}

fn replace_var(atom: &Atom, name: &str, replacement: &Term) -> Atom {
    fn walk(term: &Term, name: &str, replacement: &Term) -> Term {
        match term {
            Term::Var(v) if v == name => replacement.clone(),
            Term::Skolem(sk) => Term::Skolem(SkolemTerm {
                id: sk.id,
                args: sk.args.iter().map(|t| walk(t, name, replacement)).collect(),
            }),
            other => other.clone(),
        }
    }
    Atom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|t| walk(t, name, replacement))
            .collect(),
    }
}

/// Eliminate the existentials of an AE formula.
///
/// Each existential becomes a skolem term over the universals in scope at
/// its position (implicit universals are outermost, so they are always in
/// scope). Rejects prefixes where a universal follows an existential.
pub fn skolemize(formula: &Formula, gen: &mut SkolemGen) -> Result<Skolemized, SkolemError> {
    let mut declared = BTreeSet::new();
    let mut seen_exists = false;
    for q in &formula.quantifiers {
        let name = match q {
            Quantifier::ForAll(n) => {
                if seen_exists {
                    return Err(SkolemError::NotAe(n.clone()));
                }
                n
            }
            Quantifier::Exists(n) => {
                seen_exists = true;
                n
            }
        };
        if !declared.insert(name.clone()) {
            return Err(SkolemError::DuplicateQuantifier(name.clone()));
        }
    }

    // Implicit universals: free variables, outermost, in occurrence order.
    let mut universals: Vec<String> = occurrence_order(&formula.body, &formula.head)
        .into_iter()
        .filter(|v| !declared.contains(v))
        .collect();
    for q in &formula.quantifiers {
        if let Quantifier::ForAll(n) = q {
            universals.push(n.clone());
        }
    }

    let mut body = formula.body.clone();
    let mut head = formula.head.clone();
    let mut eliminated = 0;
    for q in &formula.quantifiers {
        if let Quantifier::Exists(n) = q {
            let args: Vec<Term> = universals.iter().map(|u| Term::var(u.clone())).collect();
            let replacement = Term::Skolem(SkolemTerm {
                id: gen.fresh(),
                args,
            });
            body = body
                .iter()
                .map(|a| replace_var(a, n, &replacement))
                .collect();
            head = replace_var(&head, n, &replacement);
            eliminated += 1;
        }
    }

    Ok(Skolemized {
        body,
        head,
        universals: universals.len(),
        skolemized: eliminated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(n: &str) -> Term {
        Term::var(n)
    }

    #[test]
    fn textbook_skolemization() {
        // forall X exists Y. p(X) => q(X, Y)  becomes  p(X) => q(X, sk_1(X))
        let formula = Formula {
            quantifiers: vec![
                Quantifier::ForAll("X".into()),
                Quantifier::Exists("Y".into()),
            ],
            body: vec![Atom::new("p", vec![var("X")])],
            head: Atom::new("q", vec![var("X"), var("Y")]),
        };
        let mut gen = SkolemGen::new();
        let out = skolemize(&formula, &mut gen).unwrap();
        assert_eq!(out.universals, 1);
        assert_eq!(out.skolemized, 1);
        assert_eq!(out.body, formula.body);
        assert_eq!(out.head.to_string(), "q(X,sk_1(X))");
    }

    #[test]
    fn no_existentials_is_identity() {
        let formula = Formula {
            quantifiers: vec![],
            body: vec![Atom::new("p", vec![var("X")])],
            head: Atom::new("q", vec![var("X")]),
        };
        let mut gen = SkolemGen::new();
        let out = skolemize(&formula, &mut gen).unwrap();
        assert_eq!(out.body, formula.body);
        assert_eq!(out.head, formula.head);
        assert_eq!((out.universals, out.skolemized), (1, 0));
    }

    #[test]
    fn nullary_skolem_constant() {
        // exists Y. r(Y) with no universals; the generator has already
        // handed out sk_1, so this existential becomes sk_2.
        let formula = Formula {
            quantifiers: vec![Quantifier::Exists("Y".into())],
            body: vec![],
            head: Atom::new("r", vec![var("Y")]),
        };
        let mut gen = SkolemGen::new();
        gen.fresh();
        let out = skolemize(&formula, &mut gen).unwrap();
        assert_eq!(out.head.to_string(), "r(sk_2)");
        assert_eq!((out.universals, out.skolemized), (0, 1));
    }

    #[test]
    fn non_ae_prefix_rejected() {
        let formula = Formula {
            quantifiers: vec![
                Quantifier::Exists("Y".into()),
                Quantifier::ForAll("X".into()),
            ],
            body: vec![Atom::new("p", vec![var("X"), var("Y")])],
            head: Atom::new("q", vec![var("X")]),
        };
        let mut gen = SkolemGen::new();
        assert_eq!(
            skolemize(&formula, &mut gen),
            Err(SkolemError::NotAe("X".into()))
        );
    }

    #[test]
    fn idempotent_on_its_own_output() {
        let formula = Formula {
            quantifiers: vec![Quantifier::Exists("Y".into())],
            body: vec![Atom::new("p", vec![var("X"), var("Y")])],
            head: Atom::new("q", vec![var("X"), var("Y")]),
        };
        let mut gen = SkolemGen::new();
        let once = skolemize(&formula, &mut gen).unwrap();
        let again = skolemize(
            &Formula {
                quantifiers: vec![],
                body: once.body.clone(),
                head: once.head.clone(),
            },
            &mut gen,
        )
        .unwrap();
        assert_eq!(again.body, once.body);
        assert_eq!(again.head, once.head);
        assert_eq!(again.skolemized, 0);
    }

    #[test]
    fn existential_in_body_gets_the_same_skolem_term() {
        let formula = Formula {
            quantifiers: vec![Quantifier::Exists("Y".into())],
            body: vec![Atom::new("p", vec![var("X"), var("Y")])],
            head: Atom::new("q", vec![var("Y")]),
        };
        let mut gen = SkolemGen::new();
        let out = skolemize(&formula, &mut gen).unwrap();
        assert_eq!(out.body[0].to_string(), "p(X,sk_1(X))");
        assert_eq!(out.head.to_string(), "q(sk_1(X))");
    }
}
