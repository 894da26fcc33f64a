//! Text format for knowledge bases and queries.
//!
//! ```text
//! # facts: weight and source are optional (defaults w=1.0, src=default)
//! bird(tweety) @ w=1.0 src=d1
//! # rules: weight defaults to hard when omitted
//! flies(X) :- bird(X). w=1.5
//! bot :- flies(X), notflies(X). w=hard
//! ```
//!
//! Variables are uppercase-initial; constants are lowercase- or digit-initial
//! identifiers, or double-quoted strings. `#` starts a comment. Head-only
//! variables of a rule are read as existentials and skolemized on the spot,
//! so every stored rule is safe. The lexical space `sk_<n>` is reserved for
//! skolem terms.

use std::fmt;

use thiserror::Error;

use crate::kb::{
    Atom, Constant, Fact, KbError, KnowledgeBase, Query, Rule, RuleWeight, SkolemTerm, Term,
};
use crate::scalar::{from_f64, Scalar};
use crate::skolem::{skolemize, Formula, Quantifier, SkolemError, SkolemGen};

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }

    fn from_kb(line: usize, err: KbError) -> Self {
        ParseError::new(line, err.to_string())
    }

    fn from_skolem(line: usize, err: SkolemError) -> Self {
        ParseError::new(line, err.to_string())
    }
}

const DEFAULT_SOURCE: &str = "default";

// ---------------------------------------------------------------------------
// Scanner
// ---------------------------------------------------------------------------

struct Scanner<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    text: &'a str,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Scanner {
            chars: text.chars().collect(),
            pos: 0,
            line,
            text,
        }
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, format!("{} in `{}`", message.into(), self.text))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    /// `:-` without consuming on failure.
    fn eat_implies(&mut self) -> bool {
        self.skip_ws();
        if self.chars.get(self.pos) == Some(&':') && self.chars.get(self.pos + 1) == Some(&'-') {
            self.pos += 2;
            true
        } else {
            false
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphanumeric() || c == '_' => {}
            _ => return Err(self.err("expected identifier")),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        self.expect('"')?;
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some(c) => out.push(c),
                    None => return Err(self.err("unterminated escape")),
                },
                Some(c) => out.push(c),
                None => return Err(self.err("unterminated string")),
            }
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E')
        {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map_err(|_| self.err(format!("bad number `{text}`")))
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some('"') => {
                let label = self.quoted()?;
                Constant::new(label)
                    .map(Term::Const)
                    .map_err(|e| self.err(e.to_string()))
            }
            Some(c) if c.is_ascii_uppercase() => Ok(Term::Var(self.ident()?)),
            Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' => {
                let name = self.ident()?;
                if let Some(id) = skolem_id(&name) {
                    let mut args = Vec::new();
                    if self.eat('(') {
                        loop {
                            args.push(self.term()?);
                            if self.eat(')') {
                                break;
                            }
                            self.expect(',')?;
                        }
                    }
                    Ok(normalize_term(Term::Skolem(SkolemTerm { id, args })))
                } else {
                    Constant::new(name)
                        .map(Term::Const)
                        .map_err(|e| self.err(e.to_string()))
                }
            }
            _ => Err(self.err("expected term")),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        self.skip_ws();
        let predicate = match self.peek() {
            Some(c) if c.is_ascii_lowercase() || c == '_' => self.ident()?,
            _ => return Err(self.err("expected predicate")),
        };
        let mut args = Vec::new();
        if self.eat('(') {
            loop {
                args.push(self.term()?);
                if self.eat(')') {
                    break;
                }
                self.expect(',')?;
            }
        }
        Ok(Atom::new(predicate, args))
    }
}

fn skolem_id(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("sk_")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Collapse fully ground skolem terms into plain constants.
pub fn normalize_term(term: Term) -> Term {
    match term {
        Term::Skolem(sk) => {
            let args: Vec<Term> = sk.args.into_iter().map(normalize_term).collect();
            let sk = SkolemTerm { id: sk.id, args };
            match sk.ground_label() {
                Some(label) => Term::Const(Constant::new(label).expect("skolem label non-empty")),
                None => Term::Skolem(sk),
            }
        }
        other => other,
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            '\\' if in_string => escaped = !escaped,
            '"' if !escaped => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => escaped = false,
        }
    }
    line
}

// ---------------------------------------------------------------------------
// Lines
// ---------------------------------------------------------------------------

enum Line<S: Scalar> {
    Fact(Fact<S>),
    Rule {
        body: Vec<Atom>,
        head: Atom,
        weight: RuleWeight<S>,
    },
}

fn parse_line<S: Scalar>(text: &str, lineno: usize) -> Result<Line<S>, ParseError> {
    let mut sc = Scanner::new(text, lineno);
    let head = sc.atom()?;
    if sc.eat_implies() {
        let mut body = Vec::new();
        loop {
            if sc.eat('.') {
                break;
            }
            body.push(sc.atom()?);
            if sc.eat('.') {
                break;
            }
            sc.expect(',')?;
        }
        let weight = parse_rule_weight(&mut sc)?;
        if !sc.at_end() {
            return Err(sc.err("trailing input after rule"));
        }
        if body.is_empty() {
            return Err(ParseError::from_kb(lineno, KbError::EmptyBody));
        }
        Ok(Line::Rule { body, head, weight })
    } else {
        let (weight, source) = parse_fact_annotations(&mut sc)?;
        if !sc.at_end() {
            return Err(sc.err("trailing input after fact"));
        }
        let fact = Fact::new(head, weight, source).map_err(|e| ParseError::from_kb(lineno, e))?;
        Ok(Line::Fact(fact))
    }
}

fn parse_rule_weight<S: Scalar>(sc: &mut Scanner<'_>) -> Result<RuleWeight<S>, ParseError> {
    sc.skip_ws();
    if sc.at_end() {
        // Unannotated constraints are hard.
        return Ok(RuleWeight::Hard);
    }
    let key = sc.ident()?;
    if key != "w" {
        return Err(sc.err(format!("unknown rule annotation `{key}`")));
    }
    sc.expect('=')?;
    sc.skip_ws();
    if matches!(sc.peek(), Some(c) if c.is_ascii_alphabetic()) {
        let word = sc.ident()?;
        if word == "hard" {
            Ok(RuleWeight::Hard)
        } else {
            Err(sc.err(format!("bad rule weight `{word}`")))
        }
    } else {
        Ok(RuleWeight::Soft(from_f64(sc.number()?)))
    }
}

fn parse_fact_annotations<S: Scalar>(sc: &mut Scanner<'_>) -> Result<(S, String), ParseError> {
    let mut weight: S = S::one();
    let mut source = DEFAULT_SOURCE.to_string();
    if sc.eat('@') {
        while !sc.at_end() {
            let key = sc.ident()?;
            sc.expect('=')?;
            match key.as_str() {
                "w" => weight = from_f64(sc.number()?),
                "src" => {
                    sc.skip_ws();
                    source = if sc.peek() == Some('"') {
                        sc.quoted()?
                    } else {
                        sc.ident()?
                    };
                }
                other => return Err(sc.err(format!("unknown fact annotation `{other}`"))),
            }
        }
    }
    Ok((weight, source))
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

/// Parse a knowledge-base file: every non-comment line is one fact or rule.
pub fn parse_kb<S: Scalar>(text: &str) -> Result<KnowledgeBase<S>, ParseError> {
    let mut kb = KnowledgeBase::new();
    let mut gen = SkolemGen::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        match parse_line::<S>(line, lineno)? {
            Line::Fact(fact) => {
                let key = format!("{} {} {}", fact.atom, fact.weight, fact.source);
                if seen.insert(key) {
                    kb.add_fact(fact).map_err(|e| ParseError::from_kb(lineno, e))?;
                }
            }
            Line::Rule { body, head, weight } => {
                // Head-only variables are existentials of the AE fragment.
                let body_vars = crate::kb::body_variables(&body);
                let existentials: Vec<Quantifier> = head
                    .variables()
                    .into_iter()
                    .filter(|v| !body_vars.contains(v))
                    .map(|v| Quantifier::Exists(v.to_string()))
                    .collect();
                let rule = if existentials.is_empty() {
                    Rule::new(body, head, weight)
                } else {
                    let formula = Formula {
                        quantifiers: existentials,
                        body,
                        head,
                    };
                    let sk = skolemize(&formula, &mut gen)
                        .map_err(|e| ParseError::from_skolem(lineno, e))?;
                    Rule::with_counters(sk.body, sk.head, weight, sk.universals, sk.skolemized)
                }
                .map_err(|e| ParseError::from_kb(lineno, e))?;
                let key = rule.to_string();
                if seen.insert(key) {
                    kb.add_rule(rule).map_err(|e| ParseError::from_kb(lineno, e))?;
                }
            }
        }
    }
    Ok(kb)
}

/// Parse a single query line. Unlike KB rules, a head-only variable is an
/// error here: the answer slot must be bound by the body.
pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let mut found = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if found.is_some() {
            return Err(ParseError::new(lineno, "expected exactly one query line"));
        }
        match parse_line::<f64>(line, lineno)? {
            Line::Fact(_) => {
                return Err(ParseError::new(lineno, "query must be rule-shaped (`head :- body.`)"))
            }
            Line::Rule { body, head, weight } => {
                if !matches!(weight, RuleWeight::Hard) {
                    return Err(ParseError::new(lineno, "queries carry no weight"));
                }
                let query = Query::new(body, head).map_err(|e| ParseError::from_kb(lineno, e))?;
                found = Some(query);
            }
        }
    }
    found.ok_or_else(|| ParseError::new(0, "empty query"))
}

/// Parse a single ground atom, e.g. a candidate like `answer(tweety)`.
pub fn parse_ground_atom(text: &str) -> Result<Atom, ParseError> {
    let mut sc = Scanner::new(text.trim(), 1);
    let atom = sc.atom()?;
    if !sc.at_end() {
        return Err(sc.err("trailing input after atom"));
    }
    if !atom.is_ground() {
        return Err(ParseError::new(1, format!("atom {atom} is not ground")));
    }
    Ok(atom)
}

/// Render a knowledge base back into the file format.
pub fn render_kb<S: Scalar>(kb: &KnowledgeBase<S>) -> String {
    let mut out = String::new();
    for fact in &kb.facts {
        out.push_str(&format!(
            "{} @ w={} src={}\n",
            fact.atom,
            fact.weight,
            render_source(&fact.source)
        ));
    }
    for rule in &kb.rules {
        out.push_str(&rule.to_string());
        out.push('\n');
    }
    out
}

fn render_source(source: &str) -> String {
    let plain = !source.is_empty()
        && source
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        source.to_string()
    } else {
        format!("\"{}\"", source.replace('\\', "\\\\").replace('"', "\\\""))
    }
}
