//! Abstract syntax for CTL* with inputs, positive-normal-form conversion and
//! structural analysis.
//!
//! State formulas and path formulas are split into two types, mirroring the
//! grammar: state formulas may only mention output literals and boolean
//! connectives besides path quantifiers, while input literals and temporal
//! operators live in path formulas. `G` and `F` are desugared at parse time
//! (`G p` is `false R p`, `F p` is `true U p`); printers re-sugar them.

mod analysis;
mod parse;
mod print;

pub use analysis::{
    assert_quantifier_free, ast_size, ast_size_path, is_pure_ltl, pnf_negate_path,
    quantified_subformulas, substitute, substitute_state, QuantifiedSub, SubstError,
};
pub use parse::{parse_formula_text, parse_spec, to_pnf, to_pnf_path, Ast, AstNode, ParseError, Pos};
pub use print::render_spec;

use std::collections::BTreeSet;
use std::fmt;

/// What a proposition denotes. Identity of a proposition is its *name*; the
/// kind travels along as metadata so that a machine parsed from disk (which
/// only distinguishes inputs from outputs) compares equal to the spec-side
/// proposition of the same name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PropKind {
    Input,
    Output,
    /// Output invented by the reduction (witness IDs, direction bits, ...).
    FreshOutput,
}

/// A named proposition. Names match `[a-zA-Z_][a-zA-Z0-9_]*`.
#[derive(Debug, Clone)]
pub struct Proposition {
    name: String,
    kind: PropKind,
}

impl Proposition {
    pub fn new(name: impl Into<String>, kind: PropKind) -> Self {
        let name = name.into();
        debug_assert!(is_valid_name(&name), "invalid proposition name: {name}");
        Proposition { name, kind }
    }

    pub fn input(name: impl Into<String>) -> Self {
        Self::new(name, PropKind::Input)
    }

    pub fn output(name: impl Into<String>) -> Self {
        Self::new(name, PropKind::Output)
    }

    pub fn fresh(name: impl Into<String>) -> Self {
        Self::new(name, PropKind::FreshOutput)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> PropKind {
        self.kind
    }

    pub fn is_input(&self) -> bool {
        self.kind == PropKind::Input
    }
}

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// Name-only identity: two propositions with the same name are the same
// proposition regardless of which side declared them.
impl PartialEq for Proposition {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}
impl Eq for Proposition {}
impl PartialOrd for Proposition {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Proposition {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.name.cmp(&other.name)
    }
}
impl std::hash::Hash for Proposition {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.name.hash(state);
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A literal: a proposition or its negation. Negation in PNF appears only
/// here.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    pub prop: Proposition,
    pub positive: bool,
}

impl Lit {
    pub fn pos(prop: Proposition) -> Self {
        Lit { prop, positive: true }
    }

    pub fn neg(prop: Proposition) -> Self {
        Lit { prop, positive: false }
    }

    pub fn negated(&self) -> Self {
        Lit { prop: self.prop.clone(), positive: !self.positive }
    }
}

/// A set of propositions that are true; everything else in the ambient basis
/// is false.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Valuation(pub BTreeSet<Proposition>);

impl Valuation {
    pub fn empty() -> Self {
        Valuation(BTreeSet::new())
    }

    pub fn from_iter<I: IntoIterator<Item = Proposition>>(iter: I) -> Self {
        Valuation(iter.into_iter().collect())
    }

    pub fn contains(&self, p: &Proposition) -> bool {
        self.0.contains(p)
    }

    pub fn insert(&mut self, p: Proposition) {
        self.0.insert(p);
    }

    pub fn union(&self, other: &Valuation) -> Valuation {
        Valuation(self.0.union(&other.0).cloned().collect())
    }

    pub fn satisfies(&self, lit: &Lit) -> bool {
        self.contains(&lit.prop) == lit.positive
    }

    pub fn iter(&self) -> impl Iterator<Item = &Proposition> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

/// Path quantifier kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quant {
    Existential,
    Universal,
}

impl Quant {
    pub fn dual(self) -> Quant {
        match self {
            Quant::Existential => Quant::Universal,
            Quant::Universal => Quant::Existential,
        }
    }
}

/// Path formulas in positive normal form. Embedded state subformulas are
/// normalized away: the boolean structure of a state formula is represented
/// with the path connectives directly, so the only embedded state-formula
/// nodes are the two quantifiers. A path formula is "pure LTL" iff it
/// contains no `Forall`/`Exists` node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathFormula {
    True,
    False,
    Lit(Lit),
    And(Vec<PathFormula>),
    Or(Vec<PathFormula>),
    Next(Box<PathFormula>),
    Until(Box<PathFormula>, Box<PathFormula>),
    Release(Box<PathFormula>, Box<PathFormula>),
    /// Embedded universally quantified state subformula.
    Forall(Box<PathFormula>),
    /// Embedded existentially quantified state subformula.
    Exists(Box<PathFormula>),
}

impl PathFormula {
    pub fn lit(prop: Proposition, positive: bool) -> Self {
        PathFormula::Lit(Lit { prop, positive })
    }

    /// N-ary conjunction; flattens the trivial cases.
    pub fn and(mut children: Vec<PathFormula>) -> Self {
        children.retain(|c| *c != PathFormula::True);
        if children.iter().any(|c| *c == PathFormula::False) {
            return PathFormula::False;
        }
        match children.len() {
            0 => PathFormula::True,
            1 => children.pop().unwrap(),
            _ => PathFormula::And(children),
        }
    }

    /// N-ary disjunction; flattens the trivial cases.
    pub fn or(mut children: Vec<PathFormula>) -> Self {
        children.retain(|c| *c != PathFormula::False);
        if children.iter().any(|c| *c == PathFormula::True) {
            return PathFormula::True;
        }
        match children.len() {
            0 => PathFormula::False,
            1 => children.pop().unwrap(),
            _ => PathFormula::Or(children),
        }
    }

    pub fn next(inner: PathFormula) -> Self {
        PathFormula::Next(Box::new(inner))
    }

    pub fn until(lhs: PathFormula, rhs: PathFormula) -> Self {
        PathFormula::Until(Box::new(lhs), Box::new(rhs))
    }

    pub fn release(lhs: PathFormula, rhs: PathFormula) -> Self {
        PathFormula::Release(Box::new(lhs), Box::new(rhs))
    }

    /// `G φ`, stored as `false R φ`.
    pub fn globally(inner: PathFormula) -> Self {
        PathFormula::release(PathFormula::False, inner)
    }

    /// `F φ`, stored as `true U φ`.
    pub fn finally(inner: PathFormula) -> Self {
        PathFormula::until(PathFormula::True, inner)
    }

    pub fn quantified(quant: Quant, body: PathFormula) -> Self {
        match quant {
            Quant::Universal => PathFormula::Forall(Box::new(body)),
            Quant::Existential => PathFormula::Exists(Box::new(body)),
        }
    }

    /// All propositions occurring in the formula.
    pub fn props(&self, into: &mut BTreeSet<Proposition>) {
        match self {
            PathFormula::True | PathFormula::False => {}
            PathFormula::Lit(l) => {
                into.insert(l.prop.clone());
            }
            PathFormula::And(cs) | PathFormula::Or(cs) => {
                for c in cs {
                    c.props(into);
                }
            }
            PathFormula::Next(a) | PathFormula::Forall(a) | PathFormula::Exists(a) => {
                a.props(into)
            }
            PathFormula::Until(a, b) | PathFormula::Release(a, b) => {
                a.props(into);
                b.props(into);
            }
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            PathFormula::True | PathFormula::False | PathFormula::Lit(_) => true,
            PathFormula::And(cs) | PathFormula::Or(cs) => {
                cs.iter().all(|c| c.is_quantifier_free())
            }
            PathFormula::Next(a) => a.is_quantifier_free(),
            PathFormula::Until(a, b) | PathFormula::Release(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
            PathFormula::Forall(_) | PathFormula::Exists(_) => false,
        }
    }
}

/// State formulas in positive normal form. Literals refer to outputs only;
/// quantifier children are path formulas.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateFormula {
    True,
    False,
    Lit(Lit),
    And(Vec<StateFormula>),
    Or(Vec<StateFormula>),
    Forall(PathFormula),
    Exists(PathFormula),
}

impl StateFormula {
    pub fn and(mut children: Vec<StateFormula>) -> Self {
        children.retain(|c| *c != StateFormula::True);
        if children.iter().any(|c| *c == StateFormula::False) {
            return StateFormula::False;
        }
        match children.len() {
            0 => StateFormula::True,
            1 => children.pop().unwrap(),
            _ => StateFormula::And(children),
        }
    }

    pub fn or(mut children: Vec<StateFormula>) -> Self {
        children.retain(|c| *c != StateFormula::False);
        if children.iter().any(|c| *c == StateFormula::True) {
            return StateFormula::True;
        }
        match children.len() {
            0 => StateFormula::False,
            1 => children.pop().unwrap(),
            _ => StateFormula::Or(children),
        }
    }

    pub fn props(&self, into: &mut BTreeSet<Proposition>) {
        match self {
            StateFormula::True | StateFormula::False => {}
            StateFormula::Lit(l) => {
                into.insert(l.prop.clone());
            }
            StateFormula::And(cs) | StateFormula::Or(cs) => {
                for c in cs {
                    c.props(into);
                }
            }
            StateFormula::Forall(p) | StateFormula::Exists(p) => p.props(into),
        }
    }
}

/// A parsed specification: disjoint input and output alphabets plus a state
/// formula in PNF over them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spec {
    pub inputs: Vec<Proposition>,
    pub outputs: Vec<Proposition>,
    pub formula: StateFormula,
}

impl Spec {
    pub fn new(inputs: Vec<Proposition>, outputs: Vec<Proposition>, formula: StateFormula) -> Self {
        Spec { inputs, outputs, formula }
    }

    pub fn all_props(&self) -> impl Iterator<Item = &Proposition> {
        self.inputs.iter().chain(self.outputs.iter())
    }
}
