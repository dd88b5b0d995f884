//! Concrete-syntax parser for specifications, and the conversion of general
//! formula trees (free negation, `->`, `<->`, `G`, `F`) into positive normal
//! form.
//!
//! Operator precedence, ascending: `<->`, `->`, `||`, `&&`, prefix operators
//! (`!`, `X`, `G`, `F`, `A`, `E`), then `U`/`R` (right-associative). Thus
//! `!a U b` is `!(a U b)` and `a U b && c` is `(a U b) && c`.

use std::collections::BTreeMap;

use crate::lex::{tokenize, Cursor, Tok};

use super::{PathFormula, Proposition, Spec, StateFormula};

pub use crate::lex::Pos;

const RESERVED: &[&str] =
    &["true", "false", "U", "R", "X", "G", "F", "A", "E", "INPUTS", "OUTPUTS", "FORMULA", "MOORE"];

/// General-syntax formula tree as parsed, before normal-form conversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ast {
    pub node: AstNode,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AstNode {
    True,
    False,
    Ident(String),
    Not(Box<Ast>),
    And(Vec<Ast>),
    Or(Vec<Ast>),
    Implies(Box<Ast>, Box<Ast>),
    Iff(Box<Ast>, Box<Ast>),
    Next(Box<Ast>),
    Globally(Box<Ast>),
    Finally(Box<Ast>),
    Until(Box<Ast>, Box<Ast>),
    Release(Box<Ast>, Box<Ast>),
    Forall(Box<Ast>),
    Exists(Box<Ast>),
}

impl Ast {
    pub fn new(node: AstNode, pos: Pos) -> Self {
        Ast { node, pos }
    }

    /// Convenience constructor with a dummy position, for tests and
    /// programmatic formula building.
    pub fn mk(node: AstNode) -> Self {
        Ast { node, pos: Pos { line: 0, col: 0 } }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: undeclared proposition `{name}`")]
    UndeclaredProposition { pos: Pos, name: String },
    #[error("{pos}: proposition `{name}` declared more than once (inputs and outputs must be disjoint)")]
    DuplicateProposition { pos: Pos, name: String },
    #[error("{pos}: `{name}` is a reserved word and cannot be a proposition")]
    ReservedWord { pos: Pos, name: String },
    #[error("{pos}: input `{name}` used as a state-formula literal; inputs are only meaningful inside a path quantifier")]
    InputAtStatePosition { pos: Pos, name: String },
    #[error("{pos}: temporal operator at state-formula position; wrap it in `A` or `E`")]
    TemporalAtStatePosition { pos: Pos },
}

impl From<crate::lex::LexError> for ParseError {
    fn from(e: crate::lex::LexError) -> Self {
        ParseError::Syntax { pos: e.pos, message: e.message }
    }
}

/// Parse a full spec file: `INPUTS ...; OUTPUTS ...; FORMULA ...;`
/// The returned formula is desugared and in positive normal form.
pub fn parse_spec(text: &str) -> Result<Spec, ParseError> {
    let mut cur = Cursor::new(tokenize(text)?);

    expect_word(&mut cur, "INPUTS")?;
    let input_names = ident_list(&mut cur)?;
    expect_tok(&mut cur, Tok::Semi)?;
    expect_word(&mut cur, "OUTPUTS")?;
    let output_names = ident_list(&mut cur)?;
    expect_tok(&mut cur, Tok::Semi)?;
    expect_word(&mut cur, "FORMULA")?;
    let ast = parse_formula(&mut cur)?;
    expect_tok(&mut cur, Tok::Semi)?;
    if *cur.peek() != Tok::Eof {
        return Err(ParseError::Syntax {
            pos: cur.pos(),
            message: format!("unexpected {} after spec", cur.peek()),
        });
    }

    let mut props: BTreeMap<String, Proposition> = BTreeMap::new();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (name, pos) in input_names {
        let p = Proposition::input(name.clone());
        if props.insert(name.clone(), p.clone()).is_some() {
            return Err(ParseError::DuplicateProposition { pos, name });
        }
        inputs.push(p);
    }
    for (name, pos) in output_names {
        let p = Proposition::output(name.clone());
        if props.insert(name.clone(), p.clone()).is_some() {
            return Err(ParseError::DuplicateProposition { pos, name });
        }
        outputs.push(p);
    }

    let formula = to_pnf(&ast, &props)?;
    Ok(Spec::new(inputs, outputs, formula))
}

fn ident_list(cur: &mut Cursor) -> Result<Vec<(String, Pos)>, ParseError> {
    let mut out = Vec::new();
    if *cur.peek() == Tok::Semi {
        return Ok(out); // empty list is allowed
    }
    loop {
        let pos = cur.pos();
        match cur.next() {
            (Tok::Ident(name), _) => {
                if RESERVED.contains(&name.as_str()) {
                    return Err(ParseError::ReservedWord { pos, name });
                }
                out.push((name, pos));
            }
            (tok, pos) => {
                return Err(ParseError::Syntax {
                    pos,
                    message: format!("expected proposition name, found {tok}"),
                })
            }
        }
        if !cur.eat(&Tok::Comma) {
            break;
        }
    }
    Ok(out)
}

fn expect_word(cur: &mut Cursor, word: &str) -> Result<(), ParseError> {
    let pos = cur.pos();
    match cur.next() {
        (Tok::Ident(s), _) if s == word => Ok(()),
        (tok, _) => {
            Err(ParseError::Syntax { pos, message: format!("expected `{word}`, found {tok}") })
        }
    }
}

fn expect_tok(cur: &mut Cursor, want: Tok) -> Result<(), ParseError> {
    let pos = cur.pos();
    let (tok, _) = cur.next();
    if tok == want {
        Ok(())
    } else {
        Err(ParseError::Syntax { pos, message: format!("expected {want}, found {tok}") })
    }
}

/// Parse a formula in the spec grammar from a token cursor.
pub(crate) fn parse_formula(cur: &mut Cursor) -> Result<Ast, ParseError> {
    parse_iff(cur)
}

/// Parse a standalone formula string (used by tests and tools).
pub fn parse_formula_text(text: &str) -> Result<Ast, ParseError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let ast = parse_formula(&mut cur)?;
    if *cur.peek() != Tok::Eof {
        return Err(ParseError::Syntax {
            pos: cur.pos(),
            message: format!("unexpected {} after formula", cur.peek()),
        });
    }
    Ok(ast)
}

fn parse_iff(cur: &mut Cursor) -> Result<Ast, ParseError> {
    let pos = cur.pos();
    let lhs = parse_implies(cur)?;
    if cur.eat(&Tok::DArrow) {
        let rhs = parse_iff(cur)?;
        Ok(Ast::new(AstNode::Iff(Box::new(lhs), Box::new(rhs)), pos))
    } else {
        Ok(lhs)
    }
}

fn parse_implies(cur: &mut Cursor) -> Result<Ast, ParseError> {
    let pos = cur.pos();
    let lhs = parse_or(cur)?;
    if cur.eat(&Tok::Arrow) {
        let rhs = parse_implies(cur)?;
        Ok(Ast::new(AstNode::Implies(Box::new(lhs), Box::new(rhs)), pos))
    } else {
        Ok(lhs)
    }
}

fn parse_or(cur: &mut Cursor) -> Result<Ast, ParseError> {
    let pos = cur.pos();
    let first = parse_and(cur)?;
    if *cur.peek() != Tok::OrOr {
        return Ok(first);
    }
    let mut children = vec![first];
    while cur.eat(&Tok::OrOr) {
        children.push(parse_and(cur)?);
    }
    Ok(Ast::new(AstNode::Or(children), pos))
}

fn parse_and(cur: &mut Cursor) -> Result<Ast, ParseError> {
    let pos = cur.pos();
    let first = parse_prefix(cur)?;
    if *cur.peek() != Tok::AndAnd {
        return Ok(first);
    }
    let mut children = vec![first];
    while cur.eat(&Tok::AndAnd) {
        children.push(parse_prefix(cur)?);
    }
    Ok(Ast::new(AstNode::And(children), pos))
}

fn parse_prefix(cur: &mut Cursor) -> Result<Ast, ParseError> {
    let pos = cur.pos();
    if cur.eat(&Tok::Bang) {
        let inner = parse_prefix(cur)?;
        return Ok(Ast::new(AstNode::Not(Box::new(inner)), pos));
    }
    for (word, mk) in [
        ("X", AstNode::Next as fn(Box<Ast>) -> AstNode),
        ("G", AstNode::Globally),
        ("F", AstNode::Finally),
        ("A", AstNode::Forall),
        ("E", AstNode::Exists),
    ] {
        if cur.at_ident(word) {
            cur.next();
            let inner = parse_prefix(cur)?;
            return Ok(Ast::new(mk(Box::new(inner)), pos));
        }
    }
    parse_until(cur)
}

fn parse_until(cur: &mut Cursor) -> Result<Ast, ParseError> {
    let pos = cur.pos();
    let lhs = parse_primary(cur)?;
    if cur.at_ident("U") {
        cur.next();
        let rhs = parse_prefix(cur)?;
        return Ok(Ast::new(AstNode::Until(Box::new(lhs), Box::new(rhs)), pos));
    }
    if cur.at_ident("R") {
        cur.next();
        let rhs = parse_prefix(cur)?;
        return Ok(Ast::new(AstNode::Release(Box::new(lhs), Box::new(rhs)), pos));
    }
    Ok(lhs)
}

fn parse_primary(cur: &mut Cursor) -> Result<Ast, ParseError> {
    let pos = cur.pos();
    match cur.next() {
        (Tok::LParen, _) => {
            let inner = parse_formula(cur)?;
            expect_tok(cur, Tok::RParen)?;
            Ok(inner)
        }
        (Tok::Ident(name), _) => match name.as_str() {
            "true" => Ok(Ast::new(AstNode::True, pos)),
            "false" => Ok(Ast::new(AstNode::False, pos)),
            w if RESERVED.contains(&w) => {
                Err(ParseError::Syntax { pos, message: format!("unexpected keyword `{w}`") })
            }
            _ => Ok(Ast::new(AstNode::Ident(name), pos)),
        },
        (tok, _) => {
            Err(ParseError::Syntax { pos, message: format!("expected formula, found {tok}") })
        }
    }
}

/// Convert a general formula tree into a PNF state formula. Negation is
/// pushed to literals with the usual dualities (`!(a U b)` becomes
/// `!a R !b`, `!A phi` becomes `E !phi`, De Morgan on `&&`/`||`), and
/// `->`/`<->`/`G`/`F` are expanded.
pub fn to_pnf(ast: &Ast, props: &BTreeMap<String, Proposition>) -> Result<StateFormula, ParseError> {
    state_pnf(ast, false, props)
}

/// Path-formula counterpart of [`to_pnf`].
pub fn to_pnf_path(
    ast: &Ast,
    props: &BTreeMap<String, Proposition>,
) -> Result<PathFormula, ParseError> {
    path_pnf(ast, false, props)
}

fn resolve(
    name: &str,
    pos: Pos,
    props: &BTreeMap<String, Proposition>,
) -> Result<Proposition, ParseError> {
    props
        .get(name)
        .cloned()
        .ok_or_else(|| ParseError::UndeclaredProposition { pos, name: name.to_string() })
}

fn state_pnf(
    ast: &Ast,
    neg: bool,
    props: &BTreeMap<String, Proposition>,
) -> Result<StateFormula, ParseError> {
    Ok(match &ast.node {
        AstNode::True => {
            if neg {
                StateFormula::False
            } else {
                StateFormula::True
            }
        }
        AstNode::False => {
            if neg {
                StateFormula::True
            } else {
                StateFormula::False
            }
        }
        AstNode::Ident(name) => {
            let p = resolve(name, ast.pos, props)?;
            if p.is_input() {
                return Err(ParseError::InputAtStatePosition {
                    pos: ast.pos,
                    name: name.clone(),
                });
            }
            StateFormula::Lit(super::Lit { prop: p, positive: !neg })
        }
        AstNode::Not(a) => state_pnf(a, !neg, props)?,
        AstNode::And(cs) => {
            let children =
                cs.iter().map(|c| state_pnf(c, neg, props)).collect::<Result<Vec<_>, _>>()?;
            if neg {
                StateFormula::or(children)
            } else {
                StateFormula::and(children)
            }
        }
        AstNode::Or(cs) => {
            let children =
                cs.iter().map(|c| state_pnf(c, neg, props)).collect::<Result<Vec<_>, _>>()?;
            if neg {
                StateFormula::and(children)
            } else {
                StateFormula::or(children)
            }
        }
        AstNode::Implies(a, b) => {
            if neg {
                // !(a -> b) = a && !b
                StateFormula::and(vec![state_pnf(a, false, props)?, state_pnf(b, true, props)?])
            } else {
                StateFormula::or(vec![state_pnf(a, true, props)?, state_pnf(b, false, props)?])
            }
        }
        AstNode::Iff(a, b) => {
            // a <-> b = (a && b) || (!a && !b); negated: (a && !b) || (!a && b)
            let pp = StateFormula::and(vec![state_pnf(a, false, props)?, state_pnf(b, neg, props)?]);
            let nn = StateFormula::and(vec![state_pnf(a, true, props)?, state_pnf(b, !neg, props)?]);
            StateFormula::or(vec![pp, nn])
        }
        AstNode::Forall(a) => {
            if neg {
                StateFormula::Exists(path_pnf(a, true, props)?)
            } else {
                StateFormula::Forall(path_pnf(a, false, props)?)
            }
        }
        AstNode::Exists(a) => {
            if neg {
                StateFormula::Forall(path_pnf(a, true, props)?)
            } else {
                StateFormula::Exists(path_pnf(a, false, props)?)
            }
        }
        AstNode::Next(_)
        | AstNode::Globally(_)
        | AstNode::Finally(_)
        | AstNode::Until(..)
        | AstNode::Release(..) => {
            return Err(ParseError::TemporalAtStatePosition { pos: ast.pos })
        }
    })
}

fn path_pnf(
    ast: &Ast,
    neg: bool,
    props: &BTreeMap<String, Proposition>,
) -> Result<PathFormula, ParseError> {
    Ok(match &ast.node {
        AstNode::True => {
            if neg {
                PathFormula::False
            } else {
                PathFormula::True
            }
        }
        AstNode::False => {
            if neg {
                PathFormula::True
            } else {
                PathFormula::False
            }
        }
        AstNode::Ident(name) => {
            let p = resolve(name, ast.pos, props)?;
            PathFormula::lit(p, !neg)
        }
        AstNode::Not(a) => path_pnf(a, !neg, props)?,
        AstNode::And(cs) => {
            let children =
                cs.iter().map(|c| path_pnf(c, neg, props)).collect::<Result<Vec<_>, _>>()?;
            if neg {
                PathFormula::or(children)
            } else {
                PathFormula::and(children)
            }
        }
        AstNode::Or(cs) => {
            let children =
                cs.iter().map(|c| path_pnf(c, neg, props)).collect::<Result<Vec<_>, _>>()?;
            if neg {
                PathFormula::and(children)
            } else {
                PathFormula::or(children)
            }
        }
        AstNode::Implies(a, b) => {
            if neg {
                PathFormula::and(vec![path_pnf(a, false, props)?, path_pnf(b, true, props)?])
            } else {
                PathFormula::or(vec![path_pnf(a, true, props)?, path_pnf(b, false, props)?])
            }
        }
        AstNode::Iff(a, b) => {
            let pp = PathFormula::and(vec![path_pnf(a, false, props)?, path_pnf(b, neg, props)?]);
            let nn = PathFormula::and(vec![path_pnf(a, true, props)?, path_pnf(b, !neg, props)?]);
            PathFormula::or(vec![pp, nn])
        }
        AstNode::Next(a) => PathFormula::next(path_pnf(a, neg, props)?),
        AstNode::Globally(a) => {
            if neg {
                PathFormula::finally(path_pnf(a, true, props)?)
            } else {
                PathFormula::globally(path_pnf(a, false, props)?)
            }
        }
        AstNode::Finally(a) => {
            if neg {
                PathFormula::globally(path_pnf(a, true, props)?)
            } else {
                PathFormula::finally(path_pnf(a, false, props)?)
            }
        }
        AstNode::Until(a, b) => {
            let (la, lb) = (path_pnf(a, neg, props)?, path_pnf(b, neg, props)?);
            if neg {
                PathFormula::release(la, lb)
            } else {
                PathFormula::until(la, lb)
            }
        }
        AstNode::Release(a, b) => {
            let (la, lb) = (path_pnf(a, neg, props)?, path_pnf(b, neg, props)?);
            if neg {
                PathFormula::until(la, lb)
            } else {
                PathFormula::release(la, lb)
            }
        }
        AstNode::Forall(a) => {
            if neg {
                PathFormula::Exists(Box::new(path_pnf(a, true, props)?))
            } else {
                PathFormula::Forall(Box::new(path_pnf(a, false, props)?))
            }
        }
        AstNode::Exists(a) => {
            if neg {
                PathFormula::Forall(Box::new(path_pnf(a, true, props)?))
            } else {
                PathFormula::Exists(Box::new(path_pnf(a, false, props)?))
            }
        }
    })
}
