//! Structural analysis over PNF formulas: quantified-subformula extraction,
//! substitution of quantified subformulas by atoms, PNF negation, and AST
//! size metrics.

use std::collections::{BTreeMap, HashSet};

use super::{PathFormula, Quant, Spec, StateFormula};

/// A quantified subformula: the quantifier kind and its path-formula body
/// (with nested quantified subformulas still embedded).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuantifiedSub {
    pub quant: Quant,
    pub body: PathFormula,
}

impl QuantifiedSub {
    pub fn new(quant: Quant, body: PathFormula) -> Self {
        QuantifiedSub { quant, body }
    }
}

impl std::fmt::Display for QuantifiedSub {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.quant {
            Quant::Universal => write!(f, "A ({})", self.body),
            Quant::Existential => write!(f, "E ({})", self.body),
        }
    }
}

/// All quantified subformulas of the spec in bottom-up order (inner before
/// outer, left to right), syntactically deduplicated.
pub fn quantified_subformulas(spec: &Spec) -> Vec<QuantifiedSub> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    collect_state(&spec.formula, &mut out, &mut seen);
    out
}

fn push_sub(sub: QuantifiedSub, out: &mut Vec<QuantifiedSub>, seen: &mut HashSet<QuantifiedSub>) {
    if seen.insert(sub.clone()) {
        out.push(sub);
    }
}

fn collect_state(f: &StateFormula, out: &mut Vec<QuantifiedSub>, seen: &mut HashSet<QuantifiedSub>) {
    match f {
        StateFormula::True | StateFormula::False | StateFormula::Lit(_) => {}
        StateFormula::And(cs) | StateFormula::Or(cs) => {
            for c in cs {
                collect_state(c, out, seen);
            }
        }
        StateFormula::Forall(p) => {
            collect_path(p, out, seen);
            push_sub(QuantifiedSub::new(Quant::Universal, p.clone()), out, seen);
        }
        StateFormula::Exists(p) => {
            collect_path(p, out, seen);
            push_sub(QuantifiedSub::new(Quant::Existential, p.clone()), out, seen);
        }
    }
}

fn collect_path(f: &PathFormula, out: &mut Vec<QuantifiedSub>, seen: &mut HashSet<QuantifiedSub>) {
    match f {
        PathFormula::True | PathFormula::False | PathFormula::Lit(_) => {}
        PathFormula::And(cs) | PathFormula::Or(cs) => {
            for c in cs {
                collect_path(c, out, seen);
            }
        }
        PathFormula::Next(a) => collect_path(a, out, seen),
        PathFormula::Until(a, b) | PathFormula::Release(a, b) => {
            collect_path(a, out, seen);
            collect_path(b, out, seen);
        }
        PathFormula::Forall(b) => {
            collect_path(b, out, seen);
            push_sub(QuantifiedSub::new(Quant::Universal, (**b).clone()), out, seen);
        }
        PathFormula::Exists(b) => {
            collect_path(b, out, seen);
            push_sub(QuantifiedSub::new(Quant::Existential, (**b).clone()), out, seen);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no substitution entry for quantified subformula `{0}`")]
pub struct SubstError(pub String);

/// Replace every embedded quantified subformula by its table entry. The
/// result contains no quantifier nodes; table entries are inserted verbatim
/// (no recursion into replacements).
pub fn substitute(
    path: &PathFormula,
    table: &BTreeMap<QuantifiedSub, PathFormula>,
) -> Result<PathFormula, SubstError> {
    Ok(match path {
        PathFormula::True | PathFormula::False | PathFormula::Lit(_) => path.clone(),
        PathFormula::And(cs) => PathFormula::And(
            cs.iter().map(|c| substitute(c, table)).collect::<Result<Vec<_>, _>>()?,
        ),
        PathFormula::Or(cs) => {
            PathFormula::Or(cs.iter().map(|c| substitute(c, table)).collect::<Result<Vec<_>, _>>()?)
        }
        PathFormula::Next(a) => PathFormula::next(substitute(a, table)?),
        PathFormula::Until(a, b) => {
            PathFormula::until(substitute(a, table)?, substitute(b, table)?)
        }
        PathFormula::Release(a, b) => {
            PathFormula::release(substitute(a, table)?, substitute(b, table)?)
        }
        PathFormula::Forall(b) => lookup(Quant::Universal, b, table)?,
        PathFormula::Exists(b) => lookup(Quant::Existential, b, table)?,
    })
}

/// Replace the quantified subformulas of a state formula, producing the
/// quantifier-free boolean skeleton as a path formula.
pub fn substitute_state(
    state: &StateFormula,
    table: &BTreeMap<QuantifiedSub, PathFormula>,
) -> Result<PathFormula, SubstError> {
    Ok(match state {
        StateFormula::True => PathFormula::True,
        StateFormula::False => PathFormula::False,
        StateFormula::Lit(l) => PathFormula::Lit(l.clone()),
        StateFormula::And(cs) => PathFormula::And(
            cs.iter().map(|c| substitute_state(c, table)).collect::<Result<Vec<_>, _>>()?,
        ),
        StateFormula::Or(cs) => PathFormula::Or(
            cs.iter().map(|c| substitute_state(c, table)).collect::<Result<Vec<_>, _>>()?,
        ),
        StateFormula::Forall(b) => lookup(Quant::Universal, b, table)?,
        StateFormula::Exists(b) => lookup(Quant::Existential, b, table)?,
    })
}

fn lookup(
    quant: Quant,
    body: &PathFormula,
    table: &BTreeMap<QuantifiedSub, PathFormula>,
) -> Result<PathFormula, SubstError> {
    let key = QuantifiedSub::new(quant, body.clone());
    table.get(&key).cloned().ok_or_else(|| SubstError(key.to_string()))
}

/// Node count of the non-reduced tree. Literals, connectives, temporal
/// operators and quantifiers count one each; the sugared forms `G`/`F`
/// count as a single node even though they are stored as `false R`/`true U`;
/// an n-ary `&&`/`||` of n children counts as n-1 binary connectives.
pub fn ast_size(f: &StateFormula) -> u64 {
    match f {
        StateFormula::True | StateFormula::False | StateFormula::Lit(_) => 1,
        StateFormula::And(cs) | StateFormula::Or(cs) => {
            (cs.len() as u64 - 1) + cs.iter().map(ast_size).sum::<u64>()
        }
        StateFormula::Forall(p) | StateFormula::Exists(p) => 1 + ast_size_path(p),
    }
}

/// Path-formula counterpart of [`ast_size`].
pub fn ast_size_path(f: &PathFormula) -> u64 {
    match f {
        PathFormula::True | PathFormula::False | PathFormula::Lit(_) => 1,
        PathFormula::And(cs) | PathFormula::Or(cs) => {
            (cs.len() as u64 - 1) + cs.iter().map(ast_size_path).sum::<u64>()
        }
        PathFormula::Next(a) => 1 + ast_size_path(a),
        PathFormula::Release(a, b) if **a == PathFormula::False => 1 + ast_size_path(b), // G
        PathFormula::Until(a, b) if **a == PathFormula::True => 1 + ast_size_path(b),    // F
        PathFormula::Until(a, b) | PathFormula::Release(a, b) => {
            1 + ast_size_path(a) + ast_size_path(b)
        }
        PathFormula::Forall(b) | PathFormula::Exists(b) => 1 + ast_size_path(b),
    }
}

/// True iff the formula is `A(phi)` with quantifier-free `phi` — the fast
/// path where the reduction is unnecessary.
pub fn is_pure_ltl(spec: &Spec) -> bool {
    match &spec.formula {
        StateFormula::Forall(p) => p.is_quantifier_free(),
        _ => false,
    }
}

/// PNF negation of a path formula: dualize every node, flip literals.
/// Embedded quantifiers flip `A`/`E` and negate their bodies.
pub fn pnf_negate_path(f: &PathFormula) -> PathFormula {
    match f {
        PathFormula::True => PathFormula::False,
        PathFormula::False => PathFormula::True,
        PathFormula::Lit(l) => PathFormula::Lit(l.negated()),
        PathFormula::And(cs) => PathFormula::Or(cs.iter().map(pnf_negate_path).collect()),
        PathFormula::Or(cs) => PathFormula::And(cs.iter().map(pnf_negate_path).collect()),
        PathFormula::Next(a) => PathFormula::next(pnf_negate_path(a)),
        PathFormula::Until(a, b) => PathFormula::release(pnf_negate_path(a), pnf_negate_path(b)),
        PathFormula::Release(a, b) => PathFormula::until(pnf_negate_path(a), pnf_negate_path(b)),
        PathFormula::Forall(b) => PathFormula::Exists(Box::new(pnf_negate_path(b))),
        PathFormula::Exists(b) => PathFormula::Forall(Box::new(pnf_negate_path(b))),
    }
}

/// Panics if the formula still contains a quantifier; used as a precondition
/// check where pure LTL is required.
pub fn assert_quantifier_free(f: &PathFormula) {
    assert!(f.is_quantifier_free(), "expected quantifier-free formula, got `{f}`");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula_text, parse_spec, to_pnf, to_pnf_path, Proposition};

    fn props_rg() -> BTreeMap<String, Proposition> {
        let mut m = BTreeMap::new();
        m.insert("r".to_string(), Proposition::input("r"));
        m.insert("g".to_string(), Proposition::output("g"));
        m
    }

    #[test]
    fn pnf_until_negation_dualizes() {
        let props = props_rg();
        let ast = parse_formula_text("!(r U g)").unwrap();
        let f = to_pnf_path(&ast, &props).unwrap();
        assert_eq!(f.to_string(), "(!r) R !g");
    }

    #[test]
    fn pnf_quantifier_negation_dualizes() {
        let props = props_rg();
        let ast = parse_formula_text("!A G g").unwrap();
        let f = to_pnf(&ast, &props).unwrap();
        assert_eq!(f.to_string(), "E F !g");
    }

    #[test]
    fn pnf_double_negation_cancels() {
        let props = props_rg();
        let ast = parse_formula_text("!!g").unwrap();
        let f = to_pnf(&ast, &props).unwrap();
        assert_eq!(f.to_string(), "g");
    }

    #[test]
    fn pnf_is_idempotent() {
        // Re-parsing a printed PNF formula is a fixpoint.
        let spec =
            parse_spec("INPUTS r; OUTPUTS g; FORMULA (A G (r -> F g)) && (E (!g U g));").unwrap();
        let printed = format!(
            "INPUTS r; OUTPUTS g; FORMULA {};",
            spec.formula
        );
        let spec2 = parse_spec(&printed).unwrap();
        assert_eq!(spec.formula, spec2.formula);
    }

    #[test]
    fn subformula_order_is_bottom_up() {
        let spec = parse_spec(
            "INPUTS r; OUTPUTS g; FORMULA (E G !g) && (A G (E F !g)) && (E F g);",
        )
        .unwrap();
        let subs = quantified_subformulas(&spec);
        let shown: Vec<String> = subs.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            shown,
            vec!["E (G !g)", "E (F !g)", "A (G E F !g)", "E (F g)"]
        );
    }

    #[test]
    fn subformula_single_quantifier() {
        let spec = parse_spec("INPUTS r; OUTPUTS g; FORMULA A G g;").unwrap();
        let subs = quantified_subformulas(&spec);
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].to_string(), "A (G g)");
    }

    #[test]
    fn subformula_inner_before_outer() {
        let spec =
            parse_spec("INPUTS r; OUTPUTS g; FORMULA E G (E X (g && X (g && F !g)));").unwrap();
        let subs = quantified_subformulas(&spec);
        assert_eq!(subs.len(), 2);
        assert_eq!(subs[0].to_string(), "E (X (g && X (g && F !g)))");
        assert!(subs[1].to_string().starts_with("E (G"));
    }

    #[test]
    fn subformulas_are_deduplicated() {
        let spec =
            parse_spec("INPUTS r; OUTPUTS g; FORMULA (E F g) && (E F g) && (A (E F g) U g);")
                .unwrap();
        let subs = quantified_subformulas(&spec);
        // E F g appears three times but is recorded once.
        assert_eq!(subs.iter().filter(|s| s.to_string() == "E (F g)").count(), 1);
    }

    #[test]
    fn substitute_replaces_all_quantifiers() {
        let props = props_rg();
        let ast = parse_formula_text("G (E X g)").unwrap();
        let f = to_pnf_path(&ast, &props).unwrap();
        let inner = to_pnf_path(&parse_formula_text("X g").unwrap(), &props).unwrap();
        let mut table = BTreeMap::new();
        table.insert(
            QuantifiedSub::new(Quant::Existential, inner),
            PathFormula::lit(Proposition::fresh("v0__x"), true),
        );
        let out = substitute(&f, &table).unwrap();
        assert_eq!(out.to_string(), "G v0__x");
        assert!(out.is_quantifier_free());
    }

    #[test]
    fn substitute_identity_when_no_quantifier() {
        let props = props_rg();
        let f = to_pnf_path(&parse_formula_text("g U (r && X g)").unwrap(), &props).unwrap();
        let out = substitute(&f, &BTreeMap::new()).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn substitute_missing_entry_errors() {
        let props = props_rg();
        let f = to_pnf_path(&parse_formula_text("E F g").unwrap(), &props).unwrap();
        assert!(substitute(&f, &BTreeMap::new()).is_err());
    }

    #[test]
    fn ast_size_counts_sugar_as_one() {
        let props = props_rg();
        let g = to_pnf(&parse_formula_text("g").unwrap(), &props).unwrap();
        assert_eq!(ast_size(&g), 1);
        let agg = to_pnf(&parse_formula_text("A G g").unwrap(), &props).unwrap();
        assert_eq!(ast_size(&agg), 3);
        let impl_f = to_pnf(&parse_formula_text("A G (r -> F g)").unwrap(), &props).unwrap();
        // A + G + || + !r + F + g
        assert_eq!(ast_size(&impl_f), 6);
    }

    #[test]
    fn pure_ltl_detection() {
        let pure = parse_spec("INPUTS r; OUTPUTS g; FORMULA A G (r -> F g);").unwrap();
        assert!(is_pure_ltl(&pure));
        let mixed = parse_spec(
            "INPUTS r; OUTPUTS g; FORMULA (E G !g) && (A G (E F !g)) && (E F g);",
        )
        .unwrap();
        assert!(!is_pure_ltl(&mixed));
        let nested = parse_spec("INPUTS r; OUTPUTS g; FORMULA A G (E F !g);").unwrap();
        assert!(!is_pure_ltl(&nested));
    }

    #[test]
    fn negate_path_is_involutive() {
        let props = props_rg();
        let f = to_pnf_path(
            &parse_formula_text("(r U g) && X (g R (r || F g))").unwrap(),
            &props,
        )
        .unwrap();
        assert_eq!(pnf_negate_path(&pnf_negate_path(&f)), f);
    }
}
