//! The CTL*-to-LTL encoding: fresh witness-ID and direction propositions,
//! per-subformula conjuncts, the top-level conjunction, bit-level
//! realization of integer witness IDs, optional universal inlining, and the
//! bounded-k mode.
//!
//! For every existential subformula `E phi` the system gets witness-ID
//! output bits encoding a value `v` in `{0..k}`; `v = j` at a state claims
//! that the path following the direction bits `d_j` from that state
//! satisfies `phi`. For every universal subformula `A phi` a single output
//! `p` is introduced with the obligation `G (p -> phi')`. `k` defaults to
//! the summed state counts of the existential-subformula automata, which
//! bounds the number of non-equivalent witness paths through any state.

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use crate::automata::{nbw_of_path_formula, Basis};
use crate::logic::{
    pnf_negate_path, quantified_subformulas, substitute, substitute_state, ast_size_path,
    PathFormula, Proposition, Quant, QuantifiedSub, Spec, StateFormula,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReduceError {
    #[error("witness bound k=0 is not allowed when existential subformulas are present")]
    ZeroK,
    #[error("witness index {j} out of range 1..={k}")]
    IndexOutOfRange { j: u32, k: u32 },
    #[error("fresh proposition `{name}` collides with a declared proposition")]
    NameCollision { name: String },
    #[error(transparent)]
    Substitution(#[from] crate::logic::SubstError),
}

/// Ledger of the fresh output propositions introduced by the reduction.
/// Names are deterministic functions of the canonical subformula print.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreshLedger {
    pub k: u32,
    /// Bits per witness ID, `ceil(log2(k+1))`.
    pub width: u32,
    pub existentials: Vec<ExistentialEntry>,
    pub universals: Vec<UniversalEntry>,
    /// `directions[j-1][i]` is the direction bit of witness ID j for the
    /// i-th input (inputs in spec order); shared across all existential
    /// subformulas.
    pub directions: Vec<Vec<Proposition>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExistentialEntry {
    pub sub: QuantifiedSub,
    /// Witness-ID bits, least significant first.
    pub id_bits: Vec<Proposition>,
    /// Stable 8-hex digest of the canonical subformula print.
    pub hash: String,
}

impl ExistentialEntry {
    /// Decode the witness ID carried by an output valuation.
    pub fn id_value(&self, v: &crate::logic::Valuation) -> u32 {
        self.id_bits
            .iter()
            .enumerate()
            .map(|(b, p)| if v.contains(p) { 1 << b } else { 0 })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniversalEntry {
    pub sub: QuantifiedSub,
    /// `None` when the universal was inlined instead of named.
    pub prop: Option<Proposition>,
    pub hash: String,
}

impl FreshLedger {
    /// All fresh propositions, in output-declaration order.
    pub fn fresh_outputs(&self) -> Vec<Proposition> {
        let mut out = Vec::new();
        for u in &self.universals {
            if let Some(p) = &u.prop {
                out.push(p.clone());
            }
        }
        for e in &self.existentials {
            out.extend(e.id_bits.iter().cloned());
        }
        for row in &self.directions {
            out.extend(row.iter().cloned());
        }
        out
    }

    pub fn existential_index(&self, sub: &QuantifiedSub) -> Option<usize> {
        self.existentials.iter().position(|e| e.sub == *sub)
    }
}

/// The reduced specification: original inputs, original plus fresh outputs,
/// and a quantifier-free formula (implicitly A-quantified). `sugared` keeps
/// `v = j`-style atoms as single pseudo-propositions; it is used for size
/// metrics and human-readable display only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedSpec {
    pub inputs: Vec<Proposition>,
    pub outputs: Vec<Proposition>,
    pub formula: PathFormula,
    pub sugared: PathFormula,
    pub ledger: FreshLedger,
}

impl ReducedSpec {
    /// View as a plain spec with the formula universally quantified.
    pub fn to_spec(&self) -> Spec {
        Spec::new(
            self.inputs.clone(),
            self.outputs.clone(),
            StateFormula::Forall(self.formula.clone()),
        )
    }
}

fn hash8(sub: &QuantifiedSub) -> String {
    let digest = Sha256::digest(sub.to_string().as_bytes());
    digest[..4].iter().map(|b| format!("{b:02x}")).collect()
}

fn bit_width(k: u32) -> u32 {
    let mut w = 0;
    while (1u64 << w) < u64::from(k) + 1 {
        w += 1;
    }
    w
}

/// Witness bound: summed state counts of the NBWs of the existential
/// subformula bodies, with embedded quantified subformulas replaced by
/// placeholder atoms (the state count does not depend on how the atoms are
/// later bit-blasted). Zero when there is no existential subformula.
pub fn compute_k(spec: &Spec) -> u32 {
    let subs = quantified_subformulas(spec);
    let table = placeholder_table(&subs);
    let mut k = 0u32;
    for sub in &subs {
        if sub.quant != Quant::Existential {
            continue;
        }
        let body = substitute(&sub.body, &table).expect("placeholder table covers all subformulas");
        let mut props = BTreeSet::new();
        body.props(&mut props);
        let a = nbw_of_path_formula(&body, &Basis::new(props));
        k += a.state_count() as u32;
    }
    k
}

fn placeholder_table(subs: &[QuantifiedSub]) -> BTreeMap<QuantifiedSub, PathFormula> {
    subs.iter()
        .enumerate()
        .map(|(i, s)| {
            (s.clone(), PathFormula::lit(Proposition::fresh(format!("_q{i}")), true))
        })
        .collect()
}

/// Per-existential-subformula automaton sizes, in bottom-up order; their sum
/// is [`compute_k`].
pub fn existential_automaton_sizes(spec: &Spec) -> Vec<(QuantifiedSub, usize)> {
    let subs = quantified_subformulas(spec);
    let table = placeholder_table(&subs);
    subs.iter()
        .filter(|s| s.quant == Quant::Existential)
        .map(|sub| {
            let body =
                substitute(&sub.body, &table).expect("placeholder table covers all subformulas");
            let mut props = BTreeSet::new();
            body.props(&mut props);
            let a = nbw_of_path_formula(&body, &Basis::new(props));
            (sub.clone(), a.state_count())
        })
        .collect()
}

/// `follow_j`: the path always takes the input valuation encoded by the
/// `d_j` bits. Per input this is the biconditional `(d && i) || (!d && !i)`;
/// under the shifted reading an output bit at a state constrains the edge
/// leaving that state.
pub fn follow_constraint(
    j: u32,
    inputs: &[Proposition],
    ledger: &FreshLedger,
) -> Result<PathFormula, ReduceError> {
    if j == 0 || j > ledger.k {
        return Err(ReduceError::IndexOutOfRange { j, k: ledger.k });
    }
    let row = &ledger.directions[(j - 1) as usize];
    Ok(PathFormula::and(
        inputs
            .iter()
            .enumerate()
            .map(|(i, inp)| {
                let d = row[i].clone();
                PathFormula::or(vec![
                    PathFormula::and(vec![
                        PathFormula::lit(d.clone(), true),
                        PathFormula::lit(inp.clone(), true),
                    ]),
                    PathFormula::and(vec![
                        PathFormula::lit(d, false),
                        PathFormula::lit(inp.clone(), false),
                    ]),
                ])
            })
            .collect(),
    ))
}

/// Negation of the bit pattern `v = j`, as a flat disjunction of flipped
/// literals.
fn v_neq(entry: &ExistentialEntry, j: u32) -> Vec<PathFormula> {
    entry
        .id_bits
        .iter()
        .enumerate()
        .map(|(b, p)| PathFormula::lit(p.clone(), j & (1 << b) == 0))
        .collect()
}

/// `v != 0`: some ID bit is set.
fn v_nonzero(entry: &ExistentialEntry) -> PathFormula {
    PathFormula::or(entry.id_bits.iter().map(|p| PathFormula::lit(p.clone(), true)).collect())
}

/// The conjunct family for one existential subformula:
/// for each witness ID j, globally `v = j` implies that following the `d_j`
/// directions forever yields `phi'`.
pub fn encode_existential(
    e_index: usize,
    ledger: &FreshLedger,
    phi_prime: &PathFormula,
    inputs: &[Proposition],
) -> PathFormula {
    let entry = &ledger.existentials[e_index];
    let mut conjuncts = Vec::new();
    for j in 1..=ledger.k {
        let follow = follow_constraint(j, inputs, ledger).expect("j in range");
        let mut disjuncts = v_neq(entry, j);
        disjuncts.push(PathFormula::finally(pnf_negate_path(&follow)));
        disjuncts.push(phi_prime.clone());
        conjuncts.push(PathFormula::globally(PathFormula::or(disjuncts)));
    }
    PathFormula::and(conjuncts)
}

/// The conjunct for one universal subformula: globally `p` implies `phi'`
/// (implication only; the top-level skeleton forces `p` where needed).
pub fn encode_universal(u_index: usize, ledger: &FreshLedger, phi_prime: &PathFormula) -> PathFormula {
    let p = ledger.universals[u_index]
        .prop
        .clone()
        .expect("encode_universal requires a named universal");
    PathFormula::globally(PathFormula::or(vec![
        PathFormula::lit(p, false),
        phi_prime.clone(),
    ]))
}

/// Range conjunct excluding unrepresentable and out-of-range bit patterns:
/// globally none of the patterns in `k+1 .. 2^width` holds. Without it a
/// system could claim `v != 0` with an ID that carries no obligation.
fn range_constraint(entry: &ExistentialEntry, k: u32, width: u32) -> Option<PathFormula> {
    if (1u64 << width) <= u64::from(k) + 1 {
        return None;
    }
    let mut conj = Vec::new();
    for j in (k + 1)..(1u32 << width) {
        conj.push(PathFormula::or(v_neq(entry, j)));
    }
    Some(PathFormula::globally(PathFormula::and(conj)))
}

/// Reduce a CTL* specification to an equirealisable LTL specification.
///
/// `k_override` fixes the witness bound (bounded mode; a smaller k may
/// still be realisable and is sound by monotonicity). `inline_universal`
/// replaces universal propositions by their bodies instead of naming them.
pub fn reduce(
    spec: &Spec,
    k_override: Option<u32>,
    inline_universal: bool,
) -> Result<ReducedSpec, ReduceError> {
    let subs = quantified_subformulas(spec);
    let has_existential = subs.iter().any(|s| s.quant == Quant::Existential);
    let k = match k_override {
        Some(0) if has_existential => return Err(ReduceError::ZeroK),
        Some(k) => {
            if !has_existential {
                log::warn!("k override given but the formula has no existential subformula");
                0
            } else {
                k
            }
        }
        None => compute_k(spec),
    };
    let width = bit_width(k);

    // Fresh names; collisions with declared propositions are rejected.
    let mut taken: BTreeSet<String> =
        spec.all_props().map(|p| p.name().to_string()).collect();
    let mut claim = |name: String| -> Result<Proposition, ReduceError> {
        if !taken.insert(name.clone()) {
            return Err(ReduceError::NameCollision { name });
        }
        Ok(Proposition::fresh(name))
    };

    let mut existentials = Vec::new();
    let mut universals = Vec::new();
    for sub in &subs {
        let hash = hash8(sub);
        match sub.quant {
            Quant::Existential => {
                let id_bits = (0..width)
                    .map(|b| claim(format!("v{b}__{hash}")))
                    .collect::<Result<Vec<_>, _>>()?;
                existentials.push(ExistentialEntry { sub: sub.clone(), id_bits, hash });
            }
            Quant::Universal => {
                let prop = if inline_universal {
                    None
                } else {
                    Some(claim(format!("p__{hash}"))?)
                };
                universals.push(UniversalEntry { sub: sub.clone(), prop, hash });
            }
        }
    }
    let directions = (1..=k)
        .map(|j| {
            spec.inputs
                .iter()
                .map(|i| claim(format!("d{j}__{}", i.name())))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let ledger = FreshLedger { k, width, existentials, universals, directions };

    // Substitution tables, built bottom-up so that inlined universal bodies
    // already have their own inner subformulas replaced.
    let mut table: BTreeMap<QuantifiedSub, PathFormula> = BTreeMap::new();
    let mut sugar_table: BTreeMap<QuantifiedSub, PathFormula> = BTreeMap::new();
    for sub in &subs {
        match sub.quant {
            Quant::Existential => {
                let i = ledger.existential_index(sub).unwrap();
                let entry = &ledger.existentials[i];
                table.insert(sub.clone(), v_nonzero(entry));
                sugar_table.insert(
                    sub.clone(),
                    PathFormula::lit(Proposition::fresh(format!("vnz__{}", entry.hash)), true),
                );
            }
            Quant::Universal => {
                let u = ledger.universals.iter().position(|e| e.sub == *sub).unwrap();
                match &ledger.universals[u].prop {
                    Some(p) => {
                        table.insert(sub.clone(), PathFormula::lit(p.clone(), true));
                        sugar_table
                            .insert(sub.clone(), PathFormula::lit(p.clone(), true));
                    }
                    None => {
                        let body = substitute(&sub.body, &table)?;
                        let body_sugar = substitute(&sub.body, &sugar_table)?;
                        table.insert(sub.clone(), body);
                        sugar_table.insert(sub.clone(), body_sugar);
                    }
                }
            }
        }
    }

    // Top-level skeleton plus one conjunct family per subformula, plus
    // range constraints.
    let mut conjuncts = vec![substitute_state(&spec.formula, &table)?];
    let mut sugar_conjuncts = vec![substitute_state(&spec.formula, &sugar_table)?];

    for (i, entry) in ledger.existentials.iter().enumerate() {
        let phi_prime = substitute(&entry.sub.body, &table)?;
        conjuncts.push(encode_existential(i, &ledger, &phi_prime, &spec.inputs));

        let phi_sugar = substitute(&entry.sub.body, &sugar_table)?;
        let mut js = Vec::new();
        for j in 1..=k {
            js.push(PathFormula::globally(PathFormula::or(vec![
                PathFormula::lit(
                    Proposition::fresh(format!("veq{j}__{}", entry.hash)),
                    false,
                ),
                PathFormula::finally(PathFormula::lit(
                    Proposition::fresh(format!("dir{j}")),
                    false,
                )),
                phi_sugar.clone(),
            ])));
        }
        sugar_conjuncts.push(PathFormula::and(js));
    }

    for (u, entry) in ledger.universals.iter().enumerate() {
        if entry.prop.is_none() {
            continue;
        }
        let phi_prime = substitute(&entry.sub.body, &table)?;
        conjuncts.push(encode_universal(u, &ledger, &phi_prime));
        let phi_sugar = substitute(&entry.sub.body, &sugar_table)?;
        sugar_conjuncts.push(PathFormula::globally(PathFormula::or(vec![
            PathFormula::lit(entry.prop.clone().unwrap(), false),
            phi_sugar,
        ])));
    }

    for entry in &ledger.existentials {
        if let Some(rc) = range_constraint(entry, k, width) {
            conjuncts.push(rc);
            sugar_conjuncts.push(PathFormula::globally(PathFormula::lit(
                Proposition::fresh(format!("vrange__{}", entry.hash)),
                true,
            )));
        }
    }

    let formula = PathFormula::and(conjuncts);
    debug_assert!(formula.is_quantifier_free());

    let mut outputs = spec.outputs.clone();
    outputs.extend(ledger.fresh_outputs());

    Ok(ReducedSpec {
        inputs: spec.inputs.clone(),
        outputs,
        formula,
        sugared: PathFormula::and(sugar_conjuncts),
        ledger,
    })
}

/// AST node count of the reduced formula with `v = j`-style atoms counted as
/// one node (the pre-bit-blasting view).
pub fn formula_size_reduced(r: &ReducedSpec) -> u64 {
    ast_size_path(&r.sugared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_spec;

    fn example_mixed() -> Spec {
        parse_spec("INPUTS r; OUTPUTS g; FORMULA (E G !g) && (A G (E F !g)) && (E F g);")
            .unwrap()
    }

    fn example_nested_next() -> Spec {
        parse_spec("INPUTS r; OUTPUTS g; FORMULA E X (g && X (g && F !g));").unwrap()
    }

    #[test]
    fn witness_bound_zero_without_existentials() {
        let spec = parse_spec("INPUTS r; OUTPUTS g; FORMULA A G g;").unwrap();
        assert_eq!(compute_k(&spec), 0);
    }

    #[test]
    fn witness_bound_of_mixed_example_golden() {
        // G!g contributes 1, F!g and Fg contribute 2 each with this
        // construction: total 5 (frozen).
        assert_eq!(compute_k(&example_mixed()), 5);
    }

    #[test]
    fn witness_bound_of_nested_next_golden() {
        assert_eq!(compute_k(&example_nested_next()), 5);
    }

    #[test]
    fn follow_constraint_shapes() {
        let spec = example_nested_next();
        let red = reduce(&spec, Some(2), false).unwrap();
        let f = follow_constraint(2, &spec.inputs, &red.ledger).unwrap();
        assert_eq!(f.to_string(), "d2__r && r || !d2__r && !r");
        assert!(follow_constraint(3, &spec.inputs, &red.ledger).is_err());
        // No inputs: the constraint is vacuous.
        let spec2 = parse_spec("INPUTS ; OUTPUTS g; FORMULA E F g;").unwrap();
        let red2 = reduce(&spec2, Some(1), false).unwrap();
        assert_eq!(
            follow_constraint(1, &spec2.inputs, &red2.ledger).unwrap(),
            PathFormula::True
        );
        // Two inputs: one biconditional per input.
        let spec3 = parse_spec("INPUTS a, b; OUTPUTS g; FORMULA E F g;").unwrap();
        let red3 = reduce(&spec3, Some(1), false).unwrap();
        let f3 = follow_constraint(1, &spec3.inputs, &red3.ledger).unwrap();
        match f3 {
            PathFormula::And(cs) => assert_eq!(cs.len(), 2),
            other => panic!("expected conjunction, got {other}"),
        }
    }

    #[test]
    fn reduced_formula_is_quantifier_free_with_complete_ledger() {
        let red = reduce(&example_mixed(), None, false).unwrap();
        assert!(red.formula.is_quantifier_free());
        assert_eq!(red.ledger.k, 5);
        assert_eq!(red.ledger.width, 3);
        assert_eq!(red.ledger.existentials.len(), 3);
        assert_eq!(red.ledger.universals.len(), 1);
        assert_eq!(red.ledger.directions.len(), 5);

        // Every fresh proposition in the formula has a ledger entry and
        // conversely every ledger proposition occurs in the formula.
        let mut in_formula = BTreeSet::new();
        red.formula.props(&mut in_formula);
        let declared: BTreeSet<Proposition> =
            example_mixed().all_props().cloned().collect();
        let fresh_in_formula: BTreeSet<Proposition> =
            in_formula.difference(&declared).cloned().collect();
        let ledger_set: BTreeSet<Proposition> =
            red.ledger.fresh_outputs().into_iter().collect();
        assert_eq!(fresh_in_formula, ledger_set);
    }

    #[test]
    fn reduction_is_deterministic() {
        let a = reduce(&example_mixed(), None, false).unwrap();
        let b = reduce(&example_mixed(), None, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pure_ltl_with_inlining_stays_plain() {
        let spec = parse_spec("INPUTS r; OUTPUTS g; FORMULA A G (r -> F g);").unwrap();
        let red = reduce(&spec, None, true).unwrap();
        assert_eq!(red.ledger.k, 0);
        assert!(red.ledger.fresh_outputs().is_empty());
        assert_eq!(red.formula.to_string(), "G (!r || F g)");
        assert_eq!(red.outputs, spec.outputs);
    }

    #[test]
    fn range_constraint_only_when_width_overrepresents() {
        let spec = example_nested_next();
        // k=1: width 1, 2 patterns for {0,1}: no range conjunct.
        let r1 = reduce(&spec, Some(1), false).unwrap();
        assert!(!r1.sugared.to_string().contains("vrange"));
        // k=2: width 2, pattern 3 must be excluded.
        let r2 = reduce(&spec, Some(2), false).unwrap();
        assert!(r2.sugared.to_string().contains("vrange"));
    }

    #[test]
    fn zero_k_override_with_existentials_is_rejected() {
        assert!(matches!(
            reduce(&example_nested_next(), Some(0), false),
            Err(ReduceError::ZeroK)
        ));
    }

    #[test]
    fn fresh_name_collision_is_rejected() {
        let red = reduce(&example_nested_next(), Some(1), false).unwrap();
        let stolen = red.ledger.fresh_outputs()[0].name().to_string();
        let text = format!("INPUTS r; OUTPUTS g, {stolen}; FORMULA E X (g && X (g && F !g));");
        let spec = parse_spec(&text).unwrap();
        assert!(matches!(
            reduce(&spec, Some(1), false),
            Err(ReduceError::NameCollision { .. })
        ));
    }

    #[test]
    fn size_metric_counts_unblasted_atoms() {
        let spec = example_mixed();
        let r1 = reduce(&spec, Some(1), false).unwrap();
        let r5 = reduce(&spec, None, false).unwrap();
        let (s1, s5) = (formula_size_reduced(&r1), formula_size_reduced(&r5));
        assert!(s5 > s1);
        // Growth is roughly linear in k.
        let ratio = s5 as f64 / s1 as f64;
        assert!(ratio > 2.5 && ratio < 10.0, "ratio {ratio}");
    }
}
