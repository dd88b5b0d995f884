//! Explicit-state verification: CTL*-with-inputs model checking of Moore
//! machines by bottom-up labeling with NBW products, and LTL model checking
//! with lasso counterexamples.
//!
//! Quantified subformulas are processed inner-first. For each one, the
//! already-computed labels are appended to every state's output valuation
//! and the subformula body (with inner quantifiers replaced by their label
//! propositions) is turned into an NBW; a state satisfies an existential
//! subformula iff the product of machine and NBW has an accepting lasso from
//! it. Universal subformulas go through PNF negation and the existential
//! check. Product letters pair a state's outputs with the input on the edge
//! leaving it, matching the shifted reading of inputs.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::automata::{nbw_of_path_formula, Basis, Letter, Nbw};
use crate::graph::tarjan_sccs;
use crate::logic::{
    pnf_negate_path, quantified_subformulas, substitute, PathFormula, Proposition, Quant,
    QuantifiedSub, Spec, StateFormula, Valuation,
};
use crate::machine::{MooreMachine, Trace};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("proposition `{name}` of the specification is not declared by the machine")]
    PropositionMismatch { name: String },
    #[error("substitution failure: {0}")]
    Substitution(#[from] crate::logic::SubstError),
}

/// Result of a CTL* check: verdict, the per-state label table for every
/// quantified subformula (bottom-up order), and witness lassos for the
/// top-level existential subformulas that hold at the initial state.
#[derive(Debug, Clone)]
pub struct CtlStarReport {
    pub holds: bool,
    pub subformulas: Vec<QuantifiedSub>,
    /// `labels[state][sub]`.
    pub labels: Vec<Vec<bool>>,
    /// `(subformula index, witness trace)` for top-level existentials.
    pub witnesses: Vec<(usize, Trace)>,
}

impl CtlStarReport {
    pub fn label(&self, state: usize, sub: usize) -> bool {
        self.labels[state][sub]
    }

    /// Line-oriented transcript: verdict, `label` lines, `witness` lines.
    pub fn render(&self, m: &MooreMachine) -> String {
        let mut s = String::new();
        s.push_str(if self.holds { "HOLDS\n" } else { "FAILS\n" });
        for (i, sub) in self.subformulas.iter().enumerate() {
            let _ = writeln!(s, "# f{i} = {sub}");
        }
        for (t, name) in m.state_names.iter().enumerate() {
            for i in 0..self.subformulas.len() {
                let _ = writeln!(s, "label {name} f{i} {}", u8::from(self.labels[t][i]));
            }
        }
        for (i, trace) in &self.witnesses {
            let _ = writeln!(s, "witness f{i} {}", trace.render(m));
        }
        s
    }
}

/// LTL verdict with an optional counterexample lasso.
#[derive(Debug, Clone)]
pub struct LtlVerdict {
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub trace: Trace,
    pub violated: String,
}

// ---------------------------------------------------------------------------
// Product graph and accepting-path search
// ---------------------------------------------------------------------------

/// Product of a Moore machine with a word automaton. Node ids are
/// `t * |Q| + q`; edges carry the input-valuation index taken from the
/// machine state.
pub struct ProductGraph {
    pub num_machine_states: usize,
    pub num_aut_states: usize,
    pub adj: Vec<Vec<(usize, usize)>>,
    pub accepting: Vec<bool>,
}

impl ProductGraph {
    pub fn node(&self, t: usize, q: u32) -> usize {
        t * self.num_aut_states + q as usize
    }

    pub fn machine_state(&self, node: usize) -> usize {
        node / self.num_aut_states
    }
}

/// Build the full product over all machine states. `extra_out[t]` extends
/// the output valuation of state t (used for subformula labels).
fn build_product(m: &MooreMachine, a: &Nbw, extra_out: &[Valuation]) -> ProductGraph {
    let nq = a.num_states();
    let nt = m.num_states();
    let n_vals = m.num_input_vals();
    // letter per (t, e)
    let mut letters: Vec<Letter> = Vec::with_capacity(nt * n_vals);
    for t in 0..nt {
        let out_star = m.out[t].union(&extra_out[t]);
        for e in 0..n_vals {
            let letter = a.basis().mask_of(&out_star.union(&m.input_valuation(e)));
            letters.push(letter);
        }
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nt * nq];
    let mut succs = Vec::new();
    for t in 0..nt {
        for q in 0..nq as u32 {
            let node = t * nq + q as usize;
            for e in 0..n_vals {
                let t2 = m.step(t, e);
                a.successors_into(q, letters[t * n_vals + e], &mut succs);
                for &q2 in &succs {
                    adj[node].push((e, t2 * nq + q2 as usize));
                }
            }
        }
    }
    let accepting: Vec<bool> =
        (0..nt * nq).map(|node| a.is_accepting((node % nq) as u32)).collect();
    ProductGraph { num_machine_states: nt, num_aut_states: nq, adj, accepting }
}

/// A lasso in a product graph: nodes paired with the input index of the edge
/// taken from them.
pub struct ProductLasso {
    pub stem: Vec<(usize, usize)>,
    pub cycle: Vec<(usize, usize)>,
}

/// Nodes lying on an accepting cycle (Büchi-good nodes): accepting nodes in
/// a strongly connected component with an internal cycle.
pub fn good_cycle_nodes(g: &ProductGraph) -> Vec<bool> {
    let n = g.adj.len();
    let (comp, _) = tarjan_sccs(n, &|v| g.adj[v].iter().map(|(_, t)| *t).collect());
    let mut comp_size: HashMap<u32, usize> = HashMap::new();
    for &c in &comp {
        *comp_size.entry(c).or_insert(0) += 1;
    }
    (0..n)
        .map(|v| {
            g.accepting[v]
                && (comp_size[&comp[v]] > 1 || g.adj[v].iter().any(|(_, t)| *t == v))
        })
        .collect()
}

/// Can the node reach a good cycle? Computed for every node at once.
pub fn can_reach_good(g: &ProductGraph, good: &[bool]) -> Vec<bool> {
    let n = g.adj.len();
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, row) in g.adj.iter().enumerate() {
        for (_, t) in row {
            radj[*t].push(v);
        }
    }
    let mut can: Vec<bool> = good.to_vec();
    let mut q: VecDeque<usize> = (0..n).filter(|&v| can[v]).collect();
    while let Some(v) = q.pop_front() {
        for &p in &radj[v] {
            if !can[p] {
                can[p] = true;
                q.push_back(p);
            }
        }
    }
    can
}

/// True iff some accepting state lies on a cycle reachable from `from`;
/// returns a concrete lasso when true. The lasso is greedily minimized:
/// shortest stem to a good node (BFS, deterministic tie-break by node
/// order), then the shortest cycle through it.
pub fn exists_accepting_path(g: &ProductGraph, from: usize) -> Option<ProductLasso> {
    let good = good_cycle_nodes(g);
    // BFS from `from` to the nearest good node.
    let n = g.adj.len();
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n]; // (pred node, edge input)
    let mut seen = vec![false; n];
    let mut q = VecDeque::new();
    seen[from] = true;
    q.push_back(from);
    let mut target: Option<usize> = None;
    if good[from] {
        target = Some(from);
    }
    'bfs: while let Some(v) = q.pop_front() {
        for &(e, t) in &g.adj[v] {
            if !seen[t] {
                seen[t] = true;
                prev[t] = Some((v, e));
                if good[t] {
                    target = Some(t);
                    break 'bfs;
                }
                q.push_back(t);
            }
        }
    }
    let target = target?;

    // Reconstruct the stem.
    let mut stem_rev: Vec<(usize, usize)> = Vec::new();
    let mut at = target;
    while at != from {
        let (p, e) = prev[at].unwrap();
        stem_rev.push((p, e));
        at = p;
    }
    stem_rev.reverse();

    // Shortest cycle target -> target within its SCC.
    let (comp, _) = tarjan_sccs(n, &|v| g.adj[v].iter().map(|(_, t)| *t).collect());
    let cycle = shortest_cycle(g, target, &comp);
    Some(ProductLasso { stem: stem_rev, cycle })
}

fn shortest_cycle(g: &ProductGraph, start: usize, comp: &[u32]) -> Vec<(usize, usize)> {
    // Self-loop first.
    if let Some((e, _)) = g.adj[start].iter().find(|(_, t)| *t == start) {
        return vec![(start, *e)];
    }
    let n = g.adj.len();
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut q = VecDeque::new();
    // First step out of `start`, restricted to its SCC.
    for &(e, t) in &g.adj[start] {
        if comp[t] == comp[start] && !seen[t] {
            seen[t] = true;
            prev[t] = Some((start, e));
            q.push_back(t);
        }
    }
    while let Some(v) = q.pop_front() {
        for &(e, t) in &g.adj[v] {
            if comp[t] != comp[start] {
                continue;
            }
            if t == start {
                // Close the cycle.
                let mut cyc_rev = vec![(v, e)];
                let mut at = v;
                while at != start {
                    let (p, pe) = prev[at].unwrap();
                    cyc_rev.push((p, pe));
                    at = p;
                }
                cyc_rev.reverse();
                return cyc_rev;
            }
            if !seen[t] {
                seen[t] = true;
                prev[t] = Some((v, e));
                q.push_back(t);
            }
        }
    }
    unreachable!("good node is on a cycle within its SCC")
}

fn lasso_to_trace(g: &ProductGraph, m: &MooreMachine, lasso: &ProductLasso) -> Trace {
    let step = |(node, e): &(usize, usize)| (g.machine_state(*node), m.input_valuation(*e));
    Trace {
        stem: lasso.stem.iter().map(step).collect(),
        cycle: lasso.cycle.iter().map(step).collect(),
    }
}

// ---------------------------------------------------------------------------
// CTL* model checking
// ---------------------------------------------------------------------------

fn check_alphabet(m: &MooreMachine, spec: &Spec) -> Result<(), CheckError> {
    let declared: BTreeSet<&str> = m
        .inputs
        .iter()
        .chain(m.outputs.iter())
        .map(|p| p.name())
        .collect();
    for p in spec.all_props() {
        if !declared.contains(p.name()) {
            return Err(CheckError::PropositionMismatch { name: p.name().to_string() });
        }
    }
    Ok(())
}

/// Label propositions for subformulas, avoiding collisions with machine
/// propositions.
fn label_props(n: usize, m: &MooreMachine) -> Vec<Proposition> {
    let taken: BTreeSet<&str> =
        m.inputs.iter().chain(m.outputs.iter()).map(|p| p.name()).collect();
    (0..n)
        .map(|i| {
            let mut name = format!("_lbl{i}");
            while taken.contains(name.as_str()) {
                name.push('_');
            }
            Proposition::fresh(name)
        })
        .collect()
}

/// Model-check a CTL* specification against a Moore machine by bottom-up
/// labeling. Returns the verdict, the full label table and witness lassos
/// for the top-level existential subformulas.
pub fn check_ctlstar(m: &MooreMachine, spec: &Spec) -> Result<CtlStarReport, CheckError> {
    check_alphabet(m, spec)?;
    let subs = quantified_subformulas(spec);
    let lbl = label_props(subs.len(), m);

    let mut table: BTreeMap<QuantifiedSub, PathFormula> = BTreeMap::new();
    for (i, sub) in subs.iter().enumerate() {
        table.insert(sub.clone(), PathFormula::lit(lbl[i].clone(), true));
    }

    let nt = m.num_states();
    let mut labels: Vec<Vec<bool>> = vec![vec![false; subs.len()]; nt];
    let mut witnesses: Vec<(usize, Trace)> = Vec::new();

    // Top-level existentials, in subformula order, for witness extraction.
    let mut top_exist: Vec<usize> = Vec::new();
    collect_top_existentials(&spec.formula, &subs, &mut top_exist);

    for (i, sub) in subs.iter().enumerate() {
        let body = substitute(&sub.body, &table)?;
        let (phi, polarity) = match sub.quant {
            Quant::Existential => (body, true),
            // A phi holds iff E !phi fails; labels are exact so negating
            // them is sound.
            Quant::Universal => (pnf_negate_path(&body), false),
        };
        let mut props = BTreeSet::new();
        phi.props(&mut props);
        let basis = Basis::new(props);
        let a = nbw_of_path_formula(&phi, &basis);

        let extra: Vec<Valuation> = (0..nt)
            .map(|t| {
                Valuation::from_iter(
                    (0..i).filter(|&j| labels[t][j]).map(|j| lbl[j].clone()),
                )
            })
            .collect();
        let g = build_product(m, &a, &extra);
        let good = good_cycle_nodes(&g);
        let can = can_reach_good(&g, &good);
        for t in 0..nt {
            let sat_exists = can[g.node(t, a.initial())];
            labels[t][i] = if polarity { sat_exists } else { !sat_exists };
        }

        // Witness for a top-level existential that holds at the initial
        // state.
        if sub.quant == Quant::Existential
            && top_exist.contains(&i)
            && labels[m.initial][i]
        {
            if let Some(lasso) = exists_accepting_path(&g, g.node(m.initial, a.initial())) {
                witnesses.push((i, lasso_to_trace(&g, m, &lasso)));
            }
        }
    }

    let index: BTreeMap<QuantifiedSub, usize> =
        subs.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let holds = eval_state(&spec.formula, m.initial, m, &labels, &index);

    Ok(CtlStarReport { holds, subformulas: subs, labels, witnesses })
}

fn collect_top_existentials(f: &StateFormula, subs: &[QuantifiedSub], out: &mut Vec<usize>) {
    match f {
        StateFormula::True | StateFormula::False | StateFormula::Lit(_) => {}
        StateFormula::And(cs) | StateFormula::Or(cs) => {
            for c in cs {
                collect_top_existentials(c, subs, out);
            }
        }
        StateFormula::Forall(_) => {}
        StateFormula::Exists(p) => {
            let key = QuantifiedSub::new(Quant::Existential, p.clone());
            if let Some(i) = subs.iter().position(|s| *s == key) {
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
    }
}

fn eval_state(
    f: &StateFormula,
    t: usize,
    m: &MooreMachine,
    labels: &[Vec<bool>],
    index: &BTreeMap<QuantifiedSub, usize>,
) -> bool {
    match f {
        StateFormula::True => true,
        StateFormula::False => false,
        StateFormula::Lit(l) => m.out[t].satisfies(l),
        StateFormula::And(cs) => cs.iter().all(|c| eval_state(c, t, m, labels, index)),
        StateFormula::Or(cs) => cs.iter().any(|c| eval_state(c, t, m, labels, index)),
        StateFormula::Forall(p) => {
            labels[t][index[&QuantifiedSub::new(Quant::Universal, p.clone())]]
        }
        StateFormula::Exists(p) => {
            labels[t][index[&QuantifiedSub::new(Quant::Existential, p.clone())]]
        }
    }
}

// ---------------------------------------------------------------------------
// LTL model checking
// ---------------------------------------------------------------------------

/// Does every trace of the machine satisfy the quantifier-free path formula?
/// Checked by searching for an accepting lasso of the negation's NBW on the
/// product; a found lasso is returned as counterexample.
pub fn check_ltl(m: &MooreMachine, phi: &PathFormula) -> Result<LtlVerdict, CheckError> {
    crate::logic::assert_quantifier_free(phi);
    let mut props = BTreeSet::new();
    phi.props(&mut props);
    let declared: BTreeSet<&str> =
        m.inputs.iter().chain(m.outputs.iter()).map(|p| p.name()).collect();
    for p in &props {
        if !declared.contains(p.name()) {
            return Err(CheckError::PropositionMismatch { name: p.name().to_string() });
        }
    }

    let neg = pnf_negate_path(phi);
    let mut nprops = BTreeSet::new();
    neg.props(&mut nprops);
    let basis = Basis::new(nprops);
    let a = nbw_of_path_formula(&neg, &basis);
    let extra = vec![Valuation::empty(); m.num_states()];
    let g = build_product(m, &a, &extra);
    match exists_accepting_path(&g, g.node(m.initial, a.initial())) {
        Some(lasso) => {
            let trace = lasso_to_trace(&g, m, &lasso);
            Ok(LtlVerdict {
                holds: false,
                counterexample: Some(Counterexample { trace, violated: phi.to_string() }),
            })
        }
        None => Ok(LtlVerdict { holds: true, counterexample: None }),
    }
}

/// Fast verdict-only LTL check against a pre-built NBW of the *negated*
/// formula; used by brute-force enumerations that test many machines
/// against one formula.
pub fn holds_against_negation_nbw(m: &MooreMachine, neg_nbw: &Nbw) -> bool {
    let extra = vec![Valuation::empty(); m.num_states()];
    let g = build_product(m, neg_nbw, &extra);
    let good = good_cycle_nodes(&g);
    let can = can_reach_good(&g, &good);
    !can[g.node(m.initial, neg_nbw.initial())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::eval_ltl_on_lasso;
    use crate::logic::parse_spec;
    use crate::machine::parse_machine;

    const TWO_STATE: &str = "MOORE\n\
        inputs: r;\n\
        outputs: g;\n\
        init: t0;\n\
        state t0 { g=0 }  t0 -{r=0}-> t0;  t0 -{r=1}-> t1;\n\
        state t1 { g=1 }  t1 -{r=0}-> t1;  t1 -{r=1}-> t0;\n";

    #[test]
    fn mixed_quantifier_spec_holds_with_witnesses() {
        let m = parse_machine(TWO_STATE).unwrap();
        let spec = parse_spec(
            "INPUTS r; OUTPUTS g; FORMULA (E G !g) && (A G (E F !g)) && (E F g);",
        )
        .unwrap();
        let report = check_ctlstar(&m, &spec).unwrap();
        assert!(report.holds);
        // Witnesses for both top-level existentials.
        assert_eq!(report.witnesses.len(), 2);
        // The E G !g witness loops in t0: every state on it is t0.
        let (i, w) = &report.witnesses[0];
        assert_eq!(report.subformulas[*i].to_string(), "E (G !g)");
        assert!(w.stem.iter().chain(w.cycle.iter()).all(|(t, _)| *t == 0));
        // The E F g witness reaches t1.
        let (_, w2) = &report.witnesses[1];
        assert!(w2.stem.iter().chain(w2.cycle.iter()).any(|(t, _)| *t == 1));
    }

    #[test]
    fn one_state_machine_fails_eventually_g() {
        let m = parse_machine(
            "MOORE\ninputs: r;\noutputs: g;\ninit: s;\nstate s { g=0 } s -{*}-> s;\n",
        )
        .unwrap();
        let spec = parse_spec("INPUTS r; OUTPUTS g; FORMULA E F g;").unwrap();
        let report = check_ctlstar(&m, &spec).unwrap();
        assert!(!report.holds);
        assert!(report.witnesses.is_empty());
    }

    #[test]
    fn nested_next_two_state_model_holds() {
        // Machine with t0 -!r-> t1(g), t1 -r-> t1, t1 -!r-> t0, t0 -r-> t0:
        // a two-state model of E G E X (g && X (g && F !g)).
        let text = "MOORE\ninputs: r;\noutputs: g;\ninit: t0;\n\
            state t0 { g=0 }  t0 -{r=0}-> t1;  t0 -{r=1}-> t0;\n\
            state t1 { g=1 }  t1 -{r=0}-> t0;  t1 -{r=1}-> t1;\n";
        let m = parse_machine(text).unwrap();
        let spec =
            parse_spec("INPUTS r; OUTPUTS g; FORMULA E G (E X (g && X (g && F !g)));").unwrap();
        let report = check_ctlstar(&m, &spec).unwrap();
        assert!(report.holds);
    }

    #[test]
    fn input_literal_under_exists_always_holds() {
        let m = parse_machine(TWO_STATE).unwrap();
        for f in ["E r", "E !r"] {
            let spec = parse_spec(&format!("INPUTS r; OUTPUTS g; FORMULA {f};")).unwrap();
            let report = check_ctlstar(&m, &spec).unwrap();
            assert!(report.holds, "{f} must hold");
            assert!(report.labels.iter().all(|row| row[0]), "{f} at every state");
        }
        // E o mirrors the state's own output.
        let spec = parse_spec("INPUTS r; OUTPUTS g; FORMULA E g;").unwrap();
        let report = check_ctlstar(&m, &spec).unwrap();
        assert!(!report.labels[0][0]);
        assert!(report.labels[1][0]);
        assert!(!report.holds); // t0 outputs !g
    }

    #[test]
    fn ltl_check_finds_counterexample() {
        let m = parse_machine(
            "MOORE\ninputs: r;\noutputs: g;\ninit: s;\nstate s { g=0 } s -{*}-> s;\n",
        )
        .unwrap();
        let spec = parse_spec("INPUTS r; OUTPUTS g; FORMULA A F g;").unwrap();
        let phi = match &spec.formula {
            crate::logic::StateFormula::Forall(p) => p.clone(),
            _ => unreachable!(),
        };
        let verdict = check_ltl(&m, &phi).unwrap();
        assert!(!verdict.holds);
        let ce = verdict.counterexample.unwrap();
        // Replay: the counterexample trace must violate phi.
        let w = ce.trace.to_lasso_word(&m);
        assert!(!eval_ltl_on_lasso(&phi, &w));
    }

    #[test]
    fn ltl_and_ctlstar_agree_on_universal_formulas() {
        let m = parse_machine(TWO_STATE).unwrap();
        for f in ["G (r -> F g)", "G (!g || !r)", "F g", "G F g"] {
            let spec = parse_spec(&format!("INPUTS r; OUTPUTS g; FORMULA A ({f});")).unwrap();
            let phi = match &spec.formula {
                crate::logic::StateFormula::Forall(p) => p.clone(),
                _ => unreachable!(),
            };
            let r1 = check_ctlstar(&m, &spec).unwrap().holds;
            let r2 = check_ltl(&m, &phi).unwrap().holds;
            assert_eq!(r1, r2, "{f}");
        }
    }

    #[test]
    fn witness_replays_satisfy_body() {
        let m = parse_machine(TWO_STATE).unwrap();
        let spec = parse_spec(
            "INPUTS r; OUTPUTS g; FORMULA (E G !g) && (E F g) && (E (g U !g || F g));",
        )
        .unwrap();
        let report = check_ctlstar(&m, &spec).unwrap();
        assert!(report.holds);
        for (i, trace) in &report.witnesses {
            let body = &report.subformulas[*i].body;
            assert!(body.is_quantifier_free());
            let w = trace.to_lasso_word(&m);
            assert!(eval_ltl_on_lasso(body, &w), "witness for f{i} must satisfy its body");
        }
    }

    #[test]
    fn alphabet_mismatch_is_reported() {
        let m = parse_machine(TWO_STATE).unwrap();
        let spec = parse_spec("INPUTS r; OUTPUTS q; FORMULA A G q;").unwrap();
        assert!(matches!(
            check_ctlstar(&m, &spec),
            Err(CheckError::PropositionMismatch { .. })
        ));
    }
}
