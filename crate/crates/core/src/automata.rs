//! Translation of quantifier-free path formulas (LTL) into complete
//! nondeterministic Büchi word automata, plus lasso-word acceptance and a
//! direct LTL-on-lasso evaluator used as an independent oracle.
//!
//! The construction is tableau-style: states are sets of obligations,
//! transitions come from expanding each obligation into (literal cube, next
//! obligations) branches, with per-until "postponed" marks giving a
//! transition-based generalized Büchi condition that is then degeneralized
//! with a counting level. Edges are labeled with cubes (partial valuations),
//! so the alphabet is never enumerated. Completeness is by an explicit,
//! flagged rejecting sink; `state_count` excludes it.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::graph::tarjan_sccs;
use crate::logic::{PathFormula, Proposition, Valuation};

/// Letters are bitmasks over a [`Basis`]; bit i set means `basis.props[i]`
/// is true.
pub type Letter = u64;

pub type StateId = u32;

/// An ordered proposition universe (sorted by name) of at most 64 entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    props: Vec<Proposition>,
}

impl Basis {
    pub fn new(props: impl IntoIterator<Item = Proposition>) -> Basis {
        let set: BTreeSet<Proposition> = props.into_iter().collect();
        assert!(set.len() <= 64, "proposition basis larger than 64");
        Basis { props: set.into_iter().collect() }
    }

    pub fn props(&self) -> &[Proposition] {
        &self.props
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    pub fn index_of(&self, p: &Proposition) -> Option<usize> {
        self.props.binary_search(p).ok()
    }

    /// Mask of a valuation; propositions outside the basis are ignored.
    pub fn mask_of(&self, v: &Valuation) -> Letter {
        let mut m = 0u64;
        for p in v.iter() {
            if let Some(i) = self.index_of(p) {
                m |= 1 << i;
            }
        }
        m
    }

    pub fn valuation_of(&self, mask: Letter) -> Valuation {
        let mut v = Valuation::empty();
        for (i, p) in self.props.iter().enumerate() {
            if mask & (1 << i) != 0 {
                v.insert(p.clone());
            }
        }
        v
    }
}

/// A partial valuation: `truth` gives the values of the propositions in
/// `care`, everything else is free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cube {
    pub care: u64,
    pub truth: u64,
}

impl Cube {
    pub const TOP: Cube = Cube { care: 0, truth: 0 };

    pub fn matches(&self, letter: Letter) -> bool {
        letter & self.care == self.truth
    }

    /// Conjunction; `None` when contradictory.
    pub fn conj(&self, other: &Cube) -> Option<Cube> {
        let both = self.care & other.care;
        if self.truth & both != other.truth & both {
            return None;
        }
        Some(Cube { care: self.care | other.care, truth: self.truth | other.truth })
    }
}

/// An ultimately periodic word `stem . cycle^omega`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LassoWord {
    pub stem: Vec<Valuation>,
    pub cycle: Vec<Valuation>,
}

impl LassoWord {
    pub fn new(stem: Vec<Valuation>, cycle: Vec<Valuation>) -> LassoWord {
        assert!(!cycle.is_empty(), "lasso cycle must be nonempty");
        LassoWord { stem, cycle }
    }

    /// Number of distinct position classes (stem positions plus cycle
    /// positions).
    pub fn classes(&self) -> usize {
        self.stem.len() + self.cycle.len()
    }

    pub fn class_valuation(&self, class: usize) -> &Valuation {
        if class < self.stem.len() {
            &self.stem[class]
        } else {
            &self.cycle[class - self.stem.len()]
        }
    }

    pub fn next_class(&self, class: usize) -> usize {
        if class + 1 < self.classes() {
            class + 1
        } else {
            self.stem.len()
        }
    }
}

impl std::fmt::Display for LassoWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stem=[")?;
        for (i, v) in self.stem.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "] loop=[")?;
        for (i, v) in self.cycle.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct NbwState {
    edges: Vec<(Cube, StateId)>,
    accepting: bool,
    /// Union of the cares of the outgoing cubes; callers use it to know
    /// which propositions this state reacts to.
    care_union: u64,
}

/// A complete nondeterministic Büchi word automaton with cube-labeled edges.
/// Letters with no matching cube go to the rejecting sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nbw {
    basis: Basis,
    states: Vec<NbwState>,
    initial: StateId,
    sink: Option<StateId>,
}

impl Nbw {
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn sink(&self) -> Option<StateId> {
        self.sink
    }

    pub fn is_accepting(&self, s: StateId) -> bool {
        self.states[s as usize].accepting
    }

    pub fn edges(&self, s: StateId) -> &[(Cube, StateId)] {
        &self.states[s as usize].edges
    }

    pub fn care_union(&self, s: StateId) -> u64 {
        self.states[s as usize].care_union
    }

    /// Successor states on the given letter, deduplicated. Falls back to the
    /// sink when no cube matches; automata are complete by construction.
    pub fn successors_into(&self, s: StateId, letter: Letter, out: &mut Vec<StateId>) {
        out.clear();
        for (cube, tgt) in &self.states[s as usize].edges {
            if cube.matches(letter) && !out.contains(tgt) {
                out.push(*tgt);
            }
        }
        if out.is_empty() {
            out.push(self.sink.expect("incomplete automaton without sink"));
        }
    }

    pub fn successors(&self, s: StateId, letter: Letter) -> Vec<StateId> {
        let mut v = Vec::new();
        self.successors_into(s, letter, &mut v);
        v
    }

    /// State count excluding the artificial rejecting sink.
    pub fn state_count(&self) -> usize {
        self.states.len() - usize::from(self.sink.is_some())
    }

    /// Graph-description export in the same dialect as the machine dot
    /// export; deterministic node ordering.
    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        s.push_str("digraph nbw {\n  rankdir=LR;\n  init [shape=point];\n");
        for (i, st) in self.states.iter().enumerate() {
            let shape = if st.accepting { "doublecircle" } else { "circle" };
            let label = if Some(i as StateId) == self.sink {
                format!("q{i} (sink)")
            } else {
                format!("q{i}")
            };
            let _ = writeln!(s, "  q{i} [shape={shape}, label=\"{label}\"];");
        }
        let _ = writeln!(s, "  init -> q{};", self.initial);
        for (i, st) in self.states.iter().enumerate() {
            for (cube, tgt) in &st.edges {
                let mut lits = Vec::new();
                for (b, p) in self.basis.props.iter().enumerate() {
                    if cube.care & (1 << b) != 0 {
                        if cube.truth & (1 << b) != 0 {
                            lits.push(p.name().to_string());
                        } else {
                            lits.push(format!("!{}", p.name()));
                        }
                    }
                }
                let label = if lits.is_empty() { "1".to_string() } else { lits.join(" & ") };
                let _ = writeln!(s, "  q{i} -> q{tgt} [label=\"{label}\"];");
            }
        }
        s.push_str("}\n");
        s
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Branch {
    cube: Cube,
    next: BTreeSet<u32>,
    postponed: u64,
}

impl Branch {
    fn top() -> Branch {
        Branch { cube: Cube::TOP, next: BTreeSet::new(), postponed: 0 }
    }

    fn conj(&self, other: &Branch) -> Option<Branch> {
        let cube = self.cube.conj(&other.cube)?;
        let mut next = self.next.clone();
        next.extend(other.next.iter().copied());
        Some(Branch { cube, next, postponed: self.postponed | other.postponed })
    }
}

struct Builder {
    forms: Vec<PathFormula>,
    ids: HashMap<PathFormula, u32>,
    /// Until-index per formula id, for postponement marks.
    until_index: HashMap<u32, u32>,
    num_untils: u32,
    true_id: Option<u32>,
    basis: Basis,
    expand_memo: HashMap<u32, Vec<Branch>>,
}

impl Builder {
    fn intern(&mut self, f: &PathFormula) -> u32 {
        if let Some(&id) = self.ids.get(f) {
            return id;
        }
        match f {
            PathFormula::True | PathFormula::False | PathFormula::Lit(_) => {}
            PathFormula::And(cs) | PathFormula::Or(cs) => {
                for c in cs {
                    self.intern(c);
                }
            }
            PathFormula::Next(a) => {
                self.intern(a);
            }
            PathFormula::Until(a, b) | PathFormula::Release(a, b) => {
                self.intern(a);
                self.intern(b);
            }
            PathFormula::Forall(_) | PathFormula::Exists(_) => {
                panic!("nbw_of_path_formula requires a quantifier-free formula, got `{f}`")
            }
        }
        let id = self.forms.len() as u32;
        self.forms.push(f.clone());
        self.ids.insert(f.clone(), id);
        if matches!(f, PathFormula::Until(..)) {
            self.until_index.insert(id, self.num_untils);
            self.num_untils += 1;
        }
        if *f == PathFormula::True {
            self.true_id = Some(id);
        }
        id
    }

    fn expand(&mut self, id: u32) -> Vec<Branch> {
        if let Some(bs) = self.expand_memo.get(&id) {
            return bs.clone();
        }
        let f = self.forms[id as usize].clone();
        let branches = match &f {
            PathFormula::True => vec![Branch::top()],
            PathFormula::False => vec![],
            PathFormula::Lit(l) => {
                let i = self
                    .basis
                    .index_of(&l.prop)
                    .unwrap_or_else(|| panic!("proposition `{}` not in basis", l.prop));
                let bit = 1u64 << i;
                vec![Branch {
                    cube: Cube { care: bit, truth: if l.positive { bit } else { 0 } },
                    next: BTreeSet::new(),
                    postponed: 0,
                }]
            }
            PathFormula::And(cs) => {
                let mut acc = vec![Branch::top()];
                for c in cs {
                    let cid = self.ids[c];
                    let cbs = self.expand(cid);
                    acc = cross(&acc, &cbs);
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
            PathFormula::Or(cs) => {
                let mut acc = Vec::new();
                for c in cs {
                    let cid = self.ids[c];
                    acc.extend(self.expand(cid));
                }
                dedup_branches(acc)
            }
            PathFormula::Next(a) => {
                let aid = self.ids[&**a];
                let mut next = BTreeSet::new();
                if Some(aid) != self.true_id {
                    next.insert(aid);
                }
                vec![Branch { cube: Cube::TOP, next, postponed: 0 }]
            }
            PathFormula::Until(a, b) => {
                // a U b  =  b  or  (a and X(a U b)); postponing marks the until
                let (aid, bid) = (self.ids[&**a], self.ids[&**b]);
                let uidx = self.until_index[&id];
                let mut acc = self.expand(bid);
                let mut postpone = BTreeSet::new();
                postpone.insert(id);
                let post_branch =
                    vec![Branch { cube: Cube::TOP, next: postpone, postponed: 1u64 << uidx }];
                acc.extend(cross(&self.expand(aid), &post_branch));
                dedup_branches(acc)
            }
            PathFormula::Release(a, b) => {
                // a R b  =  b and (a or X(a R b)); postponing a release is fine
                let (aid, bid) = (self.ids[&**a], self.ids[&**b]);
                let mut self_next = BTreeSet::new();
                self_next.insert(id);
                let mut rhs = self.expand(aid);
                rhs.push(Branch { cube: Cube::TOP, next: self_next, postponed: 0 });
                let acc = cross(&self.expand(bid), &dedup_branches(rhs));
                dedup_branches(acc)
            }
            PathFormula::Forall(_) | PathFormula::Exists(_) => unreachable!(),
        };
        self.expand_memo.insert(id, branches.clone());
        branches
    }

    fn state_branches(&mut self, obls: &BTreeSet<u32>) -> Vec<Branch> {
        let mut acc = vec![Branch::top()];
        for &id in obls {
            let bs = self.expand(id);
            acc = cross(&acc, &bs);
            if acc.is_empty() {
                break;
            }
        }
        let mut acc = dedup_branches(acc);
        acc.sort();
        acc
    }
}

fn cross(lhs: &[Branch], rhs: &[Branch]) -> Vec<Branch> {
    let mut out = Vec::with_capacity(lhs.len() * rhs.len());
    for a in lhs {
        for b in rhs {
            if let Some(c) = a.conj(b) {
                out.push(c);
            }
        }
    }
    dedup_branches(out)
}

fn dedup_branches(mut v: Vec<Branch>) -> Vec<Branch> {
    v.sort();
    v.dedup();
    v
}

/// Translate a quantifier-free PNF path formula into a complete NBW over the
/// given basis. The construction is deterministic: structurally equal
/// formulas yield identical automata.
pub fn nbw_of_path_formula(phi: &PathFormula, basis: &Basis) -> Nbw {
    let mut b = Builder {
        forms: Vec::new(),
        ids: HashMap::new(),
        until_index: HashMap::new(),
        num_untils: 0,
        true_id: None,
        basis: basis.clone(),
        expand_memo: HashMap::new(),
    };
    let root = b.intern(phi);
    let m = b.num_untils;
    assert!(m <= 64, "more than 64 until subformulas");

    // Degeneralized states: (obligation set, level). Level l waits for until
    // #l to be taken non-postponed; level m is accepting and restarts at 0.
    let mut initial_obls = BTreeSet::new();
    if Some(root) != b.true_id {
        initial_obls.insert(root);
    }

    let mut index: HashMap<(BTreeSet<u32>, u32), StateId> = HashMap::new();
    let mut order: Vec<(BTreeSet<u32>, u32)> = Vec::new();
    let mut edges_raw: Vec<Vec<(Cube, StateId)>> = Vec::new();
    let mut branch_memo: HashMap<BTreeSet<u32>, Vec<Branch>> = HashMap::new();

    let init_key = (initial_obls, 0u32);
    index.insert(init_key.clone(), 0);
    order.push(init_key);
    let mut queue: VecDeque<usize> = VecDeque::new();
    queue.push_back(0);
    edges_raw.push(Vec::new());

    while let Some(at) = queue.pop_front() {
        let (obls, lvl) = order[at].clone();
        let branches = match branch_memo.get(&obls) {
            Some(bs) => bs.clone(),
            None => {
                let bs = b.state_branches(&obls);
                branch_memo.insert(obls.clone(), bs.clone());
                bs
            }
        };
        let mut out = Vec::new();
        for br in &branches {
            // `true` imposes nothing as an obligation.
            let mut next: BTreeSet<u32> = br.next.clone();
            if let Some(t) = b.true_id {
                next.remove(&t);
            }
            let target_lvl = if m == 0 {
                0
            } else {
                let mut l = if lvl == m { 0 } else { lvl };
                while l < m && br.postponed & (1u64 << l) == 0 {
                    l += 1;
                }
                l
            };
            let key = (next, target_lvl);
            let tgt = match index.get(&key) {
                Some(&t) => t,
                None => {
                    let t = order.len() as StateId;
                    index.insert(key.clone(), t);
                    order.push(key);
                    edges_raw.push(Vec::new());
                    queue.push_back(t as usize);
                    t
                }
            };
            out.push((br.cube, tgt));
        }
        out.sort();
        out.dedup();
        edges_raw[at] = out;
    }

    let accepting: Vec<bool> =
        order.iter().map(|(_, lvl)| if m == 0 { true } else { *lvl == m }).collect();

    finish_automaton(basis.clone(), edges_raw, accepting)
}

/// Shared tail of the construction: sink-like merging, completion, pruning,
/// stable renumbering.
fn finish_automaton(basis: Basis, edges: Vec<Vec<(Cube, StateId)>>, accepting: Vec<bool>) -> Nbw {
    let n = edges.len();

    // Dead states: every explicit edge leads to a dead state, so no accepting
    // run can pass through. Least fixpoint starting from edge-free states;
    // acceptance of a dead state is irrelevant since every run through it
    // ends in the sink.
    let mut dead = vec![false; n];
    loop {
        let mut changed = false;
        for s in 0..n {
            if dead[s] {
                continue;
            }
            if edges[s].iter().all(|(_, t)| dead[*t as usize]) {
                dead[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // The initial state stays even when dead.
    dead[0] = false;

    // Drop edges into dead states (the sink fallback covers them), then
    // prune unreachable states, renumbering in BFS order.
    let kept_edges: Vec<Vec<(Cube, StateId)>> = edges
        .iter()
        .map(|es| es.iter().filter(|(_, t)| !dead[*t as usize]).cloned().collect())
        .collect();

    let mut renum: Vec<Option<StateId>> = vec![None; n];
    let mut order: Vec<usize> = Vec::new();
    renum[0] = Some(0);
    order.push(0);
    let mut q = VecDeque::new();
    q.push_back(0usize);
    while let Some(s) = q.pop_front() {
        for (_, t) in &kept_edges[s] {
            let t = *t as usize;
            if renum[t].is_none() {
                renum[t] = Some(order.len() as StateId);
                order.push(t);
                q.push_back(t);
            }
        }
    }

    let mut states: Vec<NbwState> = order
        .iter()
        .map(|&old| {
            let mut es: Vec<(Cube, StateId)> =
                kept_edges[old].iter().map(|(c, t)| (*c, renum[*t as usize].unwrap())).collect();
            es.sort();
            let care_union = es.iter().fold(0u64, |m, (c, _)| m | c.care);
            NbwState { edges: es, accepting: accepting[old], care_union }
        })
        .collect();

    // A sink is needed iff some reachable state's cubes do not cover every
    // letter.
    let needs_sink = states.iter().any(|s| !covers_all(&s.edges));
    let sink = if needs_sink {
        let id = states.len() as StateId;
        states.push(NbwState { edges: vec![(Cube::TOP, id)], accepting: false, care_union: 0 });
        Some(id)
    } else {
        None
    };

    Nbw { basis, states, initial: 0, sink }
}

/// Do the cubes cover every letter?
fn covers_all(edges: &[(Cube, StateId)]) -> bool {
    fn rec(cubes: &[Cube]) -> bool {
        if cubes.iter().any(|c| c.care == 0) {
            return true;
        }
        if cubes.is_empty() {
            return false;
        }
        // Split on the lowest cared bit of the first cube.
        let bit = 1u64 << cubes[0].care.trailing_zeros();
        for val in [0u64, bit] {
            let restricted: Vec<Cube> = cubes
                .iter()
                .filter(|c| c.care & bit == 0 || c.truth & bit == val)
                .map(|c| Cube { care: c.care & !bit, truth: c.truth & !bit })
                .collect();
            if !rec(&restricted) {
                return false;
            }
        }
        true
    }
    let cubes: Vec<Cube> = edges.iter().map(|(c, _)| *c).collect();
    rec(&cubes)
}

// ---------------------------------------------------------------------------
// Lasso acceptance and the direct evaluator
// ---------------------------------------------------------------------------

/// Does some run of the automaton over `stem . cycle^omega` visit an
/// accepting state infinitely often? Decided on the product of the automaton
/// with the lasso's position classes via SCC search.
pub fn accepts_lasso(a: &Nbw, w: &LassoWord) -> bool {
    let classes = w.classes();
    let letters: Vec<Letter> =
        (0..classes).map(|c| a.basis.mask_of(w.class_valuation(c))).collect();

    // Product nodes (class, state), discovered by BFS from (0, initial).
    let mut index: HashMap<(usize, StateId), usize> = HashMap::new();
    let mut nodes: Vec<(usize, StateId)> = Vec::new();
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let start = (0usize, a.initial());
    index.insert(start, 0);
    nodes.push(start);
    adj.push(Vec::new());
    let mut q = VecDeque::new();
    q.push_back(0usize);
    let mut succs = Vec::new();
    while let Some(at) = q.pop_front() {
        let (class, state) = nodes[at];
        a.successors_into(state, letters[class], &mut succs);
        let nc = w.next_class(class);
        let mut row = Vec::with_capacity(succs.len());
        for &t in &succs {
            let key = (nc, t);
            let id = match index.get(&key) {
                Some(&i) => i,
                None => {
                    let i = nodes.len();
                    index.insert(key, i);
                    nodes.push(key);
                    adj.push(Vec::new());
                    q.push_back(i);
                    i
                }
            };
            row.push(id);
        }
        adj[at] = row;
    }

    let (comp, _) = tarjan_sccs(nodes.len(), &|v| adj[v].clone());
    let mut comp_size: HashMap<u32, usize> = HashMap::new();
    for &c in &comp {
        *comp_size.entry(c).or_insert(0) += 1;
    }
    for (v, node) in nodes.iter().enumerate() {
        if !a.is_accepting(node.1) {
            continue;
        }
        // A cycle through v exists iff its SCC has >1 node or a self-loop.
        let cyclic = comp_size[&comp[v]] > 1 || adj[v].contains(&v);
        if cyclic {
            return true;
        }
    }
    false
}

/// Truth of a quantifier-free PNF path formula at position 0 of the lasso,
/// computed by labeling position classes bottom-up with least/greatest
/// fixpoints for until/release. Independent of the automaton route.
pub fn eval_ltl_on_lasso(phi: &PathFormula, w: &LassoWord) -> bool {
    crate::logic::assert_quantifier_free(phi);
    let classes = w.classes();

    fn intern(
        f: &PathFormula,
        forms: &mut Vec<PathFormula>,
        ids: &mut HashMap<PathFormula, usize>,
    ) -> usize {
        if let Some(&i) = ids.get(f) {
            return i;
        }
        match f {
            PathFormula::True | PathFormula::False | PathFormula::Lit(_) => {}
            PathFormula::And(cs) | PathFormula::Or(cs) => {
                for c in cs {
                    intern(c, forms, ids);
                }
            }
            PathFormula::Next(a) => {
                intern(a, forms, ids);
            }
            PathFormula::Until(a, b) | PathFormula::Release(a, b) => {
                intern(a, forms, ids);
                intern(b, forms, ids);
            }
            PathFormula::Forall(_) | PathFormula::Exists(_) => unreachable!(),
        }
        forms.push(f.clone());
        ids.insert(f.clone(), forms.len() - 1);
        forms.len() - 1
    }
    let mut forms: Vec<PathFormula> = Vec::new();
    let mut ids: HashMap<PathFormula, usize> = HashMap::new();
    let root = intern(phi, &mut forms, &mut ids);

    let mut vals: Vec<Vec<bool>> = vec![vec![false; classes]; forms.len()];
    for i in 0..forms.len() {
        let f = forms[i].clone();
        match &f {
            PathFormula::True => vals[i] = vec![true; classes],
            PathFormula::False => vals[i] = vec![false; classes],
            PathFormula::Lit(l) => {
                for c in 0..classes {
                    vals[i][c] = w.class_valuation(c).satisfies(l);
                }
            }
            PathFormula::And(cs) => {
                let rows: Vec<usize> = cs.iter().map(|c| ids[c]).collect();
                for c in 0..classes {
                    vals[i][c] = rows.iter().all(|&r| vals[r][c]);
                }
            }
            PathFormula::Or(cs) => {
                let rows: Vec<usize> = cs.iter().map(|c| ids[c]).collect();
                for c in 0..classes {
                    vals[i][c] = rows.iter().any(|&r| vals[r][c]);
                }
            }
            PathFormula::Next(a) => {
                let r = ids[&**a];
                for c in 0..classes {
                    vals[i][c] = vals[r][w.next_class(c)];
                }
            }
            PathFormula::Until(a, b) => {
                let (ra, rb) = (ids[&**a], ids[&**b]);
                // least fixpoint of v = b or (a and X v)
                let mut cur = vec![false; classes];
                loop {
                    let mut changed = false;
                    for c in (0..classes).rev() {
                        let nv = vals[rb][c] || (vals[ra][c] && cur[w.next_class(c)]);
                        if nv != cur[c] {
                            cur[c] = nv;
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                }
                vals[i] = cur;
            }
            PathFormula::Release(a, b) => {
                let (ra, rb) = (ids[&**a], ids[&**b]);
                // greatest fixpoint of v = b and (a or X v)
                let mut cur = vec![true; classes];
                loop {
                    let mut changed = false;
                    for c in (0..classes).rev() {
                        let nv = vals[rb][c] && (vals[ra][c] || cur[w.next_class(c)]);
                        if nv != cur[c] {
                            cur[c] = nv;
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                }
                vals[i] = cur;
            }
            PathFormula::Forall(_) | PathFormula::Exists(_) => unreachable!(),
        }
    }
    vals[root][0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula_text, to_pnf_path, Lit, Proposition};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn props_rg() -> BTreeMap<String, Proposition> {
        let mut m = BTreeMap::new();
        m.insert("r".to_string(), Proposition::input("r"));
        m.insert("g".to_string(), Proposition::output("g"));
        m
    }

    fn path(text: &str) -> PathFormula {
        to_pnf_path(&parse_formula_text(text).unwrap(), &props_rg()).unwrap()
    }

    fn basis_rg() -> Basis {
        Basis::new([Proposition::input("r"), Proposition::output("g")])
    }

    fn val(props: &[&str]) -> Valuation {
        Valuation::from_iter(props.iter().map(|p| {
            if *p == "r" {
                Proposition::input("r")
            } else {
                Proposition::output(*p)
            }
        }))
    }

    #[test]
    fn nbw_of_true_is_a_single_accepting_loop() {
        let a = nbw_of_path_formula(&PathFormula::True, &basis_rg());
        assert_eq!(a.state_count(), 1);
        assert!(a.sink().is_none());
        assert!(a.is_accepting(a.initial()));
        assert_eq!(a.successors(a.initial(), 0), vec![a.initial()]);
    }

    #[test]
    fn nbw_of_globally_is_one_state_plus_sink() {
        let a = nbw_of_path_formula(&path("G g"), &basis_rg());
        assert_eq!(a.state_count(), 1);
        assert!(a.sink().is_some());
        assert!(a.is_accepting(a.initial()));
    }

    #[test]
    fn nbw_of_nested_next_formula_state_count_golden() {
        // X(g && X(g && F !g)): five states besides the sink with this
        // construction (frozen).
        let a = nbw_of_path_formula(&path("X (g && X (g && F !g))"), &basis_rg());
        assert_eq!(a.state_count(), 5);
    }

    #[test]
    fn construction_is_deterministic() {
        let f = path("(r U g) && X (g R (r || F g))");
        let a = nbw_of_path_formula(&f, &basis_rg());
        let b = nbw_of_path_formula(&f, &basis_rg());
        assert_eq!(a, b);
    }

    #[test]
    fn completeness_every_state_has_a_successor() {
        for text in ["G g", "F g", "r U g", "g R r", "X X g", "false", "(F g) && (G r)"] {
            let a = nbw_of_path_formula(&path(text), &basis_rg());
            for s in 0..a.num_states() as StateId {
                for letter in 0..4u64 {
                    assert!(
                        !a.successors(s, letter).is_empty(),
                        "{text}: state {s} letter {letter}"
                    );
                }
            }
        }
    }

    #[test]
    fn lasso_acceptance_for_globally_not_g() {
        let a = nbw_of_path_formula(&path("G !g"), &basis_rg());
        assert!(accepts_lasso(&a, &LassoWord::new(vec![], vec![val(&[])])));
        assert!(!accepts_lasso(&a, &LassoWord::new(vec![], vec![val(&["g"])])));
    }

    #[test]
    fn lasso_acceptance_for_nested_next() {
        let a = nbw_of_path_formula(&path("X (g && X (g && F !g))"), &basis_rg());
        let w =
            LassoWord::new(vec![val(&[]), val(&["g"]), val(&["g"]), val(&[])], vec![val(&[])]);
        assert!(accepts_lasso(&a, &w));
        assert!(eval_ltl_on_lasso(&path("X (g && X (g && F !g))"), &w));
        let stuck = LassoWord::new(vec![], vec![val(&["g"])]);
        assert!(!accepts_lasso(&a, &stuck));
    }

    #[test]
    fn eval_finally_on_cycle() {
        assert!(eval_ltl_on_lasso(&path("F g"), &LassoWord::new(vec![], vec![val(&["g"])])));
        assert!(!eval_ltl_on_lasso(&path("F g"), &LassoWord::new(vec![], vec![val(&[])])));
    }

    pub(crate) fn random_formula(rng: &mut ChaCha8Rng, depth: u32) -> PathFormula {
        let r = Proposition::input("r");
        let g = Proposition::output("g");
        if depth == 0 {
            return match rng.gen_range(0..6) {
                0 => PathFormula::True,
                1 => PathFormula::False,
                2 => PathFormula::Lit(Lit::pos(r)),
                3 => PathFormula::Lit(Lit::neg(r)),
                4 => PathFormula::Lit(Lit::pos(g)),
                _ => PathFormula::Lit(Lit::neg(g)),
            };
        }
        match rng.gen_range(0..6) {
            0 => PathFormula::and(vec![
                random_formula(rng, depth - 1),
                random_formula(rng, depth - 1),
            ]),
            1 => PathFormula::or(vec![
                random_formula(rng, depth - 1),
                random_formula(rng, depth - 1),
            ]),
            2 => PathFormula::next(random_formula(rng, depth - 1)),
            3 => {
                PathFormula::until(random_formula(rng, depth - 1), random_formula(rng, depth - 1))
            }
            4 => PathFormula::release(
                random_formula(rng, depth - 1),
                random_formula(rng, depth - 1),
            ),
            _ => random_formula(rng, depth - 1),
        }
    }

    fn random_lasso(rng: &mut ChaCha8Rng) -> LassoWord {
        let stem_len = rng.gen_range(0..=4);
        let cycle_len = rng.gen_range(1..=4);
        let mut mk = |_: usize| {
            let mut v = Valuation::empty();
            if rng.gen_bool(0.5) {
                v.insert(Proposition::input("r"));
            }
            if rng.gen_bool(0.5) {
                v.insert(Proposition::output("g"));
            }
            v
        };
        LassoWord::new(
            (0..stem_len).map(&mut mk).collect(),
            (0..cycle_len).map(&mut mk).collect(),
        )
    }

    #[test]
    fn automaton_agrees_with_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
        let basis = basis_rg();
        for _ in 0..400 {
            let f = random_formula(&mut rng, 3);
            let a = nbw_of_path_formula(&f, &basis);
            for _ in 0..3 {
                let w = random_lasso(&mut rng);
                assert_eq!(
                    accepts_lasso(&a, &w),
                    eval_ltl_on_lasso(&f, &w),
                    "mismatch for `{f}` on {w}"
                );
            }
        }
    }
}
