//! Bounded LTL synthesis of Moore machines via universal co-Büchi automata
//! and counting-function safety games, plus dualization for unrealisability
//! evidence.
//!
//! A UCW for the formula is obtained by building the NBW of the negation and
//! reading it co-Büchi. Game positions are counting functions mapping UCW
//! states to visit counts of rejecting states (untracked states are absent);
//! a position is losing when a counter exceeds the bound. The game is solved
//! on the fly: positions reachable under the current strategy guesses are
//! explored, positions with no surviving move are learned as dead, and the
//! search restarts until a closed winning region is found or the initial
//! position dies. Move search is lexicographic over the output bits the
//! tracked states actually read, so the chosen strategy is the numerically
//! smallest winning output valuation and extraction is deterministic.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::automata::{nbw_of_path_formula, Basis, Letter, Nbw, StateId};
use crate::logic::{pnf_negate_path, PathFormula, Proposition, Valuation};
use crate::machine::MooreMachine;
use crate::modelcheck::{check_ltl, exists_accepting_path, ProductGraph};

/// A universal co-Büchi word automaton: same shape as an NBW, a word is
/// accepted iff every run visits rejecting states finitely often. Built so
/// that the rejecting set is the accepting set of the negation's NBW.
#[derive(Debug, Clone)]
pub struct Ucw {
    nbw: Nbw,
}

impl Ucw {
    pub fn inner(&self) -> &Nbw {
        &self.nbw
    }

    pub fn rejecting(&self, s: StateId) -> bool {
        self.nbw.is_accepting(s)
    }

    pub fn num_rejecting(&self) -> usize {
        (0..self.nbw.num_states() as StateId)
            .filter(|&s| Some(s) != self.nbw.sink() && self.rejecting(s))
            .count()
    }

    pub fn state_count(&self) -> usize {
        self.nbw.state_count()
    }
}

/// UCW recognizing exactly the models of the quantifier-free formula.
pub fn ucw_of_ltl(phi: &PathFormula, basis: &Basis) -> Ucw {
    Ucw { nbw: nbw_of_path_formula(&pnf_negate_path(phi), basis) }
}

/// A plain LTL synthesis problem: disjoint inputs and outputs and a
/// quantifier-free formula over them. `mealy` selects the move order: Moore
/// systems commit outputs before seeing the step's input, Mealy systems see
/// the input first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LtlSpec {
    pub inputs: Vec<Proposition>,
    pub outputs: Vec<Proposition>,
    pub formula: PathFormula,
    pub mealy: bool,
}

impl LtlSpec {
    pub fn moore(
        inputs: Vec<Proposition>,
        outputs: Vec<Proposition>,
        formula: PathFormula,
    ) -> LtlSpec {
        LtlSpec { inputs, outputs, formula, mealy: false }
    }
}

impl From<&crate::reduction::ReducedSpec> for LtlSpec {
    fn from(r: &crate::reduction::ReducedSpec) -> LtlSpec {
        LtlSpec::moore(r.inputs.clone(), r.outputs.clone(), r.formula.clone())
    }
}

/// Swap the players: the dual system controls the old inputs, observes the
/// old outputs, and must enforce the negated formula. The dual of a Moore
/// problem is a Mealy problem.
pub fn dualize(spec: &LtlSpec) -> LtlSpec {
    LtlSpec {
        inputs: spec.outputs.iter().map(|p| Proposition::input(p.name())).collect(),
        outputs: spec.inputs.iter().map(|p| Proposition::output(p.name())).collect(),
        formula: pnf_negate_path(&spec.formula),
        mealy: !spec.mealy,
    }
}

/// A finite-state Mealy machine: outputs label transitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MealyMachine {
    pub inputs: Vec<Proposition>,
    pub outputs: Vec<Proposition>,
    pub state_names: Vec<String>,
    pub initial: usize,
    /// `out[state][input_index]`
    pub out: Vec<Vec<Valuation>>,
    pub trans: Vec<Vec<usize>>,
}

impl MealyMachine {
    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn input_valuation(&self, idx: usize) -> Valuation {
        let mut v = Valuation::empty();
        for (i, p) in self.inputs.iter().enumerate() {
            if idx & (1 << i) != 0 {
                v.insert(p.clone());
            }
        }
        v
    }

    /// Deterministic text listing (Mealy machines are not part of the
    /// machine file format).
    pub fn render(&self) -> String {
        let mut s = String::new();
        let names = |ps: &[Proposition]| {
            ps.iter().map(|p| p.name().to_string()).collect::<Vec<_>>().join(", ")
        };
        let _ = writeln!(s, "MEALY (transcript)");
        let _ = writeln!(s, "inputs: {};", names(&self.inputs));
        let _ = writeln!(s, "outputs: {};", names(&self.outputs));
        let _ = writeln!(s, "init: {};", self.state_names[self.initial]);
        for (i, name) in self.state_names.iter().enumerate() {
            for e in 0..self.trans[i].len() {
                let _ = writeln!(
                    s,
                    "{} -{}/{}-> {};",
                    name,
                    self.input_valuation(e),
                    self.out[i][e],
                    self.state_names[self.trans[i][e]]
                );
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub enum SynthResult {
    Realisable(MooreMachine),
    BoundedUnrealisable { counter_bound: u32, machine_bound_observed: u32 },
}

impl SynthResult {
    pub fn is_realisable(&self) -> bool {
        matches!(self, SynthResult::Realisable(_))
    }
}

#[derive(Debug, Clone)]
pub enum MealySynthResult {
    Realisable(MealyMachine),
    BoundedUnrealisable { counter_bound: u32, machine_bound_observed: u32 },
}

impl MealySynthResult {
    pub fn is_realisable(&self) -> bool {
        matches!(self, MealySynthResult::Realisable(_))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("game exceeded the position cap of {0}")]
    GameTooLarge(usize),
    #[error("extracted machine failed verification against the formula: {0}")]
    VerificationFailed(String),
    #[error(transparent)]
    Check(#[from] crate::modelcheck::CheckError),
}

// ---------------------------------------------------------------------------
// Counting-function game
// ---------------------------------------------------------------------------

/// A counting function: tracked UCW states with their rejecting-visit
/// counts, sorted by state. Untracked states are unconstrained.
type Position = Vec<(StateId, u8)>;

struct Game {
    ucw: Ucw,
    bound: u8,
    out_bits: u64,
    env_letters: Vec<Letter>,
    max_positions: usize,
    positions: Vec<Position>,
    index: HashMap<Position, u32>,
    dead: Vec<bool>,
    /// Last winning output per position (Moore) or per (position, env
    /// letter) (Mealy); revalidated cheaply before any rescan.
    chosen: Vec<Vec<Option<Letter>>>,
    /// Recently successful outputs across positions, most recent first.
    /// Winning moves repeat heavily between positions, so trying these
    /// before the full scan cuts the search by orders of magnitude. The
    /// cache evolves deterministically with the exploration order.
    recent: Vec<Letter>,
    /// Output bits ordered by how often they appear in automaton cubes;
    /// the full scan enumerates patterns in this order so that
    /// frequently-constrained bits flip first.
    scan_bits: Vec<u64>,
    /// scratch for update()
    scratch: Vec<i16>,
    touched: Vec<StateId>,
}

const RECENT_CAP: usize = 48;

fn scatter(compressed: u64, mask: u64) -> u64 {
    let mut out = 0u64;
    let mut m = mask;
    let mut c = compressed;
    while m != 0 {
        let bit = m & m.wrapping_neg();
        if c & 1 != 0 {
            out |= bit;
        }
        m &= m - 1;
        c >>= 1;
    }
    out
}

impl Game {
    fn new(spec: &LtlSpec, ucw: Ucw, bound: u32, max_positions: usize) -> Game {
        let basis = ucw.inner().basis().clone();
        let mut out_bits = 0u64;
        for p in &spec.outputs {
            if let Some(i) = basis.index_of(p) {
                out_bits |= 1 << i;
            }
        }
        let mut in_positions = Vec::new();
        for p in &spec.inputs {
            if let Some(i) = basis.index_of(p) {
                in_positions.push(i);
            }
        }
        let mut in_mask = 0u64;
        for &i in &in_positions {
            in_mask |= 1 << i;
        }
        let env_letters: Vec<Letter> =
            (0..(1u64 << in_positions.len())).map(|e| scatter(e, in_mask)).collect();
        let n = ucw.inner().num_states();

        // Frequency of each output bit across all edge cubes.
        let mut freq: Vec<(usize, u64)> = Vec::new();
        {
            let mut counts: HashMap<u64, usize> = HashMap::new();
            for s in 0..n as StateId {
                for (cube, _) in ucw.inner().edges(s) {
                    let mut m = cube.care & out_bits;
                    while m != 0 {
                        let bit = m & m.wrapping_neg();
                        *counts.entry(bit).or_insert(0) += 1;
                        m &= m - 1;
                    }
                }
            }
            let mut m = out_bits;
            while m != 0 {
                let bit = m & m.wrapping_neg();
                freq.push((counts.get(&bit).copied().unwrap_or(0), bit));
                m &= m - 1;
            }
            freq.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        }
        let scan_bits: Vec<u64> = freq.into_iter().map(|(_, b)| b).collect();

        let mut game = Game {
            ucw,
            bound: bound.min(u8::MAX as u32 - 1) as u8,
            out_bits,
            env_letters,
            max_positions,
            positions: Vec::new(),
            index: HashMap::new(),
            dead: Vec::new(),
            chosen: Vec::new(),
            recent: Vec::new(),
            scan_bits,
            scratch: vec![-1; n],
            touched: Vec::new(),
        };
        let q0 = game.ucw.inner().initial();
        let c0 = u8::from(game.ucw.rejecting(q0));
        let init: Position = if c0 > game.bound { vec![] } else { vec![(q0, c0)] };
        // A position with an exceeded counter never arises; c0 > bound is
        // represented by an immediately-dead marker below.
        let id = game.intern(init).expect("first position fits");
        debug_assert_eq!(id, 0);
        if c0 > game.bound {
            game.dead[0] = true;
        }
        game
    }

    fn intern(&mut self, pos: Position) -> Result<u32, SynthError> {
        if let Some(&id) = self.index.get(&pos) {
            return Ok(id);
        }
        if self.positions.len() >= self.max_positions {
            return Err(SynthError::GameTooLarge(self.max_positions));
        }
        let id = self.positions.len() as u32;
        self.index.insert(pos.clone(), id);
        self.positions.push(pos);
        self.dead.push(false);
        self.chosen.push(Vec::new());
        Ok(id)
    }

    /// Enumerate candidate outputs restricted to `relevant`: previously
    /// chosen / recently successful letters first, then the exhaustive scan
    /// over the frequency-ordered bits.
    fn move_candidates(&self, own: Option<Letter>, relevant: u64) -> Vec<Letter> {
        let mut cands = Vec::with_capacity(self.recent.len() + 2);
        let push = |o: Letter, cands: &mut Vec<Letter>| {
            if !cands.contains(&o) {
                cands.push(o);
            }
        };
        if let Some(o) = own {
            push(o & relevant, &mut cands);
        }
        for &o in &self.recent {
            push(o & relevant, &mut cands);
        }
        cands
    }

    fn record_success(&mut self, o: Letter) {
        if let Some(at) = self.recent.iter().position(|&x| x == o) {
            self.recent.remove(at);
        }
        self.recent.insert(0, o);
        self.recent.truncate(RECENT_CAP);
    }

    /// The i-th pattern of the exhaustive scan over `relevant`, with
    /// frequently-constrained bits flipping fastest.
    fn scan_pattern(&self, relevant: u64, comp: u64) -> Letter {
        let mut o = 0u64;
        let mut c = comp;
        for &bit in &self.scan_bits {
            if bit & relevant == 0 {
                continue;
            }
            if c & 1 != 0 {
                o |= bit;
            }
            c >>= 1;
        }
        o
    }

    /// Counter update on one letter; `None` when a counter exceeds the
    /// bound. Runs falling into the sink are dropped: they can never visit
    /// a rejecting state again.
    fn update(&mut self, pos_id: u32, letter: Letter) -> Option<Position> {
        let sink = self.ucw.inner().sink();
        let mut losing = false;
        let pos = std::mem::take(&mut self.positions[pos_id as usize]);
        for &(q, c) in &pos {
            for (cube, t) in self.ucw.inner().edges(q) {
                if !cube.matches(letter) {
                    continue;
                }
                let t = *t;
                if Some(t) == sink {
                    continue;
                }
                let c2 = c + u8::from(self.ucw.rejecting(t));
                if c2 > self.bound {
                    losing = true;
                    break;
                }
                let cell = &mut self.scratch[t as usize];
                if *cell < c2 as i16 {
                    if *cell < 0 {
                        self.touched.push(t);
                    }
                    *cell = c2 as i16;
                }
            }
            if losing {
                break;
            }
        }
        self.positions[pos_id as usize] = pos;
        let mut result = None;
        if !losing {
            let mut out: Position = self
                .touched
                .iter()
                .map(|&t| (t, self.scratch[t as usize] as u8))
                .collect();
            out.sort_unstable();
            result = Some(out);
        }
        for &t in &self.touched {
            self.scratch[t as usize] = -1;
        }
        self.touched.clear();
        result
    }

    /// Output bits the tracked states can read.
    fn relevant_out(&self, pos_id: u32) -> u64 {
        let mut m = 0u64;
        for &(q, _) in &self.positions[pos_id as usize] {
            m |= self.ucw.inner().care_union(q);
        }
        m & self.out_bits
    }
}

/// Winning closure of a solved game: for each position (in discovery order
/// from the initial one) the chosen move(s) and successors.
struct MooreClosure {
    /// position id -> (output letter, successor position per env letter)
    choice: HashMap<u32, (Letter, Vec<u32>)>,
}

fn solve_moore(game: &mut Game) -> Result<Option<MooreClosure>, SynthError> {
    'restart: loop {
        if game.dead[0] {
            return Ok(None);
        }
        let mut choice: HashMap<u32, (Letter, Vec<u32>)> = HashMap::new();
        let mut stack: Vec<u32> = vec![0];
        while let Some(p) = stack.pop() {
            if choice.contains_key(&p) {
                continue;
            }
            debug_assert!(!game.dead[p as usize]);
            let relevant = game.relevant_out(p);
            let nbits = relevant.count_ones();
            assert!(nbits < 62, "more than 62 relevant output bits");
            if game.chosen[p as usize].is_empty() {
                game.chosen[p as usize] = vec![None];
            }
            let own = game.chosen[p as usize][0];
            let mut found: Option<(Letter, Vec<u32>)> = None;
            let mut tried: Vec<Letter> = Vec::new();
            let candidates = game.move_candidates(own, relevant);
            let mut scan_comp = 0u64;
            let scan_len = 1u64 << nbits;
            'search: loop {
                let o = if (tried.len() as usize) < candidates.len() {
                    candidates[tried.len()]
                } else {
                    loop {
                        if scan_comp >= scan_len {
                            break 'search;
                        }
                        let o = game.scan_pattern(relevant, scan_comp);
                        scan_comp += 1;
                        if !tried.contains(&o) {
                            break o;
                        }
                    }
                };
                tried.push(o);
                let mut succs = Vec::with_capacity(game.env_letters.len());
                let mut ok = true;
                for ei in 0..game.env_letters.len() {
                    let letter = o | game.env_letters[ei];
                    match game.update(p, letter) {
                        None => {
                            ok = false;
                            break;
                        }
                        Some(next) => {
                            let id = game.intern(next)?;
                            if game.dead[id as usize] {
                                ok = false;
                                break;
                            }
                            succs.push(id);
                        }
                    }
                }
                if ok {
                    found = Some((o, succs));
                    break;
                }
            }
            match found {
                None => {
                    game.dead[p as usize] = true;
                    continue 'restart;
                }
                Some((o, succs)) => {
                    game.chosen[p as usize][0] = Some(o);
                    game.record_success(o);
                    for &s in &succs {
                        if !choice.contains_key(&s) {
                            stack.push(s);
                        }
                    }
                    choice.insert(p, (o, succs));
                }
            }
        }
        return Ok(Some(MooreClosure { choice }));
    }
}

/// Mealy variant: the environment reveals the input, then the system picks
/// the output. A position survives iff every input admits an output.
struct MealyClosure {
    /// position id -> per env letter (output letter, successor)
    choice: HashMap<u32, Vec<(Letter, u32)>>,
}

fn solve_mealy(game: &mut Game) -> Result<Option<MealyClosure>, SynthError> {
    'restart: loop {
        if game.dead[0] {
            return Ok(None);
        }
        let mut choice: HashMap<u32, Vec<(Letter, u32)>> = HashMap::new();
        let mut stack: Vec<u32> = vec![0];
        while let Some(p) = stack.pop() {
            if choice.contains_key(&p) {
                continue;
            }
            debug_assert!(!game.dead[p as usize]);
            let relevant = game.relevant_out(p);
            let nbits = relevant.count_ones();
            assert!(nbits < 62, "more than 62 relevant output bits");
            let env_n = game.env_letters.len();
            if game.chosen[p as usize].is_empty() {
                game.chosen[p as usize] = vec![None; env_n];
            }
            let mut per_env: Vec<(Letter, u32)> = Vec::with_capacity(env_n);
            let mut alive = true;
            for ei in 0..env_n {
                let own = game.chosen[p as usize][ei];
                let candidates = game.move_candidates(own, relevant);
                let mut tried: Vec<Letter> = Vec::new();
                let mut scan_comp = 0u64;
                let scan_len = 1u64 << nbits;
                let mut found = None;
                'search: loop {
                    let o = if tried.len() < candidates.len() {
                        candidates[tried.len()]
                    } else {
                        loop {
                            if scan_comp >= scan_len {
                                break 'search;
                            }
                            let o = game.scan_pattern(relevant, scan_comp);
                            scan_comp += 1;
                            if !tried.contains(&o) {
                                break o;
                            }
                        }
                    };
                    tried.push(o);
                    let letter = o | game.env_letters[ei];
                    if let Some(next) = game.update(p, letter) {
                        let id = game.intern(next)?;
                        if !game.dead[id as usize] {
                            found = Some((o, id));
                            break;
                        }
                    }
                }
                match found {
                    None => {
                        alive = false;
                        break;
                    }
                    Some((o, id)) => {
                        game.chosen[p as usize][ei] = Some(o);
                        game.record_success(o);
                        per_env.push((o, id));
                    }
                }
            }
            if !alive {
                game.dead[p as usize] = true;
                continue 'restart;
            }
            for &(_, s) in &per_env {
                if !choice.contains_key(&s) {
                    stack.push(s);
                }
            }
            choice.insert(p, per_env);
        }
        return Ok(Some(MealyClosure { choice }));
    }
}

// ---------------------------------------------------------------------------
// Machine extraction, reduction and folding
// ---------------------------------------------------------------------------

fn letter_to_valuation(basis: &Basis, letter: Letter, among: &[Proposition]) -> Valuation {
    Valuation::from_iter(among.iter().filter_map(|p| {
        basis.index_of(p).and_then(|i| {
            if letter & (1 << i) != 0 {
                Some(p.clone())
            } else {
                None
            }
        })
    }))
}

/// Per-state strategy data during extraction: member game positions, one
/// output letter per state (Moore) or per input (Mealy), and successor
/// classes.
struct FoldState {
    /// members[class] = game positions folded into this class.
    members: Vec<Vec<u32>>,
    /// Moore: one entry per class. Mealy: one per (class, env index),
    /// flattened as out[class][env].
    out: Vec<Vec<Letter>>,
    row: Vec<Vec<usize>>,
}

impl FoldState {
    /// Coarsest partition with equal output letters and matching successor
    /// classes: merges exactly the trace-equivalent strategy states. Sound
    /// without re-validation.
    fn refine(&mut self) {
        let n = self.members.len();
        let mut class: Vec<usize> = {
            let mut seen: BTreeMap<&Vec<Letter>, usize> = BTreeMap::new();
            (0..n)
                .map(|s| {
                    let next = seen.len();
                    *seen.entry(&self.out[s]).or_insert(next)
                })
                .collect()
        };
        loop {
            let mut seen: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
            let mut next_class = vec![0usize; n];
            for s in 0..n {
                let sig =
                    (class[s], self.row[s].iter().map(|&t| class[t]).collect::<Vec<_>>());
                let fresh = seen.len();
                next_class[s] = *seen.entry(sig).or_insert(fresh);
            }
            if next_class == class {
                break;
            }
            class = next_class;
        }
        // Quotient, renumbering classes by first occurrence (state 0 stays
        // initial).
        let mut rep: BTreeMap<usize, usize> = BTreeMap::new();
        let mut members: Vec<Vec<u32>> = Vec::new();
        let mut out: Vec<Vec<Letter>> = Vec::new();
        let mut row_old: Vec<Vec<usize>> = Vec::new();
        let mut old_of_new: Vec<usize> = Vec::new();
        for s in 0..n {
            let c = class[s];
            match rep.get(&c) {
                Some(&new_id) => members[new_id].extend(self.members[s].iter().copied()),
                None => {
                    let new_id = members.len();
                    rep.insert(c, new_id);
                    members.push(self.members[s].clone());
                    out.push(self.out[s].clone());
                    row_old.push(self.row[s].clone());
                    old_of_new.push(s);
                }
            }
        }
        let _ = old_of_new;
        let row = row_old
            .iter()
            .map(|r| r.iter().map(|&t| rep[&class[t]]).collect())
            .collect();
        self.members = members;
        self.out = out;
        self.row = row;
    }

    fn total_positions(&self) -> usize {
        self.members.iter().map(|m| m.len()).sum()
    }

    /// Drop classes unreachable from 0, renumbering in BFS order.
    fn prune(&mut self) {
        let mut order: Vec<usize> = vec![0];
        let mut new_id: HashMap<usize, usize> = HashMap::new();
        new_id.insert(0, 0);
        let mut q = VecDeque::new();
        q.push_back(0usize);
        while let Some(c) = q.pop_front() {
            for &t in &self.row[c] {
                if !new_id.contains_key(&t) {
                    new_id.insert(t, order.len());
                    order.push(t);
                    q.push_back(t);
                }
            }
        }
        self.members = order.iter().map(|&c| std::mem::take(&mut self.members[c])).collect();
        self.out = order.iter().map(|&c| std::mem::take(&mut self.out[c])).collect();
        self.row = order
            .iter()
            .map(|&c| self.row[c].iter().map(|t| new_id[t]).collect())
            .collect();
    }
}

/// Fold cap: the agglomerative pass touches every member position per merge
/// attempt, so it only runs on small games.
const FOLD_MAX_POSITIONS: usize = 600;
const FOLD_MAX_CLASSES: usize = 48;

fn moore_fold_from_closure(closure: &MooreClosure) -> FoldState {
    let mut order: Vec<u32> = vec![0];
    let mut id_of: HashMap<u32, usize> = HashMap::new();
    id_of.insert(0, 0);
    let mut q = VecDeque::new();
    q.push_back(0u32);
    let mut out = Vec::new();
    let mut row: Vec<Vec<usize>> = Vec::new();
    while let Some(p) = q.pop_front() {
        let (o, succs) = &closure.choice[&p];
        out.push(vec![*o]);
        let mut r = Vec::with_capacity(succs.len());
        for &s in succs {
            let id = match id_of.get(&s) {
                Some(&i) => i,
                None => {
                    let i = order.len();
                    id_of.insert(s, i);
                    order.push(s);
                    q.push_back(s);
                    i
                }
            };
            r.push(id);
        }
        row.push(r);
    }
    FoldState { members: order.iter().map(|&p| vec![p]).collect(), out, row }
}

fn mealy_fold_from_closure(closure: &MealyClosure) -> FoldState {
    let mut order: Vec<u32> = vec![0];
    let mut id_of: HashMap<u32, usize> = HashMap::new();
    id_of.insert(0, 0);
    let mut q = VecDeque::new();
    q.push_back(0u32);
    let mut out = Vec::new();
    let mut row: Vec<Vec<usize>> = Vec::new();
    while let Some(p) = q.pop_front() {
        let per_env = &closure.choice[&p];
        let mut os = Vec::with_capacity(per_env.len());
        let mut r = Vec::with_capacity(per_env.len());
        for &(o, s) in per_env {
            os.push(o);
            let id = match id_of.get(&s) {
                Some(&i) => i,
                None => {
                    let i = order.len();
                    id_of.insert(s, i);
                    order.push(s);
                    q.push_back(s);
                    i
                }
            };
            r.push(id);
        }
        out.push(os);
        row.push(r);
    }
    FoldState { members: order.iter().map(|&p| vec![p]).collect(), out, row }
}

fn emit_moore(spec: &LtlSpec, basis: &Basis, fold: &FoldState) -> MooreMachine {
    let mut inputs = spec.inputs.clone();
    inputs.sort();
    let mut outputs = spec.outputs.clone();
    outputs.sort();
    MooreMachine {
        inputs,
        outputs: outputs.clone(),
        state_names: (0..fold.members.len()).map(|i| format!("m{i}")).collect(),
        initial: 0,
        out: fold.out.iter().map(|o| letter_to_valuation(basis, o[0], &outputs)).collect(),
        trans: fold.row.clone(),
    }
}

fn emit_mealy(spec: &LtlSpec, basis: &Basis, fold: &FoldState) -> MealyMachine {
    let mut inputs = spec.inputs.clone();
    inputs.sort();
    let mut outputs = spec.outputs.clone();
    outputs.sort();
    MealyMachine {
        inputs,
        outputs: outputs.clone(),
        state_names: (0..fold.members.len()).map(|i| format!("m{i}")).collect(),
        initial: 0,
        out: fold
            .out
            .iter()
            .map(|os| os.iter().map(|o| letter_to_valuation(basis, *o, &outputs)).collect())
            .collect(),
        trans: fold.row.clone(),
    }
}

/// One agglomerative merge round: try to fuse a pair of classes into one,
/// resolving per-input don't-cares through the game (a move survives when
/// every member position stays non-losing and lands outside the dead set)
/// and accepting the merge only when the folded machine still passes the
/// formula check. Returns true when some pair was merged.
fn try_fold_pair(
    game: &mut Game,
    fold: &mut FoldState,
    mealy: bool,
    validate: &mut dyn FnMut(&FoldState) -> bool,
) -> bool {
    let n = fold.members.len();
    let env_n = game.env_letters.len();
    for i in 0..n {
        'pair: for j in (i + 1)..n {
            let mut new_out: Vec<Letter> = Vec::with_capacity(if mealy { env_n } else { 1 });
            // Two routing variants per merge: prefer successors outside the
            // pair, or the plain majority.
            let mut row_outside: Vec<usize> = Vec::with_capacity(env_n);
            let mut row_overall: Vec<usize> = Vec::with_capacity(env_n);
            // Candidate outputs per slot: the two parents' letters first;
            // with a tiny output space, every other letter as well (a
            // winning merged table may need values neither parent used).
            let out_bits = game.out_bits;
            let full_space = out_bits.count_ones() <= 2;
            let out_candidates = move |fold: &FoldState, slot: usize| {
                let mut cs = vec![fold.out[i][slot]];
                if fold.out[j][slot] != fold.out[i][slot] {
                    cs.push(fold.out[j][slot]);
                }
                if full_space {
                    for comp in 0..(1u64 << out_bits.count_ones()) {
                        let o = scatter(comp, out_bits);
                        if !cs.contains(&o) {
                            cs.push(o);
                        }
                    }
                }
                cs
            };
            if mealy {
                for e in 0..env_n {
                    let mut chosen = None;
                    for o in out_candidates(fold, e) {
                        if let Some((overall, outside)) = fold_move_ok(game, fold, i, j, o, e) {
                            chosen = Some((o, overall, outside));
                            break;
                        }
                    }
                    match chosen {
                        Some((o, overall, outside)) => {
                            new_out.push(o);
                            row_overall.push(overall);
                            row_outside.push(outside);
                        }
                        None => continue 'pair,
                    }
                }
            } else {
                let mut chosen_o: Option<Letter> = None;
                for o in out_candidates(fold, 0) {
                    let mut ra = Vec::with_capacity(env_n);
                    let mut rb = Vec::with_capacity(env_n);
                    let mut ok = true;
                    for e in 0..env_n {
                        match fold_move_ok(game, fold, i, j, o, e) {
                            Some((overall, outside)) => {
                                ra.push(overall);
                                rb.push(outside);
                            }
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        chosen_o = Some(o);
                        row_overall = ra;
                        row_outside = rb;
                        break;
                    }
                }
                match chosen_o {
                    Some(o) => new_out.push(o),
                    None => continue 'pair,
                }
            }

            let mut variants = vec![row_outside];
            if row_overall != variants[0] {
                variants.push(row_overall);
            }
            for new_row in variants {
                // Build the candidate: j folded into i.
                let mut cand = FoldState {
                    members: fold.members.clone(),
                    out: fold.out.clone(),
                    row: fold.row.clone(),
                };
                let moved = std::mem::take(&mut cand.members[j]);
                cand.members[i].extend(moved);
                cand.out[i] = new_out.clone();
                cand.row[i] = new_row.iter().map(|&t| if t == j { i } else { t }).collect();
                for r in cand.row.iter_mut() {
                    for t in r.iter_mut() {
                        if *t == j {
                            *t = i;
                        }
                    }
                }
                cand.prune();
                if validate(&cand) {
                    log::trace!(
                        "fold: merged class {j} into {i} ({} classes left)",
                        cand.members.len()
                    );
                    *fold = cand;
                    return true;
                }
            }
            log::trace!("fold: merge of {j} into {i} failed end validation");
        }
    }
    false
}

/// Is output letter `o` on env letter `e` acceptable for every member
/// position of classes i and j? Returns the successor class picked by
/// majority over the members' mapped successors (a member on an already
/// decided branch is indifferent and must not outvote the constrained
/// ones); ties break toward the smaller class id.
fn fold_move_ok(
    game: &mut Game,
    fold: &FoldState,
    i: usize,
    j: usize,
    o: Letter,
    e: usize,
) -> Option<(usize, usize)> {
    let letter = o | game.env_letters[e];
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for &cls in &[i, j] {
        for &p in &fold.members[cls] {
            let next = game.update(p, letter)?;
            if let Some(&id) = game.index.get(&next) {
                if game.dead[id as usize] {
                    return None;
                }
                if let Some(c) = fold.members.iter().position(|ms| ms.contains(&id)) {
                    *votes.entry(c).or_insert(0) += 1;
                }
            }
        }
    }
    let overall =
        votes.iter().max_by_key(|(c, n)| (**n, usize::MAX - **c)).map(|(c, _)| *c)?;
    // Routing inside the pair is self-referential after the merge; a variant
    // preferring votes for other classes is offered as an alternative.
    let outside = votes
        .iter()
        .filter(|(c, _)| **c != i && **c != j)
        .max_by_key(|(c, n)| (**n, usize::MAX - **c))
        .map(|(c, _)| *c)
        .unwrap_or(overall);
    Some((overall, outside))
}

/// Exhaustive partition search for small strategy quotients: try every
/// partition of the classes into g groups, g ascending, and return the
/// first folded machine that passes validation — the smallest machine
/// expressible as a grouping of the solved strategy's classes. Partitions
/// are enumerated as restricted growth strings, so the order is
/// deterministic.
const PARTITION_SEARCH_MAX_CLASSES: usize = 8;

fn partition_search(
    game: &mut Game,
    fold: &FoldState,
    mealy: bool,
    validate: &mut dyn FnMut(&FoldState) -> bool,
) -> Option<FoldState> {
    let n = fold.members.len();
    if n <= 1 {
        return None;
    }
    // All set partitions as restricted growth strings.
    let mut parts: Vec<Vec<usize>> = Vec::new();
    {
        fn rec(i: usize, maxv: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i == cur.len() {
                out.push(cur.clone());
                return;
            }
            for v in 0..=maxv + 1 {
                cur[i] = v;
                rec(i + 1, maxv.max(v), cur, out);
            }
        }
        let mut cur = vec![0usize; n];
        rec(1, 0, &mut cur, &mut parts);
    }
    for groups in 1..n {
        for rgs in &parts {
            if rgs.iter().copied().max().unwrap() + 1 != groups {
                continue;
            }
            if let Some(cand) = try_partition(game, fold, rgs, groups, mealy, validate) {
                return Some(cand);
            }
        }
    }
    None
}

/// Attempt one partition: synthesize per-group tables and validate (both
/// routing variants).
fn try_partition(
    game: &mut Game,
    fold: &FoldState,
    rgs: &[usize],
    groups: usize,
    mealy: bool,
    validate: &mut dyn FnMut(&FoldState) -> bool,
) -> Option<FoldState> {
    let env_n = game.env_letters.len();
    let out_bits = game.out_bits;
    let full_space = out_bits.count_ones() <= 2;
    // class -> group
    let group_members: Vec<Vec<u32>> = {
        let mut gm = vec![Vec::new(); groups];
        for (cls, &g) in rgs.iter().enumerate() {
            gm[g].extend(fold.members[cls].iter().copied());
        }
        gm
    };

    // One (letters, routing-overall, routing-outside) table per group.
    let mut outs: Vec<Vec<Letter>> = Vec::with_capacity(groups);
    let mut rows_overall: Vec<Vec<usize>> = Vec::with_capacity(groups);
    let mut rows_outside: Vec<Vec<usize>> = Vec::with_capacity(groups);
    for g in 0..groups {
        let slots = if mealy { env_n } else { 1 };
        let mut g_out = Vec::with_capacity(slots);
        let mut g_overall = Vec::with_capacity(env_n);
        let mut g_outside = Vec::with_capacity(env_n);
        let member_classes: Vec<usize> =
            (0..fold.members.len()).filter(|c| rgs[*c] == g).collect();
        let candidates_for = |slot: usize| {
            let mut cs: Vec<Letter> = Vec::new();
            for &cls in &member_classes {
                let o = fold.out[cls][slot];
                if !cs.contains(&o) {
                    cs.push(o);
                }
            }
            if full_space {
                for comp in 0..(1u64 << out_bits.count_ones()) {
                    let o = scatter(comp, out_bits);
                    if !cs.contains(&o) {
                        cs.push(o);
                    }
                }
            }
            cs
        };
        if mealy {
            for e in 0..env_n {
                let mut chosen = None;
                for o in candidates_for(e) {
                    if let Some((ov, os)) =
                        group_move_ok(game, fold, rgs, g, &group_members[g], o, e)
                    {
                        chosen = Some((o, ov, os));
                        break;
                    }
                }
                if chosen.is_none() {
                    log::trace!("partition {rgs:?}: group {g} has no move at env {e}");
                }
                let (o, ov, os) = chosen?;
                g_out.push(o);
                g_overall.push(ov);
                g_outside.push(os);
            }
        } else {
            let mut ok = false;
            for o in candidates_for(0) {
                let mut ra = Vec::with_capacity(env_n);
                let mut rb = Vec::with_capacity(env_n);
                let mut all = true;
                for e in 0..env_n {
                    match group_move_ok(game, fold, rgs, g, &group_members[g], o, e) {
                        Some((ov, os)) => {
                            ra.push(ov);
                            rb.push(os);
                        }
                        None => {
                            all = false;
                            break;
                        }
                    }
                }
                if all {
                    g_out.push(o);
                    g_overall = ra;
                    g_outside = rb;
                    ok = true;
                    break;
                }
            }
            if !ok {
                return None;
            }
        }
        outs.push(g_out);
        rows_overall.push(g_overall);
        rows_outside.push(g_outside);
    }

    // Initial group must be the group of class 0, renumbered to 0.
    let init_group = rgs[0];
    let remap = |g: usize| -> usize {
        if g == init_group {
            0
        } else if g == 0 {
            init_group
        } else {
            g
        }
    };
    for rows in [&rows_outside, &rows_overall] {
        let mut members = vec![Vec::new(); groups];
        let mut out = vec![Vec::new(); groups];
        let mut row = vec![Vec::new(); groups];
        for g in 0..groups {
            members[remap(g)] = group_members[g].clone();
            out[remap(g)] = outs[g].clone();
            row[remap(g)] = rows[g].iter().map(|&t| remap(t)).collect();
        }
        let mut cand = FoldState { members, out, row };
        cand.prune();
        if validate(&cand) {
            return Some(cand);
        }
        log::trace!("partition {rgs:?}: candidate failed end validation");
    }
    None
}

/// Group analog of [`fold_move_ok`]: the move must survive every member
/// position of the group; routing votes are mapped through the partition.
fn group_move_ok(
    game: &mut Game,
    fold: &FoldState,
    rgs: &[usize],
    own_group: usize,
    members: &[u32],
    o: Letter,
    e: usize,
) -> Option<(usize, usize)> {
    let letter = o | game.env_letters[e];
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for &p in members {
        let next = game.update(p, letter)?;
        if let Some(&id) = game.index.get(&next) {
            if game.dead[id as usize] {
                return None;
            }
            if let Some(c) = fold.members.iter().position(|ms| ms.contains(&id)) {
                *votes.entry(rgs[c]).or_insert(0) += 1;
            }
        }
    }
    let overall =
        votes.iter().max_by_key(|(c, n)| (**n, usize::MAX - **c)).map(|(c, _)| *c)?;
    let outside = votes
        .iter()
        .filter(|(c, _)| **c != own_group)
        .max_by_key(|(c, n)| (**n, usize::MAX - **c))
        .map(|(c, _)| *c)
        .unwrap_or(overall);
    Some((overall, outside))
}

/// Quotient by the coarsest partition with equal outputs and matching
/// successor classes; this merges exactly the trace-equivalent states of a
/// deterministic Moore machine.
pub fn minimize_moore(m: &MooreMachine) -> MooreMachine {
    let n = m.num_states();
    let mut class: Vec<usize> = {
        let mut seen: BTreeMap<&Valuation, usize> = BTreeMap::new();
        (0..n)
            .map(|s| {
                let next = seen.len();
                *seen.entry(&m.out[s]).or_insert(next)
            })
            .collect()
    };
    loop {
        let mut seen: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let mut next_class = vec![0usize; n];
        for s in 0..n {
            let sig = (class[s], m.trans[s].iter().map(|&t| class[t]).collect::<Vec<_>>());
            let fresh = seen.len();
            next_class[s] = *seen.entry(sig).or_insert(fresh);
        }
        if next_class == class {
            break;
        }
        class = next_class;
    }
    quotient_moore(m, &class)
}

fn quotient_moore(m: &MooreMachine, class: &[usize]) -> MooreMachine {
    // Representative = first state of each class reachable from the initial
    // one; renumber classes in BFS order from the initial class.
    let n_vals = m.num_input_vals();
    let mut rep_of_class: BTreeMap<usize, usize> = BTreeMap::new();
    for s in 0..m.num_states() {
        rep_of_class.entry(class[s]).or_insert(s);
    }
    let mut order: Vec<usize> = Vec::new(); // class ids in BFS order
    let mut new_id: BTreeMap<usize, usize> = BTreeMap::new();
    let mut q = VecDeque::new();
    new_id.insert(class[m.initial], 0);
    order.push(class[m.initial]);
    q.push_back(class[m.initial]);
    while let Some(c) = q.pop_front() {
        let rep = rep_of_class[&c];
        for e in 0..n_vals {
            let tc = class[m.trans[rep][e]];
            if !new_id.contains_key(&tc) {
                new_id.insert(tc, order.len());
                order.push(tc);
                q.push_back(tc);
            }
        }
    }
    let out = order.iter().map(|c| m.out[rep_of_class[c]].clone()).collect();
    let trans = order
        .iter()
        .map(|c| {
            let rep = rep_of_class[c];
            (0..n_vals).map(|e| new_id[&class[m.trans[rep][e]]]).collect()
        })
        .collect();
    MooreMachine {
        inputs: m.inputs.clone(),
        outputs: m.outputs.clone(),
        state_names: (0..order.len()).map(|i| format!("m{i}")).collect(),
        initial: 0,
        out,
        trans,
    }
}

/// Full extraction pipeline: refine the raw strategy, then (on small games)
/// agglomeratively fold pairs with end-to-end validation.
fn build_moore_machine(spec: &LtlSpec, game: &mut Game, closure: &MooreClosure) -> MooreMachine {
    let basis = game.ucw.inner().basis().clone();
    let neg_nbw = game.ucw.inner().clone();
    let mut fold = moore_fold_from_closure(closure);
    fold.refine();
    if fold.total_positions() <= FOLD_MAX_POSITIONS && fold.members.len() <= FOLD_MAX_CLASSES {
        let mut validate = |cand: &FoldState| {
            let m = emit_moore(spec, &basis, cand);
            crate::modelcheck::holds_against_negation_nbw(&m, &neg_nbw)
        };
        // Greedy pair merging brings big strategies down; the exhaustive
        // partition search then finds the smallest grouping.
        while fold.members.len() > PARTITION_SEARCH_MAX_CLASSES
            && try_fold_pair(game, &mut fold, false, &mut validate)
        {
            fold.refine();
        }
        if fold.members.len() <= PARTITION_SEARCH_MAX_CLASSES {
            if let Some(best) = partition_search(game, &fold, false, &mut validate) {
                fold = best;
            }
        }
    }
    emit_moore(spec, &basis, &fold)
}

fn build_mealy_machine(spec: &LtlSpec, game: &mut Game, closure: &MealyClosure) -> MealyMachine {
    let basis = game.ucw.inner().basis().clone();
    let neg_nbw = game.ucw.inner().clone();
    let mut fold = mealy_fold_from_closure(closure);
    fold.refine();
    if fold.total_positions() <= FOLD_MAX_POSITIONS && fold.members.len() <= FOLD_MAX_CLASSES {
        let mut validate = |cand: &FoldState| {
            let m = emit_mealy(spec, &basis, cand);
            mealy_violation_lasso(&m, &neg_nbw).is_none()
        };
        while fold.members.len() > PARTITION_SEARCH_MAX_CLASSES
            && try_fold_pair(game, &mut fold, true, &mut validate)
        {
            fold.refine();
        }
        if log::log_enabled!(log::Level::Trace) {
            for (c, ms) in fold.members.iter().enumerate() {
                let bits: String = fold.out[c]
                    .iter()
                    .map(|o| if *o != 0 { '1' } else { '0' })
                    .collect();
                log::trace!(
                    "class {c}: {} positions, out bits {bits}, row {:?}",
                    ms.len(),
                    fold.row[c]
                );
            }
        }
        if fold.members.len() <= PARTITION_SEARCH_MAX_CLASSES {
            if let Some(best) = partition_search(game, &fold, true, &mut validate) {
                fold = best;
            }
        }
    }
    emit_mealy(spec, &basis, &fold)
}

/// Mealy counterpart of [`minimize_moore`]; the initial partition groups
/// states with identical per-input output rows.
pub fn minimize_mealy(m: &MealyMachine) -> MealyMachine {
    let n = m.num_states();
    let mut class: Vec<usize> = {
        let mut seen: BTreeMap<&Vec<Valuation>, usize> = BTreeMap::new();
        (0..n)
            .map(|s| {
                let next = seen.len();
                *seen.entry(&m.out[s]).or_insert(next)
            })
            .collect()
    };
    loop {
        let mut seen: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let mut next_class = vec![0usize; n];
        for s in 0..n {
            let sig = (class[s], m.trans[s].iter().map(|&t| class[t]).collect::<Vec<_>>());
            let fresh = seen.len();
            next_class[s] = *seen.entry(sig).or_insert(fresh);
        }
        if next_class == class {
            break;
        }
        class = next_class;
    }

    let n_vals = m.trans.first().map_or(1, |r| r.len());
    let mut rep_of_class: BTreeMap<usize, usize> = BTreeMap::new();
    for s in 0..n {
        rep_of_class.entry(class[s]).or_insert(s);
    }
    let mut order: Vec<usize> = Vec::new();
    let mut new_id: BTreeMap<usize, usize> = BTreeMap::new();
    let mut q = VecDeque::new();
    new_id.insert(class[m.initial], 0);
    order.push(class[m.initial]);
    q.push_back(class[m.initial]);
    while let Some(c) = q.pop_front() {
        let rep = rep_of_class[&c];
        for e in 0..n_vals {
            let tc = class[m.trans[rep][e]];
            if !new_id.contains_key(&tc) {
                new_id.insert(tc, order.len());
                order.push(tc);
                q.push_back(tc);
            }
        }
    }
    MealyMachine {
        inputs: m.inputs.clone(),
        outputs: m.outputs.clone(),
        state_names: (0..order.len()).map(|i| format!("m{i}")).collect(),
        initial: 0,
        out: order.iter().map(|c| m.out[rep_of_class[c]].clone()).collect(),
        trans: order
            .iter()
            .map(|c| {
                let rep = rep_of_class[c];
                (0..n_vals).map(|e| new_id[&class[m.trans[rep][e]]]).collect()
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Synthesis entry points
// ---------------------------------------------------------------------------

fn full_basis(spec: &LtlSpec) -> Basis {
    let mut props: BTreeSet<Proposition> = BTreeSet::new();
    props.extend(spec.inputs.iter().cloned());
    props.extend(spec.outputs.iter().cloned());
    spec.formula.props(&mut props);
    Basis::new(props)
}

fn machine_bound(b: u32, rejecting: usize) -> u32 {
    b / rejecting.max(1) as u32
}

/// Bounded synthesis of a Moore machine: build the counting-function safety
/// game at the given counter bound, solve it, and extract and verify a
/// machine on success. The returned machine always passes `check_ltl`.
pub fn synth_bounded(
    spec: &LtlSpec,
    counter_bound: u32,
    max_positions: usize,
) -> Result<SynthResult, SynthError> {
    assert!(!spec.mealy, "synth_bounded expects a Moore problem; use synth_dual");
    let ucw = ucw_of_ltl(&spec.formula, &full_basis(spec));
    let rejecting = ucw.num_rejecting();
    let mut game = Game::new(spec, ucw, counter_bound, max_positions);
    match solve_moore(&mut game)? {
        None => Ok(SynthResult::BoundedUnrealisable {
            counter_bound,
            machine_bound_observed: machine_bound(counter_bound, rejecting),
        }),
        Some(closure) => {
            let machine = build_moore_machine(spec, &mut game, &closure);
            let verdict = check_ltl(&machine, &spec.formula)?;
            if !verdict.holds {
                return Err(SynthError::VerificationFailed(format!(
                    "machine with {} states violates `{}`",
                    machine.num_states(),
                    spec.formula
                )));
            }
            Ok(SynthResult::Realisable(machine))
        }
    }
}

/// Mealy-variant bounded synthesis, used for dualized problems. The
/// returned machine is verified with the Mealy trace check.
pub fn synth_dual(
    spec: &LtlSpec,
    counter_bound: u32,
    max_positions: usize,
) -> Result<MealySynthResult, SynthError> {
    assert!(spec.mealy, "synth_dual expects a Mealy problem");
    let ucw = ucw_of_ltl(&spec.formula, &full_basis(spec));
    let rejecting = ucw.num_rejecting();
    let mut game = Game::new(spec, ucw, counter_bound, max_positions);
    match solve_mealy(&mut game)? {
        None => Ok(MealySynthResult::BoundedUnrealisable {
            counter_bound,
            machine_bound_observed: machine_bound(counter_bound, rejecting),
        }),
        Some(closure) => {
            let machine = build_mealy_machine(spec, &mut game, &closure);
            if let Some(trace) = check_mealy_ltl(&machine, &spec.formula) {
                return Err(SynthError::VerificationFailed(format!(
                    "mealy machine violates `{}` on {trace}",
                    spec.formula
                )));
            }
            Ok(MealySynthResult::Realisable(machine))
        }
    }
}

/// Do all traces of the Mealy machine satisfy the formula? Returns a
/// violating lasso rendering when not.
pub fn check_mealy_ltl(m: &MealyMachine, phi: &PathFormula) -> Option<String> {
    let neg = pnf_negate_path(phi);
    let mut props = BTreeSet::new();
    neg.props(&mut props);
    let basis = Basis::new(props);
    let a = nbw_of_path_formula(&neg, &basis);
    mealy_violation_lasso(m, &a)
}

/// The shared Mealy trace check against a pre-built NBW of the negation.
fn mealy_violation_lasso(m: &MealyMachine, a: &Nbw) -> Option<String> {
    let basis = a.basis();
    let nq = a.num_states();
    let nt = m.num_states();
    let n_vals = m.trans.first().map_or(1, |r| r.len());

    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nt * nq];
    let mut succs = Vec::new();
    for t in 0..nt {
        for q in 0..nq as StateId {
            let node = t * nq + q as usize;
            for e in 0..n_vals {
                let letter = basis.mask_of(&m.out[t][e].union(&m.input_valuation(e)));
                a.successors_into(q, letter, &mut succs);
                let t2 = m.trans[t][e];
                for &q2 in &succs {
                    adj[node].push((e, t2 * nq + q2 as usize));
                }
            }
        }
    }
    let accepting = (0..nt * nq).map(|n| a.is_accepting((n % nq) as StateId)).collect();
    let g = ProductGraph { num_machine_states: nt, num_aut_states: nq, adj, accepting };
    exists_accepting_path(&g, g.node(m.initial, a.initial())).map(|lasso| {
        let step = |(node, e): &(usize, usize)| {
            format!("{}/{}", m.state_names[g.machine_state(*node)], m.input_valuation(*e))
        };
        let stem: Vec<String> = lasso.stem.iter().map(step).collect();
        let cycle: Vec<String> = lasso.cycle.iter().map(step).collect();
        format!("stem=[{}] loop=[{}]", stem.join(","), cycle.join(","))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula_text, to_pnf_path};
    use std::collections::BTreeMap;

    const CAP: usize = 1_000_000;

    fn props_rg() -> BTreeMap<String, Proposition> {
        let mut m = BTreeMap::new();
        m.insert("r".to_string(), Proposition::input("r"));
        m.insert("g".to_string(), Proposition::output("g"));
        m
    }

    fn spec_rg(text: &str) -> LtlSpec {
        let f = to_pnf_path(&parse_formula_text(text).unwrap(), &props_rg()).unwrap();
        LtlSpec::moore(vec![Proposition::input("r")], vec![Proposition::output("g")], f)
    }

    #[test]
    fn trivially_true_formula_gives_one_state_machine() {
        match synth_bounded(&spec_rg("true"), 1, CAP).unwrap() {
            SynthResult::Realisable(m) => assert_eq!(m.num_states(), 1),
            other => panic!("expected realisable, got {other:?}"),
        }
    }

    #[test]
    fn false_formula_is_unrealisable_at_every_bound() {
        for b in [0, 1, 2, 4] {
            assert!(!synth_bounded(&spec_rg("false"), b, CAP).unwrap().is_realisable());
        }
    }

    #[test]
    fn always_grant_synthesizes_constant_machine() {
        match synth_bounded(&spec_rg("G g"), 1, CAP).unwrap() {
            SynthResult::Realisable(m) => {
                assert_eq!(m.num_states(), 1);
                assert!(m.out[0].contains(&Proposition::output("g")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn request_grant_liveness_is_realisable() {
        let res = synth_bounded(&spec_rg("G (!r || F g)"), 2, CAP).unwrap();
        assert!(res.is_realisable());
    }

    #[test]
    fn ucw_accepts_iff_formula_holds_on_lassos() {
        use crate::automata::{accepts_lasso, eval_ltl_on_lasso, LassoWord};
        use rand::{Rng, SeedableRng};
        let f = spec_rg("G (!r || F g)").formula;
        let basis = Basis::new([Proposition::input("r"), Proposition::output("g")]);
        let ucw = ucw_of_ltl(&f, &basis);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut v = Valuation::empty();
                if rng.gen_bool(0.5) {
                    v.insert(Proposition::input("r"));
                }
                if rng.gen_bool(0.5) {
                    v.insert(Proposition::output("g"));
                }
                v
            };
            let stem: Vec<Valuation> = (0..rng.gen_range(0..3)).map(|_| mk(&mut rng)).collect();
            let cycle: Vec<Valuation> = (0..rng.gen_range(1..4)).map(|_| mk(&mut rng)).collect();
            let w = LassoWord::new(stem, cycle);
            // UCW accepts w iff no accepting run of the negation NBW exists.
            assert_eq!(!accepts_lasso(ucw.inner(), &w), eval_ltl_on_lasso(&f, &w));
        }
    }

    #[test]
    fn dualize_is_an_involution() {
        let s = spec_rg("G (!r || F g)");
        let d = dualize(&s);
        assert!(d.mealy);
        assert_eq!(d.inputs.len(), 1);
        assert_eq!(d.inputs[0].name(), "g");
        assert_eq!(d.outputs[0].name(), "r");
        let dd = dualize(&d);
        assert_eq!(dd.formula, s.formula);
        assert!(!dd.mealy);
    }

    #[test]
    fn dual_of_realisable_spec_is_unrealisable() {
        // G g is realisable for the system, so the dualized environment
        // cannot win.
        let dual = dualize(&spec_rg("G g"));
        for b in [1, 2, 4] {
            assert!(!synth_dual(&dual, b, CAP).unwrap().is_realisable());
        }
    }

    #[test]
    fn dual_of_false_is_trivially_realisable() {
        let dual = dualize(&spec_rg("false"));
        assert!(synth_dual(&dual, 1, CAP).unwrap().is_realisable());
    }

    #[test]
    fn determinacy_on_small_formulas() {
        for text in ["G g", "false", "G (!r || F g)", "F r", "G r"] {
            let spec = spec_rg(text);
            let direct = (1..=4).any(|b| {
                synth_bounded(&spec, b, CAP).map(|r| r.is_realisable()).unwrap_or(false)
            });
            let dual = dualize(&spec);
            let refuted = (1..=4).any(|b| {
                synth_dual(&dual, b, CAP).map(|r| r.is_realisable()).unwrap_or(false)
            });
            assert!(
                direct != refuted,
                "`{text}`: exactly one side must win (direct={direct}, refuted={refuted})"
            );
        }
    }

    #[test]
    fn minimize_merges_cyclic_twins() {
        // Two states with identical behavior in a cycle collapse to one.
        let g = Proposition::output("g");
        let m = MooreMachine {
            inputs: vec![],
            outputs: vec![g.clone()],
            state_names: vec!["a".into(), "b".into()],
            initial: 0,
            out: vec![
                Valuation::from_iter([g.clone()]),
                Valuation::from_iter([g.clone()]),
            ],
            trans: vec![vec![1], vec![0]],
        };
        assert_eq!(minimize_moore(&m).num_states(), 1);
    }
}
