//! Moore-machine data model, textual serialization, graph export, output
//! projection and trace generation.
//!
//! Machine text format:
//!
//! ```text
//! MOORE
//! inputs: r;
//! outputs: g;
//! init: t0;
//! state t0 { g=0 }  t0 -{r=0}-> t0;  t0 -{r=1}-> t1;
//! state t1 { g=1 }  t1 -{r=0}-> t1;  t1 -{r=1}-> t0;
//! ```
//!
//! Transition labels must assign every input, with `*` as a per-input
//! wildcard (`-{*}->` leaves every input free); wildcards are expanded at
//! parse time and totality is checked. Serialization is byte-deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::automata::LassoWord;
use crate::lex::{tokenize, Cursor, Pos, Tok};
use crate::logic::{Proposition, Valuation};

pub type StateId = usize;

/// A finite-state Moore system: outputs label states, transitions are total
/// in the input valuation. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MooreMachine {
    pub inputs: Vec<Proposition>,
    pub outputs: Vec<Proposition>,
    pub state_names: Vec<String>,
    pub initial: StateId,
    /// Output valuation per state.
    pub out: Vec<Valuation>,
    /// `trans[state][input_index]` with input indices enumerating the sorted
    /// input list as a bitmask (bit i = inputs[i] true).
    pub trans: Vec<Vec<StateId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MachineError {
    #[error("{pos}: machine syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: undeclared proposition `{name}`")]
    UndeclaredProposition { pos: Pos, name: String },
    #[error("{pos}: unknown state `{name}`")]
    UnknownState { pos: Pos, name: String },
    #[error("state `{state}` is missing a transition for input valuation {valuation}")]
    MissingTransition { state: String, valuation: String },
    #[error("{pos}: duplicate transition from `{state}` on {valuation}")]
    DuplicateTransition { pos: Pos, state: String, valuation: String },
    #[error("{pos}: duplicate declaration of state `{name}`")]
    DuplicateState { pos: Pos, name: String },
}

impl From<crate::lex::LexError> for MachineError {
    fn from(e: crate::lex::LexError) -> Self {
        MachineError::Syntax { pos: e.pos, message: e.message }
    }
}

impl MooreMachine {
    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_input_vals(&self) -> usize {
        1 << self.inputs.len()
    }

    /// Bitmask index of an input valuation (propositions outside the input
    /// list are ignored).
    pub fn input_index(&self, v: &Valuation) -> usize {
        let mut idx = 0usize;
        for (i, p) in self.inputs.iter().enumerate() {
            if v.contains(p) {
                idx |= 1 << i;
            }
        }
        idx
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

    pub fn step(&self, state: StateId, input_idx: usize) -> StateId {
        self.trans[state][input_idx]
    }

    /// Restrict the output labeling to `keep`; states and transitions are
    /// untouched.
    pub fn project_outputs(&self, keep: &BTreeSet<Proposition>) -> MooreMachine {
        let outputs: Vec<Proposition> =
            self.outputs.iter().filter(|p| keep.contains(p)).cloned().collect();
        let out = self
            .out
            .iter()
            .map(|v| Valuation::from_iter(v.iter().filter(|p| keep.contains(p)).cloned()))
            .collect();
        MooreMachine {
            inputs: self.inputs.clone(),
            outputs,
            state_names: self.state_names.clone(),
            initial: self.initial,
            out,
            trans: self.trans.clone(),
        }
    }

    /// Run the machine on an ultimately periodic input word and return the
    /// trace as a lasso over input-and-output letters. The letter at step t
    /// is `out(state_t) ∪ input_t` where `input_t` labels the edge taken
    /// from `state_t` (outputs are delayed with respect to inputs). The
    /// unrolling is extended until a (state, loop-offset) pair repeats, so
    /// the returned cycle always closes.
    pub fn run_lasso(&self, input_stem: &[Valuation], input_cycle: &[Valuation]) -> LassoWord {
        assert!(!input_cycle.is_empty(), "input cycle must be nonempty");
        let mut letters: Vec<Valuation> = Vec::new();
        let mut state = self.initial;
        for v in input_stem {
            letters.push(self.out[state].union(v));
            state = self.step(state, self.input_index(v));
        }
        // Walk the cycle until (state, offset) repeats.
        let mut seen: BTreeMap<(StateId, usize), usize> = BTreeMap::new();
        let mut offset = 0usize;
        loop {
            if let Some(&first) = seen.get(&(state, offset)) {
                let cycle = letters.split_off(first);
                return LassoWord::new(letters, cycle);
            }
            seen.insert((state, offset), letters.len());
            let v = &input_cycle[offset];
            letters.push(self.out[state].union(v));
            state = self.step(state, self.input_index(v));
            offset = (offset + 1) % input_cycle.len();
        }
    }

    /// Deterministic graph-description export.
    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        s.push_str("digraph moore {\n  rankdir=LR;\n  init [shape=point];\n");
        for (i, name) in self.state_names.iter().enumerate() {
            let outs: Vec<String> = self
                .outputs
                .iter()
                .map(|p| format!("{}={}", p.name(), u8::from(self.out[i].contains(p))))
                .collect();
            let _ = writeln!(s, "  {} [shape=circle, label=\"{}\\n{}\"];", name, name, outs.join(","));
        }
        let _ = writeln!(s, "  init -> {};", self.state_names[self.initial]);
        for (i, row) in self.trans.iter().enumerate() {
            for (idx, tgt) in row.iter().enumerate() {
                let v = self.input_valuation(idx);
                let lits: Vec<String> = self
                    .inputs
                    .iter()
                    .map(|p| format!("{}={}", p.name(), u8::from(v.contains(p))))
                    .collect();
                let label = if lits.is_empty() { "1".to_string() } else { lits.join(",") };
                let _ = writeln!(
                    s,
                    "  {} -> {} [label=\"{}\"];",
                    self.state_names[i], self.state_names[*tgt], label
                );
            }
        }
        s.push_str("}\n");
        s
    }
}

/// A machine lasso: (state, input) pairs for the stem and the closing cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub stem: Vec<(StateId, Valuation)>,
    pub cycle: Vec<(StateId, Valuation)>,
}

impl Trace {
    /// The letter-level lasso of this trace on the given machine.
    pub fn to_lasso_word(&self, m: &MooreMachine) -> LassoWord {
        let letter = |(s, v): &(StateId, Valuation)| m.out[*s].union(v);
        LassoWord::new(self.stem.iter().map(letter).collect(), self.cycle.iter().map(letter).collect())
    }

    pub fn render(&self, m: &MooreMachine) -> String {
        let part = |steps: &[(StateId, Valuation)]| {
            let items: Vec<String> =
                steps.iter().map(|(s, v)| format!("{}{}", m.state_names[*s], v)).collect();
            items.join(",")
        };
        format!("stem=[{}] loop=[{}]", part(&self.stem), part(&self.cycle))
    }
}

/// Serialize in the machine text format; output is byte-deterministic and
/// `parse_machine ∘ serialize_machine` is the identity.
pub fn serialize_machine(m: &MooreMachine) -> String {
    let mut s = String::new();
    s.push_str("MOORE\n");
    let names = |ps: &[Proposition]| ps.iter().map(|p| p.name().to_string()).collect::<Vec<_>>();
    let _ = writeln!(s, "inputs: {};", names(&m.inputs).join(", "));
    let _ = writeln!(s, "outputs: {};", names(&m.outputs).join(", "));
    let _ = writeln!(s, "init: {};", m.state_names[m.initial]);
    for (i, name) in m.state_names.iter().enumerate() {
        let outs: Vec<String> = m
            .outputs
            .iter()
            .map(|p| format!("{}={}", p.name(), u8::from(m.out[i].contains(p))))
            .collect();
        let _ = write!(s, "state {} {{ {} }}", name, outs.join(", "));
        for (idx, tgt) in m.trans[i].iter().enumerate() {
            let v = m.input_valuation(idx);
            let lits: Vec<String> = m
                .inputs
                .iter()
                .map(|p| format!("{}={}", p.name(), u8::from(v.contains(p))))
                .collect();
            let label = if lits.is_empty() { "*".to_string() } else { lits.join(",") };
            let _ = write!(s, "  {} -{{{}}}-> {};", name, label, m.state_names[*tgt]);
        }
        s.push('\n');
    }
    s
}

/// Parse the machine text format, checking totality and name hygiene.
pub fn parse_machine(text: &str) -> Result<MooreMachine, MachineError> {
    let mut cur = Cursor::new(tokenize(text)?);
    expect_word(&mut cur, "MOORE")?;
    expect_word(&mut cur, "inputs")?;
    expect(&mut cur, Tok::Colon)?;
    let inputs: Vec<Proposition> =
        name_list(&mut cur)?.into_iter().map(Proposition::input).collect();
    expect_word(&mut cur, "outputs")?;
    expect(&mut cur, Tok::Colon)?;
    let outputs: Vec<Proposition> =
        name_list(&mut cur)?.into_iter().map(Proposition::output).collect();
    expect_word(&mut cur, "init")?;
    expect(&mut cur, Tok::Colon)?;
    let (init_name, init_pos) = ident(&mut cur)?;
    expect(&mut cur, Tok::Semi)?;

    let mut sorted_inputs = inputs.clone();
    sorted_inputs.sort();
    let mut sorted_outputs = outputs.clone();
    sorted_outputs.sort();

    let mut state_names: Vec<String> = Vec::new();
    let mut state_index: BTreeMap<String, StateId> = BTreeMap::new();
    let mut out: Vec<Valuation> = Vec::new();
    // (from, to, input pattern (bit, value) list, pos)
    struct RawTrans {
        from: String,
        from_pos: Pos,
        to: String,
        to_pos: Pos,
        pattern: Vec<(usize, bool)>,
        pos: Pos,
    }
    let mut raw_trans: Vec<RawTrans> = Vec::new();

    loop {
        match cur.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(w) if w == "state" => {
                cur.next();
                let (name, pos) = ident(&mut cur)?;
                if state_index.contains_key(&name) {
                    return Err(MachineError::DuplicateState { pos, name });
                }
                expect(&mut cur, Tok::LBrace)?;
                let mut v = Valuation::empty();
                if *cur.peek() != Tok::RBrace {
                    loop {
                        let (pname, ppos) = ident(&mut cur)?;
                        let prop = Proposition::output(pname.clone());
                        if sorted_outputs.binary_search(&prop).is_err() {
                            return Err(MachineError::UndeclaredProposition {
                                pos: ppos,
                                name: pname,
                            });
                        }
                        expect(&mut cur, Tok::Eq)?;
                        let bit = int(&mut cur)?;
                        if bit != 0 {
                            v.insert(prop);
                        }
                        if !cur.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                expect(&mut cur, Tok::RBrace)?;
                state_index.insert(name.clone(), state_names.len());
                state_names.push(name);
                out.push(v);
            }
            Tok::Ident(_) => {
                // transition: from -{pattern}-> to ;
                let (from, from_pos) = ident(&mut cur)?;
                let pos = cur.pos();
                expect(&mut cur, Tok::Dash)?;
                expect(&mut cur, Tok::LBrace)?;
                let mut pattern: Vec<(usize, bool)> = Vec::new();
                if cur.eat(&Tok::Star) {
                    // every input free
                } else if *cur.peek() != Tok::RBrace {
                    loop {
                        let (pname, ppos) = ident(&mut cur)?;
                        let prop = Proposition::input(pname.clone());
                        let bit = match sorted_inputs.binary_search(&prop) {
                            Ok(i) => i,
                            Err(_) => {
                                return Err(MachineError::UndeclaredProposition {
                                    pos: ppos,
                                    name: pname,
                                })
                            }
                        };
                        expect(&mut cur, Tok::Eq)?;
                        if cur.eat(&Tok::Star) {
                            // wildcard: leave this input free
                        } else {
                            let value = int(&mut cur)?;
                            pattern.push((bit, value != 0));
                        }
                        if !cur.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                expect(&mut cur, Tok::RBrace)?;
                expect(&mut cur, Tok::Arrow)?;
                let (to, to_pos) = ident(&mut cur)?;
                expect(&mut cur, Tok::Semi)?;
                raw_trans.push(RawTrans { from, from_pos, to, to_pos, pattern, pos });
            }
            tok => {
                return Err(MachineError::Syntax {
                    pos: cur.pos(),
                    message: format!("expected `state` or a transition, found {tok}"),
                })
            }
        }
    }

    if state_names.is_empty() {
        return Err(MachineError::Syntax {
            pos: cur.pos(),
            message: "machine declares no states".into(),
        });
    }
    let initial = *state_index
        .get(&init_name)
        .ok_or(MachineError::UnknownState { pos: init_pos, name: init_name.clone() })?;

    let n_inputs = sorted_inputs.len();
    let n_vals = 1usize << n_inputs;
    let mut trans: Vec<Vec<Option<StateId>>> = vec![vec![None; n_vals]; state_names.len()];
    for rt in &raw_trans {
        let from = *state_index
            .get(&rt.from)
            .ok_or(MachineError::UnknownState { pos: rt.from_pos, name: rt.from.clone() })?;
        let to = *state_index
            .get(&rt.to)
            .ok_or(MachineError::UnknownState { pos: rt.to_pos, name: rt.to.clone() })?;
        // Expand wildcards: free bits range over all values.
        let fixed_mask: usize = rt.pattern.iter().map(|(b, _)| 1usize << b).sum();
        let fixed_val: usize =
            rt.pattern.iter().filter(|(_, v)| *v).map(|(b, _)| 1usize << b).sum();
        for idx in 0..n_vals {
            if idx & fixed_mask != fixed_val {
                continue;
            }
            if trans[from][idx].is_some() {
                let mut v = Valuation::empty();
                for (i, p) in sorted_inputs.iter().enumerate() {
                    if idx & (1 << i) != 0 {
                        v.insert(p.clone());
                    }
                }
                return Err(MachineError::DuplicateTransition {
                    pos: rt.pos,
                    state: rt.from.clone(),
                    valuation: v.to_string(),
                });
            }
            trans[from][idx] = Some(to);
        }
    }

    let mut total: Vec<Vec<StateId>> = Vec::with_capacity(state_names.len());
    for (s, row) in trans.iter().enumerate() {
        let mut complete = Vec::with_capacity(n_vals);
        for (idx, t) in row.iter().enumerate() {
            match t {
                Some(t) => complete.push(*t),
                None => {
                    let mut v = Valuation::empty();
                    for (i, p) in sorted_inputs.iter().enumerate() {
                        if idx & (1 << i) != 0 {
                            v.insert(p.clone());
                        }
                    }
                    return Err(MachineError::MissingTransition {
                        state: state_names[s].clone(),
                        valuation: v.to_string(),
                    });
                }
            }
        }
        total.push(complete);
    }

    Ok(MooreMachine {
        inputs: sorted_inputs,
        outputs: sorted_outputs,
        state_names,
        initial,
        out,
        trans: total,
    })
}

fn expect_word(cur: &mut Cursor, word: &str) -> Result<(), MachineError> {
    let pos = cur.pos();
    match cur.next() {
        (Tok::Ident(s), _) if s == word => Ok(()),
        (tok, _) => {
            Err(MachineError::Syntax { pos, message: format!("expected `{word}`, found {tok}") })
        }
    }
}

fn expect(cur: &mut Cursor, want: Tok) -> Result<(), MachineError> {
    let pos = cur.pos();
    let (tok, _) = cur.next();
    if tok == want {
        Ok(())
    } else {
        Err(MachineError::Syntax { pos, message: format!("expected {want}, found {tok}") })
    }
}

fn ident(cur: &mut Cursor) -> Result<(String, Pos), MachineError> {
    let pos = cur.pos();
    match cur.next() {
        (Tok::Ident(s), p) => Ok((s, p)),
        (tok, _) => {
            Err(MachineError::Syntax { pos, message: format!("expected identifier, found {tok}") })
        }
    }
}

fn int(cur: &mut Cursor) -> Result<u64, MachineError> {
    let pos = cur.pos();
    match cur.next() {
        (Tok::Int(n), _) => Ok(n),
        (tok, _) => {
            Err(MachineError::Syntax { pos, message: format!("expected 0 or 1, found {tok}") })
        }
    }
}

fn name_list(cur: &mut Cursor) -> Result<Vec<String>, MachineError> {
    let mut out = Vec::new();
    if *cur.peek() == Tok::Semi {
        cur.next();
        return Ok(out);
    }
    loop {
        let (name, _) = ident(cur)?;
        out.push(name);
        if !cur.eat(&Tok::Comma) {
            break;
        }
    }
    expect(cur, Tok::Semi)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_STATE: &str = "MOORE\n\
        inputs: r;\n\
        outputs: g;\n\
        init: t0;\n\
        state t0 { g=0 }  t0 -{r=0}-> t0;  t0 -{r=1}-> t1;\n\
        state t1 { g=1 }  t1 -{r=0}-> t1;  t1 -{r=1}-> t0;\n";

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
    fn round_trip_two_state_machine() {
        let m = parse_machine(TWO_STATE).unwrap();
        assert_eq!(m.num_states(), 2);
        let text = serialize_machine(&m);
        let m2 = parse_machine(&text).unwrap();
        assert_eq!(m, m2);
        assert_eq!(serialize_machine(&m2), text);
    }

    #[test]
    fn round_trip_single_state_all_loops() {
        let text = "MOORE\ninputs: r;\noutputs: g;\ninit: s;\nstate s { g=1 } s -{*}-> s;\n";
        let m = parse_machine(text).unwrap();
        assert_eq!(m.num_states(), 1);
        let m2 = parse_machine(&serialize_machine(&m)).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn missing_transition_is_an_error() {
        let text = "MOORE\ninputs: r;\noutputs: g;\ninit: s;\nstate s { g=1 } s -{r=1}-> s;\n";
        let err = parse_machine(text).unwrap_err();
        assert!(matches!(err, MachineError::MissingTransition { .. }), "{err}");
    }

    #[test]
    fn duplicate_transition_is_an_error() {
        let text = "MOORE\ninputs: r;\noutputs: g;\ninit: s;\n\
            state s { g=1 } s -{*}-> s; s -{r=1}-> s;\n";
        let err = parse_machine(text).unwrap_err();
        assert!(matches!(err, MachineError::DuplicateTransition { .. }), "{err}");
    }

    #[test]
    fn projection_restricts_labels_only() {
        let m = parse_machine(TWO_STATE).unwrap();
        let keep: BTreeSet<Proposition> = BTreeSet::new();
        let p = m.project_outputs(&keep);
        assert_eq!(p.trans, m.trans);
        assert!(p.out.iter().all(|v| v.is_empty()));
        let all: BTreeSet<Proposition> = m.outputs.iter().cloned().collect();
        assert_eq!(m.project_outputs(&all), m);
    }

    #[test]
    fn run_lasso_follows_moore_delay() {
        let m = parse_machine(TWO_STATE).unwrap();
        // No requests: stay in t0 outputting nothing.
        let w = m.run_lasso(&[], &[val(&[])]);
        assert!(w.stem.is_empty());
        assert_eq!(w.cycle, vec![val(&[])]);
        // One request then silence: 'g' appears one step after the request.
        let w = m.run_lasso(&[val(&["r"])], &[val(&[])]);
        assert_eq!(w.stem, vec![val(&["r"])]);
        assert_eq!(w.cycle, vec![val(&["g"])]);
    }

    #[test]
    fn run_lasso_closes_misaligned_cycles() {
        let m = parse_machine(TWO_STATE).unwrap();
        // Request on every step: the machine alternates t0 t1 t0 ...
        let w = m.run_lasso(&[], &[val(&["r"])]);
        assert_eq!(w.stem.len() + w.cycle.len() <= 3, true);
        assert_eq!(w.cycle.len(), 2);
    }

    #[test]
    fn dot_export_is_deterministic() {
        let m = parse_machine(TWO_STATE).unwrap();
        assert_eq!(m.to_dot(), m.to_dot());
        assert_eq!(m.to_dot().matches("->").count(), 5); // init edge + 4 transitions
    }
}
