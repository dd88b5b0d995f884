//! Brute-force machinery and spec corpora: exhaustive Moore-machine
//! enumeration at tiny sizes, a seeded random CTL* formula generator, and
//! the realisability-equivalence oracle that cross-checks the reduction
//! against direct CTL* model checking.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::logic::{
    Lit, PathFormula, Proposition, Spec, StateFormula, Valuation,
};
use crate::machine::MooreMachine;
use crate::modelcheck::check_ctlstar;
use crate::reduction::{compute_k, reduce};
use crate::synth::{synth_bounded, LtlSpec, SynthResult};

/// All Moore machines with exactly `n` states over the given alphabets,
/// initial state `s0`. The iteration order is deterministic.
pub fn enumerate_machines(
    inputs: &[Proposition],
    outputs: &[Proposition],
    n: usize,
) -> impl Iterator<Item = MooreMachine> {
    let inputs: Vec<Proposition> = {
        let mut v = inputs.to_vec();
        v.sort();
        v
    };
    let outputs: Vec<Proposition> = {
        let mut v = outputs.to_vec();
        v.sort();
        v
    };
    let n_vals = 1usize << inputs.len();
    let out_combos = 1u64 << outputs.len();
    let total_out = out_combos.pow(n as u32);
    let total_trans = (n as u64).pow((n * n_vals) as u32);
    let state_names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();

    (0..total_out).flat_map(move |oc| {
        let inputs = inputs.clone();
        let outputs = outputs.clone();
        let state_names = state_names.clone();
        // Decode per-state output valuations.
        let mut out = Vec::with_capacity(n);
        let mut rem = oc;
        for _ in 0..n {
            let mask = rem % out_combos;
            rem /= out_combos;
            out.push(Valuation::from_iter(
                outputs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, p)| p.clone()),
            ));
        }
        (0..total_trans).map(move |tc| {
            let mut trans = Vec::with_capacity(n);
            let mut rem = tc;
            for _ in 0..n {
                let mut row = Vec::with_capacity(n_vals);
                for _ in 0..n_vals {
                    row.push((rem % n as u64) as usize);
                    rem /= n as u64;
                }
                trans.push(row);
            }
            MooreMachine {
                inputs: inputs.clone(),
                outputs: outputs.clone(),
                state_names: state_names.clone(),
                initial: 0,
                out: out.clone(),
                trans,
            }
        })
    })
}

/// Smallest machine with at most `max_states` states satisfying the CTL*
/// specification, by exhaustive enumeration.
pub fn ctlstar_realisable_upto(spec: &Spec, max_states: usize) -> Option<MooreMachine> {
    for n in 1..=max_states {
        for m in enumerate_machines(&spec.inputs, &spec.outputs, n) {
            if check_ctlstar(&m, spec).map(|r| r.holds).unwrap_or(false) {
                return Some(m);
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Random formula generation
// ---------------------------------------------------------------------------

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    input: Proposition,
    output: Proposition,
    quantifiers_left: u32,
}

impl Gen<'_> {
    fn state(&mut self, depth: u32) -> StateFormula {
        if depth == 0 {
            return StateFormula::Lit(Lit {
                prop: self.output.clone(),
                positive: self.rng.gen_bool(0.5),
            });
        }
        match self.rng.gen_range(0..10) {
            0 => StateFormula::Lit(Lit {
                prop: self.output.clone(),
                positive: self.rng.gen_bool(0.5),
            }),
            1..=2 => StateFormula::and(vec![self.state(depth - 1), self.state(depth - 1)]),
            3..=4 => StateFormula::or(vec![self.state(depth - 1), self.state(depth - 1)]),
            _ if self.quantifiers_left > 0 => {
                self.quantifiers_left -= 1;
                let body = self.path(depth - 1);
                if self.rng.gen_bool(0.5) {
                    StateFormula::Exists(body)
                } else {
                    StateFormula::Forall(body)
                }
            }
            _ => self.state(depth - 1),
        }
    }

    fn path(&mut self, depth: u32) -> PathFormula {
        if depth == 0 {
            return self.path_lit();
        }
        match self.rng.gen_range(0..12) {
            0 => self.path_lit(),
            1..=2 => PathFormula::and(vec![self.path(depth - 1), self.path(depth - 1)]),
            3..=4 => PathFormula::or(vec![self.path(depth - 1), self.path(depth - 1)]),
            5 => PathFormula::next(self.path(depth - 1)),
            6 => PathFormula::until(self.path(depth - 1), self.path(depth - 1)),
            7 => PathFormula::release(self.path(depth - 1), self.path(depth - 1)),
            8 => PathFormula::globally(self.path(depth - 1)),
            9 => PathFormula::finally(self.path(depth - 1)),
            _ if self.quantifiers_left > 0 && depth >= 2 => {
                self.quantifiers_left -= 1;
                let body = self.path(depth - 1);
                if self.rng.gen_bool(0.5) {
                    PathFormula::Exists(Box::new(body))
                } else {
                    PathFormula::Forall(Box::new(body))
                }
            }
            _ => self.path(depth - 1),
        }
    }

    fn path_lit(&mut self) -> PathFormula {
        let prop =
            if self.rng.gen_bool(0.5) { self.input.clone() } else { self.output.clone() };
        PathFormula::Lit(Lit { prop, positive: self.rng.gen_bool(0.5) })
    }
}

/// The systematic quantifier-pattern family: every `Q T lit` and
/// `Q1 T1 (Q2 T2 lit)` combination over quantifiers {A, E}, temporal
/// operators {G, F} and literals {g, !g}.
pub fn quantifier_pattern_family(output: &Proposition) -> Vec<Spec> {
    let mut specs = Vec::new();
    let input = Proposition::input("r");
    let lits = [true, false];
    let mk_temporal = |temporal: usize, inner: PathFormula| {
        if temporal == 0 {
            PathFormula::globally(inner)
        } else {
            PathFormula::finally(inner)
        }
    };
    let mk_state = |exist: bool, body: PathFormula| {
        if exist {
            StateFormula::Exists(body)
        } else {
            StateFormula::Forall(body)
        }
    };
    for exist in [true, false] {
        for temporal in 0..2 {
            for pos in lits {
                let lit = PathFormula::Lit(Lit { prop: output.clone(), positive: pos });
                specs.push(Spec::new(
                    vec![input.clone()],
                    vec![output.clone()],
                    mk_state(exist, mk_temporal(temporal, lit)),
                ));
            }
            for exist2 in [true, false] {
                for temporal2 in 0..2 {
                    for pos2 in lits {
                        let lit2 =
                            PathFormula::Lit(Lit { prop: output.clone(), positive: pos2 });
                        let inner = PathFormula::quantified(
                            if exist2 {
                                crate::logic::Quant::Existential
                            } else {
                                crate::logic::Quant::Universal
                            },
                            mk_temporal(temporal2, lit2),
                        );
                        specs.push(Spec::new(
                            vec![input.clone()],
                            vec![output.clone()],
                            mk_state(exist, mk_temporal(temporal, inner)),
                        ));
                    }
                }
            }
        }
    }
    specs
}

/// Seeded random CTL* specs over one input and one output.
pub fn random_specs(count: usize, depth: u32, seed: u64) -> Vec<Spec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = Proposition::input("r");
    let output = Proposition::output("g");
    (0..count)
        .map(|_| {
            let mut g = Gen {
                rng: &mut rng,
                input: input.clone(),
                output: output.clone(),
                quantifiers_left: 3,
            };
            let formula = g.state(depth);
            Spec::new(vec![input.clone()], vec![output.clone()], formula)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// The realisability-equivalence oracle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OracleParams {
    pub count: usize,
    pub depth: u32,
    pub seed: u64,
    pub machine_bound: usize,
    pub max_counter: u32,
    pub max_positions: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            count: 220,
            depth: 4,
            seed: 0xC0FFEE,
            machine_bound: 2,
            max_counter: 8,
            max_positions: 2_000_000,
        }
    }
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub total: usize,
    pub ctlstar_realisable: usize,
    pub ltl_realisable: usize,
    /// CTL*-realisable (within the machine bound) but the reduced LTL was
    /// not synthesized at any k: a completeness violation.
    pub completeness_violations: Vec<String>,
    /// A synthesized LTL model whose projection fails the original CTL*
    /// formula: a soundness violation.
    pub soundness_violations: Vec<String>,
    /// Both realisable but the LTL model found is larger than the minimal
    /// CTL* model (expected: the reduction does not preserve minimality).
    pub larger_models: Vec<String>,
}

impl OracleReport {
    pub fn violations(&self) -> usize {
        self.completeness_violations.len() + self.soundness_violations.len()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "oracle: {} formulas, {} CTL*-realisable (<= bound), {} LTL-synthesized\n",
            self.total, self.ctlstar_realisable, self.ltl_realisable
        ));
        for v in &self.completeness_violations {
            s.push_str(&format!("VIOLATION completeness: {v}\n"));
        }
        for v in &self.soundness_violations {
            s.push_str(&format!("VIOLATION soundness: {v}\n"));
        }
        for v in &self.larger_models {
            s.push_str(&format!("note larger-model: {v}\n"));
        }
        s.push_str(&format!(
            "oracle verdict: {}\n",
            if self.violations() == 0 { "OK" } else { "VIOLATIONS FOUND" }
        ));
        s
    }
}

fn bound_schedule(max_counter: u32) -> Vec<u32> {
    let mut bs = Vec::new();
    let mut b = 1;
    while b < max_counter {
        bs.push(b);
        b *= 2;
    }
    bs.push(max_counter);
    bs.dedup();
    bs
}

/// Try to synthesize the reduced spec, sweeping k upward (realisability is
/// monotone in k) and the counter bound geometrically.
pub fn synthesize_reduced(
    spec: &Spec,
    max_counter: u32,
    max_positions: usize,
) -> Option<(MooreMachine, u32, u32)> {
    let k_max = compute_k(spec);
    let ks: Vec<u32> = if k_max == 0 { vec![0] } else { (1..=k_max).collect() };
    for k in ks {
        let red = match reduce(spec, if k == 0 { None } else { Some(k) }, false) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let ltl = LtlSpec::from(&red);
        for b in bound_schedule(max_counter) {
            match synth_bounded(&ltl, b, max_positions) {
                Ok(SynthResult::Realisable(m)) => return Some((m, k, b)),
                Ok(SynthResult::BoundedUnrealisable { .. }) => {}
                Err(e) => {
                    log::warn!("synthesis error at k={k} b={b}: {e}");
                }
            }
        }
    }
    None
}

/// Run the equivalence oracle: for each spec in the corpus compare
/// brute-force CTL* realisability (within the machine bound) against
/// synthesis from the reduced LTL, and project-check every synthesized
/// model against the original formula.
pub fn run_oracle(params: &OracleParams) -> OracleReport {
    let output = Proposition::output("g");
    let mut specs = quantifier_pattern_family(&output);
    let random_needed = params.count.saturating_sub(specs.len());
    specs.extend(random_specs(random_needed, params.depth, params.seed));

    let mut report = OracleReport { total: specs.len(), ..OracleReport::default() };
    for spec in &specs {
        let brute = ctlstar_realisable_upto(spec, params.machine_bound);
        if brute.is_some() {
            report.ctlstar_realisable += 1;
        }
        let synthesized = if brute.is_some() {
            synthesize_reduced(spec, params.max_counter, params.max_positions)
        } else {
            // Cheap probe in the other direction; larger models are expected
            // and only noted.
            None
        };
        match (&brute, &synthesized) {
            (Some(bm), Some((m, k, b))) => {
                report.ltl_realisable += 1;
                let keep: BTreeSet<Proposition> = spec.outputs.iter().cloned().collect();
                let projected = m.project_outputs(&keep);
                let ok = check_ctlstar(&projected, spec).map(|r| r.holds).unwrap_or(false);
                if !ok {
                    report.soundness_violations.push(format!(
                        "`{}` (k={k}, b={b}, {} states)",
                        spec.formula,
                        m.num_states()
                    ));
                }
                if m.num_states() > bm.num_states() {
                    report.larger_models.push(format!(
                        "`{}`: LTL model {} states vs CTL* model {} states",
                        spec.formula,
                        m.num_states(),
                        bm.num_states()
                    ));
                }
            }
            (Some(_), None) => {
                report
                    .completeness_violations
                    .push(format!("`{}`: CTL*-realisable but LTL synthesis failed", spec.formula));
            }
            (None, _) => {}
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Shipped example specifications
// ---------------------------------------------------------------------------

/// The bundled spec corpus (also available as files under `specs/`).
pub fn builtin_specs() -> Vec<(&'static str, &'static str)> {
    vec![
        ("demo_mixed", include_str!("../../../specs/demo_mixed.spec")),
        ("demo_nonminimal", include_str!("../../../specs/demo_nonminimal.spec")),
        ("demo_unrealisable", include_str!("../../../specs/demo_unrealisable.spec")),
        ("res_arbiter2", include_str!("../../../specs/res_arbiter2.spec")),
        ("res_arbiter3", include_str!("../../../specs/res_arbiter3.spec")),
        ("loop_arbiter2", include_str!("../../../specs/loop_arbiter2.spec")),
        ("postp_arbiter2", include_str!("../../../specs/postp_arbiter2.spec")),
        ("prio_arbiter2", include_str!("../../../specs/prio_arbiter2.spec")),
        ("user_arbiter1", include_str!("../../../specs/user_arbiter1.spec")),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_spec;

    #[test]
    fn machine_enumeration_counts() {
        let i = [Proposition::input("r")];
        let o = [Proposition::output("g")];
        assert_eq!(enumerate_machines(&i, &o, 1).count(), 2);
        assert_eq!(enumerate_machines(&i, &o, 2).count(), 4 * 16);
    }

    #[test]
    fn brute_force_finds_the_two_state_witness() {
        let spec = parse_spec(
            "INPUTS r; OUTPUTS g; FORMULA (E G !g) && (A G (E F !g)) && (E F g);",
        )
        .unwrap();
        let m = ctlstar_realisable_upto(&spec, 2).expect("two-state model exists");
        assert!(m.num_states() <= 2);
    }

    #[test]
    fn brute_force_rejects_unsatisfiable() {
        let spec = parse_spec("INPUTS r; OUTPUTS g; FORMULA (A G g) && (E F !g);").unwrap();
        assert!(ctlstar_realisable_upto(&spec, 2).is_none());
    }

    #[test]
    fn pattern_family_has_all_combinations() {
        let fam = quantifier_pattern_family(&Proposition::output("g"));
        // 8 single-quantifier patterns plus 32 nested ones, all distinct.
        assert_eq!(fam.len(), 40);
        let distinct: std::collections::BTreeSet<String> =
            fam.iter().map(|s| s.formula.to_string()).collect();
        assert_eq!(distinct.len(), 40);
    }

    #[test]
    fn random_specs_are_deterministic_per_seed() {
        let a = random_specs(10, 4, 42);
        let b = random_specs(10, 4, 42);
        assert_eq!(a, b);
        let c = random_specs(10, 4, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn all_spec_files_parse() {
        for (name, text) in builtin_specs() {
            parse_spec(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
