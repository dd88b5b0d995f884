//! Command-line surface: convert a CTL* spec to LTL, synthesize end-to-end
//! with a k-sweep, check machines against specs, dualize for unrealisability
//! evidence, and run the brute-force equivalence oracle.
//!
//! Exit codes are a stable contract: 0 success/holds, 1 unrealisable/fails,
//! 2 input error, 3 internal consistency failure.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::corpus::{run_oracle, synthesize_reduced, OracleParams};
use crate::logic::{parse_spec, render_spec, Proposition, Spec, StateFormula};
use crate::machine::{parse_machine, serialize_machine};
use crate::modelcheck::{check_ctlstar, check_ltl};
use crate::reduction::{compute_k, existential_automaton_sizes, reduce, ReducedSpec};
use crate::synth::{dualize, synth_dual, LtlSpec, MealySynthResult, SynthResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNREALISABLE: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// How the witness bound k is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMode {
    /// Computed upper bound (for synthesis this still sweeps from 1 upward,
    /// preferring the smallest realisable k).
    Auto,
    Fixed(u32),
    Sweep,
}

impl std::str::FromStr for KMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(KMode::Auto),
            "sweep" => Ok(KMode::Sweep),
            n => n
                .parse::<u32>()
                .map(KMode::Fixed)
                .map_err(|_| format!("expected `auto`, `sweep` or a number, got `{n}`")),
        }
    }
}

/// Configuration shared by the commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec_path: PathBuf,
    pub k_mode: KMode,
    pub inline_universal: bool,
    pub max_counter: u32,
    pub max_positions: usize,
    pub out: Option<PathBuf>,
    pub dot: Option<PathBuf>,
    pub seed: u64,
    pub corpus: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(spec_path: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            spec_path: spec_path.into(),
            k_mode: KMode::Auto,
            inline_universal: false,
            max_counter: 8,
            max_positions: 2_000_000,
            out: None,
            dot: None,
            seed: 0xC0FFEE,
            corpus: None,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ctlstar2ltl",
    about = "CTL* reactive synthesis via reduction to LTL",
    version
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckMode {
    Ctlstar,
    Ltl,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a CTL* spec to an equirealisable LTL spec.
    Convert {
        spec: PathBuf,
        /// Witness bound: auto, sweep, or a fixed number.
        #[arg(long, default_value = "auto")]
        k: String,
        /// Replace universal propositions by their bodies.
        #[arg(long)]
        inline_universal: bool,
        /// Write the reduced spec here (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print the human-readable formula with unexpanded witness-ID
        /// atoms.
        #[arg(long)]
        human: bool,
    },
    /// Synthesize a Moore machine and verify it against the original CTL*.
    Synth {
        spec: PathBuf,
        #[arg(long, default_value = "auto")]
        k: String,
        #[arg(long)]
        inline_universal: bool,
        /// Counter-bound cap for the safety games.
        #[arg(long, default_value_t = 8)]
        max_counter: u32,
        /// Write the machine here (stdout otherwise); the projection to the
        /// original outputs goes to `<out>.proj`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a dot rendering of the machine.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Check a machine file against a spec file.
    Check {
        machine: PathBuf,
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = CheckMode::Ctlstar)]
        mode: CheckMode,
    },
    /// Emit the dualized (Mealy) spec and optionally synthesize the
    /// environment, certifying unrealisability.
    Dualize {
        spec: PathBuf,
        #[arg(long, default_value = "auto")]
        k: String,
        #[arg(long)]
        inline_universal: bool,
        #[arg(long, default_value_t = 8)]
        max_counter: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the Mealy synthesis on the dual spec.
        #[arg(long)]
        synth: bool,
    },
    /// Run the realisability-equivalence oracle on a generated corpus.
    Oracle {
        #[arg(long, default_value_t = 220)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        depth: u32,
        #[arg(long, default_value_t = 0xC0FFEE)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        max_counter: u32,
        /// Dump the generated spec files into this directory.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

/// Parse argv, dispatch, and return the process exit code.
pub fn run() -> i32 {
    let args = Args::parse();
    match args.command {
        Command::Convert { spec, k, inline_universal, out, human } => {
            let mut cfg = RunConfig::new(spec);
            cfg.inline_universal = inline_universal;
            cfg.out = out;
            match k.parse() {
                Ok(mode) => cfg.k_mode = mode,
                Err(e) => return input_error(&e),
            }
            cmd_convert(&cfg, human)
        }
        Command::Synth { spec, k, inline_universal, max_counter, out, dot } => {
            let mut cfg = RunConfig::new(spec);
            cfg.inline_universal = inline_universal;
            cfg.max_counter = max_counter;
            cfg.out = out;
            cfg.dot = dot;
            match k.parse() {
                Ok(mode) => cfg.k_mode = mode,
                Err(e) => return input_error(&e),
            }
            cmd_synth(&cfg)
        }
        Command::Check { machine, spec, mode } => {
            let cfg = RunConfig::new(spec);
            cmd_check(&cfg, &machine, mode == CheckMode::Ltl)
        }
        Command::Dualize { spec, k, inline_universal, max_counter, out, synth } => {
            let mut cfg = RunConfig::new(spec);
            cfg.inline_universal = inline_universal;
            cfg.max_counter = max_counter;
            cfg.out = out;
            match k.parse() {
                Ok(mode) => cfg.k_mode = mode,
                Err(e) => return input_error(&e),
            }
            cmd_dualize(&cfg, synth)
        }
        Command::Oracle { count, depth, seed, max_counter, corpus } => {
            let mut cfg = RunConfig::new(PathBuf::new());
            cfg.seed = seed;
            cfg.max_counter = max_counter;
            cfg.corpus = corpus;
            cmd_oracle(&cfg, count, depth)
        }
    }
}

fn input_error(message: &str) -> i32 {
    eprintln!("error: {message}");
    EXIT_INPUT_ERROR
}

fn load_spec(path: &Path) -> Result<Spec, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_INPUT_ERROR
    })?;
    parse_spec(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_INPUT_ERROR
    })
}

fn write_or_print(path: &Option<PathBuf>, content: &str, what: &str) -> Result<(), i32> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", p.display());
            EXIT_INPUT_ERROR
        }),
        None => {
            println!("--- {what} ---");
            print!("{content}");
            Ok(())
        }
    }
}

fn reduce_at(cfg: &RunConfig, spec: &Spec) -> Result<ReducedSpec, i32> {
    let k_override = match cfg.k_mode {
        KMode::Auto | KMode::Sweep => None,
        KMode::Fixed(n) => Some(n),
    };
    reduce(spec, k_override, cfg.inline_universal).map_err(|e| {
        eprintln!("error: reduction failed: {e}");
        EXIT_INTERNAL
    })
}

fn convert_report(spec: &Spec, red: &ReducedSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "k = {}", red.ledger.k);
    let _ = writeln!(s, "id-bit width = {}", red.ledger.width);
    for (sub, size) in existential_automaton_sizes(spec) {
        let _ = writeln!(s, "nbw {sub} : {size} states");
    }
    let fresh = red.ledger.fresh_outputs();
    let _ = writeln!(s, "fresh outputs ({}):", fresh.len());
    for p in fresh {
        let _ = writeln!(s, "  {p}");
    }
    s
}

/// Reduce and emit the LTL spec plus the ledger report. Exit 0 on success,
/// 2 on parse errors, 3 on fresh-name collisions.
pub fn cmd_convert(cfg: &RunConfig, human: bool) -> i32 {
    let spec = match load_spec(&cfg.spec_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let red = match reduce_at(cfg, &spec) {
        Ok(r) => r,
        Err(code) => return code,
    };
    print!("{}", convert_report(&spec, &red));
    if human {
        println!("human-readable formula:");
        println!("  {}", red.sugared);
    }
    let rendered = render_spec(&red.to_spec());
    if write_or_print(&cfg.out, &rendered, "reduced spec").is_err() {
        return EXIT_INPUT_ERROR;
    }
    EXIT_OK
}

fn k_schedule(cfg: &RunConfig, spec: &Spec) -> Vec<Option<u32>> {
    match cfg.k_mode {
        KMode::Fixed(n) => vec![Some(n)],
        KMode::Auto | KMode::Sweep => {
            let k_max = compute_k(spec);
            if k_max == 0 {
                vec![None]
            } else {
                (1..=k_max).map(Some).collect()
            }
        }
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

/// Sweep k and the counter bound, synthesize, verify against the original
/// CTL* formula, and write the machine, its projection and the verification
/// transcript. Exit 0 when realisable, 1 when all bounds are exhausted.
pub fn cmd_synth(cfg: &RunConfig) -> i32 {
    let spec = match load_spec(&cfg.spec_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    for k in k_schedule(cfg, &spec) {
        let red = match reduce(&spec, k, cfg.inline_universal) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: reduction failed: {e}");
                return EXIT_INTERNAL;
            }
        };
        let ltl = LtlSpec::from(&red);
        for b in bound_schedule(cfg.max_counter) {
            match crate::synth::synth_bounded(&ltl, b, cfg.max_positions) {
                Ok(SynthResult::Realisable(machine)) => {
                    println!(
                        "realisable at k={} b={b} with {} states",
                        red.ledger.k,
                        machine.num_states()
                    );
                    let report = match check_ctlstar(&machine, &spec) {
                        Ok(r) => r,
                        Err(e) => {
                            eprintln!("error: verification failed: {e}");
                            return EXIT_INTERNAL;
                        }
                    };
                    if !report.holds {
                        eprintln!(
                            "error: synthesized machine fails the original CTL* formula \
                             (this can happen with --inline-universal when a universal \
                             subformula occurs under an existential one)"
                        );
                        return EXIT_INTERNAL;
                    }
                    let keep: BTreeSet<Proposition> =
                        spec.outputs.iter().cloned().collect();
                    let projected = machine.project_outputs(&keep);
                    if write_or_print(&cfg.out, &serialize_machine(&machine), "machine")
                        .is_err()
                    {
                        return EXIT_INPUT_ERROR;
                    }
                    let proj_path = cfg.out.as_ref().map(|p| {
                        let mut q = p.clone().into_os_string();
                        q.push(".proj");
                        PathBuf::from(q)
                    });
                    if write_or_print(&proj_path, &serialize_machine(&projected), "projection")
                        .is_err()
                    {
                        return EXIT_INPUT_ERROR;
                    }
                    if let Some(dot) = &cfg.dot {
                        if std::fs::write(dot, machine.to_dot()).is_err() {
                            eprintln!("error: cannot write {}", dot.display());
                            return EXIT_INPUT_ERROR;
                        }
                    }
                    println!("--- verification against the original formula ---");
                    print!("{}", report.render(&machine));
                    return EXIT_OK;
                }
                Ok(SynthResult::BoundedUnrealisable { .. }) => {}
                Err(e) => {
                    eprintln!("error: synthesis failed at k={k:?} b={b}: {e}");
                    return EXIT_INTERNAL;
                }
            }
        }
        println!("no realisation at k={} up to counter bound {}", red.ledger.k, cfg.max_counter);
    }
    println!("UNREALISABLE-UPTO b={}", cfg.max_counter);
    EXIT_UNREALISABLE
}

/// Check a machine against a spec. Exit 0 holds, 1 fails, 2 on input or
/// alphabet mismatch.
pub fn cmd_check(cfg: &RunConfig, machine_path: &Path, ltl_mode: bool) -> i32 {
    let spec = match load_spec(&cfg.spec_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let machine_text = match std::fs::read_to_string(machine_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", machine_path.display());
            return EXIT_INPUT_ERROR;
        }
    };
    let machine = match parse_machine(&machine_text) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {}: {e}", machine_path.display());
            return EXIT_INPUT_ERROR;
        }
    };
    if ltl_mode {
        let phi = match &spec.formula {
            StateFormula::Forall(p) if p.is_quantifier_free() => p.clone(),
            _ => {
                eprintln!(
                    "error: --mode ltl requires a spec of the shape `A (phi)` with \
                     quantifier-free phi"
                );
                return EXIT_INPUT_ERROR;
            }
        };
        match check_ltl(&machine, &phi) {
            Ok(v) if v.holds => {
                println!("HOLDS");
                EXIT_OK
            }
            Ok(v) => {
                println!("FAILS");
                if let Some(ce) = v.counterexample {
                    println!("counterexample {}", ce.trace.render(&machine));
                }
                EXIT_UNREALISABLE
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_INPUT_ERROR
            }
        }
    } else {
        match check_ctlstar(&machine, &spec) {
            Ok(report) => {
                print!("{}", report.render(&machine));
                if report.holds {
                    EXIT_OK
                } else {
                    EXIT_UNREALISABLE
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_INPUT_ERROR
            }
        }
    }
}

/// Reduce, dualize, emit the dual spec, and optionally synthesize the
/// environment machine. With --synth: exit 0 when the dual is realisable
/// (unrealisability of the original is certified), 1 otherwise.
pub fn cmd_dualize(cfg: &RunConfig, run_synth: bool) -> i32 {
    let spec = match load_spec(&cfg.spec_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let red = match reduce_at(cfg, &spec) {
        Ok(r) => r,
        Err(code) => return code,
    };
    let dual = dualize(&LtlSpec::from(&red));
    let mut rendered = String::from("# system type: mealy (dual of a Moore problem)\n");
    let names =
        |ps: &[Proposition]| ps.iter().map(|p| p.name().to_string()).collect::<Vec<_>>();
    let _ = writeln!(rendered, "INPUTS {};", names(&dual.inputs).join(", "));
    let _ = writeln!(rendered, "OUTPUTS {};", names(&dual.outputs).join(", "));
    let _ = writeln!(rendered, "FORMULA A ({});", dual.formula);
    if write_or_print(&cfg.out, &rendered, "dual spec").is_err() {
        return EXIT_INPUT_ERROR;
    }
    if !run_synth {
        return EXIT_OK;
    }
    for b in bound_schedule(cfg.max_counter) {
        match synth_dual(&dual, b, cfg.max_positions) {
            Ok(MealySynthResult::Realisable(m)) => {
                println!(
                    "dual realisable at b={b}: the original spec is unrealisable \
                     (environment witness with {} states)",
                    m.num_states()
                );
                print!("{}", m.render());
                return EXIT_OK;
            }
            Ok(MealySynthResult::BoundedUnrealisable { .. }) => {}
            Err(e) => {
                eprintln!("error: dual synthesis failed at b={b}: {e}");
                return EXIT_INTERNAL;
            }
        }
    }
    println!("UNREALISABLE-UPTO b={} (dual)", cfg.max_counter);
    EXIT_UNREALISABLE
}

/// Run the equivalence oracle; exit 0 when no violations were found.
pub fn cmd_oracle(cfg: &RunConfig, count: usize, depth: u32) -> i32 {
    let params = OracleParams {
        count,
        depth,
        seed: cfg.seed,
        machine_bound: 2,
        max_counter: cfg.max_counter,
        max_positions: cfg.max_positions,
    };
    if let Some(dir) = &cfg.corpus {
        if let Err(e) = dump_corpus(dir, &params) {
            eprintln!("error: cannot write corpus: {e}");
            return EXIT_INPUT_ERROR;
        }
    }
    let report = run_oracle(&params);
    print!("{}", report.render());
    if report.violations() == 0 {
        EXIT_OK
    } else {
        EXIT_INTERNAL
    }
}

fn dump_corpus(dir: &Path, params: &OracleParams) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let output = Proposition::output("g");
    let mut specs = crate::corpus::quantifier_pattern_family(&output);
    let random_needed = params.count.saturating_sub(specs.len());
    specs.extend(crate::corpus::random_specs(random_needed, params.depth, params.seed));
    for (i, spec) in specs.iter().enumerate() {
        std::fs::write(dir.join(format!("corpus_{i:04}.spec")), render_spec(spec))?;
    }
    Ok(())
}

/// Convenience used by tests: end-to-end synthesis from a spec text, k and
/// bound sweeps included, verifying against the original formula.
pub fn synth_from_text(
    text: &str,
    inline_universal: bool,
    max_counter: u32,
) -> Option<(crate::machine::MooreMachine, u32, u32)> {
    let spec = parse_spec(text).ok()?;
    if inline_universal {
        // Mirror cmd_synth's sweep with inlining.
        let k_max = compute_k(&spec);
        let ks: Vec<Option<u32>> =
            if k_max == 0 { vec![None] } else { (1..=k_max).map(Some).collect() };
        for k in ks {
            let red = reduce(&spec, k, true).ok()?;
            let ltl = LtlSpec::from(&red);
            for b in bound_schedule(max_counter) {
                if let Ok(SynthResult::Realisable(m)) =
                    crate::synth::synth_bounded(&ltl, b, 2_000_000)
                {
                    return Some((m, red.ledger.k, b));
                }
            }
        }
        None
    } else {
        synthesize_reduced(&spec, max_counter, 2_000_000)
    }
}
