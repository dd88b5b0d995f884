//! Concrete-syntax printers. `parse ∘ print` is the identity on formulas;
//! printing re-sugars `false R φ` to `G φ` and `true U φ` to `F φ`.

use std::fmt;

use super::{PathFormula, StateFormula};

// Precedence levels, ascending: Or < And < prefix ops < U/R < atoms.
const LVL_OR: u8 = 1;
const LVL_AND: u8 = 2;
const LVL_PREFIX: u8 = 3;
const LVL_TEMPORAL: u8 = 4;
const LVL_ATOM: u8 = 5;

fn path_level(f: &PathFormula) -> u8 {
    match f {
        PathFormula::True | PathFormula::False => LVL_ATOM,
        PathFormula::Lit(l) => {
            if l.positive {
                LVL_ATOM
            } else {
                LVL_PREFIX
            }
        }
        PathFormula::And(_) => LVL_AND,
        PathFormula::Or(_) => LVL_OR,
        PathFormula::Next(_) | PathFormula::Forall(_) | PathFormula::Exists(_) => LVL_PREFIX,
        PathFormula::Release(a, _) if **a == PathFormula::False => LVL_PREFIX, // G
        PathFormula::Until(a, _) if **a == PathFormula::True => LVL_PREFIX,    // F
        PathFormula::Until(..) | PathFormula::Release(..) => LVL_TEMPORAL,
    }
}

fn write_path(f: &PathFormula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let lvl = path_level(f);
    if lvl < min {
        write!(out, "(")?;
        write_path(f, 0, out)?;
        return write!(out, ")");
    }
    match f {
        PathFormula::True => write!(out, "true"),
        PathFormula::False => write!(out, "false"),
        PathFormula::Lit(l) => {
            if l.positive {
                write!(out, "{}", l.prop)
            } else {
                write!(out, "!{}", l.prop)
            }
        }
        PathFormula::And(cs) => {
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    write!(out, " && ")?;
                }
                write_path(c, LVL_PREFIX, out)?;
            }
            Ok(())
        }
        PathFormula::Or(cs) => {
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    write!(out, " || ")?;
                }
                write_path(c, LVL_AND, out)?;
            }
            Ok(())
        }
        PathFormula::Next(a) => {
            write!(out, "X ")?;
            write_path(a, LVL_PREFIX, out)
        }
        PathFormula::Release(a, b) if **a == PathFormula::False => {
            write!(out, "G ")?;
            write_path(b, LVL_PREFIX, out)
        }
        PathFormula::Until(a, b) if **a == PathFormula::True => {
            write!(out, "F ")?;
            write_path(b, LVL_PREFIX, out)
        }
        PathFormula::Until(a, b) => {
            write_path(a, LVL_ATOM, out)?;
            write!(out, " U ")?;
            write_path(b, LVL_PREFIX, out)
        }
        PathFormula::Release(a, b) => {
            write_path(a, LVL_ATOM, out)?;
            write!(out, " R ")?;
            write_path(b, LVL_PREFIX, out)
        }
        PathFormula::Forall(a) => {
            write!(out, "A ")?;
            write_path(a, LVL_PREFIX, out)
        }
        PathFormula::Exists(a) => {
            write!(out, "E ")?;
            write_path(a, LVL_PREFIX, out)
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_path(self, 0, out)
    }
}

fn state_level(f: &StateFormula) -> u8 {
    match f {
        StateFormula::True | StateFormula::False => LVL_ATOM,
        StateFormula::Lit(l) => {
            if l.positive {
                LVL_ATOM
            } else {
                LVL_PREFIX
            }
        }
        StateFormula::And(_) => LVL_AND,
        StateFormula::Or(_) => LVL_OR,
        StateFormula::Forall(_) | StateFormula::Exists(_) => LVL_PREFIX,
    }
}

fn write_state(f: &StateFormula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let lvl = state_level(f);
    if lvl < min {
        write!(out, "(")?;
        write_state(f, 0, out)?;
        return write!(out, ")");
    }
    match f {
        StateFormula::True => write!(out, "true"),
        StateFormula::False => write!(out, "false"),
        StateFormula::Lit(l) => {
            if l.positive {
                write!(out, "{}", l.prop)
            } else {
                write!(out, "!{}", l.prop)
            }
        }
        StateFormula::And(cs) => {
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    write!(out, " && ")?;
                }
                write_state(c, LVL_PREFIX, out)?;
            }
            Ok(())
        }
        StateFormula::Or(cs) => {
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    write!(out, " || ")?;
                }
                write_state(c, LVL_AND, out)?;
            }
            Ok(())
        }
        StateFormula::Forall(p) => {
            write!(out, "A ")?;
            write_path(p, LVL_PREFIX, out)
        }
        StateFormula::Exists(p) => {
            write!(out, "E ")?;
            write_path(p, LVL_PREFIX, out)
        }
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_state(self, 0, out)
    }
}

/// Render a whole spec in the spec-file grammar.
pub fn render_spec(spec: &super::Spec) -> String {
    let inputs: Vec<&str> = spec.inputs.iter().map(|p| p.name()).collect();
    let outputs: Vec<&str> = spec.outputs.iter().map(|p| p.name()).collect();
    format!(
        "INPUTS {};\nOUTPUTS {};\nFORMULA {};\n",
        inputs.join(", "),
        outputs.join(", "),
        spec.formula
    )
}
