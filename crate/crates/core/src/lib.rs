//! CTL* synthesis via reduction to LTL.
//!
//! The pipeline: parse a CTL*-with-inputs specification, rewrite it into an
//! equirealisable LTL specification over fresh witness outputs, synthesize a
//! Moore machine from the LTL via bounded synthesis (universal co-Büchi
//! safety games), and independently verify the result against the original
//! CTL* formula with an explicit-state model checker.

pub mod automata;
mod graph;
pub mod cli;
pub mod corpus;
mod lex;
pub mod logic;
pub mod machine;
pub mod modelcheck;
pub mod reduction;
pub mod synth;
