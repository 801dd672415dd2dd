//! Satisfiability toolkit for branching-time logic with past, fairness and
//! the "now" operator: formulas, finite-tree semantics, hesitant pebble
//! automata, the automata-theoretic decision pipeline and tiling-game
//! reductions.

pub mod automaton;
pub mod cli;
pub mod compile;
pub mod formula;
pub mod normalform;
pub mod parity;
pub mod pipeline;
pub mod random;
pub mod tiling;
pub mod tree_model;
