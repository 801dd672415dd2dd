//! Satisfiability verdicts of the automata pipeline against the finite-model
//! search.

use btl_core::pipeline::{decide, SolverConfig, Verdict, WitnessCheck};
use btl_core::random::{props, state_formula, FormulaShape};
use btl_core::tree_model::enumerate_models;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rounds(default: usize) -> usize {
    std::env::var("BTL_ROUNDS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(default)
}

fn agree(shape: FormulaShape, seed: u64, n: usize, max_connectives: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ps = props(2);
    let cfg = SolverConfig::default();
    for i in 0..n {
        let f = state_formula(&mut rng, &ps, 1 + i % max_connectives, shape);
        let text = btl_core::formula::print(&f);
        let model = enumerate_models(&f, 5, 2).unwrap();
        let r = decide(&f, &cfg).unwrap();
        assert_eq!(r.stats.invariant_violations, 0, "{text}");
        match r.verdict {
            Verdict::Nonempty => {
                assert!(r.witness.is_some(), "{text}");
                assert_ne!(r.witness_check, Some(WitnessCheck::Failed), "{text}");
            }
            Verdict::Empty => assert!(model.is_none(), "{text}: EMPTY but has a model"),
            Verdict::Unknown => assert!(r.stats.generator == "runs", "{text}"),
        }
        if model.is_some() {
            assert_eq!(r.verdict, Verdict::Nonempty, "{text}");
        }
    }
}

#[test]
fn future_formulas() {
    agree(FormulaShape::FUTURE_CTL, 11, rounds(150), 6);
}

#[test]
fn past_formulas() {
    agree(FormulaShape::PECTL, 12, rounds(60), 6);
}

#[test]
fn now_and_path_booleans() {
    agree(FormulaShape::FULL, 13, rounds(60), 6);
}
