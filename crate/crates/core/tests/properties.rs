//! Property tests for the module invariants.

use btl_core::automaton::{membership_finite, validate_hesitant};
use btl_core::compile::{compile_pectl, compile_pectlplusn};
use btl_core::formula::{
    classify, closure, dual, parse, print, PathFormula, StateFormula,
};
use btl_core::normalform::{is_normal_form, normalize};
use btl_core::pipeline::{debranch, rabin_emptiness, OneWayNra, Verdict};
use btl_core::random::{finite_tree, props, state_formula, FormulaShape};
use btl_core::tiling::{encode_ubplus, encode_ubpn, micro_instances, UbplusVariant};
use btl_core::tree_model::{
    enumerate_models, evaluate_state, label_bottom_up, ModelError,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn formula(seed: u64, shape: FormulaShape, max: usize) -> StateFormula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seed as usize % max) + 1;
    state_formula(&mut rng, &props(2), n, shape)
}

fn tree(seed: u64, nodes: usize) -> btl_core::tree_model::FiniteTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    finite_tree(&mut rng, &props(2), nodes, 3)
}

fn path_args(f: &StateFormula, out: &mut Vec<PathFormula>) {
    match f {
        StateFormula::And(a, b) => {
            path_args(a, out);
            path_args(b, out);
        }
        StateFormula::Not(a) | StateFormula::Now(a) => path_args(a, out),
        StateFormula::Exists(p) => {
            out.push((**p).clone());
            p.for_each_state_arg(&mut |s| path_args(s, out));
        }
        _ => {}
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dual_is_an_involution(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::FULL, 10);
        let mut paths = Vec::new();
        path_args(&f, &mut paths);
        for p in paths {
            prop_assert_eq!(dual(&dual(&p)), p);
        }
    }

    #[test]
    fn print_then_parse(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::FULL, 12);
        prop_assert_eq!(parse(&print(&f), props(2)).unwrap(), f);
    }

    #[test]
    fn closure_is_linear(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::FULL, 12);
        prop_assert!(closure(&f).len() <= 4 * f.size());
    }

    #[test]
    fn ctl_sugar_has_no_path_booleans(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::FUTURE_CTL, 10);
        prop_assert!(!classify(&f).uses_path_boolean);
        let p = props(2);
        for text in ["A(p U q)", "AG EF p", "!A X !p", "AG(p -> AF q)", "A Ginf p"] {
            prop_assert!(!classify(&parse(text, &p).unwrap()).uses_path_boolean);
        }
    }

    #[test]
    fn bottom_up_labeling_agrees(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::FUTURE_CTL, 8);
        let t = tree(seed, 8);
        let labels = label_bottom_up(&t, &f).unwrap();
        for (x, &l) in labels.iter().enumerate() {
            prop_assert_eq!(evaluate_state(&t, x, &f).unwrap(), l);
        }
    }

    #[test]
    fn now_is_local(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::PECTL, 8);
        let t = tree(seed, 8);
        let nf = StateFormula::now(f.clone());
        for x in 0..t.len() {
            prop_assert_eq!(
                evaluate_state(&t, x, &nf).unwrap(),
                evaluate_state(&t.subtree(x), 0, &f).unwrap()
            );
        }
    }

    #[test]
    fn normal_form_shape_and_size(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::FULL, 16);
        let cert = normalize(&f);
        prop_assert!(is_normal_form(&cert.formula), "{}", print(&cert.formula));
        prop_assert!(cert.ratio() <= 6.0, "{}", cert.ratio());
    }

    #[test]
    fn compiled_pectl_matches_semantics(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::PECTL, 8);
        let t = tree(seed, 8);
        let a = compile_pectl(&f).unwrap();
        prop_assert!(validate_hesitant(&a).is_empty());
        prop_assert_eq!(membership_finite(&a, &t).unwrap(), evaluate_state(&t, 0, &f).unwrap());
    }

    #[test]
    fn debranch_keeps_membership(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::PECTL, 6);
        let t = tree(seed, 7);
        let a = compile_pectl(&f).unwrap();
        let d = debranch(&a, t.max_degree().max(1));
        prop_assert!(validate_hesitant(&d).is_empty());
        prop_assert_eq!(membership_finite(&d, &t).unwrap(), membership_finite(&a, &t).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn found_models_satisfy_and_persist(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::PECTL, 6);
        if let Some(t) = enumerate_models(&f, 4, 2).unwrap() {
            prop_assert!(evaluate_state(&t, 0, &f).unwrap());
            prop_assert!(enumerate_models(&f, 5, 2).unwrap().is_some());
            prop_assert!(enumerate_models(&f, 4, 3).unwrap().is_some());
        }
    }

    #[test]
    fn normal_form_models_project(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::FULL, 6);
        let cert = normalize(&f);
        match enumerate_models(&cert.formula, 4, 2) {
            Ok(Some(t)) => {
                let back = t.restrict(&f.props().into_iter().collect::<Vec<_>>());
                prop_assert!(evaluate_state(&back, 0, &f).unwrap(), "{}", print(&f));
            }
            Ok(None) | Err(ModelError::SearchSpace(_)) | Err(ModelError::TooManyProps(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn pectlplusn_is_hesitant_with_two_pebbles(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::FULL, 8);
        let a = compile_pectlplusn(&normalize(&f).formula).unwrap();
        prop_assert!(a.pebbles <= 2);
        prop_assert!(validate_hesitant(&a).is_empty());
    }

    #[test]
    fn emptiness_is_monotone_in_the_cap(seed in any::<u64>()) {
        let f = formula(seed, FormulaShape::FUTURE_CTL, 6);
        let a = debranch(&compile_pectl(&f).unwrap(), 2);
        let full = rabin_emptiness(&mut OneWayNra::new(&a), 1_000_000).verdict;
        let again = rabin_emptiness(&mut OneWayNra::new(&a), 1_000_000).verdict;
        prop_assert_eq!(full, again);
        for cap in [1, 3, 10, 30] {
            let v = rabin_emptiness(&mut OneWayNra::new(&a), cap).verdict;
            prop_assert!(v == Verdict::Unknown || v == full, "cap {cap}: {v:?} vs {full:?}");
        }
    }
}

#[test]
fn encoders_are_deterministic_and_printable() {
    for (_, i) in micro_instances() {
        let a = encode_ubpn(&i);
        assert_eq!(a, encode_ubpn(&i));
        let ps: Vec<String> = a.props().into_iter().collect();
        assert_eq!(parse(&print(&a), &ps).unwrap(), a);
        for v in [UbplusVariant::Printed, UbplusVariant::Repaired] {
            let b = encode_ubplus(&i, v);
            assert_eq!(b, encode_ubplus(&i, v));
            let ps: Vec<String> = b.props().into_iter().collect();
            assert_eq!(parse(&print(&b), &ps).unwrap(), b);
        }
    }
}

/// Encoding size against `(|T|^2 + n) * n` over a sweep of instance sizes.
#[test]
fn encoding_size_is_polynomial() {
    use btl_core::tiling::TilingInstance;
    let mut worst: f64 = 0.0;
    let (mut first, mut last) = (0.0f64, 0.0f64);
    for t in 1..=5usize {
        for n in 1..=4usize {
            let tiles: Vec<String> = (0..t).map(|k| format!("t{k}")).collect();
            let all: Vec<(String, String)> = tiles
                .iter()
                .flat_map(|a| tiles.iter().map(move |b| (a.clone(), b.clone())))
                .collect();
            let i = TilingInstance {
                tiles: tiles.clone(),
                h: all.clone(),
                v: all,
                f: tiles.clone(),
                l: tiles[..1].to_vec(),
                n,
            };
            let bound = ((t * t + n) * n) as f64;
            for size in [
                encode_ubpn(&i).size(),
                encode_ubplus(&i, UbplusVariant::Repaired).size(),
            ] {
                let r = size as f64 / bound;
                worst = worst.max(r);
                first = first.max(if (t, n) == (1, 1) { r } else { 0.0 });
                last = r;
            }
        }
    }
    // fixed overhead dominates the smallest instances
    assert!(worst <= 500.0, "size constant {worst}");
    assert!(last <= first, "ratio grows: {first} -> {last}");
}
