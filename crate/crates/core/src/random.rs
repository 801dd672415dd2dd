//! Seeded generators for formulas and finite trees, used by the test
//! suites and the CLI.

use rand::Rng;

use crate::formula::{PathFormula as P, StateFormula as S};
use crate::tree_model::FiniteTree;

/// Which constructors a generated formula may use.
#[derive(Clone, Copy, Debug)]
pub struct FormulaShape {
    pub until: bool,
    pub fairness: bool,
    pub past: bool,
    pub now: bool,
    pub path_boolean: bool,
}

impl FormulaShape {
    pub const PECTL: FormulaShape =
        FormulaShape { until: true, fairness: true, past: true, now: false, path_boolean: false };
    pub const FULL: FormulaShape = FormulaShape { now: true, path_boolean: true, ..Self::PECTL };
    pub const FUTURE_CTL: FormulaShape =
        FormulaShape { until: true, fairness: true, past: false, now: false, path_boolean: false };
}

/// A random state formula with exactly `connectives` operators.
pub fn state_formula<R: Rng>(rng: &mut R, props: &[String], connectives: usize, shape: FormulaShape) -> S {
    if connectives == 0 {
        return if rng.gen_ratio(1, 8) { S::True } else { S::prop(&props[rng.gen_range(0..props.len())]) };
    }
    loop {
        let choice = rng.gen_range(0..10);
        match choice {
            0 | 1 => {
                let k = rng.gen_range(0..connectives);
                return S::and(
                    state_formula(rng, props, k, shape),
                    state_formula(rng, props, connectives - 1 - k, shape),
                );
            }
            2 | 3 => return S::not(state_formula(rng, props, connectives - 1, shape)),
            4 if shape.now => return S::now(state_formula(rng, props, connectives - 1, shape)),
            5..=9 => {
                if let Some(p) = path_literal(rng, props, connectives - 1, shape) {
                    return S::exists(p);
                }
            }
            _ => {}
        }
    }
}

/// Path formula under one quantifier with `connectives` operators in total
/// (the quantifier not counted).
fn path_literal<R: Rng>(rng: &mut R, props: &[String], connectives: usize, shape: FormulaShape) -> Option<P> {
    if shape.path_boolean && connectives >= 3 && rng.gen_ratio(1, 3) {
        return Some(path_boolean(rng, props, connectives, shape));
    }
    if connectives == 0 {
        return None;
    }
    let rest = connectives - 1;
    let split = |rng: &mut R| {
        let k = rng.gen_range(0..=rest);
        (state_formula(rng, props, k, shape), state_formula(rng, props, rest - k, shape))
    };
    let p = match rng.gen_range(0..7) {
        0 => P::next(state_formula(rng, props, rest, shape)),
        1 if shape.until => {
            let (a, b) = split(rng);
            P::until(a, b)
        }
        1 => P::finally(state_formula(rng, props, rest, shape)),
        2 if shape.fairness => P::inf_often(state_formula(rng, props, rest, shape)),
        3 if shape.past => P::yesterday(state_formula(rng, props, rest, shape)),
        4 if shape.past => {
            let (a, b) = split(rng);
            P::since(a, b)
        }
        5 if rest >= 1 => P::not(P::next(state_formula(rng, props, rest - 1, shape))),
        6 if rest >= 1 && shape.until => {
            let k = rng.gen_range(0..rest);
            P::not(P::until(
                state_formula(rng, props, k, shape),
                state_formula(rng, props, rest - 1 - k, shape),
            ))
        }
        _ => P::next(state_formula(rng, props, rest, shape)),
    };
    Some(p)
}

fn path_boolean<R: Rng>(rng: &mut R, props: &[String], connectives: usize, shape: FormulaShape) -> P {
    let inner = FormulaShape { path_boolean: false, ..shape };
    if connectives < 3 {
        return path_literal(rng, props, connectives.max(1), inner).expect("nonzero size");
    }
    let rest = connectives - 1;
    let k = rng.gen_range(1..rest);
    let a = if k >= 3 && rng.gen_bool(0.5) {
        path_boolean(rng, props, k, shape)
    } else {
        path_literal(rng, props, k, inner).expect("nonzero size")
    };
    let b = path_literal(rng, props, rest - k, inner).expect("nonzero size");
    match rng.gen_range(0..3) {
        0 => P::and(a, b),
        1 => P::or(a, b),
        _ => P::and(a, P::not(b)),
    }
}

/// A random finite tree with at most `max_nodes` nodes and degree at most
/// `max_degree`.
pub fn finite_tree<R: Rng>(rng: &mut R, props: &[String], max_nodes: usize, max_degree: usize) -> FiniteTree {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let label = |rng: &mut R| -> u64 { rng.gen_range(0..(1u64 << props.len())) };
    let mut t = FiniteTree::new(props.to_vec(), label(rng));
    let mut frontier = vec![0];
    while t.len() < n && !frontier.is_empty() {
        let i = rng.gen_range(0..frontier.len());
        let x = frontier[i];
        if t.degree(x) >= max_degree {
            frontier.swap_remove(i);
            continue;
        }
        let l = label(rng);
        let c = t.add_child(x, l);
        frontier.push(c);
    }
    t
}

pub fn props(n: usize) -> Vec<String> {
    ["p", "q", "r", "s", "t", "u"].iter().take(n).map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::classify;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sizes_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ps = props(2);
        for c in 0..10 {
            for _ in 0..20 {
                let f = state_formula(&mut rng, &ps, c, FormulaShape::PECTL);
                assert_eq!(f.connectives(), c);
                assert!(classify(&f).is_pectl());
                let f = state_formula(&mut rng, &ps, c, FormulaShape::FULL);
                assert!(f.connectives() <= 2 * c);
            }
        }
    }
}
