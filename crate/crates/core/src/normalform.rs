//! Normal form: no nested `N`, quantified Boolean path combinations only
//! under an `N` and never nested inside one another, path Booleans in
//! negation normal form.
//!
//! `normalize` renames `N` subformulas and nested path combinations with
//! fresh propositions `_nf<k>`. A definition is one-directional when the
//! renamed subformula occurs with a single polarity and an equivalence
//! otherwise.

use serde::Serialize;

use crate::formula::{print, PathFormula, StateFormula};

use PathFormula as P;
use StateFormula as S;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Both,
}

impl Polarity {
    fn flip(self) -> Polarity {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
            Polarity::Both => Polarity::Both,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    pub definition: StateFormula,
    pub polarity: Polarity,
}

impl Definition {
    /// The constraint `name -> def`, `def -> name` or `name <-> def`.
    pub fn constraint(&self) -> StateFormula {
        let p = S::prop(&self.name);
        let d = self.definition.clone();
        match self.polarity {
            Polarity::Positive => S::implies(p, d),
            Polarity::Negative => S::implies(d, p),
            Polarity::Both => S::iff(p, d),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NormalFormCertificate {
    pub formula: StateFormula,
    pub definitions: Vec<Definition>,
    pub input_size: usize,
    pub output_size: usize,
}

impl NormalFormCertificate {
    pub fn ratio(&self) -> f64 {
        self.output_size as f64 / self.input_size.max(1) as f64
    }

    pub fn fresh_props(&self) -> Vec<String> {
        self.definitions.iter().map(|d| d.name.clone()).collect()
    }

    /// Renaming table, one `name  op  definition` line per fresh proposition.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for d in &self.definitions {
            let op = match d.polarity {
                Polarity::Positive => "->",
                Polarity::Negative => "<-",
                Polarity::Both => "<->",
            };
            out.push_str(&format!("{}\t{}\t{}\n", d.name, op, print(&d.definition)));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Recognizer

pub fn is_normal_form(f: &StateFormula) -> bool {
    outer(f)
}

fn outer(f: &S) -> bool {
    match f {
        S::True | S::Prop(_) => true,
        S::And(a, b) => outer(a) && outer(b),
        S::Not(a) => outer(a),
        S::Now(a) => scoped(a),
        S::Exists(p) => p.is_literal() && all_args(p, outer),
    }
}

fn scoped(f: &S) -> bool {
    match f {
        S::True | S::Prop(_) => true,
        S::And(a, b) => scoped(a) && scoped(b),
        S::Not(a) => scoped(a),
        S::Now(_) => false,
        S::Exists(p) if p.is_literal() => all_args(p, scoped),
        S::Exists(p) => path_combination(p),
    }
}

fn path_combination(p: &P) -> bool {
    match p {
        P::And(a, b) => path_combination(a) && path_combination(b),
        P::Not(inner) => match &**inner {
            // a disjunction
            P::And(a, b) => {
                path_combination(&P::not((**a).clone())) && path_combination(&P::not((**b).clone()))
            }
            P::Not(_) => false,
            atom => atom.is_temporal_atom() && all_args(atom, plain),
        },
        other => all_args(other, plain),
    }
}

fn plain(f: &S) -> bool {
    match f {
        S::True | S::Prop(_) => true,
        S::And(a, b) => plain(a) && plain(b),
        S::Not(a) => plain(a),
        S::Now(_) => false,
        S::Exists(p) => p.is_literal() && all_args(p, plain),
    }
}

fn all_args(p: &P, check: fn(&S) -> bool) -> bool {
    let mut ok = true;
    p.for_each_state_arg(&mut |s| ok &= check(s));
    ok
}

// ---------------------------------------------------------------------------
// Rewriting

struct Renamer {
    counter: usize,
}

impl Renamer {
    fn fresh(&mut self) -> String {
        let name = format!("_nf{}", self.counter);
        self.counter += 1;
        name
    }

    /// Replaces every `N` with a fresh proposition, innermost first.
    fn rename_now(&mut self, f: &S, pol: Polarity, defs: &mut Vec<Definition>) -> S {
        match f {
            S::True | S::Prop(_) => f.clone(),
            S::And(a, b) => S::and(self.rename_now(a, pol, defs), self.rename_now(b, pol, defs)),
            S::Not(a) => S::not(self.rename_now(a, pol.flip(), defs)),
            S::Exists(p) => S::exists(self.rename_now_path(p, pol, defs)),
            S::Now(a) => {
                let body = self.rename_now(a, pol, defs);
                let name = self.fresh();
                defs.push(Definition {
                    name: name.clone(),
                    definition: S::now(body),
                    polarity: pol,
                });
                S::prop(&name)
            }
        }
    }

    fn rename_now_path(&mut self, p: &P, pol: Polarity, defs: &mut Vec<Definition>) -> P {
        map_path(p, pol, &mut |s, pol| self.rename_now(s, pol, defs))
    }

    /// Renames quantified path combinations nested inside another one.
    fn rename_nested(
        &mut self,
        f: &S,
        pol: Polarity,
        inside: bool,
        defs: &mut Vec<Definition>,
    ) -> S {
        match f {
            S::True | S::Prop(_) => f.clone(),
            S::And(a, b) => S::and(
                self.rename_nested(a, pol, inside, defs),
                self.rename_nested(b, pol, inside, defs),
            ),
            S::Not(a) => S::not(self.rename_nested(a, pol.flip(), inside, defs)),
            S::Now(a) => S::now(self.rename_nested(a, pol, inside, defs)),
            S::Exists(p) => {
                let combination = !p.is_literal();
                let arg_inside = inside || combination;
                let p2 = map_path(p, pol, &mut |s, pol| {
                    self.rename_nested(s, pol, arg_inside, defs)
                });
                let e = S::exists(p2);
                if combination && inside {
                    let name = self.fresh();
                    defs.push(Definition {
                        name: name.clone(),
                        definition: e,
                        polarity: pol,
                    });
                    S::prop(&name)
                } else {
                    e
                }
            }
        }
    }

    /// Body of one `N` scope with its nested combinations renamed.
    fn scope(&mut self, body: &S, defs: &mut Vec<Definition>) -> S {
        let mut local = Vec::new();
        let main = self.rename_nested(body, Polarity::Positive, false, &mut local);
        let conj = local.iter().map(|d| S::ag(d.constraint()));
        let out = S::conj(std::iter::once(main).chain(conj));
        defs.extend(local);
        out
    }
}

/// Rebuilds a path formula through the simplifying constructors, mapping its
/// state arguments. Polarity flips under path negation.
fn map_path(p: &P, pol: Polarity, f: &mut impl FnMut(&S, Polarity) -> S) -> P {
    match p {
        P::State(s) => P::state(f(s, pol)),
        P::And(a, b) => {
            let a = map_path(a, pol, f);
            P::and(a, map_path(b, pol, f))
        }
        P::Not(a) => P::not(map_path(a, pol.flip(), f)),
        P::Next(a) => P::next(f(a, pol)),
        P::Until(a, b) => {
            let a = f(a, pol);
            P::until(a, f(b, pol))
        }
        P::InfOften(a) => P::inf_often(f(a, pol)),
        P::Yesterday(a) => P::yesterday(f(a, pol)),
        P::Since(a, b) => {
            let a = f(a, pol);
            P::since(a, f(b, pol))
        }
    }
}

/// `N` applied at the root is the identity; such occurrences are unwrapped
/// instead of renamed.
fn strip_root_now(f: &S) -> S {
    match f {
        S::Now(a) => strip_root_now(a),
        S::And(a, b) => S::and(strip_root_now(a), strip_root_now(b)),
        S::Not(a) => S::not(strip_root_now(a)),
        other => other.clone(),
    }
}

/// Equisatisfiable normal form of `f`.
pub fn normalize(f: &StateFormula) -> NormalFormCertificate {
    let mut r = Renamer { counter: 0 };
    let mut now_defs = Vec::new();
    let main = r.rename_now(&strip_root_now(f), Polarity::Positive, &mut now_defs);
    let mut definitions = Vec::new();
    let main = r.scope(&main, &mut definitions);
    let mut conjuncts = vec![S::now(main)];
    for d in now_defs {
        let S::Now(body) = &d.definition else {
            unreachable!()
        };
        let body = r.scope(body, &mut definitions);
        let d = Definition {
            definition: S::now(body),
            ..d
        };
        conjuncts.push(S::ag(d.constraint()));
        definitions.push(d);
    }
    let formula = S::conj(conjuncts);
    definitions.sort_by_key(|d| d.name[3..].parse::<usize>().unwrap_or(usize::MAX));
    NormalFormCertificate {
        input_size: f.size(),
        output_size: formula.size(),
        formula,
        definitions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    fn f(text: &str) -> S {
        parse(text, ["p", "q", "r", "_nf0", "_nf1"]).unwrap()
    }

    #[test]
    fn grammar_examples() {
        assert!(!is_normal_form(&S::now(S::now(S::prop("p")))));
        assert!(is_normal_form(&f("N E(X p & Finf q)")));
        assert!(!is_normal_form(&f("E(X p & F q)")));
        assert!(is_normal_form(&f("EF p & A(p U q)")));
        assert!(!is_normal_form(&f("N E(X p & X E(F p & F q))")));
    }

    #[test]
    fn plain_formula_gets_prefixed() {
        let c = normalize(&f("EX p"));
        assert_eq!(c.formula, S::now(f("EX p")));
        assert!(c.definitions.is_empty());
    }

    #[test]
    fn nested_now_is_renamed() {
        let c = normalize(&f("EF N EX p"));
        assert_eq!(c.definitions.len(), 1);
        assert_eq!(c.definitions[0].name, "_nf0");
        assert_eq!(c.definitions[0].definition, f("N EX p"));
        assert_eq!(
            c.formula,
            S::and(
                S::now(f("EF _nf0")),
                S::ag(S::implies(S::prop("_nf0"), f("N EX p")))
            )
        );
        assert!(is_normal_form(&c.formula));
    }

    #[test]
    fn nested_combination_is_renamed_inside_scope() {
        let c = normalize(&f("E(X p & X E(F p & F q))"));
        assert!(is_normal_form(&c.formula), "{}", print(&c.formula));
        assert_eq!(c.definitions.len(), 1);
        assert_eq!(c.definitions[0].definition, f("E(F p & F q)"));
    }

    #[test]
    fn negative_occurrence_defines_backwards() {
        let c = normalize(&f("!EX N p"));
        assert_eq!(c.definitions[0].polarity, Polarity::Negative);
        // both sides of an equivalence are expanded, one definition each
        let c = normalize(&f("EX N p <-> q"));
        let pols: Vec<_> = c.definitions.iter().map(|d| d.polarity).collect();
        assert_eq!(pols, [Polarity::Negative, Polarity::Positive]);
    }
}
