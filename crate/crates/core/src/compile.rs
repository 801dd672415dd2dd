//! Translations from formulas to symmetric hesitant automata.
//!
//! `compile_pectl` produces a two-way automaton without pebbles whose
//! states are (lowered) closure members. `compile_pectlplusn` handles the
//! normal form with `N` and Boolean path combinations using two pebbles and
//! staged states `[f,i]` / `[ψ,i,j]`.
//!
//! A few shapes are rewritten before compilation so that every negation can
//! be handled by dualizing a transition:
//!
//! * `E!X f` becomes `!EX true | EX !f`,
//! * `E!Finf f` becomes `EF(!EX true | E!(true U f))`,
//! * `E!Y f` and `E!(a S b)` become `!EY f` and `!E(a S b)`,
//! * `E(f)` for a state formula `f` becomes `f`.
//!
//! `E!(a U b)` is a primitive state with its own transition; `A(a U b)` is its
//! negation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::automaton::{
    build_partition, Automaton, Builder, Move, Pbf, PebbleKind, Rule, SetKind, Transition,
};
use crate::formula::{classify, dual, print, print_path, PathFormula, StateFormula};
use crate::normalform::{is_normal_form, Definition};
use crate::tree_model::{evaluate_state, FiniteTree, ModelError};

use PathFormula as P;
use StateFormula as S;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("formula is outside the supported fragment: {0}")]
    Fragment(String),
    #[error("formula is not in normal form")]
    NotNormal,
}

// ---------------------------------------------------------------------------
// Staged states

/// Path-level component of a staged state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathPart {
    /// A Boolean combination of path literals, or a literal.
    Formula(PathFormula),
    /// `H f`: f holds from here up to the pebble.
    Historically(StateFormula),
    /// `G f` along the labeled continuation.
    Globally(StateFormula),
    /// `P(!a & H !b)` with `!a`, `!b` stored negated.
    OnceBlocked(StateFormula, StateFormula),
    /// `Finf f` along the labeled continuation.
    InfOften(StateFormula),
    /// Every labeled continuation eventually meets `f` strictly below.
    NextEventually(StateFormula),
    /// Every labeled continuation eventually meets `f`.
    Eventually(StateFormula),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StagedState {
    /// A state formula at a stage; stage 0 is used by `compile_pectl`.
    State(StateFormula, u8),
    Path(PathPart, u8, u32),
    /// Checks that the pebble lies on the current node.
    PebbleHere,
}

impl fmt::Display for PathPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathPart::Formula(p) => f.write_str(&print_path(p)),
            PathPart::Historically(s) => write!(f, "H {}", print(s)),
            PathPart::Globally(s) => write!(f, "G {}", print(s)),
            PathPart::OnceBlocked(a, b) => write!(f, "P({} & H {})", print(a), print(b)),
            PathPart::InfOften(s) => write!(f, "GF {}", print(s)),
            PathPart::NextEventually(s) => write!(f, "XF {}", print(s)),
            PathPart::Eventually(s) => write!(f, "F {}", print(s)),
        }
    }
}

impl fmt::Display for StagedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StagedState::State(s, 0) => f.write_str(&print(s)),
            StagedState::State(s, i) => write!(f, "[{},{}]", print(s), i),
            StagedState::Path(p, i, j) => write!(f, "[{},{},{}]", p, i, j),
            StagedState::PebbleHere => f.write_str("q"),
        }
    }
}

// ---------------------------------------------------------------------------
// Lowering

/// Rewrites the top of `f` until it is a primitive shape.
pub fn lower(f: &StateFormula) -> StateFormula {
    match f {
        S::Not(x) => S::neg(lower(x)),
        S::Exists(p) => match &**p {
            P::State(s) => lower(s),
            P::Not(inner) => match &**inner {
                P::Next(a) => lower(&S::or(S::neg(S::ex(S::True)), S::ex(S::neg((**a).clone())))),
                P::InfOften(a) => {
                    let leaf = S::neg(S::ex(S::True));
                    let stays = S::exists(P::not(P::finally((**a).clone())));
                    S::ef(S::or(leaf, stays))
                }
                P::Yesterday(a) => S::neg(S::yesterday((**a).clone())),
                P::Since(..) => S::neg(S::exists((**inner).clone())),
                P::State(s) => S::neg(lower(s)),
                _ => f.clone(),
            },
            _ => f.clone(),
        },
        _ => f.clone(),
    }
}

// ---------------------------------------------------------------------------
// Transition expressions over keys

#[derive(Clone, Debug, PartialEq, Eq)]
enum Kf {
    True,
    False,
    Atom(Move, StagedState),
    And(Vec<Kf>),
    Or(Vec<Kf>),
}

impl Kf {
    fn atom(m: Move, k: StagedState) -> Kf {
        Kf::Atom(m, k)
    }

    fn and(items: impl IntoIterator<Item = Kf>) -> Kf {
        let mut out = Vec::new();
        for it in items {
            match it {
                Kf::True => {}
                Kf::False => return Kf::False,
                Kf::And(xs) => out.extend(xs),
                x => out.push(x),
            }
        }
        match out.len() {
            0 => Kf::True,
            1 => out.pop().unwrap(),
            _ => Kf::And(out),
        }
    }

    fn or(items: impl IntoIterator<Item = Kf>) -> Kf {
        let mut out = Vec::new();
        for it in items {
            match it {
                Kf::False => {}
                Kf::True => return Kf::True,
                Kf::Or(xs) => out.extend(xs),
                x => out.push(x),
            }
        }
        match out.len() {
            0 => Kf::False,
            1 => out.pop().unwrap(),
            _ => Kf::Or(out),
        }
    }
}

#[derive(Clone, Debug)]
enum Kt {
    Pebble(PebbleKind, StagedState),
    Branch(Kf),
}

#[derive(Clone, Debug)]
enum Kd {
    Leaf(Kt),
    Test(u32, Box<Kd>, Box<Kd>),
}

fn branch(f: Kf) -> Kd {
    Kd::Leaf(Kt::Branch(f))
}

fn negate_key(k: &StagedState) -> StagedState {
    match k {
        StagedState::State(s, i) => StagedState::State(lower(&S::neg(s.clone())), *i),
        other => panic!("no negation for staged state {other}"),
    }
}

fn true_key(stage: u8) -> StagedState {
    StagedState::State(S::True, stage)
}

fn false_key(stage: u8) -> StagedState {
    StagedState::State(S::ff(), stage)
}

fn dual_kf(f: &Kf, stage: u8) -> Kf {
    match f {
        Kf::True => Kf::False,
        Kf::False => Kf::True,
        Kf::And(xs) => Kf::or(xs.iter().map(|x| dual_kf(x, stage)).collect::<Vec<_>>()),
        Kf::Or(xs) => Kf::and(xs.iter().map(|x| dual_kf(x, stage)).collect::<Vec<_>>()),
        Kf::Atom(m, k) => {
            let nk = negate_key(k);
            match m {
                Move::SomeChild => Kf::atom(Move::EveryChild, nk),
                Move::EveryChild => Kf::atom(Move::SomeChild, nk),
                Move::Stay => Kf::atom(Move::Stay, nk),
                Move::Parent => Kf::or([
                    Kf::atom(Move::Parent, nk),
                    Kf::atom(Move::Root, true_key(stage)),
                ]),
                Move::Root => Kf::or([
                    Kf::atom(Move::Root, nk),
                    Kf::atom(Move::Parent, true_key(stage)),
                ]),
                Move::Child(_) => unreachable!("symmetric automata only"),
            }
        }
    }
}

fn dual_kd(d: &Kd, stage: u8) -> Kd {
    match d {
        Kd::Leaf(Kt::Branch(f)) => Kd::Leaf(Kt::Branch(dual_kf(f, stage))),
        Kd::Leaf(Kt::Pebble(kind, k)) => Kd::Leaf(Kt::Pebble(*kind, negate_key(k))),
        Kd::Test(p, y, n) => Kd::Test(*p, Box::new(dual_kd(y, stage)), Box::new(dual_kd(n, stage))),
    }
}

// ---------------------------------------------------------------------------
// Augmentation

/// Which way a Boolean path combination is quantified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PathQuantifier {
    Exists,
    Forall,
}

#[derive(Clone, Debug)]
pub struct AugmentedFormula {
    pub formula: StateFormula,
    /// ψ_1 … ψ_{2m+2n}; index j is stored at position j-1.
    pub paths: Vec<PathFormula>,
    pub m: usize,
    pub n: usize,
    /// Fresh proposition names `_p<j>`.
    pub path_props: Vec<String>,
    pub augmented: StateFormula,
}

impl AugmentedFormula {
    pub fn prop_name(j: usize) -> String {
        format!("_p{j}")
    }

    /// 1-based index of a quantified occurrence (`Exists(π)` with π not a literal).
    pub fn index_of(&self, pi: &PathFormula) -> Option<(usize, PathQuantifier)> {
        match pi {
            P::Not(inner) if !inner.is_literal() => self.paths[self.m..self.m + self.n]
                .iter()
                .position(|x| x == &**inner)
                .map(|i| (self.m + i + 1, PathQuantifier::Forall)),
            _ => self.paths[..self.m]
                .iter()
                .position(|x| x == pi)
                .map(|i| (i + 1, PathQuantifier::Exists)),
        }
    }

    /// Total number of indices, 2m+2n.
    pub fn total(&self) -> usize {
        self.paths.len()
    }

    /// True for the indices whose propositions label a single path.
    pub fn is_existential_index(&self, j: usize) -> bool {
        j <= self.m || j > 2 * self.m + self.n
    }
}

/// Collects the maximal Boolean path combinations and builds φ′.
pub fn augment(f: &StateFormula) -> Result<AugmentedFormula, CompileError> {
    if !is_normal_form(f) {
        return Err(CompileError::NotNormal);
    }
    let mut ex: Vec<PathFormula> = Vec::new();
    let mut all: Vec<PathFormula> = Vec::new();
    collect_occurrences(f, &mut ex, &mut all);
    let m = ex.len();
    let n = all.len();
    let mut paths = ex;
    paths.extend(all);
    let duals: Vec<PathFormula> = paths.iter().map(dual).collect();
    paths.extend(duals);
    let path_props: Vec<String> = (1..=paths.len()).map(AugmentedFormula::prop_name).collect();
    let mut conj = Vec::new();
    for j in 1..=paths.len() {
        let p = S::prop(&path_props[j - 1]);
        let keep = if j <= m || j > 2 * m + n {
            S::eg(p.clone())
        } else {
            S::ag(p.clone())
        };
        conj.push(S::or(S::neg(p), keep));
    }
    let augmented = S::and(f.clone(), S::ag(S::conj(conj)));
    Ok(AugmentedFormula {
        formula: f.clone(),
        paths,
        m,
        n,
        path_props,
        augmented,
    })
}

fn collect_occurrences(f: &S, ex: &mut Vec<P>, all: &mut Vec<P>) {
    match f {
        S::True | S::Prop(_) => {}
        S::And(a, b) => {
            collect_occurrences(a, ex, all);
            collect_occurrences(b, ex, all);
        }
        S::Not(a) | S::Now(a) => collect_occurrences(a, ex, all),
        S::Exists(p) => {
            if !p.is_literal() {
                match &**p {
                    P::Not(inner) if !inner.is_literal() => {
                        if !all.contains(inner) {
                            all.push((**inner).clone());
                        }
                    }
                    other => {
                        if !ex.contains(other) {
                            ex.push(other.clone());
                        }
                    }
                }
            }
            p.for_each_state_arg(&mut |s| collect_occurrences(s, ex, all));
        }
    }
}

// ---------------------------------------------------------------------------
// Engine

struct Engine<'a> {
    props: Vec<String>,
    prop_index: BTreeMap<String, u32>,
    aug: Option<&'a AugmentedFormula>,
    builder: Builder<StagedState>,
}

impl<'a> Engine<'a> {
    fn prop(&self, name: &str) -> u32 {
        self.prop_index[name]
    }

    fn path_prop(&self, j: u32) -> u32 {
        self.prop(&AugmentedFormula::prop_name(j as usize))
    }

    /// Transition of a state for the given pebble flag.
    fn delta(&self, key: &StagedState, b: bool) -> Result<Kd, CompileError> {
        match key {
            StagedState::State(f, stage) => self.delta_state(f, *stage, b),
            StagedState::PebbleHere => Ok(branch(if b { Kf::True } else { Kf::False })),
            StagedState::Path(part, stage, j) => Ok(self.delta_path(part, *stage, *j, b)),
        }
    }

    fn st(&self, f: &S, stage: u8) -> StagedState {
        StagedState::State(lower(f), stage)
    }

    fn stay(&self, f: &S, stage: u8) -> Kf {
        let f = lower(f);
        if f == S::True {
            Kf::True
        } else if f.is_false() {
            Kf::False
        } else {
            Kf::atom(Move::Stay, StagedState::State(f, stage))
        }
    }

    fn delta_state(&self, f: &S, stage: u8, b: bool) -> Result<Kd, CompileError> {
        let me = StagedState::State(f.clone(), stage);
        Ok(match f {
            S::True => branch(Kf::True),
            S::Prop(p) => Kd::Test(
                self.prop(p),
                Box::new(branch(Kf::True)),
                Box::new(branch(Kf::False)),
            ),
            S::And(a, c) => branch(Kf::and([self.stay(a, stage), self.stay(c, stage)])),
            S::Not(x) => {
                // quantified Boolean path combinations have explicit negative rules
                if let (S::Exists(pi), Some(aug)) = (&**x, self.aug) {
                    if !pi.is_literal() {
                        return Ok(self.guess_rule(aug, pi, false));
                    }
                }
                dual_kd(&self.delta_state(x, stage, b)?, stage)
            }
            S::Now(x) => {
                if stage != 1 {
                    return Err(CompileError::Fragment("nested N".into()));
                }
                Kd::Leaf(Kt::Pebble(PebbleKind::Drop, self.st(x, 2)))
            }
            S::Exists(pi) => match &**pi {
                P::Next(a) => branch(Kf::atom(Move::SomeChild, self.st(a, stage))),
                P::Until(a, c) => branch(Kf::or([
                    self.stay(c, stage),
                    Kf::and([self.stay(a, stage), Kf::atom(Move::SomeChild, me)]),
                ])),
                P::InfOften(a) => {
                    let comp = crate::formula::finf_companion(a);
                    branch(Kf::or([
                        Kf::atom(Move::SomeChild, me),
                        self.stay(&comp, stage),
                    ]))
                }
                P::Yesterday(a) => match (stage, b) {
                    (7, true) => Kd::Leaf(Kt::Pebble(
                        PebbleKind::Lift,
                        StagedState::State(f.clone(), 8),
                    )),
                    (_, true) => branch(Kf::False),
                    (_, false) => branch(Kf::atom(Move::Parent, self.st(a, stage))),
                },
                P::Since(a, c) => match (stage, b) {
                    (7, true) => Kd::Leaf(Kt::Pebble(
                        PebbleKind::Lift,
                        StagedState::State(f.clone(), 8),
                    )),
                    (_, true) => branch(self.stay(c, stage)),
                    (_, false) => branch(Kf::or([
                        self.stay(c, stage),
                        Kf::and([self.stay(a, stage), Kf::atom(Move::Parent, me)]),
                    ])),
                },
                P::Not(inner) if matches!(**inner, P::Until(..)) => {
                    let P::Until(a, c) = &**inner else {
                        unreachable!()
                    };
                    branch(Kf::and([
                        self.stay(&S::neg((**c).clone()), stage),
                        Kf::or([
                            self.stay(&S::neg((**a).clone()), stage),
                            Kf::atom(Move::EveryChild, false_key(stage)),
                            Kf::atom(Move::SomeChild, me),
                        ]),
                    ]))
                }
                other if !other.is_literal() => match self.aug {
                    Some(aug) if stage == 2 => self.guess_rule(aug, other, true),
                    _ => {
                        return Err(CompileError::Fragment(format!(
                            "path combination {}",
                            print(f)
                        )))
                    }
                },
                _ => {
                    return Err(CompileError::Fragment(format!(
                        "unlowered shape {}",
                        print(f)
                    )))
                }
            },
        })
    }

    /// Rules of `[Eπ,2]` (positive) and `[!Eπ,2]` (negative).
    fn guess_rule(&self, aug: &AugmentedFormula, pi: &P, positive: bool) -> Kd {
        let (j, q) = aug.index_of(pi).expect("occurrence indexed by augment");
        let shift = aug.m + aug.n;
        let (target, stage) = match (q, positive) {
            (PathQuantifier::Exists, true) => (j, 3),
            (PathQuantifier::Exists, false) => (j + shift, 5),
            (PathQuantifier::Forall, false) => (j, 5),
            (PathQuantifier::Forall, true) => (j + shift, 3),
        };
        let psi = aug.paths[target - 1].clone();
        Kd::Leaf(Kt::Pebble(
            PebbleKind::Drop,
            StagedState::Path(PathPart::Formula(psi), stage, target as u32),
        ))
    }

    fn delta_path(&self, part: &PathPart, stage: u8, j: u32, b: bool) -> Kd {
        let me = StagedState::Path(part.clone(), stage, j);
        let pj = self.path_prop(j);
        let sub = |p: PathPart| StagedState::Path(p, stage, j);
        let s7 = |f: &S| self.stay(f, 7);
        let gated = |yes: Kf| Kd::Test(pj, Box::new(branch(yes)), Box::new(branch(Kf::True)));
        match (part, stage) {
            (PathPart::Formula(psi), 3) => {
                let down = Kf::atom(Move::SomeChild, me.clone());
                let eval = Kf::atom(
                    Move::Stay,
                    StagedState::Path(PathPart::Formula(psi.clone()), 4, j),
                );
                Kd::Test(
                    pj,
                    Box::new(branch(Kf::or([eval, down.clone()]))),
                    Box::new(branch(down)),
                )
            }
            (PathPart::Formula(psi), 5) => {
                let down = Kf::and([
                    Kf::atom(Move::EveryChild, me.clone()),
                    Kf::atom(Move::SomeChild, true_key(7)),
                ]);
                let eval = Kf::atom(
                    Move::Stay,
                    StagedState::Path(PathPart::Formula(psi.clone()), 6, j),
                );
                Kd::Test(
                    pj,
                    Box::new(branch(Kf::or([eval, down.clone()]))),
                    Box::new(branch(down)),
                )
            }
            (PathPart::Formula(psi), _) => self.delta_literal(psi, stage, j, b),
            (PathPart::Historically(f), _) => {
                if b {
                    branch(s7(f))
                } else {
                    branch(Kf::and([s7(f), Kf::atom(Move::Parent, me)]))
                }
            }
            (PathPart::Globally(f), _) => gated(Kf::and([s7(f), Kf::atom(Move::EveryChild, me)])),
            (PathPart::OnceBlocked(na, nc), _) => {
                if b {
                    branch(Kf::and([s7(na), s7(nc)]))
                } else {
                    branch(Kf::or([
                        Kf::and([
                            s7(na),
                            Kf::atom(Move::Stay, sub(PathPart::Historically(nc.clone()))),
                        ]),
                        Kf::atom(Move::Parent, me),
                    ]))
                }
            }
            (PathPart::InfOften(f), _) => gated(Kf::and([
                Kf::atom(Move::Stay, sub(PathPart::NextEventually(f.clone()))),
                Kf::atom(Move::SomeChild, true_key(7)),
                Kf::atom(Move::EveryChild, me),
            ])),
            (PathPart::NextEventually(f), _) => branch(Kf::and([
                Kf::atom(Move::SomeChild, true_key(7)),
                Kf::atom(Move::EveryChild, sub(PathPart::Eventually(f.clone()))),
            ])),
            (PathPart::Eventually(f), _) => gated(Kf::or([
                s7(f),
                Kf::and([
                    Kf::atom(Move::SomeChild, true_key(7)),
                    Kf::atom(Move::EveryChild, me),
                ]),
            ])),
        }
    }

    /// Stage-4/6 rules of Boolean combinations and literals.
    fn delta_literal(&self, psi: &P, stage: u8, j: u32, b: bool) -> Kd {
        let me = StagedState::Path(PathPart::Formula(psi.clone()), stage, j);
        let sub = |p: P| {
            Kf::atom(
                Move::Stay,
                StagedState::Path(PathPart::Formula(p), stage, j),
            )
        };
        let part = |p: PathPart| StagedState::Path(p, stage, j);
        let s7 = |f: &S| self.stay(f, 7);
        let lift = |f: S| {
            Kd::Leaf(Kt::Pebble(
                PebbleKind::Lift,
                StagedState::State(lower(&f), 8),
            ))
        };
        let up = Kf::atom(Move::Parent, me.clone());
        match psi {
            P::And(a, c) => branch(Kf::and([sub((**a).clone()), sub((**c).clone())])),
            P::State(s) => {
                // a state embed holds at the start of the path: false U s
                self.delta_literal(&P::until(S::ff(), (**s).clone()), stage, j, b)
            }
            P::Next(a) => {
                if b {
                    branch(Kf::False)
                } else {
                    branch(Kf::or([
                        Kf::and([s7(a), Kf::atom(Move::Parent, StagedState::PebbleHere)]),
                        up,
                    ]))
                }
            }
            P::Until(a, c) => {
                if b {
                    branch(s7(c))
                } else {
                    branch(Kf::or([
                        up,
                        Kf::and([
                            s7(c),
                            Kf::atom(Move::Parent, part(PathPart::Historically((**a).clone()))),
                        ]),
                    ]))
                }
            }
            P::InfOften(a) => branch(Kf::atom(
                Move::Stay,
                part(PathPart::InfOften((**a).clone())),
            )),
            P::Yesterday(_) | P::Since(..) => {
                if b {
                    lift(S::exists(psi.clone()))
                } else {
                    branch(up)
                }
            }
            P::Not(inner) => match &**inner {
                P::And(a, c) => branch(Kf::or([
                    sub(P::not((**a).clone())),
                    sub(P::not((**c).clone())),
                ])),
                P::Next(a) => {
                    let na = S::neg((**a).clone());
                    if b {
                        branch(Kf::atom(Move::EveryChild, false_key(7)))
                    } else {
                        branch(Kf::or([
                            Kf::and([s7(&na), Kf::atom(Move::Parent, StagedState::PebbleHere)]),
                            up,
                        ]))
                    }
                }
                P::Until(a, c) => {
                    let na = S::neg((**a).clone());
                    let nc = S::neg((**c).clone());
                    let glob = Kf::atom(Move::EveryChild, part(PathPart::Globally(nc.clone())));
                    if b {
                        // ¬ψ is needed at the pebble in both cases
                        branch(Kf::and([s7(&nc), Kf::or([glob, s7(&na)])]))
                    } else {
                        branch(Kf::or([
                            Kf::and([
                                Kf::atom(Move::Stay, part(PathPart::Historically(nc.clone()))),
                                glob,
                            ]),
                            Kf::atom(Move::Stay, part(PathPart::OnceBlocked(na, nc))),
                        ]))
                    }
                }
                P::InfOften(a) => {
                    let na = S::neg((**a).clone());
                    branch(Kf::or([
                        Kf::atom(Move::Stay, part(PathPart::Globally(na))),
                        Kf::atom(Move::EveryChild, false_key(7)),
                    ]))
                }
                P::Yesterday(_) | P::Since(..) => {
                    if b {
                        lift(S::neg(S::exists((**inner).clone())))
                    } else {
                        branch(up)
                    }
                }
                P::State(s) => {
                    self.delta_literal(&P::until(S::ff(), S::neg((**s).clone())), stage, j, b)
                }
                P::Not(_) => unreachable!("double path negation"),
            },
        }
    }

    /// Hesitant set and acceptance flags of a key.
    fn classify(&self, key: &StagedState) -> (String, SetKind, bool, bool) {
        let single = |kind| (format!("{key:?}"), kind, false, false);
        match key {
            StagedState::PebbleHere => single(SetKind::Transient),
            StagedState::Path(part, stage, _) => match part {
                PathPart::Formula(psi) => match stage {
                    3 => single(SetKind::Existential),
                    5 => (format!("{key:?}"), SetKind::Universal, false, true),
                    _ => match psi {
                        P::Next(_) | P::Until(..) | P::Yesterday(_) | P::Since(..) => {
                            single(SetKind::Existential)
                        }
                        P::Not(x) if matches!(**x, P::Next(_) | P::Yesterday(_) | P::Since(..)) => {
                            single(SetKind::Existential)
                        }
                        _ => single(SetKind::Transient),
                    },
                },
                PathPart::Historically(_) => single(SetKind::Universal),
                PathPart::Globally(_) => (format!("{key:?}"), SetKind::Universal, true, false),
                PathPart::OnceBlocked(..) => single(SetKind::Existential),
                PathPart::InfOften(_) => single(SetKind::Universal),
                PathPart::NextEventually(_) => single(SetKind::Transient),
                PathPart::Eventually(_) => (format!("{key:?}"), SetKind::Universal, false, true),
            },
            StagedState::State(f, stage) => classify_state(f, *stage),
        }
    }
}

/// Group, kind, good, bad for state formulas (the closure partition).
fn classify_state(f: &S, stage: u8) -> (String, SetKind, bool, bool) {
    fn finf_arg(g: &S) -> Option<S> {
        match g {
            S::Exists(p) => match &**p {
                P::InfOften(a) => Some((**a).clone()),
                P::Next(x) => match &**x {
                    S::Exists(q) => match &**q {
                        P::InfOften(a) => Some((**a).clone()),
                        _ => None,
                    },
                    _ => None,
                },
                _ => None,
            },
            S::And(x, a) => match finf_arg(x) {
                Some(arg) if crate::formula::finf_companion(&arg) == *g && **a == arg => Some(arg),
                _ => None,
            },
            _ => None,
        }
    }
    fn is_ex_finf(g: &S) -> bool {
        matches!(g, S::Exists(p) if matches!(&**p, P::Next(x) if matches!(&**x, S::Exists(q) if matches!(&**q, P::InfOften(_)))))
    }
    let name = format!("[{},{}]", print(f), stage);
    let (positive, negated) = match f {
        S::Not(x) => ((**x).clone(), true),
        other => (other.clone(), false),
    };
    if let Some(arg) = finf_arg(&positive) {
        let group = format!("finf:{}:{}:{}", print(&arg), stage, negated);
        return if negated {
            (group, SetKind::Universal, false, is_ex_finf(&positive))
        } else {
            let good = matches!(positive, S::And(..));
            (group, SetKind::Existential, good, false)
        };
    }
    if let S::Exists(p) = &positive {
        match &**p {
            P::Until(..) => {
                return if negated {
                    (name, SetKind::Universal, true, false)
                } else {
                    (name, SetKind::Existential, false, false)
                }
            }
            P::Not(inner) if matches!(**inner, P::Until(..)) => {
                return if negated {
                    (name, SetKind::Universal, false, true)
                } else {
                    (name, SetKind::Existential, true, false)
                }
            }
            P::Since(..) => {
                return if negated {
                    (name, SetKind::Universal, false, false)
                } else {
                    (name, SetKind::Existential, false, false)
                }
            }
            _ => {}
        }
    }
    (name, SetKind::Transient, false, false)
}

fn to_rule(d: &Kd, builder: &mut Builder<StagedState>) -> Rule {
    match d {
        Kd::Leaf(Kt::Pebble(kind, k)) => {
            Rule::Leaf(Transition::Pebble(*kind, builder.id(k.clone())))
        }
        Kd::Leaf(Kt::Branch(f)) => Rule::branch(to_pbf(f, builder)),
        Kd::Test(p, y, n) => Rule::test(*p, to_rule(y, builder), to_rule(n, builder)),
    }
}

fn to_pbf(f: &Kf, builder: &mut Builder<StagedState>) -> Pbf {
    match f {
        Kf::True => Pbf::True,
        Kf::False => Pbf::False,
        Kf::Atom(m, k) => Pbf::atom(*m, builder.id(k.clone())),
        Kf::And(xs) => Pbf::and(xs.iter().map(|x| to_pbf(x, builder)).collect::<Vec<_>>()),
        Kf::Or(xs) => Pbf::or(xs.iter().map(|x| to_pbf(x, builder)).collect::<Vec<_>>()),
    }
}

/// Result of a compilation: the automaton plus the staged meaning of each state.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub automaton: Automaton,
    pub keys: Vec<StagedState>,
    pub augmented: Option<AugmentedFormula>,
}

fn run_engine(
    props: Vec<String>,
    aug: Option<&AugmentedFormula>,
    initial: StagedState,
    pebbles: usize,
) -> Result<Compiled, CompileError> {
    let prop_index = props
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i as u32))
        .collect();
    let mut eng = Engine {
        props,
        prop_index,
        aug,
        builder: Builder::default(),
    };
    let init = eng.builder.id(initial);
    let mut rules: Vec<Option<[Rule; 2]>> = Vec::new();
    while let Some(q) = eng.builder.next_pending() {
        let key = eng.builder.keys[q as usize].clone();
        let r0 = eng.delta(&key, false)?;
        let r1 = eng.delta(&key, true)?;
        let rule0 = to_rule(&r0, &mut eng.builder);
        let rule1 = to_rule(&r1, &mut eng.builder);
        if rules.len() <= q as usize {
            rules.resize(q as usize + 1, None);
        }
        rules[q as usize] = Some([rule0, rule1]);
    }
    let n = eng.builder.keys.len();
    let rules: Vec<Vec<[Rule; 2]>> = (0..n)
        .map(|q| vec![rules[q].clone().expect("every state expanded")])
        .collect();
    let mut groups = Vec::with_capacity(n);
    let mut good = Vec::with_capacity(n);
    let mut bad = Vec::with_capacity(n);
    for key in &eng.builder.keys {
        let (g, kind, is_good, is_bad) = eng.classify(key);
        groups.push((g, kind));
        good.push(is_good);
        bad.push(is_bad);
    }
    let (sets, set_of) = build_partition(&rules, &groups).map_err(CompileError::Fragment)?;
    let keys = eng.builder.keys.clone();
    let automaton = Automaton {
        names: keys.iter().map(|k| k.to_string()).collect(),
        props: eng.props,
        symmetric: true,
        max_arity: 0,
        pebbles,
        initial: init,
        rules,
        good,
        bad,
        sets,
        set_of,
    };
    Ok(Compiled {
        automaton,
        keys,
        augmented: aug.cloned(),
    })
}

/// Symmetric two-way hesitant automaton for a PECTL formula.
pub fn compile_pectl(f: &StateFormula) -> Result<Automaton, CompileError> {
    compile_pectl_keys(f).map(|c| c.automaton)
}

pub fn compile_pectl_keys(f: &StateFormula) -> Result<Compiled, CompileError> {
    let prof = classify(f);
    if !prof.is_pectl() {
        return Err(CompileError::Fragment(format!(
            "{} is not PECTL",
            prof.fragment_name
        )));
    }
    let props: Vec<String> = f.props().into_iter().collect();
    run_engine(props, None, StagedState::State(lower(f), 0), 0)
}

/// Symmetric two-pebble hesitant automaton for a formula in normal form.
pub fn compile_pectlplusn(f: &StateFormula) -> Result<Automaton, CompileError> {
    compile_pectlplusn_keys(f).map(|c| c.automaton)
}

pub fn compile_pectlplusn_keys(f: &StateFormula) -> Result<Compiled, CompileError> {
    let aug = augment(f)?;
    let props: Vec<String> = aug.augmented.props().into_iter().collect();
    let initial = StagedState::State(lower(&aug.augmented), 1);
    run_engine(props, Some(&aug), initial, 2)
}

/// Number of (stage, subformula) pairs a staged construction may use; the
/// state count of `compile_pectlplusn` is compared against this.
pub fn stage_eligible(aug: &AugmentedFormula) -> usize {
    crate::formula::closure(&aug.augmented).len()
        + aug.paths.iter().map(|p| p.size()).sum::<usize>()
}

/// Extends a tree over the original propositions to `props` (a superset):
/// each `_nf<k>` is set where its definition holds, every `_p<j>` is set
/// exactly at the leaves. On finite trees this labeling is accepted
/// whenever any labeling is.
pub fn canonical_aux_labeling(
    t: &FiniteTree,
    props: &[String],
    defs: &[Definition],
) -> Result<FiniteTree, ModelError> {
    let mut out = FiniteTree { props: props.to_vec(), nodes: t.nodes.clone() };
    for (x, node) in out.nodes.iter_mut().enumerate() {
        let mut label = 0u64;
        for (i, p) in props.iter().enumerate() {
            let set = match t.prop_index(p) {
                Some(k) => t.has(x, k),
                None => p.starts_with("_p") && t.degree(x) == 0,
            };
            if set {
                label |= 1 << i;
            }
        }
        node.label = label;
    }
    let names: BTreeSet<&str> = defs.iter().map(|d| d.name.as_str()).collect();
    let mut done: BTreeSet<String> = BTreeSet::new();
    let mut pending: Vec<&Definition> = defs.iter().collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for d in pending {
            let deps = d.definition.props();
            if deps.iter().any(|p| names.contains(p.as_str()) && !done.contains(p)) {
                rest.push(d);
                continue;
            }
            let bit = props
                .iter()
                .position(|p| p == &d.name)
                .ok_or_else(|| ModelError::UnknownProp(d.name.clone()))?;
            let truth: Vec<bool> = (0..out.len())
                .map(|x| evaluate_state(&out, x, &d.definition))
                .collect::<Result<_, _>>()?;
            for (x, v) in truth.into_iter().enumerate() {
                if v {
                    out.nodes[x].label |= 1 << bit;
                }
            }
            done.insert(d.name.clone());
        }
        pending = rest;
        if pending.len() == before {
            return Err(ModelError::Format("cyclic definitions".into()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{membership_finite, validate_hesitant};
    use crate::formula::parse;

    fn f(text: &str) -> S {
        parse(text, ["p", "q", "r"]).unwrap()
    }

    #[test]
    fn ex_has_diamond_transition() {
        let a = compile_pectl(&f("EX p")).unwrap();
        let p = a.state_id("p").unwrap();
        let t = a.delta(a.initial, 0, 0, false);
        assert_eq!(t, &Transition::Branch(Pbf::atom(Move::SomeChild, p)));
        assert!(validate_hesitant(&a).is_empty());
    }

    #[test]
    fn prop_automaton_reads_the_root_label() {
        let a = compile_pectl(&f("p")).unwrap();
        let yes = FiniteTree::from_labels(&["p"], &["p"], &[]);
        let no = FiniteTree::from_labels(&["p"], &[], &[]);
        assert!(membership_finite(&a, &yes).unwrap());
        assert!(!membership_finite(&a, &no).unwrap());
    }

    #[test]
    fn past_and_universal_until_on_small_trees() {
        let trees = [
            FiniteTree::from_labels(&["p", "q"], &["p"], &[(0, &["p"]), (1, &["q"])]),
            FiniteTree::from_labels(&["p", "q"], &["p"], &[(0, &["p"]), (0, &["q"])]),
            FiniteTree::from_labels(&["p", "q"], &[], &[]),
            FiniteTree::from_labels(&["p", "q"], &["q"], &[(0, &["p"]), (1, &[])]),
        ];
        for text in [
            "A(p U q)",
            "E(p U q)",
            "EX Y p",
            "EF (q & E(p S q))",
            "!E(p U q)",
            "AX Y !p",
            "EG p",
            "AG (q -> Y p)",
            "EF !Y true",
            "E(!X p)",
            "E(!Finf p)",
        ] {
            let g = f(text);
            let a = compile_pectl(&g).unwrap();
            assert!(
                validate_hesitant(&a).is_empty(),
                "{text}: {:?}",
                validate_hesitant(&a)
            );
            for t in &trees {
                assert_eq!(
                    membership_finite(&a, t).unwrap(),
                    evaluate_state(t, 0, &g).unwrap(),
                    "{text} on {:?}",
                    t.to_json()
                );
            }
        }
    }

    #[test]
    fn augment_indexes_occurrences() {
        let g = parse("N E(F p & F q)", ["p", "q"]).unwrap();
        let aug = augment(&g).unwrap();
        assert_eq!((aug.m, aug.n, aug.total()), (1, 0, 2));
        let g = parse("N (E(F p & F q) & A(X p & X q))", ["p", "q"]).unwrap();
        let aug = augment(&g).unwrap();
        assert_eq!((aug.m, aug.n, aug.total()), (1, 1, 4));
        assert!(aug.is_existential_index(1));
        assert!(!aug.is_existential_index(2));
        assert!(!aug.is_existential_index(3));
        assert!(aug.is_existential_index(4));
    }

    #[test]
    fn now_drops_the_first_pebble() {
        let g = parse("N p", ["p"]).unwrap();
        let c = compile_pectlplusn_keys(&g).unwrap();
        let a = &c.automaton;
        assert!(
            validate_hesitant(a).is_empty(),
            "{:?}",
            validate_hesitant(a)
        );
        let np = a.state_id("[N p,1]").unwrap();
        let p2 = a.state_id("[p,2]").unwrap();
        assert_eq!(
            a.delta(np, 0, 0, false),
            &Transition::Pebble(PebbleKind::Drop, p2)
        );
    }

    #[test]
    fn staged_state_rendering() {
        let s = StagedState::Path(
            PathPart::Formula(P::until(S::prop("p"), S::prop("q"))),
            4,
            1,
        );
        assert_eq!(s.to_string(), "[(p U q),4,1]");
        assert_eq!(StagedState::State(S::prop("p"), 2).to_string(), "[p,2]");
    }
}

#[cfg(test)]
mod random_tests {
    use super::*;
    use crate::automaton::{membership_finite, validate_hesitant};
    use crate::random::{finite_tree, props, state_formula, FormulaShape};
    use crate::normalform::normalize;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pectl_membership_matches_semantics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ps = props(2);
        for i in 0..400 {
            let f = state_formula(&mut rng, &ps, 1 + i % 7, FormulaShape::PECTL);
            let a = compile_pectl(&f).unwrap();
            let v = validate_hesitant(&a);
            assert!(v.is_empty(), "{}: {}", print(&f), v[0]);
            let t = finite_tree(&mut rng, &ps, 7, 3);
            assert_eq!(
                membership_finite(&a, &t).unwrap(),
                evaluate_state(&t, 0, &f).unwrap(),
                "{} on {}",
                print(&f),
                t.to_json()
            );
        }
    }

    #[test]
    fn staged_membership_matches_semantics() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ps = props(2);
        let rounds: usize = std::env::var("BTL_ROUNDS").ok().and_then(|v| v.parse().ok()).unwrap_or(300);
        let mut combos = 0;
        for i in 0..rounds {
            let f = state_formula(&mut rng, &ps, 1 + i % 6, FormulaShape::FULL);
            combos += usize::from(crate::formula::classify(&f).uses_path_boolean);
            let cert = normalize(&f);
            let c = compile_pectlplusn_keys(&cert.formula).unwrap();
            let a = &c.automaton;
            let v = validate_hesitant(a);
            assert!(v.is_empty(), "{}: {}", print(&f), v[0]);
            let t = finite_tree(&mut rng, &ps, 5, 2);
            let lt = canonical_aux_labeling(&t, &a.props, &cert.definitions).unwrap();
            assert_eq!(
                membership_finite(a, &lt).unwrap(),
                evaluate_state(&t, 0, &f).unwrap(),
                "{} normalized {} on {}",
                print(&f),
                print(&cert.formula),
                t.to_json()
            );
        }
        assert!(combos > rounds / 20, "{combos}");
    }
}
