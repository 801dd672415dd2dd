//! Hesitant alternating tree automata with weak pebbles.
//!
//! One representation covers symmetric automata (moves ◇/□) and
//! nonsymmetric ones (explicit child indices, transitions per arity).
//! With zero pebbles this is a plain two-way hesitant automaton.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde_json::json;
use thiserror::Error;

use crate::parity::{self, Game, Player};
use crate::tree_model::FiniteTree;

pub type StateId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    /// Child index, starting at 1 (nonsymmetric only).
    Child(u32),
    /// ◇: some child.
    SomeChild,
    /// □: every child.
    EveryChild,
    Parent,
    Stay,
    /// Stay, but only allowed at the root.
    Root,
}

impl Move {
    pub fn name(&self) -> String {
        match self {
            Move::Child(c) => format!("child-{c}"),
            Move::SomeChild => "some-child".into(),
            Move::EveryChild => "every-child".into(),
            Move::Parent => "parent".into(),
            Move::Stay => "stay".into(),
            Move::Root => "root".into(),
        }
    }
}

/// Positive Boolean formula over (move, state) atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pbf {
    True,
    False,
    Atom(Move, StateId),
    And(Vec<Pbf>),
    Or(Vec<Pbf>),
}

impl Pbf {
    pub fn atom(m: Move, q: StateId) -> Pbf {
        Pbf::Atom(m, q)
    }

    /// Conjunction with flattening and constant folding.
    pub fn and(items: impl IntoIterator<Item = Pbf>) -> Pbf {
        let mut out = Vec::new();
        for it in items {
            match it {
                Pbf::True => {}
                Pbf::False => return Pbf::False,
                Pbf::And(xs) => out.extend(xs),
                x => out.push(x),
            }
        }
        match out.len() {
            0 => Pbf::True,
            1 => out.pop().unwrap(),
            _ => Pbf::And(out),
        }
    }

    pub fn or(items: impl IntoIterator<Item = Pbf>) -> Pbf {
        let mut out = Vec::new();
        for it in items {
            match it {
                Pbf::False => {}
                Pbf::True => return Pbf::True,
                Pbf::Or(xs) => out.extend(xs),
                x => out.push(x),
            }
        }
        match out.len() {
            0 => Pbf::False,
            1 => out.pop().unwrap(),
            _ => Pbf::Or(out),
        }
    }

    pub fn and2(a: Pbf, b: Pbf) -> Pbf {
        Pbf::and([a, b])
    }

    pub fn or2(a: Pbf, b: Pbf) -> Pbf {
        Pbf::or([a, b])
    }

    pub fn atoms(&self) -> Vec<(Move, StateId)> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |m, q| out.push((m, q)));
        out
    }

    pub fn visit_atoms(&self, f: &mut impl FnMut(Move, StateId)) {
        match self {
            Pbf::True | Pbf::False => {}
            Pbf::Atom(m, q) => f(*m, *q),
            Pbf::And(xs) | Pbf::Or(xs) => xs.iter().for_each(|x| x.visit_atoms(f)),
        }
    }

    /// Applies `f` to every atom; the result is re-simplified.
    pub fn map_atoms(&self, f: &mut impl FnMut(Move, StateId) -> Pbf) -> Pbf {
        match self {
            Pbf::True => Pbf::True,
            Pbf::False => Pbf::False,
            Pbf::Atom(m, q) => f(*m, *q),
            Pbf::And(xs) => Pbf::and(xs.iter().map(|x| x.map_atoms(f)).collect::<Vec<_>>()),
            Pbf::Or(xs) => Pbf::or(xs.iter().map(|x| x.map_atoms(f)).collect::<Vec<_>>()),
        }
    }

    pub fn sexpr(&self, names: &dyn Fn(StateId) -> String) -> String {
        match self {
            Pbf::True => "true".into(),
            Pbf::False => "false".into(),
            Pbf::Atom(m, q) => format!("(atom {} {})", m.name(), names(*q)),
            Pbf::And(xs) | Pbf::Or(xs) => {
                let op = if matches!(self, Pbf::And(_)) {
                    "and"
                } else {
                    "or"
                };
                let parts: Vec<String> = xs.iter().map(|x| x.sexpr(names)).collect();
                format!("({op} {})", parts.join(" "))
            }
        }
    }

    pub fn eval(&self, set: &dyn Fn(Move, StateId) -> bool) -> bool {
        match self {
            Pbf::True => true,
            Pbf::False => false,
            Pbf::Atom(m, q) => set(*m, *q),
            Pbf::And(xs) => xs.iter().all(|x| x.eval(set)),
            Pbf::Or(xs) => xs.iter().any(|x| x.eval(set)),
        }
    }
}

/// Minimal satisfying atom sets, each sorted; the list is ordered by size
/// and then lexicographically.
pub fn satisfying_sets(f: &Pbf) -> Vec<Vec<(Move, StateId)>> {
    let mut sets: Vec<BTreeSet<(Move, StateId)>> = dnf(f);
    minimize(&mut sets);
    let mut out: Vec<Vec<(Move, StateId)>> =
        sets.into_iter().map(|s| s.into_iter().collect()).collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn dnf(f: &Pbf) -> Vec<BTreeSet<(Move, StateId)>> {
    match f {
        Pbf::True => vec![BTreeSet::new()],
        Pbf::False => vec![],
        Pbf::Atom(m, q) => vec![BTreeSet::from([(*m, *q)])],
        Pbf::Or(xs) => {
            let mut out = Vec::new();
            for x in xs {
                out.extend(dnf(x));
            }
            minimize(&mut out);
            out
        }
        Pbf::And(xs) => {
            let mut acc = vec![BTreeSet::new()];
            for x in xs {
                let part = dnf(x);
                let mut next = Vec::new();
                for a in &acc {
                    for b in &part {
                        next.push(a.union(b).copied().collect());
                    }
                }
                minimize(&mut next);
                acc = next;
            }
            acc
        }
    }
}

fn minimize(sets: &mut Vec<BTreeSet<(Move, StateId)>>) {
    sets.sort_by_key(|s| s.len());
    sets.dedup();
    let mut keep: Vec<BTreeSet<(Move, StateId)>> = Vec::new();
    for s in sets.drain(..) {
        if !keep.iter().any(|k| k.is_subset(&s)) {
            keep.push(s);
        }
    }
    *sets = keep;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PebbleKind {
    Drop,
    Lift,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Transition {
    Pebble(PebbleKind, StateId),
    Branch(Pbf),
}

impl Transition {
    pub fn targets(&self) -> Vec<StateId> {
        match self {
            Transition::Pebble(_, q) => vec![*q],
            Transition::Branch(f) => f.atoms().into_iter().map(|(_, q)| q).collect(),
        }
    }
}

/// A transition that depends on the letter through a decision tree over
/// proposition bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Leaf(Transition),
    Test {
        prop: u32,
        yes: Box<Rule>,
        no: Box<Rule>,
    },
}

impl Rule {
    pub fn branch(f: Pbf) -> Rule {
        Rule::Leaf(Transition::Branch(f))
    }

    pub fn test(prop: u32, yes: Rule, no: Rule) -> Rule {
        if yes == no {
            yes
        } else {
            Rule::Test {
                prop,
                yes: Box::new(yes),
                no: Box::new(no),
            }
        }
    }

    pub fn lookup(&self, letter: u64) -> &Transition {
        let mut r = self;
        loop {
            match r {
                Rule::Leaf(t) => return t,
                Rule::Test { prop, yes, no } => r = if letter >> prop & 1 == 1 { yes } else { no },
            }
        }
    }

    /// All leaves with the guard (required props, forbidden props) leading to them.
    pub fn leaves(&self) -> Vec<(u64, u64, &Transition)> {
        let mut out = Vec::new();
        self.collect_leaves(0, 0, &mut out);
        out
    }

    fn collect_leaves<'a>(
        &'a self,
        has: u64,
        lacks: u64,
        out: &mut Vec<(u64, u64, &'a Transition)>,
    ) {
        match self {
            Rule::Leaf(t) => out.push((has, lacks, t)),
            Rule::Test { prop, yes, no } => {
                yes.collect_leaves(has | 1 << prop, lacks, out);
                no.collect_leaves(has, lacks | 1 << prop, out);
            }
        }
    }

    pub fn map_leaves(&self, f: &mut impl FnMut(&Transition) -> Transition) -> Rule {
        match self {
            Rule::Leaf(t) => Rule::Leaf(f(t)),
            Rule::Test { prop, yes, no } => Rule::test(*prop, yes.map_leaves(f), no.map_leaves(f)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Existential,
    Universal,
    Transient,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HesitantSet {
    pub states: Vec<StateId>,
    pub kind: SetKind,
    /// Topological rank: transitions only go to sets of strictly smaller rank
    /// (or stay in the same set).
    pub rank: u32,
}

#[derive(Clone, Debug)]
pub struct Automaton {
    pub names: Vec<String>,
    pub props: Vec<String>,
    pub symmetric: bool,
    /// Largest arity; nonsymmetric automata have D = {0, …, max_arity}.
    pub max_arity: usize,
    pub pebbles: usize,
    pub initial: StateId,
    /// `rules[q][slot][b]`: slot is the arity for nonsymmetric automata and
    /// always 0 for symmetric ones; b is the pebble flag.
    pub rules: Vec<Vec<[Rule; 2]>>,
    pub good: Vec<bool>,
    pub bad: Vec<bool>,
    pub sets: Vec<HesitantSet>,
    pub set_of: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("tree node {node} has arity {arity}, outside the automaton's arity set")]
    Arity { node: usize, arity: usize },
    #[error("proposition `{0}` of the automaton is missing from the tree")]
    MissingProp(String),
    #[error("automaton violates hesitance: {0}")]
    Invalid(String),
}

impl Automaton {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn rule(&self, q: StateId, arity: usize, b: bool) -> &Rule {
        let slot = if self.symmetric { 0 } else { arity };
        &self.rules[q as usize][slot][b as usize]
    }

    pub fn delta(&self, q: StateId, letter: u64, arity: usize, b: bool) -> &Transition {
        self.rule(q, arity, b).lookup(letter)
    }

    pub fn kind(&self, q: StateId) -> SetKind {
        self.sets[self.set_of[q as usize] as usize].kind
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| i as StateId)
    }

    /// Priority of a state in the membership game: universal sets reject
    /// when B is visited infinitely often, existential sets accept when G is.
    pub fn priority(&self, q: StateId) -> u8 {
        match self.kind(q) {
            SetKind::Universal => {
                if self.bad[q as usize] {
                    3
                } else {
                    2
                }
            }
            SetKind::Existential => {
                if self.good[q as usize] {
                    2
                } else {
                    1
                }
            }
            SetKind::Transient => 1,
        }
    }

    pub fn slots(&self) -> usize {
        if self.symmetric {
            1
        } else {
            self.max_arity + 1
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let name = |q: StateId| self.names[q as usize].clone();
        let states: Vec<_> = (0..self.len() as StateId)
            .map(|q| {
                let set = self.set_of[q as usize];
                json!({
                    "name": name(q),
                    "set": set,
                    "class": self.sets[set as usize].kind,
                    "rank": self.sets[set as usize].rank,
                    "good": self.good[q as usize],
                    "bad": self.bad[q as usize],
                })
            })
            .collect();
        let full_letters = self.props.len() <= 8;
        let mut transitions = Vec::new();
        for q in 0..self.len() as StateId {
            for slot in 0..self.slots() {
                for b in [false, true] {
                    let rule = &self.rules[q as usize][slot][b as usize];
                    let arity = if self.symmetric {
                        serde_json::Value::Null
                    } else {
                        json!(slot)
                    };
                    let render = |t: &Transition| match t {
                        Transition::Pebble(k, p) => json!({
                            "pebble": if *k == PebbleKind::Drop { "drop" } else { "lift" },
                            "to": name(*p),
                        }),
                        Transition::Branch(f) => {
                            json!(f.sexpr(&|s| self.names[s as usize].clone()))
                        }
                    };
                    let names_of = |mask: u64| -> Vec<String> {
                        (0..self.props.len())
                            .filter(|i| mask >> i & 1 == 1)
                            .map(|i| self.props[i].clone())
                            .collect()
                    };
                    if full_letters {
                        for letter in 0..(1u64 << self.props.len()) {
                            transitions.push(json!({
                                "state": name(q),
                                "letter": names_of(letter),
                                "arity": arity,
                                "pebble": b,
                                "transition": render(rule.lookup(letter)),
                            }));
                        }
                    } else {
                        for (has, lacks, t) in rule.leaves() {
                            transitions.push(json!({
                                "state": name(q),
                                "letter": {"has": names_of(has), "lacks": names_of(lacks)},
                                "arity": arity,
                                "pebble": b,
                                "transition": render(t),
                            }));
                        }
                    }
                }
            }
        }
        json!({
            "props": self.props,
            "symmetric": self.symmetric,
            "arities": if self.symmetric { serde_json::Value::Null } else { json!((0..=self.max_arity).collect::<Vec<_>>()) },
            "pebbles": self.pebbles,
            "initial": name(self.initial),
            "states": states,
            "transitions": transitions,
        })
    }
}

// ---------------------------------------------------------------------------
// Builder

/// Incremental construction keyed by arbitrary state descriptors.
pub struct Builder<K> {
    pub keys: Vec<K>,
    index: HashMap<K, StateId>,
    pub pending: Vec<StateId>,
}

impl<K: Clone + Eq + std::hash::Hash> Default for Builder<K> {
    fn default() -> Self {
        Builder {
            keys: Vec::new(),
            index: HashMap::new(),
            pending: Vec::new(),
        }
    }
}

impl<K: Clone + Eq + std::hash::Hash> Builder<K> {
    pub fn id(&mut self, key: K) -> StateId {
        if let Some(&q) = self.index.get(&key) {
            return q;
        }
        let q = self.keys.len() as StateId;
        self.keys.push(key.clone());
        self.index.insert(key, q);
        self.pending.push(q);
        q
    }

    pub fn get(&self, key: &K) -> Option<StateId> {
        self.index.get(key).copied()
    }

    pub fn next_pending(&mut self) -> Option<StateId> {
        self.pending.pop()
    }
}

/// Groups states into hesitant sets and ranks them topologically. `group`
/// gives, per state, a group key and kind; states sharing a key form a set.
pub fn build_partition(
    rules: &[Vec<[Rule; 2]>],
    group: &[(String, SetKind)],
) -> Result<(Vec<HesitantSet>, Vec<u32>), String> {
    let mut set_index: HashMap<&str, u32> = HashMap::new();
    let mut sets: Vec<HesitantSet> = Vec::new();
    let mut set_of = Vec::with_capacity(group.len());
    for (q, (key, kind)) in group.iter().enumerate() {
        let s = *set_index.entry(key.as_str()).or_insert_with(|| {
            sets.push(HesitantSet {
                states: vec![],
                kind: *kind,
                rank: 0,
            });
            (sets.len() - 1) as u32
        });
        sets[s as usize].states.push(q as StateId);
        set_of.push(s);
    }
    // set graph
    let m = sets.len();
    let mut succ: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); m];
    for (q, slots) in rules.iter().enumerate() {
        for pair in slots {
            for rule in pair {
                for (_, _, t) in rule.leaves() {
                    for p in t.targets() {
                        let (a, b) = (set_of[q], set_of[p as usize]);
                        if a != b {
                            succ[a as usize].insert(b);
                        }
                    }
                }
            }
        }
    }
    // rank = longest path to a sink; fails on cycles
    let mut rank: Vec<Option<u32>> = vec![None; m];
    let mut on_stack = vec![false; m];
    fn visit(
        s: usize,
        succ: &[BTreeSet<u32>],
        rank: &mut [Option<u32>],
        on_stack: &mut [bool],
    ) -> Result<u32, usize> {
        if let Some(r) = rank[s] {
            return Ok(r);
        }
        if on_stack[s] {
            return Err(s);
        }
        on_stack[s] = true;
        let mut r = 0;
        for &t in &succ[s] {
            r = r.max(visit(t as usize, succ, rank, on_stack)? + 1);
        }
        on_stack[s] = false;
        rank[s] = Some(r);
        Ok(r)
    }
    for s in 0..m {
        visit(s, &succ, &mut rank, &mut on_stack).map_err(|s| format!("cycle through set {s}"))?;
    }
    for (s, set) in sets.iter_mut().enumerate() {
        set.rank = rank[s].unwrap();
    }
    Ok((sets, set_of))
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub state: String,
    pub set: u32,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (state {}, set {}): {}",
            self.rule, self.state, self.set, self.detail
        )
    }
}

/// Checks the hesitance conditions and the transition restrictions.
pub fn validate_hesitant(a: &Automaton) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |q: StateId, rule: &'static str, detail: String| {
        out.push(Violation {
            state: a.names.get(q as usize).cloned().unwrap_or_default(),
            set: a.set_of.get(q as usize).copied().unwrap_or(u32::MAX),
            rule,
            detail,
        })
    };
    let n = a.len();
    if a.set_of.len() != n || a.rules.len() != n || a.good.len() != n || a.bad.len() != n {
        push(
            0,
            "partition-cover",
            "table sizes disagree with the state count".into(),
        );
        return out;
    }
    let mut covered = vec![0usize; n];
    for set in &a.sets {
        for &q in &set.states {
            covered[q as usize] += 1;
        }
    }
    for q in 0..n {
        if covered[q] != 1 {
            push(
                q as StateId,
                "partition-cover",
                format!("state occurs in {} sets", covered[q]),
            );
        }
    }
    for q in 0..n as StateId {
        let my_set = a.set_of[q as usize];
        let my = &a.sets[my_set as usize];
        if a.rules[q as usize].len() != a.slots() {
            push(q, "arity-table", "missing arity slots".into());
            continue;
        }
        for slot in 0..a.slots() {
            for b in [false, true] {
                for (_, _, t) in a.rules[q as usize][slot][b as usize].leaves() {
                    match t {
                        Transition::Pebble(kind, p) => {
                            if a.pebbles == 0 {
                                push(
                                    q,
                                    "pebble-without-pebbles",
                                    "pebble action with k = 0".into(),
                                );
                            }
                            if *kind == PebbleKind::Lift && !b {
                                push(
                                    q,
                                    "lift-without-pebble",
                                    "lift with pebble flag false".into(),
                                );
                            }
                            let ps = a.set_of[*p as usize];
                            if ps == my_set {
                                if my.kind == SetKind::Transient {
                                    push(
                                        q,
                                        "transient-self",
                                        format!("pebble action to {}", a.names[*p as usize]),
                                    );
                                }
                            } else if a.sets[ps as usize].rank >= my.rank {
                                push(q, "order", format!("pebble action to higher set {ps}"));
                            }
                        }
                        Transition::Branch(f) => {
                            for (m, p) in f.atoms() {
                                match m {
                                    Move::Parent if b => push(
                                        q,
                                        "parent-at-pebble",
                                        "(-1) move with pebble flag true".into(),
                                    ),
                                    Move::Child(c) if a.symmetric => {
                                        push(q, "child-in-symmetric", format!("child index {c}"))
                                    }
                                    Move::Child(c) if c == 0 || c as usize > slot => push(
                                        q,
                                        "child-beyond-arity",
                                        format!("child {c} at arity {slot}"),
                                    ),
                                    Move::SomeChild | Move::EveryChild if !a.symmetric => {
                                        push(q, "diamond-in-nonsymmetric", m.name())
                                    }
                                    _ => {}
                                }
                                let ps = a.set_of[p as usize];
                                if ps == my_set {
                                    match my.kind {
                                        SetKind::Transient => push(
                                            q,
                                            "transient-self",
                                            format!("atom ({}, {})", m.name(), a.names[p as usize]),
                                        ),
                                        SetKind::Existential
                                            if a.symmetric && m == Move::EveryChild =>
                                        {
                                            push(
                                                q,
                                                "symmetric-existential-box",
                                                format!("(every-child, {})", a.names[p as usize]),
                                            )
                                        }
                                        SetKind::Universal
                                            if a.symmetric && m == Move::SomeChild =>
                                        {
                                            push(
                                                q,
                                                "symmetric-universal-diamond",
                                                format!("(some-child, {})", a.names[p as usize]),
                                            )
                                        }
                                        _ => {}
                                    }
                                } else if a.sets[ps as usize].rank >= my.rank {
                                    push(
                                        q,
                                        "order",
                                        format!("atom to set {ps} not below set {my_set}"),
                                    );
                                }
                            }
                            let same = |m: Move, p: StateId| -> bool {
                                let _ = m;
                                a.set_of[p as usize] == my_set
                            };
                            match my.kind {
                                SetKind::Existential => {
                                    if mixes(f, true, &same) {
                                        push(
                                            q,
                                            "existential-conjunction",
                                            "same-set atoms conjunctively related".into(),
                                        );
                                    }
                                }
                                SetKind::Universal => {
                                    if mixes(f, false, &same) {
                                        push(
                                            q,
                                            "universal-disjunction",
                                            "same-set atoms disjunctively related".into(),
                                        );
                                    }
                                }
                                SetKind::Transient => {}
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// True if some And (`in_and`) or Or node has two children both containing
/// marked atoms.
fn mixes(f: &Pbf, in_and: bool, marked: &dyn Fn(Move, StateId) -> bool) -> bool {
    fn contains(f: &Pbf, marked: &dyn Fn(Move, StateId) -> bool) -> bool {
        match f {
            Pbf::Atom(m, q) => marked(*m, *q),
            Pbf::And(xs) | Pbf::Or(xs) => xs.iter().any(|x| contains(x, marked)),
            _ => false,
        }
    }
    match f {
        Pbf::And(xs) | Pbf::Or(xs) => {
            let node_matches = matches!(f, Pbf::And(_)) == in_and;
            if node_matches && xs.iter().filter(|x| contains(x, marked)).count() >= 2 {
                return true;
            }
            xs.iter().any(|x| mixes(x, in_and, marked))
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Membership on finite trees

/// Letter of every tree node over the automaton's propositions.
pub fn tree_letters(a: &Automaton, t: &FiniteTree) -> Result<Vec<u64>, AutomatonError> {
    let mut map = Vec::new();
    for p in &a.props {
        map.push(
            t.prop_index(p)
                .ok_or_else(|| AutomatonError::MissingProp(p.clone()))?,
        );
    }
    Ok(t.nodes
        .iter()
        .map(|n| {
            map.iter()
                .enumerate()
                .filter(|(_, &i)| n.label >> i & 1 == 1)
                .map(|(k, _)| 1u64 << k)
                .fold(0, |x, y| x | y)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Config {
    q: StateId,
    x: u32,
    pebbles: Vec<u32>,
}

/// Statistics of a membership game.
#[derive(Clone, Copy, Debug, Default)]
pub struct MembershipStats {
    pub configurations: usize,
    pub vertices: usize,
}

/// Membership game: Automaton (Even) resolves disjunctions and pebble
/// actions, Pathfinder (Odd) resolves conjunctions.
pub struct MembershipGame {
    pub game: Game,
    configs: HashMap<Config, u32>,
    /// Configurations (state, node, pebble positions) in creation order.
    pub config_list: Vec<(StateId, u32, Vec<u32>)>,
    /// Game vertex of each entry of `config_list`.
    pub config_vertex: Vec<u32>,
}

impl MembershipGame {
    pub fn build(a: &Automaton, t: &FiniteTree) -> Result<MembershipGame, AutomatonError> {
        let letters = tree_letters(a, t)?;
        if !a.symmetric {
            for x in 0..t.len() {
                if t.degree(x) > a.max_arity {
                    return Err(AutomatonError::Arity {
                        node: x,
                        arity: t.degree(x),
                    });
                }
            }
        }
        let mut g = MembershipGame {
            game: Game::default(),
            configs: HashMap::new(),
            config_list: Vec::new(),
            config_vertex: Vec::new(),
        };
        let mut work: Vec<(u32, Config)> = Vec::new();
        let root = Config {
            q: a.initial,
            x: 0,
            pebbles: vec![],
        };
        g.config_vertex(a, root, &mut work);
        let tt = g.game.add_vertex(Player::Odd, 0);
        let ff = g.game.add_vertex(Player::Even, 0);
        while let Some((v, c)) = work.pop() {
            let x = c.x as usize;
            let b = c.pebbles.last() == Some(&c.x);
            match a.delta(c.q, letters[x], t.degree(x), b) {
                Transition::Pebble(PebbleKind::Drop, p) => {
                    if c.pebbles.len() >= a.pebbles {
                        g.game.add_edge(v, ff);
                    } else {
                        let mut peb = c.pebbles.clone();
                        peb.push(c.x);
                        let w = g.config_vertex(
                            a,
                            Config {
                                q: *p,
                                x: c.x,
                                pebbles: peb,
                            },
                            &mut work,
                        );
                        g.game.add_edge(v, w);
                    }
                }
                Transition::Pebble(PebbleKind::Lift, p) => {
                    if b {
                        let mut peb = c.pebbles.clone();
                        peb.pop();
                        let w = g.config_vertex(
                            a,
                            Config {
                                q: *p,
                                x: c.x,
                                pebbles: peb,
                            },
                            &mut work,
                        );
                        g.game.add_edge(v, w);
                    } else {
                        g.game.add_edge(v, ff);
                    }
                }
                Transition::Branch(f) => {
                    let f = f.clone();
                    let w = g.formula_vertex(a, t, &c, b, &f, tt, ff, &mut work);
                    g.game.add_edge(v, w);
                }
            }
        }
        Ok(g)
    }

    fn config_vertex(&mut self, a: &Automaton, c: Config, work: &mut Vec<(u32, Config)>) -> u32 {
        if let Some(&v) = self.configs.get(&c) {
            return v;
        }
        // config vertices have a single successor; the owner is irrelevant
        let v = self.game.add_vertex(Player::Even, a.priority(c.q));
        self.configs.insert(c.clone(), v);
        self.config_list.push((c.q, c.x, c.pebbles.clone()));
        self.config_vertex.push(v);
        work.push((v, c));
        v
    }

    #[allow(clippy::too_many_arguments)]
    fn formula_vertex(
        &mut self,
        a: &Automaton,
        t: &FiniteTree,
        c: &Config,
        b: bool,
        f: &Pbf,
        tt: u32,
        ff: u32,
        work: &mut Vec<(u32, Config)>,
    ) -> u32 {
        let x = c.x as usize;
        match f {
            Pbf::True => tt,
            Pbf::False => ff,
            Pbf::And(xs) | Pbf::Or(xs) => {
                let owner = if matches!(f, Pbf::And(_)) {
                    Player::Odd
                } else {
                    Player::Even
                };
                let v = self.game.add_vertex(owner, 0);
                for sub in xs {
                    let w = self.formula_vertex(a, t, c, b, sub, tt, ff, work);
                    self.game.add_edge(v, w);
                }
                v
            }
            Pbf::Atom(m, p) => {
                let go = |this: &mut Self, y: usize, work: &mut Vec<(u32, Config)>| {
                    this.config_vertex(
                        a,
                        Config {
                            q: *p,
                            x: y as u32,
                            pebbles: c.pebbles.clone(),
                        },
                        work,
                    )
                };
                let children = &t.nodes[x].children;
                match m {
                    Move::Stay => go(self, x, work),
                    Move::Root => {
                        if x == 0 {
                            go(self, x, work)
                        } else {
                            ff
                        }
                    }
                    Move::Parent => match t.nodes[x].parent {
                        Some(y) if !b => go(self, y, work),
                        _ => ff,
                    },
                    Move::Child(k) => match children.get((*k as usize).wrapping_sub(1)) {
                        Some(&y) => go(self, y, work),
                        None => ff,
                    },
                    Move::SomeChild | Move::EveryChild => {
                        if children.is_empty() {
                            return if *m == Move::SomeChild { ff } else { tt };
                        }
                        let owner = if *m == Move::SomeChild {
                            Player::Even
                        } else {
                            Player::Odd
                        };
                        let v = self.game.add_vertex(owner, 0);
                        for &y in children.clone().iter() {
                            let w = go(self, y, work);
                            self.game.add_edge(v, w);
                        }
                        v
                    }
                }
            }
        }
    }

    pub fn stats(&self) -> MembershipStats {
        MembershipStats {
            configurations: self.configs.len(),
            vertices: self.game.len(),
        }
    }
}

/// Whether `a` has an accepting run on `t`.
pub fn membership_finite(a: &Automaton, t: &FiniteTree) -> Result<bool, AutomatonError> {
    let g = MembershipGame::build(a, t)?;
    let (w, _) = parity::solve(&g.game);
    Ok(w[0] == Player::Even)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satisfying_set_examples() {
        let (a, b, c) = (
            Pbf::atom(Move::Stay, 0),
            Pbf::atom(Move::Stay, 1),
            Pbf::atom(Move::Stay, 2),
        );
        let f = Pbf::and2(a, Pbf::or2(b, c));
        assert_eq!(
            satisfying_sets(&f),
            vec![
                vec![(Move::Stay, 0), (Move::Stay, 1)],
                vec![(Move::Stay, 0), (Move::Stay, 2)]
            ]
        );
        assert_eq!(
            satisfying_sets(&Pbf::True),
            vec![Vec::<(Move, StateId)>::new()]
        );
        assert!(satisfying_sets(&Pbf::False).is_empty());
        let g = Pbf::or2(
            Pbf::atom(Move::Stay, 0),
            Pbf::and2(Pbf::atom(Move::Stay, 0), Pbf::atom(Move::Stay, 1)),
        );
        assert_eq!(satisfying_sets(&g), vec![vec![(Move::Stay, 0)]]);
    }

    fn two_state(kind: SetKind, f: Pbf) -> Automaton {
        Automaton {
            names: vec!["q0".into(), "q1".into()],
            props: vec![],
            symmetric: true,
            max_arity: 0,
            pebbles: 0,
            initial: 0,
            rules: vec![
                vec![[Rule::branch(f.clone()), Rule::branch(f)]],
                vec![[Rule::branch(Pbf::True), Rule::branch(Pbf::True)]],
            ],
            good: vec![false, false],
            bad: vec![false, false],
            sets: vec![
                HesitantSet {
                    states: vec![0],
                    kind,
                    rank: 1,
                },
                HesitantSet {
                    states: vec![1],
                    kind: SetKind::Transient,
                    rank: 0,
                },
            ],
            set_of: vec![0, 1],
        }
    }

    #[test]
    fn detects_box_in_existential_set() {
        let a = two_state(SetKind::Existential, Pbf::atom(Move::EveryChild, 0));
        let v = validate_hesitant(&a);
        assert!(
            v.iter().any(|v| v.rule == "symmetric-existential-box"),
            "{v:?}"
        );
    }

    #[test]
    fn detects_transient_self_loop() {
        let a = two_state(
            SetKind::Transient,
            Pbf::or2(Pbf::atom(Move::SomeChild, 0), Pbf::atom(Move::Stay, 1)),
        );
        let v = validate_hesitant(&a);
        assert!(v.iter().any(|v| v.rule == "transient-self"), "{v:?}");
    }

    #[test]
    fn universal_loop_without_bad_states_accepts() {
        // q0 = (stay, q0): an infinite play trapped in a universal set
        let a = two_state(SetKind::Universal, Pbf::atom(Move::Stay, 0));
        let t = FiniteTree::new(vec![], 0);
        assert!(validate_hesitant(&a).is_empty());
        assert!(membership_finite(&a, &t).unwrap());
        let mut e = two_state(SetKind::Existential, Pbf::atom(Move::Stay, 0));
        assert!(!membership_finite(&e, &t).unwrap());
        e.good[0] = true;
        assert!(membership_finite(&e, &t).unwrap());
    }
}
