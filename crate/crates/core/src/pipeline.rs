//! Emptiness of hesitant automata: debranching to bounded arity, the
//! tuple-state Rabin automaton, its emptiness game and witness extraction.
//!
//! Two sources feed the lazily explored Rabin automaton:
//!
//! * for one-way automata without pebbles every successor is generated
//!   from the satisfying sets of the source automaton, so the exploration
//!   is exhaustive and can prove emptiness (up to the arity cap);
//! * for two-way or pebble automata the tuple states are read off accepting
//!   runs on candidate finite trees. This direction only ever proves
//!   nonemptiness.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::Instant;

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::automaton::{
    satisfying_sets, Automaton, AutomatonError, MembershipGame, Move, Pbf, Rule, SetKind,
    StateId, Transition,
};
use crate::compile::{
    canonical_aux_labeling, compile_pectl_keys, compile_pectlplusn_keys, CompileError,
};
use crate::formula::{classify, StateFormula};
use crate::normalform::{normalize, Definition};
use crate::parity::{solve, solve_with_strategy, Game, Player};
use crate::tree_model::{
    check_regular, enumerate_over, evaluate_state, unfold, FiniteTree, KripkeModel, ModelError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ---------------------------------------------------------------------------
// Branching

/// `2^(n²(k+1))`: arity sufficient for a symmetric automaton with `n`
/// states and `k` pebbles.
pub fn branching_bound(a: &Automaton) -> BigUint {
    branching_bound_for(a.len(), a.pebbles)
}

pub fn branching_bound_for(n: usize, k: usize) -> BigUint {
    BigUint::from(1u8) << (n * n * (k + 1))
}

/// Nonsymmetric automaton over arities `0..=d_max`: `(◇,p)` becomes the
/// disjunction of `(c,p)` over the children and `(□,p)` their conjunction.
pub fn debranch(a: &Automaton, d_max: usize) -> Automaton {
    assert!(d_max >= 1, "d_max must be positive");
    if !a.symmetric {
        return a.clone();
    }
    let expand = |f: &Pbf, d: usize| {
        f.map_atoms(&mut |m, p| match m {
            Move::SomeChild => Pbf::or((1..=d as u32).map(|c| Pbf::atom(Move::Child(c), p))),
            Move::EveryChild => Pbf::and((1..=d as u32).map(|c| Pbf::atom(Move::Child(c), p))),
            m => Pbf::atom(m, p),
        })
    };
    let expand_rule = |r: &Rule, d: usize| {
        r.map_leaves(&mut |t| match t {
            Transition::Branch(f) => Transition::Branch(expand(f, d)),
            other => other.clone(),
        })
    };
    let rules = a
        .rules
        .iter()
        .map(|slots| {
            let [r0, r1] = &slots[0];
            (0..=d_max)
                .map(|d| [expand_rule(r0, d), expand_rule(r1, d)])
                .collect()
        })
        .collect();
    Automaton {
        rules,
        symmetric: false,
        max_arity: d_max,
        ..a.clone()
    }
}

/// True if no transition moves upward, tests the root or uses a pebble.
pub fn is_one_way(a: &Automaton) -> bool {
    a.rules.iter().flatten().flatten().all(|r| {
        r.leaves().iter().all(|(_, _, t)| match t {
            Transition::Pebble(..) => false,
            Transition::Branch(f) => f
                .atoms()
                .iter()
                .all(|(m, _)| !matches!(m, Move::Parent | Move::Root)),
        })
    })
}

// ---------------------------------------------------------------------------
// Tuple states

pub type Pair = (StateId, StateId);

/// Behaviour of the source automaton at one node for one pebble placement.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Tuple {
    /// States visited here.
    pub s: BTreeSet<StateId>,
    /// States sent to the parent.
    pub us: BTreeSet<StateId>,
    /// States received from the parent.
    pub ds: BTreeSet<StateId>,
    /// Pending requests for unbounded paths.
    pub rs: BTreeSet<StateId>,
    /// Upward paths: leave to the parent in `p`, come back in `q`.
    pub up: BTreeSet<Pair>,
    /// Downward paths: start here in `p`, leave to the parent in `q`.
    pub dp: BTreeSet<Pair>,
    pub aup: BTreeSet<Pair>,
    pub adp: BTreeSet<Pair>,
    /// Pending requests on downward paths.
    pub rdp: BTreeSet<Pair>,
    /// Paths from `p` here until the last pebble is lifted in `q`.
    pub c: BTreeSet<Pair>,
    pub ac: BTreeSet<Pair>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Entry {
    pub tuple: Tuple,
    /// For a placement whose last pebble lies on this node, the entry of
    /// the placement without it (index into the previous level).
    pub link: Option<u32>,
}

/// State of the Rabin automaton: one level of entries per pebble count and
/// the root flag.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TupleState {
    pub levels: Vec<Vec<Entry>>,
    pub root: bool,
}

/// Per-state facts about the hesitant partition used by the acceptance
/// bookkeeping.
#[derive(Clone, Debug)]
pub struct SetInfo {
    pub good: Vec<bool>,
    pub bad: Vec<bool>,
    pub set_of: Vec<u32>,
    pub kind: Vec<SetKind>,
    /// Requests are tracked for non-good existential states and for
    /// universal sets consisting of bad states only.
    pub tracked: Vec<bool>,
    /// Bad states of universal sets that also contain other states.
    pub mixed_bad: Vec<bool>,
}

impl SetInfo {
    pub fn new(a: &Automaton) -> SetInfo {
        let n = a.len();
        let mut tracked = vec![false; n];
        let mut mixed_bad = vec![false; n];
        for set in &a.sets {
            let all_bad = set.states.iter().all(|&q| a.bad[q as usize]);
            for &q in &set.states {
                let q = q as usize;
                match set.kind {
                    SetKind::Existential => tracked[q] = !a.good[q],
                    SetKind::Universal if all_bad => tracked[q] = true,
                    SetKind::Universal => mixed_bad[q] = a.bad[q],
                    SetKind::Transient => {}
                }
            }
        }
        SetInfo {
            good: a.good.clone(),
            bad: a.bad.clone(),
            set_of: a.set_of.clone(),
            kind: (0..n as StateId).map(|q| a.kind(q)).collect(),
            tracked,
            mixed_bad,
        }
    }

    fn same_set(&self, p: StateId, q: StateId) -> bool {
        self.set_of[p as usize] == self.set_of[q as usize]
    }
}

impl TupleState {
    fn single(t: Tuple, k: usize, root: bool) -> TupleState {
        let mut levels = vec![vec![Entry { tuple: t, link: None }]];
        levels.resize(k + 1, Vec::new());
        TupleState { levels, root }
    }

    pub fn entries(&self) -> impl Iterator<Item = &Entry> {
        self.levels.iter().flatten()
    }

    /// G: every request set is empty.
    pub fn is_good(&self) -> bool {
        self.entries()
            .all(|e| e.tuple.rs.is_empty() && e.tuple.rdp.is_empty())
    }

    /// B: a bad state of a mixed universal set is visited, or a downward
    /// path inside a universal set meets a bad state.
    pub fn is_bad(&self, info: &SetInfo) -> bool {
        self.entries().any(|e| {
            e.tuple.s.iter().any(|&q| info.mixed_bad[q as usize])
                || e
                    .tuple
                    .adp
                    .iter()
                    .any(|&(p, _)| info.kind[p as usize] == SetKind::Universal)
        })
    }

    /// State-space invariants; empty when all hold.
    pub fn violations(&self, pebbles: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.levels.len() != pebbles + 1 {
            out.push(format!("{} levels for {} pebbles", self.levels.len(), pebbles));
        }
        match self.levels.first() {
            Some(l0) if l0.len() == 1 => {
                let t = &l0[0].tuple;
                if !t.c.is_empty() || !t.ac.is_empty() || l0[0].link.is_some() {
                    out.push("level 0 tuple has lift pairs or a link".into());
                }
            }
            _ => out.push("level 0 must hold exactly one tuple".into()),
        }
        for (i, level) in self.levels.iter().enumerate() {
            for (n, e) in level.iter().enumerate() {
                let t = &e.tuple;
                let at = format!("level {i} entry {n}");
                if !t.ds.is_subset(&t.s) {
                    out.push(format!("{at}: dS not within S"));
                }
                if !t.rs.is_subset(&t.s) {
                    out.push(format!("{at}: rS not within S"));
                }
                if !t.aup.is_subset(&t.up) {
                    out.push(format!("{at}: auP not within uP"));
                }
                if !t.adp.is_subset(&t.dp) {
                    out.push(format!("{at}: adP not within dP"));
                }
                if !t.rdp.is_subset(&t.dp) {
                    out.push(format!("{at}: rdP not within dP"));
                }
                if !t.ac.is_subset(&t.c) {
                    out.push(format!("{at}: aC not within C"));
                }
                if !t.c.is_empty() && e.link.is_none() {
                    out.push(format!("{at}: lift pairs without a pebble here"));
                }
                if let Some(l) = e.link {
                    if i == 0 || l as usize >= self.levels[i - 1].len() {
                        out.push(format!("{at}: dangling link"));
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Rabin automata and their emptiness game

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NraMove<S> {
    pub letter: u64,
    pub children: Vec<S>,
}

/// A nondeterministic Rabin tree automaton with one pair ⟨G, B⟩, explored
/// on demand. A move with no children is a leaf (arity 0).
pub trait RabinAutomaton {
    fn props(&self) -> &[String];
    fn initial(&mut self) -> Vec<TupleState>;
    fn successors(&mut self, s: &TupleState) -> Vec<NraMove<TupleState>>;
    fn is_good(&self, s: &TupleState) -> bool;
    fn is_bad(&self, s: &TupleState) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Nonempty,
    Empty,
    Unknown,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Stats {
    pub states: usize,
    pub moves: usize,
    pub game_positions: usize,
    pub solver_calls: usize,
    pub generator: String,
    pub automaton_states: usize,
    pub pebbles: usize,
    pub millis: u128,
    pub invariant_violations: usize,
    /// Trees whose runs were abstracted (run-based generator only).
    pub sampled_trees: usize,
}

/// How a witness was re-checked against the input formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessCheck {
    /// Exact evaluation on the witness (finite unfolding or regular model).
    Exact,
    /// Evaluation on a bounded unfolding only.
    Bounded,
    /// The bounded unfolding does not satisfy the formula, which may be an
    /// artifact of the truncation.
    Inconclusive,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmptinessResult {
    pub verdict: Verdict,
    #[serde(skip)]
    pub witness: Option<KripkeModel>,
    pub witness_check: Option<WitnessCheck>,
    pub stats: Stats,
    pub scope: String,
    #[serde(skip)]
    pub visited: Vec<TupleState>,
}

/// Solves the emptiness game of `b`, exploring at most `state_cap` states.
/// Automaton picks a state and a move, Pathfinder a child; priorities are
/// 3 on B, 2 on G and 1 elsewhere.
pub fn rabin_emptiness(b: &mut dyn RabinAutomaton, state_cap: usize) -> EmptinessResult {
    assert!(state_cap >= 1);
    let start = Instant::now();
    let mut game = Game::default();
    let mut index: HashMap<TupleState, u32> = HashMap::new();
    let mut states: Vec<TupleState> = Vec::new();
    let mut vertex_of: Vec<u32> = Vec::new();
    let mut moves_of: Vec<Vec<(u32, u64, Vec<usize>)>> = Vec::new();
    let init_vertex = game.add_vertex(Player::Even, 0);
    let mut queue = VecDeque::new();
    let mut moves = 0;
    let mut add = |s: TupleState,
                   game: &mut Game,
                   states: &mut Vec<TupleState>,
                   vertex_of: &mut Vec<u32>,
                   moves_of: &mut Vec<Vec<(u32, u64, Vec<usize>)>>,
                   queue: &mut VecDeque<usize>,
                   b: &dyn RabinAutomaton|
     -> usize {
        if let Some(&i) = index.get(&s) {
            return i as usize;
        }
        let prio = if b.is_bad(&s) {
            3
        } else if b.is_good(&s) {
            2
        } else {
            1
        };
        let v = game.add_vertex(Player::Even, prio);
        let i = states.len();
        index.insert(s.clone(), i as u32);
        states.push(s);
        vertex_of.push(v);
        moves_of.push(Vec::new());
        queue.push_back(i);
        i
    };
    for s in b.initial() {
        let i = add(s, &mut game, &mut states, &mut vertex_of, &mut moves_of, &mut queue, b);
        game.add_edge(init_vertex, vertex_of[i]);
    }
    let mut capped = false;
    while let Some(i) = queue.pop_front() {
        if states.len() > state_cap {
            capped = true;
            break;
        }
        let succ = b.successors(&states[i].clone());
        for m in succ {
            moves += 1;
            let mv = game.add_vertex(Player::Odd, 0);
            game.add_edge(vertex_of[i], mv);
            let mut kids = Vec::with_capacity(m.children.len());
            for c in m.children {
                let j = add(c, &mut game, &mut states, &mut vertex_of, &mut moves_of, &mut queue, b);
                game.add_edge(mv, vertex_of[j]);
                kids.push(j);
            }
            moves_of[i].push((mv, m.letter, kids));
        }
    }
    let mut stats = Stats {
        states: states.len(),
        moves,
        game_positions: game.len(),
        ..Stats::default()
    };
    if capped {
        stats.millis = start.elapsed().as_millis();
        return EmptinessResult {
            verdict: Verdict::Unknown,
            witness: None,
            witness_check: None,
            stats,
            scope: format!("state cap {state_cap} exceeded"),
            visited: states,
        };
    }
    let (win, strategy, solve) = solve_with_strategy(&game);
    stats.solver_calls = solve.recursive_calls;
    stats.millis = start.elapsed().as_millis();
    if win[init_vertex as usize] != Player::Even {
        return EmptinessResult {
            verdict: Verdict::Empty,
            witness: None,
            witness_check: None,
            stats,
            scope: String::new(),
            visited: states,
        };
    }
    let strategy = shrink_strategy(&game, &win, strategy, init_vertex);
    // read the strategy off as a Kripke model, one state per NRA state
    let state_of_vertex: HashMap<u32, usize> =
        vertex_of.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let first = state_of_vertex[&strategy[init_vertex as usize].expect("winning choice")];
    let mut wid: HashMap<usize, usize> = HashMap::new();
    let mut order = vec![first];
    wid.insert(first, 0);
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    let mut n = 0;
    while n < order.len() {
        let i = order[n];
        let mv = strategy[vertex_of[i] as usize].expect("winning state has a move");
        let (_, letter, kids) = moves_of[i]
            .iter()
            .find(|(v, _, _)| *v == mv)
            .expect("strategy picks a listed move");
        labels.push(*letter);
        let mut out = Vec::new();
        for &k in kids {
            let next = wid.len();
            let w = *wid.entry(k).or_insert_with(|| {
                order.push(k);
                next
            });
            out.push(w);
        }
        edges.push(out);
        n += 1;
    }
    EmptinessResult {
        verdict: Verdict::Nonempty,
        witness: Some(KripkeModel {
            props: b.props().to_vec(),
            labels,
            edges,
            initial: 0,
        }),
        witness_check: None,
        stats,
        scope: String::new(),
        visited: states,
    }
}

/// Whether Even wins from `init` when bound to `strategy`.
fn strategy_wins(game: &Game, strategy: &[Option<u32>], init: u32) -> bool {
    let mut map: HashMap<u32, u32> = HashMap::new();
    let mut sub = Game::default();
    let mut order = vec![init];
    map.insert(init, sub.add_vertex(game.owner[init as usize], game.priority[init as usize]));
    let mut n = 0;
    while n < order.len() {
        let v = order[n];
        n += 1;
        let nexts: Vec<u32> = match game.owner[v as usize] {
            Player::Even => strategy[v as usize].into_iter().collect(),
            Player::Odd => game.succ[v as usize].clone(),
        };
        for w in nexts {
            let sw = match map.get(&w) {
                Some(&sw) => sw,
                None => {
                    let sw = sub.add_vertex(game.owner[w as usize], game.priority[w as usize]);
                    map.insert(w, sw);
                    order.push(w);
                    sw
                }
            };
            sub.add_edge(map[&v], sw);
        }
    }
    solve(&sub).0[0] == Player::Even
}

/// Greedily switches reached state vertices to moves with fewer children
/// as long as the strategy stays winning, so witnesses stay small.
fn shrink_strategy(game: &Game, win: &[Player], mut strategy: Vec<Option<u32>>, init: u32) -> Vec<Option<u32>> {
    const BUDGET: usize = 200;
    let mut tried = 0;
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([init]);
    while let Some(v) = queue.pop_front() {
        if !seen.insert(v) {
            continue;
        }
        if game.owner[v as usize] == Player::Even && v != init && tried < BUDGET {
            let current = strategy[v as usize];
            let width = |m: u32| game.succ[m as usize].len();
            let mut options: Vec<u32> = game.succ[v as usize]
                .iter()
                .copied()
                .filter(|&m| win[m as usize] == Player::Even && Some(m) != current)
                .filter(|&m| current.is_some_and(|c| width(m) < width(c)))
                .collect();
            options.sort_by_key(|&m| width(m));
            for m in options {
                tried += 1;
                strategy[v as usize] = Some(m);
                if strategy_wins(game, &strategy, init) {
                    break;
                }
                strategy[v as usize] = current;
                if tried >= BUDGET {
                    break;
                }
            }
        }
        let nexts: Vec<u32> = match game.owner[v as usize] {
            Player::Even => strategy[v as usize].into_iter().collect(),
            Player::Odd => game.succ[v as usize].clone(),
        };
        queue.extend(nexts);
    }
    strategy
}

/// A Rabin automaton given by an explicit finite transition table.
#[derive(Clone, Debug, Default)]
pub struct ExplicitNra {
    pub props: Vec<String>,
    pub states: Vec<TupleState>,
    pub initial: Vec<usize>,
    pub moves: Vec<Vec<NraMove<usize>>>,
    pub good: Vec<bool>,
    pub bad: Vec<bool>,
    index: HashMap<TupleState, usize>,
}

impl ExplicitNra {
    pub fn new(props: Vec<String>) -> ExplicitNra {
        ExplicitNra {
            props,
            ..ExplicitNra::default()
        }
    }

    pub fn add_state(&mut self, s: TupleState, good: bool, bad: bool) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        let i = self.states.len();
        self.index.insert(s.clone(), i);
        self.states.push(s);
        self.moves.push(Vec::new());
        self.good.push(good);
        self.bad.push(bad);
        i
    }

    pub fn add_move(&mut self, from: usize, m: NraMove<usize>) {
        if !self.moves[from].contains(&m) {
            self.moves[from].push(m);
        }
    }

    fn id(&self, s: &TupleState) -> usize {
        self.index[s]
    }
}

impl RabinAutomaton for ExplicitNra {
    fn props(&self) -> &[String] {
        &self.props
    }

    fn initial(&mut self) -> Vec<TupleState> {
        self.initial.iter().map(|&i| self.states[i].clone()).collect()
    }

    fn successors(&mut self, s: &TupleState) -> Vec<NraMove<TupleState>> {
        let i = self.id(s);
        self.moves[i]
            .iter()
            .map(|m| NraMove {
                letter: m.letter,
                children: m.children.iter().map(|&c| self.states[c].clone()).collect(),
            })
            .collect()
    }

    fn is_good(&self, s: &TupleState) -> bool {
        self.good[self.id(s)]
    }

    fn is_bad(&self, s: &TupleState) -> bool {
        self.bad[self.id(s)]
    }
}

// ---------------------------------------------------------------------------
// Exhaustive generator for one-way automata without pebbles

type Choice = BTreeMap<StateId, Vec<(Move, StateId)>>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct EntryKey {
    ds: BTreeSet<StateId>,
    /// `None`: requests are reinitialized at this node.
    rs: Option<BTreeSet<StateId>>,
    root: bool,
}

/// The tuple-state automaton of a one-way automaton without pebbles.
/// States carry `S`, `dS`, `rS` and the root flag; the remaining components
/// are empty for such automata.
pub struct OneWayNra<'a> {
    a: &'a Automaton,
    info: SetInfo,
    letters: u64,
    sat_cache: HashMap<(StateId, u64, usize), Vec<Vec<(Move, StateId)>>>,
    /// Per entry: reachable full states.
    entries: HashMap<EntryKey, Vec<TupleState>>,
    /// Per full state: the (letter, arity, choice) triples realizing it.
    choices: HashMap<TupleState, Vec<(u64, usize, Choice)>>,
    /// Largest number of successor vectors of a single state.
    pub widest: usize,
}

impl<'a> OneWayNra<'a> {
    pub fn new(a: &'a Automaton) -> OneWayNra<'a> {
        assert!(!a.symmetric, "debranch first");
        assert!(is_one_way(a), "automaton moves upward or uses pebbles");
        OneWayNra {
            a,
            info: SetInfo::new(a),
            letters: 1 << a.props.len(),
            sat_cache: HashMap::new(),
            entries: HashMap::new(),
            choices: HashMap::new(),
            widest: 0,
        }
    }

    fn sat(&mut self, q: StateId, letter: u64, d: usize) -> Vec<Vec<(Move, StateId)>> {
        let a = self.a;
        self.sat_cache
            .entry((q, letter, d))
            .or_insert_with(|| match a.delta(q, letter, d, false) {
                Transition::Branch(f) => satisfying_sets(f),
                Transition::Pebble(..) => Vec::new(),
            })
            .clone()
    }

    /// All stay-closed choices starting from `ds`.
    fn closures(&mut self, letter: u64, d: usize, ds: &BTreeSet<StateId>) -> Vec<(BTreeSet<StateId>, Choice)> {
        let mut out = Vec::new();
        let mut stack = vec![(ds.clone(), Choice::new())];
        while let Some((s, y)) = stack.pop() {
            let Some(&q) = s.iter().find(|q| !y.contains_key(q)) else {
                if self.loops_ok(&s, &y) {
                    out.push((s, y));
                }
                continue;
            };
            for set in self.sat(q, letter, d) {
                let mut s2 = s.clone();
                for &(m, p) in &set {
                    if m == Move::Stay {
                        s2.insert(p);
                    }
                }
                let mut y2 = y.clone();
                y2.insert(q, set);
                stack.push((s2, y2));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Cycles through stay moves: existential ones need a good state,
    /// universal ones must avoid bad states.
    fn loops_ok(&self, s: &BTreeSet<StateId>, y: &Choice) -> bool {
        let info = &self.info;
        for &q in s {
            let check = match info.kind[q as usize] {
                SetKind::Existential => !info.good[q as usize],
                SetKind::Universal => info.bad[q as usize],
                SetKind::Transient => false,
            };
            if !check {
                continue;
            }
            let allowed = |p: StateId| {
                info.same_set(p, q)
                    && (info.kind[q as usize] != SetKind::Existential || !info.good[p as usize])
            };
            let mut seen = BTreeSet::new();
            let mut stack = vec![q];
            while let Some(u) = stack.pop() {
                for &(m, p) in &y[&u] {
                    if m != Move::Stay || !allowed(p) {
                        continue;
                    }
                    if p == q {
                        return false;
                    }
                    if seen.insert(p) {
                        stack.push(p);
                    }
                }
            }
        }
        true
    }

    fn full_state(s: &BTreeSet<StateId>, key: &EntryKey, info: &SetInfo) -> TupleState {
        let rs = match &key.rs {
            None => s.iter().copied().filter(|&q| !info.good[q as usize]).collect(),
            Some(r) => r.clone(),
        };
        TupleState::single(
            Tuple {
                s: s.clone(),
                ds: key.ds.clone(),
                rs,
                ..Tuple::default()
            },
            0,
            key.root,
        )
    }

    fn entry_options(&mut self, key: &EntryKey) -> Vec<TupleState> {
        if let Some(v) = self.entries.get(key) {
            return v.clone();
        }
        let mut found: BTreeMap<TupleState, Vec<(u64, usize, Choice)>> = BTreeMap::new();
        for letter in 0..self.letters {
            for d in 0..=self.a.max_arity {
                for (s, y) in self.closures(letter, d, &key.ds) {
                    let full = Self::full_state(&s, key, &self.info);
                    found.entry(full).or_default().push((letter, d, y));
                }
            }
        }
        let states: Vec<TupleState> = found.keys().cloned().collect();
        for (st, ch) in found {
            self.choices.entry(st).or_insert(ch);
        }
        self.entries.insert(key.clone(), states.clone());
        states
    }

    /// Entry of child `j` (1-based) under the given choice.
    fn child_entry(&self, full: &TupleState, y: &Choice, j: u32) -> EntryKey {
        let t = &full.levels[0][0].tuple;
        let info = &self.info;
        let ds: BTreeSet<StateId> = y
            .values()
            .flatten()
            .filter(|(m, _)| *m == Move::Child(j))
            .map(|&(_, p)| p)
            .collect();
        let rs = if t.rs.is_empty() {
            None
        } else {
            let mut out = BTreeSet::new();
            for &p in &t.rs {
                if !info.tracked[p as usize] {
                    continue;
                }
                let mut seen = BTreeSet::from([p]);
                let mut stack = vec![p];
                while let Some(u) = stack.pop() {
                    for &(m, q) in &y[&u] {
                        if !info.same_set(p, q) || info.good[q as usize] {
                            continue;
                        }
                        match m {
                            Move::Stay => {
                                if seen.insert(q) {
                                    stack.push(q);
                                }
                            }
                            Move::Child(c) if c == j => {
                                out.insert(q);
                            }
                            _ => {}
                        }
                    }
                }
            }
            Some(out)
        };
        EntryKey { ds, rs, root: false }
    }
}

impl RabinAutomaton for OneWayNra<'_> {
    fn props(&self) -> &[String] {
        &self.a.props
    }

    fn initial(&mut self) -> Vec<TupleState> {
        let key = EntryKey {
            ds: BTreeSet::from([self.a.initial]),
            rs: None,
            root: true,
        };
        self.entry_options(&key)
    }

    fn successors(&mut self, s: &TupleState) -> Vec<NraMove<TupleState>> {
        let choices = self.choices.get(s).cloned().unwrap_or_default();
        let mut out = Vec::new();
        for (letter, d, y) in choices {
            let mut options: Vec<Vec<TupleState>> = Vec::with_capacity(d);
            for j in 1..=d as u32 {
                let key = self.child_entry(s, &y, j);
                options.push(self.entry_options(&key));
            }
            // every combination of child states
            let mut combos: Vec<Vec<TupleState>> = vec![Vec::new()];
            for opts in &options {
                let mut next = Vec::with_capacity(combos.len() * opts.len());
                for c in &combos {
                    for o in opts {
                        let mut v = c.clone();
                        v.push(o.clone());
                        next.push(v);
                    }
                }
                combos = next;
            }
            for children in combos {
                let m = NraMove { letter, children };
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        self.widest = self.widest.max(out.len());
        out
    }

    fn is_good(&self, s: &TupleState) -> bool {
        s.is_good()
    }

    fn is_bad(&self, s: &TupleState) -> bool {
        s.is_bad(&self.info)
    }
}

// ---------------------------------------------------------------------------
// Tuple states read off accepting runs

type Placement = Vec<u32>;

/// The configurations and moves of a memoryless accepting run.
pub struct Run {
    pub configs: Vec<(StateId, u32, Placement)>,
    pub succ: Vec<Vec<usize>>,
    pub pred: Vec<Vec<usize>>,
    index: HashMap<(StateId, u32, Placement), usize>,
}

impl Run {
    fn q(&self, c: usize) -> StateId {
        self.configs[c].0
    }

    fn x(&self, c: usize) -> u32 {
        self.configs[c].1
    }

    fn pl(&self, c: usize) -> &Placement {
        &self.configs[c].2
    }

    fn get(&self, q: StateId, x: u32, pl: &Placement) -> Option<usize> {
        self.index.get(&(q, x, pl.clone())).copied()
    }
}

/// A memoryless accepting run of `a` on `t`, if there is one.
pub fn accepting_run(a: &Automaton, t: &FiniteTree) -> Result<Option<Run>, AutomatonError> {
    let g = MembershipGame::build(a, t)?;
    let (win, strategy, _) = solve_with_strategy(&g.game);
    let root = g.config_vertex[0];
    if win[root as usize] != Player::Even {
        return Ok(None);
    }
    let of_vertex: HashMap<u32, usize> = g
        .config_vertex
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let mut renum: HashMap<usize, usize> = HashMap::from([(0, 0)]);
    let mut order = vec![0usize];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new()];
    let mut n = 0;
    while n < order.len() {
        let ci = order[n];
        let start = g.config_vertex[ci];
        let mut stack = vec![start];
        let mut seen = BTreeSet::from([start]);
        let mut out = BTreeSet::new();
        while let Some(u) = stack.pop() {
            let nexts: Vec<u32> = match g.game.owner[u as usize] {
                Player::Even => strategy[u as usize].into_iter().collect(),
                Player::Odd => g.game.succ[u as usize].clone(),
            };
            for w in nexts {
                if let Some(&cj) = of_vertex.get(&w) {
                    let next = order.len();
                    let id = *renum.entry(cj).or_insert_with(|| {
                        order.push(cj);
                        succ.push(Vec::new());
                        next
                    });
                    out.insert(id);
                } else if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        succ[n] = out.into_iter().collect();
        n += 1;
    }
    let configs: Vec<(StateId, u32, Placement)> =
        order.iter().map(|&ci| g.config_list[ci].clone()).collect();
    let mut pred = vec![Vec::new(); configs.len()];
    for (u, ws) in succ.iter().enumerate() {
        for &w in ws {
            pred[w].push(u);
        }
    }
    let index = configs
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    Ok(Some(Run {
        configs,
        succ,
        pred,
        index,
    }))
}

fn extends(long: &Placement, short: &Placement) -> bool {
    long.len() >= short.len() && long[..short.len()] == short[..]
}

struct Abstraction<'a> {
    a: &'a Automaton,
    t: &'a FiniteTree,
    run: &'a Run,
    info: &'a SetInfo,
}

impl Abstraction<'_> {
    fn below(&self, anc: u32, mut x: u32) -> bool {
        loop {
            if x == anc {
                return true;
            }
            match self.t.nodes[x as usize].parent {
                Some(p) => x = p as u32,
                None => return false,
            }
        }
    }

    fn parent(&self, x: u32) -> Option<u32> {
        self.t.nodes[x as usize].parent.map(|p| p as u32)
    }

    /// Targets of edges `u → w` with `target(u, w)` reachable from `start`
    /// along configurations satisfying `inside` and `allow`; for each
    /// target state whether some path met `mark`.
    fn search(
        &self,
        start: usize,
        inside: &dyn Fn(usize) -> bool,
        target: &dyn Fn(usize, usize) -> bool,
        allow: &dyn Fn(StateId) -> bool,
        mark: &dyn Fn(StateId) -> bool,
    ) -> BTreeMap<StateId, bool> {
        let run = self.run;
        let mut out: BTreeMap<StateId, bool> = BTreeMap::new();
        let m0 = mark(run.q(start));
        let mut seen = BTreeSet::from([(start, m0)]);
        let mut stack = vec![(start, m0)];
        while let Some((u, m)) = stack.pop() {
            for &w in &run.succ[u] {
                let m2 = m || mark(run.q(w));
                if target(u, w) {
                    *out.entry(run.q(w)).or_insert(false) |= m2;
                } else if inside(w) && allow(run.q(w)) && seen.insert((w, m2)) {
                    stack.push((w, m2));
                }
            }
        }
        out
    }

    /// Path pairs from `start` with their acceptance flags: universal pairs
    /// are flagged when some path meets a bad state, existential ones when
    /// every path meets a good state.
    fn pairs(
        &self,
        start: usize,
        inside: &dyn Fn(usize) -> bool,
        target: &dyn Fn(usize, usize) -> bool,
        pairs: &mut BTreeSet<Pair>,
        flagged: &mut BTreeSet<Pair>,
    ) {
        let info = self.info;
        let p = self.run.q(start);
        let all = self.search(start, inside, target, &|_| true, &|_| false);
        let same: Vec<StateId> = all.keys().copied().filter(|&q| info.same_set(p, q)).collect();
        for &q in all.keys() {
            pairs.insert((p, q));
        }
        if same.is_empty() {
            return;
        }
        match info.kind[p as usize] {
            SetKind::Universal => {
                let r = self.search(
                    start,
                    inside,
                    target,
                    &|q| info.same_set(p, q),
                    &|q| info.bad[q as usize],
                );
                for q in same {
                    if r.get(&q).copied().unwrap_or(false) {
                        flagged.insert((p, q));
                    }
                }
            }
            SetKind::Existential => {
                let r = if info.good[p as usize] {
                    BTreeMap::new()
                } else {
                    self.search(
                        start,
                        inside,
                        target,
                        &|q| info.same_set(p, q) && !info.good[q as usize],
                        &|_| false,
                    )
                };
                for q in same {
                    if info.good[q as usize] || !r.contains_key(&q) {
                        flagged.insert((p, q));
                    }
                }
            }
            SetKind::Transient => {}
        }
    }

    /// Tuple of node `x` under placement `pl`, without the request sets.
    fn tuple(&self, x: u32, pl: &Placement, cfgs: &[usize]) -> Tuple {
        let run = self.run;
        let parent = self.parent(x);
        let mut t = Tuple::default();
        for &c in cfgs {
            let q = run.q(c);
            t.s.insert(q);
            if x == 0 && pl.is_empty() && q == self.a.initial && c == 0 {
                t.ds.insert(q);
            }
            for &u in &run.pred[c] {
                if Some(run.x(u)) == parent && run.pl(u) == pl {
                    t.ds.insert(q);
                }
            }
            for &w in &run.succ[c] {
                if Some(run.x(w)) == parent && run.pl(w) == pl {
                    t.us.insert(run.q(w));
                }
            }
        }
        if let Some(px) = parent {
            let inside_down = |w: usize| self.below(x, run.x(w)) && extends(run.pl(w), pl);
            let target_down =
                |u: usize, w: usize| run.x(u) == x && run.x(w) == px && run.pl(w) == pl;
            for &c in cfgs {
                self.pairs(c, &inside_down, &target_down, &mut t.dp, &mut t.adp);
            }
            let inside_up = |w: usize| {
                extends(run.pl(w), pl) && !(self.below(x, run.x(w)) && run.pl(w) == pl)
            };
            let target_up = |u: usize, w: usize| {
                run.x(u) == px && run.pl(u) == pl && run.x(w) == x && run.pl(w) == pl
            };
            for &q in &t.us.clone() {
                if let Some(start) = run.get(q, px, pl) {
                    self.pairs(start, &inside_up, &target_up, &mut t.up, &mut t.aup);
                }
            }
        }
        if pl.last() == Some(&x) {
            let lower: Placement = pl[..pl.len() - 1].to_vec();
            let inside_c = |w: usize| extends(run.pl(w), pl);
            let target_c = |u: usize, w: usize| {
                run.x(u) == x && run.pl(u) == pl && run.x(w) == x && *run.pl(w) == lower
            };
            for &c in cfgs {
                self.pairs(c, &inside_c, &target_c, &mut t.c, &mut t.ac);
            }
        }
        t
    }
}

/// Tuple state of every node of `t` read off the run `run` of `a`, plus the
/// letter of every node.
pub fn abstract_run(a: &Automaton, t: &FiniteTree, run: &Run) -> Result<Vec<TupleState>, AutomatonError> {
    let info = SetInfo::new(a);
    let ab = Abstraction {
        a,
        t,
        run,
        info: &info,
    };
    let n = t.len();
    let mut by_node: Vec<BTreeMap<Placement, Vec<usize>>> = vec![BTreeMap::new(); n];
    for (c, (_, x, pl)) in run.configs.iter().enumerate() {
        by_node[*x as usize].entry(pl.clone()).or_default().push(c);
    }
    for m in by_node.iter_mut() {
        m.entry(Vec::new()).or_default();
    }
    // tuples without requests, per node and placement
    let mut tuples: Vec<BTreeMap<Placement, Tuple>> = Vec::with_capacity(n);
    for (x, m) in by_node.iter().enumerate() {
        tuples.push(
            m.iter()
                .map(|(pl, cfgs)| (pl.clone(), ab.tuple(x as u32, pl, cfgs)))
                .collect(),
        );
    }
    // requests, top-down (parents precede children in node order)
    let mut fresh_children = vec![false; n];
    for x in 0..n {
        let parent = t.nodes[x].parent;
        let fresh = parent.is_none() || fresh_children[x];
        let mut placements: Vec<Placement> = tuples[x].keys().cloned().collect();
        placements.sort_by_key(|p| p.len());
        for pl in placements {
            let (rs, rdp) = if fresh {
                let t0 = &tuples[x][&pl];
                (
                    t0.s.iter().copied().filter(|&q| !info.good[q as usize]).collect(),
                    t0.dp.clone(),
                )
            } else if pl.last() == Some(&(x as u32)) {
                let lower: Placement = pl[..pl.len() - 1].to_vec();
                let mut rs = BTreeSet::new();
                for &p in &tuples[x][&lower].rs {
                    if !info.tracked[p as usize] {
                        continue;
                    }
                    if let Some(c) = run.get(p, x as u32, &lower) {
                        for &w in &run.succ[c] {
                            let q = run.q(w);
                            if run.x(w) == x as u32
                                && *run.pl(w) == pl
                                && info.same_set(p, q)
                                && !info.good[q as usize]
                            {
                                rs.insert(q);
                            }
                        }
                    }
                }
                (rs, BTreeSet::new())
            } else {
                let px = parent.expect("non-root") as u32;
                let xx = x as u32;
                let up = tuples[px as usize].get(&pl).cloned().unwrap_or_default();
                let inside_up = |w: usize| {
                    extends(run.pl(w), &pl) && !(ab.below(xx, run.x(w)) && *run.pl(w) == pl)
                };
                let target_up = |u: usize, w: usize| {
                    run.x(u) == px && *run.pl(u) == pl && run.x(w) == xx && *run.pl(w) == pl
                };
                let mut rs = BTreeSet::new();
                for &p in &up.rs {
                    if !info.tracked[p as usize] {
                        continue;
                    }
                    let Some(start) = run.get(p, px, &pl) else {
                        continue;
                    };
                    let r = ab.search(
                        start,
                        &inside_up,
                        &target_up,
                        &|q| info.same_set(p, q) && !info.good[q as usize],
                        &|_| false,
                    );
                    for &q in r.keys() {
                        if info.same_set(p, q) && !info.good[q as usize] {
                            rs.insert(q);
                        }
                    }
                }
                // downward requests through this child
                let mut rdp = BTreeSet::new();
                let here = &tuples[x][&pl];
                if !up.rdp.is_empty() {
                    let inside_par =
                        |w: usize| ab.below(px, run.x(w)) && extends(run.pl(w), &pl);
                    let gp = t.nodes[px as usize].parent.map(|g| g as u32);
                    let target_par = |u: usize, w: usize| {
                        run.x(u) == px && Some(run.x(w)) == gp && *run.pl(w) == pl
                    };
                    for &(p, q) in &up.rdp {
                        let Some(start) = run.get(p, px, &pl) else {
                            continue;
                        };
                        let reach_x = ab.search(
                            start,
                            &inside_par,
                            &|_, w| run.x(w) == xx && *run.pl(w) == pl,
                            &|_| true,
                            &|_| false,
                        );
                        for &(p2, q2) in &here.dp {
                            if !reach_x.contains_key(&p2) {
                                continue;
                            }
                            let Some(back) = run.get(q2, px, &pl) else {
                                continue;
                            };
                            let out = ab.search(back, &inside_par, &target_par, &|_| true, &|_| false);
                            if out.contains_key(&q) {
                                rdp.insert((p2, q2));
                            }
                        }
                    }
                }
                (rs, rdp)
            };
            let e = tuples[x].get_mut(&pl).expect("placement");
            e.rs = rs;
            e.rdp = rdp;
        }
        let good = tuples[x]
            .values()
            .all(|t| t.rs.is_empty() && t.rdp.is_empty());
        for &c in &t.nodes[x].children {
            fresh_children[c] = good;
        }
    }
    // canonical states with links
    let k = a.pebbles;
    let mut out = Vec::with_capacity(n);
    for (x, tx) in tuples.iter().enumerate() {
        let mut levels: Vec<Vec<Entry>> = vec![Vec::new(); k + 1];
        let mut pos: Vec<HashMap<Placement, u32>> = vec![HashMap::new(); k + 1];
        for i in 0..=k {
            let mut raw: Vec<(Entry, Placement)> = tx
                .iter()
                .filter(|(pl, _)| pl.len() == i)
                .map(|(pl, tu)| {
                    let link = if pl.last() == Some(&(x as u32)) {
                        let lower: Placement = pl[..i - 1].to_vec();
                        pos[i - 1].get(&lower).copied()
                    } else {
                        None
                    };
                    (
                        Entry {
                            tuple: tu.clone(),
                            link,
                        },
                        pl.clone(),
                    )
                })
                .collect();
            raw.sort();
            let mut level: Vec<Entry> = Vec::new();
            for (e, pl) in raw {
                let idx = match level.iter().position(|f| *f == e) {
                    Some(j) => j,
                    None => {
                        level.push(e);
                        level.len() - 1
                    }
                };
                pos[i].insert(pl, idx as u32);
            }
            levels[i] = level;
        }
        out.push(TupleState {
            levels,
            root: x == 0,
        });
    }
    Ok(out)
}

/// Adds the abstraction of an accepting run on `t` to `nra`. Returns false
/// if `a` rejects `t`.
pub fn add_tree(
    nra: &mut ExplicitNra,
    a: &Automaton,
    t: &FiniteTree,
    letters: &[u64],
) -> Result<bool, AutomatonError> {
    let Some(run) = accepting_run(a, t)? else {
        return Ok(false);
    };
    let states = abstract_run(a, t, &run)?;
    let info = SetInfo::new(a);
    let ids: Vec<usize> = states
        .iter()
        .map(|s| nra.add_state(s.clone(), s.is_good(), s.is_bad(&info)))
        .collect();
    if !nra.initial.contains(&ids[0]) {
        nra.initial.push(ids[0]);
    }
    for x in 0..t.len() {
        let children = t.nodes[x].children.iter().map(|&c| ids[c]).collect();
        nra.add_move(
            ids[x],
            NraMove {
                letter: letters[x],
                children,
            },
        );
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Decision procedure

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub d_max: usize,
    pub state_cap: usize,
    pub oracle_nodes: usize,
    pub oracle_degree: usize,
    /// Maximal number of candidate trees; the node bound shrinks until the
    /// catalog fits.
    pub oracle_cap: usize,
    /// Extra candidate trees (over the formula's propositions) tried before
    /// the enumeration.
    pub seeds: Vec<FiniteTree>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            d_max: 2,
            state_cap: 1_000_000,
            oracle_nodes: 5,
            oracle_degree: 2,
            oracle_cap: 200_000,
            seeds: Vec::new(),
        }
    }
}

/// Satisfiability of `f` through the automata pipeline.
pub fn decide(f: &StateFormula, cfg: &SolverConfig) -> Result<EmptinessResult, PipelineError> {
    let start = Instant::now();
    let prof = classify(f);
    let (compiled, defs) = if prof.is_pectl() {
        (compile_pectl_keys(f)?, Vec::new())
    } else {
        let cert = normalize(f);
        (compile_pectlplusn_keys(&cert.formula)?, cert.definitions)
    };
    let a = debranch(&compiled.automaton, cfg.d_max);
    let props: Vec<String> = f.props().into_iter().collect();
    let mut result = if is_one_way(&a) {
        let mut nra = OneWayNra::new(&a);
        let mut r = rabin_emptiness(&mut nra, cfg.state_cap);
        r.stats.generator = "exhaustive".into();
        if r.verdict == Verdict::Empty {
            r.scope = format!("no model of branching degree at most {}", cfg.d_max);
        }
        r
    } else {
        from_runs(f, &a, &defs, &props, cfg)?
    };
    result.stats.automaton_states = a.len();
    result.stats.pebbles = a.pebbles;
    result.stats.invariant_violations = result
        .visited
        .iter()
        .map(|s| s.violations(a.pebbles).len())
        .sum();
    if let Some(w) = result.witness.take() {
        let w = w.restrict(&props);
        result.witness_check = Some(verify_witness(f, &w)?);
        result.witness = Some(w);
    }
    result.stats.millis = start.elapsed().as_millis();
    Ok(result)
}

/// Nonemptiness from abstractions of accepting runs on candidate trees.
/// Candidates are the seeds, then trees of the finite-model search.
fn from_runs(
    f: &StateFormula,
    a: &Automaton,
    defs: &[Definition],
    props: &[String],
    cfg: &SolverConfig,
) -> Result<EmptinessResult, PipelineError> {
    let accepted = |t: &FiniteTree| -> Option<FiniteTree> {
        let lt = canonical_aux_labeling(t, &a.props, defs).ok()?;
        let letters = crate::automaton::tree_letters(a, &lt).ok()?;
        let _ = letters;
        match crate::automaton::membership_finite(a, &lt) {
            Ok(true) => Some(lt),
            _ => None,
        }
    };
    let mut found = None;
    let mut sampled = 0;
    let mut searched = cfg.oracle_nodes;
    for s in &cfg.seeds {
        sampled += 1;
        if s.max_degree() <= cfg.d_max {
            if let Some(lt) = accepted(s) {
                found = Some((s.clone(), lt));
                break;
            }
        }
    }
    if found.is_none() {
        let bits: Vec<usize> = (0..props.len()).collect();
        let degree = cfg.oracle_degree.min(cfg.d_max);
        // candidates are proposed by the semantics and confirmed by the
        // automaton
        let mut t = None;
        while searched > 0 {
            match enumerate_over(props, &bits, searched, degree, cfg.oracle_cap, |t| {
                matches!(evaluate_state(t, 0, f), Ok(true)) && accepted(t).is_some()
            }) {
                Ok(found) => {
                    t = found;
                    break;
                }
                Err(ModelError::SearchSpace(_)) => searched -= 1,
                Err(e) => return Err(e.into()),
            }
        }
        sampled += 1;
        if let Some(t) = t {
            let lt = accepted(&t).expect("accepted above");
            found = Some((t, lt));
        }
    }
    let Some((tree, lt)) = found else {
        return Ok(EmptinessResult {
            verdict: Verdict::Unknown,
            witness: None,
            witness_check: None,
            stats: Stats {
                generator: "runs".into(),
                sampled_trees: sampled,
                ..Stats::default()
            },
            scope: format!(
                "no accepted tree with at most {searched} nodes; emptiness is not decided for automata with backward moves or pebbles"
            ),
            visited: Vec::new(),
        });
    };
    let letters = crate::automaton::tree_letters(a, &lt)?;
    let mut nra = ExplicitNra::new(a.props.clone());
    add_tree(&mut nra, a, &lt, &letters)?;
    let mut r = rabin_emptiness(&mut nra, cfg.state_cap);
    r.stats.generator = "runs".into();
    r.stats.sampled_trees = sampled;
    // a merged witness with cycles is kept only if it can be checked exactly
    if let Some(w) = &r.witness {
        let w = w.restrict(props);
        if !is_acyclic(&w) && verify_witness(f, &w)? != WitnessCheck::Exact {
            r.witness = Some(KripkeModel::from_tree(&tree.restrict(props)));
            r.scope = "witness is the sampled tree".into();
        }
    }
    Ok(r)
}

pub fn is_acyclic(m: &KripkeModel) -> bool {
    // Kahn's algorithm
    let n = m.len();
    let mut indeg = vec![0usize; n];
    for es in &m.edges {
        for &e in es {
            indeg[e] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop() {
        seen += 1;
        for &w in &m.edges[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push(w);
            }
        }
    }
    seen == n
}

/// Re-checks a witness: an acyclic witness is unfolded completely, a cyclic
/// one is checked on its regular unfolding when the formula has no `N` and
/// no path Booleans, and otherwise evaluated on the unfolding to depth three
/// times its size.
pub fn verify_witness(f: &StateFormula, w: &KripkeModel) -> Result<WitnessCheck, ModelError> {
    if is_acyclic(w) {
        let t = unfold(w, w.len());
        return Ok(if evaluate_state(&t, 0, f)? {
            WitnessCheck::Exact
        } else {
            WitnessCheck::Failed
        });
    }
    match check_regular(w, f) {
        Ok(true) => Ok(WitnessCheck::Exact),
        Ok(false) => Ok(WitnessCheck::Failed),
        Err(ModelError::Unsupported(_)) => {
            // a truncated unfolding cuts infinite paths, so only a positive
            // answer carries information
            let t = unfold(w, 3 * w.len());
            Ok(if evaluate_state(&t, 0, f)? {
                WitnessCheck::Bounded
            } else {
                WitnessCheck::Inconclusive
            })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{membership_finite, validate_hesitant};
    use crate::compile::compile_pectl;
    use crate::formula::parse;

    fn f(text: &str) -> StateFormula {
        parse(text, ["p", "q", "r"]).unwrap()
    }

    #[test]
    fn bound_is_exact() {
        assert_eq!(branching_bound_for(1, 0), BigUint::from(2u8));
        assert_eq!(branching_bound_for(2, 1), BigUint::from(256u32));
        assert_eq!(branching_bound_for(3, 2), BigUint::from(1u64 << 27));
    }

    #[test]
    fn debranch_expands_moves() {
        let a = compile_pectl(&f("EX p & AX q")).unwrap();
        let b = debranch(&a, 2);
        assert!(!b.symmetric);
        assert!(validate_hesitant(&b).is_empty(), "{:?}", validate_hesitant(&b));
        let p = a.state_id("p").unwrap();
        let ex = a.state_id("E(X p)").unwrap();
        assert_eq!(
            b.delta(ex, 0, 2, false),
            &Transition::Branch(Pbf::or([
                Pbf::atom(Move::Child(1), p),
                Pbf::atom(Move::Child(2), p)
            ]))
        );
        assert_eq!(b.delta(ex, 0, 0, false), &Transition::Branch(Pbf::False));
    }

    fn leaf_state() -> TupleState {
        TupleState::single(Tuple::default(), 0, true)
    }

    #[test]
    fn single_leaf_nra_is_nonempty() {
        let mut nra = ExplicitNra::new(vec![]);
        let s = nra.add_state(leaf_state(), false, false);
        nra.initial.push(s);
        nra.add_move(s, NraMove { letter: 0, children: vec![] });
        let r = rabin_emptiness(&mut nra, 10);
        assert_eq!(r.verdict, Verdict::Nonempty);
        assert_eq!(r.witness.unwrap().len(), 1);
    }

    #[test]
    fn bad_loop_is_empty() {
        let mut nra = ExplicitNra::new(vec![]);
        let s = nra.add_state(leaf_state(), false, true);
        nra.initial.push(s);
        nra.add_move(s, NraMove { letter: 0, children: vec![s] });
        assert_eq!(rabin_emptiness(&mut nra, 10).verdict, Verdict::Empty);
    }

    #[test]
    fn state_cap_gives_unknown() {
        let r = decide(&f("AG EX p"), &SolverConfig { state_cap: 1, ..SolverConfig::default() })
            .unwrap();
        assert_eq!(r.verdict, Verdict::Unknown);
    }

    #[test]
    fn contradiction_is_empty() {
        let r = decide(&f("p & !p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Empty);
        assert!(r.witness.is_none());
    }

    #[test]
    fn next_gives_two_nodes() {
        let r = decide(&f("EX p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Nonempty);
        let w = r.witness.unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(r.witness_check, Some(WitnessCheck::Exact));
    }

    #[test]
    fn self_loop_witness() {
        let r = decide(&f("AG(p -> EX p) & p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Nonempty);
        let w = r.witness.unwrap();
        assert_eq!(r.witness_check, Some(WitnessCheck::Exact));
        let t = unfold(&w, 20);
        assert!(evaluate_state(&t, 0, &f("p & EX p")).unwrap());
    }

    #[test]
    fn infinite_models_need_request_tracking() {
        // every node has a child and p holds infinitely often below
        let r = decide(&f("AG EX true & AG AF p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Nonempty);
        assert_eq!(r.witness_check, Some(WitnessCheck::Exact));
        // p must hold eventually on every path but is forbidden everywhere
        let r = decide(&f("AG EX true & AF p & AG !p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Empty);
        // existential eventuality that is postponed forever
        let r = decide(&f("AG EX true & E(!p U (p & !p))"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Empty);
        let r = decide(&f("AG !p & E Finf p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Empty);
        let r = decide(&f("AG EX true & A Finf p & EG !p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Empty);
        // reaching p again from everywhere forces a path with infinitely many p
        let r = decide(&f("AG EX true & A !Finf p & AG EF p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Empty);
        let r = decide(&f("AG EX true & E !Finf p & AG EF p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Nonempty);
        assert_eq!(r.witness_check, Some(WitnessCheck::Exact));
    }

    #[test]
    fn single_node_letters() {
        let r = decide(&f("p"), &SolverConfig::default()).unwrap();
        let w = r.witness.unwrap();
        assert_eq!(w.label_names(0), ["p"]);
        let r = decide(&f("!p & !EX true"), &SolverConfig::default()).unwrap();
        let w = r.witness.unwrap();
        assert!(w.label_names(0).is_empty());
        assert!(w.edges[0].is_empty());
    }

    #[test]
    fn past_formula_goes_through_runs() {
        let r = decide(&f("EX EY p & p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Nonempty);
        assert_eq!(r.stats.generator, "runs");
        assert_eq!(r.witness_check, Some(WitnessCheck::Exact));
        assert_eq!(r.stats.invariant_violations, 0);
        let r = decide(&f("EX EY !p & p"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Unknown);
    }

    #[test]
    fn now_formula_goes_through_runs() {
        let r = decide(&f("N E(X p & X q)"), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Nonempty);
        assert_eq!(r.stats.pebbles, 2);
        assert_eq!(r.witness_check, Some(WitnessCheck::Exact));
        assert_eq!(r.stats.invariant_violations, 0);
    }

    #[test]
    fn upward_paths_on_a_chain() {
        // the child sends q1 to the parent, which answers with q2
        use crate::automaton::{build_partition, HesitantSet};
        let _ = HesitantSet {
            states: vec![],
            kind: SetKind::Transient,
            rank: 0,
        };
        let br = |f: Pbf| [Rule::branch(f.clone()), Rule::branch(f)];
        let rules = vec![
            // q0: go to child 1 in q1 (arity 1), accept at leaves
            vec![br(Pbf::True), br(Pbf::atom(Move::Child(1), 1))],
            // q1: go up in q2
            vec![br(Pbf::atom(Move::Parent, 2)), br(Pbf::atom(Move::Parent, 2))],
            // q2: go down in q3
            vec![br(Pbf::False), br(Pbf::atom(Move::Child(1), 3))],
            // q3: accept
            vec![br(Pbf::True), br(Pbf::True)],
        ];
        let groups: Vec<(String, SetKind)> = (0..4)
            .map(|i| (format!("s{i}"), SetKind::Transient))
            .collect();
        let (sets, set_of) = build_partition(&rules, &groups).unwrap();
        let a = Automaton {
            names: (0..4).map(|i| format!("q{i}")).collect(),
            props: vec![],
            symmetric: false,
            max_arity: 1,
            pebbles: 0,
            initial: 0,
            rules,
            good: vec![false; 4],
            bad: vec![false; 4],
            sets,
            set_of,
        };
        let t = FiniteTree::from_labels(&[], &[], &[(0, &[])]);
        assert!(membership_finite(&a, &t).unwrap());
        let run = accepting_run(&a, &t).unwrap().unwrap();
        let states = abstract_run(&a, &t, &run).unwrap();
        let child = &states[1].levels[0][0].tuple;
        assert_eq!(child.s, BTreeSet::from([1, 3]));
        assert_eq!(child.ds, BTreeSet::from([1, 3]));
        assert_eq!(child.us, BTreeSet::from([2]));
        assert_eq!(child.up, BTreeSet::from([(2, 3)]));
        assert!(child.aup.is_empty());
        assert_eq!(child.dp, BTreeSet::from([(1, 2)]));
        let root = &states[0].levels[0][0].tuple;
        assert_eq!(root.s, BTreeSet::from([0, 2]));
        assert_eq!(root.ds, BTreeSet::from([0]));
        assert!(root.us.is_empty() && root.up.is_empty() && root.dp.is_empty());
        for s in &states {
            assert!(s.violations(0).is_empty());
        }
    }

    #[test]
    fn accepted_trees_are_accepted_by_the_nra() {
        use crate::random::{finite_tree, props, state_formula, FormulaShape};
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = props(2);
        let mut checked = 0;
        for i in 0..60 {
            let g = state_formula(&mut rng, &ps, 1 + i % 5, FormulaShape::PECTL);
            let a = debranch(&compile_pectl(&g).unwrap(), 2);
            let t = finite_tree(&mut rng, &ps, 6, 2).restrict(&a.props);
            let letters = crate::automaton::tree_letters(&a, &t).unwrap();
            let mut nra = ExplicitNra::new(a.props.clone());
            if add_tree(&mut nra, &a, &t, &letters).unwrap() {
                checked += 1;
                let r = rabin_emptiness(&mut nra, 1000);
                assert_eq!(r.verdict, Verdict::Nonempty);
                for s in &nra.states {
                    assert!(s.violations(0).is_empty(), "{:?}", s.violations(0));
                }
            }
        }
        assert!(checked > 10);
    }
}
