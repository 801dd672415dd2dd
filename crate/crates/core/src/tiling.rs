//! Corridor tiling games: instances, an exhaustive game solver and the two
//! formula encodings of winning strategies.
//!
//! Game conventions: rows have `2^n` positions; `E` places the tiles in
//! even columns and `A` those in odd columns, row by row. A tile must match
//! its left neighbour through `H` (pairs `(left, right)`), the tile above
//! through `V` (pairs `(above, below)`), and lie in `F` in the first row.
//! A player without a legal move loses; `E` wins once a completed row lies
//! in `L`; infinite plays are won by `A`.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{PathFormula as P, StateFormula as S};
use crate::tree_model::FiniteTree;

#[derive(Debug, Error)]
pub enum TilingError {
    #[error("instance file: {0}")]
    Format(String),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("game has more than {0} positions")]
    TooLarge(usize),
    #[error("E has no winning strategy")]
    NotWinning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingInstance {
    pub tiles: Vec<String>,
    #[serde(rename = "H")]
    pub h: Vec<(String, String)>,
    #[serde(rename = "V")]
    pub v: Vec<(String, String)>,
    #[serde(rename = "F")]
    pub f: Vec<String>,
    #[serde(rename = "L")]
    pub l: Vec<String>,
    pub n: usize,
}

/// Tiles as indices, relations as matrices.
struct Indexed {
    t: usize,
    width: usize,
    h: Vec<Vec<bool>>,
    v: Vec<Vec<bool>>,
    f: Vec<bool>,
    l: Vec<bool>,
}

impl TilingInstance {
    pub fn from_json(text: &str) -> Result<TilingInstance, TilingError> {
        let i: TilingInstance =
            serde_json::from_str(text).map_err(|e| TilingError::Format(e.to_string()))?;
        i.check_names()?;
        Ok(i)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    fn check_names(&self) -> Result<(), TilingError> {
        let known: BTreeSet<&str> = self.tiles.iter().map(String::as_str).collect();
        if known.len() != self.tiles.len() {
            return Err(TilingError::Invalid("duplicate tile".into()));
        }
        if self.tiles.is_empty() {
            return Err(TilingError::Invalid("no tiles".into()));
        }
        for t in &self.tiles {
            if t.is_empty() || !t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(TilingError::Invalid(format!("tile name `{t}`")));
            }
        }
        let mentioned = self
            .h
            .iter()
            .chain(&self.v)
            .flat_map(|(a, b)| [a, b])
            .chain(&self.f)
            .chain(&self.l);
        for t in mentioned {
            if !known.contains(t.as_str()) {
                return Err(TilingError::Invalid(format!("unknown tile `{t}`")));
            }
        }
        if self.n == 0 || self.n > 6 {
            return Err(TilingError::Invalid(format!("n = {} outside 1..=6", self.n)));
        }
        Ok(())
    }

    fn index(&self) -> Indexed {
        let pos = |name: &str| self.tiles.iter().position(|t| t == name).expect("checked");
        let t = self.tiles.len();
        let mut h = vec![vec![false; t]; t];
        let mut v = vec![vec![false; t]; t];
        for (a, b) in &self.h {
            h[pos(a)][pos(b)] = true;
        }
        for (a, b) in &self.v {
            v[pos(a)][pos(b)] = true;
        }
        let mut f = vec![false; t];
        let mut l = vec![false; t];
        for a in &self.f {
            f[pos(a)] = true;
        }
        for a in &self.l {
            l[pos(a)] = true;
        }
        Indexed {
            t,
            width: 1 << self.n,
            h,
            v,
            f,
            l,
        }
    }

    /// Violations of the standing assumption that every tile has an
    /// `H`-successor and a `V`-successor.
    pub fn validate(&self) -> Vec<String> {
        if let Err(e) = self.check_names() {
            return vec![e.to_string()];
        }
        let ix = self.index();
        let mut out = Vec::new();
        for (a, name) in self.tiles.iter().enumerate() {
            if !ix.h[a].iter().any(|&x| x) {
                out.push(format!("tile `{name}` has no H-successor"));
            }
            if !ix.v[a].iter().any(|&x| x) {
                out.push(format!("tile `{name}` has no V-successor"));
            }
        }
        if !ix.f.iter().any(|&x| x) {
            out.push("F is empty".into());
        }
        out
    }

    /// Adds a tile `sink` (renamed on collision) that may follow and precede
    /// every tile horizontally and vertically and lies in `F` but not in `L`.
    /// Returns the padded instance and a note for the log.
    pub fn pad(&self) -> (TilingInstance, String) {
        let mut name = "sink".to_string();
        while self.tiles.contains(&name) {
            name.push('_');
        }
        let mut i = self.clone();
        i.tiles.push(name.clone());
        for t in &i.tiles.clone() {
            for rel in [&mut i.h, &mut i.v] {
                for pair in [(t.clone(), name.clone()), (name.clone(), t.clone())] {
                    if !rel.contains(&pair) {
                        rel.push(pair);
                    }
                }
            }
        }
        i.f.push(name.clone());
        (i, format!("padded with sink tile `{name}` (in F, not in L)"))
    }

    pub fn tile_prop(t: &str) -> String {
        format!("p_{t}")
    }
}

// ---------------------------------------------------------------------------
// Game solving

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Winner {
    E,
    A,
    Undecided,
}

/// A position: the completed row above (empty in the first row) and the
/// tiles placed so far in the current row.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Pos {
    above: Vec<u8>,
    row: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct GameSolution {
    pub winner: Winner,
    /// Rows `E` needs against best defence, when `E` wins at all.
    pub rows_needed: Option<usize>,
    pub positions: usize,
    /// Reachable positions where `A` has no legal move (won by `E`). The
    /// encodings assume there are none.
    pub a_stuck: usize,
    /// Reachable first-row positions where `A` could play an `H`-successor
    /// outside `F`. The encodings assume there are none.
    pub a_outside_f: usize,
    pos: Vec<Pos>,
    moves: Vec<Vec<(u8, Option<usize>)>>,
    rank: Vec<Option<usize>>,
}

pub const POSITION_CAP: usize = 2_000_000;

/// Solves the game exhaustively. `E` is reported as the winner when it can
/// force an `L`-row within `max_rows` rows, `A` when `E` cannot force one at
/// all, and `Undecided` when `E` needs more rows.
pub fn solve_game(i: &TilingInstance, max_rows: usize) -> Result<GameSolution, TilingError> {
    i.check_names()?;
    let ix = i.index();
    let w = ix.width;
    let legal = |p: &Pos, tile: usize| {
        let c = p.row.len();
        (c == 0 || ix.h[p.row[c - 1] as usize][tile])
            && if p.above.is_empty() {
                ix.f[tile]
            } else {
                ix.v[p.above[c] as usize][tile]
            }
    };
    let start = Pos {
        above: Vec::new(),
        row: Vec::new(),
    };
    let mut index: HashMap<Pos, usize> = HashMap::from([(start.clone(), 0)]);
    let mut pos = vec![start];
    // per position: (tile, successor); `None` for a move completing an L-row
    let mut moves: Vec<Vec<(u8, Option<usize>)>> = Vec::new();
    let mut a_stuck = 0;
    let mut a_outside_f = 0;
    let mut n = 0;
    while n < pos.len() {
        if pos.len() > POSITION_CAP {
            return Err(TilingError::TooLarge(POSITION_CAP));
        }
        let p = pos[n].clone();
        let c = p.row.len();
        let mut out = Vec::new();
        for tile in 0..ix.t {
            if !legal(&p, tile) {
                if c % 2 == 1
                    && p.above.is_empty()
                    && ix.h[p.row[c - 1] as usize][tile]
                {
                    a_outside_f += 1;
                }
                continue;
            }
            let mut row = p.row.clone();
            row.push(tile as u8);
            let next = if row.len() == w {
                if row.iter().all(|&x| ix.l[x as usize]) {
                    out.push((tile as u8, None));
                    continue;
                }
                Pos {
                    above: row,
                    row: Vec::new(),
                }
            } else {
                Pos {
                    above: p.above.clone(),
                    row,
                }
            };
            let id = *index.entry(next.clone()).or_insert_with(|| {
                pos.push(next);
                pos.len() - 1
            });
            out.push((tile as u8, Some(id)));
        }
        if c % 2 == 1 && out.is_empty() {
            a_stuck += 1;
        }
        moves.push(out);
        n += 1;
    }
    // attractor of E towards completed L-rows, ranked by rows still needed
    let np = pos.len();
    let mut rank: Vec<Option<usize>> = vec![None; np];
    let row_cost = |from: usize, to: Option<usize>| match to {
        Some(t) if pos[t].row.is_empty() && !pos[from].row.is_empty() => 1,
        _ => 0,
    };
    // value iteration on rows needed; terminates since values only decrease
    // and are bounded by the number of distinct rows
    loop {
        let mut changed = false;
        for x in (0..np).rev() {
            let c = pos[x].row.len();
            let val = |&(_, to): &(u8, Option<usize>)| -> Option<usize> {
                match to {
                    None => Some(1),
                    Some(t) => rank[t].map(|r| r + row_cost(x, Some(t))),
                }
            };
            let v = if c % 2 == 0 {
                moves[x].iter().filter_map(val).min()
            } else if moves[x].is_empty() {
                Some(0)
            } else {
                moves[x]
                    .iter()
                    .map(val)
                    .try_fold(0, |m, v| v.map(|v| m.max(v)))
            };
            if v.is_some() && (rank[x].is_none() || v < rank[x]) {
                rank[x] = v;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let rows_needed = rank[0].map(|r| r.max(1));
    let winner = match rows_needed {
        None => Winner::A,
        Some(r) if r <= max_rows => Winner::E,
        Some(_) => Winner::Undecided,
    };
    Ok(GameSolution {
        winner,
        rows_needed,
        positions: np,
        a_stuck,
        a_outside_f,
        pos,
        moves,
        rank,
    })
}

// ---------------------------------------------------------------------------
// Encodings

fn q_bit(i: usize) -> S {
    S::prop(&format!("q_{i}"))
}

fn tile(name: &str) -> S {
    S::prop(&TilingInstance::tile_prop(name))
}

fn q() -> S {
    S::prop("q")
}

/// The row-separator proposition `q_#`.
fn qh() -> S {
    S::prop("q_h")
}

fn all_bits(n: usize) -> S {
    S::conj((0..n).map(q_bit))
}

fn exactly_one_tile(i: &TilingInstance) -> S {
    S::disj(i.tiles.iter().map(|t| {
        S::and(
            tile(t),
            S::conj(i.tiles.iter().filter(|u| *u != t).map(|u| S::neg(tile(u)))),
        )
    }))
}

fn successors<'a>(rel: &'a [(String, String)], t: &'a str) -> impl Iterator<Item = &'a str> {
    rel.iter().filter(move |(a, _)| a == t).map(|(_, b)| b.as_str())
}

fn predecessors<'a>(rel: &'a [(String, String)], t: &'a str) -> impl Iterator<Item = &'a str> {
    rel.iter().filter(move |(_, b)| b == t).map(|(a, _)| a.as_str())
}

/// Propositions of the UB+P+N encoding, in a fixed order.
pub fn ubpn_props(i: &TilingInstance) -> Vec<String> {
    let mut out = vec!["q".to_string(), "q_h".to_string()];
    out.extend((0..i.n).map(|k| format!("q_{k}")));
    out.extend(i.tiles.iter().map(|t| TilingInstance::tile_prop(t)));
    out
}

/// Propositions of the UB+ encoding, in a fixed order.
pub fn ubplus_props(i: &TilingInstance) -> Vec<String> {
    let mut out: Vec<String> = ["q", "q_h", "c", "e_1", "e_2", "e_3"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    out.extend((0..i.n).map(|k| format!("q_{k}")));
    out.extend(i.tiles.iter().map(|t| TilingInstance::tile_prop(t)));
    out
}

/// The UB+P+N formula that is satisfiable iff `E` wins. Vertical pairs are
/// read as `(above, below)` in every conjunct.
pub fn encode_ubpn(i: &TilingInstance) -> S {
    let n = i.n;
    let tile_pos = S::and(S::neg(q()), S::neg(qh()));
    // first node of the N scope
    let at_root = |f: S| S::once(S::historically(f));
    let phi_s = S::conj([
        qh(),
        S::ag(S::not(S::and(q(), qh()))),
        S::af(S::and(qh(), S::ax(q()))),
        S::ag(S::implies(q(), S::ag(q()))),
        S::ex(S::neg(q())),
    ]);
    let nu = S::disj((0..n).map(|k| {
        S::conj(
            (0..k)
                .map(|j| S::and(q_bit(j), S::ax(S::neg(q_bit(j)))))
                .chain([S::neg(q_bit(k)), S::ax(q_bit(k))])
                .chain((k + 1..n).map(|j| {
                    S::and(
                        S::implies(q_bit(j), S::ax(q_bit(j))),
                        S::implies(S::neg(q_bit(j)), S::ax(S::neg(q_bit(j)))),
                    )
                })),
        )
    }));
    let phi_n = S::ag(S::and(
        S::implies(
            qh(),
            S::or(
                S::ax(S::conj(
                    [S::neg(q()), S::neg(qh())]
                        .into_iter()
                        .chain((0..n).map(|k| S::neg(q_bit(k)))),
                )),
                S::ax(q()),
            ),
        ),
        S::implies(
            tile_pos.clone(),
            S::or(
                S::and(all_bits(n), S::ax(qh())),
                S::and(S::ax(tile_pos.clone()), nu),
            ),
        ),
    ));
    let theta_h = S::implies(
        S::neg(all_bits(n)),
        S::conj(i.tiles.iter().map(|t| {
            S::implies(tile(t), S::ax(S::disj(successors(&i.h, t).map(tile))))
        })),
    );
    // a tile position with at most one row boundary above it
    let vartheta = S::conj([
        S::neg(q()),
        S::neg(qh()),
        S::neg(S::once(S::and(
            qh(),
            S::once(S::and(S::neg(qh()), S::once(qh()))),
        ))),
    ]);
    let same_bits = |from: usize| S::conj((from..n).map(|k| S::iff(q_bit(k), at_root(q_bit(k)))));
    let theta_v = S::now(S::ax(S::ag(S::implies(
        S::and(vartheta.clone(), same_bits(0)),
        S::conj(i.tiles.iter().map(|t| {
            S::implies(tile(t), S::disj(predecessors(&i.v, t).map(|a| at_root(tile(a)))))
        })),
    ))));
    let theta_a = S::implies(
        q_bit(0),
        S::now(S::ax(S::ag(S::implies(
            S::conj([vartheta, S::neg(q_bit(0)), same_bits(1)]),
            S::conj(i.tiles.iter().map(|t| {
                S::implies(
                    tile(t),
                    S::conj(successors(&i.h, t).map(|t2| {
                        let blocked = i
                            .tiles
                            .iter()
                            .filter(|a| !i.v.contains(&((*a).clone(), t2.to_string())))
                            .map(|a| tile(a));
                        S::or(S::ex(tile(t2)), at_root(S::disj(blocked)))
                    })),
                )
            })),
        )))),
    );
    let theta_a1 = S::ag(S::implies(
        S::and(
            S::neg(q_bit(0)),
            S::neg(S::once(S::and(qh(), S::once(S::neg(qh()))))),
        ),
        S::conj(i.tiles.iter().map(|t| {
            S::implies(tile(t), S::conj(successors(&i.h, t).map(|t2| S::ex(tile(t2)))))
        })),
    ));
    let theta_f = S::ax(S::af(S::and(
        qh(),
        S::historically(S::or(qh(), S::disj(i.f.iter().map(|t| tile(t))))),
    )));
    let theta_l = S::af(S::conj([
        qh(),
        S::neg(S::ax(q())),
        S::ag(S::or(
            S::or(qh(), q()),
            S::disj(i.l.iter().map(|t| tile(t))),
        )),
    ]));
    let phi_t = S::conj([
        S::ag(S::implies(
            tile_pos,
            S::conj([exactly_one_tile(i), theta_h, theta_v, theta_a]),
        )),
        theta_a1,
        theta_f,
        theta_l,
    ]);
    S::conj([phi_s, phi_n, phi_t])
}

fn path_iff(a: P, b: P) -> P {
    P::and(
        P::or(P::not(a.clone()), b.clone()),
        P::or(a, P::not(b)),
    )
}

fn ps(f: S) -> P {
    P::state(f)
}

fn e_k(k: usize) -> S {
    S::prop(&format!("e_{k}"))
}

/// Which reading of the UB+ encoding to produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UbplusVariant {
    /// The conjuncts as printed. Copy states may not carry row marks there,
    /// while they must agree with their parent on them, so every formula of
    /// this variant is unsatisfiable.
    Printed,
    /// Copy states carry the row mark of the copied state; row-position
    /// tests exclude copies; the first-row move condition starts below the
    /// root; the last-row condition looks at the row after the separator;
    /// the first-row condition admits the final `q` states; the row-turn
    /// condition tolerates copy leaves; and every path
    /// that avoids copies reaches `q`.
    Repaired,
}

/// The UB+ formula (no past, no `N`, with path Booleans).
pub fn encode_ubplus(i: &TilingInstance, variant: UbplusVariant) -> S {
    let n = i.n;
    let repaired = variant == UbplusVariant::Repaired;
    let c = || S::prop("c");
    let any_e = S::disj((1..=3).map(e_k));
    let e = if repaired {
        S::and(any_e.clone(), S::neg(c()))
    } else {
        any_e.clone()
    };
    let next = |k: usize| k % 3 + 1;
    let psi_e = (1..=3)
        .map(|k| path_iff(ps(e_k(k)), P::next(e_k(k))))
        .reduce(P::and)
        .expect("three marks");
    let fin = |f: S| P::finally(f);
    let psi_1 = P::and(
        fin(c()),
        (1..=3)
            .map(|k| {
                P::and(
                    P::and(ps(e_k(k)), fin(e_k(next(k)))),
                    P::not(fin(e_k(next(next(k))))),
                )
            })
            .reduce(P::or)
            .expect("three marks"),
    );
    let copy_bits = |from: usize| {
        (from..n)
            .map(|k| path_iff(ps(q_bit(k)), fin(S::and(c(), q_bit(k)))))
            .fold(ps(S::True), P::and)
    };
    let phi1 = S::conj([qh(), S::ex(S::True), S::ax(e_k(1))]);
    let only = |on: &[S], off: &[S]| {
        S::conj(on.iter().cloned().chain(off.iter().map(|f| S::neg(f.clone()))))
    };
    let mut kinds = vec![
        only(&[qh()], &[q(), c(), e_k(1), e_k(2), e_k(3)]),
        only(&[q()], &[qh(), c(), e_k(1), e_k(2), e_k(3)]),
    ];
    if repaired {
        for k in 1..=3 {
            let others: Vec<S> = (1..=3).filter(|&j| j != k).map(e_k).collect();
            let mut off = vec![qh(), q()];
            off.extend(others);
            kinds.push(only(&[c(), e_k(k)], &off));
        }
    } else {
        kinds.push(only(&[c()], &[qh(), q(), e_k(1), e_k(2), e_k(3)]));
    }
    for k in 1..=3 {
        let others: Vec<S> = (1..=3).filter(|&j| j != k).map(e_k).collect();
        let mut off = vec![qh(), q(), c()];
        off.extend(others);
        kinds.push(only(&[e_k(k)], &off));
    }
    let phi2 = S::ag(S::disj(kinds));
    let phi3 = S::conj([
        S::ag(S::implies(
            qh(),
            S::or(
                S::ax(q()),
                S::ax(S::and(e.clone(), S::conj((0..n).map(|k| S::neg(q_bit(k)))))),
            ),
        )),
        S::ag(S::implies(q(), S::ag(q()))),
        S::ag(S::implies(c(), S::ag(c()))),
    ]);
    let phi4 = S::ag(S::implies(
        e.clone(),
        S::conj([
            S::ex(S::or(e.clone(), qh())),
            S::ex(c()),
            exactly_one_tile(i),
        ]),
    ));
    let same_info = (0..n)
        .map(|k| path_iff(ps(q_bit(k)), P::next(q_bit(k))))
        .chain(i.tiles.iter().map(|t| path_iff(ps(tile(t)), P::next(tile(t)))))
        .fold(psi_e.clone(), P::and);
    let phi5 = S::ag(S::implies(
        S::or(e.clone(), c()),
        S::forall(P::or(P::not(P::next(c())), same_info)),
    ));
    let increment = (0..n)
        .map(|k| {
            (0..k)
                .map(|j| P::and(ps(q_bit(j)), P::next(S::neg(q_bit(j)))))
                .chain([ps(S::neg(q_bit(k))), P::next(q_bit(k))])
                .chain((k + 1..n).map(|j| path_iff(ps(q_bit(j)), P::next(q_bit(j)))))
                .reduce(P::and)
                .expect("nonempty")
        })
        .reduce(P::or)
        .expect("n >= 1");
    let phi6 = S::ag(S::implies(
        S::and(e.clone(), S::neg(all_bits(n))),
        S::forall(P::or(P::not(P::next(e.clone())), P::and(psi_e.clone(), increment))),
    ));
    let row_turn = (1..=3)
        .map(|k| {
            let below = S::ax(S::disj([c(), q(), e_k(next(k))]));
            // copies are leaves in finite models
            let below = if repaired { S::or(c(), below) } else { below };
            ps(S::implies(e_k(k), S::ax(below)))
        })
        .fold(P::next(S::or(c(), qh())), P::and);
    let phi7 = S::ag(S::implies(S::and(e.clone(), all_bits(n)), S::forall(row_turn)));
    let theta_h = S::conj(i.tiles.iter().map(|t| {
        S::implies(
            tile(t),
            S::ax(S::implies(e.clone(), S::disj(successors(&i.h, t).map(tile)))),
        )
    }));
    let theta_v = {
        let cons = i
            .tiles
            .iter()
            .map(|t| {
                P::or(
                    ps(S::neg(tile(t))),
                    successors(&i.v, t)
                        .map(|b| fin(S::and(c(), tile(b))))
                        .reduce(P::or)
                        .unwrap_or(ps(S::ff())),
                )
            })
            .reduce(P::and)
            .expect("tiles");
        S::forall(P::or(P::not(P::and(psi_1.clone(), copy_bits(0))), cons))
    };
    let theta_a = S::implies(
        S::and(q_bit(0), S::ef(S::and(qh(), S::ex(S::neg(q())))) ),
        S::conj(i.v.iter().map(|(t, t2)| {
            let blocked = i
                .tiles
                .iter()
                .filter(|a| !i.h.contains(&((*a).clone(), t2.clone())))
                .map(|a| tile(a));
            S::implies(
                tile(t),
                S::or(
                    S::exists(P::and(
                        P::and(psi_1.clone(), copy_bits(0)),
                        fin(S::and(c(), tile(t2))),
                    )),
                    S::forall(P::or(
                        P::not(P::and(
                            P::and(psi_1.clone(), fin(S::and(c(), S::neg(q_bit(0))))),
                            copy_bits(1),
                        )),
                        fin(S::and(c(), S::disj(blocked))),
                    )),
                ),
            )
        })),
    );
    let first_row_moves = S::forall(P::or(
        P::finally(qh()),
        P::globally(S::implies(
            S::and(e.clone(), S::neg(q_bit(0))),
            S::conj(i.tiles.iter().map(|t| {
                S::implies(tile(t), S::conj(successors(&i.h, t).map(|t2| S::ex(tile(t2)))))
            })),
        )),
    ));
    let theta_a1 = if repaired {
        S::ax(first_row_moves)
    } else {
        first_row_moves
    };
    let first_row_ok = if repaired {
        S::disj([qh(), q(), S::disj(i.f.iter().map(|t| tile(t)))])
    } else {
        S::or(qh(), S::disj(i.f.iter().map(|t| tile(t))))
    };
    let theta_f = S::forall(P::or(P::finally(e_k(2)), P::globally(first_row_ok)));
    let last = (1..=3)
        .map(|k| {
            let here = if repaired { P::next(e_k(k)) } else { ps(e_k(k)) };
            P::and(here, P::not(fin(e_k(next(k)))))
        })
        .reduce(P::or)
        .expect("three marks");
    let theta_l = S::ag(S::implies(
        qh(),
        S::forall(P::or(
            P::not(P::and(P::and(P::next(e.clone()), fin(q())), last)),
            P::globally(S::disj([qh(), q(), S::disj(i.l.iter().map(|t| tile(t)))])),
        )),
    ));
    let mut parts = vec![phi1, phi2, phi3, phi4, phi5, phi6, phi7];
    if repaired {
        parts.push(S::forall(P::or(P::finally(c()), P::finally(q()))));
    }
    parts.push(S::ag(S::implies(e, S::conj([theta_h, theta_v, theta_a]))));
    parts.extend([theta_a1, theta_f, theta_l]);
    S::conj(parts)
}

// ---------------------------------------------------------------------------
// Strategy models

/// Which encoding a strategy model is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Ubpn,
    Ubplus,
}

/// The tree of a winning strategy of `E`: `E` positions keep one move, `A`
/// positions all legal moves; rows are separated by `q_h` states and the
/// play ends with a `q_h` state followed by a `q` state. For the UB+
/// encoding every tile state gets a copy leaf and carries its row mark.
pub fn strategy_model(
    i: &TilingInstance,
    sol: &GameSolution,
    enc: Encoding,
) -> Result<FiniteTree, TilingError> {
    if sol.rank[0].is_none() {
        return Err(TilingError::NotWinning);
    }
    let props = match enc {
        Encoding::Ubpn => ubpn_props(i),
        Encoding::Ubplus => ubplus_props(i),
    };
    let bit = |name: &str| 1u64 << props.iter().position(|p| p == name).expect("prop");
    let tile_bit = |t: u8| bit(&TilingInstance::tile_prop(&i.tiles[t as usize]));
    let w = 1usize << i.n;
    let mut t = FiniteTree::new(props.clone(), bit("q_h"));
    // (tree node, game position, row number)
    let mut queue = VecDeque::from([(0usize, 0usize, 1usize)]);
    while let Some((node, p, row)) = queue.pop_front() {
        let col = sol.pos[p].row.len();
        let chosen: Vec<(u8, Option<usize>)> = if col % 2 == 0 {
            // a move that keeps E's rank decreasing
            let best = sol.moves[p]
                .iter()
                .filter(|(_, to)| match to {
                    None => true,
                    Some(x) => sol.rank[*x].is_some(),
                })
                .min_by_key(|(_, to)| to.map_or(0, |x| sol.rank[x].unwrap_or(usize::MAX) + 1))
                .copied()
                .expect("winning position has a winning move");
            vec![best]
        } else {
            sol.moves[p].clone()
        };
        for (tile, to) in chosen {
            let mut label = tile_bit(tile);
            for k in 0..i.n {
                if col >> k & 1 == 1 {
                    label |= bit(&format!("q_{k}"));
                }
            }
            if enc == Encoding::Ubplus {
                label |= bit(&format!("e_{}", (row - 1) % 3 + 1));
            }
            let x = t.add_child(node, label);
            if enc == Encoding::Ubplus {
                t.add_child(x, label | bit("c"));
            }
            match to {
                None => {
                    let sep = t.add_child(x, bit("q_h"));
                    t.add_child(sep, bit("q"));
                }
                Some(next) if col + 1 == w => {
                    let sep = t.add_child(x, bit("q_h"));
                    queue.push_back((sep, next, row + 1));
                }
                Some(next) => queue.push_back((x, next, row)),
            }
        }
    }
    Ok(reorder(&t))
}

/// Renumbers so that node ids follow breadth-first order.
fn reorder(t: &FiniteTree) -> FiniteTree {
    let mut out = FiniteTree::new(t.props.clone(), t.nodes[0].label);
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((src, dst)) = queue.pop_front() {
        for &c in &t.nodes[src].children {
            let id = out.add_child(dst, t.nodes[c].label);
            queue.push_back((c, id));
        }
    }
    out
}

/// Small instances with `n = 1` and at most three tiles, all satisfying the
/// assumptions of the encodings.
pub fn micro_instances() -> Vec<(String, TilingInstance)> {
    let mk = |tiles: &[&str], h: &[(&str, &str)], v: &[(&str, &str)], f: &[&str], l: &[&str]| {
        let s = |x: &[&str]| x.iter().map(|t| t.to_string()).collect::<Vec<_>>();
        let pairs = |x: &[(&str, &str)]| {
            x.iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect::<Vec<_>>()
        };
        TilingInstance {
            tiles: s(tiles),
            h: pairs(h),
            v: pairs(v),
            f: s(f),
            l: s(l),
            n: 1,
        }
    };
    let all2 = [("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")];
    vec![
        (
            "single tile, first row wins".into(),
            mk(&["a"], &[("a", "a")], &[("a", "a")], &["a"], &["a"]),
        ),
        (
            "single tile, no last row".into(),
            mk(&["a"], &[("a", "a")], &[("a", "a")], &["a"], &[]),
        ),
        (
            "A copies a non-L tile".into(),
            mk(&["a", "b"], &all2, &all2, &["a", "b"], &["b"]),
        ),
        (
            "second row forced".into(),
            mk(
                &["a", "b"],
                &[("a", "a"), ("b", "b")],
                &all2,
                &["a"],
                &["b"],
            ),
        ),
        (
            "vertical constraint blocks L".into(),
            mk(
                &["a", "b"],
                &all2,
                &[("a", "a"), ("b", "a")],
                &["a", "b"],
                &["b"],
            ),
        ),
        (
            "A branches in the first row".into(),
            mk(
                &["a", "b", "c"],
                &[("a", "a"), ("a", "b"), ("b", "a"), ("b", "b"), ("c", "c")],
                &[("a", "c"), ("b", "c"), ("c", "c")],
                &["a", "b"],
                &["c"],
            ),
        ),
    ]
}
