//! Max-parity games solved with Zielonka's recursive algorithm.
//!
//! Player `Even` wins a play when the largest priority seen infinitely often
//! is even. A player who cannot move loses.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Player {
    Even,
    Odd,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Even => Player::Odd,
            Player::Odd => Player::Even,
        }
    }

    fn of_priority(p: u8) -> Player {
        if p % 2 == 0 {
            Player::Even
        } else {
            Player::Odd
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Game {
    pub owner: Vec<Player>,
    pub priority: Vec<u8>,
    pub succ: Vec<Vec<u32>>,
}

impl Game {
    pub fn add_vertex(&mut self, owner: Player, priority: u8) -> u32 {
        self.owner.push(owner);
        self.priority.push(priority);
        self.succ.push(Vec::new());
        (self.owner.len() - 1) as u32
    }

    pub fn add_edge(&mut self, from: u32, to: u32) {
        self.succ[from as usize].push(to);
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }
}

/// Statistics of one solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub vertices: usize,
    pub recursive_calls: usize,
}

/// Winner of every vertex.
pub fn solve(game: &Game) -> (Vec<Player>, SolveStats) {
    let (w, _, stats) = solve_with_strategy(game);
    (w, stats)
}

/// Winner of every vertex and a positional winning strategy: for a vertex
/// won by its owner, the successor to take (None for dead ends and for
/// vertices won by the opponent).
pub fn solve_with_strategy(game: &Game) -> (Vec<Player>, Vec<Option<u32>>, SolveStats) {
    let n = game.len();
    // Dead ends become edges into losing sinks.
    let mut succ = game.succ.clone();
    let mut owner = game.owner.clone();
    let mut priority = game.priority.clone();
    let even_sink = n as u32;
    let odd_sink = n as u32 + 1;
    owner.push(Player::Even);
    priority.push(0);
    succ.push(vec![even_sink]);
    owner.push(Player::Odd);
    priority.push(1);
    succ.push(vec![odd_sink]);
    for v in 0..n {
        if succ[v].is_empty() {
            succ[v].push(match owner[v] {
                Player::Even => odd_sink,
                Player::Odd => even_sink,
            });
        }
    }
    let mut pred = vec![Vec::new(); n + 2];
    for (v, ss) in succ.iter().enumerate() {
        for &w in ss {
            pred[w as usize].push(v as u32);
        }
    }
    let mut solver = Zielonka {
        owner: &owner,
        priority: &priority,
        succ: &succ,
        pred: &pred,
        calls: 0,
    };
    let all = vec![true; n + 2];
    let mut strategy = vec![NONE; n + 2];
    let (w_even, _) = solver.solve(&all, &mut strategy);
    let winners: Vec<Player> = (0..n)
        .map(|v| if w_even[v] { Player::Even } else { Player::Odd })
        .collect();
    let strategy = (0..n)
        .map(|v| {
            let s = strategy[v];
            (s != NONE && winners[v] == owner[v] && (s as usize) < n && !game.succ[v].is_empty())
                .then_some(s)
        })
        .collect();
    (
        winners,
        strategy,
        SolveStats {
            vertices: n,
            recursive_calls: solver.calls,
        },
    )
}

const NONE: u32 = u32::MAX;

struct Zielonka<'a> {
    owner: &'a [Player],
    priority: &'a [u8],
    succ: &'a [Vec<u32>],
    pred: &'a [Vec<u32>],
    calls: usize,
}

impl Zielonka<'_> {
    /// Returns (Even's winning region, Odd's winning region) within `arena`
    /// and writes a winning move for every vertex of the arena owned by the
    /// player winning it.
    fn solve(&mut self, arena: &[bool], strategy: &mut [u32]) -> (Vec<bool>, Vec<bool>) {
        self.calls += 1;
        let n = arena.len();
        let Some(top) = (0..n).filter(|&v| arena[v]).map(|v| self.priority[v]).max() else {
            return (vec![false; n], vec![false; n]);
        };
        let player = Player::of_priority(top);
        let targets: Vec<bool> = (0..n)
            .map(|v| arena[v] && self.priority[v] == top)
            .collect();
        let attr = self.attractor(arena, &targets, player, strategy);
        let rest: Vec<bool> = (0..n).map(|v| arena[v] && !attr[v]).collect();
        let (we, wo) = self.solve(&rest, strategy);
        let opp_region = match player {
            Player::Even => &wo,
            Player::Odd => &we,
        };
        if !opp_region.iter().any(|&b| b) {
            for v in 0..n {
                if targets[v] && self.owner[v] == player {
                    strategy[v] = *self.succ[v]
                        .iter()
                        .find(|&&w| arena[w as usize])
                        .expect("subgames have no dead ends");
                }
            }
            let mine = arena.to_vec();
            return match player {
                Player::Even => (mine, vec![false; n]),
                Player::Odd => (vec![false; n], mine),
            };
        }
        let opp_region = opp_region.clone();
        let opp_attr = self.attractor(arena, &opp_region, player.opponent(), strategy);
        let rest2: Vec<bool> = (0..n).map(|v| arena[v] && !opp_attr[v]).collect();
        let (mut we2, mut wo2) = self.solve(&rest2, strategy);
        let grown = match player {
            Player::Even => &mut wo2,
            Player::Odd => &mut we2,
        };
        for v in 0..n {
            if opp_attr[v] {
                grown[v] = true;
            }
        }
        (we2, wo2)
    }

    /// Attractor of `target` for `player` within `arena`; records the
    /// attracting move of every added vertex owned by `player`.
    fn attractor(
        &self,
        arena: &[bool],
        target: &[bool],
        player: Player,
        strategy: &mut [u32],
    ) -> Vec<bool> {
        let n = arena.len();
        let mut attr: Vec<bool> = (0..n).map(|v| arena[v] && target[v]).collect();
        let mut count: Vec<usize> = (0..n)
            .map(|v| {
                if arena[v] {
                    self.succ[v].iter().filter(|&&w| arena[w as usize]).count()
                } else {
                    0
                }
            })
            .collect();
        let mut queue: Vec<usize> = (0..n).filter(|&v| attr[v]).collect();
        while let Some(w) = queue.pop() {
            for &v in &self.pred[w] {
                let v = v as usize;
                if !arena[v] || attr[v] {
                    continue;
                }
                if self.owner[v] == player {
                    attr[v] = true;
                    strategy[v] = w as u32;
                    queue.push(v);
                } else {
                    count[v] -= 1;
                    if count[v] == 0 {
                        attr[v] = true;
                        queue.push(v);
                    }
                }
            }
        }
        attr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Even wins from v iff some positional Even strategy makes every cycle
    /// reachable in the resulting one-player graph have an even maximum.
    fn brute_force(g: &Game) -> Vec<Player> {
        let n = g.len();
        let even_vs: Vec<usize> = (0..n)
            .filter(|&v| g.owner[v] == Player::Even && !g.succ[v].is_empty())
            .collect();
        let mut result = vec![Player::Odd; n];
        let mut choice = vec![0usize; even_vs.len()];
        loop {
            // edges under this strategy
            let edges: Vec<Vec<usize>> = (0..n)
                .map(|v| match even_vs.iter().position(|&e| e == v) {
                    Some(i) => vec![g.succ[v][choice[i]] as usize],
                    None => g.succ[v].iter().map(|&w| w as usize).collect(),
                })
                .collect();
            for start in 0..n {
                if result[start] == Player::Even {
                    continue;
                }
                if odd_can_win(g, &edges, start) {
                    continue;
                }
                result[start] = Player::Even;
            }
            // next strategy
            let mut i = 0;
            loop {
                if i == even_vs.len() {
                    return result;
                }
                choice[i] += 1;
                if choice[i] < g.succ[even_vs[i]].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }

    fn odd_can_win(g: &Game, edges: &[Vec<usize>], start: usize) -> bool {
        let n = g.len();
        let reach = reachable(edges, start, n);
        for v in 0..n {
            if !reach[v] {
                continue;
            }
            // Even dead end reached: Odd wins
            if edges[v].is_empty() && g.owner[v] == Player::Even {
                return true;
            }
            // odd-max cycle through v using only vertices with priority <= p(v)
            if g.priority[v] % 2 == 1 {
                let p = g.priority[v];
                let allowed: Vec<bool> = (0..n).map(|w| g.priority[w] <= p).collect();
                let mut seen = vec![false; n];
                let mut stack: Vec<usize> =
                    edges[v].iter().copied().filter(|&w| allowed[w]).collect();
                while let Some(w) = stack.pop() {
                    if w == v {
                        return true;
                    }
                    if !seen[w] {
                        seen[w] = true;
                        stack.extend(edges[w].iter().copied().filter(|&x| allowed[x]));
                    }
                }
            }
        }
        false
    }

    fn reachable(edges: &[Vec<usize>], start: usize, n: usize) -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(edges[v].iter().copied());
            }
        }
        seen
    }

    #[test]
    fn agrees_with_brute_force_on_small_games() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.gen_range(1..7);
            let mut g = Game::default();
            for _ in 0..n {
                let owner = if rng.gen_bool(0.5) {
                    Player::Even
                } else {
                    Player::Odd
                };
                g.add_vertex(owner, rng.gen_range(0..4));
            }
            for v in 0..n {
                let k = rng.gen_range(0..3);
                for _ in 0..k {
                    let w = rng.gen_range(0..n) as u32;
                    if !g.succ[v].contains(&w) {
                        g.add_edge(v as u32, w);
                    }
                }
            }
            let (z, _) = solve(&g);
            assert_eq!(z, brute_force(&g), "{g:?}");
        }
    }

    #[test]
    fn strategies_are_winning() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(1..8);
            let mut g = Game::default();
            for _ in 0..n {
                let owner = if rng.gen_bool(0.5) {
                    Player::Even
                } else {
                    Player::Odd
                };
                g.add_vertex(owner, rng.gen_range(0..4));
            }
            for v in 0..n {
                for _ in 0..rng.gen_range(0..3) {
                    let w = rng.gen_range(0..n) as u32;
                    if !g.succ[v].contains(&w) {
                        g.add_edge(v as u32, w);
                    }
                }
            }
            let (w, s, _) = solve_with_strategy(&g);
            // fixing Even's strategy on Even's region leaves Odd no win
            let edges: Vec<Vec<usize>> = (0..n)
                .map(|v| match s[v] {
                    Some(t) if g.owner[v] == Player::Even => vec![t as usize],
                    _ => g.succ[v].iter().map(|&x| x as usize).collect(),
                })
                .collect();
            for v in 0..n {
                if w[v] == Player::Even {
                    assert!(!odd_can_win(&g, &edges, v), "{g:?} {s:?} from {v}");
                    if g.owner[v] == Player::Even && !g.succ[v].is_empty() {
                        assert!(s[v].is_some());
                    }
                }
            }
        }
    }

    #[test]
    fn dead_ends_lose() {
        let mut g = Game::default();
        let a = g.add_vertex(Player::Even, 0);
        let b = g.add_vertex(Player::Odd, 0);
        let (w, _) = solve(&g);
        assert_eq!(w[a as usize], Player::Odd);
        assert_eq!(w[b as usize], Player::Even);
    }
}
