//! Finite labeled trees, Kripke structures, the direct semantics, a second
//! bottom-up evaluator and the exhaustive finite-model oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{PathFormula, StateFormula};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("proposition `{0}` is not in the model's alphabet")]
    UnknownProp(String),
    #[error("node {0} is not in the tree")]
    NoSuchNode(NodeId),
    #[error("node {0} is not on the path")]
    NotOnPath(NodeId),
    #[error("too many propositions ({0}, at most 64)")]
    TooManyProps(usize),
    #[error("enumeration search space exceeds the cap of {0} candidate trees")]
    SearchSpace(usize),
    #[error("model file: {0}")]
    Format(String),
    #[error("formula outside the evaluator's slice: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub label: u64,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
}

/// A finite tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteTree {
    pub props: Vec<String>,
    pub nodes: Vec<TreeNode>,
}

impl FiniteTree {
    pub fn new(props: Vec<String>, root_label: u64) -> Self {
        FiniteTree {
            props,
            nodes: vec![TreeNode {
                label: root_label,
                children: vec![],
                parent: None,
            }],
        }
    }

    pub fn add_child(&mut self, parent: NodeId, label: u64) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            label,
            children: vec![],
            parent: Some(parent),
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Builds a tree from a parent-first list of (parent, label names).
    pub fn from_labels(props: &[&str], root: &[&str], rest: &[(NodeId, &[&str])]) -> Self {
        let props: Vec<String> = props.iter().map(|s| s.to_string()).collect();
        let mask = |names: &[&str]| -> u64 {
            names
                .iter()
                .map(|n| 1u64 << props.iter().position(|p| p == n).expect("declared prop"))
                .fold(0, |a, b| a | b)
        };
        let mut t = FiniteTree::new(props.clone(), mask(root));
        for (parent, names) in rest {
            t.add_child(*parent, mask(names));
        }
        t
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self, x: NodeId) -> usize {
        self.nodes[x].children.len()
    }

    pub fn max_degree(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| n.children.len())
            .max()
            .unwrap_or(0)
    }

    pub fn prop_index(&self, name: &str) -> Option<usize> {
        self.props.iter().position(|p| p == name)
    }

    pub fn has(&self, x: NodeId, prop: usize) -> bool {
        self.nodes[x].label >> prop & 1 == 1
    }

    pub fn label_names(&self, x: NodeId) -> Vec<String> {
        (0..self.props.len())
            .filter(|&i| self.has(x, i))
            .map(|i| self.props[i].clone())
            .collect()
    }

    /// Address as a sequence of 1-based child positions.
    pub fn address(&self, mut x: NodeId) -> Vec<usize> {
        let mut out = Vec::new();
        while let Some(p) = self.nodes[x].parent {
            let idx = self.nodes[p]
                .children
                .iter()
                .position(|&c| c == x)
                .expect("child");
            out.push(idx + 1);
            x = p;
        }
        out.reverse();
        out
    }

    pub fn node_at(&self, address: &[usize]) -> Option<NodeId> {
        let mut x = 0;
        for &c in address {
            x = *self.nodes.get(x)?.children.get(c.checked_sub(1)?)?;
        }
        Some(x)
    }

    pub fn depth(&self, mut x: NodeId) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[x].parent {
            d += 1;
            x = p;
        }
        d
    }

    /// Copy of the subtree rooted at `x` (node ids are renumbered).
    pub fn subtree(&self, x: NodeId) -> FiniteTree {
        let mut t = FiniteTree::new(self.props.clone(), self.nodes[x].label);
        let mut stack = vec![(x, 0)];
        while let Some((src, dst)) = stack.pop() {
            for &c in self.nodes[src].children.iter() {
                let id = t.add_child(dst, self.nodes[c].label);
                stack.push((c, id));
            }
        }
        t
    }

    /// Re-expresses labels over another proposition list (missing props dropped).
    pub fn restrict(&self, props: &[String]) -> FiniteTree {
        let map: Vec<Option<usize>> = self
            .props
            .iter()
            .map(|p| props.iter().position(|q| q == p))
            .collect();
        let relabel = |l: u64| -> u64 {
            map.iter()
                .enumerate()
                .filter(|(i, m)| l >> i & 1 == 1 && m.is_some())
                .map(|(_, m)| 1u64 << m.unwrap())
                .fold(0, |a, b| a | b)
        };
        FiniteTree {
            props: props.to_vec(),
            nodes: self
                .nodes
                .iter()
                .map(|n| TreeNode {
                    label: relabel(n.label),
                    children: n.children.clone(),
                    parent: n.parent,
                })
                .collect(),
        }
    }

    /// Root-to-leaf paths through `x`.
    pub fn maximal_paths_through(&self, x: NodeId) -> Vec<TreePath> {
        let mut prefix = vec![x];
        let mut y = x;
        while let Some(p) = self.nodes[y].parent {
            prefix.push(p);
            y = p;
        }
        prefix.reverse();
        let mut out = Vec::new();
        let mut stack = vec![prefix];
        while let Some(path) = stack.pop() {
            let last = *path.last().expect("nonempty");
            if self.nodes[last].children.is_empty() {
                out.push(TreePath { nodes: path });
            } else {
                for &c in self.nodes[last].children.iter().rev() {
                    let mut p = path.clone();
                    p.push(c);
                    stack.push(p);
                }
            }
        }
        out
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&x| self.nodes[x].children.is_empty())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = TreeFile {
            props: self.props.clone(),
            nodes: (0..self.len())
                .map(|i| NodeFile {
                    id: i,
                    label: self.label_names(i),
                    children: self.nodes[i].children.clone(),
                })
                .collect(),
            root: 0,
        };
        serde_json::to_value(file).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<FiniteTree, ModelError> {
        let file: TreeFile =
            serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        file.into_tree()
    }
}

/// A maximal root-to-leaf path, as node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePath {
    pub nodes: Vec<NodeId>,
}

impl TreePath {
    pub fn position(&self, x: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&y| y == x)
    }
}

#[derive(Serialize, Deserialize)]
struct NodeFile {
    id: usize,
    label: Vec<String>,
    #[serde(default)]
    children: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    props: Vec<String>,
    nodes: Vec<NodeFile>,
    root: usize,
}

fn label_mask(props: &[String], names: &[String]) -> Result<u64, ModelError> {
    if props.len() > 64 {
        return Err(ModelError::TooManyProps(props.len()));
    }
    let mut m = 0;
    for n in names {
        let i = props
            .iter()
            .position(|p| p == n)
            .ok_or_else(|| ModelError::UnknownProp(n.clone()))?;
        m |= 1 << i;
    }
    Ok(m)
}

impl TreeFile {
    fn into_tree(self) -> Result<FiniteTree, ModelError> {
        let by_id: HashMap<usize, &NodeFile> = self.nodes.iter().map(|n| (n.id, n)).collect();
        let root = by_id
            .get(&self.root)
            .ok_or(ModelError::NoSuchNode(self.root))?;
        let mut t = FiniteTree::new(self.props.clone(), label_mask(&self.props, &root.label)?);
        let mut queue = VecDeque::from([(self.root, 0usize)]);
        let mut seen = BTreeSet::from([self.root]);
        while let Some((src, dst)) = queue.pop_front() {
            for &c in &by_id[&src].children {
                let node = by_id.get(&c).ok_or(ModelError::NoSuchNode(c))?;
                if !seen.insert(c) {
                    return Err(ModelError::Format(format!("node {c} has two parents")));
                }
                let id = t.add_child(dst, label_mask(&self.props, &node.label)?);
                queue.push_back((c, id));
            }
        }
        Ok(t)
    }
}

// ---------------------------------------------------------------------------
// Kripke structures

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KripkeModel {
    pub props: Vec<String>,
    pub labels: Vec<u64>,
    pub edges: Vec<Vec<usize>>,
    pub initial: usize,
}

#[derive(Serialize, Deserialize)]
struct KripkeFile {
    props: Vec<String>,
    nodes: Vec<NodeFile>,
    edges: Vec<[usize; 2]>,
    initial: usize,
}

impl KripkeModel {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Same structure as a tree (edges parent to child).
    pub fn from_tree(t: &FiniteTree) -> Self {
        KripkeModel {
            props: t.props.clone(),
            labels: t.nodes.iter().map(|n| n.label).collect(),
            edges: t.nodes.iter().map(|n| n.children.clone()).collect(),
            initial: 0,
        }
    }

    /// Drops unreachable states and renumbers in BFS order.
    pub fn trimmed(&self) -> KripkeModel {
        let mut order = vec![self.initial];
        let mut index = HashMap::from([(self.initial, 0usize)]);
        let mut i = 0;
        while i < order.len() {
            for &s in &self.edges[order[i]] {
                if let std::collections::hash_map::Entry::Vacant(e) = index.entry(s) {
                    e.insert(order.len());
                    order.push(s);
                }
            }
            i += 1;
        }
        KripkeModel {
            props: self.props.clone(),
            labels: order.iter().map(|&s| self.labels[s]).collect(),
            edges: order
                .iter()
                .map(|&s| self.edges[s].iter().map(|t| index[t]).collect())
                .collect(),
            initial: 0,
        }
    }

    pub fn restrict(&self, props: &[String]) -> KripkeModel {
        let fake = FiniteTree {
            props: self.props.clone(),
            nodes: self
                .labels
                .iter()
                .map(|&l| TreeNode {
                    label: l,
                    children: vec![],
                    parent: None,
                })
                .collect(),
        };
        let r = fake.restrict(props);
        KripkeModel {
            props: props.to_vec(),
            labels: r.nodes.iter().map(|n| n.label).collect(),
            edges: self.edges.clone(),
            initial: self.initial,
        }
    }

    pub fn label_names(&self, s: usize) -> Vec<String> {
        (0..self.props.len())
            .filter(|&i| self.labels[s] >> i & 1 == 1)
            .map(|i| self.props[i].clone())
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = KripkeFile {
            props: self.props.clone(),
            nodes: (0..self.len())
                .map(|i| NodeFile {
                    id: i,
                    label: self.label_names(i),
                    children: vec![],
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .flat_map(|(a, bs)| bs.iter().map(move |&b| [a, b]))
                .collect(),
            initial: self.initial,
        };
        serde_json::to_value(file).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<KripkeModel, ModelError> {
        let file: KripkeFile =
            serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        let ids: BTreeMap<usize, usize> = file
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, i))
            .collect();
        let mut labels = Vec::new();
        for n in &file.nodes {
            labels.push(label_mask(&file.props, &n.label)?);
        }
        let mut edges = vec![Vec::new(); labels.len()];
        for [a, b] in file.edges {
            let (a, b) = (
                *ids.get(&a).ok_or(ModelError::NoSuchNode(a))?,
                *ids.get(&b).ok_or(ModelError::NoSuchNode(b))?,
            );
            edges[a].push(b);
        }
        let initial = *ids
            .get(&file.initial)
            .ok_or(ModelError::NoSuchNode(file.initial))?;
        Ok(KripkeModel {
            props: file.props,
            labels,
            edges,
            initial,
        })
    }
}

/// Truncated unfolding of `m` to the given depth.
pub fn unfold(m: &KripkeModel, depth: usize) -> FiniteTree {
    let mut t = FiniteTree::new(m.props.clone(), m.labels[m.initial]);
    let mut frontier = vec![(0usize, m.initial)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (node, state) in frontier {
            for &s in &m.edges[state] {
                let id = t.add_child(node, m.labels[s]);
                next.push((id, s));
            }
        }
        frontier = next;
    }
    t
}

// ---------------------------------------------------------------------------
// Direct semantics

fn check_props(props: &[String], f: &StateFormula) -> Result<(), ModelError> {
    for p in f.props() {
        if !props.contains(&p) {
            return Err(ModelError::UnknownProp(p));
        }
    }
    Ok(())
}

pub fn evaluate_state(t: &FiniteTree, x: NodeId, f: &StateFormula) -> Result<bool, ModelError> {
    check_props(&t.props, f)?;
    if x >= t.len() {
        return Err(ModelError::NoSuchNode(x));
    }
    Ok(Eval::new(t).state(x, f))
}

pub fn evaluate_path(
    t: &FiniteTree,
    pi: &TreePath,
    x: NodeId,
    psi: &PathFormula,
) -> Result<bool, ModelError> {
    let mut props = BTreeSet::new();
    psi.for_each_state_arg(&mut |s| props.extend(s.props()));
    for p in props {
        if !t.props.contains(&p) {
            return Err(ModelError::UnknownProp(p));
        }
    }
    let i = pi.position(x).ok_or(ModelError::NotOnPath(x))?;
    Ok(Eval::new(t).path(&pi.nodes, i, psi))
}

struct Eval<'a> {
    t: &'a FiniteTree,
    index: HashMap<&'a str, usize>,
}

impl<'a> Eval<'a> {
    fn new(t: &'a FiniteTree) -> Self {
        Eval {
            t,
            index: t
                .props
                .iter()
                .enumerate()
                .map(|(i, p)| (p.as_str(), i))
                .collect(),
        }
    }

    fn state(&self, x: NodeId, f: &StateFormula) -> bool {
        match f {
            StateFormula::True => true,
            StateFormula::Prop(p) => self.t.has(x, self.index[p.as_str()]),
            StateFormula::And(a, b) => self.state(x, a) && self.state(x, b),
            StateFormula::Not(a) => !self.state(x, a),
            StateFormula::Now(a) => {
                let sub = self.t.subtree(x);
                Eval::new(&sub).state(0, a)
            }
            StateFormula::Exists(psi) => self.t.maximal_paths_through(x).iter().any(|pi| {
                let i = pi.position(x).expect("through x");
                self.path(&pi.nodes, i, psi)
            }),
        }
    }

    fn path(&self, pi: &[NodeId], i: usize, psi: &PathFormula) -> bool {
        match psi {
            PathFormula::State(s) => self.state(pi[i], s),
            PathFormula::And(a, b) => self.path(pi, i, a) && self.path(pi, i, b),
            PathFormula::Not(a) => !self.path(pi, i, a),
            PathFormula::Next(a) => i + 1 < pi.len() && self.state(pi[i + 1], a),
            PathFormula::Until(a, b) => {
                for j in i..pi.len() {
                    if self.state(pi[j], b) {
                        return true;
                    }
                    if !self.state(pi[j], a) {
                        return false;
                    }
                }
                false
            }
            PathFormula::InfOften(_) => false,
            PathFormula::Yesterday(a) => i > 0 && self.state(pi[i - 1], a),
            PathFormula::Since(a, b) => {
                for j in (0..=i).rev() {
                    if self.state(pi[j], b) {
                        return true;
                    }
                    if !self.state(pi[j], a) {
                        return false;
                    }
                }
                false
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Bottom-up labeling evaluator (N-free, past-free formulas)

/// Truth value of `f` at every node, computed leaves-first. Path formulas
/// are handled by propagating, per node, the set of truth vectors of their
/// temporal atoms along all downward maximal paths.
pub fn label_bottom_up(t: &FiniteTree, f: &StateFormula) -> Result<Vec<bool>, ModelError> {
    check_props(&t.props, f)?;
    let order = postorder(t);
    let mut memo: HashMap<StateFormula, Vec<bool>> = HashMap::new();
    label_rec(t, &order, f, &mut memo)
}

fn postorder(t: &FiniteTree) -> Vec<NodeId> {
    let mut order: Vec<NodeId> = (0..t.len()).collect();
    order.sort_by_key(|&x| std::cmp::Reverse(t.depth(x)));
    order
}

fn label_rec(
    t: &FiniteTree,
    order: &[NodeId],
    f: &StateFormula,
    memo: &mut HashMap<StateFormula, Vec<bool>>,
) -> Result<Vec<bool>, ModelError> {
    if let Some(v) = memo.get(f) {
        return Ok(v.clone());
    }
    let n = t.len();
    let out = match f {
        StateFormula::True => vec![true; n],
        StateFormula::Prop(p) => {
            let i = t
                .prop_index(p)
                .ok_or_else(|| ModelError::UnknownProp(p.clone()))?;
            (0..n).map(|x| t.has(x, i)).collect()
        }
        StateFormula::And(a, b) => {
            let (va, vb) = (label_rec(t, order, a, memo)?, label_rec(t, order, b, memo)?);
            va.iter().zip(vb).map(|(x, y)| *x && y).collect()
        }
        StateFormula::Not(a) => label_rec(t, order, a, memo)?
            .into_iter()
            .map(|x| !x)
            .collect(),
        StateFormula::Now(_) => return Err(ModelError::Unsupported("N".into())),
        StateFormula::Exists(psi) => {
            let mut atoms: Vec<&PathFormula> = Vec::new();
            collect_atoms(psi, &mut atoms)?;
            if atoms.len() > 20 {
                return Err(ModelError::Unsupported("too many temporal atoms".into()));
            }
            let mut args: Vec<(Vec<bool>, Vec<bool>)> = Vec::new();
            for a in &atoms {
                let (l, r) = match a {
                    PathFormula::State(s) | PathFormula::Next(s) | PathFormula::InfOften(s) => {
                        (vec![false; n], label_rec(t, order, s, memo)?)
                    }
                    PathFormula::Until(x, y) => {
                        (label_rec(t, order, x, memo)?, label_rec(t, order, y, memo)?)
                    }
                    _ => unreachable!("collect_atoms filters"),
                };
                args.push((l, r));
            }
            let mut vecs: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
            for &y in order {
                let children = &t.nodes[y].children;
                let step = |child: Option<(NodeId, u32)>| -> u32 {
                    let mut v = 0u32;
                    for (k, a) in atoms.iter().enumerate() {
                        let (l, r) = &args[k];
                        let bit = match a {
                            PathFormula::State(_) => r[y],
                            PathFormula::Next(_) => child.is_some_and(|(c, _)| r[c]),
                            PathFormula::InfOften(_) => false,
                            PathFormula::Until(..) => {
                                r[y] || (l[y] && child.is_some_and(|(_, w)| w >> k & 1 == 1))
                            }
                            _ => unreachable!(),
                        };
                        if bit {
                            v |= 1 << k;
                        }
                    }
                    v
                };
                let mut set = BTreeSet::new();
                if children.is_empty() {
                    set.insert(step(None));
                } else {
                    for &c in children {
                        for &w in &vecs[c] {
                            set.insert(step(Some((c, w))));
                        }
                    }
                }
                vecs[y] = set;
            }
            (0..n)
                .map(|x| vecs[x].iter().any(|&v| bool_eval(psi, &atoms, v)))
                .collect()
        }
    };
    memo.insert(f.clone(), out.clone());
    Ok(out)
}

fn collect_atoms<'a>(
    psi: &'a PathFormula,
    out: &mut Vec<&'a PathFormula>,
) -> Result<(), ModelError> {
    match psi {
        PathFormula::And(a, b) => {
            collect_atoms(a, out)?;
            collect_atoms(b, out)
        }
        PathFormula::Not(a) => collect_atoms(a, out),
        PathFormula::Yesterday(_) | PathFormula::Since(..) => {
            Err(ModelError::Unsupported("past".into()))
        }
        atom => {
            if !out.contains(&atom) {
                out.push(atom);
            }
            Ok(())
        }
    }
}

fn bool_eval(psi: &PathFormula, atoms: &[&PathFormula], v: u32) -> bool {
    match psi {
        PathFormula::And(a, b) => bool_eval(a, atoms, v) && bool_eval(b, atoms, v),
        PathFormula::Not(a) => !bool_eval(a, atoms, v),
        atom => {
            let k = atoms.iter().position(|a| *a == atom).expect("collected");
            v >> k & 1 == 1
        }
    }
}

// ---------------------------------------------------------------------------
// Kripke model checking (future fragment)

/// Labels each Kripke state with the truth of `f` at the root of its
/// unfolding. Handles N-free-or-past-free formulas whose path quantifiers
/// range over a single temporal literal; returns `Unsupported` otherwise.
pub fn check_kripke(m: &KripkeModel, f: &StateFormula) -> Result<Vec<bool>, ModelError> {
    check_props(&m.props, f)?;
    let prof = crate::formula::classify(f);
    if prof.uses_past || prof.uses_path_boolean {
        return Err(ModelError::Unsupported("past or path Boolean".into()));
    }
    Ok(KripkeCheck {
        m,
        memo: HashMap::new(),
    }
    .state(f))
}

/// Truth of `f` at the root of the unfolding of `m`, past operators
/// included. Each past subformula, innermost first, becomes a proposition
/// whose value along the unique history is tracked by a product with `m`;
/// the remaining future formula is model checked. Formulas with `N` or path
/// Booleans are `Unsupported`.
pub fn check_regular(m: &KripkeModel, f: &StateFormula) -> Result<bool, ModelError> {
    check_props(&m.props, f)?;
    let prof = crate::formula::classify(f);
    if prof.uses_now || prof.uses_path_boolean {
        return Err(ModelError::Unsupported("N or path Boolean".into()));
    }
    let mut m = m.clone();
    let mut f = f.clone();
    let mut fresh = 0;
    while let Some(target) = innermost_past(&f) {
        let name = loop {
            let name = format!("_hist{fresh}");
            fresh += 1;
            if !m.props.contains(&name) {
                break name;
            }
        };
        if m.props.len() >= 64 {
            return Err(ModelError::TooManyProps(m.props.len() + 1));
        }
        m = track_history(&m, &target, &name)?;
        f = substitute(&f, &target, &StateFormula::prop(&name));
    }
    Ok(check_kripke(&m, &f)?[m.initial])
}

fn past_literal(p: &PathFormula) -> Option<(bool, &PathFormula)> {
    match p {
        PathFormula::Not(a) => past_literal(a).map(|(neg, a)| (!neg, a)),
        PathFormula::Yesterday(_) | PathFormula::Since(..) => Some((false, p)),
        _ => None,
    }
}

/// A quantified past literal whose arguments are past-free.
fn innermost_past(f: &StateFormula) -> Option<StateFormula> {
    match f {
        StateFormula::True | StateFormula::Prop(_) => None,
        StateFormula::And(a, b) => innermost_past(a).or_else(|| innermost_past(b)),
        StateFormula::Not(a) | StateFormula::Now(a) => innermost_past(a),
        StateFormula::Exists(p) => {
            let mut found = None;
            p.for_each_state_arg(&mut |s| {
                if found.is_none() {
                    found = innermost_past(s);
                }
            });
            found.or_else(|| past_literal(p).map(|_| f.clone()))
        }
    }
}

fn substitute(f: &StateFormula, target: &StateFormula, by: &StateFormula) -> StateFormula {
    use StateFormula as S;
    if f == target {
        return by.clone();
    }
    let sub = |g: &S| Box::new(substitute(g, target, by));
    match f {
        S::True | S::Prop(_) => f.clone(),
        S::And(a, b) => S::And(sub(a), sub(b)),
        S::Not(a) => S::Not(sub(a)),
        S::Now(a) => S::Now(sub(a)),
        S::Exists(p) => S::Exists(Box::new(substitute_path(p, target, by))),
    }
}

fn substitute_path(p: &PathFormula, target: &StateFormula, by: &StateFormula) -> PathFormula {
    use PathFormula as P;
    let sub = |g: &StateFormula| Box::new(substitute(g, target, by));
    let path = |q: &P| Box::new(substitute_path(q, target, by));
    match p {
        P::State(a) => P::State(sub(a)),
        P::And(a, b) => P::And(path(a), path(b)),
        P::Not(a) => P::Not(path(a)),
        P::Next(a) => P::Next(sub(a)),
        P::Until(a, b) => P::Until(sub(a), sub(b)),
        P::InfOften(a) => P::InfOften(sub(a)),
        P::Yesterday(a) => P::Yesterday(sub(a)),
        P::Since(a, b) => P::Since(sub(a), sub(b)),
    }
}

/// Product of `m` with the value of the past literal of `target` along
/// the history, exposed as proposition `name`.
fn track_history(m: &KripkeModel, target: &StateFormula, name: &str) -> Result<KripkeModel, ModelError> {
    let StateFormula::Exists(p) = target else {
        unreachable!("quantified past literal")
    };
    let (neg, atom) = past_literal(p).expect("past literal");
    let (va, vb, since) = match atom {
        PathFormula::Yesterday(a) => (check_kripke(m, a)?, Vec::new(), false),
        PathFormula::Since(a, b) => (check_kripke(m, a)?, check_kripke(m, b)?, true),
        _ => unreachable!(),
    };
    // history bit of a state entered from a state with bit `v`
    let step = |from: Option<(usize, bool)>, to: usize| match (from, since) {
        (None, false) => false,
        (None, true) => vb[to],
        (Some((s, _)), false) => va[s],
        (Some((_, v)), true) => vb[to] || (va[to] && v),
    };
    let bit = m.props.len();
    let mut props = m.props.clone();
    props.push(name.to_string());
    let start = (m.initial, step(None, m.initial));
    let mut index: HashMap<(usize, bool), usize> = HashMap::from([(start, 0)]);
    let mut order = vec![start];
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    let mut n = 0;
    while n < order.len() {
        let (s, v) = order[n];
        labels.push(m.labels[s] | ((v != neg) as u64) << bit);
        let mut out = Vec::new();
        for &t in &m.edges[s] {
            let next = (t, step(Some((s, v)), t));
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    index.insert(next, order.len());
                    order.push(next);
                    order.len() - 1
                }
            };
            out.push(id);
        }
        edges.push(out);
        n += 1;
    }
    Ok(KripkeModel {
        props,
        labels,
        edges,
        initial: 0,
    })
}

struct KripkeCheck<'a> {
    m: &'a KripkeModel,
    memo: HashMap<StateFormula, Vec<bool>>,
}

impl KripkeCheck<'_> {
    fn state(&mut self, f: &StateFormula) -> Vec<bool> {
        if let Some(v) = self.memo.get(f) {
            return v.clone();
        }
        let n = self.m.len();
        let out = match f {
            StateFormula::True => vec![true; n],
            StateFormula::Prop(p) => {
                let i = self.m.props.iter().position(|q| q == p).expect("checked");
                self.m.labels.iter().map(|l| l >> i & 1 == 1).collect()
            }
            StateFormula::And(a, b) => {
                let (x, y) = (self.state(a), self.state(b));
                x.iter().zip(y).map(|(a, b)| *a && b).collect()
            }
            StateFormula::Not(a) => self.state(a).into_iter().map(|x| !x).collect(),
            StateFormula::Now(a) => self.state(a),
            StateFormula::Exists(psi) => self.exists(psi),
        };
        self.memo.insert(f.clone(), out.clone());
        out
    }

    fn dead(&self, s: usize) -> bool {
        self.m.edges[s].is_empty()
    }

    fn ex(&self, z: &[bool]) -> Vec<bool> {
        (0..self.m.len())
            .map(|s| self.m.edges[s].iter().any(|&t| z[t]))
            .collect()
    }

    fn ef(&self, target: &[bool]) -> Vec<bool> {
        self.eu(&vec![true; self.m.len()], target)
    }

    fn eu(&self, a: &[bool], b: &[bool]) -> Vec<bool> {
        let mut z = b.to_vec();
        loop {
            let next: Vec<bool> = (0..self.m.len())
                .map(|s| z[s] || (a[s] && self.m.edges[s].iter().any(|&t| z[t])))
                .collect();
            if next == z {
                return z;
            }
            z = next;
        }
    }

    /// States lying on a cycle inside `allowed`.
    fn on_cycle(&self, allowed: &[bool]) -> Vec<bool> {
        (0..self.m.len())
            .map(|s| {
                if !allowed[s] {
                    return false;
                }
                let mut seen = vec![false; self.m.len()];
                let mut stack: Vec<usize> = self.m.edges[s]
                    .iter()
                    .copied()
                    .filter(|&t| allowed[t])
                    .collect();
                while let Some(u) = stack.pop() {
                    if u == s {
                        return true;
                    }
                    if !seen[u] {
                        seen[u] = true;
                        stack.extend(self.m.edges[u].iter().copied().filter(|&t| allowed[t]));
                    }
                }
                false
            })
            .collect()
    }

    fn exists(&mut self, psi: &PathFormula) -> Vec<bool> {
        let n = self.m.len();
        match psi {
            PathFormula::State(s) => self.state(s),
            PathFormula::Next(a) => {
                let v = self.state(a);
                self.ex(&v)
            }
            PathFormula::Until(a, b) => {
                let (va, vb) = (self.state(a), self.state(b));
                self.eu(&va, &vb)
            }
            PathFormula::InfOften(a) => {
                let va = self.state(a);
                let cyc = self.on_cycle(&vec![true; n]);
                let good: Vec<bool> = (0..n).map(|s| va[s] && cyc[s]).collect();
                self.ef(&good)
            }
            PathFormula::Not(inner) => match &**inner {
                PathFormula::Next(a) => {
                    let va: Vec<bool> = self.state(a).into_iter().map(|x| !x).collect();
                    let e = self.ex(&va);
                    (0..n).map(|s| self.dead(s) || e[s]).collect()
                }
                PathFormula::Until(a, b) => {
                    let (va, vb) = (self.state(a), self.state(b));
                    let mut z = vec![true; n];
                    loop {
                        let next: Vec<bool> = (0..n)
                            .map(|s| {
                                !vb[s]
                                    && (!va[s]
                                        || self.dead(s)
                                        || self.m.edges[s].iter().any(|&t| z[t]))
                            })
                            .collect();
                        if next == z {
                            break z;
                        }
                        z = next;
                    }
                }
                PathFormula::InfOften(a) => {
                    let not_a: Vec<bool> = self.state(a).into_iter().map(|x| !x).collect();
                    let cyc = self.on_cycle(&not_a);
                    let target: Vec<bool> = (0..n).map(|s| self.dead(s) || cyc[s]).collect();
                    self.ef(&target)
                }
                _ => unreachable!("past and Boolean combinations rejected"),
            },
            _ => unreachable!("past and Boolean combinations rejected"),
        }
    }
}

// ---------------------------------------------------------------------------
// Finite model enumeration

/// Default cap on the number of candidate trees generated by
/// [`enumerate_models`].
pub const DEFAULT_SEARCH_CAP: usize = 4_000_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Shape {
    label: u64,
    children: Vec<u32>,
}

/// Canonical unordered trees with at most `max_nodes` nodes and degree at
/// most `max_degree`, labels over `nlabels` bits. Returned per size, each
/// size ordered by degree profile and then labels.
struct TreeCatalog {
    all: Vec<Shape>,
    sizes: Vec<usize>,
    by_size: Vec<Vec<u32>>,
}

impl TreeCatalog {
    fn build(
        max_nodes: usize,
        max_degree: usize,
        nprops: usize,
        cap: usize,
    ) -> Result<Self, ModelError> {
        let nlabels = 1u64 << nprops;
        let mut cat = TreeCatalog {
            all: vec![],
            sizes: vec![],
            by_size: vec![vec![]; max_nodes + 1],
        };
        for n in 1..=max_nodes {
            let mut child_seqs: Vec<Vec<u32>> = Vec::new();
            let mut current = Vec::new();
            cat.child_multisets(n - 1, max_degree, 0, &mut current, &mut child_seqs);
            let mut fresh: Vec<Shape> = Vec::new();
            for label in 0..nlabels {
                for seq in &child_seqs {
                    fresh.push(Shape {
                        label,
                        children: seq.clone(),
                    });
                    if cat.all.len() + fresh.len() > cap {
                        return Err(ModelError::SearchSpace(cap));
                    }
                }
            }
            let keyed: Vec<(Vec<usize>, Vec<u64>, Shape)> = fresh
                .into_iter()
                .map(|s| {
                    let (deg, labels) = cat.profile(&s);
                    (deg, labels, s)
                })
                .collect();
            let mut keyed = keyed;
            keyed.sort();
            for (_, _, s) in keyed {
                cat.by_size[n].push(cat.all.len() as u32);
                cat.all.push(s);
                cat.sizes.push(n);
            }
        }
        Ok(cat)
    }

    fn child_multisets(
        &self,
        remaining: usize,
        slots: usize,
        min: usize,
        cur: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if remaining == 0 {
            out.push(cur.clone());
            return;
        }
        if slots == 0 {
            return;
        }
        for idx in min..self.all.len() {
            let sz = self.sizes[idx];
            if sz <= remaining {
                cur.push(idx as u32);
                self.child_multisets(remaining - sz, slots - 1, idx, cur, out);
                cur.pop();
            }
        }
    }

    /// Breadth-first degree sequence and label sequence.
    fn profile(&self, s: &Shape) -> (Vec<usize>, Vec<u64>) {
        let mut deg = Vec::new();
        let mut labels = Vec::new();
        let mut queue: VecDeque<&Shape> = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            deg.push(x.children.len());
            labels.push(x.label);
            for &c in &x.children {
                queue.push_back(&self.all[c as usize]);
            }
        }
        (deg, labels)
    }

    fn materialize(&self, idx: u32, props: &[String], bits: &[usize]) -> FiniteTree {
        let relabel = |l: u64| -> u64 {
            bits.iter()
                .enumerate()
                .filter(|(i, _)| l >> i & 1 == 1)
                .map(|(_, &b)| 1u64 << b)
                .fold(0, |a, b| a | b)
        };
        let root = &self.all[idx as usize];
        let mut t = FiniteTree::new(props.to_vec(), relabel(root.label));
        let mut queue = VecDeque::from([(idx, 0usize)]);
        while let Some((src, dst)) = queue.pop_front() {
            for &c in &self.all[src as usize].children {
                let id = t.add_child(dst, relabel(self.all[c as usize].label));
                queue.push_back((c, id));
            }
        }
        t
    }
}

/// First tree (canonical order) of at most `max_nodes` nodes and degree at
/// most `max_degree` whose root satisfies `f`. Labels range over the
/// propositions of `f`. Absence is not a proof of unsatisfiability.
pub fn enumerate_models(
    f: &StateFormula,
    max_nodes: usize,
    max_degree: usize,
) -> Result<Option<FiniteTree>, ModelError> {
    enumerate_models_capped(f, max_nodes, max_degree, DEFAULT_SEARCH_CAP)
}

pub fn enumerate_models_capped(
    f: &StateFormula,
    max_nodes: usize,
    max_degree: usize,
    cap: usize,
) -> Result<Option<FiniteTree>, ModelError> {
    let props: Vec<String> = f.props().into_iter().collect();
    let bits: Vec<usize> = (0..props.len()).collect();
    enumerate_over(&props, &bits, max_nodes, max_degree, cap, |t| {
        Eval::new(t).state(0, f)
    })
}

/// Same as [`enumerate_models`] with a custom acceptance predicate.
/// Trees are labeled over `props`; only the props listed in `free` (as
/// indices into `props`) vary, others stay false.
pub fn enumerate_over(
    props: &[String],
    free: &[usize],
    max_nodes: usize,
    max_degree: usize,
    cap: usize,
    accept: impl Fn(&FiniteTree) -> bool + Sync,
) -> Result<Option<FiniteTree>, ModelError> {
    if free.len() > 16 {
        return Err(ModelError::SearchSpace(cap));
    }
    let cat = TreeCatalog::build(max_nodes, max_degree, free.len(), cap)?;
    for n in 1..=max_nodes {
        let found = cat.by_size[n]
            .par_iter()
            .map(|&idx| cat.materialize(idx, props, free))
            .find_first(|t| accept(t));
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}
