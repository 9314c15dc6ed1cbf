use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{elimination_probs, project, ElectionModel, RoundTables};
use crate::domain::{CandidateId, CandidateSet, EliminationOrder};
use crate::error::{Error, Result};

/// Largest tree the engine will materialize.
pub const MAX_TREE_NODES: u128 = 50_000_000;

/// Win probability per candidate, indexed by candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinVector(pub Vec<f64>);

impl WinVector {
    pub fn zeros(n: usize) -> Self {
        WinVector(vec![0.0; n])
    }

    pub fn indicator(n: usize, winner: CandidateId) -> Self {
        let mut v = vec![0.0; n];
        v[winner.index()] = 1.0;
        WinVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, c: CandidateId) -> f64 {
        self.0[c.index()]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &WinVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn add_scaled(&mut self, w: f64, other: &WinVector) {
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += w * y;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub order: EliminationOrder,
    pub remaining: CandidateSet,
    /// Probability of the last elimination in `order`, given its parent.
    pub edge_weight: f64,
    /// Probability of reaching this node from the root.
    pub path_prob: f64,
    pub win: WinVector,
    /// Indices into [`EliminationTree::nodes`], by eliminated candidate.
    pub children: Vec<usize>,
}

/// Every elimination order, stored in pre-order with the root first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationTree {
    pub num_candidates: usize,
    pub nodes: Vec<TreeNode>,
}

impl EliminationTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn win(&self) -> &WinVector {
        &self.nodes[0].win
    }

    pub fn get(&self, order: &EliminationOrder) -> Option<&TreeNode> {
        let mut node = self.root();
        for &a in order.eliminated() {
            node = node
                .children
                .iter()
                .map(|&i| &self.nodes[i])
                .find(|n| n.order.eliminated().last() == Some(&a))?;
        }
        Some(node)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.children.is_empty())
    }
}

fn tree_size(remaining: usize) -> u128 {
    // Orders below a node with `remaining` standing, down to one survivor.
    let mut total: u128 = 1;
    let mut level: u128 = 1;
    for r in (2..=remaining).rev() {
        level = level.saturating_mul(r as u128);
        total = total.saturating_add(level);
    }
    total
}

fn check_size(model: &ElectionModel) -> Result<()> {
    let states = tree_size(model.remaining().len());
    if states > MAX_TREE_NODES {
        return Err(Error::StateSpaceTooLarge {
            states,
            limit: MAX_TREE_NODES,
        });
    }
    Ok(())
}

struct Subtree {
    node: TreeNode,
    children: Vec<Subtree>,
}

fn flatten(sub: Subtree, out: &mut Vec<TreeNode>) -> usize {
    let idx = out.len();
    out.push(sub.node);
    let mut kids = Vec::with_capacity(sub.children.len());
    for c in sub.children {
        kids.push(flatten(c, out));
    }
    out[idx].children = kids;
    idx
}

fn into_tree(n: usize, root: Subtree) -> EliminationTree {
    let mut nodes = Vec::new();
    flatten(root, &mut nodes);
    EliminationTree {
        num_candidates: n,
        nodes,
    }
}

/// Win vector by direct recursion over every elimination order.
pub fn win_vector(model: &ElectionModel) -> Result<EliminationTree> {
    check_size(model)?;
    let root = recurse(model, EliminationOrder::root(), 1.0, 1.0)?;
    Ok(into_tree(model.num_candidates(), root))
}

fn recurse(
    model: &ElectionModel,
    order: EliminationOrder,
    edge_weight: f64,
    path_prob: f64,
) -> Result<Subtree> {
    let n = model.num_candidates();
    let remaining = model.remaining();
    if remaining.len() == 1 {
        let winner = remaining.iter().next().unwrap();
        return Ok(Subtree {
            node: TreeNode {
                order,
                remaining,
                edge_weight,
                path_prob,
                win: WinVector::indicator(n, winner),
                children: Vec::new(),
            },
            children: Vec::new(),
        });
    }
    let elim = elimination_probs(&RoundTables::new(model)?)?;
    let children: Vec<Subtree> = remaining
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|a| {
            let next = project(model, a)?;
            let e = elim[&a];
            recurse(&next, order.then(a), e, path_prob * e)
        })
        .collect::<Result<_>>()?;
    let mut win = WinVector::zeros(n);
    for c in &children {
        win.add_scaled(c.node.edge_weight, &c.node.win);
    }
    Ok(Subtree {
        node: TreeNode {
            order,
            remaining,
            edge_weight,
            path_prob,
            win,
            children: Vec::new(),
        },
        children,
    })
}

/// Per eliminated set: elimination probabilities of the round it leads to.
type RoundCache = HashMap<CandidateSet, Vec<(CandidateId, f64)>>;

/// Win vector with rounds shared between orders that eliminate the same set.
///
/// A round depends only on which candidates are gone, so each of the
/// `2^n` sets is projected and scored once; the full tree is then read off
/// the cache.
pub fn win_vector_memoized(model: &ElectionModel) -> Result<EliminationTree> {
    check_size(model)?;
    let n = model.num_candidates();
    let start = model.remaining();
    let total = start.len();

    let mut elim: RoundCache = HashMap::new();
    let mut level: Vec<(CandidateSet, ElectionModel)> = vec![(CandidateSet::EMPTY, model.clone())];
    // Only rounds with two or more standing candidates need a model.
    for depth in 0..total.saturating_sub(1) {
        let scored: Vec<(CandidateSet, Vec<(CandidateId, f64)>)> = level
            .par_iter()
            .map(|(gone, m)| {
                let e = elimination_probs(&RoundTables::new(m)?)?;
                Ok((*gone, e.into_iter().collect()))
            })
            .collect::<Result<_>>()?;
        elim.extend(scored);
        if depth + 2 >= total {
            break;
        }
        let index: HashMap<CandidateSet, &ElectionModel> =
            level.iter().map(|(s, m)| (*s, m)).collect();
        let mut next_sets: Vec<CandidateSet> = level
            .iter()
            .flat_map(|(gone, _)| {
                start
                    .iter()
                    .filter(|c| !gone.contains(*c))
                    .map(move |c| gone.with(c))
            })
            .collect();
        next_sets.sort();
        next_sets.dedup();
        // Canonical parent: drop the highest-indexed eliminated candidate.
        let next: Vec<(CandidateSet, ElectionModel)> = next_sets
            .into_par_iter()
            .map(|s| {
                let last = s.iter().last().unwrap();
                let parent = index[&s.without(last)];
                project(parent, last).map(|m| (s, m))
            })
            .collect::<Result<_>>()?;
        level = next;
    }

    // Bottom-up win vectors per eliminated set.
    let mut wins: HashMap<CandidateSet, WinVector> = HashMap::new();
    let mut sets: Vec<CandidateSet> = elim.keys().copied().collect();
    sets.sort_by_key(|s| std::cmp::Reverse(s.len()));
    for s in sets {
        let mut w = WinVector::zeros(n);
        for &(a, p) in &elim[&s] {
            let child = s.with(a);
            let cw = match wins.get(&child) {
                Some(cw) => cw.clone(),
                None => {
                    let rest: Vec<CandidateId> =
                        start.iter().filter(|c| !child.contains(*c)).collect();
                    debug_assert_eq!(rest.len(), 1);
                    WinVector::indicator(n, rest[0])
                }
            };
            w.add_scaled(p, &cw);
        }
        wins.insert(s, w);
    }
    if total == 1 {
        wins.insert(
            CandidateSet::EMPTY,
            WinVector::indicator(n, start.iter().next().unwrap()),
        );
    }

    let root = assemble(n, start, EliminationOrder::root(), 1.0, 1.0, &elim, &wins);
    Ok(into_tree(n, root))
}

fn assemble(
    n: usize,
    start: CandidateSet,
    order: EliminationOrder,
    edge_weight: f64,
    path_prob: f64,
    elim: &RoundCache,
    wins: &HashMap<CandidateSet, WinVector>,
) -> Subtree {
    let gone = order.as_set();
    let remaining = CandidateSet::from_bits(start.bits() & !gone.bits());
    let win = match wins.get(&gone) {
        Some(w) => w.clone(),
        None => WinVector::indicator(n, remaining.iter().next().unwrap()),
    };
    let children = match elim.get(&gone) {
        Some(probs) if remaining.len() > 1 => probs
            .iter()
            .map(|&(a, p)| assemble(n, start, order.then(a), p, path_prob * p, elim, wins))
            .collect(),
        _ => Vec::new(),
    };
    Subtree {
        node: TreeNode {
            order,
            remaining,
            edge_weight,
            path_prob,
            win,
            children: Vec::new(),
        },
        children,
    }
}
