//! Exhaustive reference answers for small trees.
//!
//! The main oracle is a dynamic program over sets of cleared edges: a set is
//! reachable with peak `p` if some connected monotone order clearing exactly
//! that set never needs more than `p` searchers. Single-move costs only depend
//! on the set cleared before the move, so `best[S ∪ {e}] ≤ max(best[S], cost)`
//! is exact. Sets are processed in increasing numeric order, which is a
//! topological order of the inclusion lattice.
//!
//! A second oracle enumerates edge permutations and recomputes guard sets from
//! scratch at every step. It is slow and only meant for cross-checking.

use std::collections::BTreeSet;

use itertools::Itertools;
use thiserror::Error;

use crate::semantics::{guarded_set_in, Scope, SearchStrategy, SemanticsError};
use crate::tree::{
    weight_add, EdgeId, SubtreeRef, TreeError, VertexId, Weight, WeightedRootedTree,
};

pub const DEFAULT_MAX_EDGES: usize = 20;
pub const HARD_MAX_EDGES: usize = 24;
pub const PERMUTATION_MAX_EDGES: usize = 7;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("tree has {edges} edges; the exhaustive search is capped at {cap}")]
    TooManyEdges { edges: usize, cap: usize },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

const UNREACHED: Weight = Weight::MAX;

/// Subset DP for one start vertex, over local edge indices `0..m`.
struct SubsetTable {
    start: VertexId,
    // local edge index -> (global edge id, endpoint a, endpoint b, weight); endpoints are tree ids
    edges: Vec<(EdgeId, VertexId, VertexId, Weight)>,
    // vertex -> bitmask of incident in-scope edges
    inc: Vec<u32>,
    weights: Vec<Weight>,
    best: Vec<Weight>,
    pred: Vec<u8>,
}

impl SubsetTable {
    fn build(
        t: &WeightedRootedTree,
        scope_edges: &BTreeSet<EdgeId>,
        start: VertexId,
        cap: usize,
    ) -> Result<Self, OracleError> {
        let cap = cap.min(HARD_MAX_EDGES);
        let m = scope_edges.len();
        if m > cap {
            return Err(OracleError::TooManyEdges { edges: m, cap });
        }
        let edges: Vec<_> = scope_edges
            .iter()
            .map(|&e| {
                let ed = t.edge(e);
                (e, ed.a, ed.b, ed.weight)
            })
            .collect();
        let mut inc = vec![0u32; t.vertex_count()];
        for (i, &(_, a, b, _)) in edges.iter().enumerate() {
            inc[a] |= 1 << i;
            inc[b] |= 1 << i;
        }
        let size = 1usize << m;
        let mut table = SubsetTable {
            start,
            edges,
            inc,
            weights: t.weights().to_vec(),
            best: vec![UNREACHED; size],
            pred: vec![u8::MAX; size],
        };
        table.run();
        Ok(table)
    }

    fn touched(&self, mask: u32) -> Vec<VertexId> {
        let mut out = vec![self.start];
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let (_, a, b, _) = self.edges[i];
            out.push(a);
            out.push(b);
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn guard(&self, mask: u32) -> Weight {
        self.touched(mask)
            .into_iter()
            .filter(|&x| self.inc[x] & !mask != 0)
            .map(|x| self.weights[x])
            .fold(0, weight_add)
    }

    fn run(&mut self) {
        let m = self.edges.len();
        self.best[0] = 0;
        let n = self.weights.len();
        let mut is_touched = vec![false; n];
        for mask in 0..(1u32 << m) {
            let here = self.best[mask as usize];
            if here == UNREACHED {
                continue;
            }
            let touched = self.touched(mask);
            for &x in &touched {
                is_touched[x] = true;
            }
            let g_all = touched
                .iter()
                .filter(|&&x| self.inc[x] & !mask != 0)
                .map(|&x| self.weights[x])
                .fold(0, weight_add);
            for (i, &(_, a, b, w)) in self.edges.iter().enumerate() {
                let bit = 1u32 << i;
                if mask & bit != 0 {
                    continue;
                }
                let (u, v) = match (is_touched[a], is_touched[b]) {
                    (true, false) => (a, b),
                    (false, true) => (b, a),
                    _ => continue,
                };
                let open_u = (self.inc[u] & !mask).count_ones();
                let open_v = (self.inc[v] & !mask).count_ones();
                let mut g = g_all - self.weights[u];
                if open_u > 1 {
                    g = weight_add(g, self.weights[u]);
                }
                let c = if open_v > 1 {
                    w.max(self.weights[v])
                } else {
                    w
                };
                let peak = here.max(weight_add(c, g));
                let next = (mask | bit) as usize;
                if peak < self.best[next] {
                    self.best[next] = peak;
                    self.pred[next] = i as u8;
                }
            }
            for &x in &touched {
                is_touched[x] = false;
            }
        }
    }

    fn full(&self) -> u32 {
        ((1u64 << self.edges.len()) - 1) as u32
    }

    fn witness(&self, mut mask: u32) -> SearchStrategy {
        let mut moves = Vec::new();
        while mask != 0 {
            let i = self.pred[mask as usize];
            moves.push(self.edges[i as usize].0);
            mask &= !(1u32 << i);
        }
        moves.reverse();
        SearchStrategy {
            start: self.start,
            moves,
        }
    }
}

/// Connected search number with a fixed start vertex, and an optimal strategy.
pub fn oracle_cs(
    t: &WeightedRootedTree,
    start: VertexId,
) -> Result<(Weight, SearchStrategy), OracleError> {
    oracle_cs_capped(t, start, DEFAULT_MAX_EDGES)
}

pub fn oracle_cs_capped(
    t: &WeightedRootedTree,
    start: VertexId,
    cap: usize,
) -> Result<(Weight, SearchStrategy), OracleError> {
    if !t.contains(start) {
        return Err(SemanticsError::UnknownStart(start).into());
    }
    let all: BTreeSet<EdgeId> = (0..t.edge_count()).collect();
    let table = SubsetTable::build(t, &all, start, cap)?;
    let full = table.full();
    Ok((table.best[full as usize], table.witness(full)))
}

/// `cs(T)`: minimum over every start vertex. Ties go to the smallest start id.
pub fn oracle_cs_unrooted(t: &WeightedRootedTree) -> Result<(Weight, SearchStrategy), OracleError> {
    oracle_cs_unrooted_capped(t, DEFAULT_MAX_EDGES)
}

pub fn oracle_cs_unrooted_capped(
    t: &WeightedRootedTree,
    cap: usize,
) -> Result<(Weight, SearchStrategy), OracleError> {
    let mut best: Option<(Weight, SearchStrategy)> = None;
    for v in 0..t.vertex_count() {
        let r = oracle_cs_capped(t, v, cap)?;
        if best.as_ref().is_none_or(|b| r.0 < b.0) {
            best = Some(r);
        }
    }
    Ok(best.expect("trees are non-empty"))
}

/// Minimum `w(δ(S))` over partial `k`-searches `S` of `T_v` starting at the
/// head `v`, with a witness. The empty strategy is always a candidate.
pub fn oracle_min_guard(
    sub: SubtreeRef<'_>,
    k: Weight,
) -> Result<(Weight, SearchStrategy), OracleError> {
    oracle_min_guard_capped(sub, k, DEFAULT_MAX_EDGES)
}

pub fn oracle_min_guard_capped(
    sub: SubtreeRef<'_>,
    k: Weight,
    cap: usize,
) -> Result<(Weight, SearchStrategy), OracleError> {
    let table = SubsetTable::build(sub.tree, &sub.edges(), sub.head, cap)?;
    let mut best: Option<(Weight, u32)> = None;
    for mask in 0..=table.full() {
        if table.best[mask as usize] > k {
            continue;
        }
        let g = table.guard(mask);
        if best.is_none_or(|(bg, _)| g < bg) {
            best = Some((g, mask));
        }
    }
    let (g, mask) = best.expect("the empty set is always reachable");
    Ok((g, table.witness(mask)))
}

/// Pareto list of `(peak, guard)` over partial searches of `T_v` from `v`:
/// peaks strictly increase and guards strictly decrease along the list.
pub fn guard_profile(sub: SubtreeRef<'_>) -> Result<Vec<(Weight, Weight)>, OracleError> {
    let table = SubsetTable::build(sub.tree, &sub.edges(), sub.head, DEFAULT_MAX_EDGES)?;
    let mut pts: Vec<(Weight, Weight)> = (0..=table.full())
        .filter(|&m| table.best[m as usize] != UNREACHED)
        .map(|m| (table.best[m as usize], table.guard(m)))
        .collect();
    pts.sort_unstable();
    let mut out: Vec<(Weight, Weight)> = Vec::new();
    for (p, g) in pts {
        if out.last().is_none_or(|&(_, lg)| g < lg) {
            out.push((p, g));
        }
    }
    Ok(out)
}

/// Brute force over all edge orders, recomputing `δ` from scratch for every
/// move. Returns the optimum over all starts (smallest start id on ties).
pub fn permutation_oracle_cs(t: &WeightedRootedTree) -> Result<Weight, OracleError> {
    let m = t.edge_count();
    if m > PERMUTATION_MAX_EDGES {
        return Err(OracleError::TooManyEdges {
            edges: m,
            cap: PERMUTATION_MAX_EDGES,
        });
    }
    let scope = Scope::whole(t);
    let mut best = UNREACHED;
    for start in 0..t.vertex_count() {
        if m == 0 {
            return Ok(0);
        }
        'orders: for order in (0..m).permutations(m) {
            let mut cleared = BTreeSet::new();
            let mut peak = 0;
            for &e in &order {
                match stateless_cost(t, &scope, &cleared, start, e) {
                    Some(c) => peak = peak.max(c),
                    None => continue 'orders,
                }
                if peak >= best {
                    continue 'orders;
                }
                cleared.insert(e);
            }
            best = peak;
        }
    }
    Ok(best)
}

/// `c + g` for clearing `e` after `cleared`, derived only from the guard sets
/// before and after the move. `None` if the move is not connected.
fn stateless_cost(
    t: &WeightedRootedTree,
    scope: &Scope,
    cleared: &BTreeSet<EdgeId>,
    start: VertexId,
    e: EdgeId,
) -> Option<Weight> {
    let before = guarded_set_in(t, scope, cleared, start).ok()?;
    let mut after_set = cleared.clone();
    after_set.insert(e);
    let after = guarded_set_in(t, scope, &after_set, start).ok()?;
    let touched_before: BTreeSet<VertexId> = std::iter::once(start)
        .chain(cleared.iter().flat_map(|&x| [t.edge(x).a, t.edge(x).b]))
        .collect();
    let ed = t.edge(e);
    let (u, v) = if touched_before.contains(&ed.a) {
        (ed.a, ed.b)
    } else {
        (ed.b, ed.a)
    };
    let g: Weight = before
        .iter()
        .filter(|&(&x, _)| x != u)
        .map(|(_, &w)| w)
        .sum::<Weight>()
        + after.get(&u).copied().unwrap_or(0);
    let c = ed.weight.max(after.get(&v).copied().unwrap_or(0));
    Some(c + g)
}

/// Canonical rooted tree used by the enumerator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Shape {
    edges: usize,
    weight: Weight,
    children: Vec<usize>,
}

/// Every rooted tree with at most `max_edges` edges and maximum degree at most
/// `max_degree`, up to isomorphism, with each non-leaf vertex weight drawn from
/// `weights`. Leaves, and a root of degree one, get weight 1. Edges are unit.
pub fn enumerate_small_trees(
    max_edges: usize,
    max_degree: usize,
    weights: &[Weight],
) -> Vec<WeightedRootedTree> {
    let weights: Vec<Weight> = weights.iter().copied().sorted().dedup().collect();
    // pool of non-root shapes, ordered by edge count; a non-root vertex keeps
    // one degree for its parent edge
    let mut pool: Vec<Shape> = Vec::new();
    for e in 0..max_edges {
        let child_cap = max_degree.saturating_sub(1);
        let mut found = Vec::new();
        forests(&pool, e, child_cap, 0, &mut Vec::new(), &mut |kids| {
            if kids.is_empty() {
                found.push(Shape {
                    edges: 0,
                    weight: 1,
                    children: vec![],
                });
            } else {
                for &w in &weights {
                    found.push(Shape {
                        edges: e,
                        weight: w,
                        children: kids.to_vec(),
                    });
                }
            }
        });
        pool.extend(found);
    }
    let mut out = Vec::new();
    for e in 0..=max_edges {
        forests(&pool, e, max_degree, 0, &mut Vec::new(), &mut |kids| {
            let ws: Vec<Weight> = if kids.len() <= 1 {
                vec![1]
            } else {
                weights.clone()
            };
            for w in ws {
                out.push(materialize(&pool, w, kids));
            }
        });
    }
    out
}

/// Calls `emit` with every nondecreasing sequence of pool indices (at least
/// `min_index`) of length at most `max_children` whose subtrees use exactly
/// `edges` edges in total (each child adds its own edge).
fn forests(
    pool: &[Shape],
    edges: usize,
    max_children: usize,
    min_index: usize,
    acc: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if edges == 0 {
        emit(acc);
        return;
    }
    if acc.len() == max_children {
        return;
    }
    for i in min_index..pool.len() {
        let need = pool[i].edges + 1;
        if need > edges {
            // pool is sorted by edge count
            break;
        }
        acc.push(i);
        forests(pool, edges - need, max_children, i, acc, emit);
        acc.pop();
    }
}

fn materialize(pool: &[Shape], root_weight: Weight, kids: &[usize]) -> WeightedRootedTree {
    let mut weights = vec![root_weight];
    let mut edges = Vec::new();
    let mut stack: Vec<(usize, VertexId)> = kids.iter().rev().map(|&k| (k, 0)).collect();
    while let Some((k, parent)) = stack.pop() {
        let id = weights.len();
        weights.push(pool[k].weight);
        edges.push((parent, id, 1));
        stack.extend(pool[k].children.iter().rev().map(|&c| (c, id)));
    }
    WeightedRootedTree::new(weights, edges, 0).expect("enumerated shapes are trees")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{verify_partial, verify_weighted};
    use crate::tree::build::{from_parents, path, unit_star};

    #[test]
    fn small_examples() {
        assert_eq!(oracle_cs_unrooted(&path(&[1])).unwrap().0, 0);
        assert_eq!(oracle_cs_unrooted(&path(&[1, 1])).unwrap().0, 1);
        assert_eq!(oracle_cs_unrooted(&path(&[1, 1, 1, 1])).unwrap().0, 1);
        assert_eq!(oracle_cs_unrooted(&unit_star(3)).unwrap().0, 2);
        // heavy middle: sweeping from an end must hold the middle while sliding
        let p = path(&[1, 7, 1]);
        assert_eq!(oracle_cs_unrooted(&p).unwrap().0, 7);
        let (k, s) = oracle_cs_unrooted(&unit_star(4)).unwrap();
        assert!(verify_weighted(&unit_star(4), &s, k).ok);
    }

    #[test]
    fn edge_weights_are_respected() {
        let t = WeightedRootedTree::new(vec![1, 1], vec![(0, 1, 5)], 0).unwrap();
        assert_eq!(oracle_cs_unrooted(&t).unwrap().0, 5);
    }

    #[test]
    fn cap_is_enforced() {
        let p = path(&[1; 30]);
        assert_eq!(
            oracle_cs_unrooted(&p).unwrap_err(),
            OracleError::TooManyEdges {
                edges: 29,
                cap: DEFAULT_MAX_EDGES
            }
        );
        assert!(matches!(
            oracle_cs_unrooted_capped(&p, 100),
            Err(OracleError::TooManyEdges {
                cap: HARD_MAX_EDGES,
                ..
            })
        ));
    }

    #[test]
    fn min_guard_and_profile() {
        // root 0 (w 5) above 1 (w 3), which has two leaf children
        let t = from_parents(&[5, 3, 1, 1], &[0, 1, 1]).unwrap();
        let sub = SubtreeRef::new(&t, 1).unwrap();
        assert_eq!(oracle_min_guard(sub, 0).unwrap().0, 3);
        // the first leaf edge costs 3+1 and leaves vertex 1 guarded
        assert_eq!(oracle_min_guard(sub, 3).unwrap().0, 3);
        let (g, s) = oracle_min_guard(sub, 4).unwrap();
        assert_eq!(g, 0);
        assert!(verify_partial(sub, &s, 4).ok);
        assert_eq!(guard_profile(sub).unwrap(), vec![(0, 3), (4, 0)]);
    }

    #[test]
    fn permutation_oracle_agrees_on_small_corpus() {
        for t in enumerate_small_trees(5, 3, &[1, 2, 3]) {
            let a = oracle_cs_unrooted(&t).unwrap().0;
            let b = permutation_oracle_cs(&t).unwrap();
            assert_eq!(a, b, "{t}");
        }
    }

    #[test]
    fn enumeration_counts() {
        // unlabelled rooted trees with n vertices: 1, 1, 2, 4, 9, 20
        let counts: Vec<usize> = (0..=5)
            .map(|e| {
                enumerate_small_trees(e, usize::MAX, &[1])
                    .into_iter()
                    .filter(|t| t.edge_count() == e)
                    .count()
            })
            .collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 9, 20]);
        for t in enumerate_small_trees(6, 3, &[1, 2]) {
            assert!(t.max_degree() <= 3);
        }
    }
}
