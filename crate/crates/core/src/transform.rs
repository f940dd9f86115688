//! Instance normalisations that preserve the connected search number, and the
//! three-copies gadget that turns a rooted instance into an unrooted one.
//!
//! The pipeline is `normalize_leaf_weights`, then `lift_edge_weights`, then
//! `subdivide_to_node_weighted`. Its output has unit edge weights, which is
//! the model the verifier and the solver work in.

use crate::semantics::SearchStrategy;
use crate::tree::{weight_mul, EdgeId, VertexId, Weight, WeightedRootedTree};

/// Every leaf, and the root when its degree is at most one, gets weight 1.
pub fn normalize_leaf_weights(t: &WeightedRootedTree) -> WeightedRootedTree {
    let weights = (0..t.vertex_count())
        .map(|v| if t.degree(v) <= 1 { 1 } else { t.weight(v) })
        .collect();
    t.with_weights(weights, t.edge_weights())
        .expect("weights stay positive")
}

/// `w(uv) := max(w(uv), w(v))` for every edge with `u` the father of `v`.
pub fn lift_edge_weights(t: &WeightedRootedTree) -> WeightedRootedTree {
    let edge_weights = (0..t.edge_count())
        .map(|e| {
            let (_, child) = t.oriented(e);
            t.edge(e).weight.max(t.weight(child))
        })
        .collect();
    t.with_weights(t.weights().to_vec(), edge_weights)
        .expect("weights stay positive")
}

/// Where a vertex of a derived tree comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Vertex(VertexId),
    /// The vertex inserted in the middle of an original edge.
    EdgeMidpoint(EdgeId),
}

/// `T'`: every edge `uv` becomes `u - x_uv - v` with `w(x_uv) = w(uv)` and unit
/// edges. Original vertices keep their ids; `x_e` gets id `n + e`. The half at
/// endpoint `a` of edge `e = (a, b)` is edge `2e`, the half at `b` is `2e + 1`.
#[derive(Debug, Clone)]
pub struct Subdivision {
    pub tree: WeightedRootedTree,
    pub origin: Vec<Origin>,
    original_vertices: usize,
}

impl Subdivision {
    pub fn midpoint(&self, e: EdgeId) -> VertexId {
        self.original_vertices + e
    }

    /// The original edge a new edge belongs to.
    pub fn source_edge(&self, half: EdgeId) -> EdgeId {
        half / 2
    }

    /// Maps a strategy on `T` to `T'` by clearing both halves in a row.
    pub fn lift_strategy(
        &self,
        original: &WeightedRootedTree,
        s: &SearchStrategy,
    ) -> SearchStrategy {
        let mut touched = vec![false; original.vertex_count()];
        touched[s.start] = true;
        let mut moves = Vec::with_capacity(2 * s.moves.len());
        for &e in &s.moves {
            let ed = original.edge(e);
            if touched[ed.a] {
                moves.extend([2 * e, 2 * e + 1]);
                touched[ed.b] = true;
            } else {
                moves.extend([2 * e + 1, 2 * e]);
                touched[ed.a] = true;
            }
        }
        SearchStrategy {
            start: s.start,
            moves,
        }
    }

    /// Maps a strategy on `T'` back to `T`: an original edge is cleared at the
    /// moment its first half is. A start at a midpoint moves to the endpoint
    /// of the first half cleared; a partial search may thus lose its first move.
    pub fn project_strategy(&self, s: &SearchStrategy) -> SearchStrategy {
        let mut seen = vec![false; self.original_vertices.saturating_sub(1)];
        let mut moves = Vec::with_capacity(s.moves.len() / 2);
        for &half in &s.moves {
            let e = self.source_edge(half);
            if !seen[e] {
                seen[e] = true;
                moves.push(e);
            }
        }
        let start = match self.origin[s.start] {
            Origin::Vertex(v) => v,
            Origin::EdgeMidpoint(e) => {
                // the first move leaves x_e through one half; the other
                // endpoint's side is reached later through the same edge
                let first = s.moves.first().copied().unwrap_or(2 * e);
                let ed = self.tree.edge(first);
                let far = if ed.a == s.start { ed.b } else { ed.a };
                match self.origin[far] {
                    Origin::Vertex(v) => v,
                    Origin::EdgeMidpoint(_) => unreachable!("midpoints are not adjacent"),
                }
            }
        };
        SearchStrategy { start, moves }
    }
}

pub fn subdivide_to_node_weighted(t: &WeightedRootedTree) -> Subdivision {
    let n = t.vertex_count();
    let mut weights = t.weights().to_vec();
    let mut origin: Vec<Origin> = (0..n).map(Origin::Vertex).collect();
    let mut edges = Vec::with_capacity(2 * t.edge_count());
    for (e, ed) in t.edges().iter().enumerate() {
        let x = n + e;
        weights.push(ed.weight);
        origin.push(Origin::EdgeMidpoint(e));
        edges.push((ed.a, x, 1));
        edges.push((x, ed.b, 1));
    }
    let tree = WeightedRootedTree::new(weights, edges, t.root()).expect("subdivision is a tree");
    Subdivision {
        tree,
        origin,
        original_vertices: n,
    }
}

/// Result of running the full pipeline.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub tree: WeightedRootedTree,
    /// `None` when the input already had unit edges and only leaf weights changed.
    pub subdivision: Option<Subdivision>,
}

impl Normalized {
    pub fn project_strategy(&self, s: &SearchStrategy) -> SearchStrategy {
        match &self.subdivision {
            None => s.clone(),
            Some(sub) => sub.project_strategy(s),
        }
    }

    pub fn lift_strategy(
        &self,
        original: &WeightedRootedTree,
        s: &SearchStrategy,
    ) -> SearchStrategy {
        match &self.subdivision {
            None => s.clone(),
            Some(sub) => sub.lift_strategy(original, s),
        }
    }
}

/// Leaf normalisation, then lifting and subdivision if any edge weight exceeds 1.
/// On unit-edge input lifting is a no-op in the move-cost model, since clearing
/// `uv` already charges `max(w(uv), w(v))`.
pub fn normalize(t: &WeightedRootedTree) -> Normalized {
    let leaves = normalize_leaf_weights(t);
    if leaves.has_unit_edges() {
        return Normalized {
            tree: leaves,
            subdivision: None,
        };
    }
    let lifted = lift_edge_weights(&leaves);
    let sub = subdivide_to_node_weighted(&lifted);
    Normalized {
        tree: sub.tree.clone(),
        subdivision: Some(sub),
    }
}

/// Where a vertex of the three-copies gadget comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GadgetOrigin {
    Apex,
    Copy { copy: usize, vertex: VertexId },
}

#[derive(Debug, Clone)]
pub struct Gadget {
    pub tree: WeightedRootedTree,
    pub origin: Vec<GadgetOrigin>,
    /// The unrooted target: `cs(tree) = 2k + 1` iff the input needs at most `k`.
    pub target: Weight,
}

/// Doubles every vertex and edge weight of `t`, then hangs three copies from
/// a new apex `r'` (vertex 0, weight 1) by unit edges to the copies' roots.
/// Copy `c` maps vertex `v` to id `1 + c·n + v`. The result is rooted at `r'`.
/// Leaf weights are normalised first: a root of degree one is free to leave
/// in `T_r` but becomes an inner vertex of the gadget.
pub fn unrooted_hardness_gadget(t: &WeightedRootedTree, k: Weight) -> Gadget {
    let t = &normalize_leaf_weights(t);
    let n = t.vertex_count();
    let mut weights = vec![1];
    let mut origin = vec![GadgetOrigin::Apex];
    let mut edges = Vec::with_capacity(3 * n);
    for copy in 0..3 {
        let base = 1 + copy * n;
        for v in 0..n {
            weights.push(weight_mul(2, t.weight(v)));
            origin.push(GadgetOrigin::Copy { copy, vertex: v });
        }
        edges.push((0, base + t.root(), 1));
        for ed in t.edges() {
            edges.push((base + ed.a, base + ed.b, weight_mul(2, ed.weight)));
        }
    }
    let tree = WeightedRootedTree::new(weights, edges, 0).expect("gadget is a tree");
    Gadget {
        tree,
        origin,
        target: weight_mul(2, k) + 1,
    }
}

/// All weights doubled.
pub fn doubled(t: &WeightedRootedTree) -> WeightedRootedTree {
    let vw = t.weights().iter().map(|&w| weight_mul(2, w)).collect();
    let ew = t
        .edge_weights()
        .into_iter()
        .map(|w| weight_mul(2, w))
        .collect();
    t.with_weights(vw, ew).expect("weights stay positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{oracle_cs, oracle_cs_unrooted};
    use crate::semantics::verify_weighted;
    use crate::tree::build::{path, unit_star};

    fn weighted_edge(wr: Weight, wv: Weight, we: Weight) -> WeightedRootedTree {
        WeightedRootedTree::new(vec![wr, wv], vec![(0, 1, we)], 0).unwrap()
    }

    #[test]
    fn leaf_normalisation() {
        let t = normalize_leaf_weights(&weighted_edge(2, 5, 3));
        assert_eq!(t.weights(), &[1, 1]);
        assert_eq!(t.edge(0).weight, 3);
        let p = path(&[1, 1, 1]);
        assert_eq!(normalize_leaf_weights(&p), p);
        let star = unit_star(3)
            .with_weights(vec![4, 7, 8, 9], vec![1; 3])
            .unwrap();
        let norm = normalize_leaf_weights(&star);
        assert_eq!(norm.weights(), &[4, 1, 1, 1]);
        assert_eq!(
            oracle_cs(&star, 0).unwrap().0,
            oracle_cs(&norm, 0).unwrap().0
        );
    }

    #[test]
    fn lifting() {
        let t = WeightedRootedTree::new(vec![3, 5, 1], vec![(0, 1, 2), (1, 2, 4)], 0).unwrap();
        let l = lift_edge_weights(&t);
        assert_eq!(l.edge_weights(), vec![5, 4]);
        assert_eq!(lift_edge_weights(&l), l);
    }

    #[test]
    fn subdivision_of_a_single_edge() {
        let t = weighted_edge(2, 1, 3);
        let sub = subdivide_to_node_weighted(&t);
        assert_eq!(sub.tree.weights(), &[2, 1, 3]);
        assert!(sub.tree.has_unit_edges());
        assert_eq!(sub.tree.edge_count(), 2);
        assert_eq!(sub.midpoint(0), 2);
        assert_eq!(oracle_cs(&sub.tree, 0).unwrap().0, 3);
        assert_eq!(oracle_cs(&t, 0).unwrap().0, 3);
    }

    #[test]
    fn subdivision_doubles_edges() {
        let t = path(&[1, 2, 3, 2, 1, 1]);
        let sub = subdivide_to_node_weighted(&t);
        assert_eq!(sub.tree.edge_count(), 10);
        assert!(sub.tree.weights()[6..].iter().all(|&w| w == 1));
        assert_eq!(
            oracle_cs_unrooted(&t).unwrap().0,
            oracle_cs_unrooted(&sub.tree).unwrap().0
        );
    }

    #[test]
    fn strategies_round_trip_through_subdivision() {
        let t = WeightedRootedTree::new(vec![2, 3, 1, 1], vec![(0, 1, 2), (1, 2, 4), (0, 3, 1)], 0)
            .unwrap();
        let norm = normalize(&t);
        let sub = norm.subdivision.as_ref().unwrap();
        let (k, s) = oracle_cs(&norm.tree, 0).unwrap();
        let back = norm.project_strategy(&s);
        assert!(verify_weighted(&t, &back, k).ok);
        let lifted = sub.lift_strategy(&t, &back);
        assert_eq!(sub.project_strategy(&lifted), back);
    }

    #[test]
    fn unit_edge_input_skips_subdivision() {
        let n = normalize(&path(&[7, 2, 7]));
        assert!(n.subdivision.is_none());
        assert_eq!(n.tree.weights(), &[1, 2, 1]);
    }

    #[test]
    fn gadget_examples() {
        let g = unrooted_hardness_gadget(&path(&[1, 1]), 1);
        assert_eq!(g.tree.vertex_count(), 7);
        assert_eq!(g.target, 3);
        assert_eq!(oracle_cs_unrooted(&g.tree).unwrap().0, 3);
        let g = unrooted_hardness_gadget(&unit_star(3), 2);
        assert_eq!(oracle_cs_unrooted(&g.tree).unwrap().0, 5);
        assert_eq!(g.origin[1], GadgetOrigin::Copy { copy: 0, vertex: 0 });
    }

    #[test]
    fn doubling_doubles_cs() {
        for t in [path(&[1, 3, 1]), unit_star(3), path(&[1, 2, 2, 1])] {
            assert_eq!(
                oracle_cs_unrooted(&doubled(&t)).unwrap().0,
                2 * oracle_cs_unrooted(&t).unwrap().0
            );
        }
    }
}
