//! Weighted rooted trees.
//!
//! The undirected structure (weights, edge list, adjacency) is built once and
//! shared behind an `Arc`; a `WeightedRootedTree` is that structure plus an
//! orientation towards a chosen root. Re-rooting produces a new orientation
//! over the same shared structure.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;
pub type Weight = u64;

/// Overflow-checked weight addition. Reduction instances carry weights that
/// grow polynomially in the input numbers, so a silent wrap would corrupt
/// every downstream comparison.
#[inline]
pub fn weight_add(a: Weight, b: Weight) -> Weight {
    match a.checked_add(b) {
        Some(s) => s,
        None => panic!("weight overflow: {a} + {b} exceeds u64"),
    }
}

#[inline]
pub fn weight_mul(a: Weight, b: Weight) -> Weight {
    match a.checked_mul(b) {
        Some(p) => p,
        None => panic!("weight overflow: {a} * {b} exceeds u64"),
    }
}

pub fn weight_sum<I: IntoIterator<Item = Weight>>(it: I) -> Weight {
    it.into_iter().fold(0, weight_add)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("tree has no vertices")]
    Empty,
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("a tree on {vertices} vertices needs {} edges, got {edges}", vertices - 1)]
    EdgeCount { vertices: usize, edges: usize },
    #[error("edge {0}-{1} is a self loop")]
    SelfLoop(VertexId, VertexId),
    #[error("edges do not connect vertex {0} to the root")]
    Disconnected(VertexId),
    #[error("vertex {0} has weight 0; weights must be positive")]
    ZeroVertexWeight(VertexId),
    #[error("edge {0}-{1} has weight 0; weights must be positive")]
    ZeroEdgeWeight(VertexId, VertexId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub a: VertexId,
    pub b: VertexId,
    pub weight: Weight,
}

impl Edge {
    #[inline]
    pub fn other(&self, x: VertexId) -> VertexId {
        if x == self.a {
            self.b
        } else {
            debug_assert_eq!(x, self.b);
            self.a
        }
    }

    #[inline]
    pub fn touches(&self, x: VertexId) -> bool {
        self.a == x || self.b == x
    }
}

#[derive(Debug)]
struct Shape {
    weights: Vec<Weight>,
    edges: Vec<Edge>,
    // neighbours sorted by vertex id
    adj: Vec<Vec<(VertexId, EdgeId)>>,
}

#[derive(Debug, Clone)]
pub struct WeightedRootedTree {
    shape: Arc<Shape>,
    root: VertexId,
    parent: Vec<Option<(VertexId, EdgeId)>>,
    preorder: Vec<VertexId>,
}

impl PartialEq for WeightedRootedTree {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
            && self.shape.weights == other.shape.weights
            && self.shape.edges == other.shape.edges
    }
}

impl Eq for WeightedRootedTree {}

impl WeightedRootedTree {
    /// Builds a tree from dense vertex weights (`weights[v]` is the weight of
    /// vertex `v`) and an edge list `(u, v, weight)`. Edges may be listed in
    /// either orientation; they are oriented away from `root`.
    pub fn new(
        weights: Vec<Weight>,
        edges: Vec<(VertexId, VertexId, Weight)>,
        root: VertexId,
    ) -> Result<Self, TreeError> {
        let n = weights.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        if root >= n {
            return Err(TreeError::UnknownVertex(root));
        }
        if edges.len() != n - 1 {
            return Err(TreeError::EdgeCount {
                vertices: n,
                edges: edges.len(),
            });
        }
        if let Some(v) = weights.iter().position(|&w| w == 0) {
            return Err(TreeError::ZeroVertexWeight(v));
        }
        let mut adj = vec![Vec::new(); n];
        let mut edge_list = Vec::with_capacity(edges.len());
        for (id, &(a, b, w)) in edges.iter().enumerate() {
            if a >= n {
                return Err(TreeError::UnknownVertex(a));
            }
            if b >= n {
                return Err(TreeError::UnknownVertex(b));
            }
            if a == b {
                return Err(TreeError::SelfLoop(a, b));
            }
            if w == 0 {
                return Err(TreeError::ZeroEdgeWeight(a, b));
            }
            adj[a].push((b, id));
            adj[b].push((a, id));
            edge_list.push(Edge { a, b, weight: w });
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let shape = Arc::new(Shape {
            weights,
            edges: edge_list,
            adj,
        });
        Self::orient(shape, root)
    }

    fn orient(shape: Arc<Shape>, root: VertexId) -> Result<Self, TreeError> {
        let n = shape.weights.len();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(v) = stack.pop() {
            preorder.push(v);
            // push in reverse so that children are visited in ascending order
            for &(c, e) in shape.adj[v].iter().rev() {
                if !seen[c] {
                    seen[c] = true;
                    parent[c] = Some((v, e));
                    stack.push(c);
                }
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(TreeError::Disconnected(v));
        }
        Ok(WeightedRootedTree {
            shape,
            root,
            parent,
            preorder,
        })
    }

    /// Same undirected weighted tree, oriented towards `root`.
    pub fn rerooted(&self, root: VertexId) -> Result<Self, TreeError> {
        self.check(root)?;
        Self::orient(Arc::clone(&self.shape), root)
    }

    /// Same structure with new vertex and edge weights.
    pub fn with_weights(
        &self,
        vertex_weights: Vec<Weight>,
        edge_weights: Vec<Weight>,
    ) -> Result<Self, TreeError> {
        assert_eq!(vertex_weights.len(), self.vertex_count());
        assert_eq!(edge_weights.len(), self.edge_count());
        let edges = self
            .shape
            .edges
            .iter()
            .zip(edge_weights)
            .map(|(e, w)| (e.a, e.b, w))
            .collect();
        Self::new(vertex_weights, edges, self.root)
    }

    #[inline]
    fn check(&self, v: VertexId) -> Result<(), TreeError> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(TreeError::UnknownVertex(v))
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v < self.vertex_count()
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.shape.weights.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.shape.edges.len()
    }

    #[inline]
    pub fn root(&self) -> VertexId {
        self.root
    }

    #[inline]
    pub fn weight(&self, v: VertexId) -> Weight {
        self.shape.weights[v]
    }

    pub fn weights(&self) -> &[Weight] {
        &self.shape.weights
    }

    #[inline]
    pub fn edge(&self, e: EdgeId) -> Edge {
        self.shape.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.shape.edges
    }

    pub fn edge_weights(&self) -> Vec<Weight> {
        self.shape.edges.iter().map(|e| e.weight).collect()
    }

    /// Neighbours of `v` with the connecting edge, ascending by vertex id.
    #[inline]
    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.shape.adj[v]
    }

    #[inline]
    pub fn degree(&self, v: VertexId) -> usize {
        self.shape.adj[v].len()
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent[v].map(|(p, _)| p)
    }

    pub fn parent_edge(&self, v: VertexId) -> Option<EdgeId> {
        self.parent[v].map(|(_, e)| e)
    }

    /// Vertices in depth-first preorder from the root, children ascending.
    pub fn preorder(&self) -> &[VertexId] {
        &self.preorder
    }

    /// Child vertices of `v`, ascending.
    pub fn children(&self, v: VertexId) -> Result<Vec<VertexId>, TreeError> {
        self.check(v)?;
        Ok(self.child_edges(v).map(|(c, _)| c).collect())
    }

    /// `(child, edge)` pairs below `v`, ascending by child id. This is E_v.
    pub fn child_edges(&self, v: VertexId) -> impl Iterator<Item = (VertexId, EdgeId)> + '_ {
        let up = self.parent[v].map(|(p, _)| p);
        self.shape.adj[v]
            .iter()
            .copied()
            .filter(move |&(c, _)| Some(c) != up)
    }

    pub fn child_count(&self, v: VertexId) -> usize {
        self.degree(v) - usize::from(self.parent[v].is_some())
    }

    /// A leaf is a non-root vertex of degree 1, or the root when its degree is at most 1.
    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.degree(v) <= 1
    }

    /// `(parent, child)` orientation of edge `e` relative to the root.
    pub fn oriented(&self, e: EdgeId) -> (VertexId, VertexId) {
        let Edge { a, b, .. } = self.shape.edges[e];
        if self.parent[b].map(|(_, pe)| pe) == Some(e) {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn edge_between(&self, a: VertexId, b: VertexId) -> Option<EdgeId> {
        if a >= self.vertex_count() {
            return None;
        }
        let adj = &self.shape.adj[a];
        adj.binary_search_by_key(&b, |&(x, _)| x)
            .ok()
            .map(|i| adj[i].1)
    }

    /// All edges of the maximal subtree rooted at `v`.
    pub fn subtree_edges(&self, v: VertexId) -> Result<BTreeSet<EdgeId>, TreeError> {
        self.check(v)?;
        let mut out = BTreeSet::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            for (c, e) in self.child_edges(x) {
                out.insert(e);
                stack.push(c);
            }
        }
        Ok(out)
    }

    pub fn subtree_vertices(&self, v: VertexId) -> Result<Vec<VertexId>, TreeError> {
        self.check(v)?;
        let mut out = vec![];
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            out.push(x);
            for (c, _) in self.child_edges(x) {
                stack.push(c);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Maximum undirected vertex degree.
    pub fn max_degree(&self) -> usize {
        self.shape.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_unit_edges(&self) -> bool {
        self.shape.edges.iter().all(|e| e.weight == 1)
    }

    pub fn total_vertex_weight(&self) -> Weight {
        weight_sum(self.shape.weights.iter().copied())
    }

    /// Copies `T_v` out as a standalone tree rooted at the image of `v`.
    /// Returns the tree, the old id of each new vertex, and the old id of each
    /// new edge. New vertex ids follow ascending old ids.
    pub fn extract_subtree(
        &self,
        v: VertexId,
    ) -> Result<(WeightedRootedTree, Vec<VertexId>, Vec<EdgeId>), TreeError> {
        let verts = self.subtree_vertices(v)?;
        let mut index = vec![usize::MAX; self.vertex_count()];
        for (i, &x) in verts.iter().enumerate() {
            index[x] = i;
        }
        let edge_ids: Vec<EdgeId> = self.subtree_edges(v)?.into_iter().collect();
        let edges = edge_ids
            .iter()
            .map(|&e| {
                let Edge { a, b, weight } = self.edge(e);
                (index[a], index[b], weight)
            })
            .collect();
        let weights = verts.iter().map(|&x| self.weight(x)).collect();
        let t = WeightedRootedTree::new(weights, edges, index[v])?;
        Ok((t, verts, edge_ids))
    }
}

impl fmt::Display for WeightedRootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tree(root={}; w=[", self.root)?;
        for (i, w) in self.shape.weights.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, "]; edges=[")?;
        for (i, e) in self.shape.edges.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}-{}:{}", e.a, e.b, e.weight)?;
        }
        write!(f, "])")
    }
}

/// `T_v`, the subtree of a rooted tree hanging from `head`.
#[derive(Debug, Clone, Copy)]
pub struct SubtreeRef<'a> {
    pub tree: &'a WeightedRootedTree,
    pub head: VertexId,
}

impl<'a> SubtreeRef<'a> {
    pub fn new(tree: &'a WeightedRootedTree, head: VertexId) -> Result<Self, TreeError> {
        tree.check(head)?;
        Ok(SubtreeRef { tree, head })
    }

    pub fn whole(tree: &'a WeightedRootedTree) -> Self {
        SubtreeRef {
            tree,
            head: tree.root(),
        }
    }

    pub fn edges(&self) -> BTreeSet<EdgeId> {
        self.tree
            .subtree_edges(self.head)
            .expect("head checked on construction")
    }
}

/// Unit-weight builders used throughout tests and examples.
pub mod build {
    use super::*;

    /// Path `0 - 1 - ... - (n-1)` rooted at 0 with the given vertex weights and unit edges.
    pub fn path(weights: &[Weight]) -> WeightedRootedTree {
        let edges = (1..weights.len()).map(|i| (i - 1, i, 1)).collect();
        WeightedRootedTree::new(weights.to_vec(), edges, 0).expect("valid path")
    }

    /// Star with centre 0 and leaves `1..=leaves`, all weights 1, rooted at the centre.
    pub fn unit_star(leaves: usize) -> WeightedRootedTree {
        let edges = (1..=leaves).map(|i| (0, i, 1)).collect();
        WeightedRootedTree::new(vec![1; leaves + 1], edges, 0).expect("valid star")
    }

    /// Builds a tree from a parent array: `parents[i]` is the parent of vertex `i + 1`.
    pub fn from_parents(
        weights: &[Weight],
        parents: &[VertexId],
    ) -> Result<WeightedRootedTree, TreeError> {
        let edges = parents
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i + 1, 1))
            .collect();
        WeightedRootedTree::new(weights.to_vec(), edges, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::build::*;
    use super::*;

    #[test]
    fn children_are_ascending() {
        let star = unit_star(3);
        assert_eq!(star.children(0).unwrap(), vec![1, 2, 3]);
        assert_eq!(star.children(2).unwrap(), Vec::<VertexId>::new());
        let p = path(&[1, 1, 1]);
        assert_eq!(p.children(1).unwrap(), vec![2]);
        assert_eq!(star.children(9), Err(TreeError::UnknownVertex(9)));
    }

    #[test]
    fn subtree_edges_examples() {
        let p = path(&[1, 1, 1]);
        let ab = p.edge_between(1, 2).unwrap();
        assert_eq!(p.subtree_edges(1).unwrap(), [ab].into_iter().collect());
        assert_eq!(p.subtree_edges(0).unwrap().len(), 2);
        let star = unit_star(3);
        assert!(star.subtree_edges(3).unwrap().is_empty());
        assert!(star.subtree_edges(7).is_err());
    }

    #[test]
    fn max_degree_examples() {
        assert_eq!(path(&[1, 1]).max_degree(), 1);
        assert_eq!(unit_star(3).max_degree(), 3);
        assert_eq!(path(&[1, 1, 1, 1]).max_degree(), 2);
    }

    #[test]
    fn rejects_malformed_input() {
        assert_eq!(
            WeightedRootedTree::new(vec![1, 1, 1], vec![(0, 1, 1)], 0),
            Err(TreeError::EdgeCount {
                vertices: 3,
                edges: 1
            })
        );
        assert_eq!(
            WeightedRootedTree::new(vec![1, 1, 1, 1], vec![(0, 1, 1), (1, 0, 1), (2, 3, 1)], 0),
            Err(TreeError::Disconnected(2))
        );
        assert_eq!(
            WeightedRootedTree::new(vec![1, 0], vec![(0, 1, 1)], 0),
            Err(TreeError::ZeroVertexWeight(1))
        );
        assert_eq!(
            WeightedRootedTree::new(vec![1, 1], vec![(0, 1, 0)], 0),
            Err(TreeError::ZeroEdgeWeight(0, 1))
        );
        assert_eq!(
            WeightedRootedTree::new(vec![1, 1], vec![(0, 1, 1)], 4),
            Err(TreeError::UnknownVertex(4))
        );
    }

    #[test]
    fn edges_are_oriented_away_from_root() {
        // edge listed child-first
        let t = WeightedRootedTree::new(vec![1, 2, 3], vec![(1, 0, 1), (2, 1, 1)], 0).unwrap();
        assert_eq!(t.oriented(0), (0, 1));
        assert_eq!(t.oriented(1), (1, 2));
        let r = t.rerooted(2).unwrap();
        assert_eq!(r.oriented(0), (1, 0));
        assert_eq!(r.parent(1), Some(2));
        assert_eq!(r.preorder(), &[2, 1, 0]);
    }

    #[test]
    #[should_panic(expected = "weight overflow")]
    fn overflow_aborts() {
        weight_add(u64::MAX, 1);
    }

    #[test]
    fn extract_subtree_reindexes() {
        let t = from_parents(&[5, 6, 7, 8], &[0, 1, 1]).unwrap();
        let (s, verts, edges) = t.extract_subtree(1).unwrap();
        assert_eq!(verts, vec![1, 2, 3]);
        assert_eq!(s.root(), 0);
        assert_eq!(s.weights(), &[6, 7, 8]);
        assert_eq!(edges.len(), 2);
    }

    fn arb_tree() -> impl proptest::strategy::Strategy<Value = WeightedRootedTree> {
        use proptest::prelude::*;
        (1usize..12)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(1u64..4, n + 1),
                    proptest::collection::vec(any::<proptest::sample::Index>(), n),
                )
            })
            .prop_map(|(w, idx)| {
                let parents: Vec<usize> = idx
                    .iter()
                    .enumerate()
                    .map(|(i, ix)| ix.index(i + 1))
                    .collect();
                from_parents(&w, &parents).unwrap()
            })
    }

    proptest::proptest! {
        #[test]
        fn children_partition_subtree_edges(t in arb_tree()) {
            for v in 0..t.vertex_count() {
                let mut union: BTreeSet<EdgeId> = t.child_edges(v).map(|(_, e)| e).collect();
                for c in t.children(v).unwrap() {
                    let sub = t.subtree_edges(c).unwrap();
                    proptest::prop_assert!(union.is_disjoint(&sub));
                    union.extend(sub);
                }
                proptest::prop_assert_eq!(union, t.subtree_edges(v).unwrap());
            }
        }

        #[test]
        fn rerooting_keeps_undirected_graph(t in arb_tree(), r in 0usize..64) {
            let r = r % t.vertex_count();
            let s = t.rerooted(r).unwrap();
            proptest::prop_assert_eq!(s.edges(), t.edges());
            proptest::prop_assert_eq!(s.weights(), t.weights());
            proptest::prop_assert_eq!(s.parent(r), None);
            for e in 0..t.edge_count() {
                let (p, c) = s.oriented(e);
                proptest::prop_assert_eq!(s.parent(c), Some(p));
            }
        }
    }
}
