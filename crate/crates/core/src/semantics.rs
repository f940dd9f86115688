//! Monotone connected search on weighted trees: guard sets, per-move cost,
//! strategy verification and composition.
//!
//! A strategy is listed by its clearing moves only; free searchers travel
//! along clear edges between moves and are not recorded. Clearing edge `uv`
//! (with `u` on the cleared side) costs `c + g` searchers, where
//!
//! * `g` is the weight of every vertex that stays guarded through the move:
//!   the guards of `δ \ {u}`, plus `w(u)` if `u` keeps another contaminated edge;
//! * `c = max(w(uv), w(v))` if `v` must be guarded afterwards and `c = w(uv)`
//!   otherwise (a leaf never needs guarding).
//!
//! When `uv` is the last contaminated edge at `u`, the guards of `u` join the
//! sliding group and are not counted twice. On node-weighted trees with unit
//! edges this is the canonical model used by the solver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::tree::{weight_add, EdgeId, SubtreeRef, VertexId, Weight, WeightedRootedTree};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SearchStrategy {
    pub start: VertexId,
    pub moves: Vec<EdgeId>,
}

impl SearchStrategy {
    pub fn new(start: VertexId, moves: Vec<EdgeId>) -> Self {
        SearchStrategy { start, moves }
    }

    pub fn empty(start: VertexId) -> Self {
        SearchStrategy {
            start,
            moves: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// `S[⪯ i]`, the first `i` moves.
    pub fn prefix(&self, i: usize) -> SearchStrategy {
        SearchStrategy {
            start: self.start,
            moves: self.moves[..i].to_vec(),
        }
    }

    pub fn cleared(&self) -> BTreeSet<EdgeId> {
        self.moves.iter().copied().collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("start vertex {0} is not in the tree")]
    UnknownStart(VertexId),
    #[error("move {index}: edge {edge} does not exist")]
    UnknownEdge { index: usize, edge: EdgeId },
    #[error("move {index}: edge {edge} is outside the searched subtree")]
    OutsideScope { index: usize, edge: EdgeId },
    #[error("move {index}: edge {edge} was already cleared")]
    RepeatedEdge { index: usize, edge: EdgeId },
    #[error("move {index}: edge {edge} does not touch the cleared region")]
    Disconnected { index: usize, edge: EdgeId },
    #[error("cleared edges do not form a connected region containing vertex {start}")]
    DisconnectedRegion { start: VertexId },
    #[error("move {index}: clearing edge {edge} needs {needed} searchers, budget is {budget}")]
    BudgetExceeded {
        index: usize,
        edge: EdgeId,
        needed: Weight,
        budget: Weight,
    },
    #[error("strategy clears {cleared} of {total} edges")]
    Incomplete { cleared: usize, total: usize },
    #[error("edge {0} has weight {1}; this check needs unit edge weights")]
    NonUnitEdge(EdgeId, Weight),
    #[error("strategies overlap on edge {0}")]
    Overlap(EdgeId),
    #[error("second strategy starts at {0}, which is not guarded after the first")]
    StartNotGuarded(VertexId),
    #[error("strategy must start at the subtree head {head}, starts at {start}")]
    WrongStart { head: VertexId, start: VertexId },
}

/// One clearing move with its searcher accounting (`i:c+g`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveRecord {
    pub edge: EdgeId,
    pub from: VertexId,
    pub to: VertexId,
    pub clearing: Weight,
    pub guarding: Weight,
}

impl MoveRecord {
    pub fn total(&self) -> Weight {
        weight_add(self.clearing, self.guarding)
    }
}

impl fmt::Display for MoveRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{} {}+{}",
            self.from, self.to, self.clearing, self.guarding
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub ok: bool,
    pub searchers_used: Weight,
    pub per_move: Vec<MoveRecord>,
    pub final_guard_weight: Weight,
    pub failure: Option<SemanticsError>,
}

impl VerificationReport {
    /// Per-move ledger: one `i:c+g` line per move, 1-based.
    pub fn trace_lines(&self) -> Vec<String> {
        self.per_move
            .iter()
            .enumerate()
            .map(|(i, m)| {
                format!(
                    "{}:{}+{} ({}-{})",
                    i + 1,
                    m.clearing,
                    m.guarding,
                    m.from,
                    m.to
                )
            })
            .collect()
    }
}

/// Which edges exist for the purpose of a (partial) search.
#[derive(Debug, Clone)]
pub struct Scope {
    in_scope: Vec<bool>,
    edge_total: usize,
    head: Option<VertexId>,
}

impl Scope {
    pub fn whole(t: &WeightedRootedTree) -> Self {
        Scope {
            in_scope: vec![true; t.edge_count()],
            edge_total: t.edge_count(),
            head: None,
        }
    }

    /// `T_v` under the tree's current rooting; strategies must start at `v`.
    pub fn subtree(sub: SubtreeRef<'_>) -> Self {
        let mut in_scope = vec![false; sub.tree.edge_count()];
        let edges = sub.edges();
        for &e in &edges {
            in_scope[e] = true;
        }
        Scope {
            in_scope,
            edge_total: edges.len(),
            head: Some(sub.head),
        }
    }

    #[inline]
    pub fn contains(&self, e: EdgeId) -> bool {
        self.in_scope.get(e).copied().unwrap_or(false)
    }

    pub fn edge_total(&self) -> usize {
        self.edge_total
    }
}

/// Incrementally maintained search state: cleared edges, guarded vertices
/// (δ with weights) and the peak searcher count so far.
#[derive(Debug, Clone)]
pub struct StrategyState<'t> {
    tree: &'t WeightedRootedTree,
    scope: Scope,
    start: VertexId,
    cleared: Vec<bool>,
    cleared_count: usize,
    touched: Vec<bool>,
    contaminated: Vec<usize>,
    guarded: BTreeMap<VertexId, Weight>,
    guard_weight: Weight,
    peak: Weight,
    moves: usize,
}

impl<'t> StrategyState<'t> {
    pub fn new(tree: &'t WeightedRootedTree, start: VertexId) -> Result<Self, SemanticsError> {
        Self::with_scope(tree, Scope::whole(tree), start)
    }

    pub fn with_scope(
        tree: &'t WeightedRootedTree,
        scope: Scope,
        start: VertexId,
    ) -> Result<Self, SemanticsError> {
        if !tree.contains(start) {
            return Err(SemanticsError::UnknownStart(start));
        }
        if let Some(head) = scope.head {
            if head != start {
                return Err(SemanticsError::WrongStart { head, start });
            }
        }
        let n = tree.vertex_count();
        let contaminated: Vec<usize> = (0..n)
            .map(|v| {
                tree.neighbors(v)
                    .iter()
                    .filter(|&&(_, e)| scope.contains(e))
                    .count()
            })
            .collect();
        let mut touched = vec![false; n];
        touched[start] = true;
        let mut guarded = BTreeMap::new();
        let mut guard_weight = 0;
        if contaminated[start] > 0 {
            guarded.insert(start, tree.weight(start));
            guard_weight = tree.weight(start);
        }
        Ok(StrategyState {
            tree,
            scope,
            start,
            cleared: vec![false; tree.edge_count()],
            cleared_count: 0,
            touched,
            contaminated,
            guarded,
            guard_weight,
            peak: 0,
            moves: 0,
        })
    }

    pub fn start(&self) -> VertexId {
        self.start
    }

    pub fn guarded(&self) -> &BTreeMap<VertexId, Weight> {
        &self.guarded
    }

    pub fn guard_weight(&self) -> Weight {
        self.guard_weight
    }

    pub fn peak(&self) -> Weight {
        self.peak
    }

    pub fn is_cleared(&self, e: EdgeId) -> bool {
        self.cleared[e]
    }

    pub fn cleared_edges(&self) -> BTreeSet<EdgeId> {
        (0..self.cleared.len())
            .filter(|&e| self.cleared[e])
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.cleared_count == self.scope.edge_total
    }

    /// Accounting for clearing `e` next, without applying it.
    pub fn cost_of(&self, e: EdgeId) -> Result<MoveRecord, SemanticsError> {
        let index = self.moves;
        if e >= self.tree.edge_count() {
            return Err(SemanticsError::UnknownEdge { index, edge: e });
        }
        if !self.scope.contains(e) {
            return Err(SemanticsError::OutsideScope { index, edge: e });
        }
        if self.cleared[e] {
            return Err(SemanticsError::RepeatedEdge { index, edge: e });
        }
        let edge = self.tree.edge(e);
        let (u, v) = match (self.touched[edge.a], self.touched[edge.b]) {
            (true, false) => (edge.a, edge.b),
            (false, true) => (edge.b, edge.a),
            _ => return Err(SemanticsError::Disconnected { index, edge: e }),
        };
        let wu = self.tree.weight(u);
        let mut guarding = self.guard_weight - wu;
        if self.contaminated[u] > 1 {
            guarding = weight_add(guarding, wu);
        }
        let clearing = if self.contaminated[v] > 1 {
            edge.weight.max(self.tree.weight(v))
        } else {
            edge.weight
        };
        Ok(MoveRecord {
            edge: e,
            from: u,
            to: v,
            clearing,
            guarding,
        })
    }

    pub fn apply(&mut self, e: EdgeId) -> Result<MoveRecord, SemanticsError> {
        let rec = self.cost_of(e)?;
        let (u, v) = (rec.from, rec.to);
        self.cleared[e] = true;
        self.cleared_count += 1;
        self.touched[v] = true;
        self.contaminated[u] -= 1;
        self.contaminated[v] -= 1;
        if self.contaminated[u] == 0 {
            self.guarded.remove(&u);
            self.guard_weight -= self.tree.weight(u);
        }
        if self.contaminated[v] > 0 {
            self.guarded.insert(v, self.tree.weight(v));
            self.guard_weight = weight_add(self.guard_weight, self.tree.weight(v));
        }
        self.peak = self.peak.max(rec.total());
        self.moves += 1;
        Ok(rec)
    }
}

/// Stateless δ: the vertices touched by the cleared region (plus `start`)
/// that still have a contaminated incident edge.
pub fn guarded_set(
    t: &WeightedRootedTree,
    cleared: &BTreeSet<EdgeId>,
    start: VertexId,
) -> Result<BTreeMap<VertexId, Weight>, SemanticsError> {
    guarded_set_in(t, &Scope::whole(t), cleared, start)
}

pub fn guarded_set_in(
    t: &WeightedRootedTree,
    scope: &Scope,
    cleared: &BTreeSet<EdgeId>,
    start: VertexId,
) -> Result<BTreeMap<VertexId, Weight>, SemanticsError> {
    if !t.contains(start) {
        return Err(SemanticsError::UnknownStart(start));
    }
    let mut seen = vec![false; t.vertex_count()];
    seen[start] = true;
    let mut stack = vec![start];
    let mut reached = 0usize;
    while let Some(x) = stack.pop() {
        for &(y, e) in t.neighbors(x) {
            if cleared.contains(&e) && !seen[y] {
                seen[y] = true;
                reached += 1;
                stack.push(y);
            }
        }
    }
    if reached != cleared.len() {
        return Err(SemanticsError::DisconnectedRegion { start });
    }
    Ok((0..t.vertex_count())
        .filter(|&x| seen[x])
        .filter(|&x| {
            t.neighbors(x)
                .iter()
                .any(|&(_, e)| scope.contains(e) && !cleared.contains(&e))
        })
        .map(|x| (x, t.weight(x)))
        .collect())
}

/// Searchers needed to clear `edge` from `state` (`c + g`).
pub fn move_cost(state: &StrategyState<'_>, edge: EdgeId) -> Result<Weight, SemanticsError> {
    state.cost_of(edge).map(|m| m.total())
}

/// Replays `s` inside `scope`. Stops at the first structural error; a budget
/// overrun or incompleteness is reported but the replay still runs to the end
/// so the per-move ledger is complete.
pub fn evaluate(
    t: &WeightedRootedTree,
    scope: Scope,
    s: &SearchStrategy,
    budget: Option<Weight>,
    require_complete: bool,
) -> VerificationReport {
    let mut state = match StrategyState::with_scope(t, scope, s.start) {
        Ok(st) => st,
        Err(e) => {
            return VerificationReport {
                ok: false,
                searchers_used: 0,
                per_move: vec![],
                final_guard_weight: 0,
                failure: Some(e),
            }
        }
    };
    let mut per_move = Vec::with_capacity(s.moves.len());
    let mut failure = None;
    for (index, &e) in s.moves.iter().enumerate() {
        match state.apply(e) {
            Ok(rec) => {
                if let Some(k) = budget {
                    if rec.total() > k && failure.is_none() {
                        failure = Some(SemanticsError::BudgetExceeded {
                            index,
                            edge: e,
                            needed: rec.total(),
                            budget: k,
                        });
                    }
                }
                per_move.push(rec);
            }
            Err(err) => {
                return VerificationReport {
                    ok: false,
                    searchers_used: state.peak(),
                    per_move,
                    final_guard_weight: state.guard_weight(),
                    failure: Some(err),
                };
            }
        }
    }
    if failure.is_none() && require_complete && !state.is_complete() {
        failure = Some(SemanticsError::Incomplete {
            cleared: s.moves.len(),
            total: state.scope.edge_total,
        });
    }
    VerificationReport {
        ok: failure.is_none(),
        searchers_used: state.peak(),
        per_move,
        final_guard_weight: state.guard_weight(),
        failure,
    }
}

/// Checks that `s` is a complete connected monotone `k`-search of `t`.
/// `t` must have unit edge weights (run it through `transform` first otherwise).
pub fn verify(t: &WeightedRootedTree, s: &SearchStrategy, k: Weight) -> VerificationReport {
    if let Some(e) = t.edges().iter().position(|e| e.weight != 1) {
        return VerificationReport {
            ok: false,
            searchers_used: 0,
            per_move: vec![],
            final_guard_weight: 0,
            failure: Some(SemanticsError::NonUnitEdge(e, t.edge(e).weight)),
        };
    }
    evaluate(t, Scope::whole(t), s, Some(k), true)
}

/// Like [`verify`] but accepts arbitrary edge weights.
pub fn verify_weighted(
    t: &WeightedRootedTree,
    s: &SearchStrategy,
    k: Weight,
) -> VerificationReport {
    evaluate(t, Scope::whole(t), s, Some(k), true)
}

/// Checks a partial strategy for `T_v` (starting at `v`, confined to `T_v`).
pub fn verify_partial(sub: SubtreeRef<'_>, s: &SearchStrategy, k: Weight) -> VerificationReport {
    evaluate(sub.tree, Scope::subtree(sub), s, Some(k), false)
}

/// Peak searcher count of a (possibly partial) strategy on the whole tree.
pub fn searchers_used(
    t: &WeightedRootedTree,
    s: &SearchStrategy,
) -> Result<Weight, SemanticsError> {
    let r = evaluate(t, Scope::whole(t), s, None, false);
    match r.failure {
        Some(e) => Err(e),
        None => Ok(r.searchers_used),
    }
}

/// `w(δ(S))` after the last move of a partial strategy.
pub fn guard_weight(t: &WeightedRootedTree, s: &SearchStrategy) -> Result<Weight, SemanticsError> {
    let r = evaluate(t, Scope::whole(t), s, None, false);
    match r.failure {
        Some(e) => Err(e),
        None => Ok(r.final_guard_weight),
    }
}

/// `S ⊕ S'`: the moves of `s1` followed by those of `s2`. `s2` must start at a
/// vertex guarded after `s1` and the two cleared sets must be disjoint; each
/// step of the composite must keep the cleared region connected.
pub fn compose(
    t: &WeightedRootedTree,
    s1: &SearchStrategy,
    s2: &SearchStrategy,
) -> Result<SearchStrategy, SemanticsError> {
    let mut state = StrategyState::new(t, s1.start)?;
    for &e in &s1.moves {
        state.apply(e)?;
    }
    if s2.moves.is_empty() {
        return Ok(s1.clone());
    }
    if let Some(&e) = s2.moves.iter().find(|e| s1.moves.contains(e)) {
        return Err(SemanticsError::Overlap(e));
    }
    if !state.guarded().contains_key(&s2.start) {
        return Err(SemanticsError::StartNotGuarded(s2.start));
    }
    for &e in &s2.moves {
        state.apply(e)?;
    }
    let mut moves = s1.moves.clone();
    moves.extend_from_slice(&s2.moves);
    Ok(SearchStrategy {
        start: s1.start,
        moves,
    })
}

/// Peak of the `s2` phase of `s1 ⊕ s2` computed phase-wise: the guards of
/// `δ(s1) \ {h}` stand still while `s2` runs on `T_h` on its own, where `h`
/// is the start of `s2` and `t` is rooted so that `T_h` is untouched by `s1`.
pub fn phase_peak(
    t: &WeightedRootedTree,
    s1: &SearchStrategy,
    s2: &SearchStrategy,
) -> Result<Weight, SemanticsError> {
    let mut state = StrategyState::new(t, s1.start)?;
    for &e in &s1.moves {
        state.apply(e)?;
    }
    let h = s2.start;
    let standing = state.guard_weight()
        - state
            .guarded()
            .get(&h)
            .copied()
            .ok_or(SemanticsError::StartNotGuarded(h))?;
    let sub = SubtreeRef::new(t, h).map_err(|_| SemanticsError::UnknownStart(h))?;
    let inner = evaluate(t, Scope::subtree(sub), s2, None, false);
    if let Some(e) = inner.failure {
        return Err(e);
    }
    Ok(weight_add(standing, inner.searchers_used))
}

/// Whether `s` is a partial `(k, v)`-minimal search of `T_v`: it is a partial
/// `k`-search of `T_v` with `w(δ(s)) ≤ w(v)` and no partial `k`-search of `T_v`
/// leaves a lighter guard set. The minimum is decided by the exhaustive oracle.
pub fn is_k_v_minimal(
    t: &WeightedRootedTree,
    s: &SearchStrategy,
    k: Weight,
    v: VertexId,
) -> Result<bool, crate::oracle::OracleError> {
    let sub = SubtreeRef::new(t, v).map_err(|_| SemanticsError::UnknownStart(v))?;
    if s.start != v {
        return Err(SemanticsError::WrongStart {
            head: v,
            start: s.start,
        }
        .into());
    }
    let scope = Scope::subtree(sub);
    if let Some((index, &edge)) = s
        .moves
        .iter()
        .enumerate()
        .find(|&(_, &e)| !scope.contains(e))
    {
        return Err(SemanticsError::OutsideScope { index, edge }.into());
    }
    let report = evaluate(t, scope, s, Some(k), false);
    match report.failure {
        None => {}
        Some(SemanticsError::BudgetExceeded { .. }) => return Ok(false),
        Some(e) => return Err(e.into()),
    }
    let g = report.final_guard_weight;
    if g > t.weight(v) {
        return Ok(false);
    }
    let (best, _) = crate::oracle::oracle_min_guard(sub, k)?;
    Ok(g == best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::build::{from_parents, path, unit_star};

    fn e(t: &WeightedRootedTree, a: VertexId, b: VertexId) -> EdgeId {
        t.edge_between(a, b).unwrap()
    }

    #[test]
    fn guarded_set_examples() {
        let star = unit_star(3);
        let g = guarded_set(&star, &BTreeSet::new(), 0).unwrap();
        assert_eq!(g.keys().copied().collect::<Vec<_>>(), vec![0]);
        let all: BTreeSet<_> = (0..3).collect();
        assert!(guarded_set(&star, &all, 0).unwrap().is_empty());
        let p = path(&[1, 1, 1]);
        let g = guarded_set(&p, &[e(&p, 0, 1)].into_iter().collect(), 0).unwrap();
        assert_eq!(g.keys().copied().collect::<Vec<_>>(), vec![1]);
        // disconnected
        let bad = guarded_set(&p, &[e(&p, 1, 2)].into_iter().collect(), 0);
        assert_eq!(bad, Err(SemanticsError::DisconnectedRegion { start: 0 }));
    }

    #[test]
    fn star_move_costs() {
        let star = unit_star(3);
        let mut st = StrategyState::new(&star, 0).unwrap();
        assert_eq!(move_cost(&st, 0).unwrap(), 2);
        st.apply(0).unwrap();
        // second move: guard r (1) + slide (1)
        let m = st.cost_of(1).unwrap();
        assert_eq!((m.clearing, m.guarding), (1, 1));
        st.apply(1).unwrap();
        // last move releases r into the sliding group
        assert_eq!(move_cost(&st, 2).unwrap(), 1);
        assert_eq!(
            move_cost(&st, 1),
            Err(SemanticsError::RepeatedEdge { index: 2, edge: 1 })
        );
    }

    #[test]
    fn reduction_path_move_cost() {
        // A gadget path tail: guards of weight 2L+s hang elsewhere; v^x is
        // guarded and clearing v^x u^{x-1} costs 2L+s + 2L-(x-1).
        let l: Weight = 5;
        let (s, x) = (1, 3);
        // root(2L) -> a (hanging guards s, kept guarded by a leaf) ; root -> v^x(p) -> u^{x-1}(2L-x+1) -> leaf
        let t = from_parents(&[2 * l, s, 1, 2, 2 * l - (x - 1), 1], &[0, 1, 0, 3, 4]).unwrap();
        let mut st = StrategyState::new(&t, 0).unwrap();
        st.apply(e(&t, 0, 1)).unwrap();
        st.apply(e(&t, 0, 3)).unwrap();
        assert_eq!(st.guard_weight(), s + 2);
        let m = st.cost_of(e(&t, 3, 4)).unwrap();
        assert_eq!(m.guarding, s);
        assert_eq!(m.clearing, 2 * l - x + 1);
        // with 2L guards at the root instead of a free root, the total is 4L+s-x+1
        assert_eq!(2 * l + m.total(), 4 * l + s - x + 1);
    }

    #[test]
    fn verify_examples() {
        let p = path(&[1, 1, 1]);
        let s = SearchStrategy::new(0, vec![e(&p, 0, 1), e(&p, 1, 2)]);
        let r = verify(&p, &s, 1);
        assert!(r.ok, "{r:?}");
        assert_eq!(r.searchers_used, 1);

        let star = unit_star(3);
        let r = verify(&star, &SearchStrategy::new(0, vec![2, 0, 1]), 1);
        assert!(!r.ok);
        assert!(matches!(
            r.failure,
            Some(SemanticsError::BudgetExceeded {
                index: 0,
                needed: 2,
                ..
            })
        ));
        assert_eq!(r.searchers_used, 2);

        let r = verify(&star, &SearchStrategy::new(0, vec![0, 1]), 5);
        assert_eq!(
            r.failure,
            Some(SemanticsError::Incomplete {
                cleared: 2,
                total: 3
            })
        );
        let r = verify(&p, &SearchStrategy::new(0, vec![e(&p, 1, 2)]), 5);
        assert!(matches!(
            r.failure,
            Some(SemanticsError::Disconnected { index: 0, .. })
        ));
        let r = verify(&star, &SearchStrategy::new(0, vec![0, 0, 1]), 5);
        assert!(matches!(
            r.failure,
            Some(SemanticsError::RepeatedEdge { index: 1, .. })
        ));
    }

    #[test]
    fn verify_rejects_weighted_edges() {
        let t = WeightedRootedTree::new(vec![1, 1], vec![(0, 1, 3)], 0).unwrap();
        let r = verify(&t, &SearchStrategy::new(0, vec![0]), 10);
        assert_eq!(r.failure, Some(SemanticsError::NonUnitEdge(0, 3)));
        assert!(verify_weighted(&t, &SearchStrategy::new(0, vec![0]), 3).ok);
    }

    #[test]
    fn guard_weight_examples() {
        let p = path(&[1, 5, 1]);
        assert_eq!(guard_weight(&p, &SearchStrategy::empty(0)).unwrap(), 1);
        assert_eq!(
            guard_weight(&p, &SearchStrategy::new(0, vec![0])).unwrap(),
            5
        );
        assert_eq!(
            guard_weight(&p, &SearchStrategy::new(0, vec![0, 1])).unwrap(),
            0
        );
        assert!(guard_weight(&p, &SearchStrategy::new(0, vec![1])).is_err());
    }

    /// Tree matching the quantities quoted for the worked composition example:
    /// r(9) with sons u(2), v(1), w(4); T_w has w-y, w-t, t-z.
    fn extension_tree() -> (WeightedRootedTree, [VertexId; 7]) {
        // ids: r0 u1 v2 w3 y4 t5 z6, then one leaf below each of u, v, y, z
        let weights = [9, 2, 1, 4, 2, 6, 1, 1, 1, 1, 1];
        let parents = [0, 0, 0, 3, 3, 5, 1, 2, 4, 6];
        let t = from_parents(&weights, &parents).unwrap();
        (t, [0, 1, 2, 3, 4, 5, 6])
    }

    #[test]
    fn composition_reproduces_worked_example_counts() {
        let (t, [r, u, v, w, y, tt, z]) = extension_tree();
        let s = SearchStrategy::new(r, vec![e(&t, r, u), e(&t, r, v), e(&t, r, w)]);
        assert_eq!(searchers_used(&t, &s).unwrap(), 12);
        let delta = guarded_set(&t, &s.cleared(), r).unwrap();
        assert_eq!(delta.keys().copied().collect::<Vec<_>>(), vec![u, v, w]);

        let s_w = SearchStrategy::new(w, vec![e(&t, w, y), e(&t, w, tt), e(&t, tt, z)]);
        let sub = SubtreeRef::new(&t, w).unwrap();
        let inner = verify_partial(sub, &s_w, 8);
        assert!(inner.ok, "{inner:?}");
        assert_eq!(inner.searchers_used, 8);
        assert_eq!(inner.final_guard_weight, 3);

        // w(δ(S)\{w}) + s(S_w) = 3 + 8
        assert_eq!(phase_peak(&t, &s, &s_w).unwrap(), 11);
        let both = compose(&t, &s, &s_w).unwrap();
        let full = evaluate(&t, Scope::whole(&t), &both, None, false);
        let phase_max = full.per_move[s.len()..]
            .iter()
            .map(MoveRecord::total)
            .max()
            .unwrap();
        assert_eq!(phase_max, 11);
        let delta = guarded_set(&t, &both.cleared(), r).unwrap();
        assert_eq!(delta.keys().copied().collect::<Vec<_>>(), vec![u, v, y, z]);
    }

    #[test]
    fn compose_edge_cases() {
        let star = unit_star(3);
        let s1 = SearchStrategy::new(0, vec![0]);
        assert_eq!(compose(&star, &s1, &SearchStrategy::empty(1)).unwrap(), s1);
        assert_eq!(
            compose(&star, &s1, &SearchStrategy::new(0, vec![0])),
            Err(SemanticsError::Overlap(0))
        );
        let p = path(&[1, 1, 1, 1]);
        let s1 = SearchStrategy::new(0, vec![0]);
        assert_eq!(
            compose(&p, &s1, &SearchStrategy::new(2, vec![2])),
            Err(SemanticsError::StartNotGuarded(2))
        );
        // two single-edge partial strategies below sibling heads
        let t = from_parents(&[1, 2, 2, 1, 1], &[0, 0, 1, 2]).unwrap();
        let s = SearchStrategy::new(0, vec![e(&t, 0, 1), e(&t, 0, 2)]);
        let a = SearchStrategy::new(1, vec![e(&t, 1, 3)]);
        let b = SearchStrategy::new(2, vec![e(&t, 2, 4)]);
        let sa = compose(&t, &s, &a).unwrap();
        let sab = compose(&t, &sa, &b).unwrap();
        let peak = searchers_used(&t, &sab).unwrap();
        let phases = [
            searchers_used(&t, &s).unwrap(),
            phase_peak(&t, &s, &a).unwrap(),
            phase_peak(&t, &sa, &b).unwrap(),
        ];
        assert_eq!(peak, *phases.iter().max().unwrap());
        assert!(verify(&t, &sab, peak).ok);
    }

    #[test]
    fn partial_scope_rules() {
        let p = path(&[1, 5, 1, 1]);
        let sub = SubtreeRef::new(&p, 1).unwrap();
        let r = verify_partial(sub, &SearchStrategy::new(1, vec![0]), 9);
        assert!(matches!(
            r.failure,
            Some(SemanticsError::OutsideScope { .. })
        ));
        let r = verify_partial(sub, &SearchStrategy::new(2, vec![]), 9);
        assert!(matches!(
            r.failure,
            Some(SemanticsError::WrongStart { head: 1, start: 2 })
        ));
        // the head of T_1 has only one edge inside the scope, so it is released
        let r = verify_partial(sub, &SearchStrategy::new(1, vec![1]), 9);
        assert!(r.ok);
        assert_eq!(r.per_move[0].guarding, 0);
        assert_eq!(r.final_guard_weight, 1);
    }
}
