//! Exact connected search for trees of bounded degree.
//!
//! For every directed subtree `T_v` (the component of `v` after removing the
//! edge to its parent) the solver keeps a frontier: the Pareto set of partial
//! minimal strategies of `T_v` on (searchers used, weight left guarded). A
//! frontier is built from the frontiers of the children by trying every
//! order of the edges at `v` and every relevant budget (`mcps` + `cst`).
//!
//! A strategy produced by `mcps` always clears every edge at its head, so the
//! vertices it leaves guarded have untouched subtrees below them and can be
//! extended with entries of their own frontiers.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use crate::semantics::SearchStrategy;
use crate::transform::{normalize, normalize_leaf_weights, Normalized, Origin};
use crate::tree::{weight_add, EdgeId, SubtreeRef, VertexId, Weight, WeightedRootedTree};

pub const DEFAULT_MAX_DEGREE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    /// Step budgets one at a time instead of jumping to the next threshold.
    pub naive_k: bool,
    /// Refuse trees whose maximum degree exceeds this.
    pub max_degree: usize,
    /// Skip child orders that only swap isomorphic sibling subtrees.
    pub dedup_siblings: bool,
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            naive_k: false,
            max_degree: DEFAULT_MAX_DEGREE,
            dedup_siblings: false,
            parallel: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error(
        "vertex {vertex} has degree {degree} above the cap {cap} ({degree}! = {orders} edge orders per budget)"
    )]
    DegreeCapExceeded {
        vertex: VertexId,
        degree: usize,
        cap: usize,
        orders: String,
    },
}

fn factorial(d: usize) -> String {
    let mut acc: u128 = 1;
    for i in 2..=d as u128 {
        match acc.checked_mul(i) {
            Some(x) => acc = x,
            None => return format!("more than {}", u128::MAX),
        }
    }
    acc.to_string()
}

fn check_degree(t: &WeightedRootedTree, cap: usize) -> Result<(), SolverError> {
    for v in 0..t.vertex_count() {
        let degree = t.degree(v);
        if degree > cap {
            return Err(SolverError::DegreeCapExceeded {
                vertex: v,
                degree,
                cap,
                orders: factorial(degree),
            });
        }
    }
    Ok(())
}

#[derive(Debug)]
enum Piece {
    Move(EdgeId),
    Sub(Arc<Plan>),
}

/// A move list assembled from shared sub-plans.
#[derive(Debug, Default)]
pub struct Plan {
    pieces: Vec<Piece>,
}

impl Plan {
    pub fn flatten(&self) -> Vec<EdgeId> {
        let mut out = Vec::new();
        let mut stack: Vec<std::slice::Iter<'_, Piece>> = vec![self.pieces.iter()];
        while let Some(top) = stack.last_mut() {
            match top.next() {
                None => {
                    stack.pop();
                }
                Some(Piece::Move(e)) => out.push(*e),
                Some(Piece::Sub(p)) => stack.push(p.pieces.iter()),
            }
        }
        out
    }
}

/// One partial minimal strategy of a directed subtree.
#[derive(Debug, Clone)]
pub struct FrontierEntry {
    pub searchers: Weight,
    pub guard_weight: Weight,
    /// Guarded vertices after the strategy, each with its parent.
    guards: Arc<[(VertexId, VertexId)]>,
    plan: Arc<Plan>,
}

impl FrontierEntry {
    pub fn guarded(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.guards.iter().map(|&(v, _)| v)
    }

    pub fn moves(&self) -> Vec<EdgeId> {
        self.plan.flatten()
    }
}

/// The Pareto set of partial minimal strategies of `T_head` (away from
/// `parent`). The empty strategy, leaving `w(head)` guarded, is implicit, so
/// every stored entry has `guard_weight < w(head)`. A single-vertex subtree
/// stores the empty strategy as `(0, 0)`.
#[derive(Debug, Clone)]
pub struct StrategyFrontier {
    pub head: VertexId,
    pub parent: Option<VertexId>,
    head_weight: Weight,
    is_leaf: bool,
    entries: BTreeMap<Weight, FrontierEntry>,
}

impl StrategyFrontier {
    fn new(head: VertexId, parent: Option<VertexId>, head_weight: Weight, is_leaf: bool) -> Self {
        let mut f = StrategyFrontier {
            head,
            parent,
            head_weight,
            is_leaf,
            entries: BTreeMap::new(),
        };
        if is_leaf {
            f.entries.insert(
                0,
                FrontierEntry {
                    searchers: 0,
                    guard_weight: 0,
                    guards: Arc::from([]),
                    plan: Arc::default(),
                },
            );
        }
        f
    }

    pub fn entries(&self) -> impl Iterator<Item = &FrontierEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The entry with the most searchers not above `budget` (lowest guard).
    pub fn best_within(&self, budget: Weight) -> Option<&FrontierEntry> {
        self.entries.range(..=budget).next_back().map(|(_, e)| e)
    }

    fn next_above(&self, budget: Weight) -> Option<Weight> {
        self.entries
            .range(budget.saturating_add(1)..)
            .next()
            .map(|(&s, _)| s)
    }

    /// Least guard weight reachable with at most `k` searchers, counting the
    /// empty strategy.
    pub fn min_guard(&self, k: Weight) -> Weight {
        let empty = if self.is_leaf { 0 } else { self.head_weight };
        self.best_within(k)
            .map_or(empty, |e| e.guard_weight.min(empty))
    }

    /// Searchers needed to clear the whole subtree.
    pub fn complete(&self) -> Option<&FrontierEntry> {
        self.entries
            .values()
            .next_back()
            .filter(|e| e.guard_weight == 0)
    }

    /// Strict Pareto insertion. Returns whether the entry was kept.
    fn insert(&mut self, entry: FrontierEntry) -> bool {
        if entry.guard_weight >= self.head_weight && !self.is_leaf {
            return false;
        }
        if self
            .entries
            .range(..=entry.searchers)
            .any(|(_, e)| e.guard_weight <= entry.guard_weight)
        {
            return false;
        }
        let dominated: Vec<Weight> = self
            .entries
            .range(entry.searchers..)
            .filter(|(_, e)| e.guard_weight >= entry.guard_weight)
            .map(|(&s, _)| s)
            .collect();
        for s in dominated {
            self.entries.remove(&s);
        }
        self.entries.insert(entry.searchers, entry);
        true
    }
}

/// Read access to the frontiers of already solved directed subtrees.
pub trait Frontiers: Sync {
    fn frontier(&self, head: VertexId, parent: VertexId) -> &StrategyFrontier;
}

impl Frontiers for HashMap<Key, Arc<StrategyFrontier>> {
    fn frontier(&self, head: VertexId, parent: VertexId) -> &StrategyFrontier {
        &self[&(head, Some(parent))]
    }
}

impl Frontiers for RootedFrontiers {
    fn frontier(&self, head: VertexId, _parent: VertexId) -> &StrategyFrontier {
        &self.frontiers[head]
    }
}

/// Outcome of one `mcps` call. `next_budget` is the least budget above the
/// current one at which some comparison made during the call flips.
#[derive(Debug)]
pub struct McpsOutcome {
    pub result: Option<FrontierEntry>,
    pub next_budget: Option<Weight>,
}

/// Greedy minimal partial strategy of `T_head` clearing the head's edges in
/// the order `order` within budget `k`. `w(head)` searchers stand on the
/// head from the start. `frontier(x, parent)` must return the frontier of
/// every proper descendant of `head`.
pub fn mcps<F: Frontiers + ?Sized>(
    t: &WeightedRootedTree,
    head: VertexId,
    order: &[VertexId],
    k: Weight,
    frontiers: &F,
) -> McpsOutcome {
    let wv = t.weight(head);
    let mut next: Option<Weight> = None;
    let mut bump = |x: Weight| {
        if x > k {
            next = Some(next.map_or(x, |n: Weight| n.min(x)));
        }
    };
    let mut delta: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    let mut rest: Weight = 0;
    let mut peak: Weight = 0;
    let mut pieces = Vec::new();

    // Absorbs the best entry of T_x that fits beside `offset` standing guards.
    let absorb = |x: VertexId,
                  offset: Weight,
                  delta: &mut BTreeMap<VertexId, VertexId>,
                  rest: &mut Weight,
                  peak: &mut Weight,
                  pieces: &mut Vec<Piece>,
                  bump: &mut dyn FnMut(Weight)|
     -> bool {
        let f = frontiers.frontier(x, delta[&x]);
        let Some(budget) = k.checked_sub(offset) else {
            if let Some(s) = f.entries.keys().next() {
                bump(weight_add(*s, offset));
            }
            return false;
        };
        if let Some(s) = f.next_above(budget) {
            bump(weight_add(s, offset));
        }
        let Some(entry) = f.best_within(budget) else {
            return false;
        };
        *peak = (*peak).max(weight_add(offset, entry.searchers));
        delta.remove(&x);
        *rest = *rest - t.weight(x) + entry.guard_weight;
        delta.extend(entry.guards.iter().copied());
        pieces.push(Piece::Sub(Arc::clone(&entry.plan)));
        true
    };

    let d = order.len();
    for (i, &c) in order.iter().enumerate() {
        let last = i + 1 == d;
        let e = t
            .edge_between(head, c)
            .expect("order lists neighbours of the head");
        let inner = t.degree(c) > 1;
        let standing = if last { rest } else { weight_add(rest, wv) };
        let slide = if inner {
            t.edge(e).weight.max(t.weight(c))
        } else {
            t.edge(e).weight
        };
        let cost = weight_add(standing, slide);
        if cost > k {
            bump(cost);
            return McpsOutcome {
                result: None,
                next_budget: next,
            };
        }
        peak = peak.max(cost);
        pieces.push(Piece::Move(e));
        if inner {
            delta.insert(c, head);
            rest = weight_add(rest, t.weight(c));
            if !last {
                let offset = rest - t.weight(c) + wv;
                absorb(
                    c,
                    offset,
                    &mut delta,
                    &mut rest,
                    &mut peak,
                    &mut pieces,
                    &mut bump,
                );
            }
        }
    }
    // after the last head edge: extend at any guarded vertex, smallest id first
    'scan: loop {
        let candidates: Vec<VertexId> = delta.keys().copied().collect();
        for x in candidates {
            let offset = rest - t.weight(x);
            if absorb(
                x,
                offset,
                &mut delta,
                &mut rest,
                &mut peak,
                &mut pieces,
                &mut bump,
            ) {
                continue 'scan;
            }
        }
        break;
    }
    let guards: Arc<[(VertexId, VertexId)]> = delta.into_iter().collect();
    McpsOutcome {
        result: Some(FrontierEntry {
            searchers: peak,
            guard_weight: rest,
            guards,
            plan: Arc::new(Plan { pieces }),
        }),
        next_budget: next,
    }
}

/// Canonical form of a directed subtree, for sibling deduplication.
fn canonical_forms(t: &WeightedRootedTree, order: &[Key]) -> HashMap<Key, Arc<str>> {
    let mut out: HashMap<Key, Arc<str>> = HashMap::new();
    for &(v, p) in order {
        let mut kids: Vec<Arc<str>> = t
            .neighbors(v)
            .iter()
            .filter(|&&(c, _)| Some(c) != p)
            .map(|&(c, e)| {
                let sub = &out[&(c, Some(v))];
                Arc::from(format!("{}:{}", t.edge(e).weight, sub))
            })
            .collect();
        kids.sort();
        out.insert(
            (v, p),
            Arc::from(format!("{}({})", t.weight(v), kids.join(","))),
        );
    }
    out
}

/// Builds the frontier of `T_head` away from `parent` from the children's.
fn build_frontier<F: Frontiers + ?Sized>(
    t: &WeightedRootedTree,
    head: VertexId,
    parent: Option<VertexId>,
    opts: &SolverOptions,
    canon: Option<&HashMap<Key, Arc<str>>>,
    frontiers: &F,
) -> StrategyFrontier {
    let children: Vec<VertexId> = t
        .neighbors(head)
        .iter()
        .map(|&(c, _)| c)
        .filter(|&c| Some(c) != parent)
        .collect();
    let mut out = StrategyFrontier::new(head, parent, t.weight(head), children.is_empty());
    if children.is_empty() {
        return out;
    }
    let classes: Option<Vec<&Arc<str>>> =
        canon.map(|m| children.iter().map(|&c| &m[&(c, Some(head))]).collect());
    for order in children.iter().copied().permutations(children.len()) {
        if let Some(classes) = &classes {
            // among isomorphic siblings only the ascending-id order is tried
            let pos = |c: VertexId| children.iter().position(|&x| x == c).unwrap();
            let redundant = order.iter().enumerate().any(|(i, &a)| {
                order[i + 1..]
                    .iter()
                    .any(|&b| classes[pos(a)] == classes[pos(b)] && b < a)
            });
            if redundant {
                continue;
            }
        }
        let mut k: Weight = 1;
        loop {
            let outcome = mcps(t, head, &order, k, frontiers);
            let done = match outcome.result {
                Some(entry) => {
                    let complete = entry.guard_weight == 0;
                    out.insert(entry);
                    complete
                }
                None => false,
            };
            if done {
                break;
            }
            k = if opts.naive_k {
                k + 1
            } else {
                match outcome.next_budget {
                    Some(n) => n,
                    None => break,
                }
            };
        }
    }
    out
}

type Key = (VertexId, Option<VertexId>);

/// Frontiers of directed subtrees, computed in groups whose members only
/// depend on earlier groups. Groups may be processed in parallel: each
/// frontier is a pure function of its children's frontiers.
fn build_all(
    t: &WeightedRootedTree,
    groups: &[Vec<Key>],
    opts: &SolverOptions,
) -> HashMap<Key, Arc<StrategyFrontier>> {
    let canon = if opts.dedup_siblings {
        Some(canonical_forms(
            t,
            &groups.iter().flatten().copied().collect::<Vec<_>>(),
        ))
    } else {
        None
    };
    let mut done: HashMap<Key, Arc<StrategyFrontier>> = HashMap::new();
    for group in groups {
        let ready = &done;
        let build = |&(v, p): &Key| (v, p, build_frontier(t, v, p, opts, canon.as_ref(), ready));
        let built: Vec<_> = if opts.parallel && group.len() > 1 {
            group.par_iter().map(build).collect()
        } else {
            group.iter().map(build).collect()
        };
        for (v, p, f) in built {
            done.insert((v, p), Arc::new(f));
        }
    }
    done
}

/// Frontiers of every `T_v` of a rooted tree.
#[derive(Debug, Clone)]
pub struct RootedFrontiers {
    frontiers: Vec<Arc<StrategyFrontier>>,
}

impl RootedFrontiers {
    pub fn frontier(&self, v: VertexId) -> &StrategyFrontier {
        &self.frontiers[v]
    }

    pub fn min_guard(&self, v: VertexId, k: Weight) -> Weight {
        self.frontiers[v].min_guard(k)
    }
}

/// Frontiers of all `T_v` of the rooted tree `t` (which must have unit edges
/// for the results to be meaningful; see `transform::normalize`).
pub fn rooted_frontiers(
    t: &WeightedRootedTree,
    opts: &SolverOptions,
) -> Result<RootedFrontiers, SolverError> {
    check_degree(t, opts.max_degree)?;
    let n = t.vertex_count();
    let mut height = vec![0usize; n];
    for &v in t.preorder().iter().rev() {
        if let Some(p) = t.parent(v) {
            height[p] = height[p].max(height[v] + 1);
        }
    }
    let max_h = height.iter().copied().max().unwrap_or(0);
    let mut groups: Vec<Vec<Key>> = vec![Vec::new(); max_h + 1];
    for v in 0..n {
        groups[height[v]].push((v, t.parent(v)));
    }
    let mut all = build_all(t, &groups, opts);
    let frontiers = (0..n)
        .map(|v| all.remove(&(v, t.parent(v))).expect("built"))
        .collect();
    Ok(RootedFrontiers { frontiers })
}

/// `CST`: the frontier of `T_head`, computed bottom-up inside the subtree.
pub fn cst(sub: SubtreeRef<'_>, opts: &SolverOptions) -> Result<StrategyFrontier, SolverError> {
    let (local, verts, edges) = sub.tree.extract_subtree(sub.head).expect("head exists");
    let fr = rooted_frontiers(&local, opts)?;
    let f = fr.frontier(local.root());
    // translate ids back into the host tree
    let entries = f
        .entries
        .iter()
        .map(|(&s, e)| {
            let moves = e
                .plan
                .flatten()
                .into_iter()
                .map(|x| edges[x])
                .collect::<Vec<_>>();
            let guards: Arc<[(VertexId, VertexId)]> = e
                .guards
                .iter()
                .map(|&(v, p)| (verts[v], verts[p]))
                .collect();
            let plan = Arc::new(Plan {
                pieces: moves.into_iter().map(Piece::Move).collect(),
            });
            (
                s,
                FrontierEntry {
                    searchers: e.searchers,
                    guard_weight: e.guard_weight,
                    guards,
                    plan,
                },
            )
        })
        .collect();
    Ok(StrategyFrontier {
        head: sub.head,
        parent: sub.tree.parent(sub.head),
        head_weight: f.head_weight,
        is_leaf: f.is_leaf,
        entries,
    })
}

#[derive(Debug, Clone)]
pub struct RootedSolution {
    pub k: Weight,
    pub root: VertexId,
    /// Optimal strategy on the input tree.
    pub strategy: SearchStrategy,
    /// The unit-edge tree actually solved, with its frontiers.
    pub normalized: Normalized,
    pub frontiers: RootedFrontiers,
}

/// `cs(T_r)` with an optimal strategy starting at the root of `t`.
pub fn solve_rooted(
    t: &WeightedRootedTree,
    opts: &SolverOptions,
) -> Result<RootedSolution, SolverError> {
    let normalized = normalize(t);
    let nt = &normalized.tree;
    let frontiers = rooted_frontiers(nt, opts)?;
    let top = frontiers.frontier(nt.root());
    let entry = top.complete().expect("a complete strategy always exists");
    let strategy = normalized.project_strategy(&SearchStrategy::new(nt.root(), entry.moves()));
    Ok(RootedSolution {
        k: entry.searchers,
        root: t.root(),
        strategy,
        normalized,
        frontiers,
    })
}

#[derive(Debug, Clone)]
pub struct UnrootedSolution {
    pub root: VertexId,
    pub k: Weight,
    pub strategy: SearchStrategy,
    /// `cs(T_v)` for every original vertex `v`.
    pub per_root: Vec<Weight>,
}

/// `cs(T) = min_v cs(T_v)`, sharing the frontier of every directed subtree
/// between roots. Ties go to the smallest vertex id.
pub fn solve_unrooted(
    t: &WeightedRootedTree,
    opts: &SolverOptions,
) -> Result<UnrootedSolution, SolverError> {
    if !t.has_unit_edges() {
        return solve_unrooted_per_root(t, opts);
    }
    let normalized = normalize(t);
    let nt = &normalized.tree;
    check_degree(nt, opts.max_degree)?;
    let n = nt.vertex_count();
    let r0 = nt.rerooted(0).expect("vertex 0 exists");
    let mut size = vec![1usize; n];
    for &v in r0.preorder().iter().rev() {
        if let Some(p) = r0.parent(v) {
            size[p] += size[v];
        }
    }
    let mut keyed: Vec<(usize, Key)> = Vec::with_capacity(3 * n);
    for v in 0..n {
        for &(p, _) in nt.neighbors(v) {
            let s = if r0.parent(v) == Some(p) {
                size[v]
            } else {
                n - size[p]
            };
            keyed.push((s, (v, Some(p))));
        }
        keyed.push((n + 1, (v, None)));
    }
    keyed.sort_unstable();
    let groups: Vec<Vec<Key>> = keyed
        .chunk_by(|a, b| a.0 == b.0)
        .map(|g| g.iter().map(|&(_, k)| k).collect())
        .collect();
    let all = build_all(nt, &groups, opts);
    let originals: Vec<VertexId> = (0..n)
        .filter(|&v| match &normalized.subdivision {
            None => true,
            Some(sub) => matches!(sub.origin[v], Origin::Vertex(_)),
        })
        .collect();
    let per_root: Vec<Weight> = originals
        .iter()
        .map(|&v| {
            all[&(v, None)]
                .complete()
                .expect("complete strategy exists")
                .searchers
        })
        .collect();
    let (best_i, &k) = per_root
        .iter()
        .enumerate()
        .min_by_key(|&(i, &k)| (k, i))
        .expect("trees are non-empty");
    let root = originals[best_i];
    let entry = all[&(root, None)]
        .complete()
        .expect("complete strategy exists");
    let strategy = normalized.project_strategy(&SearchStrategy::new(root, entry.moves()));
    Ok(UnrootedSolution {
        root,
        k,
        strategy,
        per_root,
    })
}

/// Edge-weight lifting depends on the root, so edge-weighted trees are solved
/// once per root with their own normalisation.
fn solve_unrooted_per_root(
    t: &WeightedRootedTree,
    opts: &SolverOptions,
) -> Result<UnrootedSolution, SolverError> {
    check_degree(&normalize_leaf_weights(t), opts.max_degree)?;
    let solve = |v: VertexId| solve_rooted(&t.rerooted(v).expect("vertex exists"), opts);
    let sols: Vec<RootedSolution> = if opts.parallel {
        (0..t.vertex_count())
            .into_par_iter()
            .map(solve)
            .collect::<Result<_, _>>()?
    } else {
        (0..t.vertex_count()).map(solve).collect::<Result<_, _>>()?
    };
    let per_root: Vec<Weight> = sols.iter().map(|s| s.k).collect();
    let best = sols
        .into_iter()
        .min_by_key(|s| (s.k, s.root))
        .expect("trees are non-empty");
    Ok(UnrootedSolution {
        root: best.root,
        k: best.k,
        strategy: best.strategy,
        per_root,
    })
}
