//! Single-machine scheduling with time-dependent processing times, and the
//! reductions 3-partition → scheduling → connected search of a tree.
//!
//! A task has an integer deadline `d` and a nondecreasing duration `p(t)` for
//! every integer start `t < d`. Schedules run tasks back to back from time 0;
//! idle time never helps when durations are nondecreasing.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::semantics::{verify, SearchStrategy, StrategyState};
use crate::tree::{weight_add, weight_mul, EdgeId, VertexId, Weight, WeightedRootedTree};

pub type Time = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("task {task}: duration table has {len} entries, deadline is {deadline}")]
    TableLength {
        task: usize,
        len: usize,
        deadline: Time,
    },
    #[error("task {task}: duration at t={t} decreases")]
    NotMonotone { task: usize, t: Time },
    #[error("task {task}: durations must be positive")]
    ZeroDuration { task: usize },
    #[error("task {task}: cannot finish by its deadline from any start")]
    NoFeasibleStart { task: usize },
    #[error("order is not a permutation of the {tasks} tasks")]
    NotAPermutation { tasks: usize },
    #[error("schedule is infeasible: {0}")]
    Infeasible(String),
    #[error("3-partition instance: {0}")]
    BadThreePartition(String),
    #[error("{tasks} tasks exceed the brute-force cap of {cap}")]
    TooManyTasks { tasks: usize, cap: usize },
    #[error("strategy rejected: {0}")]
    StrategyRejected(String),
    #[error("structural property violated: {0}")]
    Violation(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub deadline: Time,
    /// `exec[t]` is the duration when started at `t`, for `t < deadline`.
    pub exec: Vec<Time>,
}

impl Task {
    pub fn new(deadline: Time, exec: Vec<Time>) -> Self {
        Task { deadline, exec }
    }

    pub fn constant(deadline: Time, p: Time) -> Self {
        Task {
            deadline,
            exec: vec![p; deadline as usize],
        }
    }

    fn validate(&self, task: usize) -> Result<(), ScheduleError> {
        if self.exec.len() as u64 != self.deadline {
            return Err(ScheduleError::TableLength {
                task,
                len: self.exec.len(),
                deadline: self.deadline,
            });
        }
        if self.exec.contains(&0) {
            return Err(ScheduleError::ZeroDuration { task });
        }
        if let Some(t) = self.exec.windows(2).position(|w| w[1] < w[0]) {
            return Err(ScheduleError::NotMonotone {
                task,
                t: t as Time + 1,
            });
        }
        Ok(())
    }

    pub fn duration(&self, t: Time) -> Option<Time> {
        self.exec.get(t as usize).copied()
    }

    /// `f = max{t : t + p(t) ≤ d}`.
    pub fn latest_start(&self) -> Option<Time> {
        (0..self.deadline)
            .rev()
            .find(|&t| t + self.exec[t as usize] <= self.deadline)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TdsInstance {
    pub tasks: Vec<Task>,
}

impl TdsInstance {
    pub fn new(tasks: Vec<Task>) -> Result<Self, ScheduleError> {
        for (i, task) in tasks.iter().enumerate() {
            task.validate(i)?;
        }
        Ok(TdsInstance { tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// `L`, the largest deadline (1 for an empty instance).
    pub fn horizon(&self) -> Time {
        self.tasks
            .iter()
            .map(|t| t.deadline)
            .max()
            .unwrap_or(1)
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub order: Vec<usize>,
    /// Indexed by task.
    pub start: Vec<Time>,
    pub completion: Vec<Time>,
    pub makespan: Time,
    pub feasible: bool,
    pub diagnostics: Vec<String>,
}

fn check_permutation(order: &[usize], n: usize) -> Result<(), ScheduleError> {
    let set: BTreeSet<usize> = order.iter().copied().collect();
    if order.len() != n || set.len() != n || set.iter().any(|&j| j >= n) {
        return Err(ScheduleError::NotAPermutation { tasks: n });
    }
    Ok(())
}

/// Runs tasks in `order` without idle time. A task that would start at or
/// after its deadline is flagged and charged its last tabulated duration.
pub fn simulate(inst: &TdsInstance, order: &[usize]) -> Result<Schedule, ScheduleError> {
    let n = inst.len();
    check_permutation(order, n)?;
    let mut start = vec![0; n];
    let mut completion = vec![0; n];
    let mut now: Time = 0;
    let mut diagnostics = Vec::new();
    for &j in order {
        let task = &inst.tasks[j];
        start[j] = now;
        let p = match task.duration(now) {
            Some(p) => p,
            None => {
                diagnostics.push(format!(
                    "task {j} would start at {now}, not before its deadline {}",
                    task.deadline
                ));
                task.exec.last().copied().unwrap_or(1)
            }
        };
        now = weight_add(now, p);
        completion[j] = now;
        if now > task.deadline && task.duration(start[j]).is_some() {
            diagnostics.push(format!(
                "task {j} completes at {now} after its deadline {}",
                task.deadline
            ));
        }
    }
    Ok(Schedule {
        order: order.to_vec(),
        start,
        completion,
        makespan: now,
        feasible: diagnostics.is_empty(),
        diagnostics,
    })
}

pub const BRUTE_FORCE_MAX_TASKS: usize = 9;

/// Every feasible order, in lexicographic order. Prefixes that already miss a
/// deadline are cut.
pub fn feasible_orders(
    inst: &TdsInstance,
    parallel: bool,
) -> Result<Vec<Vec<usize>>, ScheduleError> {
    let n = inst.len();
    if n > BRUTE_FORCE_MAX_TASKS {
        return Err(ScheduleError::TooManyTasks {
            tasks: n,
            cap: BRUTE_FORCE_MAX_TASKS,
        });
    }
    if n == 0 {
        return Ok(vec![vec![]]);
    }
    fn extend(
        inst: &TdsInstance,
        order: &mut Vec<usize>,
        used: &mut [bool],
        now: Time,
        out: &mut Vec<Vec<usize>>,
    ) {
        if order.len() == inst.len() {
            out.push(order.clone());
            return;
        }
        for j in 0..inst.len() {
            if used[j] {
                continue;
            }
            let task = &inst.tasks[j];
            let Some(p) = task.duration(now) else {
                continue;
            };
            if now + p > task.deadline {
                continue;
            }
            used[j] = true;
            order.push(j);
            extend(inst, order, used, now + p, out);
            order.pop();
            used[j] = false;
        }
    }
    let from = |first: usize| {
        let mut out = Vec::new();
        let mut used = vec![false; n];
        let task = &inst.tasks[first];
        if let Some(p) = task.duration(0) {
            if p <= task.deadline {
                used[first] = true;
                extend(inst, &mut vec![first], &mut used, p, &mut out);
            }
        }
        out
    };
    let parts: Vec<Vec<Vec<usize>>> = if parallel {
        (0..n).into_par_iter().map(from).collect()
    } else {
        (0..n).map(from).collect()
    };
    Ok(parts.into_iter().flatten().collect())
}

/// The lexicographically first feasible schedule, if any.
pub fn find_feasible(inst: &TdsInstance) -> Result<Option<Schedule>, ScheduleError> {
    let orders = feasible_orders(inst, false)?;
    match orders.first() {
        None => Ok(None),
        Some(o) => simulate(inst, o).map(Some),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreePartitionInstance {
    pub b: u64,
    pub a: Vec<u64>,
}

impl ThreePartitionInstance {
    pub fn new(b: u64, a: Vec<u64>) -> Result<Self, ScheduleError> {
        let bad = |m: String| Err(ScheduleError::BadThreePartition(m));
        if a.is_empty() || !a.len().is_multiple_of(3) {
            return bad(format!(
                "{} numbers is not a positive multiple of 3",
                a.len()
            ));
        }
        let m = (a.len() / 3) as u64;
        let sum: u64 = a.iter().sum();
        if sum != weight_mul(m, b) {
            return bad(format!("numbers sum to {sum}, expected m·B = {}", m * b));
        }
        if let Some(&x) = a.iter().find(|&&x| !(4 * x > b && 2 * x < b)) {
            return bad(format!("{x} is not strictly between B/4 and B/2"));
        }
        Ok(ThreePartitionInstance { b, a })
    }

    pub fn m(&self) -> usize {
        self.a.len() / 3
    }

    /// A partition into triples summing to `B`, by exhaustive search.
    pub fn solve(&self) -> Option<Vec<Vec<u64>>> {
        fn go(rest: &mut Vec<u64>, b: u64, out: &mut Vec<Vec<u64>>) -> bool {
            if rest.is_empty() {
                return true;
            }
            let first = rest.remove(0);
            for i in 0..rest.len() {
                for j in i + 1..rest.len() {
                    if first + rest[i] + rest[j] == b {
                        let (x, y) = (rest[i], rest[j]);
                        let mut next: Vec<u64> = rest
                            .iter()
                            .enumerate()
                            .filter(|&(q, _)| q != i && q != j)
                            .map(|(_, &v)| v)
                            .collect();
                        out.push(vec![first, x, y]);
                        if go(&mut next, b, out) {
                            return true;
                        }
                        out.pop();
                    }
                }
            }
            rest.insert(0, first);
            false
        }
        let mut rest = self.a.clone();
        let mut out = Vec::new();
        go(&mut rest, self.b, &mut out).then_some(out)
    }
}

/// The scheduling instance built from a 3-partition instance. Task `j < 3m`
/// is the value task of `a_j`; task `3m + i - 1` is the gadget task of
/// interval `I_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetInstance {
    pub tds: TdsInstance,
    pub m: usize,
    pub b: u64,
    pub horizon: Time,
    /// `I_i = [l_i, r_i)`, `i = 1..=m` stored at `i - 1`.
    pub intervals: Vec<(Time, Time)>,
}

impl GadgetInstance {
    pub fn gadget_task(&self, i: usize) -> usize {
        3 * self.m + i - 1
    }

    pub fn is_value_task(&self, j: usize) -> bool {
        j < 3 * self.m
    }
}

fn cube(b: u64) -> u64 {
    weight_mul(weight_mul(b, b), b)
}

pub fn three_partition_to_tds(
    tp: &ThreePartitionInstance,
) -> Result<GadgetInstance, ScheduleError> {
    let tp = ThreePartitionInstance::new(tp.b, tp.a.clone())?;
    let m = tp.m() as u64;
    let b = tp.b;
    let b3 = cube(b);
    let l_of = |i: u64| weight_add(weight_mul(i - 1, b3), (i - 1) * i * b / 2);
    let r_of = |i: u64| weight_add(weight_mul(i, b3), i * (i + 1) * b / 2);
    let horizon = weight_add(weight_mul(m, b3), b * m * (m + 1) / 2);
    let intervals: Vec<(Time, Time)> = (1..=m).map(|i| (l_of(i), r_of(i))).collect();
    debug_assert_eq!(intervals.last().unwrap().1, horizon);
    let mut tasks = Vec::with_capacity(4 * m as usize);
    for &a in &tp.a {
        let mut exec = Vec::with_capacity(horizon as usize);
        for (i, &(l, r)) in intervals.iter().enumerate() {
            exec.extend(std::iter::repeat_n(
                weight_mul(i as u64 + 1, a),
                (r - l) as usize,
            ));
        }
        tasks.push(Task::new(horizon, exec));
    }
    for i in 1..=m {
        tasks.push(Task::constant(l_of(i) + b3, b3));
    }
    Ok(GadgetInstance {
        tds: TdsInstance::new(tasks)?,
        m: m as usize,
        b,
        horizon,
        intervals,
    })
}

/// `~I_i = [~C_i, ~s_{i+1})`, with `~s_{m+1} = L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub i: usize,
    pub start: Time,
    pub end: Time,
    pub inside_interval: bool,
    pub length_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaReport {
    pub gadgets_in_order: bool,
    pub windows: Vec<Window>,
    pub violations: Vec<String>,
}

impl LemmaReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks on a feasible schedule of a gadget instance: the gadget tasks run
/// in index order, each window between consecutive gadget tasks lies inside
/// its interval `I_i`, and window `i` has length exactly `iB`.
pub fn check_structural_lemmas(
    g: &GadgetInstance,
    d: &Schedule,
) -> Result<LemmaReport, ScheduleError> {
    if !d.feasible {
        return Err(ScheduleError::Infeasible(d.diagnostics.join("; ")));
    }
    let mut violations = Vec::new();
    let pos: Vec<usize> = (1..=g.m)
        .map(|i| d.order.iter().position(|&j| j == g.gadget_task(i)).unwrap())
        .collect();
    let gadgets_in_order = pos.windows(2).all(|w| w[0] < w[1]);
    if !gadgets_in_order {
        violations.push(format!("gadget tasks run in positions {pos:?}"));
    }
    let mut windows = Vec::new();
    for i in 1..=g.m {
        let start = d.completion[g.gadget_task(i)];
        let end = if i < g.m {
            d.start[g.gadget_task(i + 1)]
        } else {
            g.horizon
        };
        let (l, r) = g.intervals[i - 1];
        let inside_interval = l <= start && start <= end && end <= r;
        let length_ok = end >= start && end - start == i as u64 * g.b;
        if !inside_interval {
            violations.push(format!(
                "window {i} = [{start}, {end}) leaves I_{i} = [{l}, {r})"
            ));
        }
        if !length_ok {
            violations.push(format!(
                "window {i} = [{start}, {end}) has length other than {}",
                i as u64 * g.b
            ));
        }
        windows.push(Window {
            i,
            start,
            end,
            inside_interval,
            length_ok,
        });
    }
    Ok(LemmaReport {
        gadgets_in_order,
        windows,
        violations,
    })
}

/// Reads a 3-partition off a feasible schedule: the value tasks running in
/// window `i` form part `i`.
pub fn extract_three_partition(
    g: &GadgetInstance,
    d: &Schedule,
    a: &[u64],
) -> Result<Vec<Vec<u64>>, ScheduleError> {
    let report = check_structural_lemmas(g, d)?;
    if !report.ok() {
        return Err(ScheduleError::Violation(report.violations.join("; ")));
    }
    let mut parts = vec![Vec::new(); g.m];
    for (j, &aj) in a.iter().enumerate().take(3 * g.m) {
        let s = d.start[j];
        let w = report
            .windows
            .iter()
            .find(|w| w.start <= s && s < w.end)
            .ok_or_else(|| {
                ScheduleError::Violation(format!("value task {j} starts outside every window"))
            })?;
        parts[w.i - 1].push(aj);
    }
    for (i, p) in parts.iter().enumerate() {
        if p.iter().sum::<u64>() != g.b || p.len() != 3 {
            return Err(ScheduleError::Violation(format!(
                "part {} = {p:?} does not sum to B",
                i + 1
            )));
        }
    }
    Ok(parts)
}

/// Role of a vertex in the tree built from a scheduling instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Root,
    Y0,
    Z0,
    U { task: usize, i: Time },
    V { task: usize, i: Time },
    Y { task: usize },
    Z { task: usize },
}

/// Vertex ids of one path gadget; `u[i]` is `u^i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathGadget {
    pub f: Time,
    pub u: Vec<VertexId>,
    pub v: Vec<VertexId>,
    pub y: VertexId,
    pub z: VertexId,
}

#[derive(Debug, Clone)]
pub struct TdsTree {
    pub tree: WeightedRootedTree,
    pub k: Weight,
    pub horizon: Time,
    pub roles: Vec<Role>,
    pub paths: Vec<PathGadget>,
    pub y0: VertexId,
    pub z0: VertexId,
}

impl TdsTree {
    fn edge(&self, a: VertexId, b: VertexId) -> EdgeId {
        self.tree.edge_between(a, b).expect("gadget edge")
    }
}

/// Root `r` (id 0) with arm `r - y0 - z0` (ids 1, 2) and, per task in index
/// order, the path `r - u^f - v^f - u^{f-1} - ... - u^0 - v^0 - y - z` with
/// ids assigned along it. Weights: `w(r) = 2L`, `w(y) = 3L`, `w(z) = 1`,
/// `w(u^i) = 2L - i`, `w(v^i) = p(i)`. Budget `4L`.
pub fn tds_to_tree(inst: &TdsInstance) -> Result<TdsTree, ScheduleError> {
    let l = inst.horizon();
    let two_l = weight_mul(2, l);
    let three_l = weight_mul(3, l);
    let mut weights = vec![two_l, three_l, 1];
    let mut roles = vec![Role::Root, Role::Y0, Role::Z0];
    let mut edges = vec![(0, 1, 1), (1, 2, 1)];
    let mut paths = Vec::new();
    for (j, task) in inst.tasks.iter().enumerate() {
        let f = task
            .latest_start()
            .ok_or(ScheduleError::NoFeasibleStart { task: j })?;
        let mut u = vec![0; f as usize + 1];
        let mut v = vec![0; f as usize + 1];
        let mut prev = 0;
        for i in (0..=f).rev() {
            let ui = weights.len();
            weights.push(two_l - i);
            roles.push(Role::U { task: j, i });
            edges.push((prev, ui, 1));
            let vi = weights.len();
            weights.push(task.exec[i as usize]);
            roles.push(Role::V { task: j, i });
            edges.push((ui, vi, 1));
            u[i as usize] = ui;
            v[i as usize] = vi;
            prev = vi;
        }
        let y = weights.len();
        weights.push(three_l);
        roles.push(Role::Y { task: j });
        edges.push((prev, y, 1));
        let z = weights.len();
        weights.push(1);
        roles.push(Role::Z { task: j });
        edges.push((y, z, 1));
        // the path weights separate searchers guarding u's from those on v's
        debug_assert!((0..=f).all(|i| weights[u[i as usize]] > l && weights[v[i as usize]] <= l));
        debug_assert!(u.windows(2).all(|w| weights[w[0]] > weights[w[1]]));
        debug_assert!(v.windows(2).all(|w| weights[w[0]] <= weights[w[1]]));
        paths.push(PathGadget { f, u, v, y, z });
    }
    let tree = WeightedRootedTree::new(weights, edges, 0).expect("reduction output is a tree");
    Ok(TdsTree {
        tree,
        k: weight_mul(4, l),
        horizon: l,
        roles,
        paths,
        y0: 1,
        z0: 2,
    })
}

/// The strategy built from a feasible schedule: sweep each path down to
/// `v^{s_j}` in schedule order, clear `y0, z0`, then finish every path.
pub fn schedule_to_strategy(tt: &TdsTree, d: &Schedule) -> Result<SearchStrategy, ScheduleError> {
    if !d.feasible {
        return Err(ScheduleError::Infeasible(d.diagnostics.join("; ")));
    }
    if d.order.len() != tt.paths.len() {
        return Err(ScheduleError::NotAPermutation {
            tasks: tt.paths.len(),
        });
    }
    let r = tt.tree.root();
    let mut moves = Vec::with_capacity(tt.tree.edge_count());
    for &j in &d.order {
        let p = &tt.paths[j];
        let s = d.start[j];
        let mut prev = r;
        for i in (s..=p.f).rev() {
            moves.push(tt.edge(prev, p.u[i as usize]));
            moves.push(tt.edge(p.u[i as usize], p.v[i as usize]));
            prev = p.v[i as usize];
        }
    }
    moves.push(tt.edge(r, tt.y0));
    moves.push(tt.edge(tt.y0, tt.z0));
    for &j in &d.order {
        let p = &tt.paths[j];
        let s = d.start[j];
        let mut prev = p.v[s as usize];
        for i in (0..s).rev() {
            moves.push(tt.edge(prev, p.u[i as usize]));
            moves.push(tt.edge(p.u[i as usize], p.v[i as usize]));
            prev = p.v[i as usize];
        }
        moves.push(tt.edge(prev, p.y));
        moves.push(tt.edge(p.y, p.z));
    }
    Ok(SearchStrategy::new(r, moves))
}

/// Reads a feasible schedule off a `4L`-search of the reduction tree: tasks
/// run in the order their root edges are cleared. Checks along the way that
/// `r - y0` is the last root edge, and that by the time the next root edge is
/// cleared, path `j` has not been swept past `v^{s_j}`. Finally rebuilds the
/// canonical strategy of the schedule and certifies it at `4L`.
pub fn strategy_to_schedule(
    inst: &TdsInstance,
    tt: &TdsTree,
    s: &SearchStrategy,
) -> Result<Schedule, ScheduleError> {
    let reject = |m: String| ScheduleError::StrategyRejected(m);
    let report = verify(&tt.tree, s, tt.k);
    if !report.ok {
        return Err(reject(format!(
            "{}",
            report.failure.expect("failed report has a reason")
        )));
    }
    let r = tt.tree.root();
    if s.start != r {
        return Err(reject(format!("starts at {} instead of the root", s.start)));
    }
    let root_y0 = tt.edge(r, tt.y0);
    let mut order = Vec::new();
    let mut root_moves = Vec::new();
    for (idx, &e) in s.moves.iter().enumerate() {
        let (a, b) = (tt.tree.edge(e).a, tt.tree.edge(e).b);
        if a != r && b != r {
            continue;
        }
        root_moves.push(idx);
        if e == root_y0 {
            continue;
        }
        if root_moves.len() > 1 && s.moves[root_moves[root_moves.len() - 2]] == root_y0 {
            return Err(ScheduleError::Violation(
                "r-y0 is cleared before a path edge at the root".into(),
            ));
        }
        let other = if a == r { b } else { a };
        match tt.roles[other] {
            Role::U { task, .. } => order.push(task),
            role => {
                return Err(ScheduleError::Violation(format!(
                    "unexpected root neighbour {role:?}"
                )))
            }
        }
    }
    if s.moves[*root_moves.last().expect("root has the y0 edge")] != root_y0 {
        return Err(ScheduleError::Violation(
            "r-y0 is not the last root edge cleared".into(),
        ));
    }
    let d = simulate(inst, &order)?;
    if !d.feasible {
        return Err(ScheduleError::Violation(format!(
            "extracted order is infeasible: {}",
            d.diagnostics.join("; ")
        )));
    }
    // a raw strategy may stop short of v^{s_j} before the next root edge and
    // finish later, but it can never go past it
    let mut state = StrategyState::new(&tt.tree, r).expect("root exists");
    let mut next_root = 1;
    for (idx, &e) in s.moves.iter().enumerate() {
        if next_root < root_moves.len() && idx == root_moves[next_root] {
            let j = order[next_root - 1];
            let (p, sj) = (&tt.paths[j], d.start[j]);
            if sj > p.f {
                return Err(ScheduleError::Violation(format!(
                    "task {j} starts at {sj} after its latest start {}",
                    p.f
                )));
            }
            if sj > 0 && state.is_cleared(tt.edge(p.v[sj as usize], p.u[sj as usize - 1])) {
                return Err(ScheduleError::Violation(format!(
                    "path of task {j} is cleared past v^{sj} before the next root edge"
                )));
            }
            next_root += 1;
        }
        state.apply(e).expect("verified above");
    }
    let canonical = schedule_to_strategy(tt, &d)?;
    let check = verify(&tt.tree, &canonical, tt.k);
    if !check.ok {
        return Err(ScheduleError::Violation(format!(
            "canonical strategy fails: {:?}",
            check.failure
        )));
    }
    Ok(d)
}
