//! Exact integral solution of the planning network and decoding into camera
//! schedules.
//!
//! The maximization is solved as a min-cost flow with costs `−value` using
//! successive shortest paths with Johnson potentials. Camera-out arcs carry a
//! small rank perturbation (scaled below one unit of value) so that among
//! equal-value optima the solver prefers arcs earlier in
//! (camera, period, target) order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{ArcKind, FlowGraph, NodeKind};
use crate::valuation::Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("network is unbalanced: net balance {0}")]
    Unbalanced(i64),
    #[error("infeasible: demand at node {node} ({kind} {entity}, t={t}) cannot be met")]
    Infeasible { node: usize, kind: &'static str, entity: usize, t: usize },
    #[error("camera node {node} has {saturated} saturated outgoing arcs")]
    Inconsistent { node: usize, saturated: usize },
    #[error("instance has {slots} camera-period slots, oracle limit is {limit}")]
    TooLarge { slots: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSolution {
    /// Flow on each arc, indexed like `FlowGraph::arcs`.
    pub flows: Vec<i64>,
    /// `Σ value · flow`.
    pub objective: i64,
}

impl FlowSolution {
    pub fn from_flows(graph: &FlowGraph, flows: Vec<i64>) -> Self {
        let objective = objective_of(graph, &flows);
        Self { flows, objective }
    }
}

pub fn objective_of(graph: &FlowGraph, flows: &[i64]) -> i64 {
    let total: i128 = graph
        .arcs
        .iter()
        .zip(flows)
        .map(|(a, &f)| i128::from(a.value) * i128::from(f))
        .sum();
    total.clamp(i128::from(i64::MIN), i128::from(i64::MAX)) as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action", content = "target")]
pub enum Action {
    ObserveGroup(usize),
    ObserveFixed(usize),
    Idle,
}

/// `actions[i][t-1]` is what camera `i` does in period `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub actions: Vec<Vec<Action>>,
}

impl Schedule {
    pub fn first_period(&self) -> Vec<Action> {
        self.actions.iter().map(|row| row[0]).collect()
    }

    /// Re-scores the schedule against the arc values in `graph`.
    pub fn score(&self, graph: &FlowGraph) -> i64 {
        let mut total = 0i64;
        for (i, row) in self.actions.iter().enumerate() {
            for (idx, action) in row.iter().enumerate() {
                let from = graph.camera_node(i, idx + 1);
                let to = match *action {
                    Action::ObserveGroup(j) => graph.group_node(j, idx + 1),
                    Action::ObserveFixed(k) => graph.fixed_node(k, idx + 1),
                    Action::Idle => graph.sink(),
                };
                if let Some(a) = graph.arc_between(from, to) {
                    total = total.saturating_add(graph.arcs[a].value);
                }
            }
        }
        total
    }
}

struct Residual {
    head: Vec<usize>,
    to: Vec<usize>,
    next: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i128>,
}

const NONE: usize = usize::MAX;

impl Residual {
    fn new(n: usize) -> Self {
        Self { head: vec![NONE; n], to: vec![], next: vec![], cap: vec![], cost: vec![] }
    }

    fn add(&mut self, u: usize, v: usize, cap: i64, cost: i128) -> usize {
        let e = self.to.len();
        for (a, b, c, k) in [(u, v, cap, cost), (v, u, 0, -cost)] {
            self.to.push(b);
            self.cap.push(c);
            self.cost.push(k);
            self.next.push(self.head[a]);
            self.head[a] = self.to.len() - 1;
        }
        e
    }

    fn edges(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(self.head[u]).filter(|&e| e != NONE), move |&e| {
            Some(self.next[e]).filter(|&n| n != NONE)
        })
    }
}

/// Optimal integral flow maximizing `Σ value · flow`.
pub fn solve(graph: &FlowGraph) -> Result<FlowSolution, SolveError> {
    let net = graph.net_balance();
    if net != 0 {
        return Err(SolveError::Unbalanced(net));
    }
    let n = graph.nodes.len();
    let (src, dst) = (n, n + 1);
    let mut res = Residual::new(n + 2);

    let camera_arcs = graph.arcs.iter().filter(|a| a.kind.leaves_camera()).count() as i128;
    let slots = (graph.cameras * graph.horizon) as i128;
    let scale = camera_arcs * slots.max(1) + 1;

    let mut rank = 0i128;
    let mut arc_edge = Vec::with_capacity(graph.arcs.len());
    for a in &graph.arcs {
        let tie = if a.kind.leaves_camera() {
            rank += 1;
            rank
        } else {
            0
        };
        let cost = -i128::from(a.value) * scale + tie;
        arc_edge.push(res.add(a.from, a.to, a.capacity, cost));
    }
    let mut required = 0i64;
    let mut demand_edges = Vec::new();
    for (id, node) in graph.nodes.iter().enumerate() {
        if node.balance > 0 {
            res.add(src, id, node.balance, 0);
            required += node.balance;
        } else if node.balance < 0 {
            demand_edges.push((id, res.add(id, dst, -node.balance, 0)));
        }
    }

    let total = n + 2;
    let potential = bellman_ford(&res, src, total);
    let mut potential: Vec<i128> = potential.into_iter().map(|p| p.unwrap_or(0)).collect();
    let mut pushed = 0i64;
    let mut dist = vec![i128::MAX; total];
    let mut parent = vec![NONE; total];
    while pushed < required {
        dist.fill(i128::MAX);
        parent.fill(NONE);
        dist[src] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0i128, src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for e in res.edges(u) {
                if res.cap[e] <= 0 {
                    continue;
                }
                let v = res.to[e];
                let nd = d + res.cost[e] + potential[u] - potential[v];
                if nd < dist[v] {
                    dist[v] = nd;
                    parent[v] = e;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        if dist[dst] == i128::MAX {
            break;
        }
        for v in 0..total {
            if dist[v] != i128::MAX {
                potential[v] += dist[v];
            }
        }
        let mut bottleneck = required - pushed;
        let mut v = dst;
        while v != src {
            let e = parent[v];
            bottleneck = bottleneck.min(res.cap[e]);
            v = res.to[e ^ 1];
        }
        let mut v = dst;
        while v != src {
            let e = parent[v];
            res.cap[e] -= bottleneck;
            res.cap[e ^ 1] += bottleneck;
            v = res.to[e ^ 1];
        }
        pushed += bottleneck;
    }

    if pushed < required {
        let (node, _) = demand_edges
            .iter()
            .copied()
            .find(|&(_, e)| res.cap[e] > 0)
            .unwrap_or((graph.sink(), 0));
        let nd = graph.nodes[node];
        return Err(SolveError::Infeasible {
            node,
            kind: nd.kind.as_str(),
            entity: nd.entity,
            t: nd.t.unwrap_or(0),
        });
    }

    let flows: Vec<i64> = graph
        .arcs
        .iter()
        .zip(&arc_edge)
        .map(|(a, &e)| a.capacity - res.cap[e])
        .collect();
    Ok(FlowSolution::from_flows(graph, flows))
}

/// Shortest distances from `src` over positive-capacity edges; `None` if unreachable.
fn bellman_ford(res: &Residual, src: usize, n: usize) -> Vec<Option<i128>> {
    let mut dist: Vec<Option<i128>> = vec![None; n];
    dist[src] = Some(0);
    for _ in 0..n {
        let mut changed = false;
        for u in 0..n {
            let Some(du) = dist[u] else { continue };
            for e in res.edges(u) {
                if res.cap[e] <= 0 {
                    continue;
                }
                let v = res.to[e];
                let nd = du + res.cost[e];
                if dist[v].is_none_or(|dv| nd < dv) {
                    dist[v] = Some(nd);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Decodes each camera node's unique saturated outgoing arc.
pub fn extract_schedule(graph: &FlowGraph, solution: &FlowSolution) -> Result<Schedule, SolveError> {
    let mut actions = vec![vec![Action::Idle; graph.horizon]; graph.cameras];
    for (i, row) in actions.iter_mut().enumerate() {
        for (idx, slot) in row.iter_mut().enumerate() {
            let node = graph.camera_node(i, idx + 1);
            let used: Vec<_> = graph
                .out_arcs(node)
                .filter(|(k, _)| solution.flows[*k] > 0)
                .map(|(_, a)| a)
                .collect();
            if used.len() != 1 || solution.flows[graph.arc_between(node, used[0].to).unwrap()] != 1 {
                return Err(SolveError::Inconsistent { node, saturated: used.len() });
            }
            let target = graph.nodes[used[0].to];
            *slot = match (used[0].kind, target.kind) {
                (ArcKind::CameraGroup, NodeKind::Group) => Action::ObserveGroup(target.entity),
                (ArcKind::CameraFixed, NodeKind::Fixed) => Action::ObserveFixed(target.entity),
                _ => Action::Idle,
            };
        }
    }
    Ok(Schedule { actions })
}

/// Slot limit of [`brute_force_oracle`].
pub const ORACLE_SLOT_LIMIT: usize = 12;

/// Exhaustive search over every per-camera-period action assignment that
/// satisfies the network's side constraints, returning the best one as a full
/// arc flow. Independent of the min-cost-flow path; used as a test oracle.
pub fn brute_force_oracle(graph: &FlowGraph) -> Result<FlowSolution, SolveError> {
    let slots = graph.cameras * graph.horizon;
    if slots > ORACLE_SLOT_LIMIT {
        return Err(SolveError::TooLarge { slots, limit: ORACLE_SLOT_LIMIT });
    }
    let net = graph.net_balance();
    if net != 0 {
        return Err(SolveError::Unbalanced(net));
    }

    // Slot order: period-major, so window demands can be checked as soon as
    // a window closes.
    let order: Vec<(usize, usize)> = (1..=graph.horizon)
        .flat_map(|t| (0..graph.cameras).map(move |i| (i, t)))
        .collect();
    let options: Vec<Vec<(usize, Value)>> = order
        .iter()
        .map(|&(i, t)| {
            graph
                .out_arcs(graph.camera_node(i, t))
                .map(|(k, a)| (k, a.value))
                .collect()
        })
        .collect();

    let mut search = Search {
        graph,
        order: &order,
        options: &options,
        group_used: (0..graph.groups).map(|j| graph.nodes[graph.group_node(j, 1)].balance > 0).collect(),
        fixed_busy: vec![vec![false; graph.horizon + 1]; graph.fixed],
        looks: vec![vec![0; graph.layout.count() + 1]; graph.fixed],
        chosen: vec![0; order.len()],
        best: None,
    };
    search.run(0, 0);

    let Some((_, choice)) = search.best else {
        let node = (0..graph.fixed)
            .flat_map(|k| (1..=graph.layout.count()).map(move |tau| (k, tau)))
            .map(|(k, tau)| graph.demand_node(k, tau))
            .find(|&d| graph.nodes[d].balance < 0)
            .unwrap_or(graph.sink());
        let nd = graph.nodes[node];
        return Err(SolveError::Infeasible { node, kind: nd.kind.as_str(), entity: nd.entity, t: nd.t.unwrap_or(0) });
    };
    Ok(FlowSolution::from_flows(graph, complete_flows(graph, &choice)))
}

struct Search<'a> {
    graph: &'a FlowGraph,
    order: &'a [(usize, usize)],
    options: &'a [Vec<(usize, Value)>],
    group_used: Vec<bool>,
    fixed_busy: Vec<Vec<bool>>,
    looks: Vec<Vec<i64>>,
    chosen: Vec<usize>,
    best: Option<(i128, Vec<usize>)>,
}

impl Search<'_> {
    fn run(&mut self, slot: usize, acc: i128) {
        let g = self.graph;
        if slot > 0 {
            let (_, t_prev) = self.order[slot - 1];
            let closes = slot == self.order.len() || self.order[slot].1 != t_prev;
            if closes && !self.windows_ok(t_prev) {
                return;
            }
        }
        if slot == self.order.len() {
            if self.best.as_ref().is_none_or(|(b, _)| acc > *b) {
                self.best = Some((acc, self.chosen.clone()));
            }
            return;
        }
        let (_, t) = self.order[slot];
        for &(arc, value) in &self.options[slot] {
            let a = &g.arcs[arc];
            let target = g.nodes[a.to];
            match a.kind {
                ArcKind::CameraGroup => {
                    let j = target.entity;
                    if self.group_used[j] {
                        continue;
                    }
                    self.group_used[j] = true;
                    self.chosen[slot] = arc;
                    self.run(slot + 1, acc + i128::from(value));
                    self.group_used[j] = false;
                }
                ArcKind::CameraFixed => {
                    let k = target.entity;
                    if self.fixed_busy[k][t] {
                        continue;
                    }
                    let tau = g.layout.window_of(t);
                    self.fixed_busy[k][t] = true;
                    self.looks[k][tau] += 1;
                    self.chosen[slot] = arc;
                    self.run(slot + 1, acc + i128::from(value));
                    self.looks[k][tau] -= 1;
                    self.fixed_busy[k][t] = false;
                }
                _ => {
                    self.chosen[slot] = arc;
                    self.run(slot + 1, acc + i128::from(value));
                }
            }
        }
    }

    /// Every enforced window ending at period `t` has its look.
    fn windows_ok(&self, t: usize) -> bool {
        let g = self.graph;
        let tau = g.layout.window_of(t);
        if *g.layout.periods(tau).end() != t {
            return true;
        }
        (0..g.fixed).all(|k| {
            let demand = -g.nodes[g.demand_node(k, tau)].balance;
            self.looks[k][tau] >= demand
        })
    }
}

/// Derives every arc flow from the camera-arc choices.
fn complete_flows(graph: &FlowGraph, chosen_arcs: &[usize]) -> Vec<i64> {
    let mut flows = vec![0i64; graph.arcs.len()];
    for &a in chosen_arcs {
        flows[a] = 1;
    }
    let h = graph.horizon;
    for j in 0..graph.groups {
        let mut carried = graph.nodes[graph.group_node(j, 1)].balance;
        for t in 1..=h {
            let node = graph.group_node(j, t);
            carried += chosen_arcs
                .iter()
                .filter(|&&a| graph.arcs[a].to == node)
                .count() as i64;
            let next = if t < h { graph.group_node(j, t + 1) } else { graph.sink() };
            let arc = graph.arc_between(node, next).expect("group chain arc");
            flows[arc] = carried;
        }
    }
    for k in 0..graph.fixed {
        for t in 1..=h {
            let node = graph.fixed_node(k, t);
            let inflow = chosen_arcs.iter().filter(|&&a| graph.arcs[a].to == node).count() as i64;
            let tau = graph.layout.window_of(t);
            let arc = graph.arc_between(node, graph.demand_node(k, tau)).expect("fixed arc");
            flows[arc] = inflow;
        }
        for tau in 1..=graph.layout.count() {
            let d = graph.demand_node(k, tau);
            let looks: i64 = graph.layout.periods(tau).map(|t| flows[graph.arc_between(graph.fixed_node(k, t), d).unwrap()]).sum();
            let arc = graph.arc_between(d, graph.sink()).expect("demand arc");
            flows[arc] = looks + graph.nodes[d].balance;
        }
    }
    flows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{build_graph, PlanInstance};

    #[test]
    fn one_camera_two_groups_takes_best() {
        let g = build_graph(&PlanInstance::uniform(1, &[10, 7], &[], 1, 1)).unwrap();
        let s = solve(&g).unwrap();
        assert_eq!(s.objective, 10);
        let sched = extract_schedule(&g, &s).unwrap();
        assert_eq!(sched.actions, vec![vec![Action::ObserveGroup(0)]]);
        assert_eq!(sched.score(&g), s.objective);
        assert_eq!(brute_force_oracle(&g).unwrap().objective, 10);
    }

    #[test]
    fn two_cameras_one_group() {
        let g = build_graph(&PlanInstance::uniform(2, &[9], &[], 1, 1)).unwrap();
        let s = solve(&g).unwrap();
        assert_eq!(s.objective, 9);
        let sched = extract_schedule(&g, &s).unwrap();
        let first = sched.first_period();
        assert_eq!(first.iter().filter(|a| **a == Action::ObserveGroup(0)).count(), 1);
        assert!(first.contains(&Action::Idle));
        // Lowest camera takes the group on ties.
        assert_eq!(first[0], Action::ObserveGroup(0));
    }

    #[test]
    fn all_fixed_when_no_groups() {
        let g = build_graph(&PlanInstance::uniform(2, &[], &[3, 1], 4, 2)).unwrap();
        let s = solve(&g).unwrap();
        let sched = extract_schedule(&g, &s).unwrap();
        assert!(sched.actions.iter().flatten().all(|a| matches!(a, Action::ObserveFixed(_))));
        assert_eq!(s.objective, 4 * 4);
        assert_eq!(brute_force_oracle(&g).unwrap().objective, s.objective);
        assert!(g.residuals(&s.flows).iter().all(|&r| r == 0));
    }

    #[test]
    fn infeasible_demand_detected_by_both() {
        // One camera, T = 1, two regions: l·T < m, built by hand past the check.
        let inst = PlanInstance::uniform(1, &[], &[1, 1], 2, 1);
        assert!(build_graph(&inst).is_err());
        let mut g = build_graph(&PlanInstance::uniform(1, &[], &[1, 1], 2, 2)).unwrap();
        for k in 0..2 {
            let d = g.demand_node(k, 1);
            g.nodes[d].balance = -2;
        }
        let sink = g.sink();
        g.nodes[sink].balance += 2;
        assert!(matches!(solve(&g), Err(SolveError::Infeasible { kind: "demand", .. })));
        assert!(matches!(brute_force_oracle(&g), Err(SolveError::Infeasible { kind: "demand", .. })));
    }

    #[test]
    fn oracle_size_limit() {
        let g = build_graph(&PlanInstance::uniform(3, &[1], &[1], 5, 5)).unwrap();
        assert_eq!(brute_force_oracle(&g), Err(SolveError::TooLarge { slots: 15, limit: 12 }));
    }

    #[test]
    fn injected_group_cannot_be_taken() {
        let mut inst = PlanInstance::uniform(1, &[50, 5], &[], 2, 1);
        inst.group_done = vec![true, false];
        let g = build_graph(&inst).unwrap();
        let s = solve(&g).unwrap();
        assert_eq!(s.objective, 5);
        assert_eq!(brute_force_oracle(&g).unwrap().objective, 5);
    }

    #[test]
    fn unbalanced_rejected() {
        let mut g = build_graph(&PlanInstance::uniform(1, &[1], &[], 1, 1)).unwrap();
        g.nodes[0].balance = 2;
        assert_eq!(solve(&g), Err(SolveError::Unbalanced(1)));
    }
}
