//! Time-expanded network for one planning horizon.
//!
//! Every camera has a supply node per period. A unit leaving camera `i` at
//! period `t` either interrogates a group (`R → K`), takes a wide look at a
//! fixed region (`R → F`), or idles straight into the sink when there are fewer
//! fixed regions than cameras. Group nodes are chained over time with unit
//! capacity so a group is interrogated at most once; fixed-region looks are
//! collected by one demand node per revisit window, each of which must receive
//! at least one look.
//!
//! Node ids are laid out as cameras, groups, fixed regions, demand nodes and
//! finally the sink, each block ordered by entity then period.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::valuation::Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlowError {
    #[error("infeasible configuration: {0}")]
    Infeasible(FeasibilityViolation),
    #[error("value table shape does not match {what}")]
    Shape { what: &'static str },
}

/// First violated feasibility condition.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityViolation {
    #[error("T | H (window {window} does not divide horizon {horizon})")]
    WindowDividesHorizon { horizon: usize, window: usize },
    #[error("P ≥ 0 (P = {p})")]
    NegativeSinkBalance { p: i64 },
    #[error("l·T ≥ m ({cameras}·{window} < {fixed})")]
    NotEnoughLooks { cameras: usize, window: usize, fixed: usize },
}

/// Which closed form to use for the sink balance `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PFormula {
    /// `H·l − (H/T)·m`: every camera-period minus the mandatory window looks.
    #[default]
    Conserved,
    /// `T·l − (H/T)·m`, which only balances the network when `H = T`.
    Printed,
}

/// Sink balance `P`. Requires `T | H`.
pub fn compute_p(
    horizon: usize,
    window: usize,
    cameras: usize,
    fixed: usize,
    formula: PFormula,
) -> Result<i64, FeasibilityViolation> {
    if window == 0 || horizon % window != 0 {
        return Err(FeasibilityViolation::WindowDividesHorizon { horizon, window });
    }
    let slots = match formula {
        PFormula::Conserved => horizon * cameras,
        PFormula::Printed => window * cameras,
    } as i64;
    let p = slots - ((horizon / window) * fixed) as i64;
    if p < 0 {
        return Err(FeasibilityViolation::NegativeSinkBalance { p });
    }
    Ok(p)
}

/// Checks `T | H`, `l·T ≥ m` and `P ≥ 0`, returning the first violation.
///
/// With the conserved `P`, the last two are equivalent; the window condition
/// is reported since it names the cause.
pub fn feasibility_check(
    horizon: usize,
    window: usize,
    cameras: usize,
    fixed: usize,
    _groups: usize,
) -> Result<(), FeasibilityViolation> {
    if window == 0 || horizon % window != 0 {
        return Err(FeasibilityViolation::WindowDividesHorizon { horizon, window });
    }
    if cameras * window < fixed {
        return Err(FeasibilityViolation::NotEnoughLooks { cameras, window, fixed });
    }
    compute_p(horizon, window, cameras, fixed, PFormula::Conserved)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Camera,
    Group,
    Fixed,
    Demand,
    Sink,
}

impl NodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Camera => "camera",
            NodeKind::Group => "group",
            NodeKind::Fixed => "fixed",
            NodeKind::Demand => "demand",
            NodeKind::Sink => "sink",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNode {
    pub kind: NodeKind,
    /// Camera, group or region index; 0 for the sink.
    pub entity: usize,
    /// Period `1..=H`, window index for demand nodes, `None` for the sink.
    pub t: Option<usize>,
    /// Positive for supply, negative for demand.
    pub balance: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    CameraGroup,
    CameraFixed,
    Idle,
    Carry,
    GroupSink,
    FixedDemand,
    DemandSink,
}

impl ArcKind {
    pub fn leaves_camera(&self) -> bool {
        matches!(self, ArcKind::CameraGroup | ArcKind::CameraFixed | ArcKind::Idle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub capacity: i64,
    pub value: Value,
    pub kind: ArcKind,
}

/// Everything needed to build the network for one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanInstance {
    pub cameras: usize,
    pub groups: usize,
    pub fixed: usize,
    /// `H`, periods in the plan.
    pub horizon: usize,
    /// `T`, revisit window length in periods.
    pub window: usize,
    /// Periods of the current revisit window that elapsed before this plan.
    #[serde(default)]
    pub window_offset: usize,
    /// `group_values[i][j][t-1]`: value of camera `i` on group `j` at period `t`,
    /// `None` when the camera cannot frame the group then.
    pub group_values: Vec<Vec<Vec<Option<Value>>>>,
    /// `fixed_values[i][k][t-1]`: value of camera `i` looking at region `k`.
    pub fixed_values: Vec<Vec<Vec<Value>>>,
    /// Groups already interrogated before the plan starts.
    #[serde(default)]
    pub group_done: Vec<bool>,
    /// Regions already looked at in the current window.
    #[serde(default)]
    pub fixed_done: Vec<bool>,
    #[serde(default)]
    pub p_formula: PFormula,
}

impl PlanInstance {
    /// Full visibility with constant values.
    pub fn uniform(
        cameras: usize,
        group_values: &[Value],
        fixed_values: &[Value],
        horizon: usize,
        window: usize,
    ) -> Self {
        Self {
            cameras,
            groups: group_values.len(),
            fixed: fixed_values.len(),
            horizon,
            window,
            window_offset: 0,
            group_values: vec![group_values.iter().map(|&v| vec![Some(v); horizon]).collect(); cameras],
            fixed_values: vec![fixed_values.iter().map(|&v| vec![v; horizon]).collect(); cameras],
            group_done: vec![false; group_values.len()],
            fixed_done: vec![false; fixed_values.len()],
            p_formula: PFormula::Conserved,
        }
    }

    fn check_shapes(&self) -> Result<(), FlowError> {
        let ok_groups = self.group_values.len() == self.cameras
            && self
                .group_values
                .iter()
                .all(|g| g.len() == self.groups && g.iter().all(|v| v.len() == self.horizon));
        if !ok_groups {
            return Err(FlowError::Shape { what: "cameras × groups × horizon" });
        }
        let ok_fixed = self.fixed_values.len() == self.cameras
            && self
                .fixed_values
                .iter()
                .all(|f| f.len() == self.fixed && f.iter().all(|v| v.len() == self.horizon));
        if !ok_fixed {
            return Err(FlowError::Shape { what: "cameras × fixed × horizon" });
        }
        if self.window_offset >= self.window.max(1) {
            return Err(FlowError::Shape { what: "window offset < T" });
        }
        if (!self.group_done.is_empty() && self.group_done.len() != self.groups)
            || (!self.fixed_done.is_empty() && self.fixed_done.len() != self.fixed)
        {
            return Err(FlowError::Shape { what: "done flags" });
        }
        Ok(())
    }

    pub fn group_done(&self, j: usize) -> bool {
        self.group_done.get(j).copied().unwrap_or(false)
    }

    pub fn fixed_done(&self, k: usize) -> bool {
        self.fixed_done.get(k).copied().unwrap_or(false)
    }
}

/// Revisit window bookkeeping for a horizon that may start mid-window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowLayout {
    pub horizon: usize,
    pub window: usize,
    pub offset: usize,
}

impl WindowLayout {
    /// 1-based window index of plan period `t`.
    pub fn window_of(&self, t: usize) -> usize {
        (t + self.offset).div_ceil(self.window)
    }

    pub fn count(&self) -> usize {
        (self.horizon + self.offset).div_ceil(self.window)
    }

    /// Plan periods that fall in window `tau`.
    pub fn periods(&self, tau: usize) -> std::ops::RangeInclusive<usize> {
        let first = ((tau - 1) * self.window + 1).saturating_sub(self.offset).max(1);
        let last = (tau * self.window - self.offset).min(self.horizon);
        first..=last
    }

    /// A window is enforced only if it ends inside the horizon.
    pub fn is_complete(&self, tau: usize) -> bool {
        tau * self.window - self.offset <= self.horizon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub nodes: Vec<FlowNode>,
    pub arcs: Vec<FlowArc>,
    pub horizon: usize,
    pub window: usize,
    pub cameras: usize,
    pub groups: usize,
    pub fixed: usize,
    pub layout: WindowLayout,
    /// Sink balance before injected units.
    pub p: i64,
}

impl FlowGraph {
    pub fn camera_node(&self, i: usize, t: usize) -> usize {
        i * self.horizon + (t - 1)
    }

    pub fn group_node(&self, j: usize, t: usize) -> usize {
        self.cameras * self.horizon + j * self.horizon + (t - 1)
    }

    pub fn fixed_node(&self, k: usize, t: usize) -> usize {
        (self.cameras + self.groups) * self.horizon + k * self.horizon + (t - 1)
    }

    pub fn demand_node(&self, k: usize, tau: usize) -> usize {
        (self.cameras + self.groups + self.fixed) * self.horizon + k * self.layout.count() + (tau - 1)
    }

    pub fn sink(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn arc_between(&self, from: usize, to: usize) -> Option<usize> {
        self.arcs.iter().position(|a| a.from == from && a.to == to)
    }

    pub fn out_arcs(&self, node: usize) -> impl Iterator<Item = (usize, &FlowArc)> {
        self.arcs.iter().enumerate().filter(move |(_, a)| a.from == node)
    }

    pub fn total_supply(&self) -> i64 {
        self.nodes.iter().map(|n| n.balance.max(0)).sum()
    }

    /// `Σ balance`, zero for a well-posed network.
    pub fn net_balance(&self) -> i64 {
        self.nodes.iter().map(|n| n.balance).sum()
    }

    /// Per-node `balance + inflow − outflow`; all zero for a feasible flow.
    pub fn residuals(&self, flows: &[i64]) -> Vec<i64> {
        let mut r: Vec<i64> = self.nodes.iter().map(|n| n.balance).collect();
        for (a, &f) in self.arcs.iter().zip(flows) {
            r[a.from] -= f;
            r[a.to] += f;
        }
        r
    }

    /// Line-oriented dump: `N <id> <kind> <entity> <t> <balance>` then
    /// `A <from> <to> <cap> <value>`, with an extra flow column when `flows` is given.
    pub fn dump(&self, flows: Option<&[i64]>) -> String {
        let mut out = String::new();
        for (id, n) in self.nodes.iter().enumerate() {
            let entity = if n.kind == NodeKind::Sink { "-".to_string() } else { n.entity.to_string() };
            let t = n.t.map_or_else(|| "-".to_string(), |t| t.to_string());
            let _ = writeln!(out, "N {id} {} {entity} {t} {}", n.kind.as_str(), n.balance);
        }
        for (k, a) in self.arcs.iter().enumerate() {
            let _ = write!(out, "A {} {} {} {}", a.from, a.to, a.capacity, a.value);
            if let Some(f) = flows {
                let _ = write!(out, " {}", f[k]);
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the network for `inst`.
pub fn build_graph(inst: &PlanInstance) -> Result<FlowGraph, FlowError> {
    let (l, n, m, h, w) = (inst.cameras, inst.groups, inst.fixed, inst.horizon, inst.window);
    feasibility_check(h, w, l, m, n).map_err(FlowError::Infeasible)?;
    inst.check_shapes()?;
    let p = compute_p(h, w, l, m, inst.p_formula).map_err(FlowError::Infeasible)?;
    let layout = WindowLayout { horizon: h, window: w, offset: inst.window_offset };
    let windows = layout.count();

    let mut nodes = Vec::with_capacity((l + n + m) * h + m * windows + 1);
    for i in 0..l {
        for t in 1..=h {
            nodes.push(FlowNode { kind: NodeKind::Camera, entity: i, t: Some(t), balance: 1 });
        }
    }
    for j in 0..n {
        for t in 1..=h {
            let injected = i64::from(t == 1 && inst.group_done(j));
            nodes.push(FlowNode { kind: NodeKind::Group, entity: j, t: Some(t), balance: injected });
        }
    }
    for k in 0..m {
        for t in 1..=h {
            nodes.push(FlowNode { kind: NodeKind::Fixed, entity: k, t: Some(t), balance: 0 });
        }
    }
    let mut demand = vec![vec![0i64; windows]; m];
    for (k, row) in demand.iter_mut().enumerate() {
        for (idx, d) in row.iter_mut().enumerate() {
            let tau = idx + 1;
            let satisfied = tau == 1 && inst.fixed_done(k);
            *d = i64::from(layout.is_complete(tau) && !satisfied);
            nodes.push(FlowNode { kind: NodeKind::Demand, entity: k, t: Some(tau), balance: -*d });
        }
    }
    let injected_groups = (0..n).filter(|&j| inst.group_done(j)).count() as i64;
    // The closed form assumes every window is enforced; release the units of
    // windows that are already satisfied or extend past the horizon.
    let released = m as i64 * (h / w) as i64 - demand.iter().flatten().sum::<i64>();
    nodes.push(FlowNode { kind: NodeKind::Sink, entity: 0, t: None, balance: -(p + released + injected_groups) });

    let mut g = FlowGraph {
        nodes,
        arcs: Vec::new(),
        horizon: h,
        window: w,
        cameras: l,
        groups: n,
        fixed: m,
        layout,
        p,
    };
    let sink = g.sink();
    let idle = m < l;
    let mut arcs = Vec::new();
    for i in 0..l {
        for t in 1..=h {
            let from = g.camera_node(i, t);
            for j in 0..n {
                if let Some(v) = inst.group_values[i][j][t - 1] {
                    arcs.push(FlowArc { from, to: g.group_node(j, t), capacity: 1, value: v.max(0), kind: ArcKind::CameraGroup });
                }
            }
            for k in 0..m {
                let v = inst.fixed_values[i][k][t - 1].max(0);
                arcs.push(FlowArc { from, to: g.fixed_node(k, t), capacity: 1, value: v, kind: ArcKind::CameraFixed });
            }
            if idle {
                arcs.push(FlowArc { from, to: sink, capacity: 1, value: 0, kind: ArcKind::Idle });
            }
        }
    }
    for j in 0..n {
        for t in 1..h {
            arcs.push(FlowArc { from: g.group_node(j, t), to: g.group_node(j, t + 1), capacity: 1, value: 0, kind: ArcKind::Carry });
        }
        arcs.push(FlowArc { from: g.group_node(j, h), to: sink, capacity: 1, value: 0, kind: ArcKind::GroupSink });
    }
    for k in 0..m {
        for t in 1..=h {
            let tau = layout.window_of(t);
            arcs.push(FlowArc { from: g.fixed_node(k, t), to: g.demand_node(k, tau), capacity: 1, value: 0, kind: ArcKind::FixedDemand });
        }
        for tau in 1..=windows {
            let len = layout.periods(tau).count() as i64;
            arcs.push(FlowArc {
                from: g.demand_node(k, tau),
                to: sink,
                capacity: len - demand[k][tau - 1],
                value: 0,
                kind: ArcKind::DemandSink,
            });
        }
    }
    g.arcs = arcs;
    Ok(g)
}
