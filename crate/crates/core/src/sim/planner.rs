//! One receding-horizon planning step of the network-flow planner.

use thiserror::Error;

use crate::camera::{can_aim, sight_angle};
use crate::flow::{build_graph, FlowError, FlowGraph, PFormula, PlanInstance};
use crate::geometry::Point2;
use crate::grouping::form_groups;
use crate::solver::{extract_schedule, solve, FlowSolution, Schedule, SolveError};
use crate::tracking::{facing_direction, predict_exit_time, predict_positions};
use crate::valuation::{classify_and_rank, fixed_value, group_value, Value};
use crate::{CameraConfig, Field, GroupNode, Point, Track};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone)]
pub struct PlanRequest<'a> {
    pub cameras: &'a [CameraConfig],
    pub field: Field,
    pub regions: &'a [Field],
    /// Tracks still waiting for a capture.
    pub open_tracks: &'a [Track],
    /// Every live track, used to count pedestrians in a fixed region.
    pub all_tracks: &'a [Track],
    pub now: f64,
    pub horizon: usize,
    pub window: usize,
    pub period_len: f64,
    /// Seconds a group must stay in the field after a planned capture ends.
    pub exit_guard: f64,
    /// `None` plans one node per track.
    pub group_radius: Option<f64>,
    pub window_offset: usize,
    pub fixed_done: Vec<bool>,
    pub p_formula: PFormula,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub groups: Vec<GroupNode>,
    pub instance: PlanInstance,
    pub graph: FlowGraph,
    pub solution: FlowSolution,
    pub schedule: Schedule,
}

const NORTH: Point = Point2 { x: 0.0, y: 1.0 };

/// Arc values of one plan. Groups get no arc in periods after their
/// predicted exit, when the aim point leaves the field, or when a camera
/// cannot point at it.
pub fn plan_instance(req: &PlanRequest<'_>) -> (Vec<GroupNode>, PlanInstance) {
    let h = req.horizon;
    let mut open: Vec<Track> = req.open_tracks.to_vec();
    for t in &mut open {
        t.exit_time = predict_exit_time(t, &req.field, req.now);
    }
    let predicted: Vec<Vec<Point>> = open.iter().map(|t| predict_positions(t, h, req.period_len)).collect();
    let groups = form_groups(&open, &predicted, req.group_radius);
    let ctx = classify_and_rank(&groups, h, req.period_len, req.now);

    let all_predicted: Vec<Vec<Point>> =
        req.all_tracks.iter().map(|t| predict_positions(t, h, req.period_len)).collect();

    let group_values: Vec<Vec<Vec<Option<Value>>>> = req
        .cameras
        .iter()
        .map(|cam| {
            groups
                .iter()
                .map(|g| {
                    let reference = facing_direction(&g.heading).unwrap_or(NORTH);
                    (1..=h)
                        .map(|t| {
                            let end = req.now + t as f64 * req.period_len;
                            let focus = g.predicted_focus_per_period[t - 1];
                            if end + req.exit_guard >= g.exit_time || !req.field.contains(&focus) || !can_aim(cam, &focus) {
                                return None;
                            }
                            group_value(&ctx, g, t, sight_angle(cam, &focus, &reference))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let fixed_values: Vec<Vec<Vec<Value>>> = req
        .cameras
        .iter()
        .map(|cam| {
            req.regions
                .iter()
                .map(|region| {
                    let e = sight_angle(cam, &region.center(), &NORTH);
                    (1..=h)
                        .map(|t| {
                            let n = all_predicted.iter().filter(|p| region.contains(&p[t - 1])).count();
                            fixed_value(n, e)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let instance = PlanInstance {
        cameras: req.cameras.len(),
        groups: groups.len(),
        fixed: req.regions.len(),
        horizon: h,
        window: req.window,
        window_offset: req.window_offset,
        group_values,
        fixed_values,
        group_done: vec![false; groups.len()],
        fixed_done: req.fixed_done.clone(),
        p_formula: req.p_formula,
    };
    (groups, instance)
}

pub fn plan_period(req: &PlanRequest<'_>) -> Result<PlanOutcome, PlanError> {
    let (groups, instance) = plan_instance(req);
    let graph = build_graph(&instance)?;
    let solution = solve(&graph)?;
    let schedule = extract_schedule(&graph, &solution)?;
    Ok(PlanOutcome { groups, instance, graph, solution, schedule })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Action;
    use crate::TrackState;

    fn cams() -> Vec<CameraConfig> {
        (0..3).map(|i| CameraConfig::standard(i, Point::new(50.0 + 100.0 * i as f64, 0.0))).collect()
    }

    fn regions() -> Vec<Field> {
        (0..3).map(|k| Field::new(100.0 * k as f64, 0.0, 100.0 * (k + 1) as f64, 160.0)).collect()
    }

    fn request<'a>(cams: &'a [CameraConfig], regions: &'a [Field], tracks: &'a [Track]) -> PlanRequest<'a> {
        PlanRequest {
            cameras: cams,
            field: Field::field(300.0, 160.0),
            regions,
            open_tracks: tracks,
            all_tracks: tracks,
            now: 0.0,
            horizon: 10,
            window: 5,
            period_len: 3.0,
            exit_guard: 0.0,
            group_radius: Some(6.0),
            window_offset: 0,
            fixed_done: vec![false; regions.len()],
            p_formula: PFormula::Conserved,
        }
    }

    #[test]
    fn no_tracks_means_only_fixed_looks() {
        let (c, r) = (cams(), regions());
        let out = plan_period(&request(&c, &r, &[])).unwrap();
        assert!(out.groups.is_empty());
        for row in &out.schedule.actions {
            assert!(row.iter().all(|a| matches!(a, Action::ObserveFixed(_))));
        }
    }

    #[test]
    fn departing_pedestrian_is_watched_first() {
        let (c, r) = (cams(), regions());
        let tracks: Vec<Track> = (0..4)
            .map(|i| {
                let y = if i == 0 { 10.0 } else { 150.0 };
                Track::with_state(i, TrackState::new(30.0 + 70.0 * i as f64, y, 0.0, -3.0), 0.5, 0.0)
            })
            .collect();
        let out = plan_period(&request(&c, &r, &tracks)).unwrap();
        let first = out.schedule.first_period();
        let j0 = out.groups.iter().position(|g| g.id == 0).unwrap();
        assert!(first.contains(&Action::ObserveGroup(j0)), "{first:?}");
    }

    #[test]
    fn gone_groups_get_no_arcs() {
        let (c, r) = (cams(), regions());
        let tracks = vec![Track::with_state(0, TrackState::new(150.0, 5.0, 0.0, -1.0), 0.5, 0.0)];
        let (_, inst) = plan_instance(&request(&c, &r, &tracks));
        assert!(inst.group_values[0][0][0].is_some());
        assert!(inst.group_values[0][0][1].is_none());
    }
}
