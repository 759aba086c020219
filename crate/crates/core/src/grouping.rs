//! Group-tracking nodes: clusters of tracks that fit in one zoomed view,
//! selected with a greedy set cover over per-track coverage discs.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::scalar::Scalar;
use crate::tracking::Track;

/// Tracks visible when a camera is centered on one track's predicted position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCandidate<S> {
    pub center_id: u64,
    pub center: Point2<S>,
    pub covered_ids: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupNode<S> {
    /// Id of the track whose predicted path the group is centered on.
    pub id: u64,
    pub member_ids: BTreeSet<u64>,
    pub focus: Point2<S>,
    pub exit_time: S,
    /// Aim point for each planning period `1..=H`.
    pub predicted_focus_per_period: Vec<Point2<S>>,
    /// Mean member velocity, used as the heading of the group.
    pub heading: Point2<S>,
}

impl<S: Scalar> GroupNode<S> {
    pub fn size(&self) -> usize {
        self.member_ids.len()
    }
}

/// One candidate per track, centered on its first predicted position.
///
/// `predicted[i]` holds the per-period predictions of `tracks[i]`.
pub fn candidate_coverages<S: Scalar>(
    tracks: &[Track<S>],
    predicted: &[Vec<Point2<S>>],
    group_radius: S,
) -> Vec<CoverageCandidate<S>> {
    assert_eq!(tracks.len(), predicted.len(), "one prediction list per track");
    let firsts: Vec<(u64, Point2<S>)> = tracks
        .iter()
        .zip(predicted)
        .map(|(t, p)| (t.id, p.first().copied().unwrap_or_else(|| t.state.position())))
        .collect();
    let mut out: Vec<CoverageCandidate<S>> = firsts
        .iter()
        .map(|&(center_id, center)| CoverageCandidate {
            center_id,
            center,
            covered_ids: firsts
                .iter()
                .filter(|(_, p)| p.dist(&center) <= group_radius)
                .map(|&(id, _)| id)
                .collect(),
        })
        .collect();
    out.sort_by_key(|c| c.center_id);
    out
}

/// Greedy cover: repeatedly take the candidate with the most uncovered ids
/// (ties to the lowest center id). Each id joins the first group covering it.
///
/// The returned groups carry only their first-period focus; [`form_groups`]
/// fills in exit times and per-period aim points.
pub fn greedy_set_cover<S: Scalar>(
    candidates: &[CoverageCandidate<S>],
    universe: &BTreeSet<u64>,
) -> Vec<GroupNode<S>> {
    let mut uncovered = universe.clone();
    let mut used = vec![false; candidates.len()];
    let mut groups = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (i, c) in candidates.iter().enumerate() {
            if used[i] {
                continue;
            }
            let gain = c.covered_ids.intersection(&uncovered).count();
            let better = match best {
                None => gain > 0,
                Some((bi, bg)) => {
                    gain > bg || (gain == bg && c.center_id < candidates[bi].center_id)
                }
            };
            if better {
                best = Some((i, gain));
            }
        }
        let Some((i, _)) = best else {
            // Remaining ids are not coverable by any candidate.
            break;
        };
        used[i] = true;
        let c = &candidates[i];
        let members: BTreeSet<u64> = c.covered_ids.intersection(&uncovered).copied().collect();
        for id in &members {
            uncovered.remove(id);
        }
        groups.push(GroupNode {
            id: c.center_id,
            member_ids: members,
            focus: c.center,
            exit_time: S::infinity(),
            predicted_focus_per_period: vec![c.center],
            heading: Point2::new(S::zero(), S::zero()),
        });
    }
    groups
}

/// Earliest predicted exit among the group's members.
pub fn group_exit_time<S: Scalar>(group: &GroupNode<S>, tracks: &[Track<S>]) -> S {
    tracks
        .iter()
        .filter(|t| group.member_ids.contains(&t.id))
        .map(|t| t.exit_time)
        .fold(S::infinity(), S::min)
}

fn finish_group<S: Scalar>(
    mut group: GroupNode<S>,
    tracks: &[Track<S>],
    index: &HashMap<u64, usize>,
    predicted: &[Vec<Point2<S>>],
) -> GroupNode<S> {
    group.exit_time = group_exit_time(&group, tracks);
    if let Some(&ci) = index.get(&group.id) {
        group.predicted_focus_per_period = predicted[ci].clone();
    }
    let n = S::from_usize(group.member_ids.len().max(1)).unwrap();
    let (sx, sy) = group
        .member_ids
        .iter()
        .filter_map(|id| index.get(id))
        .map(|&i| tracks[i].state.velocity())
        .fold((S::zero(), S::zero()), |(sx, sy), v| (sx + v.x, sy + v.y));
    group.heading = Point2::new(sx / n, sy / n);
    group
}

/// Builds group nodes for `tracks` (assumed active and not yet interrogated).
///
/// With `group_radius = None` every track becomes its own group.
pub fn form_groups<S: Scalar>(
    tracks: &[Track<S>],
    predicted: &[Vec<Point2<S>>],
    group_radius: Option<S>,
) -> Vec<GroupNode<S>> {
    let index: HashMap<u64, usize> = tracks.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
    let raw = match group_radius {
        Some(r) => {
            let candidates = candidate_coverages(tracks, predicted, r);
            let universe = tracks.iter().map(|t| t.id).collect();
            greedy_set_cover(&candidates, &universe)
        }
        None => {
            let mut singles: Vec<GroupNode<S>> = tracks
                .iter()
                .zip(predicted)
                .map(|(t, p)| {
                    let focus = p.first().copied().unwrap_or_else(|| t.state.position());
                    GroupNode {
                        id: t.id,
                        member_ids: BTreeSet::from([t.id]),
                        focus,
                        exit_time: S::infinity(),
                        predicted_focus_per_period: vec![focus],
                        heading: Point2::new(S::zero(), S::zero()),
                    }
                })
                .collect();
            singles.sort_by_key(|g| g.id);
            singles
        }
    };
    raw.into_iter()
        .map(|g| finish_group(g, tracks, &index, predicted))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::TrackState;

    fn line_tracks(xs: &[f64]) -> (Vec<Track<f64>>, Vec<Vec<Point2<f64>>>) {
        let tracks: Vec<_> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| Track::with_state(i as u64, TrackState::new(x, 50.0, 0.0, 0.0), 1.0, 0.0))
            .collect();
        let predicted = xs.iter().map(|&x| vec![Point2::new(x, 50.0)]).collect();
        (tracks, predicted)
    }

    fn ids(v: &[u64]) -> BTreeSet<u64> {
        v.iter().copied().collect()
    }

    #[test]
    fn candidates_mutual_and_disjoint() {
        let (t, p) = line_tracks(&[0.0, 2.0]);
        let c = candidate_coverages(&t, &p, 6.0);
        assert!(c.iter().all(|c| c.covered_ids == ids(&[0, 1])));
        let (t, p) = line_tracks(&[0.0, 100.0]);
        let c = candidate_coverages(&t, &p, 6.0);
        assert_eq!(c[0].covered_ids, ids(&[0]));
        assert_eq!(c[1].covered_ids, ids(&[1]));
    }

    #[test]
    fn five_on_a_line() {
        let (t, p) = line_tracks(&[0.0, 4.0, 8.0, 40.0, 44.0]);
        let c = candidate_coverages(&t, &p, 6.0);
        assert_eq!(c[1].covered_ids, ids(&[0, 1, 2]));
        let universe = ids(&[0, 1, 2, 3, 4]);
        let g = greedy_set_cover(&c, &universe);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].member_ids, ids(&[0, 1, 2]));
        assert_eq!(g[0].id, 1);
        assert_eq!(g[1].member_ids, ids(&[3, 4]));
        assert_eq!(g[1].id, 3);
    }

    #[test]
    fn one_cluster_and_all_distant() {
        let (t, p) = line_tracks(&[0.0, 1.0, 2.0, 3.0]);
        let g = form_groups(&t, &p, Some(6.0));
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].size(), 4);
        let (t, p) = line_tracks(&[0.0, 50.0, 100.0]);
        assert_eq!(form_groups(&t, &p, Some(6.0)).len(), 3);
        let (t, p) = line_tracks(&[0.0, 1.0, 2.0]);
        assert_eq!(form_groups(&t, &p, None).len(), 3);
    }

    #[test]
    fn exit_time_is_member_minimum() {
        let (mut t, p) = line_tracks(&[0.0, 1.0, 80.0]);
        t[0].exit_time = 30.0;
        t[1].exit_time = 12.0;
        let g = form_groups(&t, &p, Some(6.0));
        assert_eq!(g[0].exit_time, 12.0);
        assert!(g[1].exit_time.is_infinite());
        assert_eq!(group_exit_time(&g[0], &t), 12.0);
    }
}
