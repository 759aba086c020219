//! Arc values for camera→group and camera→fixed-region assignments.
//!
//! Groups leaving the field before the end of the planning horizon are
//! "departing" and receive exponentially larger values, ordered by how soon
//! they leave. The remaining "staying" groups get values that decay linearly
//! over the horizon. All values are exact integers.

use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::camera::quality_value;
use crate::grouping::GroupNode;
use crate::scalar::Scalar;

/// Objective coefficient of an arc.
pub type Value = i64;

/// Largest power-of-two exponent used for departing values.
pub const MAX_DEPARTING_EXPONENT: u32 = 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Urgency {
    Departing { rank: usize },
    Staying { rank: usize },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValueContext {
    /// Periods in the planning horizon.
    pub horizon: usize,
    pub n_departing: usize,
    pub n_staying: usize,
    pub urgency: HashMap<u64, Urgency>,
}

impl ValueContext {
    /// `V¹ = (N^s + 1)·H`, the base of the departing values.
    pub fn departing_base(&self) -> Value {
        ((self.n_staying as Value) + 1).saturating_mul(self.horizon as Value)
    }

    pub fn urgency_of(&self, group_id: u64) -> Option<Urgency> {
        self.urgency.get(&group_id).copied()
    }
}

/// Splits groups into departing (`exit < now + H·period_len`) and staying,
/// ranking each class by increasing exit time, ties by group id.
pub fn classify_and_rank<S: Scalar>(
    groups: &[GroupNode<S>],
    horizon: usize,
    period_len: S,
    now: S,
) -> ValueContext {
    let horizon_end = now + period_len * S::from_usize(horizon).unwrap();
    let by_exit = |a: &&GroupNode<S>, b: &&GroupNode<S>| {
        a.exit_time
            .partial_cmp(&b.exit_time)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.id.cmp(&b.id))
    };
    let (mut departing, mut staying): (Vec<&GroupNode<S>>, Vec<&GroupNode<S>>) =
        groups.iter().partition(|g| g.exit_time < horizon_end);
    departing.sort_by(by_exit);
    staying.sort_by(by_exit);

    let mut urgency = HashMap::with_capacity(groups.len());
    for (i, g) in departing.iter().enumerate() {
        urgency.insert(g.id, Urgency::Departing { rank: i + 1 });
    }
    for (i, g) in staying.iter().enumerate() {
        urgency.insert(g.id, Urgency::Staying { rank: i + 1 });
    }
    ValueContext {
        horizon,
        n_departing: departing.len(),
        n_staying: staying.len(),
        urgency,
    }
}

/// Wide-area look value: tracks in view plus the angle quality score.
pub fn fixed_value<S: Scalar>(tracks_in_view: usize, e: S) -> Value {
    tracks_in_view as Value + Value::from(quality_value(e))
}

/// `[(N^s+1)(H-(t-1)) + N^s - rank + V(e)] · N_K` for period `t` in `1..=H`.
pub fn staying_value<S: Scalar>(ctx: &ValueContext, t: usize, rank: usize, e: S, group_size: usize) -> Value {
    debug_assert!((1..=ctx.horizon).contains(&t), "period {t} outside 1..={}", ctx.horizon);
    debug_assert!((1..=ctx.n_staying).contains(&rank), "staying rank {rank} out of range");
    let ns = ctx.n_staying as Value;
    let remaining = (ctx.horizon as Value) - (t as Value - 1);
    let bracket = (ns + 1)
        .saturating_mul(remaining)
        .saturating_add(ns - rank as Value)
        .saturating_add(Value::from(quality_value(e)));
    bracket.saturating_mul(group_size as Value)
}

/// `[V¹·2^(N^e+1-rank) + V(e)] · N_K`, with the exponent saturated at
/// [`MAX_DEPARTING_EXPONENT`].
pub fn departing_value<S: Scalar>(ctx: &ValueContext, rank: usize, e: S, group_size: usize) -> Value {
    debug_assert!((1..=ctx.n_departing).contains(&rank), "departing rank {rank} out of range");
    let raw = (ctx.n_departing + 1).saturating_sub(rank);
    let exponent = if raw > MAX_DEPARTING_EXPONENT as usize {
        warn!("departing value exponent {raw} saturated at {MAX_DEPARTING_EXPONENT}");
        MAX_DEPARTING_EXPONENT
    } else {
        raw as u32
    };
    let scaled = ctx.departing_base().saturating_mul(1i64 << exponent);
    scaled
        .saturating_add(Value::from(quality_value(e)))
        .saturating_mul(group_size as Value)
}

/// Value of assigning a camera to `group` in period `t` at viewing angle `e`.
pub fn group_value<S: Scalar>(ctx: &ValueContext, group: &GroupNode<S>, t: usize, e: S) -> Option<Value> {
    match ctx.urgency_of(group.id)? {
        Urgency::Departing { rank } => Some(departing_value(ctx, rank, e, group.size())),
        Urgency::Staying { rank } => Some(staying_value(ctx, t, rank, e, group.size())),
    }
}
