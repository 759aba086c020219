//! Randomized cross-check of the flow solver against the exhaustive oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::flow::{build_graph, PFormula, PlanInstance};
use crate::solver::{brute_force_oracle, objective_of, solve, ORACLE_SLOT_LIMIT};
use crate::valuation::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceLimits {
    pub max_cameras: usize,
    pub max_groups: usize,
    pub max_fixed: usize,
    pub max_horizon: usize,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        Self { max_cameras: 2, max_groups: 3, max_fixed: 2, max_horizon: 4 }
    }
}

impl InstanceLimits {
    pub fn within_oracle_limit(&self) -> bool {
        self.max_cameras * self.max_horizon <= ORACLE_SLOT_LIMIT
    }
}

/// A random instance with `l·T ≥ m`; window offsets, done flags and missing
/// arcs are mixed in, so some instances are infeasible.
pub fn random_instance(rng: &mut impl Rng, limits: &InstanceLimits) -> PlanInstance {
    let l = rng.random_range(1..=limits.max_cameras.max(1));
    let h = rng.random_range(1..=limits.max_horizon.max(1));
    let divisors: Vec<usize> = (1..=h).filter(|t| h % t == 0).collect();
    let t = divisors[rng.random_range(0..divisors.len())];
    let n = rng.random_range(0..=limits.max_groups);
    let m = rng.random_range(0..=limits.max_fixed.min(l * t));
    let group_values = (0..l)
        .map(|_| {
            (0..n)
                .map(|_| {
                    (0..h)
                        .map(|_| rng.random_bool(0.8).then(|| rng.random_range(0..=40) as Value))
                        .collect()
                })
                .collect()
        })
        .collect();
    let fixed_values = (0..l)
        .map(|_| (0..m).map(|_| (0..h).map(|_| rng.random_range(0..=10) as Value).collect()).collect())
        .collect();
    PlanInstance {
        cameras: l,
        groups: n,
        fixed: m,
        horizon: h,
        window: t,
        window_offset: rng.random_range(0..t),
        group_values,
        fixed_values,
        group_done: (0..n).map(|_| rng.random_bool(0.1)).collect(),
        fixed_done: (0..m).map(|_| rng.random_bool(0.2)).collect(),
        p_formula: PFormula::Conserved,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub trial: usize,
    pub solver: Option<i64>,
    pub oracle: Option<i64>,
    pub dump: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub trials: usize,
    /// Trials where both sides found an optimum.
    pub feasible: usize,
    pub mismatches: Vec<Mismatch>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Runs `trials` random instances. With `corrupt` the solver objective of
/// every trial is perturbed, which must be reported as a mismatch.
pub fn validate_solver(trials: usize, seed: u64, limits: &InstanceLimits, corrupt: bool) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ValidationReport { trials, ..Default::default() };
    for trial in 0..trials {
        let inst = random_instance(&mut rng, limits);
        let graph = build_graph(&inst).expect("generated instances are well formed");
        let solved = solve(&graph).ok();
        let oracle = brute_force_oracle(&graph).ok();
        let solver_obj = solved.as_ref().map(|s| objective_of(&graph, &s.flows) + i64::from(corrupt));
        let oracle_obj = oracle.as_ref().map(|s| s.objective);
        if solver_obj.is_some() && oracle_obj.is_some() {
            report.feasible += 1;
        }
        if solver_obj != oracle_obj {
            let mut dump = graph.dump(solved.as_ref().map(|s| &s.flows[..]));
            if let Some(o) = &oracle {
                dump.push_str("# oracle flows\n");
                dump.push_str(&graph.dump(Some(&o.flows)));
            }
            report.mismatches.push(Mismatch { trial, solver: solver_obj, oracle: oracle_obj, dump });
        }
    }
    report
}
