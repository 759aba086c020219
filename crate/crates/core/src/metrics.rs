//! Coverage and waiting-time metrics computed from event traces.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::trace::{Trace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

/// Metrics of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub total: u64,
    pub captured: u64,
    pub watched_exact: Ratio<u64>,
    pub missed_exact: Ratio<u64>,
    pub watched_ratio: f64,
    pub missed_ratio: f64,
    /// Mean of capture time minus first detection, over captured pedestrians.
    pub avg_wait_s: f64,
    pub sim_duration_s: f64,
}

impl RunMetrics {
    /// A run without pedestrians: nobody was missed.
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub watched_ratio: f64,
    pub watched_std: f64,
    pub avg_wait_s: f64,
    pub avg_wait_std: f64,
    pub missed_ratio: f64,
    pub missed_std: f64,
    pub runs: Vec<RunMetrics>,
}

pub fn compute_run_metrics(trace: &Trace) -> RunMetrics {
    let mut total = 0u64;
    let mut waits: BTreeMap<u64, i64> = BTreeMap::new();
    let mut last_ms = 0i64;
    for ev in &trace.events {
        last_ms = last_ms.max(ev.t_ms());
        match ev {
            TraceEvent::Spawn { .. } => total += 1,
            TraceEvent::Capture { t_ms, ids, first_seen_ms, .. } => {
                for (id, seen) in ids.iter().zip(first_seen_ms) {
                    waits.entry(*id).or_insert(t_ms - seen);
                }
            }
            _ => {}
        }
    }
    let captured = waits.len() as u64;
    let (watched_exact, missed_exact) = if total == 0 {
        (Ratio::from_integer(1), Ratio::from_integer(0))
    } else {
        (Ratio::new(captured, total), Ratio::new(total - captured, total))
    };
    let avg_wait_s = if captured == 0 {
        0.0
    } else {
        let sum: i64 = waits.values().sum();
        sum as f64 / (1000.0 * captured as f64)
    };
    let as_f64 = |r: Ratio<u64>| *r.numer() as f64 / *r.denom() as f64;
    RunMetrics {
        seed: trace.seed,
        total,
        captured,
        watched_exact,
        missed_exact,
        watched_ratio: as_f64(watched_exact),
        missed_ratio: as_f64(missed_exact),
        avg_wait_s,
        sim_duration_s: last_ms as f64 / 1000.0,
    }
}

/// Single-run report for `trace`.
pub fn compute_metrics(trace: &Trace) -> MetricsReport {
    aggregate(&trace.method, &trace.config_hash, vec![compute_run_metrics(trace)])
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Averages runs of one method; spreads are sample standard deviations.
pub fn aggregate(method: &str, config_hash: &str, runs: Vec<RunMetrics>) -> MetricsReport {
    let (watched_ratio, watched_std) = mean_std(runs.iter().map(|r| r.watched_ratio));
    let (avg_wait_s, avg_wait_std) = mean_std(runs.iter().map(|r| r.avg_wait_s));
    let (missed_ratio, missed_std) = mean_std(runs.iter().map(|r| r.missed_ratio));
    MetricsReport {
        method: method.into(),
        config_hash: config_hash.into(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        watched_ratio,
        watched_std,
        avg_wait_s,
        avg_wait_std,
        missed_ratio,
        missed_std,
        runs,
    }
}

pub const CSV_HEADER: [&str; 5] = ["method", "watched_ratio", "avg_wait_s", "missed_ratio", "seed"];

/// Serializes reports. CSV has one row per run, plus `mean` and `std` rows
/// when a report aggregates several runs.
pub fn emit(reports: &[MetricsReport], format: OutputFormat) -> Vec<u8> {
    match format {
        OutputFormat::Json => {
            let mut out = if reports.len() == 1 {
                serde_json::to_vec_pretty(&reports[0])
            } else {
                serde_json::to_vec_pretty(reports)
            }
            .expect("reports serialize");
            out.push(b'\n');
            out
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER).expect("in-memory write");
            for rep in reports {
                for r in &rep.runs {
                    w.write_record([
                        rep.method.clone(),
                        r.watched_ratio.to_string(),
                        r.avg_wait_s.to_string(),
                        r.missed_ratio.to_string(),
                        r.seed.to_string(),
                    ])
                    .expect("in-memory write");
                }
                if rep.runs.len() > 1 {
                    for (label, a, b, c) in [
                        ("mean", rep.watched_ratio, rep.avg_wait_s, rep.missed_ratio),
                        ("std", rep.watched_std, rep.avg_wait_std, rep.missed_std),
                    ] {
                        w.write_record([rep.method.clone(), a.to_string(), b.to_string(), c.to_string(), label.into()])
                            .expect("in-memory write");
                    }
                }
            }
            w.into_inner().expect("in-memory flush")
        }
    }
}
