//! `ptzflow` command line: run, compare, validate, plan.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, PlannerKind, ScenarioConfig};
use crate::flow::build_graph;
use crate::metrics::{aggregate, compute_run_metrics, emit, OutputFormat};
use crate::sim::{self, plan_instance, PlanRequest, SimError};
use crate::solver::{extract_schedule, solve, Action};
use crate::tracking::Track;
use crate::validate::{validate_solver, InstanceLimits};
use crate::TrackState;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ptzflow", version, about = "Multi-PTZ-camera scheduling simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario with one planner.
    Run(RunArgs),
    /// Simulate all planners on the same arrivals for several seeds.
    Compare(CompareArgs),
    /// Check the flow solver against the brute-force oracle on random instances.
    Validate(ValidateArgs),
    /// Solve a single plan from a snapshot and print the schedule.
    Plan(PlanArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the planner in the config file.
    #[arg(long, value_enum)]
    pub planner: Option<PlannerKind>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// First seed; runs use `seed .. seed + seeds`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub max_cameras: usize,
    #[arg(long, default_value_t = 3)]
    pub max_groups: usize,
    #[arg(long, default_value_t = 2)]
    pub max_fixed: usize,
    #[arg(long, default_value_t = 4)]
    pub max_horizon: usize,
    /// Perturbs every solver objective (exercises the failure path).
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Snapshot file: scenario settings plus the current tracks.
    #[arg(long)]
    pub config: PathBuf,
    /// Also print the graph with its solution flows.
    #[arg(long)]
    pub dump: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0} mismatching trial(s)")]
    Validation(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            _ => EXIT_USAGE,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Validate(a) => cmd_validate(&a),
        Command::Plan(a) => cmd_plan(&a).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("partial");
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run_stem(kind: PlannerKind, seed: u64) -> String {
    format!("{kind}_seed{seed}")
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = load(&args.config, args.seed)?;
    if let Some(p) = args.planner {
        cfg.planner.kind = p;
    }
    cfg.validate()?;
    let started = Instant::now();
    let out = sim::run(&cfg)?;
    let stem = run_stem(cfg.planner.kind, cfg.seed);
    write_atomic(&args.out.join(format!("{stem}.trace")), out.trace.to_text().as_bytes())?;
    let path = args.out.join(format!("{stem}.{}", args.format.extension()));
    write_atomic(&path, &emit(std::slice::from_ref(&out.metrics), args.format))?;
    let r = &out.metrics;
    println!(
        "{} seed={} watched={:.4} avg_wait={:.2}s missed={:.4} -> {}",
        r.method,
        cfg.seed,
        r.watched_ratio,
        r.avg_wait_s,
        r.missed_ratio,
        path.display()
    );
    eprintln!("runtime {:.2}s", started.elapsed().as_secs_f64());
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let base = load(&args.config, args.seed)?;
    let jobs: Vec<(PlannerKind, u64)> = PlannerKind::ALL
        .iter()
        .flat_map(|&k| (0..args.seeds).map(move |s| (k, base.seed + s)))
        .collect();
    for kind in PlannerKind::ALL {
        let mut c = base.clone();
        c.planner.kind = kind;
        c.validate()?;
    }
    let started = Instant::now();
    let outputs: Vec<_> = jobs
        .par_iter()
        .map(|&(kind, seed)| {
            let mut c = base.clone();
            c.planner.kind = kind;
            c.seed = seed;
            sim::run(&c).map(|o| (kind, seed, o))
        })
        .collect::<Result<_, _>>()?;
    for (kind, seed, o) in &outputs {
        write_atomic(&args.out.join(format!("{}.trace", run_stem(*kind, *seed))), o.trace.to_text().as_bytes())?;
    }
    let reports: Vec<_> = PlannerKind::ALL
        .iter()
        .map(|&kind| {
            let runs = outputs
                .iter()
                .filter(|(k, _, _)| *k == kind)
                .map(|(_, _, o)| compute_run_metrics(&o.trace))
                .collect();
            aggregate(kind.as_str(), &base.hash(), runs)
        })
        .collect();
    let path = args.out.join(format!("compare.{}", args.format.extension()));
    write_atomic(&path, &emit(&reports, args.format))?;
    println!("{:<18} {:>8} {:>10} {:>8}", "method", "watched", "avg_wait", "missed");
    for r in &reports {
        println!("{:<18} {:>8.4} {:>9.2}s {:>8.4}", r.method, r.watched_ratio, r.avg_wait_s, r.missed_ratio);
    }
    println!("-> {}", path.display());
    eprintln!("runtime {:.2}s", started.elapsed().as_secs_f64());
    Ok(())
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let limits = InstanceLimits {
        max_cameras: args.max_cameras,
        max_groups: args.max_groups,
        max_fixed: args.max_fixed,
        max_horizon: args.max_horizon,
    };
    if !limits.within_oracle_limit() {
        return Err(CliError::Usage("max_cameras × max_horizon exceeds the oracle limit".into()));
    }
    let report = validate_solver(args.trials, args.seed, &limits, args.corrupt);
    for m in &report.mismatches {
        eprintln!("trial {}: solver {:?} oracle {:?}\n{}", m.trial, m.solver, m.oracle, m.dump);
    }
    println!(
        "{} trials, {} feasible, {} mismatches",
        report.trials,
        report.feasible,
        report.mismatches.len()
    );
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation(report.mismatches.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotTrack {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub interrogated: bool,
}

/// A group with a fixed value for every camera and period.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualGroup {
    pub id: u64,
    pub value: i64,
}

/// Input of `ptzflow plan`. When `groups` is non-empty the tracks are
/// ignored and the listed groups are planned with their given values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSnapshot {
    pub scenario: ScenarioConfig,
    pub now: f64,
    pub window_offset: usize,
    pub fixed_done: Vec<bool>,
    pub tracks: Vec<SnapshotTrack>,
    pub groups: Vec<ManualGroup>,
}

pub fn cmd_plan(args: &PlanArgs) -> Result<String, CliError> {
    let path = args.config.display().to_string();
    let text = std::fs::read_to_string(&args.config).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
    let snap: PlanSnapshot = toml::from_str(&text).map_err(|source| ConfigError::Parse { path, source })?;
    plan_snapshot(&snap, args.dump)
}

pub fn plan_snapshot(snap: &PlanSnapshot, dump: bool) -> Result<String, CliError> {
    let cfg = &snap.scenario;
    cfg.validate()?;
    let cameras = cfg.camera_configs();
    let regions = cfg.fixed_regions();
    let tracks: Vec<Track<f64>> = snap
        .tracks
        .iter()
        .map(|t| {
            let mut tr = Track::with_state(t.id, TrackState::new(t.x, t.y, t.vx, t.vy), cfg.noise.initial_variance, snap.now);
            tr.interrogated = t.interrogated;
            tr
        })
        .collect();
    let open: Vec<_> = tracks.iter().filter(|t| !t.interrogated).cloned().collect();
    let fixed_done = if snap.fixed_done.is_empty() { vec![false; regions.len()] } else { snap.fixed_done.clone() };
    let req = PlanRequest {
        cameras: &cameras,
        field: cfg.field_rect(),
        regions: &regions,
        open_tracks: &open,
        all_tracks: &tracks,
        now: snap.now,
        horizon: cfg.planner.horizon,
        window: cfg.planner.window,
        period_len: cfg.planner.period_len,
        exit_guard: cfg.planner.exit_guard,
        group_radius: (cfg.planner.kind != PlannerKind::Flexible).then_some(cfg.planner.group_radius),
        window_offset: snap.window_offset,
        fixed_done,
        p_formula: cfg.planner.p_formula,
    };
    let (groups, mut inst) = plan_instance(&req);
    let group_ids: Vec<u64> = if snap.groups.is_empty() {
        groups.iter().map(|g| g.id).collect()
    } else {
        let h = inst.horizon;
        inst.groups = snap.groups.len();
        inst.group_values = vec![snap.groups.iter().map(|g| vec![Some(g.value); h]).collect(); cameras.len()];
        inst.group_done = vec![false; snap.groups.len()];
        snap.groups.iter().map(|g| g.id).collect()
    };
    let graph = build_graph(&inst).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let solution = solve(&graph).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let schedule = extract_schedule(&graph, &solution).map_err(|e| CliError::Infeasible(e.to_string()))?;

    let mut out = String::new();
    writeln!(out, "groups {}  nodes {}  arcs {}  P {}", group_ids.len(), graph.nodes.len(), graph.arcs.len(), graph.p).unwrap();
    writeln!(out, "objective {}", solution.objective).unwrap();
    for (i, row) in schedule.actions.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .map(|a| match *a {
                Action::ObserveGroup(j) => format!("group {}", group_ids[j]),
                Action::ObserveFixed(k) => format!("fixed {k}"),
                Action::Idle => "idle".into(),
            })
            .collect();
        writeln!(out, "camera {i}: {}", cells.join(" | ")).unwrap();
    }
    if dump {
        out.push_str(&graph.dump(Some(&solution.flows)));
    }
    Ok(out)
}
