//! Line-oriented event trace of a simulation run.
//!
//! Each line is `t=<seconds> event=<name> key=value ...`; times carry
//! millisecond resolution and are stored as integer milliseconds so a trace
//! read back from disk yields exactly the same metrics.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub fn to_ms(seconds: f64) -> i64 {
    (seconds * 1000.0).round() as i64
}

pub fn fmt_ms(ms: i64) -> String {
    let sign = if ms < 0 { "-" } else { "" };
    let a = ms.unsigned_abs();
    format!("{sign}{}.{:03}", a / 1000, a % 1000)
}

fn parse_ms(s: &str) -> Option<i64> {
    let (neg, s) = s.strip_prefix('-').map_or((false, s), |r| (true, r));
    let (whole, frac) = s.split_once('.').unwrap_or((s, "0"));
    if frac.is_empty() || frac.len() > 3 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let w: i64 = whole.parse().ok()?;
    let f: i64 = format!("{frac:0<3}").parse().ok()?;
    let v = w * 1000 + f;
    Some(if neg { -v } else { v })
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    if v.is_empty() {
        "-".into()
    } else {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Spawn { t_ms: i64, id: u64 },
    Exit { t_ms: i64, id: u64 },
    /// A finished zoomed capture. `ids` lists the pedestrians interrogated by
    /// it, `first_seen_ms` their first detection times.
    Capture { t_ms: i64, camera: usize, group: u64, ids: Vec<u64>, first_seen_ms: Vec<i64> },
    FixedLook { t_ms: i64, camera: usize, region: usize },
    /// A network-flow plan.
    Plan { t_ms: i64, groups: usize, nodes: usize, arcs: usize, objective: i64 },
    /// A master-slave camera assignment.
    Assign { t_ms: i64, camera: usize, target: u64 },
}

impl TraceEvent {
    pub fn t_ms(&self) -> i64 {
        match *self {
            TraceEvent::Spawn { t_ms, .. }
            | TraceEvent::Exit { t_ms, .. }
            | TraceEvent::Capture { t_ms, .. }
            | TraceEvent::FixedLook { t_ms, .. }
            | TraceEvent::Plan { t_ms, .. }
            | TraceEvent::Assign { t_ms, .. } => t_ms,
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} ", fmt_ms(self.t_ms()))?;
        match self {
            TraceEvent::Spawn { id, .. } => write!(f, "event=spawn id={id}"),
            TraceEvent::Exit { id, .. } => write!(f, "event=exit id={id}"),
            TraceEvent::Capture { camera, group, ids, first_seen_ms, .. } => {
                let seen: Vec<String> = first_seen_ms.iter().map(|&m| fmt_ms(m)).collect();
                write!(f, "event=capture camera={camera} group={group} ids={} first_seen={}", join(ids), join(&seen))
            }
            TraceEvent::FixedLook { camera, region, .. } => {
                write!(f, "event=fixed_look camera={camera} region={region}")
            }
            TraceEvent::Plan { groups, nodes, arcs, objective, .. } => {
                write!(f, "event=plan groups={groups} nodes={nodes} arcs={arcs} objective={objective}")
            }
            TraceEvent::Assign { camera, target, .. } => write!(f, "event=plan camera={camera} target={target}"),
        }
    }
}

fn fields(line: &str) -> Option<Vec<(&str, &str)>> {
    line.split_whitespace().map(|kv| kv.split_once('=')).collect()
}

fn list<T: FromStr>(s: &str) -> Option<Vec<T>> {
    if s == "-" {
        return Some(Vec::new());
    }
    s.split(',').map(|x| x.parse().ok()).collect()
}

impl FromStr for TraceEvent {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let kv = fields(line).ok_or("expected key=value pairs")?;
        let get = |k: &str| kv.iter().find(|(key, _)| *key == k).map(|(_, v)| *v);
        let need = |k: &str| get(k).ok_or(format!("missing `{k}`"));
        let num = |k: &str| -> Result<u64, String> { need(k)?.parse().map_err(|_| format!("bad `{k}`")) };
        let t_ms = parse_ms(need("t")?).ok_or("bad time")?;
        let ev = match need("event")? {
            "spawn" => TraceEvent::Spawn { t_ms, id: num("id")? },
            "exit" => TraceEvent::Exit { t_ms, id: num("id")? },
            "capture" => {
                let ids = list(need("ids")?).ok_or("bad ids")?;
                let first_seen_ms: Vec<i64> = need("first_seen")?
                    .split(',')
                    .filter(|s| *s != "-")
                    .map(parse_ms)
                    .collect::<Option<_>>()
                    .ok_or("bad first_seen")?;
                if first_seen_ms.len() != ids.len() {
                    return Err("ids and first_seen differ in length".into());
                }
                TraceEvent::Capture { t_ms, camera: num("camera")? as usize, group: num("group")?, ids, first_seen_ms }
            }
            "fixed_look" => TraceEvent::FixedLook { t_ms, camera: num("camera")? as usize, region: num("region")? as usize },
            "plan" if get("target").is_some() => {
                TraceEvent::Assign { t_ms, camera: num("camera")? as usize, target: num("target")? }
            }
            "plan" => TraceEvent::Plan {
                t_ms,
                groups: num("groups")? as usize,
                nodes: num("nodes")? as usize,
                arcs: num("arcs")? as usize,
                objective: need("objective")?.parse().map_err(|_| "bad objective")?,
            },
            other => return Err(format!("unknown event `{other}`")),
        };
        Ok(ev)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(method: &str, seed: u64, config_hash: &str) -> Self {
        Self { method: method.into(), seed, config_hash: config_hash.into(), events: Vec::new() }
    }

    pub fn push(&mut self, ev: TraceEvent) {
        self.events.push(ev);
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# method={} seed={} config={}\n", self.method, self.seed, self.config_hash);
        for ev in &self.events {
            out.push_str(&ev.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut trace = Trace::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for (k, v) in fields(header.trim()).unwrap_or_default() {
                    match k {
                        "method" => trace.method = v.into(),
                        "seed" => trace.seed = v.parse().unwrap_or(0),
                        "config" => trace.config_hash = v.into(),
                        _ => {}
                    }
                }
                continue;
            }
            let ev = line
                .parse()
                .map_err(|reason| TraceError::Malformed { line: n + 1, reason })?;
            trace.events.push(ev);
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ms_formatting() {
        assert_eq!(fmt_ms(0), "0.000");
        assert_eq!(fmt_ms(12_345), "12.345");
        assert_eq!(fmt_ms(-5), "-0.005");
        assert_eq!(parse_ms("12.3"), Some(12_300));
        assert_eq!(parse_ms("7"), Some(7_000));
        assert_eq!(to_ms(1.0 / 18.0), 56);
    }

    #[test]
    fn round_trip() {
        let mut t = Trace::new("flexible_grouped", 7, "abc");
        t.push(TraceEvent::Spawn { t_ms: 0, id: 0 });
        t.push(TraceEvent::Plan { t_ms: 0, groups: 0, nodes: 10, arcs: 12, objective: -3 });
        t.push(TraceEvent::FixedLook { t_ms: 1_000, camera: 1, region: 2 });
        t.push(TraceEvent::Capture { t_ms: 3_000, camera: 0, group: 4, ids: vec![4, 5], first_seen_ms: vec![55, 1_111] });
        t.push(TraceEvent::Capture { t_ms: 3_000, camera: 2, group: 9, ids: vec![], first_seen_ms: vec![] });
        t.push(TraceEvent::Assign { t_ms: 3_056, camera: 1, target: 5 });
        t.push(TraceEvent::Exit { t_ms: 9_999, id: 0 });
        let text = t.to_text();
        assert!(text.contains("t=3.000 event=capture camera=0 group=4 ids=4,5 first_seen=0.055,1.111"));
        assert_eq!(Trace::parse(&text).unwrap(), t);
    }

    #[test]
    fn malformed_lines() {
        assert!(Trace::parse("t=1.000 event=warp id=3\n").is_err());
        assert!(Trace::parse("t=1.000 event=spawn\n").is_err());
        assert!(Trace::parse("garbage\n").is_err());
    }
}
