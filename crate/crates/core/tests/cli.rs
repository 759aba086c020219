use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ptzflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptzflow")).args(args).output().unwrap()
}

fn scenario1() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios/scenario1.toml")
        .to_string_lossy()
        .into_owned()
}

fn small_config(dir: &Path) -> String {
    let text = std::fs::read_to_string(scenario1()).unwrap().replace("total_pedestrians = 400", "total_pedestrians = 40");
    let path = dir.join("small.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&ptzflow(&["run", "--config", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&ptzflow(&["run"])), 2);
    assert_eq!(code(&ptzflow(&["frobnicate"])), 2);
    assert_eq!(code(&ptzflow(&["validate", "--max-cameras", "9", "--max-horizon", "9"])), 2);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[planner]\nhorizon = 10\nwindow = 3\n").unwrap();
    let o = ptzflow(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("divide"), "{}", String::from_utf8_lossy(&o.stderr));

    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, "[planner]\nhorizn = 10\n").unwrap();
    assert_eq!(code(&ptzflow(&["run", "--config", typo.to_str().unwrap()])), 2);
}

#[test]
fn validate_exit_codes() {
    assert_eq!(code(&ptzflow(&["validate", "--trials", "0"])), 0);
    let o = ptzflow(&["validate", "--trials", "50", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("50 trials"));
    let o = ptzflow(&["validate", "--trials", "5", "--corrupt"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("oracle"));
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = |name: &str| {
        let d = dir.path().join(name);
        let o = ptzflow(&["run", "--config", &cfg, "--seed", "11", "--out", d.to_str().unwrap(), "--format", "csv"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (
            std::fs::read(d.join("flexible_grouped_seed11.trace")).unwrap(),
            std::fs::read(d.join("flexible_grouped_seed11.csv")).unwrap(),
        )
    };
    let a = out("a");
    assert_eq!(a, out("b"));
    let trace = String::from_utf8(a.0).unwrap();
    assert!(trace.starts_with("# method=flexible_grouped seed=11 config="));
    assert!(String::from_utf8(a.1).unwrap().starts_with("method,watched_ratio,avg_wait_s,missed_ratio,seed\n"));
    assert!(!dir.path().join("a").read_dir().unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "partial")));
}

#[test]
fn compare_pairs_arrivals_across_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("cmp");
    let o = ptzflow(&["compare", "--config", &cfg, "--seed", "5", "--seeds", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for seed in [5, 6] {
        let spawns: Vec<Vec<String>> = ["flexible_grouped", "flexible", "master_slave"]
            .iter()
            .map(|m| {
                std::fs::read_to_string(out.join(format!("{m}_seed{seed}.trace")))
                    .unwrap()
                    .lines()
                    .filter(|l| l.contains("event=spawn"))
                    .map(String::from)
                    .collect()
            })
            .collect();
        assert_eq!(spawns[0].len(), 40);
        assert_eq!(spawns[0], spawns[1]);
        assert_eq!(spawns[0], spawns[2]);
    }
    let csv = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("master_slave,")));
    assert_eq!(code(&ptzflow(&["compare", "--config", &cfg, "--seeds", "0"])), 2);
}

const TOY: &str = r#"
now = 0.0

[scenario.planner]
horizon = 1
window = 1
fixed_regions = 0

[[scenario.cameras]]
x = 150.0
y = 0.0

[[groups]]
id = 7
value = 4

[[groups]]
id = 9
value = 10
"#;

#[test]
fn plan_picks_the_more_valuable_group() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("toy.toml");
    std::fs::write(&snap, TOY).unwrap();
    let o = ptzflow(&["plan", "--config", snap.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("objective 10"), "{text}");
    assert!(text.contains("camera 0: group 9"), "{text}");

    let o = ptzflow(&["plan", "--config", snap.to_str().unwrap(), "--dump"]);
    assert!(String::from_utf8(o.stdout).unwrap().lines().any(|l| l.starts_with("A ")));
}

#[test]
fn plan_without_tracks_only_looks_wide() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("empty.toml");
    std::fs::write(&snap, "now = 12.0\n").unwrap();
    let o = ptzflow(&["plan", "--config", snap.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("camera ")).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cells = row.split_once(": ").unwrap().1;
        assert!(cells.split(" | ").all(|c| c.starts_with("fixed ")), "{row}");
    }
}
