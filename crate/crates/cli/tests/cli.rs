use groundwork::fixtures::{
    build_golden_database, golden_critic_rules, golden_planner_rules, household_database,
    GOLDEN_TRACE,
};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn kitchen() -> PathBuf {
    root().join("configs/kitchen")
}

fn blessing() -> bool {
    std::env::var_os("GROUNDWORK_BLESS").is_some()
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groundwork"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rules_json(rules: &[groundwork::lmclient::RuleSpec]) -> String {
    serde_json::to_string_pretty(rules).unwrap() + "\n"
}

#[test]
fn shipped_assets_match_builtins() {
    let files = [
        (
            kitchen().join("db.jsonl"),
            build_golden_database().unwrap().to_jsonl(),
        ),
        (
            kitchen().join("planner-rules.json"),
            rules_json(&golden_planner_rules()),
        ),
        (
            kitchen().join("critic-rules.json"),
            rules_json(&golden_critic_rules()),
        ),
        (
            root().join("configs/household.db.jsonl"),
            household_database().to_jsonl(),
        ),
    ];
    for (file, want) in files {
        if blessing() {
            std::fs::write(&file, &want).unwrap();
        }
        assert_eq!(
            std::fs::read_to_string(&file).unwrap(),
            want,
            "{}",
            file.display()
        );
    }
}

#[test]
fn db_validate_accepts_shipped_database() {
    let o = run(&["db", "validate", "configs/household.db.jsonl"], &root());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains(": ok"));
    assert!(stdout(&o).contains("total"));
}

#[test]
fn db_stats_shows_four_levels() {
    let o = run(&["db", "stats", "configs/household.db.jsonl"], &root());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let levels: Vec<&str> = out
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with("total"))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(levels, ["1", "2", "3", "4"], "{out}");
}

#[test]
fn db_validate_reports_violations_by_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(root().join("configs/household.db.jsonl")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // point the first level-2 entry's plan at an id that does not exist
    let at = lines
        .iter()
        .position(|l| l.starts_with("{\"level\":2"))
        .unwrap();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[at]).unwrap();
    rec["plan"] = serde_json::json!([[1, 9999]]);
    lines[at] = rec.to_string();
    let file = dir.path().join("broken.jsonl");
    std::fs::write(&file, lines.join("\n") + "\n").unwrap();
    let o = run(&["db", "validate", path(&file)], dir.path());
    assert_eq!(code(&o), 1);
    let expected = format!("{}:{}: dangling-reference:", file.display(), at + 1);
    assert!(stdout(&o).contains(&expected), "{}", stdout(&o));

    std::fs::write(
        &file,
        "{\"level\":1,\"index\":0,\"semantic\":\"walk tv\"}\nnot json\n",
    )
    .unwrap();
    let o = run(&["db", "validate", path(&file)], dir.path());
    assert_eq!(code(&o), 1);
    assert!(
        stdout(&o).contains(&format!("{}:2: parse", file.display())),
        "{}",
        stdout(&o)
    );
}

#[test]
fn ground_kitchen_reproduces_golden_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let config = kitchen().join("config.json");
    let scenario = kitchen().join("scenario.json");
    // run from elsewhere: config paths resolve against the config file
    let o = run(
        &[
            "--config",
            path(&config),
            "ground",
            "--scenario",
            path(&scenario),
            "--trace",
            path(&trace),
        ],
        dir.path(),
    );
    let out = stdout(&o);
    assert_eq!(code(&o), 0, "{out}{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&trace).unwrap(), GOLDEN_TRACE);
    let first = out.lines().next().unwrap();
    assert!(
        first.contains("-> put fruit in kitchen cabinet | NE (kitchen cabinet is closed"),
        "{first}"
    );
    assert!(
        first.ends_with("refine: Open kitchen cabinet and put fruit in it"),
        "{first}"
    );
    assert!(out.contains("outcome: done; goals 3/3"));

    if blessing() {
        let record = dir.path().join("record.json");
        let cache = kitchen().join("cache.jsonl");
        let _ = std::fs::remove_file(&cache);
        let mut c: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
        for key in ["db", "planner", "critic"] {
            rewrite_paths(&mut c[key]);
        }
        c["cache"] = serde_json::json!({"path": path(&cache), "mode": "record"});
        std::fs::write(&record, c.to_string()).unwrap();
        let o = run(
            &[
                "--config",
                path(&record),
                "ground",
                "--scenario",
                path(&scenario),
                "--trace",
                path(&trace),
            ],
            dir.path(),
        );
        assert_eq!(code(&o), 0);
    }
}

fn rewrite_paths(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::String(s) if s.ends_with(".json") || s.ends_with(".jsonl") => {
            *s = path(&kitchen().join(&*s)).to_string();
        }
        serde_json::Value::Object(m) => m.values_mut().for_each(rewrite_paths),
        _ => {}
    }
}

#[test]
fn ground_replays_shipped_cache_without_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let o = run(
        &[
            "--config",
            path(&kitchen().join("replay.json")),
            "ground",
            "--scenario",
            path(&kitchen().join("scenario.json")),
            "--trace",
            path(&trace),
        ],
        dir.path(),
    );
    assert_eq!(
        code(&o),
        0,
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(std::fs::read_to_string(&trace).unwrap(), GOLDEN_TRACE);
}

fn scenario_with(dir: &Path, goals: serde_json::Value, budget: u32) -> PathBuf {
    let s = serde_json::json!({
        "id": "probe",
        "base_world": "house",
        "task": {"name": "probe", "goal_conditions": goals, "ground_truth_sequence": [], "step_budget": budget},
        "instruction": "Put the apple in the fridge.",
        "instruction_type": "Structured"
    });
    let p = dir.join("scenario.json");
    std::fs::write(&p, s.to_string()).unwrap();
    p
}

#[test]
fn ground_with_goal_already_met_is_done_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let goals =
        serde_json::json!([{"kind": "state", "object": "kitchencabinet", "state": "CLOSED"}]);
    let s = scenario_with(dir.path(), goals, 10);
    let o = run(&["ground", "--scenario", path(&s)], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(
        stdout(&o).starts_with("outcome: done; goals 1/1; generated 0"),
        "{}",
        stdout(&o)
    );
    assert!(dir.path().join("probe.trace.jsonl").exists());
}

#[test]
fn ground_with_unreachable_goal_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let goals =
        serde_json::json!([{"kind": "inside", "object": "apple", "container": "microwave"}]);
    let s = scenario_with(dir.path(), goals, 6);
    let o = run(
        &["ground", "--scenario", path(&s), "--mode", "sg-l"],
        dir.path(),
    );
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o).contains("budget exhausted"));
}

#[test]
fn eval_ci_matches_frozen_report_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(
        &["eval", "--suite", "ci", "--parallel", "2", "--out", "a"],
        dir.path(),
    );
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(&["eval", "--suite", "ci", "--out", "b"], dir.path());
    assert_eq!(a.stdout, b.stdout);
    let frozen =
        std::fs::read_to_string(root().join("crates/core/assets/golden/ci-report.json")).unwrap();
    assert_eq!(
        std::fs::read_to_string(dir.path().join("a/report.json")).unwrap(),
        frozen
    );
    assert!(stdout(&a).contains("suite ci: 24 scenarios"));
    assert!(dir.path().join("a/traces").read_dir().unwrap().count() == 24);
}

#[test]
fn bootstrap_toy_world_gives_a_valid_database() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "bootstrap",
            "--world",
            "toy",
            "--levels",
            "3",
            "--out",
            "toy.jsonl",
            "--observations",
            "obs.jsonl",
            "--manifest",
            "manifest.json",
        ],
        dir.path(),
    );
    assert_eq!(
        code(&o),
        0,
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    let v = run(&["db", "validate", "toy.jsonl"], dir.path());
    assert_eq!(code(&v), 0, "{}", stdout(&v));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["levels"].as_array().unwrap().len(), 2);
    assert!(stdout(&o).contains(manifest["db_digest"].as_str().unwrap()));
}

#[test]
fn cache_stats_import_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let shipped = kitchen().join("cache.jsonl");
    let o = run(&["cache", "stats", path(&shipped)], dir.path());
    assert_eq!(code(&o), 0);
    let total = std::fs::read_to_string(&shipped).unwrap().lines().count();
    assert!(
        stdout(&o).starts_with(&format!("entries: {total}\n")),
        "{}",
        stdout(&o)
    );

    let o = run(
        &[
            "cache",
            "export",
            path(&shipped),
            "critic.jsonl",
            "--tag",
            "critic",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let critic = std::fs::read_to_string(dir.path().join("critic.jsonl")).unwrap();
    assert!(critic.lines().count() > 0 && critic.lines().count() < total);
    assert!(critic.lines().all(|l| l.contains("\"tag\":\"critic\"")));

    let o = run(
        &[
            "cache",
            "import",
            "merged.jsonl",
            "critic.jsonl",
            path(&shipped),
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("merged.jsonl")).unwrap(),
        std::fs::read_to_string(&shipped).unwrap()
    );

    let o = run(
        &[
            "cache",
            "export",
            path(&shipped),
            "x.jsonl",
            "--tag",
            "nonsense",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn config_rejects_unknown_keys_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"planner": {"kind": "heuristic"}, "colour": 1}"#,
    )
    .unwrap();
    let o = run(&["--config", "c.json", "eval", "--suite", "ci"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field `colour`"));

    std::fs::write(
        dir.path().join("c.json"),
        r#"{"planner": {"kind": "heuristic", "rules": "x"}}"#,
    )
    .unwrap();
    let o = run(&["--config", "c.json", "eval", "--suite", "ci"], dir.path());
    assert_eq!(code(&o), 1);

    let o = run(
        &["ground", "--scenario", "s.json", "--mode", "fast"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    let o = run(&["eval", "--suite", "missing.json"], dir.path());
    assert_eq!(code(&o), 1);
}
