use groundwork::engine::GroundingTrace;
use groundwork::fixtures::{run_golden, GOLDEN_TRACE};
use std::time::Instant;

/// Rewrites the frozen trace: `GROUNDWORK_BLESS=1 cargo test --test golden`.
#[test]
fn bless_when_requested() {
    if std::env::var_os("GROUNDWORK_BLESS").is_none() {
        return;
    }
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/assets/golden/kitchen-trace.jsonl"
    );
    std::fs::write(path, run_golden().to_jsonl()).unwrap();
}

#[test]
fn replay_matches_frozen_trace_token_for_token() {
    if std::env::var_os("GROUNDWORK_BLESS").is_some() {
        return;
    }
    let start = Instant::now();
    let live = run_golden().to_jsonl();
    assert!(start.elapsed().as_secs_f64() < 2.0);
    let frozen: Vec<&str> = GOLDEN_TRACE.lines().collect();
    let live: Vec<&str> = live.lines().collect();
    assert_eq!(frozen.len(), live.len());
    for (i, (a, b)) in frozen.iter().zip(&live).enumerate() {
        assert_eq!(a, b, "line {}", i + 1);
    }
}

#[test]
fn frozen_trace_round_trips() {
    let t = GroundingTrace::from_jsonl(GOLDEN_TRACE).unwrap();
    assert_eq!(t.to_jsonl(), GOLDEN_TRACE);
    assert!(t.done());
    assert!(t.violations().is_empty());
}

#[test]
fn frozen_trace_follows_the_kitchen_episode() {
    let t = GroundingTrace::from_jsonl(GOLDEN_TRACE).unwrap();
    let gen: Vec<(&str, u32)> = t
        .steps
        .iter()
        .map(|s| (s.generated.as_str(), s.frame.depth))
        .collect();
    assert_eq!(
        gen,
        vec![
            ("put fruit in kitchen cabinet", 0),
            ("open kitchen cabinet and put bananas in kitchen cabinet", 1),
            ("place apple in kitchen cabinet", 0),
            ("put apple and peach in kitchen cabinet", 0),
            ("open kitchen cabinet and put peach in kitchen cabinet", 1),
        ]
    );
    assert_eq!(
        t.steps[0].refinement.as_deref(),
        Some("Open kitchen cabinet and put fruit in it")
    );
    assert_eq!(
        t.steps[3].refinement.as_deref(),
        Some("Open the kitchen cabinet and put apple and peach in the kitchen cabinet")
    );
    let c = t.footer.counters;
    assert_eq!(
        (c.generated, c.executed_ok, c.ne_all, c.ne_observational),
        (5, 3, 2, 2)
    );
    assert_eq!((t.footer.goals_met, t.footer.goals_total), (3, 3));
}
