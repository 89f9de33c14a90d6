use groundwork::evalharness::{ci_suite, run_suite, Harness, SuiteOutput};
use groundwork::fixtures::{house, household_database};
use groundwork::lmclient::{CacheMode, ReplayCache};
use groundwork::retriever::{HashEmbedder, Retriever};
use std::path::PathBuf;
use std::sync::Arc;

fn harness() -> Harness {
    let retriever =
        Retriever::new(household_database(), Arc::new(HashEmbedder::default())).unwrap();
    Harness::new(retriever, house())
}

fn report_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/golden/ci-report.json")
}

fn run_ci(h: &Harness, parallelism: usize) -> SuiteOutput {
    run_suite(&ci_suite(), h, parallelism, None).unwrap()
}

#[test]
fn ci_suite_is_deterministic_across_parallelism() {
    let a = run_ci(&harness(), 1);
    let b = run_ci(&harness(), 3);
    assert_eq!(a.report.scenarios, 24);
    assert!(a.report.errors.is_empty(), "{:?}", a.report.errors);
    assert_eq!(a.report.to_json(), b.report.to_json());
    for r in &a.runs {
        let t = r.trace.as_ref().unwrap();
        assert!(
            t.violations().is_empty(),
            "{}: {:?}",
            r.scenario,
            t.violations()
        );
    }
    if std::env::var_os("GROUNDWORK_BLESS").is_some() {
        std::fs::write(report_path(), a.report.to_json()).unwrap();
        return;
    }
    let frozen = std::fs::read_to_string(report_path()).unwrap();
    assert_eq!(
        a.report.to_json(),
        frozen,
        "report drifted from the frozen copy"
    );
}

#[test]
fn strict_replay_makes_no_backend_calls() {
    let mut recorder = harness();
    let store = Arc::new(ReplayCache::store(CacheMode::Record));
    recorder.cache = Some(store.clone());
    let recorded = run_ci(&recorder, 2);
    let stats = store.stats();
    assert!(stats.entries > 0);
    assert_eq!(recorder.planner_calls(), stats.backend_calls);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cache.jsonl");
    store.export(&file).unwrap();

    let mut replayer = harness();
    let strict = Arc::new(ReplayCache::store(CacheMode::Strict));
    assert_eq!(strict.import(&file).unwrap(), stats.entries);
    replayer.cache = Some(strict.clone());
    let replayed = run_ci(&replayer, 2);

    assert_eq!(replayer.planner_calls(), 0);
    assert_eq!(strict.stats().backend_calls, 0);
    assert_eq!(strict.stats().misses, 0);
    assert!(strict.stats().hits > 0);
    assert_eq!(recorded.report.to_json(), replayed.report.to_json());
}
