mod common;

use common::*;
use groundwork::engine::Mode;
use groundwork::evalharness::{
    common_prefix, compute_metrics, plan_score, EpisodeRun, MetricsError,
};
use groundwork::fixtures::InstructionType;
use proptest::prelude::*;

#[test]
fn six_hand_fixtures_match_expected_and_oracle() {
    for (f, want) in fixtures().iter().zip(EXPECTED) {
        let r = run(f, f.name, Mode::Semgro, InstructionType::Structured, "None");
        let report = compute_metrics(&[r]).unwrap();
        let m = &report.by_mode[&Mode::Semgro];
        let got = (m.sr, m.cgc, m.plan, m.exec);
        let ora = oracle(&[f]);
        for (g, (w, o)) in [got.0, got.1, got.2, got.3].into_iter().zip([
            (want.0, ora.0),
            (want.1, ora.1),
            (want.2, ora.2),
            (want.3, ora.3),
        ]) {
            assert!(close(g, w), "{}: got {got:?}, expected {want:?}", f.name);
            assert!(close(g, o), "{}: got {got:?}, oracle {ora:?}", f.name);
        }
    }
}

#[test]
fn exec_pools_counts_across_episodes() {
    let fs = fixtures();
    let runs = vec![
        run(
            &fs[1],
            "a",
            Mode::Semgro,
            InstructionType::Structured,
            "None",
        ),
        run(
            &fs[2],
            "b",
            Mode::Semgro,
            InstructionType::Structured,
            "None",
        ),
    ];
    let m = compute_metrics(&runs).unwrap().by_mode[&Mode::Semgro].clone();
    assert!(close(m.exec, 200.0 / 7.0), "{}", m.exec);
    assert_eq!((m.generated, m.executed_ok), (7, 2));
    let ora = oracle(&[&fs[1], &fs[2]]);
    assert!(
        close(m.sr, ora.0) && close(m.cgc, ora.1) && close(m.plan, ora.2) && close(m.exec, ora.3)
    );
}

#[test]
fn cells_split_by_mode_type_and_shift() {
    let fs = fixtures();
    let runs = vec![
        run(&fs[0], "a", Mode::Semgro, InstructionType::Structured, "OL"),
        run(&fs[2], "b", Mode::Semgro, InstructionType::Structured, "PA"),
        run(&fs[1], "c", Mode::SgL, InstructionType::AbstractNoun, "OL"),
    ];
    let report = compute_metrics(&runs).unwrap();
    assert_eq!(report.cells.len(), 3);
    let ol = report
        .cells
        .iter()
        .find(|c| c.mode == Mode::Semgro && c.shift == "OL")
        .unwrap();
    assert!(close(ol.metrics.sr, 100.0));
    assert!(close(report.by_mode[&Mode::Semgro].sr, 50.0));
    assert!(close(report.by_mode[&Mode::SgL].cgc, 50.0));
}

#[test]
fn report_is_independent_of_run_order() {
    let fs = fixtures();
    let mut runs: Vec<EpisodeRun> = fs
        .iter()
        .enumerate()
        .map(|(i, f)| {
            run(
                f,
                &format!("s{i}"),
                Mode::Semgro,
                InstructionType::Structured,
                "None",
            )
        })
        .collect();
    let a = compute_metrics(&runs).unwrap();
    runs.reverse();
    let b = compute_metrics(&runs).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let all: Vec<&Fixture> = fs.iter().collect();
    let ora = oracle(&all);
    let m = &a.by_mode[&Mode::Semgro];
    assert!(
        close(m.sr, ora.0) && close(m.cgc, ora.1) && close(m.plan, ora.2) && close(m.exec, ora.3)
    );
}

#[test]
fn empty_suite_has_no_modes() {
    let report = compute_metrics(&[]).unwrap();
    assert_eq!(report.episodes, 0);
    assert!(report.by_mode.is_empty());
    assert!(report.cells.is_empty());
    assert!(report.iterations.iter().all(|r| r.episodes == 0));
}

#[test]
fn failed_setup_is_listed_not_scored() {
    let fs = fixtures();
    let mut broken = run(
        &fs[2],
        "broken",
        Mode::Semgro,
        InstructionType::Structured,
        "None",
    );
    broken.trace = None;
    broken.error = Some("unknown world".into());
    let runs = vec![
        run(
            &fs[0],
            "ok",
            Mode::Semgro,
            InstructionType::Structured,
            "None",
        ),
        broken,
    ];
    let report = compute_metrics(&runs).unwrap();
    assert_eq!(report.errors.len(), 1);
    assert_eq!(report.by_mode[&Mode::Semgro].episodes, 1);
    assert!(close(report.by_mode[&Mode::Semgro].sr, 100.0));
}

#[test]
fn goal_count_mismatch_is_rejected() {
    let fs = fixtures();
    let mut r = run(
        &fs[0],
        "x",
        Mode::Semgro,
        InstructionType::Structured,
        "None",
    );
    r.goal_count = 5;
    assert!(matches!(
        compute_metrics(&[r]),
        Err(MetricsError::GoalMismatch {
            spec: 5,
            trace: 2,
            ..
        })
    ));
}

fn seq() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(vec!["a", "b", "c"]).prop_map(String::from),
        0..8,
    )
}

proptest! {
    #[test]
    fn plan_score_is_monotone_in_the_prefix(gt in seq(), extra in seq(), cut in 0usize..8) {
        let planned: Vec<String> = gt.iter().take(cut).cloned().chain(extra).collect();
        let score = plan_score(&planned, &gt);
        prop_assert!((0.0..=1.0).contains(&score));
        let longer: Vec<String> = gt.iter().take(cut + 1).cloned().collect();
        prop_assert!(plan_score(&longer, &gt) >= plan_score(&gt[..cut.min(gt.len())], &gt));
        prop_assert_eq!(common_prefix(&planned, &gt), common_prefix(&gt, &planned));
        if !gt.is_empty() {
            prop_assert!((plan_score(&gt, &gt) - 1.0).abs() < TOL);
        }
    }
}
