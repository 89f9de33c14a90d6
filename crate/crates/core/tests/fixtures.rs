use groundwork::fixtures::{
    apartment, house, household_database, household_tasks, kitchen, toy, InstructionType,
};
use groundwork::worldsim::{dry_run, quantify_shift, ShiftDegree};

#[test]
fn worlds_are_consistent() {
    for w in [house(), apartment(), kitchen(), toy()] {
        w.check().unwrap();
    }
}

#[test]
fn household_database_has_four_levels_and_valid_top_level() {
    let db = household_database();
    let stats = db.stats();
    assert_eq!(db.max_level(), 4);
    assert!(stats.levels[&4] >= 12, "{stats:?}");
    let w = house();
    for e in db.level(4) {
        assert!(
            dry_run(&w, &db, &e.semantic).unwrap().success(),
            "{}",
            e.semantic
        );
    }
    assert_eq!(quantify_shift(&w, &w, &db).degree, ShiftDegree::None);
}

#[test]
fn tasks_have_goals_met_by_their_ground_truth() {
    let db = household_database();
    for t in household_tasks() {
        let w = house();
        assert_eq!(t.spec.goals_met(&w), 0, "{}", t.spec.name);
        let reference = t.spec.reference_skill.as_deref().unwrap();
        let (next, out) = groundwork::worldsim::execute_composite(&w, &db, reference).unwrap();
        assert!(out.success());
        assert_eq!(
            t.spec.goals_met(&next),
            t.spec.goal_conditions.len(),
            "{}",
            t.spec.name
        );
        assert_eq!(out.primitives.len(), t.spec.ground_truth_sequence.len());
        for kind in InstructionType::ALL {
            assert!(!t.instruction(kind).is_empty());
        }
    }
}
