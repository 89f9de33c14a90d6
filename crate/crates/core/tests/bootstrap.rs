use groundwork::bootstrap::{
    build_hierarchy, level1_entries, BootstrapConfig, BootstrapLms, ChainerLm, SummarizerLm,
};
use groundwork::fixtures::toy;
use groundwork::retriever::HashEmbedder;
use groundwork::skilldb::{load_observations, save_observations, SkillDatabase};
use groundwork::worldsim::dry_run;
use std::collections::BTreeSet;

fn build(levels: u32, seed: u64) -> groundwork::bootstrap::BootstrapOutput {
    let world = toy();
    let lms = BootstrapLms {
        chainer: &ChainerLm,
        summarizer: &SummarizerLm,
    };
    let config = BootstrapConfig {
        levels,
        seed,
        ..Default::default()
    };
    build_hierarchy(
        &world,
        level1_entries(&world),
        &lms,
        &HashEmbedder::default(),
        &config,
    )
    .unwrap()
}

#[test]
fn toy_hierarchy_is_sound() {
    let out = build(3, 0);
    assert!(out.db.violations().is_empty());
    assert!(out.db.max_level() >= 3);
    let world = toy();
    for e in out.db.entries().filter(|e| e.id.level > 1) {
        let outcome = dry_run(&world, &out.db, &e.semantic).unwrap();
        assert!(outcome.success(), "{} fails from reset", e.semantic);
    }
}

#[test]
fn builds_are_reproducible() {
    let a = build(3, 11);
    let b = build(3, 11);
    assert_eq!(a.db.to_jsonl(), b.db.to_jsonl());
    assert_eq!(a.manifest, b.manifest);
    assert_eq!(a.observations, b.observations);
}

#[test]
fn entry_names_are_the_union_of_episode_observations() {
    let out = build(3, 0);
    for e in out.db.entries().filter(|e| e.id.level > 1) {
        let ep = out
            .episodes
            .iter()
            .find(|ep| {
                ep.success && ep.level == e.id.level - 1 && out.db.plan_semantics(e) == ep.steps
            })
            .unwrap();
        let seen: BTreeSet<String> = out
            .observations
            .iter()
            .filter(|r| r.episode == ep.episode)
            .flat_map(|r| r.object_names.iter().cloned())
            .collect();
        assert_eq!(e.object_names, seen, "{}", e.semantic);
    }
}

#[test]
fn outputs_round_trip_through_files() {
    let out = build(3, 0);
    let dir = tempfile::tempdir().unwrap();
    let db_path = dir.path().join("db.jsonl");
    let obs_path = dir.path().join("obs.jsonl");
    out.db.save(&db_path).unwrap();
    save_observations(&obs_path, &out.observations).unwrap();
    assert_eq!(
        SkillDatabase::load(&db_path).unwrap().to_jsonl(),
        out.db.to_jsonl()
    );
    assert_eq!(load_observations(&obs_path).unwrap(), out.observations);
    assert_eq!(
        out.manifest.db_digest,
        groundwork::sha256_hex(out.db.to_jsonl().as_bytes())
    );
    assert_eq!(out.manifest.observations, out.observations.len());
}

#[test]
fn four_levels_build_on_the_toy_world() {
    let out = build(4, 0);
    assert_eq!(out.db.max_level(), 4);
    assert!(out.db.violations().is_empty());
}
