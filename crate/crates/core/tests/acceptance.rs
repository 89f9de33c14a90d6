//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the console.
//! Exits nonzero when a criterion fails, except those listed in
//! `KNOWN_BLOCKERS`, which still print FAIL.

mod common;

use groundwork::bootstrap::{
    build_hierarchy, level1_entries, BootstrapConfig, BootstrapLms, ChainerLm, SummarizerLm,
};
use groundwork::engine::Mode;
use groundwork::evalharness::{
    ci_suite, compute_metrics, degree_suite, run_suite, shift_suite, Harness, MetricsReport,
    SuiteOutput,
};
use groundwork::fixtures::{
    house, household_database, run_golden, toy, InstructionType, GOLDEN_TRACE,
};
use groundwork::lmclient::{CacheMode, ReplayCache};
use groundwork::retriever::{Embedder, HashEmbedder, Retriever};
use groundwork::skilldb::{synthetic_database, SkillDatabase, SkillEntry, SkillId};
use groundwork::worldsim::{dry_run, Magnitude, Observation, ShiftDegree};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

const GOLDEN_MAX: Duration = Duration::from_secs(2);
const RETRIEVAL_CASES: usize = 1000;
const RETRIEVAL_MAX: Duration = Duration::from_secs(30);
const MUTATIONS: usize = 500;
const GAP: f64 = 5.0;
const SEMGRO_EXEC_WITHIN: f64 = 5.0;
const SEMGRO_PLAN_WITHIN: f64 = 10.0;
const MIN_PER_DEGREE: usize = 20;
const CI_SCENARIOS: usize = 24;

/// Criteria expected to fail, with the reason recorded in the project notes.
const KNOWN_BLOCKERS: &[u32] = &[4];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn household_harness() -> Harness {
    let retriever =
        Retriever::new(household_database(), Arc::new(HashEmbedder::default())).expect("retriever");
    Harness::new(retriever, house())
}

fn golden_replay() -> Verdict {
    let t = Instant::now();
    let trace = run_golden().to_jsonl();
    let elapsed = t.elapsed();
    let same = trace == GOLDEN_TRACE;
    verdict(
        same && elapsed < GOLDEN_MAX,
        format!(
            "identical={same}, {} lines, {:.3}s (< {}s)",
            trace.lines().count(),
            elapsed.as_secs_f64(),
            GOLDEN_MAX.as_secs()
        ),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exhaustive scoring with the declared order: score descending, level
/// descending, semantic ascending, id ascending.
fn brute_force(
    db: &SkillDatabase,
    embedder: &dyn Embedder,
    query: &str,
    seen: &BTreeSet<String>,
    k: usize,
    levels: (u32, u32),
) -> Vec<(SkillId, f64)> {
    let q = embedder.embed(query).unwrap();
    let names = |set: &BTreeSet<String>| {
        (!set.is_empty()).then(|| {
            embedder
                .embed(&set.iter().cloned().collect::<Vec<_>>().join(" "))
                .unwrap()
        })
    };
    let o = names(seen);
    let mut all: Vec<(&SkillEntry, f64)> = db
        .entries()
        .filter(|e| e.id.level >= levels.0 && e.id.level <= levels.1)
        .map(|e| {
            let s = dot(
                q.as_slice(),
                embedder.embed(&e.semantic).unwrap().as_slice(),
            );
            let n = match (names(&e.object_names), &o) {
                (Some(a), Some(b)) => dot(a.as_slice(), b.as_slice()),
                _ => 0.0,
            };
            (e, s + n)
        })
        .collect();
    all.sort_by(|(a, sa), (b, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(Ordering::Equal)
            .then(b.id.level.cmp(&a.id.level))
            .then(a.semantic.cmp(&b.semantic))
            .then(a.id.cmp(&b.id))
    });
    all.into_iter().take(k).map(|(e, s)| (e.id, s)).collect()
}

fn retrieval_oracle() -> Verdict {
    let t = Instant::now();
    let mut in_retriever = Duration::ZERO;
    let embedder = HashEmbedder::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    let mut cases = 0;
    let mut largest = 0;
    let sizes: [&[usize]; 5] = [
        &[40, 20, 10],
        &[400, 200, 100, 50],
        &[2000, 1500, 1000, 500],
        &[3000, 1200, 600, 200],
        &[10, 5],
    ];
    let per_db = RETRIEVAL_CASES / 20;
    for round in 0..20 {
        let counts = sizes[round % sizes.len()];
        let db = synthetic_database(counts, rng.gen());
        largest = largest.max(db.len());
        let retriever = Retriever::new(Arc::new(db.clone()), Arc::new(embedder.clone())).unwrap();
        let entries: Vec<&SkillEntry> = db.entries().collect();
        let max_level = db.max_level();
        for _ in 0..per_db {
            cases += 1;
            let e = entries.choose(&mut rng).unwrap();
            // dropping the trailing index token makes many entries tie
            let words: Vec<&str> = e.semantic.split(' ').collect();
            let keep = rng.gen_range(1..=words.len());
            let query = words[..keep].join(" ");
            let seen: BTreeSet<String> = (0..rng.gen_range(0..6))
                .map(|_| format!("object{}", rng.gen_range(0..200)))
                .collect();
            let k = rng.gen_range(1..=25);
            let lo = rng.gen_range(1..=max_level);
            let hi = rng.gen_range(lo..=max_level);
            let obs = Observation {
                object_names: seen.clone(),
                ..Default::default()
            };
            let call = Instant::now();
            let result = retriever
                .retrieve_top_k(&query, &obs, k, Some(lo..=hi))
                .unwrap();
            in_retriever += call.elapsed();
            let got: Vec<(SkillId, f64)> = result
                .entries
                .iter()
                .map(|s| (s.entry.id, s.score))
                .collect();
            let want = brute_force(&db, &embedder, &query, &seen, k, (lo, hi));
            let ids = |v: &[(SkillId, f64)]| v.iter().map(|x| x.0).collect::<Vec<_>>();
            let scores_match = got.iter().zip(&want).all(|(a, b)| a.1 == b.1);
            if ids(&got) != ids(&want) || !scores_match {
                mismatches += 1;
            }
        }
    }
    verdict(
        mismatches == 0 && cases >= RETRIEVAL_CASES && in_retriever < RETRIEVAL_MAX,
        format!(
            "{mismatches} mismatches in {cases} cases, dbs up to {largest} entries, retrieval {:.1}s (< {}s), with oracle {:.1}s",
            in_retriever.as_secs_f64(),
            RETRIEVAL_MAX.as_secs(),
            t.elapsed().as_secs_f64()
        ),
    )
}

fn mutation_fuzz() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let rules = [
        "level-skip",
        "dangling-reference",
        "duplicate-semantic",
        "level-1-plan",
    ];
    let mut flagged = 0;
    let mut misses = Vec::new();
    for case in 0..MUTATIONS {
        let db = synthetic_database(&[30, 15, 8, 4], rng.gen());
        let mut entries: Vec<SkillEntry> = db.entries().cloned().collect();
        let rule = rules[case % rules.len()];
        let pick = |rng: &mut ChaCha8Rng, entries: &[SkillEntry], level: u32| {
            let idx: Vec<usize> = (0..entries.len())
                .filter(|&i| entries[i].id.level == level)
                .collect();
            *idx.choose(rng).unwrap()
        };
        let target = match rule {
            "level-skip" => {
                let lvl = rng.gen_range(3..=4);
                let i = pick(&mut rng, &entries, lvl);
                let lvl = entries[i].id.level - 2;
                let j = pick(&mut rng, &entries, lvl);
                let slot = rng.gen_range(0..entries[i].plan.len());
                entries[i].plan[slot] = entries[j].id;
                i
            }
            "dangling-reference" => {
                let lvl = rng.gen_range(2..=4);
                let i = pick(&mut rng, &entries, lvl);
                let slot = rng.gen_range(0..entries[i].plan.len());
                entries[i].plan[slot] =
                    SkillId::new(entries[i].id.level - 1, 10_000 + rng.gen_range(0..100));
                i
            }
            "duplicate-semantic" => {
                let i = rng.gen_range(0..entries.len());
                let mut j = rng.gen_range(0..entries.len());
                while j == i {
                    j = rng.gen_range(0..entries.len());
                }
                entries[i].semantic = entries[j].semantic.clone();
                i.max(j)
            }
            _ => {
                let i = pick(&mut rng, &entries, 1);
                let j = pick(&mut rng, &entries, 1);
                entries[i].plan = vec![entries[j].id];
                i
            }
        };
        let target_id = entries[target].id;
        let found = SkillDatabase::new_unchecked(entries).violations();
        let hit = found.iter().any(|v| v.rule() == rule);
        if hit {
            flagged += 1;
        } else {
            misses.push(format!(
                "{rule} at {target_id}: {:?}",
                found.iter().map(|v| v.rule()).collect::<Vec<_>>()
            ));
        }
    }
    verdict(
        flagged == MUTATIONS,
        format!(
            "{flagged}/{MUTATIONS} flagged with the injected rule{}",
            misses
                .first()
                .map(|m| format!("; first miss {m}"))
                .unwrap_or_default()
        ),
    )
}

fn shift_trade_off(report: &MetricsReport) -> Verdict {
    let m = |mode: Mode| report.by_mode.get(&mode).cloned().unwrap_or_default();
    let (l, mid, h, s) = (m(Mode::SgL), m(Mode::SgM), m(Mode::SgH), m(Mode::Semgro));
    let per_mode = report.episodes / Mode::ALL.len();
    let checks = [
        ("Exec L-M", l.exec - mid.exec >= GAP),
        ("Exec M-H", mid.exec - h.exec >= GAP),
        ("Plan H-M", h.plan - mid.plan >= GAP),
        ("Plan M-L", mid.plan - l.plan >= GAP),
        (
            "SemGro Exec",
            (s.exec - l.exec).abs() <= SEMGRO_EXEC_WITHIN || s.exec >= l.exec,
        ),
        (
            "SemGro Plan",
            (s.plan - h.plan).abs() <= SEMGRO_PLAN_WITHIN || s.plan >= h.plan,
        ),
        ("scenarios", per_mode >= 30),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        failed.is_empty(),
        format!(
            "{per_mode} scenarios/mode; Exec L {:.1} M {:.1} H {:.1} SemGro {:.1}; Plan L {:.1} M {:.1} H {:.1} SemGro {:.1}{}",
            l.exec,
            mid.exec,
            h.exec,
            s.exec,
            l.plan,
            mid.plan,
            h.plan,
            s.plan,
            if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
        ),
    )
}

fn iteration_trend(report: &MetricsReport) -> Verdict {
    let rows = &report.iterations;
    let enough = rows.iter().all(|r| r.episodes >= MIN_PER_DEGREE);
    let monotone = rows
        .windows(2)
        .all(|w| w[1].all_cause >= w[0].all_cause && w[1].domain_cause >= w[0].domain_cause);
    let none_dom = rows
        .iter()
        .find(|r| r.degree == ShiftDegree::None)
        .is_some_and(|r| r.domain_cause == 0.0);
    let table: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{:?} n={} all {:.2} dom {:.2}",
                r.degree, r.episodes, r.all_cause, r.domain_cause
            )
        })
        .collect();
    verdict(enough && monotone && none_dom, table.join("; "))
}

fn metric_fixtures() -> Verdict {
    let fixtures = common::fixtures();
    let mut exact = 0;
    for (f, want) in fixtures.iter().zip(common::EXPECTED) {
        let r = common::run(f, f.name, Mode::Semgro, InstructionType::Structured, "None");
        let Ok(report) = compute_metrics(&[r]) else {
            continue;
        };
        let got = &report.by_mode[&Mode::Semgro];
        let ora = common::oracle(&[f]);
        let ok = [
            (got.sr, want.0, ora.0),
            (got.cgc, want.1, ora.1),
            (got.plan, want.2, ora.2),
            (got.exec, want.3, ora.3),
        ]
        .iter()
        .all(|&(g, w, o)| common::close(g, w) && common::close(g, o));
        exact += usize::from(ok);
    }
    verdict(
        exact == fixtures.len(),
        format!(
            "{exact}/{} fixtures match (tolerance {:e})",
            fixtures.len(),
            common::TOL
        ),
    )
}

fn determinism(first: &SuiteOutput) -> Verdict {
    let second = run_suite(&ci_suite(), &household_harness(), 3, None).expect("ci suite");
    let same_report = first.report.to_json() == second.report.to_json();
    let same_hashes = first.report.trace_hashes == second.report.trace_hashes;

    let mut recorder = household_harness();
    let store = Arc::new(ReplayCache::store(CacheMode::Record));
    recorder.cache = Some(store.clone());
    let recorded = run_suite(&ci_suite(), &recorder, 2, None).expect("record");
    let mut replayer = household_harness();
    let strict = Arc::new(ReplayCache::store(CacheMode::Strict));
    strict
        .import_reader(std::io::Cursor::new(store.to_jsonl()))
        .expect("import");
    replayer.cache = Some(strict.clone());
    let replayed = run_suite(&ci_suite(), &replayer, 2, None).expect("replay");
    let calls = replayer.planner_calls() + strict.stats().backend_calls;
    let replay_same = recorded.report.to_json() == replayed.report.to_json()
        && replayed.report.to_json() == first.report.to_json();
    verdict(
        same_report && same_hashes && calls == 0 && replay_same && first.report.scenarios == CI_SCENARIOS,
        format!(
            "{} scenarios; reports identical={same_report}, trace hashes identical={same_hashes}; strict replay: {} hits, {calls} backend calls, report identical={replay_same}",
            first.report.scenarios,
            strict.stats().hits
        ),
    )
}

fn bootstrap_soundness() -> Verdict {
    let world = toy();
    let lms = BootstrapLms {
        chainer: &ChainerLm,
        summarizer: &SummarizerLm,
    };
    let out = match build_hierarchy(
        &world,
        level1_entries(&world),
        &lms,
        &HashEmbedder::default(),
        &BootstrapConfig::default(),
    ) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("build failed: {e}")),
    };
    let violations = out.db.violations().len();
    let composite: Vec<&SkillEntry> = out.db.entries().filter(|e| e.id.level > 1).collect();
    let ok = composite
        .iter()
        .filter(|e| dry_run(&world, &out.db, &e.semantic).is_ok_and(|o| o.success()))
        .count();
    let m = out.db.max_level();
    verdict(
        violations == 0 && m >= 3 && ok == composite.len(),
        format!(
            "M={m}, {violations} violations, {ok}/{} composite entries dry-run from reset",
            composite.len()
        ),
    )
}

fn invariants(ci: &SuiteOutput) -> Verdict {
    let mut violations = Vec::new();
    let mut steps = 0;
    for r in &ci.runs {
        let Some(t) = &r.trace else {
            violations.push(format!("{}: no trace", r.scenario));
            continue;
        };
        steps += t.steps.len();
        violations.extend(
            t.violations()
                .into_iter()
                .map(|v| format!("{}: {v}", r.scenario)),
        );
        for w in t.steps.windows(2) {
            if w[0].state_after != w[1].state_before {
                violations.push(format!(
                    "{}: state jumps between steps {} and {}",
                    r.scenario, w[0].step, w[1].step
                ));
            }
        }
    }
    verdict(
        violations.is_empty(),
        format!(
            "{} violations over {} traces, {steps} steps{}",
            violations.len(),
            ci.runs.len(),
            violations
                .first()
                .map(|v| format!("; first: {v}"))
                .unwrap_or_default()
        ),
    )
}

fn main() {
    let ci = run_suite(&ci_suite(), &household_harness(), 2, None).expect("ci suite");
    let shift = run_suite(
        &shift_suite(Magnitude::Medium, &Mode::ALL),
        &household_harness(),
        2,
        None,
    )
    .expect("shift suite");
    let degree = run_suite(&degree_suite(), &household_harness(), 2, None).expect("degree suite");

    let results: Vec<(u32, &str, Verdict)> = vec![
        (1, "golden trace replay", golden_replay()),
        (2, "retrieval equals brute force", retrieval_oracle()),
        (3, "database mutation fuzzing", mutation_fuzz()),
        (
            4,
            "ablation trade-off on medium shift",
            shift_trade_off(&shift.report),
        ),
        (
            5,
            "iterations rise with shift degree",
            iteration_trend(&degree.report),
        ),
        (6, "metric fixtures", metric_fixtures()),
        (
            7,
            "CI suite determinism and strict replay",
            determinism(&ci),
        ),
        (8, "bootstrap soundness", bootstrap_soundness()),
        (9, "engine trace invariants", invariants(&ci)),
    ];
    let mut unexpected = 0;
    for (n, name, v) in &results {
        let status = if v.pass { "PASS" } else { "FAIL" };
        let note = if !v.pass && KNOWN_BLOCKERS.contains(n) {
            " (known blocker)"
        } else {
            ""
        };
        println!("criterion {n} {status}{note}: {name}: {}", v.detail);
        if !v.pass && !KNOWN_BLOCKERS.contains(n) {
            unexpected += 1;
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
