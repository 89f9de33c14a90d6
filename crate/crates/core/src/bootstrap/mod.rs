//! Bottom-up construction of the skill hierarchy.
//!
//! Starting from level-1 primitives, the agent chains skills of level m-1 in
//! the training world under LM guidance. Successful chains are summarized
//! into level-m semantics, deduplicated against the level, and emitted as
//! database entries together with the observations seen along the way.

pub mod scripted;

pub use scripted::{ChainerLm, SummarizerLm};

use crate::lmclient::{LanguageModel, LmError, Tag};
use crate::planner::prompts::{CHAINER, SUMMARIZER};
use crate::planner::{match_candidate, numbered_steps, ExampleBlock, PromptBundle, PromptTemplate};
use crate::retriever::{cosine, EmbedError, Embedder, Embedding};
use crate::skilldb::{DbError, ObservationRecord, SkillDatabase, SkillEntry, SkillId};
use crate::text::{normalize, normalize_answer};
use crate::worldsim::{expand_semantic, step, CompositeError, StepResult, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Every primitive that makes sense for the objects of `world`.
pub fn primitive_inventory(world: &WorldState) -> Vec<String> {
    let mut out = Vec::new();
    let receptacles: Vec<&String> = world
        .objects
        .iter()
        .filter(|(_, o)| o.properties.is_receptacle())
        .map(|(n, _)| n)
        .collect();
    for (name, o) in &world.objects {
        out.push(format!("walk {name}"));
        out.push(format!("find {name}"));
        let p = &o.properties;
        if p.graspable {
            out.push(format!("grab {name}"));
            out.extend(receptacles.iter().map(|r| format!("put {name} {r}")));
        }
        if p.openable {
            out.push(format!("open {name}"));
            out.push(format!("close {name}"));
        }
        if p.switchable {
            out.push(format!("switchon {name}"));
            out.push(format!("switchoff {name}"));
        }
        if p.sittable {
            out.push(format!("sit {name}"));
        }
    }
    out
}

/// Level-1 entries for every primitive of `world`. Object names are the
/// labels in view from the room of the skill's object.
pub fn level1_entries(world: &WorldState) -> Vec<SkillEntry> {
    primitive_inventory(world)
        .into_iter()
        .enumerate()
        .map(|(i, semantic)| {
            let mut view = world.clone();
            let object = semantic.split(' ').nth(1).unwrap_or_default();
            if let Some(room) = world.objects.get(object).and_then(|o| o.room.clone()) {
                view.agent.room = room;
            }
            SkillEntry {
                id: SkillId::new(1, i as u32),
                semantic,
                object_names: view.observe().object_names,
                plan: Vec::new(),
            }
        })
        .collect()
}

/// One chaining rollout from the training reset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEpisode {
    pub episode: u32,
    pub level: u32,
    pub start_skill: String,
    /// Skills in the order they ran; a failed skill is the last one.
    pub steps: Vec<String>,
    pub success: bool,
    /// `step` numbers of this episode's observation records.
    pub observations: Vec<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum BootstrapError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("no level-{0} skills to chain")]
    EmptySkillSet(u32),
    #[error("summary is empty")]
    EmptySummary,
    #[error("summary {0:?} repeats one of its steps")]
    DegenerateSummary(String),
    #[error("cannot summarize an episode that failed or has fewer than two steps")]
    NotSummarizable,
    #[error("level {level}: {episodes} episodes produced no entry")]
    EmptyLevel { level: u32, episodes: u32 },
    #[error("invalid bootstrap configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Composite(#[from] CompositeError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Db(#[from] DbError),
}

fn template(id: &str) -> &'static PromptTemplate {
    PromptTemplate::get(id).expect("bundled template")
}

fn example_blocks(examples: &[(String, Vec<String>)]) -> Vec<ExampleBlock> {
    examples
        .iter()
        .map(|(task, steps)| ExampleBlock {
            library: String::new(),
            task: task.clone(),
            steps: numbered_steps(steps, false),
        })
        .collect()
}

pub fn build_chain_prompt(
    library: &[String],
    history: &[String],
    examples: &[(String, Vec<String>)],
) -> PromptBundle {
    let t = template(CHAINER);
    PromptBundle {
        template_id: t.id.to_string(),
        system_preamble: t.preamble.clone(),
        example_blocks: example_blocks(examples),
        query_block: PromptTemplate::fill(
            &t.query,
            &[
                ("library", Some(&library.join(", "))),
                ("history", Some(&numbered_steps(history, true))),
            ],
        ),
        temperature: 0.0,
        max_tokens: 64,
    }
}

pub fn build_summary_prompt(steps: &[String], examples: &[(String, Vec<String>)]) -> PromptBundle {
    let t = template(SUMMARIZER);
    PromptBundle {
        template_id: t.id.to_string(),
        system_preamble: t.preamble.clone(),
        example_blocks: example_blocks(examples),
        query_block: PromptTemplate::fill(
            &t.query,
            &[("history", Some(&numbered_steps(steps, false)))],
        ),
        temperature: 0.0,
        max_tokens: 64,
    }
}

/// Everything a chaining rollout needs besides the LM.
pub struct ChainContext<'a> {
    pub world: &'a WorldState,
    pub db: &'a SkillDatabase,
    /// Level of the skills being chained.
    pub level: u32,
    pub embedder: &'a dyn Embedder,
    /// In-context (task, steps) pairs for the chaining prompt.
    pub examples: &'a [(String, Vec<String>)],
}

/// Runs `semantic` from `state` primitive by primitive, recording what is
/// in view after each one. Returns whether every primitive succeeded.
fn run_recorded(
    state: &mut WorldState,
    db: &SkillDatabase,
    semantic: &str,
    episode: u32,
    records: &mut Vec<ObservationRecord>,
) -> Result<bool, CompositeError> {
    for prim in expand_semantic(db, semantic)? {
        let success = match step(state, &prim) {
            StepResult::Success(next) => {
                *state = next;
                true
            }
            StepResult::Failure(_) => false,
        };
        let obs = state.observe();
        records.push(ObservationRecord {
            episode,
            step: records.len() as u32,
            action: prim.to_string(),
            object_states: obs.state_lines(),
            object_names: obs.object_names.into_iter().collect(),
            success,
        });
        if !success {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Executes a seeded initial skill of `ctx.level`, then repeatedly asks the
/// LM for the next one from the same level. Stops after `max_steps` skills,
/// at the first failure, or when the answer names no library skill.
pub fn chain_skills(
    ctx: &ChainContext<'_>,
    lm: &dyn LanguageModel,
    max_steps: usize,
    seed: u64,
    episode: u32,
) -> Result<(ChainEpisode, Vec<ObservationRecord>), BootstrapError> {
    let library: Vec<String> = ctx
        .db
        .level(ctx.level)
        .map(|e| e.semantic.clone())
        .collect();
    if library.is_empty() {
        return Err(BootstrapError::EmptySkillSet(ctx.level));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = library[rng.gen_range(0..library.len())].clone();
    let mut state = ctx.world.clone();
    let mut records = Vec::new();
    let mut steps = vec![start.clone()];
    let mut success = run_recorded(&mut state, ctx.db, &start, episode, &mut records)?;
    while success && steps.len() < max_steps {
        let prompt = build_chain_prompt(&library, &steps, ctx.examples);
        let raw = lm.complete(&prompt.request(Tag::Chainer))?;
        let Some((next, _)) = match_candidate(&raw, &library, ctx.embedder) else {
            log::debug!(
                "chainer answer {raw:?} names no level-{} skill; ending chain",
                ctx.level
            );
            break;
        };
        success = run_recorded(&mut state, ctx.db, &next, episode, &mut records)?;
        steps.push(next);
    }
    let observations = records.iter().map(|r| r.step).collect();
    Ok((
        ChainEpisode {
            episode,
            level: ctx.level,
            start_skill: start,
            steps,
            success,
            observations,
        },
        records,
    ))
}

/// Asks the LM for a higher-level description of a successful episode.
pub fn summarize_chain(
    lm: &dyn LanguageModel,
    episode: &ChainEpisode,
    examples: &[(String, Vec<String>)],
) -> Result<String, BootstrapError> {
    if !episode.success || episode.steps.len() < 2 {
        return Err(BootstrapError::NotSummarizable);
    }
    let prompt = build_summary_prompt(&episode.steps, examples);
    let raw = lm.complete(&prompt.request(Tag::Summarizer))?;
    let line = raw
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let summary = normalize_answer(line.strip_prefix("Summary:").unwrap_or(line));
    if summary.is_empty() {
        return Err(BootstrapError::EmptySummary);
    }
    if episode.steps.iter().any(|s| normalize(s) == summary) {
        return Err(BootstrapError::DegenerateSummary(summary));
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Highest level to build (M).
    pub levels: u32,
    /// Chaining episodes per level.
    pub episodes_per_level: u32,
    pub max_steps: usize,
    pub seed: u64,
    /// Cosine at or above which a summary duplicates a same-level semantic.
    pub dedup_threshold: f64,
    /// In-context examples per prompt, taken from entries already emitted
    /// at the level being built.
    pub examples: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            episodes_per_level: 40,
            max_steps: 4,
            seed: 0,
            dedup_threshold: 0.95,
            examples: 2,
        }
    }
}

/// The LMs that guide chaining and summarization.
pub struct BootstrapLms<'a> {
    pub chainer: &'a dyn LanguageModel,
    pub summarizer: &'a dyn LanguageModel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: u32,
    pub episodes: u32,
    pub successful: u32,
    pub too_short: u32,
    pub rejected_summaries: u32,
    pub duplicates: u32,
    pub entries: u32,
}

/// Provenance of a build: inputs, backends, per-level yield and the
/// procedural choices that a reader may want to compare against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildManifest {
    pub world: String,
    pub config: BootstrapConfig,
    pub chainer: String,
    pub summarizer: String,
    pub embedder: String,
    pub levels: Vec<LevelReport>,
    pub choices: Vec<String>,
    pub db_digest: String,
    pub observations: usize,
}

const CHOICES: &[&str] = &[
    "each episode starts from the training reset with a seeded initial skill",
    "a failed episode is discarded whole; no successful prefix is kept",
    "chains shorter than two skills are discarded",
    "object names of a new entry are the union over its episode's observations",
    "summaries within the dedup threshold of a same-level semantic are dropped",
];

#[derive(Debug, Clone)]
pub struct BootstrapOutput {
    pub db: SkillDatabase,
    pub observations: Vec<ObservationRecord>,
    pub episodes: Vec<ChainEpisode>,
    pub manifest: BuildManifest,
}

fn episode_seed(seed: u64, level: u32, episode: u32) -> u64 {
    seed ^ (u64::from(level) << 48) ^ u64::from(episode).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Builds levels 2..=M by chaining the level below. Episodes run in order
/// and each successful one is merged before the next starts.
pub fn build_hierarchy(
    world: &WorldState,
    level1: Vec<SkillEntry>,
    lms: &BootstrapLms<'_>,
    embedder: &dyn Embedder,
    config: &BootstrapConfig,
) -> Result<BootstrapOutput, BootstrapError> {
    if config.levels < 2 {
        return Err(BootstrapError::Config(format!(
            "levels must be at least 2, got {}",
            config.levels
        )));
    }
    if config.max_steps < 2 {
        return Err(BootstrapError::Config(
            "max_steps must be at least 2".into(),
        ));
    }
    if level1.is_empty() {
        return Err(BootstrapError::EmptySkillSet(1));
    }
    let mut entries = level1;
    let mut db = SkillDatabase::new(entries.clone())?;
    let mut observations = Vec::new();
    let mut episodes = Vec::new();
    let mut reports = Vec::new();
    let mut next_episode = 0u32;
    for level in 2..=config.levels {
        let mut report = LevelReport {
            level,
            ..Default::default()
        };
        let mut semantics: BTreeSet<String> =
            entries.iter().map(|e| normalize(&e.semantic)).collect();
        let mut level_vecs: Vec<Embedding> = Vec::new();
        let mut emitted: Vec<(String, Vec<String>)> = Vec::new();
        for _ in 0..config.episodes_per_level {
            let episode = next_episode;
            next_episode += 1;
            report.episodes += 1;
            let examples: Vec<(String, Vec<String>)> = emitted
                .iter()
                .rev()
                .take(config.examples)
                .rev()
                .cloned()
                .collect();
            let ctx = ChainContext {
                world,
                db: &db,
                level: level - 1,
                embedder,
                examples: &examples,
            };
            let seed = episode_seed(config.seed, level, episode);
            let (ep, records) = chain_skills(&ctx, lms.chainer, config.max_steps, seed, episode)?;
            let names: BTreeSet<String> = records
                .iter()
                .flat_map(|r| r.object_names.iter().cloned())
                .collect();
            observations.extend(records);
            let accepted = if !ep.success {
                None
            } else if ep.steps.len() < 2 {
                report.successful += 1;
                report.too_short += 1;
                None
            } else {
                report.successful += 1;
                match summarize_chain(lms.summarizer, &ep, &examples) {
                    Ok(s) => Some(s),
                    Err(BootstrapError::EmptySummary | BootstrapError::DegenerateSummary(_)) => {
                        report.rejected_summaries += 1;
                        None
                    }
                    Err(e) => return Err(e),
                }
            };
            if let Some(summary) = accepted {
                let v = embedder.embed(&summary)?;
                let dup = semantics.contains(&summary)
                    || level_vecs
                        .iter()
                        .any(|u| cosine(u, &v) >= config.dedup_threshold);
                if dup {
                    report.duplicates += 1;
                } else {
                    let plan = ep
                        .steps
                        .iter()
                        .map(|s| {
                            db.find_semantic(s)
                                .map(|e| e.id)
                                .expect("chained skills come from the database")
                        })
                        .collect();
                    entries.push(SkillEntry {
                        id: SkillId::new(level, report.entries),
                        semantic: summary.clone(),
                        object_names: names,
                        plan,
                    });
                    db = SkillDatabase::new(entries.clone())?;
                    semantics.insert(summary.clone());
                    level_vecs.push(v);
                    emitted.push((summary, ep.steps.clone()));
                    report.entries += 1;
                }
            }
            episodes.push(ep);
        }
        if report.entries == 0 {
            return Err(BootstrapError::EmptyLevel {
                level,
                episodes: report.episodes,
            });
        }
        log::info!(
            "level {level}: {} entries from {} episodes ({} successful, {} duplicates)",
            report.entries,
            report.episodes,
            report.successful,
            report.duplicates
        );
        reports.push(report);
    }
    let manifest = BuildManifest {
        world: world.name.clone(),
        config: config.clone(),
        chainer: lms.chainer.id(),
        summarizer: lms.summarizer.id(),
        embedder: embedder.id(),
        levels: reports,
        choices: CHOICES.iter().map(|s| s.to_string()).collect(),
        db_digest: crate::sha256_hex(db.to_jsonl().as_bytes()),
        observations: observations.len(),
    };
    Ok(BootstrapOutput {
        db,
        observations,
        episodes,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worlds::WorldBuilder;
    use crate::fixtures::{record, Curriculum};
    use crate::lmclient::{FnLm, Rule, ScriptedLm};
    use crate::retriever::HashEmbedder;

    fn dish_world() -> WorldState {
        let k = "kitchen";
        WorldBuilder::new("dishes", &[k], k)
            .obj("counter", "furniture", k, None, "s")
            .obj("sink", "furniture", k, None, "c")
            .obj("plate", "dish", k, Some("counter"), "g")
            .obj("mug", "dish", k, Some("counter"), "g")
            .build()
    }

    fn dish_db(world: &WorldState) -> SkillDatabase {
        let mut c = Curriculum {
            primitives: primitive_inventory(world),
            ..Default::default()
        };
        for (name, x) in [("wash the plate", "plate"), ("wash mug", "mug")] {
            let plan = [
                format!("walk {x}"),
                format!("grab {x}"),
                "walk sink".into(),
                format!("put {x} sink"),
            ];
            c.add_owned(2, name, plan.to_vec());
        }
        record(world, &c, true).unwrap()
    }

    fn always(id: &str, tag: Tag, answer: &str) -> ScriptedLm {
        ScriptedLm::new(id, vec![Rule::new(Some(tag), "", answer).unwrap()])
    }

    #[test]
    fn chains_plate_then_mug() {
        let world = dish_world();
        let db = dish_db(&world);
        let emb = HashEmbedder::default();
        let ctx = ChainContext {
            world: &world,
            db: &db,
            level: 2,
            embedder: &emb,
            examples: &[],
        };
        let lm = always("mug", Tag::Chainer, "wash mug");
        let seed = (0..).find(|s| {
            let (ep, _) = chain_skills(&ctx, &lm, 1, *s, 0).unwrap();
            ep.start_skill == "wash the plate"
        });
        let (ep, records) = chain_skills(&ctx, &lm, 2, seed.unwrap(), 7).unwrap();
        assert_eq!(ep.steps, ["wash the plate", "wash mug"]);
        assert!(ep.success);
        assert_eq!(records.len(), 8);
        assert!(records.iter().all(|r| r.episode == 7 && r.success));
        assert_eq!(ep.observations, (0..8).collect::<Vec<u32>>());
    }

    #[test]
    fn failed_first_step_ends_episode() {
        let world = dish_world();
        let mut entries = level1_entries(&world);
        entries.retain(|e| e.semantic == "put plate sink");
        entries[0].id = SkillId::new(1, 0);
        let db = SkillDatabase::new(entries).unwrap();
        let emb = HashEmbedder::default();
        let ctx = ChainContext {
            world: &world,
            db: &db,
            level: 1,
            embedder: &emb,
            examples: &[],
        };
        let lm = always("any", Tag::Chainer, "put plate sink");
        let (ep, records) = chain_skills(&ctx, &lm, 5, 0, 0).unwrap();
        assert_eq!(ep.steps.len(), 1);
        assert!(!ep.success);
        assert_eq!(records.len(), 1);
        assert!(!records[0].success);
    }

    #[test]
    fn max_steps_one_never_asks_the_lm() {
        let world = dish_world();
        let db = dish_db(&world);
        let emb = HashEmbedder::default();
        let ctx = ChainContext {
            world: &world,
            db: &db,
            level: 2,
            embedder: &emb,
            examples: &[],
        };
        let lm = FnLm::new(
            "unreachable",
            |_: &crate::lmclient::CompletionRequest| -> Result<String, LmError> {
                panic!("LM called")
            },
        );
        let (ep, _) = chain_skills(&ctx, &lm, 1, 3, 0).unwrap();
        assert_eq!(ep.steps.len(), 1);
    }

    #[test]
    fn empty_level_is_an_error() {
        let world = dish_world();
        let db = SkillDatabase::new(level1_entries(&world)).unwrap();
        let emb = HashEmbedder::default();
        let ctx = ChainContext {
            world: &world,
            db: &db,
            level: 2,
            embedder: &emb,
            examples: &[],
        };
        let err = chain_skills(&ctx, &ChainerLm, 3, 0, 0).unwrap_err();
        assert!(matches!(err, BootstrapError::EmptySkillSet(2)));
    }

    fn episode(steps: &[&str]) -> ChainEpisode {
        ChainEpisode {
            episode: 0,
            level: 2,
            start_skill: steps[0].into(),
            steps: steps.iter().map(|s| s.to_string()).collect(),
            success: true,
            observations: vec![],
        }
    }

    #[test]
    fn scripted_summaries_factor_shared_verbs() {
        let ep = episode(&["wash the plate", "wash mug"]);
        assert_eq!(
            summarize_chain(&SummarizerLm, &ep, &[]).unwrap(),
            "wash the plate and mug"
        );
        let ep = episode(&["throw away apple", "throw away the lime"]);
        assert_eq!(
            summarize_chain(&SummarizerLm, &ep, &[]).unwrap(),
            "throw away apple and lime"
        );
    }

    #[test]
    fn joining_summarizer_is_deterministic() {
        let join = FnLm::new("join", |req: &crate::lmclient::CompletionRequest| {
            let line = req
                .prompt
                .lines()
                .rev()
                .find_map(|l| l.strip_prefix("Skill Steps:"))
                .unwrap();
            Ok(scripted::parse_numbered(line).join(" and "))
        });
        let ep = episode(&["open fridge", "grab milk"]);
        let a = summarize_chain(&join, &ep, &[]).unwrap();
        assert_eq!(a, "open fridge and grab milk");
        assert_eq!(summarize_chain(&join, &ep, &[]).unwrap(), a);
    }

    #[test]
    fn summaries_that_repeat_a_step_are_rejected() {
        let ep = episode(&["open fridge", "grab milk"]);
        let lm = always("echo", Tag::Summarizer, "Open fridge.");
        assert!(matches!(
            summarize_chain(&lm, &ep, &[]),
            Err(BootstrapError::DegenerateSummary(_))
        ));
        let lm = FnLm::new("blank", |_: &crate::lmclient::CompletionRequest| {
            Ok("  ".to_string())
        });
        assert!(matches!(
            summarize_chain(&lm, &ep, &[]),
            Err(BootstrapError::EmptySummary)
        ));
        let short = episode(&["open fridge"]);
        assert!(matches!(
            summarize_chain(&SummarizerLm, &short, &[]),
            Err(BootstrapError::NotSummarizable)
        ));
    }

    fn two_step_world_entries(world: &WorldState) -> Vec<SkillEntry> {
        let mut v: Vec<SkillEntry> = level1_entries(world)
            .into_iter()
            .filter(|e| e.semantic == "walk plate" || e.semantic == "find mug")
            .collect();
        for (i, e) in v.iter_mut().enumerate() {
            e.id = SkillId::new(1, i as u32);
        }
        v
    }

    fn other_of_two(
    ) -> FnLm<impl Fn(&crate::lmclient::CompletionRequest) -> Result<String, LmError> + Send + Sync>
    {
        FnLm::new("other", |req: &crate::lmclient::CompletionRequest| {
            let line = req
                .prompt
                .lines()
                .rev()
                .find_map(|l| l.strip_prefix("Skill Steps:"))
                .unwrap();
            let done = scripted::parse_numbered(line);
            Ok(if done.iter().any(|s| s == "walk plate") {
                "find mug"
            } else {
                "walk plate"
            }
            .to_string())
        })
    }

    #[test]
    fn single_guaranteed_chain_yields_one_replayable_entry() {
        let world = dish_world();
        let chainer = other_of_two();
        let lms = BootstrapLms {
            chainer: &chainer,
            summarizer: &SummarizerLm,
        };
        let config = BootstrapConfig {
            levels: 2,
            episodes_per_level: 1,
            max_steps: 2,
            ..Default::default()
        };
        let out = build_hierarchy(
            &world,
            two_step_world_entries(&world),
            &lms,
            &HashEmbedder::default(),
            &config,
        )
        .unwrap();
        let level2: Vec<&SkillEntry> = out.db.level(2).collect();
        assert_eq!(level2.len(), 1);
        assert!(out.db.violations().is_empty());
        let outcome = crate::worldsim::dry_run(&world, &out.db, &level2[0].semantic).unwrap();
        assert!(outcome.success());
        assert_eq!(out.manifest.levels[0].entries, 1);
    }

    #[test]
    fn duplicate_summaries_keep_one_entry() {
        let world = dish_world();
        let chainer = other_of_two();
        let summarizer = always("fixed", Tag::Summarizer, "look around the kitchen");
        let lms = BootstrapLms {
            chainer: &chainer,
            summarizer: &summarizer,
        };
        let config = BootstrapConfig {
            levels: 2,
            episodes_per_level: 4,
            max_steps: 2,
            ..Default::default()
        };
        let out = build_hierarchy(
            &world,
            two_step_world_entries(&world),
            &lms,
            &HashEmbedder::default(),
            &config,
        )
        .unwrap();
        assert_eq!(out.db.level(2).count(), 1);
        assert_eq!(out.manifest.levels[0].duplicates, 3);
    }

    #[test]
    fn config_is_checked() {
        let world = dish_world();
        let lms = BootstrapLms {
            chainer: &ChainerLm,
            summarizer: &SummarizerLm,
        };
        let bad = BootstrapConfig {
            levels: 1,
            ..Default::default()
        };
        let err = build_hierarchy(
            &world,
            level1_entries(&world),
            &lms,
            &HashEmbedder::default(),
            &bad,
        )
        .unwrap_err();
        assert!(matches!(err, BootstrapError::Config(_)));
    }

    #[test]
    fn empty_level_is_reported() {
        let world = dish_world();
        let lms = BootstrapLms {
            chainer: &ChainerLm,
            summarizer: &SummarizerLm,
        };
        let mut entries = level1_entries(&world);
        entries.retain(|e| e.semantic == "put plate sink");
        entries[0].id = SkillId::new(1, 0);
        let config = BootstrapConfig {
            levels: 2,
            episodes_per_level: 3,
            ..Default::default()
        };
        let err =
            build_hierarchy(&world, entries, &lms, &HashEmbedder::default(), &config).unwrap_err();
        assert!(matches!(
            err,
            BootstrapError::EmptyLevel {
                level: 2,
                episodes: 3
            }
        ));
    }
}
