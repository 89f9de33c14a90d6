//! The grounding loop.
//!
//! Each frame holds an instruction and its own execution history. The loop
//! pops a frame, retrieves skills for it, asks the generator for the next
//! skill and lets the critic judge it. Executable skills run in the
//! environment; blocked ones push the frame back together with a
//! refinement frame built from the critic's feedback. A refinement frame
//! is popped after its first successful execution, and the executed skill
//! is appended to the parent's history.

mod trace;

pub use trace::{
    ExecutionRecord, FrameSnapshot, GroundingTrace, IterationCounters, Outcome, StopReason,
    TraceError, TraceFooter, TraceHeader, TraceStep, TRACE_SCHEMA_VERSION,
};

use crate::critic::{classify_cause, Cause, Critic};
use crate::lmclient::LanguageModel;
use crate::planner::{build_generator_prompt, generate_skill, refine_instruction};
use crate::retriever::{
    derive_candidate_sets, CandidateSets, RetrievalResult, Retriever, DEFAULT_K,
};
use crate::skilldb::SkillDatabase;
use crate::text::normalize;
use crate::worldsim::{Environment, WorldState};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::ops::RangeInclusive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Semgro,
    SgL,
    SgM,
    SgH,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Semgro, Mode::SgL, Mode::SgM, Mode::SgH];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Semgro => "semgro",
            Mode::SgL => "sg_l",
            Mode::SgM => "sg_m",
            Mode::SgH => "sg_h",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn uses_critic(self) -> bool {
        self == Mode::Semgro
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub k: usize,
    pub max_iterations: u32,
    pub max_depth: u32,
    pub mode: Mode,
    pub no_progress_abort: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            max_iterations: 40,
            max_depth: 3,
            mode: Mode::Semgro,
            no_progress_abort: true,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("max_iterations must be at least 1")]
    ZeroIterations,
    #[error("max_depth must be at least 1")]
    ZeroDepth,
    #[error("mode {mode} needs levels {levels:?}, which a {top}-level database does not have")]
    EmptyTier {
        mode: Mode,
        levels: (u32, u32),
        top: u32,
    },
}

impl EngineConfig {
    pub fn validate(&self, db: &SkillDatabase) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(ConfigError::ZeroK);
        }
        if self.max_iterations == 0 {
            return Err(ConfigError::ZeroIterations);
        }
        if self.max_depth == 0 {
            return Err(ConfigError::ZeroDepth);
        }
        retrieval_levels(self.mode, db.max_level()).map(|_| ())
    }
}

/// Which levels a mode retrieves from. Ablations plan over a single tier:
/// SG-L over level-1 skills (plans of retrieved level-2 entries), SG-M over
/// the retrieved skills strictly between level 1 and the top, and SG-H over
/// the retrieved top-level skills.
fn retrieval_levels(mode: Mode, top: u32) -> Result<Option<RangeInclusive<u32>>, ConfigError> {
    let range = match mode {
        Mode::Semgro => return Ok(None),
        Mode::SgL => 2..=2,
        Mode::SgM => 2..=top.saturating_sub(1),
        Mode::SgH => top..=top,
    };
    let valid = match mode {
        Mode::SgH => top >= 1,
        _ => range.start() <= range.end() && *range.end() <= top,
    };
    if valid {
        Ok(Some(range))
    } else {
        Err(ConfigError::EmptyTier {
            mode,
            levels: (*range.start(), *range.end()),
            top,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Root,
    Refinement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionFrame {
    pub instruction: String,
    pub history: Vec<String>,
    pub kind: FrameKind,
    pub depth: u32,
}

impl InstructionFrame {
    pub fn root(instruction: &str) -> Self {
        Self {
            instruction: instruction.to_string(),
            history: Vec::new(),
            kind: FrameKind::Root,
            depth: 0,
        }
    }

    fn refinement(instruction: String, parent: &InstructionFrame) -> Self {
        Self {
            instruction,
            history: Vec::new(),
            kind: FrameKind::Refinement,
            depth: parent.depth + 1,
        }
    }

    fn snapshot(&self) -> FrameSnapshot {
        FrameSnapshot {
            instruction: self.instruction.clone(),
            kind: self.kind,
            depth: self.depth,
            history: self.history.clone(),
        }
    }
}

/// What the loop talks to besides the environment.
pub struct Components<'a> {
    pub retriever: &'a Retriever,
    /// Answers generator and task-retriever prompts.
    pub planner: &'a dyn LanguageModel,
    /// Unused by the ablation modes.
    pub critic: &'a dyn Critic,
    /// Reset state of the training environment, for cause classification.
    /// Without it NE causes are `unknown`.
    pub training_reset: Option<&'a WorldState>,
}

pub type StepCallback<'a> = &'a mut dyn FnMut(&TraceStep);

fn candidate_sets(mode: Mode, result: &RetrievalResult, db: &SkillDatabase) -> CandidateSets {
    if !matches!(mode, Mode::SgM | Mode::SgH) {
        return derive_candidate_sets(result, db);
    }
    let mut sets = CandidateSets::default();
    for s in &result.entries {
        sets.candidates.push(s.entry.semantic.clone());
        sets.examples
            .push((s.entry.semantic.clone(), db.plan_semantics(&s.entry)));
    }
    sets
}

/// Runs the grounding loop for `instruction` until the goals are met or a
/// guard stops it. Errors from the planner or critic end the episode with
/// an `error` outcome; the steps so far are kept.
pub fn ground(
    instruction: &str,
    env: &mut Environment,
    parts: &Components<'_>,
    config: &EngineConfig,
    mut on_step: Option<StepCallback<'_>>,
) -> GroundingTrace {
    let db = parts.retriever.db().clone();
    let header = TraceHeader {
        schema_version: TRACE_SCHEMA_VERSION,
        instruction: instruction.to_string(),
        config: config.clone(),
        initial_state: env.state.state_hash(),
    };
    let mut steps = Vec::new();
    let mut counters = IterationCounters::default();
    let outcome = match config.validate(&db) {
        Err(e) => Outcome::Error {
            message: e.to_string(),
        },
        Ok(()) => run_loop(
            instruction,
            env,
            parts,
            config,
            &db,
            &mut steps,
            &mut counters,
            &mut on_step,
        ),
    };
    GroundingTrace {
        header,
        steps,
        footer: TraceFooter {
            outcome,
            counters,
            goals_met: env.goals_met(),
            goals_total: env.goals.len(),
            primitive_attempts: env.attempts,
            final_state: env.state.state_hash(),
        },
    }
}

/// Ablation entry point: `config.mode` must not be `semgro`.
pub fn run_ablation(
    instruction: &str,
    env: &mut Environment,
    parts: &Components<'_>,
    config: &EngineConfig,
    on_step: Option<StepCallback<'_>>,
) -> GroundingTrace {
    assert!(
        config.mode != Mode::Semgro,
        "run_ablation needs an ablation mode"
    );
    ground(instruction, env, parts, config, on_step)
}

#[allow(clippy::too_many_arguments)]
fn run_loop(
    instruction: &str,
    env: &mut Environment,
    parts: &Components<'_>,
    config: &EngineConfig,
    db: &SkillDatabase,
    steps: &mut Vec<TraceStep>,
    counters: &mut IterationCounters,
    on_step: &mut Option<StepCallback<'_>>,
) -> Outcome {
    let levels = retrieval_levels(config.mode, db.max_level()).expect("validated");
    let embedder = parts.retriever.embedder().clone();
    let target_reset = env.initial.clone();
    let mut stack = vec![InstructionFrame::root(instruction)];
    let mut blocked: HashSet<(String, String)> = HashSet::new();
    let mut iterations = 0u32;

    while let Some(mut frame) = stack.pop() {
        if env.goals_complete() {
            return Outcome::Done;
        }
        if env.attempts >= env.step_budget {
            return Outcome::BudgetExhausted {
                reason: StopReason::StepBudget,
            };
        }
        if iterations >= config.max_iterations {
            return Outcome::BudgetExhausted {
                reason: StopReason::Iterations,
            };
        }
        iterations += 1;

        let state_before = env.state.state_hash();
        let situation = env.state.situation_hash();
        let obs = env.observe();
        let result =
            match parts
                .retriever
                .retrieve_top_k(&frame.instruction, &obs, config.k, levels.clone())
            {
                Ok(r) => r,
                Err(e) => {
                    return Outcome::Error {
                        message: e.to_string(),
                    }
                }
            };
        let sets = candidate_sets(config.mode, &result, db);
        let generated = build_generator_prompt(
            &frame.instruction,
            &frame.history,
            &sets.examples,
            &sets.candidates,
        )
        .and_then(|p| generate_skill(parts.planner, &p, &sets.candidates, embedder.as_ref()));
        let generated = match generated {
            Ok(g) => g,
            Err(e) => {
                return Outcome::Error {
                    message: e.to_string(),
                }
            }
        };
        counters.generated += 1;
        let skill = generated.semantic.clone();

        let mut record = TraceStep {
            step: steps.len(),
            frame: frame.snapshot(),
            stack_size: stack.len(),
            retrieved: result
                .entries
                .iter()
                .map(|s| (s.entry.id, s.score))
                .collect(),
            examples: sets.examples.iter().map(|(s, _)| s.clone()).collect(),
            candidates: sets.candidates.clone(),
            lower_candidates: sets.lower_candidates.clone(),
            generated: skill.clone(),
            raw_output: generated.raw.clone(),
            matched_by: generated.matched_by,
            verdict: None,
            refinement: None,
            execution: None,
            returned_to_parent: false,
            state_before: state_before.clone(),
            state_after: String::new(),
            counters: *counters,
        };

        let verdict = if config.mode.uses_critic() {
            match parts.critic.judge(&env.state, &skill, &sets.candidates) {
                Ok(v) => Some(v),
                Err(e) => {
                    return finish(
                        steps,
                        record,
                        env,
                        counters,
                        on_step,
                        Outcome::Error {
                            message: e.to_string(),
                        },
                    )
                }
            }
        } else {
            None
        };

        let mut stop = None;
        match verdict {
            Some(mut v) if !v.is_executable() => {
                let cause = match parts.training_reset {
                    Some(train) => classify_cause(db, &skill, train, &target_reset),
                    None => Cause::Unknown,
                };
                v.cause = Some(cause);
                counters.record_ne(cause);
                let feedback = v.feedback.clone().unwrap_or_default();
                record.verdict = Some(v);
                let key = (normalize(&skill), situation.clone());
                if config.no_progress_abort && !blocked.insert(key) {
                    stop = Some(Outcome::BudgetExhausted {
                        reason: StopReason::NoProgress,
                    });
                } else if frame.depth >= config.max_depth {
                    stop = Some(Outcome::BudgetExhausted {
                        reason: StopReason::Depth,
                    });
                } else {
                    match refine_instruction(
                        parts.planner,
                        &skill,
                        &feedback,
                        &sets.lower_candidates,
                    ) {
                        Ok(r) => {
                            record.refinement = Some(r.text.clone());
                            let child = InstructionFrame::refinement(r.text, &frame);
                            stack.push(frame);
                            stack.push(child);
                        }
                        Err(e) => {
                            stop = Some(Outcome::Error {
                                message: e.to_string(),
                            })
                        }
                    }
                }
            }
            v => {
                record.verdict = v;
                let out = match env.execute(db, &skill) {
                    Ok(o) => o,
                    Err(e) => {
                        return finish(
                            steps,
                            record,
                            env,
                            counters,
                            on_step,
                            Outcome::Error {
                                message: e.to_string(),
                            },
                        )
                    }
                };
                let success = out.success();
                if success {
                    counters.executed_ok += 1;
                } else {
                    counters.executed_failed += 1;
                }
                record.execution = Some(ExecutionRecord {
                    primitives: out.primitives.iter().map(|p| p.to_string()).collect(),
                    executed: out.executed.len(),
                    success,
                    failure: out
                        .failure
                        .as_ref()
                        .map(|f| format!("{}: {}", f.primitive, f.message)),
                    truncated: out.truncated,
                });
                if success || !config.mode.uses_critic() {
                    frame.history.push(skill.clone());
                }
                if !success
                    && config.no_progress_abort
                    && !blocked.insert((normalize(&skill), situation.clone()))
                {
                    stop = Some(Outcome::BudgetExhausted {
                        reason: StopReason::NoProgress,
                    });
                }
                if success && frame.kind == FrameKind::Refinement {
                    record.returned_to_parent = true;
                    if let Some(parent) = stack.last_mut() {
                        parent.history.push(skill.clone());
                    }
                } else {
                    stack.push(frame);
                }
            }
        }
        record.counters = *counters;
        if let Some(o) = stop {
            return finish(steps, record, env, counters, on_step, o);
        }
        record.state_after = env.state.state_hash();
        if let Some(cb) = on_step.as_mut() {
            cb(&record);
        }
        steps.push(record);
    }
    if env.goals_complete() {
        Outcome::Done
    } else {
        Outcome::BudgetExhausted {
            reason: StopReason::Iterations,
        }
    }
}

fn finish(
    steps: &mut Vec<TraceStep>,
    mut record: TraceStep,
    env: &Environment,
    counters: &IterationCounters,
    on_step: &mut Option<StepCallback<'_>>,
    outcome: Outcome,
) -> Outcome {
    record.counters = *counters;
    record.state_after = env.state.state_hash();
    if let Some(cb) = on_step.as_mut() {
        cb(&record);
    }
    steps.push(record);
    outcome
}
