//! Expansion of composite skills to primitives and their execution.

use super::actions::{step, PrimitiveError, SkillPrimitive, StepFailure, StepResult};
use super::WorldState;
use crate::skilldb::SkillDatabase;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CompositeError {
    #[error("{semantic:?} is neither a database skill nor a primitive ({source})")]
    UnknownSemantic {
        semantic: String,
        source: PrimitiveError,
    },
    #[error("plan of {0:?} references a missing entry")]
    BrokenPlan(String),
}

/// Result of running a skill's primitive expansion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeOutcome {
    /// The full expansion that was planned.
    pub primitives: Vec<SkillPrimitive>,
    /// The prefix that ran successfully.
    pub executed: Vec<SkillPrimitive>,
    pub failure: Option<StepFailure>,
    /// Set when the step budget cut the expansion short.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

impl CompositeOutcome {
    pub fn success(&self) -> bool {
        self.failure.is_none() && !self.truncated
    }

    pub fn attempted(&self) -> usize {
        self.executed.len() + usize::from(self.failure.is_some())
    }
}

/// Expands a skill to level-1 primitives through the database plans. Text
/// that is not in the database is parsed as a primitive.
pub fn expand_semantic(
    db: &SkillDatabase,
    semantic: &str,
) -> Result<Vec<SkillPrimitive>, CompositeError> {
    match db.find_semantic(semantic) {
        Some(entry) if entry.plan.is_empty() => SkillPrimitive::parse(&entry.semantic)
            .map(|p| vec![p])
            .map_err(|source| CompositeError::UnknownSemantic {
                semantic: semantic.to_string(),
                source,
            }),
        Some(entry) => {
            let mut out = Vec::new();
            for id in &entry.plan {
                let child = db
                    .get(*id)
                    .ok_or_else(|| CompositeError::BrokenPlan(entry.semantic.clone()))?;
                out.extend(expand_semantic(db, &child.semantic)?);
            }
            Ok(out)
        }
        None => SkillPrimitive::parse(semantic)
            .map(|p| vec![p])
            .map_err(|source| CompositeError::UnknownSemantic {
                semantic: semantic.to_string(),
                source,
            }),
    }
}

/// Runs primitives in order, stopping at the first failure. Effects of the
/// primitives before the failure persist.
pub fn run_primitives(
    state: &WorldState,
    prims: &[SkillPrimitive],
) -> (WorldState, CompositeOutcome) {
    let mut cur = state.clone();
    let mut executed = Vec::new();
    let mut failure = None;
    for p in prims {
        match step(&cur, p) {
            StepResult::Success(next) => {
                cur = next;
                executed.push(p.clone());
            }
            StepResult::Failure(f) => {
                failure = Some(f);
                break;
            }
        }
    }
    let outcome = CompositeOutcome {
        primitives: prims.to_vec(),
        executed,
        failure,
        truncated: false,
    };
    (cur, outcome)
}

pub fn execute_composite(
    state: &WorldState,
    db: &SkillDatabase,
    semantic: &str,
) -> Result<(WorldState, CompositeOutcome), CompositeError> {
    let prims = expand_semantic(db, semantic)?;
    Ok(run_primitives(state, &prims))
}

/// Simulates a skill on a copy of the state.
pub fn dry_run(
    state: &WorldState,
    db: &SkillDatabase,
    semantic: &str,
) -> Result<CompositeOutcome, CompositeError> {
    execute_composite(state, db, semantic).map(|(_, o)| o)
}

const REMEDY_DEPTH: usize = 4;

/// Reference grounding of `semantic` from `state`: run a skill whole when it
/// dry-runs cleanly, otherwise descend into its plan, and at the primitive
/// level insert the remedy for the failure before retrying. Returns the
/// primitive sequence and whether it reached the end of the skill.
pub fn ground_truth_plan(
    state: &WorldState,
    db: &SkillDatabase,
    semantic: &str,
) -> Result<(Vec<SkillPrimitive>, bool), CompositeError> {
    let mut cur = state.clone();
    let mut out = Vec::new();
    let complete = ground_into(&mut cur, db, semantic, &mut out, 0)?;
    Ok((out, complete))
}

fn ground_into(
    state: &mut WorldState,
    db: &SkillDatabase,
    semantic: &str,
    out: &mut Vec<SkillPrimitive>,
    depth: usize,
) -> Result<bool, CompositeError> {
    let (next, outcome) = execute_composite(state, db, semantic)?;
    let Some(failure) = outcome.failure else {
        *state = next;
        out.extend(outcome.primitives);
        return Ok(true);
    };
    if let Some(entry) = db.find_semantic(semantic).filter(|e| !e.plan.is_empty()) {
        let children: Vec<String> = entry
            .plan
            .iter()
            .filter_map(|id| db.get(*id).map(|e| e.semantic.clone()))
            .collect();
        for child in children {
            if !ground_into(state, db, &child, out, depth)? {
                return Ok(false);
            }
        }
        return Ok(true);
    }
    if failure.reason.already_satisfied() {
        return Ok(true);
    }
    let remedy = failure.reason.remedy();
    if remedy.is_empty() || depth >= REMEDY_DEPTH {
        return Ok(false);
    }
    for r in remedy {
        if !ground_into(state, db, &r.to_string(), out, depth + 1)? {
            return Ok(false);
        }
    }
    ground_into(state, db, semantic, out, depth + 1)
}
