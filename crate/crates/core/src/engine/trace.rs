use crate::critic::{Cause, CriticVerdict};
use crate::planner::MatchKind;
use crate::skilldb::SkillId;
use serde::{Deserialize, Serialize};

use super::{EngineConfig, FrameKind};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSnapshot {
    pub instruction: String,
    pub kind: FrameKind,
    pub depth: u32,
    pub history: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub primitives: Vec<String>,
    pub executed: usize,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default)]
    pub truncated: bool,
}

/// Iteration counts. NE verdicts are split by cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCounters {
    pub generated: u32,
    pub executed_ok: u32,
    pub executed_failed: u32,
    pub ne_all: u32,
    pub ne_domain: u32,
    pub ne_observational: u32,
    pub ne_unknown: u32,
}

impl IterationCounters {
    pub fn record_ne(&mut self, cause: Cause) {
        self.ne_all += 1;
        match cause {
            Cause::Domain => self.ne_domain += 1,
            Cause::Observational => self.ne_observational += 1,
            Cause::Unknown => self.ne_unknown += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub frame: FrameSnapshot,
    pub stack_size: usize,
    pub retrieved: Vec<(SkillId, f64)>,
    pub examples: Vec<String>,
    pub candidates: Vec<String>,
    pub lower_candidates: Vec<String>,
    pub generated: String,
    pub raw_output: String,
    pub matched_by: MatchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<CriticVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionRecord>,
    /// Set when this step's execution completed a refinement frame and
    /// control returned to its parent.
    #[serde(default)]
    pub returned_to_parent: bool,
    pub state_before: String,
    pub state_after: String,
    pub counters: IterationCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Iterations,
    StepBudget,
    Depth,
    NoProgress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Done,
    BudgetExhausted { reason: StopReason },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub instruction: String,
    pub config: EngineConfig,
    pub initial_state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFooter {
    pub outcome: Outcome,
    pub counters: IterationCounters,
    pub goals_met: usize,
    pub goals_total: usize,
    pub primitive_attempts: u32,
    pub final_state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingTrace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
    pub footer: TraceFooter,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace has {0} lines; need a header and a footer")]
    Truncated(usize),
    #[error("unsupported trace schema version {0}")]
    Schema(u32),
}

impl GroundingTrace {
    /// Header line, one line per step, footer line.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("step serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.footer).expect("footer serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() < 2 {
            return Err(TraceError::Truncated(lines.len()));
        }
        let err = |line: usize| {
            move |e: serde_json::Error| TraceError::Parse {
                line,
                message: e.to_string(),
            }
        };
        let header: TraceHeader = serde_json::from_str(lines[0]).map_err(err(1))?;
        if header.schema_version != TRACE_SCHEMA_VERSION {
            return Err(TraceError::Schema(header.schema_version));
        }
        let last = lines.len() - 1;
        let steps = lines[1..last]
            .iter()
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(err(i + 2)))
            .collect::<Result<Vec<TraceStep>, _>>()?;
        let footer = serde_json::from_str(lines[last]).map_err(err(last + 1))?;
        Ok(Self {
            header,
            steps,
            footer,
        })
    }

    pub fn trace_hash(&self) -> String {
        crate::sha256_hex(self.to_jsonl().as_bytes())
    }

    pub fn done(&self) -> bool {
        self.footer.outcome == Outcome::Done
    }

    /// Expansions of every skill the agent committed to executing, in order.
    pub fn planned_primitives(&self) -> Vec<String> {
        self.steps
            .iter()
            .filter_map(|s| s.execution.as_ref())
            .flat_map(|e| e.primitives.iter().cloned())
            .collect()
    }

    /// Checks the structural invariants of a grounding trace.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let uses_critic = self.header.config.mode.uses_critic();
        let max_depth = self.header.config.max_depth;
        let mut prev_depth = 0u32;
        for (i, s) in self.steps.iter().enumerate() {
            let id = s.step;
            if let Some(e) = &s.execution {
                if uses_critic && !s.verdict.as_ref().is_some_and(|v| v.is_executable()) {
                    out.push(format!("step {id}: executed without an E verdict"));
                }
                if e.executed == 0 && e.success {
                    out.push(format!("step {id}: success with no executed primitive"));
                }
            } else if s.state_before != s.state_after {
                out.push(format!("step {id}: state changed without execution"));
            }
            if let Some(v) = &s.verdict {
                if !v.is_executable() {
                    let last = i + 1 == self.steps.len();
                    if s.refinement.is_none() && !(last && self.footer.outcome != Outcome::Done) {
                        out.push(format!("step {id}: NE verdict neither refined nor aborted"));
                    }
                    if s.execution.is_some() {
                        out.push(format!("step {id}: executed after an NE verdict"));
                    }
                }
            }
            if s.frame.depth > max_depth {
                out.push(format!(
                    "step {id}: frame depth {} exceeds {max_depth}",
                    s.frame.depth
                ));
            }
            if (s.frame.kind == FrameKind::Root) != (s.frame.depth == 0) {
                out.push(format!("step {id}: frame kind and depth disagree"));
            }
            if s.frame.depth > prev_depth + 1 {
                out.push(format!(
                    "step {id}: frame depth jumped from {prev_depth} to {}",
                    s.frame.depth
                ));
            }
            if s.stack_size < s.frame.depth as usize {
                out.push(format!(
                    "step {id}: refinement frame without its parents on the stack"
                ));
            }
            prev_depth = s.frame.depth;
        }
        out
    }
}
