//! Two-stage skill critic: perception of the current observation, then a
//! judgment of whether a skill can run now. The simulator oracle stands in
//! for both stages in offline runs.

use crate::lmclient::{LanguageModel, LmError, Tag};
use crate::planner::prompts::{self, PromptTemplate};
use crate::planner::PromptBundle;
use crate::skilldb::SkillDatabase;
use crate::worldsim::{dry_run, CompositeError, Observation, WorldState};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Duration;

/// Visible object names and their states.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perception {
    pub object_names: BTreeSet<String>,
    pub object_states: BTreeMap<String, String>,
}

impl Perception {
    pub fn from_observation(obs: &Observation) -> Self {
        Self {
            object_names: obs.object_names.clone(),
            object_states: obs
                .object_states
                .iter()
                .map(|(k, v)| (k.clone(), v.as_str().to_string()))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), CriticError> {
        match self
            .object_states
            .keys()
            .find(|k| !self.object_names.contains(*k))
        {
            Some(k) => Err(CriticError::InvalidPerception(format!(
                "state reported for unseen object {k:?}"
            ))),
            None => Ok(()),
        }
    }

    /// "fridge is OPEN" lines in name order.
    pub fn state_lines(&self) -> Vec<String> {
        self.object_states
            .iter()
            .map(|(k, v)| format!("{k} is {v}"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictTag {
    E,
    NE,
}

/// Why a skill was judged not executable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cause {
    Observational,
    Domain,
    Unknown,
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cause::Observational => "observational",
            Cause::Domain => "domain",
            Cause::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticVerdict {
    pub tag: VerdictTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<Cause>,
}

impl CriticVerdict {
    pub fn executable() -> Self {
        Self {
            tag: VerdictTag::E,
            feedback: None,
            cause: None,
        }
    }

    pub fn not_executable(feedback: impl Into<String>) -> Self {
        Self {
            tag: VerdictTag::NE,
            feedback: Some(feedback.into()),
            cause: None,
        }
    }

    pub fn is_executable(&self) -> bool {
        self.tag == VerdictTag::E
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CriticError {
    #[error("skill text is empty")]
    EmptySkill,
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("critic output is not in the two-line verdict format: {raw:?}")]
    Unparseable { raw: String },
    #[error(transparent)]
    UnknownSkill(#[from] CompositeError),
    #[error("perception backend returned an invalid perception: {0}")]
    InvalidPerception(String),
    #[error("perception backend: {0}")]
    Transport(String),
}

/// Source of perceptions for a world snapshot.
pub trait PerceptionBackend: Send + Sync {
    fn id(&self) -> String;
    fn perceive(&self, state: &WorldState) -> Result<Perception, CriticError>;
}

/// Reads the simulator's visible objects verbatim.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePerception;

impl PerceptionBackend for OraclePerception {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn perceive(&self, state: &WorldState) -> Result<Perception, CriticError> {
        Ok(Perception::from_observation(&state.observe()))
    }
}

/// Remote perception service. Sends `{"snapshot_id", "state"}` and expects
/// `{"object_names": [...], "object_states": {...}}` back.
pub struct HttpPerception {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpPerception {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        Self {
            endpoint: endpoint.to_string(),
            agent: config.into(),
        }
    }
}

impl PerceptionBackend for HttpPerception {
    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn perceive(&self, state: &WorldState) -> Result<Perception, CriticError> {
        let body = serde_json::json!({ "snapshot_id": state.state_hash(), "state": state });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(body)
            .map_err(|e| CriticError::Transport(e.to_string()))?;
        let p: Perception = resp
            .body_mut()
            .read_json()
            .map_err(|e| CriticError::Transport(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

pub fn perceive(
    state: &WorldState,
    backend: &dyn PerceptionBackend,
) -> Result<Perception, CriticError> {
    backend.perceive(state)
}

pub fn build_critic_prompt(
    skill: &str,
    perception: &Perception,
    low_level: &[String],
) -> PromptBundle {
    let t = PromptTemplate::get(prompts::CRITIC).expect("critic template");
    let objects = perception
        .object_names
        .iter()
        .cloned()
        .collect::<Vec<_>>()
        .join(", ");
    let states = perception.state_lines().join(", ");
    let low = low_level.join(", ");
    let query_block = PromptTemplate::fill(
        &t.query,
        &[
            ("objects", Some(&objects)),
            ("states", Some(&states)),
            ("low_level", (!low.is_empty()).then_some(low.as_str())),
            ("skill", Some(skill)),
        ],
    );
    PromptBundle {
        template_id: t.id.to_string(),
        system_preamble: t.preamble.clone(),
        example_blocks: Vec::new(),
        query_block,
        temperature: 0.0,
        max_tokens: 96,
    }
}

/// Parses the two-line verdict:
///
/// ```text
/// Executable: yes|no
/// Feedback: <text>
/// ```
///
/// For `yes` the feedback must be empty, `none` or `-`. For `no` it must be
/// a non-empty sentence.
pub fn parse_verdict(text: &str) -> Option<CriticVerdict> {
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let [first, second] = lines.as_slice() else {
        return None;
    };
    let answer = strip_key(first, "executable")?.to_ascii_lowercase();
    let feedback = strip_key(second, "feedback")?;
    let blank = feedback.is_empty() || feedback.eq_ignore_ascii_case("none") || feedback == "-";
    match answer.as_str() {
        "yes" if blank => Some(CriticVerdict::executable()),
        "no" if !blank => Some(CriticVerdict::not_executable(feedback)),
        _ => None,
    }
}

fn strip_key<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let (k, v) = line.split_once(':')?;
    k.trim().eq_ignore_ascii_case(key).then(|| v.trim())
}

/// Asks the LM for a verdict, retrying once on malformed output.
pub fn judge(
    lm: &dyn LanguageModel,
    skill: &str,
    perception: &Perception,
    low_level: &[String],
) -> Result<CriticVerdict, CriticError> {
    if skill.trim().is_empty() {
        return Err(CriticError::EmptySkill);
    }
    let bundle = build_critic_prompt(skill, perception, low_level);
    let mut req = bundle.request(Tag::Critic);
    let raw = lm.complete(&req)?;
    if let Some(v) = parse_verdict(&raw) {
        return Ok(v);
    }
    req.prompt.push_str("\nReply with the two lines only.");
    let raw = lm.complete(&req)?;
    parse_verdict(&raw).ok_or(CriticError::Unparseable { raw })
}

/// Ground-truth verdict: dry-runs the skill's expansion on a copy of
/// `state`. Feedback describes the first failed primitive.
pub fn oracle_judge(
    state: &WorldState,
    db: &SkillDatabase,
    skill: &str,
) -> Result<CriticVerdict, CriticError> {
    if skill.trim().is_empty() {
        return Err(CriticError::EmptySkill);
    }
    let outcome = dry_run(state, db, skill)?;
    Ok(match outcome.failure {
        None => CriticVerdict::executable(),
        Some(f) => CriticVerdict::not_executable(f.message),
    })
}

/// A skill blocked in the target world is a domain failure when it fails
/// from the target's reset state but runs from the training reset state.
pub fn classify_cause(
    db: &SkillDatabase,
    skill: &str,
    training_reset: &WorldState,
    target_reset: &WorldState,
) -> Cause {
    let ok = |w: &WorldState| dry_run(w, db, skill).map(|o| o.success()).ok();
    match (ok(training_reset), ok(target_reset)) {
        (Some(true), Some(false)) => Cause::Domain,
        (Some(_), Some(_)) => Cause::Observational,
        _ => Cause::Unknown,
    }
}

/// A complete critic as used by the grounding loop.
pub trait Critic: Send + Sync {
    fn id(&self) -> String;
    fn judge(
        &self,
        state: &WorldState,
        skill: &str,
        low_level: &[String],
    ) -> Result<CriticVerdict, CriticError>;
}

/// The simulator oracle.
pub struct OracleCritic<'a> {
    pub db: &'a SkillDatabase,
}

impl Critic for OracleCritic<'_> {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn judge(
        &self,
        state: &WorldState,
        skill: &str,
        _low_level: &[String],
    ) -> Result<CriticVerdict, CriticError> {
        oracle_judge(state, self.db, skill)
    }
}

/// Perception backend followed by an LM judgment.
pub struct LmCritic<'a> {
    pub lm: &'a dyn LanguageModel,
    pub perception: &'a dyn PerceptionBackend,
}

impl Critic for LmCritic<'_> {
    fn id(&self) -> String {
        format!("{}+{}", self.perception.id(), self.lm.id())
    }

    fn judge(
        &self,
        state: &WorldState,
        skill: &str,
        low_level: &[String],
    ) -> Result<CriticVerdict, CriticError> {
        let p = self.perception.perceive(state)?;
        judge(self.lm, skill, &p, low_level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_grammar() {
        assert_eq!(
            parse_verdict("Executable: yes\nFeedback: none"),
            Some(CriticVerdict::executable())
        );
        assert_eq!(
            parse_verdict("executable: YES\nfeedback:"),
            Some(CriticVerdict::executable())
        );
        assert_eq!(
            parse_verdict("Executable: no\nFeedback: the fridge is closed"),
            Some(CriticVerdict::not_executable("the fridge is closed"))
        );
        assert_eq!(parse_verdict("Executable: no\nFeedback: none"), None);
        assert_eq!(
            parse_verdict("Executable: yes\nFeedback: but careful"),
            None
        );
        assert_eq!(parse_verdict("Executable: maybe\nFeedback: -"), None);
        assert_eq!(parse_verdict("Executable: yes"), None);
        assert_eq!(parse_verdict("yes\nno"), None);
    }

    #[test]
    fn perception_invariant() {
        let mut p = Perception::default();
        p.object_states.insert("fridge".into(), "OPEN".into());
        assert!(p.validate().is_err());
        p.object_names.insert("fridge".into());
        assert!(p.validate().is_ok());
    }
}
