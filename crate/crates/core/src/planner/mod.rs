//! Skill generator and task retriever.
//!
//! The generator prompts an LM with retrieved examples, the candidate
//! vocabulary, the instruction and the frame's execution history, then maps
//! the answer back onto the vocabulary. The task retriever turns a blocked
//! skill and the critic's feedback into a finer-grained instruction.

pub mod heuristic;
pub mod prompts;

pub use heuristic::{HeuristicPlanner, Lexicon};
pub use prompts::PromptTemplate;

use crate::lmclient::{CompletionRequest, LanguageModel, LmError, Tag};
use crate::retriever::{cosine, Embedder};
use crate::text::{normalize, normalize_answer};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Minimum cosine for the embedding rung of the matching ladder.
pub const MATCH_FLOOR: f64 = 0.8;

const RETRY_SUFFIX: &str = "\nAnswer with exactly one skill copied from the Skill library.";

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("LM output does not name a candidate: {raw:?}")]
    Unparseable { raw: String },
    #[error("feedback is empty")]
    EmptyFeedback,
    #[error("refined instruction is empty")]
    EmptyRefinement,
    #[error("refined instruction repeats the blocked skill: {raw:?}")]
    SameAsParent { raw: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleBlock {
    pub library: String,
    pub task: String,
    pub steps: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: String,
    pub system_preamble: String,
    pub example_blocks: Vec<ExampleBlock>,
    pub query_block: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl PromptBundle {
    pub fn render(&self) -> String {
        let mut parts = vec![self.system_preamble.clone()];
        if let Some(t) = PromptTemplate::get(&self.template_id).and_then(|t| t.example.as_deref()) {
            for b in &self.example_blocks {
                parts.push(PromptTemplate::fill(
                    t,
                    &[
                        ("library", Some(&b.library)),
                        ("task", Some(&b.task)),
                        ("steps", Some(&b.steps)),
                    ],
                ));
            }
        }
        parts.push(self.query_block.clone());
        parts.join("\n\n")
    }

    pub fn request(&self, tag: Tag) -> CompletionRequest {
        CompletionRequest {
            prompt: self.render(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            tag,
        }
    }
}

/// "1. a 2. b 3." style numbering; `next` appends the following number.
pub fn numbered_steps(steps: &[String], next: bool) -> String {
    let mut parts: Vec<String> = steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect();
    if next {
        parts.push(format!("{}.", steps.len() + 1));
    }
    parts.join(" ")
}

pub fn build_generator_prompt(
    instruction: &str,
    history: &[String],
    examples: &[(String, Vec<String>)],
    candidates: &[String],
) -> Result<PromptBundle, PlannerError> {
    if candidates.is_empty() {
        return Err(PlannerError::EmptyCandidates);
    }
    let t = PromptTemplate::get(prompts::GENERATOR).expect("generator template");
    let example_blocks = examples
        .iter()
        .map(|(task, steps)| {
            let mut lib: Vec<&String> = steps.iter().collect();
            lib.sort();
            lib.dedup();
            ExampleBlock {
                library: lib
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
                task: task.clone(),
                steps: numbered_steps(steps, false),
            }
        })
        .collect();
    let query_block = PromptTemplate::fill(
        &t.query,
        &[
            ("candidates", Some(&candidates.join(", "))),
            ("instruction", Some(instruction)),
            ("history", Some(&numbered_steps(history, true))),
        ],
    );
    Ok(PromptBundle {
        template_id: t.id.to_string(),
        system_preamble: t.preamble.clone(),
        example_blocks,
        query_block,
        temperature: 0.0,
        max_tokens: 64,
    })
}

/// How an LM answer was matched to the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Normalized,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSkill {
    pub semantic: String,
    pub raw: String,
    pub matched_by: MatchKind,
    pub retried: bool,
}

fn next_step_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s+\d+\s*[.)]\s").expect("valid regex"))
}

/// First answer in raw LM text: the first non-empty line, cut before any
/// continued numbering.
fn first_answer(raw: &str) -> &str {
    let line = raw
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    match next_step_re().find(line) {
        Some(m) => &line[..m.start()],
        None => line,
    }
}

/// Exact, then normalized, then best embedding cosine at or above
/// [`MATCH_FLOOR`]. Ties go to the earlier candidate.
pub fn match_candidate(
    raw: &str,
    candidates: &[String],
    embedder: &dyn Embedder,
) -> Option<(String, MatchKind)> {
    let answer = first_answer(raw);
    if let Some(c) = candidates.iter().find(|c| c.as_str() == answer) {
        return Some((c.clone(), MatchKind::Exact));
    }
    let norm = normalize_answer(answer);
    if norm.is_empty() {
        return None;
    }
    if let Some(c) = candidates.iter().find(|c| normalize_answer(c) == norm) {
        return Some((c.clone(), MatchKind::Normalized));
    }
    let q = embedder.embed(&norm).ok()?;
    let mut best: Option<(f64, &String)> = None;
    for c in candidates {
        let Ok(v) = embedder.embed(c) else { continue };
        let s = cosine(&q, &v);
        if s >= MATCH_FLOOR && best.is_none_or(|(b, _)| s > b) {
            best = Some((s, c));
        }
    }
    best.map(|(_, c)| (c.clone(), MatchKind::Embedding))
}

pub fn generate_skill(
    lm: &dyn LanguageModel,
    prompt: &PromptBundle,
    candidates: &[String],
    embedder: &dyn Embedder,
) -> Result<GeneratedSkill, PlannerError> {
    if candidates.is_empty() {
        return Err(PlannerError::EmptyCandidates);
    }
    let mut req = prompt.request(Tag::Generator);
    let raw = lm.complete(&req)?;
    if let Some((semantic, matched_by)) = match_candidate(&raw, candidates, embedder) {
        return Ok(GeneratedSkill {
            semantic,
            raw,
            matched_by,
            retried: false,
        });
    }
    log::debug!("generator answer {raw:?} matched no candidate; retrying");
    req.prompt.push_str(RETRY_SUFFIX);
    let raw = lm.complete(&req)?;
    match match_candidate(&raw, candidates, embedder) {
        Some((semantic, matched_by)) => Ok(GeneratedSkill {
            semantic,
            raw,
            matched_by,
            retried: true,
        }),
        None => Err(PlannerError::Unparseable { raw }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedInstruction {
    pub text: String,
    pub parent_skill: String,
    pub feedback: String,
}

pub fn build_refine_prompt(
    skill: &str,
    feedback: &str,
    lower_candidates: &[String],
) -> PromptBundle {
    let t = PromptTemplate::get(prompts::RETRIEVER).expect("retriever template");
    let lc = lower_candidates.join(", ");
    let query_block = PromptTemplate::fill(
        &t.query,
        &[
            ("lower_candidates", (!lc.is_empty()).then_some(lc.as_str())),
            ("skill", Some(skill)),
            ("feedback", Some(feedback)),
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

pub fn refine_instruction(
    lm: &dyn LanguageModel,
    skill: &str,
    feedback: &str,
    lower_candidates: &[String],
) -> Result<RefinedInstruction, PlannerError> {
    if feedback.trim().is_empty() {
        return Err(PlannerError::EmptyFeedback);
    }
    let raw = lm.complete(
        &build_refine_prompt(skill, feedback, lower_candidates).request(Tag::Retriever),
    )?;
    let line = raw
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let line = line
        .strip_prefix("Detailed instruction:")
        .unwrap_or(line)
        .trim()
        .trim_matches('"')
        .trim();
    if line.is_empty() {
        return Err(PlannerError::EmptyRefinement);
    }
    if normalize(line) == normalize(skill) {
        return Err(PlannerError::SameAsParent { raw });
    }
    Ok(RefinedInstruction {
        text: line.to_string(),
        parent_skill: skill.to_string(),
        feedback: feedback.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmclient::{Rule, ScriptedLm};
    use crate::retriever::HashEmbedder;

    fn cands(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_history_ends_with_first_step() {
        let p = build_generator_prompt("tidy", &[], &[], &cands(&["walk apple"])).unwrap();
        assert!(p.render().ends_with("skill steps: 1."));
        let p = build_generator_prompt(
            "tidy",
            &cands(&["walk apple"]),
            &[],
            &cands(&["grab apple"]),
        )
        .unwrap();
        assert!(p.render().ends_with("skill steps: 1. walk apple 2."));
    }

    #[test]
    fn ladder_rungs() {
        let e = HashEmbedder::default();
        let c = cands(&["put fruit in kitchen cabinet", "walk apple"]);
        assert_eq!(
            match_candidate("walk apple", &c, &e).unwrap().1,
            MatchKind::Exact
        );
        assert_eq!(
            match_candidate("Put Fruit In Kitchen Cabinet.", &c, &e).unwrap(),
            (
                "put fruit in kitchen cabinet".to_string(),
                MatchKind::Normalized
            )
        );
        assert_eq!(
            match_candidate("3. walk apple 4. grab apple", &c, &e)
                .unwrap()
                .1,
            MatchKind::Normalized
        );
        assert!(match_candidate("juggle torches", &c, &e).is_none());
    }

    #[test]
    fn retry_then_unparseable() {
        let lm = ScriptedLm::new("t", vec![Rule::new(None, ".", "juggle torches").unwrap()]);
        let p = build_generator_prompt("x", &[], &[], &cands(&["walk apple"])).unwrap();
        let err =
            generate_skill(&lm, &p, &cands(&["walk apple"]), &HashEmbedder::default()).unwrap_err();
        assert_eq!(
            err,
            PlannerError::Unparseable {
                raw: "juggle torches".into()
            }
        );
    }

    #[test]
    fn refinement_uses_template_response() {
        let lm = ScriptedLm::new(
            "t",
            vec![Rule::new(
                None,
                r"(?s)Skill: (?<l>[^\n]+)\nFeedback: (?<f>[^\n]+)",
                "First resolve: ${f}. Then: ${l}",
            )
            .unwrap()],
        );
        let r = refine_instruction(&lm, "put apple in fridge", "fridge is closed", &[]).unwrap();
        assert_eq!(
            r.text,
            "First resolve: fridge is closed. Then: put apple in fridge"
        );
        assert_eq!(r.parent_skill, "put apple in fridge");
    }
}
