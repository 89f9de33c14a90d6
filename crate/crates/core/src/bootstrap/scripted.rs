//! Deterministic stand-ins for the chaining and summarization LMs.

use crate::lmclient::{CompletionRequest, LanguageModel, LmError, Tag};
use crate::text::{normalize, tokens};
use crate::worldsim::{Action, SkillPrimitive};
use regex::Regex;
use std::collections::BTreeSet;
use std::sync::OnceLock;

fn last_field<'a>(prompt: &'a str, key: &str) -> Option<&'a str> {
    prompt
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix(key))
        .map(str::trim)
}

fn step_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:^|\s)\d+\.(?:\s|$)").expect("valid regex"))
}

/// Splits "1. a 2. b 3." into `["a", "b"]`.
pub fn parse_numbered(text: &str) -> Vec<String> {
    step_re()
        .split(text)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn objects(skill: &str) -> BTreeSet<String> {
    tokens(skill)
        .into_iter()
        .filter(|t| t != "and" && Action::parse(t).is_none())
        .collect()
}

fn fnv(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn split_primitive(skill: &str) -> Option<(Action, Vec<&str>)> {
    SkillPrimitive::parse(skill).ok()?;
    let mut words = skill.split_whitespace();
    let verb = Action::parse(words.next()?)?;
    Some((verb, words.collect()))
}

/// How natural `next` is after `history` when both are primitives: act on
/// what was just approached, carry what is held somewhere, put it in what
/// was just opened or approached, close what was filled.
fn follows(history: &[String], library: &[&str], next: &str) -> u32 {
    let (Some(last), Some((verb, args))) = (history.last(), split_primitive(next)) else {
        return 0;
    };
    let Some((last_verb, last_args)) = split_primitive(last) else {
        return 0;
    };
    let held = held_after(history);
    let same = args.first() == last_args.first();
    let onto_last =
        verb == Action::Put && args.get(1) == last_args.first() && held.contains(&args[0]);
    match (last_verb, verb) {
        (Action::Walk | Action::Find, Action::Put) | (Action::Open, Action::Put) if onto_last => 4,
        (
            Action::Walk | Action::Find,
            Action::Grab | Action::Open | Action::SwitchOn | Action::Sit,
        ) if same => 3,
        (Action::Grab, Action::Walk) if !same => {
            let carry = format!(
                "put {} {}",
                last_args.first().unwrap_or(&""),
                args.first().unwrap_or(&"")
            );
            if library.contains(&carry.as_str()) {
                2
            } else {
                1
            }
        }
        (Action::Put, Action::Close) if args.first() == last_args.get(1) => 3,
        (Action::Put | Action::SwitchOn | Action::Sit | Action::Close, Action::Walk) => 1,
        _ => 0,
    }
}

fn held_after(history: &[String]) -> Vec<&str> {
    let mut held: Vec<&str> = Vec::new();
    for h in history {
        match split_primitive(h) {
            Some((Action::Grab, a)) => held.extend(a.first()),
            Some((Action::Put, a)) => held.retain(|x| Some(x) != a.first()),
            _ => {}
        }
    }
    held
}

/// Whether the history already reads as a finished task: hands empty
/// after a closing action for primitives, two steps for composites.
fn finished(history: &[String]) -> bool {
    if history.len() < 2 {
        return false;
    }
    match history.last().and_then(|l| split_primitive(l)) {
        Some((verb, _)) => {
            held_after(history).is_empty()
                && matches!(
                    verb,
                    Action::Put
                        | Action::Close
                        | Action::SwitchOn
                        | Action::SwitchOff
                        | Action::Sit
                )
        }
        None => true,
    }
}

/// Picks an unused library skill, or answers "done" once the chain reads
/// as a finished task. Primitives follow a small table of
/// natural successions; composites prefer shared objects with the last
/// step. Ties are broken by a hash of the prompt and the skill, so the
/// choice is fixed for a given prompt but varies across histories.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChainerLm;

impl LanguageModel for ChainerLm {
    fn id(&self) -> String {
        "scripted-chainer-v1".into()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LmError> {
        req.validate()?;
        if req.tag != Tag::Chainer {
            return Err(LmError::NoRule { tag: req.tag });
        }
        let library: Vec<&str> = last_field(&req.prompt, "Skill Library:")
            .unwrap_or("")
            .split(", ")
            .filter(|s| !s.is_empty())
            .collect();
        let history = parse_numbered(last_field(&req.prompt, "Skill Steps:").unwrap_or(""));
        if finished(&history) {
            return Ok("done".into());
        }
        let last = history.last().map(|s| objects(s)).unwrap_or_default();
        let best = library
            .iter()
            .filter(|s| !history.iter().any(|h| h == *s))
            .max_by_key(|s| {
                (
                    follows(&history, &library, s),
                    objects(s).intersection(&last).count(),
                    fnv(&format!("{}\n{s}", req.prompt)),
                )
            });
        Ok(best.map_or("done".to_string(), |s| s.to_string()))
    }
}

const ARTICLES: [&str; 3] = ["the", "a", "an"];

/// Factors the words every step starts with: "wash the plate", "wash mug"
/// becomes "wash the plate and mug". Steps with nothing in common, and
/// steps that are already conjunctions, are joined with "and".
#[derive(Debug, Clone, Copy, Default)]
pub struct SummarizerLm;

pub fn factor_steps(steps: &[String]) -> String {
    let words: Vec<Vec<&str>> = steps
        .iter()
        .map(|s| s.split_whitespace().collect())
        .collect();
    let shortest = words.iter().map(Vec::len).min().unwrap_or(0);
    let mut prefix = 0;
    while prefix + 1 < shortest && words.iter().all(|w| w[prefix] == words[0][prefix]) {
        prefix += 1;
    }
    if prefix == 0 || steps.len() < 2 || words.iter().any(|w| w.contains(&"and")) {
        return steps.join(" and ");
    }
    let rests: Vec<String> = words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let mut rest = &w[prefix..];
            if i > 0 && rest.len() > 1 && ARTICLES.contains(&rest[0]) {
                rest = &rest[1..];
            }
            rest.join(" ")
        })
        .collect();
    format!("{} {}", words[0][..prefix].join(" "), rests.join(" and "))
}

/// Rewrites primitive steps as what they achieve: approaching is dropped
/// when something else happens, a grab is folded into the put that follows
/// it, and terse verbs become phrases. Other steps pass through.
/// With `keep_moves`, approaching is always kept.
pub fn describe_primitives(steps: &[String], keep_moves: bool) -> Vec<String> {
    let parsed: Vec<Option<SkillPrimitive>> = steps
        .iter()
        .map(|s| SkillPrimitive::parse(s).ok())
        .collect();
    let moving = |p: &Option<SkillPrimitive>| {
        p.as_ref()
            .is_some_and(|p| matches!(p.action, Action::Walk | Action::Find))
    };
    let all_moving = keep_moves || parsed.iter().all(moving);
    let mut out: Vec<String> = Vec::new();
    for (i, (raw, p)) in steps.iter().zip(&parsed).enumerate() {
        let Some(p) = p else {
            out.push(raw.clone());
            continue;
        };
        let o = &p.object;
        let later_put = parsed[i + 1..]
            .iter()
            .flatten()
            .any(|q| q.action == Action::Put && &q.object == o);
        let text = match p.action {
            Action::Walk | Action::Find if !all_moving => continue,
            Action::Walk => format!("go to {o}"),
            Action::Find => format!("find {o}"),
            Action::Grab if later_put => continue,
            Action::Grab => format!("pick up {o}"),
            Action::Put => format!("put {o} in {}", p.target.as_deref().unwrap_or_default()),
            Action::Open => format!("open {o}"),
            Action::Close => format!("close {o}"),
            Action::SwitchOn => format!("turn on {o}"),
            Action::SwitchOff => format!("turn off {o}"),
            Action::Sit => format!("sit on {o}"),
        };
        if !out.contains(&text) {
            out.push(text);
        }
    }
    out
}

impl LanguageModel for SummarizerLm {
    fn id(&self) -> String {
        "scripted-summarizer-v1".into()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LmError> {
        req.validate()?;
        if req.tag != Tag::Summarizer {
            return Err(LmError::NoRule { tag: req.tag });
        }
        let steps = parse_numbered(last_field(&req.prompt, "Skill Steps:").unwrap_or(""));
        let mut summary = factor_steps(&describe_primitives(&steps, false));
        if steps.iter().any(|s| normalize(s) == summary) {
            summary = factor_steps(&describe_primitives(&steps, true));
        }
        Ok(summary)
    }
}
