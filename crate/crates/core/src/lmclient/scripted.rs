use super::{CompletionRequest, LanguageModel, LmError, Tag};
use regex::Regex;
use serde::{Deserialize, Serialize};

/// Serialized form of a [`Rule`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<Tag>,
    pub pattern: String,
    /// Response template; `$1` / `${name}` expand regex captures. The
    /// special template `@first-library-item` answers with the first entry
    /// of the prompt's last "Skill library:" line.
    pub response: String,
}

#[derive(Debug, Clone)]
pub struct Rule {
    tag: Option<Tag>,
    pattern: Regex,
    response: String,
}

impl Rule {
    pub fn new(tag: Option<Tag>, pattern: &str, response: &str) -> Result<Self, regex::Error> {
        Ok(Self {
            tag,
            pattern: Regex::new(pattern)?,
            response: response.to_string(),
        })
    }

    pub fn from_spec(spec: &RuleSpec) -> Result<Self, regex::Error> {
        Self::new(spec.tag, &spec.pattern, &spec.response)
    }

    fn apply(&self, req: &CompletionRequest) -> Option<String> {
        if self.tag.is_some_and(|t| t != req.tag) {
            return None;
        }
        let caps = self.pattern.captures(&req.prompt)?;
        if self.response == "@first-library-item" {
            return first_library_item(&req.prompt);
        }
        let mut out = String::new();
        caps.expand(&self.response, &mut out);
        Some(out)
    }
}

fn first_library_item(prompt: &str) -> Option<String> {
    let line = prompt
        .lines()
        .rev()
        .find(|l| l.to_lowercase().starts_with("skill library:"))?;
    let items = &line["skill library:".len()..];
    items
        .split(',')
        .map(str::trim)
        .find(|s| !s.is_empty())
        .map(str::to_string)
}

/// Deterministic rule-table backend: the first rule whose tag and regex
/// match the request produces the response.
#[derive(Debug, Clone)]
pub struct ScriptedLm {
    id: String,
    rules: Vec<Rule>,
}

impl ScriptedLm {
    pub fn new(id: &str, rules: Vec<Rule>) -> Self {
        Self {
            id: id.to_string(),
            rules,
        }
    }

    pub fn from_specs(id: &str, specs: &[RuleSpec]) -> Result<Self, regex::Error> {
        let rules = specs
            .iter()
            .map(Rule::from_spec)
            .collect::<Result<_, _>>()?;
        Ok(Self::new(id, rules))
    }
}

impl LanguageModel for ScriptedLm {
    fn id(&self) -> String {
        format!("scripted:{}", self.id)
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LmError> {
        req.validate()?;
        let out = self
            .rules
            .iter()
            .find_map(|r| r.apply(req))
            .ok_or(LmError::NoRule { tag: req.tag })?;
        if out.trim().is_empty() {
            return Err(LmError::EmptyResponse);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echoes_first_library_item() {
        let lm = ScriptedLm::new(
            "t",
            vec![Rule::new(Some(Tag::Generator), ".", "@first-library-item").unwrap()],
        );
        let req = CompletionRequest::new(
            Tag::Generator,
            "Skill library: grab apple, walk fridge\nTask: x\nskill steps: 1.",
        );
        assert_eq!(lm.complete(&req).unwrap(), "grab apple");
        let other = CompletionRequest::new(Tag::Critic, "Skill library: a");
        assert_eq!(
            lm.complete(&other).unwrap_err(),
            LmError::NoRule { tag: Tag::Critic }
        );
    }

    #[test]
    fn captures_expand() {
        let lm = ScriptedLm::new(
            "t",
            vec![Rule::new(None, r"Task: (?<t>.+)", "do ${t} now").unwrap()],
        );
        let req = CompletionRequest::new(Tag::Retriever, "Task: tidy up");
        assert_eq!(lm.complete(&req).unwrap(), "do tidy up now");
    }
}
