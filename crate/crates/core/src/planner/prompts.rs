//! Versioned prompt templates. Each asset has a `[preamble]`, an optional
//! `[example]` block repeated per in-context example, and a `[query]`
//! block. `{name}` placeholders are filled from the caller's variables; a
//! line whose placeholder has no value is dropped.

use std::collections::BTreeMap;
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: &'static str,
    pub preamble: String,
    pub example: Option<String>,
    pub query: String,
}

pub const GENERATOR: &str = "generator-v1";
pub const RETRIEVER: &str = "retriever-v1";
pub const CRITIC: &str = "critic-v1";
pub const CHAINER: &str = "chainer-v1";
pub const SUMMARIZER: &str = "summarizer-v1";

const ASSETS: &[(&str, &str)] = &[
    (
        GENERATOR,
        include_str!("../../assets/prompts/generator-v1.txt"),
    ),
    (
        RETRIEVER,
        include_str!("../../assets/prompts/retriever-v1.txt"),
    ),
    (CRITIC, include_str!("../../assets/prompts/critic-v1.txt")),
    (CHAINER, include_str!("../../assets/prompts/chainer-v1.txt")),
    (
        SUMMARIZER,
        include_str!("../../assets/prompts/summarizer-v1.txt"),
    ),
];

fn parse(id: &'static str, text: &str) -> PromptTemplate {
    let mut sections: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut current = "";
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with('[') && t.ends_with(']') {
            current = &t[1..t.len() - 1];
            sections.entry(current).or_default();
        } else {
            sections.entry(current).or_default().push(line);
        }
    }
    let take = |name: &str| {
        sections
            .get(name)
            .map(|lines| lines.join("\n").trim_end().to_string())
    };
    PromptTemplate {
        id,
        preamble: take("preamble").unwrap_or_default(),
        example: take("example"),
        query: take("query").unwrap_or_default(),
    }
}

impl PromptTemplate {
    pub fn get(id: &str) -> Option<&'static PromptTemplate> {
        static ALL: OnceLock<Vec<PromptTemplate>> = OnceLock::new();
        ALL.get_or_init(|| ASSETS.iter().map(|(id, text)| parse(id, text)).collect())
            .iter()
            .find(|t| t.id == id)
    }

    pub fn fill(section: &str, vars: &[(&str, Option<&str>)]) -> String {
        let mut out = Vec::new();
        'lines: for line in section.lines() {
            let mut line = line.to_string();
            for (name, value) in vars {
                let key = format!("{{{name}}}");
                if line.contains(&key) {
                    match value {
                        Some(v) => line = line.replace(&key, v),
                        None => continue 'lines,
                    }
                }
            }
            out.push(line);
        }
        out.join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_assets_parse() {
        for (id, _) in ASSETS {
            let t = PromptTemplate::get(id).unwrap();
            assert!(!t.preamble.is_empty() && !t.query.is_empty(), "{id}");
        }
        assert!(PromptTemplate::get(GENERATOR).unwrap().example.is_some());
    }

    #[test]
    fn missing_values_drop_lines() {
        let s = PromptTemplate::fill("a: {a}\nb: {b}", &[("a", Some("1")), ("b", None)]);
        assert_eq!(s, "a: 1");
    }
}
