//! Small text helpers shared by the database, planner and critic.

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Normalization used when matching LM output against a vocabulary:
/// strips surrounding quotes, list numbering and trailing punctuation.
pub fn normalize_answer(text: &str) -> String {
    let mut s = text.trim();
    // "3. walk apple" / "3) walk apple" / "- walk apple"
    let numbered = s
        .char_indices()
        .take_while(|(_, c)| c.is_ascii_digit())
        .last()
        .map(|(i, _)| i + 1);
    if let Some(end) = numbered {
        let rest = &s[end..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            s = r;
        }
    }
    s = s.trim_start_matches(['-', '*']).trim();
    let s = s.trim_matches(|c: char| c == '"' || c == '\'' || c == '`');
    let s = s.trim_end_matches(['.', ',', ';', ':', '!', '?']);
    normalize(s)
}

/// Lowercase alphanumeric tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_normalization() {
        assert_eq!(
            normalize_answer("Put Fruit In Kitchen Cabinet."),
            "put fruit in kitchen cabinet"
        );
        assert_eq!(normalize_answer(" 3. walk  apple "), "walk apple");
        assert_eq!(normalize_answer("\"grab apple\""), "grab apple");
        assert_eq!(normalize_answer("- sit sofa"), "sit sofa");
    }

    #[test]
    fn tokenizer_splits_on_punctuation() {
        assert_eq!(
            tokens("Open the fridge, then walk"),
            ["open", "the", "fridge", "then", "walk"]
        );
    }
}
