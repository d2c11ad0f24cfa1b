use crate::domain::NormalizationRule;

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Applies the selected rules in canonical order: lowercase, strip ASCII
/// punctuation, drop the articles a/an/the as whole tokens, collapse
/// whitespace. Idempotent for any rule set.
pub fn normalize_answer(text: &str, rules: &[NormalizationRule]) -> String {
    let has = |r: NormalizationRule| rules.contains(&r);
    let mut s = if has(NormalizationRule::Lowercase) {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    if has(NormalizationRule::StripPunctuation) {
        s.retain(|c| !c.is_ascii_punctuation());
    }
    if has(NormalizationRule::RemoveArticles) {
        s = s
            .split_whitespace()
            .filter(|t| !ARTICLES.contains(t))
            .collect::<Vec<_>>()
            .join(" ");
    }
    if has(NormalizationRule::CollapseWhitespace) {
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    s
}

/// Normalized whitespace tokens.
pub fn normalized_tokens(text: &str, rules: &[NormalizationRule]) -> Vec<String> {
    normalize_answer(text, rules)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}
