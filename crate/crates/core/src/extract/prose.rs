//! Hardware model mentions in documentation.

use std::collections::BTreeMap;

use regex::Regex;

use crate::kb::KnowledgeBase;
use crate::signal::{Location, Signal, SignalKind, Tier};

/// Mention strings (ids and aliases) mapped to knowledge-base ids.
#[derive(Debug, Clone)]
pub struct MentionVocabulary {
    /// Longest terms first, so `rtx 4090d` wins over `rtx 4090`.
    terms: Vec<(Regex, String)>,
}

impl MentionVocabulary {
    pub fn new(mentions: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut unique: BTreeMap<String, String> = BTreeMap::new();
        for (mention, id) in mentions {
            let m = mention.trim().to_lowercase();
            if !m.is_empty() {
                unique.entry(m).or_insert(id);
            }
        }
        let mut terms: Vec<(String, String)> = unique.into_iter().collect();
        terms.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        let terms = terms
            .into_iter()
            .map(|(term, id)| {
                let body = term
                    .split_whitespace()
                    .map(regex::escape)
                    .collect::<Vec<_>>()
                    .join(r"[\s\-_]*");
                (Regex::new(&format!(r"(?i)\A(?:{body})")).expect("escaped term"), id)
            })
            .collect();
        Self { terms }
    }

    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        let ids = kb.entries().iter().map(|e| (e.id.clone(), e.id.clone()));
        let aliases = kb.aliases().iter().map(|(a, id)| (a.clone(), id.clone()));
        Self::new(ids.chain(aliases))
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(byte offset, matched text, id)` for every whole-word mention.
    /// A trailing plural `s` is allowed (`V100s`).
    pub fn find_all<'t>(&self, text: &'t str) -> Vec<(usize, &'t str, &str)> {
        let mut out = Vec::new();
        let mut prev: Option<char> = None;
        let mut skip_until = 0;
        for (at, c) in text.char_indices() {
            let word_start = c.is_alphanumeric() && prev.is_none_or(|p| !p.is_alphanumeric());
            prev = Some(c);
            if !word_start || at < skip_until {
                continue;
            }
            let rest = &text[at..];
            for (re, id) in &self.terms {
                let Some(m) = re.find(rest) else { continue };
                let tail = &rest[m.end()..];
                let mut tail_chars = tail.chars();
                let ok = match tail_chars.next() {
                    None => true,
                    Some(n) if !n.is_alphanumeric() => true,
                    Some('s' | 'S') => tail_chars.next().is_none_or(|n| !n.is_alphanumeric()),
                    Some(_) => false,
                };
                if ok {
                    out.push((at, m.as_str(), id.as_str()));
                    skip_until = at + m.end();
                    break;
                }
            }
        }
        out
    }
}

/// Blanks out `<!-- ... -->` regions (keeping newlines) and, for reStructuredText,
/// `..` comment lines. An unterminated HTML comment runs to end of input.
fn strip_doc_comments(text: &str, path: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("<!--") {
        out.push_str(&rest[..start]);
        let after = &rest[start..];
        let end = after.find("-->").map_or(after.len(), |e| e + 3);
        out.extend(after[..end].chars().map(|c| if c == '\n' { '\n' } else { ' ' }));
        rest = &after[end..];
    }
    out.push_str(rest);
    if path.to_ascii_lowercase().ends_with(".rst") {
        out = out
            .lines()
            .map(|l| {
                let t = l.trim_start();
                // `.. note::` and friends are directives, anything else is a comment.
                if t.starts_with("..") && !t.contains("::") {
                    ""
                } else {
                    l
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
    }
    out
}

/// `HardwareMention` signals for every vocabulary term found as a whole word.
pub fn extract_prose_mentions(text: &str, path: &str, vocabulary: &MentionVocabulary) -> Vec<Signal> {
    let text = strip_doc_comments(text, path);
    let line_starts: Vec<usize> = std::iter::once(0)
        .chain(text.match_indices('\n').map(|(i, _)| i + 1))
        .collect();
    vocabulary
        .find_all(&text)
        .into_iter()
        .map(|(at, surface, id)| {
            let line = line_starts.partition_point(|&s| s <= at) as u32;
            Signal::new(SignalKind::HardwareMention, id, Tier::Prose, Location::new(path, line), surface)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> MentionVocabulary {
        MentionVocabulary::new(
            [
                ("h20", "h20"),
                ("a100", "a100"),
                ("v100", "v100"),
                ("rtx 4090", "rtx4090"),
                ("rtx 4090d", "rtx4090d"),
            ]
            .map(|(a, b)| (a.to_string(), b.to_string())),
        )
    }

    fn ids(text: &str) -> Vec<String> {
        extract_prose_mentions(text, "README.md", &vocab())
            .into_iter()
            .map(|s| s.value)
            .collect()
    }

    #[test]
    fn whole_words_only() {
        assert_eq!(ids("We trained on NVIDIA H20 GPUs."), vec!["h20"]);
        assert!(ids("h2000 units shipped").is_empty());
        assert!(ids("xa100").is_empty());
    }

    #[test]
    fn plural_suffix() {
        assert_eq!(ids("NVIDIA A100 GPUs, and some V100s"), vec!["a100", "v100"]);
    }

    #[test]
    fn longest_alias_wins() {
        assert_eq!(ids("an RTX 4090D and an RTX-4090"), vec!["rtx4090d", "rtx4090"]);
    }

    #[test]
    fn html_comments_hide_mentions() {
        assert!(ids("<!-- trained on H20 -->").is_empty());
        assert!(ids("<!-- trained on H20").is_empty());
        let s = extract_prose_mentions("x\n<!-- a -->\nA100 here", "d.md", &vocab());
        assert_eq!(s[0].location.line, 3);
    }
}
