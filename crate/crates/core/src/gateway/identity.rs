//! Identity answers and fuzzy name matching.

use serde::{Deserialize, Serialize};

/// Names closer than this edit distance are treated as the same person.
pub const MATCH_DISTANCE: usize = 5;

/// A model's answer to the identification prompt. `name: None` is the Unknown
/// marker; `verified` holds the yes/no cross-check and is never set for
/// Unknown answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityAnswer {
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified: Option<bool>,
}

impl IdentityAnswer {
    pub fn unknown() -> Self {
        Self {
            name: None,
            verified: None,
        }
    }

    pub fn named(name: impl Into<String>, verified: Option<bool>) -> Self {
        Self {
            name: Some(name.into()),
            verified,
        }
    }

    /// Maps a raw response: exactly "unknown" (any case, surrounding
    /// whitespace ignored) is the Unknown marker, anything else is a name.
    pub fn from_response(text: &str) -> Self {
        let trimmed = text.trim();
        if trimmed.eq_ignore_ascii_case("unknown") {
            Self::unknown()
        } else {
            Self::named(trimmed, None)
        }
    }

    pub fn is_unknown(&self) -> bool {
        self.name.is_none()
    }
}

/// Lowercases and collapses runs of whitespace to single spaces.
pub fn normalize_name(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn match_identity(answer: &str, ground_truth: &str) -> bool {
    levenshtein(&normalize_name(answer), &normalize_name(ground_truth)) < MATCH_DISTANCE
}

/// A cross-check answer counts as confirmation when it starts with "yes".
pub fn parse_verification(text: &str) -> bool {
    text.trim().to_lowercase().starts_with("yes")
}
