//! Age extraction from free-text model responses.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MAX_AGE: u32 = 120;

/// A parsed age, or the marker for a response with no usable integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParsedAge {
    Years(u32),
    ParseFailure,
}

impl ParsedAge {
    pub fn years(self) -> Option<u32> {
        match self {
            ParsedAge::Years(y) => Some(y),
            ParsedAge::ParseFailure => None,
        }
    }
}

impl fmt::Display for ParsedAge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParsedAge::Years(y) => write!(f, "{y}"),
            ParsedAge::ParseFailure => f.write_str("parse_failure"),
        }
    }
}

impl Serialize for ParsedAge {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ParsedAge::Years(y) => serializer.serialize_u32(*y),
            ParsedAge::ParseFailure => serializer.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for ParsedAge {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match Option::<u32>::deserialize(deserializer)? {
            Some(y) => ParsedAge::Years(y),
            None => ParsedAge::ParseFailure,
        })
    }
}

/// The first maximal run of ASCII digits, if it is an integer in `[0, 120]`.
pub fn parse_age_response(text: &str) -> ParsedAge {
    let Some(start) = text.find(|c: char| c.is_ascii_digit()) else {
        return ParsedAge::ParseFailure;
    };
    let run = &text[start..];
    let end = run.find(|c: char| !c.is_ascii_digit()).unwrap_or(run.len());
    match run[..end].parse::<u64>() {
        Ok(v) if v <= u64::from(MAX_AGE) => ParsedAge::Years(v as u32),
        _ => ParsedAge::ParseFailure,
    }
}
