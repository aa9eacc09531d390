use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

use super::{normalize_text, segment_ipa, validate_ipa, Inventory, IpaError, IpaString, Violation};
use crate::data::{self, DataError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TranscriptionSystem {
    Ipa,
    XSampa,
    Arpabet,
}

impl FromStr for TranscriptionSystem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "ipa" => Ok(TranscriptionSystem::Ipa),
            "xsampa" => Ok(TranscriptionSystem::XSampa),
            "arpabet" => Ok(TranscriptionSystem::Arpabet),
            other => Err(format!("unknown transcription system {other:?}")),
        }
    }
}

impl fmt::Display for TranscriptionSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TranscriptionSystem::Ipa => "IPA",
            TranscriptionSystem::XSampa => "XSAMPA",
            TranscriptionSystem::Arpabet => "ARPABET",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConvertError {
    #[error("no chart entry for {token:?} at position {position}")]
    UnmappableToken { position: usize, token: String },
    #[error("converted text is not valid IPA: {0}")]
    Invalid(#[from] IpaError),
    #[error("converted text is empty")]
    Empty,
}

/// A source-notation to IPA mapping table.
#[derive(Debug, Clone)]
pub struct Chart {
    rows: Vec<(String, String)>,
    forward: HashMap<String, String>,
    max_source_chars: usize,
}

impl Chart {
    pub fn from_tsv(text: &str, source_name: &str) -> Result<Self, DataError> {
        let mut rows = Vec::new();
        let mut forward = HashMap::new();
        for rec in data::records(text) {
            let [source, ipa] = rec.fields[..] else {
                return Err(DataError::malformed(
                    source_name,
                    rec.line,
                    "expected source<TAB>ipa",
                ));
            };
            if source.is_empty() || ipa.is_empty() {
                return Err(DataError::malformed(
                    source_name,
                    rec.line,
                    "empty chart cell",
                ));
            }
            if forward
                .insert(source.to_string(), ipa.to_string())
                .is_some()
            {
                return Err(DataError::malformed(
                    source_name,
                    rec.line,
                    format!("duplicate source token {source:?}"),
                ));
            }
            rows.push((source.to_string(), ipa.to_string()));
        }
        let max_source_chars = rows
            .iter()
            .map(|(s, _)| s.chars().count())
            .max()
            .unwrap_or(1);
        Ok(Chart {
            rows,
            forward,
            max_source_chars,
        })
    }

    pub fn builtin(system: TranscriptionSystem) -> Option<&'static Chart> {
        static XSAMPA: OnceLock<Chart> = OnceLock::new();
        static ARPABET: OnceLock<Chart> = OnceLock::new();
        match system {
            TranscriptionSystem::Ipa => None,
            TranscriptionSystem::XSampa => Some(XSAMPA.get_or_init(|| {
                Chart::from_tsv(data::XSAMPA_CHART, "xsampa.tsv")
                    .expect("builtin X-SAMPA chart parses")
            })),
            TranscriptionSystem::Arpabet => Some(ARPABET.get_or_init(|| {
                Chart::from_tsv(data::ARPABET_CHART, "arpabet.tsv")
                    .expect("builtin ARPABET chart parses")
            })),
        }
    }

    pub fn rows(&self) -> &[(String, String)] {
        &self.rows
    }

    pub fn lookup(&self, source: &str) -> Option<&str> {
        self.forward.get(source).map(String::as_str)
    }

    /// Rows whose IPA value is produced by exactly one source token.
    pub fn one_to_one_rows(&self) -> Vec<(&str, &str)> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for (_, ipa) in &self.rows {
            *counts.entry(ipa.as_str()).or_default() += 1;
        }
        self.rows
            .iter()
            .filter(|(_, ipa)| counts[ipa.as_str()] == 1)
            .map(|(s, i)| (s.as_str(), i.as_str()))
            .collect()
    }

    /// Inverse lookup of a single chart value through the one-to-one rows.
    pub fn source_for(&self, ipa: &str) -> Option<&str> {
        self.one_to_one_rows()
            .into_iter()
            .find(|(_, i)| *i == ipa)
            .map(|(s, _)| s)
    }

    /// Greedy longest-match over characters; whitespace separates tokens
    /// and is otherwise ignored.
    fn map_greedy(&self, s: &str) -> Result<String, ConvertError> {
        let chars: Vec<char> = s.chars().collect();
        let mut out = String::new();
        let mut i = 0;
        'outer: while i < chars.len() {
            if chars[i].is_whitespace() {
                i += 1;
                continue;
            }
            let longest = self.max_source_chars.min(chars.len() - i);
            for len in (1..=longest).rev() {
                let token: String = chars[i..i + len].iter().collect();
                if let Some(ipa) = self.forward.get(&token) {
                    out.push_str(ipa);
                    i += len;
                    continue 'outer;
                }
            }
            return Err(ConvertError::UnmappableToken {
                position: i,
                token: chars[i].to_string(),
            });
        }
        Ok(out)
    }

    /// Whitespace-delimited token lookup; a token missing from the chart
    /// is retried with trailing stress digits removed.
    fn map_tokens(&self, s: &str) -> Result<String, ConvertError> {
        let mut out = String::new();
        for (position, raw) in s.split_whitespace().enumerate() {
            let token = raw.to_ascii_uppercase();
            let ipa = self
                .forward
                .get(&token)
                .or_else(|| self.forward.get(token.trim_end_matches(['0', '1', '2'])))
                .ok_or_else(|| ConvertError::UnmappableToken {
                    position,
                    token: raw.to_string(),
                })?;
            out.push_str(ipa);
        }
        Ok(out)
    }
}

fn finish(mapped: &str, inventory: &Inventory) -> Result<IpaString, ConvertError> {
    let normalized = normalize_text(mapped);
    if let Err(violations) = validate_ipa(&normalized, inventory) {
        return Err(match violations.into_iter().next() {
            Some(Violation::Empty) | None => ConvertError::Empty,
            Some(v) => ConvertError::Invalid(v.into()),
        });
    }
    Ok(segment_ipa(&normalized, inventory)?)
}

/// Convert a transcription in `system` to validated IPA using the builtin
/// charts and inventory.
pub fn convert_to_ipa(system: TranscriptionSystem, s: &str) -> Result<IpaString, ConvertError> {
    let inventory = Inventory::builtin();
    match Chart::builtin(system) {
        None => finish(s, inventory),
        Some(chart) => chart.convert(system, s, inventory),
    }
}

impl Chart {
    pub fn convert(
        &self,
        system: TranscriptionSystem,
        s: &str,
        inventory: &Inventory,
    ) -> Result<IpaString, ConvertError> {
        let mapped = match system {
            TranscriptionSystem::Ipa => s.to_string(),
            TranscriptionSystem::XSampa => self.map_greedy(s)?,
            TranscriptionSystem::Arpabet => self.map_tokens(s)?,
        };
        finish(&mapped, inventory)
    }
}
