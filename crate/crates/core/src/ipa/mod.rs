//! Canonical handling of phonetic strings: normalization, segmentation,
//! validation, diacritic/tone stripping and notation conversion.

mod inventory;
mod notation;
mod segment;

use std::fmt;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub use inventory::{Inventory, SymbolClass};
pub use notation::{convert_to_ipa, Chart, ConvertError, TranscriptionSystem};
pub use segment::{segment_ipa, IpaSegment, IpaString};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IpaError {
    #[error("unknown symbol {symbol:?} (U+{:04X}) at position {position}", *symbol as u32)]
    UnknownSymbol { position: usize, symbol: char },
    #[error("mark {symbol:?} at position {position} has no base to attach to")]
    DanglingMark { position: usize, symbol: char },
}

/// One reason a transcription fails validation. Positions are code point
/// offsets into the normalized text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    UnknownSymbol { position: usize, symbol: char },
    DanglingMark { position: usize, symbol: char },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => f.write_str("empty transcription"),
            Violation::UnknownSymbol { position, symbol } => {
                write!(f, "unknown symbol {symbol:?} at {position}")
            }
            Violation::DanglingMark { position, symbol } => {
                write!(f, "dangling mark {symbol:?} at {position}")
            }
        }
    }
}

impl From<Violation> for IpaError {
    fn from(v: Violation) -> Self {
        match v {
            Violation::UnknownSymbol { position, symbol } => {
                IpaError::UnknownSymbol { position, symbol }
            }
            Violation::DanglingMark { position, symbol } => {
                IpaError::DanglingMark { position, symbol }
            }
            Violation::Empty => unreachable!("segmentation never reports emptiness"),
        }
    }
}

/// NFC, lowercase, trimmed. Total and idempotent.
pub fn normalize_text(raw: &str) -> String {
    let composed: String = raw.trim().nfc().collect();
    let lowered = composed.to_lowercase();
    let out: String = lowered.nfc().collect();
    out.trim().to_string()
}

/// Validate a raw transcription against the inventory. The text is
/// normalized first; an empty result is itself a violation.
pub fn validate_ipa(s: &str, inventory: &Inventory) -> Result<(), Vec<Violation>> {
    let normalized = normalize_text(s);
    if normalized.is_empty() {
        return Err(vec![Violation::Empty]);
    }
    let (_, violations) = segment::segment_all(&normalized, inventory);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

pub fn strip_diacritics_tones(s: &IpaString) -> IpaString {
    segment::strip_diacritics_tones(s, Inventory::builtin())
}

pub fn strip_diacritics_tones_with(s: &IpaString, inventory: &Inventory) -> IpaString {
    segment::strip_diacritics_tones(s, inventory)
}
