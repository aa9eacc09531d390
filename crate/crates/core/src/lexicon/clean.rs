use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ipa::{normalize_text, segment_ipa, validate_ipa};
use crate::resources::Resources;

use super::{detect_script, Lexicon, PronEntry};

/// An unvalidated input row.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawEntry {
    pub lang: String,
    pub grapheme: String,
    pub ipa: String,
}

impl RawEntry {
    pub fn new(
        lang: impl Into<String>,
        grapheme: impl Into<String>,
        ipa: impl Into<String>,
    ) -> Self {
        RawEntry {
            lang: lang.into(),
            grapheme: grapheme.into(),
            ipa: ipa.into(),
        }
    }
}

pub const UNKNOWN_LANGUAGE: &str = "unknown_language";
pub const EMPTY_GRAPHEME: &str = "empty_grapheme";
pub const INVALID_IPA: &str = "invalid_ipa";
pub const NO_SCRIPT: &str = "no_script";
pub const SCRIPT_MISMATCH: &str = "script_mismatch";
pub const DUPLICATE: &str = "duplicate";

/// Removal rules in the order they are applied.
pub const RULES: [&str; 6] = [
    UNKNOWN_LANGUAGE,
    EMPTY_GRAPHEME,
    INVALID_IPA,
    NO_SCRIPT,
    SCRIPT_MISMATCH,
    DUPLICATE,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_count: usize,
    pub retained_count: usize,
    pub removed_by_rule: BTreeMap<String, usize>,
}

impl CleaningReport {
    pub fn removed(&self) -> usize {
        self.removed_by_rule.values().sum()
    }

    pub fn is_conserved(&self) -> bool {
        self.input_count == self.retained_count + self.removed()
    }
}

/// Normalize and check one row. Languages absent from the script table
/// skip the script rules.
pub(crate) fn clean_one(raw: &RawEntry, res: &Resources) -> Result<PronEntry, &'static str> {
    let lang = res
        .languages
        .normalize(&raw.lang)
        .map_err(|_| UNKNOWN_LANGUAGE)?;
    let grapheme = normalize_text(&raw.grapheme);
    if grapheme.is_empty() {
        return Err(EMPTY_GRAPHEME);
    }
    let ipa_text = normalize_text(&raw.ipa);
    validate_ipa(&ipa_text, &res.inventory).map_err(|_| INVALID_IPA)?;
    let ipa = segment_ipa(&ipa_text, &res.inventory).map_err(|_| INVALID_IPA)?;
    let detected = detect_script(&grapheme).ok();
    if let Some(official) = res.scripts.official(&lang) {
        let script = detected.ok_or(NO_SCRIPT)?;
        if !official.iter().any(|s| s == script) {
            return Err(SCRIPT_MISMATCH);
        }
    }
    Ok(PronEntry {
        lang,
        script: detected.map(str::to_string),
        grapheme,
        ipa,
    })
}

/// Run the cleaning rules over every row; rejected rows are counted, never
/// fatal. Row checks run in parallel, deduplication keeps input order.
pub fn clean(raw: &[RawEntry], res: &Resources) -> (Lexicon, CleaningReport) {
    let checked: Vec<Result<PronEntry, &'static str>> =
        raw.par_iter().map(|r| clean_one(r, res)).collect();
    let mut removed: BTreeMap<String, usize> = RULES.iter().map(|r| (r.to_string(), 0)).collect();
    let mut lex = Lexicon::new();
    for result in checked {
        let rule = match result {
            Ok(entry) => {
                if lex.insert(entry) {
                    continue;
                }
                DUPLICATE
            }
            Err(rule) => rule,
        };
        *removed.get_mut(rule).expect("known rule") += 1;
    }
    let report = CleaningReport {
        input_count: raw.len(),
        retained_count: lex.len(),
        removed_by_rule: removed,
    };
    (lex, report)
}
