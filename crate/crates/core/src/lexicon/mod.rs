//! Pronunciation lexicon ingestion: cleaning, language and script
//! normalization, language-script tagging and IPA pair extraction.

mod clean;
mod lang;
mod script;
pub mod tsv;

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::ipa::IpaString;

pub use clean::{clean, CleaningReport, RawEntry, RULES};
pub use lang::LangRegistry;
pub use script::{detect_script, ScriptTable};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("unknown language {0:?}")]
    UnknownLanguage(String),
    #[error("no script-bearing characters")]
    NoScript,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// One (language, script, grapheme, IPA) record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PronEntry {
    pub lang: String,
    pub script: Option<String>,
    pub grapheme: String,
    pub ipa: IpaString,
}

impl PronEntry {
    pub fn key(&self) -> EntryKey {
        (
            self.lang.clone(),
            self.script.clone(),
            self.grapheme.clone(),
            self.ipa.as_str().to_string(),
        )
    }

    /// Checks the structural invariants that cleaning guarantees.
    pub fn is_well_formed(&self) -> bool {
        (2..=3).contains(&self.lang.len())
            && self.lang.bytes().all(|b| b.is_ascii_lowercase())
            && !self.grapheme.is_empty()
            && !self.ipa.is_empty()
    }
}

pub type EntryKey = (String, Option<String>, String, String);

/// A deduplicated multiset of entries. Several transcriptions of one
/// grapheme are kept; identical tuples are not.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<PronEntry>,
    index: HashSet<EntryKey>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the entry unless an identical tuple is present. Returns whether
    /// it was inserted.
    pub fn insert(&mut self, entry: PronEntry) -> bool {
        if self.index.insert(entry.key()) {
            self.entries.push(entry);
            true
        } else {
            false
        }
    }

    pub fn contains(&self, entry: &PronEntry) -> bool {
        self.index.contains(&entry.key())
    }

    pub fn entries(&self) -> &[PronEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PronEntry> {
        self.entries.iter()
    }
}

impl FromIterator<PronEntry> for Lexicon {
    fn from_iter<I: IntoIterator<Item = PronEntry>>(iter: I) -> Self {
        let mut lex = Lexicon::new();
        for e in iter {
            lex.insert(e);
        }
        lex
    }
}

impl<'a> IntoIterator for &'a Lexicon {
    type Item = &'a PronEntry;
    type IntoIter = std::slice::Iter<'a, PronEntry>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// `<lang>` for single-script languages, `<lang_Script>` otherwise.
pub fn lang_script_tag(entry: &PronEntry, scripts: &ScriptTable) -> String {
    if scripts.is_multi_script(&entry.lang) {
        match entry
            .script
            .as_deref()
            .or_else(|| detect_script(&entry.grapheme).ok())
        {
            Some(s) => format!("<{}_{}>", entry.lang, s),
            None => format!("<{}>", entry.lang),
        }
    } else {
        format!("<{}>", entry.lang)
    }
}

/// An ordered pair of distinct transcriptions of one grapheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpaPair {
    pub lang: String,
    pub grapheme: String,
    pub ipa_a: IpaString,
    pub ipa_b: IpaString,
}

/// All ordered pairs of distinct transcriptions within each
/// (language, grapheme) group, groups in sorted order.
pub fn extract_ipa_pairs(lex: &Lexicon) -> Vec<IpaPair> {
    let mut groups: BTreeMap<(&str, &str), Vec<&IpaString>> = BTreeMap::new();
    for e in lex {
        let group = groups.entry((&e.lang, &e.grapheme)).or_default();
        if !group.contains(&&e.ipa) {
            group.push(&e.ipa);
        }
    }
    let mut out = Vec::new();
    for ((lang, grapheme), ipas) in groups {
        for a in &ipas {
            for b in &ipas {
                if a != b {
                    out.push(IpaPair {
                        lang: lang.to_string(),
                        grapheme: grapheme.to_string(),
                        ipa_a: (*a).clone(),
                        ipa_b: (*b).clone(),
                    });
                }
            }
        }
    }
    out
}
