use std::collections::HashMap;
use std::sync::OnceLock;

use unicode_script::{Script, UnicodeScript};

use crate::data::{self, DataError};

use super::LexiconError;

/// Majority ISO 15924 script over the characters that carry one. Ties go to
/// the script seen first.
pub fn detect_script(grapheme: &str) -> Result<&'static str, LexiconError> {
    let mut counts: Vec<(Script, usize)> = Vec::new();
    for c in grapheme.chars() {
        let script = c.script();
        if matches!(script, Script::Common | Script::Inherited | Script::Unknown) {
            continue;
        }
        match counts.iter_mut().find(|(s, _)| *s == script) {
            Some((_, n)) => *n += 1,
            None => counts.push((script, 1)),
        }
    }
    let mut best: Option<(Script, usize)> = None;
    for (script, n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((script, n));
        }
    }
    best.map(|(s, _)| s.short_name())
        .ok_or(LexiconError::NoScript)
}

/// Official scripts per language.
#[derive(Debug, Clone, Default)]
pub struct ScriptTable {
    scripts: HashMap<String, Vec<String>>,
}

impl ScriptTable {
    pub fn from_tsv(text: &str, source_name: &str) -> Result<Self, DataError> {
        let mut scripts = HashMap::new();
        for rec in data::records(text) {
            let [lang, list] = rec.fields[..] else {
                return Err(DataError::malformed(
                    source_name,
                    rec.line,
                    "expected lang<TAB>scripts",
                ));
            };
            let list: Vec<String> = list
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            if list.is_empty() || list.iter().any(|s| s.len() != 4) {
                return Err(DataError::malformed(
                    source_name,
                    rec.line,
                    "scripts must be ISO 15924 codes",
                ));
            }
            scripts.insert(lang.trim().to_string(), list);
        }
        Ok(ScriptTable { scripts })
    }

    pub fn builtin() -> &'static ScriptTable {
        static TABLE: OnceLock<ScriptTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            ScriptTable::from_tsv(data::SCRIPT_TABLE, "lang_scripts.tsv")
                .expect("builtin script table parses")
        })
    }

    pub fn official(&self, lang: &str) -> Option<&[String]> {
        self.scripts.get(lang).map(Vec::as_slice)
    }

    pub fn is_multi_script(&self, lang: &str) -> bool {
        self.official(lang).is_some_and(|s| s.len() > 1)
    }
}
