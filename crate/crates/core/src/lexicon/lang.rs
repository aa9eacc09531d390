use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use crate::data::{self, DataError};

use super::LexiconError;

/// ISO 639 registry: resolves 639-1, 639-3, 639-2/B codes and English names.
#[derive(Debug, Clone)]
pub struct LangRegistry {
    two_letter: HashSet<String>,
    by_code: HashMap<String, String>,
    by_name: HashMap<String, String>,
}

impl LangRegistry {
    pub fn from_tsv(text: &str, source_name: &str) -> Result<Self, DataError> {
        let mut two_letter = HashSet::new();
        let mut by_code = HashMap::new();
        let mut by_name = HashMap::new();
        for rec in data::records(text) {
            let [alpha3, alpha2, biblio, name] = rec.fields[..] else {
                return Err(DataError::malformed(
                    source_name,
                    rec.line,
                    "expected alpha3<TAB>alpha2<TAB>bibliographic<TAB>name",
                ));
            };
            if alpha3.len() != 3 {
                return Err(DataError::malformed(
                    source_name,
                    rec.line,
                    "alpha3 must have 3 letters",
                ));
            }
            let canonical = if alpha2.is_empty() { alpha3 } else { alpha2 }.to_string();
            if !alpha2.is_empty() {
                two_letter.insert(alpha2.to_string());
            }
            by_code.insert(alpha3.to_string(), canonical.clone());
            if !biblio.is_empty() {
                by_code.insert(biblio.to_string(), canonical.clone());
            }
            by_name.entry(name.to_lowercase()).or_insert(canonical);
        }
        Ok(LangRegistry {
            two_letter,
            by_code,
            by_name,
        })
    }

    pub fn builtin() -> &'static LangRegistry {
        static REGISTRY: OnceLock<LangRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            LangRegistry::from_tsv(data::LANGUAGE_REGISTRY, "iso639.tsv")
                .expect("builtin registry parses")
        })
    }

    fn code(&self, key: &str) -> Option<String> {
        match key.len() {
            2 if self.two_letter.contains(key) => Some(key.to_string()),
            3 => self.by_code.get(key).cloned(),
            _ => None,
        }
    }

    /// ISO 639-1 code when one exists, otherwise ISO 639-3. Accepts codes,
    /// English names, and tags with region/script subtags (`pt-BR`, `eng_latn`).
    pub fn normalize(&self, code_or_name: &str) -> Result<String, LexiconError> {
        let key = code_or_name.trim().to_lowercase();
        if let Some(code) = self.code(&key).or_else(|| self.by_name.get(&key).cloned()) {
            return Ok(code);
        }
        if let Some((primary, _)) = key.split_once(['-', '_']) {
            if let Some(code) = self.code(primary) {
                return Ok(code);
            }
        }
        Err(LexiconError::UnknownLanguage(code_or_name.to_string()))
    }
}
