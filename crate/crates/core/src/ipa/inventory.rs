use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use crate::data::{self, DataError};

/// How a symbol of the IPA inventory behaves during segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolClass {
    /// A segment nucleus: consonant or vowel letter.
    Base,
    /// Combining tie bar joining two bases into one segment.
    Tie,
    /// Tone letter or combining tone mark.
    Tone,
    /// Combining diacritic.
    Diacritic,
    /// Spacing secondary-articulation modifier (ʰ, ʲ, ʷ, ...).
    Secondary,
    /// Stress, length and syllable marks.
    Prosodic,
    /// Spacing modifier that survives stripping (ʼ, ˞).
    Modifier,
}

impl SymbolClass {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "base" => SymbolClass::Base,
            "tie" => SymbolClass::Tie,
            "tone" => SymbolClass::Tone,
            "diacritic" => SymbolClass::Diacritic,
            "secondary" => SymbolClass::Secondary,
            "prosodic" => SymbolClass::Prosodic,
            "modifier" => SymbolClass::Modifier,
            _ => return None,
        })
    }

    /// Combining marks bind to the base before any tie bar is considered.
    pub fn is_combining(self) -> bool {
        matches!(self, SymbolClass::Diacritic | SymbolClass::Tone)
    }

    /// True for marks that hang off a preceding base.
    pub fn is_attachable(self) -> bool {
        !matches!(self, SymbolClass::Base | SymbolClass::Tie)
    }

    /// Whether diacritic/tone stripping removes marks of this class.
    pub fn is_stripped(self) -> bool {
        matches!(
            self,
            SymbolClass::Tone
                | SymbolClass::Diacritic
                | SymbolClass::Secondary
                | SymbolClass::Prosodic
        )
    }
}

/// The extended IPA symbol inventory.
#[derive(Debug, Clone)]
pub struct Inventory {
    bases: HashSet<String>,
    max_base_chars: usize,
    marks: HashMap<char, SymbolClass>,
}

impl Inventory {
    pub fn from_tsv(text: &str, source_name: &str) -> Result<Self, DataError> {
        let mut bases = HashSet::new();
        let mut marks = HashMap::new();
        for rec in data::records(text) {
            let [symbol, class] = rec.fields[..] else {
                return Err(DataError::malformed(
                    source_name,
                    rec.line,
                    "expected symbol<TAB>class",
                ));
            };
            let class = SymbolClass::parse(class.trim()).ok_or_else(|| {
                DataError::malformed(source_name, rec.line, format!("unknown class {class:?}"))
            })?;
            if symbol.is_empty() {
                return Err(DataError::malformed(source_name, rec.line, "empty symbol"));
            }
            if class == SymbolClass::Base {
                bases.insert(symbol.to_string());
                continue;
            }
            let mut chars = symbol.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => {
                    marks.insert(c, class);
                }
                _ => {
                    return Err(DataError::malformed(
                        source_name,
                        rec.line,
                        "non-base symbols must be a single code point",
                    ))
                }
            }
        }
        let max_base_chars = bases.iter().map(|b| b.chars().count()).max().unwrap_or(1);
        Ok(Inventory {
            bases,
            max_base_chars,
            marks,
        })
    }

    /// The inventory compiled into the crate.
    pub fn builtin() -> &'static Inventory {
        static INVENTORY: OnceLock<Inventory> = OnceLock::new();
        INVENTORY.get_or_init(|| {
            Inventory::from_tsv(data::IPA_INVENTORY, "ipa_inventory.tsv")
                .expect("builtin IPA inventory parses")
        })
    }

    pub fn is_base(&self, symbol: &str) -> bool {
        self.bases.contains(symbol)
    }

    pub fn bases(&self) -> impl Iterator<Item = &str> {
        self.bases.iter().map(String::as_str)
    }

    pub fn max_base_chars(&self) -> usize {
        self.max_base_chars
    }

    pub fn class_of(&self, c: char) -> Option<SymbolClass> {
        if let Some(class) = self.marks.get(&c) {
            return Some(*class);
        }
        let mut buf = [0u8; 4];
        self.is_base(c.encode_utf8(&mut buf))
            .then_some(SymbolClass::Base)
    }

    pub fn marks(&self) -> impl Iterator<Item = (char, SymbolClass)> + '_ {
        self.marks.iter().map(|(c, k)| (*c, *k))
    }
}
