//! Shipped data files and the line-oriented TSV format they share.
//!
//! Every data file is UTF-8, one record per line, fields separated by tabs.
//! Lines starting with `#` and blank lines are ignored, as is any trailing
//! field that starts with `#`.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub const IPA_INVENTORY: &str = include_str!("../data/ipa_inventory.tsv");
pub const FEATURE_TABLE: &str = include_str!("../data/features.tsv");
pub const XSAMPA_CHART: &str = include_str!("../data/xsampa.tsv");
pub const ARPABET_CHART: &str = include_str!("../data/arpabet.tsv");
pub const LANGUAGE_REGISTRY: &str = include_str!("../data/iso639.tsv");
pub const SCRIPT_TABLE: &str = include_str!("../data/lang_scripts.tsv");

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{source_name}:{line}: {message}")]
    Malformed {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    pub(crate) fn malformed(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        DataError::Malformed {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}

/// One non-comment record: 1-based line number and its fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record<'a> {
    pub line: usize,
    pub fields: Vec<&'a str>,
}

/// Iterate over the data records of a tab-separated file body.
pub fn records(text: &str) -> impl Iterator<Item = Record<'_>> {
    text.lines().enumerate().filter_map(|(idx, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            return None;
        }
        let mut fields: Vec<&str> = line.split('\t').collect();
        if let Some(pos) = fields.iter().skip(1).position(|f| f.starts_with('#')) {
            fields.truncate(pos + 1);
        }
        Some(Record {
            line: idx + 1,
            fields,
        })
    })
}

pub fn read_file(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_trailing_notes_are_dropped() {
        let text = "# header\n\na\tb\t# note\r\nc\td\n";
        let recs: Vec<_> = records(text).collect();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].fields, vec!["a", "b"]);
        assert_eq!(recs[0].line, 3);
        assert_eq!(recs[1].fields, vec!["c", "d"]);
    }

    #[test]
    fn hash_is_literal_in_the_first_field_only_when_not_leading() {
        let recs: Vec<_> = records("x#\t#\n").collect();
        assert_eq!(recs[0].fields, vec!["x#"]);
    }
}
