//! Lexicon TSV: `lang<TAB>grapheme<TAB>ipa`, one entry per line. Extra
//! trailing columns (such as provenance) are ignored on read.

use std::io::Write;

use crate::resources::Resources;

use super::clean::clean_one;
use super::{Lexicon, LexiconError, PronEntry, RawEntry};

/// Lenient parse: short rows become entries with empty fields so that the
/// cleaning rules account for them.
pub fn parse_raw(text: &str) -> Vec<RawEntry> {
    text.lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut fields = line.split('\t');
            let mut next = || fields.next().unwrap_or("").to_string();
            RawEntry {
                lang: next(),
                grapheme: next(),
                ipa: next(),
            }
        })
        .collect()
}

/// Strict parse of already-cleaned rows, keeping duplicates and order.
pub fn read_entries(text: &str, res: &Resources) -> Result<Vec<PronEntry>, LexiconError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(LexiconError::Parse {
                line: idx + 1,
                message: "expected lang<TAB>grapheme<TAB>ipa".into(),
            });
        }
        let raw = RawEntry::new(fields[0], fields[1], fields[2]);
        let entry = clean_one(&raw, res).map_err(|rule| LexiconError::Parse {
            line: idx + 1,
            message: format!("entry rejected by rule {rule}"),
        })?;
        out.push(entry);
    }
    Ok(out)
}

pub fn read_lexicon(text: &str, res: &Resources) -> Result<Lexicon, LexiconError> {
    Ok(read_entries(text, res)?.into_iter().collect())
}

pub fn write_entry<W: Write + ?Sized>(w: &mut W, e: &PronEntry) -> std::io::Result<()> {
    writeln!(w, "{}\t{}\t{}", e.lang, e.grapheme, e.ipa)
}

pub fn write_lexicon<'a, W: Write + ?Sized>(
    w: &mut W,
    entries: impl IntoIterator<Item = &'a PronEntry>,
) -> std::io::Result<()> {
    for e in entries {
        write_entry(w, e)?;
    }
    Ok(())
}
