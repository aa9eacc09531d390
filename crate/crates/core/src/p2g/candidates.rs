//! Candidate lists produced outside this crate, in the TSV format
//! `tag<TAB>ipa<TAB>rank<TAB>grapheme<TAB>log_score`.

use std::collections::BTreeMap;
use std::io::Write;

use crate::ipa::normalize_text;

use super::{Candidate, P2gError};

pub type CandidateMap = BTreeMap<(String, String), Vec<Candidate>>;

/// Rows for one (tag, ipa) key must carry ranks 1, 2, ... in file order with
/// non-increasing scores. Keys are normalized like lexicon text.
pub fn load_external_candidates(text: &str) -> Result<CandidateMap, P2gError> {
    let mut out = CandidateMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        let n = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(P2gError::Parse {
                line: n,
                message: "expected tag<TAB>ipa<TAB>rank<TAB>grapheme<TAB>log_score".into(),
            });
        }
        let rank: usize = f[2].trim().parse().map_err(|_| P2gError::Parse {
            line: n,
            message: "rank is not a positive integer".into(),
        })?;
        let log_score: f64 = f[4].trim().parse().map_err(|_| P2gError::Parse {
            line: n,
            message: "log_score is not a number".into(),
        })?;
        let list = out
            .entry((f[0].trim().to_string(), normalize_text(f[1])))
            .or_default();
        if rank != list.len() + 1 {
            return Err(P2gError::Parse {
                line: n,
                message: format!("expected rank {}, found {rank}", list.len() + 1),
            });
        }
        if list.last().is_some_and(|c| log_score > c.log_score) {
            return Err(P2gError::NonMonotoneScores { line: n });
        }
        list.push(Candidate {
            grapheme: normalize_text(f[3]),
            log_score,
            beam_rank: rank,
        });
    }
    Ok(out)
}

pub fn write_candidates<W: Write + ?Sized>(
    w: &mut W,
    tag: &str,
    ipa: &str,
    candidates: &[Candidate],
) -> std::io::Result<()> {
    for c in candidates {
        writeln!(
            w,
            "{tag}\t{ipa}\t{}\t{}\t{}",
            c.beam_rank, c.grapheme, c.log_score
        )?;
    }
    Ok(())
}
