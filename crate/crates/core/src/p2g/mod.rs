//! Statistical phoneme-to-grapheme baseline: EM chunk alignment, a tagged
//! joint-sequence n-gram model, and n-best beam decoding.

pub mod align;
mod candidates;
mod decode;
mod model;

use thiserror::Error;

use crate::lexicon::{lang_script_tag, Lexicon, ScriptTable};

pub use align::{AlignedPair, Aligner, Chunk};
pub use candidates::{load_external_candidates, write_candidates, CandidateMap};
pub use decode::{
    beam_decode, decode_all, default_beam_width, max_output_len, Decoding, DELETION_FLOOR,
};
pub use model::{
    phoneme_keys, JointModel, TrainStats, TrainingPair, BOS, DEFAULT_ORDER, DISCOUNT, EOS,
};

#[derive(Debug, Error)]
pub enum P2gError {
    #[error("cannot align {phonemes} segments with {graphemes} characters")]
    AlignmentFailure { phonemes: usize, graphemes: usize },
    #[error("no alignable training entries")]
    EmptyLexicon,
    #[error("empty input")]
    EmptyInput,
    #[error("{0}")]
    InvalidParams(String),
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error("candidate file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("candidate file line {line}: scores increase with rank")]
    NonMonotoneScores { line: usize },
}

/// One ranked output string.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub grapheme: String,
    pub log_score: f64,
    pub beam_rank: usize,
}

/// Tagged training pairs for every entry of a lexicon.
pub fn training_pairs(lex: &Lexicon, scripts: &ScriptTable) -> Vec<TrainingPair> {
    lex.iter()
        .map(|e| TrainingPair {
            tag: lang_script_tag(e, scripts),
            ipa: e.ipa.clone(),
            grapheme: e.grapheme.clone(),
        })
        .collect()
}
