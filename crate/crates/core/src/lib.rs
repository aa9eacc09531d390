//! Multilingual phoneme-to-grapheme toolkit.

pub mod config;
pub mod data;
pub mod eval;
pub mod features;
pub mod ipa;
pub mod lexicon;
pub mod mining;
pub mod p2g;
pub mod resources;
pub mod split;
