//! N-best beam search over joint-token derivations.
//!
//! A grapheme string scores as its best derivation. Each step expands every
//! active hypothesis by one token; finished and unfinished expansions are
//! ranked together and the best `beam_width` survive, so a width of one is
//! greedy decoding. Search stops when the beam empties or when `n_best`
//! distinct strings are finished and no active hypothesis scores above the
//! worst of them; scores only fall as hypotheses grow, so none could
//! overtake.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::ipa::IpaString;

use super::model::{JointModel, BOS, EOS};
use super::{Candidate, P2gError};

/// Output length bound: `LENGTH_FACTOR * segments + LENGTH_SLACK` characters.
pub const LENGTH_FACTOR: usize = 3;
pub const LENGTH_SLACK: usize = 5;
/// Probability charged for dropping a segment the model cannot spell.
pub const DELETION_FLOOR: f64 = 1e-6;

pub fn default_beam_width(n_best: usize) -> usize {
    3 * n_best
}

pub fn max_output_len(segments: usize) -> usize {
    LENGTH_FACTOR * segments + LENGTH_SLACK
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoding {
    pub candidates: Vec<Candidate>,
    pub beam_width: usize,
    /// The tag was not seen in training; untagged distributions were used.
    pub unknown_tag: bool,
    /// Segments that fell back to their base symbol.
    pub base_fallbacks: usize,
    /// Segments dropped at the deletion floor.
    pub deleted: usize,
}

#[derive(Debug, Clone)]
struct Hyp {
    pos: usize,
    history: Vec<u32>,
    out: String,
    out_len: usize,
    score: f64,
    finished: bool,
}

impl Hyp {
    fn rank(&self, other: &Hyp) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| other.finished.cmp(&self.finished))
            .then_with(|| self.out.cmp(&other.out))
            .then_with(|| self.pos.cmp(&other.pos))
            .then_with(|| self.history.cmp(&other.history))
    }
}

/// Model symbol for each input segment: its full form if seen in training,
/// else its base symbol if seen, else `None`.
fn input_keys(model: &JointModel, ipa: &IpaString) -> (Vec<Option<String>>, usize, usize) {
    let mut fallbacks = 0;
    let mut unknown = 0;
    let keys = ipa
        .segments()
        .iter()
        .map(|s| {
            if model.knows_phoneme(s.source()) {
                Some(s.source().to_string())
            } else if model.knows_phoneme(s.base()) {
                fallbacks += 1;
                Some(s.base().to_string())
            } else {
                unknown += 1;
                None
            }
        })
        .collect();
    (keys, fallbacks, unknown)
}

fn expand(
    model: &JointModel,
    tag: Option<&str>,
    keys: &[Option<String>],
    bound: usize,
    h: &Hyp,
    out: &mut Vec<Hyp>,
) {
    let chain = model.chain(tag, &h.history);
    let keep = model.order() - 1;
    let push_token = |id: u32, history: &[u32]| {
        let mut next = history.to_vec();
        next.push(id);
        if next.len() > keep {
            next.remove(0);
        }
        next
    };
    if h.pos == keys.len() {
        out.push(Hyp {
            score: h.score + model.prob_in_chain(&chain, EOS).ln(),
            finished: true,
            ..h.clone()
        });
    }
    let mut consumed = false;
    for len in 0..=2 {
        if h.pos + len > keys.len() {
            break;
        }
        let Some(span) = keys[h.pos..h.pos + len]
            .iter()
            .cloned()
            .collect::<Option<Vec<String>>>()
        else {
            break;
        };
        for id in model.tokens_for(&span) {
            let chunk = model.token(*id).expect("token id from the model");
            let out_len = h.out_len + chunk.graphemes.chars().count();
            if out_len > bound {
                continue;
            }
            consumed |= len > 0;
            out.push(Hyp {
                pos: h.pos + len,
                history: push_token(*id, &h.history),
                out: format!("{}{}", h.out, chunk.graphemes),
                out_len,
                score: h.score + model.prob_in_chain(&chain, *id).ln(),
                finished: false,
            });
        }
    }
    if h.pos < keys.len() && !consumed {
        out.push(Hyp {
            pos: h.pos + 1,
            score: h.score + DELETION_FLOOR.ln(),
            ..h.clone()
        });
    }
}

pub fn beam_decode(
    model: &JointModel,
    tag: &str,
    ipa: &IpaString,
    n_best: usize,
    beam_width: Option<usize>,
) -> Result<Decoding, P2gError> {
    if ipa.is_empty() {
        return Err(P2gError::EmptyInput);
    }
    if n_best == 0 {
        return Err(P2gError::InvalidParams("n_best must be at least 1".into()));
    }
    let width = beam_width.unwrap_or_else(|| default_beam_width(n_best));
    if width == 0 {
        return Err(P2gError::InvalidParams(
            "beam width must be at least 1".into(),
        ));
    }
    let unknown_tag = !model.has_tag(tag);
    let ctx = (!unknown_tag).then_some(tag);
    let (keys, base_fallbacks, deleted) = input_keys(model, ipa);
    let bound = max_output_len(ipa.len());

    let mut active = vec![Hyp {
        pos: 0,
        history: vec![BOS],
        out: String::new(),
        out_len: 0,
        score: 0.0,
        finished: false,
    }];
    let mut finished: HashMap<String, f64> = HashMap::new();
    while !active.is_empty() {
        let mut pool = Vec::new();
        for h in &active {
            expand(model, ctx, &keys, bound, h, &mut pool);
        }
        // recombine identical states, keeping the best derivation
        let mut best: HashMap<(bool, usize, Vec<u32>, String), usize> = HashMap::new();
        let mut merged: Vec<Hyp> = Vec::with_capacity(pool.len());
        for h in pool {
            let key = (
                h.finished,
                h.pos,
                if h.finished {
                    Vec::new()
                } else {
                    h.history.clone()
                },
                h.out.clone(),
            );
            match best.get(&key) {
                Some(i) if merged[*i].score >= h.score => {}
                Some(i) => merged[*i] = h,
                None => {
                    best.insert(key, merged.len());
                    merged.push(h);
                }
            }
        }
        merged.sort_by(Hyp::rank);
        merged.truncate(width);
        active.clear();
        for h in merged {
            if h.finished {
                let slot = finished.entry(h.out).or_insert(f64::NEG_INFINITY);
                *slot = slot.max(h.score);
            } else {
                active.push(h);
            }
        }
        if finished.len() >= n_best {
            let mut scores: Vec<f64> = finished.values().copied().collect();
            scores.sort_by(|a, b| b.total_cmp(a));
            let worst = scores[n_best - 1];
            if active.iter().all(|h| h.score <= worst) {
                break;
            }
        }
    }

    let mut ranked: Vec<(String, f64)> = finished.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let candidates = ranked
        .into_iter()
        .take(n_best)
        .enumerate()
        .map(|(i, (grapheme, log_score))| Candidate {
            grapheme,
            log_score,
            beam_rank: i + 1,
        })
        .collect();
    Ok(Decoding {
        candidates,
        beam_width: width,
        unknown_tag,
        base_fallbacks,
        deleted,
    })
}

/// Decode many (tag, IPA) inputs in parallel; results keep input order.
pub fn decode_all(
    model: &JointModel,
    inputs: &[(String, IpaString)],
    n_best: usize,
    beam_width: Option<usize>,
) -> Vec<Result<Decoding, P2gError>> {
    inputs
        .par_iter()
        .map(|(tag, ipa)| beam_decode(model, tag, ipa, n_best, beam_width))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::p2g::model::TrainingPair;

    fn pair(tag: &str, ipa: &str, g: &str) -> TrainingPair {
        TrainingPair {
            tag: tag.into(),
            ipa: IpaString::parse(ipa).unwrap(),
            grapheme: g.into(),
        }
    }

    fn identity_model() -> JointModel {
        let words = [
            "aba", "bab", "ab", "ba", "aab", "bba", "abba", "baab", "a", "b",
        ];
        let data: Vec<TrainingPair> = words.iter().map(|w| pair("<xx>", w, w)).collect();
        JointModel::train(&data, 3).unwrap().0
    }

    /// Follows the single most probable token at each step.
    fn greedy(model: &JointModel, tag: &str, ipa: &IpaString) -> String {
        let keys: Vec<String> = ipa
            .segments()
            .iter()
            .map(|s| s.source().to_string())
            .collect();
        let mut history = vec![BOS];
        let (mut pos, mut out) = (0, String::new());
        let bound = max_output_len(keys.len());
        loop {
            let mut best: Option<(f64, u32, usize)> = None;
            let mut consider = |p: f64, id: u32, len: usize| {
                if best.is_none_or(|(b, _, _)| p > b) {
                    best = Some((p, id, len));
                }
            };
            if pos == keys.len() {
                consider(model.prob(Some(tag), &history, EOS), EOS, 0);
            }
            for len in 0..=2.min(keys.len() - pos) {
                for id in model.tokens_for(&keys[pos..pos + len]) {
                    if out.chars().count() + model.token(*id).unwrap().graphemes.chars().count()
                        <= bound
                    {
                        consider(model.prob(Some(tag), &history, *id), *id, len);
                    }
                }
            }
            let (_, id, len) = best.unwrap();
            if id == EOS {
                return out;
            }
            out.push_str(&model.token(id).unwrap().graphemes);
            history.push(id);
            pos += len;
        }
    }

    #[test]
    fn identity_model_spells_input() {
        let model = identity_model();
        let ipa = IpaString::parse("aba").unwrap();
        let d = beam_decode(&model, "<xx>", &ipa, 3, None).unwrap();
        assert_eq!(d.beam_width, 9);
        assert_eq!(d.candidates[0].grapheme, "aba");
        assert!(!d.unknown_tag);
    }

    #[test]
    fn width_one_is_greedy() {
        let model = identity_model();
        for w in ["abab", "bbaa", "a", "baba"] {
            let ipa = IpaString::parse(w).unwrap();
            let d = beam_decode(&model, "<xx>", &ipa, 1, Some(1)).unwrap();
            assert_eq!(d.candidates[0].grapheme, greedy(&model, "<xx>", &ipa));
        }
    }

    #[test]
    fn default_width_is_three_times_n() {
        let model = identity_model();
        let ipa = IpaString::parse("ab").unwrap();
        assert_eq!(
            beam_decode(&model, "<xx>", &ipa, 30, None)
                .unwrap()
                .beam_width,
            90
        );
        assert_eq!(
            beam_decode(&model, "<xx>", &ipa, 2, Some(5))
                .unwrap()
                .beam_width,
            5
        );
    }

    #[test]
    fn candidates_are_ranked_and_distinct() {
        let model = identity_model();
        let ipa = IpaString::parse("abba").unwrap();
        let d = beam_decode(&model, "<xx>", &ipa, 10, None).unwrap();
        for (i, c) in d.candidates.iter().enumerate() {
            assert_eq!(c.beam_rank, i + 1);
        }
        assert!(d
            .candidates
            .windows(2)
            .all(|w| w[0].log_score >= w[1].log_score));
        let mut seen: Vec<&str> = d.candidates.iter().map(|c| c.grapheme.as_str()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), d.candidates.len());
    }

    #[test]
    fn tag_selects_mapping() {
        let mut data = Vec::new();
        for (ipa, de, en) in [
            ("vo", "wo", "vo"),
            ("vi", "wi", "vi"),
            ("ivo", "iwo", "ivo"),
            ("ov", "ow", "ov"),
        ] {
            data.push(pair("<de>", ipa, de));
            data.push(pair("<en>", ipa, en));
        }
        let model = JointModel::train(&data, 3).unwrap().0;
        let ipa = IpaString::parse("vovi").unwrap();
        assert_eq!(
            beam_decode(&model, "<de>", &ipa, 1, None)
                .unwrap()
                .candidates[0]
                .grapheme,
            "wowi"
        );
        assert_eq!(
            beam_decode(&model, "<en>", &ipa, 1, None)
                .unwrap()
                .candidates[0]
                .grapheme,
            "vovi"
        );
        let unknown = beam_decode(&model, "<fr>", &ipa, 1, None).unwrap();
        assert!(unknown.unknown_tag);
        assert_eq!(unknown.candidates.len(), 1);
    }

    #[test]
    fn unseen_segments_back_off() {
        let model = identity_model();
        let d = beam_decode(&model, "<xx>", &IpaString::parse("ãb").unwrap(), 1, None).unwrap();
        assert_eq!(d.base_fallbacks, 1);
        assert_eq!(d.candidates[0].grapheme, "ab");
        let d = beam_decode(&model, "<xx>", &IpaString::parse("akb").unwrap(), 1, None).unwrap();
        assert_eq!(d.deleted, 1);
        assert_eq!(d.candidates[0].grapheme, "ab");
    }

    #[test]
    fn batch_matches_single() {
        let model = identity_model();
        let inputs: Vec<(String, IpaString)> = ["ab", "bba", "a"]
            .iter()
            .map(|w| ("<xx>".to_string(), IpaString::parse(w).unwrap()))
            .collect();
        let batch = decode_all(&model, &inputs, 2, None);
        for ((tag, ipa), got) in inputs.iter().zip(batch) {
            assert_eq!(
                got.unwrap(),
                beam_decode(&model, tag, ipa, 2, None).unwrap()
            );
        }
    }

    #[test]
    fn empty_input() {
        let model = identity_model();
        assert!(matches!(
            beam_decode(&model, "<xx>", &IpaString::parse("").unwrap(), 1, None),
            Err(P2gError::EmptyInput)
        ));
    }
}
