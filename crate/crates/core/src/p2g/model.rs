//! Joint-sequence n-gram model over aligned (phoneme chunk, grapheme chunk)
//! tokens, conditioned on a language-script tag.
//!
//! Probabilities use interpolated absolute discounting. For a known tag the
//! back-off chain is (tag, full history) down to (tag, empty history), then
//! the untagged unigram distribution, then uniform. Sequences for an
//! unknown tag use the untagged chain at every order instead.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::ipa::IpaString;

use super::align::{Aligner, Chunk};
use super::P2gError;

pub const DEFAULT_ORDER: usize = 6;
pub const DISCOUNT: f64 = 0.75;
const FORMAT_HEADER: &str = "polyipa-joint-model 1";

/// Token id reserved for the sequence start. It is only ever history.
pub const BOS: u32 = 0;
/// Token id of the end-of-sequence event.
pub const EOS: u32 = 1;
const FIRST_CHUNK: u32 = 2;
/// Context id of the untagged distributions.
const UNTAGGED: u32 = u32::MAX;

/// One training sequence: tag, IPA and grapheme target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub tag: String,
    pub ipa: IpaString,
    pub grapheme: String,
}

/// Phoneme symbols of an IPA string as the model sees them.
pub fn phoneme_keys(ipa: &IpaString) -> Vec<String> {
    ipa.segments()
        .iter()
        .map(|s| s.source().to_string())
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Node {
    total: u64,
    counts: HashMap<u32, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrainStats {
    pub aligned: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    order: usize,
    tags: Vec<String>,
    tag_ids: HashMap<String, u32>,
    /// Chunk tokens from id 2 on; ids 0 and 1 are BOS and EOS.
    tokens: Vec<Chunk>,
    token_ids: HashMap<Chunk, u32>,
    /// Highest-order event counts: (tag, history, next).
    events: BTreeMap<(u32, Vec<u32>, u32), u64>,
    /// Key: context id followed by the history.
    nodes: HashMap<Vec<u32>, Node>,
    by_phonemes: HashMap<Vec<String>, Vec<u32>>,
    phonemes: HashSet<String>,
}

impl JointModel {
    fn empty(order: usize) -> Self {
        JointModel {
            order,
            tags: Vec::new(),
            tag_ids: HashMap::new(),
            tokens: Vec::new(),
            token_ids: HashMap::new(),
            events: BTreeMap::new(),
            nodes: HashMap::new(),
            by_phonemes: HashMap::new(),
            phonemes: HashSet::new(),
        }
    }

    /// Align every pair by EM, then count tagged joint n-grams. Pairs that
    /// cannot be aligned are skipped and counted.
    pub fn train(
        data: &[TrainingPair],
        order: usize,
    ) -> Result<(JointModel, TrainStats), P2gError> {
        if order < 2 {
            return Err(P2gError::InvalidParams("order must be at least 2".into()));
        }
        let pairs: Vec<(Vec<String>, String)> = data
            .iter()
            .map(|d| (phoneme_keys(&d.ipa), d.grapheme.clone()))
            .collect();
        let (aligner, skipped) = Aligner::train(&pairs);
        let mut model = JointModel::empty(order);
        let mut sequences: Vec<(u32, Vec<u32>)> = Vec::new();
        for (d, (p, g)) in data.iter().zip(&pairs) {
            let Ok(aligned) = aligner.align(p, g) else {
                continue;
            };
            let tag = model.intern_tag(&d.tag);
            let ids = aligned
                .chunks
                .into_iter()
                .map(|c| model.intern_token(c))
                .collect();
            sequences.push((tag, ids));
        }
        if sequences.is_empty() {
            return Err(P2gError::EmptyLexicon);
        }
        for (tag, ids) in &sequences {
            let mut seq = Vec::with_capacity(ids.len() + 2);
            seq.push(BOS);
            seq.extend(ids);
            seq.push(EOS);
            for k in 1..seq.len() {
                let start = k.saturating_sub(order - 1);
                *model
                    .events
                    .entry((*tag, seq[start..k].to_vec(), seq[k]))
                    .or_default() += 1;
            }
        }
        model.rebuild();
        let stats = TrainStats {
            aligned: sequences.len(),
            skipped,
        };
        Ok((model, stats))
    }

    fn intern_tag(&mut self, tag: &str) -> u32 {
        if let Some(id) = self.tag_ids.get(tag) {
            return *id;
        }
        let id = self.tags.len() as u32;
        self.tags.push(tag.to_string());
        self.tag_ids.insert(tag.to_string(), id);
        id
    }

    fn intern_token(&mut self, chunk: Chunk) -> u32 {
        if let Some(id) = self.token_ids.get(&chunk) {
            return *id;
        }
        let id = FIRST_CHUNK + self.tokens.len() as u32;
        self.tokens.push(chunk.clone());
        self.token_ids.insert(chunk, id);
        id
    }

    /// Derive every lower-order node from the event counts.
    fn rebuild(&mut self) {
        self.nodes.clear();
        for ((tag, history, next), count) in &self.events {
            for ctx in [*tag, UNTAGGED] {
                for len in 0..=history.len() {
                    let mut key = Vec::with_capacity(len + 1);
                    key.push(ctx);
                    key.extend_from_slice(&history[history.len() - len..]);
                    let node = self.nodes.entry(key).or_default();
                    node.total += count;
                    *node.counts.entry(*next).or_default() += count;
                }
            }
        }
        self.by_phonemes.clear();
        self.phonemes.clear();
        for (idx, t) in self.tokens.iter().enumerate() {
            self.by_phonemes
                .entry(t.phonemes.clone())
                .or_default()
                .push(FIRST_CHUNK + idx as u32);
            for p in &t.phonemes {
                self.phonemes.insert(p.clone());
            }
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tag_ids.contains_key(tag)
    }

    pub fn knows_phoneme(&self, p: &str) -> bool {
        self.phonemes.contains(p)
    }

    /// Size of the predicted vocabulary: every chunk token plus EOS.
    pub fn vocab_size(&self) -> usize {
        self.tokens.len() + 1
    }

    /// Every predictable token id: EOS then the chunk tokens.
    pub fn vocab(&self) -> impl Iterator<Item = u32> {
        std::iter::once(EOS).chain(FIRST_CHUNK..FIRST_CHUNK + self.tokens.len() as u32)
    }

    pub fn token(&self, id: u32) -> Option<&Chunk> {
        id.checked_sub(FIRST_CHUNK)
            .and_then(|i| self.tokens.get(i as usize))
    }

    /// Tokens whose phoneme side is exactly `phonemes`.
    pub fn tokens_for(&self, phonemes: &[String]) -> &[u32] {
        self.by_phonemes.get(phonemes).map_or(&[], Vec::as_slice)
    }

    /// The chain of existing nodes for a context, lowest order first.
    pub(crate) fn chain(&self, tag: Option<&str>, history: &[u32]) -> Vec<&Node> {
        let history = &history[history.len().saturating_sub(self.order - 1)..];
        let tag = tag.and_then(|t| self.tag_ids.get(t)).copied();
        let mut out = Vec::with_capacity(history.len() + 2);
        let mut key = vec![UNTAGGED];
        if let Some(n) = self.nodes.get(&key) {
            out.push(n);
        }
        let ctx = tag.unwrap_or(UNTAGGED);
        key[0] = ctx;
        if ctx != UNTAGGED {
            match self.nodes.get(&key) {
                Some(n) => out.push(n),
                None => return out,
            }
        }
        for len in 1..=history.len() {
            key.truncate(1);
            key.extend_from_slice(&history[history.len() - len..]);
            match self.nodes.get(&key) {
                Some(n) => out.push(n),
                None => break,
            }
        }
        out
    }

    pub(crate) fn prob_in_chain(&self, chain: &[&Node], next: u32) -> f64 {
        let mut p = 1.0 / self.vocab_size() as f64;
        for node in chain {
            let c = node.counts.get(&next).copied().unwrap_or(0) as f64;
            let total = node.total as f64;
            let types = node.counts.len() as f64;
            p = ((c - DISCOUNT).max(0.0) + DISCOUNT * types * p) / total;
        }
        p
    }

    /// P(next | tag, history). An unknown or absent tag uses the untagged
    /// distributions.
    pub fn prob(&self, tag: Option<&str>, history: &[u32], next: u32) -> f64 {
        self.prob_in_chain(&self.chain(tag, history), next)
    }

    pub fn log_prob(&self, tag: Option<&str>, history: &[u32], next: u32) -> f64 {
        self.prob(tag, history, next).ln()
    }

    /// Every observed (tag, history) context, for normalization checks.
    pub fn contexts(&self) -> Vec<(Option<String>, Vec<u32>)> {
        let mut out: Vec<(Option<String>, Vec<u32>)> = self
            .nodes
            .keys()
            .map(|k| {
                let tag = (k[0] != UNTAGGED).then(|| self.tags[k[0] as usize].clone());
                (tag, k[1..].to_vec())
            })
            .collect();
        out.sort();
        out
    }

    /// Line-based text dump: header, order, tags, tokens, then event counts
    /// in sorted order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{FORMAT_HEADER}").unwrap();
        writeln!(out, "order\t{}", self.order).unwrap();
        writeln!(out, "tags\t{}", self.tags.len()).unwrap();
        for t in &self.tags {
            writeln!(out, "{t}").unwrap();
        }
        writeln!(out, "tokens\t{}", self.tokens.len()).unwrap();
        for t in &self.tokens {
            writeln!(out, "{}\t{}", t.phonemes.join(" "), t.graphemes).unwrap();
        }
        writeln!(out, "events\t{}", self.events.len()).unwrap();
        for ((tag, history, next), count) in &self.events {
            let h: Vec<String> = history.iter().map(u32::to_string).collect();
            writeln!(out, "{tag}\t{}\t{next}\t{count}", h.join(" ")).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<JointModel, P2gError> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
        };
        let (n, header) = lines.next("header")?;
        if header != FORMAT_HEADER {
            return Err(bad(n, "unknown model format"));
        }
        let (n, order) = lines.section("order")?;
        if order < 2 {
            return Err(bad(n, "order must be at least 2"));
        }
        let mut model = JointModel::empty(order);
        let (_, tag_count) = lines.section("tags")?;
        for _ in 0..tag_count {
            let (_, l) = lines.next("tag")?;
            model.intern_tag(l);
        }
        let (_, token_count) = lines.section("tokens")?;
        for _ in 0..token_count {
            let (n, l) = lines.next("token")?;
            let (p, g) = l
                .split_once('\t')
                .ok_or_else(|| bad(n, "expected phonemes<TAB>graphemes"))?;
            let phonemes = p
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            model.intern_token(Chunk {
                phonemes,
                graphemes: g.to_string(),
            });
        }
        let (_, event_count) = lines.section("events")?;
        let max_id = FIRST_CHUNK + model.tokens.len() as u32;
        for _ in 0..event_count {
            let (n, l) = lines.next("event")?;
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 4 {
                return Err(bad(n, "expected tag<TAB>history<TAB>next<TAB>count"));
            }
            let num = |s: &str| s.parse::<u64>().map_err(|_| bad(n, "not a number"));
            let tag = num(f[0])? as u32;
            let history = f[1]
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|s| num(s).map(|v| v as u32))
                .collect::<Result<Vec<_>, _>>()?;
            let next = num(f[2])? as u32;
            let count = num(f[3])?;
            if tag as usize >= model.tags.len()
                || next >= max_id
                || next == BOS
                || history.iter().any(|h| *h >= max_id)
                || history.len() >= order
            {
                return Err(bad(n, "id out of range"));
            }
            model.events.insert((tag, history, next), count);
        }
        model.rebuild();
        Ok(model)
    }
}

fn bad(line: usize, message: &str) -> P2gError {
    P2gError::ModelFormat {
        line,
        message: message.to_string(),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), P2gError> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| bad(0, &format!("unexpected end of file, expected {what}")))
    }

    fn section(&mut self, name: &str) -> Result<(usize, usize), P2gError> {
        let (n, l) = self.next(name)?;
        l.strip_prefix(name)
            .and_then(|r| r.strip_prefix('\t'))
            .and_then(|r| r.parse::<usize>().ok())
            .map(|v| (n, v))
            .ok_or_else(|| bad(n, &format!("expected {name}<TAB>count")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(tag: &str, ipa: &str, g: &str) -> TrainingPair {
        TrainingPair {
            tag: tag.into(),
            ipa: IpaString::parse(ipa).unwrap(),
            grapheme: g.into(),
        }
    }

    fn corpus() -> Vec<TrainingPair> {
        vec![
            pair("<de>", "vasɐ", "wasser"),
            pair("<de>", "vaɪn", "wein"),
            pair("<de>", "vo", "wo"),
            pair("<en>", "vaɪn", "vine"),
            pair("<en>", "vot", "vote"),
            pair("<en>", "væn", "van"),
        ]
    }

    #[test]
    fn distributions_are_normalized() {
        let (model, stats) = JointModel::train(&corpus(), 3).unwrap();
        assert_eq!(stats.aligned, 6);
        for (tag, history) in model.contexts() {
            let sum: f64 = model
                .vocab()
                .map(|w| model.prob(tag.as_deref(), &history, w))
                .sum();
            assert!(
                (sum - 1.0).abs() < 1e-9,
                "{tag:?} {history:?} sums to {sum}"
            );
        }
        let sum: f64 = model
            .vocab()
            .map(|w| model.prob(Some("<xx>"), &[BOS], w))
            .sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_is_exact() {
        let (model, _) = JointModel::train(&corpus(), DEFAULT_ORDER).unwrap();
        let text = model.to_text();
        let back = JointModel::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back, model);
        let (again, _) = JointModel::train(&corpus(), DEFAULT_ORDER).unwrap();
        assert_eq!(again.to_text(), text);
    }

    #[test]
    fn every_tag_in_vocabulary() {
        let (model, _) = JointModel::train(&corpus(), DEFAULT_ORDER).unwrap();
        assert!(model.has_tag("<de>") && model.has_tag("<en>"));
        assert!(!model.has_tag("<fr>"));
    }

    #[test]
    fn empty_and_bad_inputs() {
        assert!(matches!(
            JointModel::train(&[], 6),
            Err(P2gError::EmptyLexicon)
        ));
        assert!(matches!(
            JointModel::train(&[pair("<en>", "abcde", "a")], 6),
            Err(P2gError::EmptyLexicon)
        ));
        assert!(matches!(
            JointModel::train(&corpus(), 1),
            Err(P2gError::InvalidParams(_))
        ));
        assert!(matches!(
            JointModel::from_text("nonsense"),
            Err(P2gError::ModelFormat { line: 1, .. })
        ));
    }
}
