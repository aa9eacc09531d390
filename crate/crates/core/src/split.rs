//! Language-stratified train/eval/test splitting and the streaming
//! upsampling generator for training data.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ipa::{strip_diacritics_tones_with, Inventory, IpaString};
use crate::lexicon::{lang_script_tag, Lexicon, PronEntry, ScriptTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("need more than {needed} entries to split, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("invalid split parameters: {0}")]
    InvalidParams(String),
    #[error("pairs line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub test_size: usize,
    pub eval_size: usize,
    pub seed: u64,
    /// Examples must have strictly fewer tokens than this.
    pub max_tokens: usize,
    /// Most held-out entries any one language may contribute to each set.
    pub per_lang_cap: Option<usize>,
    /// Floor on original:augmented emissions per source example.
    pub min_original_ratio: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_size: 5000,
            eval_size: 5000,
            seed: 0,
            max_tokens: 40,
            per_lang_cap: None,
            min_original_ratio: 1.0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), SplitError> {
        if self.max_tokens == 0 {
            return Err(SplitError::InvalidParams(
                "max_tokens must be positive".into(),
            ));
        }
        if !(self.min_original_ratio >= 0.0 && self.min_original_ratio.is_finite()) {
            return Err(SplitError::InvalidParams(
                "ratio must be a non-negative number".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<PronEntry>,
    pub eval: Vec<PronEntry>,
    pub test: Vec<PronEntry>,
}

/// Apportion `size` slots over groups in proportion to `counts` by largest
/// remainder, never giving a group more than `caps[i]`. Remainder ties go
/// to the larger group, then the earlier one. Slots a capped group cannot
/// take are handed on in the same order.
pub fn largest_remainder(size: usize, counts: &[usize], caps: &[usize]) -> Option<Vec<usize>> {
    let total: usize = counts.iter().sum();
    if size > caps.iter().sum::<usize>() {
        return None;
    }
    if size == 0 || total == 0 {
        return Some(vec![0; counts.len()]);
    }
    let size_w = size as u128;
    let total_w = total as u128;
    let mut alloc: Vec<usize> = counts
        .iter()
        .zip(caps)
        .map(|(c, cap)| ((size_w * *c as u128 / total_w) as usize).min(*cap))
        .collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|a, b| {
        let ra = size_w * counts[*a] as u128 % total_w;
        let rb = size_w * counts[*b] as u128 % total_w;
        rb.cmp(&ra).then(counts[*b].cmp(&counts[*a])).then(a.cmp(b))
    });
    let mut remaining = size - alloc.iter().sum::<usize>();
    while remaining > 0 {
        for i in &order {
            if remaining == 0 {
                break;
            }
            if alloc[*i] < caps[*i] {
                alloc[*i] += 1;
                remaining -= 1;
            }
        }
    }
    Some(alloc)
}

/// Shuffle each language with one seeded generator (languages in code
/// order), then carve test and eval slots off the front of each language.
pub fn stratified_split(lex: &Lexicon, spec: &SplitSpec) -> Result<Split, SplitError> {
    spec.validate()?;
    let needed = spec.test_size + spec.eval_size;
    if lex.len() <= needed {
        return Err(SplitError::InsufficientData {
            needed,
            available: lex.len(),
        });
    }
    let mut groups: BTreeMap<&str, Vec<&PronEntry>> = BTreeMap::new();
    for e in lex {
        groups.entry(&e.lang).or_default().push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut groups: Vec<Vec<&PronEntry>> = groups.into_values().collect();
    for g in &mut groups {
        g.shuffle(&mut rng);
    }
    let insufficient = || SplitError::InsufficientData {
        needed,
        available: lex.len(),
    };
    let cap = spec.per_lang_cap.unwrap_or(usize::MAX);
    let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
    let caps: Vec<usize> = counts.iter().map(|c| (*c).min(cap)).collect();
    let test = largest_remainder(spec.test_size, &counts, &caps).ok_or_else(insufficient)?;
    let left: Vec<usize> = counts.iter().zip(&test).map(|(c, t)| c - t).collect();
    let caps: Vec<usize> = left.iter().map(|c| (*c).min(cap)).collect();
    let eval = largest_remainder(spec.eval_size, &left, &caps).ok_or_else(insufficient)?;

    let mut split = Split::default();
    for (g, (t, e)) in groups.iter().zip(test.iter().zip(&eval)) {
        split.test.extend(g[..*t].iter().map(|x| (*x).clone()));
        split.eval.extend(g[*t..t + e].iter().map(|x| (*x).clone()));
        split.train.extend(g[t + e..].iter().map(|x| (*x).clone()));
    }
    Ok(split)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Original,
    CleanedVariant,
    SimilarVariant,
    Repeat,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::CleanedVariant => "cleaned-variant",
            Provenance::SimilarVariant => "similar-variant",
            Provenance::Repeat => "repeat",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Provenance::Original,
            Provenance::CleanedVariant,
            Provenance::SimilarVariant,
            Provenance::Repeat,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| format!("unknown provenance {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainExample {
    pub lang: String,
    pub tag: String,
    pub ipa: IpaString,
    pub grapheme: String,
    pub provenance: Provenance,
}

impl TrainExample {
    /// Tag, IPA segments and grapheme code points.
    pub fn token_count(&self) -> usize {
        1 + self.ipa.len() + self.grapheme.chars().count()
    }

    fn key(&self) -> (String, String, String) {
        (
            self.tag.clone(),
            self.ipa.as_str().to_string(),
            self.grapheme.clone(),
        )
    }
}

/// Alternative transcriptions keyed by (lang, grapheme, ipa) of the entry
/// they may stand in for.
pub type VariantMap = HashMap<(String, String, String), Vec<IpaString>>;

/// Builds a variant map from mined pair rows
/// `lang_a grapheme_a ipa_a lang_b grapheme_b ipa_b distance`; each side's
/// transcription becomes a variant of the other side's entry.
pub fn variants_from_pairs(text: &str, inventory: &Inventory) -> Result<VariantMap, SplitError> {
    let mut map = VariantMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| SplitError::Parse {
            line: idx + 1,
            message,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 6 {
            return Err(err("expected at least six columns".into()));
        }
        let parse = |s: &str| IpaString::parse_with(s, inventory).map_err(|e| err(e.to_string()));
        let (ia, ib) = (parse(f[2])?, parse(f[5])?);
        for (lang, grapheme, own, other) in [(f[0], f[1], &ia, &ib), (f[3], f[4], &ib, &ia)] {
            let list = map
                .entry((
                    lang.to_string(),
                    grapheme.to_string(),
                    own.as_str().to_string(),
                ))
                .or_default();
            if !list.contains(other) {
                list.push(other.clone());
            }
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AugmentStats {
    pub originals: usize,
    pub cleaned_variants: usize,
    pub similar_variants: usize,
    pub repeats: usize,
    pub filtered_length: usize,
    pub filtered_duplicate: usize,
}

impl AugmentStats {
    pub fn emitted(&self) -> usize {
        self.originals + self.cleaned_variants + self.similar_variants + self.repeats
    }
}

/// Streams training examples: for each source entry its original, the
/// stripped variant when it differs, every similar variant, then enough
/// repeats of the original to hold the original:augmented floor. Variants
/// are checked against an index seeded with every original; repeats are
/// intentional duplicates and bypass it. If an original is too long the
/// whole entry is skipped.
pub struct Augmenter<'a> {
    source: std::slice::Iter<'a, PronEntry>,
    variants: &'a VariantMap,
    spec: &'a SplitSpec,
    scripts: &'a ScriptTable,
    inventory: &'a Inventory,
    seen: HashSet<(String, String, String)>,
    queue: VecDeque<TrainExample>,
    stats: AugmentStats,
}

pub fn upsample_generate<'a>(
    train: &'a [PronEntry],
    variants: &'a VariantMap,
    spec: &'a SplitSpec,
    scripts: &'a ScriptTable,
    inventory: &'a Inventory,
) -> Augmenter<'a> {
    let seen = train
        .iter()
        .map(|e| {
            (
                lang_script_tag(e, scripts),
                e.ipa.as_str().to_string(),
                e.grapheme.clone(),
            )
        })
        .collect();
    Augmenter {
        source: train.iter(),
        variants,
        spec,
        scripts,
        inventory,
        seen,
        queue: VecDeque::new(),
        stats: AugmentStats::default(),
    }
}

impl Augmenter<'_> {
    pub fn stats(&self) -> AugmentStats {
        self.stats
    }

    fn fill(&mut self, entry: &PronEntry) {
        let original = TrainExample {
            lang: entry.lang.clone(),
            tag: lang_script_tag(entry, self.scripts),
            ipa: entry.ipa.clone(),
            grapheme: entry.grapheme.clone(),
            provenance: Provenance::Original,
        };
        if original.token_count() >= self.spec.max_tokens {
            self.stats.filtered_length += 1;
            return;
        }
        let mut augmented = Vec::new();
        let stripped = strip_diacritics_tones_with(&entry.ipa, self.inventory);
        if stripped != entry.ipa && !stripped.is_empty() {
            augmented.push((stripped, Provenance::CleanedVariant));
        }
        let key = (
            entry.lang.clone(),
            entry.grapheme.clone(),
            entry.ipa.as_str().to_string(),
        );
        for v in self.variants.get(&key).into_iter().flatten() {
            augmented.push((v.clone(), Provenance::SimilarVariant));
        }
        let mut extra = Vec::new();
        for (ipa, provenance) in augmented {
            let ex = TrainExample {
                ipa,
                provenance,
                ..original.clone()
            };
            if ex.token_count() >= self.spec.max_tokens {
                self.stats.filtered_length += 1;
            } else if !self.seen.insert(ex.key()) {
                self.stats.filtered_duplicate += 1;
            } else {
                match provenance {
                    Provenance::CleanedVariant => self.stats.cleaned_variants += 1,
                    _ => self.stats.similar_variants += 1,
                }
                extra.push(ex);
            }
        }
        let needed = (self.spec.min_original_ratio * extra.len() as f64).ceil() as usize;
        let repeats = needed.saturating_sub(1);
        self.stats.originals += 1;
        self.stats.repeats += repeats;
        let repeat = TrainExample {
            provenance: Provenance::Repeat,
            ..original.clone()
        };
        self.queue.push_back(original);
        self.queue.extend(extra);
        self.queue.extend(std::iter::repeat_n(repeat, repeats));
    }
}

impl Iterator for Augmenter<'_> {
    type Item = TrainExample;

    fn next(&mut self) -> Option<TrainExample> {
        loop {
            if let Some(ex) = self.queue.pop_front() {
                return Some(ex);
            }
            let entry = self.source.next()?;
            self.fill(entry);
        }
    }
}

/// Lexicon TSV with the provenance column appended.
pub fn write_example<W: Write + ?Sized>(w: &mut W, ex: &TrainExample) -> std::io::Result<()> {
    writeln!(
        w,
        "{}\t{}\t{}\t{}",
        ex.lang, ex.grapheme, ex.ipa, ex.provenance
    )
}
