//! Soundalike mining: nearest-neighbour candidate retrieval over string
//! embeddings, refined by the exact feature edit distance, and the filters
//! applied to generated transcription variants.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::eval::cer;
use crate::features::{
    edit_distance_vectors, mean_pool, normalized_feature_distance, DistanceParams, FeatureError,
    FeatureVector,
};
use crate::ipa::{strip_diacritics_tones_with, IpaString};
use crate::lexicon::Lexicon;
use crate::resources::Resources;

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("vector {id} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        id: usize,
        expected: usize,
        found: usize,
    },
    #[error("no embedding for entry {0}")]
    MissingEmbedding(usize),
    #[error("embeddings line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid mining parameters: {0}")]
    InvalidParams(String),
    #[error("original transcription is empty")]
    EmptyOriginal,
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// How stage 1 searches the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMode {
    /// Scan every stored vector; results are the exact nearest neighbours.
    Exhaustive,
    /// Inverted file: vectors are bucketed by k-means centroid and a query
    /// scans the `probes` nearest buckets.
    Ivf {
        lists: usize,
        probes: usize,
        seed: u64,
    },
}

const KMEANS_ITERATIONS: usize = 10;

#[derive(Debug, Clone)]
pub struct VectorIndex {
    dim: usize,
    ids: Vec<usize>,
    vectors: Vec<Vec<f64>>,
    mode: IndexMode,
    centroids: Vec<Vec<f64>>,
    buckets: Vec<Vec<usize>>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(centroid, v);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn kmeans(vectors: &[Vec<f64>], lists: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut centroids: Vec<Vec<f64>> = order
        .iter()
        .take(lists)
        .map(|i| vectors[*i].clone())
        .collect();
    let mut assign = vec![0; vectors.len()];
    for _ in 0..KMEANS_ITERATIONS {
        assign = vectors.par_iter().map(|v| nearest(&centroids, v)).collect();
        let dim = vectors[0].len();
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (v, c) in vectors.iter().zip(&assign) {
            counts[*c] += 1;
            for (s, x) in sums[*c].iter_mut().zip(v) {
                *s += x;
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            // empty clusters keep their previous centroid
            if counts[c] > 0 {
                *centroid = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let mut buckets = vec![Vec::new(); centroids.len()];
    for (pos, c) in assign.into_iter().enumerate() {
        buckets[c].push(pos);
    }
    (centroids, buckets)
}

/// Checks dimensions and builds the search structure.
pub fn build_index(
    embeddings: Vec<(usize, Vec<f64>)>,
    mode: IndexMode,
) -> Result<VectorIndex, MiningError> {
    let dim = embeddings.first().map_or(0, |(_, v)| v.len());
    for (id, v) in &embeddings {
        if v.len() != dim {
            return Err(MiningError::DimensionMismatch {
                id: *id,
                expected: dim,
                found: v.len(),
            });
        }
    }
    let (ids, vectors): (Vec<usize>, Vec<Vec<f64>>) = embeddings.into_iter().unzip();
    let (centroids, buckets) = match mode {
        IndexMode::Ivf { lists, seed, .. } if !vectors.is_empty() => {
            if lists == 0 {
                return Err(MiningError::InvalidParams(
                    "IVF needs at least one list".into(),
                ));
            }
            kmeans(&vectors, lists, seed)
        }
        _ => (Vec::new(), Vec::new()),
    };
    Ok(VectorIndex {
        dim,
        ids,
        vectors,
        mode,
        centroids,
        buckets,
    })
}

impl VectorIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Up to `k` ids with their squared Euclidean distances, nearest first;
    /// ties are broken by id.
    pub fn query(&self, v: &[f64], k: usize) -> Vec<(usize, f64)> {
        if self.is_empty() || k == 0 {
            return Vec::new();
        }
        let positions: Vec<usize> = match self.mode {
            IndexMode::Exhaustive => (0..self.ids.len()).collect(),
            IndexMode::Ivf { probes, .. } => {
                let mut order: Vec<(f64, usize)> = self
                    .centroids
                    .iter()
                    .enumerate()
                    .map(|(c, centroid)| (sq_dist(centroid, v), c))
                    .collect();
                order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                order
                    .iter()
                    .take(probes.max(1))
                    .flat_map(|(_, c)| self.buckets[*c].iter().copied())
                    .collect()
            }
        };
        let mut hits: Vec<(usize, f64)> = positions
            .into_iter()
            .map(|p| (self.ids[p], sq_dist(&self.vectors[p], v)))
            .collect();
        hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        hits.truncate(k);
        hits
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningParams {
    pub k: usize,
    pub threshold: f64,
    pub exclude_existing: bool,
    pub index: IndexMode,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            k: 10_000,
            threshold: 5.0,
            exclude_existing: false,
            index: IndexMode::Exhaustive,
        }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<(), MiningError> {
        if self.k == 0 {
            return Err(MiningError::InvalidParams("k must be at least 1".into()));
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return Err(MiningError::InvalidParams(
                "threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Two lexicon entries, by position, with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoundalikePair {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Mean-pooled feature embedding of every entry, keyed by entry position.
pub fn lexicon_embeddings(
    lex: &Lexicon,
    res: &Resources,
) -> Result<Vec<(usize, Vec<f64>)>, MiningError> {
    let vectors = segment_vectors(lex, res)?;
    Ok(vectors
        .iter()
        .enumerate()
        .map(|(id, v)| (id, mean_pool(v, res.features.dims())))
        .collect())
}

fn segment_vectors(lex: &Lexicon, res: &Resources) -> Result<Vec<Vec<FeatureVector>>, MiningError> {
    lex.entries()
        .par_iter()
        .map(|e| {
            res.features
                .vectors(&e.ipa, &res.inventory)
                .map_err(MiningError::from)
        })
        .collect()
}

/// Two-stage search: the `k` nearest embeddings of each entry are scored
/// with the exact feature edit distance and kept at or under the threshold.
/// `embeddings` replaces the built-in mean-pool vectors when given and must
/// cover every entry position.
pub fn mine_soundalikes(
    lex: &Lexicon,
    params: &MiningParams,
    distance: &DistanceParams,
    embeddings: Option<Vec<(usize, Vec<f64>)>>,
    res: &Resources,
) -> Result<Vec<SoundalikePair>, MiningError> {
    params.validate()?;
    distance.validate()?;
    let vectors = segment_vectors(lex, res)?;
    let embeddings = match embeddings {
        Some(e) => e,
        None => lexicon_embeddings(lex, res)?,
    };
    let mut by_id: Vec<Option<&[f64]>> = vec![None; lex.len()];
    for (id, v) in &embeddings {
        if let Some(slot) = by_id.get_mut(*id) {
            *slot = Some(v);
        }
    }
    let queries: Vec<&[f64]> = by_id
        .iter()
        .enumerate()
        .map(|(id, v)| v.ok_or(MiningError::MissingEmbedding(id)))
        .collect::<Result<_, _>>()?;
    let index = build_index(
        embeddings
            .iter()
            .filter(|(id, _)| *id < lex.len())
            .cloned()
            .collect(),
        params.index,
    )?;

    let mut pairs: Vec<SoundalikePair> = queries
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, q)| {
            let hits = index.query(q, params.k.saturating_add(1));
            let vectors = &vectors;
            hits.into_iter()
                .filter(move |(j, _)| *j != i)
                .take(params.k)
                .filter_map(move |(j, _)| {
                    let d = edit_distance_vectors(&vectors[i], &vectors[j], distance);
                    (d <= params.threshold).then(|| SoundalikePair {
                        a: i.min(j),
                        b: i.max(j),
                        distance: d,
                    })
                })
        })
        .collect();
    pairs.sort_by_key(|p| (p.a, p.b));
    pairs.dedup_by(|x, y| (x.a, x.b) == (y.a, y.b));

    if params.exclude_existing {
        let existing: HashSet<(&str, &str, &str)> = lex
            .iter()
            .map(|e| (e.lang.as_str(), e.grapheme.as_str(), e.ipa.as_str()))
            .collect();
        let entries = lex.entries();
        pairs.retain(|p| {
            let (ea, eb) = (&entries[p.a], &entries[p.b]);
            !existing.contains(&(ea.lang.as_str(), ea.grapheme.as_str(), eb.ipa.as_str()))
                && !existing.contains(&(eb.lang.as_str(), eb.grapheme.as_str(), ea.ipa.as_str()))
        });
    }
    Ok(pairs)
}

/// `lang_a grapheme_a ipa_a lang_b grapheme_b ipa_b distance`
pub fn write_pairs<W: Write + ?Sized>(
    w: &mut W,
    lex: &Lexicon,
    pairs: &[SoundalikePair],
) -> std::io::Result<()> {
    let entries = lex.entries();
    for p in pairs {
        let (a, b) = (&entries[p.a], &entries[p.b]);
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            a.lang, a.grapheme, a.ipa, b.lang, b.grapheme, b.ipa, p.distance
        )?;
    }
    Ok(())
}

/// Parses `id<TAB>v1,v2,...` lines.
pub fn parse_embeddings(text: &str) -> Result<Vec<(usize, Vec<f64>)>, MiningError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: &str| MiningError::Parse {
            line: idx + 1,
            message: message.to_string(),
        };
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| err("expected id<TAB>vector"))?;
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| err("id is not a non-negative integer"))?;
        let vector = values
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| err("vector component is not a number"))?;
        out.push((id, vector));
    }
    Ok(out)
}

pub const DEFAULT_MAX_CER: f64 = 0.15;
pub const DEFAULT_MAX_NORM_DISTANCE: f64 = 0.01;

/// Keeps a generated transcription unless its CER against the original
/// exceeds `max_cer`.
pub fn filter_generation_by_cer(
    original: &IpaString,
    generated: &IpaString,
    max_cer: f64,
) -> Result<bool, MiningError> {
    if original.is_empty() {
        return Err(MiningError::EmptyOriginal);
    }
    Ok(cer(original.as_str(), generated.as_str()) <= max_cer)
}

/// Keeps a variant whose diacritic- and tone-stripped form lies strictly
/// within `max_norm` of the stripped original.
pub fn filter_by_feature_distance(
    original: &IpaString,
    generated: &IpaString,
    max_norm: f64,
    res: &Resources,
) -> Result<bool, MiningError> {
    let a = strip_diacritics_tones_with(original, &res.inventory);
    let b = strip_diacritics_tones_with(generated, &res.inventory);
    let d = normalized_feature_distance(&a, &b, &res.features, &DistanceParams::default())?;
    Ok(d < max_norm)
}
