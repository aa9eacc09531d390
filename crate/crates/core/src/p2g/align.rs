//! Many-to-many chunk alignment between phoneme segments and grapheme
//! characters, trained by EM over the whole corpus.

use std::collections::HashMap;

use super::P2gError;

/// Longest phoneme or grapheme run inside one chunk.
pub const MAX_CHUNK: usize = 2;
/// Entries whose longer side exceeds this multiple of the shorter side are
/// not aligned.
pub const MAX_LENGTH_RATIO: usize = 4;

const EM_MAX_ITERATIONS: usize = 30;
const EM_TOLERANCE: f64 = 1e-7;
/// Dirichlet concentration of the variational M-step. Values below one
/// push mass toward few chunk types.
const PRIOR: f64 = 0.1;
/// Log weight of chunk types never seen in training.
const UNSEEN_LOG_WEIGHT: f64 = -50.0;
/// Fixed log-penalty per symbol by which a chunk departs from 1:1. Without
/// it EM prefers memorizing frequent 2:2 chunks over composing 1:1 ones.
pub const SHAPE_PENALTY: f64 = 2.0;

/// Allowed (phonemes, graphemes) chunk shapes in tie-break order: smaller
/// chunks first.
const SHAPES: [(usize, usize); 8] = [
    (0, 1),
    (1, 0),
    (1, 1),
    (0, 2),
    (2, 0),
    (1, 2),
    (2, 1),
    (2, 2),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chunk {
    pub phonemes: Vec<String>,
    pub graphemes: String,
}

/// An alignment of one entry: the chunks concatenate back to the inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub chunks: Vec<Chunk>,
}

impl AlignedPair {
    pub fn phonemes(&self) -> Vec<String> {
        self.chunks
            .iter()
            .flat_map(|c| c.phonemes.iter().cloned())
            .collect()
    }

    pub fn graphemes(&self) -> String {
        self.chunks.iter().map(|c| c.graphemes.as_str()).collect()
    }
}

pub fn check_lengths(phonemes: usize, graphemes: usize) -> Result<(), P2gError> {
    let (short, long) = (phonemes.min(graphemes), phonemes.max(graphemes));
    if short == 0 || long > short * MAX_LENGTH_RATIO {
        return Err(P2gError::AlignmentFailure {
            phonemes,
            graphemes,
        });
    }
    Ok(())
}

struct Edge {
    from: usize,
    to: usize,
    chunk: usize,
}

struct Lattice {
    nodes: usize,
    edges: Vec<Edge>,
}

/// Chunk weights learned by EM.
#[derive(Debug, Clone, Default)]
pub struct Aligner {
    ids: HashMap<Chunk, usize>,
    chunks: Vec<Chunk>,
    penalties: Vec<f64>,
    log_weights: Vec<f64>,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Digamma by upward recurrence and the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + x.ln()
        - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

fn shape_penalty(di: usize, dj: usize) -> f64 {
    (di.abs_diff(1) + dj.abs_diff(1)) as f64 * SHAPE_PENALTY
}

fn chunk_at(
    phonemes: &[String],
    graphemes: &[char],
    i: usize,
    j: usize,
    di: usize,
    dj: usize,
) -> Chunk {
    Chunk {
        phonemes: phonemes[i..i + di].to_vec(),
        graphemes: graphemes[j..j + dj].iter().collect(),
    }
}

impl Aligner {
    /// Run EM over every alignable pair. Pairs failing the length check are
    /// skipped; the count of skipped pairs is returned alongside.
    pub fn train(pairs: &[(Vec<String>, String)]) -> (Aligner, usize) {
        let mut aligner = Aligner::default();
        let mut lattices = Vec::new();
        let mut skipped = 0;
        for (p, g) in pairs {
            let g: Vec<char> = g.chars().collect();
            if check_lengths(p.len(), g.len()).is_err() {
                skipped += 1;
                continue;
            }
            lattices.push(aligner.lattice(p, &g));
        }

        let mut shape_types: HashMap<(usize, usize), usize> = HashMap::new();
        for c in &aligner.chunks {
            *shape_types
                .entry((c.phonemes.len(), c.graphemes.chars().count()))
                .or_default() += 1;
        }
        let uniform = (1.0 / SHAPES.len() as f64).ln();
        aligner.log_weights = aligner
            .chunks
            .iter()
            .map(|c| {
                uniform
                    - (shape_types[&(c.phonemes.len(), c.graphemes.chars().count())] as f64).ln()
            })
            .collect();

        let mut previous = f64::NEG_INFINITY;
        for _ in 0..EM_MAX_ITERATIONS {
            let mut counts = vec![0.0; aligner.chunks.len()];
            let mut log_likelihood = 0.0;
            for lat in &lattices {
                log_likelihood += aligner.expected_counts(lat, &mut counts);
            }
            let total: f64 = counts.iter().sum();
            let norm = digamma(total + PRIOR * counts.len() as f64);
            for (w, c) in aligner.log_weights.iter_mut().zip(&counts) {
                *w = digamma(c + PRIOR) - norm;
            }
            if (log_likelihood - previous).abs() <= EM_TOLERANCE * log_likelihood.abs() {
                break;
            }
            previous = log_likelihood;
        }
        (aligner, skipped)
    }

    fn chunk_id(&mut self, chunk: Chunk) -> usize {
        if let Some(id) = self.ids.get(&chunk) {
            return *id;
        }
        let id = self.chunks.len();
        self.ids.insert(chunk.clone(), id);
        self.penalties.push(shape_penalty(
            chunk.phonemes.len(),
            chunk.graphemes.chars().count(),
        ));
        self.chunks.push(chunk);
        id
    }

    fn lattice(&mut self, phonemes: &[String], graphemes: &[char]) -> Lattice {
        let (n, m) = (phonemes.len(), graphemes.len());
        let mut edges = Vec::new();
        for i in 0..=n {
            for j in 0..=m {
                for (di, dj) in SHAPES {
                    if i + di > n || j + dj > m {
                        continue;
                    }
                    let chunk = chunk_at(phonemes, graphemes, i, j, di, dj);
                    let id = self.chunk_id(chunk);
                    edges.push(Edge {
                        from: i * (m + 1) + j,
                        to: (i + di) * (m + 1) + j + dj,
                        chunk: id,
                    });
                }
            }
        }
        Lattice {
            nodes: (n + 1) * (m + 1),
            edges,
        }
    }

    fn weight(&self, chunk: usize) -> f64 {
        self.log_weights
            .get(chunk)
            .copied()
            .unwrap_or(UNSEEN_LOG_WEIGHT)
            - self.penalties[chunk]
    }

    /// Forward-backward; adds posterior chunk counts and returns the log
    /// marginal likelihood. Edges are generated in topological order of
    /// their source node.
    fn expected_counts(&self, lat: &Lattice, counts: &mut [f64]) -> f64 {
        let mut alpha = vec![f64::NEG_INFINITY; lat.nodes];
        alpha[0] = 0.0;
        for e in &lat.edges {
            alpha[e.to] = log_add(alpha[e.to], alpha[e.from] + self.weight(e.chunk));
        }
        let mut beta = vec![f64::NEG_INFINITY; lat.nodes];
        beta[lat.nodes - 1] = 0.0;
        for e in lat.edges.iter().rev() {
            beta[e.from] = log_add(beta[e.from], beta[e.to] + self.weight(e.chunk));
        }
        let z = alpha[lat.nodes - 1];
        for e in &lat.edges {
            let post = (alpha[e.from] + self.weight(e.chunk) + beta[e.to] - z).exp();
            counts[e.chunk] += post;
        }
        z
    }

    /// Most probable chunking. On equal scores the incoming chunk with the
    /// smaller shape wins, then the lexicographically smaller chunk.
    pub fn align(&self, phonemes: &[String], graphemes: &str) -> Result<AlignedPair, P2gError> {
        let g: Vec<char> = graphemes.chars().collect();
        check_lengths(phonemes.len(), g.len())?;
        let (n, m) = (phonemes.len(), g.len());
        let idx = |i: usize, j: usize| i * (m + 1) + j;
        let mut best = vec![f64::NEG_INFINITY; (n + 1) * (m + 1)];
        let mut back: Vec<Option<(usize, usize, Chunk)>> = vec![None; (n + 1) * (m + 1)];
        best[0] = 0.0;
        for i in 0..=n {
            for j in 0..=m {
                if i == 0 && j == 0 {
                    continue;
                }
                for (di, dj) in SHAPES {
                    if di > i || dj > j {
                        continue;
                    }
                    let (pi, pj) = (i - di, j - dj);
                    let chunk = chunk_at(phonemes, &g, pi, pj, di, dj);
                    let w = self
                        .ids
                        .get(&chunk)
                        .map_or(UNSEEN_LOG_WEIGHT - shape_penalty(di, dj), |id| {
                            self.weight(*id)
                        });
                    let score = best[idx(pi, pj)] + w;
                    let better = match &back[idx(i, j)] {
                        None => score > f64::NEG_INFINITY,
                        Some((_, _, current)) => {
                            score > best[idx(i, j)]
                                || (score == best[idx(i, j)]
                                    && (di + dj)
                                        == current.phonemes.len()
                                            + current.graphemes.chars().count()
                                    && chunk < *current)
                        }
                    };
                    if better {
                        best[idx(i, j)] = score;
                        back[idx(i, j)] = Some((pi, pj, chunk));
                    }
                }
            }
        }
        let mut chunks = Vec::new();
        let (mut i, mut j) = (n, m);
        while i > 0 || j > 0 {
            let (pi, pj, chunk) = back[idx(i, j)].clone().expect("every node is reachable");
            chunks.push(chunk);
            i = pi;
            j = pj;
        }
        chunks.reverse();
        Ok(AlignedPair { chunks })
    }

    pub fn chunk_types(&self) -> usize {
        self.chunks.len()
    }
}
