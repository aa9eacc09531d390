//! Evaluation metrics for grapheme predictions and language-stratified
//! aggregation.
//!
//! All character metrics count Unicode code points of NFC text. Word error
//! for single-word references is 0 or 1; multi-word references use word
//! edit distance over whitespace tokens divided by the reference word count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::ipa::IpaString;
use crate::p2g::Candidate;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("item has no candidates")]
    NoCandidates,
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("N must be at least 1")]
    InvalidN,
}

/// Unit-cost edit distance over any comparable tokens.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn code_points(s: &str) -> Vec<char> {
    s.nfc().collect()
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    edit_distance(&code_points(a), &code_points(b))
}

/// Levenshtein distance over the reference length, clamped to at least 1.
pub fn cer(reference: &str, hypothesis: &str) -> f64 {
    let r = code_points(reference);
    let h = code_points(hypothesis);
    edit_distance(&r, &h) as f64 / r.len().max(1) as f64
}

pub const BLEU_MAX_ORDER: usize = 4;
/// Precision substituted for orders with no matching n-gram.
pub const BLEU_FLOOR: f64 = 0.01;

/// Character-level BLEU with orders 1-4, floor smoothing and the standard
/// brevity penalty. An order with no hypothesis n-grams counts as a zero
/// precision, so identical strings shorter than four characters score
/// below 1.
pub fn char_bleu(reference: &str, hypothesis: &str) -> f64 {
    let r = code_points(reference);
    let h = code_points(hypothesis);
    if h.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=BLEU_MAX_ORDER {
        let mut ref_counts: BTreeMap<&[char], usize> = BTreeMap::new();
        for g in r.windows(n) {
            *ref_counts.entry(g).or_default() += 1;
        }
        let mut hyp_counts: BTreeMap<&[char], usize> = BTreeMap::new();
        for g in h.windows(n) {
            *hyp_counts.entry(g).or_default() += 1;
        }
        let total: usize = hyp_counts.values().sum();
        let matched: usize = hyp_counts
            .iter()
            .map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        let precision = if matched == 0 {
            BLEU_FLOOR
        } else {
            matched as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    let geo = (log_sum / BLEU_MAX_ORDER as f64).exp();
    let bp = if h.len() >= r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / h.len() as f64).exp()
    };
    (geo * bp).min(1.0)
}

pub fn exact_match(reference: &str, top1: &str) -> bool {
    code_points(reference) == code_points(top1)
}

/// Word error of one hypothesis against a reference.
pub fn wer(reference: &str, hypothesis: &str) -> f64 {
    let r: Vec<&str> = reference.split_whitespace().collect();
    if r.len() <= 1 {
        return if exact_match(reference.trim(), hypothesis.trim()) {
            0.0
        } else {
            1.0
        };
    }
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    edit_distance(&r, &h) as f64 / r.len() as f64
}

/// One test input with its ranked predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub lang: String,
    pub tag: String,
    pub ipa: IpaString,
    pub reference: String,
    pub candidates: Vec<Candidate>,
}

impl EvalItem {
    pub fn top1(&self) -> Option<&str> {
        self.candidates.first().map(|c| c.grapheme.as_str())
    }
}

/// Best word error among the first `n` candidates and the 1-based rank of
/// the first candidate that reaches it.
pub fn top_n_wer(item: &EvalItem, n: usize) -> Result<(f64, usize), EvalError> {
    if n == 0 {
        return Err(EvalError::InvalidN);
    }
    let mut best: Option<(f64, usize)> = None;
    for (idx, c) in item.candidates.iter().take(n).enumerate() {
        let w = wer(&item.reference, &c.grapheme);
        if best.is_none_or(|(b, _)| w < b) {
            best = Some((w, idx + 1));
        }
    }
    best.ok_or(EvalError::NoCandidates)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Stat {
        if values.is_empty() {
            return Stat {
                mean: 0.0,
                std: 0.0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopN {
    pub n: usize,
    pub wer: Stat,
    pub mean_best_position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub lang: String,
    pub n_samples: usize,
    pub cer_mean: f64,
    pub cer_std: f64,
    pub bleu_mean: f64,
    pub bleu_std: f64,
    pub exact_match_rate: f64,
    pub exact_match_std: f64,
    pub top_n_wer: Vec<TopN>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub languages: Vec<MetricsRow>,
    pub overall: MetricsRow,
}

/// Per-item scores, computed once and reduced per group.
#[derive(Debug, Clone)]
struct ItemScores {
    cer: f64,
    bleu: f64,
    exact: f64,
    top: Vec<(f64, usize)>,
}

fn score(item: &EvalItem, ns: &[usize]) -> Result<ItemScores, EvalError> {
    let top1 = item.top1().ok_or(EvalError::NoCandidates)?;
    let top = ns
        .iter()
        .map(|n| top_n_wer(item, *n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ItemScores {
        cer: cer(&item.reference, top1),
        bleu: char_bleu(&item.reference, top1),
        exact: f64::from(u8::from(exact_match(&item.reference, top1))),
        top,
    })
}

fn row(lang: &str, scores: &[&ItemScores], ns: &[usize]) -> MetricsRow {
    let col =
        |f: &dyn Fn(&ItemScores) -> f64| Stat::of(&scores.iter().map(|s| f(s)).collect::<Vec<_>>());
    let cer = col(&|s| s.cer);
    let bleu = col(&|s| s.bleu);
    let exact = col(&|s| s.exact);
    let top_n_wer = ns
        .iter()
        .enumerate()
        .map(|(k, n)| TopN {
            n: *n,
            wer: col(&|s| s.top[k].0),
            mean_best_position: col(&|s| s.top[k].1 as f64).mean,
        })
        .collect();
    MetricsRow {
        lang: lang.to_string(),
        n_samples: scores.len(),
        cer_mean: cer.mean,
        cer_std: cer.std,
        bleu_mean: bleu.mean,
        bleu_std: bleu.std,
        exact_match_rate: exact.mean,
        exact_match_std: exact.std,
        top_n_wer,
    }
}

/// Group items by language and aggregate. The overall row pools every item,
/// so its means are the sample-weighted means of the language rows. Rows
/// are ordered by descending sample count, then language code.
pub fn stratify(items: &[EvalItem], ns: &[usize]) -> Result<EvalReport, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if ns.contains(&0) {
        return Err(EvalError::InvalidN);
    }
    let scores = items
        .iter()
        .map(|i| score(i, ns))
        .collect::<Result<Vec<_>, _>>()?;
    let mut groups: BTreeMap<&str, Vec<&ItemScores>> = BTreeMap::new();
    for (item, s) in items.iter().zip(&scores) {
        groups.entry(&item.lang).or_default().push(s);
    }
    let mut languages: Vec<MetricsRow> = groups.iter().map(|(lang, s)| row(lang, s, ns)).collect();
    languages.sort_by(|a, b| {
        b.n_samples
            .cmp(&a.n_samples)
            .then_with(|| a.lang.cmp(&b.lang))
    });
    let all: Vec<&ItemScores> = scores.iter().collect();
    Ok(EvalReport {
        languages,
        overall: row("all", &all, ns),
    })
}

impl EvalReport {
    /// Per-language CSV for plotting.
    pub fn to_csv(&self) -> String {
        let ns: Vec<usize> = self.overall.top_n_wer.iter().map(|t| t.n).collect();
        let mut out =
            String::from("lang,n_samples,cer_mean,cer_std,bleu_mean,bleu_std,exact_match_rate");
        for n in &ns {
            out.push_str(&format!(",top{n}_wer,top{n}_best_position"));
        }
        out.push('\n');
        for r in self.languages.iter().chain(std::iter::once(&self.overall)) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}",
                r.lang,
                r.n_samples,
                r.cer_mean,
                r.cer_std,
                r.bleu_mean,
                r.bleu_std,
                r.exact_match_rate
            ));
            for t in &r.top_n_wer {
                out.push_str(&format!(",{},{}", t.wer.mean, t.mean_best_position));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cands(words: &[&str]) -> Vec<Candidate> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| Candidate {
                grapheme: w.to_string(),
                log_score: -(i as f64),
                beam_rank: i + 1,
            })
            .collect()
    }

    fn item(lang: &str, reference: &str, words: &[&str]) -> EvalItem {
        EvalItem {
            lang: lang.into(),
            tag: format!("<{lang}>"),
            ipa: IpaString::parse("a").unwrap(),
            reference: reference.into(),
            candidates: cands(words),
        }
    }

    /// Textbook full-matrix recursion, kept separate from the rolling rows.
    fn lev_oracle(a: &[char], b: &[char]) -> usize {
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let c = usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = (d[i - 1][j] + 1)
                    .min(d[i][j - 1] + 1)
                    .min(d[i - 1][j - 1] + c);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("kat", "kat"), 0);
        assert_eq!(levenshtein("kat", ""), 3);
        // code points, not bytes
        assert_eq!(levenshtein("müller", "muller"), 1);
    }

    #[test]
    fn cer_examples() {
        assert_eq!(cer("schmidt", "schmitt"), 1.0 / 7.0);
        assert_eq!(cer("kat", "kat"), 0.0);
        assert_eq!(cer("", "ab"), 2.0);
    }

    #[test]
    fn bleu_examples() {
        assert_eq!(char_bleu("abcd", "abcd"), 1.0);
        assert_eq!(char_bleu("schmidt", "schmidt"), 1.0);
        // every precision floored: geometric mean 0.01, equal lengths
        let disjoint = char_bleu("abcd", "wxyz");
        assert!((disjoint - 0.01).abs() < 1e-15);
        assert!(disjoint < 0.05);
        // p1..p3 = 1, p4 has no hypothesis 4-grams and is floored
        let expected = 0.01f64.powf(0.25) * (1.0f64 - 4.0 / 3.0).exp();
        assert!((char_bleu("abcd", "abc") - expected).abs() < 1e-15);
        assert_eq!(char_bleu("abc", ""), 0.0);
        assert!(char_bleu("ab", "ab") < 1.0);
    }

    #[test]
    fn top_n_examples() {
        let it = item("de", "meier", &["meyer", "meier", "maier"]);
        assert_eq!(top_n_wer(&it, 3), Ok((0.0, 2)));
        assert_eq!(top_n_wer(&it, 1), Ok((1.0, 1)));
        assert_eq!(
            top_n_wer(&item("de", "x", &[]), 1),
            Err(EvalError::NoCandidates)
        );
        assert_eq!(top_n_wer(&it, 0), Err(EvalError::InvalidN));
    }

    #[test]
    fn multi_word_wer() {
        assert_eq!(wer("jan van eyck", "jan van eyck"), 0.0);
        assert!((wer("jan van eyck", "jan fan eyck") - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_match_examples() {
        assert!(exact_match("kat", "kat"));
        assert!(exact_match("kat", &crate::ipa::normalize_text("Kat")));
        assert!(!exact_match("kat", "kad"));
        assert!(exact_match("e\u{0301}", "\u{00E9}"));
    }

    #[test]
    fn stratify_single_language_matches_overall() {
        let items = vec![
            item("fi", "talo", &["talo"]),
            item("fi", "kala", &["kalla", "kala"]),
        ];
        let r = stratify(&items, &[1, 3, 5]).unwrap();
        assert_eq!(r.languages.len(), 1);
        let mut lang = r.languages[0].clone();
        lang.lang = "all".into();
        assert_eq!(lang, r.overall);
    }

    #[test]
    fn stratify_weighted_mean() {
        // 10 items at CER 0.1 and 30 items at CER 0.2
        let mut items = Vec::new();
        for _ in 0..10 {
            items.push(item("aa", "abcdefghij", &["abcdefghix"]));
        }
        for _ in 0..30 {
            items.push(item("bb", "abcdefghij", &["abcdefghxx"]));
        }
        let r = stratify(&items, &[1]).unwrap();
        assert!((r.overall.cer_mean - 0.175).abs() < 1e-12);
        assert_eq!(r.languages[0].lang, "bb");
        assert_eq!(r.overall.n_samples, 40);
        let weighted: f64 = r
            .languages
            .iter()
            .map(|l| l.cer_mean * l.n_samples as f64)
            .sum::<f64>()
            / 40.0;
        assert!((weighted - r.overall.cer_mean).abs() < 1e-12);
    }

    #[test]
    fn all_perfect_predictions() {
        let items = vec![
            item("es", "casa", &["casa"]),
            item("tr", "ev", &["ev", "eb"]),
        ];
        let r = stratify(&items, &[1, 3, 5]).unwrap();
        assert_eq!(r.overall.cer_mean, 0.0);
        assert_eq!(r.overall.exact_match_rate, 1.0);
        assert!(r.overall.top_n_wer.iter().all(|t| t.wer.mean == 0.0));
        // "ev" is shorter than four characters, so its BLEU is floored
        assert_eq!(
            r.languages
                .iter()
                .find(|l| l.lang == "es")
                .unwrap()
                .bleu_mean,
            1.0
        );
        assert_eq!(stratify(&[], &[1]), Err(EvalError::EmptyInput));
    }

    #[test]
    fn csv_has_a_row_per_language_plus_overall() {
        let items = vec![
            item("es", "casa", &["casa"]),
            item("tr", "evler", &["evler"]),
        ];
        let csv = stratify(&items, &[1, 3]).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].ends_with("top3_wer,top3_best_position"));
        assert!(lines[3].starts_with("all,2,"));
    }

    proptest! {
        #[test]
        fn levenshtein_matches_oracle(a in "[abc]{0,7}", b in "[abc]{0,7}") {
            let ac: Vec<char> = a.chars().collect();
            let bc: Vec<char> = b.chars().collect();
            prop_assert_eq!(levenshtein(&a, &b), lev_oracle(&ac, &bc));
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        }

        #[test]
        fn cer_zero_iff_equal(a in "[ab]{0,5}", b in "[ab]{0,5}") {
            prop_assert_eq!(cer(&a, &b) == 0.0, a == b);
        }

        #[test]
        fn bleu_bounded_and_one_iff_equal(a in "[abcd]{4,9}", b in "[abcd]{1,9}") {
            let v = char_bleu(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v == 1.0, a == b);
        }

        #[test]
        fn top_n_is_monotone(words in proptest::collection::vec("[ab]{1,2}( [ab]{1,2})?", 1..6), reference in "[ab]{1,2}( [ab]{1,2})?") {
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let it = item("xx", &reference, &refs);
            let (w1, _) = top_n_wer(&it, 1).unwrap();
            let (w3, p3) = top_n_wer(&it, 3).unwrap();
            let (w5, p5) = top_n_wer(&it, 5).unwrap();
            prop_assert!(w1 >= w3 && w3 >= w5);
            prop_assert!((1..=3).contains(&p3) && (1..=5).contains(&p5));
        }
    }
}
