use std::fmt;

use unicode_normalization::UnicodeNormalization;

use super::inventory::{Inventory, SymbolClass};
use super::{normalize_text, IpaError, Violation};

/// One phonetic segment: a base symbol plus whatever marks attach to it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IpaSegment {
    source: String,
    base: String,
    diacritics: Vec<char>,
    tones: Vec<char>,
}

impl IpaSegment {
    /// Exact substring of the parsed text covered by this segment.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Base symbol; tie-barred affricates keep both halves and the tie.
    pub fn base(&self) -> &str {
        &self.base
    }

    /// Non-tone marks in source order, canonical decompositions expanded.
    pub fn diacritics(&self) -> &[char] {
        &self.diacritics
    }

    pub fn tones(&self) -> &[char] {
        &self.tones
    }

    /// The segment with tones and prosodic marks removed, in NFC.
    pub fn without_tones(&self, inventory: &Inventory) -> String {
        let mut s = self.base.clone();
        s.extend(
            self.diacritics
                .iter()
                .filter(|c| inventory.class_of(**c) != Some(SymbolClass::Prosodic)),
        );
        s.nfc().collect()
    }
}

impl fmt::Display for IpaSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Normalized phonetic text together with its segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IpaString {
    text: String,
    segments: Vec<IpaSegment>,
}

impl IpaString {
    /// Normalize and segment with the builtin inventory. The empty string is
    /// accepted here; [`validate_ipa`] is what rejects it.
    pub fn parse(raw: &str) -> Result<Self, IpaError> {
        Self::parse_with(raw, Inventory::builtin())
    }

    pub fn parse_with(raw: &str, inventory: &Inventory) -> Result<Self, IpaError> {
        segment_ipa(&normalize_text(raw), inventory)
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn segments(&self) -> &[IpaSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

impl fmt::Display for IpaString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl PartialOrd for IpaString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for IpaString {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.text.cmp(&other.text)
    }
}

/// A base plus its tightly bound combining marks.
struct Unit {
    base: String,
    marks: Vec<char>,
    end: usize,
}

struct Segmenter<'a> {
    inventory: &'a Inventory,
    chars: Vec<char>,
}

impl Segmenter<'_> {
    fn class(&self, i: usize) -> Option<SymbolClass> {
        self.chars.get(i).and_then(|c| self.inventory.class_of(*c))
    }

    /// Longest inventory base starting at `i`, falling back to the canonical
    /// decomposition of a precomposed character (`ã` is `a` + tilde).
    fn match_base(&self, i: usize) -> Option<(String, Vec<char>, usize)> {
        let longest = self.inventory.max_base_chars().min(self.chars.len() - i);
        for len in (1..=longest).rev() {
            let candidate: String = self.chars[i..i + len].iter().collect();
            if self.inventory.is_base(&candidate) {
                return Some((candidate, Vec::new(), i + len));
            }
        }
        let mut decomposed = std::iter::once(self.chars[i]).nfd();
        let first = decomposed.next()?;
        let rest: Vec<char> = decomposed.collect();
        if rest.is_empty() {
            return None;
        }
        let mut buf = [0u8; 4];
        if !self.inventory.is_base(first.encode_utf8(&mut buf)) {
            return None;
        }
        if rest.iter().all(|c| {
            self.inventory
                .class_of(*c)
                .is_some_and(SymbolClass::is_attachable)
        }) {
            Some((first.to_string(), rest, i + 1))
        } else {
            None
        }
    }

    fn unit(&self, i: usize) -> Option<Unit> {
        if i >= self.chars.len() {
            return None;
        }
        let (base, mut marks, mut end) = self.match_base(i)?;
        while self.class(end).is_some_and(SymbolClass::is_combining) {
            marks.push(self.chars[end]);
            end += 1;
        }
        Some(Unit { base, marks, end })
    }

    /// Parse a full segment at `i`: one unit, any tie-barred continuations,
    /// then trailing spacing marks.
    fn segment(&self, i: usize) -> Option<(String, Vec<char>, usize)> {
        let first = self.unit(i)?;
        let mut base = first.base;
        let mut marks = first.marks;
        let mut end = first.end;
        while self.class(end) == Some(SymbolClass::Tie) {
            let Some(next) = self.unit(end + 1) else {
                break;
            };
            base.push(self.chars[end]);
            base.push_str(&next.base);
            marks.extend(next.marks);
            end = next.end;
        }
        while self.class(end).is_some_and(SymbolClass::is_attachable) {
            marks.push(self.chars[end]);
            end += 1;
        }
        Some((base, marks, end))
    }
}

fn split_marks(inventory: &Inventory, marks: Vec<char>) -> (Vec<char>, Vec<char>) {
    marks
        .into_iter()
        .partition(|c| inventory.class_of(*c) != Some(SymbolClass::Tone))
}

/// Segment already-normalized text, collecting every violation.
pub(super) fn segment_all(s: &str, inventory: &Inventory) -> (Vec<IpaSegment>, Vec<Violation>) {
    let seg = Segmenter {
        inventory,
        chars: s.chars().collect(),
    };
    let byte_at: Vec<usize> = s
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(s.len()))
        .collect();
    let mut segments: Vec<IpaSegment> = Vec::new();
    let mut violations = Vec::new();
    // leading stress marks have no base to their left and bind forward
    let mut prefix_start: Option<usize> = None;
    let mut i = 0;
    while i < seg.chars.len() {
        if let Some((base, marks, end)) = seg.segment(i) {
            let start = prefix_start.take().unwrap_or(i);
            let mut all_marks: Vec<char> = seg.chars[start..i].to_vec();
            all_marks.extend(marks);
            let (diacritics, tones) = split_marks(inventory, all_marks);
            segments.push(IpaSegment {
                source: s[byte_at[start]..byte_at[end]].to_string(),
                base,
                diacritics,
                tones,
            });
            i = end;
            continue;
        }
        let c = seg.chars[i];
        match inventory.class_of(c) {
            Some(SymbolClass::Prosodic) if segments.is_empty() => {
                prefix_start.get_or_insert(i);
            }
            Some(class)
                if class.is_attachable() && !segments.is_empty() && prefix_start.is_none() =>
            {
                // only reachable after an earlier violation broke the segment
                let last = segments.last_mut().expect("non-empty");
                last.source.push(c);
                if class == SymbolClass::Tone {
                    last.tones.push(c);
                } else {
                    last.diacritics.push(c);
                }
            }
            Some(_) => violations.push(Violation::DanglingMark {
                position: i,
                symbol: c,
            }),
            None => violations.push(Violation::UnknownSymbol {
                position: i,
                symbol: c,
            }),
        }
        i += 1;
    }
    if let Some(start) = prefix_start {
        for (offset, c) in seg.chars[start..].iter().enumerate() {
            violations.push(Violation::DanglingMark {
                position: start + offset,
                symbol: *c,
            });
        }
    }
    (segments, violations)
}

/// Greedy longest-match segmentation of normalized text.
pub fn segment_ipa(s: &str, inventory: &Inventory) -> Result<IpaString, IpaError> {
    let (segments, violations) = segment_all(s, inventory);
    match violations.into_iter().next() {
        Some(v) => Err(v.into()),
        None => Ok(IpaString {
            text: s.to_string(),
            segments,
        }),
    }
}

/// Drop diacritics, tones, secondary articulations and prosodic marks.
/// Tie bars and kept modifiers (ʼ, ˞) survive.
pub fn strip_diacritics_tones(s: &IpaString, inventory: &Inventory) -> IpaString {
    let mut out = String::with_capacity(s.text.len());
    for seg in &s.segments {
        out.push_str(&seg.base);
        out.extend(seg.diacritics.iter().filter(|c| {
            !inventory
                .class_of(**c)
                .is_some_and(SymbolClass::is_stripped)
        }));
    }
    let out: String = out.nfc().collect();
    segment_ipa(&out, inventory).expect("stripped segments re-segment")
}
