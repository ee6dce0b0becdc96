//! WiC-style corpora: loading, validation, merging and lemma-disjoint splits.
//!
//! Two on-disk formats are supported:
//!
//! - MCL-WiC: a JSON array of records plus an optional gold file
//!   (`[{"id": ..., "tag": "T" | "F"}]`) joined by id.
//! - SuperGLUE WiC: JSON lines with `word`, `sentence1`, `sentence2`,
//!   character offsets, `label` and `idx`.
//!
//! Spans are half-open intervals over Unicode scalar values of the decoded
//! sentence, never byte offsets.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// POS tag stored for corpora that carry none (SuperGLUE WiC).
pub const UNKNOWN_POS: &str = "UNK";

/// Half-open character interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// True when the two half-open intervals share at least one position.
    pub fn overlaps(&self, other: &CharSpan) -> bool {
        !self.is_empty() && !other.is_empty() && self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for CharSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Substring of `text` covering the character interval `span`, if in bounds.
pub fn char_slice(text: &str, span: CharSpan) -> Option<&str> {
    if span.start > span.end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let start = indices.nth(span.start)?;
    let end = if span.end == span.start {
        start
    } else {
        indices.nth(span.end - span.start - 1)?
    };
    Some(&text[start..end])
}

/// One labeled (or unlabeled) instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WicPair {
    pub id: String,
    pub lemma: String,
    pub pos: String,
    pub sentence1: String,
    pub sentence2: String,
    pub span1: CharSpan,
    pub span2: CharSpan,
    /// `Some(true)` when the target carries the same meaning in both sentences.
    pub label: Option<bool>,
}

impl WicPair {
    pub fn target1(&self) -> Option<&str> {
        char_slice(&self.sentence1, self.span1)
    }

    pub fn target2(&self) -> Option<&str> {
        char_slice(&self.sentence2, self.span2)
    }

    /// Checks both span invariants: in bounds, non-empty, no surrounding whitespace.
    pub fn validate(&self) -> Result<()> {
        check_span(&self.id, "span1", &self.sentence1, self.span1)?;
        check_span(&self.id, "span2", &self.sentence2, self.span2)
    }
}

fn check_span(id: &str, which: &str, sentence: &str, span: CharSpan) -> Result<()> {
    let invalid = |message: String| Error::Validation {
        id: id.to_string(),
        message,
    };
    let len = sentence.chars().count();
    if span.start >= span.end {
        return Err(invalid(format!("{which} {span} is empty or inverted")));
    }
    if span.end > len {
        return Err(invalid(format!(
            "{which} {span} exceeds sentence length {len}"
        )));
    }
    let target = char_slice(sentence, span).expect("bounds checked above");
    if target.trim() != target {
        return Err(invalid(format!(
            "{which} {span} has leading or trailing whitespace: {target:?}"
        )));
    }
    Ok(())
}

/// Where a corpus came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusSource {
    MclwicTrain,
    MclwicDev,
    MclwicTest,
    SuperglueTrain,
    SuperglueDev,
    SuperglueTest,
    Merged,
    Synthetic,
}

impl CorpusSource {
    fn infer(path: &Path, superglue: bool) -> Self {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().to_lowercase())
            .unwrap_or_default();
        let is_dev = name.contains("dev") || name.contains("val");
        let is_test = name.contains("test");
        match (superglue, is_dev, is_test) {
            (false, true, _) => CorpusSource::MclwicDev,
            (false, _, true) => CorpusSource::MclwicTest,
            (false, _, _) => CorpusSource::MclwicTrain,
            (true, true, _) => CorpusSource::SuperglueDev,
            (true, _, true) => CorpusSource::SuperglueTest,
            (true, _, _) => CorpusSource::SuperglueTrain,
        }
    }
}

/// Ordered pairs with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pairs: Vec<WicPair>,
    source: CorpusSource,
}

impl Corpus {
    /// Builds a corpus, validating every pair and id uniqueness.
    pub fn new(pairs: Vec<WicPair>, source: CorpusSource) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for pair in &pairs {
            pair.validate()?;
            if !seen.insert(pair.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: pair.id.clone(),
                });
            }
        }
        Ok(Self { pairs, source })
    }

    pub fn empty(source: CorpusSource) -> Self {
        Self {
            pairs: Vec::new(),
            source,
        }
    }

    pub fn pairs(&self) -> &[WicPair] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<WicPair> {
        self.pairs
    }

    pub fn source(&self) -> CorpusSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, WicPair> {
        self.pairs.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.id.as_str())
    }

    pub fn is_labeled(&self) -> bool {
        self.pairs.iter().all(|p| p.label.is_some())
    }

    pub fn lemmas(&self) -> HashSet<&str> {
        self.pairs.iter().map(|p| p.lemma.as_str()).collect()
    }

    /// Sub-corpus holding exactly `ids`, in the given order.
    pub fn select(&self, ids: &[String]) -> Result<Corpus> {
        let index: HashMap<&str, &WicPair> = self.pairs.iter().map(|p| (p.id.as_str(), p)).collect();
        let pairs = ids
            .iter()
            .map(|id| {
                index.get(id.as_str()).map(|p| (*p).clone()).ok_or_else(|| Error::Join {
                    id: id.clone(),
                    message: "is not present in the corpus".into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(pairs, self.source)
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a WicPair;
    type IntoIter = std::slice::Iter<'a, WicPair>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

// MCL-WiC ships offsets as strings ("start1": "12"); integers are accepted too.
fn offset<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<usize, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Offset {
        Int(usize),
        Str(String),
    }
    match Offset::deserialize(deserializer)? {
        Offset::Int(v) => Ok(v),
        Offset::Str(s) => s
            .trim()
            .parse()
            .map_err(|_| serde::de::Error::custom(format!("invalid offset {s:?}"))),
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct MclwicRecord {
    id: String,
    lemma: String,
    pos: String,
    sentence1: String,
    sentence2: String,
    #[serde(deserialize_with = "offset")]
    start1: usize,
    #[serde(deserialize_with = "offset")]
    end1: usize,
    #[serde(deserialize_with = "offset")]
    start2: usize,
    #[serde(deserialize_with = "offset")]
    end2: usize,
}

/// Gold annotation entry, also the submission format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldTag {
    pub id: String,
    pub tag: String,
}

impl GoldTag {
    pub fn new(id: impl Into<String>, label: bool) -> Self {
        Self {
            id: id.into(),
            tag: if label { "T" } else { "F" }.to_string(),
        }
    }

    pub fn label(&self) -> Result<bool> {
        match self.tag.as_str() {
            "T" => Ok(true),
            "F" => Ok(false),
            other => Err(Error::format(
                format!("gold entry `{}`", self.id),
                format!("tag must be \"T\" or \"F\", got {other:?}"),
            )),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a gold (or submission) file: a JSON array of `{id, tag}`.
pub fn read_gold(path: &Path) -> Result<Vec<GoldTag>> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

/// Loads an MCL-WiC data file, joining labels from `gold_file` when given.
pub fn load_mclwic(data_file: &Path, gold_file: Option<&Path>) -> Result<Corpus> {
    load_mclwic_as(data_file, gold_file, CorpusSource::infer(data_file, false))
}

pub fn load_mclwic_as(
    data_file: &Path,
    gold_file: Option<&Path>,
    source: CorpusSource,
) -> Result<Corpus> {
    let text = read_text(data_file)?;
    let records: Vec<MclwicRecord> = serde_json::from_str(&text)
        .map_err(|e| Error::format(data_file.display().to_string(), e.to_string()))?;

    let mut labels = match gold_file {
        Some(path) => {
            let mut labels = HashMap::new();
            for entry in read_gold(path)? {
                let label = entry.label()?;
                if labels.insert(entry.id.clone(), label).is_some() {
                    return Err(Error::Join {
                        id: entry.id,
                        message: format!("appears twice in {}", path.display()),
                    });
                }
            }
            Some(labels)
        }
        None => None,
    };

    let mut pairs = Vec::with_capacity(records.len());
    for r in records {
        let label = match labels.as_mut() {
            Some(map) => Some(map.remove(&r.id).ok_or_else(|| Error::Join {
                id: r.id.clone(),
                message: "has no gold label".into(),
            })?),
            None => None,
        };
        pairs.push(WicPair {
            id: r.id,
            lemma: r.lemma,
            pos: r.pos,
            sentence1: r.sentence1,
            sentence2: r.sentence2,
            span1: CharSpan::new(r.start1, r.end1),
            span2: CharSpan::new(r.start2, r.end2),
            label,
        });
    }
    if let Some(leftover) = labels {
        if let Some(id) = leftover.keys().min() {
            return Err(Error::Join {
                id: id.clone(),
                message: "is in the gold file but not in the data file".into(),
            });
        }
    }
    Corpus::new(pairs, source)
}

/// Writes `corpus` as an MCL-WiC data file, plus a gold file when requested
/// (every pair must then be labeled).
pub fn write_mclwic(corpus: &Corpus, data_file: &Path, gold_file: Option<&Path>) -> Result<()> {
    let records: Vec<MclwicRecord> = corpus
        .iter()
        .map(|p| MclwicRecord {
            id: p.id.clone(),
            lemma: p.lemma.clone(),
            pos: p.pos.clone(),
            sentence1: p.sentence1.clone(),
            sentence2: p.sentence2.clone(),
            start1: p.span1.start,
            end1: p.span1.end,
            start2: p.span2.start,
            end2: p.span2.end,
        })
        .collect();
    write_json(data_file, &records)?;
    if let Some(gold_file) = gold_file {
        let gold = corpus
            .iter()
            .map(|p| {
                p.label.map(|l| GoldTag::new(p.id.clone(), l)).ok_or_else(|| {
                    Error::Contract(format!("pair `{}` is unlabeled; cannot write gold", p.id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write_json(gold_file, &gold)?;
    }
    Ok(())
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize, Serialize)]
struct SuperglueRecord {
    word: String,
    sentence1: String,
    sentence2: String,
    start1: usize,
    end1: usize,
    start2: usize,
    end2: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<bool>,
    idx: u64,
}

/// Loads a SuperGLUE WiC JSON-lines file.
///
/// Ids are `wic.<idx>` for the training file and `wic.<split>.<idx>` for the
/// validation and test files, whose `idx` values restart at zero.
pub fn load_superglue_wic(file: &Path) -> Result<Corpus> {
    load_superglue_wic_as(file, CorpusSource::infer(file, true))
}

pub fn load_superglue_wic_as(file: &Path, source: CorpusSource) -> Result<Corpus> {
    let prefix = match source {
        CorpusSource::SuperglueDev => "wic.dev.",
        CorpusSource::SuperglueTest => "wic.test.",
        _ => "wic.",
    };
    let text = read_text(file)?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: SuperglueRecord = serde_json::from_str(line).map_err(|e| {
            Error::format(format!("{} line {}", file.display(), lineno + 1), e.to_string())
        })?;
        pairs.push(WicPair {
            id: format!("{prefix}{}", r.idx),
            lemma: r.word,
            pos: UNKNOWN_POS.to_string(),
            sentence1: r.sentence1,
            sentence2: r.sentence2,
            span1: CharSpan::new(r.start1, r.end1),
            span2: CharSpan::new(r.start2, r.end2),
            label: r.label,
        });
    }
    Corpus::new(pairs, source)
}

/// Writes pairs in SuperGLUE WiC JSON-lines form; `idx` is the line number.
pub fn write_superglue_wic(corpus: &Corpus, file: &Path) -> Result<()> {
    let mut out = String::new();
    for (idx, p) in corpus.iter().enumerate() {
        let record = SuperglueRecord {
            word: p.lemma.clone(),
            sentence1: p.sentence1.clone(),
            sentence2: p.sentence2.clone(),
            start1: p.span1.start,
            end1: p.span1.end,
            start2: p.span2.start,
            end2: p.span2.end,
            label: p.label,
            idx: idx as u64,
        };
        out.push_str(&serde_json::to_string(&record).expect("plain record serializes"));
        out.push('\n');
    }
    fs::write(file, out).map_err(|e| Error::io(file, e))
}

/// Concatenates id-disjoint corpora, preserving order.
pub fn merge(corpora: Vec<Corpus>) -> Result<Corpus> {
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(corpora.iter().map(Corpus::len).sum());
    for corpus in corpora {
        for pair in corpus.pairs {
            if !seen.insert(pair.id.clone()) {
                return Err(Error::DuplicateId { id: pair.id });
            }
            pairs.push(pair);
        }
    }
    Ok(Corpus {
        pairs,
        source: CorpusSource::Merged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "SplitConfig::default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SplitConfig {
    pub const DEFAULT_TRAIN_FRACTION: f64 = 0.975;

    fn default_fraction() -> f64 {
        Self::DEFAULT_TRAIN_FRACTION
    }

    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        let config = Self {
            train_fraction,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Split(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: Self::DEFAULT_TRAIN_FRACTION,
            seed: 0,
        }
    }
}

/// Splits by unique lemma so no lemma appears on both sides.
///
/// Lemmas are sorted, shuffled with `config.seed`, and the train side takes
/// the shortest prefix whose instance count reaches
/// `train_fraction * len(corpus)`. Pair order within each side follows the
/// input corpus.
pub fn split_by_lemma(corpus: &Corpus, config: &SplitConfig) -> Result<(Corpus, Corpus)> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Split("corpus is empty".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for pair in corpus {
        *counts.entry(pair.lemma.as_str()).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::Split(
            "need at least two distinct lemmas to produce two non-empty sides".into(),
        ));
    }
    let mut lemmas: Vec<&str> = counts.keys().copied().collect();
    lemmas.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));

    let target = config.train_fraction * corpus.len() as f64;
    let mut cumulative = 0usize;
    let mut cut = lemmas.len();
    for (i, lemma) in lemmas.iter().enumerate() {
        cumulative += counts[lemma];
        if cumulative as f64 >= target {
            cut = i + 1;
            break;
        }
    }
    // Keep the validation side non-empty.
    let cut = cut.min(lemmas.len() - 1);
    let train_lemmas: HashSet<&str> = lemmas[..cut].iter().copied().collect();

    let (train, validation): (Vec<WicPair>, Vec<WicPair>) = corpus
        .pairs
        .iter()
        .cloned()
        .partition(|p| train_lemmas.contains(p.lemma.as_str()));
    Ok((
        Corpus {
            pairs: train,
            source: corpus.source,
        },
        Corpus {
            pairs: validation,
            source: corpus.source,
        },
    ))
}

/// Record of a train/validation split sufficient to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub seed: u64,
    /// `None` when the split is the organisers' own train/dev division.
    pub fraction: Option<f64>,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
}

impl SplitManifest {
    pub fn from_split(seed: u64, fraction: Option<f64>, train: &Corpus, validation: &Corpus) -> Self {
        Self {
            seed,
            fraction,
            train_ids: train.ids().map(str::to_string).collect(),
            validation_ids: validation.ids().map(str::to_string).collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
    }

    /// Rebuilds both sides from `corpus`.
    pub fn apply(&self, corpus: &Corpus) -> Result<(Corpus, Corpus)> {
        Ok((corpus.select(&self.train_ids)?, corpus.select(&self.validation_ids)?))
    }
}
