//! Accuracy, confusion counts and error analyses over predictions.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::datasets::{read_gold, write_json, Corpus, GoldTag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub predicted: bool,
    pub gold: bool,
}

impl Prediction {
    pub fn is_error(&self) -> bool {
        self.predicted != self.gold
    }
}

/// Positive means "same meaning": a false positive is predicted True on a
/// gold False pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    /// In gold-corpus order.
    pub predictions: Vec<Prediction>,
}

impl EvaluationReport {
    pub fn total(&self) -> usize {
        self.predictions.len()
    }

    pub fn errors(&self) -> usize {
        self.false_positives + self.false_negatives
    }

    pub fn error_ids(&self) -> BTreeSet<String> {
        self.predictions
            .iter()
            .filter(|p| p.is_error())
            .map(|p| p.id.clone())
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Scores `predictions` against the labels of `gold`.
pub fn evaluate(predictions: &[(String, bool)], gold: &Corpus) -> Result<EvaluationReport> {
    if predictions.is_empty() {
        return Err(Error::Evaluation("no predictions to evaluate".into()));
    }
    let mut predicted: HashMap<&str, bool> = HashMap::with_capacity(predictions.len());
    for (id, p) in predictions {
        if predicted.insert(id.as_str(), *p).is_some() {
            return Err(Error::Evaluation(format!("duplicate prediction for `{id}`")));
        }
    }
    let gold_ids: HashSet<&str> = gold.ids().collect();
    let mut missing: Vec<&str> = predicted.keys().copied().filter(|id| !gold_ids.contains(id)).collect();
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(Error::Evaluation(format!(
            "predicted ids absent from gold: {}",
            missing.join(", ")
        )));
    }

    let mut report = EvaluationReport {
        accuracy: 0.0,
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
        predictions: Vec::with_capacity(predictions.len()),
    };
    for pair in gold {
        let Some(&p) = predicted.get(pair.id.as_str()) else {
            continue;
        };
        let g = pair
            .label
            .ok_or_else(|| Error::Evaluation(format!("gold pair `{}` is unlabeled", pair.id)))?;
        match (p, g) {
            (true, true) => report.true_positives += 1,
            (true, false) => report.false_positives += 1,
            (false, false) => report.true_negatives += 1,
            (false, true) => report.false_negatives += 1,
        }
        report.predictions.push(Prediction {
            id: pair.id.clone(),
            predicted: p,
            gold: g,
        });
    }
    report.accuracy = (report.true_positives + report.true_negatives) as f64 / report.total() as f64;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorGroup {
    pub sentence1: String,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorGroupReport {
    pub error_ids: BTreeSet<String>,
    /// Errors whose first sentence is shared with at least one other error.
    pub shared_first_sentence_error_count: usize,
    /// Every erroneous first sentence with its error ids, in corpus order.
    pub groups: Vec<ErrorGroup>,
}

/// Groups the report's errors by NFC-normalised first sentence.
pub fn shared_first_sentence_errors(report: &EvaluationReport, corpus: &Corpus) -> Result<ErrorGroupReport> {
    let error_ids = report.error_ids();
    let known: HashSet<&str> = corpus.ids().collect();
    if let Some(id) = error_ids.iter().find(|id| !known.contains(id.as_str())) {
        return Err(Error::Evaluation(format!("error id `{id}` is not in the corpus")));
    }
    let mut groups: Vec<ErrorGroup> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for pair in corpus {
        if !error_ids.contains(&pair.id) {
            continue;
        }
        let key: String = pair.sentence1.nfc().collect();
        let i = *slot.entry(key.clone()).or_insert_with(|| {
            groups.push(ErrorGroup {
                sentence1: key,
                ids: Vec::new(),
            });
            groups.len() - 1
        });
        groups[i].ids.push(pair.id.clone());
    }
    let shared = groups.iter().filter(|g| g.ids.len() >= 2).map(|g| g.ids.len()).sum();
    Ok(ErrorGroupReport {
        error_ids,
        shared_first_sentence_error_count: shared,
        groups,
    })
}

/// Ids mislabeled by every report. All reports must cover the same ids.
pub fn error_intersection(reports: &[EvaluationReport]) -> Result<BTreeSet<String>> {
    let (first, rest) = reports
        .split_first()
        .ok_or_else(|| Error::Evaluation("error intersection needs at least one report".into()))?;
    let ids = |r: &EvaluationReport| r.predictions.iter().map(|p| p.id.clone()).collect::<BTreeSet<_>>();
    let reference = ids(first);
    let mut common = first.error_ids();
    for (i, r) in rest.iter().enumerate() {
        if ids(r) != reference {
            return Err(Error::Evaluation(format!(
                "report {} covers a different id set than report 0",
                i + 1
            )));
        }
        let errs = r.error_ids();
        common.retain(|id| errs.contains(id));
    }
    Ok(common)
}

/// Writes predictions in the MCL-WiC submission format.
pub fn write_submission(path: &Path, predictions: &[(String, bool)]) -> Result<()> {
    let tags: Vec<GoldTag> = predictions.iter().map(|(id, p)| GoldTag::new(id.clone(), *p)).collect();
    write_json(path, &tags)
}

pub fn read_submission(path: &Path) -> Result<Vec<(String, bool)>> {
    read_gold(path)?
        .into_iter()
        .map(|t| Ok((t.id.clone(), t.label()?)))
        .collect()
}
