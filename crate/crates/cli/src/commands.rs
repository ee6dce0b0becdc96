use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use wic_core::datasets::{load_mclwic, load_superglue_wic, split_by_lemma, write_mclwic};
use wic_core::evaluation::{read_submission, write_submission, ErrorGroupReport};
use wic_core::synthetic::{generate, SyntheticConfig};
use wic_core::{
    error_intersection, evaluate as score, shared_first_sentence_errors, train as fit, Checkpoint, Corpus,
    EvaluationReport, Head, SplitConfig,
};

use crate::config::{ConfigError, ExperimentConfig, Overrides};

/// Some inputs could not be processed; the rest of the output was written.
#[derive(Debug)]
pub struct PartialFailure(pub String);

impl fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for PartialFailure {}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| wic_core::Error::io(path, e))?;
    Ok(())
}

/// Exclusive claim on an output directory, released on drop.
struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    fn acquire(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).map_err(|e| wic_core::Error::io(dir, e))?;
        let path = dir.join(".wic.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id()).map_err(|e| wic_core::Error::io(&path, e))?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(ConfigError(format!(
                "output directory {} is locked by another run (remove {} if that run is gone)",
                dir.display(),
                path.display()
            ))
            .into()),
            Err(e) => Err(wic_core::Error::io(&path, e).into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Timestamped progress log; kept apart from the JSON outputs so that those
/// stay byte-identical across reruns.
struct RunLog {
    path: PathBuf,
}

impl RunLog {
    fn new(dir: &Path) -> Self {
        Self {
            path: dir.join("run.log"),
        }
    }

    fn line(&self, message: &str) {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        eprintln!("{message}");
        if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(&self.path) {
            let _ = writeln!(f, "{secs} {message}");
        }
    }
}

#[derive(Serialize)]
struct PrepareSummary<'a> {
    pool_size: usize,
    train_size: usize,
    validation_size: usize,
    train_lemmas: usize,
    validation_lemmas: usize,
    seed: u64,
    fraction: Option<f64>,
    experiment: &'a ExperimentConfig,
}

pub fn prepare(config_path: &Path, overrides: &Overrides) -> anyhow::Result<()> {
    let config = ExperimentConfig::load(config_path, overrides)?;
    let _lock = OutputLock::acquire(&config.output)?;
    let log = RunLog::new(&config.output);
    let data = config.prepare().context("preparing data")?;
    data.manifest.write(&config.output.join("split.json"))?;
    write_json(
        &config.output.join("prepare.json"),
        &PrepareSummary {
            pool_size: data.pool_size,
            train_size: data.train.len(),
            validation_size: data.validation.len(),
            train_lemmas: data.train.lemmas().len(),
            validation_lemmas: data.validation.lemmas().len(),
            seed: data.manifest.seed,
            fraction: data.manifest.fraction,
            experiment: &config,
        },
    )?;
    log.line(&format!(
        "prepared {} pairs: {} train, {} validation -> {}",
        data.pool_size,
        data.train.len(),
        data.validation.len(),
        config.output.join("split.json").display()
    ));
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    head: String,
    encoder: String,
    threshold: f64,
    best_check: usize,
    stop_check: Option<usize>,
    epochs_completed: f64,
    best_validation_loss: f64,
    best_validation_accuracy: f64,
}

pub fn train(config_path: &Path, overrides: &Overrides) -> anyhow::Result<()> {
    let config = ExperimentConfig::load(config_path, overrides)?;
    let _lock = OutputLock::acquire(&config.output)?;
    let log = RunLog::new(&config.output);
    let name = config.name.clone().unwrap_or_else(|| config_path.display().to_string());
    let data = config.prepare().context("preparing data")?;
    log.line(&format!(
        "{name}: {} train / {} validation pairs, encoder {}, head {}",
        data.train.len(),
        data.validation.len(),
        config.encoder.name,
        config.head
    ));
    let encoder = config.encoder.build()?;
    let head = Head::new(config.head, encoder.dimension(), config.train.seed)?;
    let (mut checkpoint, history) = fit(encoder, head, &data.train, &data.validation, &config.train)
        .with_context(|| format!("training {name}"))?;
    checkpoint.manifest = Some(data.manifest);
    checkpoint.save(&config.output)?;
    write_json(&config.output.join("experiment.json"), &config)?;

    let best = &history.records[history.best_check - 1];
    let summary = TrainSummary {
        head: config.head.to_string(),
        encoder: config.encoder.name.clone(),
        threshold: checkpoint.threshold(),
        best_check: history.best_check,
        stop_check: history.stop_check,
        epochs_completed: history.epochs_completed,
        best_validation_loss: best.validation_loss,
        best_validation_accuracy: best.validation_accuracy,
    };
    write_json(&config.output.join("summary.json"), &summary)?;
    log.line(&format!(
        "{name}: {} checks, best {} (loss {:.4}, accuracy {:.3}), epochs {}, threshold {:.4} -> {}",
        history.records.len(),
        history.best_check,
        best.validation_loss,
        best.validation_accuracy,
        history.epochs_completed,
        checkpoint.threshold(),
        config.output.display()
    ));
    Ok(())
}

/// MCL-WiC data (+ optional gold) or SuperGLUE JSON-lines by extension.
fn load_corpus(data: &Path, gold: Option<&Path>) -> anyhow::Result<Corpus> {
    let jsonl = data.extension().is_some_and(|e| e == "jsonl");
    if jsonl {
        if gold.is_some() {
            return Err(ConfigError("--gold applies to MCL-WiC data, not JSON-lines".into()).into());
        }
        Ok(load_superglue_wic(data)?)
    } else {
        Ok(load_mclwic(data, gold)?)
    }
}

#[derive(Serialize)]
struct FailedPair {
    id: String,
    error: String,
}

pub fn predict(
    checkpoint_dir: &Path,
    data: &Path,
    output: &Path,
    max_tokens: Option<usize>,
    failures_path: Option<&Path>,
) -> anyhow::Result<()> {
    let checkpoint = Checkpoint::load(checkpoint_dir)?;
    let model = checkpoint.model_with_max_tokens(max_tokens.unwrap_or(checkpoint.train_config.max_tokens))?;
    let corpus = load_corpus(data, None)?;
    let mut predictions = Vec::with_capacity(corpus.len());
    let mut failures = Vec::new();
    for pair in &corpus {
        match model.predict(pair) {
            Ok(p) => predictions.push((pair.id.clone(), p)),
            Err(e) => failures.push(FailedPair {
                id: pair.id.clone(),
                error: e.to_string(),
            }),
        }
    }
    write_submission(output, &predictions)?;
    eprintln!("wrote {} predictions to {}", predictions.len(), output.display());
    if failures.is_empty() {
        return Ok(());
    }
    let path = failures_path.map_or_else(|| output.with_extension("failures.json"), Path::to_path_buf);
    write_json(&path, &failures)?;
    for f in &failures {
        eprintln!("failed `{}`: {}", f.id, f.error);
    }
    Err(PartialFailure(format!(
        "{} of {} pairs could not be scored; listed in {}",
        failures.len(),
        corpus.len(),
        path.display()
    ))
    .into())
}

#[derive(Serialize)]
struct EvaluationOutput<'a> {
    #[serde(flatten)]
    report: &'a EvaluationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_groups: Option<ErrorGroupReport>,
}

fn report_for(predictions: &Path, gold: &Corpus) -> anyhow::Result<EvaluationReport> {
    let predicted = read_submission(predictions)?;
    score(&predicted, gold).with_context(|| format!("evaluating {}", predictions.display()))
}

pub fn evaluate(
    predictions: &Path,
    data: &Path,
    gold: Option<&Path>,
    output: &Path,
    analyze: bool,
) -> anyhow::Result<()> {
    let corpus = load_corpus(data, gold)?;
    let report = report_for(predictions, &corpus)?;
    let error_groups = if analyze {
        Some(shared_first_sentence_errors(&report, &corpus)?)
    } else {
        None
    };
    write_json(
        output,
        &EvaluationOutput {
            report: &report,
            error_groups,
        },
    )?;
    eprintln!(
        "accuracy {:.4} over {} pairs (TP {}, FP {}, TN {}, FN {})",
        report.accuracy,
        report.total(),
        report.true_positives,
        report.false_positives,
        report.true_negatives,
        report.false_negatives
    );
    Ok(())
}

#[derive(Serialize)]
struct FileAnalysis {
    predictions: PathBuf,
    accuracy: f64,
    false_positives: usize,
    false_negatives: usize,
    error_groups: ErrorGroupReport,
}

#[derive(Serialize)]
struct Intersection {
    error_ids: Vec<String>,
    /// Pairs that at least one of the submissions labeled correctly.
    correct_by_at_least_one: usize,
    total: usize,
}

#[derive(Serialize)]
struct Analysis {
    files: Vec<FileAnalysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intersection: Option<Intersection>,
}

pub fn analyze(predictions: &[PathBuf], data: &Path, gold: Option<&Path>, output: &Path) -> anyhow::Result<()> {
    let corpus = load_corpus(data, gold)?;
    let reports = predictions
        .iter()
        .map(|p| report_for(p, &corpus))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut files = Vec::with_capacity(reports.len());
    for (path, report) in predictions.iter().zip(&reports) {
        let groups = shared_first_sentence_errors(report, &corpus)?;
        eprintln!(
            "{}: accuracy {:.4}, {} errors, {} sharing a first sentence",
            path.display(),
            report.accuracy,
            report.errors(),
            groups.shared_first_sentence_error_count
        );
        files.push(FileAnalysis {
            predictions: path.clone(),
            accuracy: report.accuracy,
            false_positives: report.false_positives,
            false_negatives: report.false_negatives,
            error_groups: groups,
        });
    }
    let intersection = if reports.len() > 1 {
        let common = error_intersection(&reports)?;
        let total = reports[0].total();
        eprintln!("{} pairs mislabeled by every submission", common.len());
        Some(Intersection {
            correct_by_at_least_one: total - common.len(),
            error_ids: common.into_iter().collect(),
            total,
        })
    } else {
        None
    };
    write_json(output, &Analysis { files, intersection })
}

pub fn synth(output: &Path, pairs: usize, seed: u64, label_noise: f64) -> anyhow::Result<()> {
    let corpus = generate(&SyntheticConfig {
        pairs,
        seed,
        label_noise,
        ..SyntheticConfig::default()
    })?;
    let (train, rest) = split_by_lemma(&corpus, &SplitConfig::new(0.8, seed)?)?;
    let (dev, test) = split_by_lemma(&rest, &SplitConfig::new(0.5, seed)?)?;
    fs::create_dir_all(output).map_err(|e| wic_core::Error::io(output, e))?;
    for (name, part) in [("training", &train), ("dev", &dev), ("test", &test)] {
        let data = output.join(format!("{name}.en-en.data"));
        let gold = output.join(format!("{name}.en-en.gold"));
        write_mclwic(part, &data, Some(&gold))?;
    }
    eprintln!(
        "wrote {} training, {} dev and {} test pairs to {}",
        train.len(),
        dev.len(),
        test.len(),
        output.display()
    );
    Ok(())
}
