//! Fine-tuning with binary cross-entropy and half-epoch early stopping.
//!
//! Training runs seeded shuffled mini-batches. After every
//! `1 / checks_per_epoch` of an epoch's batches the mean validation loss is
//! measured; the parameters from the best check are kept, and training stops
//! after `patience_checks` consecutive checks without a new best, or after
//! `max_epochs`.

mod adamw;
mod checkpoint;
pub mod early_stopping;

pub use adamw::{AdamW, AdamWConfig};
pub use checkpoint::{Checkpoint, CheckpointConfig, Model};
pub use early_stopping::{simulate as simulate_early_stopping, CheckOutcome, EarlyStopping, StopSummary};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{self, CalibrationSummary};
use crate::datasets::{Corpus, WicPair};
use crate::encoding::{backward_pair, encode_pair_traced, ContextualEncoder, PairTrace};
use crate::error::{Error, Result};
use crate::heads::{decide, Head};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_tokens: usize,
    pub learning_rate: f64,
    pub optimizer: AdamWConfig,
    pub max_epochs: usize,
    pub checks_per_epoch: usize,
    pub patience_checks: usize,
    pub seed: u64,
    pub prediction_clamp_epsilon: f64,
    /// Train the head only; the encoder keeps its weights.
    pub freeze_encoder: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            max_tokens: 118,
            learning_rate: 1e-5,
            optimizer: AdamWConfig::default(),
            max_epochs: 8,
            checks_per_epoch: 2,
            patience_checks: 2,
            seed: 0,
            prediction_clamp_epsilon: 1e-7,
            freeze_encoder: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("max_tokens", self.max_tokens),
            ("max_epochs", self.max_epochs),
            ("checks_per_epoch", self.checks_per_epoch),
            ("patience_checks", self.patience_checks),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Contract(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Contract(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        let eps = self.prediction_clamp_epsilon;
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::Contract(format!(
                "prediction_clamp_epsilon must lie in (0, 0.5), got {eps}"
            )));
        }
        Ok(())
    }
}

fn check_prediction(prediction: f64) -> Result<()> {
    if (0.0..=1.0).contains(&prediction) {
        Ok(())
    } else {
        Err(Error::Contract(format!("prediction {prediction} is outside [0, 1]")))
    }
}

/// Binary cross-entropy with the prediction clipped to `[eps, 1 - eps]`.
pub fn bce_loss(prediction: f64, label: bool, clamp_epsilon: f64) -> Result<f64> {
    check_prediction(prediction)?;
    let p = prediction.clamp(clamp_epsilon, 1.0 - clamp_epsilon);
    Ok(if label { -p.ln() } else { -(1.0 - p).ln() })
}

/// `d bce_loss / d prediction`; zero where the clip is active.
pub fn bce_gradient(prediction: f64, label: bool, clamp_epsilon: f64) -> Result<f64> {
    check_prediction(prediction)?;
    if prediction < clamp_epsilon || prediction > 1.0 - clamp_epsilon {
        return Ok(0.0);
    }
    Ok(if label {
        -1.0 / prediction
    } else {
        1.0 / (1.0 - prediction)
    })
}

/// One validation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    /// Position in epochs, in units of `1 / checks_per_epoch`.
    pub epoch_position: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
    /// Mean training-batch loss since the previous check; absent when no
    /// training step ran.
    pub training_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<CheckRecord>,
    pub stopped_early: bool,
    pub epochs_completed: f64,
    /// 1-based index into `records` of the returned checkpoint.
    pub best_check: usize,
    /// 1-based index of the check that triggered stopping.
    pub stop_check: Option<usize>,
}

/// Encoder plus head with their optimizer state.
pub struct Learner {
    encoder: Box<dyn ContextualEncoder>,
    head: Head,
    config: TrainConfig,
    encoder_opt: AdamW,
    head_opt: AdamW,
}

impl Learner {
    pub fn new(encoder: Box<dyn ContextualEncoder>, head: Head, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if let Head::Mlp(p) = &head {
            if p.in_dim() != encoder.dimension() * if head.config().uses_sentence_vectors() { 4 } else { 2 } {
                return Err(Error::Contract(format!(
                    "MLP head input {} does not fit encoder dimension {}",
                    p.in_dim(),
                    encoder.dimension()
                )));
            }
        }
        let encoder_opt = AdamW::new(config.optimizer, config.learning_rate, encoder.parameters().len());
        let head_opt = AdamW::new(config.optimizer, config.learning_rate, head.parameter_count());
        Ok(Self {
            encoder,
            head,
            config,
            encoder_opt,
            head_opt,
        })
    }

    pub fn encoder(&self) -> &dyn ContextualEncoder {
        self.encoder.as_ref()
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn into_parts(self) -> (Box<dyn ContextualEncoder>, Head) {
        (self.encoder, self.head)
    }

    fn trains_encoder(&self) -> bool {
        !self.config.freeze_encoder && !self.encoder.parameters().is_empty()
    }

    fn has_trainable_parameters(&self) -> bool {
        self.trains_encoder() || self.head.parameter_count() > 0
    }

    pub fn score(&self, pair: &WicPair) -> Result<f64> {
        let trace = encode_pair_traced(
            self.encoder.as_ref(),
            pair,
            self.config.max_tokens,
            self.head.config().uses_sentence_vectors(),
        )?;
        self.head.forward(&trace.embedding)
    }

    fn label(pair: &WicPair) -> Result<bool> {
        pair.label
            .ok_or_else(|| Error::Contract(format!("pair `{}` has no label", pair.id)))
    }

    /// Mean BCE over `pairs`.
    pub fn batch_loss(&self, pairs: &[&WicPair]) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let mut total = 0.0;
        for pair in pairs {
            total += bce_loss(self.score(pair)?, Self::label(pair)?, self.config.prediction_clamp_epsilon)?;
        }
        Ok(total / pairs.len() as f64)
    }

    /// Mean batch loss and its gradients (encoder, head).
    pub fn batch_gradient(&self, pairs: &[&WicPair]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        if pairs.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let eps = self.config.prediction_clamp_epsilon;
        let scale = 1.0 / pairs.len() as f64;
        let want_sentences = self.head.config().uses_sentence_vectors();
        let train_encoder = self.trains_encoder();
        let mut encoder_grad = vec![0.0; self.encoder.parameters().len()];
        let mut head_grad = vec![0.0; self.head.parameter_count()];
        let mut total = 0.0;
        for pair in pairs {
            let label = Self::label(pair)?;
            let trace = encode_pair_traced(self.encoder.as_ref(), pair, self.config.max_tokens, want_sentences)?;
            let score = self.head.forward(&trace.embedding)?;
            total += bce_loss(score, label, eps)?;
            let d_score = scale * bce_gradient(score, label, eps)?;
            if d_score == 0.0 {
                continue;
            }
            let encoder_target = if train_encoder { Some(&mut encoder_grad[..]) } else { None };
            accumulate_score_gradient(
                self.encoder.as_ref(),
                &self.head,
                pair,
                self.config.max_tokens,
                &trace,
                d_score,
                encoder_target,
                &mut head_grad,
            )?;
        }
        Ok((total * scale, encoder_grad, head_grad))
    }

    /// One optimizer step on `pairs`; returns the loss before the step.
    pub fn step(&mut self, pairs: &[&WicPair]) -> Result<f64> {
        let (loss, encoder_grad, head_grad) = self.batch_gradient(pairs)?;
        if !loss.is_finite() || encoder_grad.iter().chain(&head_grad).any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "training loss {loss} or its gradient is not finite on batch starting with `{}`",
                pairs[0].id
            )));
        }
        if self.trains_encoder() {
            self.encoder_opt.step(self.encoder.parameters_mut(), &encoder_grad);
        }
        if !head_grad.is_empty() {
            self.head_opt.step(self.head.parameters_mut(), &head_grad);
        }
        Ok(loss)
    }

    /// Mean validation loss and accuracy. Cosine heads are scored at the
    /// Youden threshold of the validation scores themselves, MLP heads at 0.5.
    pub fn validate(&self, corpus: &Corpus) -> Result<(f64, f64)> {
        if corpus.is_empty() {
            return Err(Error::Contract("validation corpus is empty".into()));
        }
        let eps = self.config.prediction_clamp_epsilon;
        let mut scores = Vec::with_capacity(corpus.len());
        let mut labels = Vec::with_capacity(corpus.len());
        let mut total = 0.0;
        for pair in corpus {
            let label = Self::label(pair)?;
            let score = self.score(pair)?;
            total += bce_loss(score, label, eps)?;
            scores.push(score);
            labels.push(label);
        }
        let threshold = self.threshold_for(&scores, &labels);
        let correct = scores
            .iter()
            .zip(&labels)
            .filter(|(s, l)| decide(**s, threshold) == **l)
            .count();
        Ok((total / corpus.len() as f64, correct as f64 / corpus.len() as f64))
    }

    fn threshold_for(&self, scores: &[f64], labels: &[bool]) -> f64 {
        if self.head.config().needs_calibration() {
            if let Ok(r) = calibration::calibrate(scores, labels) {
                return r.threshold;
            }
        }
        calibration::fixed_threshold().threshold
    }

    /// Calibration to store with a checkpoint: Youden on `validation` for
    /// cosine heads, the fixed 0.5 threshold otherwise.
    pub fn calibrate(&self, validation: &Corpus) -> Result<CalibrationSummary> {
        if !self.head.config().needs_calibration() {
            return Ok(calibration::fixed_threshold().summary());
        }
        let mut scores = Vec::with_capacity(validation.len());
        let mut labels = Vec::with_capacity(validation.len());
        for pair in validation {
            scores.push(self.score(pair)?);
            labels.push(Self::label(pair)?);
        }
        Ok(calibration::calibrate(&scores, &labels)?.summary())
    }

    fn snapshot(&self) -> (Vec<f64>, Vec<f64>) {
        (self.encoder.parameters().to_vec(), self.head.parameters().to_vec())
    }

    fn restore(&mut self, (encoder, head): (Vec<f64>, Vec<f64>)) {
        self.encoder.parameters_mut().copy_from_slice(&encoder);
        self.head.parameters_mut().copy_from_slice(&head);
    }
}

#[allow(clippy::too_many_arguments)]
fn accumulate_score_gradient(
    encoder: &dyn ContextualEncoder,
    head: &Head,
    pair: &WicPair,
    max_tokens: usize,
    trace: &PairTrace,
    d_score: f64,
    encoder_grad: Option<&mut [f64]>,
    head_grad: &mut [f64],
) -> Result<()> {
    let (d_emb, d_head) = head.backward(&trace.embedding, d_score)?;
    for (g, d) in head_grad.iter_mut().zip(&d_head) {
        *g += d;
    }
    if let Some(grad) = encoder_grad {
        backward_pair(encoder, pair, max_tokens, trace, &d_emb, grad)?;
    }
    Ok(())
}

/// Head score for `pair` and its gradient with respect to the encoder and
/// head parameters.
pub fn score_gradient(
    encoder: &dyn ContextualEncoder,
    head: &Head,
    pair: &WicPair,
    max_tokens: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let trace = encode_pair_traced(encoder, pair, max_tokens, head.config().uses_sentence_vectors())?;
    let score = head.forward(&trace.embedding)?;
    let mut encoder_grad = vec![0.0; encoder.parameters().len()];
    let mut head_grad = vec![0.0; head.parameter_count()];
    accumulate_score_gradient(
        encoder,
        head,
        pair,
        max_tokens,
        &trace,
        1.0,
        Some(&mut encoder_grad),
        &mut head_grad,
    )?;
    Ok((score, encoder_grad, head_grad))
}

/// Batch index (1-based, within an epoch) after which each check runs, with
/// its fraction-of-epoch position.
fn check_schedule(batches: usize, checks_per_epoch: usize) -> Vec<(usize, f64)> {
    let mut by_batch: BTreeMap<usize, usize> = BTreeMap::new();
    for k in 1..=checks_per_epoch {
        let b = (k * batches).div_ceil(checks_per_epoch).max(1);
        by_batch.insert(b, k);
    }
    by_batch
        .into_iter()
        .map(|(b, k)| (b, k as f64 / checks_per_epoch as f64))
        .collect()
}

/// Fine-tunes `encoder` and `head` on `train`, early-stopping on `validation`.
///
/// Returns the best-validation checkpoint with its calibration and history.
/// When nothing is trainable (cosine head over a frozen encoder) a single
/// check at epoch 0 is recorded.
pub fn train(
    encoder: Box<dyn ContextualEncoder>,
    head: Head,
    train: &Corpus,
    validation: &Corpus,
    config: &TrainConfig,
) -> Result<(Checkpoint, TrainHistory)> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Contract("training and validation corpora must be non-empty".into()));
    }
    if !train.is_labeled() || !validation.is_labeled() {
        return Err(Error::Contract("training and validation corpora must be labeled".into()));
    }
    let mut learner = Learner::new(encoder, head, *config)?;
    let history = if learner.has_trainable_parameters() {
        run_epochs(&mut learner, train, config, &mut |l: &Learner| l.validate(validation))?
    } else {
        let (loss, accuracy) = learner.validate(validation)?;
        TrainHistory {
            records: vec![CheckRecord {
                epoch_position: 0.0,
                validation_loss: loss,
                validation_accuracy: accuracy,
                training_loss: None,
            }],
            stopped_early: false,
            epochs_completed: 0.0,
            best_check: 1,
            stop_check: None,
        }
    };
    let calibration = learner.calibrate(validation)?;
    let checkpoint = Checkpoint {
        encoder: learner.encoder.spec(),
        encoder_parameters: learner.encoder.parameters().to_vec(),
        head: learner.head.config(),
        head_parameters: learner.head.parameters().to_vec(),
        train_config: *config,
        calibration: Some(calibration),
        history: Some(history.clone()),
        manifest: None,
    };
    Ok((checkpoint, history))
}

/// The epoch loop. `validate` yields (loss, accuracy) at each check, which
/// lets tests inject loss sequences.
fn run_epochs(
    learner: &mut Learner,
    train: &Corpus,
    config: &TrainConfig,
    validate: &mut dyn FnMut(&Learner) -> Result<(f64, f64)>,
) -> Result<TrainHistory> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batches = train.len().div_ceil(config.batch_size);
    let schedule = check_schedule(batches, config.checks_per_epoch);
    let mut rule = EarlyStopping::new(config.patience_checks);
    let mut records = Vec::new();
    let mut best = learner.snapshot();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let (mut running, mut running_batches) = (0.0, 0usize);

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut next_check = schedule.iter().peekable();
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&WicPair> = chunk.iter().map(|&i| &train.pairs()[i]).collect();
            running += learner.step(&batch)?;
            running_batches += 1;

            let Some(&&(after, fraction)) = next_check.peek() else {
                continue;
            };
            if b + 1 != after {
                continue;
            }
            next_check.next();
            let (loss, accuracy) = validate(learner)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "validation loss {loss} at epoch {}",
                    epoch as f64 + fraction
                )));
            }
            records.push(CheckRecord {
                epoch_position: epoch as f64 + fraction,
                validation_loss: loss,
                validation_accuracy: accuracy,
                training_loss: Some(running / running_batches as f64),
            });
            running = 0.0;
            running_batches = 0;
            match rule.observe(loss) {
                CheckOutcome::Improved => best = learner.snapshot(),
                CheckOutcome::NotImproved => {}
                CheckOutcome::Stop => {
                    learner.restore(best);
                    return Ok(TrainHistory {
                        epochs_completed: epoch as f64 + fraction,
                        records,
                        stopped_early: true,
                        best_check: rule.best_check(),
                        stop_check: Some(rule.checks()),
                    });
                }
            }
        }
    }
    learner.restore(best);
    Ok(TrainHistory {
        records,
        stopped_early: false,
        epochs_completed: config.max_epochs as f64,
        best_check: rule.best_check(),
        stop_check: None,
    })
}

/// Scores every pair of `corpus`, in corpus order, with the checkpoint's model.
pub fn predict_scores(checkpoint: &Checkpoint, corpus: &Corpus, config: &TrainConfig) -> Result<Vec<(String, f64)>> {
    let model = checkpoint.model_with_max_tokens(config.max_tokens)?;
    corpus
        .iter()
        .map(|pair| Ok((pair.id.clone(), model.score(pair)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{CharSpan, CorpusSource};
    use crate::encoding::ToyEncoder;
    use crate::heads::HeadConfig;
    use crate::synthetic::{self, SyntheticConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn bce_reference_values() {
        assert_abs_diff_eq!(bce_loss(0.5, true, 1e-7).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(bce_loss(1.0, true, 1e-7).unwrap(), -(1.0f64 - 1e-7).ln(), epsilon = 1e-18);
        assert_abs_diff_eq!(bce_loss(1.0, true, 1e-7).unwrap(), 1e-7, epsilon = 1e-13);
        let zero = bce_loss(0.0, true, 1e-7).unwrap();
        assert!(zero.is_finite());
        assert_abs_diff_eq!(zero, 16.118, epsilon = 5e-4);
        assert_abs_diff_eq!(bce_loss(0.0, false, 1e-7).unwrap(), 1e-7, epsilon = 1e-13);
        assert!(bce_loss(1.5, true, 1e-7).is_err());
        assert!(bce_loss(f64::NAN, true, 1e-7).is_err());
    }

    #[test]
    fn bce_gradient_matches_difference_quotient() {
        for &(p, y) in &[(0.3, true), (0.3, false), (0.9, true), (0.05, false)] {
            let h = 1e-7;
            let num = (bce_loss(p + h, y, 1e-7).unwrap() - bce_loss(p - h, y, 1e-7).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(bce_gradient(p, y, 1e-7).unwrap(), num, epsilon = 1e-5);
        }
        assert_eq!(bce_gradient(0.0, true, 1e-7).unwrap(), 0.0);
    }

    #[test]
    fn schedule_is_half_epochs() {
        assert_eq!(check_schedule(10, 2), [(5, 0.5), (10, 1.0)]);
        assert_eq!(check_schedule(5, 2), [(3, 0.5), (5, 1.0)]);
        assert_eq!(check_schedule(1, 2), [(1, 1.0)]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let json = r#"{"batch_size": 8, "lerning_rate": 0.1}"#;
        assert!(serde_json::from_str::<TrainConfig>(json).is_err());
    }

    fn toy_setup(head: &str, seed: u64) -> (Box<dyn ContextualEncoder>, Head) {
        let encoder = ToyEncoder::new(8, seed).unwrap();
        let head = Head::new(head.parse::<HeadConfig>().unwrap(), 8, seed).unwrap();
        (Box::new(encoder), head)
    }

    #[test]
    fn empty_and_unlabeled_corpora_are_rejected() {
        let data = synthetic::generate(&SyntheticConfig {
            pairs: 10,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (enc, head) = toy_setup("cosine-relu", 0);
        let empty = Corpus::empty(CorpusSource::Synthetic);
        assert!(matches!(
            train(enc, head, &empty, &data, &TrainConfig::default()),
            Err(Error::Contract(_))
        ));
        let mut pairs = data.clone().into_pairs();
        pairs[0].label = None;
        let unlabeled = Corpus::new(pairs, CorpusSource::Synthetic).unwrap();
        let (enc, head) = toy_setup("cosine-relu", 0);
        assert!(train(enc, head, &unlabeled, &data, &TrainConfig::default()).is_err());
    }

    #[test]
    fn cosine_training_touches_encoder_only() {
        let data = synthetic::generate(&SyntheticConfig {
            pairs: 24,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (enc, head) = toy_setup("cosine-relu", 1);
        let before = enc.parameters().to_vec();
        let learner_config = TrainConfig {
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let mut learner = Learner::new(enc, head, learner_config).unwrap();
        let batch: Vec<&WicPair> = data.iter().take(8).collect();
        learner.step(&batch).unwrap();
        assert_eq!(learner.head().parameter_count(), 0);
        assert_ne!(learner.encoder().parameters(), &before[..]);

        let (enc, head) = toy_setup("mlp", 1);
        let (enc_before, head_before) = (enc.parameters().to_vec(), head.parameters().to_vec());
        let mut learner = Learner::new(enc, head, learner_config).unwrap();
        learner.step(&batch).unwrap();
        assert_ne!(learner.encoder().parameters(), &enc_before[..]);
        assert_ne!(learner.head().parameters(), &head_before[..]);

        let frozen = TrainConfig {
            freeze_encoder: true,
            ..learner_config
        };
        let (enc, head) = toy_setup("mlp", 1);
        let mut learner = Learner::new(enc, head, frozen).unwrap();
        learner.step(&batch).unwrap();
        assert_eq!(learner.encoder().parameters(), &enc_before[..]);
        assert_ne!(learner.head().parameters(), &head_before[..]);
    }

    #[test]
    fn frozen_cosine_baseline_records_single_check() {
        let data = synthetic::generate(&SyntheticConfig {
            pairs: 40,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (enc, head) = toy_setup("cosine-sigmoid", 2);
        let before = enc.parameters().to_vec();
        let config = TrainConfig {
            freeze_encoder: true,
            ..TrainConfig::default()
        };
        let (ckpt, history) = train(enc, head, &data, &data, &config).unwrap();
        assert_eq!(history.records.len(), 1);
        assert_eq!(history.epochs_completed, 0.0);
        assert_eq!(ckpt.encoder_parameters, before);
        assert!(ckpt.calibration.unwrap().n_candidates >= 2);
    }

    #[test]
    fn truncated_target_is_an_alignment_error() {
        let pair = WicPair {
            id: "long".into(),
            lemma: "end".into(),
            pos: "NOUN".into(),
            sentence1: "a b c d end".into(),
            sentence2: "end".into(),
            span1: CharSpan::new(8, 11),
            span2: CharSpan::new(0, 3),
            label: Some(true),
        };
        let (enc, head) = toy_setup("cosine-relu", 0);
        let config = TrainConfig {
            max_tokens: 3,
            ..TrainConfig::default()
        };
        let learner = Learner::new(enc, head, config).unwrap();
        match learner.score(&pair) {
            Err(Error::Alignment { id, .. }) => assert_eq!(id, "long"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn history_positions_increase() {
        let data = synthetic::generate(&SyntheticConfig {
            pairs: 48,
            seed: 4,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (tr, va) = crate::datasets::split_by_lemma(&data, &crate::SplitConfig::new(0.75, 0).unwrap()).unwrap();
        let (enc, head) = toy_setup("cosine-relu", 3);
        let config = TrainConfig {
            learning_rate: 1e-2,
            max_epochs: 3,
            ..TrainConfig::default()
        };
        let (_, history) = train(enc, head, &tr, &va, &config).unwrap();
        assert!(history.records.windows(2).all(|w| w[0].epoch_position < w[1].epoch_position));
        assert!(history.epochs_completed <= 3.0);
        assert!(history.best_check >= 1 && history.best_check <= history.records.len());
        let positions: Vec<f64> = history.records.iter().map(|r| r.epoch_position).collect();
        assert_eq!(positions[0], 0.5);
    }

    /// Drives the real epoch loop with injected validation losses. 8 pairs
    /// in batches of 2 give 4 batches, so checks fall after batches 2 and 4.
    fn run_injected(losses: &[f64], max_epochs: usize) -> (TrainHistory, Vec<Vec<f64>>, Vec<f64>) {
        let data = synthetic::generate(&SyntheticConfig {
            pairs: 8,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (enc, head) = toy_setup("cosine-relu", 0);
        let config = TrainConfig {
            batch_size: 2,
            learning_rate: 1e-2,
            max_epochs,
            ..TrainConfig::default()
        };
        let mut learner = Learner::new(enc, head, config).unwrap();
        let mut seen = Vec::new();
        let mut next = losses.iter().copied();
        let history = run_epochs(&mut learner, &data, &config, &mut |l: &Learner| {
            seen.push(l.encoder().parameters().to_vec());
            Ok((next.next().expect("loss sequence exhausted"), 0.5))
        })
        .unwrap();
        (history, seen, learner.encoder().parameters().to_vec())
    }

    #[test]
    fn injected_losses_stop_at_check_four() {
        let (history, seen, restored) = run_injected(&[0.70, 0.60, 0.65, 0.66], 8);
        assert!(history.stopped_early);
        assert_eq!(history.records.len(), 4);
        assert_eq!(history.stop_check, Some(4));
        assert_eq!(history.best_check, 2);
        assert_eq!(history.epochs_completed, 2.0);
        assert_eq!(restored, seen[1], "parameters restored to the best check");
    }

    #[test]
    fn strictly_decreasing_losses_run_all_epochs() {
        let losses: Vec<f64> = (0..16).map(|i| 1.0 - 0.01 * i as f64).collect();
        let (history, seen, restored) = run_injected(&losses, 8);
        assert!(!history.stopped_early);
        assert_eq!(history.records.len(), 16);
        assert_eq!(history.epochs_completed, 8.0);
        assert_eq!(history.best_check, 16);
        assert_eq!(restored, seen[15]);
    }

    #[test]
    fn small_step_decreases_batch_loss() {
        let mut failures = 0;
        for seed in 0..20 {
            let data = synthetic::generate(&SyntheticConfig {
                pairs: 8,
                seed,
                ..SyntheticConfig::default()
            })
            .unwrap();
            let batch: Vec<&WicPair> = data.iter().collect();
            let (enc, head) = toy_setup("cosine-relu", seed);
            let config = TrainConfig {
                learning_rate: 1e-3,
                ..TrainConfig::default()
            };
            let mut learner = Learner::new(enc, head, config).unwrap();
            let before = learner.step(&batch).unwrap();
            if learner.batch_loss(&batch).unwrap() >= before {
                failures += 1;
            }
        }
        assert!(failures <= 2, "{failures} of 20 seeds did not decrease the loss");
    }

    fn trained_checkpoint() -> (Checkpoint, Corpus) {
        let data = synthetic::generate(&SyntheticConfig {
            pairs: 40,
            seed: 6,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (enc, head) = toy_setup("cosine-relu", 6);
        let config = TrainConfig {
            learning_rate: 1e-2,
            max_epochs: 1,
            ..TrainConfig::default()
        };
        let (checkpoint, _) = train(enc, head, &data, &data, &config).unwrap();
        (checkpoint, data)
    }

    #[test]
    fn predict_scores_is_deterministic_and_unbatched() {
        let (checkpoint, data) = trained_checkpoint();
        let config = checkpoint.train_config;
        let a = predict_scores(&checkpoint, &data, &config).unwrap();
        assert_eq!(a, predict_scores(&checkpoint, &data, &config).unwrap());
        assert_eq!(a.len(), 40);
        let model = checkpoint.model().unwrap();
        for (pair, (id, score)) in data.iter().zip(&a) {
            assert_eq!(&pair.id, id);
            let single = Corpus::new(vec![pair.clone()], CorpusSource::Synthetic).unwrap();
            let alone = predict_scores(&checkpoint, &single, &config).unwrap();
            assert_eq!(alone[0].1.to_bits(), score.to_bits());
            assert_eq!(model.score(pair).unwrap().to_bits(), score.to_bits());
        }
    }

    #[test]
    fn self_similarity_scores_one() {
        let (enc, head) = toy_setup("cosine-relu", 0);
        let (checkpoint, _) = {
            let data = synthetic::generate(&SyntheticConfig {
                pairs: 10,
                ..SyntheticConfig::default()
            })
            .unwrap();
            let config = TrainConfig {
                freeze_encoder: true,
                ..TrainConfig::default()
            };
            train(enc, head, &data, &data, &config).unwrap()
        };
        let pair = WicPair {
            id: "self".into(),
            lemma: "bank".into(),
            pos: "NOUN".into(),
            sentence1: "the river bank".into(),
            sentence2: "the river bank".into(),
            span1: CharSpan::new(10, 14),
            span2: CharSpan::new(10, 14),
            label: None,
        };
        let corpus = Corpus::new(vec![pair], CorpusSource::Synthetic).unwrap();
        let scores = predict_scores(&checkpoint, &corpus, &checkpoint.train_config).unwrap();
        assert_eq!(scores[0].1, 1.0);
    }

    #[test]
    fn checkpoint_round_trip_predicts_identically() {
        let (checkpoint, data) = trained_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        checkpoint.save(dir.path()).unwrap();
        for file in ["config.json", "calibration.json", "history.json", "parameters.bin"] {
            assert!(dir.path().join(file).exists(), "{file}");
        }
        let loaded = Checkpoint::load(dir.path()).unwrap();
        assert_eq!(loaded, checkpoint);
        let config = checkpoint.train_config;
        assert_eq!(
            predict_scores(&loaded, &data, &config).unwrap(),
            predict_scores(&checkpoint, &data, &config).unwrap()
        );
    }
}
