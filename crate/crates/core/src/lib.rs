//! Word-in-Context (WiC) disambiguation toolkit.
//!
//! Given two sentences that each mark an occurrence of the same target word,
//! decide whether the word carries the same meaning in both. The crate is
//! organised the way the pipeline runs:
//!
//! - [`datasets`]: MCL-WiC and SuperGLUE WiC loaders, merging, lemma-disjoint splits
//! - [`encoding`]: contextual encoder interface, span-to-sub-token alignment, max pooling
//! - [`heads`]: the MLP head and the parameter-free cosine head
//! - [`calibration`]: ROC curves and Youden-J threshold selection
//! - [`training`]: BCE fine-tuning with half-epoch early stopping, checkpoints
//! - [`evaluation`]: accuracy, confusion counts and error analyses
//! - [`synthetic`]: seeded synthetic corpora for smoke runs and tests

pub mod calibration;
pub mod datasets;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod heads;
pub mod synthetic;
pub mod training;

pub use calibration::{fixed_threshold, roc_curve, youden_threshold, CalibrationResult, RocCurve};
pub use datasets::{CharSpan, Corpus, CorpusSource, SplitConfig, WicPair};
pub use encoding::{
    align_target_subtokens, encode_pair, max_pool, ContextualEncoder, EncoderOutput,
    PairEmbedding, ToyEncoder,
};
pub use error::{Error, ErrorClass, Result};
pub use evaluation::{evaluate, error_intersection, shared_first_sentence_errors, EvaluationReport};
pub use heads::{decide, Activation, CosineHeadConfig, Head, HeadConfig, MlpHeadConfig};
pub use training::{bce_loss, predict_scores, score_gradient, train, Checkpoint, TrainConfig, TrainHistory};
