//! Target-word embeddings from contextual encoders.
//!
//! An encoder turns a sentence into per-sub-token vectors with character
//! offsets. The target word's sub-tokens are found by offset overlap with the
//! pair's character span and max-pooled elementwise into one vector.

mod registry;
mod toy;

pub use registry::{build_encoder, encoder_from_spec, known_encoders, EncoderSpec, ToyOptions, MODEL_CACHE_ENV};
pub use toy::ToyEncoder;

use serde::{Deserialize, Serialize};

use crate::datasets::{CharSpan, WicPair};
use crate::error::{Error, Result};

/// Output of one forward pass over a sentence.
///
/// `subtoken_vectors` and `offsets` are parallel; special positions (the
/// sentence summary, separators) carry an empty offset interval and so never
/// align with a target span.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub subtoken_vectors: Vec<Vec<f64>>,
    pub sentence_vector: Vec<f64>,
    pub offsets: Vec<CharSpan>,
}

impl EncoderOutput {
    pub fn len(&self) -> usize {
        self.subtoken_vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtoken_vectors.is_empty()
    }

    /// Offsets of the non-special positions, in order.
    pub fn content_offsets(&self) -> Vec<CharSpan> {
        self.offsets.iter().copied().filter(|o| !o.is_empty()).collect()
    }
}

/// Upstream gradient with respect to one [`EncoderOutput`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGradient {
    pub subtoken_vectors: Vec<Vec<f64>>,
    pub sentence_vector: Vec<f64>,
}

impl OutputGradient {
    pub fn zeros(positions: usize, dimension: usize) -> Self {
        Self {
            subtoken_vectors: vec![vec![0.0; dimension]; positions],
            sentence_vector: vec![0.0; dimension],
        }
    }
}

/// A trainable sentence encoder.
///
/// Implementations must keep `dimension()` fixed and must never drop the
/// sentence-summary position when truncating to `max_tokens`. `encode` and
/// `backward` take `&self`; implementations that are not safe to call
/// concurrently must say so.
pub trait ContextualEncoder: Send + Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    fn encode(&self, sentence: &str, max_tokens: usize) -> Result<EncoderOutput>;

    fn parameters(&self) -> &[f64];

    fn parameters_mut(&mut self) -> &mut [f64];

    /// Accumulates the parameter gradient of a scalar `L` into `grad`, given
    /// `upstream = dL/d(output)` for `encode(sentence, max_tokens)`.
    fn backward(
        &self,
        sentence: &str,
        max_tokens: usize,
        upstream: &OutputGradient,
        grad: &mut [f64],
    ) -> Result<()>;

    /// Serializable description sufficient to rebuild this encoder's
    /// architecture; parameters are stored separately.
    fn spec(&self) -> EncoderSpec;
}

/// Pooled vectors for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEmbedding {
    pub pair_id: String,
    pub target1: Vec<f64>,
    pub target2: Vec<f64>,
    pub sentence1_vec: Option<Vec<f64>>,
    pub sentence2_vec: Option<Vec<f64>>,
}

impl PairEmbedding {
    pub fn targets(pair_id: impl Into<String>, target1: Vec<f64>, target2: Vec<f64>) -> Self {
        Self {
            pair_id: pair_id.into(),
            target1,
            target2,
            sentence1_vec: None,
            sentence2_vec: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.target1.len()
    }

    /// Same-shaped embedding filled with zeros, used for gradients.
    pub fn zeros_like(&self) -> Self {
        let z = |v: &Vec<f64>| vec![0.0; v.len()];
        Self {
            pair_id: self.pair_id.clone(),
            target1: z(&self.target1),
            target2: z(&self.target2),
            sentence1_vec: self.sentence1_vec.as_ref().map(z),
            sentence2_vec: self.sentence2_vec.as_ref().map(z),
        }
    }
}

/// Indices of every sub-token whose offset interval overlaps `span`.
pub fn align_target_subtokens(output: &EncoderOutput, span: CharSpan) -> Result<Vec<usize>> {
    let indices: Vec<usize> = output
        .offsets
        .iter()
        .enumerate()
        .filter(|(_, o)| o.overlaps(&span))
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        let covered = output.content_offsets().last().map(|o| o.end).unwrap_or(0);
        return Err(Error::Alignment {
            id: String::new(),
            message: format!(
                "no sub-token overlaps target span {span} (encoded text covers characters [0,{covered}))"
            ),
        });
    }
    Ok(indices)
}

/// Elementwise maximum over the selected vectors.
pub fn max_pool(vectors: &[Vec<f64>], indices: &[usize]) -> Result<Vec<f64>> {
    max_pool_with_argmax(vectors, indices).map(|(pooled, _)| pooled)
}

/// Max pool plus, for every component, the index of the vector supplying it
/// (first index on ties).
pub(crate) fn max_pool_with_argmax(
    vectors: &[Vec<f64>],
    indices: &[usize],
) -> Result<(Vec<f64>, Vec<usize>)> {
    let (&first, rest) = indices
        .split_first()
        .ok_or_else(|| Error::Contract("max_pool needs a non-empty index set".into()))?;
    let fetch = |i: usize| {
        vectors.get(i).ok_or_else(|| {
            Error::Contract(format!("pool index {i} out of range for {} vectors", vectors.len()))
        })
    };
    let mut pooled = fetch(first)?.clone();
    let mut argmax = vec![first; pooled.len()];
    for &i in rest {
        let v = fetch(i)?;
        if v.len() != pooled.len() {
            return Err(Error::Contract(format!(
                "vector {i} has dimension {} but expected {}",
                v.len(),
                pooled.len()
            )));
        }
        for (c, &x) in v.iter().enumerate() {
            if x > pooled[c] {
                pooled[c] = x;
                argmax[c] = i;
            }
        }
    }
    Ok((pooled, argmax))
}

/// What `encode_pair` needs to push gradients back into the encoder.
#[derive(Debug, Clone)]
pub(crate) struct PairTrace {
    pub embedding: PairEmbedding,
    pub positions: [usize; 2],
    pub argmax: [Vec<usize>; 2],
}

fn encode_side(
    encoder: &dyn ContextualEncoder,
    id: &str,
    sentence: &str,
    span: CharSpan,
    max_tokens: usize,
) -> Result<(EncoderOutput, Vec<f64>, Vec<usize>)> {
    let output = encoder.encode(sentence, max_tokens)?;
    let indices = align_target_subtokens(&output, span).map_err(|e| match e {
        Error::Alignment { message, .. } => Error::Alignment {
            id: id.to_string(),
            message: format!("{message}; max_tokens = {max_tokens}"),
        },
        other => other,
    })?;
    let (pooled, argmax) = max_pool_with_argmax(&output.subtoken_vectors, &indices)?;
    Ok((output, pooled, argmax))
}

pub(crate) fn encode_pair_traced(
    encoder: &dyn ContextualEncoder,
    pair: &WicPair,
    max_tokens: usize,
    want_sentence_vectors: bool,
) -> Result<PairTrace> {
    let (out1, target1, argmax1) =
        encode_side(encoder, &pair.id, &pair.sentence1, pair.span1, max_tokens)?;
    let (out2, target2, argmax2) =
        encode_side(encoder, &pair.id, &pair.sentence2, pair.span2, max_tokens)?;
    let positions = [out1.len(), out2.len()];
    let (sentence1_vec, sentence2_vec) = if want_sentence_vectors {
        (Some(out1.sentence_vector), Some(out2.sentence_vector))
    } else {
        (None, None)
    };
    Ok(PairTrace {
        embedding: PairEmbedding {
            pair_id: pair.id.clone(),
            target1,
            target2,
            sentence1_vec,
            sentence2_vec,
        },
        positions,
        argmax: [argmax1, argmax2],
    })
}

/// Encodes both sentences and max-pools the target sub-tokens of each.
pub fn encode_pair(
    encoder: &dyn ContextualEncoder,
    pair: &WicPair,
    max_tokens: usize,
    want_sentence_vectors: bool,
) -> Result<PairEmbedding> {
    encode_pair_traced(encoder, pair, max_tokens, want_sentence_vectors).map(|t| t.embedding)
}

/// Routes `d_embedding` back through max pooling into the encoder and
/// accumulates the parameter gradient into `grad`.
pub(crate) fn backward_pair(
    encoder: &dyn ContextualEncoder,
    pair: &WicPair,
    max_tokens: usize,
    trace: &PairTrace,
    d_embedding: &PairEmbedding,
    grad: &mut [f64],
) -> Result<()> {
    let d = encoder.dimension();
    let sides = [
        (&pair.sentence1, &d_embedding.target1, &d_embedding.sentence1_vec),
        (&pair.sentence2, &d_embedding.target2, &d_embedding.sentence2_vec),
    ];
    for (k, (sentence, d_target, d_sentence)) in sides.into_iter().enumerate() {
        let mut upstream = OutputGradient::zeros(trace.positions[k], d);
        for (c, &g) in d_target.iter().enumerate() {
            upstream.subtoken_vectors[trace.argmax[k][c]][c] += g;
        }
        if let Some(ds) = d_sentence {
            upstream.sentence_vector.copy_from_slice(ds);
        }
        encoder.backward(sentence, max_tokens, &upstream, grad)?;
    }
    Ok(())
}
