use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ContextualEncoder, EncoderOutput, EncoderSpec, OutputGradient, ToyOptions};
use crate::datasets::CharSpan;
use crate::error::{Error, Result};

const POSITION_SCALE: f64 = 0.25;
const SUMMARY_KEY: &[u8] = b"[CLS]";

/// Small deterministic encoder used for tests and desk-scale experiments.
///
/// Sentences are split on whitespace; each token gets a hashed feature vector
/// `phi` of its string plus a scaled hashed vector of its position. With
/// `m` the mean feature vector of the sentence's tokens, position `i` is
/// encoded as
///
/// ```text
/// v_i = tanh(A * phi_i + B * m + b)
/// ```
///
/// so every vector depends on the whole context through `B * m`. Position 0
/// is the sentence summary, built from a fixed summary feature vector.
///
/// `encode` and `backward` only read `self` and are safe to call from many
/// threads at once.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    options: ToyOptions,
    // [A (d x F, row-major) | B (d x F, row-major) | b (d)]
    params: Vec<f64>,
}

struct Tokenized {
    features: Vec<Vec<f64>>,
    offsets: Vec<CharSpan>,
    context: Vec<f64>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Adds `scale * u` to `out`, with `u` uniform in [-1, 1) and seeded by `key`.
fn add_hashed(seed: u64, salt: u64, key: &[u8], scale: f64, out: &mut [f64]) {
    let mut state = fnv1a(key) ^ seed.rotate_left(17) ^ salt;
    for x in out.iter_mut() {
        let u = (splitmix(&mut state) >> 11) as f64 / (1u64 << 53) as f64;
        *x += scale * (2.0 * u - 1.0);
    }
}

fn whitespace_tokens(sentence: &str) -> Vec<(&str, CharSpan)> {
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut chars = 0usize;
    for (byte, ch) in sentence.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some((b0, c0))) => {
                tokens.push((&sentence[b0..byte], CharSpan::new(c0, chars)));
                start = None;
            }
            (false, None) => start = Some((byte, chars)),
            _ => {}
        }
        chars += 1;
    }
    if let Some((b0, c0)) = start {
        tokens.push((&sentence[b0..], CharSpan::new(c0, chars)));
    }
    tokens
}

impl ToyEncoder {
    pub const DEFAULT_FEATURE_DIM: usize = 32;

    /// Toy encoder with output dimension `dimension` (at least 2).
    pub fn new(dimension: usize, seed: u64) -> Result<Self> {
        Self::with_options(ToyOptions {
            dimension,
            feature_dim: Self::DEFAULT_FEATURE_DIM,
            seed,
        })
    }

    pub fn with_options(options: ToyOptions) -> Result<Self> {
        if options.dimension < 2 {
            return Err(Error::Contract(format!(
                "toy encoder dimension must be at least 2, got {}",
                options.dimension
            )));
        }
        if options.feature_dim == 0 {
            return Err(Error::Contract("toy encoder feature_dim must be positive".into()));
        }
        let (d, f) = (options.dimension, options.feature_dim);
        let bound = 1.0 / (f as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut params: Vec<f64> = (0..2 * d * f).map(|_| rng.gen_range(-bound..bound)).collect();
        params.extend(std::iter::repeat_n(0.0, d));
        Ok(Self { options, params })
    }

    pub fn options(&self) -> ToyOptions {
        self.options
    }

    fn split(&self) -> (&[f64], &[f64], &[f64]) {
        let df = self.options.dimension * self.options.feature_dim;
        let (a, rest) = self.params.split_at(df);
        let (b, bias) = rest.split_at(df);
        (a, b, bias)
    }

    fn tokenize(&self, sentence: &str, max_tokens: usize) -> Result<Tokenized> {
        if max_tokens == 0 {
            return Err(Error::Contract("max_tokens must be positive".into()));
        }
        let f = self.options.feature_dim;
        let seed = self.options.seed;
        let mut features = Vec::new();
        let mut offsets = vec![CharSpan::new(0, 0)];
        let mut summary = vec![0.0; f];
        add_hashed(seed, 1, SUMMARY_KEY, 1.0, &mut summary);
        features.push(summary);
        // Position 0 is reserved for the summary; truncation drops trailing tokens.
        for (pos, (token, span)) in whitespace_tokens(sentence)
            .into_iter()
            .take(max_tokens - 1)
            .enumerate()
        {
            let mut phi = vec![0.0; f];
            add_hashed(seed, 1, token.as_bytes(), 1.0, &mut phi);
            add_hashed(seed, 2, &(pos as u64 + 1).to_le_bytes(), POSITION_SCALE, &mut phi);
            features.push(phi);
            offsets.push(span);
        }
        let n = features.len() - 1;
        let mut context = vec![0.0; f];
        if n > 0 {
            for phi in &features[1..] {
                for (c, x) in context.iter_mut().zip(phi) {
                    *c += x;
                }
            }
            context.iter_mut().for_each(|c| *c /= n as f64);
        }
        Ok(Tokenized {
            features,
            offsets,
            context,
        })
    }

    fn forward(&self, tok: &Tokenized) -> Vec<Vec<f64>> {
        let (d, f) = (self.options.dimension, self.options.feature_dim);
        let (a, b, bias) = self.split();
        let shared: Vec<f64> = (0..d)
            .map(|r| bias[r] + dot(&b[r * f..(r + 1) * f], &tok.context))
            .collect();
        tok.features
            .iter()
            .map(|phi| {
                (0..d)
                    .map(|r| (shared[r] + dot(&a[r * f..(r + 1) * f], phi)).tanh())
                    .collect()
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ContextualEncoder for ToyEncoder {
    fn name(&self) -> &str {
        "toy"
    }

    fn dimension(&self) -> usize {
        self.options.dimension
    }

    fn encode(&self, sentence: &str, max_tokens: usize) -> Result<EncoderOutput> {
        let tok = self.tokenize(sentence, max_tokens)?;
        let vectors = self.forward(&tok);
        Ok(EncoderOutput {
            sentence_vector: vectors[0].clone(),
            subtoken_vectors: vectors,
            offsets: tok.offsets,
        })
    }

    fn parameters(&self) -> &[f64] {
        &self.params
    }

    fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn backward(
        &self,
        sentence: &str,
        max_tokens: usize,
        upstream: &OutputGradient,
        grad: &mut [f64],
    ) -> Result<()> {
        let (d, f) = (self.options.dimension, self.options.feature_dim);
        if grad.len() != self.params.len() {
            return Err(Error::Contract(format!(
                "gradient buffer has {} entries, encoder has {} parameters",
                grad.len(),
                self.params.len()
            )));
        }
        let tok = self.tokenize(sentence, max_tokens)?;
        if upstream.subtoken_vectors.len() != tok.features.len() {
            return Err(Error::Contract(format!(
                "upstream gradient covers {} positions, encoding has {}",
                upstream.subtoken_vectors.len(),
                tok.features.len()
            )));
        }
        let vectors = self.forward(&tok);
        let (ga, rest) = grad.split_at_mut(d * f);
        let (gb, gbias) = rest.split_at_mut(d * f);
        for (i, (phi, v)) in tok.features.iter().zip(&vectors).enumerate() {
            for r in 0..d {
                let mut g = upstream.subtoken_vectors[i][r];
                if i == 0 {
                    g += upstream.sentence_vector[r];
                }
                if g == 0.0 {
                    continue;
                }
                let delta = g * (1.0 - v[r] * v[r]);
                for c in 0..f {
                    ga[r * f + c] += delta * phi[c];
                    gb[r * f + c] += delta * tok.context[c];
                }
                gbias[r] += delta;
            }
        }
        Ok(())
    }

    fn spec(&self) -> EncoderSpec {
        EncoderSpec::Toy(self.options)
    }
}
