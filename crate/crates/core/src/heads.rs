//! Classification heads mapping a [`PairEmbedding`] to a same-meaning score.
//!
//! - The MLP head concatenates the pooled target vectors (optionally preceded
//!   by the two sentence vectors), applies one ReLU hidden layer and a sigmoid
//!   output unit. Predictions use a fixed 0.5 threshold.
//! - The cosine head has no parameters: the score is the cosine similarity of
//!   the two target vectors passed through ReLU or sigmoid. Its threshold is
//!   calibrated on validation data.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::PairEmbedding;
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN_UNITS: usize = 100;
const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpHeadConfig {
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    #[serde(default)]
    pub use_sentence_vectors: bool,
}

fn default_hidden() -> usize {
    DEFAULT_HIDDEN_UNITS
}

impl Default for MlpHeadConfig {
    fn default() -> Self {
        Self {
            hidden_units: DEFAULT_HIDDEN_UNITS,
            use_sentence_vectors: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineHeadConfig {
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HeadConfig {
    Mlp(MlpHeadConfig),
    Cosine(CosineHeadConfig),
}

impl HeadConfig {
    pub fn uses_sentence_vectors(&self) -> bool {
        matches!(self, HeadConfig::Mlp(m) if m.use_sentence_vectors)
    }

    /// Whether predictions need a threshold fitted on validation scores.
    pub fn needs_calibration(&self) -> bool {
        matches!(self, HeadConfig::Cosine(_))
    }
}

impl FromStr for HeadConfig {
    type Err = Error;

    /// Parses `mlp`, `mlp+cls`, `cosine-relu` or `cosine-sigmoid`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mlp" => HeadConfig::Mlp(MlpHeadConfig::default()),
            "mlp+cls" => HeadConfig::Mlp(MlpHeadConfig {
                use_sentence_vectors: true,
                ..MlpHeadConfig::default()
            }),
            "cosine-relu" => HeadConfig::Cosine(CosineHeadConfig {
                activation: Activation::Relu,
            }),
            "cosine-sigmoid" => HeadConfig::Cosine(CosineHeadConfig {
                activation: Activation::Sigmoid,
            }),
            other => {
                return Err(Error::Contract(format!(
                    "unknown head {other:?}; expected one of mlp, mlp+cls, cosine-relu, cosine-sigmoid"
                )))
            }
        })
    }
}

impl fmt::Display for HeadConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadConfig::Mlp(m) if m.use_sentence_vectors => f.write_str("mlp+cls"),
            HeadConfig::Mlp(_) => f.write_str("mlp"),
            HeadConfig::Cosine(CosineHeadConfig {
                activation: Activation::Relu,
            }) => f.write_str("cosine-relu"),
            HeadConfig::Cosine(CosineHeadConfig {
                activation: Activation::Sigmoid,
            }) => f.write_str("cosine-sigmoid"),
        }
    }
}

/// Weights of the MLP head, stored flat as
/// `[W1 (in_dim x hidden, row-major) | b1 (hidden) | w2 (hidden) | b2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHeadParameters {
    dimension: usize,
    hidden: usize,
    use_sentence_vectors: bool,
    values: Vec<f64>,
}

impl MlpHeadParameters {
    pub fn parameter_count_for(in_dim: usize, hidden: usize) -> usize {
        in_dim * hidden + hidden + hidden + 1
    }

    pub fn zeros(dimension: usize, config: MlpHeadConfig) -> Result<Self> {
        if config.hidden_units == 0 {
            return Err(Error::Contract("MLP head needs at least one hidden unit".into()));
        }
        let in_dim = Self::in_dim_for(dimension, config.use_sentence_vectors);
        Ok(Self {
            dimension,
            hidden: config.hidden_units,
            use_sentence_vectors: config.use_sentence_vectors,
            values: vec![0.0; Self::parameter_count_for(in_dim, config.hidden_units)],
        })
    }

    /// Uniform fan-in scaled weights, zero biases.
    pub fn init(dimension: usize, config: MlpHeadConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(dimension, config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (in_dim, hidden) = (p.in_dim(), p.hidden);
        let b1 = 1.0 / (in_dim as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        for w in &mut p.values[..in_dim * hidden] {
            *w = rng.gen_range(-b1..b1);
        }
        let w2 = in_dim * hidden + hidden;
        for w in &mut p.values[w2..w2 + hidden] {
            *w = rng.gen_range(-b2..b2);
        }
        Ok(p)
    }

    pub fn from_values(dimension: usize, config: MlpHeadConfig, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(dimension, config)?;
        if values.len() != p.values.len() {
            return Err(Error::Contract(format!(
                "MLP head expects {} parameters, got {}",
                p.values.len(),
                values.len()
            )));
        }
        p.values = values;
        Ok(p)
    }

    fn in_dim_for(dimension: usize, use_sentence_vectors: bool) -> usize {
        if use_sentence_vectors {
            4 * dimension
        } else {
            2 * dimension
        }
    }

    pub fn in_dim(&self) -> usize {
        Self::in_dim_for(self.dimension, self.use_sentence_vectors)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn parameter_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn w1(&self) -> &[f64] {
        &self.values[..self.in_dim() * self.hidden]
    }

    fn b1(&self) -> &[f64] {
        let o = self.in_dim() * self.hidden;
        &self.values[o..o + self.hidden]
    }

    fn w2(&self) -> &[f64] {
        let o = self.in_dim() * self.hidden + self.hidden;
        &self.values[o..o + self.hidden]
    }

    fn b2(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Input layer: `(sentence1, sentence2, target1, target2)` or `(target1, target2)`.
    fn input(&self, emb: &PairEmbedding) -> Result<Vec<f64>> {
        let d = self.dimension;
        let check = |v: &[f64], what: &str| {
            if v.len() == d {
                Ok(())
            } else {
                Err(Error::Contract(format!(
                    "{what} has dimension {} but the MLP head expects {d}",
                    v.len()
                )))
            }
        };
        let mut x = Vec::with_capacity(self.in_dim());
        match (self.use_sentence_vectors, &emb.sentence1_vec, &emb.sentence2_vec) {
            (true, Some(s1), Some(s2)) => {
                check(s1, "sentence1 vector")?;
                check(s2, "sentence2 vector")?;
                x.extend_from_slice(s1);
                x.extend_from_slice(s2);
            }
            (false, None, None) => {}
            (true, _, _) => {
                return Err(Error::Contract(
                    "MLP head uses sentence vectors but the embedding has none".into(),
                ))
            }
            (false, _, _) => {
                return Err(Error::Contract(
                    "embedding carries sentence vectors the MLP head does not use".into(),
                ))
            }
        }
        check(&emb.target1, "target1")?;
        check(&emb.target2, "target2")?;
        x.extend_from_slice(&emb.target1);
        x.extend_from_slice(&emb.target2);
        Ok(x)
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let (w1, h) = (self.w1(), self.hidden);
        let mut pre = self.b1().to_vec();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, p) in pre.iter_mut().enumerate() {
                *p += xi * w1[i * h + j];
            }
        }
        pre
    }
}

/// `sigmoid(w2 . relu(W1^T x + b1) + b2)`.
pub fn mlp_forward(params: &MlpHeadParameters, emb: &PairEmbedding) -> Result<f64> {
    let x = params.input(emb)?;
    let pre = params.hidden_pre(&x);
    let logit: f64 = params.b2()
        + pre
            .iter()
            .zip(params.w2())
            .map(|(p, w)| p.max(0.0) * w)
            .sum::<f64>();
    Ok(sigmoid(logit))
}

/// Gradients of `d_score * mlp_forward(params, emb)` with respect to the
/// embedding and to the flat parameter vector.
pub fn mlp_backward(
    params: &MlpHeadParameters,
    emb: &PairEmbedding,
    d_score: f64,
) -> Result<(PairEmbedding, Vec<f64>)> {
    let x = params.input(emb)?;
    let pre = params.hidden_pre(&x);
    let h = params.hidden;
    let in_dim = params.in_dim();
    let w1 = params.w1();
    let w2 = params.w2();
    let logit: f64 = params.b2() + pre.iter().zip(w2).map(|(p, w)| p.max(0.0) * w).sum::<f64>();
    let s = sigmoid(logit);
    let d_logit = d_score * s * (1.0 - s);

    let mut grad = vec![0.0; params.values.len()];
    let d_pre: Vec<f64> = pre
        .iter()
        .zip(w2)
        .map(|(&p, &w)| if p > 0.0 { d_logit * w } else { 0.0 })
        .collect();
    let mut d_x = vec![0.0; in_dim];
    for i in 0..in_dim {
        let row = i * h;
        let mut acc = 0.0;
        for j in 0..h {
            grad[row + j] = x[i] * d_pre[j];
            acc += w1[row + j] * d_pre[j];
        }
        d_x[i] = acc;
    }
    let ob1 = in_dim * h;
    grad[ob1..ob1 + h].copy_from_slice(&d_pre);
    for j in 0..h {
        grad[ob1 + h + j] = d_logit * pre[j].max(0.0);
    }
    grad[ob1 + 2 * h] = d_logit;

    let d = params.dimension;
    let mut d_emb = emb.zeros_like();
    let mut rest = &d_x[..];
    if params.use_sentence_vectors {
        d_emb.sentence1_vec = Some(rest[..d].to_vec());
        d_emb.sentence2_vec = Some(rest[d..2 * d].to_vec());
        rest = &rest[2 * d..];
    }
    d_emb.target1 = rest[..d].to_vec();
    d_emb.target2 = rest[d..2 * d].to_vec();
    Ok((d_emb, grad))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine_parts(emb: &PairEmbedding) -> Result<(f64, f64, f64)> {
    let (t1, t2) = (&emb.target1, &emb.target2);
    if t1.len() != t2.len() {
        return Err(Error::Contract(format!(
            "target vectors differ in dimension: {} vs {}",
            t1.len(),
            t2.len()
        )));
    }
    let (n1, n2) = (norm(t1), norm(t2));
    if n1 < MIN_NORM || n2 < MIN_NORM {
        return Err(Error::DegenerateEmbedding {
            id: emb.pair_id.clone(),
            message: format!("target vector norms {n1:e} and {n2:e}; both must be at least {MIN_NORM:e}"),
        });
    }
    let dot: f64 = t1.iter().zip(t2).map(|(a, b)| a * b).sum();
    // Rounding can push parallel vectors a few ulps past +-1.
    Ok(((dot / (n1 * n2)).clamp(-1.0, 1.0), n1, n2))
}

/// Cosine similarity of the target vectors.
pub fn cosine_similarity(emb: &PairEmbedding) -> Result<f64> {
    cosine_parts(emb).map(|(c, _, _)| c)
}

/// Activated cosine similarity of the two target vectors.
pub fn cosine_forward(config: &CosineHeadConfig, emb: &PairEmbedding) -> Result<f64> {
    Ok(config.activation.apply(cosine_similarity(emb)?))
}

/// Gradient of `d_score * cosine_forward(config, emb)` with respect to the
/// embedding. There are no head parameters.
pub fn cosine_backward(config: &CosineHeadConfig, emb: &PairEmbedding, d_score: f64) -> Result<PairEmbedding> {
    let (c, n1, n2) = cosine_parts(emb)?;
    let dc = d_score * config.activation.derivative(c);
    let mut d_emb = emb.zeros_like();
    let (t1, t2) = (&emb.target1, &emb.target2);
    for k in 0..t1.len() {
        d_emb.target1[k] = dc * (t2[k] / (n1 * n2) - c * t1[k] / (n1 * n1));
        d_emb.target2[k] = dc * (t1[k] / (n1 * n2) - c * t2[k] / (n2 * n2));
    }
    Ok(d_emb)
}

/// `score > threshold`.
pub fn decide(score: f64, threshold: f64) -> bool {
    score > threshold
}

/// [`decide`] with the boundary case selectable: `strict = false` predicts
/// True at `score == threshold`.
pub fn decide_with(score: f64, threshold: f64, strict: bool) -> bool {
    if strict {
        score > threshold
    } else {
        score >= threshold
    }
}

/// A head ready to score embeddings.
#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Mlp(MlpHeadParameters),
    Cosine(CosineHeadConfig),
}

impl Head {
    /// Builds a head for encoder dimension `dimension`; MLP weights are seeded.
    pub fn new(config: HeadConfig, dimension: usize, seed: u64) -> Result<Self> {
        Ok(match config {
            HeadConfig::Mlp(m) => Head::Mlp(MlpHeadParameters::init(dimension, m, seed)?),
            HeadConfig::Cosine(c) => Head::Cosine(c),
        })
    }

    pub fn from_parameters(config: HeadConfig, dimension: usize, values: Vec<f64>) -> Result<Self> {
        match config {
            HeadConfig::Mlp(m) => Ok(Head::Mlp(MlpHeadParameters::from_values(dimension, m, values)?)),
            HeadConfig::Cosine(c) if values.is_empty() => Ok(Head::Cosine(c)),
            HeadConfig::Cosine(_) => Err(Error::Contract(format!(
                "cosine head has no parameters but {} were supplied",
                values.len()
            ))),
        }
    }

    pub fn config(&self) -> HeadConfig {
        match self {
            Head::Mlp(p) => HeadConfig::Mlp(MlpHeadConfig {
                hidden_units: p.hidden,
                use_sentence_vectors: p.use_sentence_vectors,
            }),
            Head::Cosine(c) => HeadConfig::Cosine(*c),
        }
    }

    pub fn parameters(&self) -> &[f64] {
        match self {
            Head::Mlp(p) => p.values(),
            Head::Cosine(_) => &[],
        }
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        match self {
            Head::Mlp(p) => p.values_mut(),
            Head::Cosine(_) => &mut [],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().len()
    }

    pub fn forward(&self, emb: &PairEmbedding) -> Result<f64> {
        match self {
            Head::Mlp(p) => mlp_forward(p, emb),
            Head::Cosine(c) => cosine_forward(c, emb),
        }
    }

    pub fn backward(&self, emb: &PairEmbedding, d_score: f64) -> Result<(PairEmbedding, Vec<f64>)> {
        match self {
            Head::Mlp(p) => mlp_backward(p, emb, d_score),
            Head::Cosine(c) => Ok((cosine_backward(c, emb, d_score)?, Vec::new())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const RELU: CosineHeadConfig = CosineHeadConfig {
        activation: Activation::Relu,
    };
    const SIGMOID: CosineHeadConfig = CosineHeadConfig {
        activation: Activation::Sigmoid,
    };

    fn emb(t1: &[f64], t2: &[f64]) -> PairEmbedding {
        PairEmbedding::targets("p", t1.to_vec(), t2.to_vec())
    }

    #[test]
    fn zero_mlp_scores_one_half() {
        let p = MlpHeadParameters::zeros(3, MlpHeadConfig::default()).unwrap();
        let s = mlp_forward(&p, &emb(&[1.0, 2.0, 3.0], &[-1.0, 0.5, 9.0])).unwrap();
        assert_eq!(s, 0.5);
    }

    #[test]
    fn mlp_parameter_count_with_sentence_vectors() {
        let config = MlpHeadConfig {
            hidden_units: 100,
            use_sentence_vectors: true,
        };
        let p = MlpHeadParameters::zeros(768, config).unwrap();
        assert_eq!(p.in_dim(), 3072);
        assert_eq!(p.parameter_count(), 307_401);
        assert_eq!(MlpHeadParameters::parameter_count_for(1536, 100), 153_801);
    }

    #[test]
    fn hand_set_mlp_logit_of_one() {
        // d = 1, hidden = 1: x = (0.5, 0.25), W1 = (2, 0), b1 = 0 -> h = 1,
        // w2 = 3, b2 = -2 -> logit = 1 -> sigmoid(1).
        let config = MlpHeadConfig {
            hidden_units: 1,
            use_sentence_vectors: false,
        };
        let p = MlpHeadParameters::from_values(1, config, vec![2.0, 0.0, 0.0, 3.0, -2.0]).unwrap();
        let s = mlp_forward(&p, &emb(&[0.5], &[0.25])).unwrap();
        assert_abs_diff_eq!(s, 1.0 / (1.0 + (-1.0f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.7311, epsilon = 5e-5);
    }

    #[test]
    fn mlp_rejects_mismatched_embeddings() {
        let p = MlpHeadParameters::zeros(2, MlpHeadConfig::default()).unwrap();
        assert!(matches!(mlp_forward(&p, &emb(&[1.0], &[1.0])), Err(Error::Contract(_))));
        let cls = MlpHeadParameters::zeros(
            2,
            MlpHeadConfig {
                hidden_units: 4,
                use_sentence_vectors: true,
            },
        )
        .unwrap();
        assert!(mlp_forward(&cls, &emb(&[1.0, 0.0], &[1.0, 0.0])).is_err());
    }

    #[test]
    fn cosine_reference_values() {
        let v = [0.3, -1.2, 2.0];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_abs_diff_eq!(cosine_forward(&RELU, &emb(&v, &v)).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cosine_forward(&SIGMOID, &emb(&v, &v)).unwrap(), 0.7311, epsilon = 5e-5);
        assert_eq!(cosine_forward(&RELU, &emb(&v, &neg)).unwrap(), 0.0);
        assert_abs_diff_eq!(cosine_forward(&SIGMOID, &emb(&v, &neg)).unwrap(), 0.2689, epsilon = 5e-5);
        let (x, y) = ([1.0, 0.0], [0.0, 1.0]);
        assert_eq!(cosine_forward(&RELU, &emb(&x, &y)).unwrap(), 0.0);
        assert_eq!(cosine_forward(&SIGMOID, &emb(&x, &y)).unwrap(), 0.5);
    }

    #[test]
    fn zero_norm_target_is_an_error() {
        match cosine_forward(&RELU, &emb(&[0.0, 0.0], &[1.0, 0.0])) {
            Err(Error::DegenerateEmbedding { id, .. }) => assert_eq!(id, "p"),
            other => panic!("{other:?}"),
        }
        assert!(cosine_forward(&SIGMOID, &emb(&[1.0, 0.0], &[1e-13, 0.0])).is_err());
    }

    #[test]
    fn parallel_vectors_stay_in_range() {
        let v = vec![0.1, 0.7, -0.3, 1e-3, 0.333];
        let w: Vec<f64> = v.iter().map(|x| x * 3.7).collect();
        let c = cosine_similarity(&PairEmbedding::targets("p", v, w)).unwrap();
        assert!((-1.0..=1.0).contains(&c));
        assert!((c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decide_is_strict() {
        assert!(decide(0.51, 0.5));
        assert!(!decide(0.5, 0.5));
        assert!(decide(0.52, 0.519));
        assert!(decide_with(0.5, 0.5, false));
        assert!(!decide_with(0.5, 0.5, true));
    }

    #[test]
    fn head_names_round_trip() {
        for name in ["mlp", "mlp+cls", "cosine-relu", "cosine-sigmoid"] {
            let h: HeadConfig = name.parse().unwrap();
            assert_eq!(h.to_string(), name);
        }
        assert!("cosine".parse::<HeadConfig>().is_err());
        let cos = Head::new("cosine-relu".parse().unwrap(), 8, 0).unwrap();
        assert_eq!(cos.parameter_count(), 0);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn mlp_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let config = MlpHeadConfig {
            hidden_units: 6,
            use_sentence_vectors: true,
        };
        let p = MlpHeadParameters::init(3, config, 1).unwrap();
        let mut r = || (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let e = PairEmbedding {
            pair_id: "g".into(),
            target1: r(),
            target2: r(),
            sentence1_vec: Some(r()),
            sentence2_vec: Some(r()),
        };
        let (d_emb, grad) = mlp_backward(&p, &e, 1.0).unwrap();
        let h = 1e-6;
        for k in 0..grad.len() {
            let mut plus = p.clone();
            plus.values_mut()[k] += h;
            let mut minus = p.clone();
            minus.values_mut()[k] -= h;
            let num = (mlp_forward(&plus, &e).unwrap() - mlp_forward(&minus, &e).unwrap()) / (2.0 * h);
            assert!((num - grad[k]).abs() <= 1e-4 * num.abs().max(grad[k].abs()) + 1e-9);
        }
        for c in 0..3 {
            let mut plus = e.clone();
            plus.target2[c] += h;
            let mut minus = e.clone();
            minus.target2[c] -= h;
            let num = (mlp_forward(&p, &plus).unwrap() - mlp_forward(&p, &minus).unwrap()) / (2.0 * h);
            assert!((num - d_emb.target2[c]).abs() < 1e-8);
        }
    }

    fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, dim).prop_filter("non-zero", |v| norm(v) > 1e-3)
    }

    proptest! {
        #[test]
        fn cosine_scale_invariant_and_symmetric(
            (t1, t2) in (1usize..8).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d))),
            alpha in 0.01f64..100.0, beta in 0.01f64..100.0,
        ) {
            for config in [RELU, SIGMOID] {
                let base = cosine_forward(&config, &emb(&t1, &t2)).unwrap();
                let a1: Vec<f64> = t1.iter().map(|x| x * alpha).collect();
                let b2: Vec<f64> = t2.iter().map(|x| x * beta).collect();
                let scaled = cosine_forward(&config, &emb(&a1, &b2)).unwrap();
                prop_assert!((base - scaled).abs() < 1e-12);
                let swapped = cosine_forward(&config, &emb(&t2, &t1)).unwrap();
                prop_assert!((base - swapped).abs() < 1e-15);
                prop_assert!((0.0..=1.0).contains(&base));
                if config == SIGMOID {
                    prop_assert!((0.2689 - 1e-4..=0.7311 + 1e-4).contains(&base));
                }
            }
        }
    }
}
