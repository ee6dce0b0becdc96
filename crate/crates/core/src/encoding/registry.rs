use serde::{Deserialize, Serialize};

use super::{ContextualEncoder, ToyEncoder};
use crate::error::{Error, Result};

/// Environment variable naming the pretrained-model cache directory.
pub const MODEL_CACHE_ENV: &str = "WIC_MODEL_CACHE";

const PRETRAINED: [&str; 4] = [
    "bert-base-cased",
    "bert-large-cased",
    "xlm-roberta-base",
    "xlm-roberta-large",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyOptions {
    pub dimension: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_feature_dim() -> usize {
    ToyEncoder::DEFAULT_FEATURE_DIM
}

impl Default for ToyOptions {
    fn default() -> Self {
        Self {
            dimension: 16,
            feature_dim: ToyEncoder::DEFAULT_FEATURE_DIM,
            seed: 0,
        }
    }
}

/// Architecture description stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum EncoderSpec {
    Toy(ToyOptions),
    Pretrained { model: String },
}

impl EncoderSpec {
    pub fn name(&self) -> &str {
        match self {
            EncoderSpec::Toy(_) => "toy",
            EncoderSpec::Pretrained { model } => model,
        }
    }
}

/// Every encoder name the registry recognises.
pub fn known_encoders() -> Vec<&'static str> {
    PRETRAINED.iter().copied().chain(["toy"]).collect()
}

/// Looks up `name` in the registry. `toy` options are ignored for other names.
pub fn build_encoder(name: &str, toy: ToyOptions) -> Result<Box<dyn ContextualEncoder>> {
    let spec = match name {
        "toy" => EncoderSpec::Toy(toy),
        n if PRETRAINED.contains(&n) => EncoderSpec::Pretrained {
            model: n.to_string(),
        },
        other => {
            return Err(Error::UnknownEncoder {
                name: other.to_string(),
                known: known_encoders().into_iter().map(String::from).collect(),
            })
        }
    };
    encoder_from_spec(&spec)
}

/// Rebuilds an encoder (with freshly initialised parameters) from its spec.
pub fn encoder_from_spec(spec: &EncoderSpec) -> Result<Box<dyn ContextualEncoder>> {
    match spec {
        EncoderSpec::Toy(options) => Ok(Box::new(ToyEncoder::with_options(*options)?)),
        EncoderSpec::Pretrained { model } => {
            let cache = std::env::var(MODEL_CACHE_ENV).unwrap_or_else(|_| "<unset>".into());
            Err(Error::EncoderUnavailable {
                name: model.clone(),
                reason: format!(
                    "this build has no transformer runtime; pretrained weights \
                     ({MODEL_CACHE_ENV}={cache}) need an external adapter implementing ContextualEncoder"
                ),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_name_lists_known_encoders() {
        let err = build_encoder("gpt-9", ToyOptions::default()).err().unwrap();
        let msg = err.to_string();
        for name in known_encoders() {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn toy_builds_and_pretrained_is_reported() {
        let enc = build_encoder("toy", ToyOptions::default()).unwrap();
        assert_eq!(enc.dimension(), 16);
        assert_eq!(enc.spec(), EncoderSpec::Toy(ToyOptions::default()));
        assert!(matches!(
            build_encoder("bert-large-cased", ToyOptions::default()),
            Err(Error::EncoderUnavailable { .. })
        ));
    }

    #[test]
    fn spec_json_shape() {
        let json = serde_json::to_string(&EncoderSpec::Toy(ToyOptions::default())).unwrap();
        assert_eq!(json, r#"{"name":"toy","dimension":16,"feature_dim":32,"seed":0}"#);
        let back: EncoderSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.name(), "toy");
    }
}
