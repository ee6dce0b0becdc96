//! Checkpoint directories.
//!
//! ```text
//! <dir>/config.json        encoder spec, head config, train config
//! <dir>/calibration.json   threshold summary (optional)
//! <dir>/history.json       training history (optional)
//! <dir>/manifest.json      split ids used for training (optional)
//! <dir>/parameters.bin     "WICPARAM", u32 version, u64 encoder count,
//!                          u64 head count, then little-endian f64 values
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainHistory};
use crate::calibration::CalibrationSummary;
use crate::datasets::{write_json, SplitManifest, WicPair};
use crate::encoding::{encode_pair, encoder_from_spec, ContextualEncoder, EncoderSpec};
use crate::error::{Error, Result};
use crate::heads::{decide, Head, HeadConfig};

const MAGIC: &[u8; 8] = b"WICPARAM";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointConfig {
    pub encoder: EncoderSpec,
    pub head: HeadConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: EncoderSpec,
    pub encoder_parameters: Vec<f64>,
    pub head: HeadConfig,
    /// Empty for the cosine head.
    pub head_parameters: Vec<f64>,
    pub train_config: TrainConfig,
    pub calibration: Option<CalibrationSummary>,
    pub history: Option<TrainHistory>,
    pub manifest: Option<SplitManifest>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

fn read_optional<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>> {
    if path.exists() {
        read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

fn encode_parameters(encoder: &[f64], head: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (encoder.len() + head.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(encoder.len() as u64).to_le_bytes());
    out.extend_from_slice(&(head.len() as u64).to_le_bytes());
    for v in encoder.iter().chain(head) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_parameters(bytes: &[u8]) -> Result<(Vec<f64>, Vec<f64>)> {
    let bad = |m: &str| Error::Checkpoint(format!("parameters.bin: {m}"));
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(bad("missing header"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n_enc = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let n_head = u64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes")) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * (n_enc + n_head) {
        return Err(bad(&format!(
            "expected {} values, found {} bytes",
            n_enc + n_head,
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let (enc, head) = values.split_at(n_enc);
    Ok((enc.to_vec(), head.to_vec()))
}

impl Checkpoint {
    pub fn config(&self) -> CheckpointConfig {
        CheckpointConfig {
            encoder: self.encoder.clone(),
            head: self.head,
            train: self.train_config,
        }
    }

    /// Decision threshold: the calibrated one if present, else 0.5.
    pub fn threshold(&self) -> f64 {
        self.calibration.as_ref().map_or(0.5, |c| c.threshold)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("config.json"), &self.config())?;
        if let Some(c) = &self.calibration {
            write_json(&dir.join("calibration.json"), c)?;
        }
        if let Some(h) = &self.history {
            write_json(&dir.join("history.json"), h)?;
        }
        if let Some(m) = &self.manifest {
            m.write(&dir.join("manifest.json"))?;
        }
        let path = dir.join("parameters.bin");
        fs::write(&path, encode_parameters(&self.encoder_parameters, &self.head_parameters))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config: CheckpointConfig = read_json(&dir.join("config.json"))?;
        let path = dir.join("parameters.bin");
        let bytes = fs::read(&path).map_err(|e| Error::io(path, e))?;
        let (encoder_parameters, head_parameters) = decode_parameters(&bytes)?;
        Ok(Self {
            encoder: config.encoder,
            encoder_parameters,
            head: config.head,
            head_parameters,
            train_config: config.train,
            calibration: read_optional(&dir.join("calibration.json"))?,
            history: read_optional(&dir.join("history.json"))?,
            manifest: read_optional(&dir.join("manifest.json"))?,
        })
    }

    pub fn model(&self) -> Result<Model> {
        self.model_with_max_tokens(self.train_config.max_tokens)
    }

    pub fn model_with_max_tokens(&self, max_tokens: usize) -> Result<Model> {
        let mut encoder = encoder_from_spec(&self.encoder)?;
        if encoder.parameters().len() != self.encoder_parameters.len() {
            return Err(Error::Checkpoint(format!(
                "encoder `{}` has {} parameters but the checkpoint stores {}",
                self.encoder.name(),
                encoder.parameters().len(),
                self.encoder_parameters.len()
            )));
        }
        encoder.parameters_mut().copy_from_slice(&self.encoder_parameters);
        let head = Head::from_parameters(self.head, encoder.dimension(), self.head_parameters.clone())?;
        Ok(Model {
            encoder,
            head,
            max_tokens,
            threshold: self.threshold(),
        })
    }
}

/// Inference-only view of a checkpoint.
pub struct Model {
    encoder: Box<dyn ContextualEncoder>,
    head: Head,
    max_tokens: usize,
    threshold: f64,
}

impl Model {
    pub fn new(encoder: Box<dyn ContextualEncoder>, head: Head, max_tokens: usize, threshold: f64) -> Self {
        Self {
            encoder,
            head,
            max_tokens,
            threshold,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn score(&self, pair: &WicPair) -> Result<f64> {
        let emb = encode_pair(
            self.encoder.as_ref(),
            pair,
            self.max_tokens,
            self.head.config().uses_sentence_vectors(),
        )?;
        self.head.forward(&emb)
    }

    pub fn predict(&self, pair: &WicPair) -> Result<bool> {
        Ok(decide(self.score(pair)?, self.threshold))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_blob_round_trips_bits() {
        let enc = vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300, std::f64::consts::PI];
        let head = vec![f64::EPSILON, -7.25];
        let bytes = encode_parameters(&enc, &head);
        let (e2, h2) = decode_parameters(&bytes).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&e2), bits(&enc));
        assert_eq!(bits(&h2), bits(&head));
        assert!(decode_parameters(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_parameters(b"garbage").is_err());
    }
}
