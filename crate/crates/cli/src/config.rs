//! Experiment configuration files (TOML) and the corpora they describe.
//!
//! Relative paths inside a config file resolve against the file's directory.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wic_core::datasets::{load_mclwic, load_superglue_wic, merge, split_by_lemma, SplitManifest};
use wic_core::encoding::{build_encoder, known_encoders, ContextualEncoder, ToyOptions};
use wic_core::synthetic::{generate, SyntheticConfig};
use wic_core::{Corpus, HeadConfig, SplitConfig, TrainConfig};

/// Usage or configuration problem (exit code 1).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

macro_rules! config_bail {
    ($($arg:tt)+) => {
        return Err(ConfigError(format!($($arg)+)).into())
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSection {
    pub name: String,
    /// Toy encoder only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl EncoderSection {
    fn toy_options(&self) -> ToyOptions {
        let defaults = ToyOptions::default();
        ToyOptions {
            dimension: self.dimension.unwrap_or(defaults.dimension),
            feature_dim: self.feature_dim.unwrap_or(defaults.feature_dim),
            seed: self.seed.unwrap_or(defaults.seed),
        }
    }

    pub fn build(&self) -> anyhow::Result<Box<dyn ContextualEncoder>> {
        Ok(build_encoder(&self.name, self.toy_options())?)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if !known_encoders().contains(&self.name.as_str()) {
            // Let the registry produce its error listing the known names.
            self.build()?;
        }
        let toy_fields = self.dimension.is_some() || self.feature_dim.is_some() || self.seed.is_some();
        if self.name != "toy" && toy_fields {
            config_bail!(
                "encoder `{}` does not take dimension, feature_dim or seed; those are toy-encoder options",
                self.name
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MclwicFiles {
    pub data: PathBuf,
    pub gold: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mclwic_train: Option<MclwicFiles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mclwic_dev: Option<MclwicFiles>,
    /// SuperGLUE WiC JSON-lines files merged into the pool.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub superglue: Vec<PathBuf>,
    /// Generate the corpus instead of reading files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    /// Train on MCL-WiC train and validate on MCL-WiC dev, with no merging
    /// or re-splitting.
    #[serde(default)]
    pub no_extra_data: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub output: PathBuf,
    pub encoder: EncoderSection,
    pub head: HeadConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub data: DataSection,
    #[serde(default)]
    pub split: SplitConfig,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub no_extra_data: bool,
    pub encoder: Option<String>,
    pub head: Option<HeadConfig>,
    pub output: Option<PathBuf>,
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid experiment config: {e}")).into())
    }

    /// Reads, resolves paths, applies overrides and validates.
    pub fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output);
        for files in [&mut self.data.mclwic_train, &mut self.data.mclwic_dev].into_iter().flatten() {
            resolve(base, &mut files.data);
            resolve(base, &mut files.gold);
        }
        for file in &mut self.data.superglue {
            resolve(base, file);
        }
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.train.seed = seed;
            self.split.seed = seed;
            if self.encoder.name == "toy" {
                self.encoder.seed = Some(seed);
            }
        }
        if overrides.no_extra_data {
            self.data.no_extra_data = true;
        }
        if let Some(name) = &overrides.encoder {
            if *name != self.encoder.name {
                self.encoder = EncoderSection {
                    name: name.clone(),
                    dimension: None,
                    feature_dim: None,
                    seed: None,
                };
            }
        }
        if let Some(head) = overrides.head {
            self.head = head;
        }
        if let Some(output) = &overrides.output {
            self.output = output.clone();
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.encoder.validate()?;
        self.train.validate()?;
        self.split.validate()?;
        let d = &self.data;
        match (&d.synthetic, &d.mclwic_train) {
            (Some(_), Some(_)) => config_bail!("[data] sets both `synthetic` and `mclwic_train`; choose one"),
            (None, None) => config_bail!("[data] needs `mclwic_train` or `synthetic`"),
            _ => {}
        }
        if d.no_extra_data && (d.mclwic_train.is_none() || d.mclwic_dev.is_none()) {
            config_bail!("no_extra_data needs both `mclwic_train` and `mclwic_dev` in [data]");
        }
        let mut paths: Vec<&Path> = Vec::new();
        for files in [&d.mclwic_train, &d.mclwic_dev].into_iter().flatten() {
            paths.extend([files.data.as_path(), files.gold.as_path()]);
        }
        if !d.no_extra_data {
            paths.extend(d.superglue.iter().map(PathBuf::as_path));
        }
        if let Some(missing) = paths.iter().find(|p| !p.exists()) {
            config_bail!("data file {} does not exist", missing.display());
        }
        Ok(())
    }

    /// Loads the data and builds the train/validation split with its manifest.
    pub fn prepare(&self) -> anyhow::Result<PreparedData> {
        let d = &self.data;
        let load = |f: &MclwicFiles| load_mclwic(&f.data, Some(&f.gold));
        if d.no_extra_data {
            let train = load(d.mclwic_train.as_ref().expect("validated"))?;
            let validation = load(d.mclwic_dev.as_ref().expect("validated"))?;
            let manifest = SplitManifest::from_split(self.split.seed, None, &train, &validation);
            return Ok(PreparedData {
                pool_size: train.len() + validation.len(),
                train,
                validation,
                manifest,
            });
        }
        let mut parts = Vec::new();
        if let Some(s) = &d.synthetic {
            parts.push(generate(s)?);
        }
        for files in [&d.mclwic_train, &d.mclwic_dev].into_iter().flatten() {
            parts.push(load(files)?);
        }
        for file in &d.superglue {
            parts.push(load_superglue_wic(file)?);
        }
        let pool: Corpus = if parts.len() == 1 { parts.pop().expect("one part") } else { merge(parts)? };
        let (train, validation) = split_by_lemma(&pool, &self.split)?;
        let manifest = SplitManifest::from_split(self.split.seed, Some(self.split.train_fraction), &train, &validation);
        Ok(PreparedData {
            pool_size: pool.len(),
            train,
            validation,
            manifest,
        })
    }
}

pub struct PreparedData {
    pub pool_size: usize,
    pub train: Corpus,
    pub validation: Corpus,
    pub manifest: SplitManifest,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
output = "runs/x"

[encoder]
name = "toy"
dimension = 8

[head]
kind = "cosine"
activation = "relu"

[data.synthetic]
pairs = 40
"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.head.to_string(), "cosine-relu");
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.data.synthetic.unwrap().pairs, 40);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys() {
        let typo = MINIMAL.replace("[head]", "[head]\nactivaton = \"relu\"");
        assert!(ExperimentConfig::parse(&typo).is_err());
        let typo = format!("{MINIMAL}\n[train]\nlearning_rat = 0.1\n");
        let err = ExperimentConfig::parse(&typo).unwrap_err().to_string();
        assert!(err.contains("learning_rat"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.apply(&Overrides {
            seed: Some(7),
            head: Some("mlp+cls".parse().unwrap()),
            encoder: Some("bert-base-cased".into()),
            ..Overrides::default()
        });
        assert_eq!((c.train.seed, c.split.seed), (7, 7));
        assert_eq!(c.head.to_string(), "mlp+cls");
        assert_eq!(c.encoder.dimension, None);
    }

    #[test]
    fn unknown_encoder_lists_registry() {
        let c = ExperimentConfig::parse(&MINIMAL.replace("\"toy\"", "\"roberta-huge\"").replace("dimension = 8\n", ""))
            .unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("bert-large-cased") && msg.contains("toy"), "{msg}");
    }

    #[test]
    fn resolves_relative_paths_against_config_dir() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.data.superglue = vec!["WiC/train.jsonl".into(), "/abs/val.jsonl".into()];
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.output, Path::new("/cfg/runs/x"));
        assert_eq!(c.data.superglue[0], Path::new("/cfg/WiC/train.jsonl"));
        assert_eq!(c.data.superglue[1], Path::new("/abs/val.jsonl"));
    }

    #[test]
    fn checked_in_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut count = 0;
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                let c = ExperimentConfig::parse(&std::fs::read_to_string(&path).unwrap())
                    .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                c.encoder.validate().unwrap();
                c.train.validate().unwrap();
                count += 1;
            }
        }
        assert_eq!(count, 26);
        let toy = ExperimentConfig::load(&dir.join("toy.cosine-relu.synthetic.toml"), &Overrides::default()).unwrap();
        assert_eq!(toy.data.synthetic.unwrap().pairs, 500);
    }
}
