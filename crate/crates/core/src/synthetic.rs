//! Seeded synthetic WiC corpora.
//!
//! Every lemma has two senses, each tied to one of `topics` topic
//! vocabularies. A sentence places the lemma among `context_words` words drawn
//! from its sense's topic, so the meaning is recoverable from context alone.
//! With `shared_first_sentence`, consecutive pairs of the same lemma reuse one
//! first sentence, as in MCL-WiC.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{CharSpan, Corpus, CorpusSource, WicPair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub pairs: usize,
    pub lemmas: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub context_words: usize,
    /// Probability of flipping each gold label.
    pub label_noise: f64,
    pub shared_first_sentence: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            pairs: 200,
            lemmas: 80,
            topics: 6,
            words_per_topic: 4,
            context_words: 10,
            label_noise: 0.0,
            shared_first_sentence: false,
            seed: 0,
        }
    }
}

fn sentence(rng: &mut ChaCha8Rng, lemma: &str, topic: usize, config: &SyntheticConfig) -> (String, CharSpan) {
    let mut words: Vec<String> = (0..config.context_words)
        .map(|_| format!("t{topic}w{}", rng.gen_range(0..config.words_per_topic)))
        .collect();
    let at = rng.gen_range(0..=words.len());
    words.insert(at, lemma.to_string());
    let start: usize = words[..at].iter().map(|w| w.chars().count() + 1).sum();
    let span = CharSpan::new(start, start + lemma.chars().count());
    (words.join(" "), span)
}

pub fn generate(config: &SyntheticConfig) -> Result<Corpus> {
    if config.lemmas == 0 || config.topics < 2 || config.words_per_topic == 0 {
        return Err(Error::Contract(
            "synthetic corpus needs lemmas >= 1, topics >= 2 and words_per_topic >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&config.label_noise) {
        return Err(Error::Contract("label_noise must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let topics: Vec<usize> = (0..config.topics).collect();
    let senses: Vec<[usize; 2]> = (0..config.lemmas)
        .map(|_| {
            let pick: Vec<usize> = topics.choose_multiple(&mut rng, 2).copied().collect();
            [pick[0], pick[1]]
        })
        .collect();

    let mut pairs = Vec::with_capacity(config.pairs);
    let mut previous: Option<(usize, usize, String, CharSpan)> = None;
    for i in 0..config.pairs {
        let k = if config.shared_first_sentence { i / 2 } else { i } % config.lemmas;
        let lemma = format!("lemma{k}");
        let reuse = config.shared_first_sentence && i % 2 == 1;
        let (sense1, s1, span1) = match (&previous, reuse) {
            (Some((pk, ps, s, sp)), true) if *pk == k => (*ps, s.clone(), *sp),
            _ => {
                let sense = rng.gen_range(0..2);
                let (s, sp) = sentence(&mut rng, &lemma, senses[k][sense], config);
                (sense, s, sp)
            }
        };
        let same = rng.gen_bool(0.5);
        let sense2 = if same { sense1 } else { 1 - sense1 };
        let (s2, span2) = sentence(&mut rng, &lemma, senses[k][sense2], config);
        let label = same != (rng.gen::<f64>() < config.label_noise);
        previous = Some((k, sense1, s1.clone(), span1));
        pairs.push(WicPair {
            id: format!("syn.{i}"),
            lemma,
            pos: "NOUN".into(),
            sentence1: s1,
            sentence2: s2,
            span1,
            span2,
            label: Some(label),
        });
    }
    Corpus::new(pairs, CorpusSource::Synthetic)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let config = SyntheticConfig::default();
        let a = generate(&config).unwrap();
        assert_eq!(a, generate(&config).unwrap());
        assert_eq!(a.len(), 200);
        for p in &a {
            assert_eq!(p.target1(), Some(p.lemma.as_str()));
            assert_eq!(p.target2(), Some(p.lemma.as_str()));
        }
        let positives = a.iter().filter(|p| p.label == Some(true)).count();
        assert!((70..130).contains(&positives), "{positives}");
    }

    #[test]
    fn shared_first_sentences() {
        let c = generate(&SyntheticConfig {
            pairs: 20,
            shared_first_sentence: true,
            ..SyntheticConfig::default()
        })
        .unwrap();
        for w in c.pairs().chunks(2) {
            assert_eq!(w[0].sentence1, w[1].sentence1);
            assert_eq!(w[0].lemma, w[1].lemma);
        }
    }

    #[test]
    fn noise_flips_labels() {
        let clean = generate(&SyntheticConfig::default()).unwrap();
        let noisy = generate(&SyntheticConfig {
            label_noise: 1.0,
            ..SyntheticConfig::default()
        })
        .unwrap();
        // Same seed, same draws order: every label flips.
        for (a, b) in clean.iter().zip(&noisy) {
            assert_eq!(a.sentence1, b.sentence1);
            assert_ne!(a.label, b.label);
        }
    }
}
