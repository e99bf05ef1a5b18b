//! A seeded stand-in for a trained language model.
//!
//! Conditionals are a pure function of `(seed, prefix)`: the prefix is hashed
//! with the seed, the hash drives a splitmix64 stream of Gumbel scores, and
//! the scores are turned into probabilities with a softmax whose inverse
//! temperature is `peakedness`. Large `peakedness` concentrates the joint on
//! few sequences; infinite `peakedness` makes every conditional one-hot.

use super::{SequenceModel, TokenId, Vocabulary};
use crate::codebook::{Categorical, Rational};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SyntheticLm {
    vocab: Vocabulary,
    max_length: usize,
    seed: u64,
    peakedness: f64,
}

/// `vocab_size - 1` word symbols `w0, w1, ...` followed by `</s>` as EOS.
pub fn make_synthetic_lm(seed: u64, vocab_size: usize, max_length: usize, peakedness: f64) -> Result<SyntheticLm> {
    if vocab_size < 2 {
        return Err(Error::param("synthetic LM needs at least two symbols"));
    }
    let mut symbols: Vec<String> = (0..vocab_size - 1).map(|i| format!("w{i}")).collect();
    symbols.push("</s>".into());
    let vocab = Vocabulary::new(symbols, Some(vocab_size - 1))?;
    SyntheticLm::new(vocab, max_length, seed, peakedness)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SyntheticLm {
    pub fn new(vocab: Vocabulary, max_length: usize, seed: u64, peakedness: f64) -> Result<Self> {
        if vocab.len() < 2 {
            return Err(Error::param("synthetic LM needs at least two symbols"));
        }
        if max_length == 0 {
            return Err(Error::model("max_length must be positive"));
        }
        if !(peakedness >= 0.0) {
            return Err(Error::param(format!("peakedness must be nonnegative, got {peakedness}")));
        }
        Ok(SyntheticLm {
            vocab,
            max_length,
            seed,
            peakedness,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn peakedness(&self) -> f64 {
        self.peakedness
    }

    fn scores(&self, prefix: &[TokenId]) -> Vec<f64> {
        let mut state = self.seed ^ 0x5851_F42D_4C95_7F2D;
        splitmix64(&mut state);
        state ^= prefix.len() as u64;
        for &t in prefix {
            state = splitmix64(&mut state) ^ (t as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
        }
        (0..self.vocab.len())
            .map(|_| {
                // uniform in (0, 1), then standard Gumbel
                let u = ((splitmix64(&mut state) >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
                -(-u.ln()).ln()
            })
            .collect()
    }
}

impl SequenceModel for SyntheticLm {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn max_length(&self) -> usize {
        self.max_length
    }

    fn conditional(&self, prefix: &[TokenId]) -> Result<Categorical<f64>> {
        let scores = self.scores(prefix);
        let best = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("vocabulary is non-empty");
        if self.peakedness.is_infinite() {
            let mut one_hot = vec![0.0; scores.len()];
            one_hot[best] = 1.0;
            return Categorical::new(one_hot);
        }
        let top = scores[best];
        let weights = scores.iter().map(|s| ((s - top) * self.peakedness).exp()).collect();
        Categorical::from_weights(weights)
    }

    fn conditional_exact(&self, prefix: &[TokenId]) -> Result<Categorical<Rational>> {
        let fast = self.conditional(prefix)?;
        let weights = fast
            .probs()
            .iter()
            .map(|&p| Rational::from_float(p).expect("finite probability"))
            .collect();
        Categorical::from_weights(weights)
    }
}
