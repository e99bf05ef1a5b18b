//! Sequence models over an ordered vocabulary.
//!
//! A [`SequenceModel`] hands out the conditional distribution of the next
//! token given a prefix. A sequence is complete once it ends in EOS or reaches
//! the model's maximum length; models without an EOS symbol therefore only
//! produce sequences of exactly the maximum length.

mod file;
mod markov;
mod modifiers;
mod synthetic;
mod tabular;

use num::{One, Zero};

use crate::codebook::{Categorical, Prob, Rational};
use crate::error::{Error, Result};

pub use file::{load_model, parse_model, MarkovRow, ModelFile, ModelKind, TableEntry};
pub use markov::{make_markov_model, MarkovModel};
pub use modifiers::{apply_nucleus, apply_temperature, apply_top_k, Modifier, ModifierChain};
pub use synthetic::{make_synthetic_lm, SyntheticLm};
pub use tabular::{make_tabular_model, TabularModel};

pub type TokenId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    eos: Option<TokenId>,
}

impl Vocabulary {
    pub fn new(symbols: Vec<String>, eos: Option<TokenId>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::model("empty vocabulary"));
        }
        if let Some(e) = eos {
            if e >= symbols.len() {
                return Err(Error::model(format!("eos index {e} out of range")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for s in &symbols {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(Error::model(format!("symbol {s:?} is empty or contains whitespace")));
            }
            if !seen.insert(s.as_str()) {
                return Err(Error::model(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Vocabulary { symbols, eos })
    }

    /// Convenience for tests and examples: `"A B C"`.
    pub fn from_words(words: &str, eos: Option<TokenId>) -> Result<Self> {
        Self::new(words.split_whitespace().map(str::to_owned).collect(), eos)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn eos(&self) -> Option<TokenId> {
        self.eos
    }

    pub fn symbol(&self, id: TokenId) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, symbol: &str) -> Option<TokenId> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Resolves a whitespace-separated token string.
    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        text.split_whitespace()
            .map(|w| {
                self.index_of(w)
                    .ok_or_else(|| Error::input(format!("unknown token {w:?}")))
            })
            .collect()
    }

    pub fn render(&self, tokens: &[TokenId]) -> String {
        tokens
            .iter()
            .map(|&t| self.symbol(t).unwrap_or("<?>"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Drops a trailing EOS.
    pub fn strip_eos<'a>(&self, tokens: &'a [TokenId]) -> &'a [TokenId] {
        match (tokens.last(), self.eos) {
            (Some(&last), Some(eos)) if last == eos => &tokens[..tokens.len() - 1],
            _ => tokens,
        }
    }
}

/// A conditional-distribution provider. Implementations are immutable and
/// may be queried from many threads.
pub trait SequenceModel: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    fn max_length(&self) -> usize;

    /// Next-token distribution after a non-complete, reachable `prefix`.
    fn conditional(&self, prefix: &[TokenId]) -> Result<Categorical<f64>>;

    /// The same distribution in exact arithmetic.
    fn conditional_exact(&self, prefix: &[TokenId]) -> Result<Categorical<Rational>>;

    fn is_complete(&self, tokens: &[TokenId]) -> bool {
        tokens.len() >= self.max_length()
            || matches!((tokens.last(), self.vocabulary().eos()), (Some(a), Some(b)) if *a == b)
    }
}

impl<M: SequenceModel + ?Sized> SequenceModel for Box<M> {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }

    fn max_length(&self) -> usize {
        (**self).max_length()
    }

    fn conditional(&self, prefix: &[TokenId]) -> Result<Categorical<f64>> {
        (**self).conditional(prefix)
    }

    fn conditional_exact(&self, prefix: &[TokenId]) -> Result<Categorical<Rational>> {
        (**self).conditional_exact(prefix)
    }

    fn is_complete(&self, tokens: &[TokenId]) -> bool {
        (**self).is_complete(tokens)
    }
}

/// Picks the fast or exact conditional by scalar type.
pub trait ModelProb: Prob {
    fn conditional_of<M: SequenceModel + ?Sized>(model: &M, prefix: &[TokenId]) -> Result<Categorical<Self>>;
}

impl ModelProb for f64 {
    fn conditional_of<M: SequenceModel + ?Sized>(model: &M, prefix: &[TokenId]) -> Result<Categorical<f64>> {
        model.conditional(prefix)
    }
}

impl ModelProb for Rational {
    fn conditional_of<M: SequenceModel + ?Sized>(model: &M, prefix: &[TokenId]) -> Result<Categorical<Rational>> {
        model.conditional_exact(prefix)
    }
}

/// Checks token range, EOS placement and length.
pub fn check_sequence<M: SequenceModel + ?Sized>(model: &M, tokens: &[TokenId]) -> Result<()> {
    let vocab = model.vocabulary();
    if tokens.len() > model.max_length() {
        return Err(Error::InvalidSequence(format!(
            "length {} exceeds max length {}",
            tokens.len(),
            model.max_length()
        )));
    }
    for (pos, &t) in tokens.iter().enumerate() {
        if t >= vocab.len() {
            return Err(Error::InvalidSequence(format!("token {t} out of vocabulary")));
        }
        if Some(t) == vocab.eos() && pos + 1 != tokens.len() {
            return Err(Error::InvalidSequence("token after EOS".into()));
        }
    }
    Ok(())
}

/// The modified next-token distribution after `prefix`.
pub fn conditional_modified<P: ModelProb, M: SequenceModel + ?Sized>(
    model: &M,
    prefix: &[TokenId],
    chain: &ModifierChain,
) -> Result<Categorical<P>> {
    check_sequence(model, prefix).map_err(|e| Error::InvalidPrefix(e.to_string()))?;
    if model.is_complete(prefix) {
        return Err(Error::InvalidPrefix("prefix is already complete".into()));
    }
    chain.apply(P::conditional_of(model, prefix)?)
}

/// Log-probability of a prefix or complete sequence; `-inf` if any step has
/// zero probability.
pub fn sequence_logprob<M: SequenceModel + ?Sized>(model: &M, seq: &[TokenId], chain: &ModifierChain) -> Result<f64> {
    check_sequence(model, seq)?;
    let mut total = 0.0;
    for t in 0..seq.len() {
        let dist = conditional_modified::<f64, _>(model, &seq[..t], chain)?;
        let p = dist.probs()[seq[t]];
        if p <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += p.ln();
    }
    Ok(total)
}

/// Exact probability of a prefix or complete sequence.
pub fn sequence_probability_exact<M: SequenceModel + ?Sized>(
    model: &M,
    seq: &[TokenId],
    chain: &ModifierChain,
) -> Result<Rational> {
    check_sequence(model, seq)?;
    let mut total = Rational::one();
    for t in 0..seq.len() {
        let dist = conditional_modified::<Rational, _>(model, &seq[..t], chain)?;
        let p = &dist.probs()[seq[t]];
        if p.is_zero() {
            return Ok(Rational::zero());
        }
        total *= p;
    }
    Ok(total)
}
