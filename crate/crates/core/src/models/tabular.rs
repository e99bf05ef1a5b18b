use std::collections::HashMap;

use num::{One, Zero};

use super::{check_sequence, SequenceModel, TokenId, Vocabulary};
use crate::codebook::{Categorical, Prob, Rational};
use crate::error::{Error, Result};

/// A model given by an explicit joint table over complete sequences.
/// Conditionals are obtained by marginalizing the table.
#[derive(Debug, Clone)]
pub struct TabularModel {
    vocab: Vocabulary,
    max_length: usize,
    table: Vec<(Vec<TokenId>, Rational)>,
    conditionals: HashMap<Vec<TokenId>, (Categorical<f64>, Categorical<Rational>)>,
}

struct Shape<'a> {
    vocab: &'a Vocabulary,
    max_length: usize,
}

impl SequenceModel for Shape<'_> {
    fn vocabulary(&self) -> &Vocabulary {
        self.vocab
    }
    fn max_length(&self) -> usize {
        self.max_length
    }
    fn conditional(&self, _: &[TokenId]) -> Result<Categorical<f64>> {
        unreachable!("shape-only model")
    }
    fn conditional_exact(&self, _: &[TokenId]) -> Result<Categorical<Rational>> {
        unreachable!("shape-only model")
    }
}

pub fn make_tabular_model(
    vocab: Vocabulary,
    max_length: usize,
    table: Vec<(Vec<TokenId>, Rational)>,
) -> Result<TabularModel> {
    TabularModel::new(vocab, max_length, table)
}

impl TabularModel {
    pub fn new(vocab: Vocabulary, max_length: usize, table: Vec<(Vec<TokenId>, Rational)>) -> Result<Self> {
        if max_length == 0 {
            return Err(Error::model("max_length must be positive"));
        }
        let shape = Shape {
            vocab: &vocab,
            max_length,
        };
        let mut total = Rational::zero();
        let mut seen = std::collections::HashSet::new();
        for (seq, p) in &table {
            check_sequence(&shape, seq).map_err(|e| Error::model(e.to_string()))?;
            if seq.is_empty() || !shape.is_complete(seq) {
                return Err(Error::model(format!("table sequence {seq:?} is not complete")));
            }
            if *p < Rational::zero() {
                return Err(Error::model(format!("negative probability for {seq:?}")));
            }
            if !seen.insert(seq.clone()) {
                return Err(Error::model(format!("duplicate table sequence {seq:?}")));
            }
            total += p;
        }
        if !total.is_one() {
            return Err(Error::model(format!("table probabilities sum to {total}, not 1")));
        }

        let mut mass: HashMap<Vec<TokenId>, Rational> = HashMap::new();
        for (seq, p) in table.iter().filter(|(_, p)| !p.is_zero()) {
            for len in 0..=seq.len() {
                *mass.entry(seq[..len].to_vec()).or_insert_with(Rational::zero) += p;
            }
        }
        let mut conditionals = HashMap::new();
        for (prefix, m) in &mass {
            if shape.is_complete(prefix) {
                continue;
            }
            let mut next = prefix.clone();
            next.push(0);
            let exact: Vec<Rational> = (0..vocab.len())
                .map(|v| {
                    *next.last_mut().unwrap() = v;
                    mass.get(&next).map_or_else(Rational::zero, |x| x / m)
                })
                .collect();
            let fast = exact.iter().map(Prob::to_f64).collect();
            conditionals.insert(prefix.clone(), (Categorical::new(fast)?, Categorical::new(exact)?));
        }
        Ok(TabularModel {
            vocab,
            max_length,
            table,
            conditionals,
        })
    }

    pub fn table(&self) -> &[(Vec<TokenId>, Rational)] {
        &self.table
    }

    fn lookup(&self, prefix: &[TokenId]) -> Result<&(Categorical<f64>, Categorical<Rational>)> {
        self.conditionals
            .get(prefix)
            .ok_or_else(|| Error::InvalidPrefix(format!("prefix {prefix:?} has zero probability or is complete")))
    }
}

impl SequenceModel for TabularModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn max_length(&self) -> usize {
        self.max_length
    }

    fn conditional(&self, prefix: &[TokenId]) -> Result<Categorical<f64>> {
        Ok(self.lookup(prefix)?.0.clone())
    }

    fn conditional_exact(&self, prefix: &[TokenId]) -> Result<Categorical<Rational>> {
        Ok(self.lookup(prefix)?.1.clone())
    }
}
