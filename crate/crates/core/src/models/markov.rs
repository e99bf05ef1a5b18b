use std::collections::{HashMap, HashSet, VecDeque};

use num::Zero;

use super::{SequenceModel, TokenId, Vocabulary};
use crate::codebook::{Categorical, Prob, Rational};
use crate::error::{Error, Result};

/// An order-`k` Markov chain: the next-token distribution depends only on
/// the last `k` tokens (or the whole prefix, while it is shorter than `k`).
#[derive(Debug, Clone)]
pub struct MarkovModel {
    vocab: Vocabulary,
    max_length: usize,
    order: usize,
    rows: HashMap<Vec<TokenId>, (Categorical<f64>, Categorical<Rational>)>,
}

pub fn make_markov_model(
    order: usize,
    rows: Vec<(Vec<TokenId>, Vec<Rational>)>,
    vocab: Vocabulary,
    max_length: usize,
) -> Result<MarkovModel> {
    MarkovModel::new(order, rows, vocab, max_length)
}

impl MarkovModel {
    pub fn new(
        order: usize,
        rows: Vec<(Vec<TokenId>, Vec<Rational>)>,
        vocab: Vocabulary,
        max_length: usize,
    ) -> Result<Self> {
        if max_length == 0 {
            return Err(Error::model("max_length must be positive"));
        }
        let mut table = HashMap::new();
        for (ctx, probs) in rows {
            if ctx.len() > order {
                return Err(Error::model(format!("context {ctx:?} longer than order {order}")));
            }
            if let Some(&t) = ctx.iter().find(|&&t| t >= vocab.len()) {
                return Err(Error::model(format!("context token {t} out of vocabulary")));
            }
            if probs.len() != vocab.len() {
                return Err(Error::model(format!(
                    "row for {ctx:?} has {} entries, vocabulary has {}",
                    probs.len(),
                    vocab.len()
                )));
            }
            let exact = Categorical::new(probs).map_err(|e| Error::model(format!("row {ctx:?}: {e}")))?;
            let fast = Categorical::new(exact.probs().iter().map(Prob::to_f64).collect())?;
            if table.insert(ctx.clone(), (fast, exact)).is_some() {
                return Err(Error::model(format!("duplicate row for context {ctx:?}")));
            }
        }
        let model = MarkovModel {
            vocab,
            max_length,
            order,
            rows: table,
        };
        model.check_reachable_rows()?;
        Ok(model)
    }

    /// Same distribution at every step.
    pub fn independent(vocab: Vocabulary, probs: Vec<Rational>, max_length: usize) -> Result<Self> {
        Self::new(0, vec![(Vec::new(), probs)], vocab, max_length)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn context<'a>(&self, prefix: &'a [TokenId]) -> &'a [TokenId] {
        &prefix[prefix.len().saturating_sub(self.order)..]
    }

    fn check_reachable_rows(&self) -> Result<()> {
        let eos = self.vocab.eos();
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([(Vec::new(), 0usize)]);
        while let Some((ctx, len)) = queue.pop_front() {
            if !seen.insert((ctx.clone(), len)) {
                continue;
            }
            let (_, row) = self
                .rows
                .get(&ctx)
                .ok_or_else(|| Error::model(format!("missing row for reachable context {ctx:?}")))?;
            for (v, p) in row.probs().iter().enumerate() {
                if p.is_zero() || Some(v) == eos || len + 1 >= self.max_length {
                    continue;
                }
                let mut next = ctx.clone();
                next.push(v);
                let keep = next.len().saturating_sub(self.order);
                queue.push_back((next[keep..].to_vec(), len + 1));
            }
        }
        Ok(())
    }

    fn row(&self, prefix: &[TokenId]) -> Result<&(Categorical<f64>, Categorical<Rational>)> {
        self.rows
            .get(self.context(prefix))
            .ok_or_else(|| Error::InvalidPrefix(format!("no row for context of {prefix:?}")))
    }
}

impl SequenceModel for MarkovModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn max_length(&self) -> usize {
        self.max_length
    }

    fn conditional(&self, prefix: &[TokenId]) -> Result<Categorical<f64>> {
        Ok(self.row(prefix)?.0.clone())
    }

    fn conditional_exact(&self, prefix: &[TokenId]) -> Result<Categorical<Rational>> {
        Ok(self.row(prefix)?.1.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sequence_probability_exact, ModifierChain};
    use num::One;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn ab() -> Vocabulary {
        Vocabulary::from_words("A B", None).unwrap()
    }

    #[test]
    fn identity_rows_give_deterministic_chain() {
        let m = make_markov_model(
            1,
            vec![
                (vec![], vec![q(1, 1), q(0, 1)]),
                (vec![0], vec![q(0, 1), q(1, 1)]),
                (vec![1], vec![q(1, 1), q(0, 1)]),
            ],
            ab(),
            4,
        )
        .unwrap();
        let p = sequence_probability_exact(&m, &[0, 1, 0, 1], &ModifierChain::identity()).unwrap();
        assert!(p.is_one());
    }

    #[test]
    fn uniform_rows_give_uniform_joint() {
        let m = MarkovModel::independent(ab(), vec![q(1, 2), q(1, 2)], 3).unwrap();
        for s in [[0, 0, 0], [1, 0, 1], [1, 1, 1]] {
            assert_eq!(
                sequence_probability_exact(&m, &s, &ModifierChain::identity()).unwrap(),
                q(1, 8)
            );
        }
    }

    #[test]
    fn two_state_chain_joint_by_hand() {
        // P(first=A)=1/2; P(A|A)=3/4, P(A|B)=1/3
        let m = make_markov_model(
            1,
            vec![
                (vec![], vec![q(1, 2), q(1, 2)]),
                (vec![0], vec![q(3, 4), q(1, 4)]),
                (vec![1], vec![q(1, 3), q(2, 3)]),
            ],
            ab(),
            3,
        )
        .unwrap();
        let chain = ModifierChain::identity();
        // A B A = 1/2 * 1/4 * 1/3
        assert_eq!(sequence_probability_exact(&m, &[0, 1, 0], &chain).unwrap(), q(1, 24));
        // B B B = 1/2 * 2/3 * 2/3
        assert_eq!(sequence_probability_exact(&m, &[1, 1, 1], &chain).unwrap(), q(2, 9));
    }

    #[test]
    fn missing_reachable_row_is_an_error() {
        let err = make_markov_model(1, vec![(vec![], vec![q(1, 2), q(1, 2)]), (vec![0], vec![q(1, 1), q(0, 1)])], ab(), 3);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
        // the row for B is never reached when B has zero probability
        let ok = make_markov_model(1, vec![(vec![], vec![q(1, 1), q(0, 1)]), (vec![0], vec![q(1, 1), q(0, 1)])], ab(), 3);
        assert!(ok.is_ok());
    }

    #[test]
    fn bad_rows_rejected() {
        assert!(MarkovModel::independent(ab(), vec![q(1, 2), q(2, 5)], 2).is_err());
        assert!(MarkovModel::independent(ab(), vec![q(1, 1)], 2).is_err());
    }

    #[test]
    fn eos_stops_reachability() {
        let v = Vocabulary::from_words("a </s>", Some(1)).unwrap();
        let m = MarkovModel::independent(v, vec![q(1, 2), q(1, 2)], 3).unwrap();
        assert!(m.is_complete(&[0, 1]));
        assert!(!m.is_complete(&[0, 0]));
        assert!(m.is_complete(&[0, 0, 0]));
    }
}
