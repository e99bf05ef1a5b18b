//! Random small models for integration tests.
#![allow(dead_code)]

use arith_sampling::models::{make_markov_model, make_tabular_model, MarkovModel, TabularModel};
use arith_sampling::{Rational, SequenceModel, TokenId, Vocabulary};
use num::{BigInt, Zero};
use rand::Rng;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn vocab(size: usize, with_eos: bool) -> Vocabulary {
    let mut words: Vec<String> = (0..size).map(|i| format!("t{i}")).collect();
    if with_eos {
        *words.last_mut().unwrap() = "</s>".into();
    }
    Vocabulary::new(words, with_eos.then_some(size - 1)).unwrap()
}

/// Integer weights in `0..=max_weight`, at least one positive, normalized.
pub fn random_probs(rng: &mut impl Rng, size: usize, max_weight: i64) -> Vec<Rational> {
    let mut w: Vec<i64> = (0..size).map(|_| rng.gen_range(0..=max_weight)).collect();
    if w.iter().all(|&x| x == 0) {
        w[rng.gen_range(0..size)] = 1;
    }
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| q(x, total)).collect()
}

fn all_contexts(vocab_size: usize, eos: Option<TokenId>, order: usize) -> Vec<Vec<TokenId>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..order {
        let mut next = Vec::new();
        for ctx in &frontier {
            for t in 0..vocab_size {
                if Some(t) == eos {
                    continue;
                }
                let mut c: Vec<TokenId> = ctx.clone();
                c.push(t);
                next.push(c);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Markov model with `|V| <= 5`, `L <= 4`, order at most 2.
pub fn random_markov(rng: &mut impl Rng, max_weight: i64) -> MarkovModel {
    let size = rng.gen_range(2..=5);
    let with_eos = rng.gen_bool(0.5);
    let v = vocab(size, with_eos);
    let max_length = rng.gen_range(1..=4);
    let order = rng.gen_range(0..=2usize);
    let rows = all_contexts(size, v.eos(), order)
        .into_iter()
        .map(|ctx| (ctx, random_probs(rng, size, max_weight)))
        .collect();
    make_markov_model(order, rows, v, max_length).unwrap()
}

fn complete_sequences(size: usize, eos: Option<TokenId>, max_length: usize) -> Vec<Vec<TokenId>> {
    let mut out = Vec::new();
    let mut frontier = vec![vec![]];
    while let Some(prefix) = frontier.pop() {
        for t in 0..size {
            let mut s: Vec<TokenId> = prefix.clone();
            s.push(t);
            if Some(t) == eos || s.len() == max_length {
                out.push(s);
            } else {
                frontier.push(s);
            }
        }
    }
    out.sort();
    out
}

/// Tabular model with `|V| <= 5`, `L <= 4`; probabilities are integer
/// weights over a total of at most `max_weight * |support|`.
pub fn random_tabular(rng: &mut impl Rng, max_weight: i64) -> TabularModel {
    let size = rng.gen_range(2..=4);
    let with_eos = rng.gen_bool(0.5);
    let v = vocab(size, with_eos);
    let max_length = rng.gen_range(1..=if size > 3 { 3 } else { 4 });
    let seqs = complete_sequences(size, v.eos(), max_length);
    let probs = random_probs(rng, seqs.len(), max_weight);
    let table = seqs
        .into_iter()
        .zip(probs)
        .filter(|(_, p)| !p.is_zero())
        .collect();
    make_tabular_model(v, max_length, table).unwrap()
}

/// Alternates tabular and Markov models.
pub fn random_model(rng: &mut impl Rng, index: usize, max_weight: i64) -> Box<dyn SequenceModel> {
    if index.is_multiple_of(2) {
        Box::new(random_tabular(rng, max_weight))
    } else {
        Box::new(random_markov(rng, max_weight))
    }
}

pub fn rational_int(x: usize) -> Rational {
    Rational::from_integer(BigInt::from(x))
}
