//! Brute-force ground truth for small models.
//!
//! The joint distribution is enumerated exhaustively in exact rationals, the
//! codebook is laid out explicitly in dictionary order, and decoding is a
//! search over that explicit table. Nothing here goes through the step-wise
//! renormalization used by the sampler.

pub mod checks;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num::{BigInt, Integer, One, Signed, Zero};

use crate::codebook::{Rational, UnitInterval};
use crate::error::{Error, Result};
use crate::models::{conditional_modified, ModifierChain, SequenceModel, TokenId, Vocabulary};

pub const DEFAULT_ENUMERATION_BOUND: usize = 1_000_000;

/// Every positive-probability complete sequence with its exact probability,
/// in dictionary order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactJoint {
    entries: Vec<(Vec<TokenId>, Rational)>,
}

impl ExactJoint {
    pub fn new(mut entries: Vec<(Vec<TokenId>, Rational)>) -> Result<Self> {
        entries.retain(|(_, p)| !p.is_zero());
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("joint has duplicate sequences"));
        }
        if entries.iter().any(|(_, p)| p.is_negative()) {
            return Err(Error::param("joint has negative probability"));
        }
        let total: Rational = entries.iter().map(|(_, p)| p).sum();
        if !total.is_one() {
            return Err(Error::param(format!("joint sums to {total}")));
        }
        Ok(ExactJoint { entries })
    }

    pub fn entries(&self) -> &[(Vec<TokenId>, Rational)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability(&self, seq: &[TokenId]) -> Rational {
        self.entries
            .binary_search_by(|(s, _)| s.as_slice().cmp(seq))
            .map_or_else(|_| Rational::zero(), |i| self.entries[i].1.clone())
    }

    /// Probability of every non-empty prefix (complete sequences included).
    pub fn prefix_masses(&self) -> BTreeMap<Vec<TokenId>, Rational> {
        let mut out = BTreeMap::new();
        for (seq, p) in &self.entries {
            for len in 1..=seq.len() {
                *out.entry(seq[..len].to_vec()).or_insert_with(Rational::zero) += p;
            }
        }
        out
    }
}

pub fn enumerate_joint<M: SequenceModel + ?Sized>(model: &M, chain: &ModifierChain) -> Result<ExactJoint> {
    enumerate_joint_bounded(model, chain, DEFAULT_ENUMERATION_BOUND)
}

/// Depth-first enumeration in vocabulary order.
pub fn enumerate_joint_bounded<M: SequenceModel + ?Sized>(
    model: &M,
    chain: &ModifierChain,
    bound: usize,
) -> Result<ExactJoint> {
    fn walk<M: SequenceModel + ?Sized>(
        model: &M,
        chain: &ModifierChain,
        bound: usize,
        prefix: &mut Vec<TokenId>,
        mass: Rational,
        out: &mut Vec<(Vec<TokenId>, Rational)>,
    ) -> Result<()> {
        if model.is_complete(prefix) {
            if out.len() >= bound {
                return Err(Error::TooLarge { bound });
            }
            out.push((prefix.clone(), mass));
            return Ok(());
        }
        let dist = conditional_modified::<Rational, _>(model, prefix, chain)?;
        for (v, p) in dist.probs().iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            prefix.push(v);
            walk(model, chain, bound, prefix, &mass * p, out)?;
            prefix.pop();
        }
        Ok(())
    }

    let mut out = Vec::new();
    walk(model, chain, bound, &mut Vec::new(), Rational::one(), &mut out)?;
    ExactJoint::new(out)
}

/// Explicit dictionary-order codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactCodebook {
    entries: Vec<(Vec<TokenId>, UnitInterval<Rational>)>,
}

impl ExactCodebook {
    pub fn entries(&self) -> &[(Vec<TokenId>, UnitInterval<Rational>)] {
        &self.entries
    }

    pub fn interval_of(&self, seq: &[TokenId]) -> Option<&UnitInterval<Rational>> {
        self.entries
            .binary_search_by(|(s, _)| s.as_slice().cmp(seq))
            .ok()
            .map(|i| &self.entries[i].1)
    }

    /// Union of the intervals of all sequences starting with `prefix`.
    pub fn prefix_interval(&self, prefix: &[TokenId]) -> Option<UnitInterval<Rational>> {
        let first = self.entries.iter().position(|(s, _)| s.starts_with(prefix))?;
        let last = self.entries.iter().rposition(|(s, _)| s.starts_with(prefix))?;
        Some(
            UnitInterval::new(self.entries[first].1.lo().clone(), self.entries[last].1.hi().clone())
                .expect("prefix block is non-empty"),
        )
    }

    /// Every distinct interval endpoint in `[0, 1]`.
    pub fn endpoints(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = vec![Rational::zero()];
        out.extend(self.entries.iter().map(|(_, iv)| iv.hi().clone()));
        out
    }

    /// Least common denominator of all endpoints.
    pub fn common_denominator(&self) -> BigInt {
        self.endpoints()
            .iter()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()))
    }
}

pub fn exact_codebook(joint: &ExactJoint) -> ExactCodebook {
    let mut lo = Rational::zero();
    let entries = joint
        .entries
        .iter()
        .map(|(seq, p)| {
            let hi = &lo + p;
            let iv = UnitInterval::new(lo.clone(), hi.clone()).expect("positive probability");
            lo = hi;
            (seq.clone(), iv)
        })
        .collect();
    ExactCodebook { entries }
}

pub fn exact_expectation<F>(joint: &ExactJoint, reward: F) -> Rational
where
    F: Fn(&[TokenId]) -> Rational,
{
    joint.entries.iter().map(|(s, p)| reward(s) * p).sum()
}

/// The sequence whose codebook interval holds `c`.
///
/// # Panics
///
/// If `c` is outside `[0, 1)`.
pub fn brute_force_decode<'a>(c: &Rational, codebook: &'a ExactCodebook) -> &'a [TokenId] {
    let idx = codebook.entries.partition_point(|(_, iv)| iv.hi() <= c);
    let (seq, iv) = &codebook.entries[idx];
    assert!(iv.contains(c), "code {c} outside [0, 1)");
    seq
}

fn fraction(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// CSV: `sequence,probability_num,probability_den,lo,hi`.
pub fn oracle_table_csv(vocab: &Vocabulary, joint: &ExactJoint) -> String {
    let codebook = exact_codebook(joint);
    let mut out = String::from("sequence,probability_num,probability_den,lo,hi\n");
    for ((seq, p), (_, iv)) in joint.entries.iter().zip(codebook.entries()) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            vocab.render(seq),
            p.numer(),
            p.denom(),
            fraction(iv.lo()),
            fraction(iv.hi())
        );
    }
    out
}
