//! Sampler behaviour checked against exhaustive exact enumeration.

mod common;

use std::collections::BTreeMap;

use arith_sampling::codebook::{lattice_codes, CodePoint, LatticeMode, LatticeSpec};
use arith_sampling::models::{make_synthetic_lm, sequence_logprob, MarkovModel};
use arith_sampling::oracle::checks::{full_period_average, run_oracle_checks, Status};
use arith_sampling::oracle::{enumerate_joint, exact_codebook, exact_expectation, oracle_table_csv, ExactCodebook};
use arith_sampling::sampler::{
    arithmetic_sample, arithmetic_sample_with_workers, code_interval_of_sequence, decode_code, parallel_decode,
    uniform_codes,
};
use arith_sampling::{ModifierChain, Rational, SequenceModel, TokenId, Vocabulary};
use num::{BigInt, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{q, random_model, random_tabular};

fn id() -> ModifierChain {
    ModifierChain::identity()
}

fn bernoulli(len: usize) -> MarkovModel {
    MarkovModel::independent(Vocabulary::from_words("A B", None).unwrap(), vec![q(3, 5), q(2, 5)], len).unwrap()
}

fn exact_shift(rng: &mut impl Rng) -> CodePoint<Rational> {
    CodePoint::new(Rational::new(BigInt::from(rng.gen_range(0u64..1 << 40)), BigInt::from(1u64 << 40))).unwrap()
}

fn estimate(model: &dyn SequenceModel, spec: &LatticeSpec<Rational>, reward: &dyn Fn(&[TokenId]) -> Rational) -> Rational {
    let set = arithmetic_sample(model, spec, &id()).unwrap();
    set.sequences().map(reward).sum::<Rational>() / q(set.len() as i64, 1)
}

/// Number of adjacent codebook entries whose rewards differ.
fn reward_jumps(codebook: &ExactCodebook, reward: &dyn Fn(&[TokenId]) -> Rational) -> usize {
    codebook
        .entries()
        .windows(2)
        .filter(|w| reward(&w[0].0) != reward(&w[1].0))
        .count()
}

fn first_token_reward(s: &[TokenId]) -> Rational {
    q(s[0] as i64 + 1, 2)
}

#[test]
fn bernoulli_model_passes_every_check() {
    let checks = run_oracle_checks(&bernoulli(2), &id(), 1).unwrap();
    let names: Vec<_> = checks.iter().map(|c| c.name).collect();
    assert_eq!(
        names,
        ["partition", "codebook_logprob", "oracle_equivalence", "roundtrip", "unbiasedness", "monotonicity"]
    );
    assert!(checks.iter().all(|c| c.status == Status::Pass), "{checks:?}");
}

#[test]
fn random_models_pass_every_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..6 {
        let model = random_model(&mut rng, i, 3);
        let checks = run_oracle_checks(&model, &id(), i as u64).unwrap();
        assert!(checks.iter().all(|c| c.status != Status::Fail), "{checks:?}");
    }
}

#[test]
fn modified_chain_matches_oracle() {
    let lm = make_synthetic_lm(4, 4, 3, 1.0).unwrap();
    for chain in [
        ModifierChain::standard(Some(0.5), None, None).unwrap(),
        ModifierChain::standard(None, Some(2), None).unwrap(),
        ModifierChain::standard(Some(2.0), None, Some(0.7)).unwrap(),
    ] {
        let checks = run_oracle_checks(&lm, &chain, 3).unwrap();
        let equivalence = checks.iter().find(|c| c.name == "oracle_equivalence").unwrap();
        assert_eq!(equivalence.status, Status::Pass, "{chain}");
    }
}

#[test]
fn code_intervals_match_oracle_codebook() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..8 {
        let model = random_model(&mut rng, i, 5);
        let codebook = exact_codebook(&enumerate_joint(&model, &id()).unwrap());
        for (seq, iv) in codebook.entries() {
            assert_eq!(&code_interval_of_sequence(&model, seq, &id()).unwrap(), iv);
            let lp = sequence_logprob(&model, seq, &id()).unwrap();
            assert!((lp.exp() - iv.width().to_f64().unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn fast_decode_agrees_away_from_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let model = random_tabular(&mut rng, 9);
    let codebook = exact_codebook(&enumerate_joint(&model, &id()).unwrap());
    let margin = 1e-9;
    for c in uniform_codes(5000, 3) {
        let exact = c.to_exact();
        let seq = decode_code(&model, &c, &id()).unwrap();
        let (_, iv) = codebook
            .entries()
            .iter()
            .find(|(_, iv)| iv.contains(exact.value()))
            .unwrap();
        let lo = iv.lo().to_f64().unwrap();
        let hi = iv.hi().to_f64().unwrap();
        if *c.value() - lo > margin && hi - *c.value() > margin {
            assert_eq!(seq, decode_code(&model, &exact, &id()).unwrap());
        }
    }
}

// Full-period averages in uniform mode are exact as well.
#[test]
fn uniform_lattice_is_unbiased() {
    let model = bernoulli(2);
    let joint = enumerate_joint(&model, &id()).unwrap();
    let reward = |s: &[TokenId]| q(s.iter().filter(|&&t| t == 0).count() as i64, 1);
    let n = 3;
    let period = 75 * 10;
    let mut total = Rational::zero();
    for j in 0..period {
        let spec = LatticeSpec::new(n, LatticeMode::Uniform, CodePoint::new(q(j, period)).unwrap()).unwrap();
        total += estimate(&model, &spec, &reward);
    }
    assert_eq!(total / q(period, 1), exact_expectation(&joint, reward));
    let codebook = exact_codebook(&joint);
    assert_eq!(
        full_period_average(&model, &id(), &codebook, n, reward, 100_000).unwrap(),
        q(6, 5)
    );
}

// Using all N + 1 lattice points gives the classical bound: error below
// (jumps * max reward) / (N + 1) for non-negative rewards.
#[test]
fn full_lattice_error_bounded_by_jumps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..6 {
        let model = random_tabular(&mut rng, 9);
        let joint = enumerate_joint(&model, &id()).unwrap();
        let codebook = exact_codebook(&joint);
        let truth = exact_expectation(&joint, first_token_reward);
        let jumps = reward_jumps(&codebook, &first_token_reward);
        let max = joint.entries().iter().map(|(s, _)| first_token_reward(s)).max().unwrap();
        for n in [10usize, 100, 1000] {
            let spec = LatticeSpec::new(n + 1, LatticeMode::Uniform, exact_shift(&mut rng)).unwrap();
            let err = (estimate(&model, &spec, &first_token_reward) - &truth).abs();
            assert!(err <= q(jumps as i64, n as i64 + 1) * &max, "n={n} err={err}");
        }
    }
}

// The N-point estimator drops the lattice point at the shift itself, which
// costs up to one extra max reward: error below (jumps + 1) * max / N.
#[test]
fn arithmetic_estimator_consistency_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..6 {
        let model = random_tabular(&mut rng, 9);
        let joint = enumerate_joint(&model, &id()).unwrap();
        let codebook = exact_codebook(&joint);
        let truth = exact_expectation(&joint, first_token_reward);
        let jumps = reward_jumps(&codebook, &first_token_reward);
        let max = joint.entries().iter().map(|(s, _)| first_token_reward(s)).max().unwrap();
        for n in [10usize, 100, 1000] {
            let spec = LatticeSpec::new(n, LatticeMode::Paper, exact_shift(&mut rng)).unwrap();
            let err = (estimate(&model, &spec, &first_token_reward) - &truth).abs();
            assert!(err <= q(jumps as i64 + 1, n as i64) * &max, "n={n} err={err}");
        }
    }
}

// One jump, reward at most 1, N = 10: the N-point estimate can miss by
// 1/10, more than 1/(N + 1).
#[test]
fn dropped_lattice_point_exceeds_jump_bound() {
    let model = bernoulli(1);
    let indicator = |s: &[TokenId]| if s[0] == 0 { q(1, 1) } else { q(0, 1) };
    let spec = LatticeSpec::new(10, LatticeMode::Paper, CodePoint::new(q(19, 20)).unwrap()).unwrap();
    let err = (estimate(&model, &spec, &indicator) - q(3, 5)).abs();
    assert_eq!(err, q(1, 10));
    assert!(err > q(1, 11));
}

fn prefix_counts(seqs: &[Vec<TokenId>]) -> BTreeMap<Vec<TokenId>, usize> {
    let mut counts = BTreeMap::new();
    for s in seqs {
        for len in 1..=s.len() {
            *counts.entry(s[..len].to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// For every prefix: (count, floor(P (N+1)), ceil(P (N+1))).
fn prefix_table(model: &dyn SequenceModel, n: usize, b: Rational) -> Vec<(usize, i64, i64)> {
    let masses = enumerate_joint(model, &id()).unwrap().prefix_masses();
    let spec = LatticeSpec::new(n, LatticeMode::Paper, CodePoint::new(b).unwrap()).unwrap();
    let seqs: Vec<_> = arithmetic_sample(model, &spec, &id())
        .unwrap()
        .entries
        .into_iter()
        .map(|e| e.sequence)
        .collect();
    let counts = prefix_counts(&seqs);
    masses
        .iter()
        .map(|(prefix, p)| {
            let scaled = p * q(n as i64 + 1, 1);
            (
                counts.get(prefix).copied().unwrap_or(0),
                scaled.floor().to_integer().to_i64().unwrap(),
                scaled.ceil().to_integer().to_i64().unwrap(),
            )
        })
        .collect()
}

#[test]
fn prefix_counts_never_exceed_ceiling() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..4 {
        let model = random_model(&mut rng, i, 6);
        for n in [4, 9] {
            for j in 0..200 {
                for (k, floor, _) in prefix_table(&model, n, q(j, 200)) {
                    // smallest m with P < m/(N+1) is floor + 1
                    assert!(k as i64 <= floor + 1);
                }
            }
        }
    }
}

// With the lattice point at the shift missing, a prefix can be hit one
// fewer time than the full lattice guarantees.
#[test]
fn prefix_counts_at_least_floor_minus_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for i in 0..4 {
        let model = random_model(&mut rng, i, 6);
        for n in [4, 9] {
            for j in 0..200 {
                for (k, floor, ceil) in prefix_table(&model, n, q(j, 200)) {
                    // largest m with P > m/(N+1) is ceil - 1
                    assert!(k as i64 >= ceil - 2, "k={k} floor={floor} ceil={ceil}");
                }
            }
        }
    }
}

#[test]
fn lower_prefix_bound_counterexample() {
    // codes 0.35, 0.55, 0.75, 0.95: one A although P(A) = 0.5 > 2/5
    let spec = LatticeSpec::new(4, LatticeMode::Paper, CodePoint::new(q(3, 20)).unwrap()).unwrap();
    let codes: Vec<_> = lattice_codes(&spec).into_iter().map(|c| c.into_inner()).collect();
    assert_eq!(codes, vec![q(7, 20), q(11, 20), q(15, 20), q(19, 20)]);
    let half = MarkovModel::independent(Vocabulary::from_words("A B", None).unwrap(), vec![q(1, 2), q(1, 2)], 1).unwrap();
    let set = arithmetic_sample(&half, &spec, &id()).unwrap();
    assert_eq!(set.sequences().filter(|s| s[0] == 0).count(), 1);
}

#[test]
fn small_sequences_never_duplicate() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for i in 0..10 {
        let model = random_model(&mut rng, i, 6);
        let joint = enumerate_joint(&model, &id()).unwrap();
        let max = joint.entries().iter().map(|(_, p)| p.clone()).max().unwrap();
        // largest N with every sequence below 1/(N+1)
        let mut n = max.recip().ceil().to_integer().to_usize().unwrap();
        while n > 0 && max >= q(1, n as i64 + 1) {
            n -= 1;
        }
        if n == 0 {
            continue;
        }
        for j in 0..100 {
            let spec = LatticeSpec::new(n, LatticeMode::Paper, CodePoint::new(q(j, 100)).unwrap()).unwrap();
            let set = arithmetic_sample(&model, &spec, &id()).unwrap();
            let mut seqs: Vec<_> = set.sequences().collect();
            seqs.sort();
            seqs.dedup();
            assert_eq!(seqs.len(), n, "model {i} N={n}");
        }
    }
}

#[test]
fn parallel_decode_matches_sequential() {
    let lm = make_synthetic_lm(2, 8, 10, 1.0).unwrap();
    let codes = uniform_codes(1000, 4);
    let one = parallel_decode(&lm, &codes, &id(), 1).unwrap();
    for workers in [2, 3, 8, 64] {
        assert_eq!(parallel_decode(&lm, &codes, &id(), workers).unwrap(), one);
    }
    assert!(parallel_decode::<f64, _>(&lm, &[], &id(), 4).unwrap().is_empty());
    let spec = LatticeSpec::new(64, LatticeMode::Paper, CodePoint::new(0.3).unwrap()).unwrap();
    assert_eq!(
        arithmetic_sample_with_workers(&lm, &spec, &id(), 4).unwrap(),
        arithmetic_sample(&lm, &spec, &id()).unwrap()
    );
}

#[test]
fn arithmetic_entries_sorted_by_code() {
    let lm = make_synthetic_lm(2, 5, 6, 1.0).unwrap();
    let spec = LatticeSpec::new(33, LatticeMode::Paper, CodePoint::new(0.77).unwrap()).unwrap();
    let set = arithmetic_sample(&lm, &spec, &id()).unwrap();
    let codes: Vec<f64> = set.entries.iter().map(|e| *e.code.as_ref().unwrap().value()).collect();
    assert!(codes.windows(2).all(|w| w[0] < w[1]));
    // sorted by code means dictionary order of sequences
    let seqs: Vec<_> = set.sequences().collect();
    assert!(seqs.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn oracle_table_has_exact_rationals() {
    let model = bernoulli(2);
    let csv = oracle_table_csv(model.vocabulary(), &enumerate_joint(&model, &id()).unwrap());
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0], &csv::StringRecord::from(vec!["A A", "9", "25", "0/1", "9/25"]));
    assert_eq!(&rows[3], &csv::StringRecord::from(vec!["B B", "4", "25", "21/25", "1/1"]));
}
