//! Sampler-versus-oracle property checks for small models.

use num::{BigInt, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{brute_force_decode, enumerate_joint, exact_codebook, exact_expectation, ExactCodebook, ExactJoint};
use crate::codebook::{lattice_codes, CodePoint, LatticeMode, LatticeSpec, Prob, Rational};
use crate::error::{Error, Result};
use crate::models::{sequence_logprob, sequence_probability_exact, ModifierChain, SequenceModel, TokenId};
use crate::sampler::decode_code;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub status: Status,
    pub worst_deviation: f64,
}

impl PropertyCheck {
    fn new(name: &'static str, passed: bool, worst_deviation: f64) -> Self {
        let status = if passed { Status::Pass } else { Status::Fail };
        PropertyCheck {
            name,
            status,
            worst_deviation,
        }
    }
}

/// Offset used for near-boundary codes.
pub fn boundary_epsilon() -> Rational {
    Rational::new(BigInt::one(), BigInt::from(10u64.pow(12)))
}

/// Codes at, just below and just above every interior codebook endpoint.
pub fn boundary_codes(codebook: &ExactCodebook) -> Vec<Rational> {
    let eps = boundary_epsilon();
    let mut out = vec![Rational::zero()];
    for w in codebook.endpoints() {
        for c in [&w - &eps, w.clone(), &w + &eps] {
            if c >= Rational::zero() && c < Rational::one() {
                out.push(c);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// `count` codes: near-boundary codes (at most 60% of the budget) plus a
/// randomly shifted exact lattice.
pub fn adversarial_codes(codebook: &ExactCodebook, count: usize, rng: &mut impl Rng) -> Vec<Rational> {
    let mut codes = boundary_codes(codebook);
    let cap = count * 3 / 5;
    if codes.len() > cap {
        let step = codes.len() as f64 / cap as f64;
        codes = (0..cap).map(|i| codes[(i as f64 * step) as usize].clone()).collect();
    }
    let rest = count.saturating_sub(codes.len()).max(1);
    let shift = Rational::new(BigInt::from(rng.gen_range(0u64..1 << 40)), BigInt::from(1u64 << 40));
    let spec = LatticeSpec::new(rest, LatticeMode::Uniform, CodePoint::new(shift).expect("in [0, 1)"))
        .expect("rest >= 1");
    codes.extend(lattice_codes(&spec).into_iter().map(CodePoint::into_inner));
    codes.truncate(count);
    codes
}

/// Exact sampler decode against brute force; returns the number of mismatches.
pub fn oracle_mismatches<M: SequenceModel + ?Sized>(
    model: &M,
    chain: &ModifierChain,
    codebook: &ExactCodebook,
    codes: &[Rational],
) -> Result<usize> {
    let mut bad = 0;
    for c in codes {
        let decoded = decode_code(model, &CodePoint::new(c.clone())?, chain)?;
        if decoded != brute_force_decode(c, codebook) {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Average of the arithmetic-sampling estimator over a full period of shifts
/// `b = j / M`, with `M` a multiple of `N + 1` and of the codebook's common
/// denominator. The estimator is constant between consecutive grid shifts,
/// so this equals its expectation over a uniform shift exactly.
///
/// Fails with [`Error::TooLarge`] when `M * N` would exceed `max_decodes`.
pub fn full_period_average<M, F>(
    model: &M,
    chain: &ModifierChain,
    codebook: &ExactCodebook,
    n: usize,
    reward: F,
    max_decodes: usize,
) -> Result<Rational>
where
    M: SequenceModel + ?Sized,
    F: Fn(&[TokenId]) -> Rational,
{
    let den = codebook.common_denominator();
    let den_small = num::ToPrimitive::to_u64(&den).filter(|d| *d <= 1 << 32).ok_or(Error::TooLarge { bound: max_decodes })?;
    let mut k = den_small;
    while k < 10 {
        k += den_small;
    }
    let period = k * (n as u64 + 1);
    if period.saturating_mul(n as u64) > max_decodes as u64 {
        return Err(Error::TooLarge { bound: max_decodes });
    }
    let mut total = Rational::zero();
    for j in 0..period {
        let shift = CodePoint::new(Rational::from_ratio(j, period))?;
        let spec = LatticeSpec::new(n, LatticeMode::Paper, shift)?;
        let mut sum = Rational::zero();
        for c in lattice_codes(&spec) {
            sum += reward(&decode_code(model, &c, chain)?);
        }
        total += sum / Rational::from_integer(BigInt::from(n));
    }
    Ok(total / Rational::from_integer(BigInt::from(period)))
}

/// Length of the common prefix of the two decodes, and the depth of the
/// deepest codebook prefix interval containing both codes.
pub fn monotonicity_depths(codebook: &ExactCodebook, a: &Rational, b: &Rational) -> (usize, usize) {
    let sa = brute_force_decode(a, codebook);
    let sb = brute_force_decode(b, codebook);
    let common = sa.iter().zip(sb).take_while(|(x, y)| x == y).count();
    let mut depth = 0;
    for d in 1..=sa.len() {
        match codebook.prefix_interval(&sa[..d]) {
            Some(iv) if iv.contains(a) && iv.contains(b) => depth = d,
            _ => break,
        }
    }
    (common, depth)
}

fn first_token_reward(s: &[TokenId]) -> Rational {
    Rational::from_integer(BigInt::from(s.first().copied().unwrap_or(0)))
}

fn length_reward(s: &[TokenId]) -> Rational {
    Rational::from_integer(BigInt::from(s.len()))
}

/// The full check suite behind `oracle-check`.
pub fn run_oracle_checks<M: SequenceModel + ?Sized>(
    model: &M,
    chain: &ModifierChain,
    seed: u64,
) -> Result<Vec<PropertyCheck>> {
    let joint = enumerate_joint(model, chain)?;
    let codebook = exact_codebook(&joint);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    out.push(partition_check(&codebook));
    out.push(width_check(model, chain, &joint, &codebook)?);

    let codes = adversarial_codes(&codebook, 1000, &mut rng);
    let bad = oracle_mismatches(model, chain, &codebook, &codes)?;
    out.push(PropertyCheck::new("oracle_equivalence", bad == 0, bad as f64 / codes.len() as f64));

    out.push(roundtrip_check(model, chain, &codebook)?);

    let mut worst = 0.0_f64;
    let mut status = Status::Pass;
    for reward in [first_token_reward as fn(&[TokenId]) -> Rational, length_reward] {
        let exact = exact_expectation(&joint, reward);
        match full_period_average(model, chain, &codebook, 3, reward, 200_000) {
            Ok(avg) => {
                worst = worst.max((avg.clone() - exact.clone()).to_f64().abs());
                if avg != exact {
                    status = Status::Fail;
                }
            }
            Err(Error::TooLarge { .. }) => status = Status::Skipped,
            Err(e) => return Err(e),
        }
    }
    out.push(PropertyCheck {
        name: "unbiasedness",
        status,
        worst_deviation: worst,
    });

    let mut violations = 0;
    for _ in 0..500 {
        let a = Rational::from_float(rng.gen::<f64>()).expect("finite");
        let b = Rational::from_float(rng.gen::<f64>()).expect("finite");
        let (common, depth) = monotonicity_depths(&codebook, &a, &b);
        if common != depth {
            violations += 1;
        }
    }
    out.push(PropertyCheck::new("monotonicity", violations == 0, violations as f64));
    Ok(out)
}

fn partition_check(codebook: &ExactCodebook) -> PropertyCheck {
    let entries = codebook.entries();
    let contiguous = entries.windows(2).all(|w| w[0].1.hi() == w[1].1.lo());
    let total: Rational = entries.iter().map(|(_, iv)| iv.width()).sum();
    let starts_at_zero = entries.first().is_some_and(|(_, iv)| iv.lo().is_zero());
    let dev = (total.clone() - Rational::one()).to_f64().abs();
    PropertyCheck::new("partition", contiguous && starts_at_zero && total.is_one(), dev)
}

fn width_check<M: SequenceModel + ?Sized>(
    model: &M,
    chain: &ModifierChain,
    joint: &ExactJoint,
    codebook: &ExactCodebook,
) -> Result<PropertyCheck> {
    let mut exact_ok = true;
    let mut worst = 0.0_f64;
    for ((seq, p), (_, iv)) in joint.entries().iter().zip(codebook.entries()) {
        exact_ok &= iv.width() == *p && sequence_probability_exact(model, seq, chain)? == *p;
        let lp = sequence_logprob(model, seq, chain)?;
        worst = worst.max((lp.exp() - p.to_f64()).abs());
    }
    Ok(PropertyCheck::new("codebook_logprob", exact_ok && worst <= 1e-9, worst))
}

fn roundtrip_check<M: SequenceModel + ?Sized>(
    model: &M,
    chain: &ModifierChain,
    codebook: &ExactCodebook,
) -> Result<PropertyCheck> {
    let mut bad = 0usize;
    for (seq, iv) in codebook.entries() {
        let mid = CodePoint::new(iv.midpoint())?;
        if decode_code(model, &mid, chain)? != *seq {
            bad += 1;
        }
        if decode_code(model, &mid.to_fast(), chain)? != *seq {
            bad += 1;
        }
    }
    Ok(PropertyCheck::new("roundtrip", bad == 0, bad as f64))
}
