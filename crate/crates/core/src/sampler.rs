//! Decoding code points into sequences, and batch sampling.
//!
//! [`decode_code`] walks the implicit codebook of a sequence model: at every
//! step the (modified) conditional is laid out on `[0, 1)`, the code picks a
//! symbol, and the code is renormalized into that symbol's interval. With a
//! uniform random code this is ordinary ancestral sampling; with a shared
//! randomly shifted lattice of codes it is arithmetic sampling.

use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codebook::{cdf_intervals, lattice_codes, locate, renormalize, CodePoint, LatticeSpec, Rational, UnitInterval};
use crate::error::{Error, Result};
use crate::models::{conditional_modified, ModelProb, ModifierChain, SequenceModel, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Arithmetic,
    Ancestral,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arithmetic" => Ok(Method::Arithmetic),
            "ancestral" => Ok(Method::Ancestral),
            other => Err(Error::param(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Arithmetic => "arithmetic",
            Method::Ancestral => "ancestral",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEntry<P> {
    pub sequence: Vec<TokenId>,
    /// Absent for ancestral samples.
    pub code: Option<CodePoint<P>>,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<P = f64> {
    pub entries: Vec<SampleEntry<P>>,
    pub shift: Option<CodePoint<P>>,
    pub method: Method,
    pub chain: ModifierChain,
}

impl<P> SampleSet<P> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sequences(&self) -> impl Iterator<Item = &[TokenId]> {
        self.entries.iter().map(|e| e.sequence.as_slice())
    }
}

fn decode_with_logprob<P: ModelProb, M: SequenceModel + ?Sized>(
    model: &M,
    code: &CodePoint<P>,
    chain: &ModifierChain,
) -> Result<(Vec<TokenId>, f64)> {
    let mut seq = Vec::new();
    let mut logprob = 0.0;
    let mut c = code.clone();
    while !model.is_complete(&seq) {
        let dist = conditional_modified::<P, _>(model, &seq, chain)?;
        let parts = cdf_intervals(&dist);
        let cell = locate(&c, &parts);
        logprob += dist.probs()[cell.symbol].to_f64().ln();
        seq.push(cell.symbol);
        c = renormalize(&c, &cell.interval)?;
    }
    Ok((seq, logprob))
}

/// Decodes one code point into a complete sequence.
pub fn decode_code<P: ModelProb, M: SequenceModel + ?Sized>(
    model: &M,
    code: &CodePoint<P>,
    chain: &ModifierChain,
) -> Result<Vec<TokenId>> {
    decode_with_logprob(model, code, chain).map(|(s, _)| s)
}

/// The exact codebook interval of a sequence or prefix. Its width is the
/// sequence probability.
pub fn code_interval_of_sequence<M: SequenceModel + ?Sized>(
    model: &M,
    seq: &[TokenId],
    chain: &ModifierChain,
) -> Result<UnitInterval<Rational>> {
    let mut lo = Rational::zero();
    let mut width = Rational::one();
    for t in 0..seq.len() {
        let dist = conditional_modified::<Rational, _>(model, &seq[..t], chain)?;
        let token = seq[t];
        let p = dist
            .probs()
            .get(token)
            .ok_or_else(|| Error::InvalidSequence(format!("token {token} out of vocabulary")))?;
        if p.is_zero() {
            return Err(Error::EmptyInterval);
        }
        let below = dist.probs()[..token].iter().fold(Rational::zero(), |acc, q| acc + q);
        lo += &width * below;
        width *= p;
    }
    let hi = &lo + width;
    UnitInterval::new(lo, hi)
}

/// Decodes `codes` on `worker_count` threads. Output order and content do
/// not depend on `worker_count`.
pub fn parallel_decode<P: ModelProb, M: SequenceModel + ?Sized>(
    model: &M,
    codes: &[CodePoint<P>],
    chain: &ModifierChain,
    worker_count: usize,
) -> Result<SampleSet<P>> {
    if worker_count == 0 {
        return Err(Error::param("worker_count must be at least 1"));
    }
    let decode_one = |c: &CodePoint<P>| {
        decode_with_logprob(model, c, chain).map(|(sequence, logprob)| SampleEntry {
            sequence,
            code: Some(c.clone()),
            logprob,
        })
    };
    let entries = if worker_count == 1 || codes.len() < 2 {
        codes.iter().map(decode_one).collect::<Result<Vec<_>>>()?
    } else {
        let chunk = codes.len().div_ceil(worker_count);
        let parts: Vec<Vec<Result<SampleEntry<P>>>> = std::thread::scope(|s| {
            let handles: Vec<_> = codes
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(decode_one).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("decode worker panicked"))
                .collect()
        });
        parts.into_iter().flatten().collect::<Result<Vec<_>>>()?
    };
    Ok(SampleSet {
        entries,
        shift: None,
        method: Method::Arithmetic,
        chain: chain.clone(),
    })
}

/// Decodes every code of the shifted lattice. Entries come back sorted by code.
pub fn arithmetic_sample<P: ModelProb, M: SequenceModel + ?Sized>(
    model: &M,
    spec: &LatticeSpec<P>,
    chain: &ModifierChain,
) -> Result<SampleSet<P>> {
    arithmetic_sample_with_workers(model, spec, chain, 1)
}

pub fn arithmetic_sample_with_workers<P: ModelProb, M: SequenceModel + ?Sized>(
    model: &M,
    spec: &LatticeSpec<P>,
    chain: &ModifierChain,
    worker_count: usize,
) -> Result<SampleSet<P>> {
    let mut codes = lattice_codes(spec);
    codes.sort_by(|a, b| a.partial_cmp(b).expect("codes are ordered"));
    let mut set = parallel_decode(model, &codes, chain, worker_count)?;
    set.shift = Some(spec.shift().clone());
    Ok(set)
}

/// `n` independent uniform codes from a seeded generator.
pub fn uniform_codes(n: usize, seed: u64) -> Vec<CodePoint<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| CodePoint::new(rng.gen::<f64>()).expect("gen::<f64> is in [0, 1)"))
        .collect()
}

/// Ancestral sampling, as [`decode_code`] on i.i.d. uniform codes.
pub fn ancestral_sample<M: SequenceModel + ?Sized>(
    model: &M,
    n: usize,
    seed: u64,
    chain: &ModifierChain,
) -> Result<SampleSet<f64>> {
    ancestral_sample_with_workers(model, n, seed, chain, 1)
}

pub fn ancestral_sample_with_workers<M: SequenceModel + ?Sized>(
    model: &M,
    n: usize,
    seed: u64,
    chain: &ModifierChain,
    worker_count: usize,
) -> Result<SampleSet<f64>> {
    if n == 0 {
        return Err(Error::param("ancestral sampling needs n >= 1"));
    }
    let codes = uniform_codes(n, seed);
    let mut set = parallel_decode(model, &codes, chain, worker_count)?;
    for e in &mut set.entries {
        e.code = None;
    }
    set.method = Method::Ancestral;
    Ok(set)
}
