//! Estimators, sample-set metrics, and the step-function variance experiments.

use std::collections::HashMap;
use std::hash::Hash;

use num::{BigInt, One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codebook::{lattice_codes, CodePoint, LatticeMode, LatticeSpec, Prob, Rational, UnitInterval};
use crate::decimal::parse_rational;
use crate::error::{Error, Result};
use crate::models::{ModifierChain, SequenceModel, TokenId};
use crate::sampler::{ancestral_sample, arithmetic_sample, Method, SampleSet};

/// Mixes a base seed with a stream index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The shift `b` drawn for a given seed.
pub fn shift_from_seed(seed: u64) -> CodePoint<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CodePoint::new(rng.gen::<f64>()).expect("gen::<f64> is in [0, 1)")
}

pub fn sample_mean<P, F>(samples: &SampleSet<P>, reward: F) -> Result<f64>
where
    F: Fn(&[TokenId]) -> f64,
{
    if samples.is_empty() {
        return Err(Error::param("sample mean of an empty sample set"));
    }
    let total: f64 = samples.sequences().map(reward).sum();
    Ok(total / samples.len() as f64)
}

/// Mean, minimum and maximum reward over a sample set.
pub fn reward_summary<P, F>(samples: &SampleSet<P>, reward: F) -> Result<(f64, f64, f64)>
where
    F: Fn(&[TokenId]) -> f64,
{
    if samples.is_empty() {
        return Err(Error::param("reward summary of an empty sample set"));
    }
    let values: Vec<f64> = samples.sequences().map(reward).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((mean, min, max))
}

/// Sample standard deviation (`n - 1` denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Linear-interpolation percentile of `values`, `q` in `[0, 100]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub method: Method,
    pub n: usize,
    pub reps: usize,
    pub mean: f64,
    pub sd: f64,
    pub percentile_2_5: f64,
    pub percentile_97_5: f64,
}

/// Repeats the sample-mean estimator `reps` times with independent shifts
/// (arithmetic) or seeds (ancestral). Repetition `r` draws its randomness
/// from `derive_seed(seed, r)`.
pub fn estimator_sd<M, F>(
    model: &M,
    method: Method,
    n: usize,
    chain: &ModifierChain,
    reward: F,
    reps: usize,
    seed: u64,
) -> Result<EstimatorReport>
where
    M: SequenceModel + ?Sized,
    F: Fn(&[TokenId]) -> f64,
{
    if reps < 2 {
        return Err(Error::param("estimator_sd needs at least two repetitions"));
    }
    let mut estimates = Vec::with_capacity(reps);
    for r in 0..reps {
        let rep_seed = derive_seed(seed, r as u64);
        let set = match method {
            Method::Arithmetic => {
                let spec = LatticeSpec::new(n, LatticeMode::Paper, shift_from_seed(rep_seed))?;
                arithmetic_sample(model, &spec, chain)?
            }
            Method::Ancestral => ancestral_sample(model, n, rep_seed, chain)?,
        };
        estimates.push(sample_mean(&set, &reward)?);
    }
    Ok(EstimatorReport {
        method,
        n,
        reps,
        mean: estimates.iter().sum::<f64>() / reps as f64,
        sd: sample_sd(&estimates),
        percentile_2_5: percentile(&estimates, 2.5),
        percentile_97_5: percentile(&estimates, 97.5),
    })
}

fn strip(seq: &[TokenId], eos: Option<TokenId>) -> &[TokenId] {
    match (seq.last(), eos) {
        (Some(&last), Some(e)) if last == e => &seq[..seq.len() - 1],
        _ => seq,
    }
}

/// `d_n` for `n = 1..=max_n`: distinct n-grams over total n-grams across the
/// whole set. A trailing EOS is not a token for this purpose.
pub fn ngram_diversity_terms<'a, I>(sequences: I, max_n: usize, eos: Option<TokenId>) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [TokenId]>,
{
    let seqs: Vec<&[TokenId]> = sequences.into_iter().map(|s| strip(s, eos)).collect();
    (1..=max_n)
        .map(|n| {
            let mut total = 0usize;
            let mut unique = std::collections::HashSet::new();
            for s in &seqs {
                for gram in s.windows(n) {
                    total += 1;
                    unique.insert(gram);
                }
            }
            if total == 0 {
                0.0
            } else {
                unique.len() as f64 / total as f64
            }
        })
        .collect()
}

pub fn ngram_diversity<'a, I>(sequences: I, max_n: usize, eos: Option<TokenId>) -> f64
where
    I: IntoIterator<Item = &'a [TokenId]>,
{
    ngram_diversity_terms(sequences, max_n, eos).iter().sum()
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Add-one smoothed sentence BLEU with brevity penalty
/// `exp(min(0, 1 - |ref| / |hyp|))`.
pub fn sentence_bleu<T: Eq + Hash>(hypothesis: &[T], reference: &[T], max_n: usize) -> f64 {
    if hypothesis.is_empty() || max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let hyp = ngram_counts(hypothesis, n);
        let refs = ngram_counts(reference, n);
        let total = hypothesis.len().saturating_sub(n - 1);
        let matched: usize = hyp
            .iter()
            .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
            .sum();
        log_sum += ((matched as f64 + 1.0) / (total as f64 + 1.0)).ln();
    }
    let bp = (1.0 - reference.len() as f64 / hypothesis.len() as f64).min(0.0).exp();
    bp * (log_sum / max_n as f64).exp()
}

/// Piecewise-constant function on `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<P> {
    pieces: Vec<(UnitInterval<P>, P)>,
}

impl<P: Prob> StepFunction<P> {
    /// Pieces must tile `[0, 1)` in order.
    pub fn new(pieces: Vec<(UnitInterval<P>, P)>) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return Err(Error::param("step function has no pieces"));
        };
        if !first.0.lo().is_zero() || !pieces.last().expect("non-empty").0.hi().is_one() {
            return Err(Error::param("step function must cover [0, 1)"));
        }
        if pieces.windows(2).any(|w| w[0].0.hi() != w[1].0.lo()) {
            return Err(Error::param("step function pieces must be contiguous and ordered"));
        }
        Ok(StepFunction { pieces })
    }

    /// Pieces between consecutive `breaks` (which must start at 0 and end at 1).
    pub fn from_breakpoints(breaks: &[P], coefficients: &[P]) -> Result<Self> {
        if breaks.len() != coefficients.len() + 1 {
            return Err(Error::param("need one more breakpoint than coefficients"));
        }
        let pieces = breaks
            .windows(2)
            .zip(coefficients)
            .map(|(w, a)| Ok((UnitInterval::new(w[0].clone(), w[1].clone())?, a.clone())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pieces)
    }

    pub fn pieces(&self) -> &[(UnitInterval<P>, P)] {
        &self.pieces
    }

    pub fn integral(&self) -> P {
        self.pieces
            .iter()
            .fold(P::zero(), |acc, (iv, a)| acc + iv.width() * a.clone())
    }
}

impl StepFunction<Rational> {
    /// Lines of `lo hi coefficient`, decimal strings; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pieces = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::input(format!("step function line {}: expected `lo hi coefficient`", no + 1)));
            }
            let lo = parse_rational(fields[0])?;
            let hi = parse_rational(fields[1])?;
            let a = parse_rational(fields[2])?;
            pieces.push((UnitInterval::new(lo, hi).map_err(|e| Error::input(e.to_string()))?, a));
        }
        Self::new(pieces).map_err(|e| Error::input(e.to_string()))
    }

    pub fn to_fast(&self) -> StepFunction<f64> {
        StepFunction {
            pieces: self
                .pieces
                .iter()
                .map(|(iv, a)| {
                    let lo = iv.lo().to_f64();
                    let hi = iv.hi().to_f64();
                    (UnitInterval::new(lo, hi).expect("same ordering"), a.to_f64())
                })
                .collect(),
        }
    }
}

/// Coefficient of the piece containing `c`; boundaries belong to the upper piece.
pub fn eval_step_function<'a, P: Prob>(f: &'a StepFunction<P>, c: &P) -> &'a P {
    let idx = f.pieces.partition_point(|(iv, _)| iv.hi() <= c);
    &f.pieces[idx.min(f.pieces.len() - 1)].1
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepVarianceReport {
    pub n_points: usize,
    /// Empirical variance of the shifted-lattice estimator.
    pub lattice_var: f64,
    /// Empirical variance of the i.i.d. Monte Carlo estimator with `n_points` points.
    pub mc_var: f64,
    pub exact_integral: f64,
    /// `lattice_var` before rounding to `f64`.
    pub lattice_var_exact: Rational,
    /// Whether every lattice estimate hit the integral exactly.
    pub lattice_exact_every_shift: bool,
}

fn exact_sample_variance(values: &[Rational]) -> Rational {
    if values.len() < 2 {
        return Rational::zero();
    }
    let n = Rational::from_integer(BigInt::from(values.len()));
    let mean: Rational = values.iter().sum::<Rational>() / &n;
    let ss: Rational = values.iter().map(|v| (v - &mean) * (v - &mean)).sum();
    ss / (n - Rational::one())
}

fn exact_uniform(rng: &mut impl Rng) -> Rational {
    Rational::from_float(rng.gen::<f64>()).expect("finite")
}

/// Shifted lattice versus naive Monte Carlo on a step function, both with
/// `n_points` evaluations per estimate, over `reps` repetitions. Lattice
/// arithmetic is exact.
pub fn step_variance_experiment(
    f: &StepFunction<Rational>,
    n_points: usize,
    mode: LatticeMode,
    reps: usize,
    seed: u64,
) -> Result<StepVarianceReport> {
    if reps < 2 {
        return Err(Error::param("step_variance_experiment needs at least two repetitions"));
    }
    let integral = f.integral();
    let scale = Rational::from_integer(BigInt::from(n_points));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut lattice = Vec::with_capacity(reps);
    for _ in 0..reps {
        let spec = LatticeSpec::new(n_points, mode, CodePoint::new(exact_uniform(&mut rng))?)?;
        let sum: Rational = lattice_codes(&spec)
            .iter()
            .map(|c| eval_step_function(f, c.value()).clone())
            .sum();
        lattice.push(sum / &scale);
    }
    let lattice_exact_every_shift = lattice.iter().all(|v| *v == integral);
    let lattice_var_exact = exact_sample_variance(&lattice);

    let fast = f.to_fast();
    let mc: Vec<f64> = (0..reps)
        .map(|_| {
            let total: f64 = (0..n_points).map(|_| *eval_step_function(&fast, &rng.gen::<f64>())).sum();
            total / n_points as f64
        })
        .collect();
    let mc_sd = sample_sd(&mc);

    Ok(StepVarianceReport {
        n_points,
        lattice_var: lattice_var_exact.to_f64(),
        mc_var: mc_sd * mc_sd,
        exact_integral: integral.to_f64(),
        lattice_var_exact,
        lattice_exact_every_shift,
    })
}

fn in_bucket(c: f64, k: usize, n: usize) -> bool {
    let lo = k as f64 / n as f64;
    let hi = (k + 1) as f64 / n as f64;
    lo <= c && c < hi
}

/// Monte Carlo estimates of the two pairwise-covariance sums for `n + 1`
/// lattice points `u + i/n (mod 1)`, `i = 0..=n`:
///
/// * on:  `sum_{i != j} Cov[1_[0,1/n)(c_i), 1_[0,1/n)(c_j)]`
/// * off: `sum_{i != j} Cov[1_[0,1/n)(c_i), 1_[1/n,2/n)(c_j)]`
pub fn covariance_constants(n: usize, reps: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::param("covariance_constants needs n >= 3"));
    }
    if reps == 0 {
        return Err(Error::param("covariance_constants needs reps >= 1"));
    }
    let mu = 1.0 / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut on, mut off) = (0.0, 0.0);
    for _ in 0..reps {
        let u: f64 = rng.gen();
        let (mut sum_l, mut sum_r, mut sq_l, mut cross) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..=n {
            let c = (u + i as f64 / n as f64).fract();
            let l = if in_bucket(c, 0, n) { 1.0 } else { 0.0 } - mu;
            let r = if in_bucket(c, 1, n) { 1.0 } else { 0.0 } - mu;
            sum_l += l;
            sum_r += r;
            sq_l += l * l;
            cross += l * r;
        }
        on += sum_l * sum_l - sq_l;
        off += sum_l * sum_r - cross;
    }
    Ok((on / reps as f64, off / reps as f64))
}

/// The same two sums in closed form, obtained by conditioning on where the
/// duplicated lattice point lands (first bucket, second bucket, elsewhere)
/// and counting point pairs by bucket.
pub fn covariance_constants_exact(n: usize) -> Result<(Rational, Rational)> {
    if n < 3 {
        return Err(Error::param("covariance_constants_exact needs n >= 3"));
    }
    let big = |x: i64| Rational::from_integer(BigInt::from(x));
    let nn = n as i64;
    let inv_n2 = Rational::new(BigInt::one(), BigInt::from(nn * nn));
    let s1 = big((nn - 1) * (nn - 1)) * &inv_n2;
    let s2 = big(1 - nn) * &inv_n2;
    let s3 = inv_n2.clone();
    // (probability, l, r, o)
    let scenarios = [
        (Rational::new(1.into(), nn.into()), 2i64, 1i64, nn - 2),
        (Rational::new(1.into(), nn.into()), 1, 2, nn - 2),
        (Rational::new((nn - 2).into(), nn.into()), 1, 1, nn - 1),
    ];
    let mut on = Rational::zero();
    let mut off = Rational::zero();
    for (p, l, r, o) in scenarios {
        let e = r + o;
        on += &p * (big(l * (l - 1)) * &s1 + big(2 * l * e) * &s2 + big(e * (e - 1)) * &s3);
        off += &p
            * (big(l * r) * &s1
                + big(l * (l - 1) + r * (r - 1) + l * o + r * o) * &s2
                + big(o * (o - 1) + l * r + l * o + r * o) * &s3);
    }
    Ok((on, off))
}

/// `c_off * 1 1^T + (c_on - c_off) I`, size `n`.
pub fn covariance_matrix(n: usize, c_on: &Rational, c_off: &Rational) -> Vec<Vec<Rational>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { c_on.clone() } else { c_off.clone() }).collect())
        .collect()
}

/// Exact determinant by fraction-preserving Gaussian elimination.
pub fn determinant(mut m: Vec<Vec<Rational>>) -> Rational {
    let n = m.len();
    let mut det = Rational::one();
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Rational::zero();
        };
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col].clone();
        det *= &p;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &p;
            for c in col..n {
                let delta = &factor * &m[col][c];
                m[r][c] -= delta;
            }
        }
    }
    det
}

/// Adds `shift` to the diagonal.
pub fn shifted_diagonal(mut m: Vec<Vec<Rational>>, shift: &Rational) -> Vec<Vec<Rational>> {
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += shift;
    }
    m
}

/// Whether `x` and `y` agree to within `tol` in absolute value.
pub fn within(x: &Rational, y: &Rational, tol: &Rational) -> bool {
    (x - y).abs() <= *tol
}
