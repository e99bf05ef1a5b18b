//! Interval arithmetic on the unit interval.
//!
//! A categorical distribution over an ordered vocabulary is laid out as a
//! partition of `[0, 1)` into half-open intervals whose widths are the symbol
//! probabilities. A code point picks the symbol whose interval contains it;
//! renormalizing the code into that interval yields the code for the next
//! decoding step.
//!
//! Everything here is generic over [`Prob`], which has two implementations:
//! `f64` for the fast path and [`Rational`] for exact arithmetic.

use std::fmt::Debug;
use std::sync::atomic::{AtomicU64, Ordering};

use num::{BigInt, BigRational, Num, One, Zero};

use crate::decimal::rational_from_f64_decimal;
use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Tolerance on the total mass of a fast-path distribution.
pub const FAST_SUM_TOLERANCE: f64 = 1e-9;

/// A probability / code scalar.
pub trait Prob: Num + Clone + Debug + PartialOrd + Send + Sync + 'static {
    /// `num / den`.
    fn from_ratio(num: u64, den: u64) -> Self;
    /// Reads a user parameter (nucleus mass, step coefficient) at its decimal value.
    fn from_param(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Whether `self`, a total probability mass, counts as one.
    fn is_unit_total(&self) -> bool;
    /// `self >= threshold`, with slack on the fast path.
    fn at_least(&self, threshold: &Self) -> bool;
    /// `self^(1/t)` for a temperature `t > 0`.
    fn temper(&self, t: f64) -> Self;
    /// Pulls a value that rounded up to 1 back into `[0, 1)`.
    fn below_one(self) -> Self;
}

impl Prob for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn from_param(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_unit_total(&self) -> bool {
        (self - 1.0).abs() <= FAST_SUM_TOLERANCE
    }

    fn at_least(&self, threshold: &Self) -> bool {
        *self >= threshold - 1e-12
    }

    fn temper(&self, t: f64) -> Self {
        if t == 1.0 {
            *self
        } else {
            self.powf(1.0 / t)
        }
    }

    fn below_one(self) -> Self {
        if self >= 1.0 {
            1.0 - f64::EPSILON / 2.0
        } else {
            self.max(0.0)
        }
    }
}

impl Prob for Rational {
    fn from_ratio(num: u64, den: u64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_param(x: f64) -> Self {
        rational_from_f64_decimal(x)
    }

    fn to_f64(&self) -> f64 {
        num::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_unit_total(&self) -> bool {
        self.is_one()
    }

    fn at_least(&self, threshold: &Self) -> bool {
        self >= threshold
    }

    fn temper(&self, t: f64) -> Self {
        if t == 1.0 || self.is_zero() {
            return self.clone();
        }
        let inv = 1.0 / t;
        if inv.fract() == 0.0 && inv <= 64.0 {
            return num::pow(self.clone(), inv as usize);
        }
        // Irrational powers have no exact form; snap the fast value.
        Rational::from_float(num::ToPrimitive::to_f64(self).unwrap_or(0.0).powf(inv))
            .unwrap_or_else(Rational::zero)
    }

    fn below_one(self) -> Self {
        self
    }
}

/// A position in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct CodePoint<P>(P);

impl<P: Prob> CodePoint<P> {
    pub fn new(value: P) -> Result<Self> {
        if !(value >= P::zero() && value < P::one()) {
            return Err(Error::param(format!("code point {value:?} outside [0, 1)")));
        }
        Ok(CodePoint(value))
    }

    pub fn value(&self) -> &P {
        &self.0
    }

    pub fn into_inner(self) -> P {
        self.0
    }
}

impl CodePoint<f64> {
    /// The exact rational value of a fast code.
    pub fn to_exact(&self) -> CodePoint<Rational> {
        CodePoint(Rational::from_float(self.0).expect("finite code"))
    }
}

impl CodePoint<Rational> {
    pub fn to_fast(&self) -> CodePoint<f64> {
        CodePoint(self.0.to_f64().below_one())
    }
}

/// Half-open `[lo, hi)` with `0 <= lo < hi <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitInterval<P> {
    lo: P,
    hi: P,
}

impl<P: Prob> UnitInterval<P> {
    pub fn new(lo: P, hi: P) -> Result<Self> {
        if !(P::zero() <= lo && lo < hi && hi <= P::one()) {
            return Err(Error::param(format!("bad unit interval [{lo:?}, {hi:?})")));
        }
        Ok(UnitInterval { lo, hi })
    }

    pub fn full() -> Self {
        UnitInterval {
            lo: P::zero(),
            hi: P::one(),
        }
    }

    pub fn lo(&self) -> &P {
        &self.lo
    }

    pub fn hi(&self) -> &P {
        &self.hi
    }

    pub fn width(&self) -> P {
        self.hi.clone() - self.lo.clone()
    }

    pub fn contains(&self, c: &P) -> bool {
        &self.lo <= c && c < &self.hi
    }

    pub fn midpoint(&self) -> P {
        (self.lo.clone() + self.hi.clone()) / (P::one() + P::one())
    }
}

/// A distribution over an ordered vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical<P> {
    probs: Vec<P>,
}

impl<P: Prob> Categorical<P> {
    pub fn new(probs: Vec<P>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= P::zero())) {
            return Err(Error::InvalidDistribution(format!("negative or NaN entry {p:?}")));
        }
        let total = probs.iter().fold(P::zero(), |acc, p| acc + p.clone());
        if !total.is_unit_total() {
            return Err(Error::InvalidDistribution(format!("entries sum to {total:?}")));
        }
        Ok(Categorical { probs })
    }

    /// Scales nonnegative weights to unit mass.
    pub fn from_weights(weights: Vec<P>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= P::zero())) {
            return Err(Error::InvalidDistribution("negative or NaN weight".into()));
        }
        let total = weights.iter().fold(P::zero(), |acc, p| acc + p.clone());
        if !(total > P::zero()) {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total.clone()).collect())
    }

    pub fn probs(&self) -> &[P] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_probs(self) -> Vec<P> {
        self.probs
    }
}

/// One cell of a CDF partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolInterval<P> {
    pub symbol: usize,
    pub interval: UnitInterval<P>,
}

/// Lays the distribution out on `[0, 1)` in vocabulary order.
///
/// Zero-probability symbols get no interval. The last interval's upper bound
/// is set to exactly 1 so that drift in the running sum never leaves a code
/// without a home.
pub fn cdf_intervals<P: Prob>(dist: &Categorical<P>) -> Vec<SymbolInterval<P>> {
    let last = dist.probs.iter().rposition(|p| *p > P::zero());
    let mut out = Vec::with_capacity(dist.len());
    let mut running = P::zero();
    for (symbol, p) in dist.probs.iter().enumerate() {
        if !(*p > P::zero()) {
            continue;
        }
        let lo = running.clone();
        running = running + p.clone();
        let hi = if Some(symbol) == last {
            P::one()
        } else {
            running.clone()
        };
        // an entry below one ulp of its offset vanishes on the fast path
        if lo < hi && lo < P::one() {
            let hi = if hi > P::one() { P::one() } else { hi };
            out.push(SymbolInterval {
                symbol,
                interval: UnitInterval { lo, hi },
            });
        }
    }
    out
}

static LOCATE_FALLBACKS: AtomicU64 = AtomicU64::new(0);

/// How many times [`locate`] had to fall back to the last interval.
pub fn locate_fallback_count() -> u64 {
    LOCATE_FALLBACKS.load(Ordering::Relaxed)
}

/// Finds the interval holding `c` under the half-open rule.
///
/// # Panics
///
/// If `intervals` is empty.
pub fn locate<'a, P: Prob>(c: &CodePoint<P>, intervals: &'a [SymbolInterval<P>]) -> &'a SymbolInterval<P> {
    let c = c.value();
    // first interval whose lo exceeds c, minus one
    let idx = intervals.partition_point(|si| &si.interval.lo <= c);
    if idx > 0 && intervals[idx - 1].interval.contains(c) {
        return &intervals[idx - 1];
    }
    LOCATE_FALLBACKS.fetch_add(1, Ordering::Relaxed);
    intervals.last().expect("cdf partition is never empty")
}

/// Maps `c` from `interval` affinely onto `[0, 1)`.
pub fn renormalize<P: Prob>(c: &CodePoint<P>, interval: &UnitInterval<P>) -> Result<CodePoint<P>> {
    if !interval.contains(c.value()) {
        return Err(Error::ContractViolation(format!(
            "code {:?} not in [{:?}, {:?})",
            c.value(),
            interval.lo,
            interval.hi
        )));
    }
    let v = (c.value().clone() - interval.lo.clone()) / interval.width();
    Ok(CodePoint(v.below_one()))
}

/// `(c + b) mod 1`.
pub fn shift_mod1<P: Prob>(c: &CodePoint<P>, b: &CodePoint<P>) -> CodePoint<P> {
    let s = c.value().clone() + b.value().clone();
    if s >= P::one() {
        CodePoint((s - P::one()).below_one())
    } else {
        CodePoint(s)
    }
}

/// Spacing of a shifted lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LatticeMode {
    /// `i/(N+1) + b`, `i = 1..=N`.
    #[default]
    Paper,
    /// `i/N + b`, `i = 0..N`.
    Uniform,
}

impl std::str::FromStr for LatticeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(LatticeMode::Paper),
            "uniform" => Ok(LatticeMode::Uniform),
            other => Err(Error::param(format!("unknown lattice mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for LatticeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LatticeMode::Paper => "paper",
            LatticeMode::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec<P> {
    n: usize,
    mode: LatticeMode,
    shift: CodePoint<P>,
}

impl<P: Prob> LatticeSpec<P> {
    pub fn new(n: usize, mode: LatticeMode, shift: CodePoint<P>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("lattice needs at least one code"));
        }
        Ok(LatticeSpec { n, mode, shift })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> LatticeMode {
        self.mode
    }

    pub fn shift(&self) -> &CodePoint<P> {
        &self.shift
    }
}

/// The shifted lattice, in index order.
pub fn lattice_codes<P: Prob>(spec: &LatticeSpec<P>) -> Vec<CodePoint<P>> {
    let n = spec.n as u64;
    let (indices, den) = match spec.mode {
        LatticeMode::Paper => (1..=n, n + 1),
        LatticeMode::Uniform => (0..=n - 1, n),
    };
    indices
        .map(|i| shift_mod1(&CodePoint(P::from_ratio(i, den)), &spec.shift))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn exact(probs: &[(i64, i64)]) -> Categorical<Rational> {
        Categorical::new(probs.iter().map(|&(n, d)| q(n, d)).collect()).unwrap()
    }

    fn code(x: f64) -> CodePoint<f64> {
        CodePoint::new(x).unwrap()
    }

    #[test]
    fn cdf_two_symbols() {
        let parts = cdf_intervals(&exact(&[(3, 5), (2, 5)]));
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].symbol, 0);
        assert_eq!(parts[0].interval, UnitInterval::new(q(0, 1), q(3, 5)).unwrap());
        assert_eq!(parts[1].interval, UnitInterval::new(q(3, 5), q(1, 1)).unwrap());
    }

    #[test]
    fn cdf_single_symbol_is_whole_interval() {
        let parts = cdf_intervals(&Categorical::new(vec![1.0]).unwrap());
        assert_eq!(parts, vec![SymbolInterval { symbol: 0, interval: UnitInterval::full() }]);
    }

    #[test]
    fn cdf_skips_zero_symbols() {
        let parts = cdf_intervals(&exact(&[(1, 5), (0, 1), (3, 10), (1, 2)]));
        let got: Vec<_> = parts
            .iter()
            .map(|s| (s.symbol, s.interval.lo().clone(), s.interval.hi().clone()))
            .collect();
        assert_eq!(
            got,
            vec![(0, q(0, 1), q(1, 5)), (2, q(1, 5), q(1, 2)), (3, q(1, 2), q(1, 1))]
        );
    }

    #[test]
    fn cdf_clamps_last_bound_on_fast_path() {
        let parts = cdf_intervals(&Categorical::new(vec![0.1; 10]).unwrap());
        assert_eq!(*parts.last().unwrap().interval.hi(), 1.0);
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(Categorical::new(vec![0.5, 0.4]).is_err());
        assert!(Categorical::new(vec![1.5, -0.5]).is_err());
        assert!(Categorical::<f64>::new(vec![]).is_err());
        assert!(Categorical::new(vec![q(1, 2), q(1, 3)]).is_err());
        assert!(Categorical::new(vec![0.5, 0.5 + 1e-12]).is_ok());
    }

    #[test]
    fn locate_half_open() {
        let parts = cdf_intervals(&Categorical::new(vec![0.6, 0.4]).unwrap());
        assert_eq!(locate(&code(0.5), &parts).symbol, 0);
        assert_eq!(locate(&code(0.6), &parts).symbol, 1);
        assert_eq!(locate(&code(0.999), &parts).symbol, 1);
        assert_eq!(locate(&code(0.0), &parts).symbol, 0);
    }

    #[test]
    fn renormalize_examples() {
        let a = UnitInterval::new(0.0, 0.6).unwrap();
        let b = UnitInterval::new(0.6, 1.0).unwrap();
        assert!((renormalize(&code(0.3), &a).unwrap().into_inner() - 0.5).abs() < 1e-15);
        assert_eq!(renormalize(&code(0.6), &b).unwrap().into_inner(), 0.0);
        assert!((renormalize(&code(0.8), &b).unwrap().into_inner() - 0.5).abs() < 1e-15);
        assert!(matches!(renormalize(&code(0.7), &a), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn renormalize_exact() {
        let i = UnitInterval::new(q(0, 1), q(3, 5)).unwrap();
        let c = CodePoint::new(q(3, 10)).unwrap();
        assert_eq!(renormalize(&c, &i).unwrap().into_inner(), q(1, 2));
    }

    #[test]
    fn renormalize_never_reaches_one() {
        let i = UnitInterval::new(0.0, 0.3).unwrap();
        let c = code(0.3 - 1e-17_f64.max(f64::EPSILON * 0.3 / 2.0));
        let out = renormalize(&c, &i).unwrap();
        assert!(*out.value() < 1.0);
    }

    #[test]
    fn lattice_examples() {
        let paper = LatticeSpec::new(1, LatticeMode::Paper, code(0.0)).unwrap();
        assert_eq!(lattice_codes(&paper), vec![code(0.5)]);

        let uniform = LatticeSpec::new(4, LatticeMode::Uniform, code(0.0)).unwrap();
        let got: Vec<f64> = lattice_codes(&uniform).into_iter().map(CodePoint::into_inner).collect();
        assert_eq!(got, vec![0.0, 0.25, 0.5, 0.75]);

        let wrap = LatticeSpec::new(2, LatticeMode::Uniform, code(0.9)).unwrap();
        let got: Vec<f64> = lattice_codes(&wrap).into_iter().map(CodePoint::into_inner).collect();
        assert_eq!(got[0], 0.9);
        assert!((got[1] - 0.4).abs() < 1e-15);

        assert!(LatticeSpec::new(0, LatticeMode::Paper, code(0.0)).is_err());
    }

    #[test]
    fn lattice_exact_paper_mode() {
        let spec = LatticeSpec::new(2, LatticeMode::Paper, CodePoint::new(q(1, 10)).unwrap()).unwrap();
        let got: Vec<_> = lattice_codes(&spec).into_iter().map(CodePoint::into_inner).collect();
        assert_eq!(got, vec![q(13, 30), q(23, 30)]);
    }

    #[test]
    fn shift_examples() {
        assert!((shift_mod1(&code(0.7), &code(0.5)).into_inner() - 0.2).abs() < 1e-15);
        assert_eq!(shift_mod1(&code(0.3), &code(0.0)).into_inner(), 0.3);
        assert_eq!(shift_mod1(&code(0.0), &code(0.999)).into_inner(), 0.999);
    }

    #[test]
    fn code_point_bounds() {
        assert!(CodePoint::new(1.0).is_err());
        assert!(CodePoint::new(-0.1).is_err());
        assert!(CodePoint::new(f64::NAN).is_err());
        assert!(CodePoint::new(q(1, 1)).is_err());
    }

    #[test]
    fn exact_temper_integer_inverse() {
        assert_eq!(q(4, 5).temper(0.5), q(16, 25));
        assert_eq!(q(4, 5).temper(1.0), q(4, 5));
    }
}
