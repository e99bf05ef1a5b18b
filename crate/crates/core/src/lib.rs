//! Arithmetic sampling for autoregressive sequence models.
//!
//! A sequence model implicitly defines an arithmetic codebook: every
//! complete sequence owns a subinterval of `[0, 1)` whose width is its
//! probability. Decoding a uniform code point is ancestral sampling;
//! decoding a randomly shifted lattice of `N` code points gives a sample set
//! that is unbiased for expectations yet spreads across the codebook, so it
//! is more diverse and lower-variance than `N` independent draws.
//!
//! * [`codebook`] — categorical interval layout, code points, lattices.
//! * [`models`] — the [`SequenceModel`](models::SequenceModel) interface,
//!   concrete toy models, and logit modifiers.
//! * [`sampler`] — decoding and batch sampling.
//! * [`oracle`] — exhaustive exact ground truth for small models.
//! * [`evaluation`] — estimators, BLEU, n-gram diversity, step-function
//!   variance experiments.
//! * [`cli`] — the experiment runner behind the `arith-sampling` binary.

pub mod cli;
pub mod codebook;
pub mod decimal;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod oracle;
pub mod sampler;

pub use codebook::{CodePoint, LatticeMode, LatticeSpec, Rational};
pub use error::{Error, Result};
pub use models::{ModifierChain, SequenceModel, TokenId, Vocabulary};
pub use sampler::{ancestral_sample, arithmetic_sample, decode_code, Method, SampleSet};
