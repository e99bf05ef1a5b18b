//! Temperature, top-k and nucleus transforms on conditional distributions.

use serde::{Deserialize, Serialize};

use crate::codebook::{Categorical, Prob};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modifier {
    Temperature(f64),
    TopK(usize),
    Nucleus(f64),
}

impl Modifier {
    fn validate(&self) -> Result<()> {
        match *self {
            Modifier::Temperature(t) if !(t > 0.0 && t.is_finite()) => {
                Err(Error::param(format!("temperature must be positive, got {t}")))
            }
            Modifier::TopK(0) => Err(Error::param("top_k must be at least 1")),
            Modifier::Nucleus(p) if !(p > 0.0 && p <= 1.0) => {
                Err(Error::param(format!("nucleus p must be in (0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }

    pub fn apply<P: Prob>(&self, dist: &Categorical<P>) -> Result<Categorical<P>> {
        self.validate()?;
        match *self {
            Modifier::Temperature(t) => apply_temperature(dist, t),
            Modifier::TopK(k) => apply_top_k(dist, k),
            Modifier::Nucleus(p) => apply_nucleus(dist, p),
        }
    }
}

impl std::fmt::Display for Modifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modifier::Temperature(t) => write!(f, "temperature({t})"),
            Modifier::TopK(k) => write!(f, "top_k({k})"),
            Modifier::Nucleus(p) => write!(f, "nucleus({p})"),
        }
    }
}

/// Modifiers applied left to right.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModifierChain(Vec<Modifier>);

impl ModifierChain {
    pub fn new(mods: Vec<Modifier>) -> Result<Self> {
        for m in &mods {
            m.validate()?;
        }
        Ok(ModifierChain(mods))
    }

    pub fn identity() -> Self {
        ModifierChain(Vec::new())
    }

    /// Temperature first, then top-k, then nucleus; `None` entries are skipped.
    pub fn standard(temperature: Option<f64>, top_k: Option<usize>, nucleus: Option<f64>) -> Result<Self> {
        let mods = temperature
            .map(Modifier::Temperature)
            .into_iter()
            .chain(top_k.map(Modifier::TopK))
            .chain(nucleus.map(Modifier::Nucleus))
            .collect();
        Self::new(mods)
    }

    pub fn modifiers(&self) -> &[Modifier] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply<P: Prob>(&self, dist: Categorical<P>) -> Result<Categorical<P>> {
        self.0.iter().try_fold(dist, |d, m| m.apply(&d))
    }
}

impl std::fmt::Display for ModifierChain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("+"))
    }
}

/// `p_i^(1/T)`, renormalized.
pub fn apply_temperature<P: Prob>(dist: &Categorical<P>, t: f64) -> Result<Categorical<P>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param(format!("temperature must be positive, got {t}")));
    }
    if t == 1.0 {
        return Ok(dist.clone());
    }
    Categorical::from_weights(dist.probs().iter().map(|p| p.temper(t)).collect())
}

/// Symbol indices by decreasing probability; equal probabilities keep vocabulary order.
fn ranked<P: Prob>(dist: &Categorical<P>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    let probs = dist.probs();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).expect("probabilities are ordered"));
    order
}

fn keep_only<P: Prob>(dist: &Categorical<P>, keep: &[usize]) -> Result<Categorical<P>> {
    let mut weights = vec![P::zero(); dist.len()];
    for &i in keep {
        weights[i] = dist.probs()[i].clone();
    }
    Categorical::from_weights(weights)
}

pub fn apply_top_k<P: Prob>(dist: &Categorical<P>, k: usize) -> Result<Categorical<P>> {
    if k == 0 {
        return Err(Error::param("top_k must be at least 1"));
    }
    if k >= dist.len() {
        return Ok(dist.clone());
    }
    let order = ranked(dist);
    keep_only(dist, &order[..k])
}

/// Smallest probability-ranked set with mass at least `p`.
pub fn apply_nucleus<P: Prob>(dist: &Categorical<P>, p: f64) -> Result<Categorical<P>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param(format!("nucleus p must be in (0, 1], got {p}")));
    }
    if p == 1.0 {
        return Ok(dist.clone());
    }
    let threshold = P::from_param(p);
    let order = ranked(dist);
    let mut mass = P::zero();
    let mut cut = order.len();
    for (n, &i) in order.iter().enumerate() {
        mass = mass + dist.probs()[i].clone();
        if mass.at_least(&threshold) {
            cut = n + 1;
            break;
        }
    }
    keep_only(dist, &order[..cut])
}
