//! JSON model definitions.
//!
//! ```json
//! { "type": "markov", "vocabulary": ["A", "B"], "eos": null, "max_length": 2,
//!   "order": 0, "rows": [ { "context": [], "probs": ["0.6", "0.4"] } ] }
//! ```
//!
//! Probabilities are decimal (or `p/q`) strings and are read exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MarkovModel, SequenceModel, SyntheticLm, TabularModel, TokenId, Vocabulary};
use crate::codebook::Rational;
use crate::decimal::parse_rational;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub vocabulary: Vec<String>,
    #[serde(default)]
    pub eos: Option<usize>,
    pub max_length: usize,
    #[serde(flatten)]
    pub kind: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelKind {
    Tabular { table: Vec<TableEntry> },
    Markov { order: usize, rows: Vec<MarkovRow> },
    Synthetic { seed: u64, peakedness: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub sequence: Vec<String>,
    pub probability: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovRow {
    pub context: Vec<String>,
    pub probs: Vec<String>,
}

fn resolve(vocab: &Vocabulary, symbols: &[String]) -> Result<Vec<TokenId>> {
    symbols
        .iter()
        .map(|s| {
            vocab
                .index_of(s)
                .ok_or_else(|| Error::model(format!("unknown symbol {s:?}")))
        })
        .collect()
}

fn rational(s: &str) -> Result<Rational> {
    parse_rational(s).map_err(|e| Error::model(e.to_string()))
}

impl ModelFile {
    pub fn build(&self) -> Result<Box<dyn SequenceModel>> {
        let vocab = Vocabulary::new(self.vocabulary.clone(), self.eos)?;
        Ok(match &self.kind {
            ModelKind::Tabular { table } => {
                let entries = table
                    .iter()
                    .map(|e| Ok((resolve(&vocab, &e.sequence)?, rational(&e.probability)?)))
                    .collect::<Result<Vec<_>>>()?;
                Box::new(TabularModel::new(vocab, self.max_length, entries)?)
            }
            ModelKind::Markov { order, rows } => {
                let rows = rows
                    .iter()
                    .map(|r| {
                        let probs = r.probs.iter().map(|p| rational(p)).collect::<Result<Vec<_>>>()?;
                        Ok((resolve(&vocab, &r.context)?, probs))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Box::new(MarkovModel::new(*order, rows, vocab, self.max_length)?)
            }
            ModelKind::Synthetic { seed, peakedness } => {
                Box::new(SyntheticLm::new(vocab, self.max_length, *seed, *peakedness)?)
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files serialize")
    }
}

/// Parses JSON text. Syntax problems are input errors; semantic problems
/// (bad probabilities, unknown symbols) are invalid-model errors.
pub fn parse_model(json: &str) -> Result<Box<dyn SequenceModel>> {
    let file: ModelFile = serde_json::from_str(json).map_err(|e| Error::input(format!("model file: {e}")))?;
    file.build()
}

pub fn load_model(path: &Path) -> Result<Box<dyn SequenceModel>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}
