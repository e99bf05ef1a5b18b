use std::path::Path;
use std::str::FromStr;

use super::{ExitStatus, Outcome, RunConfig};
use crate::codebook::{CodePoint, LatticeSpec};
use crate::error::{Error, Result};
use crate::evaluation::{
    covariance_constants, derive_seed, estimator_sd, ngram_diversity, sentence_bleu, shift_from_seed,
    step_variance_experiment, StepFunction,
};
use crate::models::{load_model, ModifierChain, SequenceModel, TokenId};
use crate::oracle::checks::{run_oracle_checks, Status};
use crate::sampler::{ancestral_sample_with_workers, arithmetic_sample_with_workers, Method, SampleSet};

const BLEU_ORDER: usize = 4;
const DIVERSITY_ORDER: usize = 4;

type Reward = Box<dyn Fn(&[TokenId]) -> f64>;

/// Reward used by the `variance` command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RewardSpec {
    /// Number of tokens, EOS included.
    Length,
    /// Sentence BLEU against the first reference line.
    Bleu,
    /// 1 if the sequence starts with the symbol, else 0.
    First(String),
}

impl FromStr for RewardSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "length" => Ok(RewardSpec::Length),
            "bleu" => Ok(RewardSpec::Bleu),
            _ => match s.strip_prefix("first:") {
                Some(sym) if !sym.is_empty() => Ok(RewardSpec::First(sym.to_string())),
                _ => Err(Error::input(format!("unknown reward {s:?}"))),
            },
        }
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(prefix: String, w: csv::Writer<Vec<u8>>) -> Result<String> {
    let body = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
    Ok(prefix + &String::from_utf8(body).expect("csv output is UTF-8"))
}

fn write_row<I, T>(w: &mut csv::Writer<Vec<u8>>, row: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::input(e.to_string()))
}

fn single_model(config: &RunConfig) -> Result<Box<dyn SequenceModel>> {
    match config.models.as_slice() {
        [path] => load_model(path),
        [] => Err(Error::input("--model is required")),
        _ => Err(Error::input("this command takes exactly one --model")),
    }
}

fn shift_of(config: &RunConfig, seed: u64) -> Result<CodePoint<f64>> {
    match config.shift {
        Some(b) => CodePoint::new(b).map_err(|e| Error::input(format!("--shift: {e}"))),
        None => Ok(shift_from_seed(seed)),
    }
}

fn draw<M: SequenceModel + ?Sized>(
    model: &M,
    config: &RunConfig,
    n: usize,
    chain: &ModifierChain,
    seed: u64,
) -> Result<SampleSet<f64>> {
    match config.method {
        Method::Arithmetic => {
            let spec = LatticeSpec::new(n, config.lattice_mode, shift_of(config, seed)?)?;
            arithmetic_sample_with_workers(model, &spec, chain, config.worker_count)
        }
        Method::Ancestral => ancestral_sample_with_workers(model, n, seed, chain, config.worker_count),
    }
}

fn read_references(path: &Path, model: &dyn SequenceModel) -> Result<Vec<Vec<TokenId>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| model.vocabulary().encode(l))
        .collect()
}

/// `index,code,sequence,logprob`, preceded by a `# shift_b=` comment for
/// arithmetic runs.
pub fn cmd_sample(config: &RunConfig) -> Result<String> {
    let model = single_model(config)?;
    let n = config.num_samples[0];
    let chain = config.chain(config.temperatures[0])?;
    let set = draw(&model, config, n, &chain, config.seed)?;
    let prefix = match &set.shift {
        Some(b) => format!("# shift_b={}\n", b.value()),
        None => format!("# seed={}\n", config.seed),
    };
    let mut w = csv_writer();
    write_row(&mut w, ["index", "code", "sequence", "logprob"])?;
    for (i, e) in set.entries.iter().enumerate() {
        let code = e.code.as_ref().map(|c| c.value().to_string()).unwrap_or_default();
        write_row(
            &mut w,
            [
                i.to_string(),
                code,
                model.vocabulary().render(&e.sequence),
                e.logprob.to_string(),
            ],
        )?;
    }
    finish(prefix, w)
}

/// `method,temperature,n,mean_reward,min_reward,max_reward,ngram_diversity`,
/// macro-averaged over the contexts (one `--model` each).
pub fn cmd_diversity(config: &RunConfig) -> Result<String> {
    if config.models.is_empty() {
        return Err(Error::input("--model is required"));
    }
    let models = config
        .models
        .iter()
        .map(|p| load_model(p))
        .collect::<Result<Vec<_>>>()?;
    let ref_path = config
        .reference
        .as_ref()
        .ok_or_else(|| Error::input("--reference is required"))?;
    let text = std::fs::read_to_string(ref_path).map_err(|e| Error::input(format!("{}: {e}", ref_path.display())))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != models.len() {
        return Err(Error::input(format!(
            "{} references for {} contexts",
            lines.len(),
            models.len()
        )));
    }
    let references = models
        .iter()
        .zip(&lines)
        .map(|(m, l)| m.vocabulary().encode(l))
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv_writer();
    write_row(
        &mut w,
        ["method", "temperature", "n", "mean_reward", "min_reward", "max_reward", "ngram_diversity"],
    )?;
    for &t in &config.temperatures {
        let chain = config.chain(t)?;
        for &n in &config.num_samples {
            let mut sums = [0.0; 4];
            for (ctx, (model, reference)) in models.iter().zip(&references).enumerate() {
                let set = draw(model, config, n, &chain, derive_seed(config.seed, ctx as u64))?;
                let vocab = model.vocabulary();
                let rewards: Vec<f64> = set
                    .sequences()
                    .map(|s| sentence_bleu(vocab.strip_eos(s), reference, BLEU_ORDER))
                    .collect();
                sums[0] += rewards.iter().sum::<f64>() / rewards.len() as f64;
                sums[1] += rewards.iter().copied().fold(f64::INFINITY, f64::min);
                sums[2] += rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                sums[3] += ngram_diversity(set.sequences(), DIVERSITY_ORDER, vocab.eos());
            }
            let k = models.len() as f64;
            write_row(
                &mut w,
                [
                    config.method.to_string(),
                    t.to_string(),
                    n.to_string(),
                    (sums[0] / k).to_string(),
                    (sums[1] / k).to_string(),
                    (sums[2] / k).to_string(),
                    (sums[3] / k).to_string(),
                ],
            )?;
        }
    }
    finish(String::new(), w)
}

/// `method,n,mean,sd,p2_5,p97_5`, one row per `--n` value.
pub fn cmd_variance(config: &RunConfig) -> Result<String> {
    if config.reps < 2 {
        return Err(Error::input("variance needs --reps >= 2"));
    }
    let model = single_model(config)?;
    let chain = config.chain(config.temperatures[0])?;
    let reward: Reward = match &config.reward {
        RewardSpec::Length => Box::new(|s: &[TokenId]| s.len() as f64),
        RewardSpec::Bleu => {
            let path = config
                .reference
                .as_ref()
                .ok_or_else(|| Error::input("--reward bleu needs --reference"))?;
            let reference = read_references(path, model.as_ref())?
                .into_iter()
                .next()
                .ok_or_else(|| Error::input("reference file is empty"))?;
            let vocab = model.vocabulary().clone();
            Box::new(move |s: &[TokenId]| sentence_bleu(vocab.strip_eos(s), &reference, BLEU_ORDER))
        }
        RewardSpec::First(sym) => {
            let id = model
                .vocabulary()
                .index_of(sym)
                .ok_or_else(|| Error::input(format!("unknown token {sym:?}")))?;
            Box::new(move |s: &[TokenId]| if s.first() == Some(&id) { 1.0 } else { 0.0 })
        }
    };
    let mut w = csv_writer();
    write_row(&mut w, ["method", "n", "mean", "sd", "p2_5", "p97_5"])?;
    for &n in &config.num_samples {
        let r = estimator_sd(&model, config.method, n, &chain, &reward, config.reps, config.seed)?;
        write_row(
            &mut w,
            [
                r.method.to_string(),
                n.to_string(),
                r.mean.to_string(),
                r.sd.to_string(),
                r.percentile_2_5.to_string(),
                r.percentile_97_5.to_string(),
            ],
        )?;
    }
    finish(String::new(), w)
}

/// `function,n_points,lattice_mode,exact_integral,lattice_var,mc_var,
/// lattice_exact_every_shift,cov_on,cov_off`. The covariance columns are
/// Monte Carlo estimates for `n_points` buckets (empty below 3).
pub fn cmd_stepfn(config: &RunConfig) -> Result<String> {
    let path = config
        .stepfn
        .as_ref()
        .ok_or_else(|| Error::input("--stepfn is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    let f = StepFunction::parse(&text)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if config.reps < 2 {
        return Err(Error::input("stepfn needs --reps >= 2"));
    }
    let mut w = csv_writer();
    write_row(
        &mut w,
        [
            "function",
            "n_points",
            "lattice_mode",
            "exact_integral",
            "lattice_var",
            "mc_var",
            "lattice_exact_every_shift",
            "cov_on",
            "cov_off",
        ],
    )?;
    for &n in &config.num_samples {
        let r = step_variance_experiment(&f, n, config.lattice_mode, config.reps, config.seed)?;
        let (on, off) = if n >= 3 {
            let (a, b) = covariance_constants(n, config.reps, config.seed)?;
            (a.to_string(), b.to_string())
        } else {
            (String::new(), String::new())
        };
        write_row(
            &mut w,
            [
                name.clone(),
                n.to_string(),
                config.lattice_mode.to_string(),
                r.exact_integral.to_string(),
                r.lattice_var.to_string(),
                r.mc_var.to_string(),
                r.lattice_exact_every_shift.to_string(),
                on,
                off,
            ],
        )?;
    }
    finish(String::new(), w)
}

/// `property,status,worst_deviation`. An invalid model yields a single
/// failing `model_validity` row; any failing row gives exit status 2.
pub fn cmd_oracle_check(config: &RunConfig) -> Result<Outcome> {
    let mut w = csv_writer();
    write_row(&mut w, ["property", "status", "worst_deviation"])?;
    let model = match single_model(config) {
        Ok(m) => m,
        Err(Error::InvalidModel(msg)) => {
            write_row(&mut w, ["model_validity", "fail", ""])?;
            let csv = finish(format!("# invalid model: {}\n", msg.replace('\n', " ")), w)?;
            return Ok(Outcome {
                csv,
                status: ExitStatus::PropertyFailure,
            });
        }
        Err(e) => return Err(e),
    };
    let chain = config.chain(config.temperatures[0])?;
    let checks = run_oracle_checks(&model, &chain, config.seed)?;
    let mut failed = false;
    for c in &checks {
        failed |= c.status == Status::Fail;
        write_row(&mut w, [c.name.to_string(), c.status.to_string(), c.worst_deviation.to_string()])?;
    }
    Ok(Outcome {
        csv: finish(String::new(), w)?,
        status: if failed {
            ExitStatus::PropertyFailure
        } else {
            ExitStatus::Success
        },
    })
}
