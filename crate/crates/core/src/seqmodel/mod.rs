//! Locally normalized sequence models: an exact SAT oracle and trie model
//! for reference, a softmax n-gram table and a small gated recurrent network,
//! trained with SGD on cross-entropy.
//!
//! A [`Sequence`] is a conditioning context (e.g. DIMACS tokens) followed by
//! a target over the output alphabet. Models read the joint stream
//! `context, SEP, target` and emit a distribution over the output alphabet
//! (whose last symbol is the end marker) before every target symbol and once
//! more after the last.

mod checkpoint;
mod exact;
mod metrics;
mod ngram;
mod rnn;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, ModelMeta, CHECKPOINT_VERSION};
pub use exact::{dimacs_text, SatOracleModel, TrieArModel};
pub use metrics::{eval_sat, expected_cross_entropy, sequence_log_prob, token_ppl, EvalReport};
pub use ngram::NgramModel;
pub use rnn::RnnModel;
pub use train::{mean_token_loss, train_ar, EpochStat, TrainConfig, TrainError, TrainOutcome};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Example;
use crate::formula::dimacs_encode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    /// Number of context token ids.
    pub context: usize,
    /// Number of output symbols, the last of which is the end marker.
    pub output: usize,
}

impl Vocab {
    pub fn end(&self) -> u32 {
        self.output as u32 - 1
    }

    pub fn sep(&self) -> u32 {
        self.context as u32
    }

    /// Ids in the joint input stream: context tokens, SEP, then every output
    /// symbol but the end marker.
    pub fn stream_size(&self) -> usize {
        self.context + self.output
    }

    pub fn output_id(&self, sym: u32) -> u32 {
        self.context as u32 + 1 + sym
    }

    /// Binary targets with no context: `{0, 1, $}`.
    pub fn binary() -> Self {
        Self { context: 0, output: 3 }
    }

    /// DIMACS context over at most `max_var` variables, binary targets.
    pub fn sat(max_var: usize) -> Self {
        Self { context: 2 + max_var, output: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sequence {
    pub context: Vec<u32>,
    /// Target symbols, without the end marker.
    pub target: Vec<u32>,
}

impl Sequence {
    pub fn new(context: Vec<u32>, target: Vec<u32>) -> Self {
        Self { context, target }
    }

    pub fn unconditioned(target: Vec<u32>) -> Self {
        Self { context: Vec::new(), target }
    }

    /// Joint input stream, up to and including the last target symbol.
    pub fn stream(&self, vocab: &Vocab) -> Vec<u32> {
        let mut s = self.context.clone();
        s.push(vocab.sep());
        s.extend(self.target.iter().map(|&t| vocab.output_id(t)));
        s
    }

    /// Output symbol predicted at each step, ending with the end marker.
    pub fn labels(&self, vocab: &Vocab) -> Vec<u32> {
        let mut l = self.target.clone();
        l.push(vocab.end());
        l
    }

    /// Number of prediction steps (targets plus the end marker).
    pub fn steps(&self) -> usize {
        self.target.len() + 1
    }
}

/// DIMACS tokens: `-` is 0, `#` is 1, variable `i` is `1 + i`.
pub fn dimacs_tokens(text: &str) -> Vec<u32> {
    text.split_ascii_whitespace()
        .map(|t| match t {
            "-" => 0,
            "#" => 1,
            n => 1 + n.parse::<u32>().expect("canonical DIMACS"),
        })
        .collect()
}

pub fn sat_sequence(e: &Example) -> Sequence {
    Sequence::new(dimacs_tokens(&dimacs_encode(&e.formula)), e.target.bits().iter().map(|&b| b as u32).collect())
}

pub trait ArModel: Send + Sync {
    fn vocab(&self) -> Vocab;

    /// Log-probabilities over the output alphabet at each of the
    /// `seq.steps()` prediction steps.
    fn log_probs(&self, seq: &Sequence) -> Vec<Vec<f64>>;

    /// Distribution of the next output symbol after `prefix`.
    fn next_dist(&self, context: &[u32], prefix: &[u32]) -> Vec<f64> {
        let seq = Sequence::new(context.to_vec(), prefix.to_vec());
        self.log_probs(&seq).pop().expect("at least one step").into_iter().map(f64::exp).collect()
    }
}

pub trait Trainable: ArModel {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// Summed negative log-likelihood of the sequence; its gradient is added
    /// into `grad`.
    fn loss_grad(&self, seq: &Sequence, grad: &mut [f64]) -> f64;
}

/// Result of ancestral sampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub target: Vec<u32>,
    /// The length limit was hit before the end marker was drawn.
    pub truncated: bool,
}

pub fn sample<M: ArModel + ?Sized, R: Rng + ?Sized>(model: &M, context: &[u32], max_len: usize, rng: &mut R) -> Sample {
    let end = model.vocab().end();
    let mut target = Vec::new();
    loop {
        let dist = model.next_dist(context, &target);
        let sym = draw(&dist, rng);
        if sym == end {
            return Sample { target, truncated: false };
        }
        if target.len() == max_len {
            return Sample { target, truncated: true };
        }
        target.push(sym);
    }
}

/// Inverse-CDF draw from a probability vector.
pub(crate) fn draw<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> u32 {
    let u: f64 = rng.gen::<f64>() * dist.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u32;
        }
    }
    // Rounding left u at the very top: take the last symbol with mass.
    dist.iter().rposition(|&p| p > 0.0).expect("distribution has mass") as u32
}

pub(crate) fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

/// Any trainable model, for checkpoints and the command line.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Oracle(SatOracleModel),
    Ngram(NgramModel),
    Rnn(RnnModel),
}

impl AnyModel {
    pub fn as_trainable(&self) -> &dyn Trainable {
        match self {
            AnyModel::Oracle(m) => m,
            AnyModel::Ngram(m) => m,
            AnyModel::Rnn(m) => m,
        }
    }

    pub fn as_trainable_mut(&mut self) -> &mut dyn Trainable {
        match self {
            AnyModel::Oracle(m) => m,
            AnyModel::Ngram(m) => m,
            AnyModel::Rnn(m) => m,
        }
    }
}

impl ArModel for AnyModel {
    fn vocab(&self) -> Vocab {
        self.as_trainable().vocab()
    }

    fn log_probs(&self, seq: &Sequence) -> Vec<Vec<f64>> {
        self.as_trainable().log_probs(seq)
    }

    fn next_dist(&self, context: &[u32], prefix: &[u32]) -> Vec<f64> {
        self.as_trainable().next_dist(context, prefix)
    }
}

impl Trainable for AnyModel {
    fn params(&self) -> &[f64] {
        self.as_trainable().params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.as_trainable_mut().params_mut()
    }

    fn loss_grad(&self, seq: &Sequence, grad: &mut [f64]) -> f64 {
        self.as_trainable().loss_grad(seq, grad)
    }
}

#[cfg(test)]
pub(crate) mod gradcheck {
    use super::*;

    /// Largest relative error between the analytic gradient and central
    /// differences, over `coords` coordinates.
    pub fn max_rel_error<M: Trainable + Clone>(model: &M, seq: &Sequence, coords: &[usize]) -> f64 {
        let mut grad = vec![0.0; model.params().len()];
        model.loss_grad(seq, &mut grad);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for &i in coords {
            let mut plus = model.clone();
            plus.params_mut()[i] += h;
            let mut minus = model.clone();
            minus.params_mut()[i] -= h;
            let mut scratch = vec![0.0; grad.len()];
            let lp = plus.loss_grad(seq, &mut scratch);
            let lm = minus.loss_grad(seq, &mut scratch);
            let numeric = (lp - lm) / (2.0 * h);
            let denom = grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((grad[i] - numeric).abs() / denom);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_layout() {
        let v = Vocab::sat(4);
        let s = Sequence::new(vec![2, 3, 0, 4], vec![1, 0]);
        assert_eq!(s.stream(&v), vec![2, 3, 0, 4, 6, 8, 7]);
        assert_eq!(s.labels(&v), vec![1, 0, 2]);
        assert_eq!(v.stream_size(), 9);
    }

    #[test]
    fn dimacs_token_ids() {
        assert_eq!(dimacs_tokens("1 - 2 3 # - 1 2 3"), vec![2, 0, 3, 4, 1, 0, 2, 3, 4]);
    }

    #[test]
    fn log_softmax_normalizes() {
        let l = log_softmax(&[1.0, -2.0, 0.5]);
        assert!((l.iter().map(|x| x.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
