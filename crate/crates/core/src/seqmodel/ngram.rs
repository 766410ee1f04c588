use rand::Rng;

use super::{log_softmax, ArModel, Sequence, Trainable, Vocab};

/// Softmax over output symbols with a separate logit vector for every
/// window of the previous `order - 1` stream ids (left-padded with BOS).
/// Order 1 is a unigram-plus-stop model.
#[derive(Clone, Debug, PartialEq)]
pub struct NgramModel {
    vocab: Vocab,
    order: usize,
    logits: Vec<f64>,
}

impl NgramModel {
    pub fn new(vocab: Vocab, order: usize) -> Self {
        assert!(order >= 1, "order must be positive");
        let rows = (vocab.stream_size() + 1).pow(order as u32 - 1);
        Self { vocab, order, logits: vec![0.0; rows * vocab.output] }
    }

    pub fn with_random_init<R: Rng + ?Sized>(vocab: Vocab, order: usize, scale: f64, rng: &mut R) -> Self {
        let mut m = Self::new(vocab, order);
        m.logits.iter_mut().for_each(|w| *w = rng.gen_range(-scale..scale));
        m
    }

    pub fn from_params(vocab: Vocab, order: usize, logits: Vec<f64>) -> Option<Self> {
        let m = Self::new(vocab, order);
        (m.logits.len() == logits.len()).then_some(Self { logits, ..m })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Table row used to predict each step.
    fn rows(&self, seq: &Sequence) -> Vec<usize> {
        let base = self.vocab.stream_size() + 1;
        let bos = base - 1;
        let stream = seq.stream(&self.vocab);
        let first = seq.context.len() + 1;
        (first..=stream.len())
            .map(|end| {
                (1..self.order).rev().fold(0usize, |acc, back| {
                    let tok = if end >= back { stream[end - back] as usize } else { bos };
                    acc * base + tok
                })
            })
            .collect()
    }

    fn row(&self, r: usize) -> &[f64] {
        let o = self.vocab.output;
        &self.logits[r * o..(r + 1) * o]
    }
}

impl ArModel for NgramModel {
    fn vocab(&self) -> Vocab {
        self.vocab
    }

    fn log_probs(&self, seq: &Sequence) -> Vec<Vec<f64>> {
        self.rows(seq).into_iter().map(|r| log_softmax(self.row(r))).collect()
    }
}

impl Trainable for NgramModel {
    fn params(&self) -> &[f64] {
        &self.logits
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn loss_grad(&self, seq: &Sequence, grad: &mut [f64]) -> f64 {
        let o = self.vocab.output;
        let labels = seq.labels(&self.vocab);
        let mut loss = 0.0;
        for (r, &y) in self.rows(seq).into_iter().zip(&labels) {
            let lp = log_softmax(self.row(r));
            loss -= lp[y as usize];
            for (k, l) in lp.iter().enumerate() {
                grad[r * o + k] += l.exp() - (k == y as usize) as u8 as f64;
            }
        }
        loss
    }
}
