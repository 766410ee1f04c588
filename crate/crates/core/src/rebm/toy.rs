//! A finite task small enough for exact partition functions and KLs:
//! strings over a small alphabet up to a length limit with some bigrams
//! forbidden, drawn uniformly. A unigram-plus-stop base cannot express the
//! bigram constraint, so a residual energy has something to fix.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FiniteDist;
use crate::seqmodel::{NgramModel, Vocab};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyTask {
    pub symbols: usize,
    pub max_len: usize,
    pub forbidden: Vec<(u32, u32)>,
}

impl Default for ToyTask {
    fn default() -> Self {
        Self { symbols: 4, max_len: 8, forbidden: vec![(0, 0), (0, 1), (1, 2), (2, 1), (3, 3)] }
    }
}

/// Every string over `symbols` letters of length at most `max_len`, shortest
/// first and lexicographic within a length.
pub fn all_strings(symbols: usize, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|x: &Vec<u32>| {
                (0..symbols as u32).map(move |s| {
                    let mut y = x.clone();
                    y.push(s);
                    y
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

impl ToyTask {
    pub fn vocab(&self) -> Vocab {
        Vocab { context: 0, output: self.symbols + 1 }
    }

    pub fn allowed(&self, x: &[u32]) -> bool {
        x.len() <= self.max_len
            && x.iter().all(|&s| (s as usize) < self.symbols)
            && x.windows(2).all(|w| !self.forbidden.contains(&(w[0], w[1])))
    }

    pub fn support(&self) -> Vec<Vec<u32>> {
        all_strings(self.symbols, self.max_len).into_iter().filter(|x| self.allowed(x)).collect()
    }

    /// Every string the truncated base can emit.
    pub fn universe(&self) -> Vec<Vec<u32>> {
        all_strings(self.symbols, self.max_len)
    }

    /// The uniform target distribution.
    pub fn target(&self) -> FiniteDist {
        let s = self.support();
        let p = 1.0 / s.len() as f64;
        s.into_iter().map(|x| (x, p)).collect()
    }

    pub fn sample_corpus<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<u32>> {
        let s = self.support();
        (0..n).map(|_| s[rng.gen_range(0..s.len())].clone()).collect()
    }
}

/// Maximum-likelihood unigram-plus-stop model: every step predicts symbol
/// frequencies over the corpus tokens, with one end marker per string.
/// Counts get add-one smoothing so every string has positive probability.
pub fn fit_unigram(vocab: Vocab, corpus: &[Vec<u32>]) -> NgramModel {
    let mut counts = vec![1.0; vocab.output];
    for x in corpus {
        for &s in x {
            counts[s as usize] += 1.0;
        }
        counts[vocab.end() as usize] += 1.0;
    }
    let logits = counts.iter().map(|c| f64::ln(*c)).collect();
    NgramModel::from_params(vocab, 1, logits).expect("unigram shape")
}

/// One string per line, symbols as decimal digits (`""` is the empty string).
pub fn to_line(x: &[u32]) -> String {
    x.iter().map(|s| char::from_digit(*s, 10).expect("symbol below 10")).collect()
}

pub fn from_line(line: &str, symbols: usize) -> Result<Vec<u32>, String> {
    line.chars()
        .map(|c| match c.to_digit(10) {
            Some(d) if (d as usize) < symbols => Ok(d),
            _ => Err(format!("bad symbol {c:?}")),
        })
        .collect()
}
