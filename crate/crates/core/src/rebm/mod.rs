//! Residual energy-based models `p(x) ∝ q0(x) · exp g(x)` over short
//! strings: a frozen autoregressive base `q0`, a window discriminator `g`,
//! ranking-NCE training, importance-sampled partition estimates, and the
//! log-likelihood and perplexity improvement metrics.

mod estimate;
mod kl;
pub mod toy;
mod train;

pub use estimate::{
    bootstrap_report, estimate_z, ll_improvement, percentile, ppl_improvement, BootstrapConfig, ImprovementReport,
    ZEstimate,
};
pub use kl::{exact_kl, exact_z, kl_decomposition, FiniteDist, KlSides};
pub use train::{train_rebm, RebmEpoch, RebmOutcome, RebmTrainConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seqmodel::{self, ArModel, Sequence};

#[derive(Debug, Error)]
pub enum RebmError {
    #[error("KL undefined: p puts mass on {x:?} where q has none")]
    UndefinedKl { x: Vec<u32> },
    #[error("NCE loss diverged in epoch {epoch}")]
    Diverged { epoch: usize, last_good: Vec<f64> },
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    /// `2 tanh(s)`, bounded in `(-2, 2)`.
    Tanh2,
    /// `-log(1 + exp(s + shift))`, always negative.
    SoftplusNeg { shift: f64 },
}

impl Activation {
    pub const SOFTPLUS_SHIFT: f64 = 20.0;

    pub fn softplus() -> Self {
        Activation::SoftplusNeg { shift: Self::SOFTPLUS_SHIFT }
    }

    pub fn apply(&self, s: f64) -> f64 {
        match *self {
            Activation::Tanh2 => 2.0 * s.tanh(),
            Activation::SoftplusNeg { shift } => {
                let u = s + shift;
                -(u.max(0.0) + (-u.abs()).exp().ln_1p())
            }
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Activation::Tanh2 => {
                let t = s.tanh();
                2.0 * (1.0 - t * t)
            }
            Activation::SoftplusNeg { shift } => -1.0 / (1.0 + (-(s + shift)).exp()),
        }
    }
}

/// Anything that scores strings with an energy `g`.
pub trait Energy: Sync {
    fn score(&self, x: &[u32]) -> f64;
}

/// `g(x) = c` for every string.
#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl Energy for Constant {
    fn score(&self, _x: &[u32]) -> f64 {
        self.0
    }
}

/// `g(x) = f(sum_t w[s_{t-1}, s_t, s_{t+1}])` over the padded string
/// `BOS x_1 .. x_n EOS EOS`, with centers `t = 1 ..= n + 1`. Each window
/// sees a symbol with both neighbours, a small bidirectional feature scorer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    symbols: usize,
    activation: Activation,
    theta: Vec<f64>,
}

impl Discriminator {
    /// All-zero weights.
    pub fn new(symbols: usize, activation: Activation) -> Self {
        let w = symbols + 2;
        Self { symbols, activation, theta: vec![0.0; w * w * w] }
    }

    pub fn with_random_init<R: Rng + ?Sized>(symbols: usize, activation: Activation, scale: f64, rng: &mut R) -> Self {
        let mut d = Self::new(symbols, activation);
        d.theta.iter_mut().for_each(|t| *t = rng.gen_range(-scale..scale));
        d
    }

    pub fn from_params(symbols: usize, activation: Activation, theta: Vec<f64>) -> Option<Self> {
        let d = Self::new(symbols, activation);
        (d.theta.len() == theta.len()).then_some(Self { theta, ..d })
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn windows<'a>(&'a self, x: &'a [u32]) -> impl Iterator<Item = usize> + 'a {
        let (bos, eos) = (self.symbols, self.symbols + 1);
        let w = self.symbols + 2;
        let at = move |i: usize| -> usize {
            if i == 0 {
                bos
            } else if i <= x.len() {
                x[i - 1] as usize
            } else {
                eos
            }
        };
        (1..=x.len() + 1).map(move |t| (at(t - 1) * w + at(t)) * w + at(t + 1))
    }

    /// Position-summed score before the activation.
    pub fn raw(&self, x: &[u32]) -> f64 {
        self.windows(x).map(|i| self.theta[i]).sum()
    }

    /// Adds `coef · dg(x)/dθ` into `grad`.
    pub fn add_grad(&self, x: &[u32], coef: f64, grad: &mut [f64]) {
        let d = coef * self.activation.derivative(self.raw(x));
        for i in self.windows(x) {
            grad[i] += d;
        }
    }
}

impl Energy for Discriminator {
    fn score(&self, x: &[u32]) -> f64 {
        self.activation.apply(self.raw(x))
    }
}

/// `log sum_i exp(v_i)`.
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Ranking-NCE loss from energies: `-g(x) + log(exp g(x) + sum_k exp g(x_k))`.
pub fn nce_loss_from_scores(g_data: f64, g_noise: &[f64]) -> f64 {
    let mut all = Vec::with_capacity(g_noise.len() + 1);
    all.push(g_data);
    all.extend_from_slice(g_noise);
    log_sum_exp(&all) - g_data
}

/// Base model truncated at `max_len`: after `max_len` symbols the end marker
/// has probability one, so the base is normalized over strings of length at
/// most `max_len`.
pub fn truncated_log_prob<B: ArModel + ?Sized>(base: &B, x: &[u32], max_len: usize) -> f64 {
    assert!(x.len() <= max_len, "string longer than the length limit");
    let seq = Sequence::unconditioned(x.to_vec());
    let lps = base.log_probs(&seq);
    let mut lp: f64 = x.iter().zip(&lps).map(|(&s, l)| l[s as usize]).sum();
    if x.len() < max_len {
        lp += lps[x.len()][base.vocab().end() as usize];
    }
    lp
}

/// Ancestral sample from the truncated base.
pub fn sample_base<B: ArModel + ?Sized, R: Rng + ?Sized>(base: &B, max_len: usize, rng: &mut R) -> Vec<u32> {
    seqmodel::sample(base, &[], max_len, rng).target
}

#[derive(Clone, Debug)]
pub struct RebmModel<B> {
    pub base: B,
    pub disc: Discriminator,
    pub max_len: usize,
}

impl<B: ArModel> RebmModel<B> {
    pub fn new(base: B, disc: Discriminator, max_len: usize) -> Self {
        assert_eq!(base.vocab().context, 0, "the base must be unconditioned");
        assert_eq!(base.vocab().output, disc.symbols() + 1, "base and discriminator alphabets differ");
        Self { base, disc, max_len }
    }

    pub fn base_log_prob(&self, x: &[u32]) -> f64 {
        truncated_log_prob(&self.base, x, self.max_len)
    }

    pub fn g(&self, x: &[u32]) -> f64 {
        self.disc.score(x)
    }

    /// `log q0(x) + g(x)`.
    pub fn log_unnormalized(&self, x: &[u32]) -> f64 {
        self.base_log_prob(x) + self.g(x)
    }

    pub fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u32> {
        sample_base(&self.base, self.max_len, rng)
    }

    pub fn nce_loss(&self, x: &[u32], noise: &[Vec<u32>]) -> f64 {
        let g: Vec<f64> = noise.iter().map(|n| self.g(n)).collect();
        nce_loss_from_scores(self.g(x), &g)
    }

    /// NCE loss with its gradient in the discriminator weights added into
    /// `grad`. The base receives no gradient.
    pub fn nce_loss_grad(&self, x: &[u32], noise: &[Vec<u32>], grad: &mut [f64]) -> f64 {
        let mut all: Vec<&[u32]> = Vec::with_capacity(noise.len() + 1);
        all.push(x);
        all.extend(noise.iter().map(|n| n.as_slice()));
        let g: Vec<f64> = all.iter().map(|s| self.g(s)).collect();
        let lse = log_sum_exp(&g);
        for (i, s) in all.iter().enumerate() {
            let w = (g[i] - lse).exp() - (i == 0) as u8 as f64;
            self.disc.add_grad(s, w, grad);
        }
        lse - g[0]
    }
}

impl<B: ArModel> Energy for RebmModel<B> {
    fn score(&self, x: &[u32]) -> f64 {
        self.g(x)
    }
}
