use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_base, Energy};
use crate::rng::{derive_seed, rng_for};
use crate::seqmodel::ArModel;

/// Importance-sampling estimate `Z ≈ (1/M) sum_m exp g(x_m)`, `x_m ~ q0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZEstimate {
    pub mean: f64,
    /// `exp g(x_m)` for every base sample.
    pub values: Vec<f64>,
    pub seed: u64,
}

impl ZEstimate {
    pub fn samples(&self) -> usize {
        self.values.len()
    }
}

/// Running mean, exact when all values are equal.
fn running_mean(v: &[f64]) -> f64 {
    v.iter().enumerate().fold(0.0, |m, (i, &x)| m + (x - m) / (i + 1) as f64)
}

/// Draws `m` base samples (sample `i` from its own derived stream) and
/// averages `exp g`.
pub fn estimate_z<B, E>(base: &B, energy: &E, max_len: usize, m: usize, seed: u64) -> ZEstimate
where
    B: ArModel + ?Sized,
    E: Energy + ?Sized,
{
    assert!(m >= 1, "need at least one sample");
    let values: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map(|i| energy.score(&sample_base(base, max_len, &mut rng_for(seed, &[i]))).exp())
        .collect();
    ZEstimate { mean: running_mean(&values), values, seed }
}

/// `mean_x g(x) - log Z`, nats per sequence. This equals
/// `KL[p || q0] - KL[p || p_θ]` in expectation, so positive values mean the
/// residual model is closer to the data than the base.
pub fn ll_improvement<E: Energy + ?Sized>(energy: &E, test: &[Vec<u32>], z: f64) -> f64 {
    let g: Vec<f64> = test.iter().map(|x| energy.score(x)).collect();
    running_mean(&g) - z.ln()
}

/// Perplexity ratio `ppl(p_θ) / ppl(q0) = exp((|D| log Z - sum g) / w)`
/// with `w` the token count including one end marker per sequence. Below 1
/// means the residual model has lower perplexity.
pub fn ppl_improvement<E: Energy + ?Sized>(energy: &E, test: &[Vec<u32>], z: f64) -> f64 {
    let sum_g: f64 = test.iter().map(|x| energy.score(x)).sum();
    ratio_from_parts(sum_g, test.len(), token_count(test), z)
}

fn token_count(test: &[Vec<u32>]) -> usize {
    test.iter().map(|x| x.len() + 1).sum()
}

fn ratio_from_parts(sum_g: f64, n: usize, w: usize, z: f64) -> f64 {
    ((n as f64 * z.ln() - sum_g) / w as f64).exp()
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub n_z: usize,
    /// Base samples per partition estimate.
    pub m: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { n_boot: 1000, n_z: 32, m: 512, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    /// `(2.5%, 97.5%, mean)` of the log-likelihood improvement over the
    /// `n_boot × n_z` grid, nats per sequence.
    pub ll_improvement_ci: (f64, f64, f64),
    /// Perplexity ratio at the unfavourable (97.5%) end of the grid.
    pub ppl_ratio_conservative: f64,
    pub ppl_ratio_mean: f64,
    /// `100 · (1 - ppl_ratio_conservative)`.
    pub ppl_improvement_percent: f64,
    pub n_test: usize,
    pub config: BootstrapConfig,
}

/// Resamples the test set `n_boot` times and crosses each resample with
/// `n_z` independent partition estimates.
pub fn bootstrap_report<B, E>(base: &B, energy: &E, max_len: usize, test: &[Vec<u32>], cfg: &BootstrapConfig) -> ImprovementReport
where
    B: ArModel + ?Sized,
    E: Energy + ?Sized,
{
    assert!(!test.is_empty() && cfg.n_boot > 0 && cfg.n_z > 0);
    let g: Vec<f64> = test.par_iter().map(|x| energy.score(x)).collect();
    let zs: Vec<f64> = (0..cfg.n_z as u64)
        .map(|i| estimate_z(base, energy, max_len, cfg.m, derive_seed(cfg.seed, &[0, i])).mean)
        .collect();
    let n = test.len();
    let resamples: Vec<(f64, usize)> = (0..cfg.n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(cfg.seed, &[1, b]);
            (0..n).fold((0.0, 0), |(s, w), _| {
                let i = rng.gen_range(0..n);
                (s + g[i], w + test[i].len() + 1)
            })
        })
        .collect();
    let mut ll = Vec::with_capacity(cfg.n_boot * cfg.n_z);
    let mut ratio = Vec::with_capacity(ll.capacity());
    for &(sum_g, w) in &resamples {
        for &z in &zs {
            ll.push(sum_g / n as f64 - z.ln());
            ratio.push(ratio_from_parts(sum_g, n, w, z));
        }
    }
    let mean = running_mean(&ll);
    let ratio_mean = running_mean(&ratio);
    ll.sort_by(f64::total_cmp);
    ratio.sort_by(f64::total_cmp);
    let conservative = percentile(&ratio, 0.975);
    ImprovementReport {
        ll_improvement_ci: (percentile(&ll, 0.025), percentile(&ll, 0.975), mean),
        ppl_ratio_conservative: conservative,
        ppl_ratio_mean: ratio_mean,
        ppl_improvement_percent: 100.0 * (1.0 - conservative),
        n_test: n,
        config: cfg.clone(),
    }
}
