use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, truncated_log_prob, Energy, RebmError};
use crate::seqmodel::ArModel;

/// A distribution with finite support, as `(string, probability)` pairs.
pub type FiniteDist = Vec<(Vec<u32>, f64)>;

/// `KL[p || q]` with `log_q` evaluated on the support of `p`.
pub fn exact_kl(p: &FiniteDist, log_q: impl Fn(&[u32]) -> f64 + Sync) -> Result<f64, RebmError> {
    let terms: Vec<Result<f64, RebmError>> = p
        .par_iter()
        .filter(|(_, px)| *px > 0.0)
        .map(|(x, px)| {
            let lq = log_q(x);
            if lq == f64::NEG_INFINITY {
                return Err(RebmError::UndefinedKl { x: x.clone() });
            }
            Ok(px * (px.ln() - lq))
        })
        .collect();
    terms.into_iter().sum()
}

/// `log sum_x q0(x) exp g(x)` over `universe`, which must hold every string
/// the truncated base can emit.
pub fn exact_z<B, E>(base: &B, energy: &E, max_len: usize, universe: &[Vec<u32>]) -> f64
where
    B: ArModel + ?Sized,
    E: Energy + ?Sized,
{
    let terms: Vec<f64> =
        universe.par_iter().map(|x| truncated_log_prob(base, x, max_len) + energy.score(x)).collect();
    log_sum_exp(&terms)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlSides {
    /// `KL[p || q'_θ] - KL[p || q''_θ]`, from the normalized residual models.
    pub lhs: f64,
    /// `KL[p || q'_0] - KL[p || q''_0] + log Z' / Z''`.
    pub rhs: f64,
}

/// Both sides of the relation between residual-model and base-model KL
/// gaps when two bases share one energy `g`.
pub fn kl_decomposition<A, B, E>(
    p: &FiniteDist,
    q0a: &A,
    q0b: &B,
    energy: &E,
    max_len: usize,
    universe: &[Vec<u32>],
) -> Result<KlSides, RebmError>
where
    A: ArModel + ?Sized,
    B: ArModel + ?Sized,
    E: Energy + ?Sized,
{
    let log_za = exact_z(q0a, energy, max_len, universe);
    let log_zb = exact_z(q0b, energy, max_len, universe);
    let kl_theta_a = exact_kl(p, |x| truncated_log_prob(q0a, x, max_len) + energy.score(x) - log_za)?;
    let kl_theta_b = exact_kl(p, |x| truncated_log_prob(q0b, x, max_len) + energy.score(x) - log_zb)?;
    let kl_a = exact_kl(p, |x| truncated_log_prob(q0a, x, max_len))?;
    let kl_b = exact_kl(p, |x| truncated_log_prob(q0b, x, max_len))?;
    Ok(KlSides { lhs: kl_theta_a - kl_theta_b, rhs: kl_a - kl_b + (log_za - log_zb) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rebm::{toy, Activation, Constant, Discriminator};
    use crate::seqmodel::{NgramModel, Vocab};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_base_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = Vocab { context: 0, output: 3 };
        let q = NgramModel::with_random_init(v, 2, 1.0, &mut rng);
        let d = Discriminator::with_random_init(2, Activation::Tanh2, 1.0, &mut rng);
        let universe = toy::all_strings(2, 4);
        let p: FiniteDist = universe.iter().take(5).map(|x| (x.clone(), 0.2)).collect();
        let s = kl_decomposition(&p, &q, &q, &d, 4, &universe).unwrap();
        assert!(s.lhs.abs() < 1e-12 && s.rhs.abs() < 1e-12);
    }

    #[test]
    fn zero_energy_gives_base_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = Vocab { context: 0, output: 3 };
        let a = NgramModel::with_random_init(v, 1, 1.0, &mut rng);
        let b = NgramModel::with_random_init(v, 2, 1.0, &mut rng);
        let universe = toy::all_strings(2, 4);
        assert!(exact_z(&a, &Constant(0.0), 4, &universe).abs() < 1e-12);
        let p: FiniteDist = vec![(vec![0, 1], 0.5), (vec![1], 0.25), (vec![], 0.25)];
        let s = kl_decomposition(&p, &a, &b, &Constant(0.0), 4, &universe).unwrap();
        let gap = exact_kl(&p, |x| truncated_log_prob(&a, x, 4)).unwrap()
            - exact_kl(&p, |x| truncated_log_prob(&b, x, 4)).unwrap();
        assert!((s.lhs - gap).abs() < 1e-12 && (s.rhs - gap).abs() < 1e-12);
    }

    #[test]
    fn undefined_kl_is_an_error() {
        let p: FiniteDist = vec![(vec![1], 1.0)];
        let r = exact_kl(&p, |_| f64::NEG_INFINITY);
        assert!(matches!(r, Err(RebmError::UndefinedKl { .. })));
    }
}
