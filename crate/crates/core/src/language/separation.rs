//! Local-probability probes that separate satisfiable from unsatisfiable
//! formulas after the indicator blow-up.

use num::{BigInt, BigRational, One, Zero};
use serde::Serialize;

use super::{recip_pow, LanguageError, SatWeightedLanguage, Symbol};
use crate::formula::{choose_k, enc, Formula, Lambda};

#[derive(Clone, Debug)]
pub struct SeparationProbe {
    pub lambda: Lambda,
    pub k: u32,
}

impl SeparationProbe {
    /// Uses the smallest admissible `k` for `lambda`.
    pub fn for_lambda(lambda: Lambda) -> Self {
        let k = choose_k(&lambda);
        Self { lambda, k }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeparationGap {
    pub k: u32,
    /// Length of `enc(phi')`.
    pub encoding_len: usize,
    /// `p(0 | enc(phi'))`, computed from prefix masses.
    #[serde(serialize_with = "ser_ratio")]
    pub p0: BigRational,
    /// Largest value `p0` can take when `phi` is satisfiable (one satisfier).
    #[serde(serialize_with = "ser_ratio")]
    pub bound: BigRational,
    /// The value `p0` takes when `phi` is unsatisfiable.
    #[serde(serialize_with = "ser_ratio")]
    pub unsat_value: BigRational,
    /// Guaranteed ratio between the two cases for this variant.
    #[serde(serialize_with = "ser_ratio")]
    pub ratio_floor: BigRational,
    pub decided_sat: bool,
    /// No estimate within a factor lambda of `p0` can fall on both sides:
    /// `unsat_value > lambda^2 * bound`.
    pub robust: bool,
}

fn ser_ratio<S: serde::Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

pub fn separation_gap(
    lang: &SatWeightedLanguage,
    phi: &Formula,
    probe: &SeparationProbe,
) -> Result<SeparationGap, LanguageError> {
    let min = choose_k(&probe.lambda);
    if probe.k < min {
        return Err(LanguageError::KBelowMinimum { k: probe.k, min });
    }
    let blown = phi.add_one_and_blow_up(probe.k)?;
    let x = enc(&blown);
    let p0 = lang.local_prob(&x, Symbol::Zero)?;

    // With n = |enc(phi')| and J = j + k, the zero branch holds one member
    // of weight w; satisfiers of phi contribute 2^{k-1} * #phi * w after the
    // one branch; the full-support tail adds e after each bit and 7e at x.
    let n = x.len();
    let w = recip_pow(3, n + blown.var_count() + 1);
    let e = match lang.epsilon() {
        Some(eps) => eps * recip_pow(9, n + 1) / BigRational::from_integer(7.into()),
        None => BigRational::zero(),
    };
    let gap = BigRational::from_integer(BigInt::one() + (BigInt::one() << (probe.k - 1) as usize));
    let nine_e = &e * BigRational::from_integer(9.into());
    let unsat_value = (&w + &e) / (&w + &nine_e);
    let bound = (&w + &e) / (&w * &gap + &nine_e);
    let ratio_floor = match lang.epsilon() {
        Some(eps) => &gap / (BigRational::one() + eps * BigRational::new(2.into(), 7.into())),
        None => gap.clone(),
    };
    let decided_sat = p0 <= bound;
    let robust = unsat_value > probe.lambda.squared() * &bound;
    Ok(SeparationGap { k: probe.k, encoding_len: n, p0, bound, unsat_value, ratio_floor, decided_sat, robust })
}
