//! Locally normalized models over `{0,1}` with an end marker, and the exact
//! trie model of a length-restricted language.

use std::collections::HashMap;

use num::{BigRational, One, Zero};

use super::{LanguageError, SatWeightedLanguage, Symbol, Variant};
use crate::bits::BitString;

/// Largest total string length accepted by [`build_trie_model`].
pub const DEFAULT_TRIE_CAP: usize = 20;

/// Upper bound on stored trie nodes.
const NODE_BUDGET: usize = 1 << 21;

pub trait LocalModel {
    /// Longest string the model can score.
    fn max_len(&self) -> usize;

    /// `[q(0|prefix), q(1|prefix), q($|prefix)]`, or `None` when the prefix
    /// lies outside the model's support.
    fn conditional(&self, prefix: &BitString) -> Option<[BigRational; 3]>;
}

/// `q(0) = q(1) = q($) = 1/3` after every prefix.
#[derive(Clone, Copy, Debug)]
pub struct UniformModel {
    pub max_len: usize,
}

impl LocalModel for UniformModel {
    fn max_len(&self) -> usize {
        self.max_len
    }

    fn conditional(&self, prefix: &BitString) -> Option<[BigRational; 3]> {
        (prefix.len() <= self.max_len).then(|| {
            let third = BigRational::new(1.into(), 3.into());
            [third.clone(), third.clone(), third]
        })
    }
}

/// Exact conditionals of a language restricted to strings of length at most
/// `max_len`. Only prefixes with positive mass are stored.
#[derive(Clone, Debug)]
pub struct TrieModel {
    max_len: usize,
    mass: HashMap<BitString, BigRational>,
}

impl TrieModel {
    /// Total mass `Z` of the restricted language.
    pub fn total_mass(&self) -> BigRational {
        self.mass.get(&BitString::new()).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Number of stored (reachable) prefixes.
    pub fn node_count(&self) -> usize {
        self.mass.len()
    }

    pub fn contains(&self, prefix: &BitString) -> bool {
        self.mass.contains_key(prefix)
    }

    pub fn prefix_mass(&self, prefix: &BitString) -> BigRational {
        self.mass.get(prefix).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Reachable prefixes in no particular order.
    pub fn prefixes(&self) -> impl Iterator<Item = &BitString> {
        self.mass.keys()
    }
}

impl LocalModel for TrieModel {
    fn max_len(&self) -> usize {
        self.max_len
    }

    fn conditional(&self, prefix: &BitString) -> Option<[BigRational; 3]> {
        let z = self.mass.get(prefix)?;
        let z0 = self.prefix_mass(&prefix.with(false));
        let z1 = self.prefix_mass(&prefix.with(true));
        let end = z - &z0 - &z1;
        Some([z0 / z, z1 / z, end / z])
    }
}

/// Builds the trie of `lang` restricted to strings of length at most `n`.
/// Masses are accumulated bottom-up from [`SatWeightedLanguage::weight`], so
/// this is independent of the closed-form counting in `prefix_mass`.
pub fn build_trie_model(lang: &SatWeightedLanguage, n: usize) -> Result<TrieModel, LanguageError> {
    build_trie_model_capped(lang, n, DEFAULT_TRIE_CAP)
}

pub fn build_trie_model_capped(lang: &SatWeightedLanguage, n: usize, cap: usize) -> Result<TrieModel, LanguageError> {
    if n > cap {
        return Err(LanguageError::Capacity { n, cap });
    }
    let full = matches!(lang.variant(), Variant::FullSupport { .. });
    if full && (1usize << (n + 1)) > NODE_BUDGET {
        return Err(LanguageError::Capacity { n, cap: NODE_BUDGET.ilog2() as usize - 1 });
    }
    let restricted = lang.restricted(n);
    let mut mass = HashMap::new();
    let mut prefix = BitString::new();
    fill(&restricted, full, n, &mut prefix, &mut mass)?;
    Ok(TrieModel { max_len: n, mass })
}

fn fill(
    lang: &SatWeightedLanguage,
    full: bool,
    n: usize,
    prefix: &mut BitString,
    mass: &mut HashMap<BitString, BigRational>,
) -> Result<BigRational, LanguageError> {
    let mut z = lang.weight(prefix);
    if prefix.len() < n && (full || lang.member_may_extend(prefix)) {
        for b in [false, true] {
            prefix.push(b);
            let child = fill(lang, full, n, prefix, mass);
            prefix.pop();
            z += child?;
        }
    }
    if !z.is_zero() {
        if mass.len() >= NODE_BUDGET {
            return Err(LanguageError::Capacity { n: mass.len(), cap: NODE_BUDGET });
        }
        mass.insert(prefix.clone(), z.clone());
    }
    Ok(z)
}

/// `prod_t q(x_t | x_{<t}) * q($ | x)`; zero once the prefix leaves the
/// model's support.
pub fn chain_rule_score<M: LocalModel + ?Sized>(q: &M, x: &BitString) -> Result<BigRational, LanguageError> {
    if x.len() > q.max_len() {
        return Err(LanguageError::TooLong { len: x.len(), max: q.max_len() });
    }
    let mut score = BigRational::one();
    let mut prefix = BitString::new();
    for &b in x.bits() {
        let Some(dist) = q.conditional(&prefix) else { return Ok(BigRational::zero()) };
        score *= &dist[Symbol::bit(b).index()];
        if score.is_zero() {
            return Ok(score);
        }
        prefix.push(b);
    }
    match q.conditional(&prefix) {
        Some(dist) => Ok(score * &dist[Symbol::End.index()]),
        None => Ok(BigRational::zero()),
    }
}
