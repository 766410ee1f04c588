//! Exact weighted languages built from satisfiable formulas.
//!
//! A member is `enc(f) . a` where `a` satisfies `f`; it weighs
//! `(1/3)^{|x|+1}`. The full-support variant adds `eps * (1/9)^{|x|+1}` to
//! every string so that no prefix has zero mass.

mod separation;
mod trie;

pub use separation::{separation_gap, SeparationGap, SeparationProbe};
pub use trie::{build_trie_model, chain_rule_score, LocalModel, TrieModel, UniformModel, DEFAULT_TRIE_CAP};

use num::{BigInt, BigRational, One, Zero};
use thiserror::Error;

use crate::bits::BitString;
use crate::formula::{dec_prefix, Cnf3Formula, Decoded, Formula, FormulaError};

/// Length cap for enumerating formula encodings that extend a prefix which
/// stops inside an encoding.
pub const DEFAULT_PREFIX_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LanguageError {
    #[error("prefix {prefix} has zero mass; its conditionals are undefined")]
    ZeroMass { prefix: BitString },
    #[error("prefix {prefix} stops inside an encoding; its mass is only known up to length {cap}")]
    Inexact { prefix: BitString, cap: usize },
    #[error("string of length {len} exceeds the model limit {max}")]
    TooLong { len: usize, max: usize },
    #[error("length {n} exceeds the capacity {cap}")]
    Capacity { n: usize, cap: usize },
    #[error("k = {k} is below the minimum {min} for this lambda")]
    KBelowMinimum { k: u32, min: u32 },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Variant {
    MembersOnly,
    FullSupport { epsilon: BigRational },
}

/// Which decoded formulas may start a member.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormulaClass {
    Any,
    /// Only encodings of strict 3-CNF trees (see [`Cnf3Formula::to_formula`]).
    Cnf3,
}

/// Next-symbol alphabet: the two bits and the end marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    Zero,
    One,
    End,
}

impl Symbol {
    pub const ALL: [Symbol; 3] = [Symbol::Zero, Symbol::One, Symbol::End];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn bit(b: bool) -> Symbol {
        if b {
            Symbol::One
        } else {
            Symbol::Zero
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixMass {
    /// Mass of member continuations.
    pub z1: BigRational,
    /// Geometric tail `sum (1/9)^{|x|+1}` over continuations, before `eps`.
    pub z2: BigRational,
    /// `z1` plus `eps * z2` (full support) or `z1` alone.
    pub total: BigRational,
    /// False when `z1` was truncated at the enumeration cap.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SatWeightedLanguage {
    variant: Variant,
    class: FormulaClass,
    max_len: Option<usize>,
    prefix_cap: usize,
}

pub(crate) fn recip_pow(base: u32, exp: usize) -> BigRational {
    BigRational::new(BigInt::one(), num::pow(BigInt::from(base), exp))
}

impl SatWeightedLanguage {
    pub fn members_only() -> Self {
        Self { variant: Variant::MembersOnly, class: FormulaClass::Any, max_len: None, prefix_cap: DEFAULT_PREFIX_CAP }
    }

    pub fn full_support(epsilon: BigRational) -> Self {
        assert!(epsilon > BigRational::zero(), "epsilon must be positive");
        Self { variant: Variant::FullSupport { epsilon }, ..Self::members_only() }
    }

    /// Full support with `eps = 1`.
    pub fn full_support_default() -> Self {
        Self::full_support(BigRational::one())
    }

    pub fn with_class(mut self, class: FormulaClass) -> Self {
        self.class = class;
        self
    }

    pub fn with_prefix_cap(mut self, cap: usize) -> Self {
        self.prefix_cap = cap;
        self
    }

    /// The same language with every string longer than `max_len` removed.
    /// Prefix masses of a restricted language are always exact.
    pub fn restricted(&self, max_len: usize) -> Self {
        Self { max_len: Some(max_len), ..self.clone() }
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn class(&self) -> FormulaClass {
        self.class
    }

    pub fn max_len(&self) -> Option<usize> {
        self.max_len
    }

    pub fn epsilon(&self) -> Option<&BigRational> {
        match &self.variant {
            Variant::MembersOnly => None,
            Variant::FullSupport { epsilon } => Some(epsilon),
        }
    }

    fn admits(&self, f: &Formula) -> bool {
        match self.class {
            FormulaClass::Any => true,
            FormulaClass::Cnf3 => Cnf3Formula::from_formula(f).is_some(),
        }
    }

    fn fits(&self, len: usize) -> bool {
        self.max_len.is_none_or(|n| len <= n)
    }

    /// True iff `x` is `enc(f) . a` with `a` satisfying an admitted `f`.
    pub fn is_member(&self, x: &BitString) -> bool {
        if !self.fits(x.len()) {
            return false;
        }
        match dec_prefix(x.bits()) {
            Decoded::Complete { formula, consumed } => {
                x.len() - consumed == formula.var_count()
                    && self.admits(&formula)
                    && formula.evaluate(&x.slice(consumed, x.len())).expect("length checked")
            }
            _ => false,
        }
    }

    pub fn weight(&self, x: &BitString) -> BigRational {
        if !self.fits(x.len()) {
            return BigRational::zero();
        }
        let mut w = if self.is_member(x) { recip_pow(3, x.len() + 1) } else { BigRational::zero() };
        if let Some(eps) = self.epsilon() {
            w += eps * recip_pow(9, x.len() + 1);
        }
        w
    }

    /// Tail `sum_{x extends prefix} (1/9)^{|x|+1}` over strings of length
    /// `m = |prefix|` and up, respecting any length restriction.
    fn z2(&self, m: usize) -> BigRational {
        let head = recip_pow(9, m + 1);
        match self.max_len {
            None => head * BigRational::new(9.into(), 7.into()),
            Some(n) if m > n => BigRational::zero(),
            Some(n) => {
                let ratio = BigRational::new(2.into(), 9.into());
                let tail = BigRational::one() - num::pow(ratio, n - m + 1);
                head * tail * BigRational::new(9.into(), 7.into())
            }
        }
    }

    pub fn prefix_mass(&self, prefix: &BitString) -> Result<PrefixMass, LanguageError> {
        let (z1, exact) = match dec_prefix(prefix.bits()) {
            Decoded::Complete { formula, consumed } => (self.assignment_mass(&formula, consumed, prefix)?, true),
            Decoded::Invalid(_) => (BigRational::zero(), true),
            Decoded::Truncated => {
                let cap = self.max_len.unwrap_or(self.prefix_cap);
                let mut bits = prefix.clone();
                (self.encoding_mass(&mut bits, cap)?, self.max_len.is_some())
            }
        };
        let z2 = self.z2(prefix.len());
        let total = match self.epsilon() {
            Some(eps) => &z1 + eps * &z2,
            None => z1.clone(),
        };
        Ok(PrefixMass { z1, z2, total, exact })
    }

    /// Shape `enc(f) . partial`: count satisfiers extending the partial
    /// assignment.
    fn assignment_mass(&self, f: &Formula, consumed: usize, prefix: &BitString) -> Result<BigRational, LanguageError> {
        let j = f.var_count();
        let full = consumed + j;
        if prefix.len() > full || !self.fits(full) || !self.admits(f) {
            return Ok(BigRational::zero());
        }
        let count = f.count_satisfying_with_prefix(&prefix.bits()[consumed..])?;
        Ok(BigRational::from_integer(count.into()) * recip_pow(3, full + 1))
    }

    /// Shape "inside an encoding": enumerate every encoding extending `bits`
    /// of length at most `cap`, then all of their satisfiers.
    fn encoding_mass(&self, bits: &mut BitString, cap: usize) -> Result<BigRational, LanguageError> {
        match dec_prefix(bits.bits()) {
            Decoded::Invalid(_) => Ok(BigRational::zero()),
            Decoded::Complete { formula, consumed } => {
                let full = consumed + formula.var_count();
                if full > cap || !self.admits(&formula) {
                    return Ok(BigRational::zero());
                }
                let count = formula.count_satisfying()?;
                Ok(BigRational::from_integer(count.into()) * recip_pow(3, full + 1))
            }
            Decoded::Truncated if bits.len() >= cap => Ok(BigRational::zero()),
            Decoded::Truncated => {
                let mut sum = BigRational::zero();
                for b in [false, true] {
                    bits.push(b);
                    let part = self.encoding_mass(bits, cap);
                    bits.pop();
                    sum += part?;
                }
                Ok(sum)
            }
        }
    }

    /// `p(sym | prefix)`. Requires an exact, positive prefix mass.
    pub fn local_prob(&self, prefix: &BitString, sym: Symbol) -> Result<BigRational, LanguageError> {
        Ok(self.local_distribution(prefix)?[sym.index()].clone())
    }

    /// `[p(0|prefix), p(1|prefix), p($|prefix)]`.
    pub fn local_distribution(&self, prefix: &BitString) -> Result<[BigRational; 3], LanguageError> {
        let z = self.checked_mass(prefix)?;
        let z0 = self.checked_mass(&prefix.with(false))?;
        let z1 = self.checked_mass(&prefix.with(true))?;
        if z.is_zero() {
            return Err(LanguageError::ZeroMass { prefix: prefix.clone() });
        }
        let end = self.weight(prefix) / &z;
        Ok([z0 / &z, z1 / &z, end])
    }

    fn checked_mass(&self, prefix: &BitString) -> Result<BigRational, LanguageError> {
        let m = self.prefix_mass(prefix)?;
        if !m.exact {
            return Err(LanguageError::Inexact { prefix: prefix.clone(), cap: self.prefix_cap });
        }
        Ok(m.total)
    }

    /// Could some member start with `prefix`? Used only for pruning; it
    /// never rules out a string with positive member weight.
    pub(crate) fn member_may_extend(&self, prefix: &BitString) -> bool {
        if !self.fits(prefix.len()) {
            return false;
        }
        match dec_prefix(prefix.bits()) {
            Decoded::Invalid(_) => false,
            Decoded::Truncated => true,
            Decoded::Complete { formula, consumed } => {
                prefix.len() - consumed <= formula.var_count() && self.admits(&formula)
            }
        }
    }
}
