//! Boolean formulas over `A1..Aj`, exhaustive satisfaction oracles, the
//! indicator-variable transformations, and both codecs.

mod cnf;
mod enc;
mod random;

pub use cnf::{dimacs_decode, dimacs_encode, Clause, Cnf3Formula, DimacsError, DimacsOptions, Literal};
pub use enc::{dec, dec_prefix, enc, DecodeError, Decoded};
pub use random::random_formula;

use std::fmt;

use num::{BigInt, BigRational, One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;

/// Default number of variables up to which exhaustive enumeration is allowed.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("assignment has {got} bits but the formula has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{vars} variables exceeds the enumeration cap of {cap}")]
    Capacity { vars: usize, cap: usize },
    #[error("variable A{index} is outside A1..A{var_count}")]
    VarOutOfRange { index: u32, var_count: usize },
    #[error("variable A{index} is never mentioned")]
    Unmentioned { index: usize },
    #[error("blow-up parameter k must be at least 1, got {0}")]
    InvalidK(u32),
    #[error("lambda must be at least 1")]
    InvalidLambda,
}

/// Expression tree. `And(vec![])` is true and `Or(vec![])` is false.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
    /// 1-based variable index.
    Var(u32),
}

impl Expr {
    pub fn var(i: u32) -> Expr {
        Expr::Var(i)
    }

    pub fn neg(i: u32) -> Expr {
        Expr::Not(Box::new(Expr::Var(i)))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::And(cs) | Expr::Or(cs) => 1 + cs.iter().map(Expr::node_count).sum::<usize>(),
            Expr::Not(c) => 1 + c.node_count(),
            Expr::Var(_) => 1,
        }
    }

    fn max_var(&self) -> u32 {
        match self {
            Expr::And(cs) | Expr::Or(cs) => cs.iter().map(Expr::max_var).max().unwrap_or(0),
            Expr::Not(c) => c.max_var(),
            Expr::Var(i) => *i,
        }
    }

    fn mark_vars(&self, seen: &mut [bool]) {
        match self {
            Expr::And(cs) | Expr::Or(cs) => cs.iter().for_each(|c| c.mark_vars(seen)),
            Expr::Not(c) => c.mark_vars(seen),
            Expr::Var(i) => seen[*i as usize - 1] = true,
        }
    }

    fn eval(&self, bits: &[bool]) -> bool {
        match self {
            Expr::And(cs) => cs.iter().all(|c| c.eval(bits)),
            Expr::Or(cs) => cs.iter().any(|c| c.eval(bits)),
            Expr::Not(c) => !c.eval(bits),
            Expr::Var(i) => bits[*i as usize - 1],
        }
    }

    fn renamed(&self, offset: u32) -> Expr {
        match self {
            Expr::And(cs) => Expr::And(cs.iter().map(|c| c.renamed(offset)).collect()),
            Expr::Or(cs) => Expr::Or(cs.iter().map(|c| c.renamed(offset)).collect()),
            Expr::Not(c) => Expr::not(c.renamed(offset)),
            Expr::Var(i) => Expr::Var(i + offset),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, cs: &[Expr], op: &str, empty: &str| {
            if cs.is_empty() {
                return f.write_str(empty);
            }
            f.write_str("(")?;
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    f.write_str(op)?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")
        };
        match self {
            Expr::And(cs) => join(f, cs, " & ", "T"),
            Expr::Or(cs) => join(f, cs, " | ", "F"),
            Expr::Not(c) => write!(f, "~{c}"),
            Expr::Var(i) => write!(f, "A{i}"),
        }
    }
}

/// A formula over variables `A1..Aj`.
///
/// Formulas built with [`Formula::new`] mention every variable in `1..=j`.
/// [`Formula::with_unused`] relaxes that to "every mentioned index is in
/// range"; such formulas evaluate and count normally but are not members of
/// the weighted languages and do not survive [`dec`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Formula {
    var_count: usize,
    body: Expr,
}

impl Formula {
    pub fn new(var_count: usize, body: Expr) -> Result<Self, FormulaError> {
        let f = Self::with_unused(var_count, body)?;
        if let Some(index) = f.first_unmentioned() {
            return Err(FormulaError::Unmentioned { index });
        }
        Ok(f)
    }

    pub fn with_unused(var_count: usize, body: Expr) -> Result<Self, FormulaError> {
        let max = body.max_var();
        if max as usize > var_count || Self::has_zero_var(&body) {
            return Err(FormulaError::VarOutOfRange { index: max, var_count });
        }
        Ok(Self { var_count, body })
    }

    /// Infers `j` as the largest mentioned index.
    pub fn from_expr(body: Expr) -> Result<Self, FormulaError> {
        let j = body.max_var() as usize;
        Self::new(j, body)
    }

    fn has_zero_var(e: &Expr) -> bool {
        match e {
            Expr::And(cs) | Expr::Or(cs) => cs.iter().any(Self::has_zero_var),
            Expr::Not(c) => Self::has_zero_var(c),
            Expr::Var(i) => *i == 0,
        }
    }

    /// The vacuously true formula with no variables.
    pub fn empty() -> Self {
        Self { var_count: 0, body: Expr::And(vec![]) }
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn first_unmentioned(&self) -> Option<usize> {
        let mut seen = vec![false; self.var_count];
        self.body.mark_vars(&mut seen);
        seen.iter().position(|s| !s).map(|i| i + 1)
    }

    pub fn mentions_all(&self) -> bool {
        self.first_unmentioned().is_none()
    }

    /// Whether `a` (bit `t` is the value of `A_{t+1}`) satisfies the formula.
    pub fn evaluate(&self, a: &BitString) -> Result<bool, FormulaError> {
        if a.len() != self.var_count {
            return Err(FormulaError::LengthMismatch { expected: self.var_count, got: a.len() });
        }
        Ok(self.body.eval(a.bits()))
    }

    pub fn count_satisfying(&self) -> Result<u64, FormulaError> {
        self.count_satisfying_capped(DEFAULT_ENUMERATION_CAP)
    }

    /// Exact `#(f)` by exhaustive enumeration of all `2^j` assignments,
    /// 64 at a time.
    pub fn count_satisfying_capped(&self, cap: usize) -> Result<u64, FormulaError> {
        let j = self.var_count;
        if j > cap || j > 40 {
            return Err(FormulaError::Capacity { vars: j, cap: cap.min(40) });
        }
        let program = Program::compile(&self.body);
        let lanes = if j < 6 { (1u64 << (1u64 << j)) - 1 } else { u64::MAX };
        let blocks: u64 = if j < 6 { 1 } else { 1u64 << (j - 6) };
        let count = |block: u64| -> u64 {
            let word = program.eval_block(j, block);
            (word & lanes).count_ones() as u64
        };
        if blocks >= 256 {
            Ok((0..blocks).into_par_iter().map(count).sum())
        } else {
            Ok((0..blocks).map(count).sum())
        }
    }

    /// Number of satisfiers whose first `prefix.len()` bits equal `prefix`.
    pub fn count_satisfying_with_prefix(&self, prefix: &[bool]) -> Result<u64, FormulaError> {
        let j = self.var_count;
        if prefix.len() > j {
            return Ok(0);
        }
        if j > DEFAULT_ENUMERATION_CAP {
            return Err(FormulaError::Capacity { vars: j, cap: DEFAULT_ENUMERATION_CAP });
        }
        let free = j - prefix.len();
        let fixed = prefix.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        let lo = fixed << free;
        let hi = (fixed + 1) << free;
        let program = Program::compile(&self.body);
        let count = |block: u64| -> u64 {
            let base = block * 64;
            let first = lo.saturating_sub(base).min(64);
            let last = hi.saturating_sub(base).min(64);
            if first >= last {
                return 0;
            }
            let upper = if last == 64 { u64::MAX } else { (1u64 << last) - 1 };
            let lower = (1u64 << first) - 1;
            (program.eval_block(j, block) & upper & !lower).count_ones() as u64
        };
        let blocks = (lo / 64)..((hi - 1) / 64 + 1);
        if blocks.end - blocks.start >= 256 {
            Ok(blocks.into_par_iter().map(count).sum())
        } else {
            Ok(blocks.map(count).sum())
        }
    }

    /// All satisfying assignments in lexicographic order.
    pub fn satisfying_assignments(&self) -> Result<Vec<BitString>, FormulaError> {
        let j = self.var_count;
        if j > DEFAULT_ENUMERATION_CAP {
            return Err(FormulaError::Capacity { vars: j, cap: DEFAULT_ENUMERATION_CAP });
        }
        let program = Program::compile(&self.body);
        let blocks: u64 = if j < 6 { 1 } else { 1u64 << (j - 6) };
        let total = 1u64 << j;
        let mut out = Vec::new();
        for block in 0..blocks {
            let mut word = program.eval_block(j, block);
            while word != 0 {
                let lane = word.trailing_zeros() as u64;
                word &= word - 1;
                let index = block * 64 + lane;
                if index < total {
                    out.push(BitString::from_uint(index, j));
                }
            }
        }
        Ok(out)
    }

    pub fn is_satisfiable(&self) -> Result<bool, FormulaError> {
        Ok(self.count_satisfying()? > 0)
    }

    /// Renames every `A_i` to `A_{i+1}`. The result has `j + 1` variables and
    /// leaves `A1` unmentioned; it is only meant as input to [`Formula::add_one`].
    pub fn shift(&self) -> Formula {
        Formula { var_count: self.var_count + 1, body: self.body.renamed(1) }
    }

    /// `(~A1 & ... & ~A_{j+1}) | (A1 & Shift(f))`: one more satisfier than `f`.
    pub fn add_one(&self) -> Formula {
        self.add_one_and_blow_up(1).expect("k = 1 is valid")
    }

    /// Generalises [`Formula::add_one`] with `k - 1` unconstrained trailing
    /// variables. Satisfiers are `0^{j+k}` and `1·a·b` for every satisfier `a`
    /// of `f` and every `b` in `{0,1}^{k-1}`, so `#` becomes `1 + 2^{k-1}·#(f)`.
    pub fn add_one_and_blow_up(&self, k: u32) -> Result<Formula, FormulaError> {
        if k < 1 {
            return Err(FormulaError::InvalidK(k));
        }
        let total = self.var_count + k as usize;
        let all_zero = Expr::And((1..=total as u32).map(Expr::neg).collect());
        let shifted = self.shift();
        let indicator = Expr::And(vec![Expr::var(1), shifted.body]);
        Ok(Formula { var_count: total, body: Expr::Or(vec![all_zero, indicator]) })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.body)
    }
}

/// Postfix program evaluated bit-parallel over 64 assignments per word.
struct Program {
    ops: Vec<Op>,
}

enum Op {
    Var(u32),
    And(usize),
    Or(usize),
    Not,
}

impl Program {
    fn compile(e: &Expr) -> Self {
        let mut ops = Vec::with_capacity(e.node_count());
        fn walk(e: &Expr, ops: &mut Vec<Op>) {
            match e {
                Expr::And(cs) => {
                    cs.iter().for_each(|c| walk(c, ops));
                    ops.push(Op::And(cs.len()));
                }
                Expr::Or(cs) => {
                    cs.iter().for_each(|c| walk(c, ops));
                    ops.push(Op::Or(cs.len()));
                }
                Expr::Not(c) => {
                    walk(c, ops);
                    ops.push(Op::Not);
                }
                Expr::Var(i) => ops.push(Op::Var(*i)),
            }
        }
        walk(e, &mut ops);
        Self { ops }
    }

    /// Assignment index `v` encodes `A_t` as bit `j - t` of `v`, so index
    /// order is lexicographic order. Lane `l` of `block` is index `64·block + l`.
    fn eval_block(&self, j: usize, block: u64) -> u64 {
        const LANE_MASKS: [u64; 6] = [
            0xAAAA_AAAA_AAAA_AAAA,
            0xCCCC_CCCC_CCCC_CCCC,
            0xF0F0_F0F0_F0F0_F0F0,
            0xFF00_FF00_FF00_FF00,
            0xFFFF_0000_FFFF_0000,
            0xFFFF_FFFF_0000_0000,
        ];
        let mut stack: Vec<u64> = Vec::with_capacity(16);
        for op in &self.ops {
            match *op {
                Op::Var(t) => {
                    let shift = j - t as usize;
                    let word = if shift < 6 {
                        LANE_MASKS[shift]
                    } else if (block >> (shift - 6)) & 1 == 1 {
                        u64::MAX
                    } else {
                        0
                    };
                    stack.push(word);
                }
                Op::And(n) => {
                    let at = stack.len() - n;
                    let v = stack.drain(at..).fold(u64::MAX, |a, b| a & b);
                    stack.push(v);
                }
                Op::Or(n) => {
                    let at = stack.len() - n;
                    let v = stack.drain(at..).fold(0, |a, b| a | b);
                    stack.push(v);
                }
                Op::Not => {
                    let v = stack.pop().expect("operand");
                    stack.push(!v);
                }
            }
        }
        stack.pop().expect("program leaves one value")
    }
}

/// Approximation factor `lambda >= 1`, stored exactly as `lambda^2` so that
/// irrational factors such as `sqrt(2)` stay exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lambda {
    squared: BigRational,
}

impl Lambda {
    pub fn from_rational(lambda: BigRational) -> Result<Self, FormulaError> {
        if lambda < BigRational::one() {
            return Err(FormulaError::InvalidLambda);
        }
        Ok(Self { squared: &lambda * &lambda })
    }

    pub fn from_square(squared: BigRational) -> Result<Self, FormulaError> {
        if squared < BigRational::one() {
            return Err(FormulaError::InvalidLambda);
        }
        Ok(Self { squared })
    }

    pub fn from_integer(lambda: i64) -> Result<Self, FormulaError> {
        Self::from_rational(BigRational::from_integer(BigInt::from(lambda)))
    }

    /// Nearest exact rational to a float input, then squared. Use
    /// [`Lambda::from_square`] for exact irrational factors.
    pub fn from_f64(lambda: f64) -> Result<Self, FormulaError> {
        let r = BigRational::from_float(lambda).ok_or(FormulaError::InvalidLambda)?;
        Self::from_rational(r)
    }

    pub fn squared(&self) -> &BigRational {
        &self.squared
    }

    pub fn to_f64(&self) -> f64 {
        self.squared.to_f64().unwrap_or(f64::NAN).sqrt()
    }
}

/// Smallest `k >= 1` with `1 + 2^{k-1} > lambda^2`.
pub fn choose_k(lambda: &Lambda) -> u32 {
    let mut k = 1u32;
    loop {
        let gap = BigRational::from_integer(BigInt::one() + (BigInt::one() << (k - 1) as usize));
        if gap > lambda.squared {
            return k;
        }
        k += 1;
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// `(A1 | ~A2 | A3) & (A1 | ~A4)`
    pub(crate) fn phi_ex() -> Formula {
        Formula::new(
            4,
            Expr::And(vec![
                Expr::Or(vec![Expr::var(1), Expr::neg(2), Expr::var(3)]),
                Expr::Or(vec![Expr::var(1), Expr::neg(4)]),
            ]),
        )
        .unwrap()
    }

    fn contradiction() -> Formula {
        Formula::new(1, Expr::And(vec![Expr::var(1), Expr::neg(1)])).unwrap()
    }

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn brute_count(f: &Formula) -> u64 {
        BitString::all_of_len(f.var_count()).filter(|a| f.evaluate(a).unwrap()).count() as u64
    }

    #[test]
    fn evaluate_examples() {
        assert!(phi_ex().evaluate(&bits("1101")).unwrap());
        assert!(!phi_ex().evaluate(&bits("0101")).unwrap());
        assert!(!contradiction().evaluate(&bits("0")).unwrap());
        assert_eq!(
            phi_ex().evaluate(&bits("110")),
            Err(FormulaError::LengthMismatch { expected: 4, got: 3 })
        );
    }

    #[test]
    fn count_examples() {
        assert_eq!(brute_count(&phi_ex()), 11);
        assert_eq!(phi_ex().count_satisfying().unwrap(), 11);
        assert_eq!(Formula::empty().count_satisfying().unwrap(), 1);
        assert_eq!(contradiction().count_satisfying().unwrap(), 0);
    }

    #[test]
    fn count_over_cap_is_capacity_error() {
        let body = Expr::And((1..=25).map(Expr::var).collect());
        let f = Formula::new(25, body).unwrap();
        assert_eq!(f.count_satisfying(), Err(FormulaError::Capacity { vars: 25, cap: 24 }));
        assert_eq!(f.count_satisfying_capped(25).unwrap(), 1);
    }

    #[test]
    fn bit_parallel_matches_scalar_across_block_boundary() {
        // 8 variables: four blocks of 64 lanes.
        let body = Expr::Or(vec![
            Expr::And(vec![Expr::var(1), Expr::neg(8)]),
            Expr::And(vec![Expr::var(3), Expr::var(7), Expr::neg(2)]),
            Expr::And(vec![Expr::var(4), Expr::var(5), Expr::var(6)]),
        ]);
        let f = Formula::new(8, body).unwrap();
        assert_eq!(f.count_satisfying().unwrap(), brute_count(&f));
        let sats = f.satisfying_assignments().unwrap();
        let brute: Vec<_> = BitString::all_of_len(8).filter(|a| f.evaluate(a).unwrap()).collect();
        assert_eq!(sats, brute);
    }

    #[test]
    fn prefix_counts_match_filtering() {
        let f = phi_ex().add_one_and_blow_up(3).unwrap();
        let sats = f.satisfying_assignments().unwrap();
        for len in 0..=f.var_count() {
            for p in BitString::all_of_len(len) {
                let expect = sats.iter().filter(|a| p.is_prefix_of(a)).count() as u64;
                assert_eq!(f.count_satisfying_with_prefix(p.bits()).unwrap(), expect, "prefix {p}");
            }
        }
        assert_eq!(f.count_satisfying_with_prefix(&[false; 9]).unwrap(), 0);
    }

    #[test]
    fn invariant_checks() {
        assert_eq!(
            Formula::new(3, Expr::Or(vec![Expr::var(1), Expr::var(3)])),
            Err(FormulaError::Unmentioned { index: 2 })
        );
        assert!(matches!(
            Formula::new(1, Expr::var(2)),
            Err(FormulaError::VarOutOfRange { index: 2, .. })
        ));
        assert!(Formula::with_unused(3, Expr::var(1)).is_ok());
    }

    #[test]
    fn shift_examples() {
        let f = Formula::new(2, Expr::Or(vec![Expr::var(1), Expr::neg(2)])).unwrap();
        assert_eq!(f.shift().body(), &Expr::Or(vec![Expr::var(2), Expr::neg(3)]));
        assert_eq!(f.shift().var_count(), 3);
        let v = Formula::new(1, Expr::var(1)).unwrap();
        assert_eq!(v.shift().body(), &Expr::var(2));
        assert_eq!(v.shift().shift().body(), &Expr::var(3));
    }

    #[test]
    fn shift_preserves_count_over_window() {
        let f = phi_ex();
        let s = f.shift();
        // Satisfiers of the shifted formula are {0,1} x satisfiers of f.
        assert_eq!(s.count_satisfying().unwrap(), 2 * f.count_satisfying().unwrap());
    }

    #[test]
    fn add_one_examples() {
        let g = phi_ex().add_one();
        assert_eq!(g.count_satisfying().unwrap(), 12);
        assert!(g.mentions_all());

        let c = contradiction().add_one();
        assert_eq!(c.satisfying_assignments().unwrap(), vec![bits("00")]);

        let a1 = Formula::new(1, Expr::var(1)).unwrap().add_one();
        assert_eq!(a1.satisfying_assignments().unwrap(), vec![bits("00"), bits("11")]);
    }

    #[test]
    fn blow_up_examples() {
        let a1 = Formula::new(1, Expr::var(1)).unwrap();
        let b = a1.add_one_and_blow_up(3).unwrap();
        assert_eq!(b.var_count(), 4);
        assert_eq!(brute_count(&b), 5);
        assert_eq!(contradiction().add_one_and_blow_up(4).unwrap().count_satisfying().unwrap(), 1);
        let f = phi_ex();
        assert_eq!(
            f.add_one_and_blow_up(1).unwrap().satisfying_assignments().unwrap(),
            f.add_one().satisfying_assignments().unwrap()
        );
        assert_eq!(f.add_one_and_blow_up(0), Err(FormulaError::InvalidK(0)));
    }

    #[test]
    fn blow_up_satisfier_shape() {
        let f = phi_ex();
        let k = 3;
        let b = f.add_one_and_blow_up(k).unwrap();
        let sats = b.satisfying_assignments().unwrap();
        let mut expect = vec![BitString::zeros(4 + k as usize)];
        for a in f.satisfying_assignments().unwrap() {
            for tail in BitString::all_of_len(k as usize - 1) {
                expect.push(BitString::from_bits(vec![true]).concat(&a).concat(&tail));
            }
        }
        expect.sort();
        assert_eq!(sats, expect);
    }

    #[test]
    fn choose_k_examples() {
        assert_eq!(choose_k(&Lambda::from_integer(1).unwrap()), 1);
        assert_eq!(choose_k(&Lambda::from_integer(2).unwrap()), 3);
        assert_eq!(choose_k(&Lambda::from_integer(10).unwrap()), 8);
        let sqrt2 = Lambda::from_square(BigRational::from_integer(2.into())).unwrap();
        assert_eq!(choose_k(&sqrt2), 2);
        assert!(Lambda::from_integer(0).is_err());
    }
}
