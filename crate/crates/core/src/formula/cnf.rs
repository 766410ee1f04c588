//! 3-CNF formulas and the modified DIMACS text format, in which a clause is a
//! run of space-separated indices (negation written as a separate `-` token)
//! and clauses are joined by ` # `.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Expr, Formula, FormulaError};
use crate::bits::BitString;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    /// 1-based variable index.
    pub var: u32,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: u32) -> Self {
        Self { var, negated: false }
    }

    pub fn neg(var: u32) -> Self {
        Self { var, negated: true }
    }

    pub fn is_satisfied_by(&self, value: bool) -> bool {
        value != self.negated
    }

    fn to_expr(self) -> Expr {
        if self.negated {
            Expr::neg(self.var)
        } else {
            Expr::var(self.var)
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "- {}", self.var)
        } else {
            write!(f, "{}", self.var)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause(pub Vec<Literal>);

impl Clause {
    pub fn new(lits: Vec<Literal>) -> Self {
        Self(lits)
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    /// Exactly three literals over distinct variables.
    pub fn is_strict(&self) -> bool {
        let l = &self.0;
        l.len() == 3 && l[0].var != l[1].var && l[0].var != l[2].var && l[1].var != l[2].var
    }

    pub fn is_satisfied_by(&self, a: &[bool]) -> bool {
        self.0.iter().any(|l| l.is_satisfied_by(a[l.var as usize - 1]))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// A CNF formula whose clauses have at most three literals. Strict formulas
/// (the default from generators and the strict parser) have exactly three
/// literals over distinct variables in every clause.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cnf3Formula {
    var_count: usize,
    clauses: Vec<Clause>,
}

impl Cnf3Formula {
    pub fn new(var_count: usize, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        for c in &clauses {
            for l in c.literals() {
                if l.var == 0 || l.var as usize > var_count {
                    return Err(FormulaError::VarOutOfRange { index: l.var, var_count });
                }
            }
        }
        Ok(Self { var_count, clauses })
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn is_strict(&self) -> bool {
        self.clauses.iter().all(Clause::is_strict)
    }

    pub fn evaluate(&self, a: &BitString) -> Result<bool, FormulaError> {
        if a.len() != self.var_count {
            return Err(FormulaError::LengthMismatch { expected: self.var_count, got: a.len() });
        }
        Ok(self.clauses.iter().all(|c| c.is_satisfied_by(a.bits())))
    }

    /// Per-variable occurrence counts (index 0 is `A1`).
    pub fn use_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.var_count];
        for l in self.clauses.iter().flat_map(|c| c.literals()) {
            counts[l.var as usize - 1] += 1;
        }
        counts
    }

    /// Relabels variables so that use counts are non-increasing in the index
    /// (ties keep the original order) and drops variables that never occur.
    pub fn sorted_by_use(&self) -> Cnf3Formula {
        let counts = self.use_counts();
        let mut order: Vec<usize> = (0..self.var_count).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        let mut rename = vec![0u32; self.var_count];
        for (new, &old) in order.iter().enumerate() {
            rename[old] = new as u32 + 1;
        }
        let used = counts.iter().filter(|&&c| c > 0).count();
        let clauses = self
            .clauses
            .iter()
            .map(|c| {
                Clause(
                    c.literals()
                        .iter()
                        .map(|l| Literal { var: rename[l.var as usize - 1], negated: l.negated })
                        .collect(),
                )
            })
            .collect();
        Cnf3Formula { var_count: used, clauses }
    }

    /// Logically equivalent expression tree: a single clause becomes a bare
    /// disjunction, anything else a conjunction of disjunctions.
    pub fn to_formula(&self) -> Formula {
        let mut clauses: Vec<Expr> = self
            .clauses
            .iter()
            .map(|c| Expr::Or(c.literals().iter().map(|l| l.to_expr()).collect()))
            .collect();
        let body = if clauses.len() == 1 { clauses.pop().unwrap() } else { Expr::And(clauses) };
        Formula::with_unused(self.var_count, body).expect("indices validated on construction")
    }

    /// Inverse of [`Cnf3Formula::to_formula`] for trees of that shape.
    pub fn from_formula(f: &Formula) -> Option<Cnf3Formula> {
        fn clause(e: &Expr) -> Option<Clause> {
            let Expr::Or(lits) = e else { return None };
            let lits = lits
                .iter()
                .map(|l| match l {
                    Expr::Var(i) => Some(Literal::pos(*i)),
                    Expr::Not(inner) => match inner.as_ref() {
                        Expr::Var(i) => Some(Literal::neg(*i)),
                        _ => None,
                    },
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()?;
            let c = Clause(lits);
            c.is_strict().then_some(c)
        }
        let clauses = match f.body() {
            e @ Expr::Or(_) => vec![clause(e)?],
            Expr::And(cs) => cs.iter().map(clause).collect::<Option<Vec<_>>>()?,
            _ => return None,
        };
        Some(Cnf3Formula { var_count: f.var_count(), clauses })
    }

    pub fn count_satisfying(&self) -> Result<u64, FormulaError> {
        self.to_formula().count_satisfying()
    }
}

impl fmt::Display for Cnf3Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&dimacs_encode(self))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DimacsError {
    #[error("malformed token {token:?} at byte {position}")]
    Token { position: usize, token: String },
    #[error("variable index 0 at byte {position}")]
    ZeroIndex { position: usize },
    #[error("dangling '-' at byte {position}")]
    DanglingMinus { position: usize },
    #[error("duplicate variable A{var} in clause ending at byte {position}")]
    DuplicateVariable { position: usize, var: u32 },
    #[error("empty clause at byte {position}")]
    EmptyClause { position: usize },
    #[error("clause with {len} literals at byte {position}")]
    TooManyLiterals { position: usize, len: usize },
    #[error("clause with {len} literals at byte {position} (strict mode wants 3)")]
    TooFewLiterals { position: usize, len: usize },
    #[error("variable A{var} exceeds the declared {var_count} variables")]
    VarCount { var: u32, var_count: usize },
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DimacsOptions {
    /// Accept repeated variables inside a clause, dropping repeated literals.
    pub tolerate_duplicates: bool,
    /// Variable count; inferred as the largest index when absent.
    pub var_count: Option<usize>,
}

pub fn dimacs_encode(f: &Cnf3Formula) -> String {
    f.clauses.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" # ")
}

pub fn dimacs_decode(text: &str, opts: DimacsOptions) -> Result<Cnf3Formula, DimacsError> {
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut pending_minus: Option<usize> = None;
    let mut max_var = 0u32;
    let mut saw_any = false;

    let finish = |current: &mut Vec<Literal>, position: usize, clauses: &mut Vec<Clause>| {
        if current.is_empty() {
            return Err(DimacsError::EmptyClause { position });
        }
        let raw_len = current.len();
        if raw_len > 3 {
            return Err(DimacsError::TooManyLiterals { position, len: raw_len });
        }
        let mut lits: Vec<Literal> = Vec::with_capacity(3);
        for &l in current.iter() {
            if lits.iter().any(|m| m.var == l.var) {
                if !opts.tolerate_duplicates {
                    return Err(DimacsError::DuplicateVariable { position, var: l.var });
                }
                if lits.contains(&l) {
                    continue;
                }
            }
            lits.push(l);
        }
        if !opts.tolerate_duplicates && lits.len() != 3 {
            return Err(DimacsError::TooFewLiterals { position, len: lits.len() });
        }
        clauses.push(Clause(lits));
        current.clear();
        Ok(())
    };

    for (position, token) in tokens(text) {
        saw_any = true;
        match token {
            "#" => {
                if let Some(p) = pending_minus {
                    return Err(DimacsError::DanglingMinus { position: p });
                }
                finish(&mut current, position, &mut clauses)?;
            }
            "-" => {
                if pending_minus.is_some() {
                    return Err(DimacsError::Token { position, token: token.into() });
                }
                pending_minus = Some(position);
            }
            _ => {
                let (negated, digits) = match token.strip_prefix('-') {
                    Some(rest) if pending_minus.is_none() => (true, rest),
                    Some(_) => return Err(DimacsError::Token { position, token: token.into() }),
                    None => (pending_minus.take().is_some(), token),
                };
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(DimacsError::Token { position, token: token.into() });
                }
                let var: u32 = digits
                    .parse()
                    .map_err(|_| DimacsError::Token { position, token: token.into() })?;
                if var == 0 {
                    return Err(DimacsError::ZeroIndex { position });
                }
                max_var = max_var.max(var);
                current.push(Literal { var, negated });
            }
        }
    }
    if let Some(p) = pending_minus {
        return Err(DimacsError::DanglingMinus { position: p });
    }
    if saw_any {
        finish(&mut current, text.len(), &mut clauses)?;
    }
    let var_count = match opts.var_count {
        Some(n) if (max_var as usize) > n => return Err(DimacsError::VarCount { var: max_var, var_count: n }),
        Some(n) => n,
        None => max_var as usize,
    };
    Ok(Cnf3Formula { var_count, clauses })
}

/// Whitespace-separated tokens with their byte offsets.
fn tokens(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split_ascii_whitespace()
        .map(move |t| (t.as_ptr() as usize - text.as_ptr() as usize, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = "- 5 1 1 # 1 6 3 # - 5 5 - 4 # - 5 2 - 6 # 2 4 - 1 # - 5 3 1 # - 6 1 1 # - 2 2 - 2 # 3 - 4 1 # - 4 3 - 5 # - 6 - 5 4 # 2 3 - 3 # 2 - 2 2 # 1 - 3 1 # - 6 - 4 2 # - 4 - 4 4 # 4 - 5 - 4 # 6 - 6 6 # - 2 1 5 # 5 2 - 3 # - 6 - 1 - 3 # - 6 2 - 5 # - 3 - 1 3 # 1 - 1 - 1 # - 4 - 2 3";

    fn strict() -> DimacsOptions {
        DimacsOptions::default()
    }

    fn tolerant() -> DimacsOptions {
        DimacsOptions { tolerate_duplicates: true, var_count: None }
    }

    #[test]
    fn simple_clause() {
        let f = dimacs_decode("1 2 3", strict()).unwrap();
        assert_eq!(f.clauses(), &[Clause(vec![Literal::pos(1), Literal::pos(2), Literal::pos(3)])]);
        assert_eq!(dimacs_encode(&f), "1 2 3");
        let g = dimacs_decode("- 1 2 -3 # 3 - 2 1", strict()).unwrap();
        assert_eq!(dimacs_encode(&g), "- 1 2 - 3 # 3 - 2 1");
    }

    #[test]
    fn duplicates_strict_vs_tolerant() {
        assert!(matches!(
            dimacs_decode("- 5 1 1", strict()),
            Err(DimacsError::DuplicateVariable { var: 1, .. })
        ));
        let f = dimacs_decode("- 5 1 1", tolerant()).unwrap();
        assert_eq!(f.clauses(), &[Clause(vec![Literal::neg(5), Literal::pos(1)])]);
        assert!(!f.is_strict());
    }

    #[test]
    fn sample_round_trips() {
        let f = dimacs_decode(SAMPLE, tolerant()).unwrap();
        assert_eq!(f.clauses().len(), 25);
        assert_eq!(f.var_count(), 6);
        let text = dimacs_encode(&f);
        assert_eq!(dimacs_decode(&text, tolerant()).unwrap(), f);
        // Tautological clauses survive deduplication as complementary pairs.
        assert_eq!(f.clauses()[7], Clause(vec![Literal::neg(2), Literal::pos(2)]));
    }

    #[test]
    fn sample_satisfiability() {
        let f = dimacs_decode(SAMPLE, tolerant()).unwrap();
        let sats = f.to_formula().satisfying_assignments().unwrap();
        let sats: Vec<String> = sats.iter().map(|a| a.to_string()).collect();
        assert_eq!(
            sats,
            ["100100", "101110", "110000", "110001", "110010", "111000", "111010", "111100", "111110"]
        );
        // Assignment 111101 falsifies clause 21 (~A6 | ~A1 | ~A3).
        let a: BitString = "111101".parse().unwrap();
        assert!(!f.evaluate(&a).unwrap());
        assert!(!f.clauses()[20].is_satisfied_by(a.bits()));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(dimacs_decode("1 0 2", strict()), Err(DimacsError::ZeroIndex { position: 2 }));
        assert_eq!(
            dimacs_decode("1 x 2", strict()),
            Err(DimacsError::Token { position: 2, token: "x".into() })
        );
        assert!(matches!(dimacs_decode("1 2 3 #", strict()), Err(DimacsError::EmptyClause { .. })));
        assert!(matches!(dimacs_decode("1 2 3 4", tolerant()), Err(DimacsError::TooManyLiterals { .. })));
        assert!(matches!(dimacs_decode("1 2 -", strict()), Err(DimacsError::DanglingMinus { .. })));
        assert!(matches!(dimacs_decode("1 2", strict()), Err(DimacsError::TooFewLiterals { .. })));
    }

    #[test]
    fn empty_text_is_empty_formula() {
        let f = dimacs_decode("", strict()).unwrap();
        assert_eq!(f.var_count(), 0);
        assert!(f.clauses().is_empty());
        assert_eq!(f.count_satisfying().unwrap(), 1);
    }

    #[test]
    fn to_formula_shapes() {
        let one = dimacs_decode("1 - 2 3", strict()).unwrap();
        assert_eq!(
            one.to_formula().body(),
            &Expr::Or(vec![Expr::var(1), Expr::neg(2), Expr::var(3)])
        );
        let two = dimacs_decode("1 - 2 3 # - 1 2 4", strict()).unwrap();
        assert!(matches!(two.to_formula().body(), Expr::And(cs) if cs.len() == 2));
        assert_eq!(Cnf3Formula::from_formula(&two.to_formula()), Some(two));
    }

    #[test]
    fn sort_by_use_counts() {
        let f = dimacs_decode("1 2 3 # 3 2 4 # - 3 1 4 # 3 4 2", DimacsOptions { var_count: Some(5), ..strict() })
            .unwrap();
        let s = f.sorted_by_use();
        let counts = s.use_counts();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(s.var_count(), 4);
        assert_eq!(s.count_satisfying().unwrap() * 2, f.count_satisfying().unwrap());
    }
}
