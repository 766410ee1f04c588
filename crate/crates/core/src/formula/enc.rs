//! Self-delimiting binary encoding of formulas.
//!
//! Layout: `gamma(j + 1)`, `gamma(node_count)`, then the expression tree in
//! preorder. Each node starts with a 2-bit opcode (`00` AND, `01` OR, `10`
//! NOT, `11` VAR); AND/OR are followed by `gamma(arity + 1)` and VAR by
//! `gamma(index)`. If the result is shorter than `j` bits it is padded with
//! ones up to length `j`, so `|enc(f)| >= j` always holds.

use thiserror::Error;

use super::{Expr, Formula};
use crate::bits::{gamma_encode, BitReader, BitString, Read};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("input ends inside a formula encoding")]
    Truncated,
    #[error("malformed header at bit {0}")]
    Header(usize),
    #[error("node count mismatch: header says {declared}, tree has at least {seen}")]
    NodeCount { declared: u64, seen: u64 },
    #[error("variable A{index} out of range 1..={var_count} at bit {position}")]
    VarRange { index: u64, var_count: u64, position: usize },
    #[error("variable A{0} is never mentioned")]
    Unmentioned(usize),
    #[error("bad padding bit at {0}")]
    Padding(usize),
    #[error("malformed code word at bit {0}")]
    CodeWord(usize),
}

/// Result of decoding the longest formula prefix of a bit string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    /// A complete encoding occupying the first `consumed` bits.
    Complete { formula: Formula, consumed: usize },
    /// The input so far is consistent with an encoding but ends early.
    Truncated,
    Invalid(DecodeError),
}

pub fn enc(f: &Formula) -> BitString {
    let mut out = BitString::new();
    gamma_encode(&mut out, f.var_count() as u64 + 1);
    gamma_encode(&mut out, f.body().node_count() as u64);
    write_expr(&mut out, f.body());
    while out.len() < f.var_count() {
        out.push(true);
    }
    out
}

fn write_expr(out: &mut BitString, e: &Expr) {
    match e {
        Expr::And(cs) | Expr::Or(cs) => {
            out.push(false);
            out.push(matches!(e, Expr::Or(_)));
            gamma_encode(out, cs.len() as u64 + 1);
            cs.iter().for_each(|c| write_expr(out, c));
        }
        Expr::Not(c) => {
            out.push(true);
            out.push(false);
            write_expr(out, c);
        }
        Expr::Var(i) => {
            out.push(true);
            out.push(true);
            gamma_encode(out, *i as u64);
        }
    }
}

/// Decodes the formula at the start of `x`, returning it with the number of
/// bits it occupies. Trailing bits are ignored.
pub fn dec(x: &BitString) -> Result<(Formula, usize), DecodeError> {
    match dec_prefix(x.bits()) {
        Decoded::Complete { formula, consumed } => Ok((formula, consumed)),
        Decoded::Truncated => Err(DecodeError::Truncated),
        Decoded::Invalid(e) => Err(e),
    }
}

enum Frame {
    And { remaining: u64, children: Vec<Expr> },
    Or { remaining: u64, children: Vec<Expr> },
    Not,
}

macro_rules! take {
    ($e:expr, $pos:expr) => {
        match $e {
            Read::Done(v) => v,
            Read::Truncated => return Decoded::Truncated,
            Read::Invalid => return Decoded::Invalid(DecodeError::CodeWord($pos)),
        }
    };
}

pub fn dec_prefix(bits: &[bool]) -> Decoded {
    let mut r = BitReader::new(bits);
    let j = take!(r.read_gamma(), 0) - 1;
    let declared = take!(r.read_gamma(), r.position());
    // Every node costs at least 2 bits; anything else cannot be completed.
    if j > u32::MAX as u64 || declared == 0 {
        return Decoded::Invalid(DecodeError::Header(r.position()));
    }

    let mut stack: Vec<Frame> = Vec::new();
    let mut seen = 0u64;
    let root = loop {
        // Read one node.
        let at = r.position();
        let (b0, b1) = match (r.read_bit(), r.read_bit()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Decoded::Truncated,
        };
        seen += 1;
        if seen > declared {
            return Decoded::Invalid(DecodeError::NodeCount { declared, seen });
        }
        let mut done: Option<Expr> = match (b0, b1) {
            (false, or) => {
                let arity = take!(r.read_gamma(), at) - 1;
                if arity == 0 {
                    Some(if or { Expr::Or(vec![]) } else { Expr::And(vec![]) })
                } else {
                    // `arity` children still to come; each needs a node.
                    if seen + arity > declared {
                        return Decoded::Invalid(DecodeError::NodeCount { declared, seen: seen + arity });
                    }
                    let children = Vec::with_capacity(arity as usize);
                    stack.push(if or {
                        Frame::Or { remaining: arity, children }
                    } else {
                        Frame::And { remaining: arity, children }
                    });
                    None
                }
            }
            (true, false) => {
                stack.push(Frame::Not);
                None
            }
            (true, true) => {
                let index = take!(r.read_gamma(), at);
                if index > j {
                    return Decoded::Invalid(DecodeError::VarRange { index, var_count: j, position: at });
                }
                Some(Expr::Var(index as u32))
            }
        };
        // Attach finished subtrees to their parents.
        while let Some(e) = done.take() {
            match stack.pop() {
                None => {
                    done = Some(e);
                    break;
                }
                Some(Frame::Not) => done = Some(Expr::not(e)),
                Some(Frame::And { remaining, mut children }) => {
                    children.push(e);
                    if remaining == 1 {
                        done = Some(Expr::And(children));
                    } else {
                        stack.push(Frame::And { remaining: remaining - 1, children });
                    }
                }
                Some(Frame::Or { remaining, mut children }) => {
                    children.push(e);
                    if remaining == 1 {
                        done = Some(Expr::Or(children));
                    } else {
                        stack.push(Frame::Or { remaining: remaining - 1, children });
                    }
                }
            }
            if stack.is_empty() {
                break;
            }
        }
        if stack.is_empty() {
            if let Some(root) = done {
                break root;
            }
        }
    };
    if seen != declared {
        return Decoded::Invalid(DecodeError::NodeCount { declared, seen });
    }
    while (r.position() as u64) < j {
        let at = r.position();
        match r.read_bit() {
            None => return Decoded::Truncated,
            Some(false) => return Decoded::Invalid(DecodeError::Padding(at)),
            Some(true) => {}
        }
    }
    let consumed = r.position();
    match Formula::new(j as usize, root) {
        Ok(formula) => Decoded::Complete { formula, consumed },
        Err(super::FormulaError::Unmentioned { index }) => Decoded::Invalid(DecodeError::Unmentioned(index)),
        Err(_) => unreachable!("indices were range-checked while decoding"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::tests::phi_ex;

    #[test]
    fn round_trip_examples() {
        for f in [phi_ex(), Formula::empty(), phi_ex().add_one()] {
            let e = enc(&f);
            assert_eq!(dec(&e), Ok((f.clone(), e.len())));
        }
    }

    #[test]
    fn known_encodings() {
        // j = 0, one node: AND with no children.
        assert_eq!(enc(&Formula::empty()).to_string(), "11001");
        let a1 = Formula::new(1, Expr::var(1)).unwrap();
        assert_eq!(enc(&a1).to_string(), "0101111");
        assert!(!enc(&a1).is_empty());
    }

    #[test]
    fn trailing_bits_are_not_consumed() {
        let e = enc(&phi_ex());
        let x = e.concat(&"0110".parse().unwrap());
        assert_eq!(dec(&x), Ok((phi_ex(), e.len())));
    }

    #[test]
    fn every_proper_prefix_is_truncated() {
        let e = enc(&phi_ex());
        for n in 0..e.len() {
            assert_eq!(dec_prefix(&e.bits()[..n]), Decoded::Truncated, "prefix {n}");
        }
    }

    #[test]
    fn rejects() {
        // j = 0 but mentions A1.
        let bad: BitString = "1111".parse::<BitString>().unwrap().concat(&"1".parse().unwrap());
        assert!(matches!(dec(&bad), Err(DecodeError::VarRange { .. })));
        // j = 2, body A1 only: A2 unmentioned.
        let mut s = BitString::new();
        gamma_encode(&mut s, 3);
        gamma_encode(&mut s, 1);
        s.push(true);
        s.push(true);
        gamma_encode(&mut s, 1);
        assert_eq!(dec(&s), Err(DecodeError::Unmentioned(2)));
        // Header node count 2 but a single VAR node.
        let mut s = BitString::new();
        gamma_encode(&mut s, 2);
        gamma_encode(&mut s, 2);
        s.push(true);
        s.push(true);
        gamma_encode(&mut s, 1);
        assert!(matches!(dec(&s), Err(DecodeError::NodeCount { .. })));
        assert_eq!(dec(&BitString::zeros(8)), Err(DecodeError::Truncated));
    }
}
