//! Binary strings over `{0, 1}` and the Elias-gamma code used by the formula
//! encoder.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid bit character {found:?} at position {position}")]
pub struct BitParseError {
    pub position: usize,
    pub found: char,
}

/// A finite string over the binary alphabet. The end marker `$` is never
/// stored here; it is handled by the probability APIs.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    /// The `len` low bits of `value`, most significant first.
    pub fn from_uint(value: u64, len: usize) -> Self {
        Self((0..len).rev().map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.0
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn pop(&mut self) -> Option<bool> {
        self.0.pop()
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    pub fn with(&self, bit: bool) -> BitString {
        let mut out = self.clone();
        out.push(bit);
        out
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        Self(self.0[start..end].to_vec())
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Interprets the bits as an unsigned integer, most significant first.
    pub fn to_uint(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    /// Every string of length `len`, in lexicographic order.
    pub fn all_of_len(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < 64, "enumeration length too large");
        (0..(1u64 << len)).map(move |v| BitString::from_uint(v, len))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl FromStr for BitString {
    type Err = BitParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(position, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                found => Err(BitParseError { position, found }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        Self(bits)
    }
}

/// Appends the Elias-gamma code of `value` (which must be positive):
/// `floor(log2 value)` zeros followed by the binary expansion of `value`.
pub fn gamma_encode(out: &mut BitString, value: u64) {
    assert!(value > 0, "Elias gamma does not handle 0");
    let nbits = 64 - value.leading_zeros() as usize;
    for _ in 0..nbits - 1 {
        out.push(false);
    }
    for i in (0..nbits).rev() {
        out.push((value >> i) & 1 == 1);
    }
}

pub fn gamma_len(value: u64) -> usize {
    assert!(value > 0, "Elias gamma does not handle 0");
    2 * (64 - value.leading_zeros() as usize) - 1
}

/// Outcome of reading from a possibly-truncated bit stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Read<T> {
    Done(T),
    /// The input ended before the code word did.
    Truncated,
    /// The input can never be completed into a valid code word.
    Invalid,
}

/// Cursor over a bit slice.
pub struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a [bool]) -> Self {
        Self { bits, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn read_bit(&mut self) -> Option<bool> {
        let b = self.bits.get(self.pos).copied()?;
        self.pos += 1;
        Some(b)
    }

    /// Reads one gamma code word. Values above `u64::MAX` are `Invalid`.
    pub fn read_gamma(&mut self) -> Read<u64> {
        let mut zeros = 0usize;
        loop {
            match self.read_bit() {
                None => return Read::Truncated,
                Some(false) => {
                    zeros += 1;
                    if zeros >= 64 {
                        return Read::Invalid;
                    }
                }
                Some(true) => break,
            }
        }
        let mut value = 1u64;
        for _ in 0..zeros {
            match self.read_bit() {
                None => return Read::Truncated,
                Some(b) => value = (value << 1) | b as u64,
            }
        }
        Read::Done(value)
    }
}
