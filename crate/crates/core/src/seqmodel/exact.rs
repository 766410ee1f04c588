use num::ToPrimitive;

use super::{ArModel, Sequence, Trainable, Vocab};
use crate::bits::BitString;
use crate::formula::{dimacs_decode, DimacsOptions, Formula};
use crate::language::{LocalModel, TrieModel};

const UNIFORM: f64 = 1.0 / 3.0;

fn to_log(p: [f64; 3]) -> Vec<f64> {
    p.iter().map(|q| q.ln()).collect()
}

/// Inverse of [`super::dimacs_tokens`].
pub fn dimacs_text(tokens: &[u32]) -> String {
    tokens
        .iter()
        .map(|&t| match t {
            0 => "-".to_string(),
            1 => "#".to_string(),
            n => (n - 1).to_string(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Exact conditionals `p(a_i | enc(add_one(f)), a_<i)` with satisfiers of
/// `add_one(f)` equally likely, read off satisfier counts. The formula is
/// decoded from the DIMACS context. Prefixes with no satisfier extension get
/// a uniform distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SatOracleModel {
    vocab: Vocab,
}

impl SatOracleModel {
    pub fn new(vocab: Vocab) -> Self {
        Self { vocab }
    }

    fn formula(context: &[u32]) -> Option<Formula> {
        let f = dimacs_decode(&dimacs_text(context), DimacsOptions::default()).ok()?;
        Some(f.to_formula().add_one())
    }
}

impl ArModel for SatOracleModel {
    fn vocab(&self) -> Vocab {
        self.vocab
    }

    fn log_probs(&self, seq: &Sequence) -> Vec<Vec<f64>> {
        let Some(f) = Self::formula(&seq.context) else {
            return vec![to_log([UNIFORM; 3]); seq.steps()];
        };
        let n = f.var_count();
        let bits: Vec<bool> = seq.target.iter().map(|&t| t == 1).collect();
        let count = |p: &[bool]| f.count_satisfying_with_prefix(p).unwrap_or(0);
        let mut out = Vec::with_capacity(seq.steps());
        // The walk leaves the support once a non-bit or dead prefix appears.
        let mut alive = true;
        for m in 0..seq.steps() {
            if m > 0 && seq.target[m - 1] > 1 {
                alive = false;
            }
            let dist = if !alive || m > n {
                [UNIFORM; 3]
            } else if m == n {
                [0.0, 0.0, 1.0]
            } else {
                let prefix = &bits[..m];
                let total = count(prefix);
                if total == 0 {
                    alive = false;
                    [UNIFORM; 3]
                } else {
                    let mut ext = prefix.to_vec();
                    ext.push(false);
                    let zeros = count(&ext) as f64;
                    let t = total as f64;
                    [zeros / t, 1.0 - zeros / t, 0.0]
                }
            };
            out.push(to_log(dist));
        }
        out
    }
}

/// Nothing to fit.
impl Trainable for SatOracleModel {
    fn params(&self) -> &[f64] {
        &[]
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut []
    }

    fn loss_grad(&self, seq: &Sequence, _grad: &mut [f64]) -> f64 {
        -seq.labels(&self.vocab).iter().zip(self.log_probs(seq)).map(|(&y, lp)| lp[y as usize]).sum::<f64>()
    }
}

/// A [`TrieModel`] over `{0, 1, $}` as a floating-point model. Prefixes
/// outside the trie get a uniform distribution.
#[derive(Clone, Debug)]
pub struct TrieArModel {
    trie: TrieModel,
}

impl TrieArModel {
    pub fn new(trie: TrieModel) -> Self {
        Self { trie }
    }

    pub fn trie(&self) -> &TrieModel {
        &self.trie
    }
}

impl ArModel for TrieArModel {
    fn vocab(&self) -> Vocab {
        Vocab::binary()
    }

    fn log_probs(&self, seq: &Sequence) -> Vec<Vec<f64>> {
        let mut prefix = BitString::new();
        let mut out = Vec::with_capacity(seq.steps());
        let mut on_support = true;
        for m in 0..seq.steps() {
            let dist = if on_support { self.trie.conditional(&prefix) } else { None };
            let dist = match dist {
                Some(d) => d.map(|q| q.to_f64().expect("finite")),
                None => {
                    on_support = false;
                    [UNIFORM; 3]
                }
            };
            out.push(to_log(dist));
            if let Some(&t) = seq.target.get(m) {
                if t > 1 {
                    on_support = false;
                } else {
                    prefix.push(t == 1);
                }
            }
        }
        out
    }
}
