use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sat_sequence, ArModel, Sequence};
use crate::datagen::Example;

/// Perplexities on a SAT test set, all base e internally and reported as
/// `exp` of a mean negative log-likelihood.
///
/// * `enumeration_ppl`: the model's first-bit conditional, renormalized over
///   `{0, 1}`, scored on the realized bit `a1`.
/// * `enumeration_ppl_oracle`: the same conditional scored against the exact
///   `p(a1 | f') = (1/(#+1), #/(#+1))`.
/// * `assignment_ppl`: next-symbol conditionals for `a2 .. a_{j+1}, $` after
///   `f' . 1`, over satisfiable items whose realized `a1` is 1.
/// * `assignment_ppl_oracle`: the same tokens, averaged uniformly over every
///   satisfier of each satisfiable item.
/// * `token_ppl`: every realized target symbol including `$`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_examples: usize,
    pub n_satisfiable: usize,
    /// Items contributing to `assignment_ppl`.
    pub n_assignment: usize,
    pub enumeration_ppl: f64,
    pub enumeration_ppl_oracle: f64,
    pub assignment_ppl: f64,
    pub assignment_ppl_oracle: f64,
    pub token_ppl: f64,
}

/// `sum_t log q(label_t | ...)`.
pub fn sequence_log_prob<M: ArModel + ?Sized>(model: &M, seq: &Sequence) -> f64 {
    let labels = seq.labels(&model.vocab());
    model.log_probs(seq).iter().zip(&labels).map(|(lp, &y)| lp[y as usize]).sum()
}

/// `-sum_i p_i log q_i`, skipping terms with `p_i = 0`.
pub fn expected_cross_entropy(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(pi, _)| **pi > 0.0).map(|(pi, qi)| -pi * qi.ln()).sum()
}

fn first_bit(model: &(impl ArModel + ?Sized), context: &[u32]) -> [f64; 2] {
    let d = model.next_dist(context, &[]);
    let s = d[0] + d[1];
    [d[0] / s, d[1] / s]
}

/// Negative log-likelihood of the tokens after the first bit.
fn tail_nll(model: &(impl ArModel + ?Sized), seq: &Sequence) -> (f64, usize) {
    let labels = seq.labels(&model.vocab());
    let lps = model.log_probs(seq);
    let nll = -lps[1..].iter().zip(&labels[1..]).map(|(lp, &y)| lp[y as usize]).sum::<f64>();
    (nll, labels.len() - 1)
}

#[derive(Default)]
struct Acc {
    enum_nll: f64,
    enum_oracle: f64,
    assign_nll: f64,
    assign_tokens: usize,
    assign_items: usize,
    oracle_nll: f64,
    oracle_tokens: f64,
    token_nll: f64,
    tokens: usize,
    satisfiable: usize,
}

impl Acc {
    fn merge(mut self, o: Acc) -> Acc {
        self.enum_nll += o.enum_nll;
        self.enum_oracle += o.enum_oracle;
        self.assign_nll += o.assign_nll;
        self.assign_tokens += o.assign_tokens;
        self.assign_items += o.assign_items;
        self.oracle_nll += o.oracle_nll;
        self.oracle_tokens += o.oracle_tokens;
        self.token_nll += o.token_nll;
        self.tokens += o.tokens;
        self.satisfiable += o.satisfiable;
        self
    }
}

fn score_item<M: ArModel + ?Sized>(model: &M, e: &Example) -> Acc {
    let seq = sat_sequence(e);
    let mut acc = Acc::default();
    let q = first_bit(model, &seq.context);
    let realized = seq.target[0] as usize;
    acc.enum_nll = -q[realized].ln();
    let c = e.count as f64;
    acc.enum_oracle = expected_cross_entropy(&[1.0 / (c + 1.0), c / (c + 1.0)], &q);
    acc.token_nll = -sequence_log_prob(model, &seq);
    acc.tokens = seq.steps();
    if e.is_satisfiable() {
        acc.satisfiable = 1;
        if realized == 1 {
            let (nll, n) = tail_nll(model, &seq);
            acc.assign_nll = nll;
            acc.assign_tokens = n;
            acc.assign_items = 1;
        }
        let sats = e.formula.to_formula().satisfying_assignments().expect("small formula");
        for a in &sats {
            let mut target = vec![1];
            target.extend(a.bits().iter().map(|&b| b as u32));
            let (nll, n) = tail_nll(model, &Sequence::new(seq.context.clone(), target));
            acc.oracle_nll += nll / sats.len() as f64;
            acc.oracle_tokens += n as f64 / sats.len() as f64;
        }
    }
    acc
}

fn ppl(nll: f64, n: f64) -> f64 {
    if n > 0.0 {
        (nll / n).exp()
    } else {
        f64::NAN
    }
}

/// Scores every example; items are independent, so this runs in parallel
/// and sums in a fixed order.
pub fn eval_sat<M: ArModel + ?Sized>(model: &M, examples: &[Example]) -> EvalReport {
    let parts: Vec<Acc> = examples.par_iter().map(|e| score_item(model, e)).collect();
    let a = parts.into_iter().fold(Acc::default(), Acc::merge);
    let n = examples.len();
    EvalReport {
        n_examples: n,
        n_satisfiable: a.satisfiable,
        n_assignment: a.assign_items,
        enumeration_ppl: ppl(a.enum_nll, n as f64),
        enumeration_ppl_oracle: ppl(a.enum_oracle, n as f64),
        assignment_ppl: ppl(a.assign_nll, a.assign_tokens as f64),
        assignment_ppl_oracle: ppl(a.oracle_nll, a.oracle_tokens),
        token_ppl: ppl(a.token_nll, a.tokens as f64),
    }
}

/// Per-token perplexity of plain sequences.
pub fn token_ppl<M: ArModel + ?Sized>(model: &M, seqs: &[Sequence]) -> f64 {
    let parts: Vec<(f64, usize)> = seqs.par_iter().map(|s| (-sequence_log_prob(model, s), s.steps())).collect();
    let (nll, n) = parts.into_iter().fold((0.0, 0), |(a, b), (c, d)| (a + c, b + d));
    ppl(nll, n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_hard3sat_seeded, Example};
    use crate::seqmodel::{SatOracleModel, Vocab};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Flat;

    impl ArModel for Flat {
        fn vocab(&self) -> Vocab {
            Vocab::sat(10)
        }

        fn log_probs(&self, seq: &Sequence) -> Vec<Vec<f64>> {
            vec![vec![0.5f64.ln(), 0.5f64.ln(), f64::NEG_INFINITY]; seq.steps()]
        }
    }

    fn examples(vars: usize, n: u64) -> Vec<Example> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        (0..n).map(|s| Example::sample(gen_hard3sat_seeded(vars, s).unwrap(), &mut rng).unwrap()).collect()
    }

    #[test]
    fn uniform_half_gives_two() {
        let r = eval_sat(&Flat, &examples(6, 20));
        assert!((r.enumeration_ppl - 2.0).abs() < 1e-12);
        assert!((r.enumeration_ppl_oracle - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_enumeration_matches_true_entropy() {
        let ex = examples(6, 40);
        let r = eval_sat(&SatOracleModel::new(Vocab::sat(6)), &ex);
        let h: f64 = ex
            .iter()
            .map(|e| {
                let c = e.count as f64;
                let p = [1.0 / (c + 1.0), c / (c + 1.0)];
                p.iter().filter(|&&x| x > 0.0).map(|x| -x * x.ln()).sum::<f64>()
            })
            .sum::<f64>()
            / ex.len() as f64;
        assert!((r.enumeration_ppl_oracle - h.exp()).abs() < 1e-9);
        assert!(r.token_ppl >= 1.0 && r.enumeration_ppl >= 1.0);
    }

    #[test]
    fn single_satisfier_items_have_unit_assignment_ppl() {
        let single: Vec<Example> = (0..400)
            .map(|s| Example::sample(gen_hard3sat_seeded(8, s).unwrap(), &mut ChaCha8Rng::seed_from_u64(s)).unwrap())
            .filter(|e| e.count == 1)
            .collect();
        assert!(!single.is_empty());
        let r = eval_sat(&SatOracleModel::new(Vocab::sat(8)), &single);
        assert!((r.assignment_ppl_oracle - 1.0).abs() < 1e-12);
    }
}
