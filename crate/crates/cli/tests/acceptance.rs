//! Acceptance checks, one line per criterion. Expected values come from
//! oracles written here: a brute-force formula evaluator, explicit sums over
//! enumerated strings, and normalizations done by hand.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use satlang::bits::BitString;
use satlang::datagen::{gen_hard3sat_seeded, generate_count, Alpha, CorpusSpec, Example};
use satlang::formula::{choose_k, enc, random_formula, Expr, Formula, Lambda};
use satlang::language::{build_trie_model, chain_rule_score, FormulaClass, SatWeightedLanguage, Symbol};
use satlang::rebm::{
    estimate_z, kl_decomposition, ll_improvement, nce_loss_from_scores, ppl_improvement, toy, train_rebm,
    truncated_log_prob, Activation, Constant, Discriminator, Energy, RebmModel, RebmTrainConfig,
};
use satlang::rng::derive_seed;
use satlang::seqmodel::{
    eval_sat, sat_sequence, sequence_log_prob, train_ar, NgramModel, RnnModel, Sequence, TrainConfig,
    Trainable, Vocab,
};
use satlang::witness::WitnessRnn;

type Outcome = Result<String, String>;

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn eval(e: &Expr, a: &[bool]) -> bool {
    match e {
        Expr::And(cs) => cs.iter().all(|c| eval(c, a)),
        Expr::Or(cs) => cs.iter().any(|c| eval(c, a)),
        Expr::Not(c) => !eval(c, a),
        Expr::Var(i) => a[*i as usize - 1],
    }
}

fn assignment(v: u64, j: usize) -> Vec<bool> {
    (0..j).map(|i| v >> (j - 1 - i) & 1 == 1).collect()
}

fn brute_count(f: &Formula) -> u64 {
    let j = f.var_count();
    (0..1u64 << j).filter(|&v| eval(f.body(), &assignment(v, j))).count() as u64
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn add_one_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..500 {
        let j = rng.gen_range(0..=10);
        let f = random_formula(&mut rng, j, 4);
        let (before, after) = (brute_count(&f), brute_count(&f.add_one()));
        check(after == before + 1, || format!("formula {i}: #phi = {before}, #add_one = {after}"))?;
    }
    Ok("500 formulas, j <= 10".into())
}

fn blow_up_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cases = 0;
    for i in 0..200 {
        let j = rng.gen_range(0..=8);
        let f = random_formula(&mut rng, j, 4);
        let c = brute_count(&f);
        for k in 1..=6u32 {
            let got = brute_count(&f.add_one_and_blow_up(k).map_err(|e| e.to_string())?);
            check(got == 1 + (c << (k - 1)), || format!("formula {i}, k = {k}: #phi = {c}, got {got}"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} (formula, k) pairs"))
}

fn reduction() -> Outcome {
    let lang = SatWeightedLanguage::members_only();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sat = 0;
    for i in 0..200 {
        let j = rng.gen_range(0..=6);
        let f = random_formula(&mut rng, j, 3);
        let c = brute_count(&f);
        let x = enc(&f.add_one());
        let d = lang.local_distribution(&x).map_err(|e| e.to_string())?;
        check((d[1] > BigRational::zero()) == (c > 0), || format!("formula {i}: p(1) = {}, #phi = {c}", d[1]))?;
        check(d[0] == ratio(1, c as i64 + 1), || format!("formula {i}: p(0) = {}, #phi = {c}", d[0]))?;
        sat += (c > 0) as usize;
    }
    Ok(format!("200 formulas, {sat} satisfiable"))
}

fn separation() -> Outcome {
    let lang = SatWeightedLanguage::members_only();
    let lambdas = [
        ("sqrt2", Lambda::from_square(ratio(2, 1))),
        ("2", Lambda::from_integer(2)),
        ("10", Lambda::from_integer(10)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tested = 0;
    for (name, lambda) in lambdas {
        let lambda = lambda.map_err(|e| e.to_string())?;
        let l2 = lambda.squared().clone();
        let k = choose_k(&lambda);
        let bound = ratio(1, 1 + (1 << (k - 1)));
        let (mut n_sat, mut n_unsat) = (0, 0);
        while n_sat < 30 || n_unsat < 30 {
            let j = rng.gen_range(1..=5);
            let f = random_formula(&mut rng, j, 3);
            let c = brute_count(&f);
            if (c > 0 && n_sat >= 30) || (c == 0 && n_unsat >= 30) {
                continue;
            }
            let x = enc(&f.add_one_and_blow_up(k).map_err(|e| e.to_string())?);
            let p0 = lang.local_prob(&x, Symbol::Zero).map_err(|e| e.to_string())?;
            if c == 0 {
                check(p0.is_one(), || format!("lambda {name}: unsatisfiable but p0 = {p0}"))?;
                n_unsat += 1;
            } else {
                let expect = ratio(1, 1 + ((c as i64) << (k - 1)));
                check(p0 == expect, || format!("lambda {name}: p0 = {p0}, expected {expect}"))?;
                check(p0 <= bound, || format!("lambda {name}: p0 = {p0} above {bound}"))?;
                // A single estimate q within a factor lambda of both values
                // needs p0 * lambda >= 1 / lambda.
                check(&l2 * &p0 < BigRational::one(), || format!("lambda {name}: p0 = {p0} coverable"))?;
                n_sat += 1;
            }
            tested += 1;
        }
    }
    Ok(format!("{tested} formulas over 3 lambdas, 0 violations"))
}

/// Same-length formulas, one with a single satisfier and one unsatisfiable:
/// `psi & l_1 & ... & l_j` with the literals fixing a satisfier or a
/// falsifier of `psi` of equal Hamming weight.
fn paired_formulas(rng: &mut ChaCha8Rng) -> (Formula, Formula) {
    loop {
        let j = rng.gen_range(2..=5);
        let psi = random_formula(rng, j, 3);
        let (mut sat, mut unsat) = (Vec::new(), Vec::new());
        for v in 0..1u64 << j {
            if eval(psi.body(), &assignment(v, j)) {
                sat.push(v)
            } else {
                unsat.push(v)
            }
        }
        let pick = sat.iter().find_map(|&s| unsat.iter().find(|&&u| u.count_ones() == s.count_ones()).map(|&u| (s, u)));
        let Some((s, u)) = pick else { continue };
        let fix = |v: u64| {
            let lits = assignment(v, j)
                .into_iter()
                .enumerate()
                .map(|(i, b)| if b { Expr::var(i as u32 + 1) } else { Expr::neg(i as u32 + 1) });
            let body = Expr::And(std::iter::once(psi.body().clone()).chain(lits).collect());
            Formula::new(j, body).expect("all variables mentioned")
        };
        return (fix(s), fix(u));
    }
}

fn full_support_separation() -> Outcome {
    let eps = BigRational::one();
    let lang = SatWeightedLanguage::full_support(eps.clone());
    let lambda = Lambda::from_integer(2).map_err(|e| e.to_string())?;
    let k = choose_k(&lambda);
    let floor = ratio(1 + (1 << (k - 1)), 1) / (BigRational::one() + &eps * ratio(2, 7));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: Option<BigRational> = None;
    for i in 0..50 {
        let (fs, fu) = paired_formulas(&mut rng);
        check(brute_count(&fs) == 1 && brute_count(&fu) == 0, || format!("instance {i}: bad pair"))?;
        let xs = enc(&fs.add_one_and_blow_up(k).map_err(|e| e.to_string())?);
        let xu = enc(&fu.add_one_and_blow_up(k).map_err(|e| e.to_string())?);
        check(xs.len() == xu.len(), || format!("instance {i}: encodings differ in length"))?;
        let ps = lang.local_prob(&xs, Symbol::Zero).map_err(|e| e.to_string())?;
        let pu = lang.local_prob(&xu, Symbol::Zero).map_err(|e| e.to_string())?;
        let r = &pu / &ps;
        check(r >= floor, || format!("instance {i}: ratio {r} below {floor}"))?;
        if worst.as_ref().is_none_or(|w| &r < w) {
            worst = Some(r);
        }
    }
    let worst = worst.expect("50 instances");
    Ok(format!("k = {k}, min ratio {:.4} >= floor {:.4}", worst.to_f64().unwrap(), floor.to_f64().unwrap()))
}

fn z2_closed_form() -> Outcome {
    let lang = SatWeightedLanguage::full_support(BigRational::one());
    let nine = BigInt::from(9);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for len in 0..=12usize {
        let prefix = BitString::from_bits((0..len).map(|_| rng.gen()).collect());
        // Strings extending the prefix by m bits: 2^m of them, each (1/9)^{len+m+1}.
        let explicit = (0..=40usize).fold(BigRational::zero(), |acc, m| {
            acc + BigRational::new(BigInt::one() << m, nine.pow((len + m + 1) as u32))
        });
        let closed = BigRational::new(9.into(), nine.pow((len + 1) as u32) * BigInt::from(7));
        let z2 = lang.prefix_mass(&prefix).map_err(|e| e.to_string())?.z2;
        check(z2 == closed, || format!("len {len}: z2 = {z2}, closed form {closed}"))?;
        let rel = ((&closed - &explicit) / &closed).to_f64().unwrap().abs();
        worst = worst.max(rel);
        check(rel <= 1e-12, || format!("len {len}: relative gap {rel:e}"))?;
    }
    let total = lang.prefix_mass(&BitString::new()).map_err(|e| e.to_string())?.z2;
    check(total == ratio(1, 7), || format!("total z2 = {total}"))?;
    Ok(format!("max relative gap {worst:.1e}, total = 1/7"))
}

fn witness() -> Outcome {
    let lang = SatWeightedLanguage::members_only().with_class(FormulaClass::Cnf3);
    let mut strings = 0u64;
    for n in 0..=14 {
        let rnn = WitnessRnn::build(n).map_err(|e| e.to_string())?;
        let bad = (0..1u64 << n)
            .into_par_iter()
            .filter(|&v| {
                let x = BitString::from_uint(v, n);
                rnn.eval(&x).map(|w| w != lang.weight(&x)).unwrap_or(true)
            })
            .count();
        check(bad == 0, || format!("length {n}: {bad} mismatches"))?;
        strings += 1 << n;
    }
    Ok(format!("{strings} strings, 0 mismatches"))
}

fn trie_chain_rule() -> Outcome {
    let n = 12;
    let all: Vec<BitString> = (0..=n).flat_map(BitString::all_of_len).collect();
    let mut members = 0;
    for (name, lang) in [
        ("members", SatWeightedLanguage::members_only()),
        ("full", SatWeightedLanguage::full_support(BigRational::one())),
    ] {
        let trie = build_trie_model(&lang, n).map_err(|e| e.to_string())?;
        let weights: Vec<BigRational> = all.iter().map(|x| lang.weight(x)).collect();
        let z: BigRational = weights.iter().sum();
        for (x, w) in all.iter().zip(&weights) {
            if w.is_zero() {
                continue;
            }
            let score = chain_rule_score(&trie, x).map_err(|e| e.to_string())?;
            check(score == w / &z, || format!("{name}: {x:?} scores {score}"))?;
            members += 1;
        }
    }
    Ok(format!("{members} positive-weight strings of length <= {n}, two variants"))
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

const H: f64 = 1e-5;

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let vocab = Vocab::sat(3);
    let mut worst_ar: f64 = 0.0;
    for point in 0..10 {
        let (n_params, model): (usize, Box<dyn Fn(&[f64]) -> Box<dyn Trainable>>) = match point % 3 {
            0 => {
                let m = NgramModel::with_random_init(vocab, 2, 1.0, &mut rng);
                (m.params().len(), Box::new(move |p| {
                    let mut m = m.clone();
                    m.params_mut().copy_from_slice(p);
                    Box::new(m)
                }))
            }
            r => {
                let m = RnnModel::new(vocab, 4, r, &mut rng);
                (m.params().len(), Box::new(move |p| {
                    let mut m = m.clone();
                    m.params_mut().copy_from_slice(p);
                    Box::new(m)
                }))
            }
        };
        let theta: Vec<f64> = (0..n_params).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ctx: Vec<u32> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0..vocab.context as u32)).collect();
        let tgt: Vec<u32> = (0..rng.gen_range(0..5)).map(|_| rng.gen_range(0..2)).collect();
        let seq = Sequence::new(ctx, tgt);
        let m = model(&theta);
        let mut grad = vec![0.0; theta.len()];
        m.loss_grad(&seq, &mut grad);
        for i in 0..theta.len() {
            let mut p = theta.clone();
            p[i] += H;
            let lp = -sequence_log_prob(model(&p).as_ref(), &seq);
            p[i] -= 2.0 * H;
            let lm = -sequence_log_prob(model(&p).as_ref(), &seq);
            worst_ar = worst_ar.max(rel_err(grad[i], (lp - lm) / (2.0 * H)));
        }
    }
    check(worst_ar <= 1e-4, || format!("cross-entropy gradient off by {worst_ar:e}"))?;

    let mut worst_nce: f64 = 0.0;
    for point in 0..10 {
        let symbols = 3;
        let base = NgramModel::with_random_init(Vocab { context: 0, output: symbols + 1 }, 2, 1.0, &mut rng);
        let act = if point % 2 == 0 { Activation::Tanh2 } else { Activation::softplus() };
        let disc = Discriminator::with_random_init(symbols, act, 1.0, &mut rng);
        let model = RebmModel::new(base, disc, 6);
        let x = model.sample_base(&mut rng);
        let noise: Vec<Vec<u32>> = (0..5).map(|_| model.sample_base(&mut rng)).collect();
        let mut grad = vec![0.0; model.disc.params().len()];
        model.nce_loss_grad(&x, &noise, &mut grad);
        for i in 0..grad.len() {
            let mut plus = model.clone();
            plus.disc.params_mut()[i] += H;
            let mut minus = model.clone();
            minus.disc.params_mut()[i] -= H;
            let numeric = (plus.nce_loss(&x, &noise) - minus.nce_loss(&x, &noise)) / (2.0 * H);
            worst_nce = worst_nce.max(rel_err(grad[i], numeric));
        }
    }
    check(worst_nce <= 1e-4, || format!("NCE gradient off by {worst_nce:e}"))?;
    Ok(format!("max relative error {worst_ar:.1e} (cross-entropy), {worst_nce:.1e} (NCE)"))
}

fn nce_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let base = NgramModel::with_random_init(Vocab { context: 0, output: 4 }, 1, 1.0, &mut rng);
    let zero = RebmModel::new(base, Discriminator::new(3, Activation::Tanh2), 6);
    for k in [1usize, 5, 25] {
        let want = ((k + 1) as f64).ln();
        let x = zero.sample_base(&mut rng);
        let noise: Vec<Vec<u32>> = (0..k).map(|_| zero.sample_base(&mut rng)).collect();
        let loss = zero.nce_loss(&x, &noise);
        check((loss - want).abs() <= 1e-12, || format!("K = {k}: zero energy loss {loss}"))?;
        let c = rng.gen_range(-5.0..5.0);
        let loss = nce_loss_from_scores(c, &vec![c; k]);
        check((loss - want).abs() <= 1e-12, || format!("K = {k}: constant {c} loss {loss}"))?;
    }
    let test: Vec<Vec<u32>> = (0..50).map(|_| zero.sample_base(&mut rng)).collect();
    for g in [&Constant(0.0) as &dyn Energy, &zero.disc] {
        let z = estimate_z(&zero.base, g, 6, 256, 7).mean;
        check(z == 1.0, || format!("Z estimate {z}"))?;
        let ll = ll_improvement(g, &test, z);
        let ppl = ppl_improvement(g, &test, z);
        check(ll == 0.0 && ppl == 1.0, || format!("ll {ll}, ppl ratio {ppl}"))?;
    }
    Ok("log(K+1) for K in {1,5,25}; Z = 1, ll = 0, ppl ratio = 1".into())
}

/// `KL(p || q)` with `q` proportional to `exp(log_unnorm)` over `universe`.
fn kl_normalized(p: &[(Vec<u32>, f64)], universe: &[Vec<u32>], log_unnorm: impl Fn(&[u32]) -> f64) -> f64 {
    let log_z = universe.iter().map(|x| log_unnorm(x).exp()).sum::<f64>().ln();
    p.iter().map(|(x, px)| px * (px.ln() - (log_unnorm(x) - log_z))).sum()
}

fn kl_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let symbols = rng.gen_range(2..=3);
        let max_len = rng.gen_range(2..=4);
        let vocab = Vocab { context: 0, output: symbols + 1 };
        let qa = NgramModel::with_random_init(vocab, 1, 1.5, &mut rng);
        let qb = NgramModel::with_random_init(vocab, 2, 1.5, &mut rng);
        let act = if i % 2 == 0 { Activation::Tanh2 } else { Activation::softplus() };
        let g = Discriminator::with_random_init(symbols, act, 1.0, &mut rng);
        let universe = toy::all_strings(symbols, max_len);
        let mut p: Vec<(Vec<u32>, f64)> = Vec::new();
        for x in &universe {
            if rng.gen_bool(0.4) {
                p.push((x.clone(), rng.gen_range(0.1..1.0)));
            }
        }
        if p.is_empty() {
            p.push((universe[0].clone(), 1.0));
        }
        let total: f64 = p.iter().map(|e| e.1).sum();
        p.iter_mut().for_each(|e| e.1 /= total);
        let la = |x: &[u32]| truncated_log_prob(&qa, x, max_len);
        let lb = |x: &[u32]| truncated_log_prob(&qb, x, max_len);
        let lhs = kl_normalized(&p, &universe, |x| la(x) + g.score(x))
            - kl_normalized(&p, &universe, |x| lb(x) + g.score(x));
        let z = |l: &dyn Fn(&[u32]) -> f64| universe.iter().map(|x| (l(x) + g.score(x)).exp()).sum::<f64>();
        let rhs = kl_normalized(&p, &universe, la) - kl_normalized(&p, &universe, lb) + (z(&la) / z(&lb)).ln();
        let lib = kl_decomposition(&p, &qa, &qb, &g, max_len, &universe).map_err(|e| e.to_string())?;
        let d = (lhs - rhs).abs().max((lib.lhs - lhs).abs()).max((lib.rhs - rhs).abs());
        worst = worst.max(d);
        check(d <= 1e-9, || format!("instance {i}: lhs {lhs}, rhs {rhs}, library {lib:?}"))?;
    }
    Ok(format!("20 instances, max |lhs - rhs| {worst:.1e}"))
}

fn toy_rebm() -> Outcome {
    let task = toy::ToyTask::default();
    let mut rng = satlang::rng::rng_for(0, &[]);
    let train = task.sample_corpus(2000, &mut rng);
    let dev = task.sample_corpus(200, &mut rng);
    let base = toy::fit_unigram(task.vocab(), &train);
    let model = RebmModel::new(base, Discriminator::new(task.symbols, Activation::Tanh2), task.max_len);
    let cfg = RebmTrainConfig { seed: 0, ..Default::default() };
    let out = train_rebm(model, &train, &dev, &cfg).map_err(|e| e.to_string())?;
    let m = out.model;

    let universe = toy::all_strings(task.symbols, task.max_len);
    let allowed = |x: &[u32]| x.windows(2).all(|w| !task.forbidden.contains(&(w[0], w[1])));
    let support: Vec<&Vec<u32>> = universe.iter().filter(|x| allowed(x)).collect();
    let p: Vec<(Vec<u32>, f64)> = support.iter().map(|x| ((*x).clone(), 1.0 / support.len() as f64)).collect();
    let kl_base = kl_normalized(&p, &universe, |x| m.base_log_prob(x));
    let kl_rebm = kl_normalized(&p, &universe, |x| m.base_log_prob(x) + m.g(x));
    let gain = kl_base - kl_rebm;
    check(gain >= 0.01, || format!("KL {kl_base:.4} -> {kl_rebm:.4}, gain {gain:.4}"))?;
    Ok(format!("KL {kl_base:.4} -> {kl_rebm:.4} nats (gain {gain:.4}), best epoch {}", out.best_epoch))
}

fn scaled_probe() -> Outcome {
    let seed = 0;
    let vars = [6usize, 8, 10];
    let alpha = Alpha { num: 42667, den: 10000 };
    let spec = CorpusSpec { var_counts: vars.to_vec(), per_count: 1020, split: [100, 1, 1], seed, alpha };
    let (mut train, mut dev, mut held) = (Vec::new(), Vec::new(), Vec::new());
    for &v in &vars {
        let s = generate_count(&spec, v).map_err(|e| e.to_string())?;
        train.extend(s.train.iter().map(sat_sequence));
        dev.extend(s.dev.iter().map(sat_sequence));
        // Fresh formulas, disjoint seeds from the corpus.
        let fresh: Vec<Example> = (0..300u64)
            .map(|i| {
                let f = gen_hard3sat_seeded(v, derive_seed(seed, &[99, v as u64, i])).expect("valid size");
                Example::sample(f, &mut satlang::rng::rng_for(seed, &[98, v as u64, i])).expect("enumerable")
            })
            .collect();
        held.push((v, fresh));
    }
    let vocab = Vocab::sat(*vars.iter().max().unwrap());
    let untrained = RnnModel::new(vocab, 32, 1, &mut satlang::rng::rng_for(seed, &[0]));
    let cfg = TrainConfig { lr: 0.05, max_epochs: 12, patience: 2, seed, ..Default::default() };
    let trained = train_ar(untrained.clone(), &train, &dev, &cfg).map_err(|e| e.to_string())?.model;
    let mut lines = Vec::new();
    for (v, items) in &held {
        let single: Vec<Example> = items.iter().filter(|e| e.count == 1).cloned().collect();
        let after = eval_sat(&trained, items);
        let a0 = eval_sat(&untrained, &single).assignment_ppl;
        let a1 = eval_sat(&trained, &single).assignment_ppl;
        let drop = 1.0 - a1 / a0;
        lines.push(format!("v{v}: enum {:.3}, assign {a0:.3}->{a1:.3} ({} items)", after.enumeration_ppl, single.len()));
        check(after.enumeration_ppl >= 1.8, || format!("vars {v}: enumeration ppl {:.4}", after.enumeration_ppl))?;
        check(drop >= 0.10, || format!("vars {v}: assignment ppl {a0:.4} -> {a1:.4}"))?;
    }
    Ok(lines.join("; "))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_satlang")
}

fn satlang(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin())
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).expect("readable output directory") {
            let p = e.expect("directory entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn determinism() -> Outcome {
    let root = std::env::temp_dir().join(format!("satlang-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&root);
    fs::create_dir_all(&root).map_err(|e| e.to_string())?;
    let dimacs = root.join("phi.txt");
    fs::write(&dimacs, "1 2 -3 # -1 2 3 # 1 -2 3").map_err(|e| e.to_string())?;
    // Both runs write to the same paths; the first tree is moved aside.
    let mut trees = Vec::new();
    let mut compared = 0;
    for threads in ["1", "3"] {
        let d = |name: &str| root.join("run").join(name).display().to_string();
        let steps: Vec<Vec<String>> = vec![
            vec!["gen-data", "--vars", "6,8", "--per-count", "51", "--seed", "5", "--out", &d("sat")],
            vec!["gen-data", "--task", "toy", "--sizes", "300,50,100", "--out", &d("toy")],
            vec!["probe-localprob", "--dimacs", &dimacs.display().to_string(), "--out", &d("probe")],
            vec!["witness-check", "--n", "8", "--threads", threads, "--out", &d("witness")],
            vec!["train-ar", "--corpus", &d("sat"), "--kind", "rnn", "--hidden", "8", "--max-epochs", "2", "--threads", threads, "--out", &d("rnn")],
            vec!["eval-ar", "--model", &format!("{}/model.ckpt", d("rnn")), "--corpus", &d("sat"), "--threads", threads, "--out", &d("eval")],
            vec!["train-ar", "--corpus", &d("toy"), "--kind", "ngram", "--order", "1", "--max-epochs", "2", "--out", &d("base")],
            vec!["train-rebm", "--base", &format!("{}/model.ckpt", d("base")), "--corpus", &d("toy"), "--max-epochs", "2", "--K", "5", "--threads", threads, "--out", &d("rebm")],
            vec!["eval-rebm", "--base", &format!("{}/model.ckpt", d("base")), "--rebm", &format!("{}/rebm.json", d("rebm")), "--corpus", &d("toy"), "--n-boot", "50", "--n-z", "4", "--m", "64", "--threads", threads, "--out", &d("improve")],
            vec!["kl-check", "--instances", "3", "--out", &d("kl")],
            vec!["report", "--inputs", &format!("{}/eval.json,{}/improvement.json", d("eval"), d("improve")), "--out", &d("report")],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        for s in &steps {
            satlang(&s.iter().map(String::as_str).collect::<Vec<_>>())?;
        }
        compared = steps.len();
        trees.push(read_tree(&root.join("run")));
        fs::remove_dir_all(root.join("run")).map_err(|e| e.to_string())?;
    }
    let (a, b) = (&trees[0], &trees[1]);
    check(a.len() == b.len(), || format!("{} vs {} files", a.len(), b.len()))?;
    for ((pa, ba), (pb, bb)) in a.iter().zip(b) {
        check(pa == pb && ba == bb, || format!("{} differs between reruns", pa.display()))?;
    }
    let _ = fs::remove_dir_all(&root);
    Ok(format!("{compared} subcommands, {} files identical across reruns and thread counts", a.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 14] = [
        ("add-one law", add_one_law, Duration::from_secs(30)),
        ("blow-up law", blow_up_law, Duration::from_secs(60)),
        ("reduction and p(0) = 1/(#+1)", reduction, Duration::from_secs(60)),
        ("separation, lambda in {sqrt2, 2, 10}", separation, Duration::MAX),
        ("full-support separation, eps = 1", full_support_separation, Duration::MAX),
        ("Z2 closed form", z2_closed_form, Duration::MAX),
        ("witness equivalence, n <= 14", witness, Duration::from_secs(300)),
        ("trie chain rule, |x| <= 12", trie_chain_rule, Duration::MAX),
        ("gradient checks", gradient_checks, Duration::MAX),
        ("NCE closed forms", nce_closed_forms, Duration::MAX),
        ("KL identity", kl_identity, Duration::MAX),
        ("toy residual model improvement", toy_rebm, Duration::from_secs(300)),
        ("scaled SAT probe", scaled_probe, Duration::from_secs(1200)),
        ("determinism", determinism, Duration::MAX),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let mut result = f();
        let took = start.elapsed();
        if result.is_ok() && took > *limit {
            result = Err(format!("took {took:.1?}, limit {limit:?}"));
        }
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{took:.1?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{took:.1?}]", i + 1)
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
