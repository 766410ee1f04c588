use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use rand::Rng;
use satlang::rebm::{
    bootstrap_report, exact_kl, exact_z, kl_decomposition, toy, train_rebm as fit, truncated_log_prob, Activation,
    BootstrapConfig, Discriminator, FiniteDist, ImprovementReport, RebmEpoch, RebmModel, RebmTrainConfig,
};
use satlang::rng::rng_for;
use satlang::seqmodel::{
    load_checkpoint, save_checkpoint, train_ar, AnyModel, ArModel, NgramModel, Sequence, TrainConfig, Vocab,
};
use serde::{Deserialize, Serialize};

use crate::data::{read_toy_split, read_toy_task};
use crate::run::Run;
use crate::Common;

pub const REBM_FILE: &str = "rebm.json";
pub const FINETUNED_FILE: &str = "base_finetuned.ckpt";

/// Largest universe enumerated for exact KLs.
const EXACT_LIMIT: usize = 1 << 21;

#[derive(Serialize, Deserialize)]
pub struct RebmFile {
    pub symbols: usize,
    pub max_len: usize,
    pub k: usize,
    pub discriminator: Discriminator,
    pub best_epoch: usize,
    pub curve: Vec<RebmEpoch>,
}

fn parse_activation(name: &str) -> Result<Activation> {
    Ok(match name {
        "tanh2" | "tanh" => Activation::Tanh2,
        "softplus" => Activation::softplus(),
        other => bail!("unknown activation {other:?} (expected tanh2 or softplus)"),
    })
}

fn load_base(path: &str, symbols: usize) -> Result<AnyModel> {
    let base = load_checkpoint(Path::new(path)).with_context(|| format!("loading base {path}"))?;
    let v = base.vocab();
    if v.context != 0 || v.output != symbols + 1 {
        bail!("base model vocabulary does not match a {symbols}-symbol toy corpus");
    }
    Ok(base)
}

fn universe_size(symbols: usize, max_len: usize) -> Option<usize> {
    (0..=max_len as u32).try_fold(0usize, |acc, l| symbols.checked_pow(l).and_then(|p| acc.checked_add(p)))
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Frozen base checkpoint from train-ar.
    #[arg(long)]
    base: Option<String>,
    /// Toy corpus directory from `gen-data --task toy`.
    #[arg(long)]
    corpus: Option<String>,
    /// `tanh2` or `softplus` [default tanh2].
    #[arg(long)]
    activation: Option<String>,
    /// Noise samples per data string [default 25].
    #[arg(long = "K", id = "K")]
    k: Option<usize>,
    /// Learning rate [default 0.05].
    #[arg(long)]
    lr: Option<f64>,
    /// Momentum coefficient [default 0.9].
    #[arg(long)]
    momentum: Option<f64>,
    /// Data strings per update [default 32].
    #[arg(long)]
    batch: Option<usize>,
    /// Epoch limit [default 30].
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Epochs without dev improvement before stopping [default 2].
    #[arg(long)]
    patience: Option<usize>,
    /// Also train a copy of the base for the same number of epochs.
    #[arg(long)]
    finetune_base: Option<bool>,
}

pub fn train_rebm(a: TrainArgs) -> Result<()> {
    let mut run = Run::start("train-rebm", &a.common)?;
    let s = &mut run.settings;
    let base_path: String = s.require("base", a.base)?;
    let corpus: String = s.require("corpus", a.corpus)?;
    let activation = parse_activation(&s.get("activation", a.activation, "tanh2".to_string())?)?;
    let cfg = RebmTrainConfig {
        lr: s.get("lr", a.lr, 0.05)?,
        momentum: s.get("momentum", a.momentum, 0.9)?,
        batch: s.get("batch", a.batch, 32)?,
        k: s.get("K", a.k, 25)?,
        max_epochs: s.get("max_epochs", a.max_epochs, 30)?,
        patience: s.get("patience", a.patience, 2)?,
        seed: run.seed,
    };
    let finetune = s.get("finetune_base", a.finetune_base, true)?;
    run.freeze()?;
    let dir = Path::new(&corpus);
    let task = read_toy_task(dir)?;
    let train = read_toy_split(dir, "train", task.symbols)?;
    let dev = read_toy_split(dir, "dev", task.symbols)?;
    let base = load_base(&base_path, task.symbols)?;
    let model = RebmModel::new(base.clone(), Discriminator::new(task.symbols, activation), task.max_len);
    let out = fit(model, &train, &dev, &cfg)?;
    for e in &out.curve {
        eprintln!("epoch {:>3}  dev NCE {:.5}{}", e.epoch, e.dev_loss, if e.accepted { "  *" } else { "" });
    }
    let epochs = out.curve.len() - 1;
    let file = RebmFile {
        symbols: task.symbols,
        max_len: task.max_len,
        k: cfg.k,
        discriminator: out.model.disc,
        best_epoch: out.best_epoch,
        curve: out.curve,
    };
    run.write_json(REBM_FILE, &file)?;
    if finetune && epochs > 0 {
        let seqs = |v: &[Vec<u32>]| v.iter().cloned().map(Sequence::unconditioned).collect::<Vec<_>>();
        let tc = TrainConfig { max_epochs: epochs, patience: epochs, seed: run.seed, ..Default::default() };
        let tuned = train_ar(base, &seqs(&train), &seqs(&dev), &tc)?;
        save_checkpoint(&run.path(FINETUNED_FILE), &tuned.model)?;
        run.record(FINETUNED_FILE);
    }
    run.finish()
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Base checkpoint the discriminator was trained on.
    #[arg(long)]
    base: Option<String>,
    /// `rebm.json` from train-rebm.
    #[arg(long)]
    rebm: Option<String>,
    /// Toy corpus directory.
    #[arg(long)]
    corpus: Option<String>,
    /// `train`, `dev` or `test` [default test].
    #[arg(long)]
    split: Option<String>,
    /// Bootstrap resamples of the test set [default 1000].
    #[arg(long)]
    n_boot: Option<usize>,
    /// Independent partition estimates per resample [default 32].
    #[arg(long)]
    n_z: Option<usize>,
    /// Base samples per partition estimate [default 512].
    #[arg(long)]
    m: Option<usize>,
    /// Fine-tuned base to compare against.
    #[arg(long)]
    finetuned: Option<String>,
}

#[derive(Serialize)]
struct Configuration {
    activation: Activation,
    k: usize,
    max_len: usize,
}

/// Exact quantities by enumerating every string the base can emit.
#[derive(Serialize)]
struct ExactKl {
    log_z: f64,
    kl_base: f64,
    kl_rebm: f64,
    /// `kl_base - kl_rebm`, the expected value of the log-likelihood improvement.
    kl_improvement: f64,
}

#[derive(Serialize)]
struct EvalOutput {
    configuration: Configuration,
    #[serde(flatten)]
    report: ImprovementReport,
    /// `ppl(fine-tuned base) / ppl(base)` on the same split.
    #[serde(skip_serializing_if = "Option::is_none")]
    finetuned_ppl_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<ExactKl>,
}

pub fn eval_rebm(a: EvalArgs) -> Result<()> {
    let mut run = Run::start("eval-rebm", &a.common)?;
    let s = &mut run.settings;
    let base_path: String = s.require("base", a.base)?;
    let rebm_path: String = s.require("rebm", a.rebm)?;
    let corpus: String = s.require("corpus", a.corpus)?;
    let split = s.get("split", a.split, "test".to_string())?;
    let cfg = BootstrapConfig {
        n_boot: s.get("n_boot", a.n_boot, 1000)?,
        n_z: s.get("n_z", a.n_z, 32)?,
        m: s.get("m", a.m, 512)?,
        seed: run.seed,
    };
    let finetuned: Option<String> = s.optional("finetuned", a.finetuned)?;
    if cfg.n_boot == 0 || cfg.n_z == 0 || cfg.m == 0 {
        bail!("n-boot, n-z and m must be positive");
    }
    run.freeze()?;
    let dir = Path::new(&corpus);
    let task = read_toy_task(dir)?;
    let test = read_toy_split(dir, &split, task.symbols)?;
    if test.is_empty() {
        bail!("split {split} is empty");
    }
    let text = fs::read_to_string(&rebm_path).with_context(|| format!("reading {rebm_path}"))?;
    let file: RebmFile = serde_json::from_str(&text).with_context(|| format!("parsing {rebm_path}"))?;
    if file.symbols != task.symbols {
        bail!("discriminator alphabet does not match the corpus");
    }
    let base = load_base(&base_path, task.symbols)?;
    let model = RebmModel::new(base, file.discriminator, file.max_len);
    let report = bootstrap_report(&model.base, &model.disc, model.max_len, &test, &cfg);
    let w: usize = test.iter().map(|x| x.len() + 1).sum();
    let finetuned_ppl_ratio = match &finetuned {
        Some(p) => {
            let tuned = load_base(p, task.symbols)?;
            let diff: f64 = test
                .iter()
                .map(|x| truncated_log_prob(&model.base, x, model.max_len) - truncated_log_prob(&tuned, x, model.max_len))
                .sum();
            Some((diff / w as f64).exp())
        }
        None => None,
    };
    let exact = match universe_size(task.symbols, model.max_len) {
        Some(n) if n <= EXACT_LIMIT => {
            let universe = toy::all_strings(task.symbols, model.max_len);
            let p = task.target();
            let log_z = exact_z(&model.base, &model.disc, model.max_len, &universe);
            let kl_base = exact_kl(&p, |x| truncated_log_prob(&model.base, x, model.max_len))?;
            let kl_rebm = exact_kl(&p, |x| model.log_unnormalized(x) - log_z)?;
            Some(ExactKl { log_z, kl_base, kl_rebm, kl_improvement: kl_base - kl_rebm })
        }
        _ => None,
    };
    let (lo, hi, mean) = report.ll_improvement_ci;
    eprintln!("ll improvement {mean:.4} nats/seq, 95% CI [{lo:.4}, {hi:.4}]");
    eprintln!("ppl improvement (conservative) {:.2}%", report.ppl_improvement_percent);
    let output = EvalOutput {
        configuration: Configuration { activation: model.disc.activation(), k: file.k, max_len: model.max_len },
        report,
        finetuned_ppl_ratio,
        exact,
    };
    run.write_json("improvement.json", &output)?;
    run.finish()
}

#[derive(Args)]
pub struct KlArgs {
    #[command(flatten)]
    common: Common,
    /// Random instances [default 20].
    #[arg(long)]
    instances: Option<usize>,
    /// Alphabet size [default 2].
    #[arg(long)]
    symbols: Option<usize>,
    /// Longest string [default 4].
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Serialize)]
struct KlRow {
    instance: usize,
    support: usize,
    lhs: f64,
    rhs: f64,
    abs_diff: f64,
}

/// Random bases of order 1 and 2, a random discriminator and a random `p`
/// on a random subset of strings.
fn random_instance(
    symbols: usize,
    universe: &[Vec<u32>],
    rng: &mut impl Rng,
) -> (FiniteDist, NgramModel, NgramModel, Discriminator) {
    let vocab = Vocab { context: 0, output: symbols + 1 };
    let a = NgramModel::with_random_init(vocab, 1, 1.5, rng);
    let b = NgramModel::with_random_init(vocab, 2, 1.5, rng);
    let act = if rng.gen() { Activation::Tanh2 } else { Activation::SoftplusNeg { shift: rng.gen_range(-2.0..2.0) } };
    let g = Discriminator::with_random_init(symbols, act, 1.0, rng);
    let mut p = FiniteDist::new();
    for x in universe {
        if rng.gen_bool(0.5) {
            p.push((x.clone(), rng.gen_range(0.1..1.0)));
        }
    }
    if p.is_empty() {
        p.push((universe[rng.gen_range(0..universe.len())].clone(), 1.0));
    }
    let total: f64 = p.iter().map(|(_, w)| w).sum();
    p.iter_mut().for_each(|(_, w)| *w /= total);
    (p, a, b, g)
}

pub fn kl_check(a: KlArgs) -> Result<()> {
    let mut run = Run::start("kl-check", &a.common)?;
    let instances = run.settings.get("instances", a.instances, 20usize)?;
    let symbols = run.settings.get("symbols", a.symbols, 2usize)?;
    let max_len = run.settings.get("max_len", a.max_len, 4usize)?;
    if symbols == 0 || universe_size(symbols, max_len).is_none_or(|n| n > EXACT_LIMIT) {
        bail!("need at least one symbol and a universe of at most {EXACT_LIMIT} strings");
    }
    run.freeze()?;
    let universe = toy::all_strings(symbols, max_len);
    let mut rows = Vec::new();
    for i in 0..instances {
        let mut rng = rng_for(run.seed, &[i as u64]);
        let (p, qa, qb, g) = random_instance(symbols, &universe, &mut rng);
        let sides = kl_decomposition(&p, &qa, &qb, &g, max_len, &universe)?;
        rows.push(KlRow { instance: i, support: p.len(), lhs: sides.lhs, rhs: sides.rhs, abs_diff: (sides.lhs - sides.rhs).abs() });
    }
    let worst = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    println!("instances: {instances}");
    println!("max |lhs - rhs|: {worst:e}");
    run.write_json("kl_check.json", &serde_json::json!({ "max_abs_diff": worst, "tolerance": 1e-9, "instances": rows }))?;
    run.finish()?;
    if worst > 1e-9 {
        bail!("KL relation violated by {worst:e}");
    }
    Ok(())
}
