use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use satlang::datagen::{load_corpus, Example, CORPUS_FILE};
use satlang::rng::rng_for;
use satlang::seqmodel::{
    eval_sat, load_checkpoint, sat_sequence, save_checkpoint, token_ppl, train_ar as fit, AnyModel, ArModel,
    EvalReport, ModelMeta, NgramModel, RnnModel, SatOracleModel, Sequence, TrainConfig, Vocab,
};
use serde::Serialize;

use crate::config::parse_list;
use crate::data::{read_toy_split, read_toy_task, TOY_FILE};
use crate::run::Run;
use crate::Common;

pub const MODEL_FILE: &str = "model.ckpt";

/// Split name to examples, per variable count.
pub struct SatCorpus {
    pub counts: Vec<(usize, Vec<Example>)>,
    pub max_vars: usize,
}

pub fn load_sat(dir: &Path, split: &str, vars: Option<&[usize]>) -> Result<SatCorpus> {
    let (manifest, all) = load_corpus(dir).with_context(|| format!("loading corpus {}", dir.display()))?;
    let max_vars = manifest.spec.var_counts.iter().copied().max().unwrap_or(0);
    let mut counts = Vec::new();
    for (v, s) in all {
        if vars.is_some_and(|vs| !vs.contains(&v)) {
            continue;
        }
        let part = match split {
            "train" => s.train,
            "dev" => s.dev,
            "test" => s.test,
            other => bail!("unknown split {other:?}"),
        };
        counts.push((v, part));
    }
    if let Some(vs) = vars {
        if let Some(v) = vs.iter().find(|v| !counts.iter().any(|(c, _)| c == *v)) {
            bail!("corpus has no variable count {v}");
        }
    }
    Ok(SatCorpus { counts, max_vars })
}

pub enum CorpusKind {
    Sat,
    Toy,
}

pub fn corpus_kind(dir: &Path) -> Result<CorpusKind> {
    if dir.join(CORPUS_FILE).exists() {
        Ok(CorpusKind::Sat)
    } else if dir.join(TOY_FILE).exists() {
        Ok(CorpusKind::Toy)
    } else {
        bail!("{} holds neither {CORPUS_FILE} nor {TOY_FILE}", dir.display())
    }
}

fn check_fits(vocab: Vocab, seqs: &[Sequence]) -> Result<()> {
    for s in seqs {
        if s.context.iter().any(|&t| t as usize >= vocab.context) || s.target.iter().any(|&t| t >= vocab.end()) {
            bail!("corpus uses symbols outside the model vocabulary ({} context ids)", vocab.context);
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus directory from gen-data.
    #[arg(long)]
    corpus: Option<String>,
    /// `trie` (exact oracle, SAT corpora only), `ngram` or `rnn` [default rnn].
    #[arg(long)]
    kind: Option<String>,
    /// Variable counts to train on [default: all].
    #[arg(long)]
    vars: Option<String>,
    /// N-gram order, 1 to 4 [ngram; default 2].
    #[arg(long)]
    order: Option<usize>,
    /// Hidden units [rnn; default 64].
    #[arg(long)]
    hidden: Option<usize>,
    /// Stacked layers, 1 or 2 [rnn; default 1].
    #[arg(long)]
    layers: Option<usize>,
    /// Learning rate [default 0.05].
    #[arg(long)]
    lr: Option<f64>,
    /// Momentum coefficient [default 0.9].
    #[arg(long)]
    momentum: Option<f64>,
    /// Sequences per update [default 16].
    #[arg(long)]
    batch: Option<usize>,
    /// Epoch limit [default 20].
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Epochs without dev improvement before stopping [default 2].
    #[arg(long)]
    patience: Option<usize>,
    /// Gradient-norm clip; 0 disables [default 5].
    #[arg(long)]
    clip: Option<f64>,
    /// Half-width of the uniform n-gram initialization [default 0].
    #[arg(long)]
    init_scale: Option<f64>,
}

#[derive(Serialize)]
struct TrainSummary {
    model: ModelMeta,
    params: usize,
    n_train: usize,
    n_dev: usize,
    best_epoch: usize,
    curve: Vec<satlang::seqmodel::EpochStat>,
}

pub fn train_ar(a: TrainArgs) -> Result<()> {
    let mut run = Run::start("train-ar", &a.common)?;
    let s = &mut run.settings;
    let corpus: String = s.require("corpus", a.corpus)?;
    let kind = s.get("kind", a.kind, "rnn".to_string())?;
    let vars = s.optional("vars", a.vars)?.map(|v| parse_list(&v)).transpose()?;
    let cfg = TrainConfig {
        lr: s.get("lr", a.lr, 0.05)?,
        momentum: s.get("momentum", a.momentum, 0.9)?,
        batch: s.get("batch", a.batch, 16)?,
        seed: run.seed,
        patience: s.get("patience", a.patience, 2)?,
        max_epochs: s.get("max_epochs", a.max_epochs, 20)?,
        clip: Some(s.get("clip", a.clip, 5.0)?).filter(|&c| c > 0.0),
    };
    cfg.validate()?;
    let dir = Path::new(&corpus);
    let (vocab, train, dev) = match corpus_kind(dir)? {
        CorpusKind::Sat => {
            let tr = load_sat(dir, "train", vars.as_deref())?;
            let dv = load_sat(dir, "dev", vars.as_deref())?;
            let seqs = |c: &SatCorpus| c.counts.iter().flat_map(|(_, e)| e.iter().map(sat_sequence)).collect::<Vec<_>>();
            (Vocab::sat(tr.max_vars), seqs(&tr), seqs(&dv))
        }
        CorpusKind::Toy => {
            if vars.is_some() {
                bail!("--vars applies to SAT corpora only");
            }
            let task = read_toy_task(dir)?;
            let read = |split| -> Result<Vec<Sequence>> {
                Ok(read_toy_split(dir, split, task.symbols)?.into_iter().map(Sequence::unconditioned).collect())
            };
            (task.vocab(), read("train")?, read("dev")?)
        }
    };
    let mut rng = rng_for(run.seed, &[0]);
    let model = match kind.as_str() {
        "trie" => {
            if vocab.context == 0 {
                bail!("the exact trie model needs a SAT corpus");
            }
            AnyModel::Oracle(SatOracleModel::new(vocab))
        }
        "ngram" => {
            let order = run.settings.get("order", a.order, 2)?;
            let scale = run.settings.get("init_scale", a.init_scale, 0.0)?;
            if order == 0 || order > 4 {
                bail!("ngram order must be 1 to 4");
            }
            if scale > 0.0 {
                AnyModel::Ngram(NgramModel::with_random_init(vocab, order, scale, &mut rng))
            } else {
                AnyModel::Ngram(NgramModel::new(vocab, order))
            }
        }
        "rnn" => {
            let hidden = run.settings.get("hidden", a.hidden, 64)?;
            let layers = run.settings.get("layers", a.layers, 1)?;
            if hidden == 0 || !(1..=2).contains(&layers) {
                bail!("rnn needs hidden >= 1 and 1 or 2 layers");
            }
            AnyModel::Rnn(RnnModel::new(vocab, hidden, layers, &mut rng))
        }
        other => bail!("unknown model kind {other:?} (expected trie, ngram or rnn)"),
    };
    run.freeze()?;
    check_fits(vocab, &train)?;
    check_fits(vocab, &dev)?;
    if train.is_empty() {
        bail!("training split is empty");
    }
    let out = fit(model, &train, &dev, &cfg)?;
    for e in &out.curve {
        eprintln!("epoch {:>3}  dev loss {:.5}{}", e.epoch, e.dev_loss, if e.accepted { "  *" } else { "" });
    }
    save_checkpoint(&run.path(MODEL_FILE), &out.model)?;
    run.record(MODEL_FILE);
    let summary = TrainSummary {
        model: ModelMeta::of(&out.model),
        params: satlang::seqmodel::Trainable::params(&out.model).len(),
        n_train: train.len(),
        n_dev: dev.len(),
        best_epoch: out.best_epoch,
        curve: out.curve,
    };
    run.write_json("train.json", &summary)?;
    run.finish()
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Checkpoint from train-ar.
    #[arg(long)]
    model: Option<String>,
    /// Corpus directory.
    #[arg(long)]
    corpus: Option<String>,
    /// `train`, `dev` or `test` [default test].
    #[arg(long)]
    split: Option<String>,
    /// Variable counts to evaluate [default: all].
    #[arg(long)]
    vars: Option<String>,
}

#[derive(Serialize)]
pub struct CountResult {
    pub vars: usize,
    pub report: EvalReport,
}

#[derive(Serialize)]
struct EvalOutput {
    model: ModelMeta,
    split: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    results: Vec<CountResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    token_ppl: Option<f64>,
}

pub fn eval_ar(a: EvalArgs) -> Result<()> {
    let mut run = Run::start("eval-ar", &a.common)?;
    let ckpt: String = run.settings.require("model", a.model)?;
    let corpus: String = run.settings.require("corpus", a.corpus)?;
    let split = run.settings.get("split", a.split, "test".to_string())?;
    let vars = run.settings.optional("vars", a.vars)?.map(|v| parse_list(&v)).transpose()?;
    run.freeze()?;
    let model = load_checkpoint(Path::new(&ckpt)).with_context(|| format!("loading {ckpt}"))?;
    let vocab = model.vocab();
    let dir = Path::new(&corpus);
    let mut output = EvalOutput { model: ModelMeta::of(&model), split: split.clone(), results: Vec::new(), token_ppl: None };
    match corpus_kind(dir)? {
        CorpusKind::Sat => {
            let c = load_sat(dir, &split, vars.as_deref())?;
            for (v, examples) in c.counts {
                let seqs: Vec<Sequence> = examples.iter().map(sat_sequence).collect();
                check_fits(vocab, &seqs)?;
                let report = eval_sat(&model, &examples);
                eprintln!(
                    "vars {v}: enumeration ppl {:.4}, assignment ppl {:.4}, token ppl {:.4}",
                    report.enumeration_ppl, report.assignment_ppl, report.token_ppl
                );
                output.results.push(CountResult { vars: v, report });
            }
        }
        CorpusKind::Toy => {
            let task = read_toy_task(dir)?;
            let seqs: Vec<Sequence> =
                read_toy_split(dir, &split, task.symbols)?.into_iter().map(Sequence::unconditioned).collect();
            check_fits(vocab, &seqs)?;
            let p = token_ppl(&model, &seqs);
            eprintln!("token ppl {p:.4}");
            output.token_ppl = Some(p);
        }
    }
    run.write_json("eval.json", &output)?;
    run.finish()
}
