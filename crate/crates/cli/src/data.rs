use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use satlang::datagen::{build_corpus, Alpha, CorpusSpec, CORPUS_FILE};
use satlang::rebm::toy::{self, ToyTask};
use satlang::rng::rng_for;

use crate::config::parse_list;
use crate::run::Run;
use crate::Common;

/// Task description written next to a toy corpus.
pub const TOY_FILE: &str = "toy.json";

#[derive(Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    common: Common,
    /// `sat` (hard 3-SAT with assignment targets) or `toy`.
    #[arg(long)]
    task: Option<String>,
    /// Variable counts, e.g. `6,8,10`, `6..14` or `6-14` (inclusive) [sat; default 6..14].
    #[arg(long)]
    vars: Option<String>,
    /// Formulas per variable count [sat; default 1020].
    #[arg(long)]
    per_count: Option<usize>,
    /// Train:dev:test ratio [sat; default 100,1,1].
    #[arg(long)]
    split: Option<String>,
    /// Clauses per variable as a decimal [sat; default 4.2667].
    #[arg(long)]
    alpha: Option<String>,
    /// Alphabet size [toy; default 4].
    #[arg(long)]
    symbols: Option<usize>,
    /// Longest string [toy; default 8].
    #[arg(long)]
    max_len: Option<usize>,
    /// Forbidden bigrams as digit pairs, e.g. `00,01,12` [toy].
    #[arg(long)]
    forbidden: Option<String>,
    /// Split sizes [toy; default 2000,200,1000].
    #[arg(long)]
    sizes: Option<String>,
}

/// Exact decimal to a fraction with a power-of-ten denominator.
pub fn parse_alpha(text: &str) -> Result<Alpha> {
    let (int, frac) = text.trim().split_once('.').unwrap_or((text.trim(), ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        bail!("alpha must be a positive decimal, got {text:?}");
    }
    let den = 10u64.checked_pow(frac.len() as u32).context("alpha has too many digits")?;
    let num: u64 = format!("{int}{frac}").parse()?;
    if num == 0 {
        bail!("alpha must be positive");
    }
    Ok(Alpha { num, den })
}

fn parse_bigrams(text: &str) -> Result<Vec<(u32, u32)>> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let d: Vec<u32> = p.chars().filter_map(|c| c.to_digit(10)).collect();
            if d.len() != 2 || p.chars().count() != 2 {
                bail!("bad bigram {p:?}");
            }
            Ok((d[0], d[1]))
        })
        .collect()
}

pub fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut run = Run::start("gen-data", &a.common)?;
    let task = run.settings.get("task", a.task, "sat".to_string())?;
    match task.as_str() {
        "sat" => {
            let vars = parse_list(&run.settings.get("vars", a.vars, "6..14".to_string())?)?;
            let per_count = run.settings.get("per_count", a.per_count, 1020)?;
            let split = parse_list(&run.settings.get("split", a.split, "100,1,1".to_string())?)?;
            let alpha = parse_alpha(&run.settings.get("alpha", a.alpha, "4.2667".to_string())?)?;
            let [train, dev, test] = split[..] else { bail!("split needs three parts") };
            let spec = CorpusSpec { var_counts: vars.clone(), per_count, split: [train, dev, test], seed: run.seed, alpha };
            run.freeze()?;
            let manifest = build_corpus(&spec, &run.out)?;
            run.record(CORPUS_FILE);
            for c in &manifest.counts {
                for s in ["train", "dev", "test"] {
                    run.record(format!("vars_{}/{s}.txt", c.var_count));
                }
                eprintln!(
                    "vars {}: {} train, {} dev, {} test, {} satisfiable",
                    c.var_count, c.train, c.dev, c.test, c.satisfiable
                );
            }
        }
        "toy" => {
            let d = ToyTask::default();
            let symbols = run.settings.get("symbols", a.symbols, d.symbols)?;
            let max_len = run.settings.get("max_len", a.max_len, d.max_len)?;
            let default_forbidden: Vec<String> = d.forbidden.iter().map(|(x, y)| format!("{x}{y}")).collect();
            let forbidden = parse_bigrams(&run.settings.get("forbidden", a.forbidden, default_forbidden.join(","))?)?;
            let sizes = parse_list(&run.settings.get("sizes", a.sizes, "2000,200,1000".to_string())?)?;
            let [n_train, n_dev, n_test] = sizes[..] else { bail!("sizes needs three parts") };
            if !(1..=10).contains(&symbols) || forbidden.iter().any(|&(x, y)| x as usize >= symbols || y as usize >= symbols) {
                bail!("toy alphabet must have 1 to 10 symbols covering the forbidden bigrams");
            }
            let task = ToyTask { symbols, max_len, forbidden };
            run.freeze()?;
            let mut rng = rng_for(run.seed, &[]);
            for (name, n) in [("train", n_train), ("dev", n_dev), ("test", n_test)] {
                let text: String = task.sample_corpus(n, &mut rng).iter().map(|x| toy::to_line(x) + "\n").collect();
                run.write_text(&format!("{name}.txt"), &text)?;
            }
            run.write_json(TOY_FILE, &task)?;
            eprintln!("toy support: {} strings", task.support().len());
        }
        other => bail!("unknown task {other:?} (expected sat or toy)"),
    }
    run.finish()
}

pub fn read_toy_task(dir: &Path) -> Result<ToyTask> {
    let path = dir.join(TOY_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// One string per line; every line counts, including empty ones.
pub fn read_toy_split(dir: &Path, split: &str, symbols: usize) -> Result<Vec<Vec<u32>>> {
    let path = dir.join(format!("{split}.txt"));
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| toy::from_line(l, symbols).map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1)))
        .collect()
}
