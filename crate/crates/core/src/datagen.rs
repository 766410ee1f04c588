//! Random 3-SAT at the phase-transition clause density, paired with
//! assignment targets for the one-more-satisfier construction.
//!
//! On disk a corpus is one directory per variable count holding
//! `train.txt`, `dev.txt` and `test.txt`, plus `corpus.json` at the root.
//! Each line is `dimacs<TAB>bits` where `bits` is a satisfying assignment of
//! `add_one(f)`, or `dimacs<TAB>UNSAT` when the only one is all zeros.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::formula::{dimacs_decode, dimacs_encode, Clause, Cnf3Formula, DimacsOptions, FormulaError, Literal};
use crate::rng::{derive_seed, rng_for};

/// Corpus metadata file written next to the per-count directories.
pub const CORPUS_FILE: &str = "corpus.json";

/// Clause density `42667/10000`.
pub const ALPHA: Alpha = Alpha { num: 42667, den: 10000 };

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("need at least 3 variables, got {0}")]
    TooFewVars(usize),
    #[error("invalid corpus spec: {0}")]
    Spec(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alpha {
    pub num: u64,
    pub den: u64,
}

impl Alpha {
    pub fn clause_count(&self, vars: usize) -> usize {
        (self.num as u128 * vars as u128 / self.den as u128) as usize
    }
}

/// `floor(alpha * vars)` clauses, each over three distinct variables drawn
/// uniformly, with independent fair signs. Duplicate clauses may occur.
pub fn gen_hard3sat<R: Rng + ?Sized>(vars: usize, alpha: Alpha, rng: &mut R) -> Result<Cnf3Formula, DatagenError> {
    if vars < 3 {
        return Err(DatagenError::TooFewVars(vars));
    }
    let clauses = (0..alpha.clause_count(vars))
        .map(|_| {
            let picked = sample(rng, vars, 3);
            Clause::new(picked.iter().map(|v| Literal { var: v as u32 + 1, negated: rng.gen() }).collect())
        })
        .collect();
    Ok(Cnf3Formula::new(vars, clauses)?)
}

pub fn gen_hard3sat_seeded(vars: usize, seed: u64) -> Result<Cnf3Formula, DatagenError> {
    gen_hard3sat(vars, ALPHA, &mut rng_for(seed, &[]))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub var_counts: Vec<usize>,
    pub per_count: usize,
    /// Train, dev and test ratio.
    pub split: [usize; 3],
    pub seed: u64,
    pub alpha: Alpha,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self { var_counts: (6..=14).collect(), per_count: 1020, split: [100, 1, 1], seed: 0, alpha: ALPHA }
    }
}

impl CorpusSpec {
    fn validate(&self) -> Result<(), DatagenError> {
        if self.split.contains(&0) {
            return Err(DatagenError::Spec("split parts must be positive".into()));
        }
        if self.alpha.num == 0 || self.alpha.den == 0 {
            return Err(DatagenError::Spec("alpha must be positive".into()));
        }
        if let Some(&v) = self.var_counts.iter().find(|&&v| v < 3) {
            return Err(DatagenError::TooFewVars(v));
        }
        Ok(())
    }

    /// Train, dev and test sizes for one variable count.
    pub fn split_sizes(&self) -> [usize; 3] {
        let unit = self.per_count / self.split.iter().sum::<usize>();
        let dev = unit * self.split[1];
        let test = unit * self.split[2];
        [self.per_count - dev - test, dev, test]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    /// Variables relabelled so use counts are non-increasing.
    pub formula: Cnf3Formula,
    /// Satisfying assignment of `add_one(formula)`: `0^{j+1}` or `1 . a`.
    pub target: BitString,
    /// Number of satisfying assignments of `formula`.
    pub count: u64,
}

impl Example {
    /// Samples the target uniformly among the `count + 1` satisfiers of
    /// `add_one(formula)`, so the first bit follows `p(a1 | f')`.
    pub fn sample<R: Rng + ?Sized>(formula: Cnf3Formula, rng: &mut R) -> Result<Self, DatagenError> {
        let f = formula.to_formula();
        let sats = f.satisfying_assignments()?;
        let count = sats.len() as u64;
        let r = rng.gen_range(0..=sats.len());
        let target = if r == 0 {
            BitString::zeros(f.var_count() + 1)
        } else {
            BitString::from_bits(vec![true]).concat(&sats[r - 1])
        };
        Ok(Self { formula, target, count })
    }

    pub fn is_satisfiable(&self) -> bool {
        self.count > 0
    }

    pub fn to_line(&self) -> String {
        let bits = if self.count == 0 { "UNSAT".to_string() } else { self.target.to_string() };
        format!("{}\t{}", dimacs_encode(&self.formula), bits)
    }

    /// Parses a corpus line and re-checks the target against the formula.
    pub fn from_line(line: &str) -> Result<Self, String> {
        let (dimacs, bits) = line.split_once('\t').ok_or("missing tab")?;
        let formula = dimacs_decode(dimacs, DimacsOptions::default()).map_err(|e| e.to_string())?;
        let f = formula.to_formula();
        let count = f.count_satisfying().map_err(|e| e.to_string())?;
        let target = if bits == "UNSAT" {
            if count != 0 {
                return Err("marked UNSAT but satisfiable".into());
            }
            BitString::zeros(f.var_count() + 1)
        } else {
            bits.parse::<BitString>().map_err(|e| e.to_string())?
        };
        let ok = f.add_one().evaluate(&target).map_err(|e| e.to_string())?;
        if !ok {
            return Err(format!("target {target} does not satisfy the formula"));
        }
        Ok(Self { formula, target, count })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountManifest {
    pub var_count: usize,
    pub seed: u64,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub satisfiable: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub spec: CorpusSpec,
    pub counts: Vec<CountManifest>,
}

#[derive(Clone, Debug, Default)]
pub struct Splits {
    pub train: Vec<Example>,
    pub dev: Vec<Example>,
    pub test: Vec<Example>,
}

impl Splits {
    pub fn all(&self) -> impl Iterator<Item = &Example> {
        self.train.iter().chain(&self.dev).chain(&self.test)
    }
}

/// Generates all examples for one variable count. Example `i` uses the seed
/// derived from `(master, var_count, i)`.
pub fn generate_count(spec: &CorpusSpec, vars: usize) -> Result<Splits, DatagenError> {
    let examples = (0..spec.per_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(spec.seed, &[vars as u64, i as u64]);
            let f = gen_hard3sat(vars, spec.alpha, &mut rng)?.sorted_by_use();
            Example::sample(f, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let [train, dev, _] = spec.split_sizes();
    let mut it = examples.into_iter();
    Ok(Splits {
        train: it.by_ref().take(train).collect(),
        dev: it.by_ref().take(dev).collect(),
        test: it.collect(),
    })
}

pub fn build_corpus(spec: &CorpusSpec, out: &Path) -> Result<CorpusManifest, DatagenError> {
    spec.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut counts = Vec::new();
    for &vars in &spec.var_counts {
        let splits = generate_count(spec, vars)?;
        let dir = out.join(format!("vars_{vars}"));
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (name, part) in [("train", &splits.train), ("dev", &splits.dev), ("test", &splits.test)] {
            let path = dir.join(format!("{name}.txt"));
            let mut text = String::new();
            for e in part {
                text.push_str(&e.to_line());
                text.push('\n');
            }
            fs::write(&path, text).map_err(io_err(&path))?;
        }
        counts.push(CountManifest {
            var_count: vars,
            seed: derive_seed(spec.seed, &[vars as u64]),
            train: splits.train.len(),
            dev: splits.dev.len(),
            test: splits.test.len(),
            satisfiable: splits.all().filter(|e| e.is_satisfiable()).count(),
        });
    }
    let manifest = CorpusManifest { spec: spec.clone(), counts };
    let path = out.join(CORPUS_FILE);
    let mut file = fs::File::create(&path).map_err(io_err(&path))?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    writeln!(file, "{json}").map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn read_split(path: &Path) -> Result<Vec<Example>, DatagenError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            Example::from_line(l).map_err(|msg| DatagenError::Parse { path: path.to_path_buf(), line: i + 1, msg })
        })
        .collect()
}

/// Reads every split listed in the corpus manifest.
pub fn load_corpus(dir: &Path) -> Result<(CorpusManifest, Vec<(usize, Splits)>), DatagenError> {
    let path = dir.join(CORPUS_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: CorpusManifest = serde_json::from_str(&text)
        .map_err(|e| DatagenError::Parse { path: path.clone(), line: e.line(), msg: e.to_string() })?;
    let mut out = Vec::new();
    for c in &manifest.counts {
        let d = dir.join(format!("vars_{}", c.var_count));
        out.push((
            c.var_count,
            Splits {
                train: read_split(&d.join("train.txt"))?,
                dev: read_split(&d.join("dev.txt"))?,
                test: read_split(&d.join("test.txt"))?,
            },
        ));
    }
    Ok((manifest, out))
}
