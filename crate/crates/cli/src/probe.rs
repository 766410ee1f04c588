use std::fs;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use num::{BigInt, BigRational, ToPrimitive};
use rayon::prelude::*;
use satlang::bits::BitString;
use satlang::formula::{dimacs_decode, enc, DimacsOptions, Lambda};
use satlang::language::{separation_gap, FormulaClass, SatWeightedLanguage, SeparationProbe};
use satlang::witness::WitnessRnn;
use serde::Serialize;

use crate::run::Run;
use crate::Common;

#[derive(Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    /// File holding one formula in the `#`-separated DIMACS form.
    #[arg(long)]
    dimacs: Option<String>,
    /// Approximation factor: integer, `p/q`, decimal, or `sqrt(r)`.
    #[arg(long)]
    lambda: Option<String>,
    /// Blow-up parameter [default: smallest admissible for lambda].
    #[arg(long)]
    k: Option<u32>,
    /// `full` (full-support language) or `members`.
    #[arg(long)]
    variant: Option<String>,
    /// Tail weight of the full-support language, e.g. `1` or `1/2`.
    #[arg(long)]
    epsilon: Option<String>,
    /// Accept clauses with repeated variables.
    #[arg(long)]
    tolerant: Option<bool>,
}

fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    if let Some((int, frac)) = t.split_once('.') {
        let digits = format!("{int}{frac}");
        let num = BigInt::from_str(&digits).with_context(|| format!("bad number {t:?}"))?;
        return Ok(BigRational::new(num, BigInt::from(10).pow(frac.len() as u32)));
    }
    BigRational::from_str(t).map_err(|e| anyhow::anyhow!("bad number {t:?}: {e}"))
}

pub fn parse_lambda(text: &str) -> Result<Lambda> {
    let t = text.trim();
    let inner = t.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')).or_else(|| t.strip_prefix("sqrt"));
    Ok(match inner {
        Some(r) => Lambda::from_square(parse_rational(r)?)?,
        None => Lambda::from_rational(parse_rational(t)?)?,
    })
}

#[derive(Serialize)]
struct ProbeReport {
    formula: String,
    vars: usize,
    clauses: usize,
    count_satisfying: u64,
    satisfiable: bool,
    lambda_squared: String,
    variant: String,
    /// `[p(0), p(1), p($)]` after `enc(phi')`, exact.
    local_distribution: Vec<String>,
    p0_f64: f64,
    #[serde(flatten)]
    gap: satlang::language::SeparationGap,
}

pub fn probe_localprob(a: ProbeArgs) -> Result<()> {
    let mut run = Run::start("probe-localprob", &a.common)?;
    let path: String = run.settings.require("dimacs", a.dimacs)?;
    let lambda_text = run.settings.get("lambda", a.lambda, "2".to_string())?;
    let variant = run.settings.get("variant", a.variant, "full".to_string())?;
    let tolerant = run.settings.get("tolerant", a.tolerant, false)?;
    let lambda = parse_lambda(&lambda_text)?;
    let k = run.settings.optional("k", a.k)?;
    let lang = match variant.as_str() {
        "full" => {
            let eps = run.settings.get("epsilon", a.epsilon, "1".to_string())?;
            SatWeightedLanguage::full_support(parse_rational(&eps)?)
        }
        "members" => SatWeightedLanguage::members_only(),
        other => bail!("unknown variant {other:?} (expected full or members)"),
    };
    run.freeze()?;

    let text = fs::read_to_string(&path).with_context(|| format!("reading {path}"))?;
    let opts = DimacsOptions { tolerate_duplicates: tolerant, ..Default::default() };
    let cnf = dimacs_decode(text.trim(), opts).with_context(|| format!("parsing {path}"))?;
    let phi = cnf.to_formula();
    let probe = match k {
        Some(k) => SeparationProbe { lambda, k },
        None => SeparationProbe::for_lambda(lambda),
    };
    let count = phi.count_satisfying()?;
    let gap = separation_gap(&lang, &phi, &probe)?;
    let prefix = enc(&phi.add_one_and_blow_up(probe.k)?);
    let dist = lang.local_distribution(&prefix)?;
    let report = ProbeReport {
        formula: text.trim().to_string(),
        vars: cnf.var_count(),
        clauses: cnf.clauses().len(),
        count_satisfying: count,
        satisfiable: count > 0,
        lambda_squared: probe.lambda.squared().to_string(),
        variant,
        local_distribution: dist.iter().map(|r| r.to_string()).collect(),
        p0_f64: gap.p0.to_f64().unwrap_or(f64::NAN),
        gap,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    run.write_json("probe.json", &report)?;
    run.finish()
}

#[derive(Args)]
pub struct WitnessArgs {
    #[command(flatten)]
    common: Common,
    /// Check every string of each length up to this one.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Serialize)]
struct LengthCheck {
    n: usize,
    strings: u64,
    members: u64,
    mismatches: u64,
    scanner_units: usize,
    param_bits: usize,
}

pub fn witness_check(a: WitnessArgs) -> Result<()> {
    let mut run = Run::start("witness-check", &a.common)?;
    let n_max = run.settings.get("n", a.n, 12usize)?;
    if n_max > 24 {
        bail!("exhaustive check is limited to n <= 24");
    }
    run.freeze()?;
    let lang = SatWeightedLanguage::members_only().with_class(FormulaClass::Cnf3);
    let mut rows = Vec::new();
    for n in 0..=n_max {
        let rnn = WitnessRnn::build(n)?;
        let (members, mismatches) = (0..1u64 << n)
            .into_par_iter()
            .map(|v| {
                let x = BitString::from_uint(v, n);
                let w = lang.weight(&x);
                let got = rnn.eval(&x).expect("length matches");
                (!num::Zero::is_zero(&w) as u64, (got != w) as u64)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        rows.push(LengthCheck {
            n,
            strings: 1 << n,
            members,
            mismatches,
            scanner_units: rnn.scanner_units(),
            param_bits: rnn.param_bits().len(),
        });
    }
    let total: u64 = rows.iter().map(|r| r.mismatches).sum();
    println!("lengths: 0..={n_max}");
    println!("strings: {}", rows.iter().map(|r| r.strings).sum::<u64>());
    println!("members: {}", rows.iter().map(|r| r.members).sum::<u64>());
    println!("mismatches: {total}");
    run.write_json("witness.json", &serde_json::json!({ "n_max": n_max, "mismatches": total, "lengths": rows }))?;
    run.finish()?;
    if total > 0 {
        bail!("{total} strings where the witness disagrees with the exact weight");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_forms() {
        assert_eq!(parse_lambda("sqrt(2)").unwrap().squared(), &BigRational::from_integer(2.into()));
        assert_eq!(parse_lambda("2").unwrap().squared(), &BigRational::from_integer(4.into()));
        assert_eq!(parse_lambda("1.5").unwrap().squared(), &BigRational::new(9.into(), 4.into()));
        assert_eq!(parse_lambda("3/2").unwrap(), parse_lambda("1.5").unwrap());
        assert!(parse_lambda("0.5").is_err());
    }
}
