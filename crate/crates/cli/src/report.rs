use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::Value;

use crate::run::Run;
use crate::Common;

#[derive(Args)]
pub struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// `eval.json` and `improvement.json` files, comma separated.
    #[arg(long)]
    inputs: Option<String>,
}

const EVAL_COLUMNS: [&str; 8] = [
    "n_examples",
    "n_satisfiable",
    "n_assignment",
    "enumeration_ppl",
    "enumeration_ppl_oracle",
    "assignment_ppl",
    "assignment_ppl_oracle",
    "token_ppl",
];

fn cell(v: Option<&Value>) -> String {
    match v {
        Some(Value::Number(n)) => n.to_string(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Bool(b)) => b.to_string(),
        _ => String::new(),
    }
}

fn model_name(v: &Value) -> String {
    let m = &v["model"];
    let kind = cell(m.get("kind"));
    match kind.as_str() {
        "rnn" => format!("rnn-h{}-l{}", cell(m.get("hidden")), cell(m.get("layers"))),
        "ngram" => format!("ngram-{}", cell(m.get("order"))),
        _ => kind,
    }
}

/// One series of (vars, ppl) points.
struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn render_svg(series: &[Series]) -> String {
    let (w, h, pad) = (640.0, 400.0, 56.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 1.0f64);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    let y0 = 1.0;
    y1 *= 1.05;
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = h - pad,
        r = w - pad
    );
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, pad - 6.0, sy(y) + 4.0);
    }
    let ticks: Vec<f64> = {
        let mut t: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    };
    for x in ticks {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{x}</text>"#, sx(x), h - pad + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">variables</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">perplexity</text>"#, h / 2.0, h / 2.0);
    for (i, se) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = se.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        for &(x, y) in &se.points {
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = pad + 16.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, w - pad - 200.0, ly - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, w - pad - 184.0, se.label);
    }
    s.push_str("</svg>\n");
    s
}

pub fn report(a: ReportArgs) -> Result<()> {
    let mut run = Run::start("report", &a.common)?;
    let inputs: String = run.settings.require("inputs", a.inputs)?;
    run.freeze()?;
    let files: Vec<&str> = inputs.split(',').map(str::trim).filter(|f| !f.is_empty()).collect();
    if files.is_empty() {
        bail!("no input files");
    }
    let mut eval_csv = format!("file,model,split,vars,{}\n", EVAL_COLUMNS.join(","));
    let mut imp_csv = String::from(
        "file,activation,k,max_len,n_test,ll_mean,ll_lo,ll_hi,ppl_ratio_mean,ppl_ratio_conservative,ppl_improvement_percent,finetuned_ppl_ratio\n",
    );
    let mut series = Vec::new();
    let (mut n_eval, mut n_imp) = (0, 0);
    for f in &files {
        let text = fs::read_to_string(f).with_context(|| format!("reading {f}"))?;
        let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {f}"))?;
        if let Some(results) = v.get("results").and_then(Value::as_array) {
            n_eval += 1;
            let model = model_name(&v);
            let mut enumeration = Vec::new();
            let mut assignment = Vec::new();
            for r in results {
                let rep = &r["report"];
                let vars = r["vars"].as_f64().unwrap_or(f64::NAN);
                let cols: Vec<String> = EVAL_COLUMNS.iter().map(|c| cell(rep.get(*c))).collect();
                let _ = writeln!(eval_csv, "{f},{model},{},{},{}", cell(v.get("split")), cell(r.get("vars")), cols.join(","));
                if let Some(y) = rep["enumeration_ppl"].as_f64() {
                    enumeration.push((vars, y));
                }
                if let Some(y) = rep["assignment_ppl"].as_f64() {
                    assignment.push((vars, y));
                }
            }
            series.push(Series { label: format!("{model} enumeration"), points: enumeration });
            series.push(Series { label: format!("{model} assignment"), points: assignment });
        } else if let Some(tp) = v.get("token_ppl") {
            n_eval += 1;
            let mut cols = vec![String::new(); EVAL_COLUMNS.len()];
            cols[EVAL_COLUMNS.len() - 1] = cell(Some(tp));
            let _ = writeln!(eval_csv, "{f},{},{},,{}", model_name(&v), cell(v.get("split")), cols.join(","));
        } else if let Some(ci) = v.get("ll_improvement_ci").and_then(Value::as_array) {
            n_imp += 1;
            let c = &v["configuration"];
            let act = cell(c["activation"].get("kind"));
            let _ = writeln!(
                imp_csv,
                "{f},{act},{},{},{},{},{},{},{},{},{},{}",
                cell(c.get("k")),
                cell(c.get("max_len")),
                cell(v.get("n_test")),
                cell(ci.get(2)),
                cell(ci.first()),
                cell(ci.get(1)),
                cell(v.get("ppl_ratio_mean")),
                cell(v.get("ppl_ratio_conservative")),
                cell(v.get("ppl_improvement_percent")),
                cell(v.get("finetuned_ppl_ratio")),
            );
        } else {
            bail!("{f} is neither an eval-ar nor an eval-rebm result");
        }
    }
    if n_eval > 0 {
        run.write_text("report.csv", &eval_csv)?;
    }
    if n_imp > 0 {
        run.write_text("improvement.csv", &imp_csv)?;
    }
    series.retain(|s| !s.points.is_empty());
    if !series.is_empty() {
        run.write_text("ppl_vs_vars.svg", &render_svg(&series))?;
    }
    eprintln!("{n_eval} evaluation and {n_imp} improvement files");
    run.finish()
}
