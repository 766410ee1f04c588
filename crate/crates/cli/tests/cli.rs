use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn satlang(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satlang"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("satlang-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(satlang(&[]).status.code(), Some(2));
    assert_eq!(satlang(&["witness-check", "--bogus"]).status.code(), Some(2));
}

#[test]
fn witness_check_reports_no_mismatches() {
    let d = scratch("witness");
    let o = satlang(&["witness-check", "--n", "10", "--out", d.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("mismatches: 0"));
    assert_eq!(json(d.join("witness.json"))["mismatches"], 0);
}

#[test]
fn probe_decides_satisfiability() {
    let d = scratch("probe");
    let every_sign: Vec<String> = (0..8)
        .map(|m: u32| (1..=3).map(|v| if m >> (v - 1) & 1 == 1 { format!("-{v}") } else { v.to_string() }).collect::<Vec<_>>().join(" "))
        .collect();
    let cases = [("sat", "1 2 3 # -1 2 -3".to_string(), true), ("unsat", every_sign.join(" # "), false)];
    for (name, text, sat) in cases {
        let f = d.join(format!("{name}.txt"));
        fs::write(&f, text).unwrap();
        let out = d.join(name);
        let o = satlang(&["probe-localprob", "--dimacs", f.to_str().unwrap(), "--lambda", "sqrt(2)", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let r = json(out.join("probe.json"));
        assert_eq!(r["satisfiable"], sat);
        assert_eq!(r["decided_sat"], sat);
        assert_eq!(r["count_satisfying"].as_u64().unwrap() > 0, sat);
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let d = scratch("config");
    let cfg = d.join("run.cfg");
    fs::write(&cfg, "# witness sizes\nn = 3\n").unwrap();
    let out = d.join("a");
    let o = satlang(&["witness-check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout(&o).contains("lengths: 0..=3"));
    let o = satlang(&["witness-check", "--config", cfg.to_str().unwrap(), "--n", "4", "--out", out.to_str().unwrap()]);
    assert!(stdout(&o).contains("lengths: 0..=4"));
    assert_eq!(json(out.join("manifest.json"))["config"]["n"], "4");

    fs::write(&cfg, "n = 3\nlamda = 2\n").unwrap();
    let o = satlang(&["witness-check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("lamda"), "{err}");
}

#[test]
fn missing_input_is_a_json_error() {
    let d = scratch("missing");
    let o = satlang(&["eval-ar", "--model", "nope.ckpt", "--corpus", "nowhere", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].is_string());
}

#[test]
fn toy_pipeline_end_to_end() {
    let d = scratch("toy");
    let p = |n: &str| d.join(n).display().to_string();
    let run = |args: &[&str]| {
        let o = satlang(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    run(&["gen-data", "--task", "toy", "--max-len", "5", "--sizes", "400,60,200", "--out", &p("toy")]);
    run(&["train-ar", "--corpus", &p("toy"), "--kind", "ngram", "--order", "1", "--max-epochs", "3", "--out", &p("base")]);
    run(&["train-rebm", "--base", &format!("{}/model.ckpt", p("base")), "--corpus", &p("toy"), "--max-epochs", "4", "--out", &p("rebm")]);
    run(&[
        "eval-rebm",
        "--base",
        &format!("{}/model.ckpt", p("base")),
        "--rebm",
        &format!("{}/rebm.json", p("rebm")),
        "--corpus",
        &p("toy"),
        "--finetuned",
        &format!("{}/base_finetuned.ckpt", p("rebm")),
        "--n-boot",
        "100",
        "--out",
        &p("eval"),
    ]);
    let r = json(d.join("eval/improvement.json"));
    let exact = &r["exact"];
    assert!(exact["kl_rebm"].as_f64().unwrap() < exact["kl_base"].as_f64().unwrap(), "{r}");
    let ci = r["ll_improvement_ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() <= ci[2].as_f64().unwrap() && ci[2].as_f64().unwrap() <= ci[1].as_f64().unwrap());
    run(&["report", "--inputs", &format!("{}/improvement.json", p("eval")), "--out", &p("report")]);
    let csv = fs::read_to_string(d.join("report/improvement.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().contains(",tanh2,"));
}
