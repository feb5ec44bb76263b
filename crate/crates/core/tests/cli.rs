use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use multiess::{ess_report, simulate_var1, write_chain, BatchPolicy, ChainFormat, EssReport, Var1Model};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multiess"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_var1(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let chain = simulate_var1(&Var1Model::benchmark(), n, seed).unwrap();
    let path = dir.join(name);
    let format = ChainFormat::from_path(&path);
    write_chain(&chain, std::fs::File::create(&path).unwrap(), format).unwrap();
    path
}

#[test]
fn threshold_line() {
    let o = run(&["ess", "--eps", ".05", "--alpha", ".05", "-p", "5"]);
    assert!(o.status.success());
    assert!(stdout(&o).trim_end().ends_with("8605"), "{}", stdout(&o));
}

#[test]
fn ess_json_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_var1(dir.path(), "chain.csv", 20_000, 3);
    let o = run(&["ess", path.to_str().unwrap(), "--json", "--alpha", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let parsed: EssReport = serde_json::from_str(&stdout(&o)).unwrap();

    let file = std::io::BufReader::new(std::fs::File::open(&path).unwrap());
    let chain = multiess::load_chain(file, ChainFormat::Csv).unwrap();
    let lib = ess_report(&chain, BatchPolicy::default(), 0.1, 0.05).unwrap();
    assert_eq!(parsed, lib);
    assert_eq!(parsed.ess_multivariate.to_bits(), lib.ess_multivariate.to_bits());
}

#[test]
fn tsv_and_fixed_batches() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_var1(dir.path(), "chain.tsv", 5_000, 4);
    let o = run(&["ess", path.to_str().unwrap(), "--batch", "fixed=50"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("batch size = 50, batches = 100"));
}

#[test]
fn insufficient_batches_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_var1(dir.path(), "tiny.csv", 3, 1);
    let o = run(&["ess", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(multiess::cli::NOT_PD_MESSAGE));
}

#[test]
fn user_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n1,x\n").unwrap();
    let o = run(&["ess", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 1"));

    assert_eq!(run(&["ess", "/no/such/file.csv"]).status.code(), Some(1));
    assert_eq!(run(&["ess", "-p", "5", "--eps", "0"]).status.code(), Some(1));
    assert_eq!(run(&["ess", "-p", "5", "--batch", "nu=1.5"]).status.code(), Some(1));
    assert_eq!(run(&["stop", "--model", "iid"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn confregion_reports_and_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_var1(dir.path(), "chain.csv", 20_000, 5);
    let dirs = dir.path().join("dirs.csv");
    std::fs::write(&dirs, "1,0,0,0,0\n1,-1,0,0,0\n").unwrap();
    let o = run(&[
        "confregion",
        path.to_str().unwrap(),
        "--directions",
        dirs.to_str().unwrap(),
        "--ellipse",
        "0",
        "1",
        "--resolution",
        "37",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("volume^(1/p)"));
    assert_eq!(text.lines().filter(|l| l.starts_with("scheffe")).count(), 2);
    let after: Vec<&str> = text.lines().skip_while(|l| *l != "x,y").skip(1).collect();
    assert_eq!(after.len(), 37);

    let json = run(&["confregion", path.to_str().unwrap(), "--json", "--ellipse", "2", "3", "--resolution", "10"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["ellipse"].as_array().unwrap().len(), 10);
    assert!(v["volume_root"].as_f64().unwrap() > 0.0);
}

#[test]
fn stop_with_builtin_models() {
    let o = run(&["stop", "--model", "iid", "-p", "3", "--seed", "4", "--eps", "1000", "--nstar", "1500", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n_final"], 1500);
    assert_eq!(v["reason"], "criterion_met");

    let o = run(&["stop", "--model", "iid", "-p", "5", "--seed", "4", "--nstar", "auto", "--alpha", "0.05", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["n_final"].as_u64().unwrap() >= 8605);
    assert_eq!(v["n_star"], 8605);

    // exhaustion still prints the partial report
    let o = run(&["stop", "--model", "var1", "--seed", "1", "--eps", "0.001", "--n-max", "3000"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("n_max reached"));
}

#[test]
fn stop_resume_with_external_chain() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let full = simulate_var1(&Var1Model::benchmark(), 200_000, 9).unwrap();
    let path = dir.path().join("chain.csv");
    let mut have = 400;
    let mut terminated_at = None;
    for _ in 0..100 {
        write_chain(&full.prefix(have).unwrap(), std::fs::File::create(&path).unwrap(), ChainFormat::Csv).unwrap();
        let o = run(&[
            "stop",
            "--chain",
            path.to_str().unwrap(),
            "--resume",
            state.to_str().unwrap(),
            "--eps",
            "0.1",
            "--json",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        match v["status"].as_str().unwrap() {
            "need_more" | "continue" => have = v["next_checkpoint"].as_u64().unwrap() as usize,
            "terminated" => {
                terminated_at = Some(v["checkpoint"]["n"].as_u64().unwrap() as usize);
                break;
            }
            s => panic!("unexpected status {s}"),
        }
    }
    let n = terminated_at.expect("rule met");
    let config = multiess::StoppingConfig::new(0.1, 0.1, 1000);
    let direct = multiess::run_sequential(&mut std::sync::Arc::new(Var1Model::benchmark()).sampler(9), &config)
        .unwrap()
        .result;
    assert_eq!(n, direct.n_final);
}

#[test]
fn replicate_writes_reports_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(
        &cfg,
        r#"
name = "tiny"
replications = 3
seed_base = 1
methods = ["mbm", "ubm_bonferroni"]

[model]
kind = "iid_gaussian"
p = 2

[design]
kind = "fixed"
sizes = [500]
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = bin()
        .args(["replicate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env(multiess::cli::THREADS_ENV, "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Coverage probability"));
    let csv = std::fs::read_to_string(out.join("tiny.rows.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("tiny.summary.json")).unwrap()).unwrap();
    assert_eq!(json["aggregates"].as_array().unwrap().len(), 2);

    std::fs::write(&cfg, "name = \"x\"\nreplications = 1\nwidgets = 3\n[model]\nkind = \"var1\"\nfoo = 1\n[design]\nkind = \"fixed\"\nsizes = [10]\n").unwrap();
    let o = run(&["replicate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("widgets") && err.contains("model.foo"), "{err}");
}

#[test]
fn shipped_study_files_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/studies");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            multiess::StudySpec::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 3);
}
