use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value as J;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spatialplay"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> J {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().unwrap_or("")).unwrap_or_else(|e| panic!("{e}: {text:?}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn exec_fixture(name: &str, program: &str, image: &str, arg: &str) -> Output {
    let dir = fixture(name);
    run(&[
        "exec",
        s(&dir.join(program)),
        image,
        arg,
        "--manifest",
        s(&dir.join("manifest.jsonl")),
        "--oracle",
        s(&dir.join("oracle.jsonl")),
    ])
}

#[test]
fn exec_prints_the_output_value() {
    let out = exec_fixture("fig3", "seed.sexp", "fig3-scene", "building");
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(stdout_json(&out), serde_json::json!({"t": "bool", "v": true}));

    let out = exec_fixture("fig4", "ship_quadrant.sexp", "fig4-harbor", "ship");
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(stdout_json(&out), serde_json::json!({"t": "str", "v": "TR"}));
}

#[test]
fn exec_exit_codes() {
    let out = exec_fixture("fig3", "seed.sexp", "nowhere", "building");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UnknownImage"));

    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.sexp");
    fs::write(&bad, "(exists (segment image arg)").unwrap();
    let dir = fixture("fig3");
    let args = |prog: &Path| {
        vec![
            "exec".to_string(),
            s(prog).to_string(),
            "fig3-scene".into(),
            "building".into(),
            "--manifest".into(),
            s(&dir.join("manifest.jsonl")).to_string(),
            "--oracle".into(),
            s(&dir.join("oracle.jsonl")).to_string(),
        ]
    };
    let out = bin().args(args(&bad)).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ParseError"));

    let empty = tmp.path().join("empty.sexp");
    fs::write(&empty, "(centroid (union (segment image \"ship\")))").unwrap();
    let out = bin().args(args(&empty)).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("EmptyMask"));

    let out = bin().args(args(&tmp.path().join("missing.sexp"))).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_scores_a_deduction_answer() {
    let tmp = tempfile::tempdir().unwrap();
    let problem = tmp.path().join("problem.json");
    let record = serde_json::json!({
        "id": "ded-1", "mode": "deduction", "image_id": "fig3-scene",
        "q": "How many buildings are there?",
        "p": "(count (segment image arg))",
        "a": {"t": "str", "v": "building"},
        "o": {"t": "int", "v": 10},
        "created_step": 0
    });
    fs::write(&problem, record.to_string()).unwrap();
    let out = run(&["verify", s(&problem), "7"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let j = stdout_json(&out);
    assert_eq!(j["mode"], "deduction");
    assert!((j["reward"].as_f64().unwrap() - 0.7).abs() < 1e-12);
}

fn synth(dir: &Path) -> (PathBuf, PathBuf) {
    let out = run(&["synth", "--out", s(dir)]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    (dir.join("manifest.jsonl"), dir.join("oracle.jsonl"))
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        "manifest = \"data/manifest.jsonl\"\noracle = \"data/oracle.jsonl\"\n\n[selfplay]\nb = 8\nr = 4\nn_seed = 20\n",
    )
    .unwrap();
    path
}

fn run_steps(config: &Path, out: &Path, steps: u64) -> Output {
    run(&["run", "--config", s(config), "--out", s(out), "--steps", &steps.to_string()])
}

#[test]
fn run_resume_and_export() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, oracle) = synth(&tmp.path().join("data"));
    let config = write_config(tmp.path());

    let whole = tmp.path().join("whole");
    let out = run_steps(&config, &whole, 2);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let reports: Vec<J> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(reports.len(), 2);
    for r in &reports {
        assert_eq!(r["solver_records"], 3 * 8 * 4);
    }

    let split = tmp.path().join("split");
    assert_eq!(run_steps(&config, &split, 1).status.code(), Some(0));
    assert_eq!(run_steps(&config, &split, 2).status.code(), Some(0));
    for file in [
        "episodes.jsonl",
        "reports.jsonl",
        "banks/abduction.jsonl",
        "banks/deduction.jsonl",
        "banks/induction.jsonl",
    ] {
        assert_eq!(
            fs::read(whole.join(file)).unwrap(),
            fs::read(split.join(file)).unwrap(),
            "{file}"
        );
    }

    let banks = whole.join("banks");
    let total: usize = ["abduction", "deduction", "induction"]
        .iter()
        .map(|m| fs::read_to_string(banks.join(format!("{m}.jsonl"))).unwrap().lines().count())
        .sum();
    let export = |oracle: &Path, target: &Path| {
        run(&[
            "export",
            "--out",
            s(target),
            "--bank-dir",
            s(&banks),
            "--manifest",
            s(&manifest),
            "--oracle",
            s(oracle),
        ])
    };
    let bench = tmp.path().join("bench.jsonl");
    let out = export(&oracle, &bench);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let j = stdout_json(&out);
    assert_eq!(j["exported"], total);
    assert_eq!(j["dropped"], 0);
    assert_eq!(fs::read_to_string(&bench).unwrap().lines().count(), total);

    // strip every annotation of one image: its positive presence checks must go
    let pruned = tmp.path().join("pruned.jsonl");
    let kept: String = fs::read_to_string(&oracle)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"syn-000\""))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&pruned, kept).unwrap();
    let out = export(&pruned, &tmp.path().join("bench2.jsonl"));
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let j = stdout_json(&out);
    let dropped = j["dropped"].as_u64().unwrap() as usize;
    assert!(dropped > 0);
    assert_eq!(j["exported"].as_u64().unwrap() as usize + dropped, total);

    let analysis = tmp.path().join("analysis");
    let out = run(&["analyze", "--benchmark", s(&bench), "--out", s(&analysis)]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(stdout_json(&out)["corpus_size"], total);
    let usage: J = serde_json::from_str(&fs::read_to_string(analysis.join("usage.json")).unwrap()).unwrap();
    assert!(usage["segmenter_count"].as_u64().unwrap() > 0);
}

#[test]
fn analyze_handles_an_empty_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let bench = tmp.path().join("empty.jsonl");
    fs::write(&bench, "").unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&["analyze", "--benchmark", s(&bench), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(stdout_json(&out)["corpus_size"], 0);
    for f in ["usage.json", "primitives.csv", "dimensions.csv", "cooccurrence.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn analyze_classifies_a_question() {
    let out = run(&["analyze", "--question", "How many cargo ships are visible in the image?"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert_eq!(stdout_json(&out)["dimensions"], serde_json::json!(["Quantity", "Category"]));
}

#[test]
fn bad_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(&config, "[selfplay]\nbatch = 4\n").unwrap();
    let out = run(&["run", "--config", s(&config), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}
