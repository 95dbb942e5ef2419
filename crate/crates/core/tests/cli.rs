use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_tass");

fn tass(dir: &Path, threads: &str, args: &[&str]) -> std::process::Output {
    let out = Command::new(BIN)
        .env("TASS_THREADS", threads)
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

/// Runs every subcommand into `root`, feeding each its predecessors' files.
fn pipeline(root: &Path, threads: &str) {
    let series = root.join("sim/series.csv");
    let params = root.join("fit/summary.json");
    let s = series.to_str().unwrap();
    let p = params.to_str().unwrap();
    tass(&root.join("sim"), threads, &["--seed", "7", "simulate", "--n", "400"]);
    tass(&root.join("fit"), threads, &["fit", "--input", s, "--m", "2", "--restarts", "2", "--max-iter", "300"]);
    tass(&root.join("select"), threads, &["select", "--input", s, "--m-max", "2", "--restarts", "1", "--max-iter", "300"]);
    tass(&root.join("decode"), threads, &["decode", "--input", s, "--params", p, "--particles", "100"]);
    tass(&root.join("predict"), threads, &["predict", "--input", s, "--params", p, "--particles", "100", "--k", "3"]);
    tass(&root.join("diagnose"), threads, &["diagnose", "--input", s, "--params", p, "--particles", "100"]);
    tass(&root.join("reproduce"), threads, &["reproduce", "table3", "--reps", "2", "--n", "300", "--particles", "50", "--truth"]);
}

#[test]
fn seeded_runs_are_byte_identical_across_runs_and_thread_counts() {
    let root = tempfile::tempdir().unwrap();
    let work = root.path().join("work");
    pipeline(&work, "1");
    let first: Vec<_> = ["sim", "fit", "select", "decode", "predict", "diagnose", "reproduce"]
        .iter()
        .map(|c| contents(&work.join(c)))
        .collect();
    // same paths, so the recorded configuration matches too
    std::fs::remove_dir_all(&work).unwrap();
    pipeline(&work, "4");
    for (i, c) in ["sim", "fit", "select", "decode", "predict", "diagnose", "reproduce"].iter().enumerate() {
        let again = contents(&work.join(c));
        assert_eq!(first[i].keys().collect::<Vec<_>>(), again.keys().collect::<Vec<_>>(), "{c}");
        for (name, bytes) in &first[i] {
            assert!(bytes == &again[name], "{c}/{name} differs");
        }
    }
}

#[test]
fn summaries_follow_the_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../schemas/summary.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let root = tempfile::tempdir().unwrap();
    pipeline(root.path(), "2");
    for c in ["sim", "fit", "select", "decode", "predict", "diagnose", "reproduce"] {
        let text = std::fs::read_to_string(root.path().join(c).join("summary.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{c}: {errors:?}");
        for a in v["artifacts"].as_array().unwrap() {
            assert!(root.path().join(c).join(a.as_str().unwrap()).exists(), "{c}: {a}");
        }
    }
}

#[test]
fn json_flag_echoes_the_summary() {
    let root = tempfile::tempdir().unwrap();
    let out = tass(root.path(), "1", &["--json", "simulate", "--n", "50"]);
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(printed, written);
}

#[test]
fn bad_input_fails_with_a_structured_error() {
    let root = tempfile::tempdir().unwrap();
    let csv = root.path().join("bad.csv");
    std::fs::write(&csv, "t,x\n1,0.5\n1,0.7\n2,0.1\n").unwrap();
    let out = Command::new(BIN)
        .arg("--output-dir")
        .arg(root.path().join("o"))
        .args(["fit", "--input", csv.to_str().unwrap(), "--m", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("duplicate"), "{err}");

    let out = Command::new(BIN).args(["fit", "--m", "1"]).output().unwrap();
    assert!(!out.status.success());
}
