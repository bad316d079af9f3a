mod common;

use std::fs;
use std::path::Path;

use common::{genbias, row_average_fixture};
use genbias::synth::{plan, write_corpus, SynthSpec};

fn small_corpus(root: &Path) {
    let mut spec = SynthSpec::biased(12, 1);
    spec.classes = 2;
    spec.natural_sides = (16, 40);
    spec.native_side = 32;
    write_corpus(root, &plan(&spec).unwrap()).unwrap();
}

#[test]
fn scan_writes_one_record_per_image() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(&dir.path().join("corpus"));
    let run = genbias(dir.path(), &["--seed", "1", "--out", "o", "scan", "--root", "corpus"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let metas = fs::read_to_string(dir.path().join("o/metas.jsonl")).unwrap();
    assert_eq!(metas.lines().count(), 12);
    assert!(dir.path().join("o/run_scan.json").exists());
}

#[test]
fn missing_root_is_a_hard_failure() {
    let dir = tempfile::tempdir().unwrap();
    let run = genbias(dir.path(), &["--seed", "1", "scan", "--root", "nope"]);
    assert_eq!(run.code, 1);
    assert!(!run.stderr.is_empty());
}

#[test]
fn corrupt_file_is_reported_and_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    small_corpus(&corpus);
    fs::write(corpus.join("sdv4/train/nature/c00_broken.JPEG"), b"\xFF\xD8\xFF\xDBjunk").unwrap();
    let run = genbias(dir.path(), &["--seed", "1", "--out", "o", "scan", "--root", "corpus"]);
    assert_eq!(run.code, 2, "{}", run.stderr);
    assert!(run.stderr.contains("c00_broken.JPEG"));
    let metas = fs::read_to_string(dir.path().join("o/metas.jsonl")).unwrap();
    assert_eq!(metas.lines().count(), 12);
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(&dir.path().join("corpus"));
    let run = genbias(dir.path(), &["scan", "--root", "corpus"]);
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("seed"), "{}", run.stderr);
}

#[test]
fn eval_against_baseline_writes_averages() {
    let dir = tempfile::tempdir().unwrap();
    let ours = [("SD1.5", 83.0), ("SD1.4", 82.22), ("Wukong", 83.0)];
    let classic = [("SD1.5", 72.0), ("SD1.4", 71.04), ("Wukong", 72.0)];
    fs::write(dir.path().join("ours.csv"), row_average_fixture(&ours, 5000)).unwrap();
    fs::write(dir.path().join("classic.csv"), row_average_fixture(&classic, 5000)).unwrap();
    let run = genbias(
        dir.path(),
        &[
            "--seed", "0", "--out", "o", "eval",
            "--predictions", "ours.csv", "--baseline", "classic.csv",
        ],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let averages = fs::read_to_string(dir.path().join("o/averages.csv")).unwrap();
    let total = averages
        .lines()
        .find(|l| l.starts_with("raw,TOTAL,"))
        .unwrap_or_else(|| panic!("no total row in {averages}"));
    assert_eq!(total, "raw,TOTAL,82.74,71.68,11.06");
    for name in ["matrix_acc_raw.csv", "matrix_diff_raw.svg", "robustness.csv", "eval.json"] {
        assert!(dir.path().join("o").join(name).exists(), "{name}");
    }

    let again = genbias(dir.path(), &["--seed", "0", "--out", "o2", "report", "--eval", "o/eval.json"]);
    assert_eq!(again.code, 0, "{}", again.stderr);
    assert_eq!(
        fs::read(dir.path().join("o2/averages.csv")).unwrap(),
        averages.as_bytes()
    );
}

#[test]
fn help_lists_every_stage() {
    let run = genbias(Path::new("."), &["--help"]);
    assert_eq!(run.code, 0);
    for cmd in ["scan", "audit", "debias", "materialize", "probe", "eval", "report"] {
        assert!(run.stdout.contains(cmd), "{cmd}");
    }
}
