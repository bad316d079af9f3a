//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS or FAIL line.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use genbias::audit::audit_corpus;
use genbias::debias::{self, ConstraintConfig};
use genbias::evalharness::{
    self as eh, accuracy_matrix, diff_matrix, format2, grand_average, matrix_average, Metric,
    PredictionRecord, TrueLabel,
};
use genbias::formats::{self, estimate_qf, parse_jpeg_meta, scale_tables, DirectoryLabeler};
use genbias::probe::probe_corpus;
use genbias::synth::{plan, write_corpus, SynthSpec};
use genbias::transcode::{
    center_offsets, encode_qf, infer_preprocess, resize_bilinear, train_preprocess, Channels,
    Raster,
};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn below(n: u64, rng: &mut ChaCha8Rng) -> u64 {
    rng.next_u64() % n
}

fn random_raster(rng: &mut ChaCha8Rng) -> Raster {
    let w = 1 + below(70, rng) as u32;
    let h = 1 + below(70, rng) as u32;
    let s = (0..w * h * 3).map(|_| rng.next_u64() as u8).collect();
    Raster::new(w, h, Channels::Rgb, s).unwrap()
}

fn qf_round_trip() {
    let t = Instant::now();
    for q in 1..=100u8 {
        let e = estimate_qf(&scale_tables(q).unwrap());
        assert_eq!((e.qf, e.exact, e.distance), (q, true, 0), "q {q}");
    }
    assert!(t.elapsed() < Duration::from_secs(1), "{:?}", t.elapsed());
}

fn encoder_estimator_closure() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let img = random_raster(&mut rng);
        for q in [60u8, 70, 80, 90, 95, 96, 100] {
            let h = parse_jpeg_meta(&encode_qf(&img, q).unwrap()).unwrap();
            let e = estimate_qf(&h.tables);
            assert_eq!((e.qf, e.exact, e.distance), (q, true, 0));
        }
    }
    assert!(t.elapsed() < Duration::from_secs(30), "{:?}", t.elapsed());
}

fn one_cell(v: f64) -> eh::EvalMatrix {
    eh::EvalMatrix {
        metric: Metric::Acc,
        condition: "jpeg".into(),
        row_names: vec!["r".into()],
        col_names: vec!["c".into()],
        values: vec![vec![Some(v)]],
    }
}

fn compression_difference_arithmetic() {
    for (ours, classic, want) in [
        (67.17, 53.91, "13.26"),
        (59.37, 50.62, "8.75"),
        (55.07, 50.58, "4.49"),
    ] {
        let d = diff_matrix(&one_cell(ours), &one_cell(classic)).unwrap();
        assert_eq!(format2(matrix_average(&d).unwrap()), want);
    }
}

fn cross_generator_arithmetic() {
    let g = |v: &[f64]| format2(grand_average(v).unwrap());
    let classic = [72.16, 71.27, 71.61];
    let ours = [83.90, 83.39, 80.93];
    assert_eq!(g(&classic), "71.68");
    assert_eq!(g(&ours), "82.74");
    let diffs: Vec<f64> = ours.iter().zip(&classic).map(|(a, b)| a - b).collect();
    assert_eq!(diffs.iter().map(|d| format2(*d)).collect::<Vec<_>>(), ["11.74", "12.12", "9.32"]);
    assert_eq!(g(&diffs), "11.06");
    assert_eq!(g(&[74.14, 74.93, 73.20]), "74.09");
    assert_eq!(g(&[85.90, 86.80, 84.80]), "85.83");
}

fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn bias_gap() {
    let t = Instant::now();
    let dir = tempdir();
    let corpus = dir.path().join("corpus");
    write_corpus(&corpus, &plan(&SynthSpec::biased(4000, 5)).unwrap()).unwrap();
    let scanned = formats::scan_corpus(&corpus, &DirectoryLabeler::default()).unwrap();
    assert!(scanned.errors.is_empty());
    assert_eq!(scanned.metas.len(), 4000);
    let before = probe_corpus(&scanned.metas, 0.25, 5).unwrap();
    assert!(before.heldout.accuracy >= 0.99, "biased accuracy {}", before.heldout.accuracy);

    // Matched size filter: naturals must already be 512x512 at quality 96.
    let mut cfg = ConstraintConfig::new(5);
    cfg.size_low = 512;
    cfg.size_high = 512;
    let manifest = debias::build_size_split(&scanned.metas, &cfg).unwrap();
    let split = dir.path().join("split");
    let report = debias::materialize(&manifest, &split).unwrap();
    assert!(report.failures.is_empty());
    let rescanned = formats::scan_corpus(&split, &DirectoryLabeler::materialized()).unwrap();
    let after = probe_corpus(&rescanned.metas, 0.25, 5).unwrap();
    assert!(after.heldout.accuracy <= 0.55, "debiased accuracy {}", after.heldout.accuracy);
    assert!(t.elapsed() < Duration::from_secs(120), "{:?}", t.elapsed());
}

fn debias_invariants() {
    for seed in [11u64, 12] {
        let dir = tempdir();
        let corpus = dir.path().join("corpus");
        let mut spec = SynthSpec::biased(240, seed);
        spec.classes = 4;
        write_corpus(&corpus, &plan(&spec).unwrap()).unwrap();
        let metas = formats::scan_corpus(&corpus, &DirectoryLabeler::default()).unwrap().metas;
        let cfg = ConstraintConfig::new(seed);

        for size in [false, true] {
            let manifest = if size {
                debias::build_size_split(&metas, &cfg).unwrap()
            } else {
                debias::build_jpeg96_split(&metas, &cfg).unwrap()
            };
            let out = dir.path().join(if size { "size" } else { "jpeg96" });
            assert!(debias::materialize(&manifest, &out).unwrap().failures.is_empty());
            let got = formats::scan_corpus(&out, &DirectoryLabeler::materialized()).unwrap();
            assert!(got.errors.is_empty());
            assert_eq!(got.metas.len(), manifest.entries.len());

            let audit = audit_corpus(&got.metas).unwrap();
            assert_eq!(audit.qf_divergence, 0.0);
            let mut per_class: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
            for m in &got.metas {
                let bytes = std::fs::read(&m.path).unwrap();
                let e = estimate_qf(&parse_jpeg_meta(&bytes).unwrap().tables);
                assert_eq!((e.qf, e.exact, e.distance), (96, true, 0), "{}", m.path);
                let c = per_class.entry(&m.class_label).or_default();
                if m.origin.is_generated() {
                    c.1 += 1;
                } else {
                    c.0 += 1;
                    if size {
                        assert!((450..=550).contains(&m.width) && (450..=550).contains(&m.height));
                    }
                }
            }
            assert!(per_class.values().all(|(n, g)| n == g), "{per_class:?}");
        }
    }
}

fn naive(records: &[PredictionRecord], train: &str, eval: &str, metric: Metric) -> Option<f64> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0u32, 0u32, 0u32, 0u32);
    for r in records {
        if r.train_subset != train || r.eval_subset != eval {
            continue;
        }
        let predicted = r.score >= 0.5;
        let actual = r.true_label == TrueLabel::Generated;
        match (predicted, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let pct = |a: u32, b: u32| (b > 0).then(|| 100.0 * f64::from(a) / f64::from(b));
    match metric {
        Metric::Acc => pct(tp + tn, tp + fp + tn + fn_),
        Metric::Prec => pct(tp, tp + fp),
        Metric::Rec => pct(tp, tp + fn_),
        Metric::Diff => unreachable!(),
    }
}

fn matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let names = ["BigGAN", "ADM", "glide", "sdv4", "wukong", "Midjourney"];
    for _ in 0..20 {
        let rows = 1 + below(3, &mut rng) as usize;
        let cols = 1 + below(4, &mut rng) as usize;
        let mut records = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                for i in 0..(1 + below(25, &mut rng)) {
                    records.push(PredictionRecord {
                        path: format!("{r}/{c}/{i}"),
                        true_label: if rng.next_u64() % 2 == 0 {
                            TrueLabel::Natural
                        } else {
                            TrueLabel::Generated
                        },
                        score: (rng.next_u64() % 101) as f64 / 100.0,
                        train_subset: names[r].into(),
                        eval_subset: names[c].into(),
                        condition: "raw".into(),
                    });
                }
            }
        }
        assert!(records.len() <= 500);
        for metric in [Metric::Acc, Metric::Prec, Metric::Rec] {
            let m = accuracy_matrix(&records, metric, 0.5).unwrap();
            for (i, row) in m.row_names.iter().enumerate() {
                for (j, col) in m.col_names.iter().enumerate() {
                    assert_eq!(m.values[i][j], naive(&records, row, col, metric));
                }
            }
        }
    }
}

fn preprocessing_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..3 {
        let s = (0..512 * 512 * 3).map(|_| rng.next_u64() as u8).collect();
        let img = Raster::new(512, 512, Channels::Rgb, s).unwrap();
        assert_eq!(train_preprocess(&img).unwrap(), infer_preprocess(&img).unwrap());
    }
    assert_eq!(center_offsets(512, 512, 450), (31, 31));
    assert_eq!(center_offsets(550, 451, 450), (50, 0));
    let row = Raster::new(2, 1, Channels::Gray, vec![0, 255]).unwrap();
    assert_eq!(resize_bilinear(&row, 4, 1).unwrap().samples(), &[0, 64, 191, 255]);
}

/// Runs every stage in `cwd` with relative paths so that two runs in
/// different directories can be compared byte for byte.
fn pipeline(cwd: &Path, corpus: &Path, predictions: &Path) {
    let corpus = corpus.to_str().unwrap();
    let preds = predictions.to_str().unwrap();
    std::fs::write(
        cwd.join("run.ini"),
        "seed = 21\nout = out\njobs = 2\n\n[constraints]\nsize_low = 512\nsize_high = 512\nsplit = size\n\n[probe]\nholdout = 0.25\n",
    )
    .unwrap();
    let steps: Vec<Vec<&str>> = vec![
        vec!["scan", "--root", corpus],
        vec!["audit"],
        vec!["probe", "--name", "biased"],
        vec!["debias"],
        vec!["materialize"],
        vec!["scan", "--root", "out/split", "--labeling", "materialized", "--output", "split.jsonl"],
        vec!["probe", "--metas", "out/split.jsonl", "--name", "debiased"],
        vec!["eval", "--predictions", preds, "--metas", "out/metas.jsonl"],
        vec!["report"],
    ];
    for step in steps {
        let mut args = vec!["--config", "run.ini"];
        args.extend(step.iter().copied());
        let r = common::genbias(cwd, &args);
        assert_eq!(r.code, 0, "{step:?}: {}", r.stderr);
    }
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .filter(|e| !e.file_name().to_string_lossy().starts_with("run_"))
        .map(|e| {
            (
                e.path().strip_prefix(root).unwrap().to_path_buf(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn cli_determinism() {
    let dir = tempdir();
    let corpus = dir.path().join("corpus");
    write_corpus(&corpus, &plan(&SynthSpec::biased(300, 4)).unwrap()).unwrap();
    let metas = formats::scan_corpus(&corpus, &DirectoryLabeler::default()).unwrap().metas;
    // Predictions for the corpus's own naturals, so the size grid joins.
    let mut records = Vec::new();
    for (i, m) in metas.iter().enumerate() {
        for cond in ["raw", "jpeg80"] {
            records.push(PredictionRecord {
                path: m.path.clone(),
                true_label: if m.origin.is_generated() {
                    TrueLabel::Generated
                } else {
                    TrueLabel::Natural
                },
                score: ((i * 37) % 100) as f64 / 100.0,
                train_subset: "sdv4".into(),
                eval_subset: "sdv4".into(),
                condition: cond.into(),
            });
        }
    }
    let preds = dir.path().join("preds.csv");
    std::fs::write(&preds, common::to_csv(&records)).unwrap();

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        std::fs::create_dir_all(d).unwrap();
        pipeline(d, &corpus, &preds);
    }
    let (fa, fb) = (files(&a.join("out")), files(&b.join("out")));
    for name in ["manifest.jsonl", "biased_model.json", "debiased_model.json", "matrix_acc_raw.csv", "matrix_acc_raw.svg", "size_grid_sdv4.svg", "robustness.csv"] {
        assert!(fa.contains_key(Path::new(name)), "missing {name}");
    }
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(fb[k] == *v, "{} differs", k.display());
    }
}

fn precision_holds_recall_falls() {
    let records = common::compression_fixture(&[("raw", 0), ("jpeg95", 4), ("jpeg80", 9), ("jpeg60", 15)]);
    let mut recalls = Vec::new();
    for (cond, group) in eh::by_condition(&records) {
        let prec = accuracy_matrix(&group, Metric::Prec, 0.5).unwrap();
        for v in prec.values.iter().flatten() {
            if let Some(p) = v {
                assert_eq!(*p, 100.0, "{cond}");
            }
        }
        let rec = accuracy_matrix(&group, Metric::Rec, 0.5).unwrap();
        recalls.push((cond, matrix_average(&rec).unwrap()));
    }
    let order: Vec<&str> = recalls.iter().map(|(c, _)| c.as_str()).collect();
    assert_eq!(order, ["raw", "jpeg95", "jpeg80", "jpeg60"]);
    assert!(recalls.windows(2).all(|w| w[1].1 < w[0].1), "{recalls:?}");
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("1 quality factor round trip", qf_round_trip),
        ("2 encoder and estimator closure", encoder_estimator_closure),
        ("3 compression table differences", compression_difference_arithmetic),
        ("4 cross-generator averages", cross_generator_arithmetic),
        ("5 bias exploitability gap", bias_gap),
        ("6 debiased split invariants", debias_invariants),
        ("7 matrix oracle equivalence", matrix_oracle),
        ("8 preprocessing equivalence", preprocessing_equivalence),
        ("9 pipeline determinism", cli_determinism),
        ("10 precision holds while recall falls", precision_holds_recall_falls),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(check)).is_ok();
        println!(
            "criterion {name}: {} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!ok);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
