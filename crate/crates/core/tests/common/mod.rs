#![allow(dead_code)]

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use genbias::evalharness::{PredictionRecord, TrueLabel};

pub const HEADER: &str = "path,true_label,score,train_subset,eval_subset,condition\n";

/// Prediction CSV whose accuracy matrix has the given row averages exactly.
/// Each row gets two evaluation columns with `n` natural records per cell;
/// cells hold even hundredths so that `n = 5000` hits them exactly.
pub fn row_average_fixture(rows: &[(&str, f64)], n: u64) -> String {
    let mut out = String::from(HEADER);
    for &(row, avg) in rows {
        let hundredths = (avg * 100.0).round() as u64;
        let c1 = hundredths / 2 * 2;
        let c2 = 2 * hundredths - c1;
        for (col, cell) in [("ADM", c1), ("Midjourney", c2)] {
            // cell / 100 percent of n records are correct.
            let correct = cell * n / 10_000;
            for i in 0..n {
                let score = if i < correct { 0.1 } else { 0.9 };
                let _ = writeln!(out, "{row}/{col}/{i},NATURAL,{score},{row},{col},raw");
            }
        }
    }
    out
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_genbias"))
}

pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn genbias(cwd: &Path, args: &[&str]) -> CliRun {
    let out = Command::new(bin())
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs");
    CliRun {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Predictions where compression pushes generated scores under 0.5 while
/// naturals stay below it. `broken[k]` generated records out of 20 fall
/// under the threshold in condition `k`.
pub fn compression_fixture(conditions: &[(&str, u32)]) -> Vec<PredictionRecord> {
    let gens = ["ADM", "sdv4", "Midjourney"];
    let mut v = Vec::new();
    for &(cond, broken) in conditions {
        for train in gens {
            for eval in gens {
                for i in 0..20 {
                    v.push(PredictionRecord {
                        path: format!("{eval}/nat/{i}"),
                        true_label: TrueLabel::Natural,
                        score: 0.05 + 0.01 * f64::from(i % 10),
                        train_subset: train.into(),
                        eval_subset: eval.into(),
                        condition: cond.into(),
                    });
                    v.push(PredictionRecord {
                        path: format!("{eval}/gen/{i}"),
                        true_label: TrueLabel::Generated,
                        score: if i < broken { 0.3 } else { 0.8 },
                        train_subset: train.into(),
                        eval_subset: eval.into(),
                        condition: cond.into(),
                    });
                }
            }
        }
    }
    v
}

pub fn to_csv(records: &[PredictionRecord]) -> String {
    let mut out = String::from(HEADER);
    for r in records {
        let label = match r.true_label {
            TrueLabel::Natural => "NATURAL",
            TrueLabel::Generated => "GENERATED",
        };
        let _ = writeln!(
            out,
            "{},{label},{},{},{},{}",
            r.path, r.score, r.train_subset, r.eval_subset, r.condition
        );
    }
    out
}
