// Score two detectors' predictions as train-by-eval matrices, take their
// difference and print row averages.

use genbias::evalharness::{
    accuracy_matrix, diff_matrix, emit_report, format2, row_average, Metric, PredictionRecord,
    ReportFormat, ReportItem, TrueLabel, DEFAULT_THRESHOLD,
};

fn records(base_errors: u64, per_step: u64) -> Vec<PredictionRecord> {
    let gens = ["ADM", "SD1.4", "Midjourney"];
    let mut out = Vec::new();
    for (t, train) in gens.iter().enumerate() {
        for (j, eval) in gens.iter().enumerate() {
            let errors = base_errors + per_step * t.abs_diff(j) as u64;
            for i in 0..20u64 {
                let generated = i % 2 == 0;
                // Mistakes grow with the distance between train and eval generator.
                let wrong = (i * 7 + j as u64 * 3) % 20 < errors;
                let score = if generated != wrong { 0.9 } else { 0.1 };
                out.push(PredictionRecord {
                    path: format!("{eval}/{i}.png"),
                    true_label: if generated { TrueLabel::Generated } else { TrueLabel::Natural },
                    score,
                    train_subset: (*train).into(),
                    eval_subset: (*eval).into(),
                    condition: "raw".into(),
                });
            }
        }
    }
    out
}

pub fn run_example() -> genbias::Result<Vec<(String, Option<f64>)>> {
    let ours = accuracy_matrix(&records(2, 1), Metric::Acc, DEFAULT_THRESHOLD)?;
    let base = accuracy_matrix(&records(3, 4), Metric::Acc, DEFAULT_THRESHOLD)?;
    let diff = diff_matrix(&ours, &base)?;

    print!("{}", String::from_utf8_lossy(&emit_report(ReportItem::Matrix(&diff), ReportFormat::Csv)));
    let rows = row_average(&diff);
    for (name, avg) in &rows {
        println!("{name:<12} {}", avg.map(format2).unwrap_or_else(|| "n/a".into()));
    }
    Ok(rows)
}

fn main() -> genbias::Result<()> {
    run_example().map(|_| ())
}
