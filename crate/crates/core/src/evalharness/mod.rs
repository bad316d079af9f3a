//! Scores external detector predictions: cross-generator matrices,
//! averages and differences, robustness curves over compression conditions,
//! and per-size-interval accuracy on natural images.

mod render;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audit::SizeGrid;
use crate::error::{Error, Result};
use crate::formats::ImageMeta;

pub use self::render::{emit_report, ReportFormat, ReportItem};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub const PREDICTION_HEADER: [&str; 6] = [
    "path",
    "true_label",
    "score",
    "train_subset",
    "eval_subset",
    "condition",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrueLabel {
    Natural,
    Generated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub path: String,
    pub true_label: TrueLabel,
    /// Probability that the image is generated.
    pub score: f64,
    pub train_subset: String,
    pub eval_subset: String,
    pub condition: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadedPredictions {
    pub records: Vec<PredictionRecord>,
    pub errors: Vec<RowError>,
}

fn parse_row(row: &csv::StringRecord) -> std::result::Result<PredictionRecord, String> {
    if row.len() != PREDICTION_HEADER.len() {
        return Err(format!("expected 6 fields, found {}", row.len()));
    }
    let true_label = match row[1].trim() {
        "NATURAL" => TrueLabel::Natural,
        "GENERATED" => TrueLabel::Generated,
        other => return Err(format!("unknown label {other:?}")),
    };
    let score: f64 = row[2]
        .trim()
        .parse()
        .map_err(|_| format!("score {:?} is not a number", &row[2]))?;
    if !(0.0..=1.0).contains(&score) {
        return Err(format!("score {score} outside [0, 1]"));
    }
    Ok(PredictionRecord {
        path: row[0].to_owned(),
        true_label,
        score,
        train_subset: row[3].to_owned(),
        eval_subset: row[4].to_owned(),
        condition: row[5].to_owned(),
    })
}

/// Reads the prediction CSV. A wrong header is fatal; bad rows are
/// collected with their line numbers and skipped.
pub fn load_predictions<R: Read>(input: R) -> Result<LoadedPredictions> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).ne(PREDICTION_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", PREDICTION_HEADER.join(",")),
        });
    }
    let mut out = LoadedPredictions::default();
    for row in reader.records() {
        match row {
            Ok(row) => {
                let line = row.position().map_or(0, |p| p.line());
                match parse_row(&row) {
                    Ok(r) => out.records.push(r),
                    Err(message) => out.errors.push(RowError { line, message }),
                }
            }
            Err(e) => out.errors.push(RowError {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

pub fn load_predictions_file(path: &Path) -> Result<LoadedPredictions> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_predictions(std::io::BufReader::new(f))
}

/// Counts with generated as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn n(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.n();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }

    /// Absent when nothing was predicted generated.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// Absent when no generated example is present.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    fn add(&mut self, r: &PredictionRecord, threshold: f64) {
        match (r.score >= threshold, r.true_label) {
            (true, TrueLabel::Generated) => self.tp += 1,
            (true, TrueLabel::Natural) => self.fp += 1,
            (false, TrueLabel::Natural) => self.tn += 1,
            (false, TrueLabel::Generated) => self.fn_ += 1,
        }
    }
}

/// A score at or above `threshold` counts as predicted generated.
pub fn confusion<'a, I>(records: I, threshold: f64) -> Result<Confusion>
where
    I: IntoIterator<Item = &'a PredictionRecord>,
{
    let mut c = Confusion::default();
    for r in records {
        c.add(r, threshold);
    }
    if c.n() == 0 {
        return Err(Error::EmptyEval);
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Metric {
    Acc,
    Prec,
    Rec,
    Diff,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Acc => "acc",
            Metric::Prec => "prec",
            Metric::Rec => "rec",
            Metric::Diff => "diff",
        }
    }

    /// Percentage for one cell; `None` when undefined.
    fn of(self, c: &Confusion) -> Option<f64> {
        let pct = |a: u64, b: u64| (b > 0).then(|| 100.0 * a as f64 / b as f64);
        match self {
            Metric::Acc => pct(c.tp + c.tn, c.n()),
            Metric::Prec => pct(c.tp, c.tp + c.fp),
            Metric::Rec => pct(c.tp, c.tp + c.fn_),
            Metric::Diff => None,
        }
    }
}

/// Native output side of the GenImage generators, keyed by a normalized
/// name (lowercase, alphanumerics only).
pub fn generator_size(name: &str) -> Option<u32> {
    let key: String = name
        .chars()
        .filter(char::is_ascii_alphanumeric)
        .collect::<String>()
        .to_ascii_lowercase();
    Some(match key.as_str() {
        "biggan" => 128,
        "adm" | "glide" | "vqdm" => 256,
        "sd4" | "sd5" | "sd14" | "sd15" | "sdv4" | "sdv5" | "sdv14" | "sdv15"
        | "stablediffusionv14" | "stablediffusionv15" | "wukong" => 512,
        "mj" | "midjourney" => 1024,
        _ => return None,
    })
}

/// Sorts generator names by native output size, then by name. Unknown
/// generators go last.
pub fn sort_generators(names: &mut [String]) {
    names.sort_by(|a, b| {
        let key = |n: &str| generator_size(n).unwrap_or(u32::MAX);
        key(a).cmp(&key(b)).then_with(|| a.cmp(b))
    });
}

/// Rows are training subsets, columns evaluation subsets. Cells are
/// percentages; `None` marks an undefined metric (e.g. precision without
/// positive predictions).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMatrix {
    pub metric: Metric,
    pub condition: String,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl EvalMatrix {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.row_names.iter().position(|r| r == row)?;
        let j = self.col_names.iter().position(|c| c == col)?;
        self.values[i][j]
    }
}

/// Splits records by condition, in [`condition_order`].
pub fn by_condition(records: &[PredictionRecord]) -> Vec<(String, Vec<PredictionRecord>)> {
    let mut groups: BTreeMap<&str, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.condition).or_default().push(r.clone());
    }
    let mut names: Vec<String> = groups.keys().map(|s| s.to_string()).collect();
    condition_order(&mut names);
    names
        .into_iter()
        .map(|n| {
            let g = groups.remove(n.as_str()).unwrap_or_default();
            (n, g)
        })
        .collect()
}

/// Uncompressed conditions (`raw`, `png`) first, then `jpegNN` by
/// decreasing quality, then anything else by name.
pub fn condition_order(names: &mut [String]) {
    fn key(c: &str) -> (u8, i32) {
        let lower = c.to_ascii_lowercase();
        match lower.as_str() {
            "raw" => (0, 0),
            "png" => (0, 1),
            _ => match lower.strip_prefix("jpeg").and_then(|q| q.parse::<i32>().ok()) {
                Some(q) => (1, -q),
                None => (2, 0),
            },
        }
    }
    names.sort_by(|a, b| key(a).cmp(&key(b)).then_with(|| a.cmp(b)));
}

/// One matrix over records of a single condition. Every (train, eval) pair
/// seen on either axis must have at least one record.
pub fn accuracy_matrix(
    records: &[PredictionRecord],
    metric: Metric,
    threshold: f64,
) -> Result<EvalMatrix> {
    if metric == Metric::Diff {
        return Err(Error::Domain("DIFF matrices come from diff_matrix".into()));
    }
    let first = records.first().ok_or(Error::EmptyEval)?;
    if let Some(r) = records.iter().find(|r| r.condition != first.condition) {
        return Err(Error::Domain(format!(
            "records mix conditions {:?} and {:?}",
            first.condition, r.condition
        )));
    }
    let mut cells: HashMap<(&str, &str), Confusion> = HashMap::new();
    let (mut rows, mut cols) = (BTreeSet::new(), BTreeSet::new());
    for r in records {
        rows.insert(r.train_subset.clone());
        cols.insert(r.eval_subset.clone());
        cells
            .entry((&r.train_subset, &r.eval_subset))
            .or_default()
            .add(r, threshold);
    }
    let mut row_names: Vec<String> = rows.into_iter().collect();
    let mut col_names: Vec<String> = cols.into_iter().collect();
    sort_generators(&mut row_names);
    sort_generators(&mut col_names);

    let mut missing = Vec::new();
    let values = row_names
        .iter()
        .map(|row| {
            col_names
                .iter()
                .map(|col| match cells.get(&(row.as_str(), col.as_str())) {
                    Some(c) => metric.of(c),
                    None => {
                        missing.push((row.clone(), col.clone()));
                        None
                    }
                })
                .collect()
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingCell(missing));
    }
    Ok(EvalMatrix {
        metric,
        condition: first.condition.clone(),
        row_names,
        col_names,
        values,
    })
}

/// Cellwise `a - b`; absent where either side is absent.
pub fn diff_matrix(a: &EvalMatrix, b: &EvalMatrix) -> Result<EvalMatrix> {
    if a.row_names != b.row_names || a.col_names != b.col_names {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} ({:?} x {:?}) vs {}x{} ({:?} x {:?})",
            a.row_names.len(),
            a.col_names.len(),
            a.row_names,
            a.col_names,
            b.row_names.len(),
            b.col_names.len(),
            b.row_names,
            b.col_names
        )));
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(x, y)| Some((*x)? - (*y)?))
                .collect()
        })
        .collect();
    Ok(EvalMatrix {
        metric: Metric::Diff,
        condition: if a.condition == b.condition {
            a.condition.clone()
        } else {
            format!("{}-vs-{}", a.condition, b.condition)
        },
        row_names: a.row_names.clone(),
        col_names: a.col_names.clone(),
        values,
    })
}

/// Mean over the defined cells of each row.
pub fn row_average(m: &EvalMatrix) -> Vec<(String, Option<f64>)> {
    m.row_names
        .iter()
        .zip(&m.values)
        .map(|(name, row)| {
            let defined: Vec<f64> = row.iter().flatten().copied().collect();
            let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
            (name.clone(), mean)
        })
        .collect()
}

/// Unweighted mean of row averages. Not rounded; see [`round2`].
pub fn grand_average(rows: &[f64]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyEval);
    }
    Ok(rows.iter().sum::<f64>() / rows.len() as f64)
}

/// Grand average over the defined row averages of a matrix.
pub fn matrix_average(m: &EvalMatrix) -> Result<f64> {
    let rows: Vec<f64> = row_average(m).into_iter().filter_map(|(_, v)| v).collect();
    grand_average(&rows)
}

/// Rounds to two decimals, halves away from zero. The small nudge absorbs
/// binary representation error so that e.g. 0.125 and 71.675 round up.
pub fn round2(x: f64) -> f64 {
    let scaled = (x.abs() * 100.0 * (1.0 + 1e-12) + 0.5).floor();
    (scaled / 100.0).copysign(x)
}

/// Two-decimal text after [`round2`]; `-0.00` prints as `0.00`.
pub fn format2(x: f64) -> String {
    let r = round2(x);
    if r == 0.0 {
        "0.00".into()
    } else {
        format!("{r:.2}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub condition: String,
    pub value: f64,
}

/// Grand average of `metric` per condition, in [`condition_order`].
pub fn robustness_curve(
    records: &[PredictionRecord],
    metric: Metric,
    threshold: f64,
) -> Result<Vec<CurvePoint>> {
    if records.is_empty() {
        return Err(Error::EmptyEval);
    }
    by_condition(records)
        .into_iter()
        .map(|(condition, group)| {
            let m = accuracy_matrix(&group, metric, threshold)?;
            Ok(CurvePoint {
                condition,
                value: matrix_average(&m)?,
            })
        })
        .collect()
}

/// Accuracy on natural images per (width bin, height bin).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalGrid {
    pub bin_width: u32,
    pub max_edge: u32,
    /// `values[width_bin][height_bin]`; `None` means no data.
    pub values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<u64>>,
    /// Bin holding the generator's native size, when known.
    pub marker: Option<(usize, usize)>,
}

impl IntervalGrid {
    pub fn label(&self, k: usize) -> String {
        SizeGrid::label_for(self.bin_width, self.max_edge, k)
    }
}

/// Joins natural-image predictions to their metadata by path and scores
/// them per size interval. Generated records are ignored. Any natural
/// record whose path has no metadata fails the join.
pub fn size_interval_accuracy(
    records: &[PredictionRecord],
    metas: &[ImageMeta],
    bin_width: u32,
    max_edge: u32,
    marker_side: Option<u32>,
    threshold: f64,
) -> Result<IntervalGrid> {
    if bin_width == 0 || max_edge == 0 {
        return Err(Error::Domain("bin width and max edge must be positive".into()));
    }
    let by_path: HashMap<&str, &ImageMeta> = metas.iter().map(|m| (m.path.as_str(), m)).collect();
    let n = SizeGrid::bins(bin_width, max_edge);
    let mut correct = vec![vec![0u64; n]; n];
    let mut counts = vec![vec![0u64; n]; n];
    let mut unresolved = Vec::new();
    for r in records.iter().filter(|r| r.true_label == TrueLabel::Natural) {
        let Some(m) = by_path.get(r.path.as_str()) else {
            unresolved.push(r.path.as_str());
            continue;
        };
        let (i, j) = (
            SizeGrid::bin_of(bin_width, max_edge, m.width),
            SizeGrid::bin_of(bin_width, max_edge, m.height),
        );
        counts[i][j] += 1;
        if r.score < threshold {
            correct[i][j] += 1;
        }
    }
    if !unresolved.is_empty() {
        unresolved.sort_unstable();
        unresolved.dedup();
        return Err(Error::Join(unresolved.join(", ")));
    }
    let values = counts
        .iter()
        .zip(&correct)
        .map(|(cr, kr)| {
            cr.iter()
                .zip(kr)
                .map(|(&c, &k)| (c > 0).then(|| 100.0 * k as f64 / c as f64))
                .collect()
        })
        .collect();
    let marker = marker_side.map(|s| {
        let b = SizeGrid::bin_of(bin_width, max_edge, s);
        (b, b)
    });
    Ok(IntervalGrid {
        bin_width,
        max_edge,
        values,
        counts,
        marker,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(label: TrueLabel, score: f64, train: &str, eval: &str) -> PredictionRecord {
        PredictionRecord {
            path: format!("{train}/{eval}/{score}"),
            true_label: label,
            score,
            train_subset: train.into(),
            eval_subset: eval.into(),
            condition: "raw".into(),
        }
    }

    fn matrix(rows: &[&str], values: Vec<Vec<f64>>) -> EvalMatrix {
        EvalMatrix {
            metric: Metric::Acc,
            condition: "raw".into(),
            row_names: rows.iter().map(|s| s.to_string()).collect(),
            col_names: (0..values[0].len()).map(|j| format!("c{j}")).collect(),
            values: values.into_iter().map(|r| r.into_iter().map(Some).collect()).collect(),
        }
    }

    #[test]
    fn loads_and_reports_bad_rows() {
        let text = "path,true_label,score,train_subset,eval_subset,condition\n\
                    a,NATURAL,0.1,adm,adm,raw\n\
                    b,GENERATED,1.2,adm,adm,raw\n\
                    c,GENERATED,0.9,adm,adm,raw\n\
                    d,MAYBE,0.5,adm,adm,raw\n\
                    e,NATURAL,0.3,adm,adm,raw\n";
        let l = load_predictions(text.as_bytes()).unwrap();
        assert_eq!(l.records.len(), 3);
        assert_eq!(
            l.errors.iter().map(|e| e.line).collect::<Vec<_>>(),
            vec![3, 5]
        );
        assert!(l.errors[0].message.contains("outside"));
        let empty = load_predictions("path,true_label,score,train_subset,eval_subset,condition\n".as_bytes()).unwrap();
        assert_eq!(empty, LoadedPredictions::default());
        assert!(matches!(
            load_predictions("path,label\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn confusion_basics() {
        let rs = [
            rec(TrueLabel::Generated, 0.9, "a", "a"),
            rec(TrueLabel::Generated, 0.9, "a", "a"),
            rec(TrueLabel::Natural, 0.1, "a", "a"),
            rec(TrueLabel::Natural, 0.1, "a", "a"),
        ];
        let c = confusion(&rs, 0.5).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (2, 0, 2, 0));
        let all = confusion(&rs, 0.0).unwrap();
        assert_eq!((all.tp, all.fp), (2, 2));
        let low = vec![rec(TrueLabel::Generated, 0.0, "a", "a"); 3];
        let c = confusion(&low, 0.5).unwrap();
        assert_eq!((c.tp, c.fn_, c.precision()), (0, 3, None));
        assert!(matches!(confusion(&[], 0.5), Err(Error::EmptyEval)));
    }

    #[test]
    fn single_cell_matrices() {
        let ok = [rec(TrueLabel::Natural, 0.2, "adm", "adm")];
        assert_eq!(accuracy_matrix(&ok, Metric::Acc, 0.5).unwrap().values, vec![vec![Some(100.0)]]);
        let half = [
            rec(TrueLabel::Natural, 0.2, "adm", "adm"),
            rec(TrueLabel::Natural, 0.7, "adm", "adm"),
        ];
        assert_eq!(accuracy_matrix(&half, Metric::Acc, 0.5).unwrap().values[0][0], Some(50.0));
    }

    #[test]
    fn missing_cells_are_listed() {
        let rs = [
            rec(TrueLabel::Natural, 0.2, "adm", "adm"),
            rec(TrueLabel::Natural, 0.2, "biggan", "biggan"),
        ];
        match accuracy_matrix(&rs, Metric::Acc, 0.5) {
            Err(Error::MissingCell(cells)) => assert_eq!(
                cells,
                vec![
                    ("biggan".to_string(), "adm".to_string()),
                    ("adm".to_string(), "biggan".to_string())
                ]
            ),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn generator_ordering() {
        let mut names: Vec<String> = ["wukong", "Midjourney", "ADM", "BigGAN", "sdv5", "glide", "zzz", "VQDM", "sdv4"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        sort_generators(&mut names);
        assert_eq!(
            names,
            ["BigGAN", "ADM", "VQDM", "glide", "sdv4", "sdv5", "wukong", "Midjourney", "zzz"]
        );
        let mut conds: Vec<String> = ["jpeg60", "raw", "jpeg95", "blur", "jpeg80"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        condition_order(&mut conds);
        assert_eq!(conds, ["raw", "jpeg95", "jpeg80", "jpeg60", "blur"]);
    }

    #[test]
    fn compression_differences_round() {
        for (a, b, d) in [(67.17, 53.91, "13.26"), (59.37, 50.62, "8.75"), (55.07, 50.58, "4.49")] {
            let m = diff_matrix(&matrix(&["r"], vec![vec![a]]), &matrix(&["r"], vec![vec![b]])).unwrap();
            assert_eq!(format2(matrix_average(&m).unwrap()), d);
        }
        let a = matrix(&["r", "s"], vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let z = diff_matrix(&a, &a).unwrap();
        assert!(z.values.iter().flatten().all(|v| *v == Some(0.0)));
        let other = matrix(&["r"], vec![vec![1.0, 2.0]]);
        assert!(matches!(diff_matrix(&a, &other), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn cross_generator_totals() {
        let g = |v: &[f64]| format2(grand_average(v).unwrap());
        assert_eq!(g(&[72.16, 71.27, 71.61]), "71.68");
        assert_eq!(g(&[83.90, 83.39, 80.93]), "82.74");
        assert_eq!(g(&[11.74, 12.12, 9.32]), "11.06");
        assert_eq!(g(&[74.14, 74.93, 73.20]), "74.09");
        assert_eq!(g(&[85.90, 86.80, 84.80]), "85.83");
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(format2(0.125), "0.13");
        assert_eq!(format2(71.675), "71.68");
        assert_eq!(format2(-0.125), "-0.13");
        assert_eq!(format2(-0.001), "0.00");
        assert_eq!(format2(100.0), "100.00");
    }

    #[test]
    fn curve_follows_condition_order() {
        let mut rs = Vec::new();
        for (cond, wrong) in [("jpeg60", 3), ("raw", 0), ("jpeg95", 1)] {
            for i in 0..4 {
                let mut r = rec(TrueLabel::Generated, if i < wrong { 0.1 } else { 0.9 }, "adm", "adm");
                r.condition = cond.into();
                rs.push(r);
            }
        }
        let c = robustness_curve(&rs, Metric::Acc, 0.5).unwrap();
        let pts: Vec<(&str, f64)> = c.iter().map(|p| (p.condition.as_str(), p.value)).collect();
        assert_eq!(pts, vec![("raw", 100.0), ("jpeg95", 75.0), ("jpeg60", 25.0)]);
    }
}
