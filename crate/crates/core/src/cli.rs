//! The `genbias` command line: one subcommand per pipeline stage. Stages
//! talk only through files in the output directory, and every stage leaves
//! a `run_<stage>.json` provenance record next to its outputs.
//!
//! Exit codes: 0 on success, 2 when some files or rows failed but the stage
//! finished, 1 on fatal errors. Diagnostics go to stderr as JSON lines.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use ini::Ini;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::audit;
use crate::debias::{self, ConstraintConfig, SplitKind, SplitManifest};
use crate::error::{Error, Result};
use crate::evalharness::{
    self as eh, emit_report, CurvePoint, EvalMatrix, IntervalGrid, Metric, ReportFormat,
    ReportItem,
};
use crate::formats::{self, DirectoryLabeler, ImageMeta};
use crate::probe;
use crate::transcode::{compress_series, CompressionSeries};

#[derive(Debug, Parser)]
#[command(name = "genbias", version, about = "Audit and debias generated-image detection corpora")]
pub struct Cli {
    /// key=value configuration file with [sections]
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every sampling step (overrides the config)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: number of processors)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Labeling {
    /// `<subset>/<split>/{nature,ai}/<file>` as configured in [corpus]
    Genimage,
    /// `natural/<class>/<file>` and `generated/<class>/<file>`
    Materialized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Jpeg96,
    Size,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read container metadata for every file under a corpus root
    Scan {
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "genimage")]
        labeling: Labeling,
        /// File name inside the output directory
        #[arg(long, default_value = "metas.jsonl")]
        output: String,
    },
    /// Quality-factor and size distributions per origin, with divergences
    Audit {
        #[arg(long)]
        metas: Option<PathBuf>,
    },
    /// Build a constrained training split manifest
    Debias {
        #[arg(long)]
        metas: Option<PathBuf>,
        #[arg(long, value_enum)]
        split: Option<SplitChoice>,
        #[arg(long, default_value = "manifest.jsonl")]
        output: String,
    },
    /// Copy and re-encode the files listed in a manifest
    Materialize {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Destination directory (default: <out>/split)
        #[arg(long)]
        dest: Option<PathBuf>,
        /// Also write `<dest>_jpegNN` copies for every configured quality
        #[arg(long)]
        series: bool,
    },
    /// Fit and score the metadata-only shortcut probe
    Probe {
        #[arg(long)]
        metas: Option<PathBuf>,
        /// Prefix of the model and report files
        #[arg(long, default_value = "probe")]
        name: String,
    },
    /// Score detector predictions
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        /// Predictions of a reference detector; enables difference matrices
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Scan output used to join natural predictions to image sizes
        #[arg(long)]
        metas: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Re-render the CSV and SVG files of an eval bundle
    Report {
        #[arg(long)]
        eval: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Scan { .. } => "scan",
            Command::Audit { .. } => "audit",
            Command::Debias { .. } => "debias",
            Command::Materialize { .. } => "materialize",
            Command::Probe { .. } => "probe",
            Command::Eval { .. } => "eval",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusConfig {
    pub root: Option<PathBuf>,
    pub natural_dirs: Vec<String>,
    pub generated_dirs: Vec<String>,
    pub subset_component: usize,
    pub class_pattern: Option<String>,
}

/// Effective configuration after merging file and flags.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub corpus: CorpusConfig,
    pub constraints: ConstraintConfig,
    pub split: SplitKind,
    pub series: Vec<u8>,
    pub probe_holdout: f64,
    pub probe_seed: u64,
    pub threshold: f64,
    pub bin_width: u32,
    pub max_edge: u32,
}

fn parse_value<T: std::str::FromStr>(section: &str, key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse {v:?}")))
}

fn parse_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl RunConfig {
    /// Reads the optional config file and applies flag overrides. The seed
    /// has no default: it must come from one of the two.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let ini = match &cli.config {
            Some(p) => Ini::load_from_file(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => Ini::new(),
        };
        let get = |section: Option<&str>, key: &str| -> Option<String> {
            ini.section(section).and_then(|s| s.get(key)).map(String::from)
        };
        let num = |section: Option<&str>, key: &str| -> Result<Option<u64>> {
            get(section, key)
                .map(|v| parse_value(section.unwrap_or("general"), key, &v))
                .transpose()
        };
        let seed = match cli.seed {
            Some(s) => s,
            None => num(None, "seed")?.ok_or_else(|| {
                Error::Config("a seed is required (--seed or `seed = ...`)".into())
            })?,
        };
        let out = cli
            .out
            .clone()
            .or_else(|| get(None, "out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("genbias-out"));
        let jobs = match cli.jobs {
            Some(j) => j,
            None => num(None, "jobs")?.map_or_else(
                || std::thread::available_parallelism().map_or(1, |n| n.get()),
                |j| j as usize,
            ),
        };
        if jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }

        let defaults = DirectoryLabeler::default();
        let corpus = CorpusConfig {
            root: get(Some("corpus"), "root").map(PathBuf::from),
            natural_dirs: get(Some("corpus"), "natural_dirs")
                .map_or(defaults.natural_dirs, |v| parse_list(&v)),
            generated_dirs: get(Some("corpus"), "generated_dirs")
                .map_or(defaults.generated_dirs, |v| parse_list(&v)),
            subset_component: num(Some("corpus"), "subset_component")?.unwrap_or(0) as usize,
            class_pattern: match get(Some("corpus"), "class_pattern") {
                Some(p) if p.trim().is_empty() => None,
                Some(p) => Some(p),
                None => defaults.class_pattern.map(|r| r.as_str().to_owned()),
            },
        };

        let mut constraints = ConstraintConfig::new(seed);
        let c = Some("constraints");
        if let Some(v) = num(c, "target_qf")? {
            constraints.target_qf = u8::try_from(v)
                .ok()
                .filter(|q| (1..=100).contains(q))
                .ok_or_else(|| Error::Config(format!("target_qf {v} outside [1, 100]")))?;
        }
        if let Some(v) = num(c, "size_low")? {
            constraints.size_low = v as u32;
        }
        if let Some(v) = num(c, "size_high")? {
            constraints.size_high = v as u32;
        }
        if let Some(v) = num(c, "generator_native_side")? {
            constraints.generator_native_side = v as u32;
        }
        if let Some(v) = get(c, "per_class_balance") {
            constraints.per_class_balance = parse_value("constraints", "per_class_balance", &v)?;
        }
        if constraints.size_low > constraints.size_high {
            return Err(Error::Config("size_low exceeds size_high".into()));
        }
        let split = match get(c, "split").as_deref().map(str::trim) {
            None | Some("jpeg96") => SplitKind::Jpeg96,
            Some("size") => SplitKind::Size,
            Some(other) => return Err(Error::Config(format!("unknown split {other:?}"))),
        };

        let series = match get(Some("compression"), "series") {
            Some(v) => parse_list(&v)
                .iter()
                .map(|q| parse_value("compression", "series", q))
                .collect::<Result<Vec<u8>>>()?,
            None => CompressionSeries::robustness().qualities().to_vec(),
        };
        CompressionSeries::new(series.clone()).map_err(|e| Error::Config(e.to_string()))?;

        let probe_holdout = get(Some("probe"), "holdout")
            .map(|v| parse_value("probe", "holdout", &v))
            .transpose()?
            .unwrap_or(0.25);
        let probe_seed = num(Some("probe"), "seed")?.unwrap_or(seed);
        let threshold = get(Some("eval"), "threshold")
            .map(|v| parse_value("eval", "threshold", &v))
            .transpose()?
            .unwrap_or(eh::DEFAULT_THRESHOLD);
        let bin_width = num(Some("eval"), "bin_width")?.map_or(audit::DEFAULT_BIN_WIDTH, |v| v as u32);
        let max_edge = num(Some("eval"), "max_edge")?.map_or(audit::DEFAULT_MAX_EDGE, |v| v as u32);
        if bin_width == 0 || max_edge == 0 {
            return Err(Error::Config("bin_width and max_edge must be positive".into()));
        }

        Ok(RunConfig {
            seed,
            out,
            jobs,
            corpus,
            constraints,
            split,
            series,
            probe_holdout,
            probe_seed,
            threshold,
            bin_width,
            max_edge,
        })
    }

    fn labeler(&self) -> Result<DirectoryLabeler> {
        let class_pattern = self
            .corpus
            .class_pattern
            .as_deref()
            .map(Regex::new)
            .transpose()
            .map_err(|e| Error::Config(format!("class_pattern: {e}")))?;
        Ok(DirectoryLabeler {
            natural_dirs: self.corpus.natural_dirs.clone(),
            generated_dirs: self.corpus.generated_dirs.clone(),
            subset_component: self.corpus.subset_component,
            class_pattern,
        })
    }

    fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

/// JSON-lines diagnostics.
pub struct Diagnostics<'a> {
    sink: &'a mut (dyn Write + Send),
    errors: u64,
}

impl<'a> Diagnostics<'a> {
    pub fn new(sink: &'a mut (dyn Write + Send)) -> Self {
        Diagnostics { sink, errors: 0 }
    }

    fn emit(&mut self, value: serde_json::Value) {
        let _ = writeln!(self.sink, "{value}");
    }

    fn file_error(&mut self, path: &str, message: &str) {
        self.errors += 1;
        self.emit(json!({"level": "error", "path": path, "message": message}));
    }

    fn row_error(&mut self, file: &Path, line: u64, message: &str) {
        self.errors += 1;
        self.emit(json!({"level": "error", "path": file.display().to_string(), "line": line, "message": message}));
    }

    fn info(&mut self, event: &str, detail: serde_json::Value) {
        self.emit(json!({"level": "info", "event": event, "detail": detail}));
    }
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Output bookkeeping for one stage.
struct Stage<'c> {
    config: &'c RunConfig,
    command: &'static str,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Digest of every file below `root`, keyed by relative path.
fn tree_digest(root: &Path) -> Result<String> {
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(root).unwrap_or(&f);
        h.update(rel.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(file_digest(&f)?.as_bytes());
        h.update([b'\n']);
    }
    Ok(hex::encode(h.finalize()))
}

impl<'c> Stage<'c> {
    fn new(config: &'c RunConfig, command: &'static str) -> Result<Self> {
        std::fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
        Ok(Stage {
            config,
            command,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = if path.is_dir() {
            tree_digest(path)?
        } else {
            file_digest(path)?
        };
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.config.out.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_owned());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn finish(self) -> Result<()> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let record = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": self.config.hash(),
            "config": self.config,
            "seed": self.config.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timestamp_unix": timestamp,
        });
        let path = self.config.out.join(format!("run_{}.json", self.command));
        let mut bytes = serde_json::to_vec_pretty(&record)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Clean,
    Partial,
}

fn existing(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Config(format!("{} does not exist", path.display())))
    }
}

fn input_path(explicit: &Option<PathBuf>, config: &RunConfig, default: &str) -> Result<PathBuf> {
    existing(explicit.clone().unwrap_or_else(|| config.out.join(default)))
}

fn cmd_scan(
    config: &RunConfig,
    diag: &mut Diagnostics,
    root: &Option<PathBuf>,
    labeling: Labeling,
    output: &str,
) -> Result<Outcome> {
    let root = root
        .clone()
        .or_else(|| config.corpus.root.clone())
        .ok_or_else(|| Error::Config("no corpus root (--root or [corpus] root)".into()))?;
    let labeler = match labeling {
        Labeling::Genimage => config.labeler()?,
        Labeling::Materialized => DirectoryLabeler::materialized(),
    };
    let scanned = formats::scan_corpus(&root, &labeler)?;
    let mut stage = Stage::new(config, "scan")?;
    stage.input(&root)?;
    for e in &scanned.errors {
        diag.file_error(&e.path, &e.error);
    }
    let mut buf = Vec::new();
    formats::write_jsonl(&mut buf, &scanned.metas)?;
    stage.write(output, &buf)?;
    diag.info("scanned", json!({"images": scanned.metas.len(), "errors": scanned.errors.len()}));
    stage.finish()?;
    Ok(if scanned.errors.is_empty() {
        Outcome::Clean
    } else {
        Outcome::Partial
    })
}

fn cmd_audit(config: &RunConfig, diag: &mut Diagnostics, metas: &Option<PathBuf>) -> Result<Outcome> {
    let path = input_path(metas, config, "metas.jsonl")?;
    let metas = formats::read_metas(&path)?;
    let report = audit::audit_corpus_with(&metas, config.bin_width, config.max_edge)?;
    let mut stage = Stage::new(config, "audit")?;
    stage.input(&path)?;
    stage.write_json("audit.json", &report)?;
    stage.write("qf_hist_natural.csv", report.qf_hist_natural.to_csv().as_bytes())?;
    stage.write("qf_hist_generated.csv", report.qf_hist_generated.to_csv().as_bytes())?;
    for (name, grid) in [
        ("natural", &report.size_grid_natural),
        ("generated", &report.size_grid_generated),
    ] {
        for (ext, fmt) in [("csv", ReportFormat::Csv), ("svg", ReportFormat::Svg)] {
            stage.write(
                &format!("size_counts_{name}.{ext}"),
                &emit_report(ReportItem::Counts(grid), fmt),
            )?;
        }
    }
    diag.info(
        "audited",
        json!({"qf_divergence": report.qf_divergence, "size_divergence": report.size_divergence}),
    );
    stage.finish()?;
    Ok(Outcome::Clean)
}

fn cmd_debias(
    config: &RunConfig,
    diag: &mut Diagnostics,
    metas: &Option<PathBuf>,
    split: Option<SplitChoice>,
    output: &str,
) -> Result<Outcome> {
    let path = input_path(metas, config, "metas.jsonl")?;
    let metas = formats::read_metas(&path)?;
    let kind = match split {
        Some(SplitChoice::Jpeg96) => SplitKind::Jpeg96,
        Some(SplitChoice::Size) => SplitKind::Size,
        None => config.split,
    };
    let manifest = match kind {
        SplitKind::Jpeg96 => debias::build_jpeg96_split(&metas, &config.constraints)?,
        SplitKind::Size => debias::build_size_split(&metas, &config.constraints)?,
    };
    let mut stage = Stage::new(config, "debias")?;
    stage.input(&path)?;
    stage.write(output, &manifest.to_bytes())?;
    diag.info("split", json!({"kind": kind, "total": manifest.header.total}));
    stage.finish()?;
    Ok(Outcome::Clean)
}

fn cmd_materialize(
    config: &RunConfig,
    diag: &mut Diagnostics,
    manifest: &Option<PathBuf>,
    dest: &Option<PathBuf>,
    series: bool,
) -> Result<Outcome> {
    let path = input_path(manifest, config, "manifest.jsonl")?;
    let f = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = SplitManifest::read_from(std::io::BufReader::new(f))?;
    let dest = dest.clone().unwrap_or_else(|| config.out.join("split"));
    let mut stage = Stage::new(config, "materialize")?;
    stage.input(&path)?;
    let report = debias::materialize(&manifest, &dest)?;
    for e in &report.failures {
        diag.file_error(&e.path, &e.error);
    }
    let mut variants = BTreeMap::new();
    let mut series_failures = 0;
    if series {
        let series = CompressionSeries::new(config.series.clone())?;
        let base = dest.file_name().map_or("split".into(), |n| n.to_string_lossy());
        for rel in &report.written {
            let src = dest.join(rel);
            let encoded = std::fs::read(&src)
                .map_err(|e| Error::io(&src, e))
                .and_then(|b| compress_series(&b, &series));
            let levels = match encoded {
                Ok(levels) => levels,
                Err(e) => {
                    series_failures += 1;
                    diag.file_error(&src.display().to_string(), &e.to_string());
                    continue;
                }
            };
            for (q, bytes) in levels {
                let name = format!("{base}_jpeg{q}");
                let target = dest.with_file_name(&name).join(rel).with_extension("jpg");
                if let Some(parent) = target.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                std::fs::write(&target, bytes).map_err(|e| Error::io(&target, e))?;
                *variants.entry(name).or_insert(0u64) += 1;
            }
        }
    }
    stage.write_json(
        "materialize.json",
        &json!({"dest": dest.display().to_string(), "report": report, "variants": variants}),
    )?;
    diag.info("materialized", json!({"written": report.written.len(), "failed": report.failures.len()}));
    stage.finish()?;
    Ok(if report.failures.is_empty() && series_failures == 0 {
        Outcome::Clean
    } else {
        Outcome::Partial
    })
}

fn cmd_probe(
    config: &RunConfig,
    diag: &mut Diagnostics,
    metas: &Option<PathBuf>,
    name: &str,
) -> Result<Outcome> {
    let path = input_path(metas, config, "metas.jsonl")?;
    let metas = formats::read_metas(&path)?;
    let report = probe::probe_corpus(&metas, config.probe_holdout, config.probe_seed)?;
    let mut stage = Stage::new(config, "probe")?;
    stage.input(&path)?;
    stage.write(&format!("{name}_model.json"), report.model.to_json().as_bytes())?;
    stage.write_json(&format!("{name}_report.json"), &report)?;
    diag.info(
        "probe",
        json!({"name": name, "heldout_accuracy": report.heldout.accuracy, "stumps": report.model.stumps.len()}),
    );
    stage.finish()?;
    Ok(Outcome::Clean)
}

/// Everything `eval` computes, stored so `report` can re-render it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalBundle {
    pub threshold: f64,
    pub conditions: Vec<ConditionEval>,
    pub robustness: Vec<CurvePoint>,
    pub size_grids: Vec<SubsetGrid>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEval {
    pub condition: String,
    pub acc: EvalMatrix,
    pub prec: EvalMatrix,
    pub rec: EvalMatrix,
    pub baseline_acc: Option<EvalMatrix>,
    pub diff: Option<EvalMatrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetGrid {
    pub subset: String,
    pub grid: IntervalGrid,
}

/// File names and contents for every rendering of a bundle.
pub fn render_bundle(bundle: &EvalBundle) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    let both = |files: &mut Vec<(String, Vec<u8>)>, stem: String, item: ReportItem| {
        files.push((format!("{stem}.csv"), emit_report(item, ReportFormat::Csv)));
        files.push((format!("{stem}.svg"), emit_report(item, ReportFormat::Svg)));
    };
    let mut averages = String::from("condition,row,average,baseline,diff\n");
    for c in &bundle.conditions {
        for m in [&c.acc, &c.prec, &c.rec].into_iter().chain(c.diff.as_ref())
        {
            both(&mut files, format!("matrix_{}_{}", m.metric.name(), c.condition), ReportItem::Matrix(m));
        }
        if let Some(b) = &c.baseline_acc {
            both(&mut files, format!("matrix_baseline_acc_{}", c.condition), ReportItem::Matrix(b));
        }
        let ours = eh::row_average(&c.acc);
        let base = c.baseline_acc.as_ref().map(eh::row_average);
        let diff = c.diff.as_ref().map(eh::row_average);
        let text = |v: Option<f64>| v.map(eh::format2).unwrap_or_default();
        for (i, (row, v)) in ours.iter().enumerate() {
            let b = base.as_ref().and_then(|b| b[i].1);
            let d = diff.as_ref().and_then(|d| d[i].1);
            averages.push_str(&format!("{},{row},{},{},{}\n", c.condition, text(*v), text(b), text(d)));
        }
        let grand = |m: Option<&EvalMatrix>| m.and_then(|m| eh::matrix_average(m).ok());
        averages.push_str(&format!(
            "{},TOTAL,{},{},{}\n",
            c.condition,
            text(grand(Some(&c.acc))),
            text(grand(c.baseline_acc.as_ref())),
            text(grand(c.diff.as_ref()))
        ));
    }
    files.push(("averages.csv".into(), averages.into_bytes()));
    files.push(("robustness.csv".into(), emit_report(ReportItem::Curve(&bundle.robustness), ReportFormat::Csv)));
    files.push(("robustness.svg".into(), emit_report(ReportItem::Curve(&bundle.robustness), ReportFormat::Svg)));
    for g in &bundle.size_grids {
        both(&mut files, format!("size_grid_{}", g.subset), ReportItem::Grid(&g.grid));
    }
    Ok(files)
}

fn load_checked(path: &Path, diag: &mut Diagnostics) -> Result<Vec<eh::PredictionRecord>> {
    let loaded = eh::load_predictions_file(path)?;
    for e in &loaded.errors {
        diag.row_error(path, e.line, &e.message);
    }
    Ok(loaded.records)
}

/// Computes the bundle from prediction files.
pub fn evaluate(
    records: &[eh::PredictionRecord],
    baseline: Option<&[eh::PredictionRecord]>,
    metas: Option<&[ImageMeta]>,
    threshold: f64,
    bin_width: u32,
    max_edge: u32,
) -> Result<EvalBundle> {
    if records.is_empty() {
        return Err(Error::EmptyEval);
    }
    let baseline_groups: BTreeMap<String, Vec<eh::PredictionRecord>> = baseline
        .map(|b| eh::by_condition(b).into_iter().collect())
        .unwrap_or_default();
    let groups = eh::by_condition(records);
    let mut conditions = Vec::new();
    for (condition, group) in &groups {
        let acc = eh::accuracy_matrix(group, Metric::Acc, threshold)?;
        let (baseline_acc, diff) = match baseline_groups.get(condition) {
            Some(b) => {
                let base = eh::accuracy_matrix(b, Metric::Acc, threshold)?;
                let diff = eh::diff_matrix(&acc, &base)?;
                (Some(base), Some(diff))
            }
            None => (None, None),
        };
        conditions.push(ConditionEval {
            condition: condition.clone(),
            prec: eh::accuracy_matrix(group, Metric::Prec, threshold)?,
            rec: eh::accuracy_matrix(group, Metric::Rec, threshold)?,
            acc,
            baseline_acc,
            diff,
        });
    }
    let robustness = eh::robustness_curve(records, Metric::Acc, threshold)?;

    let mut size_grids = Vec::new();
    if let (Some(metas), Some((_, first))) = (metas, groups.first()) {
        let mut by_train: BTreeMap<&str, Vec<eh::PredictionRecord>> = BTreeMap::new();
        for r in first {
            by_train.entry(&r.train_subset).or_default().push(r.clone());
        }
        for (subset, rs) in by_train {
            if !rs.iter().any(|r| r.true_label == eh::TrueLabel::Natural) {
                continue;
            }
            let grid = eh::size_interval_accuracy(
                &rs,
                metas,
                bin_width,
                max_edge,
                eh::generator_size(subset),
                threshold,
            )?;
            size_grids.push(SubsetGrid {
                subset: subset.to_owned(),
                grid,
            });
        }
    }
    Ok(EvalBundle {
        threshold,
        conditions,
        robustness,
        size_grids,
    })
}

fn cmd_eval(
    config: &RunConfig,
    diag: &mut Diagnostics,
    predictions: &Path,
    baseline: &Option<PathBuf>,
    metas: &Option<PathBuf>,
    threshold: Option<f64>,
) -> Result<Outcome> {
    let threshold = threshold.unwrap_or(config.threshold);
    let mut stage = Stage::new(config, "eval")?;
    let predictions = existing(predictions.to_path_buf())?;
    stage.input(&predictions)?;
    let before = diag.errors;
    let records = load_checked(&predictions, diag)?;
    let base = match baseline {
        Some(p) => {
            let p = existing(p.clone())?;
            stage.input(&p)?;
            Some(load_checked(&p, diag)?)
        }
        None => None,
    };
    let metas = match metas {
        Some(p) => {
            let p = existing(p.clone())?;
            stage.input(&p)?;
            Some(formats::read_metas(&p)?)
        }
        None => None,
    };
    let bundle = evaluate(
        &records,
        base.as_deref(),
        metas.as_deref(),
        threshold,
        config.bin_width,
        config.max_edge,
    )?;
    stage.write_json("eval.json", &bundle)?;
    for (name, bytes) in render_bundle(&bundle)? {
        stage.write(&name, &bytes)?;
    }
    diag.info("evaluated", json!({"records": records.len(), "conditions": bundle.conditions.len()}));
    stage.finish()?;
    Ok(if diag.errors > before {
        Outcome::Partial
    } else {
        Outcome::Clean
    })
}

fn cmd_report(config: &RunConfig, eval: &Option<PathBuf>) -> Result<Outcome> {
    let path = input_path(eval, config, "eval.json")?;
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bundle: EvalBundle = serde_json::from_str(&text)?;
    let mut stage = Stage::new(config, "report")?;
    stage.input(&path)?;
    for (name, bytes) in render_bundle(&bundle)? {
        stage.write(&name, &bytes)?;
    }
    stage.finish()?;
    Ok(Outcome::Clean)
}

fn dispatch(cli: &Cli, config: &RunConfig, diag: &mut Diagnostics) -> Result<Outcome> {
    match &cli.command {
        Command::Scan {
            root,
            labeling,
            output,
        } => cmd_scan(config, diag, root, *labeling, output),
        Command::Audit { metas } => cmd_audit(config, diag, metas),
        Command::Debias {
            metas,
            split,
            output,
        } => cmd_debias(config, diag, metas, *split, output),
        Command::Materialize {
            manifest,
            dest,
            series,
        } => cmd_materialize(config, diag, manifest, dest, *series),
        Command::Probe { metas, name } => cmd_probe(config, diag, metas, name),
        Command::Eval {
            predictions,
            baseline,
            metas,
            threshold,
        } => cmd_eval(config, diag, predictions, baseline, metas, *threshold),
        Command::Report { eval } => cmd_report(config, eval),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli, diagnostics: &mut (dyn Write + Send)) -> i32 {
    let mut diag = Diagnostics::new(diagnostics);
    let result = RunConfig::resolve(cli).and_then(|config| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(cli, &config, &mut diag))
    });
    match result {
        Ok(Outcome::Clean) => 0,
        Ok(Outcome::Partial) => 2,
        Err(e) => {
            diag.emit(json!({"level": "fatal", "command": cli.command.name(), "message": e.to_string()}));
            1
        }
    }
}

/// Parses `args` (including the program name) and runs. Usage errors exit
/// with 1 after printing clap's message.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, &mut std::io::stderr()),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                1
            } else {
                0
            }
        }
    }
}
