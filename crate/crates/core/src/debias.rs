//! Constrained training splits: the JPEG-96 split (natural images already at
//! exactly quality 96, generated images re-encoded at 96) and the size split
//! (additionally restricted to a side-length window), written as
//! deterministic manifests and materialized to disk.
//!
//! Sampling uses ChaCha8 seeded with `seed_from_u64`, drawing bounded
//! integers with Lemire's multiply-and-reject method and selecting with a
//! partial Fisher-Yates shuffle over candidates sorted by path. Classes are
//! visited in sorted order, natural side before generated side, all from a
//! single stream.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{FileError, ImageMeta, Origin};
use crate::sampling;
use crate::transcode::{decode, encode_qf};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    pub target_qf: u8,
    pub size_low: u32,
    pub size_high: u32,
    pub generator_native_side: u32,
    pub seed: u64,
    pub per_class_balance: bool,
}

impl ConstraintConfig {
    /// Quality 96, window [450, 550], 512 px generators, per-class balance.
    pub fn new(seed: u64) -> Self {
        ConstraintConfig {
            target_qf: 96,
            size_low: 450,
            size_high: 550,
            generator_native_side: 512,
            seed,
            per_class_balance: true,
        }
    }

    fn in_window(&self, side: u32) -> bool {
        (self.size_low..=self.size_high).contains(&side)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SplitKind {
    Jpeg96,
    Size,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TranscodeAction {
    Copy,
    EncodeQf(u8),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source_path: String,
    /// Relative to the materialization directory.
    pub output_path: String,
    pub class_label: String,
    pub origin: Origin,
    pub transcode_action: TranscodeAction,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub natural: u64,
    pub generated: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub split: SplitKind,
    pub config: ConstraintConfig,
    pub seed: u64,
    pub counts: BTreeMap<String, ClassCounts>,
    pub total: ClassCounts,
}

/// Header plus entries sorted by (class, origin, source path).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitManifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

impl SplitManifest {
    /// First line: the header object. Remaining lines: one entry each.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n").map_err(|e| Error::io("<manifest>", e))?;
        crate::formats::write_jsonl(out, &self.entries)
    }

    pub fn read_from<R: BufRead>(mut input: R) -> Result<Self> {
        let mut first = String::new();
        input
            .read_line(&mut first)
            .map_err(|e| Error::io("<manifest>", e))?;
        let header: ManifestHeader = serde_json::from_str(&first).map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let entries: Vec<ManifestEntry> =
            crate::formats::read_jsonl(input).map_err(|e| match e {
                Error::Parse { line, message } => Error::Parse {
                    line: line + 1,
                    message,
                },
                other => other,
            })?;
        let manifest = SplitManifest { header, entries };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    /// Checks sorting, actions and class balance.
    pub fn validate(&self) -> Result<()> {
        let key = |e: &ManifestEntry| (e.class_label.clone(), e.origin.clone(), e.source_path.clone());
        if self.entries.windows(2).any(|w| key(&w[0]) > key(&w[1])) {
            return Err(Error::Domain("manifest entries are not sorted".into()));
        }
        let target = self.header.config.target_qf;
        for e in &self.entries {
            let ok = match (&e.origin, e.transcode_action) {
                (Origin::Natural, TranscodeAction::Copy) => true,
                (Origin::Generated(_), TranscodeAction::EncodeQf(q)) => q == target,
                _ => false,
            };
            if !ok {
                return Err(Error::Domain(format!(
                    "{}: unexpected action {:?}",
                    e.source_path, e.transcode_action
                )));
            }
        }
        if tally(&self.entries) != self.header.counts {
            return Err(Error::Domain("manifest counts do not match entries".into()));
        }
        if self.header.config.per_class_balance
            && self.header.counts.values().any(|c| c.natural != c.generated)
        {
            return Err(Error::Domain("per-class balance violated".into()));
        }
        Ok(())
    }
}

fn tally(entries: &[ManifestEntry]) -> BTreeMap<String, ClassCounts> {
    let mut counts: BTreeMap<String, ClassCounts> = BTreeMap::new();
    for e in entries {
        let c = counts.entry(e.class_label.clone()).or_default();
        if e.origin.is_generated() {
            c.generated += 1;
        } else {
            c.natural += 1;
        }
    }
    counts
}

/// `k` items drawn without replacement; `pool` must already be sorted.
fn sample<'a>(rng: &mut ChaCha8Rng, pool: &[&'a ImageMeta], k: usize) -> Vec<&'a ImageMeta> {
    sampling::sample_indices(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

fn file_name(path: &str) -> &str {
    Path::new(path)
        .file_name()
        .and_then(|f| f.to_str())
        .unwrap_or(path)
}

fn file_stem(path: &str) -> &str {
    Path::new(path)
        .file_stem()
        .and_then(|f| f.to_str())
        .unwrap_or(path)
}

/// Draws matched natural/generated samples and lays them out as entries.
fn assemble(
    kind: SplitKind,
    config: &ConstraintConfig,
    naturals: Vec<&ImageMeta>,
    generated: Vec<&ImageMeta>,
) -> Result<SplitManifest> {
    if naturals.is_empty() {
        return Err(Error::InsufficientData("no natural images pass the constraints".into()));
    }
    if generated.is_empty() {
        return Err(Error::InsufficientData("no generated images pass the constraints".into()));
    }
    let mut rng = sampling::rng(config.seed);
    let mut chosen: Vec<&ImageMeta> = Vec::new();
    if config.per_class_balance {
        let mut by_class: BTreeMap<&str, (Vec<&ImageMeta>, Vec<&ImageMeta>)> = BTreeMap::new();
        for m in &naturals {
            by_class.entry(&m.class_label).or_default().0.push(m);
        }
        for m in &generated {
            by_class.entry(&m.class_label).or_default().1.push(m);
        }
        for (nat, gen) in by_class.values_mut() {
            nat.sort_by(|a, b| a.path.cmp(&b.path));
            gen.sort_by(|a, b| a.path.cmp(&b.path));
            let k = nat.len().min(gen.len());
            if k == 0 {
                continue;
            }
            chosen.extend(sample(&mut rng, nat, k));
            chosen.extend(sample(&mut rng, gen, k));
        }
    } else {
        let (mut nat, mut gen) = (naturals, generated);
        nat.sort_by(|a, b| a.path.cmp(&b.path));
        gen.sort_by(|a, b| a.path.cmp(&b.path));
        let k = nat.len().min(gen.len());
        chosen.extend(sample(&mut rng, &nat, k));
        chosen.extend(sample(&mut rng, &gen, k));
    }
    if chosen.is_empty() {
        return Err(Error::InsufficientData("no class has both natural and generated images".into()));
    }
    chosen.sort_by(|a, b| {
        (&a.class_label, &a.origin, &a.path).cmp(&(&b.class_label, &b.origin, &b.path))
    });

    let mut used = HashSet::new();
    let entries: Vec<ManifestEntry> = chosen
        .into_iter()
        .map(|m| {
            let (dir, name, action) = match m.origin {
                Origin::Natural => ("natural", file_name(&m.path).to_owned(), TranscodeAction::Copy),
                Origin::Generated(_) => (
                    "generated",
                    format!("{}.jpg", file_stem(&m.path)),
                    TranscodeAction::EncodeQf(config.target_qf),
                ),
            };
            let mut output_path = format!("{dir}/{}/{name}", m.class_label);
            let mut n = 1;
            while !used.insert(output_path.clone()) {
                output_path = format!("{dir}/{}/{n}_{name}", m.class_label);
                n += 1;
            }
            ManifestEntry {
                source_path: m.path.clone(),
                output_path,
                class_label: m.class_label.clone(),
                origin: m.origin.clone(),
                transcode_action: action,
            }
        })
        .collect();

    let counts = tally(&entries);
    let total = counts.values().fold(ClassCounts::default(), |a, c| ClassCounts {
        natural: a.natural + c.natural,
        generated: a.generated + c.generated,
    });
    Ok(SplitManifest {
        header: ManifestHeader {
            split: kind,
            config: config.clone(),
            seed: config.seed,
            counts,
            total,
        },
        entries,
    })
}

/// Naturals already stored at exactly the target quality, matched by an
/// equal number of generated images to be re-encoded at that quality.
pub fn build_jpeg96_split(metas: &[ImageMeta], config: &ConstraintConfig) -> Result<SplitManifest> {
    let naturals = metas
        .iter()
        .filter(|m| !m.origin.is_generated() && m.is_exact_qf(config.target_qf))
        .collect();
    let generated = metas.iter().filter(|m| m.origin.is_generated()).collect();
    assemble(SplitKind::Jpeg96, config, naturals, generated)
}

/// Like [`build_jpeg96_split`], with naturals further restricted to both
/// sides inside `[size_low, size_high]`, pooled across subsets and
/// de-duplicated by file name. Every generated image must itself lie inside
/// the window.
pub fn build_size_split(metas: &[ImageMeta], config: &ConstraintConfig) -> Result<SplitManifest> {
    if !config.in_window(config.generator_native_side) {
        return Err(Error::ConstraintViolation(format!(
            "generator side {} outside [{}, {}]",
            config.generator_native_side, config.size_low, config.size_high
        )));
    }
    let generated: Vec<&ImageMeta> = metas.iter().filter(|m| m.origin.is_generated()).collect();
    if let Some(m) = generated
        .iter()
        .find(|m| !config.in_window(m.width) || !config.in_window(m.height))
    {
        return Err(Error::ConstraintViolation(format!(
            "generated image {} is {}x{}, outside [{}, {}]",
            m.path, m.width, m.height, config.size_low, config.size_high
        )));
    }

    let mut candidates: Vec<&ImageMeta> = metas
        .iter()
        .filter(|m| {
            !m.origin.is_generated()
                && m.is_exact_qf(config.target_qf)
                && config.in_window(m.width)
                && config.in_window(m.height)
        })
        .collect();
    candidates.sort_by(|a, b| a.path.cmp(&b.path));
    let mut seen = BTreeSet::new();
    let naturals = candidates
        .into_iter()
        .filter(|m| seen.insert(file_name(&m.path).to_owned()))
        .collect();
    assemble(SplitKind::Size, config, naturals, generated)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterializeReport {
    pub written: Vec<String>,
    pub failures: Vec<FileError>,
}

fn materialize_entry(entry: &ManifestEntry, out_dir: &Path) -> Result<()> {
    let src = Path::new(&entry.source_path);
    let dst = out_dir.join(&entry.output_path);
    if let Some(parent) = dst.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    match entry.transcode_action {
        TranscodeAction::Copy => {
            std::fs::copy(src, &dst).map_err(|e| Error::io(src, e))?;
        }
        TranscodeAction::EncodeQf(q) => {
            let bytes = std::fs::read(src).map_err(|e| Error::io(src, e))?;
            let encoded = encode_qf(&decode(&bytes)?, q)?;
            std::fs::write(&dst, encoded).map_err(|e| Error::io(&dst, e))?;
        }
    }
    Ok(())
}

/// Writes every entry under `out_dir` in parallel. Failed entries are listed
/// in the report; the rest are still written.
pub fn materialize(manifest: &SplitManifest, out_dir: &Path) -> Result<MaterializeReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let results: Vec<_> = manifest
        .entries
        .par_iter()
        .map(|e| materialize_entry(e, out_dir))
        .collect();
    let mut report = MaterializeReport::default();
    for (entry, r) in manifest.entries.iter().zip(results) {
        match r {
            Ok(()) => report.written.push(entry.output_path.clone()),
            Err(e) => report.failures.push(FileError {
                path: entry.source_path.clone(),
                error: e.to_string(),
            }),
        }
    }
    Ok(report)
}
