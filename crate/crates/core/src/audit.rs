//! Compression and size bias between the natural and generated partitions
//! of a corpus.
//!
//! Distributions are compared with the total variation distance on
//! normalized counts, computed in exact integer arithmetic so that identical
//! distributions give exactly 0 and disjoint ones exactly 1.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{Format, ImageMeta, Origin};

/// Which side of the corpus to aggregate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OriginClass {
    Natural,
    Generated,
}

impl OriginClass {
    pub fn of(origin: &Origin) -> Self {
        if origin.is_generated() {
            OriginClass::Generated
        } else {
            OriginClass::Natural
        }
    }

    pub fn matches(self, origin: &Origin) -> bool {
        OriginClass::of(origin) == self
    }
}

/// Value the quality histogram uses for files without quantization tables.
pub const NO_TABLE_QF: u8 = 101;

/// Counts over contiguous bins; bin `k` spans `[bin_edges[k], bin_edges[k+1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.bin_edges[k], self.bin_edges[k + 1], c);
        }
        out
    }
}

/// Quality-factor histogram: one bin per integer quality in [1, 100] plus a
/// final bin for files without quantization tables (PNG, other formats).
pub fn qf_histogram(metas: &[ImageMeta], filter: OriginClass) -> Histogram {
    let mut counts = vec![0u64; 101];
    for m in metas.iter().filter(|m| filter.matches(&m.origin)) {
        let q = m.qf.unwrap_or(NO_TABLE_QF);
        counts[usize::from(q) - 1] += 1;
    }
    Histogram {
        bin_edges: (0..=101).map(|k| f64::from(k) + 0.5).collect(),
        total: counts.iter().sum(),
        counts,
    }
}

/// 2-D counts over (width bin, height bin). The last bin on each axis
/// absorbs every side `>= max_edge`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeGrid {
    pub bin_width: u32,
    pub max_edge: u32,
    /// `counts[width_bin][height_bin]`
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl SizeGrid {
    pub fn bins(bin_width: u32, max_edge: u32) -> usize {
        max_edge.div_ceil(bin_width) as usize + 1
    }

    pub fn bin_of(bin_width: u32, max_edge: u32, side: u32) -> usize {
        if side >= max_edge {
            Self::bins(bin_width, max_edge) - 1
        } else {
            (side / bin_width) as usize
        }
    }

    /// Human-readable label for bin `k`, e.g. `500-549` or `>=1050`.
    pub fn bin_label(&self, k: usize) -> String {
        Self::label_for(self.bin_width, self.max_edge, k)
    }

    pub fn label_for(bin_width: u32, max_edge: u32, k: usize) -> String {
        if k + 1 == Self::bins(bin_width, max_edge) {
            format!(">={max_edge}")
        } else {
            let lo = k as u32 * bin_width;
            format!("{}-{}", lo, (lo + bin_width).min(max_edge) - 1)
        }
    }

    pub fn to_csv(&self) -> String {
        let n = self.counts.len();
        let mut out = String::from("width\\height");
        for j in 0..n {
            let _ = write!(out, ",{}", self.bin_label(j));
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(&self.bin_label(i));
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn size_grid(
    metas: &[ImageMeta],
    filter: OriginClass,
    bin_width: u32,
    max_edge: u32,
) -> Result<SizeGrid> {
    if bin_width == 0 || max_edge == 0 {
        return Err(Error::Domain("bin width and max edge must be positive".into()));
    }
    let n = SizeGrid::bins(bin_width, max_edge);
    let mut counts = vec![vec![0u64; n]; n];
    let mut total = 0;
    for m in metas.iter().filter(|m| filter.matches(&m.origin)) {
        let i = SizeGrid::bin_of(bin_width, max_edge, m.width);
        let j = SizeGrid::bin_of(bin_width, max_edge, m.height);
        counts[i][j] += 1;
        total += 1;
    }
    Ok(SizeGrid {
        bin_width,
        max_edge,
        counts,
        total,
    })
}

/// Anything with a fixed binning and non-negative counts.
pub trait Distribution {
    fn shape(&self) -> Vec<usize>;
    fn flat_counts(&self) -> Vec<u64>;
}

impl Distribution for Histogram {
    fn shape(&self) -> Vec<usize> {
        vec![self.counts.len()]
    }

    fn flat_counts(&self) -> Vec<u64> {
        self.counts.clone()
    }
}

impl Distribution for SizeGrid {
    fn shape(&self) -> Vec<usize> {
        vec![self.counts.len(), self.counts.first().map_or(0, Vec::len)]
    }

    fn flat_counts(&self) -> Vec<u64> {
        self.counts.iter().flatten().copied().collect()
    }
}

/// Total variation distance between two normalized count vectors.
pub fn divergence<D: Distribution + ?Sized>(a: &D, b: &D) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (ca, cb) = (a.flat_counts(), b.flat_counts());
    let ta: u128 = ca.iter().map(|&c| u128::from(c)).sum();
    let tb: u128 = cb.iter().map(|&c| u128::from(c)).sum();
    if ta == 0 || tb == 0 {
        return Err(Error::EmptyDistribution(
            "cannot normalize an all-zero distribution".into(),
        ));
    }
    let num: u128 = ca
        .iter()
        .zip(&cb)
        .map(|(&x, &y)| (u128::from(x) * tb).abs_diff(u128::from(y) * ta))
        .sum();
    Ok(num as f64 / (2 * ta * tb) as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatCounts {
    pub jpeg: u64,
    pub png: u64,
    pub other: u64,
}

impl FormatCounts {
    fn add(&mut self, f: Format) {
        match f {
            Format::Jpeg => self.jpeg += 1,
            Format::Png => self.png += 1,
            Format::Other => self.other += 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatTable {
    pub natural: FormatCounts,
    pub generated: FormatCounts,
}

/// Bias measurements for one corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub qf_hist_natural: Histogram,
    pub qf_hist_generated: Histogram,
    pub size_grid_natural: SizeGrid,
    pub size_grid_generated: SizeGrid,
    pub qf_divergence: f64,
    pub size_divergence: f64,
    pub format_table: FormatTable,
}

pub const DEFAULT_BIN_WIDTH: u32 = 50;
pub const DEFAULT_MAX_EDGE: u32 = 1050;

/// Assembles every histogram, grid and divergence with the default 50 px
/// binning.
pub fn audit_corpus(metas: &[ImageMeta]) -> Result<BiasReport> {
    audit_corpus_with(metas, DEFAULT_BIN_WIDTH, DEFAULT_MAX_EDGE)
}

pub fn audit_corpus_with(metas: &[ImageMeta], bin_width: u32, max_edge: u32) -> Result<BiasReport> {
    let mut format_table = FormatTable::default();
    for m in metas {
        match OriginClass::of(&m.origin) {
            OriginClass::Natural => format_table.natural.add(m.format),
            OriginClass::Generated => format_table.generated.add(m.format),
        }
    }
    let qf_hist_natural = qf_histogram(metas, OriginClass::Natural);
    let qf_hist_generated = qf_histogram(metas, OriginClass::Generated);
    for (h, side) in [(&qf_hist_natural, "natural"), (&qf_hist_generated, "generated")] {
        if h.total == 0 {
            return Err(Error::EmptyDistribution(format!("no {side} images")));
        }
    }
    let size_grid_natural = size_grid(metas, OriginClass::Natural, bin_width, max_edge)?;
    let size_grid_generated = size_grid(metas, OriginClass::Generated, bin_width, max_edge)?;
    Ok(BiasReport {
        qf_divergence: divergence(&qf_hist_natural, &qf_hist_generated)?,
        size_divergence: divergence(&size_grid_natural, &size_grid_generated)?,
        qf_hist_natural,
        qf_hist_generated,
        size_grid_natural,
        size_grid_generated,
        format_table,
    })
}
