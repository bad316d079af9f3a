//! Container parsing without pixel decoding: dimensions, quantization tables
//! and quality-factor estimates for JPEG, dimensions for PNG.

pub mod jpeg;
pub mod png;
mod scan;
pub mod tables;

use std::io::{BufRead, Write};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::jpeg::{parse_jpeg_meta, JpegHeader};
pub use self::png::parse_png_meta;
pub use self::scan::{scan_corpus, FileError, ScanOutput};
pub use self::tables::{
    estimate_qf, scale_tables, QualityEstimate, QuantTables, StandardTableSet, STANDARD_TABLES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Format {
    Jpeg,
    Png,
    Other,
}

/// Where an image came from. Generated images carry their generator name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    Natural,
    Generated(String),
}

impl Origin {
    pub fn is_generated(&self) -> bool {
        matches!(self, Origin::Generated(_))
    }

    pub fn generator(&self) -> Option<&str> {
        match self {
            Origin::Natural => None,
            Origin::Generated(g) => Some(g),
        }
    }
}

/// Per-file metadata record, one JSON object per line when serialized.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub path: String,
    pub format: Format,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qf: Option<u8>,
    pub qf_exact: bool,
    pub class_label: String,
    pub origin: Origin,
    pub subset: String,
}

impl ImageMeta {
    /// Checks the record invariants. Used when reading metadata back from disk.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Domain(format!("{}: {m}", self.path)));
        if self.width == 0 || self.height == 0 {
            return fail("zero dimension");
        }
        match (self.format, self.qf) {
            (Format::Jpeg, None) => return fail("JPEG without quality estimate"),
            (Format::Png | Format::Other, Some(_)) => return fail("quality on non-JPEG"),
            (_, Some(q)) if !(1..=100).contains(&q) => return fail("quality outside [1, 100]"),
            _ => {}
        }
        if self.qf_exact && self.qf.is_none() {
            return fail("qf_exact without qf");
        }
        Ok(())
    }

    pub fn is_exact_qf(&self, qf: u8) -> bool {
        self.qf_exact && self.qf == Some(qf)
    }
}

/// Labels attached to a file by a corpus labeling rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Label {
    pub class_label: String,
    pub origin: Origin,
    pub subset: String,
}

/// Maps a path relative to the corpus root onto its labels.
pub trait Labeler: Sync {
    fn label(&self, relative: &Path) -> Result<Label>;
}

impl<F> Labeler for F
where
    F: Fn(&Path) -> Result<Label> + Sync,
{
    fn label(&self, relative: &Path) -> Result<Label> {
        self(relative)
    }
}

/// Directory-layout labeling in the style of GenImage
/// (`<subset>/<split>/{nature,ai}/<file>`).
///
/// The origin comes from the first path component found in `natural_dirs`
/// or `generated_dirs`; the subset is the component at `subset_component`
/// and doubles as the generator name. The class is the first capture group
/// of `class_pattern` applied to the file name, falling back to the parent
/// directory name (always used when there is no pattern).
#[derive(Clone, Debug)]
pub struct DirectoryLabeler {
    pub natural_dirs: Vec<String>,
    pub generated_dirs: Vec<String>,
    pub subset_component: usize,
    pub class_pattern: Option<Regex>,
}

impl Default for DirectoryLabeler {
    fn default() -> Self {
        DirectoryLabeler {
            natural_dirs: vec!["nature".into(), "natural".into()],
            generated_dirs: vec!["ai".into(), "generated".into()],
            subset_component: 0,
            class_pattern: Some(Regex::new(r"^([^_.]+)_").expect("static pattern")),
        }
    }
}

impl DirectoryLabeler {
    /// Labels the `natural/<class>/...` and `generated/<class>/...` layout
    /// written by split materialization.
    pub fn materialized() -> Self {
        DirectoryLabeler {
            natural_dirs: vec!["natural".into()],
            generated_dirs: vec!["generated".into()],
            subset_component: 0,
            class_pattern: None,
        }
    }
}

impl Labeler for DirectoryLabeler {
    fn label(&self, relative: &Path) -> Result<Label> {
        let parts: Vec<String> = relative
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        let fail = |reason: &str| Error::Label {
            path: relative.display().to_string(),
            reason: reason.into(),
        };
        let dirs = &parts[..parts.len().saturating_sub(1)];
        let subset = if self.subset_component < dirs.len() {
            dirs[self.subset_component].clone()
        } else {
            String::new()
        };
        let origin = dirs
            .iter()
            .find_map(|d| {
                if self.natural_dirs.contains(d) {
                    Some(Origin::Natural)
                } else if self.generated_dirs.contains(d) {
                    Some(Origin::Generated(subset.clone()))
                } else {
                    None
                }
            })
            .ok_or_else(|| fail("no natural/generated directory in path"))?;
        let file = parts.last().ok_or_else(|| fail("empty path"))?;
        let class_label = self
            .class_pattern
            .as_ref()
            .and_then(|p| p.captures(file))
            .and_then(|c| c.get(1))
            .map(|m| m.as_str().to_owned())
            .or_else(|| dirs.last().cloned())
            .ok_or_else(|| fail("no class label"))?;
        Ok(Label {
            class_label,
            origin,
            subset,
        })
    }
}

/// Container facts read from bytes, before labels are attached.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContainerInfo {
    pub format: Format,
    pub width: u32,
    pub height: u32,
    pub quality: Option<QualityEstimate>,
    pub progressive: bool,
}

/// Sniffs the container and reads its header.
pub fn inspect(bytes: &[u8]) -> Result<ContainerInfo> {
    if bytes.starts_with(&[0xFF, 0xD8]) {
        let h = parse_jpeg_meta(bytes)?;
        return Ok(ContainerInfo {
            format: Format::Jpeg,
            width: h.width,
            height: h.height,
            quality: Some(estimate_qf(&h.tables)),
            progressive: h.progressive,
        });
    }
    if bytes.starts_with(&png::SIGNATURE) {
        let (width, height) = parse_png_meta(bytes)?;
        return Ok(ContainerInfo {
            format: Format::Png,
            width,
            height,
            quality: None,
            progressive: false,
        });
    }
    if let Some(dims) = png::sniff_other(bytes) {
        let (width, height) = dims?;
        return Ok(ContainerInfo {
            format: Format::Other,
            width,
            height,
            quality: None,
            progressive: false,
        });
    }
    Err(Error::UnrecognizedFormat)
}

/// Builds the metadata record for one file.
pub fn image_meta(path: impl Into<String>, bytes: &[u8], label: Label) -> Result<ImageMeta> {
    let info = inspect(bytes)?;
    Ok(ImageMeta {
        path: path.into(),
        format: info.format,
        width: info.width,
        height: info.height,
        qf: info.quality.map(|q| q.qf),
        qf_exact: info.quality.is_some_and(|q| q.exact),
        class_label: label.class_label,
        origin: label.origin,
        subset: label.subset,
    })
}

pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

/// Reads JSON-lines, reporting the offending line number on failure.
pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i as u64 + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Reads and validates an `ImageMeta` JSON-lines file.
pub fn read_metas(path: &Path) -> Result<Vec<ImageMeta>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let metas: Vec<ImageMeta> = read_jsonl(std::io::BufReader::new(f))?;
    for m in &metas {
        m.validate()?;
    }
    Ok(metas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn natural() -> Label {
        Label {
            class_label: "n01440764".into(),
            origin: Origin::Natural,
            subset: "sdv4".into(),
        }
    }

    #[test]
    fn serializes_with_absent_qf_omitted() {
        let m = image_meta("a.png", &png::ihdr_only(512, 512), Label {
            origin: Origin::Generated("sdv4".into()),
            ..natural()
        })
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"path":"a.png","format":"PNG","width":512,"height":512,"qf_exact":false,"class_label":"n01440764","origin":{"GENERATED":"sdv4"},"subset":"sdv4"}"#
        );
        let back: ImageMeta = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn jpeg_meta_carries_quality() {
        let t = scale_tables(96).unwrap();
        let bytes = jpeg::fixtures::header_stream(jpeg::SOF0, 500, 375, &t);
        let m = image_meta("x.jpg", &bytes, natural()).unwrap();
        assert_eq!((m.format, m.qf, m.qf_exact), (Format::Jpeg, Some(96), true));
        m.validate().unwrap();
        assert!(m.is_exact_qf(96));
    }

    #[test]
    fn text_is_unrecognized() {
        assert!(matches!(inspect(b"hello world"), Err(Error::UnrecognizedFormat)));
    }

    #[test]
    fn genimage_layout_labels() {
        let l = DirectoryLabeler::default();
        let n = l
            .label(Path::new("sdv5/train/nature/n01440764_10026.JPEG"))
            .unwrap();
        assert_eq!(n.origin, Origin::Natural);
        assert_eq!(n.class_label, "n01440764");
        assert_eq!(n.subset, "sdv5");
        let g = l.label(Path::new("sdv5/train/ai/014_sdv5_00091.png")).unwrap();
        assert_eq!(g.origin, Origin::Generated("sdv5".into()));
        assert_eq!(g.class_label, "014");
        assert!(l.label(Path::new("sdv5/readme.txt")).is_err());
    }

    #[test]
    fn validate_catches_inconsistent_records() {
        let mut m = image_meta("a.png", &png::ihdr_only(2, 2), natural()).unwrap();
        m.qf_exact = true;
        assert!(m.validate().is_err());
        m.qf_exact = false;
        m.format = Format::Jpeg;
        assert!(m.validate().is_err());
    }
}
