use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{image_meta, ImageMeta, Labeler};
use crate::error::{Error, Result};

/// A file that could not be turned into metadata.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileError {
    pub path: String,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScanOutput {
    pub metas: Vec<ImageMeta>,
    pub errors: Vec<FileError>,
}

/// Scans every regular file under `root`. Files are parsed in parallel on
/// the current rayon pool; both outputs are sorted by path.
pub fn scan_corpus(root: &Path, labeler: &dyn Labeler) -> Result<ScanOutput> {
    std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;

    let mut files = Vec::new();
    let mut errors = Vec::new();
    for entry in WalkDir::new(root).follow_links(true) {
        match entry {
            Ok(e) if e.file_type().is_file() => files.push(e.into_path()),
            Ok(_) => {}
            Err(e) => errors.push(FileError {
                path: e
                    .path()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
                error: e.to_string(),
            }),
        }
    }

    let results: Vec<_> = files
        .par_iter()
        .map(|path| {
            let display = path.display().to_string();
            let meta = std::fs::read(path)
                .map_err(|e| Error::io(path, e))
                .and_then(|bytes| {
                    let rel = path.strip_prefix(root).unwrap_or(path);
                    let label = labeler.label(rel)?;
                    image_meta(display.clone(), &bytes, label)
                });
            meta.map_err(|e| FileError {
                path: display,
                error: e.to_string(),
            })
        })
        .collect();

    let mut metas = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(m) => metas.push(m),
            Err(e) => errors.push(e),
        }
    }
    metas.sort_by(|a, b| a.path.cmp(&b.path));
    errors.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(ScanOutput { metas, errors })
}
