//! Seeded synthetic corpora in the GenImage directory layout, for demos and
//! tests. Natural images are JPEGs of mixed quality and size; generated
//! images are 512x512 PNGs. The two classes can therefore be told apart from
//! metadata alone, which is exactly the kind of bias the audit looks for.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sampling;
use crate::transcode::{encode_png, encode_qf, Raster};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub subset: String,
    pub classes: usize,
    pub natural: usize,
    pub generated: usize,
    /// Share of naturals stored at quality 96; the rest draw from 75..=95.
    pub qf96_share: f64,
    /// Share of naturals that are exactly the generator's native size; the
    /// rest draw each side from `natural_sides`.
    pub native_share: f64,
    pub natural_sides: (u32, u32),
    pub native_side: u32,
}

impl SynthSpec {
    /// Balanced corpus of `n` images with half the naturals at quality 96
    /// and 30% of them at 512x512.
    pub fn biased(n: usize, seed: u64) -> Self {
        SynthSpec {
            seed,
            subset: "sdv4".into(),
            classes: 10,
            natural: n / 2,
            generated: n - n / 2,
            qf96_share: 0.5,
            native_share: 0.3,
            natural_sides: (300, 700),
            native_side: 512,
        }
    }
}

/// One planned file, relative to the corpus root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthImage {
    pub path: String,
    pub width: u32,
    pub height: u32,
    /// `None` for PNG.
    pub qf: Option<u8>,
    pub index: u64,
}

fn draw(rng: &mut rand_chacha::ChaCha8Rng, lo: u32, hi: u32) -> u32 {
    lo + sampling::bounded(rng, u64::from(hi - lo) + 1) as u32
}

/// Decides every file's name, size and quality without touching disk.
pub fn plan(spec: &SynthSpec) -> Result<Vec<SynthImage>> {
    if spec.classes == 0 || spec.natural_sides.0 == 0 || spec.natural_sides.0 > spec.natural_sides.1 {
        return Err(Error::Domain("invalid synthetic corpus spec".into()));
    }
    let mut rng = sampling::rng(spec.seed);
    let chance = |rng: &mut rand_chacha::ChaCha8Rng, p: f64| {
        (sampling::bounded(rng, 1 << 20) as f64) < p * f64::from(1u32 << 20)
    };
    let mut out = Vec::with_capacity(spec.natural + spec.generated);
    for i in 0..spec.natural {
        let qf = if chance(&mut rng, spec.qf96_share) {
            96
        } else {
            draw(&mut rng, 75, 95) as u8
        };
        let (width, height) = if chance(&mut rng, spec.native_share) {
            (spec.native_side, spec.native_side)
        } else {
            let (lo, hi) = spec.natural_sides;
            (draw(&mut rng, lo, hi), draw(&mut rng, lo, hi))
        };
        out.push(SynthImage {
            path: format!("{}/train/nature/c{:02}_{i:05}.JPEG", spec.subset, i % spec.classes),
            width,
            height,
            qf: Some(qf),
            index: i as u64,
        });
    }
    for i in 0..spec.generated {
        out.push(SynthImage {
            path: format!(
                "{}/train/ai/c{:02}_{i:05}_{}.png",
                spec.subset,
                i % spec.classes,
                spec.subset
            ),
            width: spec.native_side,
            height: spec.native_side,
            qf: None,
            index: (spec.natural + i) as u64,
        });
    }
    Ok(out)
}

/// Smooth four-corner gradient whose colours depend on `index`.
pub fn gradient(width: u32, height: u32, index: u64) -> Result<Raster> {
    let corner = |k: u64| -> [f64; 3] {
        let h = (index.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ k.wrapping_mul(0xBF58_476D_1CE4_E5B9)) >> 16;
        [(h & 0xFF) as f64, ((h >> 8) & 0xFF) as f64, ((h >> 16) & 0xFF) as f64]
    };
    let (c00, c10, c01, c11) = (corner(1), corner(2), corner(3), corner(4));
    let mut s = Vec::with_capacity(width as usize * height as usize * 3);
    let span = |n: u32| f64::from(n.max(2) - 1);
    for y in 0..height {
        let fy = f64::from(y) / span(height);
        let mut v = [0.0; 3];
        let mut step = [0.0; 3];
        for c in 0..3 {
            v[c] = c00[c] * (1.0 - fy) + c01[c] * fy;
            step[c] = (c10[c] * (1.0 - fy) + c11[c] * fy - v[c]) / span(width);
        }
        for _ in 0..width {
            for c in 0..3 {
                s.push((v[c] + 0.5).clamp(0.0, 255.0) as u8);
                v[c] += step[c];
            }
        }
    }
    Raster::new(width, height, crate::transcode::Channels::Rgb, s)
}

/// Encodes and writes every planned image under `root`, in parallel.
pub fn write_corpus(root: &Path, images: &[SynthImage]) -> Result<()> {
    images.par_iter().try_for_each(|img| {
        let raster = gradient(img.width, img.height, img.index)?;
        let bytes = match img.qf {
            Some(q) => encode_qf(&raster, q)?,
            None => encode_png(&raster)?,
        };
        let path = root.join(&img.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    })
}
