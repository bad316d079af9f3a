//! Spatial preprocessing: center crop, bilinear resize and the fixed
//! train/inference pipelines built from them.

use super::raster::{round_half_up, Raster};
use crate::error::{Error, Result};

/// Lower bound of the size window; training crops to this side.
pub const CROP_SIDE: u32 = 450;
/// Upper bound of the size window accepted for training.
pub const SIZE_HIGH: u32 = 550;
/// Inference first resizes to this square so the training crop applies.
pub const INFER_RESIZE: u32 = 512;
/// Detector input side.
pub const INPUT_SIDE: u32 = 224;

/// Top-left offset used by [`center_crop`].
pub fn center_offsets(width: u32, height: u32, side: u32) -> (u32, u32) {
    ((width - side) / 2, (height - side) / 2)
}

/// Copies the centered `side`x`side` window.
pub fn center_crop(img: &Raster, side: u32) -> Result<Raster> {
    if side == 0 || img.width() < side || img.height() < side {
        return Err(Error::Domain(format!(
            "cannot crop {}x{} to {side}",
            img.width(),
            img.height()
        )));
    }
    let (ox, oy) = center_offsets(img.width(), img.height(), side);
    let n = img.channels().count();
    let row_len = side as usize * n;
    let mut samples = Vec::with_capacity(row_len * side as usize);
    for y in oy..oy + side {
        let start = (y as usize * img.width() as usize + ox as usize) * n;
        samples.extend_from_slice(&img.samples()[start..start + row_len]);
    }
    Raster::new(side, side, img.channels(), samples)
}

/// Source taps and weight of the right/bottom tap for each output index.
fn taps(input: u32, output: u32) -> Vec<(usize, usize, f64)> {
    let scale = f64::from(input) / f64::from(output);
    let max = f64::from(input - 1);
    (0..output)
        .map(|i| {
            let src = ((f64::from(i) + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = src.floor();
            let hi = (lo as usize + 1).min(input as usize - 1);
            (lo as usize, hi, src - lo)
        })
        .collect()
}

/// Pixel-center-aligned bilinear resize; each channel independently,
/// rounded half up.
pub fn resize_bilinear(img: &Raster, out_w: u32, out_h: u32) -> Result<Raster> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Domain(format!("resize to {out_w}x{out_h}")));
    }
    if (out_w, out_h) == (img.width(), img.height()) {
        return Ok(img.clone());
    }
    let n = img.channels().count();
    let xs = taps(img.width(), out_w);
    let ys = taps(img.height(), out_h);
    let stride = img.width() as usize * n;
    let src = img.samples();
    let mut out = Vec::with_capacity(out_w as usize * out_h as usize * n);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..n {
                let p = |x: usize, y: usize| f64::from(src[y * stride + x * n + c]);
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                out.push(round_half_up(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    Raster::new(out_w, out_h, img.channels(), out)
}

/// Training-time pipeline: crop to 450 then resize to 224. Both sides must
/// lie in the [450, 550] window.
pub fn train_preprocess(img: &Raster) -> Result<Raster> {
    for side in [img.width(), img.height()] {
        if !(CROP_SIDE..=SIZE_HIGH).contains(&side) {
            return Err(Error::Domain(format!(
                "side {side} outside [{CROP_SIDE}, {SIZE_HIGH}]"
            )));
        }
    }
    resize_bilinear(&center_crop(img, CROP_SIDE)?, INPUT_SIDE, INPUT_SIDE)
}

/// Inference-time pipeline for any size: resize to 512, crop to 450,
/// resize to 224.
pub fn infer_preprocess(img: &Raster) -> Result<Raster> {
    let square = resize_bilinear(img, INFER_RESIZE, INFER_RESIZE)?;
    resize_bilinear(&center_crop(&square, CROP_SIDE)?, INPUT_SIDE, INPUT_SIDE)
}
