//! Pixel-level work: JPEG/PNG decoding, JPEG encoding at a quality factor,
//! the compression series used for robustness evaluation, and the spatial
//! preprocessing pipelines.

mod dct;
mod decoder;
mod encoder;
mod huffman;
mod raster;
mod resize;

use std::io::Cursor;

use crate::error::{Error, Result};
use crate::formats::png::SIGNATURE as PNG_SIGNATURE;

pub use self::decoder::decode_jpeg;
pub use self::encoder::encode_qf;
pub use self::raster::{round_half_up, Channels, Raster};
pub use self::resize::{
    center_crop, center_offsets, infer_preprocess, resize_bilinear, train_preprocess, CROP_SIDE,
    INFER_RESIZE, INPUT_SIDE, SIZE_HIGH,
};

/// Decodes a JPEG or PNG to an RGB raster. PNG alpha is flattened onto white.
pub fn decode(bytes: &[u8]) -> Result<Raster> {
    if bytes.starts_with(&[0xFF, 0xD8]) {
        decode_jpeg(bytes)
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else {
        Err(Error::UnrecognizedFormat)
    }
}

fn png_error(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(e) => Error::malformed(format!("PNG read: {e}")),
        png::DecodingError::Format(e) => Error::malformed(format!("PNG: {e}")),
        png::DecodingError::Parameter(e) => Error::unsupported(format!("PNG: {e}")),
        png::DecodingError::LimitsExceeded => Error::unsupported("PNG exceeds decoder limits"),
    }
}

pub fn decode_png(bytes: &[u8]) -> Result<Raster> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(png_error)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::unsupported("PNG too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_error)?;
    buf.truncate(info.buffer_size());

    let flatten = |c: u8, a: u8| {
        let (c, a) = (f64::from(c), f64::from(a));
        round_half_up((c * a + 255.0 * (255.0 - a)) / 255.0)
    };
    let rgb: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf
            .chunks_exact(4)
            .flat_map(|p| [flatten(p[0], p[3]), flatten(p[1], p[3]), flatten(p[2], p[3])])
            .collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&v| [v, v, v]).collect(),
        png::ColorType::GrayscaleAlpha => buf
            .chunks_exact(2)
            .flat_map(|p| {
                let v = flatten(p[0], p[1]);
                [v, v, v]
            })
            .collect(),
        png::ColorType::Indexed => return Err(Error::unsupported("unexpanded palette")),
    };
    Raster::new(info.width, info.height, Channels::Rgb, rgb)
}

/// Lossless PNG encoding, used to build fixtures and demo corpora.
pub fn encode_png(img: &Raster) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width(), img.height());
        enc.set_color(match img.channels() {
            Channels::Gray => png::ColorType::Grayscale,
            Channels::Rgb => png::ColorType::Rgb,
        });
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Fastest);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Domain(format!("PNG encode: {e}")))?;
        writer
            .write_image_data(img.samples())
            .map_err(|e| Error::Domain(format!("PNG encode: {e}")))?;
    }
    Ok(out)
}

/// Ordered, strictly decreasing quality factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressionSeries(Vec<u8>);

impl CompressionSeries {
    pub fn new(qualities: Vec<u8>) -> Result<Self> {
        if let Some(q) = qualities.iter().find(|q| !(1..=100).contains(*q)) {
            return Err(Error::Domain(format!("quality factor {q} outside [1, 100]")));
        }
        if qualities.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Domain("compression series must strictly decrease".into()));
        }
        Ok(CompressionSeries(qualities))
    }

    /// 95, 90, 80, 70, 60.
    pub fn robustness() -> Self {
        CompressionSeries(vec![95, 90, 80, 70, 60])
    }

    pub fn qualities(&self) -> &[u8] {
        &self.0
    }
}

/// Re-encodes the decoded input once per quality. Every level starts from
/// the original decode, so an already-JPEG input is compressed twice.
pub fn compress_series(bytes: &[u8], series: &CompressionSeries) -> Result<Vec<(u8, Vec<u8>)>> {
    if series.0.is_empty() {
        return Ok(Vec::new());
    }
    let img = decode(bytes)?;
    series
        .0
        .iter()
        .map(|&q| Ok((q, encode_qf(&img, q)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{estimate_qf, parse_jpeg_meta};

    fn gradient(w: u32, h: u32) -> Raster {
        let mut s = Vec::new();
        for y in 0..h {
            for x in 0..w {
                s.extend([(x * 255 / w) as u8, (y * 255 / h) as u8, ((x + y) % 256) as u8]);
            }
        }
        Raster::new(w, h, Channels::Rgb, s).unwrap()
    }

    #[test]
    fn constant_gray_survives_qf96() {
        let img = Raster::filled(40, 24, &[128, 128, 128]).unwrap();
        let back = decode(&encode_qf(&img, 96).unwrap()).unwrap();
        let err = back
            .samples()
            .iter()
            .map(|&v| v.abs_diff(128))
            .max()
            .unwrap();
        assert!(err <= 1, "max error {err}");
    }

    #[test]
    fn constant_8x8_qf50() {
        // Neutral content has zero chroma, so only the luma DC step (16 at
        // q50, i.e. 2 sample levels) applies.
        for v in 0..=255u8 {
            let img = Raster::filled(8, 8, &[v, v, v]).unwrap();
            let back = decode(&encode_qf(&img, 50).unwrap()).unwrap();
            for b in back.samples() {
                assert!(v.abs_diff(*b) <= 1, "{v} vs {b}");
            }
        }
    }

    #[test]
    fn encoding_is_deterministic_and_carries_tables() {
        let img = gradient(33, 17);
        let a = encode_qf(&img, 96).unwrap();
        assert_eq!(a, encode_qf(&img, 96).unwrap());
        let h = parse_jpeg_meta(&a).unwrap();
        assert_eq!((h.width, h.height), (33, 17));
        let e = estimate_qf(&h.tables);
        assert_eq!((e.qf, e.exact, e.distance), (96, true, 0));
    }

    #[test]
    fn gray_raster_encodes_single_component() {
        let img = Raster::filled(9, 9, &[77]).unwrap();
        let bytes = encode_qf(&img, 80).unwrap();
        let h = parse_jpeg_meta(&bytes).unwrap();
        assert_eq!(h.components, 1);
        assert_eq!(estimate_qf(&h.tables).qf, 80);
        let back = decode(&bytes).unwrap();
        assert!(back.samples().iter().all(|&v| v.abs_diff(77) <= 1));
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let img = Raster::new(2, 2, Channels::Rgb, vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 250, 251, 252])
            .unwrap();
        assert_eq!(decode(&encode_png(&img).unwrap()).unwrap(), img);
    }

    #[test]
    fn truncated_streams_are_malformed() {
        let bytes = encode_qf(&gradient(32, 32), 90).unwrap();
        for cut in [bytes.len() / 2, bytes.len() - 3] {
            assert!(
                matches!(decode(&bytes[..cut]), Err(Error::MalformedStream(_))),
                "cut {cut}"
            );
        }
        let png = encode_png(&gradient(16, 16)).unwrap();
        assert!(decode(&png[..png.len() / 2]).is_err());
    }

    #[test]
    fn series() {
        assert!(CompressionSeries::new(vec![90, 95]).is_err());
        assert!(CompressionSeries::new(vec![101]).is_err());
        let png = encode_png(&gradient(24, 24)).unwrap();
        let out = compress_series(&png, &CompressionSeries::robustness()).unwrap();
        assert_eq!(out.len(), 5);
        for (q, bytes) in &out {
            let e = estimate_qf(&parse_jpeg_meta(bytes).unwrap().tables);
            assert_eq!((e.qf, e.exact), (*q, true));
        }
        let empty = CompressionSeries::new(vec![]).unwrap();
        assert!(compress_series(b"garbage", &empty).unwrap().is_empty());
    }

    #[test]
    fn recompression_is_not_idempotent() {
        let jpeg96 = encode_qf(&gradient(48, 40), 96).unwrap();
        let again = compress_series(&jpeg96, &CompressionSeries::new(vec![96]).unwrap()).unwrap();
        assert_ne!(again[0].1, jpeg96);
    }
}
