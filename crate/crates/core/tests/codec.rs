// Our encoder's output must decode with an independent decoder, and our
// decoder must read what an independent encoder writes.

use genbias::formats::{estimate_qf, parse_jpeg_meta};
use genbias::transcode::{decode, encode_png, encode_qf, Channels, Raster};
use image::codecs::jpeg::JpegEncoder;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mae(a: &[u8], b: &[u8]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| f64::from(x.abs_diff(y))).sum::<f64>() / a.len() as f64
}

fn reference_decode(bytes: &[u8]) -> Vec<u8> {
    image::load_from_memory(bytes).unwrap().to_rgb8().into_raw()
}

fn gray_noise(w: u32, h: u32, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Vec::new();
    for _ in 0..w * h {
        let v = rng.next_u32() as u8;
        s.extend([v, v, v]);
    }
    Raster::new(w, h, Channels::Rgb, s).unwrap()
}

// Chroma upsampling is replication here and interpolation in the reference,
// so colour agreement is checked on sizes where that difference averages out.
#[test]
fn reference_decoder_reads_our_colour_jpegs() {
    for (w, h) in [(1, 1), (64, 48), (100, 37), (257, 129)] {
        let img = genbias::synth::gradient(w, h, 3).unwrap();
        for q in [50, 90, 100] {
            let bytes = encode_qf(&img, q).unwrap();
            let theirs = reference_decode(&bytes);
            let ours = decode(&bytes).unwrap();
            assert!(mae(ours.samples(), &theirs) <= 1.0, "{w}x{h} q{q}");
        }
    }
}

#[test]
fn reference_decoder_matches_on_gray_at_odd_sizes() {
    for (w, h) in [(7, 13), (9, 1), (33, 17), (15, 16)] {
        let img = gray_noise(w, h, u64::from(w * h));
        for q in [50, 90, 100] {
            let bytes = encode_qf(&img, q).unwrap();
            let ours = decode(&bytes).unwrap();
            assert!(mae(ours.samples(), &reference_decode(&bytes)) <= 0.5, "{w}x{h} q{q}");
        }
    }
}

#[test]
fn q100_is_near_lossless_on_gray_and_smooth_rasters() {
    let rasters = [
        gray_noise(32, 24, 1),
        gray_noise(17, 9, 2),
        genbias::synth::gradient(80, 60, 4).unwrap(),
    ];
    for img in rasters {
        let back = reference_decode(&encode_qf(&img, 100).unwrap());
        assert!(mae(img.samples(), &back) <= 2.0);
    }
}

#[test]
fn we_read_reference_jpegs_and_their_quality() {
    let img = genbias::synth::gradient(48, 40, 8).unwrap();
    for q in [30, 75, 96] {
        let mut bytes = Vec::new();
        JpegEncoder::new_with_quality(&mut bytes, q)
            .encode(img.samples(), 48, 40, image::ExtendedColorType::Rgb8)
            .unwrap();
        let header = parse_jpeg_meta(&bytes).unwrap();
        assert_eq!(estimate_qf(&header.tables).qf, q);
        let ours = decode(&bytes).unwrap();
        assert!(mae(ours.samples(), &reference_decode(&bytes)) <= 1.0);
    }
}

#[test]
fn png_round_trip_is_exact_and_readable_elsewhere() {
    let img = genbias::synth::gradient(31, 29, 6).unwrap();
    let bytes = encode_png(&img).unwrap();
    assert_eq!(decode(&bytes).unwrap().samples(), img.samples());
    assert_eq!(reference_decode(&bytes), img.samples());
}
