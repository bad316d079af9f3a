//! Baseline sequential JPEG encoder with standard-scaled quantization tables,
//! 4:2:0 chroma and the fixed example Huffman tables.

use super::dct;
use super::huffman::{EncodeTable, HuffmanSpec, AC_CHROMA, AC_LUMA, DC_CHROMA, DC_LUMA};
use super::raster::{Channels, Raster};
use crate::error::{Error, Result};
use crate::formats::jpeg::{DHT, DQT, EOI, SOF0, SOI, SOS};
use crate::formats::tables::{scale_tables, ZIGZAG};

const JFIF_APP0: [u8; 14] = [
    b'J', b'F', b'I', b'F', 0, 1, 1, // version 1.1
    0, 0, 1, 0, 1, // aspect-ratio units, 1:1
    0, 0, // no thumbnail
];

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        BitWriter { out, acc: 0, nbits: 0 }
    }

    #[inline]
    fn put(&mut self, bits: u16, len: u8) {
        if len == 0 {
            return;
        }
        let len = u32::from(len);
        self.acc = (self.acc << len) | (u32::from(bits) & ((1 << len) - 1));
        self.nbits += len;
        while self.nbits >= 8 {
            self.nbits -= 8;
            let byte = (self.acc >> self.nbits) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0);
            }
        }
        self.acc &= (1 << self.nbits) - 1;
    }

    /// Pads the final byte with one-bits.
    fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits as u8;
            self.put((1 << pad) - 1, pad);
        }
        self.out
    }
}

fn segment(out: &mut Vec<u8>, marker: u8, data: &[u8]) {
    out.extend([0xFF, marker]);
    out.extend(((data.len() + 2) as u16).to_be_bytes());
    out.extend(data);
}

fn dht_payload(class_id: u8, spec: &HuffmanSpec) -> Vec<u8> {
    let mut d = vec![class_id];
    d.extend(spec.bits);
    d.extend(spec.values);
    d
}

/// Magnitude category and the low bits that encode `v` in that category.
#[inline]
fn category(v: i32) -> (u8, u16) {
    if v == 0 {
        return (0, 0);
    }
    let size = 32 - v.unsigned_abs().leading_zeros();
    let bits = if v < 0 { v - 1 } else { v };
    (size as u8, (bits as u32 & ((1 << size) - 1)) as u16)
}

struct ComponentCoder {
    dc: EncodeTable,
    ac: EncodeTable,
    quant: [f64; 64],
    pred: i32,
}

impl ComponentCoder {
    fn new(dc: &HuffmanSpec, ac: &HuffmanSpec, quant: &[u8; 64]) -> Self {
        ComponentCoder {
            dc: EncodeTable::new(dc),
            ac: EncodeTable::new(ac),
            quant: quant.map(f64::from),
            pred: 0,
        }
    }

    fn encode_block(&mut self, w: &mut BitWriter, block: &[f64; 64]) {
        let coeffs = dct::forward(block);
        let mut q = [0i32; 64];
        for (k, &n) in ZIGZAG.iter().enumerate() {
            let limit = if k == 0 { 2047 } else { 1023 };
            q[k] = ((coeffs[n] / self.quant[n]).round() as i32).clamp(-limit, limit);
        }

        let diff = q[0] - self.pred;
        self.pred = q[0];
        let (size, bits) = category(diff);
        let (code, len) = self.dc.code(size);
        w.put(code, len);
        w.put(bits, size);

        let mut run = 0u8;
        for &v in &q[1..] {
            if v == 0 {
                run += 1;
                continue;
            }
            while run >= 16 {
                let (code, len) = self.ac.code(0xF0);
                w.put(code, len);
                run -= 16;
            }
            let (size, bits) = category(v);
            let (code, len) = self.ac.code((run << 4) | size);
            w.put(code, len);
            w.put(bits, size);
            run = 0;
        }
        if run > 0 {
            let (code, len) = self.ac.code(0x00);
            w.put(code, len);
        }
    }
}

/// A full-resolution or subsampled component plane with edge replication.
struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y.min(self.height - 1) * self.width + x.min(self.width - 1)]
    }

    /// Level-shifted 8x8 block with top-left corner at `(x0, y0)`.
    fn block(&self, x0: usize, y0: usize) -> [f64; 64] {
        let mut b = [0.0; 64];
        if x0 + 8 <= self.width && y0 + 8 <= self.height {
            for (y, row) in b.chunks_exact_mut(8).enumerate() {
                let start = (y0 + y) * self.width + x0;
                for (d, s) in row.iter_mut().zip(&self.data[start..start + 8]) {
                    *d = s - 128.0;
                }
            }
            return b;
        }
        for y in 0..8 {
            for x in 0..8 {
                b[y * 8 + x] = self.at(x0 + x, y0 + y) - 128.0;
            }
        }
        b
    }

    /// 2x2 box average.
    fn halve(&self) -> Plane {
        let width = self.width.div_ceil(2);
        let height = self.height.div_ceil(2);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let s = self.at(2 * x, 2 * y)
                    + self.at(2 * x + 1, 2 * y)
                    + self.at(2 * x, 2 * y + 1)
                    + self.at(2 * x + 1, 2 * y + 1);
                data.push(s / 4.0);
            }
        }
        Plane { width, height, data }
    }
}

fn ycbcr_planes(img: &Raster) -> [Plane; 3] {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let n = w * h;
    let mut y = Vec::with_capacity(n);
    let mut cb = Vec::with_capacity(n);
    let mut cr = Vec::with_capacity(n);
    for px in img.samples().chunks_exact(3) {
        let (r, g, b) = (f64::from(px[0]), f64::from(px[1]), f64::from(px[2]));
        y.push(0.299 * r + 0.587 * g + 0.114 * b);
        cb.push(-0.168_735_892 * r - 0.331_264_108 * g + 0.5 * b + 128.0);
        cr.push(0.5 * r - 0.418_687_589 * g - 0.081_312_411 * b + 128.0);
    }
    let plane = |data| Plane { width: w, height: h, data };
    [plane(y), plane(cb), plane(cr)]
}

/// Encodes `img` as a baseline JPEG whose tables are exactly
/// `scale_tables(qf)`. Gray rasters produce a single-component stream.
pub fn encode_qf(img: &Raster, qf: u8) -> Result<Vec<u8>> {
    let tables = scale_tables(qf)?;
    let chroma_table = tables.chroma.expect("standard tables carry chroma");
    let color = img.channels() == Channels::Rgb;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w > usize::from(u16::MAX) || h > usize::from(u16::MAX) {
        return Err(Error::Domain(format!("{w}x{h} exceeds JPEG dimension limit")));
    }

    let mut out = vec![0xFF, SOI];
    segment(&mut out, 0xE0, &JFIF_APP0);

    let mut dqt = vec![0u8];
    dqt.extend(ZIGZAG.iter().map(|&n| tables.luma[n]));
    if color {
        dqt.push(1);
        dqt.extend(ZIGZAG.iter().map(|&n| chroma_table[n]));
    }
    segment(&mut out, DQT, &dqt);

    let mut sof = vec![8];
    sof.extend((h as u16).to_be_bytes());
    sof.extend((w as u16).to_be_bytes());
    if color {
        sof.extend([3, 1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1]);
    } else {
        sof.extend([1, 1, 0x11, 0]);
    }
    segment(&mut out, SOF0, &sof);

    let mut dht = dht_payload(0x00, &DC_LUMA);
    dht.extend(dht_payload(0x10, &AC_LUMA));
    if color {
        dht.extend(dht_payload(0x01, &DC_CHROMA));
        dht.extend(dht_payload(0x11, &AC_CHROMA));
    }
    segment(&mut out, DHT, &dht);

    if color {
        segment(&mut out, SOS, &[3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0]);
    } else {
        segment(&mut out, SOS, &[1, 1, 0x00, 0, 63, 0]);
    }

    let mut writer = BitWriter::new(out);
    let mut luma = ComponentCoder::new(&DC_LUMA, &AC_LUMA, &tables.luma);
    if color {
        let [y, cb, cr] = ycbcr_planes(img);
        let (cb, cr) = (cb.halve(), cr.halve());
        let mut cb_coder = ComponentCoder::new(&DC_CHROMA, &AC_CHROMA, &chroma_table);
        let mut cr_coder = ComponentCoder::new(&DC_CHROMA, &AC_CHROMA, &chroma_table);
        for my in 0..h.div_ceil(16) {
            for mx in 0..w.div_ceil(16) {
                for (by, bx) in [(0, 0), (0, 8), (8, 0), (8, 8)] {
                    luma.encode_block(&mut writer, &y.block(mx * 16 + bx, my * 16 + by));
                }
                cb_coder.encode_block(&mut writer, &cb.block(mx * 8, my * 8));
                cr_coder.encode_block(&mut writer, &cr.block(mx * 8, my * 8));
            }
        }
    } else {
        let y = Plane {
            width: w,
            height: h,
            data: img.samples().iter().map(|&v| f64::from(v)).collect(),
        };
        for by in 0..h.div_ceil(8) {
            for bx in 0..w.div_ceil(8) {
                luma.encode_block(&mut writer, &y.block(bx * 8, by * 8));
            }
        }
    }

    let mut out = writer.finish();
    out.extend([0xFF, EOI]);
    Ok(out)
}
