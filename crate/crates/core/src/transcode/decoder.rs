//! Baseline and extended-sequential Huffman JPEG decoder.
//!
//! Chroma is upsampled by sample replication. Three-component streams are
//! treated as YCbCr.

use super::dct;
use super::huffman::DecodeTable;
use super::raster::{round_half_up, Channels, Raster};
use crate::error::{Error, Result};
use crate::formats::jpeg::{
    read_dqt, read_sof, FrameHeader, Segments, DHT, DQT, DRI, EOI, RST0, RST7, SOF0, SOF1, SOF2,
    SOS,
};
use crate::formats::tables::ZIGZAG;

/// Reads entropy-coded bits, undoing byte stuffing. A marker inside the
/// data stops the reader; running past it is a truncation error.
struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    nbits: u32,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8], pos: usize) -> Self {
        BitReader {
            data,
            pos,
            acc: 0,
            nbits: 0,
        }
    }

    fn fill(&mut self) -> Result<()> {
        let Some(&byte) = self.data.get(self.pos) else {
            return Err(Error::malformed("entropy-coded data truncated"));
        };
        if byte == 0xFF {
            match self.data.get(self.pos + 1) {
                Some(0x00) => self.pos += 2,
                Some(_) => return Err(Error::malformed("unexpected marker in scan data")),
                None => return Err(Error::malformed("entropy-coded data truncated")),
            }
        } else {
            self.pos += 1;
        }
        self.acc = (self.acc << 8) | u32::from(byte);
        self.nbits += 8;
        Ok(())
    }

    #[inline]
    fn bit(&mut self) -> Result<u16> {
        if self.nbits == 0 {
            self.fill()?;
        }
        self.nbits -= 1;
        Ok(((self.acc >> self.nbits) & 1) as u16)
    }

    fn bits(&mut self, n: u8) -> Result<i32> {
        let mut v = 0i32;
        for _ in 0..n {
            v = (v << 1) | i32::from(self.bit()?);
        }
        Ok(v)
    }

    /// Discards buffered bits and consumes an expected RSTn marker.
    fn restart(&mut self) -> Result<()> {
        self.acc = 0;
        self.nbits = 0;
        match (self.data.get(self.pos), self.data.get(self.pos + 1)) {
            (Some(0xFF), Some(m)) if (RST0..=RST7).contains(m) => {
                self.pos += 2;
                Ok(())
            }
            _ => Err(Error::malformed("missing restart marker")),
        }
    }

    /// Offset of the next marker after the scan data.
    fn marker_offset(&self) -> Result<usize> {
        let mut p = self.pos;
        while p + 1 < self.data.len() {
            if self.data[p] == 0xFF && self.data[p + 1] != 0 && !(RST0..=RST7).contains(&self.data[p + 1]) {
                return Ok(p);
            }
            p += 1;
        }
        Err(Error::malformed("no marker after scan data"))
    }
}

#[inline]
fn extend(v: i32, size: u8) -> i32 {
    if size == 0 {
        0
    } else if v < (1 << (size - 1)) {
        v - (1 << size) + 1
    } else {
        v
    }
}

struct ComponentState {
    h: usize,
    v: usize,
    tq: usize,
    /// Samples padded to whole MCUs.
    stride: usize,
    plane: Vec<u8>,
    pred: i32,
}

struct Decoder {
    frame: FrameHeader,
    comps: Vec<ComponentState>,
    hmax: usize,
    vmax: usize,
    mcus_x: usize,
    mcus_y: usize,
}

impl Decoder {
    fn new(frame: FrameHeader) -> Result<Self> {
        match frame.components.len() {
            1 | 3 => {}
            n => return Err(Error::unsupported(format!("{n}-component JPEG"))),
        }
        let hmax = frame.components.iter().map(|c| usize::from(c.h)).max().unwrap_or(1);
        let vmax = frame.components.iter().map(|c| usize::from(c.v)).max().unwrap_or(1);
        let mcus_x = (frame.width as usize).div_ceil(8 * hmax);
        let mcus_y = (frame.height as usize).div_ceil(8 * vmax);
        let comps = frame
            .components
            .iter()
            .map(|c| {
                let (h, v) = (usize::from(c.h), usize::from(c.v));
                let stride = mcus_x * h * 8;
                ComponentState {
                    h,
                    v,
                    tq: usize::from(c.tq),
                    stride,
                    plane: vec![0; stride * mcus_y * v * 8],
                    pred: 0,
                }
            })
            .collect();
        Ok(Decoder {
            frame,
            comps,
            hmax,
            vmax,
            mcus_x,
            mcus_y,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn decode_block(
        reader: &mut BitReader<'_>,
        comp: &mut ComponentState,
        quant: &[u16; 64],
        dc: &DecodeTable,
        ac: &DecodeTable,
        bx: usize,
        by: usize,
    ) -> Result<()> {
        let mut coeffs = [0f64; 64];
        let size = dc.decode(|| reader.bit())?;
        if size > 11 {
            return Err(Error::malformed("DC magnitude category out of range"));
        }
        let diff = extend(reader.bits(size)?, size);
        comp.pred += diff;
        coeffs[0] = f64::from(comp.pred) * f64::from(quant[0]);
        let mut k = 1;
        while k < 64 {
            let rs = ac.decode(|| reader.bit())?;
            let (run, size) = (usize::from(rs >> 4), rs & 0x0F);
            if size == 0 {
                if run == 15 {
                    k += 16;
                    continue;
                }
                break;
            }
            k += run;
            if k > 63 {
                return Err(Error::malformed("AC run past end of block"));
            }
            let n = ZIGZAG[k];
            coeffs[n] = f64::from(extend(reader.bits(size)?, size)) * f64::from(quant[n]);
            k += 1;
        }
        let px = dct::inverse(&coeffs);
        let (x0, y0) = (bx * 8, by * 8);
        for y in 0..8 {
            let row = (y0 + y) * comp.stride + x0;
            for x in 0..8 {
                comp.plane[row + x] = round_half_up(px[y * 8 + x] + 128.0);
            }
        }
        Ok(())
    }

    fn decode_scan(
        &mut self,
        bytes: &[u8],
        header: &[u8],
        start: usize,
        quant: &[Option<[u16; 64]>; 4],
        dc_tables: &[Option<DecodeTable>; 4],
        ac_tables: &[Option<DecodeTable>; 4],
        restart_interval: usize,
    ) -> Result<usize> {
        let ns = usize::from(*header.first().ok_or_else(|| Error::malformed("empty SOS"))?);
        if ns == 0 || header.len() < 1 + 2 * ns + 3 {
            return Err(Error::malformed("scan header truncated"));
        }
        let mut members = Vec::with_capacity(ns);
        for i in 0..ns {
            let id = header[1 + 2 * i];
            let td = usize::from(header[2 + 2 * i] >> 4);
            let ta = usize::from(header[2 + 2 * i] & 0x0F);
            let idx = self
                .frame
                .components
                .iter()
                .position(|c| c.id == id)
                .ok_or_else(|| Error::malformed(format!("scan references unknown component {id}")))?;
            let q = quant
                .get(self.comps[idx].tq)
                .and_then(Option::as_ref)
                .ok_or_else(|| Error::malformed("quantization table undefined"))?;
            let dc = dc_tables
                .get(td)
                .and_then(Option::as_ref)
                .ok_or_else(|| Error::malformed("DC Huffman table undefined"))?;
            let ac = ac_tables
                .get(ta)
                .and_then(Option::as_ref)
                .ok_or_else(|| Error::malformed("AC Huffman table undefined"))?;
            members.push((idx, *q, dc, ac));
        }
        for c in &mut self.comps {
            c.pred = 0;
        }

        let mut reader = BitReader::new(bytes, start);
        let mut units_done = 0usize;
        let mut on_unit = |reader: &mut BitReader<'_>, comps: &mut [ComponentState]| -> Result<()> {
            if restart_interval > 0 && units_done > 0 && units_done % restart_interval == 0 {
                reader.restart()?;
                for c in comps.iter_mut() {
                    c.pred = 0;
                }
            }
            units_done += 1;
            Ok(())
        };

        if ns == 1 {
            let (idx, q, dc, ac) = &members[0];
            let comp = &self.comps[*idx];
            let cw = (self.frame.width as usize * comp.h).div_ceil(self.hmax);
            let ch = (self.frame.height as usize * comp.v).div_ceil(self.vmax);
            for by in 0..ch.div_ceil(8) {
                for bx in 0..cw.div_ceil(8) {
                    on_unit(&mut reader, &mut self.comps)?;
                    Self::decode_block(&mut reader, &mut self.comps[*idx], q, dc, ac, bx, by)?;
                }
            }
        } else {
            for my in 0..self.mcus_y {
                for mx in 0..self.mcus_x {
                    on_unit(&mut reader, &mut self.comps)?;
                    for (idx, q, dc, ac) in &members {
                        let (h, v) = (self.comps[*idx].h, self.comps[*idx].v);
                        for y in 0..v {
                            for x in 0..h {
                                Self::decode_block(
                                    &mut reader,
                                    &mut self.comps[*idx],
                                    q,
                                    dc,
                                    ac,
                                    mx * h + x,
                                    my * v + y,
                                )?;
                            }
                        }
                    }
                }
            }
        }
        reader.marker_offset()
    }

    fn finish(self) -> Raster {
        let (w, h) = (self.frame.width as usize, self.frame.height as usize);
        let sample = |c: &ComponentState, x: usize, y: usize| {
            c.plane[(y * c.v / self.vmax) * c.stride + x * c.h / self.hmax]
        };
        let mut out = Vec::with_capacity(w * h * 3);
        if self.comps.len() == 1 {
            let c = &self.comps[0];
            for y in 0..h {
                for x in 0..w {
                    let v = sample(c, x, y);
                    out.extend([v, v, v]);
                }
            }
        } else {
            let (yc, cb, cr) = (&self.comps[0], &self.comps[1], &self.comps[2]);
            for y in 0..h {
                for x in 0..w {
                    let l = f64::from(sample(yc, x, y));
                    let b = f64::from(sample(cb, x, y)) - 128.0;
                    let r = f64::from(sample(cr, x, y)) - 128.0;
                    out.push(round_half_up(l + 1.402 * r));
                    out.push(round_half_up(l - 0.344_136_286 * b - 0.714_136_286 * r));
                    out.push(round_half_up(l + 1.772 * b));
                }
            }
        }
        Raster::new(self.frame.width, self.frame.height, Channels::Rgb, out)
            .expect("decoder output matches frame dimensions")
    }
}

fn read_dht(data: &[u8], dc: &mut [Option<DecodeTable>; 4], ac: &mut [Option<DecodeTable>; 4]) -> Result<()> {
    let mut i = 0;
    while i < data.len() {
        if i + 17 > data.len() {
            return Err(Error::malformed("Huffman table truncated"));
        }
        let class = data[i] >> 4;
        let id = usize::from(data[i] & 0x0F);
        if class > 1 || id > 3 {
            return Err(Error::malformed("invalid Huffman table id"));
        }
        let mut bits = [0u8; 16];
        bits.copy_from_slice(&data[i + 1..i + 17]);
        let n: usize = bits.iter().map(|&b| usize::from(b)).sum();
        if i + 17 + n > data.len() {
            return Err(Error::malformed("Huffman table truncated"));
        }
        let table = DecodeTable::new(&bits, &data[i + 17..i + 17 + n])?;
        if class == 0 {
            dc[id] = Some(table);
        } else {
            ac[id] = Some(table);
        }
        i += 17 + n;
    }
    Ok(())
}

/// Decodes a sequential Huffman JPEG to RGB.
pub fn decode_jpeg(bytes: &[u8]) -> Result<Raster> {
    let mut quant: [Option<[u16; 64]>; 4] = [None; 4];
    let mut dc_tables: [Option<DecodeTable>; 4] = Default::default();
    let mut ac_tables: [Option<DecodeTable>; 4] = Default::default();
    let mut restart_interval = 0usize;
    let mut decoder: Option<Decoder> = None;
    let mut scans = 0;

    let mut segments = Segments::new(bytes)?;
    loop {
        let mut next_pos = None;
        for seg in segments.by_ref() {
            let seg = seg?;
            match seg.marker {
                DQT => read_dqt(seg.data, &mut quant)?,
                DHT => read_dht(seg.data, &mut dc_tables, &mut ac_tables)?,
                DRI => {
                    if seg.data.len() < 2 {
                        return Err(Error::malformed("restart interval truncated"));
                    }
                    restart_interval = usize::from(u16::from_be_bytes([seg.data[0], seg.data[1]]));
                }
                SOF2 => return Err(Error::unsupported("progressive JPEG decoding")),
                SOF0 | SOF1 => {
                    if decoder.is_some() {
                        return Err(Error::malformed("second frame header"));
                    }
                    decoder = Some(Decoder::new(read_sof(seg.marker, seg.data)?)?);
                }
                0xC3 | 0xC5..=0xC7 | 0xC9..=0xCB | 0xCD..=0xCF => {
                    read_sof(seg.marker, seg.data)?;
                }
                SOS => {
                    let d = decoder
                        .as_mut()
                        .ok_or_else(|| Error::malformed("scan before frame header"))?;
                    next_pos = Some(d.decode_scan(
                        bytes,
                        seg.data,
                        seg.end,
                        &quant,
                        &dc_tables,
                        &ac_tables,
                        restart_interval,
                    )?);
                    scans += 1;
                }
                EOI => {
                    let d = decoder.ok_or_else(|| Error::malformed("missing frame header"))?;
                    if scans == 0 {
                        return Err(Error::malformed("no scan data"));
                    }
                    return Ok(d.finish());
                }
                _ => {}
            }
        }
        match next_pos {
            Some(p) => segments = Segments::resume(bytes, p),
            None => return Err(Error::malformed("stream ended without EOI")),
        }
    }
}
