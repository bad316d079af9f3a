//! JPEG marker-segment walker and header parser.

use crate::error::{Error, Result};
use crate::formats::tables::{QuantTables, ZIGZAG};

pub const SOI: u8 = 0xD8;
pub const EOI: u8 = 0xD9;
pub const SOS: u8 = 0xDA;
pub const DQT: u8 = 0xDB;
pub const DHT: u8 = 0xC4;
pub const DRI: u8 = 0xDD;
pub const SOF0: u8 = 0xC0;
pub const SOF1: u8 = 0xC1;
pub const SOF2: u8 = 0xC2;
pub const RST0: u8 = 0xD0;
pub const RST7: u8 = 0xD7;

/// One marker segment. `data` excludes the marker and the length field.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub marker: u8,
    pub data: &'a [u8],
    /// Offset of the first byte after this segment.
    pub end: usize,
}

/// Iterates marker segments from just after SOI up to and including the
/// first SOS (or EOI). Entropy-coded data is not traversed.
pub struct Segments<'a> {
    bytes: &'a [u8],
    pos: usize,
    done: bool,
}

impl<'a> Segments<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        if bytes.len() < 2 || bytes[0] != 0xFF || bytes[1] != SOI {
            return Err(Error::malformed("missing start-of-image marker"));
        }
        Ok(Segments {
            bytes,
            pos: 2,
            done: false,
        })
    }

    /// Continues walking from `pos`, which must point at a marker.
    pub fn resume(bytes: &'a [u8], pos: usize) -> Self {
        Segments {
            bytes,
            pos,
            done: false,
        }
    }
}

impl<'a> Iterator for Segments<'a> {
    type Item = Result<Segment<'a>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let b = self.bytes;
        if self.pos >= b.len() || b[self.pos] != 0xFF {
            self.done = true;
            return Some(Err(if self.pos >= b.len() {
                Error::malformed("stream ends before start of scan")
            } else {
                Error::malformed(format!("expected marker at offset {}", self.pos))
            }));
        }
        // Fill bytes: any number of 0xFF may precede a marker code.
        while self.pos < b.len() && b[self.pos] == 0xFF {
            self.pos += 1;
        }
        let Some(&marker) = b.get(self.pos) else {
            self.done = true;
            return Some(Err(Error::malformed("truncated marker")));
        };
        self.pos += 1;
        if marker == EOI {
            self.done = true;
            return Some(Ok(Segment {
                marker,
                data: &[],
                end: self.pos,
            }));
        }
        if (RST0..=RST7).contains(&marker) || marker == 0x01 {
            return Some(Ok(Segment {
                marker,
                data: &[],
                end: self.pos,
            }));
        }
        if self.pos + 2 > b.len() {
            self.done = true;
            return Some(Err(Error::malformed("truncated segment length")));
        }
        let len = usize::from(u16::from_be_bytes([b[self.pos], b[self.pos + 1]]));
        if len < 2 || self.pos + len > b.len() {
            self.done = true;
            return Some(Err(Error::malformed(format!(
                "segment 0x{marker:02X} truncated"
            ))));
        }
        let data = &b[self.pos + 2..self.pos + len];
        self.pos += len;
        if marker == SOS {
            self.done = true;
        }
        Some(Ok(Segment {
            marker,
            data,
            end: self.pos,
        }))
    }
}

/// Parses a DQT payload into `slots`, converting to natural order.
/// Later definitions of the same id replace earlier ones.
pub fn read_dqt(data: &[u8], slots: &mut [Option<[u16; 64]>; 4]) -> Result<()> {
    let mut i = 0;
    while i < data.len() {
        let pq = data[i] >> 4;
        let tq = usize::from(data[i] & 0x0F);
        i += 1;
        if tq > 3 {
            return Err(Error::malformed(format!("quantization table id {tq}")));
        }
        let width = match pq {
            0 => 1,
            1 => 2,
            _ => return Err(Error::malformed(format!("quantization precision {pq}"))),
        };
        if i + 64 * width > data.len() {
            return Err(Error::malformed("quantization table truncated"));
        }
        let mut table = [0u16; 64];
        for (k, &natural) in ZIGZAG.iter().enumerate() {
            let v = if width == 1 {
                u16::from(data[i + k])
            } else {
                u16::from_be_bytes([data[i + 2 * k], data[i + 2 * k + 1]])
            };
            if v == 0 {
                return Err(Error::malformed("zero quantizer"));
            }
            table[natural] = v;
        }
        slots[tq] = Some(table);
        i += 64 * width;
    }
    Ok(())
}

/// One component entry of a frame header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameComponent {
    pub id: u8,
    pub h: u8,
    pub v: u8,
    pub tq: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameHeader {
    pub marker: u8,
    pub precision: u8,
    pub width: u32,
    pub height: u32,
    pub components: Vec<FrameComponent>,
}

impl FrameHeader {
    pub fn progressive(&self) -> bool {
        self.marker == SOF2
    }
}

/// Parses a start-of-frame payload. Rejects coding processes other than
/// Huffman baseline, extended sequential and progressive.
pub fn read_sof(marker: u8, data: &[u8]) -> Result<FrameHeader> {
    match marker {
        SOF0 | SOF1 | SOF2 => {}
        0xC3 | 0xC7 | 0xCB | 0xCF => return Err(Error::unsupported("lossless JPEG")),
        0xC5 | 0xC6 => return Err(Error::unsupported("hierarchical JPEG")),
        _ => return Err(Error::unsupported("arithmetic-coded JPEG")),
    }
    if data.len() < 6 {
        return Err(Error::malformed("frame header truncated"));
    }
    let precision = data[0];
    if precision != 8 {
        return Err(Error::unsupported(format!("{precision}-bit samples")));
    }
    let height = u32::from(u16::from_be_bytes([data[1], data[2]]));
    let width = u32::from(u16::from_be_bytes([data[3], data[4]]));
    let nf = usize::from(data[5]);
    if width == 0 {
        return Err(Error::malformed("zero frame width"));
    }
    if height == 0 {
        return Err(Error::unsupported("height deferred to DNL marker"));
    }
    if nf == 0 || data.len() < 6 + 3 * nf {
        return Err(Error::malformed("frame component list truncated"));
    }
    let components = (0..nf)
        .map(|c| {
            let o = 6 + 3 * c;
            FrameComponent {
                id: data[o],
                h: data[o + 1] >> 4,
                v: data[o + 1] & 0x0F,
                tq: data[o + 2],
            }
        })
        .collect::<Vec<_>>();
    for c in &components {
        if !(1..=4).contains(&c.h) || !(1..=4).contains(&c.v) || c.tq > 3 {
            return Err(Error::malformed("invalid component parameters"));
        }
    }
    Ok(FrameHeader {
        marker,
        precision,
        width,
        height,
        components,
    })
}

/// Header facts read from a JPEG without entropy decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JpegHeader {
    pub width: u32,
    pub height: u32,
    pub components: u8,
    pub progressive: bool,
    pub tables: QuantTables,
}

fn to_8bit(table: &[u16; 64]) -> Result<[u8; 64]> {
    let mut out = [0u8; 64];
    for (dst, &v) in out.iter_mut().zip(table) {
        *dst = u8::try_from(v)
            .map_err(|_| Error::unsupported(format!("quantizer {v} exceeds 255")))?;
    }
    Ok(out)
}

/// Reads dimensions and the quantization tables referenced by the first
/// frame. Tables are those defined before the first scan.
pub fn parse_jpeg_meta(bytes: &[u8]) -> Result<JpegHeader> {
    let mut slots: [Option<[u16; 64]>; 4] = [None; 4];
    let mut frame: Option<FrameHeader> = None;
    for seg in Segments::new(bytes)? {
        let seg = seg?;
        match seg.marker {
            DQT => read_dqt(seg.data, &mut slots)?,
            0xC0..=0xCF if seg.marker != DHT && seg.marker != 0xC8 && seg.marker != 0xCC => {
                if frame.is_none() {
                    frame = Some(read_sof(seg.marker, seg.data)?);
                }
            }
            SOS | EOI => break,
            _ => {}
        }
    }
    let frame = frame.ok_or_else(|| Error::malformed("missing frame header"))?;
    let table_for = |c: &FrameComponent| -> Result<[u8; 64]> {
        let t = slots[usize::from(c.tq)]
            .as_ref()
            .ok_or_else(|| Error::malformed(format!("quantization table {} undefined", c.tq)))?;
        to_8bit(t)
    };
    let luma = table_for(&frame.components[0])?;
    let chroma = match frame.components.get(1) {
        Some(c) => Some(table_for(c)?),
        None => None,
    };
    Ok(JpegHeader {
        width: frame.width,
        height: frame.height,
        components: frame.components.len() as u8,
        progressive: frame.progressive(),
        tables: QuantTables { luma, chroma },
    })
}
