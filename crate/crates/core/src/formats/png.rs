//! PNG header reader, plus dimension sniffing for a few other containers.

use crate::error::{Error, Result};

pub const SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1A, b'\n'];

/// Width and height from the IHDR chunk, which must come first.
pub fn parse_png_meta(bytes: &[u8]) -> Result<(u32, u32)> {
    if bytes.len() < 8 || bytes[..8] != SIGNATURE {
        return Err(Error::malformed("bad PNG signature"));
    }
    if bytes.len() < 8 + 8 + 13 {
        return Err(Error::malformed("PNG header chunk truncated"));
    }
    let be32 = |o: usize| u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let len = be32(8);
    if &bytes[12..16] != b"IHDR" {
        return Err(Error::malformed("IHDR is not the first chunk"));
    }
    if len != 13 {
        return Err(Error::malformed(format!("IHDR length {len}, expected 13")));
    }
    let (width, height) = (be32(16), be32(20));
    if width == 0 || height == 0 {
        return Err(Error::malformed("zero PNG dimension"));
    }
    Ok((width, height))
}

/// GIF and BMP dimensions. These count as `OTHER` containers.
pub(crate) fn sniff_other(bytes: &[u8]) -> Option<Result<(u32, u32)>> {
    if bytes.starts_with(b"GIF87a") || bytes.starts_with(b"GIF89a") {
        if bytes.len() < 10 {
            return Some(Err(Error::malformed("GIF header truncated")));
        }
        let w = u32::from(u16::from_le_bytes([bytes[6], bytes[7]]));
        let h = u32::from(u16::from_le_bytes([bytes[8], bytes[9]]));
        return Some(nonzero(w, h));
    }
    if bytes.starts_with(b"BM") {
        if bytes.len() < 26 {
            return Some(Err(Error::malformed("BMP header truncated")));
        }
        let le = |o: usize| i32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
        return Some(nonzero(le(18).unsigned_abs(), le(22).unsigned_abs()));
    }
    None
}

fn nonzero(w: u32, h: u32) -> Result<(u32, u32)> {
    if w == 0 || h == 0 {
        Err(Error::malformed("zero dimension"))
    } else {
        Ok((w, h))
    }
}

#[cfg(test)]
pub(crate) fn ihdr_only(width: u32, height: u32) -> Vec<u8> {
    let mut out = SIGNATURE.to_vec();
    out.extend(13u32.to_be_bytes());
    out.extend(b"IHDR");
    out.extend(width.to_be_bytes());
    out.extend(height.to_be_bytes());
    out.extend([8, 2, 0, 0, 0]);
    out.extend([0; 4]);
    out
}
