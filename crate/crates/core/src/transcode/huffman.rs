//! Huffman tables: the standard example tables for encoding and a canonical
//! decoder for arbitrary DHT segments.

use crate::error::{Error, Result};

pub struct HuffmanSpec {
    pub bits: [u8; 16],
    pub values: &'static [u8],
}

pub const DC_LUMA: HuffmanSpec = HuffmanSpec {
    bits: [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0],
    values: &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
};

pub const DC_CHROMA: HuffmanSpec = HuffmanSpec {
    bits: [0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0],
    values: &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
};

pub const AC_LUMA: HuffmanSpec = HuffmanSpec {
    bits: [0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d],
    values: &[
        0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61,
        0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52,
        0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25,
        0x26, 0x27, 0x28, 0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45,
        0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64,
        0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83,
        0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99,
        0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6,
        0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3,
        0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8,
        0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa,
    ],
};

pub const AC_CHROMA: HuffmanSpec = HuffmanSpec {
    bits: [0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77],
    values: &[
        0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61,
        0x71, 0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33,
        0x52, 0xf0, 0x15, 0x62, 0x72, 0xd1, 0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18,
        0x19, 0x1a, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44,
        0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63,
        0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a,
        0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97,
        0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4,
        0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca,
        0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7,
        0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa,
    ],
};

/// Assigns canonical codes: `(code, length)` per symbol in value order.
fn canonical_codes(bits: &[u8; 16]) -> Vec<(u16, u8)> {
    let mut out = Vec::new();
    let mut code = 0u16;
    for (len_minus_1, &count) in bits.iter().enumerate() {
        for _ in 0..count {
            out.push((code, len_minus_1 as u8 + 1));
            code += 1;
        }
        code <<= 1;
    }
    out
}

/// Symbol to `(code, length)` lookup for the encoder.
pub struct EncodeTable {
    codes: [(u16, u8); 256],
}

impl EncodeTable {
    pub fn new(spec: &HuffmanSpec) -> Self {
        let mut codes = [(0u16, 0u8); 256];
        for (&sym, code) in spec.values.iter().zip(canonical_codes(&spec.bits)) {
            codes[usize::from(sym)] = code;
        }
        EncodeTable { codes }
    }

    #[inline]
    pub fn code(&self, symbol: u8) -> (u16, u8) {
        let c = self.codes[usize::from(symbol)];
        debug_assert!(c.1 > 0, "symbol {symbol:#x} has no code");
        c
    }
}

/// Canonical Huffman decoder (JPEG Annex F.2.2.3).
#[derive(Clone, Debug)]
pub struct DecodeTable {
    max_code: [i32; 17],
    val_ptr: [i32; 17],
    min_code: [i32; 17],
    values: Vec<u8>,
}

impl DecodeTable {
    pub fn new(bits: &[u8; 16], values: &[u8]) -> Result<Self> {
        let total: usize = bits.iter().map(|&b| usize::from(b)).sum();
        if total != values.len() || total > 256 {
            return Err(Error::malformed("Huffman table size mismatch"));
        }
        let mut max_code = [-1i32; 17];
        let mut val_ptr = [0i32; 17];
        let mut min_code = [0i32; 17];
        let mut code = 0i32;
        let mut k = 0i32;
        for len in 1..=16 {
            let n = i32::from(bits[len - 1]);
            if n > 0 {
                val_ptr[len] = k;
                min_code[len] = code;
                code += n;
                k += n;
                max_code[len] = code - 1;
                if code > (1 << len) {
                    return Err(Error::malformed("over-subscribed Huffman table"));
                }
            }
            code <<= 1;
        }
        Ok(DecodeTable {
            max_code,
            val_ptr,
            min_code,
            values: values.to_vec(),
        })
    }

    /// Decodes one symbol by pulling bits one at a time.
    pub fn decode(&self, mut next_bit: impl FnMut() -> Result<u16>) -> Result<u8> {
        let mut code = 0i32;
        for len in 1..=16 {
            code = (code << 1) | i32::from(next_bit()?);
            if code <= self.max_code[len] {
                let idx = self.val_ptr[len] + code - self.min_code[len];
                return Ok(self.values[idx as usize]);
            }
        }
        Err(Error::malformed("invalid Huffman code"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_tables_are_consistent() {
        for spec in [&DC_LUMA, &DC_CHROMA, &AC_LUMA, &AC_CHROMA] {
            let n: usize = spec.bits.iter().map(|&b| usize::from(b)).sum();
            assert_eq!(n, spec.values.len());
            DecodeTable::new(&spec.bits, spec.values).unwrap();
        }
    }

    #[test]
    fn encode_then_decode_every_symbol() {
        for spec in [&DC_LUMA, &AC_LUMA, &AC_CHROMA] {
            let enc = EncodeTable::new(spec);
            let dec = DecodeTable::new(&spec.bits, spec.values).unwrap();
            for &sym in spec.values {
                let (code, len) = enc.code(sym);
                let mut i = len;
                let got = dec
                    .decode(|| {
                        i -= 1;
                        Ok((code >> i) & 1)
                    })
                    .unwrap();
                assert_eq!(got, sym);
            }
        }
    }
}
