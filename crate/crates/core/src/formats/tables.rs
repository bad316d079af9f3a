//! Quantization tables and quality-factor estimation.
//!
//! Tables are always stored in natural (row-major) order. Streams carry them
//! in zig-zag order; [`ZIGZAG`] converts between the two.

use crate::error::{Error, Result};

/// `ZIGZAG[k]` is the natural-order index of the `k`-th coefficient in
/// zig-zag scan order.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27,
    20, 13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58,
    59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

/// Reference tables of the baseline encoder that defines the usual
/// quality-factor scale.
pub struct StandardTableSet {
    pub base_luma: [u8; 64],
    pub base_chroma: [u8; 64],
}

pub const STANDARD_TABLES: StandardTableSet = StandardTableSet {
    base_luma: [
        16, 11, 10, 16, 24, 40, 51, 61, //
        12, 12, 14, 19, 26, 58, 60, 55, //
        14, 13, 16, 24, 40, 57, 69, 56, //
        14, 17, 22, 29, 51, 87, 80, 62, //
        18, 22, 37, 56, 68, 109, 103, 77, //
        24, 35, 55, 64, 81, 104, 113, 92, //
        49, 64, 78, 87, 103, 121, 120, 101, //
        72, 92, 95, 98, 112, 100, 103, 99,
    ],
    base_chroma: [
        17, 18, 24, 47, 99, 99, 99, 99, //
        18, 21, 26, 66, 99, 99, 99, 99, //
        24, 26, 56, 99, 99, 99, 99, 99, //
        47, 66, 99, 99, 99, 99, 99, 99, //
        99, 99, 99, 99, 99, 99, 99, 99, //
        99, 99, 99, 99, 99, 99, 99, 99, //
        99, 99, 99, 99, 99, 99, 99, 99, //
        99, 99, 99, 99, 99, 99, 99, 99,
    ],
};

/// Luminance and (optional) chrominance quantization matrices in natural order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuantTables {
    pub luma: [u8; 64],
    pub chroma: Option<[u8; 64]>,
}

/// Result of matching a table pair against the standard quality scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QualityEstimate {
    pub qf: u8,
    pub exact: bool,
    pub distance: u32,
}

/// The percentage scale applied to the base tables for a quality factor.
pub fn quality_scale(qf: u8) -> Result<u32> {
    if !(1..=100).contains(&qf) {
        return Err(Error::Domain(format!("quality factor {qf} outside [1, 100]")));
    }
    let qf = u32::from(qf);
    Ok(if qf < 50 { 5000 / qf } else { 200 - 2 * qf })
}

fn scale_table(base: &[u8; 64], scale: u32) -> [u8; 64] {
    let mut out = [0u8; 64];
    for (dst, &b) in out.iter_mut().zip(base) {
        *dst = ((u32::from(b) * scale + 50) / 100).clamp(1, 255) as u8;
    }
    out
}

/// Tables the standard encoder embeds at quality `qf`.
pub fn scale_tables(qf: u8) -> Result<QuantTables> {
    let scale = quality_scale(qf)?;
    Ok(QuantTables {
        luma: scale_table(&STANDARD_TABLES.base_luma, scale),
        chroma: Some(scale_table(&STANDARD_TABLES.base_chroma, scale)),
    })
}

fn l1(a: &[u8; 64], b: &[u8; 64]) -> u32 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| u32::from(x.abs_diff(y)))
        .sum()
}

/// Nearest standard quality factor by L1 distance over all present tables.
///
/// Ties resolve toward the larger quality factor.
pub fn estimate_qf(tables: &QuantTables) -> QualityEstimate {
    let mut best = QualityEstimate {
        qf: 1,
        exact: false,
        distance: u32::MAX,
    };
    for qf in 1..=100u8 {
        let scale = quality_scale(qf).expect("qf in range");
        let mut distance = l1(&tables.luma, &scale_table(&STANDARD_TABLES.base_luma, scale));
        if let Some(chroma) = &tables.chroma {
            distance += l1(chroma, &scale_table(&STANDARD_TABLES.base_chroma, scale));
        }
        if distance <= best.distance {
            best.qf = qf;
            best.distance = distance;
        }
    }
    best.exact = best.distance == 0;
    best
}
