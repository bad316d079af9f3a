//! Separable floating-point 8x8 DCT-II and its inverse.

use std::sync::OnceLock;

/// `basis[u][x] = C(u)/2 * cos((2x+1)u*pi/16)`
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let c = if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = 0.5
                    * c
                    * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        b
    })
}

// Both transforms accumulate row by row so the inner loops run over
// contiguous lanes; each output still sums its terms in index order.

/// Forward DCT of a level-shifted block in natural order.
pub fn forward(block: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        let row = &mut tmp[y * 8..y * 8 + 8];
        for x in 0..8 {
            let p = block[y * 8 + x];
            for u in 0..8 {
                row[u] += b[u][x] * p;
            }
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        let row = &mut out[v * 8..v * 8 + 8];
        for y in 0..8 {
            let k = b[v][y];
            for u in 0..8 {
                row[u] += k * tmp[y * 8 + u];
            }
        }
    }
    out
}

/// Inverse DCT; output is still level-shifted (centered on zero).
pub fn inverse(coeffs: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        let row = &mut tmp[v * 8..v * 8 + 8];
        for u in 0..8 {
            let c = coeffs[v * 8 + u];
            for x in 0..8 {
                row[x] += b[u][x] * c;
            }
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        let row = &mut out[y * 8..y * 8 + 8];
        for v in 0..8 {
            let k = b[v][y];
            for x in 0..8 {
                row[x] += k * tmp[v * 8 + x];
            }
        }
    }
    out
}
