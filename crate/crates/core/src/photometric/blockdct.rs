//! 8x8 block DCT with standard-table quantization, the compression emulator core.

use std::sync::OnceLock;

/// Standard base luminance quantization table, row-major.
pub const BASE_LUMA_QTABLE: [f64; 64] = [
    16.0, 11.0, 10.0, 16.0, 24.0, 40.0, 51.0, 61.0, //
    12.0, 12.0, 14.0, 19.0, 26.0, 58.0, 60.0, 55.0, //
    14.0, 13.0, 16.0, 24.0, 40.0, 57.0, 69.0, 56.0, //
    14.0, 17.0, 22.0, 29.0, 51.0, 87.0, 80.0, 62.0, //
    18.0, 22.0, 37.0, 56.0, 68.0, 109.0, 103.0, 77.0, //
    24.0, 35.0, 55.0, 64.0, 81.0, 104.0, 113.0, 92.0, //
    49.0, 64.0, 78.0, 87.0, 103.0, 121.0, 120.0, 101.0, //
    72.0, 92.0, 95.0, 98.0, 112.0, 100.0, 103.0, 99.0,
];

/// Scales the base table by quality: entry = clamp(round(T * 50 / q), 1, 255).
pub fn scaled_qtable(quality: u32) -> [f64; 64] {
    assert!(quality >= 1, "quality must be at least 1");
    let scale = 50.0 / quality as f64;
    let mut out = [0.0; 64];
    for (o, &t) in out.iter_mut().zip(&BASE_LUMA_QTABLE) {
        *o = (t * scale).round().clamp(1.0, 255.0);
    }
    out
}

/// Orthonormal DCT-II basis: A[u][x] = C(u)/2 * cos((2x+1) u pi / 16).
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut a = [[0.0; 8]; 8];
        for (u, row) in a.iter_mut().enumerate() {
            let cu = if u == 0 { 1.0 / 2.0_f64.sqrt() } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = 0.5 * cu * (((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI) / 16.0).cos();
            }
        }
        a
    })
}

/// Forward 8x8 DCT-II, separable: F = A f A^T.
pub fn fdct8x8(block: &[f64; 64]) -> [f64; 64] {
    let a = basis();
    let mut rows = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            let mut sum = 0.0;
            for x in 0..8 {
                sum += a[u][x] * block[y * 8 + x];
            }
            rows[y * 8 + u] = sum;
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            let mut sum = 0.0;
            for y in 0..8 {
                sum += a[v][y] * rows[y * 8 + u];
            }
            out[v * 8 + u] = sum;
        }
    }
    out
}

/// Inverse 8x8 DCT: f = A^T F A.
pub fn idct8x8(coeffs: &[f64; 64]) -> [f64; 64] {
    let a = basis();
    let mut rows = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            let mut sum = 0.0;
            for u in 0..8 {
                sum += a[u][x] * coeffs[v * 8 + u];
            }
            rows[v * 8 + x] = sum;
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut sum = 0.0;
            for v in 0..8 {
                sum += a[v][y] * rows[v * 8 + x];
            }
            out[y * 8 + x] = sum;
        }
    }
    out
}

/// Full per-block path: DCT, quantize by the scaled table, dequantize, inverse DCT.
///
/// Input samples are in the shifted 255-scale domain (about [-128, 128]).
pub fn quantize_roundtrip_block(block: &[f64; 64], quality: u32) -> [f64; 64] {
    let qtable = scaled_qtable(quality);
    let mut coeffs = fdct8x8(block);
    for (c, &q) in coeffs.iter_mut().zip(&qtable) {
        *c = (*c / q).round() * q;
    }
    idct8x8(&coeffs)
}
