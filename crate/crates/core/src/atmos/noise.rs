//! Seeded fractal value noise on a lattice, for procedural fog masks.

use crate::seed::mix64;

/// Lattice value in [0,1) hashed from (seed, octave, cell coordinates).
fn lattice_value(seed: u64, octave: u32, ix: i64, iy: i64) -> f64 {
    let h = mix64(
        seed ^ mix64(u64::from(octave).wrapping_mul(0x9E37_79B9_7F4A_7C15))
            ^ mix64((ix as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
            ^ (iy as u64).wrapping_mul(0x1656_67B1_9E37_79F9),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Quintic fade: zero first and second derivatives at the cell edges.
fn smootherstep(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// One octave of bilinear value noise at a point, cell size in pixels.
fn value_noise_at(seed: u64, octave: u32, x: f64, y: f64, cell: f64) -> f64 {
    let gx = x / cell;
    let gy = y / cell;
    let ix = gx.floor() as i64;
    let iy = gy.floor() as i64;
    let tx = smootherstep(gx - ix as f64);
    let ty = smootherstep(gy - iy as f64);
    let v00 = lattice_value(seed, octave, ix, iy);
    let v10 = lattice_value(seed, octave, ix + 1, iy);
    let v01 = lattice_value(seed, octave, ix, iy + 1);
    let v11 = lattice_value(seed, octave, ix + 1, iy + 1);
    let top = v00 * (1.0 - tx) + v10 * tx;
    let bot = v01 * (1.0 - tx) + v11 * tx;
    top * (1.0 - ty) + bot * ty
}

/// Multi-octave fractal value noise over a raster.
///
/// Octave o runs at cell size `base_cell / 2^o` with amplitude `persistence^o`.
/// Output is the raw fractal sum, not normalized.
pub fn fractal_value_noise(
    seed: u64,
    width: usize,
    height: usize,
    octaves: u32,
    base_cell: f64,
    persistence: f64,
) -> Vec<f64> {
    assert!(octaves > 0, "need at least one octave");
    assert!(base_cell > 0.0, "cell size must be positive");
    let mut values = vec![0.0f64; width * height];
    let mut amplitude = 1.0;
    let mut cell = base_cell;
    for octave in 0..octaves {
        for y in 0..height {
            for x in 0..width {
                values[y * width + x] +=
                    amplitude * value_noise_at(seed, octave, x as f64, y as f64, cell);
            }
        }
        amplitude *= persistence;
        cell /= 2.0;
    }
    values
}
