//! Even-odd scanline polygon rasterization with pixel-center inclusion.

use super::mask::BitMask;
use super::CocoError;

/// Rasterizes a flat [x0, y0, x1, y1, ...] vertex list into a mask.
///
/// A pixel is set when its center (x + 0.5, y + 0.5) lies inside the polygon
/// under the even-odd rule. Geometry outside the raster is clipped away.
pub fn rasterize_polygon(points: &[f64], width: usize, height: usize) -> Result<BitMask, CocoError> {
    if points.len() < 6 || points.len() % 2 != 0 {
        return Err(CocoError::DegeneratePolygon(points.len() / 2));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(CocoError::NonFinitePolygon);
    }
    let n = points.len() / 2;
    let mut mask = BitMask::empty(width, height);
    let mut crossings: Vec<f64> = Vec::new();
    for row in 0..height {
        let yc = row as f64 + 0.5;
        crossings.clear();
        for i in 0..n {
            let (x1, y1) = (points[2 * i], points[2 * i + 1]);
            let j = (i + 1) % n;
            let (x2, y2) = (points[2 * j], points[2 * j + 1]);
            // Half-open span [min(y), max(y)) so shared vertices count once.
            if (y1 <= yc && yc < y2) || (y2 <= yc && yc < y1) {
                crossings.push(x1 + (yc - y1) * (x2 - x1) / (y2 - y1));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
        for pair in crossings.chunks_exact(2) {
            // Centers in [a, b): x + 0.5 >= a and x + 0.5 < b.
            let first = (pair[0] - 0.5).ceil().max(0.0) as i64;
            let last = ((pair[1] - 0.5).ceil() - 1.0).min(width as f64 - 1.0) as i64;
            for x in first..=last {
                if x >= 0 {
                    mask.set(x as usize, row, true);
                }
            }
        }
    }
    Ok(mask)
}
