//! Column-major run-length mask codec: raw counts and the compressed string form.

use super::mask::BitMask;
use super::CocoError;

/// Decodes alternating background-first run lengths, column-major, into a mask.
pub fn decode_rle(counts: &[u64], height: usize, width: usize) -> Result<BitMask, CocoError> {
    let expected = (height as u64) * (width as u64);
    let total: u64 = counts.iter().try_fold(0u64, |acc, &c| acc.checked_add(c)).unwrap_or(u64::MAX);
    if total != expected {
        return Err(CocoError::RleLength { got: total, expected, height, width });
    }
    let mut bits = vec![false; height * width];
    let mut pos = 0usize;
    let mut value = false;
    for &run in counts {
        for _ in 0..run {
            // Column-major: position p maps to (x = p / height, y = p % height).
            let x = pos / height;
            let y = pos % height;
            bits[y * width + x] = value;
            pos += 1;
        }
        value = !value;
    }
    BitMask::from_bits(width, height, bits)
}

/// Encodes a mask as column-major background-first run lengths.
pub fn encode_rle(mask: &BitMask) -> Vec<u64> {
    let height = mask.height();
    let width = mask.width();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for x in 0..width {
        for y in 0..height {
            let bit = mask.get(x, y);
            if bit == current {
                run += 1;
            } else {
                counts.push(run);
                current = bit;
                run = 1;
            }
        }
    }
    counts.push(run);
    counts
}

/// Decodes the compressed string form: 5-bit groups biased by 48, with a
/// continuation flag and delta coding against the count two places back.
pub fn decode_rle_string(s: &str, height: usize, width: usize) -> Result<BitMask, CocoError> {
    let counts = string_to_counts(s.as_bytes())?;
    decode_rle(&counts, height, width)
}

pub(crate) fn string_to_counts(bytes: &[u8]) -> Result<Vec<u64>, CocoError> {
    let mut counts: Vec<u64> = Vec::new();
    let mut p = 0usize;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0u32;
        loop {
            if p >= bytes.len() {
                return Err(CocoError::RleString { byte: 0, pos: p });
            }
            let raw = bytes[p];
            if !(48..112).contains(&raw) {
                return Err(CocoError::RleString { byte: raw, pos: p });
            }
            let c = (raw - 48) as i64;
            if k >= 13 {
                // 13 * 5 bits already exceeds the i64 range we accept.
                return Err(CocoError::RleString { byte: raw, pos: p });
            }
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            let more = c & 0x20 != 0;
            if !more {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * (k + 1));
                }
                break;
            }
            k += 1;
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2] as i64;
        }
        if x < 0 {
            return Err(CocoError::RleString { byte: bytes[p - 1], pos: p - 1 });
        }
        counts.push(x as u64);
    }
    Ok(counts)
}

/// Encodes run lengths as the compressed string form; inverse of [`decode_rle_string`].
pub fn encode_rle_string(counts: &[u64]) -> String {
    let mut out = Vec::new();
    for (i, &count) in counts.iter().enumerate() {
        let mut x = count as i64;
        if i > 2 {
            x -= counts[i - 2] as i64;
        }
        loop {
            let mut c = (x & 0x1f) as u8;
            x >>= 5;
            let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                c |= 0x20;
            }
            out.push(c + 48);
            if !more {
                break;
            }
        }
    }
    String::from_utf8(out).expect("biased 5-bit groups are ascii")
}
