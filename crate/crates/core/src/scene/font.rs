use num_complex::Complex64;

use super::{point_scene, Scatterer, Scene};
use crate::error::{Error, Result};

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

/// 5×7 bitmap rows, most significant of the low 5 bits is the left column.
fn glyph(c: char) -> Option<[u8; GLYPH_H]> {
    Some(match c.to_ascii_uppercase() {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        ' ' => [0; GLYPH_H],
        _ => return None,
    })
}

/// Text rendered as unit scatterers in the y–z plane (`x = 0`).
///
/// Glyph columns run along +y and rows along −z (the first row is farthest
/// in range); one pixel is `pitch` meters and glyphs are separated by one
/// empty column. The text block is centered on `(y, z) = center`.
pub fn text_scene(text: &str, pitch: f64, center: [f64; 2]) -> Result<Scene> {
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(Error::invalid("pitch", "must be positive"));
    }
    let glyphs = text
        .chars()
        .map(|c| glyph(c).ok_or_else(|| Error::invalid("text", format!("no glyph for {c:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let cols = glyphs.len() * (GLYPH_W + 1) - 1;
    let y0 = center[0] - (cols as f64 - 1.0) / 2.0 * pitch;
    let z0 = center[1] + (GLYPH_H as f64 - 1.0) / 2.0 * pitch;
    let mut pts = Vec::new();
    for (g, rows) in glyphs.iter().enumerate() {
        for (r, bits) in rows.iter().enumerate() {
            for c in 0..GLYPH_W {
                if bits >> (GLYPH_W - 1 - c) & 1 == 1 {
                    let col = g * (GLYPH_W + 1) + c;
                    pts.push(Scatterer::new(
                        [0.0, y0 + col as f64 * pitch, z0 - r as f64 * pitch],
                        Complex64::new(1.0, 0.0),
                    ));
                }
            }
        }
    }
    point_scene(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utd_layout() {
        let s = text_scene("UTD", 1e-3, [0.0, 0.1]).unwrap();
        // U: 2*6 + 3, T: 5 + 6, D: 4 + 2*5 + 4
        assert_eq!(s.len(), 15 + 11 + 18);
        let b = s.bounds();
        assert!((b.max[1] - b.min[1] - 16e-3).abs() < 1e-12);
        assert!((b.max[2] - b.min[2] - 6e-3).abs() < 1e-12);
        assert!((b.min[1] + b.max[1]).abs() < 1e-12);
    }

    #[test]
    fn unknown_glyph() {
        assert!(text_scene("A#", 1e-3, [0.0, 0.0]).is_err());
        assert!(text_scene("   ", 1e-3, [0.0, 0.0]).is_err());
    }
}
