//! Glyph isolation, 32x32 normalization and 48-component zoning features.

use crate::bitimage::{Axis, BitImage, Rect};
use crate::{Error, Result};

/// Side of a normalized glyph bitmap.
pub const GLYPH_SIDE: usize = 32;
/// Zones per side; each zone is `ZONE_SIDE` pixels square.
pub const ZONES: usize = 4;
pub const ZONE_SIDE: usize = GLYPH_SIDE / ZONES;
pub const FEATURE_LEN: usize = ZONES * ZONES * 3;

/// Glyphs narrower than this many columns are treated as specks.
const MIN_GLYPH_WIDTH: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Glyph {
    pub bbox: Rect,
    pub bitmap: BitImage,
}

/// Zone features: `(density, x_centroid, y_centroid)` per zone, zones in
/// row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Comma-separated, 6 decimals.
    pub fn to_csv(&self) -> String {
        self.0
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Bounding boxes of the glyphs on a single text line, left to right.
pub fn segment(img: &BitImage) -> Vec<Rect> {
    let rows = img.projection(Axis::Rows);
    let Some(top) = rows.iter().position(|&n| n > 0) else {
        return Vec::new();
    };
    let bottom = rows.iter().rposition(|&n| n > 0).unwrap_or(top);
    let band = img
        .crop(Rect::new(top, bottom, 0, img.width() - 1))
        .expect("band lies inside the image");
    let cols = band.projection(Axis::Columns);

    let mut boxes = Vec::new();
    let mut c = 0;
    while c < cols.len() {
        if cols[c] == 0 {
            c += 1;
            continue;
        }
        let left = c;
        while c < cols.len() && cols[c] > 0 {
            c += 1;
        }
        let right = c - 1;
        if right + 1 - left < MIN_GLYPH_WIDTH {
            continue;
        }
        // Tighten to this glyph's own rows.
        let glyph_rows: Vec<usize> = (top..=bottom)
            .filter(|&r| img.row(r)[left..=right].iter().any(|&b| b))
            .collect();
        boxes.push(Rect::new(
            glyph_rows[0],
            glyph_rows[glyph_rows.len() - 1],
            left,
            right,
        ));
    }
    boxes
}

/// Crops `bbox` and stretches it to 32 x 32.
pub fn normalize_glyph(img: &BitImage, bbox: Rect) -> Result<Glyph> {
    let bitmap = img.crop(bbox)?.scale_nn(GLYPH_SIDE, GLYPH_SIDE)?;
    Ok(Glyph { bbox, bitmap })
}

/// Geometric moment `m_pq = sum_x sum_y x^p y^q f(x, y)` of a zone, with
/// `x` the column and `y` the row, both relative to the zone's top-left.
pub fn moment(img: &BitImage, zone: Rect, p: u32, q: u32) -> f64 {
    let mut sum = 0.0;
    for y in 0..zone.height() {
        for x in 0..zone.width() {
            if img.get(zone.top + y, zone.left + x) {
                sum += (x as f64).powi(p as i32) * (y as f64).powi(q as i32);
            }
        }
    }
    sum
}

pub fn extract_features(glyph: &Glyph) -> Result<FeatureVector> {
    let bm = &glyph.bitmap;
    if bm.width() != GLYPH_SIDE || bm.height() != GLYPH_SIDE {
        return Err(Error::InvalidArgument(format!(
            "glyph bitmap is {}x{}, expected {GLYPH_SIDE}x{GLYPH_SIDE}",
            bm.width(),
            bm.height()
        )));
    }
    let area = (ZONE_SIDE * ZONE_SIDE) as f64;
    let max_coord = (ZONE_SIDE - 1) as f64;
    let mut values = Vec::with_capacity(FEATURE_LEN);
    for zr in 0..ZONES {
        for zc in 0..ZONES {
            let zone = Rect::new(
                zr * ZONE_SIDE,
                (zr + 1) * ZONE_SIDE - 1,
                zc * ZONE_SIDE,
                (zc + 1) * ZONE_SIDE - 1,
            );
            let m00 = moment(bm, zone, 0, 0);
            values.push(m00 / area);
            if m00 == 0.0 {
                values.extend([0.5, 0.5]);
            } else {
                values.push(moment(bm, zone, 1, 0) / m00 / max_coord);
                values.push(moment(bm, zone, 0, 1) / m00 / max_coord);
            }
        }
    }
    Ok(FeatureVector(values))
}

/// Segments, normalizes and featurizes every glyph of a clean key image.
pub fn glyph_features(img: &BitImage) -> Result<Vec<FeatureVector>> {
    segment(img)
        .into_iter()
        .map(|b| normalize_glyph(img, b).and_then(|g| extract_features(&g)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn glyph(bitmap: BitImage) -> Glyph {
        Glyph {
            bbox: bitmap.full_rect(),
            bitmap,
        }
    }

    #[test]
    fn blank_image_has_no_glyphs() {
        assert!(segment(&BitImage::new(20, 10).unwrap()).is_empty());
    }

    #[test]
    fn two_rectangles() {
        let mut img = BitImage::new(12, 10).unwrap();
        for r in 2..=7 {
            for c in (1..=3).chain(6..=8) {
                img.set(r, c, true);
            }
        }
        assert_eq!(
            segment(&img),
            vec![Rect::new(2, 7, 1, 3), Rect::new(2, 7, 6, 8)]
        );
    }

    #[test]
    fn specks_are_rejected() {
        let mut img = BitImage::new(10, 10).unwrap();
        img.set(3, 4, true);
        img.set(4, 4, true);
        assert!(segment(&img).is_empty());
    }

    #[test]
    fn rows_tightened_per_glyph() {
        let img =
            BitImage::from_rows(&["##......", "##...##.", "##...##.", ".....##.", ".....##."])
                .unwrap();
        assert_eq!(
            segment(&img),
            vec![Rect::new(0, 2, 0, 1), Rect::new(1, 4, 5, 6)]
        );
    }

    #[test]
    fn normalize_cases() {
        let mut rng = SeededRng::new(3);
        let px: Vec<bool> = (0..40 * 40).map(|_| rng.below(2) == 1).collect();
        let img = BitImage::from_pixels(40, 40, px).unwrap();
        let b = Rect::new(4, 35, 2, 33);
        assert_eq!(
            normalize_glyph(&img, b).unwrap().bitmap,
            img.crop(b).unwrap()
        );

        let dot = BitImage::from_rows(&["...", ".#.", "..."]).unwrap();
        let g = normalize_glyph(&dot, Rect::new(1, 1, 1, 1)).unwrap();
        assert_eq!(g.bitmap.black_count(), 1024);

        let px: Vec<bool> = (0..64 * 64).map(|_| rng.below(2) == 1).collect();
        let big = BitImage::from_pixels(64, 64, px).unwrap();
        let g = normalize_glyph(&big, big.full_rect()).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                assert_eq!(g.bitmap.get(i, j), big.get(2 * i, 2 * j));
            }
        }
        assert!(normalize_glyph(&big, Rect::new(0, 64, 0, 3)).is_err());
    }

    #[test]
    fn feature_fixtures() {
        let white = extract_features(&glyph(BitImage::new(32, 32).unwrap())).unwrap();
        assert_eq!(white.values(), [0.0, 0.5, 0.5].repeat(16).as_slice());

        let black = BitImage::from_pixels(32, 32, vec![true; 1024]).unwrap();
        let f = extract_features(&glyph(black)).unwrap();
        assert_eq!(f.values(), [1.0, 0.5, 0.5].repeat(16).as_slice());

        let mut one = BitImage::new(32, 32).unwrap();
        one.set(0, 0, true);
        let f = extract_features(&glyph(one)).unwrap();
        assert_eq!(&f.values()[..3], &[1.0 / 64.0, 0.0, 0.0]);
        assert_eq!(&f.values()[3..], [0.0, 0.5, 0.5].repeat(15).as_slice());
    }

    #[test]
    fn centroid_axes() {
        // One pixel at row 1, column 7 of zone 5 (second zone row, second column).
        let mut img = BitImage::new(32, 32).unwrap();
        img.set(8 + 1, 8 + 7, true);
        let f = extract_features(&glyph(img)).unwrap();
        assert_eq!(&f.values()[15..18], &[1.0 / 64.0, 1.0, 1.0 / 7.0]);
    }

    #[test]
    fn wrong_bitmap_size() {
        let g = glyph(BitImage::new(16, 32).unwrap());
        assert!(extract_features(&g).is_err());
    }

    #[test]
    fn csv_has_48_fields() {
        let f = extract_features(&glyph(BitImage::new(32, 32).unwrap())).unwrap();
        let csv = f.to_csv();
        assert_eq!(csv.split(',').count(), 48);
        assert!(csv.starts_with("0.000000,0.500000,0.500000"));
    }
}
