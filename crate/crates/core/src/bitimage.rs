//! Bilevel rasters and the primitives the rest of the pipeline is built on.
//!
//! Pixels are stored row-major, `true` meaning black (ink). PBM uses the same
//! convention, so file bits map straight onto pixels.

use std::fmt;

use crate::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitImage {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

/// Inclusive bounding box in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rect {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Rect {
    pub fn new(top: usize, bottom: usize, left: usize, right: usize) -> Self {
        Rect {
            top,
            bottom,
            left,
            right,
        }
    }

    pub fn width(&self) -> usize {
        self.right + 1 - self.left
    }

    pub fn height(&self) -> usize {
        self.bottom + 1 - self.top
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Columns,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PbmVariant {
    /// ASCII bits.
    P1,
    /// Packed bits, MSB first, rows padded to a byte.
    P4,
}

impl BitImage {
    /// All-white image.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        Ok(BitImage {
            width,
            height,
            pixels: vec![false; width * height],
        })
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidDimensions { width, height });
        }
        Ok(BitImage {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from rows of `'#'`/`'1'` (black) and anything else
    /// (white). Handy for fixtures.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().chars().count());
        let mut pixels = Vec::with_capacity(width * height);
        for row in rows {
            let row = row.as_ref();
            if row.chars().count() != width {
                return Err(Error::InvalidDimensions { width, height });
            }
            pixels.extend(row.chars().map(|c| c == '#' || c == '1'));
        }
        Self::from_pixels(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    /// Pixel at `(row, col)`. Panics when out of bounds.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        assert!(row < self.height && col < self.width);
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, black: bool) {
        assert!(row < self.height && col < self.width);
        self.pixels[row * self.width + col] = black;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }

    pub fn black_count(&self) -> usize {
        self.pixels.iter().filter(|&&b| b).count()
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, self.height - 1, 0, self.width - 1)
    }

    /// True when every black pixel of `other` is also black here.
    pub fn covers(&self, other: &BitImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .pixels
                .iter()
                .zip(&other.pixels)
                .all(|(&a, &b)| a || !b)
    }

    /// Black-pixel counts per row or per column.
    pub fn projection(&self, axis: Axis) -> Vec<usize> {
        match axis {
            Axis::Rows => (0..self.height)
                .map(|r| self.row(r).iter().filter(|&&b| b).count())
                .collect(),
            Axis::Columns => {
                let mut counts = vec![0; self.width];
                for r in 0..self.height {
                    for (c, &b) in self.row(r).iter().enumerate() {
                        counts[c] += b as usize;
                    }
                }
                counts
            }
        }
    }

    pub fn crop(&self, r: Rect) -> Result<BitImage> {
        if r.top > r.bottom || r.left > r.right || r.bottom >= self.height || r.right >= self.width
        {
            return Err(Error::RectOutOfBounds {
                top: r.top,
                bottom: r.bottom,
                left: r.left,
                right: r.right,
                width: self.width,
                height: self.height,
            });
        }
        let mut pixels = Vec::with_capacity(r.width() * r.height());
        for row in r.top..=r.bottom {
            pixels.extend_from_slice(&self.row(row)[r.left..=r.right]);
        }
        BitImage::from_pixels(r.width(), r.height(), pixels)
    }

    /// Nearest-neighbor resampling to `out_w` x `out_h`. Aspect ratio is not
    /// kept: output `(i, j)` samples source `(i*h/out_h, j*w/out_w)`.
    pub fn scale_nn(&self, out_w: usize, out_h: usize) -> Result<BitImage> {
        let mut out = BitImage::new(out_w, out_h)?;
        for i in 0..out_h {
            let sr = i * self.height / out_h;
            for j in 0..out_w {
                let sc = j * self.width / out_w;
                out.pixels[i * out_w + j] = self.pixels[sr * self.width + sc];
            }
        }
        Ok(out)
    }

    /// Collapses each `block_h` x `block_w` block to one pixel, black when at
    /// least half of the block is black (ties go to black).
    pub fn downsample_majority(&self, block_h: usize, block_w: usize) -> Result<BitImage> {
        self.downsample_threshold(block_h, block_w, (block_h * block_w).div_ceil(2))
    }

    /// Collapses each block to one pixel, black when the block holds at least
    /// `min_black` black pixels.
    pub fn downsample_threshold(
        &self,
        block_h: usize,
        block_w: usize,
        min_black: usize,
    ) -> Result<BitImage> {
        if block_h == 0 || block_w == 0 || !self.height.is_multiple_of(block_h) || !self.width.is_multiple_of(block_w) {
            return Err(Error::InvalidArgument(format!(
                "{}x{} image is not divisible into {}x{} blocks",
                self.width, self.height, block_w, block_h
            )));
        }
        let (out_w, out_h) = (self.width / block_w, self.height / block_h);
        let mut out = BitImage::new(out_w, out_h)?;
        for bi in 0..out_h {
            for bj in 0..out_w {
                let mut count = 0;
                for r in bi * block_h..(bi + 1) * block_h {
                    count += self.row(r)[bj * block_w..(bj + 1) * block_w]
                        .iter()
                        .filter(|&&b| b)
                        .count();
                }
                out.pixels[bi * out_w + bj] = count >= min_black;
            }
        }
        Ok(out)
    }

    /// Pastes `src` with its top-left corner at `(row, col)`. Pixels falling
    /// outside this image are dropped.
    pub fn blit(&mut self, src: &BitImage, row: usize, col: usize) {
        for r in 0..src.height {
            if row + r >= self.height {
                break;
            }
            for c in 0..src.width {
                if col + c >= self.width {
                    break;
                }
                self.pixels[(row + r) * self.width + col + c] = src.get(r, c);
            }
        }
    }
}

impl fmt::Debug for BitImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitImage {}x{}", self.width, self.height)?;
        for r in 0..self.height.min(64) {
            let line: String = self
                .row(r)
                .iter()
                .take(128)
                .map(|&b| if b { '#' } else { '.' })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Pixelwise OR of equally sized images.
pub fn or_merge(images: &[BitImage]) -> Result<BitImage> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidArgument("or_merge of zero images".into()))?;
    let mut out = first.clone();
    for (index, img) in images.iter().enumerate().skip(1) {
        if img.width != first.width || img.height != first.height {
            return Err(Error::DimensionMismatch {
                index,
                want_w: first.width,
                want_h: first.height,
                got_w: img.width,
                got_h: img.height,
            });
        }
        for (o, &p) in out.pixels.iter_mut().zip(&img.pixels) {
            *o |= p;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// PBM

pub fn write_pbm(img: &BitImage, variant: PbmVariant) -> Vec<u8> {
    let mut out = Vec::new();
    match variant {
        PbmVariant::P1 => {
            out.extend_from_slice(format!("P1\n{} {}\n", img.width, img.height).as_bytes());
            for r in 0..img.height {
                for (c, &b) in img.row(r).iter().enumerate() {
                    if c > 0 {
                        out.push(b' ');
                    }
                    out.push(if b { b'1' } else { b'0' });
                }
                out.push(b'\n');
            }
        }
        PbmVariant::P4 => {
            out.extend_from_slice(format!("P4\n{} {}\n", img.width, img.height).as_bytes());
            for r in 0..img.height {
                for chunk in img.row(r).chunks(8) {
                    let mut byte = 0u8;
                    for (k, &b) in chunk.iter().enumerate() {
                        if b {
                            byte |= 0x80 >> k;
                        }
                    }
                    out.push(byte);
                }
            }
        }
    }
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn dimension(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::pbm(start, format!("expected numeric {what}")));
        }
        let value: usize = std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::pbm(start, format!("{what} out of range")))?;
        if value == 0 {
            return Err(Error::pbm(start, format!("{what} must be positive")));
        }
        Ok(value)
    }
}

/// Parses a P1 or P4 bitmap.
pub fn read_pbm(data: &[u8]) -> Result<BitImage> {
    let variant = match data.get(..2) {
        Some(b"P1") => PbmVariant::P1,
        Some(b"P4") => PbmVariant::P4,
        _ => return Err(Error::pbm(0, "bad magic, expected P1 or P4")),
    };
    let mut cur = Cursor { data, pos: 2 };
    let width = cur.dimension("width")?;
    let height = cur.dimension("height")?;
    let total = width
        .checked_mul(height)
        .ok_or_else(|| Error::pbm(cur.pos, "image too large"))?;
    let mut pixels = Vec::with_capacity(total);

    match variant {
        PbmVariant::P1 => {
            while pixels.len() < total {
                cur.skip_space_and_comments();
                match data.get(cur.pos) {
                    Some(b'0') => pixels.push(false),
                    Some(b'1') => pixels.push(true),
                    Some(_) => return Err(Error::pbm(cur.pos, "expected bit 0 or 1")),
                    None => return Err(Error::pbm(cur.pos, "truncated raster")),
                }
                cur.pos += 1;
            }
        }
        PbmVariant::P4 => {
            match data.get(cur.pos) {
                Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
                _ => return Err(Error::pbm(cur.pos, "expected whitespace before raster")),
            }
            let stride = width.div_ceil(8);
            let need = stride * height;
            if data.len() - cur.pos < need {
                return Err(Error::pbm(
                    data.len(),
                    format!("truncated raster, need {need} bytes"),
                ));
            }
            for r in 0..height {
                let row = &data[cur.pos + r * stride..cur.pos + (r + 1) * stride];
                pixels.extend((0..width).map(|c| row[c / 8] & (0x80 >> (c % 8)) != 0));
            }
        }
    }
    BitImage::from_pixels(width, height, pixels)
}
