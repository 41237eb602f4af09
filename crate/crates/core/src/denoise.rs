//! Adaptive salt-and-pepper filter for stacked shares.
//!
//! Each pixel looks at a square window centered on it and compares the share
//! of black pixels in the window to two cutoffs. Below the white cutoff the
//! pixel becomes white, above the black cutoff it becomes black; in between
//! the window grows until `max_window`, after which the pixel is left as it
//! was. Windows are clipped at the image border and every decision reads the
//! input image only.

use crate::bitimage::BitImage;
use crate::vcs::{block_counts, SchemeParams, Variant};
use crate::{Error, Result};

/// Slack for comparing window ratios against cutoffs, so that a ratio equal
/// to a cutoff in exact arithmetic still compares as equal.
const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterParams {
    pub white_cutoff: f64,
    pub black_cutoff: f64,
    pub initial_window: usize,
    pub max_window: usize,
    pub growth_step: usize,
    /// Window unit. Window sides count cells of `cell_h` x `cell_w` pixels,
    /// centered on the cell holding the pixel; 1 x 1 gives plain pixel
    /// windows.
    pub cell_h: usize,
    pub cell_w: usize,
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        if !(in_unit(self.white_cutoff) && in_unit(self.black_cutoff)) {
            return Err(Error::InvalidArgument(
                "filter cutoffs must lie strictly between 0 and 1".into(),
            ));
        }
        if self.white_cutoff >= self.black_cutoff {
            return Err(Error::InvalidArgument(format!(
                "white cutoff {} must be below black cutoff {}",
                self.white_cutoff, self.black_cutoff
            )));
        }
        if self.initial_window < 3 || self.initial_window.is_multiple_of(2) {
            return Err(Error::InvalidArgument(
                "initial window must be odd and at least 3".into(),
            ));
        }
        if self.max_window < self.initial_window || self.max_window.is_multiple_of(2) {
            return Err(Error::InvalidArgument(
                "max window must be odd and no smaller than the initial window".into(),
            ));
        }
        if self.growth_step == 0 || self.growth_step % 2 == 1 {
            return Err(Error::InvalidArgument(
                "growth step must be even and positive".into(),
            ));
        }
        if self.cell_h == 0 || self.cell_w == 0 {
            return Err(Error::InvalidArgument(
                "window cell must be nonempty".into(),
            ));
        }
        Ok(())
    }
}

/// Cutoffs a third of the way in from each end of `[white, black]`.
fn third_cutoffs(white: f64, black: f64) -> (f64, f64) {
    let gap = black - white;
    (white + gap / 3.0, black - gap / 3.0)
}

/// Scheme defaults: cutoffs a third of the way into the gap between the
/// stacked ink density of white regions and the lowest stacked density of
/// black regions, 3 x 3 windows of subpixel blocks, no growth.
pub fn default_params(params: &SchemeParams) -> FilterParams {
    let (white, black) = match params.variant {
        Variant::TwoOfTwo => (0.5, 1.0),
        Variant::TwoOfN => {
            let m = params.m as f64;
            (
                params.white_stack_weight() as f64 / m,
                params.min_black_stack_weight() as f64 / m,
            )
        }
    };
    let (white_cutoff, black_cutoff) = third_cutoffs(white, black);
    FilterParams {
        white_cutoff,
        black_cutoff,
        initial_window: 3,
        max_window: 3,
        growth_step: 2,
        cell_h: params.block_h,
        cell_w: params.block_w,
    }
}

/// Black weight actually present in a stack: the most frequent block count
/// above the white weight. Every black block of an exact stack carries the
/// same weight, which depends on which shares were stacked.
pub fn measured_black_weight(stack: &BitImage, params: &SchemeParams) -> Option<usize> {
    let white = params.white_stack_weight();
    let mut hist = vec![0usize; params.m + 1];
    for n in block_counts(stack, params.block_h, params.block_w) {
        hist[n] += 1;
    }
    hist.iter()
        .enumerate()
        .skip(white + 1)
        .filter(|(_, &f)| f > 0)
        // Ties go to the heavier weight.
        .max_by_key(|&(n, &f)| (f, n))
        .map(|(n, _)| n)
}

/// Scheme defaults with the black density taken from the stack itself.
pub fn calibrated_params(params: &SchemeParams, stack: &BitImage) -> FilterParams {
    let mut p = default_params(params);
    if let Some(black) = measured_black_weight(stack, params) {
        let m = params.m as f64;
        let (w, b) = third_cutoffs(params.white_stack_weight() as f64 / m, black as f64 / m);
        p.white_cutoff = w;
        p.black_cutoff = b;
    }
    p
}

/// Filter plus collapse back to secret resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cleanup {
    pub filter: FilterParams,
    pub block_h: usize,
    pub block_w: usize,
    /// A block collapses to black when it holds at least this many black
    /// subpixels.
    pub min_black: usize,
}

impl Cleanup {
    /// Calibrated filter; blocks collapse at the midpoint between the white
    /// weight and the measured black weight.
    pub fn for_stack(params: &SchemeParams, stack: &BitImage) -> Self {
        let white = params.white_stack_weight();
        let black = measured_black_weight(stack, params).unwrap_or(params.min_black_stack_weight());
        Cleanup {
            filter: calibrated_params(params, stack),
            block_h: params.block_h,
            block_w: params.block_w,
            min_black: (white + black) / 2 + 1,
        }
    }

    pub fn apply(&self, stack: &BitImage) -> Result<BitImage> {
        adaptive_filter(stack, &self.filter).downsample_threshold(
            self.block_h,
            self.block_w,
            self.min_black,
        )
    }
}

/// Summed-area table with a zero border row and column.
struct Integral {
    stride: usize,
    sums: Vec<u32>,
}

impl Integral {
    fn new(img: &BitImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut sums = vec![0u32; stride * (h + 1)];
        for r in 0..h {
            let mut run = 0;
            for (c, &b) in img.row(r).iter().enumerate() {
                run += b as u32;
                sums[(r + 1) * stride + c + 1] = sums[r * stride + c + 1] + run;
            }
        }
        Integral { stride, sums }
    }

    /// Black count in rows `r0..r1`, columns `c0..c1` (half-open).
    fn count(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> u32 {
        let s = self.stride;
        self.sums[r1 * s + c1] + self.sums[r0 * s + c0]
            - self.sums[r0 * s + c1]
            - self.sums[r1 * s + c0]
    }
}

/// Outcome of the window test at one pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    White,
    Black,
    Undecided,
}

fn decide(
    integral: &Integral,
    w: usize,
    h: usize,
    row: usize,
    col: usize,
    p: &FilterParams,
) -> Decision {
    let (cr, cc) = (row / p.cell_h, col / p.cell_w);
    let mut side = p.initial_window;
    while side <= p.max_window {
        let half = side / 2;
        let r0 = cr.saturating_sub(half) * p.cell_h;
        let r1 = ((cr + half + 1) * p.cell_h).min(h);
        let c0 = cc.saturating_sub(half) * p.cell_w;
        let c1 = ((cc + half + 1) * p.cell_w).min(w);
        let total = ((r1 - r0) * (c1 - c0)) as f64;
        let ratio = integral.count(r0, r1, c0, c1) as f64 / total;
        if ratio <= p.white_cutoff + EPS {
            return Decision::White;
        }
        if ratio >= p.black_cutoff - EPS {
            return Decision::Black;
        }
        side += p.growth_step;
    }
    Decision::Undecided
}

/// Per-pixel decisions, row-major.
pub fn decisions(img: &BitImage, p: &FilterParams) -> Vec<Decision> {
    let integral = Integral::new(img);
    let (w, h) = (img.width(), img.height());
    (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| decide(&integral, w, h, r, c, p))
        .collect()
}

pub fn adaptive_filter(img: &BitImage, p: &FilterParams) -> BitImage {
    let pixels = decisions(img, p)
        .into_iter()
        .zip(img.pixels())
        .map(|(d, &orig)| match d {
            Decision::White => false,
            Decision::Black => true,
            Decision::Undecided => orig,
        })
        .collect();
    BitImage::from_pixels(img.width(), img.height(), pixels).expect("same dimensions")
}
