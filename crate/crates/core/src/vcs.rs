//! Visual threshold schemes: the 2-of-2 pixel scheme and the (2,n) scheme
//! built from an idempotent Latin square.
//!
//! A secret pixel is expanded into `m` subpixels per share. For the (2,n)
//! scheme with `n = 3t`, the black basis matrix is the incidence matrix of a
//! block design derived from a Latin square of order `t`: `3t` treatments,
//! `t(t-1)` blocks of three, every two treatments from different groups
//! meeting in exactly one block. The white basis matrix repeats one row with
//! `t-1` leading ones. Each pixel is encoded by a fresh uniformly random
//! column permutation of the matching basis matrix.

use std::fmt;
use std::str::FromStr;

use crate::bitimage::{or_merge, BitImage};
use crate::rng::SeededRng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    TwoOfTwo,
    TwoOfN,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::TwoOfTwo => "TwoOfTwo",
            Variant::TwoOfN => "TwoOfN",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TwoOfTwo" => Ok(Variant::TwoOfTwo),
            "TwoOfN" => Ok(Variant::TwoOfN),
            _ => Err(Error::InvalidArgument(format!(
                "unknown scheme variant {s:?}"
            ))),
        }
    }
}

/// Threshold-scheme descriptor. `t` is zero for the 2-of-2 scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SchemeParams {
    pub variant: Variant,
    pub t: usize,
    pub n: usize,
    pub m: usize,
    pub block_h: usize,
    pub block_w: usize,
}

/// Largest divisor of `m` not exceeding `floor(sqrt(m))`.
fn near_square_rows(m: usize) -> usize {
    let root = (1..=m).take_while(|d| d * d <= m).last().unwrap_or(1);
    (1..=root).rev().find(|d| m.is_multiple_of(*d)).unwrap_or(1)
}

/// Scheme for `n` shares: `n = 2` selects the 2-of-2 scheme, `n = 3t` with
/// `t >= 3` the Latin-square (2,n) scheme.
pub fn scheme_params(n: usize) -> Result<SchemeParams> {
    let (variant, t, m) = match n {
        2 => (Variant::TwoOfTwo, 0, 2),
        n if n >= 9 && n % 3 == 0 => {
            let t = n / 3;
            (Variant::TwoOfN, t, t * (t - 1))
        }
        _ => return Err(Error::UnsupportedShareCount(n)),
    };
    let block_h = near_square_rows(m);
    Ok(SchemeParams {
        variant,
        t,
        n,
        m,
        block_h,
        block_w: m / block_h,
    })
}

impl SchemeParams {
    /// Ink per share block: 1 for 2-of-2, `t-1` for (2,n).
    pub fn share_weight(&self) -> usize {
        match self.variant {
            Variant::TwoOfTwo => 1,
            Variant::TwoOfN => self.t - 1,
        }
    }

    /// Stacked weight of a white pixel for any two shares.
    pub fn white_stack_weight(&self) -> usize {
        self.share_weight()
    }

    /// Smallest stacked weight of a black pixel over all share pairs:
    /// 2 for 2-of-2, `2t-3` for (2,n).
    pub fn min_black_stack_weight(&self) -> usize {
        match self.variant {
            Variant::TwoOfTwo => 2,
            Variant::TwoOfN => 2 * self.t - 3,
        }
    }
}

/// Order-`t` Latin square with entries `1..=t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatinSquare {
    t: usize,
    cells: Vec<usize>,
}

impl LatinSquare {
    pub fn order(&self) -> usize {
        self.t
    }

    /// Entry at 0-based `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.cells[row * self.t + col]
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.cells.chunks(self.t).map(<[usize]>::to_vec).collect()
    }

    /// Every row and column is a permutation of `1..=t`.
    pub fn is_latin(&self) -> bool {
        let t = self.t;
        let perm = |values: Vec<usize>| {
            let mut seen = vec![false; t + 1];
            values
                .into_iter()
                .all(|v| (1..=t).contains(&v) && !std::mem::replace(&mut seen[v], true))
        };
        (0..t).all(|i| perm((0..t).map(|j| self.get(i, j)).collect()))
            && (0..t).all(|j| perm((0..t).map(|i| self.get(i, j)).collect()))
    }

    pub fn is_idempotent(&self) -> bool {
        (0..self.t).all(|i| self.get(i, i) == i + 1)
    }
}

/// Lexicographically smallest (row-major) Latin square of order `t` whose
/// diagonal reads `1, 2, ..., t`.
pub fn idempotent_latin_square(t: usize) -> Result<LatinSquare> {
    if t < 3 {
        return Err(Error::OrderTooSmall(t));
    }
    let mut cells = vec![0usize; t * t];
    // row_used[i][v] / col_used[j][v]: symbol v already placed in row i / col j.
    let mut row_used = vec![vec![false; t + 1]; t];
    let mut col_used = vec![vec![false; t + 1]; t];
    for i in 0..t {
        cells[i * t + i] = i + 1;
        row_used[i][i + 1] = true;
        col_used[i][i + 1] = true;
    }
    let free: Vec<usize> = (0..t * t).filter(|k| k / t != k % t).collect();

    fn fill(
        pos: usize,
        free: &[usize],
        t: usize,
        cells: &mut [usize],
        row_used: &mut [Vec<bool>],
        col_used: &mut [Vec<bool>],
    ) -> bool {
        let Some(&k) = free.get(pos) else {
            return true;
        };
        let (i, j) = (k / t, k % t);
        for v in 1..=t {
            if row_used[i][v] || col_used[j][v] {
                continue;
            }
            cells[k] = v;
            row_used[i][v] = true;
            col_used[j][v] = true;
            if fill(pos + 1, free, t, cells, row_used, col_used) {
                return true;
            }
            row_used[i][v] = false;
            col_used[j][v] = false;
        }
        cells[k] = 0;
        false
    }

    if !fill(0, &free, t, &mut cells, &mut row_used, &mut col_used) {
        // Idempotent Latin squares exist for every order except 2.
        unreachable!("no idempotent latin square of order {t}");
    }
    Ok(LatinSquare { t, cells })
}

/// Row-major 0/1 matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BinaryMatrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        BinaryMatrix {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let data = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), cols);
                r.iter().map(|&b| b != 0)
            })
            .collect();
        BinaryMatrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }

    fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[bool] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row(r).iter().filter(|&&b| b).count()
    }

    /// Weight of the OR of rows `a` and `b`.
    pub fn or_weight(&self, a: usize, b: usize) -> usize {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .filter(|(&x, &y)| x || y)
            .count()
    }

    /// Row rendered as a string of `0`/`1`.
    pub fn row_string(&self, r: usize) -> String {
        self.row(r)
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

/// White (`s0`) and black (`s1`) basis matrices, each `n x m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisMatrices {
    pub s0: BinaryMatrix,
    pub s1: BinaryMatrix,
}

/// Blocks of the design as treatment index triples (0-based `v` indices),
/// in surviving-column order of the `3 x t^2` arrangement.
pub fn design_blocks(square: &LatinSquare) -> Vec<[usize; 3]> {
    let t = square.order();
    let mut blocks = Vec::with_capacity(t * (t - 1));
    for i in 1..=t {
        for j in 1..=t {
            let column = [i, j, square.get(i - 1, j - 1)];
            if column.iter().all(|&e| e == column[0]) {
                continue;
            }
            // Entry in row a of the arrangement becomes treatment (a, b),
            // renamed v_{t(a-1)+b}; stored 0-based.
            let mut block = [0; 3];
            for (a, &b) in column.iter().enumerate() {
                block[a] = t * a + b - 1;
            }
            blocks.push(block);
        }
    }
    blocks
}

/// Basis matrices of the (2, 3t) scheme.
pub fn basis_matrices(t: usize) -> Result<BasisMatrices> {
    let square = idempotent_latin_square(t)?;
    let blocks = design_blocks(&square);
    let (n, m) = (3 * t, t * (t - 1));
    debug_assert_eq!(blocks.len(), m);

    let mut s1 = BinaryMatrix::zeros(n, m);
    for (j, block) in blocks.iter().enumerate() {
        for &v in block {
            s1.set(v, j, true);
        }
    }
    let mut s0 = BinaryMatrix::zeros(n, m);
    for r in 0..n {
        for c in 0..t - 1 {
            s0.set(r, c, true);
        }
    }
    Ok(BasisMatrices { s0, s1 })
}

/// Basis matrices for any supported scheme. The 2-of-2 pair follows the
/// classic construction: equal rows for white, complementary for black.
pub fn scheme_basis(params: &SchemeParams) -> Result<BasisMatrices> {
    match params.variant {
        Variant::TwoOfTwo => Ok(BasisMatrices {
            s0: BinaryMatrix::from_rows(&[&[1, 0], &[1, 0]]),
            s1: BinaryMatrix::from_rows(&[&[1, 0], &[0, 1]]),
        }),
        Variant::TwoOfN => basis_matrices(params.t),
    }
}

/// `n` shares of one secret.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareSet {
    pub params: SchemeParams,
    pub shares: Vec<BitImage>,
    pub secret_w: usize,
    pub secret_h: usize,
}

/// Splits `secret` into `params.n` shares.
///
/// Secret row `r` draws its permutations from keystream `r` of the seeded
/// generator, pixels left to right, one Fisher-Yates shuffle of the column
/// indices per pixel. The result depends only on `(secret, params, seed)`.
pub fn encode(secret: &BitImage, params: &SchemeParams, seed: u64) -> Result<ShareSet> {
    let basis = scheme_basis(params)?;
    let (bh, bw) = (params.block_h, params.block_w);
    let (sw, sh) = (secret.width(), secret.height());
    let mut shares = vec![BitImage::new(sw * bw, sh * bh)?; params.n];
    let mut perm: Vec<usize> = (0..params.m).collect();

    for r in 0..sh {
        let mut rng = SeededRng::with_stream(seed, r as u64);
        for c in 0..sw {
            let matrix = if secret.get(r, c) {
                &basis.s1
            } else {
                &basis.s0
            };
            for (k, p) in perm.iter_mut().enumerate() {
                *p = k;
            }
            rng.shuffle(&mut perm);
            for (i, share) in shares.iter_mut().enumerate() {
                for (k, &col) in perm.iter().enumerate() {
                    if matrix.get(i, col) {
                        share.set(r * bh + k / bw, c * bw + k % bw, true);
                    }
                }
            }
        }
    }
    Ok(ShareSet {
        params: *params,
        shares,
        secret_w: sw,
        secret_h: sh,
    })
}

/// Stacks two or more shares by OR. The result stays at share resolution.
pub fn reconstruct(shares: &[BitImage]) -> Result<BitImage> {
    if shares.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "reconstruction needs at least 2 shares, got {}",
            shares.len()
        )));
    }
    or_merge(shares)
}

/// Black subpixel count of every block, row-major over secret pixels.
pub fn block_counts(img: &BitImage, block_h: usize, block_w: usize) -> Vec<usize> {
    let (out_w, out_h) = (img.width() / block_w, img.height() / block_h);
    let mut counts = vec![0; out_w * out_h];
    for r in 0..out_h * block_h {
        for (c, &b) in img.row(r)[..out_w * block_w].iter().enumerate() {
            counts[(r / block_h) * out_w + c / block_w] += b as usize;
        }
    }
    counts
}

/// Exact decoding of a two-share stack: a block is black when its count
/// exceeds the midpoint between the white weight and the smallest black
/// weight. Noise-free ground truth for the filtering pipeline.
pub fn threshold_decode(stack: &BitImage, params: &SchemeParams) -> Result<BitImage> {
    let (bh, bw) = (params.block_h, params.block_w);
    if !stack.width().is_multiple_of(bw) || !stack.height().is_multiple_of(bh) {
        return Err(Error::InvalidArgument(
            "stack is not a whole number of blocks".into(),
        ));
    }
    let doubled_mid = params.white_stack_weight() + params.min_black_stack_weight();
    let pixels = block_counts(stack, bh, bw)
        .into_iter()
        .map(|n| 2 * n > doubled_mid)
        .collect();
    BitImage::from_pixels(stack.width() / bw, stack.height() / bh, pixels)
}

/// One-line share descriptor written next to a share file:
/// `variant t n m block_h block_w secret_w secret_h share_index group_id`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareHeader {
    pub params: SchemeParams,
    pub secret_w: usize,
    pub secret_h: usize,
    /// 1-based member index.
    pub share_index: usize,
    pub group_id: String,
}

impl ShareHeader {
    pub fn to_line(&self) -> String {
        let p = &self.params;
        format!(
            "{} {} {} {} {} {} {} {} {} {}",
            p.variant,
            p.t,
            p.n,
            p.m,
            p.block_h,
            p.block_w,
            self.secret_w,
            self.secret_h,
            self.share_index,
            self.group_id
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let bad = |what: &str| Error::InvalidArgument(format!("share header: {what}: {line:?}"));
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 10 {
            return Err(bad("expected 10 fields"));
        }
        let num =
            |i: usize| -> Result<usize> { tokens[i].parse().map_err(|_| bad("non-numeric field")) };
        let variant: Variant = tokens[0].parse()?;
        let n = num(2)?;
        let params = scheme_params(n)?;
        let declared = SchemeParams {
            variant,
            t: num(1)?,
            n,
            m: num(3)?,
            block_h: num(4)?,
            block_w: num(5)?,
        };
        if declared != params {
            return Err(bad("inconsistent scheme fields"));
        }
        let share_index = num(8)?;
        if share_index == 0 || share_index > n {
            return Err(bad("share index out of range"));
        }
        Ok(ShareHeader {
            params,
            secret_w: num(6)?,
            secret_h: num(7)?,
            share_index,
            group_id: tokens[9].to_string(),
        })
    }

    /// Whether `share` has the dimensions this header promises.
    pub fn matches(&self, share: &BitImage) -> bool {
        share.width() == self.secret_w * self.params.block_w
            && share.height() == self.secret_h * self.params.block_h
    }
}
