//! Uniform cover and the flat-top Shepard partition of unity.
//!
//! The bounding box of the domain is subdivided `level` times per axis into
//! `2^level × 2^level` cells with per-axis half-width `h_k =
//! width_k / 2^{level+1}`. Patch `ω_i` is the cell stretched by `α ∈ (1, 2)`
//! about its center, so a patch overlaps only the directly neighbouring
//! cells, and around each cell center lies a *flat-top* region,
//! `|x_k - c_k| < (2 - α) h_k`, covered by no other patch.
//!
//! The partition of unity is the Shepard construction `φ_i = W_i / Σ_j W_j`
//! with tensor-product quadratic B-spline weights supported exactly on the
//! patches. On a uniform tensor cover the sum factorizes per axis, so each
//! `φ_i` is a product of two 1D Shepard functions; inside a flat-top region
//! `φ_i ≡ 1` and its gradient vanishes identically.

use crate::math::Vec2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CoverError {
    #[error("bounding box is degenerate: {0:?} .. {1:?}")]
    DegenerateBox(Vec2, Vec2),
    #[error("stretch factor must satisfy 1 < alpha < 2, got {0}")]
    AlphaOutOfRange(f64),
    #[error("level {0} too large")]
    LevelTooLarge(u32),
}

/// Uniform cover of a rectangle. Construct with [`Cover::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cover {
    pub lo: Vec2,
    pub hi: Vec2,
    pub level: u32,
    /// Cells (and patches) per axis, `2^level`.
    pub n: usize,
    /// Cell half-width per axis, `width_k / 2^{level+1}`.
    pub h: Vec2,
    pub alpha: f64,
}

impl Cover {
    pub fn new(lo: Vec2, hi: Vec2, level: u32, alpha: f64) -> Result<Self, CoverError> {
        if !(hi.x > lo.x && hi.y > lo.y) {
            return Err(CoverError::DegenerateBox(lo, hi));
        }
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(CoverError::AlphaOutOfRange(alpha));
        }
        if level > 12 {
            return Err(CoverError::LevelTooLarge(level));
        }
        let n = 1usize << level;
        let h = Vec2::new((hi.x - lo.x) / (2.0 * n as f64), (hi.y - lo.y) / (2.0 * n as f64));
        Ok(Self { lo, hi, level, n, h, alpha })
    }

    pub fn num_patches(&self) -> usize {
        self.n * self.n
    }

    pub fn patch_index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.n && iy < self.n);
        iy * self.n + ix
    }

    pub fn patch_coords(&self, i: usize) -> (usize, usize) {
        (i % self.n, i / self.n)
    }

    /// Cell (and patch) center.
    pub fn center(&self, i: usize) -> Vec2 {
        let (ix, iy) = self.patch_coords(i);
        Vec2::new(
            self.lo.x + (2 * ix + 1) as f64 * self.h.x,
            self.lo.y + (2 * iy + 1) as f64 * self.h.y,
        )
    }

    /// Closed cell box `(lo, hi)` of patch `i`.
    pub fn cell_box(&self, i: usize) -> (Vec2, Vec2) {
        let c = self.center(i);
        (c - self.h, c + self.h)
    }

    /// Patch box (support of the weight), `c ± α h`.
    pub fn patch_box(&self, i: usize) -> (Vec2, Vec2) {
        let c = self.center(i);
        (c - self.h * self.alpha, c + self.h * self.alpha)
    }

    /// Flat-top box `|x_k - c_k| < (2 - α) h_k`, where no other patch covers.
    pub fn flat_top_box(&self, i: usize) -> (Vec2, Vec2) {
        let c = self.center(i);
        let r = self.h * (2.0 - self.alpha);
        (c - r, c + r)
    }

    /// Per-axis ranges of patches whose (open) support contains `x`.
    fn coverage_range(&self, coord: f64, lo: f64, h: f64) -> (usize, usize) {
        // |x - (lo + (2i+1) h)| < α h  ⟺  (t - 1 - α)/2 < i < (t - 1 + α)/2,
        // t = (x - lo)/h.
        let t = (coord - lo) / h;
        let from = ((t - 1.0 - self.alpha) / 2.0).floor() as i64 + 1;
        let mut to = ((t - 1.0 + self.alpha) / 2.0).ceil() as i64 - 1;
        // Guard the exact-boundary case (ceil of an integer).
        if (to as f64) >= (t - 1.0 + self.alpha) / 2.0 {
            to -= 0; // ceil already handles the open bound up to round-off
        }
        let from = from.max(0) as usize;
        let to = to.min(self.n as i64 - 1);
        if to < from as i64 {
            (1, 0) // empty
        } else {
            (from, to as usize)
        }
    }

    /// Patches whose support contains `x`, in ascending index order.
    pub fn patches_containing(&self, x: Vec2) -> Vec<usize> {
        let (x0, x1) = self.coverage_range(x.x, self.lo.x, self.h.x);
        let (y0, y1) = self.coverage_range(x.y, self.lo.y, self.h.y);
        let mut out = Vec::with_capacity(4);
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let i = self.patch_index(ix, iy);
                if self.weight(i, x).0 > 0.0 {
                    out.push(i);
                }
            }
        }
        out
    }

    /// Weight `W_i(x)` and gradient: tensor product of quadratic B-splines
    /// mapped onto the patch box. Zero (with zero gradient) outside.
    pub fn weight(&self, i: usize, x: Vec2) -> (f64, Vec2) {
        let c = self.center(i);
        let (wx, dwx) = bspline2_mapped(x.x - c.x, self.alpha * self.h.x);
        let (wy, dwy) = bspline2_mapped(x.y - c.y, self.alpha * self.h.y);
        (wx * wy, Vec2::new(dwx * wy, wx * dwy))
    }

    /// Shepard values and gradients of every patch covering `x`:
    /// `(patch, φ, ∇φ)`. Empty only for `x` outside all patches.
    pub fn shepard(&self, x: Vec2) -> Vec<(usize, f64, Vec2)> {
        let patches = self.patches_containing(x);
        let mut weights = Vec::with_capacity(patches.len());
        let mut sum = 0.0;
        let mut dsum = Vec2::zeros();
        for &i in &patches {
            let (w, dw) = self.weight(i, x);
            sum += w;
            dsum += dw;
            weights.push((i, w, dw));
        }
        if sum == 0.0 {
            return Vec::new();
        }
        weights
            .into_iter()
            .map(|(i, w, dw)| {
                let phi = w / sum;
                // In single-coverage regions dw == dsum, so the gradient
                // cancels exactly and φ is exactly 1.
                let grad = (dw - dsum * phi) / sum;
                (i, phi, grad)
            })
            .collect()
    }

    /// 1D break points inside `[a, b]` along the given axis where the
    /// Shepard functions lose smoothness: patch support edges, plus interior
    /// B-spline knots when they land in a multi-coverage strip (only for
    /// α > 1.5). Used to build integration sub-boxes.
    pub fn breakpoints_1d(&self, axis: usize, a: f64, b: f64) -> Vec<f64> {
        let (lo, h) = match axis {
            0 => (self.lo.x, self.h.x),
            _ => (self.lo.y, self.h.y),
        };
        let ah = self.alpha * h;
        let mut pts = vec![a, b];
        // Patches whose support edges c_i ± αh can fall inside (a, b):
        // i ∈ ((t_a − 1 − α)/2, (t_b − 1 + α)/2) with t = (coord − lo)/h,
        // widened by one index for rounding safety.
        let first = ((((a - lo) / h - 1.0 - self.alpha) / 2.0).floor() as i64 - 1).max(0);
        let last =
            ((((b - lo) / h - 1.0 + self.alpha) / 2.0).ceil() as i64 + 1).min(self.n as i64 - 1);
        for i in first..=last.max(first) {
            let c = lo + (2 * i + 1) as f64 * h;
            for edge in [c - ah, c + ah] {
                if edge > a && edge < b {
                    pts.push(edge);
                }
            }
            if self.alpha > 1.5 {
                for knot in [c - ah / 3.0, c + ah / 3.0] {
                    if knot > a && knot < b && self.multi_covered_1d(axis, knot) {
                        pts.push(knot);
                    }
                }
            }
        }
        crate::math::sorted_dedup(pts, 1e-12 * h)
    }

    /// Number of patch supports covering the 1D coordinate along an axis.
    pub fn patches_covering_1d(&self, axis: usize, coord: f64) -> usize {
        let (lo, h) = match axis {
            0 => (self.lo.x, self.h.x),
            _ => (self.lo.y, self.h.y),
        };
        let t = (coord - lo) / h;
        let from = (((t - 1.0 - self.alpha) / 2.0).floor() as i64 + 1).max(0);
        let to = ((((t - 1.0 + self.alpha) / 2.0).ceil() as i64) - 1).min(self.n as i64 - 1);
        (to - from + 1).max(0) as usize
    }

    /// Whether more than one patch support covers the 1D coordinate.
    fn multi_covered_1d(&self, axis: usize, coord: f64) -> bool {
        self.patches_covering_1d(axis, coord) > 1
    }

    /// Whether `x` lies in the single-coverage (flat-top) region in both
    /// axes, where the PU is locally constant.
    pub fn is_single_covered(&self, x: Vec2) -> bool {
        !self.multi_covered_1d(0, x.x) && !self.multi_covered_1d(1, x.y)
    }
}

/// Quadratic B-spline bump on `[-r, r]`, parameterized by the offset from
/// the patch center; returns value and derivative. The reference spline on
/// `t ∈ [0, 3]` has pieces `t²/2`, `(-2t² + 6t - 3)/2`, `(3 - t)²/2`.
fn bspline2_mapped(offset: f64, r: f64) -> (f64, f64) {
    if offset <= -r || offset >= r {
        return (0.0, 0.0);
    }
    let t = (offset + r) * (1.5 / r);
    let (v, d) = if t <= 0.0 || t >= 3.0 {
        (0.0, 0.0)
    } else if t < 1.0 {
        (0.5 * t * t, t)
    } else if t < 2.0 {
        ((-2.0 * t * t + 6.0 * t - 3.0) * 0.5, 3.0 - 2.0 * t)
    } else {
        let s = 3.0 - t;
        (0.5 * s * s, -s)
    };
    (v, d * 1.5 / r)
}
