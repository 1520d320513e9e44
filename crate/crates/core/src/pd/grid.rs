//! Uniform lattice discretization for the peridynamic model.
//!
//! Nodes sit on a regular lattice that includes the domain corners:
//! `x_{p,q} = origin + (p h, q h)`, `0 <= p <= nx`, `0 <= q <= ny`. Nodal
//! volumes are tensor products of 1D trapezoid weights (`h/2` at the ends),
//! so they sum to the domain area exactly.
//!
//! Two nodes interact when their reference distance is strictly below the
//! horizon `δ`. On a uniform lattice the geometry of a bond depends only on
//! the integer offset `(di, dj)`, so bonds store a 16-bit index into a small
//! table of offset classes instead of per-bond floating-point data; this
//! keeps the bond list at six bytes per bond, which matters for the
//! fine-resolution runs. Bonds crossing a crack are removed at construction.

use crate::crack::CrackPath;
use crate::math::Vec2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("extent {extent} along {axis} is not an integer multiple of the spacing {h}")]
    ExtentNotMultiple { axis: char, extent: f64, h: f64 },
    #[error("horizon {delta} must exceed the spacing {h}")]
    HorizonTooSmall { delta: f64, h: f64 },
    #[error("grid of {0} nodes exceeds the supported size")]
    TooLarge(usize),
}

/// One of the four axis-aligned domain edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

/// Geometry of one bond offset class; see the module docs.
#[derive(Debug, Clone, Copy)]
pub struct BondClass {
    /// Unit vector from the owning node to the neighbour (reference).
    pub e: [f64; 2],
    /// Reference bond length `|ξ|`.
    pub xi: f64,
    /// `1 / |ξ|`.
    pub inv_xi: f64,
    /// `sqrt(|ξ|)`, the stretch weight in the cohesive potential.
    pub sqrt_xi: f64,
}

/// Uniform peridynamic lattice with precomputed bond structure.
pub struct EmuGrid {
    pub h: f64,
    pub delta: f64,
    pub origin: Vec2,
    /// Cell counts per axis; node counts are `nx + 1` and `ny + 1`.
    pub nx: usize,
    pub ny: usize,
    positions: Vec<Vec2>,
    volumes: Vec<f64>,
    row_offsets: Vec<u32>,
    /// Start of the `j > i` part of each row (rows are sorted ascending).
    upper_start: Vec<u32>,
    bond_neighbor: Vec<u32>,
    bond_class: Vec<u16>,
    classes: Vec<BondClass>,
}

impl EmuGrid {
    /// Builds the lattice over `[origin.x, origin.x + width] × [origin.y,
    /// origin.y + height]` and its bond lists. Bonds severed by `crack` are
    /// dropped on both ends.
    pub fn build(
        origin: Vec2,
        width: f64,
        height: f64,
        h: f64,
        delta: f64,
        crack: Option<&CrackPath>,
    ) -> Result<Self, GridError> {
        if !(h > 0.0) {
            return Err(GridError::NonPositiveSpacing(h));
        }
        if !(delta > h) {
            return Err(GridError::HorizonTooSmall { delta, h });
        }
        let nx = cells_along(width, h).ok_or(GridError::ExtentNotMultiple {
            axis: 'x',
            extent: width,
            h,
        })?;
        let ny = cells_along(height, h).ok_or(GridError::ExtentNotMultiple {
            axis: 'y',
            extent: height,
            h,
        })?;
        let (npx, npy) = (nx + 1, ny + 1);
        let n = npx * npy;
        if n > u32::MAX as usize / 2 {
            return Err(GridError::TooLarge(n));
        }

        let mut positions = Vec::with_capacity(n);
        let mut volumes = Vec::with_capacity(n);
        for q in 0..npy {
            let wy = if q == 0 || q == ny { 0.5 * h } else { h };
            for p in 0..npx {
                let wx = if p == 0 || p == nx { 0.5 * h } else { h };
                positions.push(origin + Vec2::new(p as f64 * h, q as f64 * h));
                volumes.push(wx * wy);
            }
        }

        // Offset classes: all integer offsets with |ξ| < δ, ordered so each
        // node's neighbour list comes out sorted by node index.
        let m = (delta / h).ceil() as i64;
        let mut offsets: Vec<(i64, i64)> = Vec::new();
        for dj in -m..=m {
            for di in -m..=m {
                if (di, dj) == (0, 0) {
                    continue;
                }
                let r2 = (di * di + dj * dj) as f64 * h * h;
                if r2 < delta * delta {
                    offsets.push((di, dj));
                }
            }
        }
        if offsets.len() > u16::MAX as usize {
            return Err(GridError::TooLarge(n));
        }
        let classes: Vec<BondClass> = offsets
            .iter()
            .map(|&(di, dj)| {
                let v = Vec2::new(di as f64 * h, dj as f64 * h);
                let xi = v.norm();
                BondClass { e: [v.x / xi, v.y / xi], xi, inv_xi: 1.0 / xi, sqrt_xi: xi.sqrt() }
            })
            .collect();

        let crack_box = crack.map(|c| {
            let (lo, hi) = c.bounding_box();
            (lo - Vec2::new(delta, delta), hi + Vec2::new(delta, delta))
        });

        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut upper_start = Vec::with_capacity(n);
        let mut bond_neighbor: Vec<u32> = Vec::new();
        let mut bond_class: Vec<u16> = Vec::new();
        row_offsets.push(0u32);
        for q in 0..npy as i64 {
            for p in 0..npx as i64 {
                let i = (q * npx as i64 + p) as usize;
                let pi = positions[i];
                let near_crack = crack_box.is_some_and(|(lo, hi)| {
                    pi.x >= lo.x && pi.x <= hi.x && pi.y >= lo.y && pi.y <= hi.y
                });
                let mut upper = u32::MAX;
                for (cls, &(di, dj)) in offsets.iter().enumerate() {
                    let (pj, qj) = (p + di, q + dj);
                    if pj < 0 || qj < 0 || pj >= npx as i64 || qj >= npy as i64 {
                        continue;
                    }
                    let j = (qj * npx as i64 + pj) as usize;
                    if near_crack {
                        if let Some(c) = crack {
                            if c.cuts_bond(pi, positions[j]) {
                                continue;
                            }
                        }
                    }
                    if j > i && upper == u32::MAX {
                        upper = bond_neighbor.len() as u32;
                    }
                    bond_neighbor.push(j as u32);
                    bond_class.push(cls as u16);
                }
                let end = bond_neighbor.len() as u32;
                row_offsets.push(end);
                upper_start.push(if upper == u32::MAX { end } else { upper });
            }
        }

        Ok(Self {
            h,
            delta,
            origin,
            nx,
            ny,
            positions,
            volumes,
            row_offsets,
            upper_start,
            bond_neighbor,
            bond_class,
            classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn num_bonds_directed(&self) -> usize {
        self.bond_neighbor.len()
    }

    #[inline]
    pub fn position(&self, i: usize) -> Vec2 {
        self.positions[i]
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    #[inline]
    pub fn volume(&self, i: usize) -> f64 {
        self.volumes[i]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Node index from lattice coordinates.
    pub fn node_index(&self, p: usize, q: usize) -> usize {
        debug_assert!(p <= self.nx && q <= self.ny);
        q * (self.nx + 1) + p
    }

    /// Neighbours of node `i` with their bond classes, ascending by index.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, &BondClass)> + '_ {
        let (s, e) = (self.row_offsets[i] as usize, self.row_offsets[i + 1] as usize);
        self.bond_neighbor[s..e]
            .iter()
            .zip(&self.bond_class[s..e])
            .map(move |(&j, &c)| (j as usize, &self.classes[c as usize]))
    }

    // Raw bond storage for the force kernels.
    pub(crate) fn row_offsets(&self) -> &[u32] {
        &self.row_offsets
    }
    pub(crate) fn upper_start(&self) -> &[u32] {
        &self.upper_start
    }
    pub(crate) fn bond_neighbor(&self) -> &[u32] {
        &self.bond_neighbor
    }
    pub(crate) fn bond_class(&self) -> &[u16] {
        &self.bond_class
    }
    pub(crate) fn classes(&self) -> &[BondClass] {
        &self.classes
    }

    /// Nodes within depth `depth` of the given edge (closed band, with a
    /// small relative tolerance so `depth = k h` includes the k-th column).
    pub fn band(&self, edge: Edge, depth: f64) -> Vec<usize> {
        let tol = 1e-9 * depth.max(self.h);
        let (lo, hi) = self.extent();
        let pred = |pos: Vec2| -> bool {
            match edge {
                Edge::Left => pos.x - lo.x <= depth + tol,
                Edge::Right => hi.x - pos.x <= depth + tol,
                Edge::Bottom => pos.y - lo.y <= depth + tol,
                Edge::Top => hi.y - pos.y <= depth + tol,
            }
        };
        (0..self.num_nodes()).filter(|&i| pred(self.positions[i])).collect()
    }

    /// Nodes inside the closed box `[lo, hi]` (exact comparisons).
    pub fn nodes_in_box(&self, lo: Vec2, hi: Vec2) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&i| {
                let p = self.positions[i];
                p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
            })
            .collect()
    }

    /// Domain extent as `(min, max)` corners.
    pub fn extent(&self) -> (Vec2, Vec2) {
        (
            self.origin,
            self.origin + Vec2::new(self.nx as f64 * self.h, self.ny as f64 * self.h),
        )
    }
}

/// Number of cells along an axis, requiring the extent to be an integer
/// multiple of `h` up to a small relative tolerance.
fn cells_along(extent: f64, h: f64) -> Option<usize> {
    if !(extent > 0.0) {
        return None;
    }
    let cells = extent / h;
    let rounded = cells.round();
    if rounded < 1.0 || (cells - rounded).abs() > 1e-6 * rounded {
        return None;
    }
    Some(rounded as usize)
}
