//! Numerical integration over the cover, aware of crack geometry.
//!
//! Rectangles are first subdivided along the lines where the Shepard
//! partition of unity loses smoothness ([`Cover::breakpoints_1d`]), so each
//! sub-box holds an analytic integrand away from the crack. Sub-boxes that
//! meet the crack are cut along the crack segment lines (and along each tip
//! tangent line, the branch line of the tip enrichments) into convex
//! polygons, which are fan-triangulated and integrated with a collapsed
//! tensor Gauss rule whose points stay strictly inside each triangle — no
//! evaluation ever lands on the discontinuity. Sub-boxes containing a crack
//! tip are quartered recursively toward the tip to resolve the root
//! singularity of the tip enrichments; triangle fans there are anchored at
//! the vertex nearest the tip, which absorbs part of the singularity into
//! the map's Jacobian.

use crate::crack::{CrackPath, End};
use crate::math::{
    clip_convex_polygon, gauss_legendre, polygon_area, segment_meets_box, segments_intersect,
    sorted_dedup, Vec2,
};
use crate::pum::cover::Cover;

/// A weighted integration point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub x: Vec2,
    pub w: f64,
}

/// Rule orders for the different sub-box classes.
///
/// Across patch-overlap strips the Shepard functions are rational with
/// complex poles about one strip-width away, so plain Gauss converges
/// slowly there; subdividing each strip a few times restores fast
/// convergence. The defaults integrate all products of shape functions to
/// ~1e-11 relative error, comfortably inside the linear-consistency budget
/// of the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Gauss points per axis where the partition of unity is locally
    /// constant (polynomial integrands).
    pub order_flat: usize,
    /// Gauss points per axis and sub-interval across patch-overlap strips
    /// (rational integrands).
    pub order_overlap: usize,
    /// Equal sub-intervals per overlap strip.
    pub overlap_subdiv: usize,
    /// Gauss points per axis on triangles of crack-cut polygons (raised to
    /// `order_overlap` automatically inside overlap strips).
    pub order_cut: usize,
    /// Levels of recursive quartering toward a crack tip.
    pub tip_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { order_flat: 4, order_overlap: 8, overlap_subdiv: 3, order_cut: 6, tip_depth: 4 }
    }
}

/// Relative area below which a clipped polygon is discarded as a sliver.
const SLIVER_REL_AREA: f64 = 1e-14;

/// Integration points over the axis-aligned box `[lo, hi]`, subdivided at
/// the smoothness breaklines of the cover and cut along `crack`. Returns an
/// empty list for an empty or inverted box.
pub fn box_quadrature(
    cover: &Cover,
    lo: Vec2,
    hi: Vec2,
    crack: Option<&CrackPath>,
    cfg: &QuadratureConfig,
) -> Vec<QuadPoint> {
    let mut out = Vec::new();
    if !(hi.x > lo.x && hi.y > lo.y) {
        return out;
    }
    let xs = cover.breakpoints_1d(0, lo.x, hi.x);
    let ys = cover.breakpoints_1d(1, lo.y, hi.y);
    for jy in 0..ys.len() - 1 {
        for jx in 0..xs.len() - 1 {
            let blo = Vec2::new(xs[jx], ys[jy]);
            let bhi = Vec2::new(xs[jx + 1], ys[jy + 1]);
            subbox_points(cover, blo, bhi, crack, cfg, cfg.tip_depth, &mut out);
        }
    }
    out
}

/// Dispatch for one smooth sub-box: quarter toward contained tips, cut
/// along the crack, or apply a plain tensor rule.
fn subbox_points(
    cover: &Cover,
    lo: Vec2,
    hi: Vec2,
    crack: Option<&CrackPath>,
    cfg: &QuadratureConfig,
    depth_left: u32,
    out: &mut Vec<QuadPoint>,
) {
    let Some(ck) = crack else {
        tensor_points(cover, lo, hi, cfg, out);
        return;
    };

    let tips = [ck.tip(End::Start), ck.tip(End::Finish)];
    let tip_inside = tips.iter().any(|t| point_in_box(*t, lo, hi));
    if tip_inside && depth_left > 0 {
        let mid = (lo + hi) * 0.5;
        for &(a, b) in &[
            (lo, mid),
            (Vec2::new(mid.x, lo.y), Vec2::new(hi.x, mid.y)),
            (Vec2::new(lo.x, mid.y), Vec2::new(mid.x, hi.y)),
            (mid, hi),
        ] {
            subbox_points(cover, a, b, crack, cfg, depth_left - 1, out);
        }
        return;
    }

    // Cut lines: every crack segment meeting the box, plus the tangent line
    // of any tip whose backward ray (the branch line of the tip functions)
    // passes through the box.
    let mut lines: Vec<(Vec2, Vec2)> = Vec::new();
    for (a, b) in ck.segments() {
        if segment_meets_box(a, b, lo, hi) {
            lines.push((a, b - a));
        }
    }
    for end in [End::Start, End::Finish] {
        let tip = ck.tip(end);
        let back = -ck.tip_tangent(end);
        if ray_meets_box(tip, back, lo, hi) {
            let line = (tip, back);
            if !lines.iter().any(|l| same_line(*l, line)) {
                lines.push(line);
            }
        }
    }

    if lines.is_empty() {
        tensor_points(cover, lo, hi, cfg, out);
        return;
    }

    let box_area = (hi.x - lo.x) * (hi.y - lo.y);
    let mut polys: Vec<Vec<Vec2>> = vec![vec![
        lo,
        Vec2::new(hi.x, lo.y),
        hi,
        Vec2::new(lo.x, hi.y),
    ]];
    for (a, d) in &lines {
        let n = Vec2::new(-d.y, d.x);
        let mut next = Vec::with_capacity(polys.len() * 2);
        for poly in &polys {
            for half in [clip_convex_polygon(poly, *a, n), clip_convex_polygon(poly, *a, -n)] {
                if half.len() >= 3 && polygon_area(&half).abs() > SLIVER_REL_AREA * box_area {
                    next.push(half);
                }
            }
        }
        polys = next;
    }

    let fan_anchor = if tip_inside {
        tips.into_iter().find(|t| point_in_box(*t, lo, hi))
    } else {
        None
    };
    let mid = (lo + hi) * 0.5;
    let order = if cover_multi(cover, 0, mid.x) || cover_multi(cover, 1, mid.y) {
        cfg.order_overlap
    } else {
        cfg.order_cut
    };
    for poly in &polys {
        polygon_points(poly, order, fan_anchor, out);
    }
}

/// Tensor rule over a smooth sub-box, built from the per-axis rules.
fn tensor_points(cover: &Cover, lo: Vec2, hi: Vec2, cfg: &QuadratureConfig, out: &mut Vec<QuadPoint>) {
    let rx = axis_rule(cover, 0, lo.x, hi.x, cfg);
    let ry = axis_rule(cover, 1, lo.y, hi.y, cfg);
    for &(y, wy) in &ry {
        for &(x, wx) in &rx {
            out.push(QuadPoint { x: Vec2::new(x, y), w: wx * wy });
        }
    }
}

/// 1D rule over `[a, b]` (one smoothness interval of the cover): plain
/// Gauss where a single patch covers, subdivided higher-order Gauss across
/// overlap strips.
fn axis_rule(cover: &Cover, axis: usize, a: f64, b: f64, cfg: &QuadratureConfig) -> Vec<(f64, f64)> {
    let multi = cover.patches_covering_1d(axis, 0.5 * (a + b)) > 1;
    let (order, pieces) =
        if multi { (cfg.order_overlap, cfg.overlap_subdiv) } else { (cfg.order_flat, 1) };
    let (g, w) = gauss_legendre(order);
    let mut rule = Vec::with_capacity(order * pieces);
    for p in 0..pieces {
        let lo = a + (b - a) * p as f64 / pieces as f64;
        let hi = a + (b - a) * (p + 1) as f64 / pieces as f64;
        let c = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo);
        for (i, gv) in g.iter().enumerate() {
            rule.push((c + r * gv, w[i] * r));
        }
    }
    rule
}

fn cover_multi(cover: &Cover, axis: usize, coord: f64) -> bool {
    // More than one patch support covers this 1D coordinate.
    cover.patches_covering_1d(axis, coord) > 1
}

/// Collapsed (Duffy-type) tensor rule on a convex polygon: fan-triangulate
/// from an anchor vertex and map `[0,1]²` onto each triangle so the
/// Jacobian vanishes linearly at the anchor. Points are strictly interior.
fn polygon_points(poly: &[Vec2], order: usize, fan_anchor: Option<Vec2>, out: &mut Vec<QuadPoint>) {
    let anchor = match fan_anchor {
        Some(t) => {
            // Fan from the vertex nearest the tip so the Jacobian damps the
            // root singularity there.
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, v) in poly.iter().enumerate() {
                let d = (v - t).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best
        }
        None => 0,
    };
    let (g, w) = gauss_legendre(order);
    let m = poly.len();
    let a = poly[anchor];
    for k in 1..m - 1 {
        let b = poly[(anchor + k) % m];
        let c = poly[(anchor + k + 1) % m];
        let two_area = crate::math::cross2(b - a, c - b);
        if two_area.abs() == 0.0 {
            continue;
        }
        for (ui, gu) in g.iter().enumerate() {
            let u = 0.5 * (gu + 1.0);
            for (vi, gv) in g.iter().enumerate() {
                let v = 0.5 * (gv + 1.0);
                // x = a + u (b - a) + u v (c - b); |J| = u |2A|.
                let x = a + (b - a) * u + (c - b) * (u * v);
                let weight = 0.25 * w[ui] * w[vi] * u * two_area;
                out.push(QuadPoint { x, w: weight });
            }
        }
    }
}

/// Integration points along the axis-aligned segment `p0 → p1`, split at
/// the cover's smoothness lines, at crossings with the crack, and at the
/// caller's extra coordinates (e.g. traction piece endpoints), given as
/// absolute coordinates along the varying axis.
pub fn edge_quadrature(
    cover: &Cover,
    p0: Vec2,
    p1: Vec2,
    crack: Option<&CrackPath>,
    extra: &[f64],
    cfg: &QuadratureConfig,
) -> Vec<QuadPoint> {
    let d = p1 - p0;
    assert!(
        d.x == 0.0 || d.y == 0.0,
        "edge quadrature requires an axis-aligned segment"
    );
    let axis = if d.y == 0.0 { 0 } else { 1 };
    let (a, b) = if axis == 0 { (p0.x, p1.x) } else { (p0.y, p1.y) };
    let (a, b, flip) = if a <= b { (a, b, false) } else { (b, a, true) };
    let mut cuts = cover.breakpoints_1d(axis, a, b);
    for &e in extra {
        if e > a && e < b {
            cuts.push(e);
        }
    }
    if let Some(ck) = crack {
        for (s0, s1) in ck.segments() {
            if let Some(x) = segment_crossing_coord(s0, s1, p0, p1, axis) {
                if x > a && x < b {
                    cuts.push(x);
                }
            }
        }
    }
    let h = if axis == 0 { cover.h.x } else { cover.h.y };
    let cuts = sorted_dedup(cuts, 1e-12 * h);
    let mut out = Vec::new();
    for k in 0..cuts.len() - 1 {
        for (t, w) in axis_rule(cover, axis, cuts[k], cuts[k + 1], cfg) {
            let x = if axis == 0 { Vec2::new(t, p0.y) } else { Vec2::new(p0.x, t) };
            out.push(QuadPoint { x, w });
        }
    }
    if flip {
        out.reverse();
    }
    out
}

/// Quadrature over `patch ∩ domain` for one patch, used for patch-local
/// Gram matrices.
pub fn patch_quadrature(
    cover: &Cover,
    patch: usize,
    crack: Option<&CrackPath>,
    cfg: &QuadratureConfig,
) -> Vec<QuadPoint> {
    let (plo, phi) = cover.patch_box(patch);
    let lo = Vec2::new(plo.x.max(cover.lo.x), plo.y.max(cover.lo.y));
    let hi = Vec2::new(phi.x.min(cover.hi.x), phi.y.min(cover.hi.y));
    box_quadrature(cover, lo, hi, crack, cfg)
}

fn point_in_box(p: Vec2, lo: Vec2, hi: Vec2) -> bool {
    p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
}

/// Whether the ray `origin + s·dir, s ≥ 0` meets the closed box.
fn ray_meets_box(origin: Vec2, dir: Vec2, lo: Vec2, hi: Vec2) -> bool {
    let mut smin = 0.0f64;
    let mut smax = f64::INFINITY;
    for axis in 0..2 {
        let (o, d, l, h) = if axis == 0 {
            (origin.x, dir.x, lo.x, hi.x)
        } else {
            (origin.y, dir.y, lo.y, hi.y)
        };
        if d == 0.0 {
            if o < l || o > h {
                return false;
            }
        } else {
            let (t0, t1) = ((l - o) / d, (h - o) / d);
            let (t0, t1) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            smin = smin.max(t0);
            smax = smax.min(t1);
        }
    }
    smin <= smax
}

fn same_line(l1: (Vec2, Vec2), l2: (Vec2, Vec2)) -> bool {
    let (a1, d1) = l1;
    let (a2, d2) = l2;
    let cross_dir = crate::math::cross2(d1, d2);
    let cross_off = crate::math::cross2(d1, a2 - a1);
    let scale = d1.norm() * d2.norm();
    cross_dir.abs() <= 1e-12 * scale && cross_off.abs() <= 1e-12 * d1.norm() * (a2 - a1).norm().max(d2.norm())
}

/// Coordinate (along `axis`) where segment `s0→s1` crosses the axis-aligned
/// segment `p0→p1`, if it does.
fn segment_crossing_coord(s0: Vec2, s1: Vec2, p0: Vec2, p1: Vec2, axis: usize) -> Option<f64> {
    if !segments_intersect(s0, s1, p0, p1) {
        return None;
    }
    // Intersection parameter on the edge.
    let d = p1 - p0;
    let e = s1 - s0;
    let denom = crate::math::cross2(d, e);
    let t = if denom.abs() > 0.0 {
        crate::math::cross2(s0 - p0, e) / denom
    } else {
        // Collinear overlap: split at the projection of both endpoints.
        // Taking the nearer endpoint projection is enough for our meshes.
        ((s0 - p0).dot(&d) / d.norm_squared()).clamp(0.0, 1.0)
    };
    let x = p0 + d * t;
    Some(if axis == 0 { x.x } else { x.y })
}
