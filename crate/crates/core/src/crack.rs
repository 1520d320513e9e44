//! Crack geometry: open polylines with side classification and tip frames.
//!
//! Conventions used throughout the crate:
//!
//! * A crack is an open polyline with at least two distinct points; its two
//!   endpoints are the *tips* (a tip lying on the domain boundary is a crack
//!   mouth and carries no stress singularity, but geometrically it is still
//!   an endpoint).
//! * For a segment `a → b` the *positive* side is to the left of the
//!   direction `b - a`. Points exactly on the crack line are classified as
//!   positive, so lattice nodes sitting on a lattice-aligned crack attach
//!   deterministically to one face.
//! * Past a tip the classification continues across the extension of the end
//!   segment's line (tangent extension), so the jump function stays usable in
//!   patches that contain a tip.

use crate::math::{cross2, Vec2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CrackError {
    #[error("crack polyline needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("crack polyline has zero-length segment at index {0}")]
    DegenerateSegment(usize),
    #[error("crack polyline contains non-finite coordinates")]
    NonFinite,
}

/// Which end of the polyline a tip query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Start,
    Finish,
}

/// Local orthonormal frame at a crack tip: `e1` points out of the crack
/// (prolongation direction), `e2 = rot90(e1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipFrame {
    pub origin: Vec2,
    pub e1: Vec2,
    pub e2: Vec2,
}

impl TipFrame {
    /// Polar coordinates of `p` in the tip frame. `theta` is measured from
    /// the outward tangent, in `(-π, π]`; the crack faces lie at `±π`.
    pub fn polar(&self, p: Vec2) -> (f64, f64) {
        let rel = p - self.origin;
        let x = rel.dot(&self.e1);
        let y = rel.dot(&self.e2);
        (rel.norm(), y.atan2(x))
    }
}

/// An open crack polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct CrackPath {
    points: Vec<Vec2>,
}

impl CrackPath {
    pub fn new(points: Vec<Vec2>) -> Result<Self, CrackError> {
        if points.len() < 2 {
            return Err(CrackError::TooShort(points.len()));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(CrackError::NonFinite);
        }
        for (k, w) in points.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(CrackError::DegenerateSegment(k));
            }
        }
        Ok(Self { points })
    }

    /// Straight crack between two points.
    pub fn segment(a: Vec2, b: Vec2) -> Result<Self, CrackError> {
        Self::new(vec![a, b])
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn num_segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn segment_at(&self, k: usize) -> (Vec2, Vec2) {
        (self.points[k], self.points[k + 1])
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn tip(&self, end: End) -> Vec2 {
        match end {
            End::Start => self.points[0],
            End::Finish => *self.points.last().unwrap(),
        }
    }

    /// Unit tangent at a tip, pointing away from the crack body.
    pub fn tip_tangent(&self, end: End) -> Vec2 {
        match end {
            End::Start => (self.points[0] - self.points[1]).normalize(),
            End::Finish => {
                let n = self.points.len();
                (self.points[n - 1] - self.points[n - 2]).normalize()
            }
        }
    }

    pub fn tip_frame(&self, end: End) -> TipFrame {
        let e1 = self.tip_tangent(end);
        TipFrame { origin: self.tip(end), e1, e2: Vec2::new(-e1.y, e1.x) }
    }

    /// Index of the segment nearest to `p` and the distance to it.
    pub fn nearest_segment(&self, p: Vec2) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, (a, b)) in self.segments().enumerate() {
            let d = crate::math::dist_point_segment(p, a, b);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }

    /// Side classification of `p` relative to the crack: `+1.0` on the left
    /// of the nearest segment (or exactly on the crack), `-1.0` on the right.
    ///
    /// Near an interior joint the average of the adjacent tangents decides;
    /// past a tip the end segment's infinite line decides.
    pub fn side(&self, p: Vec2) -> f64 {
        let (k, _) = self.nearest_segment(p);
        let (a, b) = self.segment_at(k);
        let d = b - a;
        let t = (p - a).dot(&d) / d.norm_squared();
        let joint_tangent = |k0: usize, k1: usize| -> Vec2 {
            let (a0, b0) = self.segment_at(k0);
            let (a1, b1) = self.segment_at(k1);
            (b0 - a0).normalize() + (b1 - a1).normalize()
        };
        let cross = if t <= 0.0 && k > 0 {
            cross2(joint_tangent(k - 1, k), p - a)
        } else if t >= 1.0 && k + 1 < self.num_segments() {
            cross2(joint_tangent(k, k + 1), p - b)
        } else {
            // Interior projection, or clamped at a tip: the segment's own
            // line decides (tangent extension beyond the tip).
            cross2(d, p - a)
        };
        if cross < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Whether the bond segment `p`–`q` is severed by the crack.
    ///
    /// A bond is severed when its endpoints lie on opposite faces and the
    /// connecting segment meets one of the crack segments (tip point
    /// inclusive). Endpoints exactly on the crack line count as the positive
    /// face, consistent with [`CrackPath::side`], so bonds running along the
    /// crack line survive.
    pub fn cuts_bond(&self, p: Vec2, q: Vec2) -> bool {
        // Canonical endpoint order: the answer must not depend on bond
        // orientation, including round-off in the borderline tip cases.
        let (p, q) = if (q.x, q.y) < (p.x, p.y) { (q, p) } else { (p, q) };
        for (a, b) in self.segments() {
            let d = b - a;
            let cp = cross2(d, p - a);
            let cq = cross2(d, q - a);
            let sp = if cp < 0.0 { -1.0 } else { 1.0 };
            let sq = if cq < 0.0 { -1.0 } else { 1.0 };
            if sp == sq {
                continue;
            }
            let r = q - p;
            let denom = cross2(d, r);
            if denom == 0.0 {
                continue;
            }
            let u = cross2(p - a, r) / denom;
            if (0.0..=1.0).contains(&u) {
                return true;
            }
        }
        false
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vertical() -> CrackPath {
        CrackPath::segment(Vec2::new(0.05, 0.0), Vec2::new(0.05, 0.02)).unwrap()
    }

    #[test]
    fn validation() {
        assert_eq!(CrackPath::new(vec![Vec2::zeros()]), Err(CrackError::TooShort(1)));
        assert_eq!(
            CrackPath::new(vec![Vec2::zeros(), Vec2::zeros()]),
            Err(CrackError::DegenerateSegment(0))
        );
        assert!(CrackPath::new(vec![Vec2::zeros(), Vec2::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn side_classification_vertical_crack() {
        let c = vertical();
        assert_eq!(c.side(Vec2::new(0.04, 0.01)), 1.0);
        assert_eq!(c.side(Vec2::new(0.06, 0.01)), -1.0);
        // Exactly on the crack: positive face.
        assert_eq!(c.side(Vec2::new(0.05, 0.01)), 1.0);
        // Beyond the tip the extended line still separates the halves.
        assert_eq!(c.side(Vec2::new(0.0499, 0.05)), 1.0);
        assert_eq!(c.side(Vec2::new(0.0501, 0.05)), -1.0);
    }

    #[test]
    fn tip_frames_point_outward() {
        let c = vertical();
        assert_relative_eq!(c.tip_tangent(End::Start).y, -1.0);
        assert_relative_eq!(c.tip_tangent(End::Finish).y, 1.0);
        let f = c.tip_frame(End::Finish);
        // Left of the crack, slightly above the tip: small positive angle.
        let (_, th) = f.polar(Vec2::new(0.0495, 0.03));
        assert!(th > 0.0 && th < 0.1, "theta = {th}");
        // Points on the two faces map near ±π.
        let (_, th_left) = f.polar(Vec2::new(0.05 - 1e-9, 0.01));
        let (_, th_right) = f.polar(Vec2::new(0.05 + 1e-9, 0.01));
        assert!(th_left > std::f64::consts::PI - 1e-3);
        assert!(th_right < -std::f64::consts::PI + 1e-3);
    }

    #[test]
    fn bond_cutting_vertical_crack() {
        let c = vertical();
        let cut = |px: f64, py: f64, qx: f64, qy: f64| {
            c.cuts_bond(Vec2::new(px, py), Vec2::new(qx, qy))
        };
        assert!(cut(0.048, 0.01, 0.052, 0.01)); // crosses mid-crack
        assert!(!cut(0.048, 0.03, 0.052, 0.03)); // passes above the tip
        assert!(cut(0.05, 0.01, 0.052, 0.01)); // from on-crack node to the right
        assert!(!cut(0.05, 0.01, 0.048, 0.01)); // on-crack node joins the left face
        assert!(!cut(0.05, 0.005, 0.05, 0.015)); // runs along the crack line
        assert!(cut(0.048, 0.02, 0.052, 0.02)); // through the tip point exactly
        assert!(!cut(0.048, 0.0201, 0.052, 0.0201)); // just past the tip
        assert!(!cut(0.041, 0.01, 0.043, 0.012)); // same side, no contact
    }

    #[test]
    fn kinked_crack_joint_side() {
        let c = CrackPath::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.8),
        ])
        .unwrap();
        // Points in the wedge above the joint are positive, below negative.
        assert_eq!(c.side(Vec2::new(1.0, 0.3)), 1.0);
        assert_eq!(c.side(Vec2::new(1.05, -0.3)), -1.0);
        assert_eq!(c.side(Vec2::new(0.5, 0.1)), 1.0);
        assert_eq!(c.side(Vec2::new(1.6, 0.2)), -1.0); // below the second leg
        assert_relative_eq!(c.length(), 1.0 + (1.0f64 + 0.64).sqrt());
    }
}
