//! Crack-path extraction from damage-field time series.
//!
//! A peridynamic run reports per-node damage `d_i`; `d_i > 1` means the
//! node's worst bond has passed the softening onset. The crack tip at a
//! given time is taken to be the damaged node with the largest damage value
//! inside a caller-chosen region, and chaining those positions over a
//! strided subset of the snapshots yields one crack branch per region. The
//! final crack polyline splices the two branches onto the tips of the
//! initial crack.
//!
//! Node positions are reference coordinates: displacements in the regimes
//! of interest are orders of magnitude below the lattice spacing, and the
//! downstream enrichment geometry lives in the reference configuration.

use crate::crack::{CrackError, CrackPath, End};
use crate::math::Vec2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error("snapshot at step {step} carries {got} damage values for {want} nodes")]
    LengthMismatch { step: usize, got: usize, want: usize },
}

/// Spatial predicate restricting which nodes may be reported as a crack tip.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Every node passes.
    All,
    /// Closed half-plane `{ x : (x - origin) · normal ≥ 0 }`.
    HalfPlane { origin: Vec2, normal: Vec2 },
    /// Closed axis-aligned rectangle.
    Rect { lo: Vec2, hi: Vec2 },
}

impl Region {
    pub fn contains(&self, x: Vec2) -> bool {
        match *self {
            Region::All => true,
            Region::HalfPlane { origin, normal } => (x - origin).dot(&normal) >= 0.0,
            Region::Rect { lo, hi } => x.x >= lo.x && x.x <= hi.x && x.y >= lo.y && x.y <= hi.y,
        }
    }

    /// The two closed half-planes split by the perpendicular bisector of the
    /// chord between a crack's tips, returned as `(start side, finish side)`.
    /// These are the default branch filters: each tip's growth is tracked in
    /// the half-plane containing that tip. Points exactly on the bisector
    /// belong to both.
    pub fn tip_half_planes(crack: &CrackPath) -> (Region, Region) {
        let a = crack.tip(End::Start);
        let b = crack.tip(End::Finish);
        let mid = 0.5 * (a + b);
        let chord = b - a;
        (
            Region::HalfPlane { origin: mid, normal: -chord },
            Region::HalfPlane { origin: mid, normal: chord },
        )
    }
}

/// Per-node damage values over time on a fixed node set.
#[derive(Debug, Clone)]
pub struct DamageSeries {
    positions: Vec<Vec2>,
    /// `(time-step index, damage per node)`, in recording order.
    snapshots: Vec<(usize, Vec<f64>)>,
}

impl DamageSeries {
    pub fn new(positions: Vec<Vec2>) -> Self {
        Self { positions, snapshots: Vec::new() }
    }

    pub fn push(&mut self, step: usize, damage: Vec<f64>) -> Result<(), ExtractError> {
        if damage.len() != self.positions.len() {
            return Err(ExtractError::LengthMismatch {
                step,
                got: damage.len(),
                want: self.positions.len(),
            });
        }
        self.snapshots.push((step, damage));
        Ok(())
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn snapshots(&self) -> &[(usize, Vec<f64>)] {
        &self.snapshots
    }
}

/// Positions (as recording indices into `snapshots`) selected by a stride:
/// the first snapshot, every `stride`-th after it, and always the last, so
/// the final tip position is never missed.
fn selected_indices(n_snapshots: usize, stride: usize) -> Vec<usize> {
    assert!(stride >= 1, "stride must be at least 1");
    let mut picks: Vec<usize> = (0..n_snapshots).step_by(stride).collect();
    if n_snapshots > 0 && *picks.last().unwrap() != n_snapshots - 1 {
        picks.push(n_snapshots - 1);
    }
    picks
}

/// Crack-tip position sequence: for each selected snapshot, the position of
/// the node with maximal damage among nodes with `d > 1` inside `region`.
/// Ties break to the lowest node index; snapshots with no damaged node in
/// the region contribute nothing. The result may contain consecutive
/// duplicates when the tip is stationary between selected snapshots;
/// [`build_crack_polyline`] collapses them.
pub fn extract_tip_sequence(series: &DamageSeries, stride: usize, region: &Region) -> Vec<Vec2> {
    let positions = series.positions();
    let mut out = Vec::new();
    for &snap in &selected_indices(series.snapshots().len(), stride) {
        let (_, damage) = &series.snapshots()[snap];
        let mut best: Option<(usize, f64)> = None;
        for (i, &d) in damage.iter().enumerate() {
            if d > 1.0
                && region.contains(positions[i])
                && best.map_or(true, |(_, dmax)| d > dmax)
            {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            out.push(positions[i]);
        }
    }
    out
}

/// Splices the extracted branches onto the initial crack:
/// `reverse(left) ++ initial ++ right`, with exact consecutive duplicates
/// collapsed. `left` must be the branch growing from the crack's start tip
/// and `right` the branch from its finish tip, both ordered by time.
pub fn build_crack_polyline(
    initial: &CrackPath,
    left: &[Vec2],
    right: &[Vec2],
) -> Result<CrackPath, CrackError> {
    let mut points: Vec<Vec2> = Vec::with_capacity(left.len() + initial.points().len() + right.len());
    let chain = left
        .iter()
        .rev()
        .chain(initial.points().iter())
        .chain(right.iter());
    for &p in chain {
        if points.last() != Some(&p) {
            points.push(p);
        }
    }
    CrackPath::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn series_on_line(n_nodes: usize) -> DamageSeries {
        let positions = (0..n_nodes).map(|i| Vec2::new(i as f64 * 0.01, 0.02)).collect();
        DamageSeries::new(positions)
    }

    #[test]
    fn all_damage_at_or_below_threshold_yields_nothing() {
        let mut s = series_on_line(5);
        // `d = 1` is softening onset, not damage: the comparison is strict.
        s.push(0, vec![0.3, 1.0, 0.99, 0.0, 1.0]).unwrap();
        s.push(1, vec![1.0; 5]).unwrap();
        assert!(extract_tip_sequence(&s, 1, &Region::All).is_empty());
    }

    #[test]
    fn single_damaged_node_reports_its_position() {
        let mut s = DamageSeries::new(vec![Vec2::new(0.01, 0.0), Vec2::new(0.05, 0.05)]);
        s.push(0, vec![0.0, 2.0]).unwrap();
        let seq = extract_tip_sequence(&s, 1, &Region::All);
        assert_eq!(seq, vec![Vec2::new(0.05, 0.05)]);
    }

    #[test]
    fn moving_argmax_traces_the_line_exactly() {
        // Snapshot k: nodes 0..k carry a trail of decayed damage, node k is
        // the strict maximum. The extracted sequence must walk the line.
        let n = 20;
        let mut s = series_on_line(n);
        for k in 0..n {
            let mut d = vec![0.0; n];
            for (j, dj) in d.iter_mut().enumerate().take(k) {
                *dj = 1.01 + 0.01 * j as f64;
            }
            d[k] = 2.0;
            s.push(k, d).unwrap();
        }
        let seq = extract_tip_sequence(&s, 1, &Region::All);
        assert_eq!(seq.len(), n);
        for (k, p) in seq.iter().enumerate() {
            assert_eq!(*p, Vec2::new(k as f64 * 0.01, 0.02));
        }
    }

    #[test]
    fn ties_break_to_the_lowest_node_index() {
        let mut s = series_on_line(4);
        s.push(0, vec![1.2, 1.7, 1.7, 1.5]).unwrap();
        let seq = extract_tip_sequence(&s, 1, &Region::All);
        assert_eq!(seq, vec![Vec2::new(0.01, 0.02)]);
    }

    #[test]
    fn region_filter_excludes_the_global_maximum() {
        let mut s = series_on_line(4);
        s.push(0, vec![1.2, 9.0, 1.5, 0.0]).unwrap();
        // Keep only x ≥ 0.015: node 1 (the global max at x = 0.01) is out.
        let region = Region::HalfPlane {
            origin: Vec2::new(0.015, 0.0),
            normal: Vec2::new(1.0, 0.0),
        };
        let seq = extract_tip_sequence(&s, 1, &region);
        assert_eq!(seq, vec![Vec2::new(0.02, 0.02)]);
        for p in &seq {
            assert!(region.contains(*p));
        }
    }

    #[test]
    fn stride_selects_first_every_kth_and_last() {
        // Give every snapshot a distinct argmax so the selection is visible.
        let n = 8;
        let mut s = series_on_line(n);
        for k in 0..n {
            let mut d = vec![0.0; n];
            d[k] = 2.0;
            s.push(k, d).unwrap();
        }
        let seq = extract_tip_sequence(&s, 3, &Region::All);
        let expect: Vec<Vec2> =
            [0, 3, 6, 7].iter().map(|&k| Vec2::new(k as f64 * 0.01, 0.02)).collect();
        assert_eq!(seq, expect);
    }

    #[test]
    fn empty_series_and_oversized_stride_are_harmless() {
        let s = series_on_line(3);
        assert!(extract_tip_sequence(&s, 7, &Region::All).is_empty());
        let mut s = series_on_line(3);
        s.push(0, vec![0.0, 3.0, 0.0]).unwrap();
        assert_eq!(extract_tip_sequence(&s, 100, &Region::All).len(), 1);
    }

    #[test]
    fn snapshot_length_mismatch_is_rejected() {
        let mut s = series_on_line(3);
        assert_eq!(
            s.push(5, vec![0.0; 4]),
            Err(ExtractError::LengthMismatch { step: 5, got: 4, want: 3 })
        );
    }

    /// Independent reference: same contract, written as a direct transcription
    /// with no shared helpers.
    fn brute_force(series: &DamageSeries, stride: usize, region: &Region) -> Vec<Vec2> {
        let n = series.snapshots().len();
        let mut picked = Vec::new();
        let mut k = 0;
        while k < n {
            picked.push(k);
            k += stride;
        }
        if n > 0 && picked.last() != Some(&(n - 1)) {
            picked.push(n - 1);
        }
        let mut out = Vec::new();
        for k in picked {
            let damage = &series.snapshots()[k].1;
            let mut max = 0.0;
            let mut index = usize::MAX;
            for i in 0..damage.len() {
                let inside = match *region {
                    Region::All => true,
                    Region::HalfPlane { origin, normal } => {
                        (series.positions()[i] - origin).dot(&normal) >= 0.0
                    }
                    Region::Rect { lo, hi } => {
                        let p = series.positions()[i];
                        p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
                    }
                };
                if damage[i] > 1.0 && inside && damage[i] > max {
                    max = damage[i];
                    index = i;
                }
            }
            if index != usize::MAX {
                out.push(series.positions()[index]);
            }
        }
        out
    }

    #[test]
    fn extraction_matches_brute_force_on_random_series() {
        let mut rng = StdRng::seed_from_u64(0x5eed);
        for _ in 0..30 {
            let n_nodes = rng.random_range(1..400);
            let n_snaps = rng.random_range(0..40);
            let positions: Vec<Vec2> = (0..n_nodes)
                .map(|_| Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let mut s = DamageSeries::new(positions);
            for k in 0..n_snaps {
                // A mix of sub-threshold values, damage, and deliberate exact
                // ties (quantized values) to exercise the tie-break rule.
                let d: Vec<f64> = (0..n_nodes)
                    .map(|_| {
                        if rng.random_bool(0.3) {
                            1.0 + 0.25 * rng.random_range(0..8) as f64
                        } else {
                            rng.random_range(0.0..1.0)
                        }
                    })
                    .collect();
                s.push(k, d).unwrap();
            }
            let stride = rng.random_range(1..15);
            let region = match rng.random_range(0..3) {
                0 => Region::All,
                1 => Region::HalfPlane {
                    origin: Vec2::new(rng.random_range(-0.5..0.5), 0.0),
                    normal: Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                },
                _ => Region::Rect {
                    lo: Vec2::new(-0.5, -0.5),
                    hi: Vec2::new(rng.random_range(-0.4..1.0), rng.random_range(-0.4..1.0)),
                },
            };
            assert_eq!(
                extract_tip_sequence(&s, stride, &region),
                brute_force(&s, stride, &region)
            );
        }
    }

    #[test]
    fn tip_half_planes_contain_their_tips() {
        let crack = CrackPath::segment(
            Vec2::new(0.04046283, 0.04699294),
            Vec2::new(0.05953717, 0.05300706),
        )
        .unwrap();
        let (left, right) = Region::tip_half_planes(&crack);
        assert!(left.contains(crack.tip(End::Start)));
        assert!(!left.contains(crack.tip(End::Finish)));
        assert!(right.contains(crack.tip(End::Finish)));
        assert!(!right.contains(crack.tip(End::Start)));
        // The midpoint sits on the bisector and belongs to both.
        let mid = 0.5 * (crack.tip(End::Start) + crack.tip(End::Finish));
        assert!(left.contains(mid) && right.contains(mid));
    }

    #[test]
    fn empty_branches_return_the_initial_crack() {
        let initial =
            CrackPath::segment(Vec2::new(0.05, 0.0), Vec2::new(0.05, 0.02)).unwrap();
        let path = build_crack_polyline(&initial, &[], &[]).unwrap();
        assert_eq!(path.points(), initial.points());
        assert_eq!(path.tip(End::Start), Vec2::new(0.05, 0.0));
        assert_eq!(path.tip(End::Finish), Vec2::new(0.05, 0.02));
    }

    #[test]
    fn branches_splice_in_time_order_onto_the_tips() {
        let initial = CrackPath::segment(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        let left = vec![Vec2::new(-1.0, 0.5), Vec2::new(-2.0, 1.0)];
        let right = vec![Vec2::new(2.0, -0.5), Vec2::new(3.0, -1.0)];
        let path = build_crack_polyline(&initial, &left, &right).unwrap();
        let expect = [
            Vec2::new(-2.0, 1.0),
            Vec2::new(-1.0, 0.5),
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, -0.5),
            Vec2::new(3.0, -1.0),
        ];
        assert_eq!(path.points(), expect);
    }

    #[test]
    fn stationary_tip_duplicates_collapse() {
        let initial = CrackPath::segment(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        // Repeats within a branch and points equal to the adjacent crack tip.
        let left = vec![Vec2::new(0.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(-1.0, 0.0)];
        let right = vec![Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(2.0, 0.0)];
        let path = build_crack_polyline(&initial, &left, &right).unwrap();
        let expect = [
            Vec2::new(-1.0, 0.0),
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
        ];
        assert_eq!(path.points(), expect);
    }

    #[test]
    fn collinear_extensions_keep_the_crack_direction() {
        let initial = CrackPath::segment(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)).unwrap();
        let left = vec![Vec2::new(-1.0, -1.0)];
        let right = vec![Vec2::new(2.0, 2.0)];
        let path = build_crack_polyline(&initial, &left, &right).unwrap();
        let dir = Vec2::new(1.0, 1.0).normalize();
        assert!((path.tip_tangent(End::Start) + dir).norm() < 1e-15);
        assert!((path.tip_tangent(End::Finish) - dir).norm() < 1e-15);
    }
}
