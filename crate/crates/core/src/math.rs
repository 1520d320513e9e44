//! Small geometric and numerical primitives shared by both solvers.

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

/// z-component of the cross product of two plane vectors.
#[inline]
pub fn cross2(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Supported orders are 1..=8; an order-`n` rule integrates polynomials of
/// degree `2n - 1` exactly.
pub fn gauss_legendre(n: usize) -> (&'static [f64], &'static [f64]) {
    match n {
        1 => (&GL1_X, &GL1_W),
        2 => (&GL2_X, &GL2_W),
        3 => (&GL3_X, &GL3_W),
        4 => (&GL4_X, &GL4_W),
        5 => (&GL5_X, &GL5_W),
        6 => (&GL6_X, &GL6_W),
        7 => (&GL7_X, &GL7_W),
        8 => (&GL8_X, &GL8_W),
        _ => panic!("gauss_legendre: unsupported order {n} (supported 1..=8)"),
    }
}

static GL1_X: [f64; 1] = [0.0];
static GL1_W: [f64; 1] = [2.0];

static GL2_X: [f64; 2] = [-0.5773502691896257, 0.5773502691896257];
static GL2_W: [f64; 2] = [1.0, 1.0];

static GL3_X: [f64; 3] = [-0.7745966692414834, 0.0, 0.7745966692414834];
static GL3_W: [f64; 3] = [
    0.5555555555555556,
    0.8888888888888888,
    0.5555555555555556,
];

static GL4_X: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
static GL4_W: [f64; 4] = [
    0.34785484513745385,
    0.6521451548625461,
    0.6521451548625461,
    0.34785484513745385,
];

static GL5_X: [f64; 5] = [
    -0.906179845938664,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.906179845938664,
];
static GL5_W: [f64; 5] = [
    0.23692688505618908,
    0.47862867049936647,
    0.5688888888888889,
    0.47862867049936647,
    0.23692688505618908,
];

static GL6_X: [f64; 6] = [
    -0.9324695142031521,
    -0.6612093864662645,
    -0.2386191860831969,
    0.2386191860831969,
    0.6612093864662645,
    0.9324695142031521,
];
static GL6_W: [f64; 6] = [
    0.17132449237917036,
    0.36076157304813866,
    0.46791393457269104,
    0.46791393457269104,
    0.36076157304813866,
    0.17132449237917036,
];

static GL7_X: [f64; 7] = [
    -0.9491079123427585,
    -0.7415311855993945,
    -0.4058451513773972,
    0.0,
    0.4058451513773972,
    0.7415311855993945,
    0.9491079123427585,
];
static GL7_W: [f64; 7] = [
    0.1294849661688697,
    0.27970539148927664,
    0.3818300505051189,
    0.4179591836734694,
    0.3818300505051189,
    0.27970539148927664,
    0.1294849661688697,
];

static GL8_X: [f64; 8] = [
    -0.9602898564975363,
    -0.7966664774136267,
    -0.525532409916329,
    -0.1834346424956498,
    0.1834346424956498,
    0.525532409916329,
    0.7966664774136267,
    0.9602898564975363,
];
static GL8_W: [f64; 8] = [
    0.10122853629037626,
    0.22238103445337448,
    0.31370664587788727,
    0.362683783378362,
    0.362683783378362,
    0.31370664587788727,
    0.22238103445337448,
    0.10122853629037626,
];

/// Closest point to `p` on the segment `a`–`b`, returned with its parameter
/// `t` in `[0, 1]` (`a + t (b - a)`).
pub fn closest_point_on_segment(p: Vec2, a: Vec2, b: Vec2) -> (Vec2, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (a, 0.0);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + ab * t, t)
}

/// Euclidean distance from `p` to the segment `a`–`b`.
pub fn dist_point_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let (q, _) = closest_point_on_segment(p, a, b);
    (p - q).norm()
}

/// Whether segments `p0`–`p1` and `q0`–`q1` intersect, where touching
/// configurations count as intersecting.
///
/// Robust for the lattice-aligned inputs that occur here (exact collinearity,
/// shared endpoints); not exact for adversarial near-degenerate input.
pub fn segments_intersect(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> bool {
    let d1 = cross2(q1 - q0, p0 - q0);
    let d2 = cross2(q1 - q0, p1 - q0);
    let d3 = cross2(p1 - p0, q0 - p0);
    let d4 = cross2(p1 - p0, q1 - p0);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |d: f64, a: Vec2, b: Vec2, p: Vec2| -> bool {
        d == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
    };
    on(d1, q0, q1, p0) || on(d2, q0, q1, p1) || on(d3, p0, p1, q0) || on(d4, p0, p1, q1)
}

/// Whether the segment `a`–`b` meets the closed axis-aligned box `[lo, hi]`.
pub fn segment_meets_box(a: Vec2, b: Vec2, lo: Vec2, hi: Vec2) -> bool {
    let inside = |p: Vec2| p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    if inside(a) || inside(b) {
        return true;
    }
    let corners = [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
    (0..4).any(|k| segments_intersect(a, b, corners[k], corners[(k + 1) % 4]))
}

/// Intersection parameter of segment `p0`–`p1` with the infinite line through
/// `a` with (non-unit) direction `d`, as `t` with the point at `p0 + t (p1 - p0)`.
///
/// Returns `None` for (near-)parallel configurations.
pub fn segment_line_param(p0: Vec2, p1: Vec2, a: Vec2, d: Vec2) -> Option<f64> {
    let r = p1 - p0;
    let denom = cross2(r, d);
    if denom == 0.0 {
        return None;
    }
    Some(cross2(a - p0, d) / denom)
}

/// Signed area of a simple polygon (positive for counter-clockwise order).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += cross2(poly[i], poly[j]);
    }
    0.5 * acc
}

/// Clips a convex polygon against the half-plane `{ x : (x - a)·n >= 0 }`.
///
/// Vertices exactly on the line are kept, so splitting by `n` and `-n`
/// reproduces the polygon's area exactly up to round-off.
pub fn clip_convex_polygon(poly: &[Vec2], a: Vec2, n: Vec2) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    let m = poly.len();
    for i in 0..m {
        let cur = poly[i];
        let next = poly[(i + 1) % m];
        let dc = (cur - a).dot(&n);
        let dn = (next - a).dot(&n);
        if dc >= 0.0 {
            out.push(cur);
        }
        if (dc > 0.0 && dn < 0.0) || (dc < 0.0 && dn > 0.0) {
            let t = dc / (dc - dn);
            out.push(cur + (next - cur) * t);
        }
    }
    out
}

/// Collects `values`, sorts them, and removes entries closer than `tol` to
/// their predecessor. Used to build break-point lists for 1D quadrature.
pub fn sorted_dedup(mut values: Vec<f64>, tol: f64) -> Vec<f64> {
    values.sort_by(|a, b| a.partial_cmp(b).expect("NaN in break points"));
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        if out.last().is_none_or(|&last| v - last > tol) {
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rules_integrate_monomials_exactly() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            assert_eq!(x.len(), n);
            for k in 0..=(2 * n - 1) {
                let num: f64 = x.iter().zip(w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
                assert!(
                    (num - exact).abs() < 1e-14,
                    "order {n}, monomial x^{k}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn closest_point_clamps_to_ends() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(1.0, 0.0);
        let (q, t) = closest_point_on_segment(Vec2::new(-2.0, 1.0), a, b);
        assert_eq!(t, 0.0);
        assert_eq!(q, a);
        let (q, t) = closest_point_on_segment(Vec2::new(0.25, 3.0), a, b);
        assert_relative_eq!(t, 0.25);
        assert_relative_eq!(q.x, 0.25);
        assert_eq!(q.y, 0.0);
    }

    #[test]
    fn segment_intersection_cases() {
        let o = Vec2::new(0.0, 0.0);
        // proper crossing
        assert!(segments_intersect(
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
            Vec2::new(1.0, -1.0)
        ));
        // touching at an endpoint counts
        assert!(segments_intersect(
            o,
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 5.0)
        ));
        // disjoint parallel
        assert!(!segments_intersect(
            o,
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0)
        ));
        // collinear overlapping
        assert!(segments_intersect(
            o,
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(3.0, 0.0)
        ));
        // collinear disjoint
        assert!(!segments_intersect(
            o,
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(3.0, 0.0)
        ));
    }

    #[test]
    fn polygon_clip_preserves_total_area() {
        let square = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
        ];
        let a = Vec2::new(0.3, 0.0);
        let n = Vec2::new(1.0, 0.4).normalize();
        let left = clip_convex_polygon(&square, a, n);
        let right = clip_convex_polygon(&square, a, -n);
        let total = polygon_area(&left).abs() + polygon_area(&right).abs();
        assert_relative_eq!(total, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn clip_line_missing_polygon_keeps_or_empties() {
        let tri = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let kept = clip_convex_polygon(&tri, Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));
        assert_relative_eq!(polygon_area(&kept).abs(), 0.5);
        let empty = clip_convex_polygon(&tri, Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.0));
        assert!(empty.is_empty());
    }

    #[test]
    fn sorted_dedup_merges_close_points() {
        let v = sorted_dedup(vec![0.5, 0.0, 0.5 + 1e-12, 1.0], 1e-9);
        assert_eq!(v, vec![0.0, 0.5, 1.0]);
    }
}
