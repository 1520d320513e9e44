//! The enriched approximation space on a cover.
//!
//! Every patch carries the scalar local basis `{1, X, Y}` in patch-local
//! scaled coordinates. Patches whose box meets the crack additionally carry
//! the sign-of-side jump function; patches near an interior crack tip carry
//! the four root-singular tip functions
//! `√r {sin θ/2, cos θ/2, sin θ/2 sin θ, cos θ/2 sin θ}` in the tip frame
//! (taking precedence over the jump function). The same scalar space is
//! used for both displacement components.
//!
//! Raw local bases can degenerate — e.g. when the crack clips only a sliver
//! off a patch, the jump function is numerically constant on the rest. Each
//! patch is therefore stabilized through the eigendecomposition of its
//! local L² Gram matrix: eigenvectors below `1e-10·λ_max` are dropped and
//! the rest are rescaled, yielding an L²-orthonormal local basis.

use crate::crack::{CrackPath, End, TipFrame};
use crate::math::{segment_meets_box, Vec2};
use crate::pum::cover::Cover;
use crate::pum::quadrature::{patch_quadrature, QuadratureConfig};
use nalgebra::DMatrix;
use std::collections::HashMap;

/// Relative eigenvalue threshold below which local basis directions are
/// discarded.
const STAB_EPS: f64 = 1e-10;

/// Maximum raw scalar functions per patch (3 polynomials + 4 tip functions).
pub const MAX_RAW: usize = 7;

/// What a patch is enriched with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnrichmentTag {
    Plain,
    Jump,
    Tip(End),
}

#[derive(Debug, Clone)]
enum LocalEnrichment {
    None,
    /// Sign of the side of the crack (+1 / −1).
    Jump,
    /// Tip functions in this frame, with `r` normalized by `scale`.
    Tip { frame: TipFrame, scale: f64 },
}

#[derive(Debug, Clone)]
struct PatchBasis {
    center: Vec2,
    inv_scale: Vec2,
    enr: LocalEnrichment,
    raw_len: usize,
    /// Columns are the stabilized functions in terms of the raw ones.
    transform: DMatrix<f64>,
    /// Maps raw coefficients of a representable field to stabilized ones.
    represent: DMatrix<f64>,
}

/// One scalar shape function evaluated at a point.
#[derive(Debug, Clone, Copy)]
pub struct ShapeFn {
    /// Global scalar function index (two displacement DOFs per function).
    pub index: usize,
    pub value: f64,
    pub grad: Vec2,
}

/// The global approximation space: cover + per-patch stabilized local bases.
#[derive(Debug, Clone)]
pub struct PumSpace {
    pub cover: Cover,
    pub crack: Option<CrackPath>,
    tags: Vec<EnrichmentTag>,
    patches: Vec<PatchBasis>,
    offsets: Vec<usize>,
    num_scalar: usize,
}

impl PumSpace {
    /// Builds the space. `tip_radius` is the patch-center distance within
    /// which patches get tip enrichment (pass `None` for the default of two
    /// cell widths); tips lying on the domain boundary never trigger it.
    pub fn build(
        cover: Cover,
        crack: Option<CrackPath>,
        tip_radius: Option<f64>,
        quad: &QuadratureConfig,
    ) -> Self {
        let tip_radius =
            tip_radius.unwrap_or(4.0 * cover.h.x.max(cover.h.y));
        let tags = select_enrichments(&cover, crack.as_ref(), tip_radius);

        let mut patches = Vec::with_capacity(cover.num_patches());
        let mut offsets = Vec::with_capacity(cover.num_patches() + 1);
        let mut num_scalar = 0;
        // Uncracked patches with the same boundary-clip pattern share their
        // Gram geometry exactly (uniform cover), so compute each class once.
        let mut plain_cache: HashMap<u8, (DMatrix<f64>, DMatrix<f64>)> = HashMap::new();

        for i in 0..cover.num_patches() {
            let center = cover.center(i);
            let scale = cover.h * cover.alpha;
            let enr = match tags[i] {
                EnrichmentTag::Plain => LocalEnrichment::None,
                EnrichmentTag::Jump => LocalEnrichment::Jump,
                EnrichmentTag::Tip(end) => LocalEnrichment::Tip {
                    frame: crack.as_ref().unwrap().tip_frame(end),
                    scale: cover.alpha * cover.h.x.max(cover.h.y),
                },
            };
            let mut basis = PatchBasis {
                center,
                inv_scale: Vec2::new(1.0 / scale.x, 1.0 / scale.y),
                enr,
                raw_len: 0,
                transform: DMatrix::zeros(0, 0),
                represent: DMatrix::zeros(0, 0),
            };
            basis.raw_len = basis.raw_count();

            let cached = if matches!(tags[i], EnrichmentTag::Plain) {
                let (plo, phi) = cover.patch_box(i);
                let mask = (u8::from(plo.x < cover.lo.x))
                    | (u8::from(phi.x > cover.hi.x) << 1)
                    | (u8::from(plo.y < cover.lo.y) << 2)
                    | (u8::from(phi.y > cover.hi.y) << 3);
                Some(mask)
            } else {
                None
            };

            let (transform, represent) = match cached.and_then(|m| plain_cache.get(&m).cloned()) {
                Some(tr) => tr,
                None => {
                    let tr = stabilize(&cover, i, &basis, crack.as_ref(), quad);
                    if let Some(mask) = cached {
                        plain_cache.insert(mask, tr.clone());
                    }
                    tr
                }
            };
            basis.transform = transform;
            basis.represent = represent;

            offsets.push(num_scalar);
            num_scalar += basis.transform.ncols();
            patches.push(basis);
        }
        offsets.push(num_scalar);

        Self { cover, crack, tags, patches, offsets, num_scalar }
    }

    pub fn tag(&self, patch: usize) -> EnrichmentTag {
        self.tags[patch]
    }

    /// Number of scalar functions; displacement DOFs are twice this.
    pub fn num_scalar_functions(&self) -> usize {
        self.num_scalar
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.num_scalar
    }

    /// Scalar functions of one patch: global range `[start, start+len)`.
    pub fn patch_functions(&self, patch: usize) -> std::ops::Range<usize> {
        self.offsets[patch]..self.offsets[patch + 1]
    }

    /// Stabilized local functions of a patch at `x` (no partition of unity
    /// applied): values and gradients, in patch-function order.
    pub fn local_functions(&self, patch: usize, x: Vec2) -> Vec<(f64, Vec2)> {
        let b = &self.patches[patch];
        let mut vals = [0.0; MAX_RAW];
        let mut grads = [Vec2::zeros(); MAX_RAW];
        b.raw_eval(self.crack.as_ref(), x, &mut vals, &mut grads);
        let k = b.transform.ncols();
        let mut out = Vec::with_capacity(k);
        for a in 0..k {
            let mut v = 0.0;
            let mut g = Vec2::zeros();
            for r in 0..b.raw_len {
                let t = b.transform[(r, a)];
                v += t * vals[r];
                g += grads[r] * t;
            }
            out.push((v, g));
        }
        out
    }

    /// All global scalar shape functions `φ_i ψ_a` alive at `x`, with
    /// gradients.
    pub fn shape_functions(&self, x: Vec2) -> Vec<ShapeFn> {
        let mut out = Vec::with_capacity(16);
        self.shape_functions_into(x, &mut out);
        out
    }

    /// As [`Self::shape_functions`], reusing the output buffer (cleared
    /// first) — the assembly inner loop calls this per quadrature point.
    pub fn shape_functions_into(&self, x: Vec2, out: &mut Vec<ShapeFn>) {
        out.clear();
        for (patch, phi, dphi) in self.cover.shepard(x) {
            let b = &self.patches[patch];
            let mut vals = [0.0; MAX_RAW];
            let mut grads = [Vec2::zeros(); MAX_RAW];
            b.raw_eval(self.crack.as_ref(), x, &mut vals, &mut grads);
            let start = self.offsets[patch];
            for a in 0..b.transform.ncols() {
                let mut v = 0.0;
                let mut g = Vec2::zeros();
                for r in 0..b.raw_len {
                    let t = b.transform[(r, a)];
                    v += t * vals[r];
                    g += grads[r] * t;
                }
                out.push(ShapeFn { index: start + a, value: phi * v, grad: dphi * v + g * phi });
            }
        }
    }

    /// Evaluates the displacement field of a coefficient vector (layout:
    /// `[f0_x, f0_y, f1_x, f1_y, …]`) at `x`.
    pub fn displacement(&self, coeffs: &[f64], x: Vec2) -> Vec2 {
        debug_assert_eq!(coeffs.len(), self.num_dofs());
        let mut u = Vec2::zeros();
        for sf in self.shape_functions(x) {
            u.x += sf.value * coeffs[2 * sf.index];
            u.y += sf.value * coeffs[2 * sf.index + 1];
        }
        u
    }

    /// Displacement gradient `∂u_i/∂x_j` at `x`.
    pub fn displacement_gradient(&self, coeffs: &[f64], x: Vec2) -> crate::math::Mat2 {
        let mut g = crate::math::Mat2::zeros();
        for sf in self.shape_functions(x) {
            let (cx, cy) = (coeffs[2 * sf.index], coeffs[2 * sf.index + 1]);
            g[(0, 0)] += cx * sf.grad.x;
            g[(0, 1)] += cx * sf.grad.y;
            g[(1, 0)] += cy * sf.grad.x;
            g[(1, 1)] += cy * sf.grad.y;
        }
        g
    }

    /// Stabilized coefficients representing the patch-local raw coefficient
    /// vector (exact when the raw field has no component in dropped
    /// directions; least-squares otherwise).
    pub fn represent_raw(&self, patch: usize, raw: &[f64]) -> Vec<f64> {
        let b = &self.patches[patch];
        assert_eq!(raw.len(), b.raw_len);
        let c = b.represent.clone() * DMatrix::from_column_slice(raw.len(), 1, raw);
        c.column(0).iter().copied().collect()
    }

    /// Raw scalar basis size of a patch (before stabilization).
    pub fn raw_len(&self, patch: usize) -> usize {
        self.patches[patch].raw_len
    }

    /// Patch-local scaled coordinates of a point (for building raw
    /// coefficient vectors of polynomial fields).
    pub fn local_coords(&self, patch: usize, x: Vec2) -> Vec2 {
        let b = &self.patches[patch];
        Vec2::new((x.x - b.center.x) * b.inv_scale.x, (x.y - b.center.y) * b.inv_scale.y)
    }

    /// Center and scaled-coordinate factors of a patch, for callers that
    /// expand analytic fields into raw coefficients.
    pub fn patch_frame(&self, patch: usize) -> (Vec2, Vec2) {
        let b = &self.patches[patch];
        (b.center, Vec2::new(1.0 / b.inv_scale.x, 1.0 / b.inv_scale.y))
    }

    /// Coefficient vector whose displacement field is exactly the linear
    /// field `u(x) = a + B x` (enrichment components zero).
    pub fn linear_coefficients(&self, a: Vec2, b: crate::math::Mat2) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.num_dofs()];
        for i in 0..self.cover.num_patches() {
            let (c, s) = self.patch_frame(i);
            for comp in 0..2 {
                let grad = Vec2::new(b[(comp, 0)], b[(comp, 1)]);
                let mut raw = vec![0.0; self.raw_len(i)];
                raw[0] = a[comp] + grad.dot(&c);
                raw[1] = grad.x * s.x;
                raw[2] = grad.y * s.y;
                let st = self.represent_raw(i, &raw);
                for (k, f) in self.patch_functions(i).enumerate() {
                    coeffs[2 * f + comp] = st[k];
                }
            }
        }
        coeffs
    }

    /// The three rigid-body modes (two translations and the infinitesimal
    /// rotation `u = (−y, x)`), as coefficient vectors. These span the
    /// null space of the elastic stiffness in pure-traction problems.
    pub fn rigid_modes(&self) -> Vec<Vec<f64>> {
        vec![
            self.linear_coefficients(Vec2::new(1.0, 0.0), crate::math::Mat2::zeros()),
            self.linear_coefficients(Vec2::new(0.0, 1.0), crate::math::Mat2::zeros()),
            self.linear_coefficients(Vec2::zeros(), crate::math::Mat2::new(0.0, -1.0, 1.0, 0.0)),
        ]
    }
}

impl PatchBasis {
    fn raw_count(&self) -> usize {
        match self.enr {
            LocalEnrichment::None => 3,
            LocalEnrichment::Jump => 4,
            LocalEnrichment::Tip { .. } => 7,
        }
    }

    /// Raw local basis values and gradients at `x`.
    fn raw_eval(
        &self,
        crack: Option<&CrackPath>,
        x: Vec2,
        vals: &mut [f64; MAX_RAW],
        grads: &mut [Vec2; MAX_RAW],
    ) {
        vals[0] = 1.0;
        grads[0] = Vec2::zeros();
        vals[1] = (x.x - self.center.x) * self.inv_scale.x;
        grads[1] = Vec2::new(self.inv_scale.x, 0.0);
        vals[2] = (x.y - self.center.y) * self.inv_scale.y;
        grads[2] = Vec2::new(0.0, self.inv_scale.y);
        match &self.enr {
            LocalEnrichment::None => {}
            LocalEnrichment::Jump => {
                vals[3] = crack.expect("jump enrichment without crack").side(x);
                grads[3] = Vec2::zeros();
            }
            LocalEnrichment::Tip { frame, scale } => {
                let (vs, gs) = tip_functions(frame, *scale, x);
                vals[3..7].copy_from_slice(&vs);
                grads[3..7].copy_from_slice(&gs);
            }
        }
    }
}

/// The four crack-tip functions and their gradients at `x`, in the tip
/// frame, with `r` measured in units of `scale` so values are O(1) on
/// nearby patches.
pub fn tip_functions(frame: &TipFrame, scale: f64, x: Vec2) -> ([f64; 4], [Vec2; 4]) {
    let (r, theta) = frame.polar(x);
    let rn = (r / scale).max(1e-300);
    let sq = rn.sqrt();
    let (s2, c2) = (0.5 * theta).sin_cos();
    let (s1, c1) = theta.sin_cos();

    let vals = [sq * s2, sq * c2, sq * s2 * s1, sq * c2 * s1];

    // d/dr in normalized radius, d/dθ.
    let dr = [
        0.5 / sq * s2,
        0.5 / sq * c2,
        0.5 / sq * s2 * s1,
        0.5 / sq * c2 * s1,
    ];
    let dt = [
        sq * 0.5 * c2,
        sq * -0.5 * s2,
        sq * (0.5 * c2 * s1 + s2 * c1),
        sq * (-0.5 * s2 * s1 + c2 * c1),
    ];

    // Polar chain rule in the tip frame, then rotate to global axes.
    // ∇f = f_r ê_r + (f_θ / r) ê_θ with ê_r, ê_θ expressed via the frame.
    let er = frame.e1 * c1 + frame.e2 * s1;
    let et = frame.e2 * c1 - frame.e1 * s1;
    let inv_r = 1.0 / rn.max(1e-300);
    let mut grads = [Vec2::zeros(); 4];
    for k in 0..4 {
        grads[k] = (er * dr[k] + et * (dt[k] * inv_r)) / scale;
    }
    (vals, grads)
}

/// Per-patch enrichment tags for a cover and crack.
pub fn select_enrichments(
    cover: &Cover,
    crack: Option<&CrackPath>,
    tip_radius: f64,
) -> Vec<EnrichmentTag> {
    let n = cover.num_patches();
    let Some(ck) = crack else {
        return vec![EnrichmentTag::Plain; n];
    };
    let interior_tips: Vec<(End, Vec2)> = [End::Start, End::Finish]
        .into_iter()
        .map(|e| (e, ck.tip(e)))
        .filter(|(_, t)| {
            let eps = 1e-12 * (cover.hi - cover.lo).norm();
            t.x > cover.lo.x + eps
                && t.x < cover.hi.x - eps
                && t.y > cover.lo.y + eps
                && t.y < cover.hi.y - eps
        })
        .collect();

    (0..n)
        .map(|i| {
            let c = cover.center(i);
            let mut best: Option<(f64, End)> = None;
            for (end, tip) in &interior_tips {
                let d = (c - tip).norm();
                if d <= tip_radius && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, *end));
                }
            }
            if let Some((_, end)) = best {
                return EnrichmentTag::Tip(end);
            }
            let (lo, hi) = cover.patch_box(i);
            if ck.segments().any(|(a, b)| segment_meets_box(a, b, lo, hi)) {
                EnrichmentTag::Jump
            } else {
                EnrichmentTag::Plain
            }
        })
        .collect()
}

/// Gram-based stabilization of one patch: orthonormalize the raw basis in
/// L²(patch ∩ domain), dropping directions whose eigenvalue falls below
/// `STAB_EPS · λ_max`. Returns the transform (raw×kept) and the represent
/// map (kept×raw).
fn stabilize(
    cover: &Cover,
    patch: usize,
    basis: &PatchBasis,
    crack: Option<&CrackPath>,
    quad: &QuadratureConfig,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = basis.raw_len;
    let pts = patch_quadrature(cover, patch, crack, quad);
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut vals = [0.0; MAX_RAW];
    let mut grads = [Vec2::zeros(); MAX_RAW];
    for p in &pts {
        basis.raw_eval(crack, p.x, &mut vals, &mut grads);
        for a in 0..m {
            for b in a..m {
                gram[(a, b)] += p.w * vals[a] * vals[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let eig = gram.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..m)
        .filter(|&k| eig.eigenvalues[k] > STAB_EPS * lambda_max)
        .collect();
    let mut transform = DMatrix::zeros(m, kept.len());
    let mut represent = DMatrix::zeros(kept.len(), m);
    for (col, &k) in kept.iter().enumerate() {
        let lam: f64 = eig.eigenvalues[k];
        let s = lam.sqrt();
        for r in 0..m {
            transform[(r, col)] = eig.eigenvectors[(r, k)] / s;
            represent[(col, r)] = eig.eigenvectors[(r, k)] * s;
        }
    }
    (transform, represent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use std::f64::consts::PI;

    fn frame_at_origin() -> TipFrame {
        // Outward tangent along +x: crack occupies the −x ray.
        TipFrame { origin: Vec2::zeros(), e1: Vec2::new(1.0, 0.0), e2: Vec2::new(0.0, 1.0) }
    }

    #[test]
    fn tip_functions_on_faces_and_ahead() {
        let f = frame_at_origin();
        // On the upper crack face (θ = π): {√r, 0, 0, 0}.
        let x = Vec2::new(-0.25, 1e-300);
        let (v, _) = tip_functions(&f, 1.0, x);
        assert_relative_eq!(v[0], 0.5, max_relative = 1e-12);
        assert!(v[1].abs() < 1e-12 && v[2].abs() < 1e-12 && v[3].abs() < 1e-12);
        // Ahead of the tip (θ = 0): {0, √r, 0, 0}.
        let (v, _) = tip_functions(&f, 1.0, Vec2::new(0.36, 0.0));
        assert!(v[0].abs() < 1e-15);
        assert_relative_eq!(v[1], 0.6, max_relative = 1e-12);
        assert!(v[2].abs() < 1e-15 && v[3].abs() < 1e-15);
    }

    #[test]
    fn only_the_first_tip_function_jumps_across_the_faces() {
        let f = frame_at_origin();
        let r = 0.3;
        let eps = 1e-9;
        let above = tip_functions(&f, 1.0, Vec2::new(-r, eps)).0;
        let below = tip_functions(&f, 1.0, Vec2::new(-r, -eps)).0;
        assert_relative_eq!(above[0] - below[0], 2.0 * r.sqrt(), max_relative = 1e-8);
        for k in 1..4 {
            assert!((above[k] - below[k]).abs() < 1e-8, "function {k} jumped");
        }
    }

    #[test]
    fn tip_function_gradients_match_finite_differences() {
        let f = TipFrame {
            origin: Vec2::new(0.3, -0.2),
            e1: Vec2::new(0.6, 0.8),
            e2: Vec2::new(-0.8, 0.6),
        };
        let scale = 0.05;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let eps = 1e-7;
        for _ in 0..200 {
            // Sample away from the branch faces so central differences are valid.
            let r = rng.random_range(0.01..0.5);
            let th = rng.random_range(-0.9 * PI..0.9 * PI);
            let x = f.origin + (f.e1 * th.cos() + f.e2 * th.sin()) * r;
            let (_, g) = tip_functions(&f, scale, x);
            for k in 0..4 {
                let fd = Vec2::new(
                    (tip_functions(&f, scale, x + Vec2::new(eps, 0.0)).0[k]
                        - tip_functions(&f, scale, x - Vec2::new(eps, 0.0)).0[k])
                        / (2.0 * eps),
                    (tip_functions(&f, scale, x + Vec2::new(0.0, eps)).0[k]
                        - tip_functions(&f, scale, x - Vec2::new(0.0, eps)).0[k])
                        / (2.0 * eps),
                );
                let tol = 1e-4 * g[k].norm().max(1.0);
                assert!((g[k] - fd).norm() < tol, "fn {k} at r={r} th={th}: {:?} vs {fd:?}", g[k]);
            }
        }
    }

    #[test]
    fn enrichment_selection_follows_geometry() {
        let cover = Cover::new(Vec2::zeros(), Vec2::new(1.0, 1.0), 4, 1.25).unwrap();
        // Vertical crack from the bottom boundary to an interior tip.
        let crack = CrackPath::new(vec![Vec2::new(0.5, 0.0), Vec2::new(0.5, 0.4)]).unwrap();
        let tip_radius = 4.0 * cover.h.x;
        let tags = select_enrichments(&cover, Some(&crack), tip_radius);
        let tip = Vec2::new(0.5, 0.4);
        let mut tips = 0;
        let mut jumps = 0;
        for i in 0..cover.num_patches() {
            let c = cover.center(i);
            let expected = if (c - tip).norm() <= tip_radius {
                EnrichmentTag::Tip(End::Finish)
            } else {
                let (lo, hi) = cover.patch_box(i);
                if lo.x < 0.5 && hi.x > 0.5 && lo.y < 0.4 {
                    EnrichmentTag::Jump
                } else {
                    EnrichmentTag::Plain
                }
            };
            assert_eq!(tags[i], expected, "patch {i} at {c:?}");
            match tags[i] {
                EnrichmentTag::Tip(_) => tips += 1,
                EnrichmentTag::Jump => jumps += 1,
                EnrichmentTag::Plain => {}
            }
        }
        assert!(tips > 0 && jumps > 0);
        // The mouth tip lies on the boundary: patches around (0.5, 0) must
        // not be tip-enriched (they are jump patches instead).
        let mouth_patch = {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for i in 0..cover.num_patches() {
                let d = (cover.center(i) - Vec2::new(0.5, 0.0)).norm();
                if d < bd {
                    bd = d;
                    best = i;
                }
            }
            best
        };
        assert_eq!(tags[mouth_patch], EnrichmentTag::Jump);
    }

    #[test]
    fn stabilized_basis_is_orthonormal() {
        let cover = Cover::new(Vec2::zeros(), Vec2::new(1.0, 1.0), 2, 1.25).unwrap();
        let crack = CrackPath::new(vec![Vec2::new(0.31, 0.0), Vec2::new(0.31, 0.52)]).unwrap();
        let quad = QuadratureConfig::default();
        let space = PumSpace::build(cover.clone(), Some(crack.clone()), None, &quad);
        for i in 0..cover.num_patches() {
            let k = space.patch_functions(i).len();
            let pts = patch_quadrature(&cover, i, Some(&crack), &quad);
            let mut gram = DMatrix::<f64>::zeros(k, k);
            for p in &pts {
                let loc = space.local_functions(i, p.x);
                for a in 0..k {
                    for b in 0..k {
                        gram[(a, b)] += p.w * loc[a].0 * loc[b].0;
                    }
                }
            }
            for a in 0..k {
                for b in 0..k {
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!(
                        (gram[(a, b)] - expect).abs() < 1e-8,
                        "patch {i} ({:?}) gram[{a},{b}] = {}",
                        space.tag(i),
                        gram[(a, b)]
                    );
                }
            }
        }
    }

    #[test]
    fn sliver_cut_drops_the_degenerate_jump_function() {
        let cover = Cover::new(Vec2::zeros(), Vec2::new(1.0, 1.0), 1, 1.25).unwrap();
        // Crack that clips only an immeasurably thin corner off patch 0's
        // box: the jump function is constant on the remainder.
        let crack = CrackPath::new(vec![
            Vec2::new(-0.1, 1e-13),
            Vec2::new(1e-13, -0.1),
        ])
        .unwrap();
        let tags = select_enrichments(&cover, Some(&crack), 0.0);
        assert_eq!(tags[0], EnrichmentTag::Jump);
        let space = PumSpace::build(cover, Some(crack), Some(0.0), &QuadratureConfig::default());
        // Raw basis is 4 functions, but only 3 independent ones survive.
        assert_eq!(space.raw_len(0), 4);
        assert_eq!(space.patch_functions(0).len(), 3);
    }

    #[test]
    fn linear_fields_are_reproduced() {
        let cover = Cover::new(Vec2::new(-0.2, 0.1), Vec2::new(1.0, 0.7), 3, 1.25).unwrap();
        let space = PumSpace::build(cover, None, None, &QuadratureConfig::default());
        // u(x) = a + B x, expanded patch-wise into raw coefficients.
        let (a, b) = (Vec2::new(0.3, -0.1), crate::math::Mat2::new(1.5, 0.25, -0.75, 2.0));
        let mut coeffs = vec![0.0; space.num_dofs()];
        for i in 0..space.cover.num_patches() {
            let (c, s) = space.patch_frame(i);
            for comp in 0..2 {
                let grad = Vec2::new(b[(comp, 0)], b[(comp, 1)]);
                let raw = [a[comp] + grad.dot(&c), grad.x * s.x, grad.y * s.y];
                let st = space.represent_raw(i, &raw);
                for (k, f) in space.patch_functions(i).enumerate() {
                    coeffs[2 * f + comp] = st[k];
                }
            }
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = Vec2::new(rng.random_range(-0.2..1.0), rng.random_range(0.1..0.7));
            let u = space.displacement(&coeffs, x);
            let exact = a + crate::math::Mat2::new(b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)])
                * x;
            assert!((u - exact).norm() <= 1e-11 * exact.norm().max(1.0), "{u:?} vs {exact:?}");
            let g = space.displacement_gradient(&coeffs, x);
            for r in 0..2 {
                for cidx in 0..2 {
                    assert!((g[(r, cidx)] - b[(r, cidx)]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn jump_field_is_reproduced_on_cut_patches() {
        let cover = Cover::new(Vec2::zeros(), Vec2::new(1.0, 1.0), 2, 1.25).unwrap();
        let crack = CrackPath::new(vec![Vec2::new(0.47, -0.2), Vec2::new(0.47, 1.2)]).unwrap();
        let space =
            PumSpace::build(cover, Some(crack.clone()), None, &QuadratureConfig::default());
        // Field: pure jump u_x = side(x) · 0.5. Raw coefficients: jump
        // function slot on cut patches, constant slot elsewhere.
        let mut coeffs = vec![0.0; space.num_dofs()];
        for i in 0..space.cover.num_patches() {
            let raw = match space.tag(i) {
                EnrichmentTag::Jump => vec![0.0, 0.0, 0.0, 0.5],
                EnrichmentTag::Plain => {
                    let s = crack.side(space.cover.center(i));
                    vec![0.5 * s, 0.0, 0.0]
                }
                EnrichmentTag::Tip(_) => unreachable!("crack spans the domain"),
            };
            let st = space.represent_raw(i, &raw);
            for (k, f) in space.patch_functions(i).enumerate() {
                coeffs[2 * f] = st[k];
            }
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let x = Vec2::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            if (x.x - 0.47).abs() < 1e-6 {
                continue;
            }
            let u = space.displacement(&coeffs, x);
            let expect = 0.5 * crack.side(x);
            assert!(
                (u.x - expect).abs() < 1e-10,
                "at {x:?}: {} vs {expect}",
                u.x
            );
            assert!(u.y.abs() < 1e-12);
        }
    }
}
