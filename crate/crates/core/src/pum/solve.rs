//! Solution drivers for the assembled systems: direct/iterative statics
//! (with rigid-mode deflation for pure-traction problems) and explicit
//! leapfrog dynamics with a consistent mass matrix.

use crate::math::Vec2;
use crate::pd::dynamics::smoothstep;
use crate::pum::assemble::Assembled;
use crate::pum::space::PumSpace;
use crate::sparse::{cg, dense_cholesky_solve, orthonormalize, BlockJacobi, Csr, SolveError};
use thiserror::Error;

/// Time profile applied to the load vector (and Dirichlet data, which is
/// baked into the load) during a dynamic run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ramp {
    /// C¹ smoothstep from 0 to 1 over `t_ramp`, then constant 1.
    Smoothstep { t_ramp: f64 },
    /// Linear from 0 to 1 over `t_ramp`, then constant 1.
    Linear { t_ramp: f64 },
    /// Full value from the start.
    Constant,
}

impl Ramp {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            Ramp::Smoothstep { t_ramp } => smoothstep(t, t_ramp),
            Ramp::Linear { t_ramp } => {
                if t_ramp <= 0.0 || t >= t_ramp {
                    1.0
                } else if t <= 0.0 {
                    0.0
                } else {
                    t / t_ramp
                }
            }
            Ramp::Constant => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StaticOptions {
    /// Systems at or below this many unknowns use dense Cholesky.
    pub dense_cutoff: usize,
    /// Relative residual tolerance of the iterative path.
    pub rtol: f64,
    pub threads: usize,
}

impl Default for StaticOptions {
    fn default() -> Self {
        Self { dense_cutoff: 2000, rtol: 1e-10, threads: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct StaticSolution {
    pub coeffs: Vec<f64>,
    /// Conjugate-gradient iterations (0 on the direct path).
    pub iterations: usize,
}

/// Per-patch unknown-block boundaries, the natural preconditioner blocks.
pub fn patch_block_starts(space: &PumSpace) -> Vec<usize> {
    let np = space.cover.num_patches();
    let mut starts: Vec<usize> = (0..np).map(|p| 2 * space.patch_functions(p).start).collect();
    starts.push(space.num_dofs());
    starts
}

/// Solves the static problem. Dirichlet-constrained systems are positive
/// definite and go through Cholesky or preconditioned conjugate gradients;
/// pure-traction systems are solved in the complement of the rigid-body
/// modes (the right-hand side is projected onto the compatible subspace).
pub fn solve_static(
    space: &PumSpace,
    sys: &Assembled,
    opts: &StaticOptions,
) -> Result<StaticSolution, SolveError> {
    let n = sys.stiffness.n();
    let max_iter = (50.0 * (n as f64).sqrt()) as usize + 500;
    if sys.has_dirichlet {
        if n <= opts.dense_cutoff {
            let coeffs = dense_cholesky_solve(&sys.stiffness, &sys.load)?;
            Ok(StaticSolution { coeffs, iterations: 0 })
        } else {
            let pre = BlockJacobi::new(&sys.stiffness, &patch_block_starts(space));
            let out = cg(&sys.stiffness, &sys.load, None, Some(&pre), &[], opts.rtol, max_iter, opts.threads)?;
            Ok(StaticSolution { coeffs: out.x, iterations: out.iterations })
        }
    } else {
        let null = orthonormalize(space.rigid_modes());
        let pre = BlockJacobi::new(&sys.stiffness, &patch_block_starts(space));
        let out = cg(
            &sys.stiffness,
            &sys.load,
            None,
            Some(&pre),
            &null,
            opts.rtol,
            max_iter,
            opts.threads,
        )?;
        Ok(StaticSolution { coeffs: out.x, iterations: out.iterations })
    }
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("time integration diverged at step {step}: |u|inf = {norm:.3e}")]
    Diverged { step: usize, norm: f64 },
}

#[derive(Debug, Clone)]
pub struct DynamicOptions {
    pub dt: f64,
    pub n_steps: usize,
    pub ramp: Ramp,
    /// Record the state every this many steps (0 disables snapshots).
    pub snapshot_stride: usize,
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct DynamicSolution {
    /// Displacement coefficients at the final time.
    pub coeffs: Vec<f64>,
    /// `(time, coefficients)` at the requested stride.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    /// Total mass-solve iterations over the whole run (diagnostic).
    pub mass_iterations: usize,
}

/// Central-difference (leapfrog) integration of `M ü + K u = ramp(t) f`
/// from rest: `a_n = M⁻¹ (ramp(t_n) f − K u_n)`, `v_{n+½} = v_{n−½} + Δt a_n`
/// (first half-step `v_½ = ½Δt a_0`), `u_{n+1} = u_n + Δt v_{n+½}`.
/// `on_step(completed_steps, t, u)` is called after every update.
#[allow(clippy::too_many_arguments)]
pub fn run_leapfrog(
    stiffness: &Csr,
    mass: &Csr,
    load: &[f64],
    ramp: &Ramp,
    dt: f64,
    n_steps: usize,
    mass_precon: Option<&BlockJacobi>,
    threads: usize,
    mut on_step: impl FnMut(usize, f64, &[f64]),
) -> Result<(Vec<f64>, usize), DynamicsError> {
    assert!(dt > 0.0, "time step must be positive");
    let n = stiffness.n();
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut ku = vec![0.0; n];
    let mut mass_iterations = 0;

    // Divergence cap: a generous multiple of the static response scale.
    let load_inf = load.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diag_max = (0..n)
        .filter_map(|i| {
            let (cols, vals) = stiffness.row(i);
            cols.iter().position(|&c| c as usize == i).map(|p| vals[p].abs())
        })
        .fold(0.0f64, f64::max);
    let u_cap = if load_inf > 0.0 && diag_max > 0.0 { 1e9 * load_inf / diag_max } else { f64::INFINITY };

    for step in 0..n_steps {
        let t = step as f64 * dt;
        stiffness.spmv(&u, &mut ku, threads);
        let r = ramp.factor(t);
        for i in 0..n {
            rhs[i] = r * load[i] - ku[i];
        }
        let sol = cg(mass, &rhs, Some(&a), mass_precon, &[], 1e-10, 10_000, threads)?;
        a = sol.x;
        mass_iterations += sol.iterations;
        let kick = if step == 0 { 0.5 * dt } else { dt };
        let mut u_inf = 0.0f64;
        for i in 0..n {
            v[i] += kick * a[i];
            u[i] += dt * v[i];
            u_inf = u_inf.max(u[i].abs());
        }
        if !u_inf.is_finite() || u_inf > u_cap {
            return Err(DynamicsError::Diverged { step: step + 1, norm: u_inf });
        }
        on_step(step + 1, t + dt, &u);
    }
    Ok((u, mass_iterations))
}

/// Runs leapfrog dynamics on an assembled system (requires its mass
/// matrix), recording snapshots at the requested stride.
pub fn solve_dynamic(
    space: &PumSpace,
    sys: &Assembled,
    opts: &DynamicOptions,
) -> Result<DynamicSolution, DynamicsError> {
    let mass = sys.mass.as_ref().expect("dynamic solve requires the mass matrix");
    let pre = BlockJacobi::new(mass, &patch_block_starts(space));
    let mut snapshots = Vec::new();
    let (coeffs, mass_iterations) = run_leapfrog(
        &sys.stiffness,
        mass,
        &sys.load,
        &opts.ramp,
        opts.dt,
        opts.n_steps,
        Some(&pre),
        opts.threads,
        |step, t, u| {
            if opts.snapshot_stride > 0 && step % opts.snapshot_stride == 0 {
                snapshots.push((t, u.to_vec()));
            }
        },
    )?;
    Ok(DynamicSolution { coeffs, snapshots, mass_iterations })
}

/// Estimates the critical central-difference step `2/ω_max` of
/// `M ü + K u = 0` by power iteration on `M⁻¹K` (Rayleigh quotient
/// convergence to 1%). Deterministic start vector.
pub fn estimate_critical_dt(
    stiffness: &Csr,
    mass: &Csr,
    block_starts: &[usize],
    threads: usize,
) -> Result<f64, SolveError> {
    let n = stiffness.n();
    let pre = BlockJacobi::new(mass, block_starts);
    // xorshift64 fill: reproducible and free of axis bias.
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let mut z: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let mut kz = vec![0.0; n];
    let mut mz = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut lambda_old = f64::INFINITY;
    for _ in 0..300 {
        stiffness.spmv(&z, &mut kz, threads);
        mass.spmv(&z, &mut mz, threads);
        let num: f64 = z.iter().zip(&kz).map(|(a, b)| a * b).sum();
        let den: f64 = z.iter().zip(&mz).map(|(a, b)| a * b).sum();
        let lambda = num / den;
        if (lambda - lambda_old).abs() <= 0.01 * lambda.abs() {
            return Ok(2.0 / lambda.sqrt());
        }
        lambda_old = lambda;
        let sol = cg(mass, &kz, Some(&y), Some(&pre), &[], 1e-8, 10_000, threads)?;
        y = sol.x;
        let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (zi, yi) in z.iter_mut().zip(&y) {
            *zi = yi / norm;
        }
    }
    Ok(2.0 / lambda_old.sqrt())
}

/// Largest displacement magnitude of a coefficient vector, sampled on a
/// uniform grid of the given spacing over the whole domain (boundary
/// included). Returns the value and where it occurs.
pub fn max_displacement(space: &PumSpace, coeffs: &[f64], spacing: f64) -> (f64, Vec2) {
    let (lo, hi) = (space.cover.lo, space.cover.hi);
    let nx = ((hi.x - lo.x) / spacing).round().max(1.0) as usize;
    let ny = ((hi.y - lo.y) / spacing).round().max(1.0) as usize;
    let mut best = (0.0f64, lo);
    for j in 0..=ny {
        let y = lo.y + (hi.y - lo.y) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = lo.x + (hi.x - lo.x) * i as f64 / nx as f64;
            let p = Vec2::new(x, y);
            let norm = space.displacement(coeffs, p).norm();
            if norm > best.0 {
                best = (norm, p);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::Material;
    use crate::math::Mat2;
    use crate::pum::assemble::{assemble, Bc, BcValue, BoundaryPiece, BoundarySpec, Side};
    use crate::pum::cover::Cover;
    use crate::pum::quadrature::QuadratureConfig;
    use crate::sparse::CsrBuilder;
    use approx::assert_relative_eq;

    fn material() -> Material {
        Material::calibrate(1200.0, 3.25e9, 1.0 / 3.0, 500.0).unwrap()
    }

    fn all_sides_dirichlet(a: Vec2, b: Mat2) -> BoundarySpec {
        BoundarySpec {
            pieces: [Side::Left, Side::Right, Side::Bottom, Side::Top]
                .into_iter()
                .map(|side| BoundaryPiece { side, span: None, bc: Bc::Dirichlet(BcValue::Linear { a, b }) })
                .collect(),
        }
    }

    /// Weakly imposed linear Dirichlet data must be reproduced to solver
    /// precision (the space contains the exact solution).
    #[test]
    fn dirichlet_patch_test_reproduces_linear_fields() {
        let a = Vec2::new(3e-4, -1e-4);
        let b = Mat2::new(2e-4, 6e-4, -4e-4, 1.5e-4);
        let scale = 1e-3;
        for (dense_cutoff, level) in [(2000, 2), (0, 3)] {
            let cover = Cover::new(Vec2::zeros(), Vec2::new(1.0, 1.0), level, 1.25).unwrap();
            let space = PumSpace::build(cover, None, None, &QuadratureConfig::default());
            let sys = assemble(&space, &material(), &all_sides_dirichlet(a, b), &Default::default(), false, 1);
            let opts = StaticOptions { dense_cutoff, ..Default::default() };
            let sol = solve_static(&space, &sys, &opts).unwrap();
            let mut worst = 0.0f64;
            for i in 0..10 {
                for j in 0..10 {
                    let x = Vec2::new(0.05 + 0.1 * i as f64, 0.05 + 0.1 * j as f64);
                    let exact = a + b * x;
                    worst = worst.max((space.displacement(&sol.coeffs, x) - exact).norm());
                }
            }
            assert!(
                worst <= 1e-8 * scale,
                "patch test error {worst:.3e} (cutoff {dense_cutoff}, level {level})"
            );
        }
    }

    /// Pure-traction bar under uniaxial end tractions: the exact solution
    /// is a linear field the space reproduces, so the deflated iterative
    /// path must recover the plane-strain analytic extension.
    #[test]
    fn neumann_bar_matches_plane_strain_analytic() {
        let mat = material();
        let f = 9e5;
        let cover = Cover::new(Vec2::zeros(), Vec2::new(1.0, 0.1), 4, 1.25).unwrap();
        let space = PumSpace::build(cover, None, None, &QuadratureConfig::default());
        let bcs = BoundarySpec {
            pieces: vec![
                BoundaryPiece {
                    side: Side::Left,
                    span: None,
                    bc: Bc::Traction(BcValue::Constant(Vec2::new(-f, 0.0))),
                },
                BoundaryPiece {
                    side: Side::Right,
                    span: None,
                    bc: Bc::Traction(BcValue::Constant(Vec2::new(f, 0.0))),
                },
            ],
        };
        let sys = assemble(&space, &mat, &bcs, &Default::default(), false, 1);
        let sol = solve_static(&space, &sys, &Default::default()).unwrap();
        // Plane strain, uniaxial stress σ_xx = f: ε_xx = (1−ν²) f / E,
        // ε_yy = −ν(1+ν) f / E; the analytic peak is at the bar corners.
        let exx = (1.0 - mat.nu * mat.nu) * f / mat.young;
        let eyy = -mat.nu * (1.0 + mat.nu) * f / mat.young;
        let expected = Vec2::new(0.5 * exx, 0.05 * eyy).norm();
        let (umax, at) = max_displacement(&space, &sol.coeffs, 0.005);
        assert_relative_eq!(umax, expected, max_relative = 1e-7);
        assert!(at.x < 1e-9 || at.x > 1.0 - 1e-9, "max should sit on an end edge, got {at:?}");
        // Interior check against the full analytic field (centered by
        // symmetry after deflation).
        let exact = |x: Vec2| Vec2::new(exx * (x.x - 0.5), eyy * (x.y - 0.05));
        for p in [Vec2::new(0.25, 0.03), Vec2::new(0.8, 0.075), Vec2::new(0.5, 0.05)] {
            let u = space.displacement(&sol.coeffs, p);
            assert!((u - exact(p)).norm() <= 1e-9, "at {p:?}: {u:?} vs {:?}", exact(p));
        }
    }

    /// One-unknown oscillator: the leapfrog error at a fixed final time
    /// must shrink by 4± a margin when the step halves (second order).
    #[test]
    fn leapfrog_is_second_order_on_the_oscillator() {
        let (k, m, f) = (250.0, 3.0, 7.0);
        let mut kb = CsrBuilder::new(1);
        kb.add(0, 0, k);
        let mut mb = CsrBuilder::new(1);
        mb.add(0, 0, m);
        let (ks, ms) = (kb.build(), mb.build());
        let omega = (k / m).sqrt();
        let t_end = 3.7;
        let exact = (f / k) * (1.0 - (omega * t_end).cos());
        let mut errs = Vec::new();
        for n_steps in [400usize, 800] {
            let dt = t_end / n_steps as f64;
            let (u, _) =
                run_leapfrog(&ks, &ms, &[f], &Ramp::Constant, dt, n_steps, None, 1, |_, _, _| {})
                    .unwrap();
            errs.push((u[0] - exact).abs());
        }
        let ratio = errs[0] / errs[1];
        assert!((3.5..=4.5).contains(&ratio), "convergence ratio {ratio} (errors {errs:?})");
    }

    /// Quadratic-in-time exactness: with the half-step starting kick, a
    /// constant acceleration from rest is integrated without error — the
    /// discrete solution is exactly u(t_k) = ½ a t_k² at every node.
    #[test]
    fn leapfrog_integrates_constant_acceleration_exactly() {
        let ks = CsrBuilder::new(1).build(); // zero stiffness
        let mut mb = CsrBuilder::new(1);
        mb.add(0, 0, 2.0);
        let ms = mb.build();
        let (f, dt, steps) = (3.0, 0.1, 50usize);
        let a = f / 2.0;
        let mut history = Vec::new();
        let (u, _) = run_leapfrog(&ks, &ms, &[f], &Ramp::Constant, dt, steps, None, 1, |k, _, u| {
            history.push((k, u[0]));
        })
        .unwrap();
        for (k, uk) in history {
            let t = k as f64 * dt;
            assert_relative_eq!(uk, 0.5 * a * t * t, max_relative = 1e-12);
        }
        let t_end = steps as f64 * dt;
        assert_relative_eq!(u[0], 0.5 * a * t_end * t_end, max_relative = 1e-12);
    }

    /// A ramped dynamic run must settle at the static solution once the
    /// ramp is slow against the lowest structural period.
    #[test]
    fn ramped_dynamics_settle_to_the_static_solution() {
        let mat = material();
        let cover = Cover::new(Vec2::zeros(), Vec2::new(0.1, 0.1), 2, 1.25).unwrap();
        let space = PumSpace::build(cover, None, None, &QuadratureConfig::default());
        let bcs = BoundarySpec {
            pieces: vec![
                BoundaryPiece {
                    side: Side::Left,
                    span: None,
                    bc: Bc::Dirichlet(BcValue::Constant(Vec2::zeros())),
                },
                BoundaryPiece {
                    side: Side::Right,
                    span: None,
                    bc: Bc::Traction(BcValue::Constant(Vec2::new(4e6, 0.0))),
                },
            ],
        };
        let sys = assemble(&space, &mat, &bcs, &Default::default(), true, 1);
        let stat = solve_static(&space, &sys, &Default::default()).unwrap();
        let dt_crit = estimate_critical_dt(
            &sys.stiffness,
            sys.mass.as_ref().unwrap(),
            &patch_block_starts(&space),
            1,
        )
        .unwrap();
        let t_end = 1.5e-3;
        let dt = 0.5 * dt_crit;
        let n_steps = (t_end / dt).ceil() as usize;
        let opts = DynamicOptions {
            dt,
            n_steps,
            ramp: Ramp::Smoothstep { t_ramp: n_steps as f64 * dt },
            snapshot_stride: 0,
            threads: 1,
        };
        let dynamic = solve_dynamic(&space, &sys, &opts).unwrap();
        let (u_stat, _) = max_displacement(&space, &stat.coeffs, 0.005);
        let (u_dyn, _) = max_displacement(&space, &dynamic.coeffs, 0.005);
        assert_relative_eq!(u_dyn, u_stat, max_relative = 0.01);
    }

    /// The critical step of the explicit scheme halves under refinement.
    #[test]
    fn critical_dt_scales_with_the_mesh() {
        let mat = material();
        let mut dts = Vec::new();
        for level in [2u32, 3] {
            let cover = Cover::new(Vec2::zeros(), Vec2::new(0.1, 0.1), level, 1.25).unwrap();
            let space = PumSpace::build(cover, None, None, &QuadratureConfig::default());
            let sys = assemble(&space, &mat, &BoundarySpec::default(), &Default::default(), true, 1);
            let dt = estimate_critical_dt(
                &sys.stiffness,
                sys.mass.as_ref().unwrap(),
                &patch_block_starts(&space),
                1,
            )
            .unwrap();
            dts.push(dt);
        }
        let ratio = dts[0] / dts[1];
        assert!((1.7..=2.3).contains(&ratio), "dt_crit ratio {ratio} ({dts:?})");
    }

    #[test]
    fn divergence_is_reported() {
        // Far-above-critical step on a stiff oscillator.
        let mut kb = CsrBuilder::new(1);
        kb.add(0, 0, 1e6);
        let mut mb = CsrBuilder::new(1);
        mb.add(0, 0, 1.0);
        let err = run_leapfrog(
            &kb.build(),
            &mb.build(),
            &[1.0],
            &Ramp::Constant,
            1.0,
            200,
            None,
            1,
            |_, _, _| {},
        );
        assert!(matches!(err, Err(DynamicsError::Diverged { .. })));
    }
}

