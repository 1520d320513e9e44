//! Explicit dynamics for the bond-based model.
//!
//! Displacements advance with the position form of the central-difference
//! scheme, `u^{k+1} = 2 u^k - u^{k-1} + dt² a^k`, starting from rest. The
//! acceleration is `a = (L + b) / ρ` where `L_i = Σ_j f(i,j) V_j` sums the
//! pair force densities over unbroken bonds and `b` is an external force
//! density.
//!
//! For a bond of class `c` (reference length `ξ`, direction `e`) and stretch
//! `s = (u_j - u_i)·e / ξ`, the pair force density reduces to
//!
//! ```text
//! f = k0 · s · exp(-β ξ s²),       k0 = 4 C β / (π δ³),
//! ```
//!
//! which is what the inner loops evaluate: one `exp`, a handful of
//! multiplies, and all per-bond geometry folded into the class table.

use super::grid::EmuGrid;
use crate::material::Material;
use crate::math::Vec2;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PdError {
    #[error("time step {dt} is not below the stability estimate {dt_crit}")]
    UnstableTimeStep { dt: f64, dt_crit: f64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveTimeStep(f64),
    #[error("node index {index} out of range for {nodes} nodes")]
    NodeOutOfRange { index: usize, nodes: usize },
}

/// Per-class constants consumed by the force kernel.
#[derive(Clone, Copy)]
struct KernelClass {
    ex: f64,
    ey: f64,
    inv_xi: f64,
    /// `β ξ`, the coefficient of `s²` in the exponential.
    beta_xi: f64,
    /// `sqrt(ξ) / r_c`, turning a stretch into the damage measure.
    dmg: f64,
}

/// A lattice plus material, ready to evaluate forces.
pub struct PdModel {
    pub grid: EmuGrid,
    pub material: Material,
    k0: f64,
    kernel: Vec<KernelClass>,
}

impl PdModel {
    pub fn new(grid: EmuGrid, material: Material) -> Self {
        let k0 = 4.0 * material.c * material.beta / (PI * grid.delta.powi(3));
        let kernel = grid
            .classes()
            .iter()
            .map(|c| KernelClass {
                ex: c.e[0],
                ey: c.e[1],
                inv_xi: c.inv_xi,
                beta_xi: material.beta * c.xi,
                dmg: c.sqrt_xi / material.r_crit,
            })
            .collect();
        Self { grid, material, k0, kernel }
    }

    pub fn num_nodes(&self) -> usize {
        self.grid.num_nodes()
    }

    /// Stable time step estimate for this horizon.
    pub fn stable_dt(&self) -> f64 {
        self.material.stable_dt(self.grid.delta)
    }

    /// Internal force density `L`. With `threads > 1` rows are evaluated
    /// independently in parallel (bitwise reproducible for any thread
    /// count); the sequential path walks each undirected bond once instead.
    pub fn internal_force(&self, u: &[Vec2], out: &mut [Vec2], threads: usize) {
        if threads > 1 {
            self.internal_force_rows(u, out);
        } else {
            self.internal_force_seq(u, out);
        }
    }

    fn internal_force_seq(&self, u: &[Vec2], out: &mut [Vec2]) {
        let n = self.grid.num_nodes();
        assert_eq!(u.len(), n);
        assert_eq!(out.len(), n);
        out.fill(Vec2::zeros());
        let rows = self.grid.row_offsets();
        let ups = self.grid.upper_start();
        let nb = self.grid.bond_neighbor();
        let cls = self.grid.bond_class();
        let vol = self.grid.volumes();
        let kern = &self.kernel;
        let k0 = self.k0;
        for i in 0..n {
            let ui = u[i];
            let vi = vol[i];
            let (s0, s1) = (ups[i] as usize, rows[i + 1] as usize);
            let mut ax = 0.0;
            let mut ay = 0.0;
            for k in s0..s1 {
                let j = nb[k] as usize;
                let c = &kern[cls[k] as usize];
                let dux = u[j].x - ui.x;
                let duy = u[j].y - ui.y;
                let s = (dux * c.ex + duy * c.ey) * c.inv_xi;
                let f = k0 * s * (-c.beta_xi * s * s).exp();
                let fx = f * c.ex;
                let fy = f * c.ey;
                ax += fx * vol[j];
                ay += fy * vol[j];
                out[j].x -= fx * vi;
                out[j].y -= fy * vi;
            }
            out[i].x += ax;
            out[i].y += ay;
        }
    }

    /// Directed variant: each row sums all of its own bonds, so rows are
    /// independent and the result does not depend on the thread count.
    fn internal_force_rows(&self, u: &[Vec2], out: &mut [Vec2]) {
        let n = self.grid.num_nodes();
        assert_eq!(u.len(), n);
        assert_eq!(out.len(), n);
        let rows = self.grid.row_offsets();
        let nb = self.grid.bond_neighbor();
        let cls = self.grid.bond_class();
        let vol = self.grid.volumes();
        let kern = &self.kernel;
        let k0 = self.k0;
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let ui = u[i];
            let (s0, s1) = (rows[i] as usize, rows[i + 1] as usize);
            let mut ax = 0.0;
            let mut ay = 0.0;
            for k in s0..s1 {
                let j = nb[k] as usize;
                let c = &kern[cls[k] as usize];
                let dux = u[j].x - ui.x;
                let duy = u[j].y - ui.y;
                let s = (dux * c.ex + duy * c.ey) * c.inv_xi;
                let f = k0 * s * (-c.beta_xi * s * s).exp();
                ax += f * c.ex * vol[j];
                ay += f * c.ey * vol[j];
            }
            *o = Vec2::new(ax, ay);
        });
    }

    /// Damage measure per node: the largest weighted stretch over the node's
    /// bonds relative to the critical one, `d_i = max_j sqrt(ξ) s_ij / r_c`.
    /// Values of 1 and above mean at least one bond has softened past the
    /// force peak. Nodes without bonds report 0.
    pub fn damage(&self, u: &[Vec2], out: &mut [f64]) {
        let n = self.grid.num_nodes();
        assert_eq!(u.len(), n);
        assert_eq!(out.len(), n);
        let rows = self.grid.row_offsets();
        let nb = self.grid.bond_neighbor();
        let cls = self.grid.bond_class();
        let kern = &self.kernel;
        for i in 0..n {
            let ui = u[i];
            let (s0, s1) = (rows[i] as usize, rows[i + 1] as usize);
            let mut d = f64::NEG_INFINITY;
            for k in s0..s1 {
                let j = nb[k] as usize;
                let c = &kern[cls[k] as usize];
                let dux = u[j].x - ui.x;
                let duy = u[j].y - ui.y;
                let s = (dux * c.ex + duy * c.ey) * c.inv_xi;
                d = d.max(s * c.dmg);
            }
            out[i] = if d.is_finite() { d } else { 0.0 };
        }
    }
}

/// External load: a uniform force density over a node set, scaled by the
/// run's ramp.
#[derive(Debug, Clone)]
pub struct Load {
    pub nodes: Vec<usize>,
    pub density: Vec2,
}

/// Displacement-driven node set: `u_i(t) = ramp(t) · target_i`, imposed
/// exactly after every step. A zero target clamps the set.
#[derive(Debug, Clone)]
pub struct Clamp {
    pub nodes: Vec<usize>,
    pub targets: Vec<Vec2>,
}

impl Clamp {
    pub fn fixed(nodes: Vec<usize>) -> Self {
        let targets = vec![Vec2::zeros(); nodes.len()];
        Self { nodes, targets }
    }
}

/// Damage field snapshot taken during a run.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub damage: Vec<f64>,
}

/// One trajectory sample.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub step: usize,
    pub time: f64,
    /// Largest displacement magnitude over all nodes.
    pub u_max: f64,
    /// Largest damage measure over all nodes.
    pub damage_max: f64,
}

#[derive(Debug)]
pub struct PdRunResult {
    pub u: Vec<Vec2>,
    pub damage: Vec<f64>,
    pub trajectory: Vec<TrajectorySample>,
    pub snapshots: Vec<Snapshot>,
}

impl PdRunResult {
    pub fn u_max(&self) -> f64 {
        self.u.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn damage_max(&self) -> f64 {
        self.damage.iter().copied().fold(0.0, f64::max)
    }
}

/// Configuration and driver for one explicit run.
pub struct PdRun<'a> {
    pub model: &'a PdModel,
    pub dt: f64,
    pub n_steps: usize,
    /// Loads and displacement targets reach full value at `ramp_time` along
    /// a smoothstep profile; `0` applies them at full value from the start.
    pub ramp_time: f64,
    pub loads: Vec<Load>,
    pub clamps: Vec<Clamp>,
    /// Damage snapshot period in steps (`0` disables snapshots).
    pub snapshot_stride: usize,
    /// Trajectory sampling period in steps.
    pub record_stride: usize,
    pub threads: usize,
}

impl<'a> PdRun<'a> {
    pub fn new(model: &'a PdModel, dt: f64, n_steps: usize) -> Self {
        Self {
            model,
            dt,
            n_steps,
            ramp_time: dt * n_steps as f64,
            loads: Vec::new(),
            clamps: Vec::new(),
            snapshot_stride: 0,
            record_stride: 0,
            threads: 1,
        }
    }

    fn ramp(&self, t: f64) -> f64 {
        smoothstep(t, self.ramp_time)
    }

    pub fn execute(&self) -> Result<PdRunResult, PdError> {
        if !(self.dt > 0.0) {
            return Err(PdError::NonPositiveTimeStep(self.dt));
        }
        let dt_crit = self.model.stable_dt();
        if self.dt >= dt_crit {
            return Err(PdError::UnstableTimeStep { dt: self.dt, dt_crit });
        }
        let n = self.model.num_nodes();
        for set in self.loads.iter().map(|l| &l.nodes).chain(self.clamps.iter().map(|c| &c.nodes))
        {
            if let Some(&bad) = set.iter().find(|&&i| i >= n) {
                return Err(PdError::NodeOutOfRange { index: bad, nodes: n });
            }
        }

        // Assembled unit-ramp force density.
        let mut b0 = vec![Vec2::zeros(); n];
        for load in &self.loads {
            for &i in &load.nodes {
                b0[i] += load.density;
            }
        }

        let rho = self.model.material.rho;
        let dt = self.dt;
        let mut u_prev = vec![Vec2::zeros(); n];
        let mut u = vec![Vec2::zeros(); n];
        let mut u_next = vec![Vec2::zeros(); n];
        let mut l = vec![Vec2::zeros(); n];
        let mut dmg = vec![0.0; n];
        let mut trajectory = Vec::new();
        let mut snapshots = Vec::new();

        for step in 0..self.n_steps {
            let t = step as f64 * dt;
            self.model.internal_force(&u, &mut l, self.threads);
            let r = self.ramp(t);
            let c = dt * dt / rho;
            for i in 0..n {
                let ax = (l[i].x + r * b0[i].x) * c;
                let ay = (l[i].y + r * b0[i].y) * c;
                u_next[i].x = 2.0 * u[i].x - u_prev[i].x + ax;
                u_next[i].y = 2.0 * u[i].y - u_prev[i].y + ay;
            }
            let r_next = self.ramp(t + dt);
            for clamp in &self.clamps {
                for (&i, tgt) in clamp.nodes.iter().zip(&clamp.targets) {
                    u_next[i] = r_next * tgt;
                }
            }
            std::mem::swap(&mut u_prev, &mut u);
            std::mem::swap(&mut u, &mut u_next);

            let step1 = step + 1;
            let want_snapshot = self.snapshot_stride > 0 && step1 % self.snapshot_stride == 0;
            let want_record = self.record_stride > 0
                && (step1 % self.record_stride == 0 || step1 == self.n_steps);
            if want_snapshot || want_record || step1 == self.n_steps {
                self.model.damage(&u, &mut dmg);
                let time = step1 as f64 * dt;
                if want_snapshot {
                    snapshots.push(Snapshot { step: step1, time, damage: dmg.clone() });
                }
                if want_record || step1 == self.n_steps {
                    let u_max = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
                    let damage_max = dmg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    trajectory.push(TrajectorySample { step: step1, time, u_max, damage_max });
                }
            }
        }
        if self.n_steps == 0 {
            self.model.damage(&u, &mut dmg);
        }
        Ok(PdRunResult { u, damage: dmg, trajectory, snapshots })
    }
}

/// Smoothstep ramp: 0 at `t = 0`, 1 from `t = t_ramp` on, C¹ throughout.
/// A non-positive `t_ramp` means "already at full value".
pub fn smoothstep(t: f64, t_ramp: f64) -> f64 {
    if t_ramp <= 0.0 || t >= t_ramp {
        1.0
    } else if t <= 0.0 {
        0.0
    } else {
        let tau = t / t_ramp;
        tau * tau * (3.0 - 2.0 * tau)
    }
}
