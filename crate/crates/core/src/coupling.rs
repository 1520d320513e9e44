//! Global–local coupling of the partition-of-unity solver and the
//! peridynamic fracture engine.
//!
//! The driver alternates between a cheap global linear-elastic solve and an
//! expensive local fracture simulation:
//!
//! 1. solve the global problem quasi-statically with the current crack
//!    enrichment at the current load level;
//! 2. sample the global displacement field on the boundary layer of a small
//!    local box around the crack tip and hand those values to a peridynamic
//!    lattice on the box as displacement-driven boundary conditions;
//! 3. run the local lattice to the sync time from a zero initial state,
//!    ramping the layer displacements up smoothly;
//! 4. extract crack growth from the local damage fields and splice it onto
//!    the crack polyline, which updates the global enrichment.
//!
//! The local run sees only layer displacement values and material data —
//! never global solver internals — so the exchange can equivalently pass
//! through an ASCII handshake file, and both paths are bit-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};

use crate::crack::{CrackError, CrackPath};
use crate::extract::{build_crack_polyline, extract_tip_sequence, DamageSeries, Region};
use crate::material::Material;
use crate::math::Vec2;
use crate::pd::dynamics::{Clamp, PdError, PdRunResult};
use crate::pd::grid::GridError;
use crate::pd::{EmuGrid, PdModel, PdRun};
use crate::pum::assemble::{assemble, BoundarySpec};
use crate::pum::cover::CoverError;
use crate::pum::quadrature::QuadratureConfig;
use crate::pum::solve::{solve_static, StaticOptions, StaticSolution};
use crate::pum::{Cover, PumSpace};
use crate::sparse::SolveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Pd(#[from] PdError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Crack(#[from] CrackError),
    #[error("local box has no nodes free of the boundary layer; enlarge it past 2δ")]
    NoInterior,
    #[error("{got} boundary values supplied for a layer of {want} nodes")]
    BcCountMismatch { got: usize, want: usize },
    #[error("layer node at ({0}, {1}) lies outside the global domain")]
    OutsideDomain(f64, f64),
    #[error("extracted crack growth at ({0}, {1}) reached the local boundary layer")]
    CrackReachedLayer(f64, f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("handshake file {path}, line {line}: {msg}")]
    HandshakeFormat { path: String, line: usize, msg: String },
}

/// A peridynamic lattice on a small box, split into the boundary layer
/// (displacement-driven from outside) and free interior nodes.
pub struct LocalProblem {
    pub model: PdModel,
    /// Nodes strictly within one horizon of the box boundary — exactly the
    /// nodes whose interaction ball pokes out of the box, so their motion
    /// must be prescribed from the global field.
    pub layer: Vec<usize>,
    pub lo: Vec2,
    pub hi: Vec2,
}

impl LocalProblem {
    pub fn layer_positions(&self) -> Vec<Vec2> {
        self.layer.iter().map(|&i| self.model.grid.position(i)).collect()
    }

    /// Distance from `p` to the box boundary (0 on the boundary).
    fn boundary_distance(&self, p: Vec2) -> f64 {
        (p.x - self.lo.x)
            .min(self.hi.x - p.x)
            .min(p.y - self.lo.y)
            .min(self.hi.y - p.y)
    }
}

/// Builds the local lattice on `[lo, hi]` and tags its boundary layer.
/// Bonds cut by `crack` are excluded, exactly as in a standalone run.
pub fn define_local_domain(
    lo: Vec2,
    hi: Vec2,
    h_pd: f64,
    delta: f64,
    crack: Option<&CrackPath>,
    material: Material,
) -> Result<LocalProblem, CouplingError> {
    let grid = EmuGrid::build(lo, hi.x - lo.x, hi.y - lo.y, h_pd, delta, crack)?;
    let model = PdModel::new(grid, material);
    let local = LocalProblem { model, layer: Vec::new(), lo, hi };
    let layer: Vec<usize> = (0..local.model.num_nodes())
        .filter(|&i| local.boundary_distance(local.model.grid.position(i)) < delta)
        .collect();
    if layer.len() == local.model.num_nodes() {
        return Err(CouplingError::NoInterior);
    }
    Ok(LocalProblem { layer, ..local })
}

/// Samples the global displacement field at the layer nodes.
pub fn extract_pd_boundary_data(
    space: &PumSpace,
    coeffs: &[f64],
    local: &LocalProblem,
) -> Result<Vec<Vec2>, CouplingError> {
    let (lo, hi) = (space.cover.lo, space.cover.hi);
    let mut bc = Vec::with_capacity(local.layer.len());
    for &i in &local.layer {
        let x = local.model.grid.position(i);
        if x.x < lo.x || x.x > hi.x || x.y < lo.y || x.y > hi.y {
            return Err(CouplingError::OutsideDomain(x.x, x.y));
        }
        bc.push(space.displacement(coeffs, x));
    }
    Ok(bc)
}

/// Time-stepping parameters of one local run.
#[derive(Debug, Clone)]
pub struct LocalSchedule {
    pub dt: f64,
    pub n_steps: usize,
    /// Damage snapshot period in steps; crack extraction sees one damage
    /// field per snapshot.
    pub snapshot_stride: usize,
    /// Snapshot subset stride for tip extraction (1 = every snapshot).
    pub extraction_stride: usize,
    pub threads: usize,
}

/// Runs the local lattice from a zero initial state with the layer nodes
/// tracking `ramp(t) · bc` exactly at every step.
pub fn run_local_pd(
    local: &LocalProblem,
    bc: &[Vec2],
    schedule: &LocalSchedule,
) -> Result<PdRunResult, CouplingError> {
    if bc.len() != local.layer.len() {
        return Err(CouplingError::BcCountMismatch { got: bc.len(), want: local.layer.len() });
    }
    let mut run = PdRun::new(&local.model, schedule.dt, schedule.n_steps);
    run.clamps = vec![Clamp { nodes: local.layer.clone(), targets: bc.to_vec() }];
    run.snapshot_stride = schedule.snapshot_stride;
    run.threads = schedule.threads;
    Ok(run.execute()?)
}

/// The global linear-elasticity problem: cover geometry, boundary data at
/// full load, and solver settings.
#[derive(Debug, Clone)]
pub struct GlobalProblem {
    pub lo: Vec2,
    pub hi: Vec2,
    pub level: u32,
    pub alpha: f64,
    /// Patch-center distance within which tip enrichment is applied;
    /// `None` = solver default.
    pub tip_radius: Option<f64>,
    pub quad: QuadratureConfig,
    pub material: Material,
    pub bcs: BoundarySpec,
    pub opts: StaticOptions,
}

impl GlobalProblem {
    /// Quasi-static solve with the given crack enrichment at a fraction of
    /// the full boundary data.
    pub fn solve(
        &self,
        crack: &CrackPath,
        load_factor: f64,
    ) -> Result<(PumSpace, StaticSolution), CouplingError> {
        let cover = Cover::new(self.lo, self.hi, self.level, self.alpha)?;
        let space = PumSpace::build(cover, Some(crack.clone()), self.tip_radius, &self.quad);
        let sys = assemble(
            &space,
            &self.material,
            &self.bcs.scaled(load_factor),
            &self.quad,
            false,
            self.opts.threads,
        );
        let sol = solve_static(&space, &sys, &self.opts)?;
        Ok((space, sol))
    }
}

#[derive(Debug, Clone)]
pub struct CouplingConfig {
    /// Number of synchronization steps the load interval is divided into.
    pub n_sync: usize,
    pub local_lo: Vec2,
    pub local_hi: Vec2,
    pub h_pd: f64,
    pub delta: f64,
    pub schedule: LocalSchedule,
    /// When set, layer data additionally passes through an ASCII handshake
    /// file in this directory (one per sync step) and the values read back
    /// drive the local run; this is bit-identical to the in-process path.
    pub handshake_dir: Option<PathBuf>,
}

/// Results of one synchronization step.
pub struct SyncStep {
    pub load_factor: f64,
    /// Global space and solution the boundary data was sampled from.
    pub space: PumSpace,
    pub solution: StaticSolution,
    /// Layer node indices (into the local grid) and their target values.
    pub layer: Vec<usize>,
    pub bc: Vec<Vec2>,
    pub local: PdRunResult,
    /// Reference positions of the local lattice nodes.
    pub local_positions: Vec<Vec2>,
    pub growth_start: Vec<Vec2>,
    pub growth_finish: Vec<Vec2>,
    pub crack_after: CrackPath,
}

pub struct CoupledResult {
    pub steps: Vec<SyncStep>,
    pub crack: CrackPath,
    /// Global solve with the final crack at full load.
    pub final_space: PumSpace,
    pub final_solution: StaticSolution,
}

/// First growth point lying in the boundary layer, if any. Growth reaching
/// the layer invalidates the local problem (the prescribed layer values know
/// nothing about new crack faces), so the driver aborts on it.
fn growth_escape(local: &LocalProblem, growth: &[Vec2]) -> Option<Vec2> {
    growth.iter().copied().find(|&p| local.boundary_distance(p) < local.model.grid.delta)
}

/// Runs the full synchronization loop. Sync step `n` of `N` solves the
/// global problem at load factor `n/N` with the crack found so far, drives
/// the local box with the sampled layer displacements, and extends the
/// crack by the extracted growth. A final global solve at full load with
/// the final crack closes the run.
pub fn run_coupled(
    global: &GlobalProblem,
    cfg: &CouplingConfig,
    initial_crack: &CrackPath,
) -> Result<CoupledResult, CouplingError> {
    assert!(cfg.n_sync >= 1, "need at least one synchronization step");
    // Branch filters stay pinned to the initial crack so growth of the two
    // tips is separated consistently across sync steps.
    let (start_region, finish_region) = Region::tip_half_planes(initial_crack);
    let mut crack = initial_crack.clone();
    let mut steps = Vec::with_capacity(cfg.n_sync);
    for n in 1..=cfg.n_sync {
        let load_factor = n as f64 / cfg.n_sync as f64;
        let (space, solution) = global.solve(&crack, load_factor)?;
        let local = define_local_domain(
            cfg.local_lo,
            cfg.local_hi,
            cfg.h_pd,
            cfg.delta,
            Some(&crack),
            global.material,
        )?;
        let mut bc = extract_pd_boundary_data(&space, &solution.coeffs, &local)?;
        if let Some(dir) = &cfg.handshake_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("handshake_{n:03}.txt"));
            let records: Vec<(usize, Vec2, Vec2)> = local
                .layer
                .iter()
                .zip(&bc)
                .map(|(&i, &v)| (i, local.model.grid.position(i), v))
                .collect();
            write_handshake(&path, &records)?;
            bc = read_handshake(&path)?.into_iter().map(|(_, _, v)| v).collect();
        }
        let result = run_local_pd(&local, &bc, &cfg.schedule)?;

        let mut series = DamageSeries::new(local.model.grid.positions().to_vec());
        for snap in &result.snapshots {
            series.push(snap.step, snap.damage.clone()).expect("snapshot length");
        }
        let growth_start =
            extract_tip_sequence(&series, cfg.schedule.extraction_stride, &start_region);
        let growth_finish =
            extract_tip_sequence(&series, cfg.schedule.extraction_stride, &finish_region);
        for growth in [&growth_start, &growth_finish] {
            if let Some(p) = growth_escape(&local, growth) {
                return Err(CouplingError::CrackReachedLayer(p.x, p.y));
            }
        }
        crack = build_crack_polyline(&crack, &growth_start, &growth_finish)?;

        steps.push(SyncStep {
            load_factor,
            space,
            solution,
            layer: local.layer.clone(),
            bc,
            local_positions: local.model.grid.positions().to_vec(),
            local: result,
            growth_start,
            growth_finish,
            crack_after: crack.clone(),
        });
    }
    let (final_space, final_solution) = global.solve(&crack, 1.0)?;
    Ok(CoupledResult { steps, crack, final_space, final_solution })
}

/// Writes layer records as ASCII, one `index x y u_x u_y` line per node.
/// Floats use the shortest round-trip decimal form, so reading the file
/// back reproduces every value bit-exactly.
pub fn write_handshake(path: &Path, records: &[(usize, Vec2, Vec2)]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, x, u) in records {
        writeln!(w, "{} {} {} {} {}", i, x.x, x.y, u.x, u.y)?;
    }
    w.flush()
}

pub fn read_handshake(path: &Path) -> Result<Vec<(usize, Vec2, Vec2)>, CouplingError> {
    let bad = |line: usize, msg: &str| CouplingError::HandshakeFormat {
        path: path.display().to_string(),
        line,
        msg: msg.to_string(),
    };
    let mut out = Vec::new();
    for (k, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(bad(k + 1, "expected 5 fields: index x y u_x u_y"));
        }
        let index: usize = fields[0].parse().map_err(|_| bad(k + 1, "bad node index"))?;
        let mut vals = [0.0f64; 4];
        for (v, f) in vals.iter_mut().zip(&fields[1..]) {
            *v = f.parse().map_err(|_| bad(k + 1, "bad float"))?;
        }
        out.push((index, Vec2::new(vals[0], vals[1]), Vec2::new(vals[2], vals[3])));
    }
    Ok(out)
}
