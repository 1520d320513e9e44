//! Command-line front end: deck loading, solver dispatch, and artifact
//! output.
//!
//! Usage errors (unknown flags, bad values) exit with code 2 via clap;
//! runtime failures (unreadable decks, solver errors) exit with code 1.

use std::error::Error;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::coupling::{run_coupled, CouplingConfig, GlobalProblem, LocalSchedule};
use crate::crack::CrackPath;
use crate::extract::{build_crack_polyline, extract_tip_sequence, DamageSeries, Region};
use crate::io::config::{
    self, to_pd_edge, PdConfig, PumConfig, SimulationConfig,
};
use crate::io::csv::{write_crack_branches_csv, write_trajectory_csv};
use crate::io::vtk::{read_vtk, write_crack_vtk, write_vtk, FieldSample};
use crate::io::{MethodSummary, RunSummary};
use crate::material::Material;
use crate::math::Vec2;
use crate::pd::dynamics::{Clamp, Load};
use crate::pd::{EmuGrid, PdModel, PdRun, PdRunResult};
use crate::pum::assemble::{assemble, BoundarySpec};
use crate::pum::quadrature::QuadratureConfig;
use crate::pum::solve::{
    estimate_critical_dt, max_displacement, patch_block_starts, solve_dynamic, solve_static,
    DynamicOptions, Ramp, StaticOptions, StaticSolution,
};
use crate::pum::{Cover, PumSpace};

type RunError = Box<dyn Error>;

fn fail(msg: impl Into<String>) -> RunError {
    msg.into().into()
}

#[derive(Parser)]
#[command(
    name = "fracture2d",
    version,
    about = "2D fracture workbench: bond-lattice dynamics, enriched \
             partition-of-unity elasticity, crack extraction, and \
             global-local coupling"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML deck (required unless `reproduce` supplies a bundled one).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Where artifacts go (default: the deck's `output.dir`, then `out`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads: 1 = strictly serial, 0 = all cores.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Override the damage-snapshot period (steps).
    #[arg(long, global = true)]
    snapshot_stride: Option<usize>,
    /// Desk-scale factor ≥ 1: coarsens lattice, horizon, and cover while
    /// keeping the simulated time span.
    #[arg(long, global = true, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Explicit bond-lattice run over the whole domain
    PdRun,
    /// Quasi-static enriched-continuum solve
    PumStatic,
    /// Explicit dynamic enriched-continuum run
    PumDyn,
    /// Extract the grown crack path from damage-field VTK snapshots
    ExtractCrack {
        /// Snapshot files in time order
        #[arg(required = true)]
        vtks: Vec<PathBuf>,
    },
    /// Global-local synchronization loop around the crack tip
    Couple,
    /// Run one bundled experiment end to end
    Reproduce {
        #[arg(value_enum)]
        experiment: Experiment,
    },
}

#[derive(ValueEnum, Clone, Copy)]
enum Experiment {
    /// Uniaxially stretched bar, lattice vs continuum
    Bar,
    /// Edge crack opened in mode I
    Mode1,
    /// Inclined center crack growing wing cracks
    Inclined,
}

impl Experiment {
    fn deck(self) -> &'static str {
        match self {
            Experiment::Bar => "bar",
            Experiment::Mode1 => "mode1",
            Experiment::Inclined => "inclined",
        }
    }
}

pub fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::PdRun => {
            let ctx = Ctx::load(&cli, None)?;
            let mut summary = ctx.summary("pd-run");
            cmd_pd_run(&ctx, &mut summary)?;
            ctx.finish(summary)
        }
        Command::PumStatic => {
            let ctx = Ctx::load(&cli, None)?;
            let mut summary = ctx.summary("pum-static");
            cmd_pum_static(&ctx, ctx.initial_crack()?.as_ref(), &mut summary)?;
            ctx.finish(summary)
        }
        Command::PumDyn => {
            let ctx = Ctx::load(&cli, None)?;
            let mut summary = ctx.summary("pum-dyn");
            cmd_pum_dyn(&ctx, &mut summary)?;
            ctx.finish(summary)
        }
        Command::ExtractCrack { ref vtks } => {
            let ctx = Ctx::load(&cli, None)?;
            let mut summary = ctx.summary("extract-crack");
            cmd_extract_crack(&ctx, vtks, &mut summary)?;
            ctx.finish(summary)
        }
        Command::Couple => {
            let ctx = Ctx::load(&cli, None)?;
            let mut summary = ctx.summary("couple");
            cmd_couple(&ctx, &mut summary)?;
            ctx.finish(summary)
        }
        Command::Reproduce { experiment } => {
            let ctx = Ctx::load(&cli, Some(experiment.deck()))?;
            let mut summary = ctx.summary(&format!("reproduce {}", experiment.deck()));
            cmd_reproduce(&ctx, experiment, &mut summary)?;
            ctx.finish(summary)
        }
    }
}

/// Resolved deck plus run-wide settings shared by all commands.
struct Ctx {
    cfg: SimulationConfig,
    hash: String,
    out: PathBuf,
    threads: usize,
    started: Instant,
}

impl Ctx {
    fn load(cli: &Cli, bundled: Option<&str>) -> Result<Self, RunError> {
        let (mut cfg, warnings) = match (&cli.config, bundled) {
            (Some(path), _) => config::load_config(path)?,
            (None, Some(name)) => {
                let text = config::bundled(name).expect("bundled deck exists");
                config::parse_config(text, &format!("<bundled:{name}>"))?
            }
            (None, None) => return Err(fail("no deck given; pass --config <deck.toml>")),
        };
        for w in &warnings {
            eprintln!("warning: {w}");
        }
        config::apply_scale(&mut cfg, cli.scale)?;
        if cli.scale != 1.0 {
            cfg.validate()?;
        }
        if let Some(s) = cli.snapshot_stride {
            if let Some(pd) = &mut cfg.pd {
                pd.snapshot_stride = s;
            }
            if let Some(pum) = &mut cfg.pum {
                pum.snapshot_stride = s;
            }
            if let Some(c) = &mut cfg.coupling {
                c.snapshot_stride = s;
            }
        }
        let hash = config::config_hash(&cfg);
        let out = cli
            .output_dir
            .clone()
            .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out)
            .map_err(|e| fail(format!("cannot create output dir {}: {e}", out.display())))?;
        Ok(Self { cfg, hash, out, threads: cli.threads, started: Instant::now() })
    }

    fn material(&self) -> Result<Material, RunError> {
        Ok(self.cfg.material.material()?)
    }

    fn initial_crack(&self) -> Result<Option<CrackPath>, RunError> {
        match &self.cfg.geometry.crack {
            Some(spec) => Ok(Some(spec.to_crack()?)),
            None => Ok(None),
        }
    }

    fn summary(&self, command: &str) -> RunSummary {
        RunSummary::new(command, self.hash.clone())
    }

    fn finish(&self, mut summary: RunSummary) -> Result<(), RunError> {
        summary.wall_seconds = self.started.elapsed().as_secs_f64();
        if self.cfg.output.summary {
            summary.artifacts.push("summary.json".into());
            summary.write(&self.out.join("summary.json"))?;
        }
        println!(
            "done in {:.1} s; artifacts in {}",
            summary.wall_seconds,
            self.out.display()
        );
        Ok(())
    }

    fn artifact(&self, summary: &mut RunSummary, name: &str) -> PathBuf {
        summary.artifacts.push(name.to_string());
        self.out.join(name)
    }

    fn pd(&self) -> Result<&PdConfig, RunError> {
        self.cfg.pd.as_ref().ok_or_else(|| fail("this command needs a [pd] block in the deck"))
    }

    fn pum(&self) -> Result<&PumConfig, RunError> {
        self.cfg.pum.as_ref().ok_or_else(|| fail("this command needs a [pum] block in the deck"))
    }
}

/// Nodes of `band(edge, depth)` restricted to a coordinate interval along
/// the edge.
fn band_nodes(
    grid: &EmuGrid,
    edge: crate::pum::assemble::Side,
    span: Option<[f64; 2]>,
    depth: f64,
) -> Vec<usize> {
    let nodes = grid.band(to_pd_edge(edge), depth);
    match span {
        None => nodes,
        Some([a, b]) => {
            let axis = edge.tangent_axis();
            let tol = 1e-9 * grid.h;
            nodes
                .into_iter()
                .filter(|&i| {
                    let c = grid.position(i)[axis];
                    c >= a - tol && c <= b + tol
                })
                .collect()
        }
    }
}

/// Builds the lattice, loads, and clamps described by the deck's `[pd]`
/// block over the whole domain.
fn build_pd_model(
    cfg: &SimulationConfig,
    material: Material,
    crack: Option<&CrackPath>,
) -> Result<PdModel, RunError> {
    let (lo, hi) = (cfg.geometry.domain.lo(), cfg.geometry.domain.hi());
    let pd = cfg.pd.as_ref().expect("checked by caller");
    let grid = EmuGrid::build(lo, hi.x - lo.x, hi.y - lo.y, pd.h, pd.delta, crack)?;
    Ok(PdModel::new(grid, material))
}

fn pd_loads_and_clamps(grid: &EmuGrid, pd: &PdConfig) -> (Vec<Load>, Vec<Clamp>) {
    let loads = pd
        .loads
        .iter()
        .map(|l| {
            let depth = l.depth.unwrap_or(grid.delta);
            Load {
                nodes: band_nodes(grid, l.edge, l.span, depth),
                density: Vec2::new(l.traction[0], l.traction[1]) / depth,
            }
        })
        .collect();
    let clamps = pd
        .clamps
        .iter()
        .map(|c| {
            let depth = c.depth.unwrap_or(grid.delta);
            Clamp::fixed(band_nodes(grid, c.edge, c.span, depth))
        })
        .collect();
    (loads, clamps)
}

fn run_pd(ctx: &Ctx, model: &PdModel) -> Result<PdRunResult, RunError> {
    let pd = ctx.pd()?;
    let (loads, clamps) = pd_loads_and_clamps(&model.grid, pd);
    let mut run = PdRun::new(model, pd.dt, pd.n_steps);
    run.loads = loads;
    run.clamps = clamps;
    if let Some(t) = pd.ramp_time {
        run.ramp_time = t;
    }
    run.snapshot_stride = pd.snapshot_stride;
    run.record_stride = pd.record_stride;
    run.threads = ctx.threads;
    Ok(run.execute()?)
}

/// Largest |u| over the lattice and the node position where it occurs.
fn lattice_peak(grid: &EmuGrid, u: &[Vec2]) -> (f64, Vec2) {
    let mut best = (0.0f64, grid.position(0));
    for (i, v) in u.iter().enumerate() {
        let norm = v.norm();
        if norm > best.0 {
            best = (norm, grid.position(i));
        }
    }
    best
}

fn write_pd_outputs(
    ctx: &Ctx,
    model: &PdModel,
    result: &PdRunResult,
    summary: &mut RunSummary,
) -> Result<(), RunError> {
    let positions: Vec<Vec2> = (0..model.num_nodes()).map(|i| model.grid.position(i)).collect();
    if ctx.cfg.output.vtk {
        let sample = FieldSample {
            points: positions.clone(),
            displacement: Some(result.u.clone()),
            damage: Some(result.damage.clone()),
        };
        write_vtk(&sample, &ctx.artifact(summary, "pd_final.vtk"))?;
    }
    if ctx.cfg.output.snapshots {
        for snap in &result.snapshots {
            let sample = FieldSample {
                points: positions.clone(),
                displacement: None,
                damage: Some(snap.damage.clone()),
            };
            let name = format!("pd_damage_{:06}.vtk", snap.step);
            write_vtk(&sample, &ctx.artifact(summary, &name))?;
        }
    }
    if ctx.cfg.output.csv && !result.trajectory.is_empty() {
        write_trajectory_csv(&result.trajectory, &ctx.artifact(summary, "pd_trajectory.csv"))?;
    }
    Ok(())
}

fn pd_summary(model: &PdModel, result: &PdRunResult) -> MethodSummary {
    let (u_max, at) = lattice_peak(&model.grid, &result.u);
    MethodSummary {
        u_max,
        u_max_position: [at.x, at.y],
        damage_max_percent: Some(100.0 * result.damage_max()),
        nodes: Some(model.num_nodes()),
        ..Default::default()
    }
}

fn cmd_pd_run(ctx: &Ctx, summary: &mut RunSummary) -> Result<(), RunError> {
    let material = ctx.material()?;
    let crack = ctx.initial_crack()?;
    let model = build_pd_model(&ctx.cfg, material, crack.as_ref())?;
    println!(
        "lattice: {} nodes, {} directed bonds, horizon {}",
        model.num_nodes(),
        model.grid.num_bonds_directed(),
        model.grid.delta
    );
    let result = run_pd(ctx, &model)?;
    let method = pd_summary(&model, &result);
    println!(
        "pd: U_max = {:.6e} m at ({:.4}, {:.4}); peak damage {:.1}%",
        method.u_max,
        method.u_max_position[0],
        method.u_max_position[1],
        method.damage_max_percent.unwrap_or(0.0)
    );
    write_pd_outputs(ctx, &model, &result, summary)?;
    summary.methods.insert("pd".into(), method);
    Ok(())
}

/// Cover/space construction shared by the static and dynamic commands.
fn build_space(
    ctx: &Ctx,
    crack: Option<&CrackPath>,
) -> Result<(PumSpace, BoundarySpec, StaticOptions), RunError> {
    let pum = ctx.pum()?;
    let (lo, hi) = (ctx.cfg.geometry.domain.lo(), ctx.cfg.geometry.domain.hi());
    let cover = Cover::new(lo, hi, pum.level, pum.alpha)?;
    let quad = QuadratureConfig::default();
    let space = PumSpace::build(cover, crack.cloned(), pum.tip_radius, &quad);
    let bcs = pum.boundary_spec()?;
    let mut opts = StaticOptions { threads: ctx.threads, ..Default::default() };
    if let Some(c) = pum.dense_cutoff {
        opts.dense_cutoff = c;
    }
    if let Some(r) = pum.rtol {
        opts.rtol = r;
    }
    Ok((space, bcs, opts))
}

/// Uniform sampling spacing used for field output and peak search: the
/// lattice spacing when a `[pd]` block exists (so the two methods are probed
/// on the same grid), otherwise half a cover cell.
fn sample_spacing(ctx: &Ctx, space: &PumSpace) -> f64 {
    match &ctx.cfg.pd {
        Some(pd) => pd.h,
        None => space.cover.h.x.min(space.cover.h.y),
    }
}

fn sampled_field(space: &PumSpace, coeffs: &[f64], spacing: f64) -> FieldSample {
    let (lo, hi) = (space.cover.lo, space.cover.hi);
    let nx = ((hi.x - lo.x) / spacing).round().max(1.0) as usize;
    let ny = ((hi.y - lo.y) / spacing).round().max(1.0) as usize;
    let mut points = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut displacement = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = lo.y + (hi.y - lo.y) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = lo.x + (hi.x - lo.x) * i as f64 / nx as f64;
            let p = Vec2::new(x, y);
            points.push(p);
            displacement.push(space.displacement(coeffs, p));
        }
    }
    FieldSample { points, displacement: Some(displacement), damage: None }
}

fn pum_summary(space: &PumSpace, sol: &StaticSolution, spacing: f64) -> MethodSummary {
    let (u_max, at) = max_displacement(space, &sol.coeffs, spacing);
    MethodSummary {
        u_max,
        u_max_position: [at.x, at.y],
        dofs: Some(space.num_dofs()),
        iterations: Some(sol.iterations),
        ..Default::default()
    }
}

fn cmd_pum_static(
    ctx: &Ctx,
    crack: Option<&CrackPath>,
    summary: &mut RunSummary,
) -> Result<MethodSummary, RunError> {
    let material = ctx.material()?;
    let (space, bcs, opts) = build_space(ctx, crack)?;
    println!(
        "cover: {} patches, {} unknowns{}",
        space.cover.num_patches(),
        space.num_dofs(),
        if crack.is_some() { " (crack-enriched)" } else { "" }
    );
    let sys = assemble(&space, &material, &bcs, &QuadratureConfig::default(), false, ctx.threads);
    let sol = solve_static(&space, &sys, &opts)?;
    let spacing = sample_spacing(ctx, &space);
    let method = pum_summary(&space, &sol, spacing);
    println!(
        "pum-static: U_max = {:.6e} m at ({:.4}, {:.4}); {} iterations",
        method.u_max,
        method.u_max_position[0],
        method.u_max_position[1],
        sol.iterations
    );
    if ctx.cfg.output.vtk {
        let sample = sampled_field(&space, &sol.coeffs, spacing);
        write_vtk(&sample, &ctx.artifact(summary, "pum_static.vtk"))?;
    }
    summary.methods.insert("pum_static".into(), method.clone());
    Ok(method)
}

/// Resolves the dynamic time step and step count from the deck: explicit
/// values win; a missing `dt` means half the estimated critical step; a
/// missing `n_steps` is derived from `t_end` (and `dt` is snapped so the
/// run ends exactly at `t_end`).
fn resolve_dynamic_schedule(
    pum: &PumConfig,
    critical_dt: f64,
) -> Result<(f64, usize), RunError> {
    let (dt, n_steps) = match (pum.dt, pum.n_steps, pum.t_end) {
        (Some(dt), Some(n), _) => (dt, n),
        (Some(dt), None, Some(t)) => (dt, (t / dt).round().max(1.0) as usize),
        (None, Some(n), Some(t)) => (t / n as f64, n),
        (None, Some(n), None) => (0.5 * critical_dt, n),
        (None, None, Some(t)) => {
            let n = (t / (0.5 * critical_dt)).ceil().max(1.0) as usize;
            (t / n as f64, n)
        }
        _ => {
            return Err(fail(
                "the [pum] block needs dt + n_steps (or t_end) for a dynamic run",
            ))
        }
    };
    if dt >= critical_dt {
        return Err(fail(format!(
            "pum dt = {dt:.3e} is at or above the critical step {critical_dt:.3e}"
        )));
    }
    Ok((dt, n_steps))
}

fn cmd_pum_dyn(ctx: &Ctx, summary: &mut RunSummary) -> Result<(), RunError> {
    let material = ctx.material()?;
    let pum = ctx.pum()?;
    let crack = ctx.initial_crack()?;
    let (space, bcs, _) = build_space(ctx, crack.as_ref())?;
    println!("cover: {} patches, {} unknowns", space.cover.num_patches(), space.num_dofs());
    let sys = assemble(&space, &material, &bcs, &QuadratureConfig::default(), true, ctx.threads);
    let mass = sys.mass.as_ref().expect("assembled with mass");
    let critical =
        estimate_critical_dt(&sys.stiffness, mass, &patch_block_starts(&space), ctx.threads)?;
    let (dt, n_steps) = resolve_dynamic_schedule(pum, critical)?;
    let t_end = dt * n_steps as f64;
    println!(
        "dynamic: dt = {dt:.3e} (critical {critical:.3e}), {n_steps} steps to t = {t_end:.3e}"
    );
    let ramp = match pum.ramp {
        Some(r) => r.to_ramp(t_end),
        None => Ramp::Smoothstep { t_ramp: t_end },
    };
    let opts = DynamicOptions {
        dt,
        n_steps,
        ramp,
        snapshot_stride: pum.snapshot_stride,
        threads: ctx.threads,
    };
    let dyn_sol = solve_dynamic(&space, &sys, &opts)?;
    let spacing = sample_spacing(ctx, &space);
    let (u_max, at) = max_displacement(&space, &dyn_sol.coeffs, spacing);
    println!(
        "pum-dyn: final U_max = {:.6e} m at ({:.4}, {:.4}); {} mass-solve iterations",
        u_max, at.x, at.y, dyn_sol.mass_iterations
    );
    if ctx.cfg.output.vtk {
        let sample = sampled_field(&space, &dyn_sol.coeffs, spacing);
        write_vtk(&sample, &ctx.artifact(summary, "pum_dyn.vtk"))?;
    }
    if ctx.cfg.output.csv && !dyn_sol.snapshots.is_empty() {
        // Coarse peak-displacement history; full field series would be
        // disproportionate for a headline trajectory.
        let samples: Vec<crate::pd::dynamics::TrajectorySample> = dyn_sol
            .snapshots
            .iter()
            .enumerate()
            .map(|(k, (t, coeffs))| {
                let (u, _) = max_displacement(&space, coeffs, 4.0 * spacing);
                crate::pd::dynamics::TrajectorySample {
                    step: (k + 1) * pum.snapshot_stride,
                    time: *t,
                    u_max: u,
                    damage_max: 0.0,
                }
            })
            .collect();
        write_trajectory_csv(&samples, &ctx.artifact(summary, "pum_dyn_trajectory.csv"))?;
    }
    summary.methods.insert(
        "pum_dynamic".into(),
        MethodSummary {
            u_max,
            u_max_position: [at.x, at.y],
            dofs: Some(space.num_dofs()),
            iterations: Some(dyn_sol.mass_iterations),
            ..Default::default()
        },
    );
    Ok(())
}

/// Reads a damage snapshot series, extracts both tip branches against the
/// deck's initial crack, and returns the branch lists plus the grown path.
fn extract_from_series(
    initial: &CrackPath,
    series: &DamageSeries,
    stride: usize,
) -> Result<(Vec<Vec2>, Vec<Vec2>, CrackPath), RunError> {
    let (start_region, finish_region) = Region::tip_half_planes(initial);
    let start = extract_tip_sequence(series, stride, &start_region);
    let finish = extract_tip_sequence(series, stride, &finish_region);
    let grown = build_crack_polyline(initial, &start, &finish)?;
    Ok((start, finish, grown))
}

fn write_crack_outputs(
    ctx: &Ctx,
    start: &[Vec2],
    finish: &[Vec2],
    grown: &CrackPath,
    summary: &mut RunSummary,
) -> Result<(), RunError> {
    if ctx.cfg.output.csv {
        write_crack_branches_csv(start, finish, &ctx.artifact(summary, "crack_branches.csv"))?;
    }
    if ctx.cfg.output.vtk {
        write_crack_vtk(grown, &ctx.artifact(summary, "crack_path.vtk"))?;
    }
    Ok(())
}

fn cmd_extract_crack(
    ctx: &Ctx,
    vtks: &[PathBuf],
    summary: &mut RunSummary,
) -> Result<(), RunError> {
    let initial = ctx
        .initial_crack()?
        .ok_or_else(|| fail("extract-crack needs an initial crack in [geometry]"))?;
    let mut series: Option<DamageSeries> = None;
    for (k, path) in vtks.iter().enumerate() {
        let sample = read_vtk(path)?;
        let damage = sample
            .damage
            .ok_or_else(|| fail(format!("{}: no damage field", path.display())))?;
        let series = series.get_or_insert_with(|| DamageSeries::new(sample.points.clone()));
        if sample.points != series.positions() {
            return Err(fail(format!(
                "{}: node positions differ from the first snapshot",
                path.display()
            )));
        }
        series.push(k, damage)?;
    }
    let series = series.expect("clap enforces at least one input");
    let (start, finish, grown) = extract_from_series(&initial, &series, 1)?;
    println!(
        "extract-crack: {} + {} tip positions from {} snapshots; path now {} points",
        start.len(),
        finish.len(),
        series.snapshots().len(),
        grown.points().len()
    );
    write_crack_outputs(ctx, &start, &finish, &grown, summary)
}

/// Assembles the coupling driver inputs from the deck.
fn coupling_setup(ctx: &Ctx) -> Result<(GlobalProblem, CouplingConfig, CrackPath), RunError> {
    let c = ctx
        .cfg
        .coupling
        .as_ref()
        .ok_or_else(|| fail("this command needs a [coupling] block in the deck"))?;
    let pum = ctx.pum()?;
    let material = ctx.material()?;
    let crack = ctx
        .initial_crack()?
        .ok_or_else(|| fail("coupling needs an initial crack in [geometry]"))?;
    let mut opts = StaticOptions { threads: ctx.threads, ..Default::default() };
    if let Some(cutoff) = pum.dense_cutoff {
        opts.dense_cutoff = cutoff;
    }
    if let Some(r) = pum.rtol {
        opts.rtol = r;
    }
    let global = GlobalProblem {
        lo: ctx.cfg.geometry.domain.lo(),
        hi: ctx.cfg.geometry.domain.hi(),
        level: pum.level,
        alpha: pum.alpha,
        tip_radius: pum.tip_radius,
        quad: QuadratureConfig::default(),
        material,
        bcs: pum.boundary_spec()?,
        opts,
    };
    let dt = match (c.dt, c.t_end) {
        (Some(dt), _) => dt,
        (None, Some(t)) => t / c.n_steps as f64,
        (None, None) => 0.5 * material.stable_dt(c.delta),
    };
    let handshake_dir = if c.handshake {
        let dir = ctx.out.join("handshake");
        std::fs::create_dir_all(&dir)?;
        Some(dir)
    } else {
        None
    };
    let coupling = CouplingConfig {
        n_sync: c.n_sync,
        local_lo: Vec2::new(c.local_lo[0], c.local_lo[1]),
        local_hi: Vec2::new(c.local_hi[0], c.local_hi[1]),
        h_pd: c.h,
        delta: c.delta,
        schedule: LocalSchedule {
            dt,
            n_steps: c.n_steps,
            snapshot_stride: c.snapshot_stride,
            extraction_stride: c.extraction_stride,
            threads: ctx.threads,
        },
        handshake_dir,
    };
    Ok((global, coupling, crack))
}

fn cmd_couple(ctx: &Ctx, summary: &mut RunSummary) -> Result<(), RunError> {
    let (global, coupling, crack) = coupling_setup(ctx)?;
    println!(
        "coupling: {} sync step(s), local box ({}, {}) .. ({}, {}), local h = {}",
        coupling.n_sync,
        coupling.local_lo.x,
        coupling.local_lo.y,
        coupling.local_hi.x,
        coupling.local_hi.y,
        coupling.h_pd
    );
    let result = run_coupled(&global, &coupling, &crack)?;
    for (i, step) in result.steps.iter().enumerate() {
        println!(
            "sync {}/{}: load {:.2}, layer {} nodes, local peak damage {:.1}%, growth +{}/+{} \
             points, crack now {} points",
            i + 1,
            result.steps.len(),
            step.load_factor,
            step.layer.len(),
            100.0 * step.local.damage_max(),
            step.growth_start.len(),
            step.growth_finish.len(),
            step.crack_after.points().len()
        );
        if ctx.cfg.output.vtk {
            let sample = FieldSample {
                points: step.local_positions.clone(),
                displacement: Some(step.local.u.clone()),
                damage: Some(step.local.damage.clone()),
            };
            let name = format!("local_final_{:02}.vtk", i + 1);
            write_vtk(&sample, &ctx.artifact(summary, &name))?;
        }
    }
    let last = result.steps.last().expect("n_sync >= 1");
    let spacing = coupling.h_pd;
    let final_method = pum_summary(&result.final_space, &result.final_solution, spacing);
    println!(
        "couple: final U_max = {:.6e} m at ({:.4}, {:.4}); crack has {} points",
        final_method.u_max,
        final_method.u_max_position[0],
        final_method.u_max_position[1],
        result.crack.points().len()
    );
    if ctx.cfg.output.vtk {
        let sample = sampled_field(&result.final_space, &result.final_solution.coeffs, spacing);
        write_vtk(&sample, &ctx.artifact(summary, "pum_final.vtk"))?;
    }
    write_crack_outputs(ctx, &last.growth_start, &last.growth_finish, &result.crack, summary)?;
    let mut local_method = MethodSummary {
        nodes: Some(last.local.u.len()),
        damage_max_percent: Some(100.0 * last.local.damage_max()),
        ..Default::default()
    };
    if let Some((i, v)) = last
        .local
        .u
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
    {
        local_method.u_max = v.norm();
        let p = last.local_positions[i];
        local_method.u_max_position = [p.x, p.y];
    }
    summary.methods.insert("pd_local".into(), local_method);
    summary.methods.insert("pum_global".into(), final_method);
    Ok(())
}

fn cmd_reproduce(
    ctx: &Ctx,
    experiment: Experiment,
    summary: &mut RunSummary,
) -> Result<(), RunError> {
    match experiment {
        Experiment::Bar | Experiment::Mode1 => {
            let crack = ctx.initial_crack()?;
            let pum_method = cmd_pum_static(ctx, crack.as_ref(), summary)?;
            let material = ctx.material()?;
            let model = build_pd_model(&ctx.cfg, material, crack.as_ref())?;
            let result = run_pd(ctx, &model)?;
            let pd_method = pd_summary(&model, &result);
            println!(
                "pd: U_max = {:.6e} m; peak damage {:.1}%",
                pd_method.u_max,
                pd_method.damage_max_percent.unwrap_or(0.0)
            );
            write_pd_outputs(ctx, &model, &result, summary)?;
            let dev = 100.0 * (pd_method.u_max - pum_method.u_max) / pum_method.u_max;
            println!(
                "comparison: lattice U_max deviates {dev:+.1}% from the continuum ({:.6e} vs {:.6e})",
                pd_method.u_max, pum_method.u_max
            );
            summary.methods.insert("pd".into(), pd_method);
        }
        Experiment::Inclined => {
            // Whole-domain lattice run first: the damage series drives the
            // crack extraction, and the grown path then enriches the
            // continuum solve.
            let initial = ctx
                .initial_crack()?
                .ok_or_else(|| fail("the inclined deck must define a crack"))?;
            let material = ctx.material()?;
            let model = build_pd_model(&ctx.cfg, material, Some(&initial))?;
            println!("lattice: {} nodes", model.num_nodes());
            let result = run_pd(ctx, &model)?;
            let pd_method = pd_summary(&model, &result);
            println!(
                "pd: U_max = {:.6e} m; peak damage {:.1}%",
                pd_method.u_max,
                pd_method.damage_max_percent.unwrap_or(0.0)
            );
            write_pd_outputs(ctx, &model, &result, summary)?;
            let positions: Vec<Vec2> =
                (0..model.num_nodes()).map(|i| model.grid.position(i)).collect();
            let mut series = DamageSeries::new(positions);
            for snap in &result.snapshots {
                series.push(snap.step, snap.damage.clone())?;
            }
            let (start, finish, grown) = extract_from_series(&initial, &series, 1)?;
            println!(
                "extracted {} + {} tip positions; crack grew from {} to {} points",
                start.len(),
                finish.len(),
                initial.points().len(),
                grown.points().len()
            );
            write_crack_outputs(ctx, &start, &finish, &grown, summary)?;
            let pum_method = cmd_pum_static(ctx, Some(&grown), summary)?;
            println!(
                "comparison: continuum with the extracted crack gives U_max = {:.6e} m \
                 (lattice {:.6e} m)",
                pum_method.u_max, pd_method.u_max
            );
            summary.methods.insert("pd".into(), pd_method);
        }
    }
    Ok(())
}

/// Entry point used by `main`; prints the error chain and picks the exit
/// code.
pub fn main_with_exit() -> ! {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::exit(0),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = e.source();
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            std::process::exit(1);
        }
    }
}

