//! TOML run configuration: schema, validation, desk-scaling, and the
//! bundled experiment decks.
//!
//! A deck has up to six blocks. `[material]` and `[geometry]` are required;
//! `[pd]`, `[pum]`, and `[coupling]` enable the corresponding solvers, and
//! `[output]` selects artifact kinds. Unknown keys anywhere are rejected, and
//! [`SimulationConfig::validate`] returns non-fatal warnings (for example, a
//! horizon that is not a whole number of lattice spacings) alongside hard
//! errors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crack::CrackPath;
use crate::material::Material;
use crate::math::Vec2;
use crate::pd::Edge;
use crate::pum::assemble::{Bc, BcValue, BoundaryPiece, BoundarySpec, Side};
use crate::pum::solve::Ramp;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// The TOML itself did not parse or did not match the schema; the inner
    /// message carries line/column information.
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{origin}: missing required block(s): {}", blocks.join(", "))]
    MissingBlocks { origin: String, blocks: Vec<String> },
    #[error("{field}: {msg}")]
    Invalid { field: String, msg: String },
}

fn invalid(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), msg: msg.into() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub material: MaterialConfig,
    pub geometry: GeometryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd: Option<PdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pum: Option<PumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// Mass density [kg/m³].
    pub rho: f64,
    /// Young's modulus [Pa].
    pub young: f64,
    /// Poisson's ratio.
    pub nu: f64,
    /// Critical energy release rate [J/m²].
    pub gc: f64,
}

impl MaterialConfig {
    pub fn material(&self) -> Result<Material, ConfigError> {
        Material::calibrate(self.rho, self.young, self.nu, self.gc)
            .map_err(|e| invalid("material", e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub domain: DomainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crack: Option<CrackSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl DomainConfig {
    pub fn lo(&self) -> Vec2 {
        Vec2::new(self.lo[0], self.lo[1])
    }

    pub fn hi(&self) -> Vec2 {
        Vec2::new(self.hi[0], self.hi[1])
    }
}

/// Initial crack, given either as an explicit polyline or as a straight
/// segment by center, direction angle (degrees from the +x axis), and length.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CrackSpec {
    Points { points: Vec<[f64; 2]> },
    Centered { center: [f64; 2], angle_deg: f64, length: f64 },
}

impl CrackSpec {
    pub fn to_crack(&self) -> Result<CrackPath, ConfigError> {
        let points = match self {
            CrackSpec::Points { points } => {
                points.iter().map(|p| Vec2::new(p[0], p[1])).collect()
            }
            CrackSpec::Centered { center, angle_deg, length } => {
                let c = Vec2::new(center[0], center[1]);
                let phi = angle_deg.to_radians();
                let half = Vec2::new(phi.cos(), phi.sin()) * (0.5 * length);
                vec![c - half, c + half]
            }
        };
        CrackPath::new(points).map_err(|e| invalid("geometry.crack", e.to_string()))
    }
}

fn default_stride() -> usize {
    250
}

fn default_one() -> usize {
    1
}

fn default_alpha() -> f64 {
    1.25
}

fn default_true() -> bool {
    true
}

/// Explicit bond-lattice run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdConfig {
    /// Lattice spacing [m].
    pub h: f64,
    /// Horizon radius [m].
    pub delta: f64,
    pub dt: f64,
    pub n_steps: usize,
    /// Optional cross-check: must equal `n_steps * dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Loads reach full value at this time (default: the whole run).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_time: Option<f64>,
    /// Damage snapshot period in steps (0 disables).
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Trajectory sampling period in steps (0 disables).
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loads: Vec<PdLoadConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clamps: Vec<PdClampConfig>,
}

/// Traction applied as a body-force density over an edge band of the given
/// depth (default: one horizon), so the band carries the total edge force.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdLoadConfig {
    pub edge: Side,
    /// Surface traction [N/m²]; the band force density is `traction / depth`.
    pub traction: [f64; 2],
    /// Restriction to a coordinate interval along the edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
}

/// Zero-displacement band along an edge (default depth: one horizon).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdClampConfig {
    pub edge: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
}

pub fn to_pd_edge(side: Side) -> Edge {
    match side {
        Side::Left => Edge::Left,
        Side::Right => Edge::Right,
        Side::Bottom => Edge::Bottom,
        Side::Top => Edge::Top,
    }
}

/// Enriched-continuum run: cover geometry, solver knobs, and the boundary
/// conditions. `dt`, `n_steps`, `t_end` configure the optional explicit
/// dynamic run; leaving `dt` out selects half the estimated critical step,
/// and giving `t_end` with `n_steps` fixes `dt = t_end / n_steps`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumConfig {
    /// Refinement level: `2^level × 2^level` cells over the domain.
    pub level: u32,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Patch-center distance within which tip enrichment applies
    /// (default: four cell half-widths).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tip_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense_cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Dynamic coefficient snapshot period in steps (0 disables).
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<RampConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundary: Vec<PumBoundaryConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampConfig {
    pub kind: RampKind,
    /// Time to reach full load (default: the whole run).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_ramp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampKind {
    Smoothstep,
    Linear,
    Constant,
}

impl RampConfig {
    pub fn to_ramp(self, t_end: f64) -> Ramp {
        let t_ramp = self.t_ramp.unwrap_or(t_end);
        match self.kind {
            RampKind::Smoothstep => Ramp::Smoothstep { t_ramp },
            RampKind::Linear => Ramp::Linear { t_ramp },
            RampKind::Constant => Ramp::Constant,
        }
    }
}

/// One boundary condition: exactly one of `traction` or `dirichlet`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumBoundaryConfig {
    pub side: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traction: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<[f64; 2]>,
}

impl PumBoundaryConfig {
    pub fn to_piece(&self, index: usize) -> Result<BoundaryPiece, ConfigError> {
        let field = format!("pum.boundary[{index}]");
        let bc = match (self.traction, self.dirichlet) {
            (Some(t), None) => Bc::Traction(BcValue::Constant(Vec2::new(t[0], t[1]))),
            (None, Some(d)) => Bc::Dirichlet(BcValue::Constant(Vec2::new(d[0], d[1]))),
            _ => {
                return Err(invalid(&field, "needs exactly one of `traction` or `dirichlet`"))
            }
        };
        if let Some([a, b]) = self.span {
            if !(a < b) {
                return Err(invalid(&field, format!("span [{a}, {b}] is not increasing")));
            }
        }
        Ok(BoundaryPiece { side: self.side, span: self.span.map(|s| (s[0], s[1])), bc })
    }
}

impl PumConfig {
    pub fn boundary_spec(&self) -> Result<BoundarySpec, ConfigError> {
        let pieces = self
            .boundary
            .iter()
            .enumerate()
            .map(|(i, b)| b.to_piece(i))
            .collect::<Result<_, _>>()?;
        Ok(BoundarySpec { pieces })
    }
}

/// Global-local synchronization: an enriched-continuum global solve hands a
/// displacement layer to an explicit lattice on the local box and takes the
/// extracted crack growth back.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    /// Number of load-stepping synchronization rounds.
    #[serde(default = "default_one")]
    pub n_sync: usize,
    pub local_lo: [f64; 2],
    pub local_hi: [f64; 2],
    /// Local lattice spacing [m].
    pub h: f64,
    /// Local horizon radius [m].
    pub delta: f64,
    /// Explicit step (default: half the local stability limit, or
    /// `t_end / n_steps` when `t_end` is given).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Snapshot subset stride for crack-tip extraction (1 = every snapshot).
    #[serde(default = "default_one")]
    pub extraction_stride: usize,
    /// Route the layer displacements through ASCII handshake files on disk.
    #[serde(default = "default_true")]
    pub handshake: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory (overridden by `--output-dir`; default `out`).
    pub dir: Option<String>,
    pub vtk: bool,
    pub csv: bool,
    pub summary: bool,
    /// Also write the per-snapshot damage fields as a VTK series (large;
    /// the input `extract-crack` consumes).
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, vtk: true, csv: true, summary: true, snapshots: false }
    }
}

impl SimulationConfig {
    /// Semantic checks after parsing. Hard errors abort; the returned
    /// strings are non-fatal warnings a front end should surface.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut warnings = Vec::new();
        let material = self.material.material()?;
        if (self.material.nu - 1.0 / 3.0).abs() > 1e-12 {
            warnings.push(format!(
                "material: nu = {} but the bond lattice realizes nu = 1/3 in plane strain; \
                 lattice and continuum results will not be comparable",
                self.material.nu
            ));
        }

        let (lo, hi) = (self.geometry.domain.lo(), self.geometry.domain.hi());
        if !(hi.x > lo.x && hi.y > lo.y) {
            return Err(invalid("geometry.domain", format!("degenerate box {lo:?} .. {hi:?}")));
        }
        if let Some(spec) = &self.geometry.crack {
            let crack = spec.to_crack()?;
            let (clo, chi) = crack.bounding_box();
            if clo.x < lo.x || clo.y < lo.y || chi.x > hi.x || chi.y > hi.y {
                warnings.push("geometry.crack: polyline leaves the domain box".into());
            }
        }

        let check_time = |field: &str,
                          dt: f64,
                          n_steps: usize,
                          t_end: Option<f64>|
         -> Result<(), ConfigError> {
            if !(dt > 0.0) {
                return Err(invalid(field, format!("dt = {dt} must be positive")));
            }
            if n_steps == 0 {
                return Err(invalid(field, "n_steps must be at least 1"));
            }
            if let Some(t) = t_end {
                let run = dt * n_steps as f64;
                if (run - t).abs() > 1e-9 * t.abs().max(run.abs()) {
                    return Err(invalid(
                        field,
                        format!("n_steps × dt = {run} does not match t_end = {t}"),
                    ));
                }
            }
            Ok(())
        };

        if let Some(pd) = &self.pd {
            if !(pd.h > 0.0) {
                return Err(invalid("pd.h", format!("{} must be positive", pd.h)));
            }
            if pd.delta < pd.h {
                return Err(invalid(
                    "pd.delta",
                    format!("horizon {} below the lattice spacing {} leaves no bonds", pd.delta, pd.h),
                ));
            }
            check_time("pd", pd.dt, pd.n_steps, pd.t_end)?;
            let ratio = pd.delta / pd.h;
            if (ratio - ratio.round()).abs() > 1e-9 {
                warnings.push(format!(
                    "pd: delta/h = {ratio} is not a whole number; the horizon cuts bond \
                     shells unevenly"
                ));
            }
            let stable = material.stable_dt(pd.delta);
            if pd.dt >= stable {
                return Err(invalid(
                    "pd.dt",
                    format!("{} is at or above the stability limit {stable:.3e}", pd.dt),
                ));
            }
            let check_band = |field: String, span: Option<[f64; 2]>, depth: Option<f64>| {
                if let Some(d) = depth {
                    if !(d > 0.0) {
                        return Err(invalid(&format!("{field}.depth"), format!("{d} must be positive")));
                    }
                }
                if let Some([a, b]) = span {
                    if !(a < b) {
                        return Err(invalid(
                            &format!("{field}.span"),
                            format!("[{a}, {b}] is not increasing"),
                        ));
                    }
                }
                Ok(())
            };
            for (i, l) in pd.loads.iter().enumerate() {
                check_band(format!("pd.loads[{i}]"), l.span, l.depth)?;
            }
            for (i, c) in pd.clamps.iter().enumerate() {
                check_band(format!("pd.clamps[{i}]"), c.span, c.depth)?;
            }
        }

        if let Some(pum) = &self.pum {
            if !(1..=12).contains(&pum.level) {
                return Err(invalid("pum.level", format!("{} outside 1..=12", pum.level)));
            }
            if !(pum.alpha > 1.0 && pum.alpha < 2.0) {
                return Err(invalid("pum.alpha", format!("{} outside (1, 2)", pum.alpha)));
            }
            pum.boundary_spec()?;
            if let (Some(dt), Some(n)) = (pum.dt, pum.n_steps) {
                check_time("pum", dt, n, pum.t_end)?;
            }
        }

        if let Some(c) = &self.coupling {
            if c.n_sync == 0 {
                return Err(invalid("coupling.n_sync", "must be at least 1"));
            }
            let (llo, lhi) = (Vec2::new(c.local_lo[0], c.local_lo[1]), Vec2::new(c.local_hi[0], c.local_hi[1]));
            if !(lhi.x > llo.x && lhi.y > llo.y) {
                return Err(invalid("coupling", format!("degenerate local box {llo:?} .. {lhi:?}")));
            }
            if llo.x < lo.x || llo.y < lo.y || lhi.x > hi.x || lhi.y > hi.y {
                return Err(invalid("coupling", "local box leaves the domain"));
            }
            if !(c.h > 0.0) || c.delta < c.h {
                return Err(invalid(
                    "coupling",
                    format!("need 0 < h <= delta, got h = {}, delta = {}", c.h, c.delta),
                ));
            }
            if c.extraction_stride == 0 {
                return Err(invalid("coupling.extraction_stride", "must be at least 1"));
            }
            if let Some(dt) = c.dt {
                check_time("coupling", dt, c.n_steps, c.t_end)?;
            } else if c.n_steps == 0 {
                return Err(invalid("coupling.n_steps", "must be at least 1"));
            }
            if self.pum.is_none() {
                return Err(invalid("coupling", "requires a [pum] block for the global solve"));
            }
            if self.geometry.crack.is_none() {
                return Err(invalid("coupling", "requires an initial [geometry] crack"));
            }
        }

        Ok(warnings)
    }
}

/// Parses and validates a config given as text. `origin` labels error
/// messages (a path or `"<bundled:bar>"`).
pub fn parse_config(text: &str, origin: &str) -> Result<(SimulationConfig, Vec<String>), ConfigError> {
    // Report all missing required blocks at once before the field-level
    // deserialization, so an empty file gets a complete list.
    let value: toml::Table = toml::from_str(text)
        .map_err(|e: toml::de::Error| ConfigError::Parse { origin: origin.into(), message: e.to_string() })?;
    let missing: Vec<String> = ["material", "geometry"]
        .iter()
        .filter(|k| !value.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::MissingBlocks { origin: origin.into(), blocks: missing });
    }
    let cfg: SimulationConfig = toml::from_str(text)
        .map_err(|e| ConfigError::Parse { origin: origin.into(), message: e.to_string() })?;
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}

pub fn load_config(path: &Path) -> Result<(SimulationConfig, Vec<String>), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text, &path.display().to_string())
}

/// Shrinks a deck by `s` for fast desk runs: lattice spacing, horizon, and
/// time step grow by `s`, step counts shrink by `s` (total time fixed), and
/// the cover level drops by `log2(s)`. `s = 1` is the identity.
pub fn apply_scale(cfg: &mut SimulationConfig, s: f64) -> Result<(), ConfigError> {
    if !(s >= 1.0) || !s.is_finite() {
        return Err(invalid("--scale", format!("{s} must be a finite value >= 1")));
    }
    if s == 1.0 {
        return Ok(());
    }
    let shrink = |n: usize| ((n as f64 / s).round() as usize).max(1);
    if let Some(pd) = &mut cfg.pd {
        pd.h *= s;
        pd.delta *= s;
        pd.dt *= s;
        pd.n_steps = shrink(pd.n_steps);
    }
    if let Some(pum) = &mut cfg.pum {
        let drop = s.log2().round() as i64;
        pum.level = (pum.level as i64 - drop).max(1) as u32;
        if let Some(dt) = &mut pum.dt {
            *dt *= s;
        }
        if let Some(n) = &mut pum.n_steps {
            *n = shrink(*n);
        }
    }
    if let Some(c) = &mut cfg.coupling {
        c.h *= s;
        c.delta *= s;
        if let Some(dt) = &mut c.dt {
            *dt *= s;
        }
        c.n_steps = shrink(c.n_steps);
    }
    Ok(())
}

/// FNV-1a over the canonical re-serialization of the config, as a 16-digit
/// hex string. Identical settings hash identically regardless of comment or
/// key layout in the source file.
pub fn config_hash(cfg: &SimulationConfig) -> String {
    let canon = toml::to_string(cfg).expect("config serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canon.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Built-in experiment decks.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "bar" => Some(include_str!("../../configs/bar.toml")),
        "mode1" => Some(include_str!("../../configs/mode1.toml")),
        "inclined" => Some(include_str!("../../configs/inclined.toml")),
        _ => None,
    }
}
