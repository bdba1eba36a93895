//! Experiment configuration: a small TOML file, every key optional.
//!
//! Potentials are given as preset strings, or lists of them that are summed:
//!
//! - `zero`
//! - `constant:v11,v12,...` real entries, row-major
//! - `bump:i,j,amplitude,center,width` with `center` and `width` given per
//!   axis `(t, x1[, x2])`; a separable cubic B-spline bump in entry `(i, j)`
//! - `plateau:i,j,amplitude,lower,upper,ramp` constant on a box, smoothly
//!   ramped to zero outside it
//! - `file:path` a potential archive sampled on the configured grid
//!
//! Entry indices are zero-based. Bumps and plateaus carry their support box
//! when it keeps two node layers away from the boundary of `Q`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use mwip_core::geometry::{BoundaryPartition, Grid};
use mwip_core::potential::{Entry, MatrixPotential, SupportBox};
use mwip_core::C64;
use serde::{Deserialize, Serialize};

use crate::archive::FieldArchive;
use crate::error::{CliError, CliResult};

/// Data presets understood by `simulate`.
pub const SIMULATE_CASES: [&str; 7] = ["zero", "mms", "standing", "velocity", "plane", "boundary", "mixed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Output directory, relative to the working directory.
    pub out: String,
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    pub probe: ProbeConfig,
    pub cone: ConeConfig,
    pub modes: ModeConfig,
    pub simulate: SimulateConfig,
    pub carleman: CarlemanConfig,
    pub sweep: SweepConfig,
    /// Directory that `file:` paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub nx: usize,
    pub t_final: f64,
    /// Time steps; the CFL minimum when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub m: usize,
    pub q1: PotentialSpec,
    pub q2: PotentialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub omega0: [f64; 2],
    pub epsilon: f64,
    /// Node layers added around the measured boundary part.
    pub dilation: usize,
    pub h: Vec<f64>,
    /// Spatial frequency of the decaying probe in `identity` and `probe`.
    pub xi: [f64; 2],
    /// Amplitudes as `[re, im]` pairs.
    pub k1: Vec<[f64; 2]>,
    pub k2: Vec<[f64; 2]>,
    /// Also run the fixed-point construction in `probe`.
    pub fixed_point: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConeConfig {
    /// Directions sampled on the cap around `omega0`.
    pub directions: usize,
    pub xi_max: f64,
    pub per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeConfig {
    /// Build decaying probes without the potential.
    pub blind: bool,
    /// Add partial-data estimates to the reconstruction samples.
    pub partial: bool,
    /// Write a filtered inverse of every entry as an archive.
    pub filtered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub cases: Vec<String>,
    /// Extra grids, each halving `dx`.
    pub refinements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanConfig {
    pub nx: usize,
    pub t_final: f64,
    pub seeds: u64,
    pub h: Vec<f64>,
    pub omega: [f64; 2],
    pub presets: Vec<String>,
    /// Grids for the integration-by-parts audits.
    pub audit_nx: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub h: Vec<f64>,
    /// Each sweep grid gets `nx = h_over_dx / h + 1`.
    pub h_over_dx: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: "mwip-out".into(),
            grid: GridConfig::default(),
            potential: PotentialConfig::default(),
            probe: ProbeConfig::default(),
            cone: ConeConfig::default(),
            modes: ModeConfig::default(),
            simulate: SimulateConfig::default(),
            carleman: CarlemanConfig::default(),
            sweep: SweepConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 2,
            nx: 33,
            t_final: 2.0,
            nt: None,
        }
    }
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            m: 2,
            q1: PotentialSpec::One("bump:0,1,2,0.5,0.5,0.5,0.25,0.3,0.3".into()),
            q2: PotentialSpec::One("zero".into()),
        }
    }
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            omega0: [1.0, 0.0],
            epsilon: 0.05,
            dilation: 1,
            h: vec![0.25],
            xi: [1.0, -0.5],
            k1: vec![[1.0, 0.0], [0.0, 0.0]],
            k2: vec![[0.0, 0.0], [1.0, 0.0]],
            fixed_point: true,
        }
    }
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self {
            directions: 1,
            xi_max: 2.0,
            per_axis: 5,
        }
    }
}

impl Default for ModeConfig {
    fn default() -> Self {
        Self {
            blind: false,
            partial: true,
            filtered: false,
        }
    }
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            cases: SIMULATE_CASES.iter().map(|s| s.to_string()).collect(),
            refinements: 1,
        }
    }
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            nx: 41,
            t_final: 1.0,
            seeds: 20,
            h: vec![0.4, 0.2, 0.1],
            omega: [0.6, 0.8],
            presets: vec![
                "zero".into(),
                "constant:1,0.5,0,-1".into(),
                "bump:0,0,3,0.5,0.5,0.5,0.4,0.35,0.35".into(),
            ],
            audit_nx: vec![17, 33],
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            h: vec![0.5, 0.25, 0.125],
            h_over_dx: 8.0,
        }
    }
}

/// One preset or a list of presets to be summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    One(String),
    Sum(Vec<String>),
}

impl PotentialSpec {
    pub fn terms(&self) -> Vec<&str> {
        match self {
            PotentialSpec::One(s) => vec![s.as_str()],
            PotentialSpec::Sum(v) => v.iter().map(String::as_str).collect(),
        }
    }

    pub fn label(&self) -> String {
        self.terms().join(" + ")
    }

    pub fn presets(&self) -> CliResult<Vec<Preset>> {
        self.terms().into_iter().map(str::parse).collect()
    }

    pub fn build(&self, m: usize, grid: &Grid, base: &Path) -> CliResult<MatrixPotential> {
        let mut q = MatrixPotential::zero(m);
        for p in self.presets()? {
            q = q.combine(C64::new(1.0, 0.0), &p.build(m, grid, base)?, C64::new(1.0, 0.0))?;
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Zero,
    Constant(Vec<f64>),
    Bump {
        i: usize,
        j: usize,
        amplitude: f64,
        center: Vec<f64>,
        width: Vec<f64>,
    },
    Plateau {
        i: usize,
        j: usize,
        amplitude: f64,
        lower: Vec<f64>,
        upper: Vec<f64>,
        ramp: f64,
    },
    File(PathBuf),
}

fn numbers(body: &str) -> Result<Vec<f64>, String> {
    body.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect()
}

fn index(v: f64) -> Result<usize, String> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(format!("entry index must be a non-negative integer, got {v}"))
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let s = s.trim();
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        let bad = |msg: String| CliError::Config(format!("potential preset {s:?}: {msg}"));
        match name {
            "zero" if body.is_empty() => Ok(Preset::Zero),
            "constant" => Ok(Preset::Constant(numbers(body).map_err(bad)?)),
            "bump" => {
                let v = numbers(body).map_err(bad)?;
                let axes = match v.len() {
                    7 => 2,
                    9 => 3,
                    k => return Err(bad(format!("expected i,j,amplitude and a center and width per axis, got {k} numbers"))),
                };
                Ok(Preset::Bump {
                    i: index(v[0]).map_err(bad)?,
                    j: index(v[1]).map_err(bad)?,
                    amplitude: v[2],
                    center: v[3..3 + axes].to_vec(),
                    width: v[3 + axes..].to_vec(),
                })
            }
            "plateau" => {
                let v = numbers(body).map_err(bad)?;
                let axes = match v.len() {
                    8 => 2,
                    10 => 3,
                    k => return Err(bad(format!("expected i,j,amplitude,lower,upper,ramp, got {k} numbers"))),
                };
                Ok(Preset::Plateau {
                    i: index(v[0]).map_err(bad)?,
                    j: index(v[1]).map_err(bad)?,
                    amplitude: v[2],
                    lower: v[3..3 + axes].to_vec(),
                    upper: v[3 + axes..3 + 2 * axes].to_vec(),
                    ramp: v[3 + 2 * axes],
                })
            }
            "file" if !body.is_empty() => Ok(Preset::File(PathBuf::from(body))),
            _ => Err(bad("unknown preset; use zero, constant:, bump:, plateau: or file:".into())),
        }
    }
}

fn axes3(v: &[f64]) -> [f64; 3] {
    let mut out = [0.5; 3];
    out[..v.len()].copy_from_slice(v);
    out
}

/// Attaches the box when it satisfies the margin rule, otherwise leaves `q` as is.
fn try_support(q: MatrixPotential, lower: [f64; 3], upper: [f64; 3], grid: &Grid) -> MatrixPotential {
    let support = SupportBox { lower, upper };
    q.clone().with_support(support, grid).unwrap_or(q)
}

impl Preset {
    pub fn build(&self, m: usize, grid: &Grid, base: &Path) -> CliResult<MatrixPotential> {
        let axes = grid.n() + 1;
        let check_entry = |i: usize, j: usize| {
            if i >= m || j >= m {
                Err(CliError::Config(format!("entry ({i}, {j}) outside a {m}x{m} potential")))
            } else {
                Ok(())
            }
        };
        let check_axes = |v: &[f64]| {
            if v.len() != axes {
                Err(CliError::Config(format!(
                    "preset gives {} coordinates per point, the grid has {axes} axes",
                    v.len()
                )))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            Preset::Zero => MatrixPotential::zero(m),
            Preset::Constant(v) => {
                if v.len() != m * m {
                    return Err(CliError::Config(format!("constant needs {} entries, got {}", m * m, v.len())));
                }
                let vals: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
                MatrixPotential::constant(m, &vals)?
            }
            Preset::Bump {
                i,
                j,
                amplitude,
                center,
                width,
            } => {
                check_entry(*i, *j)?;
                check_axes(center)?;
                if width.iter().any(|w| !(*w > 0.0)) {
                    return Err(CliError::Config("bump widths must be positive".into()));
                }
                let (c, w) = (axes3(center), axes3(width));
                let q = MatrixPotential::single(
                    m,
                    *i,
                    *j,
                    Entry::SeparableBump {
                        amplitude: C64::new(*amplitude, 0.0),
                        center: c,
                        half_width: w,
                    },
                )?;
                try_support(q, [0, 1, 2].map(|k| c[k] - w[k]), [0, 1, 2].map(|k| c[k] + w[k]), grid)
            }
            Preset::Plateau {
                i,
                j,
                amplitude,
                lower,
                upper,
                ramp,
            } => {
                check_entry(*i, *j)?;
                check_axes(lower)?;
                check_axes(upper)?;
                if !(*ramp > 0.0) {
                    return Err(CliError::Config("plateau ramp must be positive".into()));
                }
                let (lo, hi) = (axes3(lower), axes3(upper));
                let q = MatrixPotential::single(
                    m,
                    *i,
                    *j,
                    Entry::Plateau {
                        amplitude: C64::new(*amplitude, 0.0),
                        lower: lo,
                        upper: hi,
                        ramp: *ramp,
                    },
                )?;
                try_support(q, lo.map(|v| v - ramp), hi.map(|v| v + ramp), grid)
            }
            Preset::File(path) => {
                let q = FieldArchive::load(&base.join(path))?.to_potential(grid)?;
                if q.dim() != m {
                    return Err(CliError::Config(format!(
                        "{} holds a {}x{} potential, expected {m}x{m}",
                        path.display(),
                        q.dim(),
                        q.dim()
                    )));
                }
                q
            }
        })
    }
}

fn positive_list(name: &str, v: &[f64]) -> CliResult<()> {
    match v.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        Some(h) => Err(CliError::Config(format!("{name} entries must be positive, got {h}"))),
        None => Ok(()),
    }
}

fn unit(name: &str, w: [f64; 2], n: usize) -> CliResult<()> {
    let len = w[0].hypot(w[1]);
    if (len - 1.0).abs() > 1e-12 || (n == 1 && w[1] != 0.0) {
        return Err(CliError::Config(format!("{name} = {w:?} is not a unit vector in {n} dimensions")));
    }
    Ok(())
}

fn amplitude(name: &str, v: &[[f64; 2]], m: usize) -> CliResult<Vec<C64>> {
    if v.len() != m {
        return Err(CliError::Config(format!("{name} needs {m} entries, got {}", v.len())));
    }
    Ok(v.iter().map(|p| C64::new(p[0], p[1])).collect())
}

impl ExperimentConfig {
    /// Parses and validates everything that does not touch the file system.
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; `file:` presets resolve against its directory and must exist.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> CliResult<()> {
        let g = &self.grid;
        self.base_grid()?;
        let m = self.potential.m;
        if m == 0 {
            return Err(CliError::Config("potential.m must be at least 1".into()));
        }
        for spec in [&self.potential.q1, &self.potential.q2] {
            spec.presets()?;
        }
        for p in &self.carleman.presets {
            p.parse::<Preset>()?;
        }
        unit("probe.omega0", self.probe.omega0, g.n)?;
        unit("carleman.omega", self.carleman.omega, g.n)?;
        if !(self.probe.epsilon >= 0.0 && self.probe.epsilon.is_finite()) {
            return Err(CliError::Config("probe.epsilon must be non-negative".into()));
        }
        positive_list("probe.h", &self.probe.h)?;
        positive_list("carleman.h", &self.carleman.h)?;
        positive_list("sweep.h", &self.sweep.h)?;
        amplitude("probe.k1", &self.probe.k1, m)?;
        amplitude("probe.k2", &self.probe.k2, m)?;
        if self.cone.directions == 0 || self.cone.per_axis == 0 || !(self.cone.xi_max >= 0.0) {
            return Err(CliError::Config("cone needs directions >= 1, per_axis >= 1, xi_max >= 0".into()));
        }
        if !(self.sweep.h_over_dx > 0.0) {
            return Err(CliError::Config("sweep.h_over_dx must be positive".into()));
        }
        if !(self.carleman.t_final > 0.0) || self.carleman.nx < 8 {
            return Err(CliError::Config("carleman needs nx >= 8 and t_final > 0".into()));
        }
        if let Some(c) = self.simulate.cases.iter().find(|c| !SIMULATE_CASES.contains(&c.as_str())) {
            return Err(CliError::Config(format!("unknown simulate case {c:?}; known: {SIMULATE_CASES:?}")));
        }
        if self.out.is_empty() {
            return Err(CliError::Config("out must name a directory".into()));
        }
        Ok(())
    }

    fn check_files(&self) -> CliResult<()> {
        let specs = [&self.potential.q1, &self.potential.q2];
        for spec in specs {
            for p in spec.presets()? {
                if let Preset::File(path) = p {
                    let full = self.base_dir.join(&path);
                    if !full.is_file() {
                        return Err(CliError::Config(format!("potential file {} does not exist", full.display())));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn base_grid(&self) -> CliResult<Grid> {
        let g = &self.grid;
        let grid = match g.nt {
            Some(nt) => Grid::new(g.n, g.nx, nt, g.t_final),
            None => Grid::with_min_steps(g.n, g.nx, g.t_final),
        };
        grid.map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    /// The base grid with `dx` halved `r` times.
    pub fn refined_grid(&self, r: usize) -> CliResult<Grid> {
        let mut grid = self.base_grid()?;
        for _ in 0..r {
            grid = grid.refined().map_err(|e| CliError::Config(format!("grid: {e}")))?;
        }
        Ok(grid)
    }

    /// Grid for one sweep entry, keeping `h / dx` fixed.
    pub fn sweep_grid(&self, h: f64) -> CliResult<Grid> {
        let nx = (self.sweep.h_over_dx / h).ceil() as usize + 1;
        Grid::with_min_steps(self.grid.n, nx, self.grid.t_final).map_err(|e| CliError::Config(format!("sweep grid: {e}")))
    }

    pub fn potentials(&self, grid: &Grid) -> CliResult<(MatrixPotential, MatrixPotential)> {
        let m = self.potential.m;
        Ok((
            self.potential.q1.build(m, grid, &self.base_dir)?,
            self.potential.q2.build(m, grid, &self.base_dir)?,
        ))
    }

    pub fn partition(&self, grid: &Grid) -> CliResult<BoundaryPartition> {
        BoundaryPartition::with_dilation(grid, self.probe.omega0, self.probe.epsilon, self.probe.dilation)
            .map_err(|e| CliError::Config(format!("partition: {e}")))
    }

    pub fn k1(&self) -> Vec<C64> {
        amplitude("probe.k1", &self.probe.k1, self.potential.m).expect("validated")
    }

    pub fn k2(&self) -> Vec<C64> {
        amplitude("probe.k2", &self.probe.k2, self.potential.m).expect("validated")
    }
}

#[cfg(test)]
mod tests;
