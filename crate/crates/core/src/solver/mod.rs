//! Explicit finite-difference solves of `□u + q u = S` and of its
//! exponentially conjugated form, plus the boundary measurements built on them.

mod field;
pub mod stepper;

use std::sync::Arc;

use num_complex::Complex64 as C64;

pub use field::{max_norm, BoundaryField, Representation, Sign, WaveField, MAX_EXPONENT};
pub(crate) use field::level_sq_norm;
use stepper::{amplification, Lattice, LevelFn, March};

use crate::error::{MwipError, Result};
use crate::geometry::{check_unit, BoundaryPoint, Grid};
use crate::potential::MatrixPotential;

/// Smallest admissible `h / dx` for conjugated solves.
pub const MIN_H_OVER_DX: f64 = 8.0;

/// Data callback `(t, x, out)` writing `m` components.
pub type DataFn = Arc<dyn Fn(f64, &[f64], &mut [C64]) + Send + Sync>;

/// Cauchy and Dirichlet data `(φ, ψ, f)`. `φ` and `ψ` are read at `t = 0`.
#[derive(Clone)]
pub struct IbvpData {
    pub m: usize,
    pub phi: DataFn,
    pub psi: DataFn,
    pub f: DataFn,
}

impl std::fmt::Debug for IbvpData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "IbvpData {{ m: {} }}", self.m)
    }
}

fn zero_fn() -> DataFn {
    Arc::new(|_, _, out: &mut [C64]| out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0)))
}

impl IbvpData {
    pub fn zero(m: usize) -> Self {
        Self {
            m,
            phi: zero_fn(),
            psi: zero_fn(),
            f: zero_fn(),
        }
    }

    /// Data matching a known solution `u` with time derivative `u_t`.
    pub fn from_solution(m: usize, u: DataFn, u_t: DataFn) -> Self {
        Self {
            m,
            phi: Arc::clone(&u),
            psi: u_t,
            f: u,
        }
    }

    /// `a · self + b · other`.
    pub fn combine(&self, a: C64, other: &IbvpData, b: C64) -> IbvpData {
        let mix = |x: &DataFn, y: &DataFn| -> DataFn {
            let (x, y) = (Arc::clone(x), Arc::clone(y));
            let m = self.m;
            Arc::new(move |t, p: &[f64], out: &mut [C64]| {
                let mut tmp = vec![C64::new(0.0, 0.0); m];
                x(t, p, out);
                y(t, p, &mut tmp);
                for (o, v) in out.iter_mut().zip(&tmp) {
                    *o = a * *o + b * v;
                }
            })
        };
        IbvpData {
            m: self.m,
            phi: mix(&self.phi, &other.phi),
            psi: mix(&self.psi, &other.psi),
            f: mix(&self.f, &other.f),
        }
    }

    pub fn scaled(&self, s: C64) -> IbvpData {
        self.combine(s, &IbvpData::zero(self.m), C64::new(0.0, 0.0))
    }

    fn sample(&self, grid: &Grid, f: &DataFn, t: f64) -> Vec<C64> {
        let m = self.m;
        let n = grid.n();
        let mut out = vec![C64::new(0.0, 0.0); grid.nodes() * m];
        for p in 0..grid.nodes() {
            let x = grid.coord(p);
            f(t, &x[..n], &mut out[p * m..(p + 1) * m]);
        }
        out
    }

    /// `max |f(0,x) - φ(x)|` over boundary nodes.
    pub fn compatibility_mismatch(&self, grid: &Grid) -> f64 {
        let n = grid.n();
        let mut a = vec![C64::new(0.0, 0.0); self.m];
        let mut b = vec![C64::new(0.0, 0.0); self.m];
        let mut worst = 0.0f64;
        for p in grid.boundary_nodes() {
            let x = grid.coord(p);
            (self.f)(0.0, &x[..n], &mut a);
            (self.phi)(0.0, &x[..n], &mut b);
            for (u, v) in a.iter().zip(&b) {
                worst = worst.max((u - v).norm());
            }
        }
        worst
    }
}

/// Potential callback on the lattice: `q` at clamped coordinates.
pub(crate) fn lattice_potential<'a>(
    grid: &'a Grid,
    q: &'a MatrixPotential,
    lat: Lattice,
    reverse: bool,
) -> Result<Option<Box<LevelFn<'a>>>> {
    if q.is_zero() {
        return Ok(None);
    }
    let mm = q.dim() * q.dim();
    let mut probe = vec![C64::new(0.0, 0.0); grid.nodes() * mm];
    q.fill_level(grid, 0, &mut probe)?;
    let nt = grid.nt();
    Ok(Some(Box::new(move |k: usize, out: &mut [C64]| {
        let level = if reverse { nt - k } else { k };
        if lat.pad == 0 {
            q.fill_level(grid, level, out).expect("grid checked");
            return;
        }
        let mut buf = vec![C64::new(0.0, 0.0); grid.nodes() * mm];
        q.fill_level(grid, level, &mut buf).expect("grid checked");
        for l in 0..lat.nodes() {
            let p = lat.clamped_grid_node(l);
            out[l * mm..(l + 1) * mm].copy_from_slice(&buf[p * mm..(p + 1) * mm]);
        }
    })))
}

/// Marches the physical IBVP, handing every level to `observer`.
fn march_physical(
    grid: &Grid,
    q: &MatrixPotential,
    data: &IbvpData,
    source: Option<&LevelFn<'_>>,
    observer: &mut dyn FnMut(usize, &[C64]) -> Result<()>,
) -> Result<()> {
    if data.m != q.dim() {
        return Err(MwipError::InvalidArgument(format!(
            "data has {} components, potential is {}x{}",
            data.m,
            q.dim(),
            q.dim()
        )));
    }
    let mismatch = data.compatibility_mismatch(grid);
    if mismatch > 1e-10 {
        return Err(MwipError::Compatibility { mismatch });
    }
    let m = data.m;
    let n = grid.n();
    let lat = Lattice::new(grid, 0);
    let phi = data.sample(grid, &data.phi, 0.0);
    let psi = data.sample(grid, &data.psi, 0.0);
    let bnodes = grid.boundary_nodes();
    let f = Arc::clone(&data.f);
    let boundary = move |k: usize, level: &mut [C64]| {
        let t = grid.time(k);
        for &p in &bnodes {
            let x = grid.coord(p);
            f(t, &x[..n], &mut level[p * m..(p + 1) * m]);
        }
    };
    let potential = lattice_potential(grid, q, lat, false)?;
    March {
        lattice: lat,
        m,
        gamma: 0.0,
        omega: [0.0; 2],
        potential: potential.as_deref(),
        source,
        boundary: Some(&boundary),
        initial: Some((&phi, &psi)),
    }
    .run(observer)
}

/// Solves `□u + q u = 0`, `u(0) = φ`, `u_t(0) = ψ`, `u|_Σ = f`.
pub fn solve_ibvp(grid: &Grid, q: &MatrixPotential, data: &IbvpData) -> Result<WaveField> {
    solve_ibvp_with_source(grid, q, data, None)
}

/// As [`solve_ibvp`] with a right-hand side `S` filled per level.
pub fn solve_ibvp_with_source(
    grid: &Grid,
    q: &MatrixPotential,
    data: &IbvpData,
    source: Option<&LevelFn<'_>>,
) -> Result<WaveField> {
    let mut u = WaveField::zeros(grid, data.m, Representation::Physical);
    march_physical(grid, q, data, source, &mut |k, level| {
        u.level_mut(k).copy_from_slice(level);
        Ok(())
    })?;
    Ok(u)
}

/// Level source reading a stored field: `S = scale · M u` with `M` from `q`.
pub fn potential_source<'a>(
    q: &'a MatrixPotential,
    u: &'a WaveField,
    scale: C64,
) -> Result<impl Fn(usize, &mut [C64]) + Sync + 'a> {
    let grid = *u.grid();
    let m = u.components();
    if q.dim() != m {
        return Err(MwipError::InvalidArgument("component mismatch".into()));
    }
    let mut probe = vec![C64::new(0.0, 0.0); grid.nodes() * m * m];
    q.fill_level(&grid, 0, &mut probe)?;
    Ok(move |k: usize, out: &mut [C64]| {
        let mut qb = vec![C64::new(0.0, 0.0); grid.nodes() * m * m];
        q.fill_level(&grid, k, &mut qb).expect("grid checked");
        apply_matrix(&qb, u.level(k), m, scale, out);
    })
}

/// `out[p] = scale · Q[p] · u[p]` nodewise.
pub(crate) fn apply_matrix(qb: &[C64], u: &[C64], m: usize, scale: C64, out: &mut [C64]) {
    let nodes = u.len() / m;
    for p in 0..nodes {
        for c in 0..m {
            let mut acc = C64::new(0.0, 0.0);
            for d in 0..m {
                acc += qb[(p * m + c) * m + d] * u[p * m + d];
            }
            out[p * m + c] = scale * acc;
        }
    }
}

/// Discrete `□u + q u` at interior nodes of interior levels; zero elsewhere.
pub fn apply_operator(q: &MatrixPotential, u: &WaveField) -> Result<WaveField> {
    if u.representation() != Representation::Physical {
        return Err(MwipError::Representation(
            "apply_operator needs a physical field; use apply_conjugated".into(),
        ));
    }
    let grid = *u.grid();
    let m = u.components();
    if q.dim() != m {
        return Err(MwipError::InvalidArgument("component mismatch".into()));
    }
    let mut out = WaveField::zeros(&grid, m, Representation::Physical);
    let mut qb = vec![C64::new(0.0, 0.0); grid.nodes() * m * m];
    let mut qu = vec![C64::new(0.0, 0.0); grid.nodes() * m];
    for k in 1..grid.nt() {
        q.fill_level(&grid, k, &mut qb)?;
        apply_matrix(&qb, u.level(k), m, C64::new(1.0, 0.0), &mut qu);
        let lvl = wave_level(u, k);
        let o = out.level_mut(k);
        for (i, v) in lvl.into_iter().enumerate() {
            if let Some(v) = v {
                o[i] = v + qu[i];
            }
        }
    }
    Ok(out)
}

/// Second-order `□u` at interior nodes of level `k` (`None` on the boundary).
fn wave_level(u: &WaveField, k: usize) -> Vec<Option<C64>> {
    let grid = u.grid();
    let m = u.components();
    let (a, b, c) = (u.level(k - 1), u.level(k), u.level(k + 1));
    let inv_dt2 = 1.0 / (grid.dt() * grid.dt());
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let strides = spatial_strides(grid, m);
    (0..grid.nodes() * m)
        .map(|i| {
            let p = i / m;
            if grid.is_boundary(p) {
                return None;
            }
            let utt = (a[i] - 2.0 * b[i] + c[i]) * inv_dt2;
            let lap: C64 = strides
                .iter()
                .map(|&s| b[i + s] + b[i - s] - 2.0 * b[i])
                .sum::<C64>()
                * inv_dx2;
            Some(utt - lap)
        })
        .collect()
}

fn spatial_strides(grid: &Grid, m: usize) -> Vec<usize> {
    (0..grid.n())
        .map(|a| if a == 0 { m } else { grid.nx() * m })
        .collect()
}

/// Second-order `(□_{±φ} + h² q) w` at interior nodes of interior levels.
pub fn apply_conjugated(
    q: &MatrixPotential,
    h: f64,
    omega: [f64; 2],
    sign: Sign,
    w: &WaveField,
) -> Result<WaveField> {
    let grid = *w.grid();
    check_unit(&grid, &omega)?;
    let m = w.components();
    let mut out = WaveField::zeros(
        &grid,
        m,
        Representation::Conjugated { h, omega, sign },
    );
    let mut qb = vec![C64::new(0.0, 0.0); grid.nodes() * m * m];
    let mut qu = vec![C64::new(0.0, 0.0); grid.nodes() * m];
    let strides = spatial_strides(&grid, m);
    let s = sign.value();
    for k in 1..grid.nt() {
        q.fill_level(&grid, k, &mut qb)?;
        apply_matrix(&qb, w.level(k), m, C64::new(h * h, 0.0), &mut qu);
        let box_lvl = wave_level(w, k);
        let (a, b, c) = (w.level(k - 1), w.level(k), w.level(k + 1));
        let o = out.level_mut(k);
        for (i, v) in box_lvl.into_iter().enumerate() {
            if let Some(v) = v {
                let ut = (c[i] - a[i]) / (2.0 * grid.dt());
                let grad: C64 = strides
                    .iter()
                    .zip(omega.iter())
                    .map(|(&st, &om)| om * (b[i + st] - b[i - st]) / (2.0 * grid.dx()))
                    .sum();
                o[i] = h * h * v + s * 2.0 * h * (ut - grad) + qu[i];
            }
        }
    }
    Ok(out)
}

/// Second-order one-sided outward derivative at every boundary point, any representation.
pub fn normal_derivative(u: &WaveField) -> BoundaryField {
    let grid = *u.grid();
    let m = u.components();
    let mut out = BoundaryField::zeros(&grid, m);
    let points: Vec<BoundaryPoint> = out.points().to_vec();
    for k in 0..grid.levels() {
        let lvl = u.level(k);
        trace_level(&grid, &points, lvl, m, out.level_mut(k));
    }
    out
}

pub(crate) fn trace_level(
    grid: &Grid,
    points: &[BoundaryPoint],
    level: &[C64],
    m: usize,
    out: &mut [C64],
) {
    let inv = 1.0 / (2.0 * grid.dx());
    for (i, p) in points.iter().enumerate() {
        for c in 0..m {
            let ub = level[p.node * m + c];
            let u1 = level[p.inward[0] * m + c];
            let u2 = level[p.inward[1] * m + c];
            out[i * m + c] = (3.0 * ub - 4.0 * u1 + u2) * inv;
        }
    }
}

/// `∂_ν u` on `Σ` by a second-order one-sided difference.
pub fn neumann_trace(u: &WaveField) -> Result<BoundaryField> {
    if u.representation() != Representation::Physical {
        return Err(MwipError::Representation(
            "neumann_trace needs a physical field".into(),
        ));
    }
    Ok(normal_derivative(u))
}

/// Boundary observations of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub final_value: Vec<C64>,
    final_velocity: Vec<C64>,
    /// `∂_ν u` on `Σ`; zero outside `mask`.
    pub neumann_trace: BoundaryField,
    pub mask: Vec<bool>,
    /// `max |f(0,·) - φ|` on `∂Ω` for the inputs.
    pub compatibility_mismatch: f64,
}

impl Measurement {
    /// `∂_t u(T)`. Not part of the observed data; used only by the integral identity.
    pub fn final_velocity_auxiliary(&self) -> &[C64] {
        &self.final_velocity
    }

    /// Trace value at a masked point, `None` elsewhere.
    pub fn trace(&self, level: usize, point: usize, c: usize) -> Option<C64> {
        self.mask[point].then(|| self.neumann_trace.at(level, point, c))
    }
}

/// Solves and records `u(T)`, `∂_t u(T)` and `∂_ν u` on the masked part of `Σ`
/// (all of `Σ` when `mask` is `None`).
pub fn measure(
    grid: &Grid,
    q: &MatrixPotential,
    data: &IbvpData,
    mask: Option<&[bool]>,
) -> Result<Measurement> {
    let m = data.m;
    let mut trace = BoundaryField::zeros(grid, m);
    let points = trace.points().to_vec();
    let mask: Vec<bool> = match mask {
        Some(mk) if mk.len() == points.len() => mk.to_vec(),
        Some(mk) => {
            return Err(MwipError::InvalidArgument(format!(
                "mask has {} entries, boundary has {}",
                mk.len(),
                points.len()
            )))
        }
        None => vec![true; points.len()],
    };
    let nt = grid.nt();
    let len = grid.nodes() * m;
    let mut tail = [
        vec![C64::new(0.0, 0.0); len],
        vec![C64::new(0.0, 0.0); len],
        vec![C64::new(0.0, 0.0); len],
    ];
    march_physical(grid, q, data, None, &mut |k, level| {
        let out = trace.level_mut(k);
        trace_level(grid, &points, level, m, out);
        for (i, keep) in mask.iter().enumerate() {
            if !keep {
                out[i * m..(i + 1) * m]
                    .iter_mut()
                    .for_each(|v| *v = C64::new(0.0, 0.0));
            }
        }
        if k + 2 >= nt {
            tail[k + 2 - nt].copy_from_slice(level);
        }
        Ok(())
    })?;
    let inv = 1.0 / (2.0 * grid.dt());
    let final_velocity = (0..len)
        .map(|i| (3.0 * tail[2][i] - 4.0 * tail[1][i] + tail[0][i]) * inv)
        .collect();
    let [_, _, final_value] = tail;
    Ok(Measurement {
        final_value,
        final_velocity,
        neumann_trace: trace,
        mask,
        compatibility_mismatch: data.compatibility_mismatch(grid),
    })
}

/// Both sides of the energy estimate for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub neumann_norm: f64,
    pub h1_norm: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Squared `H¹(Ω)` seminorm pieces of one level: `(∫|u|², ∫|∇u|²)`.
fn level_h1(grid: &Grid, level: &[C64], m: usize) -> (f64, f64) {
    let w = grid.space_weights();
    let nx = grid.nx();
    let inv = 1.0 / grid.dx();
    let (mut l2, mut grad) = (0.0, 0.0);
    for p in 0..grid.nodes() {
        let idx = grid.axis_indices(p);
        for c in 0..m {
            let v = level[p * m + c];
            l2 += w[p] * v.norm_sqr();
            for a in 0..grid.n() {
                let s = if a == 0 { 1 } else { nx };
                let at = |q: usize| level[q * m + c];
                let d = if idx[a] == 0 {
                    (-3.0 * v + 4.0 * at(p + s) - at(p + 2 * s)) * (0.5 * inv)
                } else if idx[a] == nx - 1 {
                    (3.0 * v - 4.0 * at(p - s) + at(p - 2 * s)) * (0.5 * inv)
                } else {
                    (at(p + s) - at(p - s)) * (0.5 * inv)
                };
                grad += w[p] * d.norm_sqr();
            }
        }
    }
    (l2, grad)
}

/// Evaluates `‖∂_ν u‖_{L²(Σ)} + ‖u‖_{H¹(Q)}` against `‖φ‖_{H¹} + ‖ψ‖_{L²} + ‖f‖_{L²(Σ)}`.
pub fn energy_audit(u: &WaveField, data: &IbvpData) -> Result<EnergyReport> {
    if u.representation() != Representation::Physical {
        return Err(MwipError::Representation(
            "energy audit needs a physical field".into(),
        ));
    }
    let grid = *u.grid();
    let m = u.components();
    let neumann_norm = neumann_trace(u)?.l2_norm(None);
    let mut h1 = 0.0;
    let inv = 1.0 / (2.0 * grid.dt());
    let nt = grid.nt();
    let w = grid.space_weights();
    for k in 0..grid.levels() {
        let (l2, grad) = level_h1(&grid, u.level(k), m);
        let ut: Vec<C64> = if k == 0 {
            let (a, b, c) = (u.level(0), u.level(1), u.level(2));
            (0..a.len()).map(|i| (-3.0 * a[i] + 4.0 * b[i] - c[i]) * inv).collect()
        } else if k == nt {
            let (a, b, c) = (u.level(nt - 2), u.level(nt - 1), u.level(nt));
            (0..a.len()).map(|i| (a[i] - 4.0 * b[i] + 3.0 * c[i]) * inv).collect()
        } else {
            let (a, c) = (u.level(k - 1), u.level(k + 1));
            (0..a.len()).map(|i| (c[i] - a[i]) * inv).collect()
        };
        let time = field::level_sq_norm(&ut, &w, m);
        h1 += grid.time_weight(k) * (l2 + grad + time);
    }
    let h1_norm = h1.sqrt();

    let phi = data.sample(&grid, &data.phi, 0.0);
    let psi = data.sample(&grid, &data.psi, 0.0);
    let (p2, pg) = level_h1(&grid, &phi, m);
    let psi_norm = field::level_sq_norm(&psi, &w, m).sqrt();
    let mut f_sq = 0.0;
    let points = grid.boundary_points();
    let n = grid.n();
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for k in 0..grid.levels() {
        let t = grid.time(k);
        let mut acc = 0.0;
        for p in &points {
            let x = grid.coord(p.node);
            (data.f)(t, &x[..n], &mut buf);
            acc += p.weight * buf.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        f_sq += grid.time_weight(k) * acc;
    }
    let rhs = (p2 + pg).sqrt() + psi_norm + f_sq.sqrt();
    let lhs = neumann_norm + h1_norm;
    let ratio = if rhs == 0.0 {
        if lhs > 1e-10 {
            return Err(MwipError::StabilityViolation { lhs });
        }
        0.0
    } else {
        lhs / rhs
    };
    Ok(EnergyReport {
        neumann_norm,
        h1_norm,
        lhs,
        rhs,
        ratio,
    })
}

/// A conjugated problem `(□_{±φ} + h² q) w = g` with homogeneous data.
///
/// The `+` sign is marched forward from zero Cauchy data at `t = 0`. The `-`
/// sign is marched backward from zero data at `t = T`; forward in time that
/// operator amplifies like `e^{2t/h}`. With `pad > 0` the march runs on a box
/// enlarged by `pad` node layers per side, zero on its outer boundary, and the
/// potential is continued by clamping coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ConjugatedSolve<'a> {
    pub grid: &'a Grid,
    pub q: &'a MatrixPotential,
    pub h: f64,
    pub omega: [f64; 2],
    pub sign: Sign,
    pub pad: usize,
}

impl<'a> ConjugatedSolve<'a> {
    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.grid, self.pad)
    }

    pub fn representation(&self) -> Representation {
        Representation::Conjugated {
            h: self.h,
            omega: self.omega,
            sign: self.sign,
        }
    }

    /// Resolution rule, unit direction and von Neumann stability of the march.
    pub fn check(&self) -> Result<()> {
        check_unit(self.grid, &self.omega)?;
        let min_h = MIN_H_OVER_DX * self.grid.dx();
        if !(self.h >= min_h * (1.0 - 1e-12)) {
            return Err(MwipError::Resolution { h: self.h, min_h });
        }
        let amp = amplification(
            self.grid.n(),
            self.grid.dx(),
            self.grid.dt(),
            1.0 / self.h,
            self.omega,
        );
        if amp > 1.0 + 1e-10 {
            return Err(MwipError::TransportCfl {
                amplification: amp,
                dt: self.grid.dt(),
                h: self.h,
            });
        }
        Ok(())
    }

    /// Marches with right-hand side `g` (filled on the lattice at physical level
    /// `k`) and hands each physical level, on the full lattice, to `observer`.
    pub fn stream_lattice(
        &self,
        source: &LevelFn<'_>,
        observer: &mut dyn FnMut(usize, &[C64]) -> Result<()>,
    ) -> Result<()> {
        self.check()?;
        let lat = self.lattice();
        let m = self.q.dim();
        let nt = self.grid.nt();
        let reverse = self.sign == Sign::Minus;
        let inv_h2 = 1.0 / (self.h * self.h);
        let scaled = |k: usize, out: &mut [C64]| {
            source(if reverse { nt - k } else { k }, out);
            out.iter_mut().for_each(|v| *v *= inv_h2);
        };
        let potential = lattice_potential(self.grid, self.q, lat, reverse)?;
        let omega = if reverse {
            [-self.omega[0], -self.omega[1]]
        } else {
            self.omega
        };
        March {
            lattice: lat,
            m,
            gamma: 1.0 / self.h,
            omega,
            potential: potential.as_deref(),
            source: Some(&scaled),
            boundary: None,
            initial: None,
        }
        .run(&mut |k, level| observer(if reverse { nt - k } else { k }, level))
    }

    /// As [`ConjugatedSolve::stream_lattice`], restricted to the grid.
    pub fn stream(
        &self,
        source: &LevelFn<'_>,
        observer: &mut dyn FnMut(usize, &[C64]) -> Result<()>,
    ) -> Result<()> {
        let lat = self.lattice();
        let m = self.q.dim();
        let mut restricted = vec![C64::new(0.0, 0.0); self.grid.nodes() * m];
        self.stream_lattice(source, &mut |k, level| {
            lat.restrict(level, m, &mut restricted);
            observer(k, &restricted)
        })
    }

    /// As [`ConjugatedSolve::stream`], storing the result.
    pub fn solve(&self, source: &LevelFn<'_>) -> Result<WaveField> {
        let mut w = WaveField::zeros(self.grid, self.q.dim(), self.representation());
        self.stream(source, &mut |k, level| {
            w.level_mut(k).copy_from_slice(level);
            Ok(())
        })?;
        Ok(w)
    }
}

/// Solves `(□_{±φ} + h² q) w = g` on `Q` with zero Dirichlet data and zero
/// Cauchy data at the start of the march (`t = 0` for `+`, `t = T` for `-`).
pub fn solve_conjugated(
    q: &MatrixPotential,
    h: f64,
    omega: [f64; 2],
    sign: Sign,
    source: &WaveField,
) -> Result<WaveField> {
    let grid = *source.grid();
    if source.components() != q.dim() {
        return Err(MwipError::InvalidArgument("component mismatch".into()));
    }
    let fill = |k: usize, out: &mut [C64]| out.copy_from_slice(source.level(k));
    ConjugatedSolve {
        grid: &grid,
        q,
        h,
        omega,
        sign,
        pad: 0,
    }
    .solve(&fill)
}
