//! Geometric-optics probes `e^{±φ/h}(B + hR)` with the null phase
//! `φ = t + x·ω`, stored in conjugated form.
//!
//! A growing probe solves `□v + q v = 0` with constant amplitude `B = K₂`; a
//! decaying probe solves `□v + q* v = 0` with `B = e^{-iζ·(t,x)} K₁` and
//! `ζ ⊥ (1, -ω)`. The remainder solves `(□_{±φ} + h² q̃) R = -h (□ + q̃) B`,
//! which never involves the exponential weight itself.
//!
//! Remainders are computed on a box padded by a fraction of the unit length,
//! with the right-hand side tapered to zero before the outer boundary. On `Q`
//! this is an exact right inverse, and it avoids the corner singularities a
//! zero-Dirichlet solve on `Q` would create where the forcing meets `Σ`.

use num_complex::Complex64 as C64;

use crate::error::{MwipError, Result};
use crate::geometry::{check_unit, Grid};
use crate::potential::{phase_tables, smooth_step, Frequency, MatrixPotential};
use crate::solver::stepper::Lattice;
use crate::solver::{
    apply_matrix, lattice_potential, ConjugatedSolve, Representation, Sign, WaveField,
};

/// Padding of remainder solves, as a fraction of the unit box side.
pub const DEFAULT_PAD_FRACTION: f64 = 0.25;

/// Residual norms above this mark a probe as not converged.
pub const RESIDUAL_FLAG: f64 = 0.1;

/// `φ(t, x) = t + x·ω`.
pub fn phase(omega: &[f64; 2], t: f64, x: &[f64]) -> f64 {
    t + x.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>()
}

/// `ζ = (ξ·ω, ξ)`, orthogonal to `(1, -ω)`.
pub fn make_zeta(omega: &[f64; 2], xi: &[f64]) -> Frequency {
    let mut z = [0.0; 3];
    for (a, &v) in xi.iter().enumerate().take(2) {
        z[a + 1] = v;
    }
    z[0] = z[1] * omega[0] + z[2] * omega[1];
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeKind {
    /// `e^{+φ/h}(K₂ + hR)` solving `□v + q v = 0`.
    Growing,
    /// `e^{-φ/h}(e^{-iζ·(t,x)} K₁ + hR)` solving `□v + q v = 0` for the given
    /// (already adjoint) potential.
    Decaying,
}

impl ProbeKind {
    pub fn sign(self) -> Sign {
        match self {
            ProbeKind::Growing => Sign::Plus,
            ProbeKind::Decaying => Sign::Minus,
        }
    }
}

/// Everything that determines a probe.
#[derive(Debug, Clone)]
pub struct ProbeRequest<'a> {
    pub kind: ProbeKind,
    /// Potential in the probe's own equation (`q` for growing, `q*` for decaying).
    pub potential: &'a MatrixPotential,
    pub h: f64,
    pub omega: [f64; 2],
    pub zeta: Frequency,
    pub amplitude: Vec<C64>,
    /// Padding in node layers; `None` uses [`DEFAULT_PAD_FRACTION`].
    pub pad: Option<usize>,
}

impl ProbeRequest<'_> {
    fn pad_layers(&self, grid: &Grid) -> usize {
        self.pad
            .unwrap_or_else(|| (DEFAULT_PAD_FRACTION / grid.dx()).round() as usize)
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        check_unit(grid, &self.omega)?;
        if self.amplitude.len() != self.potential.dim() {
            return Err(MwipError::InvalidArgument(format!(
                "amplitude has {} components, potential is {}x{}",
                self.amplitude.len(),
                self.potential.dim(),
                self.potential.dim()
            )));
        }
        if self.kind == ProbeKind::Growing && self.zeta != [0.0; 3] {
            return Err(MwipError::InvalidArgument(
                "growing probes carry a constant amplitude".into(),
            ));
        }
        let z = &self.zeta;
        if (z[0] - z[1] * self.omega[0] - z[2] * self.omega[1]).abs() > 1e-12 * (1.0 + norm3(z)) {
            return Err(MwipError::InvalidArgument(format!(
                "frequency {z:?} is not orthogonal to (1, -omega)"
            )));
        }
        Ok(())
    }

    /// `|ζ_x|² - ζ_τ²`, the symbol of `□` on `e^{-iζ·(t,x)}`.
    fn box_symbol(&self) -> f64 {
        self.zeta[1] * self.zeta[1] + self.zeta[2] * self.zeta[2] - self.zeta[0] * self.zeta[0]
    }

    fn solver<'b>(&'b self, grid: &'b Grid, q: &'b MatrixPotential, pad: usize) -> ConjugatedSolve<'b> {
        ConjugatedSolve {
            grid,
            q,
            h: self.h,
            omega: self.omega,
            sign: self.kind.sign(),
            pad,
        }
    }

    /// Builds the probe with one direct remainder solve.
    pub fn build(&self, grid: &Grid) -> Result<GoProbe> {
        self.validate(grid)?;
        let pad = self.pad_layers(grid);
        let forcing = Forcing::new(self, grid, pad)?;
        let solve = self.solver(grid, self.potential, pad);
        let remainder = solve.solve(&|k, out: &mut [C64]| forcing.fill(k, out))?;
        let residual_norm = residual_norm(self, grid, &remainder)?;
        Ok(GoProbe {
            kind: self.kind,
            h: self.h,
            omega: self.omega,
            zeta: self.zeta,
            amplitude: self.amplitude.clone(),
            remainder,
            residual_norm,
            flagged: residual_norm > RESIDUAL_FLAG,
        })
    }

    /// Remainder by Picard iteration `R ← solve(□_{±φ} R = g - h² q̃ R_prev)`,
    /// started from zero.
    pub fn fixed_point(&self, grid: &Grid, max_iter: usize, tol: f64) -> Result<FixedPoint> {
        self.validate(grid)?;
        let pad = self.pad_layers(grid);
        let lat = Lattice::new(grid, pad);
        let m = self.potential.dim();
        let forcing = Forcing::new(self, grid, pad)?;
        let free = MatrixPotential::zero(m);
        let solve = self.solver(grid, &free, pad);
        let level_len = lat.nodes() * m;
        let mut prev = vec![C64::new(0.0, 0.0); grid.levels() * level_len];
        let mut next = prev.clone();
        let qfill = lattice_potential(grid, self.potential, lat, false)?;
        let h2 = C64::new(self.h * self.h, 0.0);
        let weights = grid.space_weights();
        let mut gap = f64::INFINITY;
        let mut iterations = 0;
        while iterations < max_iter && gap >= tol {
            let source = |k: usize, out: &mut [C64]| {
                forcing.fill(k, out);
                if let Some(qf) = &qfill {
                    let mut qb = vec![C64::new(0.0, 0.0); lat.nodes() * m * m];
                    let mut qr = vec![C64::new(0.0, 0.0); level_len];
                    qf(k, &mut qb);
                    apply_matrix(&qb, &prev[k * level_len..(k + 1) * level_len], m, h2, &mut qr);
                    out.iter_mut().zip(&qr).for_each(|(o, v)| *o -= v);
                }
            };
            solve.stream_lattice(&source, &mut |k, level| {
                next[k * level_len..(k + 1) * level_len].copy_from_slice(level);
                Ok(())
            })?;
            let mut sq = 0.0;
            let mut a = vec![C64::new(0.0, 0.0); grid.nodes() * m];
            let mut b = a.clone();
            for k in 0..grid.levels() {
                lat.restrict(&next[k * level_len..(k + 1) * level_len], m, &mut a);
                lat.restrict(&prev[k * level_len..(k + 1) * level_len], m, &mut b);
                let d: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                sq += grid.time_weight(k) * crate::solver::level_sq_norm(&d, &weights, m);
            }
            gap = sq.sqrt();
            std::mem::swap(&mut prev, &mut next);
            iterations += 1;
        }
        let mut remainder = WaveField::zeros(
            grid,
            m,
            Representation::Conjugated {
                h: self.h,
                omega: self.omega,
                sign: self.kind.sign(),
            },
        );
        for k in 0..grid.levels() {
            lat.restrict(&prev[k * level_len..(k + 1) * level_len], m, remainder.level_mut(k));
        }
        Ok(FixedPoint {
            remainder,
            iterations,
            last_gap: gap,
            converged: gap < tol,
        })
    }
}

fn norm3(z: &Frequency) -> f64 {
    (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt()
}

/// Outcome of the Picard iteration for a remainder.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub remainder: WaveField,
    pub iterations: usize,
    /// `L²(Q)` distance between the last two iterates.
    pub last_gap: f64,
    pub converged: bool,
}

/// Tapered right-hand side `-h (□ + q̃) B` on the padded lattice.
struct Forcing<'a> {
    lat: Lattice,
    m: usize,
    h: f64,
    symbol: f64,
    amplitude: Vec<C64>,
    /// `χ(x) e^{-iζ_x·x}` per lattice node.
    spatial: Vec<C64>,
    time_phase: Vec<C64>,
    potential: Option<Box<crate::solver::stepper::LevelFn<'a>>>,
}

impl<'a> Forcing<'a> {
    fn new(req: &ProbeRequest<'a>, grid: &'a Grid, pad: usize) -> Result<Self> {
        let lat = Lattice::new(grid, pad);
        let ramp = 0.8 * pad as f64 * grid.dx();
        let taper = |s: f64| {
            if (0.0..=1.0).contains(&s) || ramp == 0.0 {
                1.0
            } else if s < 0.0 {
                smooth_step(1.0 + s / ramp)
            } else {
                smooth_step(1.0 - (s - 1.0) / ramp)
            }
        };
        let n = grid.n();
        let spatial = (0..lat.nodes())
            .map(|l| {
                let x = lat.coord(l);
                let mut v = C64::new(1.0, 0.0);
                for a in 0..n {
                    v *= taper(x[a]) * C64::from_polar(1.0, -req.zeta[a + 1] * x[a]);
                }
                v
            })
            .collect();
        let time_phase = (0..grid.levels())
            .map(|k| C64::from_polar(1.0, -req.zeta[0] * grid.time(k)))
            .collect();
        Ok(Self {
            lat,
            m: req.potential.dim(),
            h: req.h,
            symbol: req.box_symbol(),
            amplitude: req.amplitude.clone(),
            spatial,
            time_phase,
            potential: lattice_potential(grid, req.potential, lat, false)?,
        })
    }

    fn fill(&self, k: usize, out: &mut [C64]) {
        let m = self.m;
        let base: Vec<C64> = self.amplitude.iter().map(|a| a * self.symbol).collect();
        let scale = -self.h * self.time_phase[k];
        let qb = self.potential.as_ref().map(|f| {
            let mut b = vec![C64::new(0.0, 0.0); self.lat.nodes() * m * m];
            f(k, &mut b);
            b
        });
        for l in 0..self.lat.nodes() {
            let e = scale * self.spatial[l];
            for c in 0..m {
                let mut v = base[c];
                if let Some(qb) = &qb {
                    for d in 0..m {
                        v += qb[(l * m + c) * m + d] * self.amplitude[d];
                    }
                }
                out[l * m + c] = e * v;
            }
        }
    }
}

/// A constructed probe; the physical field is `e^{±φ/h}(B + hR)`.
#[derive(Debug, Clone)]
pub struct GoProbe {
    pub kind: ProbeKind,
    pub h: f64,
    pub omega: [f64; 2],
    pub zeta: Frequency,
    pub amplitude: Vec<C64>,
    pub remainder: WaveField,
    /// `‖(□_{±φ} + h² q̃)(B + hR)‖_{L²} / ‖B‖_{L²}` over interior nodes of `Q`.
    pub residual_norm: f64,
    pub flagged: bool,
}

impl GoProbe {
    pub fn grid(&self) -> &Grid {
        self.remainder.grid()
    }

    pub fn remainder_norm(&self) -> f64 {
        self.remainder.l2_norm()
    }

    /// `B` at every node of level `k`.
    pub fn amplitude_level(&self, k: usize, out: &mut [C64]) {
        let grid = *self.grid();
        let m = self.amplitude.len();
        let (tt, xs) = phase_tables(&grid, &self.zeta, -1.0);
        for p in 0..grid.nodes() {
            let idx = grid.axis_indices(p);
            let mut e = tt[k] * xs[0][idx[0]];
            if grid.n() == 2 {
                e *= xs[1][idx[1]];
            }
            for c in 0..m {
                out[p * m + c] = e * self.amplitude[c];
            }
        }
    }

    /// `B + hR` at every node of level `k`.
    pub fn total_level(&self, k: usize, out: &mut [C64]) {
        self.amplitude_level(k, out);
        let r = self.remainder.level(k);
        out.iter_mut().zip(r).for_each(|(o, v)| *o += self.h * v);
    }
}

/// Decaying probe for `□ + q*`, i.e. built from the adjoint of `q`.
pub fn make_decaying_probe(
    grid: &Grid,
    q: &MatrixPotential,
    h: f64,
    omega: [f64; 2],
    zeta: Frequency,
    k1: &[C64],
) -> Result<GoProbe> {
    let adj = q.adjoint();
    ProbeRequest {
        kind: ProbeKind::Decaying,
        potential: &adj,
        h,
        omega,
        zeta,
        amplitude: k1.to_vec(),
        pad: None,
    }
    .build(grid)
}

/// Growing probe for `□ + q` with constant amplitude `K₂`.
pub fn make_growing_probe(
    grid: &Grid,
    q: &MatrixPotential,
    h: f64,
    omega: [f64; 2],
    k2: &[C64],
) -> Result<GoProbe> {
    ProbeRequest {
        kind: ProbeKind::Growing,
        potential: q,
        h,
        omega,
        zeta: [0.0; 3],
        amplitude: k2.to_vec(),
        pad: None,
    }
    .build(grid)
}

/// Second derivative and first derivative along a line of samples, fourth
/// order when two neighbours exist on both sides, second order otherwise.
fn line_derivs(at: impl Fn(isize) -> C64, lo: bool, hi: bool, step: f64) -> (C64, C64) {
    let (m1, z, p1) = (at(-1), at(0), at(1));
    if lo && hi {
        let (m2, p2) = (at(-2), at(2));
        (
            (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * step * step),
            (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * step),
        )
    } else {
        ((m1 - 2.0 * z + p1) / (step * step), (p1 - m1) / (2.0 * step))
    }
}

fn residual_norm(req: &ProbeRequest<'_>, grid: &Grid, r: &WaveField) -> Result<f64> {
    let m = req.potential.dim();
    let k_norm: f64 = req.amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if k_norm == 0.0 {
        return Ok(0.0);
    }
    let h = req.h;
    let s = req.kind.sign().value();
    let nt = grid.nt();
    let nx = grid.nx();
    let n = grid.n();
    let strides: Vec<usize> = (0..n).map(|a| if a == 0 { m } else { nx * m }).collect();
    let symbol = req.box_symbol();
    let (tt, xs) = phase_tables(grid, &req.zeta, -1.0);
    let weights = grid.space_weights();
    let mut qb = vec![C64::new(0.0, 0.0); grid.nodes() * m * m];
    let mut total = 0.0;
    for k in 1..nt {
        req.potential.fill_level(grid, k, &mut qb)?;
        let t_ok = k >= 2 && k + 2 <= nt;
        let at_level = |j: isize| r.level((k as isize + j) as usize);
        let mut level_sum = 0.0;
        for p in 0..grid.nodes() {
            if grid.is_boundary(p) {
                continue;
            }
            let idx = grid.axis_indices(p);
            let mut e = tt[k] * xs[0][idx[0]];
            if n == 2 {
                e *= xs[1][idx[1]];
            }
            let mut node_sq = 0.0;
            for c in 0..m {
                let i = p * m + c;
                let (rtt, rt) = line_derivs(|j| at_level(j)[i], t_ok, t_ok, grid.dt());
                let cur = r.level(k);
                let mut lap = C64::new(0.0, 0.0);
                let mut grad = C64::new(0.0, 0.0);
                for a in 0..n {
                    let ok = idx[a] >= 2 && idx[a] + 3 <= nx;
                    let st = strides[a] as isize;
                    let (dxx, dx1) =
                        line_derivs(|j| cur[(i as isize + j * st) as usize], ok, ok, grid.dx());
                    lap += dxx;
                    grad += req.omega[a] * dx1;
                }
                let mut qr = C64::new(0.0, 0.0);
                let mut qbv = C64::new(0.0, 0.0);
                for d in 0..m {
                    let qv = qb[(p * m + c) * m + d];
                    qr += qv * cur[p * m + d];
                    qbv += qv * req.amplitude[d];
                }
                let op_r = h * h * (rtt - lap) + s * 2.0 * h * (rt - grad) + h * h * qr;
                let op_b = h * h * e * (symbol * req.amplitude[c] + qbv);
                node_sq += (op_b + h * op_r).norm_sqr();
            }
            level_sum += weights[p] * node_sq;
        }
        total += grid.time_weight(k) * level_sum;
    }
    let b_norm = k_norm * grid.t_final().sqrt();
    Ok(total.sqrt() / b_norm)
}

/// Remainder norms over a list of `h`, each on its own grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainderSweep {
    /// `(h, nx, ‖R‖_{L²(Q)})` in input order.
    pub rows: Vec<(f64, usize, f64)>,
    /// Largest norm over the norm at the first `h`.
    pub max_over_first: f64,
    /// Largest over smallest norm.
    pub max_over_min: f64,
}

/// Remainder norms of a probe family as `h` varies.
pub fn remainder_norm_sweep(
    kind: ProbeKind,
    potential: &MatrixPotential,
    omega: [f64; 2],
    zeta: Frequency,
    amplitude: &[C64],
    runs: &[(f64, Grid)],
) -> Result<RemainderSweep> {
    let mut rows = Vec::with_capacity(runs.len());
    for (h, grid) in runs {
        let probe = ProbeRequest {
            kind,
            potential,
            h: *h,
            omega,
            zeta,
            amplitude: amplitude.to_vec(),
            pad: None,
        }
        .build(grid)?;
        rows.push((*h, grid.nx(), probe.remainder_norm()));
    }
    let norms: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let max = norms.iter().cloned().fold(0.0, f64::max);
    let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a / b };
    Ok(RemainderSweep {
        max_over_first: ratio(max, norms.first().copied().unwrap_or(0.0)),
        max_over_min: ratio(max, min),
        rows,
    })
}

#[cfg(test)]
mod tests;
