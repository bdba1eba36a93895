//! Explicit leapfrog core shared by physical and conjugated solves.
//!
//! Marches `u_tt - Δu - 2γ ω·∇u + 2γ u_t + Q u = S` on a (possibly padded)
//! copy of the spatial grid, with Dirichlet values imposed at every level.
//! `γ = 0` gives the plain wave system.

use num_complex::Complex64 as C64;

use crate::error::{MwipError, Result};
use crate::geometry::Grid;

/// Per-level callback filling a lattice-sized buffer.
pub type LevelFn<'a> = dyn Fn(usize, &mut [C64]) + Sync + 'a;

/// Spatial lattice: the grid's nodes plus `pad` extra layers on every side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub n: usize,
    pub nx: usize,
    pub pad: usize,
    pub dx: f64,
    pub dt: f64,
    pub nt: usize,
    cells: usize,
}

impl Lattice {
    pub fn new(grid: &Grid, pad: usize) -> Self {
        Self {
            n: grid.n(),
            nx: grid.nx() + 2 * pad,
            pad,
            dx: grid.dx(),
            dt: grid.dt(),
            nt: grid.nt(),
            cells: grid.nx() - 1,
        }
    }

    pub fn nodes(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        (i as f64 - self.pad as f64) / self.cells as f64
    }

    pub fn axis_indices(&self, node: usize) -> [usize; 2] {
        if self.n == 1 {
            [node, 0]
        } else {
            [node % self.nx, node / self.nx]
        }
    }

    pub fn coord(&self, node: usize) -> [f64; 2] {
        let [i, j] = self.axis_indices(node);
        if self.n == 1 {
            [self.axis_coord(i), 0.0]
        } else {
            [self.axis_coord(i), self.axis_coord(j)]
        }
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let idx = self.axis_indices(node);
        (0..self.n).any(|a| idx[a] == 0 || idx[a] == self.nx - 1)
    }

    /// Grid node nearest to a lattice node after clamping into the closed box.
    pub fn clamped_grid_node(&self, node: usize) -> usize {
        let idx = self.axis_indices(node);
        let clamp = |i: usize| i.clamp(self.pad, self.pad + self.cells) - self.pad;
        if self.n == 1 {
            clamp(idx[0])
        } else {
            clamp(idx[0]) + (self.cells + 1) * clamp(idx[1])
        }
    }

    /// Lattice node holding grid node `p`.
    pub fn lattice_node(&self, p: usize) -> usize {
        let gnx = self.cells + 1;
        if self.n == 1 {
            p + self.pad
        } else {
            (p % gnx + self.pad) + self.nx * (p / gnx + self.pad)
        }
    }

    /// Copies the grid part of a lattice level into `out`.
    pub fn restrict(&self, level: &[C64], m: usize, out: &mut [C64]) {
        if self.pad == 0 {
            out.copy_from_slice(level);
            return;
        }
        let gnodes = out.len() / m;
        for p in 0..gnodes {
            let l = self.lattice_node(p);
            out[p * m..(p + 1) * m].copy_from_slice(&level[l * m..(l + 1) * m]);
        }
    }
}

/// Largest amplification factor of the homogeneous scheme over a lattice of
/// discrete wavenumbers (von Neumann analysis with `Q = 0`).
pub fn amplification(n: usize, dx: f64, dt: f64, gamma: f64, omega: [f64; 2]) -> f64 {
    let samples = 48;
    let a = gamma * dt;
    let mut worst = 0.0f64;
    let ks: Vec<f64> = (0..=2 * samples)
        .map(|i| std::f64::consts::PI * (i as f64 - samples as f64) / samples as f64)
        .collect();
    let ky_list: &[f64] = if n == 1 { &[0.0] } else { &ks };
    for &kx in &ks {
        for &ky in ky_list {
            let theta = [kx, ky];
            let mut lambda = 0.0;
            let mut beta = 0.0;
            for ax in 0..n {
                lambda += 4.0 * (0.5 * theta[ax]).sin().powi(2) / (dx * dx);
                beta += omega[ax] * theta[ax].sin() / dx;
            }
            // (1+a) g² - B g + (1-a) = 0
            let big_a = C64::new(1.0 + a, 0.0);
            let big_b = C64::new(2.0 - dt * dt * lambda, 2.0 * dt * dt * gamma * beta);
            let big_c = C64::new(1.0 - a, 0.0);
            let disc = (big_b * big_b - 4.0 * big_a * big_c).sqrt();
            for r in [(big_b + disc) / (2.0 * big_a), (big_b - disc) / (2.0 * big_a)] {
                worst = worst.max(r.norm());
            }
        }
    }
    worst
}

/// One explicit march over `nt` steps.
pub struct March<'a> {
    pub lattice: Lattice,
    pub m: usize,
    pub gamma: f64,
    pub omega: [f64; 2],
    /// Fills `nodes · m²` potential values `[node][i][j]` at a march level.
    pub potential: Option<&'a LevelFn<'a>>,
    /// Fills the forcing `S` at a march level.
    pub source: Option<&'a LevelFn<'a>>,
    /// Writes Dirichlet values into the boundary nodes of a level; zero if absent.
    pub boundary: Option<&'a LevelFn<'a>>,
    /// Initial value and velocity on the lattice; zero if absent.
    pub initial: Option<(&'a [C64], &'a [C64])>,
}

impl March<'_> {
    /// Runs the march, handing every level (in march order) to `observer`.
    pub fn run(&self, observer: &mut dyn FnMut(usize, &[C64]) -> Result<()>) -> Result<()> {
        let lat = &self.lattice;
        let m = self.m;
        let nodes = lat.nodes();
        let len = nodes * m;
        let zero = C64::new(0.0, 0.0);
        let boundary_nodes: Vec<usize> = (0..nodes).filter(|&p| lat.is_boundary(p)).collect();
        let interior = self.interior_rows();

        let mut prev = vec![zero; len];
        let mut cur = vec![zero; len];
        let mut next = vec![zero; len];
        let mut qbuf = vec![zero; if self.potential.is_some() { nodes * m * m } else { 0 }];
        let mut sbuf = vec![zero; if self.source.is_some() { len } else { 0 }];

        let set_boundary = |k: usize, level: &mut [C64]| {
            for &p in &boundary_nodes {
                level[p * m..(p + 1) * m].iter_mut().for_each(|v| *v = zero);
            }
            if let Some(b) = self.boundary {
                b(k, level);
            }
        };

        if let Some((u0, _)) = self.initial {
            cur.copy_from_slice(u0);
        }
        set_boundary(0, &mut cur);
        check_finite(0, &cur)?;
        observer(0, &cur)?;

        // Taylor start.
        self.fill(0, &mut qbuf, &mut sbuf);
        let dt = lat.dt;
        let psi = self.initial.map(|(_, v)| v);
        self.for_each_rhs(&interior, &cur, &qbuf, &sbuf, |i, rhs| {
            let v = psi.map_or(zero, |p| p[i]);
            next[i] = cur[i] + dt * v + 0.5 * dt * dt * (rhs - 2.0 * self.gamma * v);
        });
        set_boundary(1, &mut next);
        check_finite(1, &next)?;
        observer(1, &next)?;
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);

        let a = self.gamma * dt;
        let inv = 1.0 / (1.0 + a);
        for k in 1..lat.nt {
            self.fill(k, &mut qbuf, &mut sbuf);
            self.for_each_rhs(&interior, &cur, &qbuf, &sbuf, |i, rhs| {
                next[i] = (2.0 * cur[i] - (1.0 - a) * prev[i] + dt * dt * rhs) * inv;
            });
            set_boundary(k + 1, &mut next);
            check_finite(k + 1, &next)?;
            observer(k + 1, &next)?;
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(())
    }

    fn fill(&self, k: usize, qbuf: &mut [C64], sbuf: &mut [C64]) {
        if let Some(q) = self.potential {
            q(k, qbuf);
        }
        if let Some(s) = self.source {
            s(k, sbuf);
        }
    }

    /// Rows of interior nodes as `(first node, count)`.
    fn interior_rows(&self) -> Vec<(usize, usize)> {
        let nx = self.lattice.nx;
        if self.lattice.n == 1 {
            vec![(1, nx - 2)]
        } else {
            (1..nx - 1).map(|j| (1 + nx * j, nx - 2)).collect()
        }
    }

    /// Calls `emit(index, Δu + 2γ ω·∇u - Qu + S)` for every interior value.
    fn for_each_rhs(
        &self,
        rows: &[(usize, usize)],
        u: &[C64],
        q: &[C64],
        s: &[C64],
        mut emit: impl FnMut(usize, C64),
    ) {
        let lat = &self.lattice;
        let m = self.m;
        let inv_dx2 = 1.0 / (lat.dx * lat.dx);
        let adv = [
            self.gamma * self.omega[0] / lat.dx,
            self.gamma * self.omega[1] / lat.dx,
        ];
        let sy = lat.nx * m;
        let two_n = 2.0 * lat.n as f64;
        let has_q = !q.is_empty();
        let has_s = !s.is_empty();
        for &(start, count) in rows {
            for p in start..start + count {
                for c in 0..m {
                    let i = p * m + c;
                    let center = u[i];
                    let (xm, xp) = (u[i - m], u[i + m]);
                    let mut lap = xm + xp - two_n * center;
                    let mut grad = adv[0] * (xp - xm);
                    if lat.n == 2 {
                        let (ym, yp) = (u[i - sy], u[i + sy]);
                        lap += ym + yp;
                        grad += adv[1] * (yp - ym);
                    }
                    let mut rhs = lap * inv_dx2 + grad;
                    if has_q {
                        let row = &q[(p * m + c) * m..(p * m + c + 1) * m];
                        for (d, qv) in row.iter().enumerate() {
                            rhs -= qv * u[p * m + d];
                        }
                    }
                    if has_s {
                        rhs += s[i];
                    }
                    emit(i, rhs);
                }
            }
        }
    }
}

fn check_finite(level: usize, values: &[C64]) -> Result<()> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(MwipError::NonFinite { level })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_is_stable_at_the_cfl_limit() {
        for n in [1, 2] {
            let dx = 1.0 / 64.0;
            let dt = 0.9 * dx / (n as f64).sqrt();
            assert!(amplification(n, dx, dt, 0.0, [1.0, 0.0]) <= 1.0 + 1e-12);
            for h_over_dx in [8.0, 2.0, 0.5] {
                let g = 1.0 / (h_over_dx * dx);
                let omega = if n == 1 { [1.0, 0.0] } else { [0.6, 0.8] };
                assert!(amplification(n, dx, dt, g, omega) <= 1.0 + 1e-10);
            }
        }
    }

    #[test]
    fn anti_damped_scheme_is_flagged() {
        let dx = 1.0 / 32.0;
        assert!(amplification(2, dx, 0.5 * dx, -4.0, [1.0, 0.0]) > 1.0);
    }

    #[test]
    fn lattice_maps_grid_nodes() {
        let g = Grid::with_min_steps(2, 9, 1.0).unwrap();
        let lat = Lattice::new(&g, 3);
        assert_eq!(lat.nx, 15);
        for p in 0..g.nodes() {
            let l = lat.lattice_node(p);
            assert_eq!(lat.coord(l), g.coord(p));
            assert_eq!(lat.clamped_grid_node(l), p);
        }
        assert_eq!(lat.clamped_grid_node(0), 0);
        assert_eq!(lat.axis_coord(0), -3.0 / 8.0);
    }
}
