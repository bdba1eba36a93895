//! Space-time grids on `Q = (0,T) x (0,1)^n`, boundary bookkeeping and
//! trapezoidal quadrature.
//!
//! Spatial nodes are numbered with the first axis fastest: `node = i + nx * j`.
//! Vectors in space are stored as `[f64; 2]`; the second slot is unused when
//! `n = 1`.

use crate::error::{MwipError, Result};

/// Largest admissible `dt * sqrt(n) / dx` for the explicit scheme.
pub const CFL_FACTOR: f64 = 0.9;

/// Default cone half-width for the boundary partition.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Uniform space-time discretization of `(0,T) x (0,1)^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    nx: usize,
    nt: usize,
    t_final: f64,
    dx: f64,
    dt: f64,
}

impl Grid {
    /// Builds a grid with `dx = 1/(nx-1)` and `dt = T/nt`.
    ///
    /// Rejects CFL violations, reporting the smallest admissible `nt`.
    pub fn new(n: usize, nx: usize, nt: usize, t_final: f64) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(MwipError::InvalidArgument(format!(
                "spatial dimension must be 1 or 2, got {n}"
            )));
        }
        if nx < 8 || nt < 8 {
            return Err(MwipError::InvalidArgument(format!(
                "need nx >= 8 and nt >= 8, got nx = {nx}, nt = {nt}"
            )));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(MwipError::InvalidArgument(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        let dx = 1.0 / (nx - 1) as f64;
        let dt = t_final / nt as f64;
        let limit = CFL_FACTOR * dx / (n as f64).sqrt();
        if dt > limit {
            return Err(MwipError::Cfl {
                dt,
                limit,
                min_nt: Self::min_nt(n, nx, t_final),
            });
        }
        Ok(Self {
            n,
            nx,
            nt,
            t_final,
            dx,
            dt,
        })
    }

    /// Smallest number of time steps satisfying the CFL condition.
    pub fn min_nt(n: usize, nx: usize, t_final: f64) -> usize {
        let dx = 1.0 / (nx.max(2) - 1) as f64;
        let limit = CFL_FACTOR * dx / (n.max(1) as f64).sqrt();
        let mut nt = (t_final / limit).ceil().max(8.0) as usize;
        while t_final / nt as f64 > limit {
            nt += 1;
        }
        nt
    }

    /// Grid with the CFL-minimal number of steps for the given spatial resolution.
    pub fn with_min_steps(n: usize, nx: usize, t_final: f64) -> Result<Self> {
        Self::new(n, nx, Self::min_nt(n, nx, t_final), t_final)
    }

    /// Halves both `dx` and `dt`.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.n, 2 * self.nx - 1, 2 * self.nt, self.t_final)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of spatial nodes, `nx^n`.
    pub fn nodes(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    /// Number of time levels, `nt + 1`.
    pub fn levels(&self) -> usize {
        self.nt + 1
    }

    pub fn time(&self, level: usize) -> f64 {
        if level == self.nt {
            self.t_final
        } else {
            level as f64 * self.dt
        }
    }

    /// Coordinate of grid index `i` along any axis; exact at both ends.
    pub fn axis_coord(&self, i: usize) -> f64 {
        i as f64 / (self.nx - 1) as f64
    }

    pub fn axis_indices(&self, node: usize) -> [usize; 2] {
        if self.n == 1 {
            [node, 0]
        } else {
            [node % self.nx, node / self.nx]
        }
    }

    pub fn node_at(&self, idx: [usize; 2]) -> usize {
        if self.n == 1 {
            idx[0]
        } else {
            idx[0] + self.nx * idx[1]
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

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.nodes()).filter(|&p| self.is_boundary(p)).collect()
    }

    /// Trapezoidal weight of a time level.
    pub fn time_weight(&self, level: usize) -> f64 {
        if level == 0 || level == self.nt {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    /// Trapezoidal weight of a spatial node (tensor product over axes).
    pub fn space_weight(&self, node: usize) -> f64 {
        let idx = self.axis_indices(node);
        (0..self.n).map(|a| self.axis_weight(idx[a])).product()
    }

    fn axis_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// All spatial trapezoid weights, indexed by node.
    pub fn space_weights(&self) -> Vec<f64> {
        (0..self.nodes()).map(|p| self.space_weight(p)).collect()
    }

    /// `|Ω|` (always 1 for the unit box).
    pub fn domain_measure(&self) -> f64 {
        1.0
    }

    /// `|∂Ω|`: 2 points in 1-D, perimeter 4 in 2-D.
    pub fn boundary_measure(&self) -> f64 {
        if self.n == 1 {
            2.0
        } else {
            4.0
        }
    }

    /// Outward unit normal at a boundary node. Corners take the normal of the
    /// first face in lexicographic order (axis 0 before axis 1, lower before upper).
    pub fn outward_normal(&self, node: usize) -> Result<[f64; 2]> {
        if node >= self.nodes() || !self.is_boundary(node) {
            return Err(MwipError::InteriorNode(node));
        }
        let face = Face::all(self.n)
            .into_iter()
            .find(|f| f.contains(self, node))
            .expect("boundary node lies on some face");
        Ok(face.normal())
    }

    /// Quadrature points on `∂Ω`, face by face. Corner nodes appear once per
    /// adjacent face, each time with that face's normal.
    pub fn boundary_points(&self) -> Vec<BoundaryPoint> {
        let mut out = Vec::with_capacity(if self.n == 1 { 2 } else { 4 * self.nx });
        for face in Face::all(self.n) {
            let fixed = if face.upper { self.nx - 1 } else { 0 };
            let (in1, in2) = if face.upper {
                (self.nx - 2, self.nx - 3)
            } else {
                (1, 2)
            };
            if self.n == 1 {
                out.push(BoundaryPoint {
                    face,
                    node: fixed,
                    inward: [in1, in2],
                    normal: face.normal(),
                    weight: 1.0,
                });
                continue;
            }
            for s in 0..self.nx {
                let mut idx = [0usize; 2];
                idx[face.axis] = fixed;
                idx[1 - face.axis] = s;
                let node = self.node_at(idx);
                let mut i1 = idx;
                i1[face.axis] = in1;
                let mut i2 = idx;
                i2[face.axis] = in2;
                out.push(BoundaryPoint {
                    face,
                    node,
                    inward: [self.node_at(i1), self.node_at(i2)],
                    normal: face.normal(),
                    weight: self.axis_weight(s),
                });
            }
        }
        out
    }
}

/// One face of the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub fn all(n: usize) -> Vec<Face> {
        (0..n)
            .flat_map(|axis| [false, true].map(|upper| Face { axis, upper }))
            .collect()
    }

    pub fn normal(&self) -> [f64; 2] {
        let mut v = [0.0; 2];
        v[self.axis] = if self.upper { 1.0 } else { -1.0 };
        v
    }

    pub fn contains(&self, grid: &Grid, node: usize) -> bool {
        let idx = grid.axis_indices(node)[self.axis];
        if self.upper {
            idx == grid.nx() - 1
        } else {
            idx == 0
        }
    }
}

/// A surface quadrature point: a boundary node seen from one face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub face: Face,
    pub node: usize,
    /// First and second inward neighbours along the face normal.
    pub inward: [usize; 2],
    pub normal: [f64; 2],
    pub weight: f64,
}

pub fn dot(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: &[f64; 2]) -> f64 {
    dot(a, a).sqrt()
}

/// Checks `|ω| = 1` to 1e-12 for the grid's dimension.
pub fn check_unit(grid: &Grid, omega: &[f64; 2]) -> Result<()> {
    if grid.n() == 1 && omega[1] != 0.0 {
        return Err(MwipError::InvalidArgument(
            "direction must have a zero second component in 1-D".into(),
        ));
    }
    if (norm(omega) - 1.0).abs() > 1e-12 {
        return Err(MwipError::InvalidArgument(format!(
            "direction {omega:?} is not a unit vector"
        )));
    }
    Ok(())
}

/// Boundary regions attached to a reference direction `ω₀`.
///
/// All masks are indexed like [`Grid::boundary_points`]. The space-time
/// regions are cylinders: `G = (0,T) x G'`, `F = (0,T) x F'`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPartition {
    pub omega0: [f64; 2],
    pub epsilon: f64,
    pub dilation: usize,
    /// `∂Ω₊,ω₀ = {ν·ω₀ ≥ 0}`.
    pub plus: Vec<bool>,
    /// `∂Ω₋,ω₀ = {ν·ω₀ ≤ 0}`.
    pub minus: Vec<bool>,
    pub f_prime: Vec<bool>,
    pub g_prime: Vec<bool>,
    points: Vec<BoundaryPoint>,
}

impl BoundaryPartition {
    /// Partition with the default one-layer dilation.
    pub fn new(grid: &Grid, omega0: [f64; 2], epsilon: f64) -> Result<Self> {
        Self::with_dilation(grid, omega0, epsilon, 1)
    }

    pub fn with_dilation(
        grid: &Grid,
        omega0: [f64; 2],
        epsilon: f64,
        dilation: usize,
    ) -> Result<Self> {
        check_unit(grid, &omega0)?;
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(MwipError::InvalidArgument(format!(
                "epsilon must be non-negative, got {epsilon}"
            )));
        }
        let points = grid.boundary_points();
        let plus: Vec<bool> = points
            .iter()
            .map(|p| dot(&p.normal, &omega0) >= 0.0)
            .collect();
        let minus: Vec<bool> = points
            .iter()
            .map(|p| dot(&p.normal, &omega0) <= 0.0)
            .collect();
        let reach = dilation as f64 * grid.dx() * (1.0 + 1e-9);
        let dilate = |seed: &[bool]| -> Vec<bool> {
            points
                .iter()
                .map(|p| {
                    let xp = grid.coord(p.node);
                    points.iter().zip(seed).any(|(q, &s)| {
                        if !s {
                            return false;
                        }
                        let xq = grid.coord(q.node);
                        (xp[0] - xq[0]).abs().max((xp[1] - xq[1]).abs()) <= reach
                    })
                })
                .collect()
        };
        let f_prime = dilate(&plus);
        let g_prime = dilate(&minus);

        // Every point outside G' must satisfy ν·ω > ε for every admissible ω.
        let cap = cap_half_angle(grid.n(), epsilon);
        for (p, &in_g) in points.iter().zip(&g_prime) {
            if in_g {
                continue;
            }
            let theta = dot(&p.normal, &omega0).clamp(-1.0, 1.0).acos();
            let worst = if theta + cap >= std::f64::consts::PI {
                -1.0
            } else {
                (theta + cap).cos()
            };
            if worst <= epsilon {
                return Err(MwipError::Partition(format!(
                    "epsilon = {epsilon} too large: boundary point at {:?} outside G has \
                     worst-case nu.omega = {worst:.4}",
                    grid.coord(p.node)
                )));
            }
        }
        Ok(Self {
            omega0,
            epsilon,
            dilation,
            plus,
            minus,
            f_prime,
            g_prime,
            points,
        })
    }

    pub fn points(&self) -> &[BoundaryPoint] {
        &self.points
    }

    /// Mask of `Σ \ G` at every time level.
    pub fn unmeasured(&self) -> Vec<bool> {
        self.g_prime.iter().map(|&g| !g).collect()
    }

    /// Mask of `∂Ω₊,ε,ω = {ν·ω > ε}`.
    pub fn plus_eps(&self, omega: &[f64; 2], eps: f64) -> Vec<bool> {
        self.points
            .iter()
            .map(|p| dot(&p.normal, omega) > eps)
            .collect()
    }

    /// Whether `ω` lies in the admissible cap `|ω - ω₀| ≤ ε`.
    pub fn admits(&self, omega: &[f64; 2]) -> bool {
        let d = [omega[0] - self.omega0[0], omega[1] - self.omega0[1]];
        norm(&d) <= self.epsilon * (1.0 + 1e-12) + 1e-15
    }
}

/// Angular half-width of the cap `{ω ∈ S^{n-1} : |ω - ω₀| ≤ ε}`.
pub fn cap_half_angle(n: usize, epsilon: f64) -> f64 {
    if n == 1 {
        // S^0 = {±1}; only ω₀ itself is within chord distance < 2.
        if epsilon >= 2.0 {
            std::f64::consts::PI
        } else {
            0.0
        }
    } else {
        2.0 * (epsilon / 2.0).min(1.0).asin()
    }
}

/// Rotates a 2-D unit vector by `angle` radians.
pub fn rotate(omega: &[f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * omega[0] - s * omega[1], s * omega[0] + c * omega[1]]
}
