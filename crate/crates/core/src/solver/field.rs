//! Stored space-time fields and boundary traces.

use num_complex::Complex64 as C64;

use crate::error::{MwipError, Result};
use crate::geometry::{BoundaryPoint, Grid};

/// Largest `|φ|/h` for which a conjugated field may be turned into a physical one.
pub const MAX_EXPONENT: f64 = 50.0;

/// Sign of the exponential weight `e^{±φ/h}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// How stored values relate to the physical field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Representation {
    Physical,
    /// Physical field is `e^{sign · φ/h}` times the stored values, `φ = t + x·ω`.
    Conjugated { h: f64, omega: [f64; 2], sign: Sign },
}

/// Complex `m`-vector field on every node of every time level, laid out
/// `[level][node][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: Grid,
    m: usize,
    repr: Representation,
    data: Vec<C64>,
}

impl WaveField {
    pub fn zeros(grid: &Grid, m: usize, repr: Representation) -> Self {
        Self {
            grid: *grid,
            m,
            repr,
            data: vec![C64::new(0.0, 0.0); grid.levels() * grid.nodes() * m],
        }
    }

    /// Samples `f(t, x, out)` at every node.
    pub fn from_fn(
        grid: &Grid,
        m: usize,
        repr: Representation,
        f: impl Fn(f64, &[f64], &mut [C64]),
    ) -> Self {
        let mut u = Self::zeros(grid, m, repr);
        let n = grid.n();
        for k in 0..grid.levels() {
            let t = grid.time(k);
            let level = u.level_mut(k);
            for p in 0..grid.nodes() {
                let x = grid.coord(p);
                f(t, &x[..n], &mut level[p * m..(p + 1) * m]);
            }
        }
        u
    }

    pub fn from_data(grid: &Grid, m: usize, repr: Representation, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.levels() * grid.nodes() * m {
            return Err(MwipError::InvalidArgument(format!(
                "field data has {} values, expected {}",
                data.len(),
                grid.levels() * grid.nodes() * m
            )));
        }
        Ok(Self {
            grid: *grid,
            m,
            repr,
            data,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn components(&self) -> usize {
        self.m
    }
    pub fn representation(&self) -> Representation {
        self.repr
    }
    pub fn data(&self) -> &[C64] {
        &self.data
    }
    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn level_len(&self) -> usize {
        self.grid.nodes() * self.m
    }

    pub fn level(&self, k: usize) -> &[C64] {
        let len = self.level_len();
        &self.data[k * len..(k + 1) * len]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [C64] {
        let len = self.level_len();
        &mut self.data[k * len..(k + 1) * len]
    }

    pub fn at(&self, k: usize, node: usize, c: usize) -> C64 {
        self.data[(k * self.grid.nodes() + node) * self.m + c]
    }

    /// Trapezoidal `L²(Q)` norm.
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.space_weights();
        let mut s = 0.0;
        for k in 0..self.grid.levels() {
            s += self.grid.time_weight(k) * level_sq_norm(self.level(k), &w, self.m);
        }
        s.sqrt()
    }

    /// `L²(Q)` norm of `self - other`.
    pub fn l2_distance(&self, other: &WaveField) -> Result<f64> {
        self.check_compatible(other)?;
        let w = self.grid.space_weights();
        let mut s = 0.0;
        for k in 0..self.grid.levels() {
            let a = self.level(k);
            let b = other.level(k);
            let mut lvl = 0.0;
            for (p, wp) in w.iter().enumerate() {
                for c in 0..self.m {
                    lvl += wp * (a[p * self.m + c] - b[p * self.m + c]).norm_sqr();
                }
            }
            s += self.grid.time_weight(k) * lvl;
        }
        Ok(s.sqrt())
    }

    /// Largest modulus over all stored values.
    pub fn max_abs(&self) -> f64 {
        max_norm(&self.data)
    }

    pub fn scaled(&self, s: C64) -> WaveField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + a · other`.
    pub fn add_scaled(&self, a: C64, other: &WaveField) -> Result<WaveField> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(x, y)| *x += a * y);
        Ok(out)
    }

    fn check_compatible(&self, other: &WaveField) -> Result<()> {
        if self.grid != other.grid || self.m != other.m {
            return Err(MwipError::InvalidArgument(
                "fields live on different grids".into(),
            ));
        }
        if self.repr != other.repr {
            return Err(MwipError::Representation(format!(
                "{:?} vs {:?}",
                self.repr, other.repr
            )));
        }
        Ok(())
    }

    /// Materializes the physical field; refused when the weight would exceed
    /// `e^{MAX_EXPONENT}` anywhere on the grid.
    pub fn to_physical(&self) -> Result<WaveField> {
        let (h, omega, sign) = match self.repr {
            Representation::Physical => return Ok(self.clone()),
            Representation::Conjugated { h, omega, sign } => (h, omega, sign),
        };
        let g = &self.grid;
        let n = g.n();
        let phase = |k: usize, p: usize| {
            let x = g.coord(p);
            g.time(k) + (0..n).map(|a| x[a] * omega[a]).sum::<f64>()
        };
        let mut worst = 0.0f64;
        for k in [0, g.nt()] {
            for p in 0..g.nodes() {
                worst = worst.max(phase(k, p).abs());
            }
        }
        if worst / h > MAX_EXPONENT {
            return Err(MwipError::Representation(format!(
                "|phi|/h reaches {:.1} > {MAX_EXPONENT}; physical field not representable",
                worst / h
            )));
        }
        let mut out = self.clone();
        out.repr = Representation::Physical;
        let m = self.m;
        for k in 0..g.levels() {
            let level = out.level_mut(k);
            for p in 0..g.nodes() {
                let w = (sign.value() * phase(k, p) / h).exp();
                level[p * m..(p + 1) * m].iter_mut().for_each(|v| *v *= w);
            }
        }
        Ok(out)
    }
}

/// `max |z|` over `values`.
pub fn max_norm(values: &[C64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.norm_sqr())).sqrt()
}

pub(crate) fn level_sq_norm(level: &[C64], weights: &[f64], m: usize) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(p, w)| w * level[p * m..(p + 1) * m].iter().map(|v| v.norm_sqr()).sum::<f64>())
        .sum()
}

/// Values on `Σ` at the grid's boundary quadrature points, `[level][point][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    grid: Grid,
    m: usize,
    points: Vec<BoundaryPoint>,
    data: Vec<C64>,
}

impl BoundaryField {
    pub fn zeros(grid: &Grid, m: usize) -> Self {
        let points = grid.boundary_points();
        let len = grid.levels() * points.len() * m;
        Self {
            grid: *grid,
            m,
            points,
            data: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn from_data(grid: &Grid, m: usize, data: Vec<C64>) -> Result<Self> {
        let points = grid.boundary_points();
        let expected = grid.levels() * points.len() * m;
        if data.len() != expected {
            return Err(MwipError::InvalidArgument(format!(
                "boundary field needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            grid: *grid,
            m,
            points,
            data,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn components(&self) -> usize {
        self.m
    }
    pub fn points(&self) -> &[BoundaryPoint] {
        &self.points
    }
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn level(&self, k: usize) -> &[C64] {
        let len = self.points.len() * self.m;
        &self.data[k * len..(k + 1) * len]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [C64] {
        let len = self.points.len() * self.m;
        &mut self.data[k * len..(k + 1) * len]
    }

    pub fn at(&self, k: usize, point: usize, c: usize) -> C64 {
        self.data[(k * self.points.len() + point) * self.m + c]
    }

    /// Trapezoidal `L²(Σ)` norm, restricted to points where `mask` is true.
    pub fn l2_norm(&self, mask: Option<&[bool]>) -> f64 {
        let mut s = 0.0;
        for k in 0..self.grid.levels() {
            let lvl = self.level(k);
            let mut acc = 0.0;
            for (i, p) in self.points.iter().enumerate() {
                if mask.map_or(true, |mk| mk[i]) {
                    acc += p.weight
                        * lvl[i * self.m..(i + 1) * self.m]
                            .iter()
                            .map(|v| v.norm_sqr())
                            .sum::<f64>();
                }
            }
            s += self.grid.time_weight(k) * acc;
        }
        s.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        max_norm(&self.data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_norm_of_constant_field() {
        let g = Grid::with_min_steps(2, 17, 1.5).unwrap();
        let u = WaveField::from_fn(&g, 2, Representation::Physical, |_, _, out| {
            out[0] = C64::new(3.0, 0.0);
            out[1] = C64::new(0.0, 4.0);
        });
        assert!((u.l2_norm() - 5.0 * 1.5f64.sqrt()).abs() < 1e-12);
        let b = BoundaryField::zeros(&g, 2);
        assert_eq!(b.l2_norm(None), 0.0);
    }

    #[test]
    fn physical_view_of_conjugated_field() {
        let g = Grid::with_min_steps(2, 9, 1.0).unwrap();
        let repr = Representation::Conjugated {
            h: 0.5,
            omega: [0.6, 0.8],
            sign: Sign::Minus,
        };
        let u = WaveField::from_fn(&g, 1, repr, |_, _, out| out[0] = C64::new(1.0, 0.0));
        let p = u.to_physical().unwrap();
        let node = g.node_at([4, 8]);
        let phi = g.time(3) + 0.5 * 0.6 + 1.0 * 0.8;
        assert!((p.at(3, node, 0).re - (-phi / 0.5).exp()).abs() < 1e-14);

        let tiny = Representation::Conjugated {
            h: 0.01,
            omega: [1.0, 0.0],
            sign: Sign::Plus,
        };
        let v = WaveField::zeros(&g, 1, tiny);
        assert!(matches!(v.to_physical(), Err(MwipError::Representation(_))));
    }

    #[test]
    fn mixed_representations_do_not_combine() {
        let g = Grid::with_min_steps(1, 9, 1.0).unwrap();
        let a = WaveField::zeros(&g, 1, Representation::Physical);
        let b = WaveField::zeros(
            &g,
            1,
            Representation::Conjugated {
                h: 1.0,
                omega: [1.0, 0.0],
                sign: Sign::Plus,
            },
        );
        assert!(a.l2_distance(&b).is_err());
    }
}
