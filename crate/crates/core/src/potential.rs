//! Matrix potentials `q(t,x)`: entry representations, adjoints, norms and a
//! brute-force space-time Fourier oracle.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{MwipError, Result};
use crate::geometry::Grid;

/// Closed-form entry `(t, x) -> value`, `x` of length `n`.
pub type EntryFn = Arc<dyn Fn(f64, &[f64]) -> C64 + Send + Sync>;

/// Cubic B-spline rescaled to peak 1: support `[-2, 2]`, `C²`.
pub fn bspline_bump(y: f64) -> f64 {
    let a = y.abs();
    let b = if a >= 2.0 {
        0.0
    } else if a >= 1.0 {
        let r = 2.0 - a;
        r * r * r / 6.0
    } else {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    };
    1.5 * b
}

/// `C^∞` step: 0 for `s ≤ 0`, 1 for `s ≥ 1`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

/// A single entry `q_ij`.
#[derive(Clone)]
pub enum Entry {
    Zero,
    Constant(C64),
    /// `amplitude · Π_k b((s_k - c_k) · 2 / w_k)` over `s = (t, x₁, …)`, with `b`
    /// the unit-peak cubic B-spline. Supported on `[c - w, c + w]` per axis.
    SeparableBump {
        amplitude: C64,
        center: [f64; 3],
        half_width: [f64; 3],
    },
    /// `amplitude` on `[lower, upper]` per axis, falling smoothly to zero
    /// across a ramp of the given length outside it.
    Plateau {
        amplitude: C64,
        lower: [f64; 3],
        upper: [f64; 3],
        ramp: f64,
    },
    Closure(EntryFn),
    /// Values on a fixed grid, `levels × nodes`, level-major.
    Sampled(Arc<Vec<C64>>),
    /// Linear combination of entries.
    Combo(Vec<(C64, Entry)>),
}

impl fmt::Debug for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Zero => write!(f, "Zero"),
            Entry::Constant(c) => write!(f, "Constant({c})"),
            Entry::SeparableBump {
                amplitude,
                center,
                half_width,
            } => write!(f, "SeparableBump({amplitude}, c={center:?}, w={half_width:?})"),
            Entry::Plateau {
                amplitude,
                lower,
                upper,
                ramp,
            } => write!(f, "Plateau({amplitude}, {lower:?}..{upper:?}, ramp={ramp})"),
            Entry::Closure(_) => write!(f, "Closure"),
            Entry::Sampled(v) => write!(f, "Sampled({} values)", v.len()),
            Entry::Combo(parts) => f.debug_list().entries(parts.iter()).finish(),
        }
    }
}

fn plateau_factor(s: f64, lo: f64, hi: f64, ramp: f64) -> f64 {
    if s < lo {
        smooth_step(1.0 - (lo - s) / ramp)
    } else if s > hi {
        smooth_step(1.0 - (s - hi) / ramp)
    } else {
        1.0
    }
}

impl Entry {
    pub fn is_zero(&self) -> bool {
        match self {
            Entry::Zero => true,
            Entry::Constant(c) => *c == C64::new(0.0, 0.0),
            Entry::SeparableBump { amplitude, .. } | Entry::Plateau { amplitude, .. } => {
                *amplitude == C64::new(0.0, 0.0)
            }
            Entry::Combo(parts) => parts
                .iter()
                .all(|(w, e)| *w == C64::new(0.0, 0.0) || e.is_zero()),
            _ => false,
        }
    }

    /// Evaluates a closed-form entry. Sampled entries return `None`.
    fn eval_closed(&self, t: f64, x: &[f64]) -> Option<C64> {
        let axes = || std::iter::once(t).chain(x.iter().copied()).enumerate();
        Some(match self {
            Entry::Zero => C64::new(0.0, 0.0),
            Entry::Constant(c) => *c,
            Entry::SeparableBump {
                amplitude,
                center,
                half_width,
            } => {
                let mut v = 1.0;
                for (k, s) in axes() {
                    v *= bspline_bump(2.0 * (s - center[k]) / half_width[k]);
                }
                amplitude * v
            }
            Entry::Plateau {
                amplitude,
                lower,
                upper,
                ramp,
            } => {
                let mut v = 1.0;
                for (k, s) in axes() {
                    v *= plateau_factor(s, lower[k], upper[k], *ramp);
                }
                amplitude * v
            }
            Entry::Closure(f) => f(t, x),
            Entry::Sampled(_) => return None,
            Entry::Combo(parts) => {
                let mut acc = C64::new(0.0, 0.0);
                for (w, e) in parts {
                    acc += w * e.eval_closed(t, x)?;
                }
                acc
            }
        })
    }

    /// Value at a grid node; `base` indexes the node in sampled data.
    fn eval_node(&self, t: f64, x: &[f64], base: usize) -> C64 {
        match self {
            Entry::Sampled(v) => v[base],
            Entry::Combo(parts) => parts.iter().map(|(w, e)| w * e.eval_node(t, x, base)).sum(),
            e => e.eval_closed(t, x).expect("closed-form entry"),
        }
    }

    fn has_sampled(&self) -> bool {
        match self {
            Entry::Sampled(_) => true,
            Entry::Combo(parts) => parts.iter().any(|(_, e)| e.has_sampled()),
            _ => false,
        }
    }

    /// Adds `weight · entry` at every node of level `k` into `out` (length `nodes`).
    fn accumulate_level(&self, grid: &Grid, k: usize, weight: C64, out: &mut [C64]) {
        let nodes = grid.nodes();
        let n = grid.n();
        let t = grid.time(k);
        match self {
            Entry::Zero => {}
            Entry::Constant(c) => out.iter_mut().for_each(|v| *v += weight * c),
            Entry::SeparableBump { .. } | Entry::Plateau { .. } => {
                let factor = |axis: usize, s: f64| match self {
                    Entry::SeparableBump {
                        center, half_width, ..
                    } => bspline_bump(2.0 * (s - center[axis]) / half_width[axis]),
                    Entry::Plateau {
                        lower, upper, ramp, ..
                    } => plateau_factor(s, lower[axis], upper[axis], *ramp),
                    _ => unreachable!(),
                };
                let amp = match self {
                    Entry::SeparableBump { amplitude, .. } | Entry::Plateau { amplitude, .. } => {
                        *amplitude
                    }
                    _ => unreachable!(),
                };
                let ft = factor(0, t);
                if ft == 0.0 {
                    return;
                }
                let scale = weight * amp * ft;
                let tables: Vec<Vec<f64>> = (0..n)
                    .map(|a| {
                        (0..grid.nx())
                            .map(|i| factor(a + 1, grid.axis_coord(i)))
                            .collect()
                    })
                    .collect();
                for (p, v) in out.iter_mut().enumerate().take(nodes) {
                    let idx = grid.axis_indices(p);
                    let mut f = tables[0][idx[0]];
                    if n == 2 {
                        f *= tables[1][idx[1]];
                    }
                    if f != 0.0 {
                        *v += scale * f;
                    }
                }
            }
            Entry::Closure(f) => {
                let mut x = [0.0; 2];
                for (p, v) in out.iter_mut().enumerate().take(nodes) {
                    let c = grid.coord(p);
                    x[..n].copy_from_slice(&c[..n]);
                    *v += weight * f(t, &x[..n]);
                }
            }
            Entry::Sampled(data) => {
                let base = k * nodes;
                for (v, d) in out.iter_mut().zip(&data[base..base + nodes]) {
                    *v += weight * d;
                }
            }
            Entry::Combo(parts) => {
                for (w, e) in parts {
                    e.accumulate_level(grid, k, weight * w, out);
                }
            }
        }
    }

    /// Complex conjugate of the entry.
    pub fn conj(&self) -> Entry {
        match self {
            Entry::Zero => Entry::Zero,
            Entry::Constant(c) => Entry::Constant(c.conj()),
            Entry::SeparableBump {
                amplitude,
                center,
                half_width,
            } => Entry::SeparableBump {
                amplitude: amplitude.conj(),
                center: *center,
                half_width: *half_width,
            },
            Entry::Plateau {
                amplitude,
                lower,
                upper,
                ramp,
            } => Entry::Plateau {
                amplitude: amplitude.conj(),
                lower: *lower,
                upper: *upper,
                ramp: *ramp,
            },
            Entry::Closure(f) => {
                let f = Arc::clone(f);
                Entry::Closure(Arc::new(move |t, x| f(t, x).conj()))
            }
            Entry::Sampled(v) => Entry::Sampled(Arc::new(v.iter().map(|z| z.conj()).collect())),
            Entry::Combo(parts) => {
                Entry::Combo(parts.iter().map(|(w, e)| (w.conj(), e.conj())).collect())
            }
        }
    }

    fn scaled(&self, s: C64) -> Entry {
        match self {
            Entry::Zero => Entry::Zero,
            Entry::Constant(c) => Entry::Constant(c * s),
            _ => Entry::Combo(vec![(s, self.clone())]),
        }
    }
}

/// Axis-aligned compact-support box over `(t, x₁, x₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportBox {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl SupportBox {
    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        std::iter::once(t)
            .chain(x.iter().copied())
            .enumerate()
            .all(|(k, s)| s >= self.lower[k] && s <= self.upper[k])
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &SupportBox) -> SupportBox {
        let mut b = *self;
        for k in 0..3 {
            b.lower[k] = b.lower[k].min(other.lower[k]);
            b.upper[k] = b.upper[k].max(other.upper[k]);
        }
        b
    }
}

/// `n × n` complex potential on `Q`, row-major entries.
#[derive(Debug, Clone)]
pub struct MatrixPotential {
    m: usize,
    entries: Vec<Entry>,
    support: Option<SupportBox>,
    sample_grid: Option<Grid>,
}

impl MatrixPotential {
    /// Closed-form potential from row-major entries.
    pub fn new(m: usize, entries: Vec<Entry>) -> Result<Self> {
        if m == 0 || entries.len() != m * m {
            return Err(MwipError::InvalidArgument(format!(
                "need {} entries for a {m}x{m} potential, got {}",
                m * m,
                entries.len()
            )));
        }
        if entries.iter().any(Entry::has_sampled) {
            return Err(MwipError::InvalidArgument(
                "sampled entries require MatrixPotential::sampled".into(),
            ));
        }
        Ok(Self {
            m,
            entries,
            support: None,
            sample_grid: None,
        })
    }

    pub fn zero(m: usize) -> Self {
        Self::new(m, vec![Entry::Zero; m * m]).expect("valid shape")
    }

    pub fn constant(m: usize, values: &[C64]) -> Result<Self> {
        Self::new(m, values.iter().map(|&c| Entry::Constant(c)).collect())
    }

    /// Single nonzero entry `(i, j)` (0-based).
    pub fn single(m: usize, i: usize, j: usize, entry: Entry) -> Result<Self> {
        if i >= m || j >= m {
            return Err(MwipError::InvalidArgument(format!(
                "entry ({i},{j}) out of range for {m}x{m}"
            )));
        }
        let mut entries = vec![Entry::Zero; m * m];
        entries[i * m + j] = entry;
        Self::new(m, entries)
    }

    /// Grid-sampled potential; `values[(i*m + j)]` holds `levels × nodes` samples.
    pub fn sampled(grid: &Grid, m: usize, values: Vec<Vec<C64>>) -> Result<Self> {
        let expected = grid.levels() * grid.nodes();
        if values.len() != m * m || values.iter().any(|v| v.len() != expected) {
            return Err(MwipError::InvalidArgument(format!(
                "sampled potential needs {} entries of {expected} values",
                m * m
            )));
        }
        Ok(Self {
            m,
            entries: values
                .into_iter()
                .map(|v| Entry::Sampled(Arc::new(v)))
                .collect(),
            support: None,
            sample_grid: Some(*grid),
        })
    }

    /// Samples every entry on `grid`.
    pub fn sample_on(&self, grid: &Grid) -> Result<Self> {
        self.check_grid(grid)?;
        let nodes = grid.nodes();
        let mut values = vec![Vec::with_capacity(grid.levels() * nodes); self.m * self.m];
        let mut buf = vec![C64::new(0.0, 0.0); nodes];
        for (e, out) in self.entries.iter().zip(values.iter_mut()) {
            for k in 0..grid.levels() {
                buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                e.accumulate_level(grid, k, C64::new(1.0, 0.0), &mut buf);
                out.extend_from_slice(&buf);
            }
        }
        let mut q = Self::sampled(grid, self.m, values)?;
        q.support = self.support;
        Ok(q)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> &Entry {
        &self.entries[i * self.m + j]
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn support(&self) -> Option<&SupportBox> {
        self.support.as_ref()
    }

    pub fn sample_grid(&self) -> Option<&Grid> {
        self.sample_grid.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Entry::is_zero)
    }

    /// Attaches a compact-support mask after checking that it keeps two node
    /// layers away from `∂Q` and that every entry vanishes outside it on `grid`.
    pub fn with_support(mut self, support: SupportBox, grid: &Grid) -> Result<Self> {
        self.check_grid(grid)?;
        let n = grid.n();
        let (mt, mx) = (2.0 * grid.dt(), 2.0 * grid.dx());
        let tol = 1e-12;
        let mut ok = support.lower[0] >= mt - tol && support.upper[0] <= grid.t_final() - mt + tol;
        for a in 1..=n {
            ok &= support.lower[a] >= mx - tol && support.upper[a] <= 1.0 - mx + tol;
        }
        if !ok {
            return Err(MwipError::MissingSupport(format!(
                "support box {support:?} must stay two node layers inside Q"
            )));
        }
        let nodes = grid.nodes();
        let mut buf = vec![C64::new(0.0, 0.0); nodes * self.m * self.m];
        for k in 0..grid.levels() {
            self.fill_level(grid, k, &mut buf)?;
            let t = grid.time(k);
            for p in 0..nodes {
                let x = grid.coord(p);
                if support.contains(t, &x[..n]) {
                    continue;
                }
                let block = &buf[p * self.m * self.m..(p + 1) * self.m * self.m];
                if block.iter().any(|v| v.norm() > 0.0) {
                    return Err(MwipError::MissingSupport(format!(
                        "potential is nonzero at t = {t}, x = {:?} outside {support:?}",
                        &x[..n]
                    )));
                }
            }
        }
        self.support = Some(support);
        Ok(self)
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        match &self.sample_grid {
            Some(g) if g != grid => Err(MwipError::InvalidArgument(
                "sampled potential used on a grid it was not sampled on".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Value matrix at `(t, x)`, row-major.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<C64>> {
        if let Some(g) = &self.sample_grid {
            let k = snap(t / g.dt(), g.nt()).filter(|&k| (g.time(k) - t).abs() <= 1e-12);
            let mut idx = [0usize; 2];
            let mut on_grid = k.is_some() && x.len() == g.n();
            for (a, &s) in x.iter().enumerate().take(g.n()) {
                match snap(s * (g.nx() - 1) as f64, g.nx() - 1) {
                    Some(i) if (g.axis_coord(i) - s).abs() <= 1e-12 => idx[a] = i,
                    _ => on_grid = false,
                }
            }
            if !on_grid {
                return Err(MwipError::OffGrid {
                    t,
                    x: x.to_vec(),
                });
            }
            let k = k.expect("checked above");
            let p = g.node_at(idx);
            let base = k * g.nodes() + p;
            return Ok(self.entries.iter().map(|e| e.eval_node(t, x, base)).collect());
        }
        Ok(self
            .entries
            .iter()
            .map(|e| e.eval_closed(t, x).expect("closed-form entry"))
            .collect())
    }

    /// Fills `out` (length `nodes · m²`, layout `[node][i][j]`) with `q` at level `k`.
    pub fn fill_level(&self, grid: &Grid, k: usize, out: &mut [C64]) -> Result<()> {
        self.check_grid(grid)?;
        let nodes = grid.nodes();
        let mm = self.m * self.m;
        if out.len() != nodes * mm {
            return Err(MwipError::InvalidArgument(format!(
                "level buffer has {} values, expected {}",
                out.len(),
                nodes * mm
            )));
        }
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let mut buf = vec![C64::new(0.0, 0.0); nodes];
        for (e_idx, e) in self.entries.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            e.accumulate_level(grid, k, C64::new(1.0, 0.0), &mut buf);
            for (p, v) in buf.iter().enumerate() {
                out[p * mm + e_idx] = *v;
            }
        }
        Ok(())
    }

    /// Values of one entry at level `k`, one per node.
    pub fn fill_entry_level(&self, grid: &Grid, i: usize, j: usize, k: usize, out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        self.entry(i, j)
            .accumulate_level(grid, k, C64::new(1.0, 0.0), out);
    }

    /// Conjugate transpose: `(q*)_ij = conj(q_ji)`.
    pub fn adjoint(&self) -> Self {
        let m = self.m;
        let entries = (0..m * m)
            .map(|idx| self.entries[(idx % m) * m + idx / m].conj())
            .collect();
        Self {
            m,
            entries,
            support: self.support,
            sample_grid: self.sample_grid,
        }
    }

    /// `a·self + b·other`; supports are merged when both are set.
    pub fn combine(&self, a: C64, other: &Self, b: C64) -> Result<Self> {
        if self.m != other.m {
            return Err(MwipError::InvalidArgument(
                "potentials of different size".into(),
            ));
        }
        if self.sample_grid.is_some() || other.sample_grid.is_some() {
            if self.sample_grid != other.sample_grid && !self.is_zero() && !other.is_zero() {
                return Err(MwipError::InvalidArgument(
                    "sampled potentials live on different grids".into(),
                ));
            }
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| match (x.is_zero(), y.is_zero()) {
                (true, true) => Entry::Zero,
                (false, true) => x.scaled(a),
                (true, false) => y.scaled(b),
                (false, false) => Entry::Combo(vec![(a, x.clone()), (b, y.clone())]),
            })
            .collect();
        let support = match (self.support, other.support) {
            (Some(s), Some(o)) => Some(s.union(&o)),
            (Some(s), None) if other.is_zero() => Some(s),
            (None, Some(o)) if self.is_zero() => Some(o),
            _ => None,
        };
        let sample_grid = self.sample_grid.or(other.sample_grid);
        Ok(Self {
            m: self.m,
            entries,
            support,
            sample_grid,
        })
    }

    /// `other - self`.
    pub fn difference_from(&self, other: &Self) -> Result<Self> {
        other.combine(C64::new(1.0, 0.0), self, C64::new(-1.0, 0.0))
    }

    /// Scales every entry.
    pub fn scale(&self, s: C64) -> Self {
        Self {
            m: self.m,
            entries: self.entries.iter().map(|e| e.scaled(s)).collect(),
            support: self.support,
            sample_grid: self.sample_grid,
        }
    }

    /// Discrete `W^{1,∞}` norm on `grid`: the largest entry modulus or forward
    /// difference quotient in `t` or any `x` direction.
    pub fn w1inf_norm(&self, grid: &Grid) -> Result<f64> {
        let (vals, grads) = self.sup_parts(grid)?;
        Ok(vals.max(grads))
    }

    /// Largest entry modulus over the grid nodes.
    pub fn sup_norm(&self, grid: &Grid) -> Result<f64> {
        Ok(self.sup_parts(grid)?.0)
    }

    fn sup_parts(&self, grid: &Grid) -> Result<(f64, f64)> {
        let nodes = grid.nodes();
        let mm = self.m * self.m;
        let mut prev = vec![C64::new(0.0, 0.0); nodes * mm];
        let mut cur = vec![C64::new(0.0, 0.0); nodes * mm];
        let (mut vmax, mut gmax) = (0.0f64, 0.0f64);
        let strides: Vec<usize> = (0..grid.n())
            .map(|a| if a == 0 { 1 } else { grid.nx() })
            .collect();
        for k in 0..grid.levels() {
            self.fill_level(grid, k, &mut cur)?;
            for p in 0..nodes {
                let idx = grid.axis_indices(p);
                for e in 0..mm {
                    let v = cur[p * mm + e];
                    vmax = vmax.max(v.norm());
                    if k > 0 {
                        gmax = gmax.max((v - prev[p * mm + e]).norm() / grid.dt());
                    }
                    for (a, &s) in strides.iter().enumerate() {
                        if idx[a] + 1 < grid.nx() {
                            let w = cur[(p + s) * mm + e];
                            gmax = gmax.max((w - v).norm() / grid.dx());
                        }
                    }
                }
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        Ok((vmax, gmax))
    }
}

fn snap(s: f64, max: usize) -> Option<usize> {
    let r = s.round();
    if r < -0.5 || r > max as f64 + 0.5 {
        None
    } else {
        Some(r as usize)
    }
}

/// Space-time frequency `ζ = (ζ_τ, ζ_x)`; the last slot is unused in 1-D.
pub type Frequency = [f64; 3];

/// Per-axis tables `e^{-i ζ_k s}` at grid nodes.
pub fn phase_tables(grid: &Grid, zeta: &Frequency, sign: f64) -> (Vec<C64>, Vec<Vec<C64>>) {
    let tt = (0..grid.levels())
        .map(|k| C64::from_polar(1.0, sign * zeta[0] * grid.time(k)))
        .collect();
    let xs = (0..grid.n())
        .map(|a| {
            (0..grid.nx())
                .map(|i| C64::from_polar(1.0, sign * zeta[a + 1] * grid.axis_coord(i)))
                .collect()
        })
        .collect();
    (tt, xs)
}

/// Trapezoidal quadrature of `∫_Q e^{-iζ·(t,x)} q_ij(t,x) dx dt`.
pub fn fourier_oracle(
    q: &MatrixPotential,
    grid: &Grid,
    i: usize,
    j: usize,
    zeta: &Frequency,
) -> Result<C64> {
    q.check_grid(grid)?;
    if i >= q.dim() || j >= q.dim() {
        return Err(MwipError::InvalidArgument(format!(
            "entry ({i},{j}) out of range"
        )));
    }
    let entry = q.entry(i, j);
    if entry.is_zero() {
        return Ok(C64::new(0.0, 0.0));
    }
    let (tt, xs) = phase_tables(grid, zeta, -1.0);
    let nodes = grid.nodes();
    let spatial: Vec<C64> = (0..nodes)
        .map(|p| {
            let idx = grid.axis_indices(p);
            let mut e = xs[0][idx[0]];
            if grid.n() == 2 {
                e *= xs[1][idx[1]];
            }
            e * grid.space_weight(p)
        })
        .collect();
    let mut buf = vec![C64::new(0.0, 0.0); nodes];
    let mut total = C64::new(0.0, 0.0);
    for k in 0..grid.levels() {
        q.fill_entry_level(grid, i, j, k, &mut buf);
        let s: C64 = buf.iter().zip(&spatial).map(|(v, e)| v * e).sum();
        total += s * tt[k] * grid.time_weight(k);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bump(amplitude: f64) -> Entry {
        Entry::SeparableBump {
            amplitude: c(amplitude, 0.0),
            center: [0.5, 0.45, 0.55],
            half_width: [0.25, 0.2, 0.25],
        }
    }

    #[test]
    fn bspline_shape() {
        assert_eq!(bspline_bump(0.0), 1.0);
        assert_eq!(bspline_bump(2.0), 0.0);
        assert_eq!(bspline_bump(-2.5), 0.0);
        assert_relative_eq!(bspline_bump(1.0), 0.25, epsilon = 1e-15);
        // Integral of the unit-peak spline over [-2, 2] is 3/2.
        let n = 4000;
        let s: f64 = (0..=n)
            .map(|i| {
                let y = -2.0 + 4.0 * i as f64 / n as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * bspline_bump(y)
            })
            .sum::<f64>()
            * 4.0
            / n as f64;
        assert_relative_eq!(s, 1.5, epsilon = 1e-6);
    }

    #[test]
    fn eval_examples() {
        let g = Grid::with_min_steps(2, 9, 2.0).unwrap();
        let z = MatrixPotential::zero(2);
        assert!(z.eval(0.3, &[0.1, 0.2]).unwrap().iter().all(|v| v.norm() == 0.0));
        let id = MatrixPotential::constant(2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]).unwrap();
        for p in 0..g.nodes() {
            let x = g.coord(p);
            assert_eq!(
                id.eval(g.time(3), &x).unwrap(),
                vec![c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]
            );
        }
        let q = MatrixPotential::single(
            2,
            0,
            1,
            Entry::Closure(Arc::new(|t, x: &[f64]| c(t * x[0], 0.0))),
        )
        .unwrap();
        let v = q.eval(2.0, &[0.5, 0.0]).unwrap();
        assert_eq!(v[1], c(1.0, 0.0));
        assert_eq!(v[0], c(0.0, 0.0));
    }

    #[test]
    fn sampled_rejects_off_grid_queries() {
        let g = Grid::with_min_steps(2, 9, 1.0).unwrap();
        let q = MatrixPotential::single(2, 0, 0, bump(1.0))
            .unwrap()
            .sample_on(&g)
            .unwrap();
        let x = g.coord(g.node_at([3, 4]));
        let on = q.eval(g.time(5), &x).unwrap();
        let closed = MatrixPotential::single(2, 0, 0, bump(1.0)).unwrap();
        assert_relative_eq!(on[0].re, closed.eval(g.time(5), &x).unwrap()[0].re, epsilon = 1e-15);
        assert!(matches!(
            q.eval(g.time(5), &[0.3333, 0.5]),
            Err(MwipError::OffGrid { .. })
        ));
        assert!(matches!(
            q.eval(0.5 * g.dt(), &x),
            Err(MwipError::OffGrid { .. })
        ));
    }

    #[test]
    fn adjoint_examples() {
        let sym = MatrixPotential::constant(2, &[c(1., 0.), c(2., 0.), c(2., 0.), c(3., 0.)]).unwrap();
        assert_eq!(
            sym.adjoint().eval(0.1, &[0.2, 0.3]).unwrap(),
            sym.eval(0.1, &[0.2, 0.3]).unwrap()
        );
        let q = MatrixPotential::single(2, 0, 1, Entry::Constant(c(0.0, 1.0))).unwrap();
        let a = q.adjoint().eval(0.0, &[0.5, 0.5]).unwrap();
        assert_eq!(a, vec![c(0., 0.), c(0., 0.), c(0., -1.), c(0., 0.)]);
    }

    #[test]
    fn fill_level_matches_eval() {
        let g = Grid::with_min_steps(2, 17, 1.0).unwrap();
        let q = MatrixPotential::new(
            2,
            vec![
                bump(2.0),
                Entry::Constant(c(0.5, -1.0)),
                Entry::Plateau {
                    amplitude: c(3.0, 0.0),
                    lower: [0.3, 0.3, 0.3],
                    upper: [0.6, 0.6, 0.7],
                    ramp: 0.15,
                },
                Entry::Combo(vec![
                    (c(2.0, 0.0), bump(1.0)),
                    (c(0.0, 1.0), Entry::Closure(Arc::new(|t, x: &[f64]| c(t + x[1], 0.0)))),
                ]),
            ],
        )
        .unwrap();
        let mut buf = vec![c(0., 0.); g.nodes() * 4];
        for k in [0, 7, g.nt()] {
            q.fill_level(&g, k, &mut buf).unwrap();
            for p in 0..g.nodes() {
                let v = q.eval(g.time(k), &g.coord(p)).unwrap();
                for e in 0..4 {
                    assert!((buf[p * 4 + e] - v[e]).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn w1inf_examples() {
        let g = Grid::new(1, 101, 200, 1.0).unwrap();
        assert_eq!(MatrixPotential::zero(2).w1inf_norm(&g).unwrap(), 0.0);
        let q = MatrixPotential::constant(2, &[c(1., 0.), c(-3., 0.), c(0., 2.), c(0., 0.)]).unwrap();
        assert_eq!(q.w1inf_norm(&g).unwrap(), 3.0);
        let s = MatrixPotential::single(
            2,
            0,
            0,
            Entry::Closure(Arc::new(|_, x: &[f64]| {
                c((2.0 * std::f64::consts::PI * x[0]).sin(), 0.0)
            })),
        )
        .unwrap();
        let norm = s.w1inf_norm(&g).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        assert!((norm - two_pi).abs() / two_pi < 0.05, "{norm}");
    }

    #[test]
    fn adjoint_preserves_sup_norm() {
        let g = Grid::with_min_steps(2, 17, 1.0).unwrap();
        let q = MatrixPotential::new(
            2,
            vec![bump(1.0), Entry::Constant(c(0.0, 2.5)), Entry::Zero, bump(-0.5)],
        )
        .unwrap();
        assert_eq!(q.sup_norm(&g).unwrap(), q.adjoint().sup_norm(&g).unwrap());
    }

    #[test]
    fn support_mask_validation() {
        let g = Grid::with_min_steps(2, 33, 1.0).unwrap();
        let q = MatrixPotential::single(2, 0, 0, bump(1.0)).unwrap();
        let good = SupportBox {
            lower: [0.25, 0.25, 0.3],
            upper: [0.75, 0.65, 0.8],
        };
        assert!(q.clone().with_support(good, &g).is_ok());
        let tight = SupportBox {
            lower: [0.4, 0.25, 0.3],
            upper: [0.75, 0.65, 0.8],
        };
        assert!(matches!(
            q.clone().with_support(tight, &g),
            Err(MwipError::MissingSupport(_))
        ));
        let touching = SupportBox {
            lower: [0.0, 0.25, 0.3],
            upper: [0.75, 0.65, 0.8],
        };
        assert!(q.with_support(touching, &g).is_err());
    }

    #[test]
    fn oracle_trivial_cases() {
        let g = Grid::with_min_steps(2, 17, 1.5).unwrap();
        let z = MatrixPotential::zero(2);
        assert_eq!(fourier_oracle(&z, &g, 0, 1, &[1.0, 2.0, 3.0]).unwrap(), c(0., 0.));
        let k = MatrixPotential::constant(2, &[c(0., 0.), c(5., 0.), c(0., 0.), c(0., 0.)]).unwrap();
        let v = fourier_oracle(&k, &g, 0, 1, &[0.0; 3]).unwrap();
        assert!((v - c(7.5, 0.0)).norm() < 1e-12);
    }

    /// 1-D composite trapezoid of `e^{-i k s} f(s)` on `[0, len]`.
    fn trap_1d(f: impl Fn(f64) -> f64, k: f64, len: f64, cells: usize) -> C64 {
        let h = len / cells as f64;
        (0..=cells)
            .map(|i| {
                let s = if i == cells { len } else { i as f64 * h };
                let w = if i == 0 || i == cells { 0.5 * h } else { h };
                C64::from_polar(w * f(s), -k * s)
            })
            .sum()
    }

    #[test]
    fn oracle_matches_product_of_1d_quadratures() {
        let g = Grid::with_min_steps(2, 41, 1.0).unwrap();
        let e = bump(1.3);
        let q = MatrixPotential::single(2, 1, 0, e).unwrap();
        let (cc, w) = ([0.5, 0.45, 0.55], [0.25, 0.2, 0.25]);
        for zeta in [[0.0, 0.0, 0.0], [1.5, -2.0, 0.7], [-3.0, 4.0, 1.0]] {
            let direct = fourier_oracle(&q, &g, 1, 0, &zeta).unwrap();
            let b = |k: usize| move |s: f64| bspline_bump(2.0 * (s - cc[k]) / w[k]);
            let prod = trap_1d(b(0), zeta[0], 1.0, g.nt())
                * trap_1d(b(1), zeta[1], 1.0, g.nx() - 1)
                * trap_1d(b(2), zeta[2], 1.0, g.nx() - 1)
                * 1.3;
            assert!((direct - prod).norm() < 1e-10, "{direct} vs {prod}");
        }
    }

    /// Transform of `b(2(s-c)/w)`: `(3/2)(w/2) sinc⁴(k w / 4) e^{-ikc}`,
    /// since the cubic B-spline is four convolved unit boxes.
    fn bump_ft(k: f64, c0: f64, w: f64) -> C64 {
        let a = k * w / 4.0;
        let sinc = if a == 0.0 { 1.0 } else { a.sin() / a };
        C64::from_polar(1.5 * (w / 2.0) * sinc.powi(4), -k * c0)
    }

    #[test]
    fn oracle_converges_to_analytic_transform() {
        let zeta = [2.0, -1.5, 3.0];
        let q = MatrixPotential::single(2, 0, 0, bump(1.0)).unwrap();
        let exact = bump_ft(zeta[0], 0.5, 0.25) * bump_ft(zeta[1], 0.45, 0.2) * bump_ft(zeta[2], 0.55, 0.25);
        let mut errs = vec![];
        for nx in [17, 33, 65] {
            let g = Grid::new(2, nx, 2 * (nx - 1), 1.0).unwrap();
            let v = fourier_oracle(&q, &g, 0, 0, &zeta).unwrap();
            errs.push((v - exact).norm());
        }
        assert!(errs[2] < 1e-4 * exact.norm().max(1e-3), "{errs:?}");
        assert!(errs[0] / errs[1] >= 3.0 && errs[1] / errs[2] >= 3.0, "{errs:?}");
    }

    #[test]
    fn oracle_refinement_gaps_shrink() {
        let zeta = [1.0, 2.0, -1.0];
        let q = MatrixPotential::single(
            2,
            0,
            0,
            Entry::Closure(Arc::new(|t, x: &[f64]| c((t * x[0]).sin() + x[1] * x[1], 0.0))),
        )
        .unwrap();
        let vals: Vec<C64> = [9, 17, 33]
            .iter()
            .map(|&nx| {
                let g = Grid::new(2, nx, 2 * (nx - 1), 1.0).unwrap();
                fourier_oracle(&q, &g, 0, 0, &zeta).unwrap()
            })
            .collect();
        let d1 = (vals[0] - vals[1]).norm();
        let d2 = (vals[1] - vals[2]).norm();
        assert!(d1 / d2 >= 3.0, "{d1} {d2}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn adjoint_is_an_involution(re in -3.0f64..3.0, im in -3.0f64..3.0, t in 0.0f64..1.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let q = MatrixPotential::new(2, vec![
                bump(re),
                Entry::Constant(c(re, im)),
                Entry::Closure(Arc::new(move |t, x: &[f64]| c(t * im, x[0] * re))),
                Entry::Zero,
            ]).unwrap();
            let a = q.adjoint().adjoint().eval(t, &[x, y]).unwrap();
            let b = q.eval(t, &[x, y]).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).norm() < 1e-14);
            }
            let adj = q.adjoint().eval(t, &[x, y]).unwrap();
            for i in 0..2 { for j in 0..2 {
                prop_assert!((adj[i * 2 + j] - b[j * 2 + i].conj()).norm() < 1e-14);
            }}
        }

        #[test]
        fn oracle_is_linear_and_hermitian(a in -2.0f64..2.0, b in -2.0f64..2.0, z0 in -4.0f64..4.0, z1 in -4.0f64..4.0, z2 in -4.0f64..4.0) {
            let g = Grid::new(2, 17, 32, 1.0).unwrap();
            let zeta = [z0, z1, z2];
            let q1 = MatrixPotential::single(2, 0, 0, bump(1.0)).unwrap();
            let q2 = MatrixPotential::single(2, 0, 0, Entry::Closure(Arc::new(|t, x: &[f64]| c(t * x[0] + x[1], 0.0)))).unwrap();
            let mix = q1.combine(c(a, 0.0), &q2, c(b, 0.0)).unwrap();
            let lhs = fourier_oracle(&mix, &g, 0, 0, &zeta).unwrap();
            let rhs = fourier_oracle(&q1, &g, 0, 0, &zeta).unwrap() * a + fourier_oracle(&q2, &g, 0, 0, &zeta).unwrap() * b;
            prop_assert!((lhs - rhs).norm() < 1e-12);
            let neg = fourier_oracle(&mix, &g, 0, 0, &[-z0, -z1, -z2]).unwrap();
            prop_assert!((neg - lhs.conj()).norm() < 1e-12);
        }
    }
}
