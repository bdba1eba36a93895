//! Weighted boundary Carleman inequality for `𝓛_q = □ + q` with the linear
//! weight `φ = t + x·ω`: both sides evaluated by quadrature on test fields
//! that vanish on `Σ` and at `t = 0` together with their time derivative,
//! plus audits of the two integrations by parts behind it.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MwipError, Result};
use crate::geometry::{check_unit, dot, Grid};
use crate::potential::MatrixPotential;
use crate::probes::phase;
use crate::solver::{apply_operator, normal_derivative, Representation, WaveField};

/// Number of random modes in a test field.
const MODES: usize = 4;

/// Pseudo-random field `u = t² χ(x) s(t,x)` with `χ = Π 4x_a(1 - x_a)` and `s`
/// a complex trigonometric polynomial even in `t`.
pub fn admissible_test_field(seed: u64, grid: &Grid, m: usize) -> WaveField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let modes: Vec<Vec<(C64, f64, [f64; 2])>> = (0..m)
        .map(|_| {
            (0..MODES)
                .map(|_| {
                    let a = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let alpha = rng.gen_range(0.0..tau);
                    let beta = [rng.gen_range(-tau..tau), rng.gen_range(-tau..tau)];
                    (a, alpha, beta)
                })
                .collect()
        })
        .collect();
    let n = grid.n();
    WaveField::from_fn(grid, m, Representation::Physical, |t, x, out| {
        let chi: f64 = x.iter().map(|&s| 4.0 * s * (1.0 - s)).product();
        for (c, o) in out.iter_mut().enumerate() {
            let s: C64 = modes[c]
                .iter()
                .map(|(a, alpha, beta)| {
                    let arg: f64 = (0..n).map(|i| beta[i] * x[i]).sum();
                    a * (alpha * t).cos() * C64::from_polar(1.0, arg)
                })
                .sum();
            *o = t * t * chi * s;
        }
    })
}

/// Discrete size of each vanishing hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    /// `max |u(0,·)|`.
    pub initial_value: f64,
    /// `max |∂_t u(0,·)|` by the one-sided second-order difference.
    pub initial_velocity: f64,
    /// `max |u|` over `Σ`.
    pub boundary_value: f64,
    /// `max |u|` over `Q`.
    pub scale: f64,
    dt: f64,
    t_final: f64,
}

impl Admissibility {
    pub fn of(u: &WaveField) -> Self {
        let g = *u.grid();
        let m = u.components();
        let max = |it: &mut dyn Iterator<Item = C64>| it.fold(0.0f64, |a, v| a.max(v.norm()));
        let initial_value = max(&mut u.level(0).iter().copied());
        let (u0, u1, u2) = (u.level(0), u.level(1), u.level(2));
        let initial_velocity =
            max(&mut (0..u0.len()).map(|i| (4.0 * u1[i] - u2[i] - 3.0 * u0[i]) / (2.0 * g.dt())));
        let bnodes = g.boundary_nodes();
        let boundary_value = max(&mut (0..g.levels()).flat_map(|k| {
            let lvl = u.level(k);
            bnodes
                .iter()
                .flat_map(move |&p| lvl[p * m..(p + 1) * m].iter().copied())
                .collect::<Vec<_>>()
        }));
        Self {
            initial_value,
            initial_velocity,
            boundary_value,
            scale: u.max_abs(),
            dt: g.dt(),
            t_final: g.t_final(),
        }
    }

    /// The first violated hypothesis, if any. Values must vanish to `1e-12`
    /// relative; the velocity difference is itself `O(dt²)` on smooth fields, so
    /// it only has to stay below `dt · max|u| / T`.
    pub fn violation(&self) -> Option<&'static str> {
        let tol = 1e-12 * self.scale.max(1.0);
        if self.initial_value > tol {
            Some("u(0,x) = 0")
        } else if self.initial_velocity > tol + self.dt * self.scale / self.t_final {
            Some("du/dt(0,x) = 0")
        } else if self.boundary_value > tol {
            Some("u = 0 on the lateral boundary")
        } else {
            None
        }
    }
}

/// The seven quadratures; the first three form the left side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CarlemanTerms {
    /// `‖e^{-φ/h} u‖²`.
    pub interior: f64,
    /// `h ∫_{Σ₊} e^{-2φ/h} (ω·ν) |∂_ν u|²`.
    pub flux_plus: f64,
    /// `h ∫_Ω e^{-2φ(T)/h} |∂_t u(T)|²`.
    pub final_velocity: f64,
    /// `‖h e^{-φ/h} 𝓛_q u‖²`.
    pub source: f64,
    /// `h⁻¹ ∫_Ω e^{-2φ(T)/h} |u(T)|²`.
    pub final_value: f64,
    /// `h ∫_Ω e^{-2φ(T)/h} |∇u(T)|²`.
    pub final_gradient: f64,
    /// `h ∫_{Σ₋} e^{-2φ/h} (-ω·ν) |∂_ν u|²`.
    pub flux_minus: f64,
}

impl CarlemanTerms {
    pub fn lhs(&self) -> f64 {
        self.interior + self.flux_plus + self.final_velocity
    }

    pub fn rhs(&self) -> f64 {
        self.source + self.final_value + self.final_gradient + self.flux_minus
    }

    /// `lhs / rhs`; zero when both vanish, infinite when only the right side does.
    pub fn ratio(&self) -> f64 {
        let (l, r) = (self.lhs(), self.rhs());
        if r > 0.0 {
            l / r
        } else if l == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanRecord {
    pub h: f64,
    pub omega: [f64; 2],
    pub terms: CarlemanTerms,
    pub ratio: f64,
    pub admissibility: Admissibility,
}

/// Records for one field over several `h`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CarlemanReport {
    pub records: Vec<CarlemanRecord>,
}

impl CarlemanReport {
    pub fn sweep(u: &WaveField, q: &MatrixPotential, omega: [f64; 2], hs: &[f64]) -> Result<Self> {
        let records = hs
            .iter()
            .map(|&h| evaluate_carleman(u, q, h, omega))
            .collect::<Result<_>>()?;
        Ok(Self { records })
    }

    pub fn max_ratio(&self) -> f64 {
        self.records.iter().fold(0.0, |a, r| a.max(r.ratio))
    }

    pub fn all_finite(&self) -> bool {
        self.records.iter().all(|r| r.ratio.is_finite())
    }

    /// Largest `ratio(h_{i+1}) / ratio(h_i)` over consecutive records.
    pub fn worst_growth(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].ratio / w[0].ratio)
            .fold(0.0, f64::max)
    }
}

/// Both sides of the weighted inequality for an admissible physical field.
pub fn evaluate_carleman(
    u: &WaveField,
    q: &MatrixPotential,
    h: f64,
    omega: [f64; 2],
) -> Result<CarlemanRecord> {
    if u.representation() != Representation::Physical {
        return Err(MwipError::Representation(
            "Carleman terms need a physical field".into(),
        ));
    }
    if !(h > 0.0) {
        return Err(MwipError::InvalidArgument(format!("h must be positive, got {h}")));
    }
    let g = *u.grid();
    check_unit(&g, &omega)?;
    if g.nt() < 3 || g.nx() < 4 {
        return Err(MwipError::InvalidArgument("grid too coarse for the Carleman quadrature".into()));
    }
    let admissibility = Admissibility::of(u);
    if let Some(what) = admissibility.violation() {
        return Err(MwipError::Inadmissible(format!("hypothesis {what} fails")));
    }
    let m = u.components();
    let n = g.n();
    let w = g.space_weights();
    let weight = |k: usize, p: usize| {
        let x = g.coord(p);
        (-2.0 * phase(&omega, g.time(k), &x[..n]) / h).exp()
    };
    let sq = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();

    let lu = apply_operator(q, u)?;
    let mut t = CarlemanTerms::default();
    for k in 0..g.levels() {
        let (ul, ll) = (u.level(k), lu.level(k));
        let (mut a, mut b) = (0.0, 0.0);
        for p in 0..g.nodes() {
            let e = w[p] * weight(k, p);
            a += e * sq(&ul[p * m..(p + 1) * m]);
            b += e * sq(&ll[p * m..(p + 1) * m]);
        }
        t.interior += g.time_weight(k) * a;
        t.source += g.time_weight(k) * h * h * b;
    }

    let dn = normal_derivative(u);
    for k in 0..g.levels() {
        let lvl = dn.level(k);
        for (i, bp) in dn.points().iter().enumerate() {
            let on = dot(&omega, &bp.normal);
            let x = g.coord(bp.node);
            let flux = g.time_weight(k)
                * bp.weight
                * h
                * (-2.0 * phase(&omega, g.time(k), &x[..n]) / h).exp()
                * on.abs()
                * sq(&lvl[i * m..(i + 1) * m]);
            if on > 0.0 {
                t.flux_plus += flux;
            } else {
                t.flux_minus += flux;
            }
        }
    }

    let nt = g.nt();
    let ut = final_velocity(u);
    let grad = gradient_level(&g, u.level(nt), m);
    let un = u.level(nt);
    for p in 0..g.nodes() {
        let e = w[p] * weight(nt, p);
        t.final_velocity += h * e * sq(&ut[p * m..(p + 1) * m]);
        t.final_value += e / h * sq(&un[p * m..(p + 1) * m]);
        t.final_gradient += h
            * e
            * grad[p * m..(p + 1) * m]
                .iter()
                .map(|gv| gv[0].norm_sqr() + gv[1].norm_sqr())
                .sum::<f64>();
    }

    Ok(CarlemanRecord {
        h,
        omega,
        terms: t,
        ratio: t.ratio(),
        admissibility,
    })
}

/// First derivative at position `i` of a line of length `len`: centred inside,
/// one-sided second order at the ends.
fn d1(f: impl Fn(isize) -> C64, i: usize, len: usize, step: f64) -> C64 {
    if i == 0 {
        (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * step)
    } else if i + 1 == len {
        (3.0 * f(0) - 4.0 * f(-1) + f(-2)) / (2.0 * step)
    } else {
        (f(1) - f(-1)) / (2.0 * step)
    }
}

/// Second derivative, same conventions as [`d1`].
fn d2(f: impl Fn(isize) -> C64, i: usize, len: usize, step: f64) -> C64 {
    let s2 = step * step;
    if i == 0 {
        (2.0 * f(0) - 5.0 * f(1) + 4.0 * f(2) - f(3)) / s2
    } else if i + 1 == len {
        (2.0 * f(0) - 5.0 * f(-1) + 4.0 * f(-2) - f(-3)) / s2
    } else {
        (f(1) - 2.0 * f(0) + f(-1)) / s2
    }
}

fn strides(g: &Grid, m: usize) -> [isize; 2] {
    [m as isize, (g.nx() * m) as isize]
}

/// `∇u` at every node and component of one level, `[node][component]`.
fn gradient_level(g: &Grid, level: &[C64], m: usize) -> Vec<[C64; 2]> {
    let st = strides(g, m);
    let mut out = vec![[C64::new(0.0, 0.0); 2]; level.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let idx = g.axis_indices(i / m);
        for a in 0..g.n() {
            o[a] = d1(|j| level[(i as isize + j * st[a]) as usize], idx[a], g.nx(), g.dx());
        }
    }
    out
}

/// `∂_t u` at one level, one-sided at `t = 0` and `t = T`.
fn velocity_level(u: &WaveField, k: usize) -> Vec<C64> {
    let g = u.grid();
    let len = u.level(0).len();
    (0..len)
        .map(|i| d1(|j| u.level((k as isize + j) as usize)[i], k, g.levels(), g.dt()))
        .collect()
}

fn final_velocity(u: &WaveField) -> Vec<C64> {
    velocity_level(u, u.grid().nt())
}

/// `□u` at every node of level `k`, one-sided at the ends of each line.
fn box_level(u: &WaveField, k: usize) -> Vec<C64> {
    let g = u.grid();
    let m = u.components();
    let st = strides(g, m);
    let lvl = u.level(k);
    (0..lvl.len())
        .map(|i| {
            let utt = d2(|j| u.level((k as isize + j) as usize)[i], k, g.levels(), g.dt());
            let idx = g.axis_indices(i / m);
            let lap: C64 = (0..g.n())
                .map(|a| d2(|j| lvl[(i as isize + j * st[a]) as usize], idx[a], g.nx(), g.dx()))
                .sum();
            utt - lap
        })
        .collect()
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / (b.abs() + 1e-300)
    }
}

fn check_audit_field(v: &WaveField) -> Result<()> {
    let g = v.grid();
    if g.levels() < 4 || g.nx() < 4 {
        return Err(MwipError::InvalidArgument("grid too coarse for the audit stencils".into()));
    }
    Ok(())
}

/// Gap between `4h³ ∫_Q Re(□v · ∂_t v̄)` and `2h³ ∫_Ω |∂_t v(T)|² + |∇v(T)|²`,
/// relative to the latter.
pub fn check_p2_identity(v: &WaveField, h: f64, omega: [f64; 2]) -> Result<f64> {
    check_unit(v.grid(), &omega)?;
    check_audit_field(v)?;
    let g = *v.grid();
    let m = v.components();
    let w = g.space_weights();
    let h3 = h * h * h;
    let mut volume = 0.0;
    for k in 0..g.levels() {
        let bx = box_level(v, k);
        let vt = velocity_level(v, k);
        let s: f64 = (0..bx.len())
            .map(|i| w[i / m] * (bx[i] * vt[i].conj()).re)
            .sum();
        volume += g.time_weight(k) * s;
    }
    volume *= 4.0 * h3;
    let vt = final_velocity(v);
    let grad = gradient_level(&g, v.level(g.nt()), m);
    let surface: f64 = 2.0
        * h3
        * (0..vt.len())
            .map(|i| {
                w[i / m] * (vt[i].norm_sqr() + grad[i][0].norm_sqr() + grad[i][1].norm_sqr())
            })
            .sum::<f64>();
    Ok(relative_gap(volume, surface))
}

/// Gap between `-4h³ ∫_Q Re(□v · ω·∇v̄)` and
/// `-4h³ Re ∫_Ω ∂_t v(T) ω·∇v̄(T) + 2h³ ∫_Σ (ω·ν)|∂_ν v|²`, relative to the sum
/// of the two terms' magnitudes.
pub fn check_p1p2_boundary_identity(v: &WaveField, h: f64, omega: [f64; 2]) -> Result<f64> {
    check_unit(v.grid(), &omega)?;
    check_audit_field(v)?;
    let g = *v.grid();
    let m = v.components();
    let w = g.space_weights();
    let h3 = h * h * h;
    let transport = |grad: &[C64; 2]| omega[0] * grad[0] + omega[1] * grad[1];
    let mut volume = 0.0;
    for k in 0..g.levels() {
        let bx = box_level(v, k);
        let grad = gradient_level(&g, v.level(k), m);
        let s: f64 = (0..bx.len())
            .map(|i| w[i / m] * (bx[i] * transport(&grad[i]).conj()).re)
            .sum();
        volume += g.time_weight(k) * s;
    }
    volume *= -4.0 * h3;

    let vt = final_velocity(v);
    let grad = gradient_level(&g, v.level(g.nt()), m);
    let final_part: f64 = -4.0
        * h3
        * (0..vt.len())
            .map(|i| w[i / m] * (vt[i] * transport(&grad[i]).conj()).re)
            .sum::<f64>();
    let dn = normal_derivative(v);
    let mut lateral = 0.0;
    for k in 0..g.levels() {
        let lvl = dn.level(k);
        let s: f64 = dn
            .points()
            .iter()
            .enumerate()
            .map(|(i, bp)| {
                bp.weight
                    * dot(&omega, &bp.normal)
                    * lvl[i * m..(i + 1) * m].iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum();
        lateral += g.time_weight(k) * s;
    }
    lateral *= 2.0 * h3;
    // The two closed-form terms can nearly cancel; scale by their sizes.
    let d = (volume - final_part - lateral).abs();
    Ok(if d == 0.0 { 0.0 } else { d / (final_part.abs() + lateral.abs() + 1e-300) })
}
