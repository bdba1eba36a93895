//! Data presets for forward simulations and the manufactured solution.

use std::f64::consts::PI;
use std::sync::Arc;

use mwip_core::geometry::Grid;
use mwip_core::potential::MatrixPotential;
use mwip_core::solver::{
    energy_audit, solve_ibvp, solve_ibvp_with_source, DataFn, EnergyReport, IbvpData, Representation, WaveField,
};
use mwip_core::{Result, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn sines(x: &[f64], k: f64) -> f64 {
    x.iter().map(|v| (k * PI * v).sin()).product()
}

/// Null direction used by the plane-wave parts.
fn null_phase(t: f64, x: &[f64]) -> f64 {
    match x.len() {
        1 => t + x[0],
        _ => t + 0.6 * x[0] + 0.8 * x[1],
    }
}

/// Manufactured solution `u_c = s(x) cos(a_c t) + cos(t + x·ω)/2` with
/// `s = Π sin(π x_k)` and `a_c = 2 + c`.
fn mms_value(t: f64, x: &[f64], out: &mut [C64]) {
    let s = sines(x, 1.0);
    let p = 0.5 * null_phase(t, x).cos();
    for (k, o) in out.iter_mut().enumerate() {
        *o = c(s * ((2 + k) as f64 * t).cos() + p);
    }
}

fn mms_velocity(t: f64, x: &[f64], out: &mut [C64]) {
    let s = sines(x, 1.0);
    let p = -0.5 * null_phase(t, x).sin();
    for (k, o) in out.iter_mut().enumerate() {
        let a = (2 + k) as f64;
        *o = c(-a * s * (a * t).sin() + p);
    }
}

/// `□u*` for the manufactured solution; the plane-wave part is annihilated.
fn mms_box(t: f64, x: &[f64], out: &mut [C64]) {
    let s = sines(x, 1.0);
    let lap = x.len() as f64 * PI * PI;
    for (k, o) in out.iter_mut().enumerate() {
        let a = (2 + k) as f64;
        *o = c((lap - a * a) * s * (a * t).cos());
    }
}

pub struct Case {
    pub name: &'static str,
    pub data: IbvpData,
    /// Closed-form solution, known for the manufactured case only.
    pub exact: Option<DataFn>,
}

/// Builds one of the named presets for `m` components.
pub fn case(name: &str, m: usize) -> Option<Case> {
    let f = |g: fn(f64, &[f64], &mut [C64])| -> DataFn { Arc::new(g) };
    let (name, data, exact): (&'static str, IbvpData, Option<DataFn>) = match name {
        "zero" => ("zero", IbvpData::zero(m), None),
        "mms" => {
            let u = f(mms_value);
            ("mms", IbvpData::from_solution(m, Arc::clone(&u), f(mms_velocity)), Some(u))
        }
        "standing" => {
            let mut d = IbvpData::zero(m);
            d.phi = f(|_, x, out| {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = c(sines(x, 1.0 + k as f64) / (1.0 + k as f64));
                }
            });
            ("standing", d, None)
        }
        "velocity" => {
            let mut d = IbvpData::zero(m);
            d.psi = f(|_, x, out| {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = c(if k % 2 == 0 { 1.0 } else { -1.0 } * sines(x, 1.0));
                }
            });
            ("velocity", d, None)
        }
        "plane" => {
            let u = f(|t, x, out| {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = c((2.0 * null_phase(t, x) + k as f64).cos());
                }
            });
            let ut = f(|t, x, out| {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = c(-2.0 * (2.0 * null_phase(t, x) + k as f64).sin());
                }
            });
            ("plane", IbvpData::from_solution(m, u, ut), None)
        }
        "boundary" => {
            let mut d = IbvpData::zero(m);
            d.f = f(|t, x, out| {
                let ramp = (PI * t).sin().powi(2);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = c(ramp * (x.iter().sum::<f64>() + k as f64));
                }
            });
            ("boundary", d, None)
        }
        "mixed" => {
            let phi = |x: &[f64], out: &mut [C64]| {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = c(sines(x, 1.0) * (1.0 + k as f64) + x.iter().sum::<f64>());
                }
            };
            let d = IbvpData {
                m,
                phi: Arc::new(move |_, x, out| phi(x, out)),
                psi: f(|_, x, out| out.iter_mut().for_each(|o| *o = c(x[0]))),
                f: Arc::new(move |t, x, out| {
                    phi(x, out);
                    let s = x.iter().sum::<f64>() * t * t;
                    out.iter_mut().for_each(|o| *o += c(s));
                }),
            };
            ("mixed", d, None)
        }
        _ => return None,
    };
    Some(Case { name, data, exact })
}

/// Outcome of one forward solve.
pub struct Run {
    pub u: WaveField,
    pub energy: EnergyReport,
    /// Max-norm error against the closed form, when there is one.
    pub error: Option<f64>,
}

/// Solves a preset; the manufactured case gets the source `□u* + q u*`.
pub fn run_case(grid: &Grid, q: &MatrixPotential, case: &Case) -> Result<Run> {
    let m = case.data.m;
    let u = match (&case.exact, case.name) {
        (Some(_), "mms") => {
            let n = grid.n();
            let nodes = grid.nodes();
            let source = |k: usize, out: &mut [C64]| {
                let t = grid.time(k);
                let mut qb = vec![C64::new(0.0, 0.0); nodes * m * m];
                q.fill_level(grid, k, &mut qb).expect("potential fits the grid");
                let mut u = vec![C64::new(0.0, 0.0); m];
                for p in 0..nodes {
                    let x = grid.coord(p);
                    mms_value(t, &x[..n], &mut u);
                    mms_box(t, &x[..n], &mut out[p * m..(p + 1) * m]);
                    for a in 0..m {
                        for b in 0..m {
                            out[p * m + a] += qb[(p * m + a) * m + b] * u[b];
                        }
                    }
                }
            };
            solve_ibvp_with_source(grid, q, &case.data, Some(&source))?
        }
        _ => solve_ibvp(grid, q, &case.data)?,
    };
    let energy = energy_audit(&u, &case.data)?;
    let error = match &case.exact {
        Some(exact) => {
            let n = grid.n();
            let e = WaveField::from_fn(grid, m, Representation::Physical, |t, x, out| exact(t, &x[..n], out));
            Some(u.add_scaled(C64::new(-1.0, 0.0), &e)?.max_abs())
        }
        None => None,
    };
    Ok(Run { u, energy, error })
}

/// Observed order between consecutive errors when `dx` halves.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}
