//! Fourier samples of `q = q⁽²⁾ - q⁽¹⁾` on the cone of frequencies reachable
//! by probe pairs, recovered from boundary data of the difference field.
//!
//! For entry `(i, j)` the probes carry `K₂ = e_j` and `K₁ = e_i`. The decaying
//! probe is built with frequency `-ζ`, so the identity's right-hand side
//! approximates `q̂_ij(ζ) = ∫_Q e^{-iζ·(t,x)} q_ij`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{MwipError, Result};
use crate::geometry::{cap_half_angle, check_unit, rotate, BoundaryPartition, Grid};
use crate::identity::{assemble_identity, difference_field};
use crate::potential::{fourier_oracle, Frequency, MatrixPotential};
use crate::probes::{make_growing_probe, make_zeta, GoProbe, ProbeKind, ProbeRequest};
use crate::solver::WaveField;

/// Floor of the zero-sample tolerance.
pub const MIN_ZERO_TOLERANCE: f64 = 1e-10;

/// Which potential the decaying probes are built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeMode {
    /// The adjoint of `q⁽¹⁾`, as the identity requires.
    Oracle,
    /// Zero: the probe ignores the unknown potential.
    Blind,
}

impl ProbeMode {
    pub fn name(self) -> &'static str {
        match self {
            ProbeMode::Oracle => "oracle",
            ProbeMode::Blind => "blind",
        }
    }
}

/// A probe direction with one frequency orthogonal to `(1, -ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePoint {
    pub omega: [f64; 2],
    pub zeta: Frequency,
}

/// Square grid of `per_axis^n` spatial frequencies inscribed in `|ξ| ≤ xi_max`.
pub fn xi_grid(n: usize, xi_max: f64, per_axis: usize) -> Vec<[f64; 2]> {
    let half = if n == 1 { xi_max } else { xi_max / 2f64.sqrt() };
    let axis: Vec<f64> = if per_axis <= 1 {
        vec![0.0]
    } else {
        (0..per_axis)
            .map(|i| -half + 2.0 * half * i as f64 / (per_axis - 1) as f64)
            .collect()
    };
    if n == 1 {
        axis.iter().map(|&a| [a, 0.0]).collect()
    } else {
        axis.iter()
            .flat_map(|&b| axis.iter().map(move |&a| [a, b]))
            .collect()
    }
}

/// Directions spread evenly over the cap `|ω - ω₀| ≤ ε`.
pub fn cap_directions(n: usize, omega0: [f64; 2], epsilon: f64, count: usize) -> Vec<[f64; 2]> {
    if n == 1 || count <= 1 {
        return vec![omega0];
    }
    // Stay strictly inside the cap so rounding never pushes a direction out.
    let cap = cap_half_angle(n, epsilon) * (1.0 - 1e-9);
    (0..count)
        .map(|i| rotate(&omega0, -cap + 2.0 * cap * i as f64 / (count - 1) as f64))
        .collect()
}

/// Tensor sampling of the accessible cone: every direction paired with every
/// `ξ`. A frequency reached from several directions is kept once, with the
/// first of them.
pub fn cone_frequencies(omegas: &[[f64; 2]], xis: &[[f64; 2]]) -> Vec<ConePoint> {
    let mut out: Vec<ConePoint> = Vec::new();
    for omega in omegas {
        for xi in xis {
            let p = ConePoint {
                omega: *omega,
                zeta: make_zeta(omega, xi),
            };
            let dup = out
                .iter()
                .any(|o| (0..3).all(|a| (o.zeta[a] - p.zeta[a]).abs() < 1e-14));
            if !dup {
                out.push(p);
            }
        }
    }
    out
}

/// One recovered Fourier coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub i: usize,
    pub j: usize,
    pub omega: [f64; 2],
    pub zeta: Frequency,
    pub h: f64,
    /// From every boundary term; `None` when a solve failed.
    pub estimate: Option<C64>,
    /// From the measured terms only.
    pub partial: Option<C64>,
    pub oracle: C64,
    /// `|lhs - rhs|` of the identity behind this sample.
    pub gap_abs: f64,
    pub probe_flagged: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub mode: ProbeMode,
    pub h: f64,
    pub m: usize,
    pub samples: Vec<Sample>,
    /// `‖estimate_ij - oracle_ij‖ / ‖oracle‖_F` over the valid samples, `[i][j]`.
    pub entry_errors: Vec<Vec<f64>>,
    pub partial_entry_errors: Vec<Vec<f64>>,
    /// `max(10 · largest identity gap, MIN_ZERO_TOLERANCE)`.
    pub zero_tolerance: f64,
}

impl ReconstructionResult {
    pub fn max_entry_error(&self) -> f64 {
        self.entry_errors.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    pub fn max_abs_sample(&self) -> f64 {
        self.samples
            .iter()
            .filter_map(|s| s.estimate)
            .fold(0.0, |a, v| a.max(v.norm()))
    }

    pub fn sample(&self, i: usize, j: usize, zeta: &Frequency) -> Option<&Sample> {
        self.samples.iter().find(|s| {
            s.i == i && s.j == j && (0..3).all(|a| (s.zeta[a] - zeta[a]).abs() < 1e-12)
        })
    }
}

/// Inputs of a reconstruction on one grid.
#[derive(Debug, Clone)]
pub struct Reconstruction<'a> {
    pub grid: &'a Grid,
    pub q1: &'a MatrixPotential,
    pub q2: &'a MatrixPotential,
    pub h: f64,
    pub mode: ProbeMode,
    pub partition: &'a BoundaryPartition,
}

fn unit(m: usize, i: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); m];
    v[i] = C64::new(1.0, 0.0);
    v
}

fn entry_errors(samples: &[Sample], m: usize, pick: impl Fn(&Sample) -> Option<C64>) -> Vec<Vec<f64>> {
    let truth: f64 = samples
        .iter()
        .filter(|s| pick(s).is_some())
        .map(|s| s.oracle.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let mut err = vec![vec![0.0; m]; m];
    for s in samples {
        if let Some(v) = pick(s) {
            err[s.i][s.j] += (v - s.oracle).norm_sqr();
        }
    }
    for e in err.iter_mut().flatten() {
        *e = if *e == 0.0 { 0.0 } else { e.sqrt() / truth };
    }
    err
}

impl Reconstruction<'_> {
    fn difference(&self) -> Result<MatrixPotential> {
        let q = self.q1.difference_from(self.q2)?;
        if q.support().is_none() && !q.is_zero() {
            return Err(MwipError::MissingSupport(
                "q2 - q1 has no compact support box; attach one with with_support".into(),
            ));
        }
        Ok(q)
    }

    fn decaying(&self, omega: [f64; 2], zeta: Frequency, i: usize, adj: &MatrixPotential) -> Result<GoProbe> {
        let m = self.q1.dim();
        let zero = MatrixPotential::zero(m);
        ProbeRequest {
            kind: ProbeKind::Decaying,
            potential: match self.mode {
                ProbeMode::Oracle => adj,
                ProbeMode::Blind => &zero,
            },
            h: self.h,
            omega,
            zeta,
            amplitude: unit(m, i),
            pad: None,
        }
        .build(self.grid)
    }

    /// Samples every entry at every cone point.
    pub fn run(&self, points: &[ConePoint]) -> Result<ReconstructionResult> {
        let q = self.difference()?;
        let m = q.dim();
        for p in points {
            check_unit(self.grid, &p.omega)?;
            if !self.partition.admits(&p.omega) {
                return Err(MwipError::InvalidArgument(format!(
                    "direction {:?} lies outside the cap around {:?}",
                    p.omega, self.partition.omega0
                )));
            }
        }
        let adj = self.q1.adjoint();
        let mut samples = Vec::with_capacity(points.len() * m * m);
        let mut omegas: Vec<[f64; 2]> = Vec::new();
        for p in points {
            if !omegas.contains(&p.omega) {
                omegas.push(p.omega);
            }
        }
        for omega in omegas {
            let growing: Vec<(GoProbe, WaveField)> = (0..m)
                .map(|j| {
                    let g = make_growing_probe(self.grid, self.q2, self.h, omega, &unit(m, j))?;
                    let d = difference_field(self.q1, self.q2, &g)?;
                    Ok((g, d))
                })
                .collect::<Result<_>>()?;
            let batch: Vec<Vec<Sample>> = points
                .par_iter()
                .filter(|p| p.omega == omega)
                .map(|p| self.samples_at(&q, &adj, p, &growing))
                .collect::<Result<_>>()?;
            samples.extend(batch.into_iter().flatten());
        }
        let gap = samples.iter().fold(0.0f64, |a, s| a.max(s.gap_abs));
        Ok(ReconstructionResult {
            mode: self.mode,
            h: self.h,
            m,
            entry_errors: entry_errors(&samples, m, |s| s.estimate),
            partial_entry_errors: entry_errors(&samples, m, |s| s.partial),
            zero_tolerance: (10.0 * gap).max(MIN_ZERO_TOLERANCE),
            samples,
        })
    }

    fn samples_at(
        &self,
        q: &MatrixPotential,
        adj: &MatrixPotential,
        p: &ConePoint,
        growing: &[(GoProbe, WaveField)],
    ) -> Result<Vec<Sample>> {
        let m = q.dim();
        let minus: Frequency = p.zeta.map(|z| -z);
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            let probe = self.decaying(p.omega, minus, i, adj);
            for (j, (g, d)) in growing.iter().enumerate() {
                let oracle = fourier_oracle(q, self.grid, i, j, &p.zeta)?;
                let mut s = Sample {
                    i,
                    j,
                    omega: p.omega,
                    zeta: p.zeta,
                    h: self.h,
                    estimate: None,
                    partial: None,
                    oracle,
                    gap_abs: 0.0,
                    probe_flagged: false,
                    failure: None,
                };
                match probe
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(|v| assemble_identity(q, g, d, v, self.partition).map(|r| (v, r)))
                {
                    Ok((v, r)) => {
                        s.estimate = Some(r.rhs_total());
                        s.partial = Some(r.rhs_partial());
                        s.gap_abs = r.gap;
                        s.probe_flagged = v.flagged || g.flagged;
                    }
                    Err(e) => s.failure = Some(e.to_string()),
                }
                out.push(s);
            }
        }
        Ok(out)
    }
}

/// Recovers `q̂_ij(ζ)` for every entry and cone point.
pub fn recover_fourier_samples(
    grid: &Grid,
    q1: &MatrixPotential,
    q2: &MatrixPotential,
    points: &[ConePoint],
    h: f64,
    mode: ProbeMode,
    partition: &BoundaryPartition,
) -> Result<ReconstructionResult> {
    Reconstruction {
        grid,
        q1,
        q2,
        h,
        mode,
        partition,
    }
    .run(points)
}

/// Band-limited view of one entry: `Σ_ζ ŝ(ζ) e^{iζ·(t,x)} Δξⁿ / (2π)^{n+1}`
/// over the valid samples, zero outside the sampled cone. Only meant for
/// pictures; it is not an inverse of the cone-restricted transform.
pub fn filtered_inverse(
    result: &ReconstructionResult,
    i: usize,
    j: usize,
    n: usize,
    xi_step: f64,
    points: &[(f64, [f64; 2])],
) -> Vec<C64> {
    let scale = xi_step.powi(n as i32) / std::f64::consts::TAU.powi(n as i32 + 1);
    points
        .iter()
        .map(|(t, x)| {
            result
                .samples
                .iter()
                .filter(|s| s.i == i && s.j == j)
                .filter_map(|s| {
                    let v = s.estimate?;
                    let arg = s.zeta[0] * t + (0..n).map(|a| s.zeta[a + 1] * x[a]).sum::<f64>();
                    Some(v * C64::from_polar(1.0, arg))
                })
                .sum::<C64>()
                * scale
        })
        .collect()
}

/// `max |blind - oracle|` over all entries at one cone point, per `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGap {
    /// `(h, nx, gap)` in input order.
    pub rows: Vec<(f64, usize, f64)>,
}

impl ModeGap {
    /// Largest ratio between consecutive gaps.
    pub fn worst_ratio(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| if w[0].2 == 0.0 { 0.0 } else { w[1].2 / w[0].2 })
            .fold(0.0, f64::max)
    }
}

pub fn blind_vs_oracle_gap(
    q1: &MatrixPotential,
    q2: &MatrixPotential,
    point: ConePoint,
    runs: &[(f64, Grid, BoundaryPartition)],
) -> Result<ModeGap> {
    let mut rows = Vec::with_capacity(runs.len());
    for (h, grid, partition) in runs {
        let run = |mode| recover_fourier_samples(grid, q1, q2, &[point], *h, mode, partition);
        let (a, b) = (run(ProbeMode::Oracle)?, run(ProbeMode::Blind)?);
        let gap = a
            .samples
            .iter()
            .zip(&b.samples)
            .filter_map(|(x, y)| Some((x.estimate? - y.estimate?).norm()))
            .fold(0.0, f64::max);
        rows.push((*h, grid.nx(), gap));
    }
    Ok(ModeGap { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Data agree and every sample is below tolerance.
    Consistent,
    /// Some sample exceeds three times the tolerance.
    Distinguished,
    /// Neither condition holds.
    Inconclusive,
}

impl Verdict {
    pub fn describe(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent: zero difference recovered",
            Verdict::Distinguished => "distinguished",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub verdict: Verdict,
    /// Largest boundary datum of any difference field.
    pub data_gap: f64,
    pub max_sample: f64,
    pub tolerance: f64,
    pub result: ReconstructionResult,
}

/// Data agreement implies vanishing samples; separated potentials produce a
/// sample well above tolerance.
pub fn uniqueness_smoke_test(
    grid: &Grid,
    q1: &MatrixPotential,
    q2: &MatrixPotential,
    points: &[ConePoint],
    h: f64,
    partition: &BoundaryPartition,
) -> Result<UniquenessReport> {
    let m = q1.dim();
    let mut data_gap = 0.0f64;
    let mut omegas: Vec<[f64; 2]> = points.iter().map(|p| p.omega).collect();
    omegas.dedup();
    for omega in omegas {
        for j in 0..m {
            let g = make_growing_probe(grid, q2, h, omega, &unit(m, j))?;
            let d = difference_field(q1, q2, &g)?;
            let nt = grid.nt();
            let fin = d.level(nt).iter().chain(d.level(nt - 1));
            data_gap = data_gap
                .max(crate::solver::normal_derivative(&d).max_abs())
                .max(fin.fold(0.0, |a, v| a.max(v.norm())));
        }
    }
    let result = recover_fourier_samples(grid, q1, q2, points, h, ProbeMode::Oracle, partition)?;
    let max_sample = result.max_abs_sample();
    let tolerance = result.zero_tolerance;
    let verdict = if data_gap <= 1e-10 && max_sample <= tolerance {
        Verdict::Consistent
    } else if max_sample > 3.0 * tolerance {
        Verdict::Distinguished
    } else {
        Verdict::Inconclusive
    };
    Ok(UniquenessReport {
        verdict,
        data_gap,
        max_sample,
        tolerance,
        result,
    })
}

#[cfg(test)]
mod tests;
