//! Integral identity linking a potential difference to boundary data, in
//! conjugated variables so the weights `e^{±φ/h}` cancel before any
//! arithmetic.
//!
//! With `u = u⁽¹⁾ - u⁽²⁾ = e^{φ/h} ũ` and a decaying probe `v = e^{-φ/h} V`,
//!
//! ```text
//! ∫_Q q (K₂ + hR_g)·V̄ = ∫_Ω (∂_t ũ + ũ/h)·V̄ |_{t=T}
//!                     - ∫_Ω ũ·(∂_t V - V/h)‾ |_{t=T}
//!                     - ∫_Σ ∂_ν ũ·V̄
//! ```
//!
//! where `q = q⁽²⁾ - q⁽¹⁾`. The report keeps every term, and splits the
//! lateral integral at `G` so the partial-data version can be read off.

use num_complex::Complex64 as C64;

use crate::error::{MwipError, Result};
use crate::geometry::{BoundaryPartition, Grid};
use crate::potential::{fourier_oracle, Frequency, MatrixPotential};
use crate::probes::{make_decaying_probe, make_growing_probe, GoProbe, ProbeKind};
use crate::solver::{apply_matrix, max_norm, normal_derivative, ConjugatedSolve, Sign, WaveField};

/// Solves `(□_{+φ} + h² q⁽¹⁾) ũ = h² (q⁽²⁾ - q⁽¹⁾)(K₂ + hR_g)` with zero data on `Q`.
pub fn difference_field(
    q1: &MatrixPotential,
    q2: &MatrixPotential,
    probe_g: &GoProbe,
) -> Result<WaveField> {
    if probe_g.kind != ProbeKind::Growing {
        return Err(MwipError::InvalidArgument(
            "difference field needs a growing probe".into(),
        ));
    }
    let grid = *probe_g.grid();
    let m = q1.dim();
    let q = q1.difference_from(q2)?;
    let h = probe_g.h;
    let h2 = C64::new(h * h, 0.0);
    let source = |k: usize, out: &mut [C64]| {
        let mut qb = vec![C64::new(0.0, 0.0); grid.nodes() * m * m];
        let mut total = vec![C64::new(0.0, 0.0); grid.nodes() * m];
        q.fill_level(&grid, k, &mut qb).expect("grid checked");
        probe_g.total_level(k, &mut total);
        apply_matrix(&qb, &total, m, h2, out);
    };
    q.check_grid(&grid)?;
    ConjugatedSolve {
        grid: &grid,
        q: q1,
        h,
        omega: probe_g.omega,
        sign: Sign::Plus,
        pad: 0,
    }
    .solve(&source)
}

/// Both sides of the identity for one pair of probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub h: f64,
    /// `∫_Q q u⁽²⁾·v̄`.
    pub lhs: C64,
    /// `∫_Ω ∂_t u(T)·v̄(T)`.
    pub rhs_final: C64,
    /// `-∫_Ω u(T)·∂_t v̄(T)`; zero when the final states agree.
    pub rhs_final_value: C64,
    /// `-∫_{Σ\G} ∂_ν u·v̄`.
    pub rhs_lateral: C64,
    /// `-∫_G ∂_ν u·v̄`; zero when the measurements agree.
    pub rhs_measured: C64,
    /// `|lhs - (all right-hand terms)|`.
    pub gap: f64,
    pub relative_gap: f64,
    /// `∫_Q e^{iζ·(t,x)} q K₂·K̄₁`, the limit of `lhs` as `h → 0`.
    pub fourier_target: C64,
    /// Largest modulus of any conjugated quantity entering the quadratures.
    pub max_intermediate: f64,
}

impl IdentityReport {
    /// Sum of every right-hand term.
    pub fn rhs_total(&self) -> C64 {
        self.rhs_final + self.rhs_final_value + self.rhs_lateral + self.rhs_measured
    }

    /// Right-hand side built from measured data only: the trace on `G` and
    /// the final value.
    pub fn rhs_partial(&self) -> C64 {
        self.rhs_final_value + self.rhs_measured
    }
}

/// Quadratures of the identity from precomputed probes and difference field.
pub fn assemble_identity(
    q: &MatrixPotential,
    growing: &GoProbe,
    diff: &WaveField,
    decaying: &GoProbe,
    partition: &BoundaryPartition,
) -> Result<IdentityReport> {
    let grid = *diff.grid();
    let m = diff.components();
    let h = growing.h;
    if decaying.kind != ProbeKind::Decaying || growing.kind != ProbeKind::Growing {
        return Err(MwipError::InvalidArgument("probe kinds swapped".into()));
    }
    if *growing.grid() != grid || *decaying.grid() != grid {
        return Err(MwipError::InvalidArgument("probes live on another grid".into()));
    }
    if decaying.h != h || decaying.omega != growing.omega {
        return Err(MwipError::InvalidArgument(
            "probes must share h and omega".into(),
        ));
    }
    let points = grid.boundary_points();
    if partition.points() != points.as_slice() {
        return Err(MwipError::InvalidArgument(
            "partition masks were built for another grid".into(),
        ));
    }
    let unmeasured = partition.unmeasured();
    let w = grid.space_weights();
    let nodes = grid.nodes();
    let nt = grid.nt();
    let dot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C64>();

    let mut qb = vec![C64::new(0.0, 0.0); nodes * m * m];
    let mut ug = vec![C64::new(0.0, 0.0); nodes * m];
    let mut qu = vec![C64::new(0.0, 0.0); nodes * m];
    let mut v = vec![C64::new(0.0, 0.0); nodes * m];
    let mut lhs = C64::new(0.0, 0.0);
    let mut lateral = C64::new(0.0, 0.0);
    let mut measured = C64::new(0.0, 0.0);
    let mut max_mid = diff.max_abs();
    let dn = normal_derivative(diff);
    max_mid = max_mid.max(dn.max_abs());
    let mut v_final = Vec::new();
    for k in 0..grid.levels() {
        q.fill_level(&grid, k, &mut qb)?;
        growing.total_level(k, &mut ug);
        decaying.total_level(k, &mut v);
        apply_matrix(&qb, &ug, m, C64::new(1.0, 0.0), &mut qu);
        max_mid = max_mid
            .max(max_norm(&ug))
            .max(max_norm(&v));
        let s: C64 = (0..nodes)
            .map(|p| w[p] * dot(&qu[p * m..(p + 1) * m], &v[p * m..(p + 1) * m]))
            .sum();
        lhs += grid.time_weight(k) * s;

        let dl = dn.level(k);
        for (i, bp) in points.iter().enumerate() {
            let term = -grid.time_weight(k)
                * bp.weight
                * dot(&dl[i * m..(i + 1) * m], &v[bp.node * m..(bp.node + 1) * m]);
            if unmeasured[i] {
                lateral += term;
            } else {
                measured += term;
            }
        }
        if k + 3 > nt {
            v_final.push(v.clone());
        }
    }

    // Backward second-order derivatives at t = T; V(T) keeps the analytic
    // amplitude derivative.
    let dt = grid.dt();
    let (u0, u1, u2) = (diff.level(nt), diff.level(nt - 1), diff.level(nt - 2));
    let vt_amp = C64::new(0.0, -decaying.zeta[0]);
    let mut amp = vec![C64::new(0.0, 0.0); nodes * m];
    decaying.amplitude_level(nt, &mut amp);
    let (r0, r1, r2) = (
        decaying.remainder.level(nt),
        decaying.remainder.level(nt - 1),
        decaying.remainder.level(nt - 2),
    );
    let vf = &v_final[2];
    let mut final_velocity = C64::new(0.0, 0.0);
    let mut final_value = C64::new(0.0, 0.0);
    for p in 0..nodes {
        let mut a = C64::new(0.0, 0.0);
        let mut b = C64::new(0.0, 0.0);
        for c in 0..m {
            let i = p * m + c;
            let ut = (3.0 * u0[i] - 4.0 * u1[i] + u2[i]) / (2.0 * dt);
            let vt = vt_amp * amp[i] + h * (3.0 * r0[i] - 4.0 * r1[i] + r2[i]) / (2.0 * dt);
            a += (ut + u0[i] / h) * vf[i].conj();
            b -= u0[i] * (vt - vf[i] / h).conj();
        }
        final_velocity += w[p] * a;
        final_value += w[p] * b;
    }

    let mut target = C64::new(0.0, 0.0);
    let minus_zeta: Frequency = decaying.zeta.map(|z| -z);
    for i in 0..m {
        for j in 0..m {
            let coeff = decaying.amplitude[i].conj() * growing.amplitude[j];
            if coeff != C64::new(0.0, 0.0) {
                target += coeff * fourier_oracle(q, &grid, i, j, &minus_zeta)?;
            }
        }
    }

    let rhs = final_velocity + final_value + lateral + measured;
    let gap = (lhs - rhs).norm();
    Ok(IdentityReport {
        h,
        lhs,
        rhs_final: final_velocity,
        rhs_final_value: final_value,
        rhs_lateral: lateral,
        rhs_measured: measured,
        gap,
        relative_gap: if gap == 0.0 { 0.0 } else { gap / (lhs.norm() + 1e-300) },
        fourier_target: target,
        max_intermediate: max_mid,
    })
}

/// Probe parameters shared by the identity drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityProbes {
    pub omega: [f64; 2],
    pub zeta: Frequency,
    pub k1: Vec<C64>,
    pub k2: Vec<C64>,
}

/// Builds both probes (growing for `q⁽²⁾`, decaying for the adjoint of `q⁽¹⁾`),
/// solves for the difference field and evaluates the identity.
pub fn evaluate_identity(
    grid: &Grid,
    q1: &MatrixPotential,
    q2: &MatrixPotential,
    h: f64,
    probes: &IdentityProbes,
    partition: &BoundaryPartition,
) -> Result<IdentityReport> {
    let growing = make_growing_probe(grid, q2, h, probes.omega, &probes.k2)?;
    let diff = difference_field(q1, q2, &growing)?;
    let decaying = make_decaying_probe(grid, q1, h, probes.omega, probes.zeta, &probes.k1)?;
    let q = q1.difference_from(q2)?;
    assemble_identity(&q, &growing, &diff, &decaying, partition)
}

/// One row of [`remainder_decay_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub h: f64,
    pub nx: usize,
    /// `|∫_Ω ∂_t u(T)·v̄(T)|`.
    pub final_term: f64,
    /// `|∫_{Σ\G} ∂_ν u·v̄|`.
    pub lateral_term: f64,
    /// `|lhs - fourier_target|`.
    pub target_error: f64,
    pub report: IdentityReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecaySweep {
    pub rows: Vec<DecayRow>,
    /// Least-squares slopes of `log |term|` against `log h`.
    pub final_slope: f64,
    pub lateral_slope: f64,
}

impl DecaySweep {
    /// Largest ratio between consecutive magnitudes of either term.
    pub fn worst_step(&self) -> f64 {
        self.rows
            .windows(2)
            .flat_map(|w| {
                [
                    w[1].final_term / w[0].final_term,
                    w[1].lateral_term / w[0].lateral_term,
                ]
            })
            .fold(0.0, f64::max)
    }
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Magnitudes of the two terms that partial data cannot see, as `h`
/// decreases. `runs` pairs each `h` with a grid and a partition on it.
pub fn remainder_decay_sweep(
    q1: &MatrixPotential,
    q2: &MatrixPotential,
    probes: &IdentityProbes,
    runs: &[(f64, Grid, BoundaryPartition)],
) -> Result<DecaySweep> {
    let mut rows = Vec::with_capacity(runs.len());
    for (h, grid, partition) in runs {
        let report = evaluate_identity(grid, q1, q2, *h, probes, partition)?;
        rows.push(DecayRow {
            h: *h,
            nx: grid.nx(),
            final_term: report.rhs_final.norm(),
            lateral_term: report.rhs_lateral.norm(),
            target_error: (report.lhs - report.fourier_target).norm(),
            report,
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let f: Vec<f64> = rows.iter().map(|r| r.final_term).collect();
    let l: Vec<f64> = rows.iter().map(|r| r.lateral_term).collect();
    Ok(DecaySweep {
        final_slope: loglog_slope(&hs, &f),
        lateral_slope: loglog_slope(&hs, &l),
        rows,
    })
}

#[cfg(test)]
mod tests;
