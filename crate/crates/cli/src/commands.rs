//! Subcommand drivers. Each writes only inside the output directory and
//! returns the files it produced.

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use mwip_core::carleman::{admissible_test_field, check_p1p2_boundary_identity, check_p2_identity, CarlemanReport};
use mwip_core::geometry::{BoundaryPartition, Grid};
use mwip_core::identity::{evaluate_identity, remainder_decay_sweep, IdentityProbes, IdentityReport};
use mwip_core::probes::{make_zeta, remainder_norm_sweep, ProbeKind, ProbeRequest};
use mwip_core::reconstruct::{
    cap_directions, cone_frequencies, filtered_inverse, recover_fourier_samples, xi_grid, ConePoint, ProbeMode,
    ReconstructionResult,
};
use mwip_core::solver::neumann_trace;
use mwip_core::C64;
use rayon::prelude::*;

use crate::archive::FieldArchive;
use crate::config::{ExperimentConfig, Preset};
use crate::csvout::{num, Table};
use crate::error::{CliError, CliResult};
use crate::experiments::{case, observed_order, run_case};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Probe,
    Carleman,
    Identity,
    Sweep,
    Reconstruct,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Probe => "probe",
            Command::Carleman => "carleman",
            Command::Identity => "identity",
            Command::Sweep => "sweep",
            Command::Reconstruct => "reconstruct",
            Command::Report => "report",
        }
    }
}

pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: ExperimentConfig, out: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
        Ok(Self { config, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn table(&self, name: &str, t: &Table, written: &mut Vec<PathBuf>) -> CliResult<()> {
        let p = self.path(name);
        t.write(&p)?;
        written.push(p);
        Ok(())
    }

    fn archive(&self, name: &str, a: &FieldArchive, written: &mut Vec<PathBuf>) -> CliResult<()> {
        let p = self.path(name);
        a.save(&p)?;
        written.push(p);
        Ok(())
    }
}

pub fn run(cmd: Command, ctx: &Context) -> CliResult<Vec<PathBuf>> {
    match cmd {
        Command::Simulate => simulate(ctx),
        Command::Probe => probe(ctx),
        Command::Carleman => carleman(ctx),
        Command::Identity => identity(ctx),
        Command::Sweep => sweep(ctx),
        Command::Reconstruct => reconstruct(ctx),
        Command::Report => report(ctx),
    }
}

fn na() -> String {
    "NA".into()
}

fn simulate(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let mut written = Vec::new();
    let mut t = Table::new(&["case_id", "nx", "nt", "h_na", "lhs_norms", "rhs_norms", "ratio", "max_error", "order"]);
    for name in &cfg.simulate.cases {
        let cs = case(name, cfg.potential.m).expect("validated case name");
        let mut prev: Option<f64> = None;
        for r in 0..=cfg.simulate.refinements {
            let grid = cfg.refined_grid(r)?;
            let (q, _) = cfg.potentials(&grid)?;
            let run = run_case(&grid, &q, &cs)?;
            if r == 0 {
                ctx.archive(&format!("simulate_{name}_u.mwip"), &FieldArchive::from_field(&run.u), &mut written)?;
                let trace = neumann_trace(&run.u)?;
                ctx.archive(&format!("simulate_{name}_trace.mwip"), &FieldArchive::from_boundary(&trace), &mut written)?;
            }
            let order = match (prev, run.error) {
                (Some(a), Some(b)) => num(observed_order(a, b)),
                _ => na(),
            };
            prev = run.error;
            t.push(vec![
                name.clone(),
                grid.nx().to_string(),
                grid.nt().to_string(),
                na(),
                num(run.energy.lhs),
                num(run.energy.rhs),
                num(run.energy.ratio),
                run.error.map_or_else(na, num),
                order,
            ]);
        }
    }
    ctx.table("simulate.csv", &t, &mut written)?;
    Ok(written)
}

fn probe(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let grid = cfg.base_grid()?;
    let (q1, _) = cfg.potentials(&grid)?;
    let adj = q1.adjoint();
    let omega = cfg.probe.omega0;
    let mut written = Vec::new();
    let mut t = Table::new(&[
        "kind",
        "h",
        "nx",
        "nt",
        "remainder_norm",
        "residual_norm",
        "flagged",
        "fixed_point_iterations",
        "fixed_point_distance",
    ]);
    for (idx, &h) in cfg.probe.h.iter().enumerate() {
        for kind in [ProbeKind::Growing, ProbeKind::Decaying] {
            let (potential, zeta, amplitude) = match kind {
                ProbeKind::Growing => (&q1, [0.0; 3], cfg.k2()),
                ProbeKind::Decaying => (&adj, make_zeta(&omega, &cfg.probe.xi), cfg.k1()),
            };
            let req = ProbeRequest {
                kind,
                potential,
                h,
                omega,
                zeta,
                amplitude,
                pad: None,
            };
            let p = req.build(&grid)?;
            let (iters, dist) = if cfg.probe.fixed_point {
                let fp = req.fixed_point(&grid, 50, 1e-10)?;
                (fp.iterations.to_string(), num(fp.remainder.l2_distance(&p.remainder)?))
            } else {
                (na(), na())
            };
            let label = match kind {
                ProbeKind::Growing => "growing",
                ProbeKind::Decaying => "decaying",
            };
            ctx.archive(
                &format!("probe_{label}_{idx}.mwip"),
                &FieldArchive::from_field(&p.remainder),
                &mut written,
            )?;
            t.push(vec![
                label.into(),
                num(h),
                grid.nx().to_string(),
                grid.nt().to_string(),
                num(p.remainder_norm()),
                num(p.residual_norm),
                p.flagged.to_string(),
                iters,
                dist,
            ]);
        }
    }
    ctx.table("probe.csv", &t, &mut written)?;
    Ok(written)
}

pub const CARLEMAN_COLUMNS: [&str; 13] = [
    "seed",
    "q_preset",
    "h",
    "interior",
    "flux_plus",
    "final_velocity",
    "source",
    "final_value",
    "final_gradient",
    "flux_minus",
    "lhs",
    "rhs",
    "ratio",
];

fn carleman(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let cc = &cfg.carleman;
    let m = cfg.potential.m;
    let grid = Grid::with_min_steps(cfg.grid.n, cc.nx, cc.t_final).map_err(|e| CliError::Config(format!("carleman grid: {e}")))?;
    let presets: Vec<(String, Preset)> = cc
        .presets
        .iter()
        .map(|s| Ok((s.clone(), s.parse()?)))
        .collect::<CliResult<_>>()?;
    let potentials = presets
        .iter()
        .map(|(_, p)| p.build(m, &grid, &cfg.base_dir))
        .collect::<CliResult<Vec<_>>>()?;
    let seeds: Vec<u64> = (0..cc.seeds).map(|s| cfg.seed.wrapping_add(s)).collect();
    let jobs: Vec<(usize, u64)> = (0..presets.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let reports = jobs
        .par_iter()
        .map(|&(p, s)| {
            let u = admissible_test_field(s, &grid, m);
            CarlemanReport::sweep(&u, &potentials[p], cc.omega, &cc.h)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&CARLEMAN_COLUMNS);
    for ((p, s), rep) in jobs.iter().zip(&reports) {
        for r in &rep.records {
            let x = &r.terms;
            t.push(vec![
                s.to_string(),
                presets[*p].0.clone(),
                num(r.h),
                num(x.interior),
                num(x.flux_plus),
                num(x.final_velocity),
                num(x.source),
                num(x.final_value),
                num(x.final_gradient),
                num(x.flux_minus),
                num(x.lhs()),
                num(x.rhs()),
                num(r.ratio),
            ]);
        }
    }
    let mut written = Vec::new();
    ctx.table("carleman.csv", &t, &mut written)?;

    let mut audit = Table::new(&["seed", "h", "nx", "p2_residual", "p1p2_residual"]);
    let grids = cc
        .audit_nx
        .iter()
        .map(|&nx| Grid::with_min_steps(cfg.grid.n, nx, cc.t_final))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(format!("carleman audit grid: {e}")))?;
    let grids = &grids;
    let audit_jobs: Vec<(u64, f64, &Grid)> = seeds
        .iter()
        .flat_map(|&s| cc.h.iter().flat_map(move |&h| grids.iter().map(move |g| (s, h, g))))
        .collect();
    let rows = audit_jobs
        .par_iter()
        .map(|&(s, h, g)| {
            let u = admissible_test_field(s, g, m);
            Ok(vec![
                s.to_string(),
                num(h),
                g.nx().to_string(),
                num(check_p2_identity(&u, h, cc.omega)?),
                num(check_p1p2_boundary_identity(&u, h, cc.omega)?),
            ])
        })
        .collect::<Result<Vec<_>, mwip_core::MwipError>>()?;
    rows.into_iter().for_each(|r| audit.push(r));
    ctx.table("carleman_audit.csv", &audit, &mut written)?;
    Ok(written)
}

fn identity_probes(cfg: &ExperimentConfig) -> IdentityProbes {
    IdentityProbes {
        omega: cfg.probe.omega0,
        zeta: make_zeta(&cfg.probe.omega0, &cfg.probe.xi),
        k1: cfg.k1(),
        k2: cfg.k2(),
    }
}

pub const IDENTITY_COLUMNS: [&str; 19] = [
    "h",
    "nx",
    "nt",
    "lhs_re",
    "lhs_im",
    "final_velocity_re",
    "final_velocity_im",
    "final_value_re",
    "final_value_im",
    "unmeasured_re",
    "unmeasured_im",
    "measured_re",
    "measured_im",
    "gap",
    "relative_gap",
    "scale",
    "target_re",
    "target_im",
    "target_error",
];

fn identity_row(grid: &Grid, r: &IdentityReport) -> Vec<String> {
    let c = |z: C64| [num(z.re), num(z.im)];
    let mut row = vec![num(r.h), grid.nx().to_string(), grid.nt().to_string()];
    for z in [r.lhs, r.rhs_final, r.rhs_final_value, r.rhs_lateral, r.rhs_measured] {
        row.extend(c(z));
    }
    row.extend([num(r.gap), num(r.relative_gap), num(r.max_intermediate)]);
    row.extend(c(r.fourier_target));
    row.push(num((r.lhs - r.fourier_target).norm()));
    row
}

fn identity(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let grid = cfg.base_grid()?;
    let (q1, q2) = cfg.potentials(&grid)?;
    let partition = cfg.partition(&grid)?;
    let probes = identity_probes(cfg);
    let mut t = Table::new(&IDENTITY_COLUMNS);
    for &h in &cfg.probe.h {
        let r = evaluate_identity(&grid, &q1, &q2, h, &probes, &partition)?;
        t.push(identity_row(&grid, &r));
    }
    let mut written = Vec::new();
    ctx.table("identity.csv", &t, &mut written)?;
    Ok(written)
}

fn sweep_runs(cfg: &ExperimentConfig) -> CliResult<Vec<(f64, Grid, BoundaryPartition)>> {
    cfg.sweep
        .h
        .iter()
        .map(|&h| {
            let g = cfg.sweep_grid(h)?;
            let p = cfg.partition(&g)?;
            Ok((h, g, p))
        })
        .collect()
}

fn sweep(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let runs = sweep_runs(cfg)?;
    let mut written = Vec::new();
    if runs.is_empty() {
        ctx.table("decay.csv", &Table::new(&["h", "nx", "final_term", "lateral_term", "target_error", "relative_gap"]), &mut written)?;
        return Ok(written);
    }
    // Potentials with a support box are tied to the grid they were checked on;
    // the finest grid has the strictest margin.
    let finest = runs.iter().map(|r| r.1).max_by_key(|g| g.nx()).expect("nonempty");
    let (q1, q2) = cfg.potentials(&finest)?;
    let decay = remainder_decay_sweep(&q1, &q2, &identity_probes(cfg), &runs)?;
    let mut t = Table::new(&["h", "nx", "final_term", "lateral_term", "target_error", "relative_gap"]);
    for r in &decay.rows {
        t.push(vec![
            num(r.h),
            r.nx.to_string(),
            num(r.final_term),
            num(r.lateral_term),
            num(r.target_error),
            num(r.report.relative_gap),
        ]);
    }
    ctx.table("decay.csv", &t, &mut written)?;
    let mut s = Table::new(&["quantity", "loglog_slope", "worst_step"]);
    s.push(vec!["decay".into(), na(), num(decay.worst_step())]);
    s.push(vec!["final_term".into(), num(decay.final_slope), na()]);
    s.push(vec!["lateral_term".into(), num(decay.lateral_slope), na()]);
    ctx.table("decay_summary.csv", &s, &mut written)?;

    let mut rs = Table::new(&["kind", "h", "nx", "remainder_norm"]);
    let pairs: Vec<(f64, Grid)> = runs.iter().map(|r| (r.0, r.1)).collect();
    let probes = identity_probes(cfg);
    let adj = q1.adjoint();
    for (kind, q, zeta, k) in [
        (ProbeKind::Growing, &q2, [0.0; 3], &probes.k2),
        (ProbeKind::Decaying, &adj, probes.zeta, &probes.k1),
    ] {
        let sw = remainder_norm_sweep(kind, q, probes.omega, zeta, k, &pairs)?;
        let label = if kind == ProbeKind::Growing { "growing" } else { "decaying" };
        for (h, nx, norm) in sw.rows {
            rs.push(vec![label.into(), num(h), nx.to_string(), num(norm)]);
        }
    }
    ctx.table("remainder_sweep.csv", &rs, &mut written)?;
    Ok(written)
}

pub fn cone_points(cfg: &ExperimentConfig) -> Vec<ConePoint> {
    let n = cfg.grid.n;
    let omegas = cap_directions(n, cfg.probe.omega0, cfg.probe.epsilon, cfg.cone.directions);
    cone_frequencies(&omegas, &xi_grid(n, cfg.cone.xi_max, cfg.cone.per_axis))
}

fn zeta_cmp(a: &[f64; 3], b: &[f64; 3]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

pub fn sample_table(results: &[ReconstructionResult], partial: bool) -> Table {
    let mut cols = vec![
        "h", "mode", "i", "j", "omega_x", "omega_y", "zeta_t", "zeta_x", "zeta_y", "re", "im", "oracle_re", "oracle_im",
        "abs_err",
    ];
    if partial {
        cols.extend(["partial_re", "partial_im", "partial_abs_err"]);
    }
    cols.extend(["flagged", "failure"]);
    let mut t = Table::new(&cols);
    for r in results {
        let mut samples: Vec<_> = r.samples.iter().collect();
        samples.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)).then_with(|| zeta_cmp(&a.zeta, &b.zeta)));
        for s in samples {
            let est = |v: Option<C64>| match v {
                Some(z) => [num(z.re), num(z.im), num((z - s.oracle).norm())],
                None => [na(), na(), na()],
            };
            let [re, im, err] = est(s.estimate);
            let mut row = vec![
                num(r.h),
                r.mode.name().into(),
                s.i.to_string(),
                s.j.to_string(),
                num(s.omega[0]),
                num(s.omega[1]),
                num(s.zeta[0]),
                num(s.zeta[1]),
                num(s.zeta[2]),
                re,
                im,
                num(s.oracle.re),
                num(s.oracle.im),
                err,
            ];
            if partial {
                row.extend(est(s.partial));
            }
            row.push(s.probe_flagged.to_string());
            row.push(s.failure.clone().unwrap_or_default());
            t.push(row);
        }
    }
    t
}

fn reconstruct(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let grid = cfg.base_grid()?;
    let (q1, q2) = cfg.potentials(&grid)?;
    let partition = cfg.partition(&grid)?;
    let points = cone_points(cfg);
    let mode = if cfg.modes.blind { ProbeMode::Blind } else { ProbeMode::Oracle };
    let mut results = Vec::new();
    for &h in &cfg.probe.h {
        let r = recover_fourier_samples(&grid, &q1, &q2, &points, h, mode, &partition).map_err(|e| match e {
            mwip_core::MwipError::MissingSupport(s) => CliError::Config(format!("reconstruct: {s}")),
            other => other.into(),
        })?;
        results.push(r);
    }
    let mut written = Vec::new();
    ctx.table("reconstruct_samples.csv", &sample_table(&results, cfg.modes.partial), &mut written)?;

    let m = cfg.potential.m;
    let mut errs = Table::new(&["h", "mode", "i", "j", "rel_error", "partial_rel_error", "zero_tolerance"]);
    for r in &results {
        for i in 0..m {
            for j in 0..m {
                errs.push(vec![
                    num(r.h),
                    r.mode.name().into(),
                    i.to_string(),
                    j.to_string(),
                    num(r.entry_errors[i][j]),
                    num(r.partial_entry_errors[i][j]),
                    num(r.zero_tolerance),
                ]);
            }
        }
    }
    ctx.table("reconstruct_errors.csv", &errs, &mut written)?;

    if cfg.modes.filtered {
        let n = grid.n();
        let per_axis = cfg.cone.per_axis.max(2);
        let half = if n == 1 { cfg.cone.xi_max } else { cfg.cone.xi_max / 2f64.sqrt() };
        let step = 2.0 * half / (per_axis - 1) as f64;
        let t_mid = 0.5 * grid.t_final();
        let at: Vec<(f64, [f64; 2])> = (0..grid.nodes()).map(|p| (t_mid, grid.coord(p))).collect();
        for (k, r) in results.iter().enumerate() {
            let mut values = vec![C64::new(0.0, 0.0); grid.nodes() * m * m];
            for i in 0..m {
                for j in 0..m {
                    let v = filtered_inverse(r, i, j, n, step, &at);
                    for (p, z) in v.into_iter().enumerate() {
                        values[p * m * m + i * m + j] = z;
                    }
                }
            }
            let a = FieldArchive::derived_level(&grid, m * m, values)?;
            ctx.archive(&format!("filtered_{k}.mwip"), &a, &mut written)?;
        }
    }
    Ok(written)
}

fn read_if(path: &Path) -> CliResult<Option<Table>> {
    if path.is_file() {
        Table::read(path).map(Some)
    } else {
        Ok(None)
    }
}

/// Aggregates earlier outputs in the directory into plot-ready tables.
fn report(ctx: &Context) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    let decay = read_if(&ctx.path("decay.csv"))?;
    let samples = read_if(&ctx.path("reconstruct_errors.csv"))?;
    if decay.is_none() && samples.is_none() {
        return Err(CliError::Config(format!(
            "nothing to report in {}: run sweep or reconstruct first",
            ctx.out.display()
        )));
    }
    if let Some(d) = decay {
        let mut t = Table::new(&["h", "log_h", "term", "magnitude", "log_magnitude"]);
        let (h, f, l) = (d.floats("h"), d.floats("final_term"), d.floats("lateral_term"));
        for (term, vals) in [("final_velocity", &f), ("unmeasured_lateral", &l)] {
            for (h, v) in h.iter().zip(vals.iter()) {
                t.push(vec![num(*h), num(h.ln()), term.into(), num(*v), num(v.ln())]);
            }
        }
        ctx.table("report_decay_curves.csv", &t, &mut written)?;
    }
    if let Some(e) = samples {
        let col = |name: &str| e.column(name).expect("errors table column");
        let (ci, cj, ch, cm, ce, cp) = (col("i"), col("j"), col("h"), col("mode"), col("rel_error"), col("partial_rel_error"));
        let mut rows: Vec<Vec<String>> = e
            .rows
            .iter()
            .map(|r| vec![r[ci].clone(), r[cj].clone(), r[cm].clone(), r[ch].clone(), r[ce].clone(), r[cp].clone()])
            .collect();
        rows.sort_by(|a, b| {
            (a[0].as_str(), a[1].as_str(), a[2].as_str())
                .cmp(&(b[0].as_str(), b[1].as_str(), b[2].as_str()))
                .then_with(|| b[3].parse::<f64>().unwrap_or(0.0).total_cmp(&a[3].parse::<f64>().unwrap_or(0.0)))
        });
        let mut t = Table::new(&["i", "j", "mode", "h", "rel_error", "partial_rel_error"]);
        rows.into_iter().for_each(|r| t.push(r));
        ctx.table("report_error_vs_h.csv", &t, &mut written)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests;
