//! The acceptance suite: ten criteria with their thresholds and runtime
//! budgets. Used by `--check` and by the `acceptance` test target.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use mwip_core::carleman::{admissible_test_field, check_p1p2_boundary_identity, check_p2_identity, CarlemanReport};
use mwip_core::geometry::{BoundaryPartition, Grid, DEFAULT_EPSILON};
use mwip_core::identity::{evaluate_identity, remainder_decay_sweep, IdentityProbes};
use mwip_core::potential::{Entry, MatrixPotential, SupportBox};
use mwip_core::probes::{make_zeta, remainder_norm_sweep, ProbeKind, ProbeRequest};
use mwip_core::reconstruct::{
    blind_vs_oracle_gap, cone_frequencies, recover_fourier_samples, uniqueness_smoke_test, xi_grid, ConePoint,
    ProbeMode, Verdict,
};
use mwip_core::solver::{potential_source, solve_ibvp, solve_ibvp_with_source, IbvpData, Representation, WaveField};
use mwip_core::C64;

use crate::archive::FieldArchive;
use crate::commands::{self, Command, Context};
use crate::config::{ExperimentConfig, PotentialSpec};
use crate::csvout::{num, parse_num};
use crate::experiments::{case, observed_order, run_case};

type Check = Result<(bool, String), String>;

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub budget: Duration,
    check: fn() -> Check,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Outcome {
    pub fn label(&self) -> String {
        format!("criterion {} ({})", self.id, self.name)
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {} [{:.1} s of {} s] {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )
    }
}

impl Criterion {
    pub fn run(&self) -> Outcome {
        let start = Instant::now();
        let result = (self.check)();
        let elapsed = start.elapsed();
        let (ok, mut detail) = match result {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= self.budget;
        if !in_time {
            detail.push_str("; over the runtime budget");
        }
        Outcome {
            id: self.id,
            name: self.name,
            pass: ok && in_time,
            detail,
            elapsed,
            budget: self.budget,
        }
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "forward-solver MMS convergence", budget: secs(30), check: mms },
        Criterion { id: 2, name: "energy-estimate audit", budget: secs(60), check: energy },
        Criterion { id: 3, name: "superposition decomposition", budget: secs(30), check: superposition },
        Criterion { id: 4, name: "Carleman sweep and IBP audits", budget: secs(180), check: carleman },
        Criterion { id: 5, name: "GO probes", budget: secs(120), check: probes },
        Criterion { id: 6, name: "integral identity", budget: secs(120), check: identity },
        Criterion { id: 7, name: "remainder decay", budget: secs(180), check: decay },
        Criterion { id: 8, name: "Fourier recovery", budget: secs(300), check: recovery },
        Criterion { id: 9, name: "uniqueness smoke test", budget: secs(120), check: uniqueness },
        Criterion { id: 10, name: "infrastructure", budget: secs(30), check: infrastructure },
    ]
}

/// Criteria exercised by one subcommand's `--check`.
pub fn ids_for(cmd: Command) -> &'static [u8] {
    match cmd {
        Command::Simulate => &[1, 2, 3],
        Command::Carleman => &[4],
        Command::Probe => &[5],
        Command::Identity => &[6],
        Command::Sweep => &[7],
        Command::Reconstruct => &[8, 9],
        Command::Report => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
    }
}

/// Runs the criteria for `cmd` in order, printing one line per criterion.
pub fn run_for(cmd: Command) -> Vec<Outcome> {
    let ids = ids_for(cmd);
    criteria()
        .iter()
        .filter(|c| ids.contains(&c.id))
        .map(|c| {
            let o = c.run();
            println!("{}", o.line());
            o
        })
        .collect()
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Coupled potential with constant and bump entries, used by the forward checks.
fn coupled() -> MatrixPotential {
    let bump = |a: f64, center: [f64; 3]| Entry::SeparableBump {
        amplitude: c(a),
        center,
        half_width: [0.4, 0.3, 0.3],
    };
    MatrixPotential::new(
        2,
        vec![
            bump(3.0, [0.5, 0.5, 0.5]),
            Entry::Constant(c(0.5)),
            Entry::Constant(c(-0.25)),
            bump(-2.0, [0.4, 0.4, 0.6]),
        ],
    )
    .expect("2x2")
}

fn mms() -> Check {
    let q = coupled();
    let cs = case("mms", 2).expect("preset");
    let coarse = Grid::with_min_steps(2, 65, 1.0).map_err(err)?;
    let fine = coarse.refined().map_err(err)?;
    let e0 = run_case(&coarse, &q, &cs).map_err(err)?.error.expect("closed form");
    let e1 = run_case(&fine, &q, &cs).map_err(err)?.error.expect("closed form");
    let order = observed_order(e0, e1);
    Ok((order >= 1.9, format!("max error {e0:.3e} -> {e1:.3e}, order {order:.3} (need >= 1.9)")))
}

fn energy() -> Check {
    let q = coupled();
    let g0 = Grid::with_min_steps(2, 17, 1.0).map_err(err)?;
    let grids = [g0, g0.refined().map_err(err)?, g0.refined().and_then(|g| g.refined()).map_err(err)?];
    let mut worst: f64 = 1.0;
    let mut parts = Vec::new();
    for name in ["standing", "velocity", "plane", "boundary", "mixed"] {
        let cs = case(name, 2).expect("preset");
        let ratios = grids
            .iter()
            .map(|g| run_case(g, &q, &cs).map(|r| r.energy.ratio))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
        if !(lo > 0.0 && hi.is_finite()) {
            return Ok((false, format!("{name}: ratios {ratios:?}")));
        }
        worst = worst.max(hi / lo);
        parts.push(format!("{name} {:.3}/{:.3}/{:.3}", ratios[0], ratios[1], ratios[2]));
    }
    Ok((worst <= 1.2, format!("{}; worst spread {worst:.4} (need <= 1.2)", parts.join(", "))))
}

fn superposition() -> Check {
    let g = Grid::with_min_steps(2, 65, 1.0).map_err(err)?;
    let q = coupled();
    let d = case("mixed", 2).expect("preset").data;
    let u = solve_ibvp(&g, &q, &d).map_err(err)?;
    let v = solve_ibvp(&g, &MatrixPotential::zero(2), &d).map_err(err)?;
    let src = potential_source(&q, &v, c(-1.0)).map_err(err)?;
    let w = solve_ibvp_with_source(&g, &q, &IbvpData::zero(2), Some(&src)).map_err(err)?;
    let gap = u.l2_distance(&v.add_scaled(c(1.0), &w).map_err(err)?).map_err(err)?;
    let bound = 5.0 * g.dx() * g.dx() * u.l2_norm();
    Ok((gap <= bound, format!("L2 gap {gap:.3e}, bound {bound:.3e}")))
}

fn carleman() -> Check {
    const OMEGA: [f64; 2] = [0.6, 0.8];
    let g = Grid::with_min_steps(2, 41, 1.0).map_err(err)?;
    let bump = |a: f64| Entry::SeparableBump {
        amplitude: c(a),
        center: [0.5, 0.5, 0.5],
        half_width: [0.4, 0.35, 0.35],
    };
    let presets = [
        ("zero", MatrixPotential::zero(2)),
        ("constant", MatrixPotential::constant(2, &[c(1.0), c(0.5), c(0.0), c(-1.0)]).map_err(err)?),
        ("bump", MatrixPotential::new(2, vec![bump(1.0), bump(0.5), Entry::Zero, bump(-1.0)]).map_err(err)?),
    ];
    let hs = [0.4, 0.2, 0.1];
    let mut worst_growth: f64 = 0.0;
    let mut fields = 0;
    for seed in 0..20 {
        let u = admissible_test_field(seed, &g, 2);
        for (name, q) in &presets {
            let rep = CarlemanReport::sweep(&u, q, OMEGA, &hs).map_err(err)?;
            if !rep.all_finite() || rep.records.iter().any(|r| !(r.ratio > 0.0)) {
                return Ok((false, format!("seed {seed}, {name}: non-finite or non-positive ratio")));
            }
            worst_growth = worst_growth.max(rep.worst_growth());
            fields += 1;
        }
    }
    // Audit residuals on a refinement chain; the sweep's residual is the
    // worst one over its fields.
    let g17 = Grid::with_min_steps(2, 17, 1.0).map_err(err)?;
    let g33 = g17.refined().map_err(err)?;
    let chain = [g17, g33, g33.refined().map_err(err)?];
    let mut p2 = [[0.0f64; 3]; 20];
    let mut p1p2 = [[0.0f64; 3]; 20];
    for seed in 0..20 {
        for (r, g) in chain.iter().enumerate() {
            let u = admissible_test_field(seed as u64, g, 2);
            for &h in &hs {
                p2[seed][r] = p2[seed][r].max(check_p2_identity(&u, h, OMEGA).map_err(err)?);
                p1p2[seed][r] = p1p2[seed][r].max(check_p1p2_boundary_identity(&u, h, OMEGA).map_err(err)?);
            }
        }
    }
    let worst = |a: &[[f64; 3]; 20], r: usize| a.iter().fold(0.0f64, |m, s| m.max(s[r]));
    let p2_worst = (worst(&p2, 0) / worst(&p2, 1)).min(worst(&p2, 1) / worst(&p2, 2));
    let p1p2_ok = worst(&p1p2, 1) < worst(&p1p2, 0) && worst(&p1p2, 2) < worst(&p1p2, 1);
    let fields_p2 = p2.iter().filter(|s| s[0] >= 3.0 * s[1] && s[1] >= 3.0 * s[2]).count();
    let fields_p1p2 = p1p2.iter().filter(|s| s[1] < s[0] && s[2] < s[1]).count();
    let pass = worst_growth <= 1.5 && p2_worst >= 3.0 && p1p2_ok;
    Ok((
        pass,
        format!(
            "{fields} fields x 3 h; worst ratio(h/2)/ratio(h) {worst_growth:.3} (need <= 1.5); \
             worst P2 residual {:.2e}/{:.2e}/{:.2e} at nx 17/33/65, reduction >= {p2_worst:.2} (need >= 3); \
             worst P1P2 residual {:.2e}/{:.2e}/{:.2e}, decreasing: {p1p2_ok}; \
             per field: P2 {fields_p2}/20, P1P2 {fields_p1p2}/20",
            worst(&p2, 0),
            worst(&p2, 1),
            worst(&p2, 2),
            worst(&p1p2, 0),
            worst(&p1p2, 1),
            worst(&p1p2, 2)
        ),
    ))
}

fn probes() -> Check {
    let omega = [1.0, 0.0];
    let e = |a: f64| Entry::SeparableBump {
        amplitude: c(a),
        center: [1.0, 0.5, 0.5],
        half_width: [0.8, 0.35, 0.35],
    };
    let q = MatrixPotential::new(2, vec![e(1.0), e(2.0), Entry::Zero, e(-1.0)]).map_err(err)?;
    let adj = q.adjoint();
    let k = vec![c(1.0), C64::new(0.0, 1.0)];
    let zeta = make_zeta(&omega, &[1.0, -0.5]);
    let grid = |nx: usize| Grid::with_min_steps(2, nx, 2.0).map_err(err);
    let request = |kind: ProbeKind, h: f64| ProbeRequest {
        kind,
        potential: if kind == ProbeKind::Growing { &q } else { &adj },
        h,
        omega,
        zeta: if kind == ProbeKind::Growing { [0.0; 3] } else { zeta },
        amplitude: k.clone(),
        pad: None,
    };
    let mut min_factor = f64::INFINITY;
    let mut max_c: f64 = 0.0;
    for (h, nx) in [(0.5, 17), (0.25, 33)] {
        for kind in [ProbeKind::Growing, ProbeKind::Decaying] {
            let (g0, g1) = (grid(nx)?, grid(2 * nx - 1)?);
            let r0 = request(kind, h).build(&g0).map_err(err)?.residual_norm;
            let r1 = request(kind, h).build(&g1).map_err(err)?.residual_norm;
            min_factor = min_factor.min(r0 / r1);
            max_c = max_c.max(r0 * h * h / (g0.dx() * g0.dx())).max(r1 * h * h / (g1.dx() * g1.dx()));
        }
    }
    let runs: Vec<(f64, Grid)> = [(0.5, 17), (0.25, 33), (0.125, 65)]
        .iter()
        .map(|&(h, nx)| grid(nx).map(|g| (h, g)))
        .collect::<Result<_, _>>()?;
    let mut sweep_worst: f64 = 0.0;
    for kind in [ProbeKind::Growing, ProbeKind::Decaying] {
        let (pot, z) = if kind == ProbeKind::Growing { (&q, [0.0; 3]) } else { (&adj, zeta) };
        let s = remainder_norm_sweep(kind, pot, omega, z, &k, &runs).map_err(err)?;
        sweep_worst = sweep_worst.max(s.max_over_first);
    }
    let g = grid(33)?;
    let mut fp_gap: f64 = 0.0;
    for kind in [ProbeKind::Growing, ProbeKind::Decaying] {
        let req = request(kind, 0.5);
        let direct = req.build(&g).map_err(err)?;
        let fp = req.fixed_point(&g, 50, 1e-10).map_err(err)?;
        if !fp.converged {
            return Ok((false, format!("{kind:?} fixed point did not converge")));
        }
        fp_gap = fp_gap.max(fp.remainder.l2_distance(&direct.remainder).map_err(err)?);
    }
    let pass = min_factor >= 3.0 && sweep_worst <= 2.0 && fp_gap <= 1e-8;
    Ok((
        pass,
        format!(
            "residual reduction per dx halving >= {min_factor:.2} (need >= 3), C = residual h^2/dx^2 <= {max_c:.3e}; \
             remainder max/first {sweep_worst:.3} (need <= 2); fixed point vs direct {fp_gap:.2e} (need <= 1e-8)"
        ),
    ))
}

/// The single-entry bump used by the identity and recovery checks.
fn entry_bump(grid: &Grid, i: usize, j: usize, amplitude: f64) -> Result<MatrixPotential, String> {
    let e = Entry::SeparableBump {
        amplitude: c(amplitude),
        center: [0.5, 0.5, 0.5],
        half_width: [0.25, 0.3, 0.3],
    };
    let support = SupportBox {
        lower: [0.25, 0.2, 0.2],
        upper: [0.75, 0.8, 0.8],
    };
    MatrixPotential::single(2, i, j, e).and_then(|q| q.with_support(support, grid)).map_err(err)
}

const OMEGA0: [f64; 2] = [1.0, 0.0];

fn identity_probes() -> IdentityProbes {
    IdentityProbes {
        omega: OMEGA0,
        zeta: make_zeta(&OMEGA0, &[1.0, -0.5]),
        k1: vec![c(1.0), c(0.0)],
        k2: vec![c(0.0), c(1.0)],
    }
}

fn partition(g: &Grid) -> Result<BoundaryPartition, String> {
    BoundaryPartition::new(g, OMEGA0, DEFAULT_EPSILON).map_err(err)
}

fn identity() -> Check {
    let mut gaps = Vec::new();
    for nx in [65, 129] {
        let g = Grid::with_min_steps(2, nx, 2.0).map_err(err)?;
        let q1 = entry_bump(&g, 0, 1, 2.0)?;
        let r = evaluate_identity(&g, &q1, &MatrixPotential::zero(2), 0.25, &identity_probes(), &partition(&g)?)
            .map_err(err)?;
        gaps.push(r.relative_gap);
    }
    let pass = gaps[1] <= 1e-2 && gaps[1] < gaps[0];
    Ok((pass, format!("relative gap {:.3e} (65^2) -> {:.3e} (129^2), need <= 1e-2 and decreasing", gaps[0], gaps[1])))
}

fn decay() -> Check {
    let runs = [(0.5, 17), (0.25, 33), (0.125, 65)]
        .iter()
        .map(|&(h, nx)| {
            let g = Grid::with_min_steps(2, nx, 2.0).map_err(err)?;
            Ok((h, g, partition(&g)?))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let q1 = entry_bump(&runs[2].1, 0, 1, 2.0)?;
    let s = remainder_decay_sweep(&q1, &MatrixPotential::zero(2), &identity_probes(), &runs).map_err(err)?;
    let fin: Vec<String> = s.rows.iter().map(|r| format!("{:.2e}", r.final_term)).collect();
    let lat: Vec<String> = s.rows.iter().map(|r| format!("{:.2e}", r.lateral_term)).collect();
    let step = s.worst_step();
    let pass = step <= 0.9 && s.final_slope >= 0.8 && s.lateral_slope >= 0.8;
    Ok((
        pass,
        format!(
            "final term [{}], unmeasured lateral [{}]; worst step {step:.3} (need <= 0.9); slopes {:.2}, {:.2} (need >= 0.8)",
            fin.join(", "),
            lat.join(", "),
            s.final_slope,
            s.lateral_slope
        ),
    ))
}

fn recovery() -> Check {
    let g = Grid::with_min_steps(2, 129, 2.0).map_err(err)?;
    let q1 = entry_bump(&g, 0, 1, 2.0)?;
    let points = cone_frequencies(&[OMEGA0], &xi_grid(2, 2.0, 5));
    let r = recover_fourier_samples(&g, &q1, &MatrixPotential::zero(2), &points, 0.125, ProbeMode::Oracle, &partition(&g)?)
        .map_err(err)?;
    let e = r.max_entry_error();
    let failures = r.samples.iter().filter(|s| s.estimate.is_none()).count();

    // The time support is wide so that the decaying remainder reaches the
    // boundary while the difference field is still there; off-diagonal
    // entries never pair with the remainder, hence the diagonal entry.
    let g2 = Grid::with_min_steps(2, 65, 2.0).map_err(err)?;
    let wide = Entry::SeparableBump {
        amplitude: c(2.0),
        center: [1.0, 0.5, 0.5],
        half_width: [0.75, 0.3, 0.3],
    };
    let support = SupportBox {
        lower: [0.25, 0.2, 0.2],
        upper: [1.75, 0.8, 0.8],
    };
    let qd = MatrixPotential::single(2, 0, 0, wide).and_then(|q| q.with_support(support, &g2)).map_err(err)?;
    let runs = [0.5, 0.25, 0.125]
        .iter()
        .map(|&h| Ok((h, g2, partition(&g2)?)))
        .collect::<Result<Vec<_>, String>>()?;
    let point = ConePoint {
        omega: OMEGA0,
        zeta: make_zeta(&OMEGA0, &[0.5, 0.5]),
    };
    let gap = blind_vs_oracle_gap(&qd, &MatrixPotential::zero(2), point, &runs).map_err(err)?;
    let ratio = gap.worst_ratio();
    let gaps: Vec<String> = gap.rows.iter().map(|r| format!("{:.2e}", r.2)).collect();
    let pass = e <= 0.1 && failures == 0 && ratio <= 0.7 && gap.rows[0].2 > 0.0;
    Ok((
        pass,
        format!(
            "{} samples, max per-entry relative error {e:.4} (need <= 0.1); blind-oracle gaps [{}], worst ratio {ratio:.3} (need <= 0.7)",
            r.samples.len(),
            gaps.join(", ")
        ),
    ))
}

fn uniqueness() -> Check {
    let g = Grid::with_min_steps(2, 33, 2.0).map_err(err)?;
    let p = partition(&g)?;
    let points = cone_frequencies(&[OMEGA0], &xi_grid(2, 2.0, 5));
    let q = entry_bump(&g, 0, 0, 2.0)?;
    let same = uniqueness_smoke_test(&g, &q, &q, &points, 0.25, &p).map_err(err)?;
    let apart = uniqueness_smoke_test(&g, &MatrixPotential::zero(2), &entry_bump(&g, 0, 0, 0.1)?, &points, 0.25, &p)
        .map_err(err)?;
    let pass = same.verdict == Verdict::Consistent && apart.verdict == Verdict::Distinguished;
    Ok((
        pass,
        format!(
            "equal pair: {} (max sample {:.1e}, tolerance {:.1e}); 0.1-separated pair: {} (max sample {:.2e}, tolerance {:.1e})",
            same.verdict.describe(),
            same.max_sample,
            same.tolerance,
            apart.verdict.describe(),
            apart.max_sample,
            apart.tolerance
        ),
    ))
}

fn dir_bytes(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)?
        .map(|e| {
            let e = e?;
            Ok((e.file_name().to_string_lossy().into_owned(), fs::read(e.path())?))
        })
        .collect::<std::io::Result<_>>()?;
    files.sort();
    Ok(files)
}

fn infrastructure() -> Check {
    let g = Grid::with_min_steps(2, 17, 1.0).map_err(err)?;
    let u = WaveField::from_fn(&g, 2, Representation::Physical, |t, x, o| {
        o[0] = C64::new((7.0 * t + x[0]).sin() / 3.0, -0.0);
        o[1] = C64::new(f64::MIN_POSITIVE * x[1], (t * x[0]).exp());
    });
    let a = FieldArchive::from_field(&u);
    let mut bytes = Vec::new();
    a.write_to(&mut bytes).map_err(err)?;
    let back = FieldArchive::read_from(&mut bytes.as_slice()).map_err(err)?.to_field().map_err(err)?;
    let archive_ok = u
        .data()
        .iter()
        .zip(back.data())
        .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits());

    let csv_ok = (0u64..20_000)
        .map(|i| f64::from_bits(i.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
        .filter(|v| v.is_finite())
        .chain([0.1, -0.0, f64::MAX, f64::MIN_POSITIVE, 1.0 / 3.0])
        .all(|v| parse_num(&num(v)).map(f64::to_bits) == Some(v.to_bits()));

    let mut cfg = ExperimentConfig::default();
    cfg.seed = 11;
    cfg.grid.nx = 17;
    cfg.simulate.cases = vec!["zero".into(), "mms".into(), "mixed".into()];
    cfg.carleman.nx = 17;
    cfg.carleman.seeds = 3;
    cfg.carleman.audit_nx = vec![17];
    cfg.probe.h = vec![0.5];
    cfg.cone.per_axis = 3;
    cfg.potential.q1 = PotentialSpec::One("bump:0,1,2,0.5,0.5,0.5,0.25,0.3,0.3".into());
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut runs = Vec::new();
    for r in 0..2 {
        let ctx = Context::new(cfg.clone(), tmp.path().join(format!("run{r}"))).map_err(err)?;
        for cmd in [Command::Simulate, Command::Carleman, Command::Identity, Command::Reconstruct, Command::Report] {
            commands::run(cmd, &ctx).map_err(err)?;
        }
        runs.push(dir_bytes(&ctx.out).map_err(err)?);
    }
    let rerun_ok = runs[0] == runs[1] && !runs[0].is_empty();
    Ok((
        archive_ok && csv_ok && rerun_ok,
        format!(
            "archive bitwise round trip {archive_ok}; CSV 17-digit round trip {csv_ok}; rerun identical over {} files {rerun_ok}",
            runs[0].len()
        ),
    ))
}
