use super::*;
use crate::potential::Entry;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn grid2(nx: usize) -> Grid {
    Grid::with_min_steps(2, nx, 1.0).unwrap()
}

fn bump(amplitude: C64) -> Entry {
    Entry::SeparableBump {
        amplitude,
        center: [0.5, 0.5, 0.5],
        half_width: [0.35, 0.3, 0.3],
    }
}

fn coupled_bump() -> MatrixPotential {
    MatrixPotential::new(
        2,
        vec![
            bump(c(1.0, 0.5)),
            bump(c(0.0, 2.0)),
            bump(c(-0.5, 0.0)),
            Entry::Zero,
        ],
    )
    .unwrap()
}

const DIAG: [f64; 2] = [0.6, 0.8];

fn request<'a>(
    kind: ProbeKind,
    q: &'a MatrixPotential,
    h: f64,
    xi: &[f64],
    k: Vec<C64>,
) -> ProbeRequest<'a> {
    ProbeRequest {
        kind,
        potential: q,
        h,
        omega: DIAG,
        zeta: if kind == ProbeKind::Growing {
            [0.0; 3]
        } else {
            make_zeta(&DIAG, xi)
        },
        amplitude: k,
        pad: None,
    }
}

#[test]
fn phase_examples() {
    assert_eq!(phase(&[1.0, 0.0], 1.0, &[0.5, 0.2]), 1.5);
    assert_eq!(phase(&[0.0, 1.0], 0.0, &[0.0, 1.0]), 1.0);
}

#[test]
fn zeta_is_orthogonal_to_the_null_direction() {
    assert_eq!(make_zeta(&[1.0, 0.0], &[2.0, -3.0]), [2.0, 2.0, -3.0]);
    assert_eq!(make_zeta(&DIAG, &[0.0, 0.0]), [0.0; 3]);
    let z = make_zeta(&DIAG, &[1.3, -0.7]);
    assert!((z[0] - z[1] * DIAG[0] - z[2] * DIAG[1]).abs() <= 1e-15);
}

#[test]
fn free_probes_are_exact() {
    let g = grid2(33);
    let zero = MatrixPotential::zero(2);
    let d = make_decaying_probe(&g, &zero, 0.5, DIAG, [0.0; 3], &[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
    assert_eq!(d.remainder.max_abs(), 0.0);
    assert_eq!(d.residual_norm, 0.0);
    let gr = make_growing_probe(&g, &zero, 0.5, DIAG, &[c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
    assert_eq!(gr.remainder.max_abs(), 0.0);
    assert!(!gr.flagged);

    // ξ parallel to ω: |ζ_x|² = ζ_τ², so B is itself a free wave.
    let par = make_decaying_probe(&g, &zero, 0.5, DIAG, make_zeta(&DIAG, &[1.8, 2.4]), &[c(1.0, 0.0), c(0.0, 0.0)])
        .unwrap();
    assert_eq!(par.remainder.max_abs(), 0.0);
}

#[test]
fn zero_amplitude_gives_zero_probe() {
    let g = grid2(33);
    let q = coupled_bump();
    let p = make_decaying_probe(&g, &q, 0.5, DIAG, make_zeta(&DIAG, &[1.0, 0.0]), &[c(0.0, 0.0); 2]).unwrap();
    assert_eq!(p.remainder.max_abs(), 0.0);
    assert_eq!(p.residual_norm, 0.0);
    let mut b = vec![c(1.0, 1.0); g.nodes() * 2];
    p.total_level(3, &mut b);
    assert!(b.iter().all(|v| *v == c(0.0, 0.0)));
}

#[test]
fn amplitude_is_annihilated_by_transport() {
    let omega = DIAG;
    let zeta = make_zeta(&omega, &[1.2, -0.9]);
    let mut errs = Vec::new();
    for nx in [33, 65] {
        let g = grid2(nx);
        let p = ProbeRequest {
            kind: ProbeKind::Decaying,
            potential: &MatrixPotential::zero(1),
            h: 0.5,
            omega,
            zeta,
            amplitude: vec![c(1.0, 0.0)],
            pad: Some(0),
        };
        let probe = GoProbe {
            kind: p.kind,
            h: p.h,
            omega,
            zeta,
            amplitude: p.amplitude.clone(),
            remainder: WaveField::zeros(&g, 1, Representation::Physical),
            residual_norm: 0.0,
            flagged: false,
        };
        let mut levels = vec![vec![c(0.0, 0.0); g.nodes()]; 3];
        let k = g.nt() / 2;
        for (j, lvl) in levels.iter_mut().enumerate() {
            probe.amplitude_level(k + j - 1, lvl);
        }
        let mut worst = 0.0f64;
        for p in 0..g.nodes() {
            if g.is_boundary(p) {
                continue;
            }
            let bt = (levels[2][p] - levels[0][p]) / (2.0 * g.dt());
            let bx = (levels[1][p + 1] - levels[1][p - 1]) / (2.0 * g.dx());
            let by = (levels[1][p + nx] - levels[1][p - nx]) / (2.0 * g.dx());
            worst = worst.max((bt - omega[0] * bx - omega[1] * by).norm());
        }
        errs.push(worst);
    }
    assert!(errs[0] < 0.05, "{errs:?}");
    assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
}

#[test]
fn decaying_residual_converges_under_refinement() {
    let zero = MatrixPotential::zero(1);
    let res: Vec<f64> = [33, 65]
        .iter()
        .map(|&nx| {
            request(ProbeKind::Decaying, &zero, 0.25, &[1.5, -0.5], vec![c(1.0, 0.0)])
                .build(&grid2(nx))
                .unwrap()
                .residual_norm
        })
        .collect();
    assert!(res[1] <= 0.4 * res[0], "{res:?}");
    assert!(res[0] < RESIDUAL_FLAG);
}

#[test]
fn growing_residual_converges_under_refinement() {
    let q = MatrixPotential::constant(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
    let res: Vec<f64> = [33, 65]
        .iter()
        .map(|&nx| {
            make_growing_probe(&grid2(nx), &q, 0.25, DIAG, &[c(1.0, 0.0), c(0.0, -1.0)])
                .unwrap()
                .residual_norm
        })
        .collect();
    assert!(res[1] <= 0.4 * res[0], "{res:?}");
    assert!(res[0] < RESIDUAL_FLAG);
}

#[test]
fn decaying_probe_uses_the_adjoint_potential() {
    let g = grid2(33);
    let q = coupled_bump();
    let zeta = make_zeta(&DIAG, &[1.0, 0.5]);
    let k1 = [c(1.0, 0.0), c(0.5, -0.5)];
    let probe = make_decaying_probe(&g, &q, 0.5, DIAG, zeta, &k1).unwrap();
    let adj = q.adjoint();
    let direct = ProbeRequest {
        kind: ProbeKind::Decaying,
        potential: &adj,
        h: 0.5,
        omega: DIAG,
        zeta,
        amplitude: k1.to_vec(),
        pad: None,
    }
    .build(&g)
    .unwrap();
    assert_eq!(probe.remainder, direct.remainder);
    // Checked against the non-adjoint operator the residual is O(1).
    let wrong = residual_norm(
        &ProbeRequest {
            potential: &q,
            ..request(ProbeKind::Decaying, &q, 0.5, &[1.0, 0.5], k1.to_vec())
        },
        &g,
        &probe.remainder,
    )
    .unwrap();
    assert!(wrong > 10.0 * probe.residual_norm, "{wrong} vs {}", probe.residual_norm);
}

#[test]
fn fixed_point_matches_direct_solve() {
    let g = grid2(33);
    let q = coupled_bump();
    for kind in [ProbeKind::Growing, ProbeKind::Decaying] {
        let req = request(kind, &q, 0.5, &[1.0, -1.0], vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let direct = req.build(&g).unwrap();
        let fp = req.fixed_point(&g, 50, 1e-10).unwrap();
        assert!(fp.converged, "{kind:?} gap {}", fp.last_gap);
        let gap = fp.remainder.l2_distance(&direct.remainder).unwrap();
        assert!(gap <= 1e-8, "{kind:?}: {gap}");
    }
}

#[test]
fn remainder_norm_scales_with_h_like_a_bounded_family() {
    let q = coupled_bump();
    let runs: Vec<(f64, Grid)> = [(0.5, 17), (0.25, 33), (0.125, 65)]
        .iter()
        .map(|&(h, nx)| (h, grid2(nx)))
        .collect();
    let k = [c(1.0, 0.0), c(0.0, 0.0)];
    let zeta = make_zeta(&DIAG, &[1.0, 0.0]);
    let sweep = remainder_norm_sweep(ProbeKind::Decaying, &q.adjoint(), DIAG, zeta, &k, &runs).unwrap();
    assert!(sweep.max_over_first <= 2.0, "{sweep:?}");
    let (_, _, r1) = sweep.rows[1];
    let (_, _, r2) = sweep.rows[2];
    assert!((r2 / r1 - 1.0).abs() < 0.15, "{sweep:?}");

    let doubled: Vec<C64> = k.iter().map(|v| 2.0 * v).collect();
    let twice = remainder_norm_sweep(ProbeKind::Decaying, &q.adjoint(), DIAG, zeta, &doubled, &runs[..1]).unwrap();
    assert!((twice.rows[0].2 - 2.0 * sweep.rows[0].2).abs() <= 1e-12 * sweep.rows[0].2);

    let free = remainder_norm_sweep(
        ProbeKind::Growing,
        &MatrixPotential::zero(2),
        DIAG,
        [0.0; 3],
        &k,
        &runs[..2],
    )
    .unwrap();
    assert!(free.rows.iter().all(|r| r.2 == 0.0));
}

#[test]
fn invalid_requests_are_rejected() {
    let g = grid2(17);
    let q = MatrixPotential::zero(1);
    let bad_zeta = ProbeRequest {
        zeta: [1.0, 0.0, 0.0],
        ..request(ProbeKind::Decaying, &q, 0.5, &[0.0, 0.0], vec![c(1.0, 0.0)])
    };
    assert!(matches!(bad_zeta.build(&g), Err(MwipError::InvalidArgument(_))));
    let coarse = request(ProbeKind::Growing, &q, 0.25, &[], vec![c(1.0, 0.0)]);
    assert!(matches!(coarse.build(&g), Err(MwipError::Resolution { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn remainder_is_linear_in_the_amplitude(
        a in prop::array::uniform4(-2.0f64..2.0),
        b in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let g = grid2(17);
        let q = coupled_bump();
        let ka = vec![c(a[0], a[1]), c(a[2], a[3])];
        let kb = vec![c(b[0], b[1]), c(b[2], b[3])];
        let ksum: Vec<C64> = ka.iter().zip(&kb).map(|(x, y)| x + y).collect();
        let build = |k: Vec<C64>| request(ProbeKind::Decaying, &q, 0.5, &[0.7, 0.3], k).build(&g).unwrap();
        let (ra, rb, rs) = (build(ka), build(kb), build(ksum));
        let sum = ra.remainder.add_scaled(c(1.0, 0.0), &rb.remainder).unwrap();
        let gap = sum.l2_distance(&rs.remainder).unwrap();
        prop_assert!(gap <= 1e-12 * (1.0 + rs.remainder_norm()));
    }
}
