use std::sync::Arc;

use super::*;
use crate::geometry::DEFAULT_EPSILON;
use crate::potential::Entry;
use crate::probes::phase;
use crate::solver::{solve_ibvp, IbvpData, Representation};

const OMEGA: [f64; 2] = [1.0, 0.0];

fn grid(nx: usize) -> Grid {
    Grid::with_min_steps(2, nx, 2.0).unwrap()
}

fn bump_entry(a: C64) -> Entry {
    Entry::SeparableBump {
        amplitude: a,
        center: [0.5, 0.5, 0.5],
        half_width: [0.25, 0.3, 0.3],
    }
}

fn single_bump(i: usize, j: usize, a: f64) -> MatrixPotential {
    MatrixPotential::single(2, i, j, bump_entry(C64::new(a, 0.0))).unwrap()
}

fn probes(xi: [f64; 2], k1: [C64; 2], k2: [C64; 2]) -> IdentityProbes {
    IdentityProbes {
        omega: OMEGA,
        zeta: crate::probes::make_zeta(&OMEGA, &xi),
        k1: k1.to_vec(),
        k2: k2.to_vec(),
    }
}

fn e(i: usize) -> [C64; 2] {
    let mut v = [C64::new(0.0, 0.0); 2];
    v[i] = C64::new(1.0, 0.0);
    v
}

fn partition(g: &Grid) -> BoundaryPartition {
    BoundaryPartition::new(g, OMEGA, DEFAULT_EPSILON).unwrap()
}

#[test]
fn equal_potentials_give_a_vanishing_identity() {
    let g = grid(17);
    let q = single_bump(0, 1, 3.0);
    let gp = make_growing_probe(&g, &q, 0.5, OMEGA, &e(1)).unwrap();
    assert_eq!(difference_field(&q, &q, &gp).unwrap().max_abs(), 0.0);
    let r = evaluate_identity(&g, &q, &q, 0.5, &probes([1.0, 0.0], e(0), e(1)), &partition(&g)).unwrap();
    assert_eq!(r.lhs, C64::new(0.0, 0.0));
    assert_eq!(r.rhs_total(), C64::new(0.0, 0.0));
    assert_eq!(r.relative_gap, 0.0);
}

#[test]
fn difference_field_is_linear_in_the_amplitude() {
    let g = grid(17);
    let q1 = single_bump(1, 0, 2.0);
    let q2 = MatrixPotential::zero(2);
    let k = [C64::new(0.3, 0.1), C64::new(-1.0, 0.5)];
    let lam = C64::new(0.0, 2.5);
    let a = difference_field(&q1, &q2, &make_growing_probe(&g, &q2, 0.5, OMEGA, &k).unwrap()).unwrap();
    let b = difference_field(&q1, &q2, &make_growing_probe(&g, &q2, 0.5, OMEGA, &k.map(|v| lam * v)).unwrap())
        .unwrap();
    assert!(a.scaled(lam).l2_distance(&b).unwrap() <= 1e-10 * b.l2_norm());
}

#[test]
fn difference_field_matches_a_physical_solve() {
    let h = 0.5;
    let q1 = single_bump(0, 0, 4.0);
    let q2 = MatrixPotential::zero(2);
    let k2 = e(0);
    let errs: Vec<f64> = [17, 33]
        .iter()
        .map(|&nx| {
            let g = grid(nx);
            let u2 = move |t: f64, x: &[f64], out: &mut [C64]| {
                let w = (phase(&OMEGA, t, x) / h).exp();
                out.iter_mut().zip(&k2).for_each(|(o, k)| *o = w * k);
            };
            let u2t = move |t: f64, x: &[f64], out: &mut [C64]| {
                u2(t, x, out);
                out.iter_mut().for_each(|v| *v /= h);
            };
            let data = IbvpData::from_solution(2, Arc::new(u2), Arc::new(u2t));
            let u1 = solve_ibvp(&g, &q1, &data).unwrap();
            let exact = WaveField::from_fn(&g, 2, Representation::Physical, u2);
            let phys = u1.add_scaled(C64::new(-1.0, 0.0), &exact).unwrap();
            let gp = make_growing_probe(&g, &q2, h, OMEGA, &k2).unwrap();
            let conj = difference_field(&q1, &q2, &gp).unwrap().to_physical().unwrap();
            conj.l2_distance(&phys).unwrap() / phys.l2_norm()
        })
        .collect();
    assert!(errs[0] < 0.1, "{errs:?}");
    assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
}

#[test]
fn identity_closes_and_improves_under_refinement() {
    let q1 = single_bump(0, 1, 2.0);
    let q2 = MatrixPotential::zero(2);
    let p = probes([1.0, -0.5], e(0), e(1));
    let gaps: Vec<f64> = [17, 33]
        .iter()
        .map(|&nx| {
            let g = grid(nx);
            let r = evaluate_identity(&g, &q1, &q2, 0.5, &p, &partition(&g)).unwrap();
            assert!(r.max_intermediate < 1e6);
            assert!(r.lhs.norm() > 0.0);
            r.relative_gap
        })
        .collect();
    assert!(gaps[0] < 0.1, "{gaps:?}");
    assert!(gaps[1] < gaps[0], "{gaps:?}");
}

#[test]
fn identity_is_sesquilinear_in_the_amplitudes() {
    let g = grid(17);
    let q1 = MatrixPotential::new(
        2,
        vec![bump_entry(C64::new(1.0, 0.0)), bump_entry(C64::new(0.0, 1.0)), Entry::Zero, bump_entry(C64::new(2.0, 0.0))],
    )
    .unwrap();
    let q2 = MatrixPotential::zero(2);
    let part = partition(&g);
    let k1 = [C64::new(1.0, 0.0), C64::new(0.5, 0.5)];
    let k2 = [C64::new(0.0, 1.0), C64::new(1.0, 0.0)];
    let base = evaluate_identity(&g, &q1, &q2, 0.5, &probes([0.5, 0.5], k1, k2), &part).unwrap();
    for lam in [C64::new(2.0, 0.0), C64::new(0.0, 1.0)] {
        let r2 = evaluate_identity(&g, &q1, &q2, 0.5, &probes([0.5, 0.5], k1, k2.map(|v| lam * v)), &part).unwrap();
        assert!((r2.lhs - lam * base.lhs).norm() <= 1e-10 * base.lhs.norm());
        assert!((r2.rhs_total() - lam * base.rhs_total()).norm() <= 1e-10 * base.lhs.norm());
        let r1 = evaluate_identity(&g, &q1, &q2, 0.5, &probes([0.5, 0.5], k1.map(|v| lam * v), k2), &part).unwrap();
        assert!((r1.lhs - lam.conj() * base.lhs).norm() <= 1e-10 * base.lhs.norm());
        assert!((r1.fourier_target - lam.conj() * base.fourier_target).norm() <= 1e-10 * base.fourier_target.norm());
    }
}

#[test]
fn unmeasured_terms_shrink_with_h() {
    let q1 = single_bump(0, 0, 2.0);
    let q2 = MatrixPotential::zero(2);
    let p = probes([0.5, 0.0], e(0), e(0));
    let runs: Vec<(f64, Grid, BoundaryPartition)> = [(0.5, 17), (0.25, 33)]
        .iter()
        .map(|&(h, nx)| {
            let g = grid(nx);
            let part = partition(&g);
            (h, g, part)
        })
        .collect();
    let sweep = remainder_decay_sweep(&q1, &q2, &p, &runs).unwrap();
    assert!(sweep.worst_step() <= 0.9, "{sweep:?}");
    assert!(sweep.rows[1].target_error < sweep.rows[0].target_error, "{sweep:?}");

    let same = remainder_decay_sweep(&q1, &q1, &p, &runs[..1]).unwrap();
    assert_eq!(same.rows[0].final_term, 0.0);
    assert_eq!(same.rows[0].lateral_term, 0.0);
}

#[test]
fn lateral_split_follows_the_partition() {
    let g = grid(17);
    let part = partition(&g);
    let unmeasured = part.unmeasured();
    for (bp, &u) in part.points().iter().zip(&unmeasured) {
        if u {
            assert!(bp.normal[0] * OMEGA[0] + bp.normal[1] * OMEGA[1] > DEFAULT_EPSILON);
        }
    }
    let other = partition(&grid(33));
    let q = single_bump(0, 0, 1.0);
    let zero = MatrixPotential::zero(2);
    assert!(evaluate_identity(&g, &q, &zero, 0.5, &probes([0.0, 0.0], e(0), e(0)), &other).is_err());
}
