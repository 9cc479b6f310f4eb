use ergolab::bk::{circle_rotation_system, nonergodic_product_witness, uniform_measure};
use ergolab::groups::{folner_box, unit_phase, GroupKind};
use ergolab::heisenberg::{weak_mixing_mean, Grid};
use ergolab::invariant::{block_constructed_system, commutant_rank, find_invariant_subspaces};
use ergolab::linalg::c;
use ergolab::spaces::{build_odometer, koopman_of, System, SystemSpec};
use ergolab::spectral::{eigenvalue_set, multiplier_test, ErgodicityVerdict};
use ergolab::{Limits, C64};

fn lim() -> Limits {
    Limits::default()
}

/// Power sums `tr(Mᵏ)` of the (non-unitary) pointwise matrix. By Newton's
/// identities they pin down the characteristic polynomial.
fn trace_powers(bits: u32, p: f64) -> Vec<C64> {
    let (_, map) = build_odometer(bits, p).unwrap();
    let u = koopman_of(&map, &lim()).unwrap();
    let m = u.dense(&lim()).unwrap();
    let mut power = m.clone();
    let mut out = Vec::new();
    for _ in 0..(1usize << bits) {
        out.push(power.trace());
        power = &power * &m;
    }
    out
}

#[test]
fn odometer_eigenvalues_match_trace_oracle() {
    for p in [0.3, 0.5, 0.7] {
        // p₁ = … = p₁₅ = 0 and p₁₆ = 16 force χ(x) = x¹⁶ − 1
        let sums = trace_powers(4, p);
        for (k, s) in sums.iter().enumerate() {
            let want = if k == 15 { 16.0 } else { 0.0 };
            assert!((s - c(want)).norm() < 1e-9, "k={} {s}", k + 1);
        }
        let (_, map) = build_odometer(4, p).unwrap();
        let u = koopman_of(&map, &lim()).unwrap();
        let e = eigenvalue_set(&u, 1e-9, &lim()).unwrap();
        assert_eq!(e.entries.len(), 16);
        for k in 0..16 {
            let root = unit_phase(k as f64 / 16.0);
            assert_eq!(e.entries.iter().filter(|x| (x.eigenvalue - root).norm() < 1e-8).count(), 1);
        }
    }
}

#[test]
fn block_systems_match_construction() {
    let layouts: [&[usize]; 4] = [&[4, 4, 4, 4], &[1, 2, 3, 4, 5], &[7, 9], &[13, 3]];
    for (seed, sizes) in layouts.iter().enumerate() {
        let gens = block_constructed_system(sizes, 2, seed as u64 + 100, &lim()).unwrap();
        assert_eq!(commutant_rank(&gens, &lim()).unwrap(), sizes.len());
        let found = find_invariant_subspaces(&gens, 12, 1e-8, 7, &lim()).unwrap();
        let mut got: Vec<usize> = found.iter().map(|r| r.dim()).collect();
        let mut want: Vec<usize> = sizes.iter().copied().filter(|&d| d <= 12).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want, "layout {sizes:?}");
        for r in &found {
            for (res, defect) in r.residuals.iter().zip(&r.orthogonality_defects) {
                assert!(*res <= 1e-8);
                assert!(*defect <= 3.0 * res.max(1e-12) + 1e-10);
            }
        }
    }
}

#[test]
fn heisenberg_window_mean_matches_quadrature() {
    let grid = Grid::new(12.0, 0.01).unwrap();
    let f = grid.gaussian();
    let w = folner_box(GroupKind::Heisenberg, 4, 0.5).unwrap();
    let got = weak_mixing_mean(1.0, &grid, &f, &f, &w).unwrap();
    // discrete box average of e^{−a²/4} e^{−b²/4} over the same (a, b) nodes
    let nodes: Vec<f64> = (-8..=8).map(|j| j as f64 * 0.5).collect();
    let axis: f64 = nodes.iter().map(|a| (-a * a / 4.0).exp()).sum::<f64>() / nodes.len() as f64;
    assert!((got.mean - axis * axis).abs() < 1e-6, "{} vs {}", got.mean, axis * axis);
    assert!(got.max_boundary_loss < 1e-6);
}

#[test]
fn rotation_pair_verdicts_agree_with_fixed_vector_oracle() {
    let cases = [
        (0.2360679774997897, 0.4142135623730951, ErgodicityVerdict::Ergodic),
        (0.4142135623730951, 0.8284271247461903, ErgodicityVerdict::NotErgodic),
        (0.1, 0.3, ErgodicityVerdict::NotErgodic),
    ];
    for (a, b, expect) in cases {
        let t = System::build(&SystemSpec::Rotation { angles: vec![a] }, 8, &lim());
        let s = System::build(&SystemSpec::Rotation { angles: vec![b] }, 8, &lim());
        let (t, s) = (t.unwrap(), s.unwrap());
        match multiplier_test(&t, &s, 1e-9, &lim()) {
            Ok(r) => {
                assert_eq!(r.verdict, expect);
                assert!(r.oracle_agrees);
            }
            // rational angles are not ergodic at this resolution
            Err(ergolab::Error::Precondition(_)) => assert!((a * 10.0f64).fract() < 1e-12),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn circle_band_count() {
    let sys = circle_rotation_system(256).unwrap();
    let w = nonergodic_product_witness(&sys, &uniform_measure(&sys), 0.1).unwrap();
    // chord 2 sin(π/256) < 0.1/2.1 < 2 sin(2π/256): only index gaps −1, 0, 1
    let band = w
        .o_eps
        .iter()
        .all(|&(i, j)| matches!((i as i64 - j as i64).rem_euclid(256), 0 | 1 | 255));
    assert!(band);
    assert_eq!(w.o_eps.len(), 3 * 256);
    assert!((w.measure - 3.0 / 256.0).abs() < 1e-12);
}
