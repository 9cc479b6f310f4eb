use ergolab::bk::{circle_rotation_system, invariant_metric, nonergodic_product_witness, uniform_measure};
use ergolab::gaussian::{gaussian_covariance, sym_tensor_power, symmetric_dimension, UnitaryRep};
use ergolab::groups::{compose, folner_box, inverse, Character, GroupElement, GroupKind};
use ergolab::heisenberg::{heis_rep_l2, heis_rep_scalar, Grid};
use ergolab::linalg::{c, random_unitary, unitarity_defect, CMatrix, CVector};
use ergolab::spaces::{build_fourier_rotation, build_odometer, koopman_of, L2Vector};
use ergolab::spectral::{correlation_sequence, spectral_estimate};
use ergolab::{Limits, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lim() -> Limits {
    Limits::default()
}

fn coeffs(n: usize, seed: u64) -> CVector {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn odometer_koopman_is_an_isometry(bits in 2u32..=8, pi in 0usize..3, seed in any::<u64>()) {
        let p = [0.3, 0.5, 0.7][pi];
        let (space, map) = build_odometer(bits, p).unwrap();
        let u = koopman_of(&map, &lim()).unwrap();
        let f = L2Vector::new(coeffs(space.size(), seed));
        let uf = u.apply(&f);
        prop_assert!((uf.norm(&space) - f.norm(&space)).abs() < 1e-10);
    }

    #[test]
    fn odometer_koopman_is_positive(bits in 2u32..=8, p in 0.05f64..0.95, seed in any::<u64>()) {
        let (space, map) = build_odometer(bits, p).unwrap();
        let u = koopman_of(&map, &lim()).unwrap();
        prop_assert!(u.is_positive());
        let f = L2Vector::new(coeffs(space.size(), seed).map(|z| c(z.norm())));
        prop_assert!(u.apply(&f).coeffs.iter().all(|z| z.re >= 0.0 && z.im == 0.0));
    }

    #[test]
    fn rotation_koopman_is_an_isometry(k in 1usize..=30, alpha in 0.0f64..1.0, seed in any::<u64>()) {
        let (space, u) = build_fourier_rotation(1, k, &[alpha], &lim()).unwrap();
        let f = L2Vector::new(coeffs(space.size(), seed));
        prop_assert!((u.apply(&f).norm(&space) - f.norm(&space)).abs() < 1e-10);
    }

    #[test]
    fn heisenberg_group_laws(
        a in -10.0f64..10.0, b in -10.0f64..10.0, cc in -10.0f64..10.0,
        a2 in -10.0f64..10.0, b2 in -10.0f64..10.0, c2 in -10.0f64..10.0,
        a3 in -10.0f64..10.0, b3 in -10.0f64..10.0, c3 in -10.0f64..10.0,
    ) {
        let g = GroupElement::heisenberg(a, b, cc);
        let h = GroupElement::heisenberg(a2, b2, c2);
        let k = GroupElement::heisenberg(a3, b3, c3);
        let left = compose(&compose(&g, &h).unwrap(), &k).unwrap();
        let right = compose(&g, &compose(&h, &k).unwrap()).unwrap();
        prop_assert!(left.coordinate_distance(&right).unwrap() < 1e-12);
        let e = compose(&g, &inverse(&g)).unwrap();
        prop_assert!(e.coordinate_distance(&GroupElement::identity(GroupKind::Heisenberg)).unwrap() < 1e-12);
    }

    #[test]
    fn scalar_heisenberg_rep_is_a_homomorphism(
        alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
        a in -5.0f64..5.0, b in -5.0f64..5.0, cc in -5.0f64..5.0,
        a2 in -5.0f64..5.0, b2 in -5.0f64..5.0, c2 in -5.0f64..5.0,
    ) {
        let g = GroupElement::heisenberg(a, b, cc);
        let h = GroupElement::heisenberg(a2, b2, c2);
        let gh = compose(&g, &h).unwrap();
        let lhs = heis_rep_scalar(alpha, beta, &gh).unwrap();
        let rhs = heis_rep_scalar(alpha, beta, &g).unwrap() * heis_rep_scalar(alpha, beta, &h).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
        prop_assert!((lhs.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn l2_heisenberg_rep_is_a_homomorphism_up_to_boundary(
        ka in -100i64..100, b in -2.0f64..2.0, cc in -3.0f64..3.0,
        ka2 in -100i64..100, b2 in -2.0f64..2.0, c2 in -3.0f64..3.0,
    ) {
        let grid = Grid::new(12.0, 0.01).unwrap();
        let f = grid.gaussian();
        let g = GroupElement::heisenberg(ka as f64 * 0.01, b, cc);
        let h = GroupElement::heisenberg(ka2 as f64 * 0.01, b2, c2);
        let gh = compose(&g, &h).unwrap();
        let direct = heis_rep_l2(1.0, &grid, &gh, &f).unwrap();
        let inner = heis_rep_l2(1.0, &grid, &h, &f).unwrap();
        let outer = heis_rep_l2(1.0, &grid, &g, &inner.values).unwrap();
        let diff: Vec<C64> = direct.values.iter().zip(&outer.values).map(|(x, y)| x - y).collect();
        let bound = (direct.boundary_loss + inner.boundary_loss + outer.boundary_loss).sqrt() + 1e-9;
        prop_assert!(grid.norm(&diff) <= bound);
    }

    #[test]
    fn spectral_mass_matches_norm(k in 1usize..=10, alpha in 0.0f64..1.0, seed in any::<u64>(), lag in 8usize..256) {
        let (space, u) = build_fourier_rotation(1, k, &[alpha], &lim()).unwrap();
        let f = L2Vector::new(coeffs(space.size(), seed));
        let seq = correlation_sequence(&u, &f, lag).unwrap();
        let est = spectral_estimate(&seq).unwrap();
        let norm2 = f.norm(&space).powi(2);
        prop_assert!((est.total_mass - norm2).abs() < 1e-6 * norm2.max(1.0));
        prop_assert!(est.density.iter().all(|&d| d >= -1e-9 * norm2.max(1.0)));
    }

    #[test]
    fn character_covariance_is_psd_with_constant_diagonal(alpha in 0.0f64..1.0, count in 1usize..12) {
        let rep = UnitaryRep::Character {
            group: GroupKind::IntLattice { dim: 1 },
            character: Character::real(vec![alpha]),
        };
        let els: Vec<GroupElement> = (0..count as i64).map(|n| GroupElement::int(vec![n * 3 - 7])).collect();
        let cov = gaussian_covariance(&rep, &CVector::from_element(1, c(2.0)), &els).unwrap();
        for i in 0..count {
            prop_assert!((cov[(i, i)] - 4.0).abs() < 1e-12);
        }
        prop_assert!(nalgebra::SymmetricEigen::new(cov).eigenvalues.min() > -1e-10);
    }

    #[test]
    fn symmetric_power_is_a_unitary_representation(d in 1usize..=4, n in 1usize..=3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(d, &mut rng);
        let v = random_unitary(d, &mut rng);
        let su = sym_tensor_power(&u, n, &lim()).unwrap();
        let sv = sym_tensor_power(&v, n, &lim()).unwrap();
        let suv = sym_tensor_power(&(&u * &v), n, &lim()).unwrap();
        prop_assert_eq!(su.nrows(), symmetric_dimension(d, n));
        prop_assert!(unitarity_defect(&su) < 1e-10);
        prop_assert!((suv - su * sv).norm() < 1e-9);
    }

    #[test]
    fn witness_measure_is_monotone_in_epsilon(e1 in 0.01f64..0.5, e2 in 0.01f64..0.5) {
        let sys = circle_rotation_system(64).unwrap();
        let p = uniform_measure(&sys);
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = nonergodic_product_witness(&sys, &p, lo).unwrap();
        let b = nonergodic_product_witness(&sys, &p, hi).unwrap();
        prop_assert!(a.measure <= b.measure + 1e-15);
        prop_assert!(a.containment_holds && b.containment_holds);
    }
}

#[test]
fn folner_windows_are_inversion_closed() {
    for kind in [
        GroupKind::IntLattice { dim: 2 },
        GroupKind::RealVector { dim: 1 },
        GroupKind::Heisenberg,
    ] {
        let w = folner_box(kind, 2, 0.5).unwrap();
        for g in &w.elements {
            let gi = inverse(g);
            assert!(w
                .elements
                .iter()
                .any(|h| h.coordinate_distance(&gi).unwrap() < 1e-12));
        }
    }
}

#[test]
fn circle_metric_axioms() {
    let sys = circle_rotation_system(48).unwrap();
    let t = invariant_metric(&sys).unwrap();
    for i in 0..48 {
        assert_eq!(t.big_d(i, i), 0.0);
        for j in 0..48 {
            assert_eq!(t.big_d(i, j), t.big_d(j, i));
            assert!(t.big_d(i, j) >= t.d(i, j) - 1e-15);
        }
    }
    assert!(t.triangle_defect <= 1e-9);
}

#[test]
fn symmetric_square_matches_dense_tensor_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let d = 3;
    let u = random_unitary(d, &mut rng);
    let sym = sym_tensor_power(&u, 2, &lim()).unwrap();
    // orthonormal symmetric vectors inside ℂ^d ⊗ ℂ^d, lexicographic pairs
    let mut basis = Vec::new();
    for i in 0..d {
        for j in i..d {
            let mut v = CVector::zeros(d * d);
            if i == j {
                v[i * d + i] = c(1.0);
            } else {
                v[i * d + j] = c(0.5f64.sqrt());
                v[j * d + i] = c(0.5f64.sqrt());
            }
            basis.push(v);
        }
    }
    let full = ergolab::linalg::kron(&u, &u);
    let m = basis.len();
    let oracle = CMatrix::from_fn(m, m, |a, b| (basis[a].adjoint() * &full * &basis[b])[(0, 0)]);
    assert!((oracle - sym).norm() < 1e-12);
}
