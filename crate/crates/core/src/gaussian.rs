//! Gaussian systems of unitary representations: covariance, sampling,
//! symmetric tensor powers and the weak-mixing verdict.
//!
//! The Gaussian action is represented through its chaos decomposition
//! (covariance and the Fock operators `π^{⊙n}`), not a point realization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::groups::{compose, inverse, Character, FolnerWindow, GroupElement, GroupKind};
use crate::heisenberg::{gaussian_box_average, weak_mixing_trace, Grid};
use crate::linalg::{c, kron, unitarity_defect, CMatrix, CVector};
use crate::{Error, Limits, Result, C64};

/// A finite-dimensional unitary representation with an explicit
/// evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rep", rename_all = "snake_case")]
pub enum UnitaryRep {
    /// One-dimensional character of an abelian group.
    Character { group: GroupKind, character: Character },
    /// `g ↦ I` on `ℂ^dim`.
    Trivial { group: GroupKind, dim: usize },
    /// `n ↦ U₁^{n₁}⋯U_d^{n_d}` on `ℤᵈ` for commuting unitaries `U_i`.
    MatrixPower { generators: Vec<CMatrix> },
    /// `π_{α,β}` of the Heisenberg group.
    HeisenbergScalar { alpha: f64, beta: f64 },
    DirectSum { parts: Vec<UnitaryRep> },
}

impl UnitaryRep {
    pub fn matrix_power(generators: Vec<CMatrix>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::invalid("at least one generator is required"));
        }
        let n = generators[0].nrows();
        for u in &generators {
            if u.shape() != (n, n) {
                return Err(Error::invalid("generators must be square of equal size"));
            }
            let defect = unitarity_defect(u);
            if defect > 1e-10 {
                return Err(Error::invalid(format!("generator is not unitary (defect {defect:e})")));
            }
        }
        for (i, a) in generators.iter().enumerate() {
            for b in &generators[i + 1..] {
                if (a * b - b * a).norm() > 1e-10 {
                    return Err(Error::invalid("generators must commute"));
                }
            }
        }
        Ok(UnitaryRep::MatrixPower { generators })
    }

    pub fn direct_sum(parts: Vec<UnitaryRep>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::invalid("direct sum needs a part"))?;
        let kind = first.group();
        if parts.iter().any(|p| p.group() != kind) {
            return Err(Error::invalid("direct sum parts must share a group"));
        }
        Ok(UnitaryRep::DirectSum { parts })
    }

    pub fn dim(&self) -> usize {
        match self {
            UnitaryRep::Character { .. } | UnitaryRep::HeisenbergScalar { .. } => 1,
            UnitaryRep::Trivial { dim, .. } => *dim,
            UnitaryRep::MatrixPower { generators } => generators[0].nrows(),
            UnitaryRep::DirectSum { parts } => parts.iter().map(|p| p.dim()).sum(),
        }
    }

    pub fn group(&self) -> GroupKind {
        match self {
            UnitaryRep::Character { group, .. } | UnitaryRep::Trivial { group, .. } => *group,
            UnitaryRep::MatrixPower { generators } => GroupKind::IntLattice { dim: generators.len() },
            UnitaryRep::HeisenbergScalar { .. } => GroupKind::Heisenberg,
            UnitaryRep::DirectSum { parts } => parts[0].group(),
        }
    }

    /// `π(g)`.
    pub fn matrix(&self, g: &GroupElement) -> Result<CMatrix> {
        if g.kind() != self.group() {
            return Err(Error::invalid("group element does not belong to the representation's group"));
        }
        match self {
            UnitaryRep::Character { character, .. } => {
                let z = crate::groups::character_eval(character, g)?;
                Ok(CMatrix::from_element(1, 1, z))
            }
            UnitaryRep::Trivial { dim, .. } => Ok(CMatrix::identity(*dim, *dim)),
            UnitaryRep::MatrixPower { generators } => {
                let GroupElement::IntLattice { coords } = g else {
                    unreachable!("kind checked above")
                };
                let n = generators[0].nrows();
                let mut out = CMatrix::identity(n, n);
                for (u, &k) in generators.iter().zip(coords) {
                    let base = if k < 0 { u.adjoint() } else { u.clone() };
                    out *= base.pow(k.unsigned_abs() as u32);
                }
                Ok(out)
            }
            UnitaryRep::HeisenbergScalar { alpha, beta } => Ok(CMatrix::from_element(
                1,
                1,
                crate::heisenberg::heis_rep_scalar(*alpha, *beta, g)?,
            )),
            UnitaryRep::DirectSum { parts } => {
                let n = self.dim();
                let mut out = CMatrix::zeros(n, n);
                let mut at = 0;
                for p in parts {
                    let m = p.matrix(g)?;
                    let k = m.nrows();
                    out.view_mut((at, at), (k, k)).copy_from(&m);
                    at += k;
                }
                Ok(out)
            }
        }
    }
}

/// `C_ij = Re⟨π(g_j⁻¹ g_i) v, v⟩`.
pub fn gaussian_covariance(rep: &UnitaryRep, v: &CVector, elements: &[GroupElement]) -> Result<DMatrix<f64>> {
    if elements.is_empty() {
        return Err(Error::invalid("element list is empty"));
    }
    if v.len() != rep.dim() || v.norm() == 0.0 {
        return Err(Error::invalid("v must be a nonzero vector of the representation space"));
    }
    let k = elements.len();
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let h = compose(&inverse(&elements[j]), &elements[i])?;
            let value = (rep.matrix(&h)? * v).dotc(v).re;
            cov[(i, j)] = value;
            cov[(j, i)] = value;
        }
    }
    let min = SymmetricEigen::new(cov.clone()).eigenvalues.min();
    if min < -1e-8 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(cov)
}

/// `Re⟨π(g_i)v, π(g_j)v⟩`, the real Gram matrix of the orbit vectors.
pub fn orbit_gram(rep: &UnitaryRep, v: &CVector, elements: &[GroupElement]) -> Result<DMatrix<f64>> {
    let orbit: Vec<CVector> = elements.iter().map(|g| Ok(rep.matrix(g)? * v)).collect::<Result<_>>()?;
    let k = orbit.len();
    Ok(DMatrix::from_fn(k, k, |i, j| orbit[j].dotc(&orbit[i]).re))
}

/// Centered Gaussian samples with covariance `cov`, one per row.
///
/// Uses `cov = QΛQᵀ`, `X = Q√Λ·Z`; row `r` draws `Z` from the ChaCha
/// stream `r` of `seed`, so the output does not depend on thread count.
pub fn sample_gaussian_process(cov: &DMatrix<f64>, n_samples: usize, seed: u64) -> Result<DMatrix<f64>> {
    let k = cov.nrows();
    if cov.ncols() != k {
        return Err(Error::invalid("covariance must be square"));
    }
    if (cov - cov.transpose()).amax() > 1e-10 * (1.0 + cov.amax()) {
        return Err(Error::invalid("covariance must be symmetric"));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-8 * (1.0 + cov.amax()) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let factor = DMatrix::from_fn(k, k, |i, j| eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt());
    let rows: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..k)
                .map(|i| (0..k).map(|j| factor[(i, j)] * z[j]).sum())
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(n_samples, k, |r, i| rows[r][i]))
}

/// Empirical covariance `(1/n) Σ x xᵀ` of centered samples.
pub fn empirical_covariance(samples: &DMatrix<f64>) -> DMatrix<f64> {
    let n = samples.nrows().max(1) as f64;
    samples.transpose() * samples / n
}

/// Non-decreasing index sequences of length `n` over `0..d`, in
/// lexicographic order: the basis of `H^{⊙n}`.
pub fn symmetric_basis(d: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, n: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(d, n, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, n, 0, &mut Vec::with_capacity(n), &mut out);
    out
}

/// `binomial(d + n − 1, n)`.
pub fn symmetric_dimension(d: usize, n: usize) -> usize {
    let mut r: u128 = 1;
    for i in 0..n as u128 {
        r = r * (d as u128 + i) / (i + 1);
    }
    r as usize
}

/// Permanent by Ryser's formula.
fn permanent(m: &CMatrix) -> C64 {
    let n = m.nrows();
    if n == 0 {
        return c(1.0);
    }
    let mut total = c(0.0);
    for mask in 1u64..(1u64 << n) {
        let mut prod = c(1.0);
        for i in 0..n {
            let mut row = c(0.0);
            for j in 0..n {
                if mask & (1 << j) != 0 {
                    row += m[(i, j)];
                }
            }
            prod *= row;
        }
        let sign = if (n as u32 - mask.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

fn multiplicity_factorials(seq: &[usize]) -> f64 {
    let mut out = 1.0;
    let mut run = 1;
    for w in seq.windows(2) {
        if w[0] == w[1] {
            run += 1;
            out *= run as f64;
        } else {
            run = 1;
        }
    }
    out
}

/// `U^{⊗n}` restricted to the symmetric subspace, in the orthonormal basis
/// of [`symmetric_basis`].
pub fn sym_tensor_power(u: &CMatrix, n: usize, limits: &Limits) -> Result<CMatrix> {
    let d = u.nrows();
    if u.ncols() != d {
        return Err(Error::invalid("matrix must be square"));
    }
    if n == 0 {
        return Ok(CMatrix::identity(1, 1));
    }
    if n > 20 {
        return Err(Error::SizeCap {
            what: "symmetric power degree".into(),
            requested: n,
            cap: 20,
        });
    }
    let dim = symmetric_dimension(d, n);
    limits.check("symmetric power entries", dim.saturating_mul(dim))?;
    let basis = symmetric_basis(d, n);
    let norms: Vec<f64> = basis.iter().map(|s| multiplicity_factorials(s)).collect();
    let entries: Vec<C64> = (0..dim * dim)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / dim, k % dim);
            let sub = CMatrix::from_fn(n, n, |r, s| u[(basis[i][r], basis[j][s])]);
            permanent(&sub) / (norms[i] * norms[j]).sqrt()
        })
        .collect();
    Ok(CMatrix::from_fn(dim, dim, |i, j| entries[i * dim + j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingVerdict {
    WeaklyMixing,
    NotWeaklyMixing,
    Inconclusive,
}

/// Verdict with the data behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianVerdict {
    pub verdict: MixingVerdict,
    /// `fixed-vector` or `coefficient-mean`.
    pub route: String,
    /// Smallest singular value of `A − I`, `A` the window average of
    /// `π ⊗ conj(π)`.
    pub fixed_vector_residual: Option<f64>,
    pub fixed_vector: Option<Vec<C64>>,
    /// `(radius, mean)` per window.
    pub window_means: Vec<(usize, f64)>,
    /// Continuum box averages for the same radii, when known.
    pub closed_form: Vec<(usize, f64)>,
    pub tau: f64,
    /// Whether the Gaussian system is ergodic (it is iff `π` is weakly
    /// mixing), when the verdict is conclusive.
    pub gaussian_ergodic: Option<bool>,
}

pub const FIXED_VECTOR_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_TAU: f64 = 0.05;

/// Finite-dimensional route: averages `π(g) ⊗ conj(π(g))` over the window
/// and looks for a fixed vector.
pub fn gaussian_ergodicity_verdict(rep: &UnitaryRep, window: &FolnerWindow, limits: &Limits) -> Result<GaussianVerdict> {
    if window.is_empty() {
        return Err(Error::invalid("window is empty"));
    }
    let d = rep.dim();
    limits.check("tensor-square entries", (d * d).saturating_mul(d * d))?;
    let mut avg = CMatrix::zeros(d * d, d * d);
    for g in &window.elements {
        let m = rep.matrix(g)?;
        avg += kron(&m, &m.map(|z| z.conj()));
    }
    avg /= c(window.len() as f64);
    let shifted = &avg - CMatrix::identity(d * d, d * d);
    let svd = shifted.svd(false, true);
    let (k, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, s)| (k, *s))
        .expect("non-empty");
    let v_t = svd.v_t.expect("requested");
    let fixed: Vec<C64> = v_t.row(k).iter().map(|z| z.conj()).collect();
    let found = smin < FIXED_VECTOR_THRESHOLD;
    Ok(GaussianVerdict {
        verdict: if found {
            MixingVerdict::NotWeaklyMixing
        } else {
            MixingVerdict::WeaklyMixing
        },
        route: "fixed-vector".into(),
        fixed_vector_residual: Some(smin),
        fixed_vector: found.then_some(fixed),
        window_means: Vec::new(),
        closed_form: Vec::new(),
        tau: 0.0,
        gaussian_ergodic: Some(!found),
    })
}

/// Coefficient route for `π_γ`: Følner means of `|⟨π_γ(g)f, f⟩|` at radii
/// `N` and `2N`.
///
/// Weakly mixing when the mean drops and ends below `τ`; not weakly mixing
/// when it exceeds `τ` and does not drop; otherwise inconclusive.
pub fn heisenberg_coefficient_verdict(
    gamma: f64,
    grid: &Grid,
    f: &[crate::C64],
    radius: usize,
    step: f64,
    tau: f64,
) -> Result<GaussianVerdict> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::invalid("tau must be positive"));
    }
    let radii = [radius, 2 * radius];
    let trace = weak_mixing_trace(gamma, grid, f, f, &radii, step)?;
    let (m1, m2) = (trace[0].mean, trace[1].mean);
    let verdict = if m2 < m1 && m2 < tau {
        MixingVerdict::WeaklyMixing
    } else if m1 > tau && m2 >= m1 {
        MixingVerdict::NotWeaklyMixing
    } else {
        MixingVerdict::Inconclusive
    };
    Ok(GaussianVerdict {
        verdict,
        route: "coefficient-mean".into(),
        fixed_vector_residual: None,
        fixed_vector: None,
        window_means: trace.iter().map(|t| (t.radius, t.mean)).collect(),
        closed_form: radii.iter().map(|&r| (r, gaussian_box_average(gamma, r as f64))).collect(),
        tau,
        gaussian_ergodic: match verdict {
            MixingVerdict::WeaklyMixing => Some(true),
            MixingVerdict::NotWeaklyMixing => Some(false),
            MixingVerdict::Inconclusive => None,
        },
    })
}

/// Covariance, samples and Fock truncation level of a Gaussian system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSystem {
    pub elements: Vec<GroupElement>,
    pub vector: CVector,
    pub covariance: DMatrix<f64>,
    pub samples: DMatrix<f64>,
    pub fock_level: usize,
    pub seed: u64,
}

impl GaussianSystem {
    pub fn new(
        rep: &UnitaryRep,
        vector: CVector,
        elements: Vec<GroupElement>,
        n_samples: usize,
        fock_level: usize,
        seed: u64,
    ) -> Result<Self> {
        let covariance = gaussian_covariance(rep, &vector, &elements)?;
        let samples = sample_gaussian_process(&covariance, n_samples, seed)?;
        Ok(GaussianSystem {
            elements,
            vector,
            covariance,
            samples,
            fock_level,
            seed,
        })
    }

    /// Covariance matrix, one CSV row per process coordinate.
    pub fn write_covariance_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        write_matrix_csv(&self.covariance, "c", w)
    }

    /// Samples, one CSV row per draw.
    pub fn write_samples_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        write_matrix_csv(&self.samples, "x", w)
    }
}

fn write_matrix_csv<W: std::io::Write>(m: &DMatrix<f64>, prefix: &str, mut w: W) -> std::io::Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::folner_box;
    use crate::linalg::random_unitary;
    use std::f64::consts::TAU;

    fn chi(alpha: f64) -> UnitaryRep {
        UnitaryRep::Character {
            group: GroupKind::IntLattice { dim: 1 },
            character: Character::real(vec![alpha]),
        }
    }

    #[test]
    fn character_covariance_is_cosine() {
        let alpha = 0.3;
        let els: Vec<GroupElement> = (0..3).map(|n| GroupElement::int(vec![n])).collect();
        let cov = gaussian_covariance(&chi(alpha), &CVector::from_element(1, c(1.0)), &els).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = (TAU * (i as f64 - j as f64) * alpha).cos();
                assert!((cov[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trivial_covariance_is_all_ones() {
        let rep = UnitaryRep::Trivial {
            group: GroupKind::IntLattice { dim: 1 },
            dim: 2,
        };
        let v = CVector::from_vec(vec![c(0.6), c(0.8)]);
        let els: Vec<GroupElement> = (0..4).map(|n| GroupElement::int(vec![n])).collect();
        let cov = gaussian_covariance(&rep, &v, &els).unwrap();
        assert!((cov - DMatrix::from_element(4, 4, 1.0)).amax() < 1e-15);
    }

    #[test]
    fn covariance_equals_orbit_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(3, &mut rng);
        let rep = UnitaryRep::matrix_power(vec![u]).unwrap();
        let v = CVector::from_vec(vec![c(1.0), C64::new(0.0, 0.5), c(-0.2)]);
        let els: Vec<GroupElement> = (-2..3).map(|n| GroupElement::int(vec![n])).collect();
        let cov = gaussian_covariance(&rep, &v, &els).unwrap();
        let gram = orbit_gram(&rep, &v, &els).unwrap();
        assert!((cov - gram).amax() < 1e-12);
    }

    #[test]
    fn csv_exports_round_trip() {
        let els: Vec<GroupElement> = (0..3).map(|n| GroupElement::int(vec![n])).collect();
        let sys = GaussianSystem::new(&chi(0.25), CVector::from_element(1, c(1.0)), els, 4, 2, 1).unwrap();
        let mut buf = Vec::new();
        sys.write_covariance_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "c0,c1,c2");
        let parsed: Vec<f64> = rows[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(parsed, sys.covariance.row(1).iter().copied().collect::<Vec<_>>());
        let mut buf = Vec::new();
        sys.write_samples_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    #[test]
    fn degenerate_covariance_gives_equal_coordinates() {
        let cov = DMatrix::from_element(2, 2, 1.0);
        let s = sample_gaussian_process(&cov, 100, 9).unwrap();
        for r in 0..100 {
            assert!((s[(r, 0)] - s[(r, 1)]).abs() < 1e-12);
        }
        assert_eq!(sample_gaussian_process(&cov, 0, 9).unwrap().nrows(), 0);
    }

    #[test]
    fn negative_covariance_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            sample_gaussian_process(&cov, 3, 0),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn diagonal_symmetric_square() {
        let (l, m) = (C64::from_polar(1.0, 0.3), C64::from_polar(1.0, -1.1));
        let u = CMatrix::from_diagonal(&CVector::from_vec(vec![l, m]));
        let s = sym_tensor_power(&u, 2, &Limits::default()).unwrap();
        let expect = CMatrix::from_diagonal(&CVector::from_vec(vec![l * l, l * m, m * m]));
        assert!((s - expect).norm() < 1e-14);
    }

    #[test]
    fn symmetric_power_of_identity() {
        let s = sym_tensor_power(&CMatrix::identity(3, 3), 4, &Limits::default()).unwrap();
        assert_eq!(s.nrows(), symmetric_dimension(3, 4));
        assert!((s - CMatrix::identity(15, 15)).norm() < 1e-14);
    }

    #[test]
    fn character_has_fixed_vector() {
        let w = folner_box(GroupKind::IntLattice { dim: 1 }, 10, 1.0).unwrap();
        let v = gaussian_ergodicity_verdict(&chi(2f64.sqrt() - 1.0), &w, &Limits::default()).unwrap();
        assert_eq!(v.verdict, MixingVerdict::NotWeaklyMixing);
        assert!(v.fixed_vector_residual.unwrap() < 1e-14);
        assert_eq!(v.gaussian_ergodic, Some(false));
    }
}
