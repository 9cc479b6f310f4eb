//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result, C64};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Kronecker product `a ⊗ b`; index `(i, k)` of the result is `i·dim(b) + k`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    CVector::from_fn(a.len() * b.len(), |i, _| a[i / b.len()] * b[i % b.len()])
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    // symmetrize away rounding before handing to the solver
    let hs = (h + h.adjoint()) * c(0.5);
    let eig = SymmetricEigen::new(hs);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Groups an ascending list into runs whose consecutive gaps are below `gap`.
pub fn cluster_sorted(values: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > gap {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Columns `range` of `m`.
pub fn columns(m: &CMatrix, range: std::ops::Range<usize>) -> CMatrix {
    m.columns(range.start, range.len()).into_owned()
}

/// An eigenvalue of a normal matrix with an orthonormal basis of its
/// eigenspace (as columns).
#[derive(Debug, Clone)]
pub struct Eigenspace {
    pub value: C64,
    pub basis: CMatrix,
}

/// Deterministic mixing coefficients for the Hermitian combinations used
/// by [`normal_eigen`].
fn mixing_coefficient(depth: usize) -> f64 {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let t = (0.37 + depth as f64 * GOLDEN).fract();
    (std::f64::consts::PI * (t - 0.5) * 0.9).tan()
}

/// Eigenspaces of a normal matrix.
///
/// Repeatedly splits by the eigenspaces of the Hermitian combination
/// `Re(B) + t·Im(B)` of the compression `B = V*QV` until every block is
/// scalar within `tol`. Eigenspaces are ordered by `arg λ ∈ [0, 2π)`.
pub fn normal_eigen(q: &CMatrix, tol: f64) -> Result<Vec<Eigenspace>> {
    let n = q.nrows();
    if n != q.ncols() {
        return Err(Error::invalid("normal_eigen needs a square matrix"));
    }
    let defect = (q * q.adjoint() - q.adjoint() * q).norm();
    if defect > 1e-8 * (1.0 + q.norm()) {
        return Err(Error::numerical("matrix is not normal", defect));
    }
    let mut out = Vec::new();
    split(q, CMatrix::identity(n, n), 0, tol, &mut out)?;
    out.sort_by(|x, y| angle(x.value).total_cmp(&angle(y.value)));
    Ok(out)
}

fn angle(z: C64) -> f64 {
    let a = z.arg();
    let a = if a < 0.0 { a + std::f64::consts::TAU } else { a };
    // values just below 2π belong with 0
    if std::f64::consts::TAU - a < 1e-12 {
        0.0
    } else {
        a
    }
}

fn split(q: &CMatrix, v: CMatrix, depth: usize, tol: f64, out: &mut Vec<Eigenspace>) -> Result<()> {
    let k = v.ncols();
    let b = v.adjoint() * q * &v;
    let mean = b.trace() / c(k as f64);
    let spread = (&b - CMatrix::identity(k, k) * mean).norm();
    if spread <= tol * (k as f64).sqrt() {
        out.push(Eigenspace {
            value: mean,
            basis: v,
        });
        return Ok(());
    }
    if depth > 12 {
        return Err(Error::numerical(
            "eigenspace splitting did not converge",
            spread,
        ));
    }
    let t = mixing_coefficient(depth);
    let re = (&b + b.adjoint()) * c(0.5);
    let im = (&b - b.adjoint()) * C64::new(0.0, -0.5);
    let h = re + im * c(t);
    let (values, vectors) = hermitian_eigen(&h);
    let gap = 1e-8 * (1.0 + t.abs());
    for range in cluster_sorted(&values, gap) {
        let w = columns(&vectors, range);
        split(q, &v * w, depth + 1, tol, out)?;
    }
    Ok(())
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis of the approximate kernel of a Hermitian positive
/// semidefinite Gram matrix `g = M*M`: eigenvectors whose eigenvalue is
/// below `threshold²`. Also returns all eigenvalues (ascending).
pub fn gram_kernel(g: &CMatrix, threshold: f64) -> (CMatrix, Vec<f64>) {
    let (values, vectors) = hermitian_eigen(g);
    let k = values.iter().take_while(|&&v| v < threshold * threshold).count();
    (columns(&vectors, 0..k), values)
}

/// Haar-distributed random unitary (QR of a complex Ginibre matrix with
/// the phases of `R`'s diagonal removed).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Largest singular value of a real matrix.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// `‖A*A − I‖` in the Frobenius norm.
pub fn unitarity_defect(a: &CMatrix) -> f64 {
    let n = a.ncols();
    (a.adjoint() * a - CMatrix::identity(n, n)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kron_indexing() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let b = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let k = kron(&a, &b);
        assert_eq!(k[(0, 1)], c(1.0));
        assert_eq!(k[(1, 2)], c(2.0));
        assert_eq!(k[(3, 2)], c(4.0));
    }

    #[test]
    fn normal_eigen_recovers_random_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = random_unitary(9, &mut rng);
        assert!(unitarity_defect(&v) < 1e-12);
        // a repeated eigenvalue and a conjugate pair
        let phases = [0.1, 0.1, 0.1, 0.4, -0.4, 0.25, 0.7, 0.0, 0.3];
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            9,
            phases.iter().map(|&t| C64::from_polar(1.0, std::f64::consts::TAU * t)),
        ));
        let q = &v * d * v.adjoint();
        let spaces = normal_eigen(&q, 1e-10).unwrap();
        let dims: usize = spaces.iter().map(|s| s.basis.ncols()).sum();
        assert_eq!(dims, 9);
        assert_eq!(spaces.len(), 7);
        for s in &spaces {
            let r = (&q * &s.basis - &s.basis * s.value).norm();
            assert!(r < 1e-10, "residual {r}");
            assert!((s.value.norm() - 1.0).abs() < 1e-12);
        }
        let triple = spaces.iter().find(|s| s.basis.ncols() == 3).unwrap();
        assert!((triple.value - C64::from_polar(1.0, 0.2 * std::f64::consts::PI)).norm() < 1e-10);
    }

    #[test]
    fn clusters() {
        let v = [0.0, 1e-12, 0.5, 0.5 + 1e-10, 0.9];
        let r = cluster_sorted(&v, 1e-8);
        assert_eq!(r, vec![0..2, 2..4, 4..5]);
    }
}
