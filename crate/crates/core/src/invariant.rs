//! Finite-dimensional invariant subspaces, the absolutely continuous
//! invariant measure they induce, and Banach–Kronecker factors.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    c, cluster_sorted, columns, gram_kernel, hermitian_eigen, kron, operator_norm, random_unitary, CMatrix, CVector,
};
use crate::spaces::{KoopmanOperator, L2Vector, MeasureSpace, NonSingularMap, OperatorMatrix, System};
use crate::{Error, Limits, Result, C64};

/// Largest subspace dimension the detector will report.
pub const MAX_SUBSPACE_DIM: usize = 12;
/// Commutant solutions must satisfy `‖[X, U_g]‖ ≤ COMMUTANT_THRESHOLD`.
pub const COMMUTANT_THRESHOLD: f64 = 1e-6;
/// Singular values of the commutation system between the threshold and
/// this bound make the commutant dimension ambiguous.
pub const COMMUTANT_GAP: f64 = 1e-4;
/// Bounded-modulus requirement: `max|ψ| ≤ MODULUS_RATIO · rms(ψ)`.
pub const MODULUS_RATIO: f64 = 10.0;
const SEED_RETRIES: u64 = 3;

/// A common invariant subspace of a family of Koopman operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSubspaceReport {
    /// Orthonormal basis `f₁..f_d` (coefficient form).
    pub basis: Vec<L2Vector>,
    /// One `d×d` matrix per generator with `U_g f_j = Σ_i A[(i, j)] f_i`.
    pub matrices: Vec<CMatrix>,
    /// `max_j ‖U_g f_j − Σ_i A[(i, j)] f_i‖` per generator.
    pub residuals: Vec<f64>,
    /// `‖A_g* A_g − I‖` per generator.
    pub orthogonality_defects: Vec<f64>,
    /// `φ = (1/d) Σ |f_j|²` per state (point spaces only).
    pub phi: Option<Vec<f64>>,
    /// `μ = φ·m` per state (point spaces only).
    pub mu: Option<Vec<f64>>,
    /// Seed of the commutant element that produced the subspace.
    pub seed: Option<u64>,
}

impl InvariantSubspaceReport {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Builds the report for a given orthonormal basis.
    pub fn from_basis(gens: &[KoopmanOperator], basis: Vec<L2Vector>) -> Result<Self> {
        let space = check_family(gens)?;
        let d = basis.len();
        if d == 0 {
            return Err(Error::invalid("basis is empty"));
        }
        if basis.iter().any(|f| f.len() != space.size()) {
            return Err(Error::invalid("basis vector length does not match the space"));
        }
        let gram = CMatrix::from_fn(d, d, |i, j| basis[j].inner(&basis[i], space));
        let defect = (&gram - CMatrix::identity(d, d)).norm();
        if defect > 1e-8 {
            return Err(Error::invalid(format!("basis is not orthonormal (defect {defect:e})")));
        }
        let mut matrices = Vec::with_capacity(gens.len());
        let mut residuals = Vec::with_capacity(gens.len());
        let mut defects = Vec::with_capacity(gens.len());
        for u in gens {
            let images: Vec<L2Vector> = basis.iter().map(|f| u.apply(f)).collect();
            let a = CMatrix::from_fn(d, d, |i, j| images[j].inner(&basis[i], space));
            let mut worst: f64 = 0.0;
            for (j, uf) in images.iter().enumerate() {
                let mut r = uf.coeffs.clone();
                for (i, f) in basis.iter().enumerate() {
                    r -= &f.coeffs * a[(i, j)];
                }
                worst = worst.max(L2Vector::new(r).norm(space));
            }
            defects.push((a.adjoint() * &a - CMatrix::identity(d, d)).norm());
            matrices.push(a);
            residuals.push(worst);
        }
        let (phi, mu) = match space.modes() {
            Some(_) => (None, None),
            None => {
                let w = space.weights();
                let phi: Vec<f64> = (0..space.size())
                    .map(|x| basis.iter().map(|f| f.coeffs[x].norm_sqr()).sum::<f64>() / d as f64)
                    .collect();
                let mu = phi.iter().zip(&w).map(|(p, m)| p * m).collect();
                (Some(phi), Some(mu))
            }
        };
        Ok(InvariantSubspaceReport {
            basis,
            matrices,
            residuals,
            orthogonality_defects: defects,
            phi,
            mu,
            seed: None,
        })
    }
}

fn check_family(gens: &[KoopmanOperator]) -> Result<&MeasureSpace> {
    let first = gens
        .first()
        .ok_or_else(|| Error::invalid("at least one generator is required"))?;
    if gens.iter().any(|u| u.space != first.space) {
        return Err(Error::invalid("generators act on different spaces"));
    }
    Ok(&first.space)
}

/// `max|ψ| / rms(ψ)` for the function as seen pointwise: point values
/// `√m·f` on point spaces, grid samples on Fourier spaces.
pub fn modulus_ratio(space: &MeasureSpace, f: &L2Vector) -> Result<f64> {
    let values: Vec<f64> = match space {
        MeasureSpace::FourierTorus { dim, cutoff } => {
            let per_axis = (4 * cutoff + 1).min((4096f64.powf(1.0 / *dim as f64)) as usize).max(2);
            let total = per_axis.pow(*dim as u32);
            let mut out = Vec::with_capacity(total);
            for mut idx in 0..total {
                let mut x = vec![0.0; *dim];
                for xi in x.iter_mut().rev() {
                    *xi = (idx % per_axis) as f64 / per_axis as f64;
                    idx /= per_axis;
                }
                out.push(f.evaluate_torus(space, &x)?.norm());
            }
            out
        }
        _ => space
            .weights()
            .iter()
            .zip(f.coeffs.iter())
            .map(|(w, z)| w.sqrt() * z.norm())
            .collect(),
    };
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt();
    let max = values.iter().copied().fold(0.0, f64::max);
    Ok(if rms > 0.0 { max / rms } else { f64::INFINITY })
}

/// Orthonormal basis (as `n×n` matrices) of `{X : U_g X = X U_g ∀g}`.
fn commutant(qs: &[CMatrix], threshold: f64) -> Result<Vec<CMatrix>> {
    let n = qs[0].nrows();
    let id = CMatrix::identity(n, n);
    let mut gram = CMatrix::zeros(n * n, n * n);
    for q in qs {
        // column-major vec: vec(QX − XQ) = (I⊗Q − Qᵀ⊗I) vec(X)
        let k = kron(&id, q) - kron(&q.transpose(), &id);
        gram += k.adjoint() * &k;
    }
    let (kernel, values) = gram_kernel(&gram, threshold);
    let dim = kernel.ncols();
    if let Some(&next) = values.get(dim) {
        if next.max(0.0).sqrt() < COMMUTANT_GAP {
            return Err(Error::numerical(
                "commutant dimension is ambiguous: the commutation system is ill-conditioned",
                next.max(0.0).sqrt(),
            ));
        }
    }
    Ok((0..dim)
        .map(|k| CMatrix::from_fn(n, n, |i, j| kernel[(j * n + i, k)]))
        .collect())
}

fn commutant_dimension(qs: &[CMatrix]) -> Result<usize> {
    Ok(commutant(qs, COMMUTANT_THRESHOLD)?.len())
}

/// Number of linearly independent operators commuting with every
/// generator (in orthonormal coordinates).
pub fn commutant_rank(gens: &[KoopmanOperator], limits: &Limits) -> Result<usize> {
    let qs = unitary_family(gens, limits)?;
    commutant_dimension(&qs)
}

fn unitary_family(gens: &[KoopmanOperator], limits: &Limits) -> Result<Vec<CMatrix>> {
    let space = check_family(gens)?;
    let n = space.size();
    limits.check("dense operator entries", n * n)?;
    limits.check("commutant unknowns", n * n)?;
    gens.iter().map(|u| u.unitary_dense(limits)).collect()
}

/// Eigenspaces of a random self-adjoint commutant element, or `None` when
/// some eigenspace is reducible (an accidental eigenvalue collision).
fn split_by_commutant(qs: &[CMatrix], basis: &[CMatrix], seed: u64) -> Result<Option<Vec<CMatrix>>> {
    let n = qs[0].nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = CMatrix::zeros(n, n);
    for b in basis {
        let r: f64 = rng.random_range(-1.0..1.0);
        let s: f64 = rng.random_range(-1.0..1.0);
        x += b * C64::new(r, s);
    }
    let h = (&x + x.adjoint()) * c(0.5);
    let scale = h.norm().max(1e-300);
    let (values, vectors) = hermitian_eigen(&(h / c(scale)));
    let mut out = Vec::new();
    for range in cluster_sorted(&values, 1e-7) {
        let v = columns(&vectors, range);
        let restricted: Vec<CMatrix> = qs.iter().map(|q| v.adjoint() * q * &v).collect();
        if commutant_dimension(&restricted)? != 1 {
            return Ok(None);
        }
        out.push(v);
    }
    Ok(Some(out))
}

/// Minimal common invariant subspaces of `gens` with dimension at most
/// `max_dim`, excluding those on which every generator is trivial.
///
/// The space is split by the eigenspaces of a seeded random self-adjoint
/// element of the commutant; every piece is then checked for
/// irreducibility, closure (residual ≤ `tol`) and bounded modulus.
pub fn find_invariant_subspaces(
    gens: &[KoopmanOperator],
    max_dim: usize,
    tol: f64,
    seed: u64,
    limits: &Limits,
) -> Result<Vec<InvariantSubspaceReport>> {
    if max_dim == 0 || max_dim > MAX_SUBSPACE_DIM {
        return Err(Error::invalid(format!("max_dim must be in 1..={MAX_SUBSPACE_DIM}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let qs = unitary_family(gens, limits)?;
    let space = &gens[0].space;
    let basis = commutant(&qs, COMMUTANT_THRESHOLD)?;

    let mut pieces = None;
    let mut used = seed;
    for attempt in 0..=SEED_RETRIES {
        used = seed.wrapping_add(attempt);
        if let Some(p) = split_by_commutant(&qs, &basis, used)? {
            pieces = Some(p);
            break;
        }
    }
    let pieces = pieces.ok_or_else(|| {
        Error::numerical("commutant element kept producing reducible eigenspaces", f64::NAN)
    })?;

    let mut out = Vec::new();
    for v in pieces {
        let d = v.ncols();
        if d > max_dim {
            continue;
        }
        let trivial = qs
            .iter()
            .all(|q| (q * &v - &v).norm() < tol.max(1e-10) * (d as f64).sqrt());
        if trivial {
            continue;
        }
        let fs: Vec<L2Vector> = v
            .column_iter()
            .map(|col| L2Vector::from_orthonormal(&col.into_owned(), space))
            .collect();
        let mut report = InvariantSubspaceReport::from_basis(gens, fs)?;
        report.seed = Some(used);
        if report.max_residual() > tol {
            continue;
        }
        let mut bounded = true;
        for f in &report.basis {
            if modulus_ratio(space, f)? > MODULUS_RATIO {
                bounded = false;
            }
        }
        if bounded {
            out.push(report);
        }
    }
    out.sort_by_key(|r| r.dim());
    Ok(out)
}

/// `μ = φ·m` from a report on a point space.
pub fn build_invariant_measure(report: &InvariantSubspaceReport) -> Result<Vec<f64>> {
    report
        .mu
        .clone()
        .ok_or_else(|| Error::Unsupported("invariant measures are built on point spaces".into()))
}

/// `max_B |μ(T B) − μ(B)|` over the given sets.
pub fn set_invariance_defect(map: &NonSingularMap, mu: &[f64], sets: &[Vec<usize>]) -> f64 {
    sets.iter()
        .map(|b| {
            let before: f64 = b.iter().map(|&x| mu[x]).sum();
            let after: f64 = b.iter().map(|&x| mu[map.image[x]]).sum();
            (after - before).abs()
        })
        .fold(0.0, f64::max)
}

/// All cylinder sets of `{0,1}^bits`: each coordinate is fixed to 0, fixed
/// to 1, or left free (`3^bits` sets, the whole space included).
pub fn cylinder_sets(bits: u32) -> Vec<Vec<usize>> {
    let n = 1usize << bits;
    let patterns = 3usize.pow(bits);
    (0..patterns)
        .map(|mut p| {
            let mut fixed_mask = 0usize;
            let mut fixed_bits = 0usize;
            for i in 0..bits {
                match p % 3 {
                    1 => fixed_mask |= 1 << i,
                    2 => {
                        fixed_mask |= 1 << i;
                        fixed_bits |= 1 << i;
                    }
                    _ => {}
                }
                p /= 3;
            }
            (0..n).filter(|x| x & fixed_mask == fixed_bits).collect()
        })
        .collect()
}

/// `δ`–`ε` table for a linear action: `‖u − v‖ < δ` implies
/// `‖S_g u − S_g v‖ < ε` for every sampled `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityDiagnostic {
    /// Largest operator norm over the sample.
    pub lipschitz_bound: f64,
    /// Largest `‖S_g(u − v)‖ / ‖u − v‖` seen on cloud pairs.
    pub empirical_ratio: f64,
    /// Rows `[ε, δ]`.
    pub table: Vec<[f64; 2]>,
    pub passed: bool,
}

/// Orbit density of the heaviest cloud point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityDiagnostic {
    pub base_point: usize,
    /// `max_y min_g ‖y − S_g y₀‖` over the cloud.
    pub orbit_density: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// A linear action on a finite point cloud in `ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BKSystem {
    /// Distinct cloud points.
    pub points: Vec<Vec<f64>>,
    /// `ν`: mass of each cloud point.
    pub weights: Vec<f64>,
    /// Labels of the sampled group elements.
    pub labels: Vec<i64>,
    /// `S_g` for each sampled element.
    pub maps: Vec<DMatrix<f64>>,
    /// `1.05 · max_g ‖S_g‖`.
    pub c_bound: f64,
    /// `max ‖F(T_g x) − S_g F(x)‖` over states and sampled `g`.
    pub equivariance_residual: f64,
    /// For each sampled `g`, the cloud permutation induced by `S_g`, when
    /// `S_g` maps the cloud onto itself.
    pub permutations: Option<Vec<Vec<usize>>>,
    pub equicontinuity: EquicontinuityDiagnostic,
    pub minimality: MinimalityDiagnostic,
}

/// Tolerance for identifying two cloud points.
pub const CLOUD_MATCH: f64 = 1e-9;
const MINIMALITY_FRACTION: f64 = 0.25;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn apply(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).iter().copied().collect()
}

impl BKSystem {
    /// Builds a system from a cloud, its weights and the sampled maps.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>, labels: Vec<i64>, maps: Vec<DMatrix<f64>>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::invalid("cloud and weights must be non-empty and of equal length"));
        }
        let n = points[0].len();
        if points.iter().any(|p| p.len() != n) || maps.iter().any(|m| m.shape() != (n, n)) {
            return Err(Error::invalid("inconsistent cloud or map dimensions"));
        }
        if maps.is_empty() || labels.len() != maps.len() {
            return Err(Error::invalid("one label per sampled map is required"));
        }
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::invalid("cloud weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("cloud weights sum to {total}, not 1")));
        }
        let lipschitz = maps.iter().map(operator_norm).fold(0.0, f64::max);
        let diameter = points
            .iter()
            .flat_map(|a| points.iter().map(move |b| dist(a, b)))
            .fold(0.0, f64::max);
        if diameter < CLOUD_MATCH {
            return Err(Error::TrivialFactor("all cloud points coincide".into()));
        }

        let permutations = maps
            .iter()
            .map(|m| {
                points
                    .iter()
                    .map(|p| {
                        let q = apply(m, p);
                        points.iter().position(|r| dist(r, &q) < CLOUD_MATCH)
                    })
                    .collect::<Option<Vec<usize>>>()
            })
            .collect::<Option<Vec<_>>>();

        let mut empirical: f64 = 0.0;
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                let w: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let base = dist(a, b);
                for m in &maps {
                    empirical = empirical.max(dist(&apply(m, &w), &vec![0.0; n]) / base);
                }
            }
        }
        let table = [0.05, 0.1, 0.2, 0.4]
            .iter()
            .map(|f| {
                let eps = f * diameter;
                [eps, eps / lipschitz.max(1e-300)]
            })
            .collect();
        let equicontinuity = EquicontinuityDiagnostic {
            lipschitz_bound: lipschitz,
            empirical_ratio: empirical,
            table,
            passed: lipschitz.is_finite() && empirical <= lipschitz * (1.0 + 1e-9),
        };

        let base = (0..points.len())
            .max_by(|&i, &j| weights[i].total_cmp(&weights[j]).then(j.cmp(&i)))
            .expect("non-empty cloud");
        let mut orbit = vec![points[base].clone()];
        orbit.extend(maps.iter().map(|m| apply(m, &points[base])));
        let density = points
            .iter()
            .map(|y| orbit.iter().map(|o| dist(y, o)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        let threshold = MINIMALITY_FRACTION * diameter;
        let minimality = MinimalityDiagnostic {
            base_point: base,
            orbit_density: density,
            threshold,
            passed: density <= threshold,
        };

        Ok(BKSystem {
            points,
            weights,
            labels,
            maps,
            c_bound: 1.05 * lipschitz,
            equivariance_residual: 0.0,
            permutations,
            equicontinuity,
            minimality,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Euclidean distance between cloud points `i` and `j`.
    pub fn euclidean(&self, i: usize, j: usize) -> f64 {
        dist(&self.points[i], &self.points[j])
    }

    /// `max(‖w‖, max_h ‖S_h w‖)`, the invariant norm of a difference.
    pub fn invariant_norm(&self, w: &[f64]) -> f64 {
        let image_sq = |m: &DMatrix<f64>| -> f64 {
            (0..m.nrows())
                .map(|r| {
                    let y: f64 = (0..m.ncols()).map(|k| m[(r, k)] * w[k]).sum();
                    y * y
                })
                .sum()
        };
        let base: f64 = w.iter().map(|x| x * x).sum();
        self.maps.iter().map(image_sq).fold(base, f64::max).sqrt()
    }

    /// Cloud coordinates and weight, one row per point.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|k| format!("y{k}")).collect();
        writeln!(w, "{},weight", header.join(","))?;
        for (p, m) in self.points.iter().zip(&self.weights) {
            let row: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
            writeln!(w, "{},{m:?}", row.join(","))?;
        }
        Ok(())
    }
}

/// Realifies the subspace of `report` into a factor map `F: X → ℝⁿ` and
/// fits `S_g` for each sampled power `g` of the system's generator.
///
/// `resolution` sets the sampling grid on tori (ignored on point spaces).
pub fn extract_bk_factor(
    report: &InvariantSubspaceReport,
    system: &System,
    sample: &[i64],
    resolution: usize,
    tol: f64,
) -> Result<BKSystem> {
    if report.basis.is_empty() {
        return Err(Error::invalid("report has an empty basis"));
    }
    if sample.is_empty() {
        return Err(Error::invalid("group sample is empty"));
    }
    let pts = system.sample_points(resolution);
    let d = report.dim();
    let forms: Vec<L2Vector> = report.basis.iter().map(|f| system.composition_form(f)).collect();
    let realify = |p: &crate::spaces::Point| -> Result<Vec<f64>> {
        let mut row = vec![0.0; 2 * d];
        for (j, f) in forms.iter().enumerate() {
            let z = system.evaluate(f, p)?;
            row[j] = z.re;
            row[d + j] = z.im;
        }
        Ok(row)
    };
    let raw: Vec<Vec<f64>> = pts.iter().map(|(p, _)| realify(p)).collect::<Result<_>>()?;
    let weighted = DMatrix::from_fn(pts.len(), 2 * d, |i, k| raw[i][k] * pts[i].1.sqrt());
    let svd = weighted.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-9 * smax.max(1e-300) && smax > 1e-12)
        .collect();
    if keep.is_empty() {
        return Err(Error::TrivialFactor("the subspace functions vanish".into()));
    }
    let project = |row: &[f64]| -> Vec<f64> {
        keep.iter()
            .map(|&k| (0..2 * d).map(|j| v_t[(k, j)] * row[j]).sum::<f64>() / svd.singular_values[k])
            .collect()
    };
    let coords: Vec<Vec<f64>> = raw.iter().map(|r| project(r)).collect();
    let zero = vec![0.0; keep.len()];
    let radius = coords.iter().map(|y| dist(y, &zero)).fold(0.0, f64::max);
    let spread = coords.iter().map(|y| dist(y, &coords[0])).fold(0.0, f64::max);
    if spread < CLOUD_MATCH * radius.max(1.0) {
        return Err(Error::TrivialFactor("the factor map is constant".into()));
    }
    let f_of = |p: &crate::spaces::Point| -> Result<Vec<f64>> {
        Ok(project(&realify(p)?).into_iter().map(|x| x / radius).collect())
    };
    let ys: Vec<Vec<f64>> = coords.iter().map(|y| y.iter().map(|x| x / radius).collect()).collect();
    let n = keep.len();

    let mut gram = DMatrix::<f64>::zeros(n, n);
    for ((_, w), y) in pts.iter().zip(&ys) {
        let v = DVector::from_column_slice(y);
        gram += &v * v.transpose() * *w;
    }
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::numerical("factor coordinates are degenerate", f64::NAN))?;
    let mut maps = Vec::with_capacity(sample.len());
    let mut residual: f64 = 0.0;
    for &g in sample {
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|(p, _)| f_of(&system.act(p, g)?))
            .collect::<Result<_>>()?;
        let mut cross = DMatrix::<f64>::zeros(n, n);
        for (((_, w), y), z) in pts.iter().zip(&ys).zip(&moved) {
            cross += DVector::from_column_slice(z) * DVector::from_column_slice(y).transpose() * *w;
        }
        let s = cross * &gram_inv;
        for (y, z) in ys.iter().zip(&moved) {
            residual = residual.max(dist(&apply(&s, y), z));
        }
        maps.push(s);
    }
    if residual > tol {
        return Err(Error::numerical("factor map is not equivariant within tolerance", residual));
    }

    let mut cloud: Vec<Vec<f64>> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    for ((_, w), y) in pts.iter().zip(&ys) {
        match cloud.iter().position(|q| dist(q, y) < CLOUD_MATCH) {
            Some(i) => mass[i] += w,
            None => {
                cloud.push(y.clone());
                mass.push(*w);
            }
        }
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= total);
    let mut sys = BKSystem::new(cloud, mass, sample.to_vec(), maps)?;
    sys.equivariance_residual = residual;
    Ok(sys)
}

/// `gens` unitaries `V·blockdiag(W_1, …, W_r)·V*` on a uniform point space,
/// with `V` and every block drawn from seeded Haar unitaries. Generic
/// blocks are irreducible and pairwise inequivalent once `gens ≥ 2`.
pub fn block_constructed_system(
    block_sizes: &[usize],
    gens: usize,
    seed: u64,
    limits: &Limits,
) -> Result<Vec<KoopmanOperator>> {
    if block_sizes.is_empty() || block_sizes.contains(&0) || gens == 0 {
        return Err(Error::invalid("need positive block sizes and at least one generator"));
    }
    let n: usize = block_sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = random_unitary(n, &mut rng);
    let space = MeasureSpace::point_space(vec![1.0 / n as f64; n])?;
    (0..gens)
        .map(|_| {
            let mut d = CMatrix::zeros(n, n);
            let mut at = 0;
            for &b in block_sizes {
                d.view_mut((at, at), (b, b)).copy_from(&random_unitary(b, &mut rng));
                at += b;
            }
            KoopmanOperator::single(space.clone(), OperatorMatrix::Dense(&v * d * v.adjoint()), limits)
        })
        .collect()
}

/// Two generators on a 16-point uniform space: identity on the constants
/// and independent Haar unitaries on the 15-dimensional mean-zero space,
/// whose commutant there is trivial.
pub fn weakly_mixing_surrogate(seed: u64, limits: &Limits) -> Result<Vec<KoopmanOperator>> {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Householder reflection taking e₀ to the normalized constant
    let u = CVector::from_element(n, c(1.0 / (n as f64).sqrt()));
    let mut w = -u.clone();
    w[0] += c(1.0);
    let h = CMatrix::identity(n, n) - &w * w.adjoint() * c(2.0 / w.norm_squared());
    let space = MeasureSpace::point_space(vec![1.0 / n as f64; n])?;
    (0..2)
        .map(|_| {
            let mut d = CMatrix::zeros(n, n);
            d[(0, 0)] = c(1.0);
            d.view_mut((1, 1), (n - 1, n - 1)).copy_from(&random_unitary(n - 1, &mut rng));
            KoopmanOperator::single(space.clone(), OperatorMatrix::Dense(&h * d * &h), limits)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{build_fourier_rotation, build_odometer, koopman_of, SystemSpec};
    use crate::spectral::eigenvalue_set;

    fn lim() -> Limits {
        Limits::default()
    }

    #[test]
    fn rotation_modes_are_one_dimensional() {
        let alpha = 2f64.sqrt() - 1.0;
        let (space, u) = build_fourier_rotation(1, 3, &[alpha], &lim()).unwrap();
        let found = find_invariant_subspaces(&[u], 12, 1e-9, 1, &lim()).unwrap();
        assert_eq!(found.len(), 6);
        for r in &found {
            assert_eq!(r.dim(), 1);
            let modes = space.modes().unwrap();
            let idx = r.basis[0].coeffs.icamax();
            let k = modes[idx][0];
            assert_ne!(k, 0);
            let expect = crate::groups::unit_phase(k as f64 * alpha);
            assert!((r.matrices[0][(0, 0)] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn odometer_minus_one_subspace() {
        let (space, map) = build_odometer(2, 0.3).unwrap();
        let u = koopman_of(&map, &lim()).unwrap();
        let found = find_invariant_subspaces(&[u], 12, 1e-9, 3, &lim()).unwrap();
        let minus = found
            .iter()
            .find(|r| (r.matrices[0][(0, 0)] + c(1.0)).norm() < 1e-9)
            .expect("eigenvalue −1 subspace");
        let w = space.weights();
        let psi: Vec<f64> = (0..4).map(|x| minus.basis[0].coeffs[x].norm() * w[x].sqrt()).collect();
        for v in &psi {
            assert!((v - psi[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_has_no_nontrivial_subspace() {
        let space = MeasureSpace::point_space(vec![0.5, 0.5]).unwrap();
        let id = KoopmanOperator::identity(space, &lim()).unwrap();
        assert!(find_invariant_subspaces(&[id], 12, 1e-9, 0, &lim()).unwrap().is_empty());
    }

    #[test]
    fn odometer_invariant_measure_is_uniform() {
        let (_, map) = build_odometer(2, 0.3).unwrap();
        let u = koopman_of(&map, &lim()).unwrap();
        let e = eigenvalue_set(&u, 1e-9, &lim()).unwrap();
        let f = e
            .entries
            .iter()
            .find(|x| (x.eigenvalue + c(1.0)).norm() < 1e-9)
            .unwrap()
            .eigenfunction
            .clone();
        let report = InvariantSubspaceReport::from_basis(&[u], vec![f]).unwrap();
        let mu = build_invariant_measure(&report).unwrap();
        assert!(mu.iter().all(|m| (m - 0.25).abs() < 1e-12));
        let singletons: Vec<Vec<usize>> = (0..4).map(|x| vec![x]).collect();
        assert!(set_invariance_defect(&map, &mu, &singletons) < 1e-15);
    }

    #[test]
    fn cylinder_count() {
        let sets = cylinder_sets(2);
        assert_eq!(sets.len(), 9);
        assert!(sets.contains(&vec![0, 1, 2, 3]));
        assert!(sets.contains(&vec![1, 3]));
    }

    #[test]
    fn rotation_factor_is_the_circle() {
        let alpha = 2f64.sqrt() - 1.0;
        let sys = System::build(&SystemSpec::Rotation { angles: vec![alpha] }, 2, &lim()).unwrap();
        let space = sys.space().clone();
        let f = L2Vector::basis(space.size(), space.mode_index(&[1]).unwrap());
        let report = InvariantSubspaceReport::from_basis(&[sys.koopman().clone()], vec![f]).unwrap();
        let bk = extract_bk_factor(&report, &sys, &[1], 64, 1e-9).unwrap();
        assert_eq!(bk.dim(), 2);
        for p in &bk.points {
            assert!((dist(p, &[0.0, 0.0]) - 1.0).abs() < 1e-12);
        }
        let s = &bk.maps[0];
        assert!((s.transpose() * s - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((s.trace() - 2.0 * (std::f64::consts::TAU * alpha).cos()).abs() < 1e-12);
    }

    #[test]
    fn constant_subspace_is_trivial() {
        let sys = System::build(&SystemSpec::Odometer { bits: 2, p: 0.5 }, 1, &lim()).unwrap();
        let f = L2Vector::new(sys.space().constant_vector());
        let report = InvariantSubspaceReport::from_basis(&[sys.koopman().clone()], vec![f]).unwrap();
        let err = extract_bk_factor(&report, &sys, &[1], 1, 1e-9);
        assert!(matches!(err, Err(Error::TrivialFactor(_))));
    }

    #[test]
    fn odometer_sign_factor_is_a_swap() {
        let sys = System::build(&SystemSpec::Odometer { bits: 2, p: 0.3 }, 1, &lim()).unwrap();
        let e = eigenvalue_set(sys.koopman(), 1e-9, &lim()).unwrap();
        let f = e
            .entries
            .iter()
            .find(|x| (x.eigenvalue + c(1.0)).norm() < 1e-9)
            .unwrap()
            .eigenfunction
            .clone();
        let report = InvariantSubspaceReport::from_basis(&[sys.koopman().clone()], vec![f]).unwrap();
        let bk = extract_bk_factor(&report, &sys, &[1], 1, 1e-9).unwrap();
        assert_eq!(bk.len(), 2);
        assert_eq!(bk.dim(), 1);
        assert!((bk.points[0][0] + bk.points[1][0]).abs() < 1e-12);
        assert!((bk.maps[0][(0, 0)] + 1.0).abs() < 1e-12);
        assert!(bk.equivariance_residual < 1e-12);
        assert_eq!(bk.permutations.as_ref().unwrap()[0], vec![1, 0]);
    }

    #[test]
    fn block_system_dimensions_are_recovered() {
        let gens = block_constructed_system(&[3, 1, 5, 2], 2, 11, &lim()).unwrap();
        assert_eq!(commutant_rank(&gens, &lim()).unwrap(), 4);
        let found = find_invariant_subspaces(&gens, 12, 1e-8, 0, &lim()).unwrap();
        let dims: Vec<usize> = found.iter().map(|r| r.dim()).collect();
        assert_eq!(dims, vec![1, 2, 3, 5]);
    }

    #[test]
    fn surrogate_has_no_subspace() {
        let gens = weakly_mixing_surrogate(4, &lim()).unwrap();
        assert_eq!(commutant_rank(&gens, &lim()).unwrap(), 2);
        assert!(find_invariant_subspaces(&gens, 12, 1e-8, 0, &lim()).unwrap().is_empty());
    }
}
