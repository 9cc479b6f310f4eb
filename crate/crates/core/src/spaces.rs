//! Finite measure spaces, non-singular maps and their Koopman isometries
//! `(U_T f)(x) = √(d(m∘T)/dm)(x) · f(Tx)`.
//!
//! Two models are provided. A [`MeasureSpace::FourierTorus`] stores a
//! function on `𝕋ᵈ` by its Fourier coefficients on the modes `|kᵢ| ≤ K`;
//! rotations act diagonally there and every quantity is exact at the
//! cutoff. A [`MeasureSpace::PointSpace`] is a finite set with weights,
//! on which invertible maps act by permutation together with their
//! Radon–Nikodym weights. Products of either kind are kept in factored
//! (Kronecker) form.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::groups::unit_phase;
use crate::linalg::{c, kron, CMatrix, CVector};
use crate::{Error, Limits, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpace {
    /// Fourier modes `k ∈ ℤᵈ` with `|kᵢ| ≤ cutoff` of Lebesgue measure on `𝕋ᵈ`.
    FourierTorus { dim: usize, cutoff: usize },
    /// `n` states with probability weights `m_i`.
    PointSpace { weights: Vec<f64> },
    /// Product space; basis index `(i, j)` is `i·size(right) + j`.
    Product {
        left: Box<MeasureSpace>,
        right: Box<MeasureSpace>,
    },
}

impl MeasureSpace {
    pub fn fourier_torus(dim: usize, cutoff: usize) -> Result<Self> {
        if dim == 0 || cutoff == 0 {
            return Err(Error::invalid("Fourier torus needs dim ≥ 1 and cutoff ≥ 1"));
        }
        Ok(MeasureSpace::FourierTorus { dim, cutoff })
    }

    pub fn point_space(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("point space needs at least one state"));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("point-space weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("point-space weights sum to {total}, not 1")));
        }
        Ok(MeasureSpace::PointSpace { weights })
    }

    pub fn product(left: MeasureSpace, right: MeasureSpace) -> Self {
        MeasureSpace::Product {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Number of basis states (modes or points).
    pub fn size(&self) -> usize {
        match self {
            MeasureSpace::FourierTorus { dim, cutoff } => (2 * cutoff + 1).pow(*dim as u32),
            MeasureSpace::PointSpace { weights } => weights.len(),
            MeasureSpace::Product { left, right } => left.size() * right.size(),
        }
    }

    /// Weights of the inner product `⟨f, g⟩ = Σ wᵢ fᵢ conj(gᵢ)`. Fourier
    /// coefficients are orthonormal (Parseval), so their weights are one.
    pub fn weights(&self) -> Vec<f64> {
        match self {
            MeasureSpace::FourierTorus { .. } => vec![1.0; self.size()],
            MeasureSpace::PointSpace { weights } => weights.clone(),
            MeasureSpace::Product { left, right } => {
                let (l, r) = (left.weights(), right.weights());
                l.iter().flat_map(|a| r.iter().map(move |b| a * b)).collect()
            }
        }
    }

    /// Mode vectors in basis order (lexicographic over `[−K, K]ᵈ`).
    /// Products concatenate the modes of their factors; point spaces have
    /// no modes.
    pub fn modes(&self) -> Option<Vec<Vec<i64>>> {
        match self {
            MeasureSpace::FourierTorus { dim, cutoff } => {
                let k = *cutoff as i64;
                let mut out: Vec<Vec<i64>> = vec![Vec::new()];
                for _ in 0..*dim {
                    out = out
                        .into_iter()
                        .flat_map(|p| {
                            (-k..=k).map(move |v| {
                                let mut q = p.clone();
                                q.push(v);
                                q
                            })
                        })
                        .collect();
                }
                Some(out)
            }
            MeasureSpace::PointSpace { .. } => None,
            MeasureSpace::Product { left, right } => {
                let (l, r) = (left.modes()?, right.modes()?);
                Some(
                    l.iter()
                        .flat_map(|a| {
                            r.iter().map(move |b| {
                                let mut v = a.clone();
                                v.extend_from_slice(b);
                                v
                            })
                        })
                        .collect(),
                )
            }
        }
    }

    /// Basis index of a mode, if it lies within the cutoff.
    pub fn mode_index(&self, mode: &[i64]) -> Option<usize> {
        match self {
            MeasureSpace::FourierTorus { dim, cutoff } => {
                if mode.len() != *dim {
                    return None;
                }
                let k = *cutoff as i64;
                let side = 2 * k + 1;
                mode.iter().try_fold(0i64, |acc, &v| {
                    (v.abs() <= k).then_some(acc * side + v + k)
                }).map(|i| i as usize)
            }
            MeasureSpace::PointSpace { .. } => None,
            MeasureSpace::Product { left, right } => {
                let dl = left.modes()?.first()?.len();
                if mode.len() < dl {
                    return None;
                }
                let i = left.mode_index(&mode[..dl])?;
                let j = right.mode_index(&mode[dl..])?;
                Some(i * right.size() + j)
            }
        }
    }

    /// Index of the basis vector representing the constant function `1`.
    pub fn constant_vector(&self) -> CVector {
        match self {
            MeasureSpace::FourierTorus { dim, .. } => {
                let mut v = CVector::zeros(self.size());
                v[self.mode_index(&vec![0; *dim]).expect("zero mode")] = c(1.0);
                v
            }
            MeasureSpace::PointSpace { weights } => CVector::from_element(weights.len(), c(1.0)),
            MeasureSpace::Product { left, right } => {
                crate::linalg::kron_vec(&left.constant_vector(), &right.constant_vector())
            }
        }
    }
}

/// A complex function on a [`MeasureSpace`], stored by its coefficients
/// (point values or Fourier coefficients).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Vector {
    pub coeffs: CVector,
}

impl L2Vector {
    pub fn new(coeffs: CVector) -> Self {
        L2Vector { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        L2Vector::new(CVector::zeros(n))
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = CVector::zeros(n);
        v[i] = c(1.0);
        L2Vector::new(v)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn inner(&self, other: &L2Vector, space: &MeasureSpace) -> C64 {
        space
            .weights()
            .iter()
            .zip(self.coeffs.iter().zip(other.coeffs.iter()))
            .map(|(w, (a, b))| a * b.conj() * w)
            .sum()
    }

    pub fn norm(&self, space: &MeasureSpace) -> f64 {
        space
            .weights()
            .iter()
            .zip(self.coeffs.iter())
            .map(|(w, a)| w * a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Coefficients in the orthonormal basis (`√wᵢ · fᵢ`).
    pub fn to_orthonormal(&self, space: &MeasureSpace) -> CVector {
        let w = space.weights();
        CVector::from_fn(self.len(), |i, _| self.coeffs[i] * w[i].sqrt())
    }

    pub fn from_orthonormal(v: &CVector, space: &MeasureSpace) -> Self {
        let w = space.weights();
        L2Vector::new(CVector::from_fn(v.len(), |i, _| {
            if w[i] > 0.0 {
                v[i] / w[i].sqrt()
            } else {
                c(0.0)
            }
        }))
    }

    /// The complex conjugate function. On Fourier spaces this also
    /// reflects the modes, `conj(Σ c_k e_k) = Σ conj(c_k) e_{−k}`.
    pub fn conjugate(&self, space: &MeasureSpace) -> L2Vector {
        match space.modes() {
            Some(modes) => {
                let mut out = CVector::zeros(self.len());
                for (i, k) in modes.iter().enumerate() {
                    let neg: Vec<i64> = k.iter().map(|v| -v).collect();
                    let j = space.mode_index(&neg).expect("mode sets are symmetric");
                    out[j] = self.coeffs[i].conj();
                }
                L2Vector::new(out)
            }
            None => L2Vector::new(self.coeffs.map(|z| z.conj())),
        }
    }

    /// Value of a Fourier-space function at a point of `𝕋ᵈ`.
    pub fn evaluate_torus(&self, space: &MeasureSpace, x: &[f64]) -> Result<C64> {
        let modes = space
            .modes()
            .ok_or_else(|| Error::invalid("point evaluation needs a Fourier space"))?;
        let mut total = c(0.0);
        for (k, a) in modes.iter().zip(self.coeffs.iter()) {
            if k.len() != x.len() {
                return Err(Error::invalid("point dimension does not match the torus"));
            }
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let t: f64 = k.iter().zip(x).map(|(&ki, &xi)| ki as f64 * xi).sum();
            total += a * unit_phase(t);
        }
        Ok(total)
    }
}

/// An invertible non-singular map of a point space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonSingularMap {
    /// The measure `m` of the underlying point space.
    pub weights: Vec<f64>,
    /// `image[x] = T(x)`; a permutation of the states.
    pub image: Vec<usize>,
    /// `rn_weight[x] = d(m∘T)/dm (x) = m(Tx)/m(x)`.
    pub rn_weight: Vec<f64>,
}

impl NonSingularMap {
    /// Builds the map from a permutation, computing its Radon–Nikodym
    /// weights from the measure.
    pub fn from_permutation(weights: Vec<f64>, image: Vec<usize>) -> Result<Self> {
        MeasureSpace::point_space(weights.clone())?;
        if image.len() != weights.len() {
            return Err(Error::invalid("image length does not match the number of states"));
        }
        let mut seen = vec![false; image.len()];
        for &y in &image {
            if y >= image.len() || std::mem::replace(&mut seen[y], true) {
                return Err(Error::invalid("state map is not a permutation"));
            }
        }
        let mut rn = Vec::with_capacity(image.len());
        for (x, &y) in image.iter().enumerate() {
            if weights[x] <= 0.0 || weights[y] <= 0.0 {
                return Err(Error::NonSingular {
                    state: x,
                    weight: if weights[x] <= 0.0 { f64::INFINITY } else { 0.0 },
                });
            }
            rn.push(weights[y] / weights[x]);
        }
        Ok(NonSingularMap {
            weights,
            image,
            rn_weight: rn,
        })
    }

    pub fn identity(weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        Self::from_permutation(weights, (0..n).collect())
    }

    pub fn space(&self) -> MeasureSpace {
        MeasureSpace::PointSpace {
            weights: self.weights.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn is_measure_preserving(&self, tol: f64) -> bool {
        self.rn_weight.iter().all(|w| (w - 1.0).abs() <= tol)
    }

    /// `Tᵏ(x)` for any integer `k`.
    pub fn apply_power(&self, x: usize, k: i64) -> usize {
        let mut y = x;
        if k >= 0 {
            for _ in 0..k {
                y = self.image[y];
            }
        } else {
            let inv = self.inverse_image();
            for _ in 0..(-k) {
                y = inv[y];
            }
        }
        y
    }

    pub fn inverse_image(&self) -> Vec<usize> {
        let mut inv = vec![0; self.image.len()];
        for (x, &y) in self.image.iter().enumerate() {
            inv[y] = x;
        }
        inv
    }

    /// `|Σ_x rn(x)·m(x) − 1|`; zero for a non-singular permutation.
    pub fn mass_defect(&self) -> f64 {
        let total: f64 = self
            .rn_weight
            .iter()
            .zip(&self.weights)
            .map(|(r, m)| r * m)
            .sum();
        (total - 1.0).abs()
    }
}

/// Storage for one Kronecker factor of a Koopman operator, acting on
/// coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorMatrix {
    /// `(Uf)_i = d_i f_i`.
    Diagonal(CVector),
    /// `(Uf)_x = scale_x · f_{target_x}`.
    WeightedPermutation { target: Vec<usize>, scale: Vec<C64> },
    Dense(CMatrix),
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        match self {
            OperatorMatrix::Diagonal(d) => d.len(),
            OperatorMatrix::WeightedPermutation { target, .. } => target.len(),
            OperatorMatrix::Dense(m) => m.nrows(),
        }
    }

    pub fn stored_entries(&self) -> usize {
        match self {
            OperatorMatrix::Diagonal(d) => d.len(),
            OperatorMatrix::WeightedPermutation { target, .. } => target.len(),
            OperatorMatrix::Dense(m) => m.len(),
        }
    }

    pub fn apply(&self, f: &CVector) -> CVector {
        match self {
            OperatorMatrix::Diagonal(d) => d.component_mul(f),
            OperatorMatrix::WeightedPermutation { target, scale } => {
                CVector::from_fn(f.len(), |x, _| scale[x] * f[target[x]])
            }
            OperatorMatrix::Dense(m) => m * f,
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            OperatorMatrix::Diagonal(d) => CMatrix::from_diagonal(d),
            OperatorMatrix::WeightedPermutation { target, scale } => {
                let n = target.len();
                let mut m = CMatrix::zeros(n, n);
                for x in 0..n {
                    m[(x, target[x])] = scale[x];
                }
                m
            }
            OperatorMatrix::Dense(m) => m.clone(),
        }
    }

    /// Conjugates by `diag(√w)`, giving the matrix in orthonormal
    /// coordinates.
    fn orthonormalized(&self, w: &[f64]) -> OperatorMatrix {
        match self {
            OperatorMatrix::Diagonal(d) => OperatorMatrix::Diagonal(d.clone()),
            OperatorMatrix::WeightedPermutation { target, scale } => OperatorMatrix::WeightedPermutation {
                target: target.clone(),
                scale: (0..target.len())
                    .map(|x| scale[x] * (w[x] / w[target[x]]).sqrt())
                    .collect(),
            },
            OperatorMatrix::Dense(m) => {
                let n = m.nrows();
                OperatorMatrix::Dense(CMatrix::from_fn(n, n, |i, j| {
                    m[(i, j)] * (w[i] / w[j]).sqrt()
                }))
            }
        }
    }
}

/// One Kronecker factor: a component space and the operator on it.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanFactor {
    pub space: MeasureSpace,
    pub matrix: OperatorMatrix,
}

/// The Koopman operator `U_T` on a (possibly product) space, stored as a
/// Kronecker product of factors.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanOperator {
    pub space: MeasureSpace,
    pub factors: Vec<KoopmanFactor>,
}

impl KoopmanOperator {
    pub fn single(space: MeasureSpace, matrix: OperatorMatrix, limits: &Limits) -> Result<Self> {
        if matrix.dim() != space.size() {
            return Err(Error::invalid(format!(
                "operator dimension {} does not match space size {}",
                matrix.dim(),
                space.size()
            )));
        }
        limits.check("operator dimension", space.size())?;
        limits.check("stored operator entries", matrix.stored_entries())?;
        Ok(KoopmanOperator {
            space: space.clone(),
            factors: vec![KoopmanFactor { space, matrix }],
        })
    }

    pub fn identity(space: MeasureSpace, limits: &Limits) -> Result<Self> {
        let n = space.size();
        Self::single(space, OperatorMatrix::Diagonal(CVector::from_element(n, c(1.0))), limits)
    }

    pub fn dim(&self) -> usize {
        self.space.size()
    }

    pub fn stored_entries(&self) -> usize {
        self.factors.iter().map(|f| f.matrix.stored_entries()).sum()
    }

    /// `U f`, applying each Kronecker factor along its own axis.
    pub fn apply(&self, f: &L2Vector) -> L2Vector {
        let mut v = f.coeffs.clone();
        let dims: Vec<usize> = self.factors.iter().map(|k| k.matrix.dim()).collect();
        let total: usize = dims.iter().product();
        assert_eq!(v.len(), total, "vector length does not match operator");
        let mut inner = total;
        let mut outer = 1;
        for (axis, factor) in self.factors.iter().enumerate() {
            let n = dims[axis];
            inner /= n;
            let mut out = CVector::zeros(total);
            let mut fiber = CVector::zeros(n);
            for o in 0..outer {
                for i in 0..inner {
                    for k in 0..n {
                        fiber[k] = v[(o * n + k) * inner + i];
                    }
                    let g = factor.matrix.apply(&fiber);
                    for k in 0..n {
                        out[(o * n + k) * inner + i] = g[k];
                    }
                }
            }
            v = out;
            outer *= n;
        }
        L2Vector::new(v)
    }

    /// Factors conjugated into orthonormal coordinates, where the operator
    /// is unitary.
    pub fn unitary_factors(&self) -> Vec<OperatorMatrix> {
        self.factors
            .iter()
            .map(|f| f.matrix.orthonormalized(&f.space.weights()))
            .collect()
    }

    /// Dense matrix in orthonormal coordinates.
    pub fn unitary_dense(&self, limits: &Limits) -> Result<CMatrix> {
        limits.check("dense operator dimension", self.dim())?;
        let mut factors = self.unitary_factors().into_iter();
        let first = factors.next().expect("at least one factor").to_dense();
        Ok(factors.fold(first, |acc, f| kron(&acc, &f.to_dense())))
    }

    /// Dense matrix acting on coefficient vectors.
    pub fn dense(&self, limits: &Limits) -> Result<CMatrix> {
        limits.check("dense operator dimension", self.dim())?;
        let mut factors = self.factors.iter();
        let first = factors.next().expect("at least one factor").matrix.to_dense();
        Ok(factors.fold(first, |acc, f| kron(&acc, &f.matrix.to_dense())))
    }

    /// True when every factor is real and maps nonnegative functions to
    /// nonnegative functions (always the case for maps of point spaces).
    pub fn is_positive(&self) -> bool {
        self.factors.iter().all(|f| match (&f.space, &f.matrix) {
            (MeasureSpace::PointSpace { .. }, OperatorMatrix::WeightedPermutation { scale, .. }) => {
                scale.iter().all(|s| s.im == 0.0 && s.re >= 0.0)
            }
            (MeasureSpace::PointSpace { .. }, OperatorMatrix::Diagonal(d)) => {
                d.iter().all(|s| s.im == 0.0 && s.re >= 0.0)
            }
            _ => false,
        })
    }

    /// `Uⁿ` for `n ≥ 0`, computed factor by factor.
    pub fn power(&self, n: u64, limits: &Limits) -> Result<KoopmanOperator> {
        let factors = self
            .factors
            .iter()
            .map(|f| {
                let matrix = match &f.matrix {
                    OperatorMatrix::Diagonal(d) => {
                        OperatorMatrix::Diagonal(d.map(|z| z.powu(n as u32)))
                    }
                    OperatorMatrix::WeightedPermutation { target, scale } => {
                        let len = target.len();
                        let mut t: Vec<usize> = (0..len).collect();
                        let mut s = vec![c(1.0); len];
                        for _ in 0..n {
                            // (U·V)f(x) = s(x)·(Vf)(t(x)) composed with one more step
                            for x in 0..len {
                                let y = t[x];
                                s[x] *= scale[y];
                                t[x] = target[y];
                            }
                        }
                        OperatorMatrix::WeightedPermutation { target: t, scale: s }
                    }
                    OperatorMatrix::Dense(m) => OperatorMatrix::Dense(m.pow(n as u32)),
                };
                KoopmanFactor {
                    space: f.space.clone(),
                    matrix,
                }
            })
            .collect();
        let op = KoopmanOperator {
            space: self.space.clone(),
            factors,
        };
        limits.check("stored operator entries", op.stored_entries())?;
        Ok(op)
    }
}

/// Rotation of `𝕋ᵈ` by `angles` in the Fourier model with cutoff `K`:
/// diagonal with entry `exp(2πi⟨k, angles⟩)` at mode `k`.
pub fn build_fourier_rotation(
    dim: usize,
    cutoff: usize,
    angles: &[f64],
    limits: &Limits,
) -> Result<(MeasureSpace, KoopmanOperator)> {
    if angles.len() != dim {
        return Err(Error::invalid(format!(
            "rotation needs {dim} angles, got {}",
            angles.len()
        )));
    }
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("rotation angles must be finite"));
    }
    let space = MeasureSpace::fourier_torus(dim, cutoff)?;
    limits.check("operator dimension", space.size())?;
    let modes = space.modes().expect("Fourier space");
    let diag = CVector::from_iterator(
        modes.len(),
        modes.iter().map(|k| {
            let t: f64 = k.iter().zip(angles).map(|(&ki, a)| ki as f64 * a).sum();
            unit_phase(t)
        }),
    );
    let op = KoopmanOperator::single(space.clone(), OperatorMatrix::Diagonal(diag), limits)?;
    Ok((space, op))
}

/// Measure of an `n`-bit odometer state: `Π p` over zero bits and
/// `Π (1−p)` over one bits. Bit `i` of the index is coordinate `i`.
pub fn odometer_measure(bits: u32, p: f64) -> Vec<f64> {
    (0..1usize << bits)
        .map(|x| {
            (0..bits)
                .map(|i| if (x >> i) & 1 == 0 { p } else { 1.0 - p })
                .product()
        })
        .collect()
}

/// Closed-form `m(Tx)/m(x)` for the add-one-with-carry map: with `r` the
/// number of trailing ones of `x`, the ratio is `(p/(1−p))^r·((1−p)/p)`,
/// or `(p/(1−p))^n` when every bit carries.
pub fn odometer_rn_weight(bits: u32, p: f64, x: usize) -> f64 {
    let r = (x.trailing_ones()).min(bits);
    let q = 1.0 - p;
    if r == bits {
        (p / q).powi(bits as i32)
    } else {
        (p / q).powi(r as i32) * (q / p)
    }
}

/// The `n`-bit odometer (binary adding machine) with the product measure
/// giving each bit the value 0 with probability `p`.
pub fn build_odometer(bits: u32, p: f64) -> Result<(MeasureSpace, NonSingularMap)> {
    if !(2..=20).contains(&bits) {
        return Err(Error::invalid(format!("odometer bits must be in 2..=20, got {bits}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("odometer p must lie in (0, 1), got {p}")));
    }
    let n = 1usize << bits;
    let weights = odometer_measure(bits, p);
    let image: Vec<usize> = (0..n).map(|x| (x + 1) % n).collect();
    let rn_weight: Vec<f64> = (0..n).map(|x| odometer_rn_weight(bits, p, x)).collect();
    let map = NonSingularMap {
        weights: weights.clone(),
        image,
        rn_weight,
    };
    Ok((MeasureSpace::PointSpace { weights }, map))
}

/// `(Uf)(x) = √rn(x) · f(Tx)`.
pub fn koopman_of(map: &NonSingularMap, limits: &Limits) -> Result<KoopmanOperator> {
    for (x, &w) in map.rn_weight.iter().enumerate() {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::NonSingular { state: x, weight: w });
        }
    }
    let matrix = OperatorMatrix::WeightedPermutation {
        target: map.image.clone(),
        scale: map.rn_weight.iter().map(|w| c(w.sqrt())).collect(),
    };
    KoopmanOperator::single(map.space(), matrix, limits)
}

/// `U ⊗ V` on the product space, kept in factored form.
pub fn product_koopman(
    u: &KoopmanOperator,
    v: &KoopmanOperator,
    limits: &Limits,
) -> Result<KoopmanOperator> {
    let dim = u.dim().checked_mul(v.dim()).ok_or_else(|| Error::SizeCap {
        what: "product dimension".into(),
        requested: usize::MAX,
        cap: limits.size_cap,
    })?;
    limits.check("product dimension", dim)?;
    limits.check("stored operator entries", u.stored_entries() + v.stored_entries())?;
    let mut factors = u.factors.clone();
    factors.extend(v.factors.iter().cloned());
    Ok(KoopmanOperator {
        space: MeasureSpace::product(u.space.clone(), v.space.clone()),
        factors,
    })
}

/// Which single-generator system a [`System`] models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// Rotation of `𝕋ᵈ` by the given angles (in turns).
    Rotation { angles: Vec<f64> },
    /// `bits`-bit odometer with bit-zero probability `p`.
    Odometer { bits: u32, p: f64 },
}

/// A point of a system's phase space.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    State(usize),
    Torus(Vec<f64>),
}

/// A `ℤ`-action together with its Koopman operator.
#[derive(Debug, Clone)]
pub enum System {
    Rotation {
        angles: Vec<f64>,
        space: MeasureSpace,
        koopman: KoopmanOperator,
    },
    Map {
        map: NonSingularMap,
        space: MeasureSpace,
        koopman: KoopmanOperator,
    },
}

impl System {
    /// Builds the system; `cutoff` is the Fourier cutoff for rotations.
    pub fn build(spec: &SystemSpec, cutoff: usize, limits: &Limits) -> Result<Self> {
        match spec {
            SystemSpec::Rotation { angles } => {
                let (space, koopman) = build_fourier_rotation(angles.len(), cutoff, angles, limits)?;
                Ok(System::Rotation {
                    angles: angles.clone(),
                    space,
                    koopman,
                })
            }
            SystemSpec::Odometer { bits, p } => {
                let (space, map) = build_odometer(*bits, *p)?;
                limits.check("operator dimension", space.size())?;
                let koopman = koopman_of(&map, limits)?;
                Ok(System::Map { map, space, koopman })
            }
        }
    }

    pub fn from_map(map: NonSingularMap, limits: &Limits) -> Result<Self> {
        let koopman = koopman_of(&map, limits)?;
        Ok(System::Map {
            space: map.space(),
            map,
            koopman,
        })
    }

    pub fn space(&self) -> &MeasureSpace {
        match self {
            System::Rotation { space, .. } | System::Map { space, .. } => space,
        }
    }

    pub fn koopman(&self) -> &KoopmanOperator {
        match self {
            System::Rotation { koopman, .. } | System::Map { koopman, .. } => koopman,
        }
    }

    pub fn is_measure_preserving(&self) -> bool {
        match self {
            System::Rotation { .. } => true,
            System::Map { map, .. } => map.is_measure_preserving(1e-12),
        }
    }

    /// `Tᵏ(point)`.
    pub fn act(&self, point: &Point, k: i64) -> Result<Point> {
        match (self, point) {
            (System::Rotation { angles, .. }, Point::Torus(x)) if x.len() == angles.len() => Ok(
                Point::Torus(
                    x.iter()
                        .zip(angles)
                        .map(|(xi, a)| crate::groups::wrap_unit(xi + k as f64 * a))
                        .collect(),
                ),
            ),
            (System::Map { map, .. }, Point::State(x)) if *x < map.len() => {
                Ok(Point::State(map.apply_power(*x, k)))
            }
            _ => Err(Error::invalid("point does not belong to this system")),
        }
    }

    /// Value of `f` at a point.
    pub fn evaluate(&self, f: &L2Vector, point: &Point) -> Result<C64> {
        match (self, point) {
            (System::Rotation { space, .. }, Point::Torus(x)) => f.evaluate_torus(space, x),
            (System::Map { .. }, Point::State(x)) if *x < f.len() => Ok(f.coeffs[*x]),
            _ => Err(Error::invalid("point does not belong to this system")),
        }
    }

    /// Sample points with weights: the states of a point space, or a
    /// uniform grid with `resolution` points per axis on the torus.
    pub fn sample_points(&self, resolution: usize) -> Vec<(Point, f64)> {
        match self {
            System::Map { map, .. } => map
                .weights
                .iter()
                .enumerate()
                .map(|(x, &w)| (Point::State(x), w))
                .collect(),
            System::Rotation { angles, .. } => {
                let d = angles.len();
                let total = resolution.pow(d as u32);
                let w = 1.0 / total as f64;
                (0..total)
                    .map(|mut idx| {
                        let mut x = vec![0.0; d];
                        for xi in x.iter_mut().rev() {
                            *xi = (idx % resolution) as f64 / resolution as f64;
                            idx /= resolution;
                        }
                        (Point::Torus(x), w)
                    })
                    .collect()
            }
        }
    }

    /// The function as seen by the action itself (`f∘T = λf` form). For a
    /// point space this is `√m · f`, which turns eigenvectors of the
    /// Koopman isometry into eigenfunctions of composition; rotations are
    /// measure preserving and need no change.
    pub fn composition_form(&self, f: &L2Vector) -> L2Vector {
        match self {
            System::Rotation { .. } => f.clone(),
            System::Map { map, .. } => L2Vector::new(CVector::from_fn(f.len(), |x, _| {
                f.coeffs[x] * map.weights[x].sqrt()
            })),
        }
    }
}

/// Real matrix of `U` restricted to real vectors, used in tests and
/// reports for point-space operators.
pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::unit_phase;

    fn lim() -> Limits {
        Limits::default()
    }

    #[test]
    fn rotation_quarter_turn() {
        let (space, u) = build_fourier_rotation(1, 1, &[0.25], &lim()).unwrap();
        assert_eq!(space.size(), 3);
        let d = match &u.factors[0].matrix {
            OperatorMatrix::Diagonal(d) => d.clone(),
            _ => panic!("rotation must be diagonal"),
        };
        let expect = [C64::new(0.0, -1.0), c(1.0), C64::new(0.0, 1.0)];
        for (a, b) in d.iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn rotation_zero_angle_is_identity() {
        let (space, u) = build_fourier_rotation(2, 2, &[0.0, 0.0], &lim()).unwrap();
        let id = KoopmanOperator::identity(space, &lim()).unwrap();
        assert_eq!(u.dense(&lim()).unwrap(), id.dense(&lim()).unwrap());
    }

    #[test]
    fn rotation_2d_mode_entry() {
        let (a, b) = (0.1234, 0.4321);
        let (space, u) = build_fourier_rotation(2, 1, &[a, b], &lim()).unwrap();
        let i = space.mode_index(&[1, 1]).unwrap();
        let f = L2Vector::basis(space.size(), i);
        let g = u.apply(&f);
        assert!((g.coeffs[i] - unit_phase(a + b)).norm() < 1e-14);
    }

    #[test]
    fn odometer_uniform_case() {
        let (space, map) = build_odometer(2, 0.5).unwrap();
        assert_eq!(space.weights(), vec![0.25; 4]);
        assert!(map.rn_weight.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn odometer_biased_weights() {
        let (space, map) = build_odometer(2, 0.3).unwrap();
        let w = space.weights();
        assert!((w[0] - 0.09).abs() < 1e-15);
        // T(0,0) = (1,0), the state with index 1
        assert_eq!(map.image[0], 1);
        assert!((w[1] - 0.21).abs() < 1e-15);
        assert!((map.rn_weight[0] - 7.0 / 3.0).abs() < 1e-14);
        // closed form agrees with the direct quotient everywhere
        for x in 0..4 {
            let direct = w[map.image[x]] / w[x];
            assert!((map.rn_weight[x] - direct).abs() < 1e-13);
        }
        assert!(map.mass_defect() < 1e-14);
    }

    #[test]
    fn odometer_is_single_cycle() {
        let (_, map) = build_odometer(2, 0.3).unwrap();
        for x in 0..4 {
            assert_eq!(map.apply_power(x, 4), x);
            assert!((1..4).all(|k| map.apply_power(x, k) != x));
        }
    }

    #[test]
    fn odometer_rejects_bad_parameters() {
        assert!(build_odometer(1, 0.3).is_err());
        assert!(build_odometer(21, 0.3).is_err());
        assert!(build_odometer(4, 0.0).is_err());
        assert!(build_odometer(4, 1.0).is_err());
    }

    #[test]
    fn identity_map_gives_identity_operator() {
        let map = NonSingularMap::identity(vec![0.2, 0.3, 0.5]).unwrap();
        let u = koopman_of(&map, &lim()).unwrap();
        assert_eq!(u.dense(&lim()).unwrap(), CMatrix::identity(3, 3));
    }

    #[test]
    fn uniform_odometer_is_permutation() {
        let (_, map) = build_odometer(2, 0.5).unwrap();
        let u = koopman_of(&map, &lim()).unwrap().dense(&lim()).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                let expect = if y == (x + 1) % 4 { 1.0 } else { 0.0 };
                assert_eq!(u[(x, y)], c(expect));
            }
        }
    }

    #[test]
    fn biased_odometer_isometry_on_indicator() {
        let (space, map) = build_odometer(2, 0.3).unwrap();
        let u = koopman_of(&map, &lim()).unwrap();
        let f = L2Vector::basis(4, 0);
        assert!((f.norm(&space).powi(2) - 0.09).abs() < 1e-15);
        let g = u.apply(&f);
        // supported on the preimage of (0,0), the all-ones state
        let support: Vec<usize> = (0..4).filter(|&x| g.coeffs[x].norm() > 0.0).collect();
        assert_eq!(support, vec![3]);
        assert!((g.norm(&space) - f.norm(&space)).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_is_rejected() {
        let map = NonSingularMap {
            weights: vec![0.5, 0.5],
            image: vec![1, 0],
            rn_weight: vec![1.0, 0.0],
        };
        assert!(matches!(koopman_of(&map, &lim()), Err(Error::NonSingular { state: 1, .. })));
        assert!(NonSingularMap::from_permutation(vec![1.0, 0.0], vec![1, 0]).is_err());
    }

    #[test]
    fn product_of_rotations() {
        let (a, b) = (0.31, 0.77);
        let (s1, u) = build_fourier_rotation(1, 2, &[a], &lim()).unwrap();
        let (s2, v) = build_fourier_rotation(1, 3, &[b], &lim()).unwrap();
        let w = product_koopman(&u, &v, &lim()).unwrap();
        assert_eq!(w.dim(), s1.size() * s2.size());
        let i = w.space.mode_index(&[2, -3]).unwrap();
        let g = w.apply(&L2Vector::basis(w.dim(), i));
        assert!((g.coeffs[i] - unit_phase(2.0 * a - 3.0 * b)).norm() < 1e-14);
        let id = KoopmanOperator::identity(s1.clone(), &lim()).unwrap();
        let idid = product_koopman(&id, &id, &lim()).unwrap();
        assert_eq!(idid.dense(&lim()).unwrap(), CMatrix::identity(25, 25));
    }

    #[test]
    fn product_respects_size_cap() {
        let (_, u) = build_fourier_rotation(1, 30, &[0.1], &lim()).unwrap();
        let small = Limits::new(1000);
        assert!(matches!(product_koopman(&u, &u, &small), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn product_apply_matches_dense_kron() {
        let (_, map) = build_odometer(2, 0.3).unwrap();
        let u = koopman_of(&map, &lim()).unwrap();
        let (_, v) = build_fourier_rotation(1, 1, &[0.2], &lim()).unwrap();
        let w = product_koopman(&u, &v, &lim()).unwrap();
        let f = L2Vector::new(CVector::from_fn(12, |i, _| C64::new(i as f64, 1.0 - i as f64)));
        let dense = w.dense(&lim()).unwrap() * &f.coeffs;
        assert!((w.apply(&f).coeffs - dense).norm() < 1e-12);
    }

    #[test]
    fn conjugation_reflects_modes() {
        let space = MeasureSpace::fourier_torus(1, 2).unwrap();
        let i = space.mode_index(&[1]).unwrap();
        let f = L2Vector::basis(5, i);
        let g = f.conjugate(&space);
        assert_eq!(g.coeffs[space.mode_index(&[-1]).unwrap()], c(1.0));
    }

    #[test]
    fn odometer_power_is_identity() {
        let (_, map) = build_odometer(3, 0.3).unwrap();
        let u = koopman_of(&map, &lim()).unwrap();
        let p = u.power(8, &lim()).unwrap().dense(&lim()).unwrap();
        assert!((p - CMatrix::identity(8, 8)).norm() < 1e-12);
    }

    #[test]
    fn space_json_shape() {
        let space = MeasureSpace::point_space(vec![0.25, 0.75]).unwrap();
        let json = serde_json::to_string(&space).unwrap();
        assert_eq!(json, r#"{"kind":"point_space","weights":[0.25,0.75]}"#);
        let back: MeasureSpace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, space);
    }
}
