//! Correlation sequences, Fejér spectral estimates, eigenvalue sets and the
//! ergodic multiplier test.

use std::f64::consts::TAU;
use std::io::Write;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, kron_vec, normal_eigen, singular_values, CMatrix, CVector};
use crate::spaces::{product_koopman, KoopmanOperator, L2Vector, MeasureSpace, OperatorMatrix, System};
use crate::{Error, Limits, Result, C64};

/// `c(n) = ⟨Uⁿf, f⟩` for `−N ≤ n ≤ N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSequence {
    pub max_lag: usize,
    /// Values for lags `−N..=N`, in order.
    pub values: Vec<C64>,
}

impl CorrelationSequence {
    /// Builds the sequence from nonnegative lags, filling negative lags by
    /// Hermitian symmetry.
    pub fn from_nonnegative(lags: &[C64]) -> Self {
        let n = lags.len().saturating_sub(1);
        let mut values: Vec<C64> = lags[1..].iter().rev().map(|z| z.conj()).collect();
        values.extend_from_slice(lags);
        CorrelationSequence { max_lag: n, values }
    }

    pub fn at(&self, lag: i64) -> C64 {
        self.values[(lag + self.max_lag as i64) as usize]
    }

    /// Restriction to lags `|n| ≤ max_lag`.
    pub fn truncate(&self, max_lag: usize) -> Self {
        let max_lag = max_lag.min(self.max_lag);
        let lags: Vec<C64> = (0..=max_lag as i64).map(|n| self.at(n)).collect();
        Self::from_nonnegative(&lags)
    }
}

/// Correlation sequence of a single-generator operator.
pub fn correlation_sequence(u: &KoopmanOperator, f: &L2Vector, max_lag: usize) -> Result<CorrelationSequence> {
    if f.len() != u.dim() {
        return Err(Error::invalid("vector length does not match operator"));
    }
    let mut lags = Vec::with_capacity(max_lag + 1);
    let mut g = f.clone();
    for n in 0..=max_lag {
        if n > 0 {
            g = u.apply(&g);
        }
        lags.push(g.inner(f, &u.space));
    }
    // c(0) is real up to rounding
    lags[0] = c(lags[0].re);
    Ok(CorrelationSequence::from_nonnegative(&lags))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Location on the dual circle, in turns `[0, 1)`.
    pub location: f64,
    pub mass: f64,
}

/// Finite-window estimate of the spectral measure of a correlation
/// sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub window: usize,
    /// Dual grid `j/M`, `0 ≤ j < M`.
    pub locations: Vec<f64>,
    /// Fejér-smoothed density at each location.
    pub density: Vec<f64>,
    pub atoms: Vec<Atom>,
    pub total_mass: f64,
}

/// Atoms need windowed mass above `ATOM_THRESHOLD / N`.
pub const ATOM_THRESHOLD: f64 = 10.0;
/// Largest relative change of an atom's mass when the window doubles.
pub const ATOM_STABILITY: f64 = 0.2;
/// Density below this is taken as proof that the input is not
/// positive-definite.
pub const NEGATIVITY_LIMIT: f64 = -1e-3;

impl SpectralEstimate {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "location,density")?;
        for (x, y) in self.locations.iter().zip(&self.density) {
            writeln!(w, "{x:?},{y:?}")?;
        }
        Ok(())
    }
}

/// `Σ_{|n|<L} (1 − |n|/L) c(n) e^{−2πinθ}` evaluated directly.
fn fejer_at(seq: &CorrelationSequence, window: usize, theta: f64) -> f64 {
    let l = window as f64;
    let step = C64::from_polar(1.0, -TAU * theta);
    let mut z = c(1.0);
    let mut total = seq.at(0).re;
    for n in 1..window.min(seq.max_lag + 1) {
        z *= step;
        let w = 1.0 - n as f64 / l;
        // c(n)z + c(−n)conj(z) = 2 Re(c(n) z)
        total += 2.0 * w * (seq.at(n as i64) * z).re;
    }
    total
}

fn fejer_grid(seq: &CorrelationSequence, window: usize, grid: usize) -> Vec<f64> {
    let l = window as f64;
    let mut buf = vec![c(0.0); grid];
    for n in -(window as i64 - 1)..=(window as i64 - 1) {
        if n.unsigned_abs() as usize > seq.max_lag {
            continue;
        }
        let w = 1.0 - n.unsigned_abs() as f64 / l;
        buf[n.rem_euclid(grid as i64) as usize] += seq.at(n) * w;
    }
    FftPlanner::new().plan_fft_forward(grid).process(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn maximize<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Peak of the window-`L` Fejér density near `theta`, and `D(θ*)/L`.
fn refine_peak(seq: &CorrelationSequence, window: usize, theta: f64, radius: f64) -> (f64, f64) {
    let at = maximize(|t| fejer_at(seq, window, t), theta - radius, theta + radius);
    (crate::groups::wrap_unit(at), fejer_at(seq, window, at) / window as f64)
}

/// Fejér-smoothed spectral density with atom detection.
///
/// The window is `L = N + 1` for a sequence with lags up to `N`. A grid
/// cell becomes an atom when its windowed mass `D(θ)/L` exceeds
/// `ATOM_THRESHOLD/L` and changes by less than `ATOM_STABILITY` between
/// windows `L/2` and `L`.
pub fn spectral_estimate(seq: &CorrelationSequence) -> Result<SpectralEstimate> {
    let window = seq.max_lag + 1;
    let grid = (4 * window).next_power_of_two().max(16);
    let density = fejer_grid(seq, window, grid);
    let min = density.iter().copied().fold(f64::INFINITY, f64::min);
    if min < NEGATIVITY_LIMIT {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let total_mass = density.iter().sum::<f64>() / grid as f64;
    let locations: Vec<f64> = (0..grid).map(|j| j as f64 / grid as f64).collect();

    let threshold = ATOM_THRESHOLD;
    let mut atoms: Vec<Atom> = Vec::new();
    for j in 0..grid {
        let d = density[j];
        let left = density[(j + grid - 1) % grid];
        let right = density[(j + 1) % grid];
        if d <= threshold || d < left || d < right || (d == left && j > 0) {
            continue;
        }
        let (loc, mass) = refine_peak(seq, window, locations[j], 1.0 / grid as f64);
        if window >= 4 {
            let half = window / 2;
            let (_, coarse) = refine_peak(seq, half, loc, 0.5 / half as f64);
            if (coarse - mass).abs() >= ATOM_STABILITY * mass {
                continue;
            }
        }
        if mass * window as f64 <= threshold {
            continue;
        }
        let near = atoms.iter_mut().find(|a| {
            let dd = (a.location - loc).abs();
            dd.min(1.0 - dd) < 2.0 / window as f64
        });
        match near {
            Some(a) if a.mass < mass => *a = Atom { location: loc, mass },
            Some(_) => {}
            None => atoms.push(Atom { location: loc, mass }),
        }
    }
    for a in &mut atoms {
        a.mass = a.mass.min(total_mass);
    }
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    Ok(SpectralEstimate {
        window,
        locations,
        density,
        atoms,
        total_mass,
    })
}

/// One eigenpair of a Koopman operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenEntry {
    pub eigenvalue: C64,
    /// Unit-norm eigenvector of the Koopman isometry (coefficient form).
    pub eigenfunction: L2Vector,
    /// `‖Uf − λf‖`.
    pub residual: f64,
}

/// The eigenvalue set `e(T)` at the model's resolution, with an
/// orthonormal eigenbasis (repeated eigenvalues appear once per basis
/// vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    pub entries: Vec<EigenEntry>,
    pub tolerance: f64,
}

impl EigenData {
    /// Distinct eigenvalues with multiplicities.
    pub fn distinct(&self) -> Vec<(C64, usize)> {
        let mut out: Vec<(C64, usize)> = Vec::new();
        for e in &self.entries {
            match out.iter_mut().find(|(v, _)| (v - e.eigenvalue).norm() < self.tolerance) {
                Some((_, m)) => *m += 1,
                None => out.push((e.eigenvalue, 1)),
            }
        }
        out
    }

    pub fn multiplicity(&self, value: C64) -> usize {
        self.entries
            .iter()
            .filter(|e| (e.eigenvalue - value).norm() < self.tolerance)
            .count()
    }
}

/// Eigenspaces of one unitary factor, as (value, orthonormal basis).
fn factor_eigenspaces(m: &OperatorMatrix, tol: f64) -> Result<Vec<(C64, CMatrix)>> {
    match m {
        OperatorMatrix::Diagonal(d) => {
            let n = d.len();
            let mut groups: Vec<(C64, Vec<usize>)> = Vec::new();
            for i in 0..n {
                match groups.iter_mut().find(|(v, _)| (v - d[i]).norm() < tol) {
                    Some((_, idx)) => idx.push(i),
                    None => groups.push((d[i], vec![i])),
                }
            }
            Ok(groups
                .into_iter()
                .map(|(v, idx)| {
                    let mut basis = CMatrix::zeros(n, idx.len());
                    for (col, &i) in idx.iter().enumerate() {
                        basis[(i, col)] = c(1.0);
                    }
                    (v, basis)
                })
                .collect())
        }
        other => Ok(normal_eigen(&other.to_dense(), tol.min(1e-10))?
            .into_iter()
            .map(|s| (s.value, s.basis))
            .collect()),
    }
}

/// All unit-modulus eigenpairs of `U` with residual at most `tol`.
pub fn eigenvalue_set(u: &KoopmanOperator, tol: f64, limits: &Limits) -> Result<EigenData> {
    limits.check("eigen-decomposition dimension", u.dim())?;
    let factors = u.unitary_factors();
    for f in &factors {
        if !matches!(f, OperatorMatrix::Diagonal(_)) {
            limits.check("dense factor entries", f.dim() * f.dim())?;
        }
    }
    let mut combined: Vec<(C64, CVector)> = vec![(c(1.0), CVector::from_element(1, c(1.0)))];
    for f in &factors {
        let spaces = factor_eigenspaces(f, tol)?;
        let mut next = Vec::with_capacity(combined.len() * f.dim());
        for (v0, x0) in &combined {
            for (v1, basis) in &spaces {
                for col in basis.column_iter() {
                    next.push((v0 * v1, kron_vec(x0, &col.into_owned())));
                }
            }
        }
        combined = next;
    }
    let mut entries = Vec::with_capacity(combined.len());
    for (value, x) in combined {
        let mut f = L2Vector::from_orthonormal(&x, &u.space);
        normalize_phase(&mut f);
        let uf = u.apply(&f);
        let diff = L2Vector::new(&uf.coeffs - &f.coeffs * value);
        let residual = diff.norm(&u.space);
        if residual > tol || (value.norm() - 1.0).abs() > tol {
            return Err(Error::numerical(
                format!("eigenpair for {value} did not converge"),
                residual,
            ));
        }
        entries.push(EigenEntry {
            eigenvalue: value,
            eigenfunction: f,
            residual,
        });
    }
    entries.sort_by(|a, b| {
        phase_turns(a.eigenvalue).total_cmp(&phase_turns(b.eigenvalue))
    });
    Ok(EigenData {
        entries,
        tolerance: tol,
    })
}

/// `arg λ / 2π` in `[0, 1)`.
pub fn phase_turns(z: C64) -> f64 {
    crate::groups::wrap_unit(z.arg() / TAU + 1e-14) - 0.0
}

/// Rotates `f` so its first non-negligible coefficient is real positive.
fn normalize_phase(f: &mut L2Vector) {
    let scale = f.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = f.coeffs.iter().find(|z| z.norm() > 1e-8 * scale).copied() {
        let phase = z.conj() / z.norm();
        f.coeffs *= phase;
    }
}

/// Singular values of `U − I` on a product, exploiting Kronecker structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedVectorSearch {
    /// Number of singular values of `U − I` below `threshold`.
    pub fixed_dimension: usize,
    /// `min ‖Ux − x‖` over unit `x` orthogonal to the trivial fixed
    /// vector (the second-smallest singular value).
    pub mean_zero_residual: f64,
    pub threshold: f64,
}

/// Smallest singular values of `U − I` (ascending), computed directly on
/// the operator without any eigen-decomposition.
pub fn fixed_point_singular_values(u: &KoopmanOperator, limits: &Limits) -> Result<Vec<f64>> {
    let factors = u.unitary_factors();
    let mut out: Vec<f64> = match factors.as_slice() {
        [OperatorMatrix::Diagonal(a), OperatorMatrix::Diagonal(b)] => a
            .iter()
            .flat_map(|x| b.iter().map(move |y| (x * y - c(1.0)).norm()))
            .collect(),
        [OperatorMatrix::Diagonal(d), other] | [other, OperatorMatrix::Diagonal(d)] => {
            let a = other.to_dense();
            let n = a.nrows();
            limits.check("dense block entries", n * n)?;
            d.iter()
                .flat_map(|&z| singular_values(&(&a * z - CMatrix::identity(n, n))))
                .collect()
        }
        [OperatorMatrix::Diagonal(d)] => d.iter().map(|z| (z - c(1.0)).norm()).collect(),
        _ => {
            let q = u.unitary_dense(&Limits::new(limits.size_cap.max(1)))?;
            let n = q.nrows();
            singular_values(&(q - CMatrix::identity(n, n)))
        }
    };
    out.sort_by(|a, b| a.total_cmp(b));
    Ok(out)
}

pub fn fixed_vector_search(u: &KoopmanOperator, threshold: f64, limits: &Limits) -> Result<FixedVectorSearch> {
    let sv = fixed_point_singular_values(u, limits)?;
    Ok(FixedVectorSearch {
        fixed_dimension: sv.iter().filter(|&&s| s < threshold).count(),
        mean_zero_residual: sv.get(1).copied().unwrap_or(f64::INFINITY),
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErgodicityVerdict {
    Ergodic,
    NotErgodic,
}

/// A matched eigenvalue and the resulting invariant function of `T×S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierWitness {
    pub eigenvalue_t: C64,
    pub eigenvalue_s: C64,
    /// Mode of the product character, when both factors are Fourier models.
    pub product_mode: Option<Vec<i64>>,
    /// `f_T ⊗ conj(f_S)`, normalized.
    pub invariant_function: L2Vector,
    /// `‖(U_T⊗U_S)w − w‖`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub verdict: ErgodicityVerdict,
    /// Fourier cutoff of the models involved, if any.
    pub resolution: Option<usize>,
    pub matched_pairs: usize,
    pub witness: Option<MultiplierWitness>,
    /// Closest approach of a non-trivial `e(T)` value to an atom of `σ₀(S)`.
    pub min_eigenvalue_gap: f64,
    pub oracle: FixedVectorSearch,
    pub oracle_agrees: bool,
    /// Proper ergodicity of `T` cannot be checked on a finite model.
    pub properly_ergodic_assumed: bool,
    pub tolerance: f64,
}

/// Threshold on singular values for the direct fixed-vector oracle.
pub const ORACLE_THRESHOLD: f64 = 1e-8;

fn cutoff_of(space: &MeasureSpace) -> Option<usize> {
    match space {
        MeasureSpace::FourierTorus { cutoff, .. } => Some(*cutoff),
        _ => None,
    }
}

fn dominant_mode(space: &MeasureSpace, f: &L2Vector) -> Option<Vec<i64>> {
    let modes = space.modes()?;
    let (i, z) = f
        .coeffs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))?;
    (z.norm() > 1.0 - 1e-9).then(|| modes[i].clone())
}

/// Decides ergodicity of `T × S` by matching `e(T)` against the atoms of
/// the reduced spectral type of `S`.
///
/// `S` must be measure preserving. Both systems must be ergodic at their
/// resolution (eigenvalue 1 simple). The verdict is cross-checked against
/// a direct fixed-vector search on `U_T ⊗ U_S`.
pub fn multiplier_test(t: &System, s: &System, tol: f64, limits: &Limits) -> Result<MultiplierReport> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if !s.is_measure_preserving() {
        return Err(Error::Precondition("S must be measure preserving".into()));
    }
    let eig_t = eigenvalue_set(t.koopman(), tol.max(1e-9), limits)?;
    let eig_s = eigenvalue_set(s.koopman(), tol.max(1e-9), limits)?;
    for (name, e) in [("T", &eig_t), ("S", &eig_s)] {
        let m = e.multiplicity(c(1.0));
        if m != 1 {
            return Err(Error::Precondition(format!(
                "{name} is not ergodic at this resolution: eigenvalue 1 has multiplicity {m}"
            )));
        }
    }

    let trivial = |z: C64| (z - c(1.0)).norm() < tol;
    let mut min_gap = f64::INFINITY;
    let mut candidates: Vec<(&crate::spectral::EigenEntry, &crate::spectral::EigenEntry)> = Vec::new();
    for b in eig_s.entries.iter().filter(|b| !trivial(b.eigenvalue)) {
        for a in eig_t.entries.iter().filter(|a| !trivial(a.eigenvalue)) {
            let gap = (a.eigenvalue - b.eigenvalue).norm();
            min_gap = min_gap.min(gap);
            if gap < tol {
                candidates.push((a, b));
            }
        }
    }

    let (space_t, space_s) = (t.space(), s.space());
    let product = product_koopman(t.koopman(), s.koopman(), limits)?;
    let key = |pair: &(&EigenEntry, &EigenEntry)| {
        let mode = match (
            dominant_mode(space_t, &pair.0.eigenfunction),
            dominant_mode(space_s, &pair.1.eigenfunction),
        ) {
            (Some(k), Some(l)) => {
                let mut v = k;
                v.extend(l.iter().map(|x| -x));
                Some(v)
            }
            _ => None,
        };
        let l1: i64 = mode.as_ref().map(|v| v.iter().map(|x| x.abs()).sum()).unwrap_or(0);
        let first_negative = mode
            .as_ref()
            .and_then(|v| v.iter().find(|&&x| x != 0).map(|&x| x < 0))
            .unwrap_or(false);
        (l1, first_negative, -(pair.0.eigenvalue - c(1.0)).norm(), mode)
    };
    let best = candidates.iter().min_by(|x, y| {
        let (a, b) = (key(x), key(y));
        (a.0, a.1)
            .cmp(&(b.0, b.1))
            .then(a.2.total_cmp(&b.2))
    });
    let witness = best.map(|pair| {
        let mode = key(pair).3;
        let g = pair.1.eigenfunction.conjugate(space_s);
        let mut w = L2Vector::new(kron_vec(&pair.0.eigenfunction.coeffs, &g.coeffs));
        let norm = w.norm(&product.space);
        w.coeffs /= c(norm);
        let uw = product.apply(&w);
        let residual = L2Vector::new(&uw.coeffs - &w.coeffs).norm(&product.space);
        MultiplierWitness {
            eigenvalue_t: pair.0.eigenvalue,
            eigenvalue_s: pair.1.eigenvalue,
            product_mode: mode,
            invariant_function: w,
            residual,
        }
    });

    let oracle = fixed_vector_search(&product, ORACLE_THRESHOLD, limits)?;
    let verdict = if witness.is_some() {
        ErgodicityVerdict::NotErgodic
    } else {
        ErgodicityVerdict::Ergodic
    };
    let oracle_not_ergodic = oracle.fixed_dimension > 1;
    Ok(MultiplierReport {
        verdict,
        resolution: cutoff_of(space_t).max(cutoff_of(space_s)),
        matched_pairs: candidates.len(),
        witness,
        min_eigenvalue_gap: min_gap,
        oracle_agrees: oracle_not_ergodic == (verdict == ErgodicityVerdict::NotErgodic),
        oracle,
        properly_ergodic_assumed: true,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::unit_phase;
    use crate::spaces::{build_fourier_rotation, build_odometer, koopman_of, SystemSpec};

    fn lim() -> Limits {
        Limits::default()
    }

    #[test]
    fn rotation_mode_correlation() {
        let alpha = 0.3819660112501051;
        let (space, u) = build_fourier_rotation(1, 2, &[alpha], &lim()).unwrap();
        let f = L2Vector::basis(space.size(), space.mode_index(&[1]).unwrap());
        let seq = correlation_sequence(&u, &f, 20).unwrap();
        for n in -20..=20i64 {
            assert!((seq.at(n) - unit_phase(n as f64 * alpha)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_vector_correlation_vanishes() {
        let (_, u) = build_fourier_rotation(1, 2, &[0.1], &lim()).unwrap();
        let seq = correlation_sequence(&u, &L2Vector::zeros(5), 8).unwrap();
        assert!(seq.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn odometer_eigenvector_correlation() {
        let (space, map) = build_odometer(2, 0.5).unwrap();
        let u = koopman_of(&map, &lim()).unwrap();
        // eigenvector of the 4-cycle shift for eigenvalue i: f(x) = i^x
        let f = L2Vector::new(CVector::from_fn(4, |x, _| C64::i().powu(x as u32)));
        let norm2 = f.norm(&space).powi(2);
        let seq = correlation_sequence(&u, &f, 9).unwrap();
        for n in 0..=9i64 {
            let expect = C64::i().powu(n as u32) * norm2;
            assert!((seq.at(n) - expect).norm() < 1e-14);
            assert!((seq.at(-n) - expect.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn white_spectrum_has_no_atoms() {
        let mut lags = vec![c(0.0); 513];
        lags[0] = c(1.0);
        let est = spectral_estimate(&CorrelationSequence::from_nonnegative(&lags)).unwrap();
        assert!(est.atoms.is_empty());
        assert!(est.density.iter().all(|&d| (d - 1.0).abs() < 1e-12));
        assert!((est.total_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_sequence_has_two_half_atoms() {
        let alpha = 0.2360679774997897;
        let lags: Vec<C64> = (0..=2048).map(|n| c((TAU * n as f64 * alpha).cos())).collect();
        let est = spectral_estimate(&CorrelationSequence::from_nonnegative(&lags)).unwrap();
        assert_eq!(est.atoms.len(), 2, "{:?}", est.atoms);
        let locs: Vec<f64> = est.atoms.iter().map(|a| a.location).collect();
        assert!((locs[0] - alpha).abs() < 1.0 / 2048.0);
        assert!((locs[1] - (1.0 - alpha)).abs() < 1.0 / 2048.0);
        for a in &est.atoms {
            assert!((a.mass - 0.5).abs() < 2e-3, "{}", a.mass);
        }
    }

    #[test]
    fn non_positive_definite_rejected() {
        // c(0) = 0 with c(1) ≠ 0 cannot be positive-definite
        let lags = vec![c(0.0), c(0.5), c(0.0)];
        let err = spectral_estimate(&CorrelationSequence::from_nonnegative(&lags));
        assert!(matches!(err, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn identity_has_single_eigenvalue() {
        let space = MeasureSpace::point_space(vec![0.25; 4]).unwrap();
        let id = KoopmanOperator::identity(space, &lim()).unwrap();
        let e = eigenvalue_set(&id, 1e-9, &lim()).unwrap();
        assert_eq!(e.distinct().len(), 1);
        assert_eq!(e.multiplicity(c(1.0)), 4);
    }

    #[test]
    fn rotation_eigenvalues_are_modes() {
        let alpha = 2f64.sqrt() - 1.0;
        let (space, u) = build_fourier_rotation(1, 3, &[alpha], &lim()).unwrap();
        let e = eigenvalue_set(&u, 1e-9, &lim()).unwrap();
        assert_eq!(e.entries.len(), 7);
        for entry in &e.entries {
            let k = dominant_mode(&space, &entry.eigenfunction).unwrap()[0];
            assert!((entry.eigenvalue - unit_phase(k as f64 * alpha)).norm() < 1e-12);
        }
    }

    #[test]
    fn rational_rotation_fails_ergodicity_precondition() {
        let t = System::build(&SystemSpec::Rotation { angles: vec![0.5] }, 4, &lim()).unwrap();
        let s = System::build(&SystemSpec::Rotation { angles: vec![2f64.sqrt() - 1.0] }, 4, &lim()).unwrap();
        assert!(matches!(multiplier_test(&t, &s, 1e-9, &lim()), Err(Error::Precondition(_))));
    }

    #[test]
    fn nonsingular_s_is_rejected() {
        let t = System::build(&SystemSpec::Odometer { bits: 3, p: 0.5 }, 1, &lim()).unwrap();
        let s = System::build(&SystemSpec::Odometer { bits: 3, p: 0.3 }, 1, &lim()).unwrap();
        assert!(matches!(multiplier_test(&t, &s, 1e-9, &lim()), Err(Error::Precondition(_))));
    }

    #[test]
    fn rotation_pair_with_resonance() {
        let alpha = 2f64.sqrt() - 1.0;
        let t = System::build(&SystemSpec::Rotation { angles: vec![alpha] }, 5, &lim()).unwrap();
        let s = System::build(&SystemSpec::Rotation { angles: vec![2.0 * alpha] }, 5, &lim()).unwrap();
        let r = multiplier_test(&t, &s, 1e-9, &lim()).unwrap();
        assert_eq!(r.verdict, ErgodicityVerdict::NotErgodic);
        let w = r.witness.unwrap();
        assert_eq!(w.product_mode, Some(vec![2, -1]));
        assert!(w.residual < 1e-12);
        assert!(r.oracle_agrees);
    }
}
