//! Representations of `H₃(ℝ)`: the scalar characters `π_{α,β}` and the
//! Schrödinger-type representation `π_γ` on a truncated grid of `L²(ℝ)`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::groups::{folner_box, FolnerWindow, GroupElement, GroupKind};
use crate::invariant::{commutant_rank, find_invariant_subspaces};
use crate::linalg::{c, CMatrix};
use crate::spaces::{KoopmanOperator, MeasureSpace, OperatorMatrix};
use crate::{Error, Limits, Result, C64};

/// Symmetric uniform grid `t_j = −L + j·s`, `0 ≤ j ≤ 2L/s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half_width: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(half_width: f64, step: f64) -> Result<Self> {
        if !(half_width > 0.0 && step > 0.0 && step < half_width) {
            return Err(Error::invalid("grid needs 0 < step < half_width"));
        }
        let cells = 2.0 * half_width / step;
        if (cells - cells.round()).abs() > 1e-9 * cells {
            return Err(Error::invalid("2·half_width must be a multiple of the step"));
        }
        Ok(Grid { half_width, step })
    }

    pub fn len(&self) -> usize {
        (2.0 * self.half_width / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.point(j)).collect()
    }

    /// `s·Σ f(t_j) conj(g(t_j))`.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        f.iter().zip(g).map(|(a, b)| a * b.conj()).sum::<C64>() * self.step
    }

    pub fn norm(&self, f: &[C64]) -> f64 {
        (f.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.step).sqrt()
    }

    /// Grid offset `k` with `a = k·s`, or the off-grid error.
    pub fn snap(&self, a: f64) -> Result<i64> {
        let k = (a / self.step).round();
        if (a - k * self.step).abs() > 1e-9 * self.step.max(a.abs()) {
            return Err(Error::OffGrid {
                a,
                nearest: k * self.step,
            });
        }
        Ok(k as i64)
    }

    /// `π^{−1/4} e^{−t²/2}` sampled on the grid.
    pub fn gaussian(&self) -> Vec<C64> {
        self.points()
            .iter()
            .map(|t| c(PI.powf(-0.25) * (-0.5 * t * t).exp()))
            .collect()
    }
}

/// The two families of irreducible representations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum HeisenbergRep {
    Scalar { alpha: f64, beta: f64 },
    L2Line { gamma: f64, grid: Grid },
}

fn abc(g: &GroupElement) -> Result<(f64, f64, f64)> {
    match g {
        GroupElement::Heisenberg { a, b, c } => Ok((*a, *b, *c)),
        _ => Err(Error::invalid("expected a Heisenberg group element")),
    }
}

/// `π_{α,β}(M(a, b, c)) = e^{i(αa + βb)}`.
pub fn heis_rep_scalar(alpha: f64, beta: f64, g: &GroupElement) -> Result<C64> {
    let (a, b, _) = abc(g)?;
    Ok(C64::from_polar(1.0, alpha * a + beta * b))
}

/// Output of [`heis_rep_l2`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridImage {
    pub values: Vec<C64>,
    /// `‖f‖² − ‖π(g)f‖²`: squared norm shifted past the grid edge.
    pub boundary_loss: f64,
}

/// `[π_γ(M(a, b, c)) f](t) = e^{iγ(c + bt)} f(t + a)`, zero beyond the grid.
pub fn heis_rep_l2(gamma: f64, grid: &Grid, g: &GroupElement, f: &[C64]) -> Result<GridImage> {
    let (a, b, cc) = abc(g)?;
    if gamma == 0.0 {
        return Err(Error::invalid("gamma must be nonzero"));
    }
    let n = grid.len();
    if f.len() != n {
        return Err(Error::invalid("function length does not match the grid"));
    }
    let k = grid.snap(a)?;
    let mut values = vec![c(0.0); n];
    let mut lost = 0.0;
    for (j, fj) in f.iter().enumerate() {
        let target = j as i64 - k;
        if target < 0 || target >= n as i64 {
            lost += fj.norm_sqr();
        }
    }
    for (j, out) in values.iter_mut().enumerate() {
        let src = j as i64 + k;
        if (0..n as i64).contains(&src) {
            let phase = gamma * (cc + b * grid.point(j));
            *out = C64::from_polar(1.0, phase) * f[src as usize];
        }
    }
    Ok(GridImage {
        values,
        boundary_loss: lost * grid.step,
    })
}

/// `g_n = M(0, 0, 2πn + 1/n)`, kept symbolically so that its central
/// phase can be reduced without rounding `2πn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigiditySequence {
    pub n: u64,
}

impl RigiditySequence {
    pub fn element(&self) -> GroupElement {
        GroupElement::heisenberg(0.0, 0.0, TAU * self.n as f64 + 1.0 / self.n as f64)
    }

    /// `γ(2πn + 1/n)` reduced to `2π·frac(γn) + γ/n`.
    pub fn central_phase(&self, gamma: f64) -> f64 {
        let gn = gamma * self.n as f64;
        TAU * (gn - gn.floor()) + gamma / self.n as f64
    }
}

/// One term of a rigidity profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityPoint {
    pub n: u64,
    /// `‖π_γ(g_n)f − f‖`.
    pub distance: f64,
}

/// `r_n = ‖π_γ(g_n)f − f‖` for `1 ≤ n ≤ n_max`.
///
/// `g_n` is central, so `π_γ(g_n) − I` is the scalar
/// `e^{iφ} − 1 = 2i·sin(φ/2)·e^{iφ/2}` applied to every grid value.
pub fn rigidity_profile(gamma: f64, grid: &Grid, f: &[C64], n_max: u64) -> Result<Vec<RigidityPoint>> {
    if f.len() != grid.len() {
        return Err(Error::invalid("function length does not match the grid"));
    }
    Ok((1..=n_max)
        .map(|n| {
            let phi = RigiditySequence { n }.central_phase(gamma);
            let factor = C64::new(0.0, 2.0 * (0.5 * phi).sin()) * C64::from_polar(1.0, 0.5 * phi);
            let diff: Vec<C64> = f.iter().map(|z| z * factor).collect();
            RigidityPoint {
                n,
                distance: grid.norm(&diff),
            }
        })
        .collect())
}

/// `|⟨π_γ(g) f₁, f₂⟩|` averaged over a Følner window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakMixingMean {
    pub radius: usize,
    pub elements: usize,
    pub mean: f64,
    /// Largest boundary loss over the window.
    pub max_boundary_loss: f64,
}

/// Følner mean of `|⟨π_γ(g) f₁, f₂⟩|` over `window` (a Heisenberg box).
///
/// The modulus does not depend on `c`, so each `(a, b)` is evaluated once.
pub fn weak_mixing_mean(gamma: f64, grid: &Grid, f1: &[C64], f2: &[C64], window: &FolnerWindow) -> Result<WeakMixingMean> {
    if window.kind != GroupKind::Heisenberg {
        return Err(Error::invalid("weak-mixing means need a Heisenberg window"));
    }
    if f1.len() != grid.len() || f2.len() != grid.len() {
        return Err(Error::invalid("function length does not match the grid"));
    }
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut pairs: Vec<(f64, f64, usize)> = Vec::new();
    for g in &window.elements {
        let (a, b, _) = abc(g)?;
        let slot = *index.entry((a.to_bits(), b.to_bits())).or_insert_with(|| {
            pairs.push((a, b, 0));
            pairs.len() - 1
        });
        pairs[slot].2 += 1;
    }
    let values: Vec<(f64, f64, usize)> = pairs
        .par_iter()
        .map(|&(a, b, count)| {
            let img = heis_rep_l2(gamma, grid, &GroupElement::heisenberg(a, b, 0.0), f1)?;
            Ok((grid.inner(&img.values, f2).norm(), img.boundary_loss, count))
        })
        .collect::<Result<_>>()?;
    let total: usize = values.iter().map(|v| v.2).sum();
    let sum: f64 = values.iter().map(|v| v.0 * v.2 as f64).sum();
    Ok(WeakMixingMean {
        radius: window.radius,
        elements: total,
        mean: sum / total as f64,
        max_boundary_loss: values.iter().map(|v| v.1).fold(0.0, f64::max),
    })
}

/// Means over Heisenberg boxes of each radius in `radii`.
pub fn weak_mixing_trace(
    gamma: f64,
    grid: &Grid,
    f1: &[C64],
    f2: &[C64],
    radii: &[usize],
    step: f64,
) -> Result<Vec<WeakMixingMean>> {
    radii
        .iter()
        .map(|&r| {
            let w = folner_box(GroupKind::Heisenberg, r, step)?;
            weak_mixing_mean(gamma, grid, f1, f2, &w)
        })
        .collect()
}

/// `[(1/2N)∫_{−N}^{N} e^{−a²/4} da]·[(1/2N)∫_{−N}^{N} e^{−γ²b²/4} db]`,
/// the continuum box average of the Gaussian coefficient modulus.
pub fn gaussian_box_average(gamma: f64, radius: f64) -> f64 {
    let factor = |scale: f64| PI.sqrt() * statrs::function::erf::erf(scale * radius / 2.0) / (scale * radius);
    factor(1.0) * factor(gamma.abs())
}

/// Result of running the subspace detector on a finite model of `π_γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibilityProbe {
    pub dimension: usize,
    pub commutant_rank: usize,
    pub subspaces_found: usize,
    pub residual_threshold: f64,
    pub irreducible: bool,
}

/// Residual threshold for the truncated irreducibility check.
pub const PROBE_THRESHOLD: f64 = 1e-3;

/// Runs the invariant-subspace detector on the `n×n` clock and shift
/// matrices, the finite Heisenberg-group analogue of `π_γ` (the shift is
/// cyclic, so no mass leaks at the boundary).
pub fn irreducibility_probe(n: usize, seed: u64, limits: &Limits) -> Result<IrreducibilityProbe> {
    if n < 2 {
        return Err(Error::invalid("probe dimension must be at least 2"));
    }
    let space = MeasureSpace::point_space(vec![1.0 / n as f64; n])?;
    let shift = CMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { c(1.0) } else { c(0.0) });
    let clock = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            crate::groups::unit_phase(i as f64 / n as f64)
        } else {
            c(0.0)
        }
    });
    let gens = vec![
        KoopmanOperator::single(space.clone(), OperatorMatrix::Dense(shift), limits)?,
        KoopmanOperator::single(space, OperatorMatrix::Dense(clock), limits)?,
    ];
    let rank = commutant_rank(&gens, limits)?;
    let max_dim = n.saturating_sub(1).clamp(1, crate::invariant::MAX_SUBSPACE_DIM);
    let found = find_invariant_subspaces(&gens, max_dim, PROBE_THRESHOLD, seed, limits)?;
    Ok(IrreducibilityProbe {
        dimension: n,
        commutant_rank: rank,
        subspaces_found: found.len(),
        residual_threshold: PROBE_THRESHOLD,
        irreducible: rank == 1 && found.is_empty(),
    })
}

/// Evidence that the Gaussian system of `π_γ` is weakly mixing but not
/// mildly mixing: a rigid sequence and vanishing Følner means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSummary {
    pub gamma: f64,
    pub rigidity: Vec<RigidityPoint>,
    /// `r_n` is strictly decreasing over the profile.
    pub rigidity_decreasing: bool,
    pub weak_mixing: Vec<WeakMixingMean>,
    /// Closed-form box averages for the same radii.
    pub closed_form: Vec<f64>,
    pub weak_mixing_decreasing: bool,
    /// `|⟨π(g_n)f, f⟩|` at the last `n` divided by `‖f‖²`: equal to one, so
    /// coefficients do not vanish along the center.
    pub central_coefficient_ratio: f64,
    pub weakly_but_not_mildly_mixing: bool,
}

/// Rigidity profile and weak-mixing trace for the Gaussian vector.
pub fn mixing_summary(gamma: f64, grid: &Grid, n_max: u64, radii: &[usize], step: f64) -> Result<MixingSummary> {
    if n_max == 0 || radii.is_empty() {
        return Err(Error::invalid("n_max and radii must be non-empty"));
    }
    let f = grid.gaussian();
    let rigidity = rigidity_profile(gamma, grid, &f, n_max)?;
    let rigidity_decreasing = rigidity.windows(2).all(|w| w[1].distance < w[0].distance);
    let weak_mixing = weak_mixing_trace(gamma, grid, &f, &f, radii, step)?;
    let closed_form = radii.iter().map(|&r| gaussian_box_average(gamma, r as f64)).collect();
    let weak_mixing_decreasing = weak_mixing.windows(2).all(|w| w[1].mean < w[0].mean);
    let g = RigiditySequence { n: n_max };
    let phase = C64::from_polar(1.0, g.central_phase(gamma));
    let image: Vec<C64> = f.iter().map(|z| z * phase).collect();
    let norm2 = grid.norm(&f).powi(2);
    let central_coefficient_ratio = grid.inner(&image, &f).norm() / norm2;
    Ok(MixingSummary {
        gamma,
        weakly_but_not_mildly_mixing: rigidity_decreasing && weak_mixing_decreasing,
        rigidity,
        rigidity_decreasing,
        weak_mixing,
        closed_form,
        weak_mixing_decreasing,
        central_coefficient_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::compose;

    fn grid() -> Grid {
        Grid::new(12.0, 0.01).unwrap()
    }

    #[test]
    fn scalar_examples() {
        let v = heis_rep_scalar(1.0, 0.0, &GroupElement::heisenberg(PI, 5.0, 9.0)).unwrap();
        assert!((v + c(1.0)).norm() < 1e-15);
        let e = heis_rep_scalar(0.3, 0.7, &GroupElement::heisenberg(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(e, c(1.0));
    }

    #[test]
    fn scalar_is_a_homomorphism() {
        let (al, be) = (0.37, -1.3);
        let g = GroupElement::heisenberg(0.4, 1.1, -2.0);
        let h = GroupElement::heisenberg(-0.9, 0.25, 3.0);
        let gh = compose(&g, &h).unwrap();
        let lhs = heis_rep_scalar(al, be, &gh).unwrap();
        let rhs = heis_rep_scalar(al, be, &g).unwrap() * heis_rep_scalar(al, be, &h).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn central_element_is_a_phase() {
        let gr = grid();
        let f = gr.gaussian();
        let out = heis_rep_l2(1.0, &gr, &GroupElement::heisenberg(0.0, 0.0, 0.8), &f).unwrap();
        assert_eq!(out.boundary_loss, 0.0);
        assert!((gr.norm(&out.values) - gr.norm(&f)).abs() < 1e-15);
    }

    #[test]
    fn translation_moves_support() {
        let gr = Grid::new(1.0, 0.25).unwrap();
        let mut f = vec![c(0.0); gr.len()];
        f[4] = c(1.0); // t = 0
        let out = heis_rep_l2(1.0, &gr, &GroupElement::heisenberg(0.5, 0.0, 0.0), &f).unwrap();
        // output(t) = f(t + 0.5) is nonzero at t = −0.5
        let j = out.values.iter().position(|z| z.norm() > 0.0).unwrap();
        assert_eq!(gr.point(j), -0.5);
    }

    #[test]
    fn off_grid_translation_is_rejected() {
        let err = heis_rep_l2(1.0, &grid(), &GroupElement::heisenberg(0.013, 0.0, 0.0), &grid().gaussian());
        match err {
            Err(Error::OffGrid { nearest, .. }) => assert!((nearest - 0.01).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gaussian_translation_coefficient() {
        let gr = grid();
        let f = gr.gaussian();
        let out = heis_rep_l2(1.0, &gr, &GroupElement::heisenberg(2.0, 0.0, 0.0), &f).unwrap();
        let z = gr.inner(&out.values, &f).norm();
        assert!((z - (-1.0f64).exp()).abs() < 1e-4);
        assert!(out.boundary_loss < 1e-6);
    }

    #[test]
    fn rigidity_closed_form() {
        let gr = grid();
        let f = gr.gaussian();
        let norm = gr.norm(&f);
        let prof = rigidity_profile(1.0, &gr, &f, 10).unwrap();
        assert!((prof[0].distance / norm - 2.0 * 0.5f64.sin()).abs() < 1e-12);
        assert!((prof[9].distance / norm - 0.0999583).abs() < 1e-6);
        let zero = rigidity_profile(1.0, &gr, &vec![c(0.0); gr.len()], 3).unwrap();
        assert!(zero.iter().all(|p| p.distance == 0.0));
    }

    #[test]
    fn weak_mixing_mean_ignores_center() {
        let gr = Grid::new(8.0, 0.05).unwrap();
        let f = gr.gaussian();
        let w = folner_box(GroupKind::Heisenberg, 2, 0.5).unwrap();
        let base = weak_mixing_mean(1.0, &gr, &f, &f, &w).unwrap();
        let shifted = FolnerWindow {
            elements: w
                .elements
                .iter()
                .map(|g| match g {
                    GroupElement::Heisenberg { a, b, c } => GroupElement::heisenberg(*a, *b, c + 17.0),
                    _ => unreachable!(),
                })
                .collect(),
            ..w.clone()
        };
        assert_eq!(base.mean, weak_mixing_mean(1.0, &gr, &f, &f, &shifted).unwrap().mean);
    }

    #[test]
    fn clock_and_shift_is_irreducible() {
        let p = irreducibility_probe(13, 5, &Limits::default()).unwrap();
        assert_eq!(p.commutant_rank, 1);
        assert!(p.irreducible);
    }
}
