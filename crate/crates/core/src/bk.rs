//! Invariant metrics, global support and the non-ergodic product witness
//! for Banach–Kronecker systems.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::invariant::BKSystem;
use crate::{Error, Result};

/// Pairwise Euclidean distances `d` and invariant distances `D` on a
/// cloud, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub size: usize,
    pub euclidean: Vec<f64>,
    pub invariant: Vec<f64>,
    /// `min D/d` over distinct pairs.
    pub lower_ratio: f64,
    /// `max D/d` over distinct pairs.
    pub upper_ratio: f64,
    /// `max |D(S_g x, S_g y) − D(x, y)|`.
    pub invariance_residual: f64,
    /// Largest violation of the triangle inequality (zero if none).
    pub triangle_defect: f64,
}

impl MetricTable {
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.euclidean[i * self.size + j]
    }

    pub fn big_d(&self, i: usize, j: usize) -> f64 {
        self.invariant[i * self.size + j]
    }
}

/// `D(x, y) = sup_g ‖S_g x − S_g y‖` over the sample (identity included).
pub fn invariant_metric(sys: &BKSystem) -> Result<MetricTable> {
    if !sys.equicontinuity.passed {
        return Err(Error::Precondition("equicontinuity diagnostic failed".into()));
    }
    let n = sys.len();
    let diff = |i: usize, j: usize| -> Vec<f64> {
        sys.points[i].iter().zip(&sys.points[j]).map(|(a, b)| a - b).collect()
    };
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| (sys.euclidean(i, j), sys.invariant_norm(&diff(i, j))))
                .unzip()
        })
        .collect();
    let euclidean: Vec<f64> = rows.iter().flat_map(|r| r.0.iter().copied()).collect();
    let invariant: Vec<f64> = rows.iter().flat_map(|r| r.1.iter().copied()).collect();

    let mut lower = f64::INFINITY;
    let mut upper: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = euclidean[i * n + j];
            if i != j && d > 0.0 {
                let r = invariant[i * n + j] / d;
                lower = lower.min(r);
                upper = upper.max(r);
            }
        }
    }

    let triangle_defect = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in 0..n {
                let dij = invariant[i * n + j];
                for k in 0..n {
                    worst = worst.max(dij - invariant[i * n + k] - invariant[k * n + j]);
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    if triangle_defect > 1e-9 {
        return Err(Error::numerical("invariant metric violates the triangle inequality", triangle_defect));
    }

    let invariance_residual = match &sys.permutations {
        Some(perms) => perms
            .par_iter()
            .map(|p| {
                let mut worst: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max((invariant[p[i] * n + p[j]] - invariant[i * n + j]).abs());
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max),
        None => sys
            .maps
            .par_iter()
            .map(|m| {
                let mut worst: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let w = nalgebra::DVector::from_vec(diff(i, j));
                        let moved: Vec<f64> = (m * w).iter().copied().collect();
                        worst = worst.max((sys.invariant_norm(&moved) - invariant[i * n + j]).abs());
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max),
    };

    Ok(MetricTable {
        size: n,
        euclidean,
        invariant,
        lower_ratio: if lower.is_finite() { lower } else { 1.0 },
        upper_ratio: upper.max(if lower.is_finite() { 0.0 } else { 1.0 }),
        invariance_residual,
        triangle_defect: triangle_defect.max(0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub epsilon: f64,
    /// Smallest measure of an open `D`-ball of radius `ε` about a cloud point.
    pub min_ball_mass: f64,
    pub argmin: usize,
    pub globally_supported: bool,
}

/// Checks that every `D`-ball of radius `ε` about a cloud point carries
/// positive mass.
pub fn global_support_check(sys: &BKSystem, measure: &[f64], epsilon: f64) -> Result<SupportReport> {
    if !sys.minimality.passed {
        return Err(Error::Precondition("minimality diagnostic failed".into()));
    }
    if measure.len() != sys.len() {
        return Err(Error::invalid("measure length does not match the cloud"));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let table = invariant_metric(sys)?;
    let n = sys.len();
    let (argmin, min_ball_mass) = (0..n)
        .map(|i| {
            let mass: f64 = (0..n).filter(|&j| table.big_d(i, j) < epsilon).map(|j| measure[j]).sum();
            (i, mass)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty cloud");
    Ok(SupportReport {
        epsilon,
        min_ball_mass,
        argmin,
        globally_supported: min_ball_mass > 0.0,
    })
}

/// `D_ε`, its saturation `O_ε` under the sampled diagonal action, and
/// `(m×P)(O_ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSets {
    pub epsilon: f64,
    pub c_bound: f64,
    /// Pairs `(i, j)` with `d(y_i, y_j) < ε/2C`.
    pub d_eps: Vec<(usize, usize)>,
    /// Saturation of `D_ε`.
    pub o_eps: Vec<(usize, usize)>,
    /// `(m×P)(O_ε)`.
    pub measure: f64,
    /// `D_ε ⊆ O_ε ⊆ {d < ε}`.
    pub containment_holds: bool,
    /// Largest `(m×P)(O_ε △ (S_g×S_g)O_ε)` over the sample.
    pub diagonal_invariance_defect: f64,
    pub saturation_rounds: usize,
    /// `0 < (m×P)(O_ε) < 1` at tolerance `WITNESS_TOLERANCE`.
    pub witnessed: bool,
}

pub const WITNESS_TOLERANCE: f64 = 1e-6;

impl WitnessSets {
    /// One row per pair in `O_ε`: `i,j,in_D_eps,in_O_eps`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let d: BTreeSet<(usize, usize)> = self.d_eps.iter().copied().collect();
        writeln!(w, "i,j,in_D_eps,in_O_eps")?;
        for &(i, j) in &self.o_eps {
            writeln!(w, "{i},{j},{},true", d.contains(&(i, j)))?;
        }
        Ok(())
    }
}

/// Normalized counting measure on the cloud.
pub fn uniform_measure(sys: &BKSystem) -> Vec<f64> {
    vec![1.0 / sys.len() as f64; sys.len()]
}

/// Builds `D_ε` and `O_ε` for the product of `(cloud, ν)` with
/// `(cloud, P)` and decides whether they witness a non-ergodic product.
pub fn nonergodic_product_witness(sys: &BKSystem, p: &[f64], epsilon: f64) -> Result<WitnessSets> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let n = sys.len();
    if p.len() != n {
        return Err(Error::invalid("P must have one entry per cloud point"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 || p.iter().any(|x| *x < 0.0) {
        return Err(Error::invalid("P must be a probability vector"));
    }
    let perms = sys
        .permutations
        .as_ref()
        .ok_or_else(|| Error::Precondition("sampled maps do not preserve the cloud".into()))?;
    for perm in perms {
        let defect = (0..n).map(|i| (p[perm[i]] - p[i]).abs()).fold(0.0, f64::max);
        if defect > 1e-9 {
            return Err(Error::Precondition(format!("P is not invariant (defect {defect:e})")));
        }
    }

    let c_bound = sys.c_bound;
    let radius = epsilon / (2.0 * c_bound);
    let mut inside = vec![false; n * n];
    let mut d_eps = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if sys.euclidean(i, j) < radius {
                inside[i * n + j] = true;
                d_eps.push((i, j));
            }
        }
    }
    let mut frontier = d_eps.clone();
    let mut rounds = 0;
    while !frontier.is_empty() {
        rounds += 1;
        let mut next = Vec::new();
        for &(i, j) in &frontier {
            for perm in perms {
                let (a, b) = (perm[i], perm[j]);
                if !inside[a * n + b] {
                    inside[a * n + b] = true;
                    next.push((a, b));
                }
            }
        }
        frontier = next;
    }
    let o_eps: Vec<(usize, usize)> = (0..n * n).filter(|&k| inside[k]).map(|k| (k / n, k % n)).collect();
    let mass = |i: usize, j: usize| sys.weights[i] * p[j];
    let measure: f64 = o_eps.iter().map(|&(i, j)| mass(i, j)).sum();
    if measure >= 1.0 - WITNESS_TOLERANCE {
        return Err(Error::EpsilonTooLarge { epsilon, measure });
    }

    let containment_holds = o_eps.iter().all(|&(i, j)| sys.euclidean(i, j) < epsilon);
    let diagonal_invariance_defect = perms
        .iter()
        .map(|perm| {
            let mut moved = vec![false; n * n];
            for &(i, j) in &o_eps {
                moved[perm[i] * n + perm[j]] = true;
            }
            (0..n * n)
                .filter(|&k| moved[k] != inside[k])
                .map(|k| mass(k / n, k % n))
                .fold(0.0, |acc, m| acc + m)
        })
        .fold(0.0, f64::max);

    Ok(WitnessSets {
        epsilon,
        c_bound,
        d_eps,
        o_eps,
        measure,
        containment_holds,
        diagonal_invariance_defect,
        saturation_rounds: rounds,
        witnessed: measure > WITNESS_TOLERANCE && measure < 1.0 - WITNESS_TOLERANCE,
    })
}

/// `[[cos 2πt, −sin 2πt], [sin 2πt, cos 2πt]]`.
pub fn rotation_matrix(turns: f64) -> DMatrix<f64> {
    let (s, c) = (TAU * turns).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `points` equally spaced points on the unit circle, uniform weights,
/// and the sample of all rotations by `k/points`.
pub fn circle_rotation_system(points: usize) -> Result<BKSystem> {
    if points < 2 {
        return Err(Error::invalid("the circle cloud needs at least two points"));
    }
    let cloud = (0..points)
        .map(|k| {
            let (s, c) = (TAU * k as f64 / points as f64).sin_cos();
            vec![c, s]
        })
        .collect();
    let labels: Vec<i64> = (0..points as i64).collect();
    let maps = labels.iter().map(|&k| rotation_matrix(k as f64 / points as f64)).collect();
    BKSystem::new(cloud, vec![1.0 / points as f64; points], labels, maps)
}

/// Orbit of `start` under the powers of `V R V⁻¹`, with `R` the rotation
/// by `1/order` turn: an equicontinuous but non-isometric linear action.
pub fn conjugated_rotation_system(v: &DMatrix<f64>, order: usize, start: &[f64]) -> Result<BKSystem> {
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::invalid("conjugating matrix is singular"))?;
    let labels: Vec<i64> = (0..order as i64).collect();
    let maps: Vec<DMatrix<f64>> = labels
        .iter()
        .map(|&k| v * rotation_matrix(k as f64 / order as f64) * &v_inv)
        .collect();
    let x = nalgebra::DVector::from_column_slice(start);
    let cloud = maps.iter().map(|m| (m * &x).iter().copied().collect()).collect();
    BKSystem::new(cloud, vec![1.0 / order as f64; order], labels, maps)
}
