//! Group elements for `ℤᵈ`, `𝕋ᵈ`, `ℝᵈ` and `H₃(ℝ)`, characters of the
//! abelian kinds, and Følner boxes approximating the invariant mean.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// The four supported groups. All of them are amenable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "group", rename_all = "snake_case")]
pub enum GroupKind {
    IntLattice { dim: usize },
    Torus { dim: usize },
    RealVector { dim: usize },
    Heisenberg,
}

/// A point of one of the supported groups.
///
/// Torus coordinates are kept in `[0, 1)`; use [`GroupElement::torus`] to
/// construct them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "group", rename_all = "snake_case")]
pub enum GroupElement {
    IntLattice { coords: Vec<i64> },
    Torus { coords: Vec<f64> },
    RealVector { coords: Vec<f64> },
    /// The unipotent matrix `M(a, b, c)` with `a`, `b` above the diagonal
    /// and `c` in the corner.
    Heisenberg { a: f64, b: f64, c: f64 },
}

/// Reduces to `[0, 1)`, mapping values that round up to `1.0` back to `0`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `exp(2πi t)`, reducing `t` modulo one before evaluating.
pub fn unit_phase(t: f64) -> C64 {
    C64::from_polar(1.0, TAU * wrap_unit(t))
}

impl GroupElement {
    pub fn int(coords: impl Into<Vec<i64>>) -> Self {
        GroupElement::IntLattice {
            coords: coords.into(),
        }
    }

    pub fn torus(coords: impl Into<Vec<f64>>) -> Self {
        GroupElement::Torus {
            coords: coords.into().into_iter().map(wrap_unit).collect(),
        }
    }

    pub fn real(coords: impl Into<Vec<f64>>) -> Self {
        GroupElement::RealVector {
            coords: coords.into(),
        }
    }

    pub fn heisenberg(a: f64, b: f64, c: f64) -> Self {
        GroupElement::Heisenberg { a, b, c }
    }

    pub fn kind(&self) -> GroupKind {
        match self {
            GroupElement::IntLattice { coords } => GroupKind::IntLattice { dim: coords.len() },
            GroupElement::Torus { coords } => GroupKind::Torus { dim: coords.len() },
            GroupElement::RealVector { coords } => GroupKind::RealVector { dim: coords.len() },
            GroupElement::Heisenberg { .. } => GroupKind::Heisenberg,
        }
    }

    pub fn identity(kind: GroupKind) -> Self {
        match kind {
            GroupKind::IntLattice { dim } => GroupElement::int(vec![0; dim]),
            GroupKind::Torus { dim } => GroupElement::torus(vec![0.0; dim]),
            GroupKind::RealVector { dim } => GroupElement::real(vec![0.0; dim]),
            GroupKind::Heisenberg => GroupElement::heisenberg(0.0, 0.0, 0.0),
        }
    }

    /// Coordinates as reals; for `H₃` this is `(a, b, c)`.
    pub fn coordinates(&self) -> Vec<f64> {
        match self {
            GroupElement::IntLattice { coords } => coords.iter().map(|&v| v as f64).collect(),
            GroupElement::Torus { coords } | GroupElement::RealVector { coords } => coords.clone(),
            GroupElement::Heisenberg { a, b, c } => vec![*a, *b, *c],
        }
    }

    /// Euclidean distance between coordinate vectors. For the torus the
    /// coordinate difference is taken to the nearest representative.
    pub fn coordinate_distance(&self, other: &GroupElement) -> Result<f64> {
        if self.kind() != other.kind() {
            return Err(kind_mismatch(self, other));
        }
        let torus = matches!(self, GroupElement::Torus { .. });
        let d2: f64 = self
            .coordinates()
            .iter()
            .zip(other.coordinates())
            .map(|(x, y)| {
                let mut d = x - y;
                if torus {
                    d -= d.round();
                }
                d * d
            })
            .sum();
        Ok(d2.sqrt())
    }
}

fn kind_mismatch(g: &GroupElement, h: &GroupElement) -> Error {
    Error::invalid(format!(
        "group kind mismatch: {:?} vs {:?}",
        g.kind(),
        h.kind()
    ))
}

/// Group product `g·h`.
pub fn compose(g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
    if g.kind() != h.kind() {
        return Err(kind_mismatch(g, h));
    }
    Ok(match (g, h) {
        (GroupElement::IntLattice { coords: x }, GroupElement::IntLattice { coords: y }) => {
            GroupElement::int(x.iter().zip(y).map(|(a, b)| a + b).collect::<Vec<_>>())
        }
        (GroupElement::Torus { coords: x }, GroupElement::Torus { coords: y }) => {
            GroupElement::torus(x.iter().zip(y).map(|(a, b)| a + b).collect::<Vec<_>>())
        }
        (GroupElement::RealVector { coords: x }, GroupElement::RealVector { coords: y }) => {
            GroupElement::real(x.iter().zip(y).map(|(a, b)| a + b).collect::<Vec<_>>())
        }
        (
            GroupElement::Heisenberg { a, b, c },
            GroupElement::Heisenberg {
                a: a2,
                b: b2,
                c: c2,
            },
        ) => GroupElement::heisenberg(a + a2, b + b2, c + c2 + a * b2),
        _ => unreachable!("kinds checked above"),
    })
}

pub fn inverse(g: &GroupElement) -> GroupElement {
    match g {
        GroupElement::IntLattice { coords } => {
            GroupElement::int(coords.iter().map(|v| -v).collect::<Vec<_>>())
        }
        GroupElement::Torus { coords } => {
            GroupElement::torus(coords.iter().map(|v| -v).collect::<Vec<_>>())
        }
        GroupElement::RealVector { coords } => {
            GroupElement::real(coords.iter().map(|v| -v).collect::<Vec<_>>())
        }
        GroupElement::Heisenberg { a, b, c } => GroupElement::heisenberg(-a, -b, a * b - c),
    }
}

/// Frequency of a character. Integer frequencies pair with the torus,
/// real frequencies with `ℤᵈ` (as a point of the dual torus) and `ℝᵈ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "values", rename_all = "snake_case")]
pub enum Frequency {
    Integer(Vec<i64>),
    Real(Vec<f64>),
}

/// A unitary character `χ(g) = exp(2πi⟨frequency, g⟩)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Character {
    pub frequency: Frequency,
}

impl Character {
    pub fn integer(freq: impl Into<Vec<i64>>) -> Self {
        Character {
            frequency: Frequency::Integer(freq.into()),
        }
    }

    pub fn real(freq: impl Into<Vec<f64>>) -> Self {
        Character {
            frequency: Frequency::Real(freq.into()),
        }
    }

    /// The pairing `⟨frequency, g⟩` in turns (before reduction mod 1).
    pub fn pairing(&self, g: &GroupElement) -> Result<f64> {
        let (freq, coords): (Vec<f64>, Vec<f64>) = match (&self.frequency, g) {
            (Frequency::Integer(k), GroupElement::Torus { coords }) => {
                (k.iter().map(|&v| v as f64).collect(), coords.clone())
            }
            (Frequency::Integer(k), GroupElement::IntLattice { coords }) => {
                // integer frequencies are trivial on ℤᵈ
                if k.len() != coords.len() {
                    return Err(dim_mismatch(k.len(), coords.len()));
                }
                return Ok(0.0);
            }
            (Frequency::Real(theta), GroupElement::IntLattice { coords }) => {
                (theta.clone(), coords.iter().map(|&v| v as f64).collect())
            }
            (Frequency::Real(theta), GroupElement::RealVector { coords }) => {
                (theta.clone(), coords.clone())
            }
            (_, GroupElement::Heisenberg { .. }) => {
                return Err(Error::Unsupported(
                    "characters are defined for the abelian kinds only".into(),
                ))
            }
            (f, g) => {
                return Err(Error::invalid(format!(
                    "frequency {f:?} does not pair with {:?}",
                    g.kind()
                )))
            }
        };
        if freq.len() != coords.len() {
            return Err(dim_mismatch(freq.len(), coords.len()));
        }
        Ok(freq.iter().zip(&coords).map(|(a, b)| a * b).sum())
    }
}

fn dim_mismatch(freq: usize, group: usize) -> Error {
    Error::invalid(format!(
        "character dimension {freq} does not match group dimension {group}"
    ))
}

/// Evaluates `χ(g)`; always of modulus one.
pub fn character_eval(chi: &Character, g: &GroupElement) -> Result<C64> {
    Ok(unit_phase(chi.pairing(g)?))
}

/// A finite symmetric box used to approximate the invariant mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FolnerWindow {
    pub kind: GroupKind,
    pub radius: usize,
    pub step: f64,
    pub elements: Vec<GroupElement>,
}

impl FolnerWindow {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Averages `f` over the window.
    pub fn mean<F>(&self, mut f: F) -> f64
    where
        F: FnMut(&GroupElement) -> f64,
    {
        let total: f64 = self.elements.iter().map(&mut f).sum();
        total / self.elements.len() as f64
    }
}

/// Grid offsets `j·step` with `|j·step| ≤ radius`.
fn axis(radius: usize, step: f64) -> Vec<f64> {
    let m = (radius as f64 / step + 1e-9).floor() as i64;
    (-m..=m).map(|j| j as f64 * step).collect()
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect()
    })
}

/// Symmetric box of radius `radius` around the identity.
///
/// - `ℤᵈ`: integer points of `[−N, N]ᵈ`; `step` is ignored.
/// - `ℝᵈ`: grid points `j·step` inside `[−N, N]ᵈ`.
/// - `𝕋ᵈ`: the points `j·step mod 1` for `|j| ≤ N`, deduplicated.
/// - `H₃`: `(a, b)` on the grid of `[−N, N]²` and the central coordinate
///   taken in exponential coordinates, `c = z + ab/2` with `z` on the grid,
///   which makes the box closed under inversion.
pub fn folner_box(kind: GroupKind, radius: usize, step: f64) -> Result<FolnerWindow> {
    if radius == 0 {
        return Err(Error::invalid("Følner radius must be at least 1"));
    }
    let continuous = !matches!(kind, GroupKind::IntLattice { .. });
    if continuous && !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    let elements = match kind {
        GroupKind::IntLattice { dim } => {
            let r = radius as i64;
            let axes: Vec<Vec<f64>> = (0..dim).map(|_| (-r..=r).map(|v| v as f64).collect()).collect();
            cartesian(&axes)
                .into_iter()
                .map(|p| GroupElement::int(p.iter().map(|&v| v as i64).collect::<Vec<_>>()))
                .collect()
        }
        GroupKind::RealVector { dim } => {
            let axes: Vec<Vec<f64>> = (0..dim).map(|_| axis(radius, step)).collect();
            cartesian(&axes).into_iter().map(GroupElement::real).collect()
        }
        GroupKind::Torus { dim } => {
            let r = radius as i64;
            let one: Vec<f64> = (-r..=r).map(|j| j as f64 * step).collect();
            let axes: Vec<Vec<f64>> = (0..dim).map(|_| one.clone()).collect();
            let mut out: Vec<GroupElement> = Vec::new();
            for p in cartesian(&axes) {
                let g = GroupElement::torus(p);
                let dup = out.iter().any(|h| {
                    g.coordinate_distance(h).map(|d| d < 1e-12).unwrap_or(false)
                });
                if !dup {
                    out.push(g);
                }
            }
            out
        }
        GroupKind::Heisenberg => {
            let ax = axis(radius, step);
            let mut out = Vec::with_capacity(ax.len().pow(3));
            for &a in &ax {
                for &b in &ax {
                    for &z in &ax {
                        out.push(GroupElement::heisenberg(a, b, z + 0.5 * a * b));
                    }
                }
            }
            out
        }
    };
    Ok(FolnerWindow {
        kind,
        radius,
        step,
        elements,
    })
}
