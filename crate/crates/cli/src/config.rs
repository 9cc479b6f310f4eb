//! Experiment configuration: one JSON object with a `kind` discriminator.

use std::path::PathBuf;

use ergolab::gaussian::UnitaryRep;
use ergolab::spaces::SystemSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Multiplier,
    Odometer,
    Bk,
    Subspace,
    Gaussian,
    Heisenberg,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Multiplier => "multiplier",
            Kind::Odometer => "odometer",
            Kind::Bk => "bk",
            Kind::Subspace => "subspace",
            Kind::Gaussian => "gaussian",
            Kind::Heisenberg => "heisenberg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Multiplier(MultiplierConfig),
    Odometer(OdometerConfig),
    Bk(BkConfig),
    Subspace(SubspaceConfig),
    Gaussian(GaussianConfig),
    Heisenberg(HeisenbergConfig),
}

fn default_tol() -> f64 {
    1e-9
}

/// Multiplier test of `T × S` on truncated Fourier / point spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierConfig {
    pub t: SystemSpec,
    pub s: SystemSpec,
    /// Fourier cutoff `K` for rotation factors.
    pub cutoff: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_max_lag() -> usize {
    512
}

/// Eigenvalues, spectral estimate and invariant measure of an odometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdometerConfig {
    pub bits: u32,
    pub p: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Correlation lags fed to the spectral estimate.
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BkSource {
    /// `points` equally spaced points of the circle with all rotations.
    Circle { points: usize },
    /// Factor spanned by the `e^{2πi/2^bits}` eigenfunction of an odometer.
    Odometer { bits: u32, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BkConfig {
    pub source: BkSource,
    pub epsilon: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubspaceSource {
    /// Random unitaries conjugated from a known block structure.
    Blocks { sizes: Vec<usize>, generators: usize },
    /// A 16-dimensional action with no invariant subspace besides constants.
    Surrogate,
}

fn default_max_dim() -> usize {
    ergolab::invariant::MAX_SUBSPACE_DIM
}

fn default_subspace_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceConfig {
    pub source: SubspaceSource,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    #[serde(default = "default_subspace_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_samples() -> usize {
    10_000
}

fn default_fock_level() -> usize {
    2
}

fn default_step() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub rep: UnitaryRep,
    /// Cyclic vector as `[re, im]` pairs.
    pub vector: Vec<[f64; 2]>,
    /// Half-width of the box of group elements indexing the process.
    pub orbit_radius: usize,
    #[serde(default = "default_step")]
    pub orbit_step: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_fock_level")]
    pub fock_level: usize,
    pub window_radius: usize,
    #[serde(default = "default_step")]
    pub window_step: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_gamma() -> f64 {
    1.0
}

fn default_half_width() -> f64 {
    12.0
}

fn default_grid_step() -> f64 {
    0.01
}

fn default_radii() -> Vec<usize> {
    vec![10, 20]
}

fn default_box_step() -> f64 {
    0.5
}

fn default_probe_dim() -> usize {
    13
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeisenbergConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    pub n_max: u64,
    /// Følner box radii; the coefficient verdict uses the first one.
    #[serde(default = "default_radii")]
    pub radii: Vec<usize>,
    #[serde(default = "default_box_step")]
    pub box_step: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_probe_dim")]
    pub probe_dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_tau() -> f64 {
    ergolab::gaussian::DEFAULT_TAU
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(CliError::Schema)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kind(&self) -> Kind {
        match self {
            ExperimentConfig::Multiplier(_) => Kind::Multiplier,
            ExperimentConfig::Odometer(_) => Kind::Odometer,
            ExperimentConfig::Bk(_) => Kind::Bk,
            ExperimentConfig::Subspace(_) => Kind::Subspace,
            ExperimentConfig::Gaussian(_) => Kind::Gaussian,
            ExperimentConfig::Heisenberg(_) => Kind::Heisenberg,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Multiplier(c) => c.seed,
            ExperimentConfig::Odometer(c) => c.seed,
            ExperimentConfig::Bk(c) => c.seed,
            ExperimentConfig::Subspace(c) => c.seed,
            ExperimentConfig::Gaussian(c) => c.seed,
            ExperimentConfig::Heisenberg(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::Multiplier(c) => c.seed = seed,
            ExperimentConfig::Odometer(c) => c.seed = seed,
            ExperimentConfig::Bk(c) => c.seed = seed,
            ExperimentConfig::Subspace(c) => c.seed = seed,
            ExperimentConfig::Gaussian(c) => c.seed = seed,
            ExperimentConfig::Heisenberg(c) => c.seed = seed,
        }
    }

    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            ExperimentConfig::Multiplier(c) => c.out.as_ref(),
            ExperimentConfig::Odometer(c) => c.out.as_ref(),
            ExperimentConfig::Bk(c) => c.out.as_ref(),
            ExperimentConfig::Subspace(c) => c.out.as_ref(),
            ExperimentConfig::Gaussian(c) => c.out.as_ref(),
            ExperimentConfig::Heisenberg(c) => c.out.as_ref(),
        }
    }

    /// Range checks serde cannot express. Module constructors do the rest.
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            ExperimentConfig::Multiplier(c) => {
                positive("tol", c.tol)?;
                if c.cutoff == 0 {
                    return Err(CliError::Invalid("cutoff must be at least 1".into()));
                }
            }
            ExperimentConfig::Odometer(c) => {
                positive("tol", c.tol)?;
                if c.max_lag == 0 {
                    return Err(CliError::Invalid("max_lag must be at least 1".into()));
                }
            }
            ExperimentConfig::Bk(c) => {
                positive("tol", c.tol)?;
                positive("epsilon", c.epsilon)?;
            }
            ExperimentConfig::Subspace(c) => {
                positive("tol", c.tol)?;
                if c.max_dim == 0 || c.max_dim > ergolab::invariant::MAX_SUBSPACE_DIM {
                    return Err(CliError::Invalid(format!(
                        "max_dim must lie in 1..={}",
                        ergolab::invariant::MAX_SUBSPACE_DIM
                    )));
                }
            }
            ExperimentConfig::Gaussian(c) => {
                positive("orbit_step", c.orbit_step)?;
                positive("window_step", c.window_step)?;
                if c.vector.len() != c.rep.dim() {
                    return Err(CliError::Invalid(format!(
                        "vector has length {}, representation has dimension {}",
                        c.vector.len(),
                        c.rep.dim()
                    )));
                }
                if c.fock_level == 0 {
                    return Err(CliError::Invalid("fock_level must be at least 1".into()));
                }
            }
            ExperimentConfig::Heisenberg(c) => {
                positive("half_width", c.half_width)?;
                positive("grid_step", c.grid_step)?;
                positive("box_step", c.box_step)?;
                positive("tau", c.tau)?;
                if c.gamma == 0.0 || !c.gamma.is_finite() {
                    return Err(CliError::Invalid("gamma must be nonzero and finite".into()));
                }
                if c.n_max == 0 || c.radii.is_empty() || c.radii.contains(&0) {
                    return Err(CliError::Invalid("n_max and radii must be positive".into()));
                }
            }
        }
        Ok(())
    }
}
