//! Experiment configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use yf_core::lattice::{HProfile, LatticeError, LatticeParams, LatticeSpacetime, ProfileShape};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    None,
    Bump,
    Gaussian,
}

/// Metric perturbation profile; times in slices, positions in sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub kind: ProfileKind,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub center_x: Option<f64>,
    #[serde(default)]
    pub width_x: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    pub mass: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub profile: Option<ProfileConfig>,
}

impl LatticeConfig {
    pub fn params(&self) -> LatticeParams {
        let profile = match &self.profile {
            None => HProfile::None,
            Some(p) => {
                let shape = ProfileShape {
                    amplitude: p.amplitude,
                    center: p.center * self.dt,
                    width: p.width * self.dt,
                    center_x: p.center_x.map(|c| c * self.dx),
                    width_x: p.width_x.map(|w| w * self.dx),
                };
                match p.kind {
                    ProfileKind::None => HProfile::None,
                    ProfileKind::Bump => HProfile::Bump(shape),
                    ProfileKind::Gaussian => HProfile::Gaussian(shape),
                }
            }
        };
        LatticeParams { nt: self.nt, nx: self.nx, dt: self.dt, dx: self.dx, mass: self.mass, epsilon: self.epsilon, profile }
    }

    pub fn build(&self) -> Result<LatticeSpacetime, ConfigError> {
        Ok(LatticeSpacetime::new(self.params())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    pub p: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    pub sigma_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_backend")]
    pub backend: Backend,
}

fn default_backend() -> Backend {
    Backend::Exact
}

/// Points and field types for the `wightman` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WightmanConfig {
    pub types: Vec<String>,
    pub points: Vec<[usize; 2]>,
    /// Also evaluate the operator-algebra reference (small lattices only;
    /// float tables).
    #[serde(default)]
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    /// Four out-field points `[t, x]`.
    pub points: Vec<[usize; 2]>,
    /// Fraction of the time range over which the coupling is switched on
    /// and off.
    #[serde(default = "default_switch")]
    pub switch_fraction: f64,
    /// Lattice lengths for the decay trend at `epsilon = 0`; points are
    /// placed at the same distance from the final slice.
    #[serde(default)]
    pub decay_nt: Vec<usize>,
    /// Time step of the decay lattices; defaults to `lattice.dt`. Four
    /// mode frequencies must not alias past `2 pi / dt`.
    #[serde(default)]
    pub decay_dt: Option<f64>,
}

fn default_switch() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Number of random synthetic states.
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default = "default_particles")]
    pub max_particles: usize,
    #[serde(default)]
    pub scattering: Option<ScatteringConfig>,
}

/// First-order out-state chain; runs on `[lattice]` unless a lattice is
/// given here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    #[serde(default)]
    pub lattice: Option<LatticeConfig>,
    #[serde(default = "default_switch")]
    pub switch_fraction: f64,
}

/// Instance counts of the identity suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "default_instances")]
    pub glz_instances: usize,
    #[serde(default = "default_instances")]
    pub retpull_instances: usize,
    /// Random point tuples per graph/oracle class; zero skips the class sweep.
    #[serde(default = "default_oracle_samples")]
    pub oracle_samples: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { glz_instances: default_instances(), retpull_instances: default_instances(), oracle_samples: default_oracle_samples() }
    }
}

fn default_instances() -> usize {
    50
}

fn default_oracle_samples() -> usize {
    50
}

fn default_states() -> usize {
    20
}

fn default_particles() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeConfig,
    pub theory: TheoryConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub wightman: Option<WightmanConfig>,
    #[serde(default)]
    pub demo: Option<DemoConfig>,
    #[serde(default)]
    pub reconstruct: Option<ReconstructConfig>,
    #[serde(default)]
    pub check: Option<CheckConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !matches!(self.theory.p, 3 | 4) {
            return Err(ConfigError::Invalid(format!("theory.p must be 3 or 4, got {}", self.theory.p)));
        }
        if self.theory.sigma_max > 3 {
            return Err(ConfigError::Invalid(format!("theory.sigma_max must be at most 3, got {}", self.theory.sigma_max)));
        }
        let in_range = |pts: &[[usize; 2]]| pts.iter().all(|&[t, x]| t < self.lattice.nt && x < self.lattice.nx);
        if let Some(w) = &self.wightman {
            if w.types.len() != w.points.len() {
                return Err(ConfigError::Invalid("wightman.types and wightman.points differ in length".into()));
            }
            if !in_range(&w.points) {
                return Err(ConfigError::Invalid("wightman.points outside the lattice".into()));
            }
        }
        if let Some(d) = &self.demo {
            if d.points.len() != 4 || !in_range(&d.points) {
                return Err(ConfigError::Invalid("demo.points must be four lattice points".into()));
            }
            if !(0.0..0.5).contains(&d.switch_fraction) {
                return Err(ConfigError::Invalid("demo.switch_fraction must lie in [0, 0.5)".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        [lattice]
        nt = 8
        nx = 4
        dt = 0.5
        dx = 1.0
        mass = 0.5
        [theory]
        p = 3
        sigma_max = 2
        [run]
        seed = 3
        backend = "exact"
    "#;

    #[test]
    fn parses_and_hashes_deterministically() {
        let a = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let b = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        assert_eq!(a.lattice.build().unwrap().len(), 32);
        let mut c = a.clone();
        c.run.seed = 4;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_bad_theory() {
        let bad = SAMPLE.replace("p = 3", "p = 5");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(ConfigError::Invalid(_))));
        let bad = SAMPLE.replace("sigma_max = 2", "sigma_max = 4");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(ConfigError::Invalid(_))));
        let bad = SAMPLE.replace("seed = 3", "seed = 3\ncolour = 1");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(ConfigError::Parse(_))));
    }
}
