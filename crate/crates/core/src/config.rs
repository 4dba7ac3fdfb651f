//! Run configuration, read from TOML. Every key is optional and unknown keys
//! are rejected.
//!
//! ```
//! use minimal_annulus::config::RunConfig;
//!
//! let cfg = RunConfig::parse("seed = 7\n[mesh]\nresolution = 0.015\n").unwrap();
//! assert_eq!(cfg.labyrinth_n, 16);
//! assert!(RunConfig::parse("labyrinth_n = 8\n").is_err());
//! assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::deformation::{LemmaConfig, StepConfig};
use crate::geometry::{make_polygonal_pair, PolygonSpec, PolygonalPair};
use crate::labyrinth::Labyrinth;
use crate::metric::resolution_bound;
use crate::sequence::SequenceConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid `{key}`: {detail}")]
    Invalid { key: &'static str, detail: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    pub p: PolygonSpec,
    pub q: PolygonSpec,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            p: PolygonSpec::Regular { sides: 16, circumradius: 0.985, phase: 0.0 },
            q: PolygonSpec::Regular { sides: 16, circumradius: 0.37, phase: 0.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub resolution: f64,
    pub quad_tol: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { resolution: 0.01, quad_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RungeConfig {
    pub basis_budget: usize,
    pub tau_doublings: u32,
    pub sample_spacing: f64,
}

impl Default for RungeConfig {
    fn default() -> Self {
        let s = StepConfig::default();
        RungeConfig { basis_budget: s.basis_budget, tau_doublings: s.tau_doublings, sample_spacing: s.sample_spacing }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterConfig {
    /// Number of terms `χ₁ … χ_n` to build.
    pub terms: usize,
    pub m_budget: u32,
    pub bisection_steps: u32,
    pub xi_start: f64,
}

impl Default for OuterConfig {
    fn default() -> Self {
        let s = SequenceConfig::default();
        OuterConfig { terms: 4, m_budget: s.m_budget, bisection_steps: s.bisection_steps, xi_start: s.xi_start }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub labyrinth_n: usize,
    /// Recorded in every report. No stage draws random numbers.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub pair: PairConfig,
    pub mesh: MeshConfig,
    pub runge: RungeConfig,
    pub sequence: OuterConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            labyrinth_n: 16,
            seed: 0,
            out_dir: PathBuf::from("out"),
            pair: PairConfig::default(),
            mesh: MeshConfig::default(),
            runge: RungeConfig::default(),
            sequence: OuterConfig::default(),
        }
    }
}

fn positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid { key, detail: format!("{v} is not a positive number") })
    }
}

impl RunConfig {
    /// Parses and validates.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Hex SHA-256 of the canonical TOML form, with the output directory
    /// left out.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { out_dir: PathBuf::new(), ..self.clone() };
        Sha256::digest(canonical.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_pair(&self) -> Result<PolygonalPair, ConfigError> {
        make_polygonal_pair(&self.pair.p, &self.pair.q)
            .map_err(|e| ConfigError::Invalid { key: "pair", detail: e.to_string() })
    }

    pub fn build_labyrinth(&self) -> Result<Labyrinth, ConfigError> {
        Labyrinth::build(&self.build_pair()?, self.labyrinth_n)
            .map_err(|e| ConfigError::Invalid { key: "labyrinth_n", detail: e.to_string() })
    }

    /// Checks tolerances, the pair, the divisibility of `N` by the side
    /// counts and the mesh resolution against the labyrinth bound.
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("mesh.resolution", self.mesh.resolution)?;
        positive("mesh.quad_tol", self.mesh.quad_tol)?;
        positive("runge.sample_spacing", self.runge.sample_spacing)?;
        positive("sequence.xi_start", self.sequence.xi_start)?;
        if self.runge.basis_budget == 0 {
            return Err(ConfigError::Invalid { key: "runge.basis_budget", detail: "must be positive".into() });
        }
        if self.sequence.terms == 0 || self.sequence.m_budget == 0 {
            return Err(ConfigError::Invalid { key: "sequence", detail: "terms and m_budget must be positive".into() });
        }
        let lab = self.build_labyrinth()?;
        let bound = resolution_bound(&lab);
        if self.mesh.resolution > bound {
            return Err(ConfigError::Invalid {
                key: "mesh.resolution",
                detail: format!(
                    "{} exceeds {bound:.6}, a quarter of the spacing between labyrinth segments at N = {}",
                    self.mesh.resolution, self.labyrinth_n
                ),
            });
        }
        Ok(())
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            basis_budget: self.runge.basis_budget,
            tau_doublings: self.runge.tau_doublings,
            sample_spacing: self.runge.sample_spacing,
            quad_tol: self.mesh.quad_tol,
        }
    }

    pub fn lemma_config(&self) -> LemmaConfig {
        LemmaConfig { n: self.labyrinth_n, resolution: self.mesh.resolution, step: self.step_config() }
    }

    pub fn sequence_config(&self) -> SequenceConfig {
        SequenceConfig {
            lemma: self.lemma_config(),
            m_budget: self.sequence.m_budget,
            bisection_steps: self.sequence.bisection_steps,
            xi_start: self.sequence.xi_start,
        }
    }
}
