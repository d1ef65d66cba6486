//! Run configuration: flat `key = value` text with sections (TOML subset).
//!
//! ```toml
//! experiment = "study"
//! epsilon = [0.08, 0.04, 0.02, 0.01]
//! delta = 0.25
//! seed = 7
//!
//! [geometry]
//! kind = "warped_torus"
//! amplitude = 0.3
//! dim = 2
//!
//! [solver]
//! newton_tol = 1e-11
//!
//! [barrier]
//! k_factor = 5.0
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::barriers::BarrierConfig;
use crate::error::{LabError, Result};
use crate::geometry::{GeometryKind, WarpedGeometry};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Solve,
    Barrier,
    Example1,
    Example2,
    Example3,
    Study,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Barrier => "barrier",
            Experiment::Example1 => "example1",
            Experiment::Example2 => "example2",
            Experiment::Example3 => "example3",
            Experiment::Study => "study",
        }
    }

    /// Geometry the experiment runs on when the config leaves it implicit.
    pub fn default_geometry(self) -> GeometrySpec {
        match self {
            Experiment::Example1 => GeometrySpec::of_kind(GeometryKind::Sphere),
            Experiment::Example2 => GeometrySpec::of_kind(GeometryKind::ProjectiveSphere),
            _ => GeometrySpec::default(),
        }
    }
}

/// Geometry as kind + parameters, or a tabulated warp (`values` sampled on a
/// uniform grid over one period, linearly interpolated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub amplitude: f64,
    pub dim: usize,
    pub period: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self {
            kind: GeometryKind::WarpedTorus,
            amplitude: 0.3,
            dim: 2,
            period: 2.0 * PI,
            values: None,
        }
    }
}

impl GeometrySpec {
    pub fn of_kind(kind: GeometryKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn build(&self) -> Result<WarpedGeometry> {
        match (self.kind, &self.values) {
            (GeometryKind::WarpedTorus, Some(v)) => {
                WarpedGeometry::tabulated_torus(v.clone(), self.dim, self.period)
            }
            (GeometryKind::WarpedTorus, None) => {
                WarpedGeometry::warped_torus(self.amplitude, self.dim, self.period)
            }
            (_, Some(_)) => Err(LabError::Config(
                "tabulated values only apply to warped_torus".into(),
            )),
            (GeometryKind::Sphere, None) => WarpedGeometry::sphere(self.dim),
            (GeometryKind::ProjectiveSphere, None) => WarpedGeometry::projective_sphere(self.dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Descending epsilon ladder.
    pub epsilon: Vec<f64>,
    /// Cutoff exponent used by decomposition and barriers.
    pub delta: f64,
    /// Seed for the optional noise added to initial data.
    pub seed: u64,
    /// Noise amplitude (0 disables).
    pub noise: f64,
    /// Multiplies the power-of-two base resolution.
    pub grid_multiplier: usize,
    /// Refinement factor of the nested grid used for Richardson extrapolation
    /// (odd, so coarse cell centres are fine cell centres).
    pub refine: usize,
    pub out: PathBuf,
    pub geometry: GeometrySpec,
    pub solver: SolverConfig,
    pub barrier: BarrierConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Study,
            epsilon: vec![0.08, 0.04, 0.02, 0.01],
            delta: 0.25,
            seed: 7,
            noise: 0.0,
            grid_multiplier: 1,
            refine: 3,
            out: PathBuf::from("results"),
            geometry: GeometrySpec::default(),
            solver: SolverConfig::default(),
            barrier: BarrierConfig::default(),
        }
    }
}

impl RunConfig {
    /// Defaults for one experiment, with its natural geometry and ladder.
    pub fn for_experiment(experiment: Experiment) -> Self {
        let epsilon = match experiment {
            Experiment::Example1 | Experiment::Example2 => vec![0.08, 0.04, 0.02],
            Experiment::Example3 | Experiment::Solve => vec![0.02],
            Experiment::Barrier => vec![0.04, 0.02],
            Experiment::Study => vec![0.08, 0.04, 0.02, 0.01],
        };
        Self {
            experiment,
            epsilon,
            geometry: experiment.default_geometry(),
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_empty() {
            return Err(LabError::Config("epsilon ladder is empty".into()));
        }
        if self.epsilon.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(LabError::Config(format!(
                "epsilon must lie in (0, 1): {:?}",
                self.epsilon
            )));
        }
        if self.epsilon.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(LabError::Config(format!(
                "epsilon ladder must be strictly descending: {:?}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(LabError::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.grid_multiplier == 0 {
            return Err(LabError::Config("grid_multiplier must be >= 1".into()));
        }
        if self.refine < 3 || self.refine % 2 == 0 {
            return Err(LabError::Config(format!(
                "refine must be odd and >= 3, got {}",
                self.refine
            )));
        }
        if !(self.noise >= 0.0) {
            return Err(LabError::Config(format!(
                "noise must be >= 0, got {}",
                self.noise
            )));
        }
        if !(self.barrier.k_factor > 0.0 && self.barrier.tau_trap > 0.0 && self.barrier.rungs > 0) {
            return Err(LabError::Config(format!(
                "invalid barrier section {:?}",
                self.barrier
            )));
        }
        self.solver.validate()?;
        self.geometry.build()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let cfg = RunConfig::for_experiment(Experiment::Example1);
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn sections_and_defaults() {
        let cfg = RunConfig::from_toml(
            "experiment = \"example3\"\nepsilon = [0.02]\n[geometry]\namplitude = 0.2\n[solver]\nnewton_tol = 1e-10\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Example3);
        assert_eq!(cfg.geometry.amplitude, 0.2);
        assert_eq!(cfg.solver.newton_tol, 1e-10);
        assert_eq!(
            cfg.solver.max_newton_iters,
            SolverConfig::default().max_newton_iters
        );
        assert_eq!(cfg.barrier, BarrierConfig::default());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_toml("epsilon = [0.01, 0.02]").is_err());
        assert!(RunConfig::from_toml("delta = 1.5").is_err());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("refine = 2").is_err());
        assert!(
            RunConfig::from_toml("[geometry]\nkind = \"sphere\"\nvalues = [1.0, 2.0, 3.0]")
                .is_err()
        );
    }
}
