//! Run configuration read from a TOML file. Every section is optional and
//! defaults to the reference run; unknown keys are rejected.
//!
//! ```toml
//! [energy]
//! dimension = 3
//!
//! [energy.g]                # family plus its coefficient arrays
//! family = "quadratic"      # quadratic | power_sum | inverse_power_sum | log_entropy | custom
//! coefficients = [1.0]
//!
//! [energy.h]
//! family = "log_entropy"
//! coefficients = [1.0]
//!
//! [boundary]
//! kind = "stress_free"      # or "constant" (value) / "affine" (c0, c1)
//!
//! [solver]                  # any SolverSettings field; omitted ones keep defaults
//! rel_tol = 1e-10
//!
//! [sweep]
//! phi0_min = 0.025
//! phi0_max = 2.7
//! count = 40
//! spacing = "log"           # or "linear"
//!
//! [output]
//! dir = "out"
//! svg = true
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cavitation::bifurcation::{phi0_grid, Spacing};
use cavitation::boundary::{BoundaryRegistry, BoundarySpec, CavityBoundary};
use cavitation::energy::{FamilyRegistry, ModelSpec, StoredEnergy};
use cavitation::radial::SolverSettings;
use serde::{Deserialize, Serialize};

use crate::AppError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub dimension: usize,
    pub g: ModelSpec,
    pub h: ModelSpec,
}

impl Default for EnergySection {
    fn default() -> Self {
        Self {
            dimension: 3,
            g: ModelSpec::new("quadratic", &[1.0]),
            h: ModelSpec::new("log_entropy", &[1.0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub phi0_min: f64,
    pub phi0_max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            phi0_min: 0.025,
            phi0_max: 2.7,
            count: 40,
            spacing: Spacing::Log,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            svg: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub energy: EnergySection,
    pub boundary: BoundarySpec,
    pub solver: SolverSettings,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

/// Validated configuration with the strategies resolved.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub energy: StoredEnergy,
    pub boundary: Arc<dyn CavityBoundary>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, AppError> {
        toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Vec<f64>, AppError> {
        let s = &self.sweep;
        Ok(phi0_grid(s.phi0_min, s.phi0_max, s.count, s.spacing)?)
    }

    /// Checks every section and builds the energy and boundary.
    pub fn resolve(self) -> Result<Resolved, AppError> {
        self.solver.validate()?;
        self.grid()?;
        let energy = StoredEnergy::from_specs(
            &FamilyRegistry::builtin(),
            &self.energy.g,
            &self.energy.h,
            self.energy.dimension,
        )?;
        let boundary = BoundaryRegistry::builtin().build(&self.boundary)?;
        if !boundary.cavity_stress(0.0).is_finite() {
            return Err(AppError::Config("boundary G(0) must be finite".into()));
        }
        Ok(Resolved {
            config: self,
            energy,
            boundary,
        })
    }
}
