//! Run configuration: strict TOML with explicit unit conventions.
//!
//! Frequencies (γ, g) default to "MHz divided by 2π" (γ = 2π·value·10⁶ rad/s)
//! and decoherence rates to linear MHz (Γ = value·10⁶ s⁻¹), matching the
//! conventions of the reproduced results; both can be switched to raw
//! per-second values in the `[units]` section. Unknown keys are rejected so
//! unit mistakes surface as parse errors instead of silently wrong physics.

use crate::couplings::{AtomCoupling, CouplingLayout, CouplingPoint, WaveguideParams};
use crate::protocols::ModelKind;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub layout: LayoutSection,
    pub units: UnitsSection,
    pub noise: NoiseSection,
    pub model: ModelSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutSection {
    /// "reference-3" (the default) or "reference-5"; mutually exclusive with
    /// `file`.
    pub preset: Option<String>,
    /// Path to a custom layout file (raw units, no conversion).
    pub file: Option<PathBuf>,
    /// Coupling strength γ per point, in `units.frequency`.
    pub gamma: f64,
    /// Effective gate coupling g; defaults to γ.
    pub g: Option<f64>,
}

impl Default for LayoutSection {
    fn default() -> Self {
        Self {
            preset: None,
            file: None,
            gamma: 4.0,
            g: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct UnitsSection {
    pub frequency: FrequencyUnit,
    pub rate: RateUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnit {
    /// value → 2π·value·10⁶ rad/s
    #[default]
    MhzOver2pi,
    RadPerS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateUnit {
    /// value → value·10⁶ s⁻¹
    #[default]
    Mhz,
    PerS,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Extra decay Γ_ex per atom, in `units.rate`.
    pub gamma_ex: f64,
    /// Pure dephasing Γ_φ per atom, in `units.rate`.
    pub gamma_phi: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            gamma_ex: 0.01,
            gamma_phi: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelChoice,
    /// Anharmonicity ratio |χ|/g for the full model.
    pub chi_over_g: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelChoice::Effective,
            chi_over_g: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    #[default]
    Effective,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub reltol: f64,
    pub abstol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            reltol: crate::dynamics::DEFAULT_RELTOL,
            abstol: crate::dynamics::DEFAULT_ABSTOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Grid extent: Γ/g ∈ [0, max_ratio] on both axes.
    pub max_ratio: f64,
    pub points_per_axis: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            max_ratio: 2e-3,
            points_per_axis: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: OutputFormat,
    /// Significant digits in numeric output.
    pub digits: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            format: OutputFormat::Csv,
            digits: 17,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Custom layout file: waveguide geometry plus per-atom coupling points,
/// all in raw units (no conversion applied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub waveguide: WaveguideFileSection,
    pub atoms: Vec<AtomFileSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideFileSection {
    pub dx: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomFileSection {
    /// Coupling-point positions in units of dx.
    pub positions: Vec<f64>,
    /// Uniform strength per point.
    pub strength: f64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if self.layout.preset.is_some() && self.layout.file.is_some() {
            return Err(Error::Config(
                "layout.preset and layout.file are mutually exclusive".into(),
            ));
        }
        if let Some(p) = &self.layout.preset {
            if p != "reference-3" && p != "reference-5" {
                return Err(Error::Config(format!(
                    "unknown layout preset {p:?} (expected \"reference-3\" or \"reference-5\")"
                )));
            }
        }
        if self.layout.gamma <= 0.0 {
            return Err(Error::Config(format!(
                "layout.gamma must be > 0, got {}",
                self.layout.gamma
            )));
        }
        if let Some(g) = self.layout.g {
            if g <= 0.0 {
                return Err(Error::Config(format!("layout.g must be > 0, got {g}")));
            }
        }
        if self.noise.gamma_ex < 0.0 || self.noise.gamma_phi < 0.0 {
            return Err(Error::Config("noise rates must be >= 0".into()));
        }
        if self.model.chi_over_g <= 0.0 {
            return Err(Error::Config(format!(
                "model.chi_over_g must be > 0, got {}",
                self.model.chi_over_g
            )));
        }
        if self.solver.reltol <= 0.0 || self.solver.abstol <= 0.0 {
            return Err(Error::Config("solver tolerances must be > 0".into()));
        }
        if self.sweep.max_ratio <= 0.0 || self.sweep.points_per_axis < 2 {
            return Err(Error::Config(
                "sweep needs max_ratio > 0 and points_per_axis >= 2".into(),
            ));
        }
        if self.output.digits == 0 || self.output.digits > 17 {
            return Err(Error::Config(format!(
                "output.digits must be in 1..=17, got {}",
                self.output.digits
            )));
        }
        Ok(())
    }

    fn frequency_to_angular(&self, value: f64) -> f64 {
        match self.units.frequency {
            FrequencyUnit::MhzOver2pi => 2.0 * PI * value * 1e6,
            FrequencyUnit::RadPerS => value,
        }
    }

    fn rate_to_per_second(&self, value: f64) -> f64 {
        match self.units.rate {
            RateUnit::Mhz => value * 1e6,
            RateUnit::PerS => value,
        }
    }

    /// γ in rad/s.
    pub fn gamma(&self) -> f64 {
        self.frequency_to_angular(self.layout.gamma)
    }

    /// Effective gate coupling g in rad/s (defaults to γ).
    pub fn g(&self) -> f64 {
        self.layout
            .g
            .map(|g| self.frequency_to_angular(g))
            .unwrap_or_else(|| self.gamma())
    }

    /// Γ_ex in s⁻¹.
    pub fn gamma_ex(&self) -> f64 {
        self.rate_to_per_second(self.noise.gamma_ex)
    }

    /// Γ_φ in s⁻¹.
    pub fn gamma_phi(&self) -> f64 {
        self.rate_to_per_second(self.noise.gamma_phi)
    }

    pub fn model_kind(&self) -> ModelKind {
        match self.model.kind {
            ModelChoice::Effective => ModelKind::Effective,
            ModelChoice::Full => ModelKind::Full {
                chi_over_g: self.model.chi_over_g,
            },
        }
    }

    /// Build the configured coupling layout. Preset layouts use the
    /// normalized waveguide and γ from this config; file layouts are taken
    /// verbatim.
    pub fn layout(&self) -> Result<CouplingLayout> {
        if let Some(path) = &self.layout.file {
            let text = std::fs::read_to_string(path)?;
            let file: LayoutFile =
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let atoms = file
                .atoms
                .iter()
                .map(|a| AtomCoupling {
                    points: a
                        .positions
                        .iter()
                        .map(|&position| CouplingPoint {
                            position,
                            strength: a.strength,
                        })
                        .collect(),
                })
                .collect();
            return CouplingLayout::new(
                WaveguideParams::new(file.waveguide.dx, file.waveguide.v)?,
                atoms,
            );
        }
        let n_atoms = match self.layout.preset.as_deref() {
            Some("reference-5") => 5,
            _ => 3,
        };
        crate::couplings::reference_layout(n_atoms, self.gamma())
    }
}
