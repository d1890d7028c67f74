//! Run configuration, read from TOML. Every section and key is optional;
//! unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentParams;
use crate::baseline::BaselineParams;
use crate::error::{Error, Result};
use crate::geometry::FuseParams;
use crate::labeling::LabelingParams;
use crate::metrics::{Correspondence, MacroConvention, PCP_ALPHA};
use crate::model::{EntityClass, RelationClass, Split};
use crate::roles::{RoleClass, RoleRule, RoleWeightConfig, Side};
use crate::synth::{default_script, PerturbConfig, PhaseSpan, ScenarioConfig};
use crate::tracking::TrackingParams;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsSection,
    pub fusion: FusionSection,
    pub labeling: LabelingParams,
    pub augment: AugmentParams,
    pub baseline: BaselineParams,
    pub tracking: TrackingParams,
    pub roles: RolesSection,
    pub metrics: MetricsSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Directory holding one subdirectory per take.
    pub data_root: PathBuf,
    /// Take used when `--take` is not given.
    pub take: Option<String>,
    pub split: Split,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection { data_root: PathBuf::from("data"), take: None, split: Split::Test }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    /// Voxel edge in meters; 0 keeps every point.
    pub voxel_size: f64,
}

impl Default for FusionSection {
    fn default() -> Self {
        FusionSection { voxel_size: FuseParams::default().voxel_size.unwrap_or(0.0) }
    }
}

impl FusionSection {
    pub fn params(&self) -> FuseParams {
        FuseParams { voxel_size: (self.voxel_size > 0.0).then_some(self.voxel_size) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleSource {
    #[default]
    Heuristic,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub predicate: RelationClass,
    pub side: Side,
    #[serde(default)]
    pub counterpart: Option<String>,
    pub weights: BTreeMap<String, f64>,
}

impl RuleSpec {
    fn to_rule(&self) -> Result<RoleRule> {
        let mut weights = [0.0; RoleClass::COUNT];
        for (name, w) in &self.weights {
            let role: RoleClass = name.parse().map_err(|e: Error| Error::BadConfig(e.to_string()))?;
            weights[role.index()] = *w;
        }
        Ok(RoleRule {
            predicate: self.predicate,
            side: self.side,
            counterpart: self.counterpart.as_ref().map(EntityClass::new),
            weights,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolesSection {
    pub source: RoleSource,
    /// Score file for the external source, relative to the take directory
    /// unless absolute.
    pub external_scores: Option<PathBuf>,
    /// Replaces the default weight table when present.
    pub rules: Option<Vec<RuleSpec>>,
}

impl RolesSection {
    pub fn weights(&self) -> Result<RoleWeightConfig> {
        let config = match &self.rules {
            None => RoleWeightConfig::default(),
            Some(specs) => RoleWeightConfig { rules: specs.iter().map(RuleSpec::to_rule).collect::<Result<_>>()? },
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub macro_convention: MacroConvention,
    pub pcp_alpha: f64,
    pub correspondence: Correspondence,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            macro_convention: MacroConvention::default(),
            pcp_alpha: PCP_ALPHA,
            correspondence: Correspondence::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub take_id: String,
    pub n_frames: usize,
    pub script: Vec<PhaseSpan>,
    pub point_sigma: f64,
    pub pose_jitter: f64,
    pub dropout: f64,
    pub density: f64,
    pub perturb: PerturbConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        SynthSection {
            take_id: s.take_id,
            n_frames: s.n_frames,
            script: default_script(),
            point_sigma: s.point_sigma,
            pose_jitter: s.pose_jitter,
            dropout: s.dropout,
            density: s.density,
            perturb: PerturbConfig::default(),
        }
    }
}

impl SynthSection {
    pub fn scenario(&self, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            take_id: self.take_id.clone(),
            n_frames: self.n_frames,
            script: self.script.clone(),
            point_sigma: self.point_sigma,
            pose_jitter: self.pose_jitter,
            dropout: self.dropout,
            density: self.density,
            seed,
        }
    }
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::BadConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::BadConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text).map_err(|e| match e {
            Error::BadConfig(msg) => Error::BadConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fusion.voxel_size >= 0.0 && self.fusion.voxel_size.is_finite()) {
            return Err(Error::BadConfig("fusion voxel_size must be finite and non-negative".into()));
        }
        self.labeling.validate()?;
        self.augment.validate()?;
        self.baseline.validate()?;
        self.tracking.validate()?;
        self.roles.weights()?;
        if self.roles.source == RoleSource::External && self.roles.external_scores.is_none() {
            return Err(Error::BadConfig("roles.source = \"external\" needs roles.external_scores".into()));
        }
        if !(self.metrics.pcp_alpha > 0.0 && self.metrics.pcp_alpha.is_finite()) {
            return Err(Error::BadConfig("metrics pcp_alpha must be positive".into()));
        }
        self.synth.scenario(0).validate()?;
        self.synth.perturb.validate()?;
        Ok(())
    }

    /// The take directory for `take`, falling back to `paths.take`.
    pub fn take_dir(&self, take: Option<&str>) -> Result<PathBuf> {
        let take = take
            .or(self.paths.take.as_deref())
            .ok_or_else(|| Error::BadConfig("no take given and paths.take is unset".into()))?;
        Ok(self.paths.data_root.join(take))
    }
}
