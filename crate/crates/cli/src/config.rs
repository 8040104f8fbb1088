use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use biomarker_lab::eval::{EvalConfig, ModelSpec};
use biomarker_lab::features::FeatureParams;
use biomarker_lab::models::{ModelKind, ModelParams};
use biomarker_lab::stats::{Correction, DEFAULT_RESAMPLES};
use biomarker_lab::synthcohort::CohortConfig;
use biomarker_lab::Category;
use serde::{Deserialize, Serialize};

use crate::Invalid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub resamples: usize,
    pub correction: Correction,
    pub group_a: Category,
    pub group_b: Category,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            correction: Correction::None,
            group_a: Category::SociallyLonely,
            group_b: Category::EmotionallyLonely,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Rows per table in the markdown rankings; the CSVs keep every feature.
    pub top_k: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self { top_k: 15 }
    }
}

/// The whole run in one document. Flags override fields; the effective
/// document is hashed into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input_dir: Option<PathBuf>,
    pub seed: u64,
    pub features: FeatureParams,
    pub stats: StatsConfig,
    pub eval: EvalConfig,
    pub models: Vec<ModelKind>,
    /// Replaces the default search space of the named models.
    pub grids: BTreeMap<ModelKind, Vec<ModelParams>>,
    pub explain: ExplainConfig,
    pub synth: CohortConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_dir: None,
            seed: 1,
            features: FeatureParams::default(),
            stats: StatsConfig::default(),
            eval: EvalConfig::default(),
            models: ModelKind::ALL.to_vec(),
            grids: BTreeMap::new(),
            explain: ExplainConfig::default(),
            synth: CohortConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Invalid(format!("bad config {}: {e}", path.display())).into())
    }

    pub fn validate(&self) -> Result<(), Invalid> {
        if self.models.is_empty() {
            return Err(Invalid("config lists no models".into()));
        }
        if self.stats.group_a == self.stats.group_b {
            return Err(Invalid("stats groups must differ".into()));
        }
        for (kind, grid) in &self.grids {
            if grid.is_empty() {
                return Err(Invalid(format!("empty grid for {}", kind.as_str())));
            }
            if let Some(p) = grid.iter().find(|p| p.kind() != *kind) {
                return Err(Invalid(format!("grid for {} contains {} parameters", kind.as_str(), p.kind().as_str())));
            }
        }
        Ok(())
    }

    /// Search space per listed model, in listed order.
    pub fn roster(&self) -> Vec<ModelSpec> {
        self.models
            .iter()
            .map(|k| match self.grids.get(k) {
                Some(grid) => ModelSpec { kind: *k, grid: grid.clone() },
                None => ModelSpec::default_for(*k),
            })
            .collect()
    }

    pub fn input_dir(&self, flag: Option<&Path>) -> Result<PathBuf, Invalid> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.input_dir.clone())
            .ok_or_else(|| Invalid("no input directory: pass --input or set input_dir in the config".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.roster().len(), 7);
    }

    #[test]
    fn grid_overrides_and_validation() {
        let c: RunConfig = serde_json::from_str(
            r#"{"models": ["knn", "majority"], "grids": {"knn": [{"model": "knn", "k": 4}]}}"#,
        )
        .unwrap();
        c.validate().unwrap();
        let r = c.roster();
        assert_eq!(r[0].grid.len(), 1);
        assert_eq!(r[1].grid, vec![ModelParams::Majority]);
        let bad: RunConfig = serde_json::from_str(r#"{"grids": {"knn": [{"model": "majority"}]}}"#).unwrap();
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
    }
}
