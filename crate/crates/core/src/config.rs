//! Engine tunables. Every length tolerance is a fraction of the model's
//! bounding-box diagonal so results do not depend on model units.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::candidates::AnchorRatio;

#[derive(Debug, Error, PartialEq)]
#[error("invalid engine config: {0}")]
pub struct ConfigError(pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Largest allowed per-axis length change and midpoint shift, each
    /// relative to the original axis length.
    pub prune_fraction: f64,
    /// Relation detection/satisfaction distance, fraction of bbox diagonal.
    pub relation_distance_tol: f64,
    /// Degrees. Primitives are axis-aligned so parallelism is exact; kept
    /// for documents produced by oriented fitters.
    pub relation_angle_tol: f64,
    /// Weight of the guide-count difficulty term.
    pub difficulty_weight: f64,
    /// Deviation charged for each axis that is not anchored.
    pub unguided_axis_penalty: f64,
    /// Projected parent-face area per guide, as a fraction of the image
    /// area, below which a primitive is eyeballed.
    pub eyeball_fraction: f64,
    /// Guides whose endpoints agree within this fraction of the bbox
    /// diagonal are merged.
    pub guide_merge_tol: f64,
    pub ratio_catalog: Vec<AnchorRatio>,
    /// Candidates kept per part (originals always survive).
    pub candidate_cap: usize,
    /// Cheapest first-level candidates per part reused as second-level parents.
    pub second_level_parents: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            prune_fraction: 0.10,
            relation_distance_tol: 0.01,
            relation_angle_tol: 1.0,
            difficulty_weight: 0.05,
            unguided_axis_penalty: 2.0,
            eyeball_fraction: 0.002,
            guide_merge_tol: 1e-4,
            ratio_catalog: AnchorRatio::ALL.to_vec(),
            candidate_cap: 400,
            second_level_parents: 12,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("relation_distance_tol", self.relation_distance_tol),
            ("relation_angle_tol", self.relation_angle_tol),
            ("difficulty_weight", self.difficulty_weight),
            ("unguided_axis_penalty", self.unguided_axis_penalty),
            ("eyeball_fraction", self.eyeball_fraction),
            ("guide_merge_tol", self.guide_merge_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError(format!("{name} must be a positive number, got {v}")));
            }
        }
        if !(self.prune_fraction > 0.0 && self.prune_fraction < 0.5) {
            return Err(ConfigError(format!(
                "prune_fraction must lie in (0, 0.5), got {}",
                self.prune_fraction
            )));
        }
        if self.ratio_catalog.is_empty() {
            return Err(ConfigError("ratio_catalog is empty".into()));
        }
        if self.candidate_cap == 0 {
            return Err(ConfigError("candidate_cap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn allows(&self, ratio: AnchorRatio) -> bool {
        self.ratio_catalog.contains(&ratio)
    }

    /// Short content hash recorded in tutorial documents.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        EngineConfig::default().validate().unwrap();
        assert_eq!(EngineConfig::default().unguided_axis_penalty, 2.0);
    }

    #[test]
    fn rejects_out_of_range_prune_fraction() {
        let cfg = EngineConfig {
            prune_fraction: 0.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = EngineConfig {
            guide_merge_tol: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_every_field() {
        let base = EngineConfig::default();
        let h = base.hash();
        let variants = [
            EngineConfig { prune_fraction: 0.11, ..base.clone() },
            EngineConfig { relation_distance_tol: 0.02, ..base.clone() },
            EngineConfig { relation_angle_tol: 2.0, ..base.clone() },
            EngineConfig { difficulty_weight: 0.06, ..base.clone() },
            EngineConfig { unguided_axis_penalty: 2.5, ..base.clone() },
            EngineConfig { eyeball_fraction: 0.003, ..base.clone() },
            EngineConfig { guide_merge_tol: 2e-4, ..base.clone() },
            EngineConfig { ratio_catalog: vec![AnchorRatio::Half], ..base.clone() },
            EngineConfig { candidate_cap: 10, ..base.clone() },
            EngineConfig { second_level_parents: 3, ..base.clone() },
        ];
        for v in variants {
            assert_ne!(v.hash(), h, "{v:?}");
        }
        assert_eq!(base.hash(), h);
    }
}
