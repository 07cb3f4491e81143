//! Engine configuration. Every field has a default, so a config file only
//! needs to name what it overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub cell_size: usize,
    pub interval: usize,
    pub hog: bool,
    pub lbp: bool,
    pub color: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            cell_size: 4,
            interval: 6,
            hog: true,
            lbp: true,
            color: true,
        }
    }
}

impl FeatureConfig {
    pub fn set(&self) -> FeatureSet {
        FeatureSet {
            hog: self.hog,
            lbp: self.lbp,
            color: self.color,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AogConfig {
    /// Fixed grid side; chosen from the initial box when absent.
    pub grid_side: Option<u32>,
    /// Boxes whose shorter side reaches this many pixels get a 4x4 grid.
    pub large_box_px: f64,
    pub overlap_ratio: f64,
    /// Feature cells along the longer box side per grid unit.
    pub unit_cells: usize,
}

impl Default for AogConfig {
    fn default() -> Self {
        AogConfig {
            grid_side: None,
            large_box_px: 80.0,
            overlap_ratio: 0.0,
            unit_cells: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParserConfig {
    pub tau_nms: f64,
    pub n_best: usize,
    pub deformation_radius: usize,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            tau_nms: 0.7,
            n_best: 10,
            deformation_radius: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub s_roi: f64,
    pub delta_t: usize,
    pub n_intrackable: usize,
    pub n_new_sample: usize,
    pub tau_motion: f64,
    /// Pyramid levels searched on each side of the previous scale.
    pub scale_levels: usize,
    /// Run a warm-started parameter update after every valid frame.
    pub online_update: bool,
    pub online_update_iters: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            s_roi: 3.0,
            delta_t: 5,
            n_intrackable: 5,
            n_new_sample: 10,
            tau_motion: 0.3,
            scale_levels: 3,
            online_update: true,
            online_update_iters: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Points per side of the tracked grid.
    pub grid: usize,
    /// Half-size of the Lucas-Kanade window.
    pub window: usize,
    pub pyramid_levels: usize,
    pub iterations: usize,
    pub min_ncc: f64,
    pub max_fb_error: f64,
    pub min_survivors: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            grid: 10,
            window: 7,
            pyramid_levels: 3,
            iterations: 20,
            min_ncc: 0.5,
            max_fb_error: 10.0,
            min_survivors: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Weight of the summed, class-balanced hinge loss against `|w|^2 / 2`.
    pub lsvm_c: f64,
    pub merit_epsilon: f64,
    pub relabel_iou: f64,
    /// Windows overlapping a positive less than this are negatives.
    pub negative_iou: f64,
    pub hard_negative_margin: f64,
    pub mining_rounds: usize,
    pub lsvm_rounds: usize,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub def_floor: f64,
    pub prune_fraction: f64,
    pub relearn_cap: usize,
    pub relearn_first: usize,
    /// Highest-scoring pool windows kept per frame when mining.
    pub negatives_per_frame: usize,
    pub negative_cache_cap: usize,
    /// Hardest negatives used when rating nodes.
    pub merit_negatives: usize,
    /// Side of the square mined for negatives around the object, in
    /// multiples of the longer box side.
    pub mining_roi: f64,
    pub solver: Solver,
    /// Stopping tolerance on the dual projected gradient.
    pub dcd_tol: f64,
}

/// Optimizer for the convex training subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Dual coordinate descent.
    Dcd,
    /// Projected L-BFGS on the primal.
    Lbfgs,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            lsvm_c: 0.001,
            merit_epsilon: 0.05,
            relabel_iou: 0.7,
            negative_iou: 0.5,
            hard_negative_margin: -1.0,
            mining_rounds: 5,
            lsvm_rounds: 2,
            grad_tol: 1e-4,
            max_iters: 1000,
            def_floor: 0.01,
            prune_fraction: 0.10,
            relearn_cap: 100,
            relearn_first: 10,
            negatives_per_frame: 200,
            negative_cache_cap: 1000,
            merit_negatives: 300,
            mining_roi: 6.0,
            solver: Solver::Dcd,
            dcd_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub features: FeatureConfig,
    pub aog: AogConfig,
    pub parser: ParserConfig,
    pub tracker: TrackerConfig,
    pub flow: FlowConfig,
    pub learner: LearnerConfig,
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<EngineConfig> {
        let cfg: EngineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EngineConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let f = &self.features;
        if f.cell_size < 2 || f.interval == 0 {
            return bad("cell_size must be >= 2 and interval >= 1");
        }
        if !(f.hog || f.lbp || f.color) {
            return bad("at least one feature family must be enabled");
        }
        if !(0.0..1.0).contains(&self.aog.overlap_ratio) {
            return bad("overlap_ratio must lie in [0, 1)");
        }
        if let Some(n) = self.aog.grid_side {
            if n == 0 {
                return bad("grid_side must be positive");
            }
        }
        if self.aog.unit_cells == 0 {
            return bad("unit_cells must be positive");
        }
        if self.parser.n_best == 0 || !(0.0..=1.0).contains(&self.parser.tau_nms) {
            return bad("n_best must be positive and tau_nms in [0, 1]");
        }
        if self.tracker.s_roi < 1.0 {
            return bad("s_roi must be >= 1");
        }
        if self.learner.lsvm_c <= 0.0 || self.learner.def_floor <= 0.0 {
            return bad("lsvm_c and def_floor must be positive");
        }
        if self.flow.grid < 2 {
            return bad("flow grid must be at least 2x2");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = EngineConfig::default();
        assert_eq!(EngineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = EngineConfig::from_toml("[tracker]\ndelta_t = 3\n[learner]\nlsvm_c = 0.5\n").unwrap();
        assert_eq!(cfg.tracker.delta_t, 3);
        assert_eq!(cfg.tracker.s_roi, 3.0);
        assert_eq!(cfg.learner.lsvm_c, 0.5);
        assert_eq!(cfg.parser.n_best, 10);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(EngineConfig::from_toml("[tracker]\nbogus = 1\n").is_err());
        assert!(EngineConfig::from_toml("[aog]\noverlap_ratio = 1.0\n").is_err());
    }
}
