//! How far a parse stands out from the rest of its score maps, and the
//! running statistics that turn it into an intrackability signal.

use crate::aog::ParseTree;
use crate::parser::ScorePyramid;

/// Per parse-tree node, in tree order: placement score minus the mean of
/// the node's finite map entries on the placement's level. `NaN` where the
/// node has no map there.
pub fn trackability(tree: &ParseTree, maps: &ScorePyramid) -> Vec<f64> {
    tree.nodes
        .iter()
        .map(|pn| {
            let Some(m) = maps.get(pn.node, pn.placement.level) else {
                return f64::NAN;
            };
            match m.score.at(pn.placement.x as i64, pn.placement.y as i64) {
                Some(v) => v - m.score.mean(),
                None => f64::NAN,
            }
        })
        .collect()
}

/// Welford's running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Sample standard deviation; `None` below two samples.
    pub fn std(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2 / (self.count - 1) as f64).max(0.0).sqrt())
    }
}

/// Counts intrackable frames and new valid results since the last
/// structure re-learn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackabilityMonitor {
    pub stats: RunningStats,
    pub frames_intrackable: usize,
    pub new_valid_samples: usize,
    n_intrackable: usize,
    n_new_sample: usize,
}

impl TrackabilityMonitor {
    pub fn new(n_intrackable: usize, n_new_sample: usize) -> Self {
        TrackabilityMonitor {
            n_intrackable,
            n_new_sample,
            ..Default::default()
        }
    }

    /// Feeds one frame. `value` is the root trackability of a valid result.
    /// Returns whether the frame counts as intrackable, judged against the
    /// statistics of earlier frames only.
    pub fn update(&mut self, value: Option<f64>) -> bool {
        let Some(v) = value.filter(|v| v.is_finite()) else {
            return false;
        };
        let intrackable = self.stats.std().is_some_and(|sd| v < self.stats.mean - 3.0 * sd);
        if intrackable {
            self.frames_intrackable += 1;
        }
        self.new_valid_samples += 1;
        self.stats.push(v);
        intrackable
    }

    pub fn critical_moment(&self) -> bool {
        self.frames_intrackable > self.n_intrackable && self.new_valid_samples > self.n_new_sample
    }

    pub fn reset_counters(&mut self) {
        self.frames_intrackable = 0;
        self.new_valid_samples = 0;
    }
}
