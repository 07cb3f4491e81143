//! Success and precision curves.

use aogtrack_core::BBox;

/// Overlap thresholds 0, 0.05, ..., 1.
pub const SUCCESS_STEPS: usize = 21;
/// Centre-distance thresholds 0, 1, ..., 50 pixels.
pub const PRECISION_STEPS: usize = 51;

pub fn success_thresholds() -> [f64; SUCCESS_STEPS] {
    // from integers, so that 0.15 is the same float everywhere
    std::array::from_fn(|i| i as f64 / 20.0)
}

pub fn precision_thresholds() -> [f64; PRECISION_STEPS] {
    std::array::from_fn(|i| i as f64)
}

/// Per-frame overlap; a missing prediction scores 0.
pub fn overlap(pred: Option<&BBox>, gt: &BBox) -> f64 {
    pred.map_or(0.0, |p| p.iou(gt))
}

/// Per-frame centre distance; a missing prediction is infinitely far.
pub fn center_error(pred: Option<&BBox>, gt: &BBox) -> f64 {
    pred.map_or(f64::INFINITY, |p| p.center_distance(gt))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    pub success: [f64; SUCCESS_STEPS],
    pub precision: [f64; PRECISION_STEPS],
    /// Frames the curves were computed on.
    pub frames: usize,
}

impl Curves {
    /// Mean of the sampled success rates.
    pub fn auc(&self) -> f64 {
        self.success.iter().sum::<f64>() / SUCCESS_STEPS as f64
    }

    pub fn precision_at_20(&self) -> f64 {
        self.precision[20]
    }
}

/// Rate of `values` meeting each threshold.
fn rates<const N: usize>(values: &[f64], thresholds: &[f64; N], hit: impl Fn(f64, f64) -> bool) -> [f64; N] {
    if values.is_empty() {
        return [0.0; N];
    }
    thresholds.map(|t| values.iter().filter(|&&v| hit(v, t)).count() as f64 / values.len() as f64)
}

/// Curves over the frames with ground truth. `predictions[i]` pairs with
/// `ground_truth[i]`.
pub fn curves(predictions: &[Option<BBox>], ground_truth: &[Option<BBox>]) -> Curves {
    let (mut ious, mut dists) = (Vec::new(), Vec::new());
    for (p, g) in predictions.iter().zip(ground_truth) {
        if let Some(g) = g {
            ious.push(overlap(p.as_ref(), g));
            dists.push(center_error(p.as_ref(), g));
        }
    }
    curves_from(&ious, &dists)
}

pub fn curves_from(ious: &[f64], dists: &[f64]) -> Curves {
    Curves {
        success: rates(ious, &success_thresholds(), |v, t| v >= t),
        precision: rates(dists, &precision_thresholds(), |v, t| v <= t),
        frames: ious.len(),
    }
}
