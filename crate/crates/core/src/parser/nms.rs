use std::cmp::Ordering;

use crate::geometry::BBox;

use super::Detection;

fn order(a: &(BBox, f64), b: &(BBox, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(a.0.x.total_cmp(&b.0.x))
        .then(a.0.y.total_cmp(&b.0.y))
        .then(a.0.w.total_cmp(&b.0.w))
        .then(a.0.h.total_cmp(&b.0.h))
}

/// Greedy non-maximum suppression. Items are visited by descending score
/// (ties by window coordinates); an item is dropped when its IoU with an
/// already kept one reaches `tau`. Stops after `max_keep` survivors.
pub fn nms_by<T>(items: Vec<T>, key: impl Fn(&T) -> (BBox, f64), tau: f64, max_keep: usize) -> Vec<T> {
    let keys: Vec<(BBox, f64)> = items.iter().map(&key).collect();
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| order(&keys[a], &keys[b]));
    let mut kept: Vec<usize> = Vec::new();
    for i in idx {
        if kept.len() >= max_keep {
            break;
        }
        if kept.iter().all(|&k| keys[k].0.iou(&keys[i].0) < tau) {
            kept.push(i);
        }
    }
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    kept.into_iter().map(|i| slots[i].take().expect("kept once")).collect()
}

pub fn nms(detections: Vec<Detection>, tau: f64) -> Vec<Detection> {
    nms_by(detections, |d| (d.window, d.score), tau, usize::MAX)
}
