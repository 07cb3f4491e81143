use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::Frame;
use crate::geometry::BBox;

#[derive(Debug, Clone)]
pub struct Positive {
    pub frame_index: usize,
    pub frame: Arc<Frame>,
    pub bbox: BBox,
}

#[derive(Debug, Clone)]
pub struct Negative {
    pub frame_index: usize,
    pub frame: Arc<Frame>,
    pub bbox: BBox,
}

/// A frame to mine negatives from, away from the listed object boxes.
#[derive(Debug, Clone)]
pub struct NegativePool {
    pub frame_index: usize,
    pub frame: Arc<Frame>,
    pub exclude: Vec<BBox>,
}

/// Positives and negatives collected while tracking.
#[derive(Debug, Clone, Default)]
pub struct TrainingDataset {
    pub positives: Vec<Positive>,
    pub negatives: Vec<Negative>,
    pub pools: Vec<NegativePool>,
}

impl TrainingDataset {
    /// The first box plus its eight shifts by `d` pixels; shifts leaving the
    /// frame are dropped. The rest of the first frame becomes a mining pool.
    pub fn init(frame: Arc<Frame>, bbox: BBox, d: f64) -> Result<TrainingDataset> {
        let (fw, fh) = (frame.width() as f64, frame.height() as f64);
        let inside = |b: &BBox| b.x >= 0.0 && b.y >= 0.0 && b.right() <= fw && b.bottom() <= fh;
        if !bbox.is_valid() || !inside(&bbox) {
            return Err(Error::InvalidInput(format!(
                "initial box {bbox:?} not inside the frame"
            )));
        }
        let mut positives = vec![Positive {
            frame_index: 0,
            frame: frame.clone(),
            bbox,
        }];
        for sy in [-1.0, 0.0, 1.0] {
            for sx in [-1.0, 0.0, 1.0] {
                if sx == 0.0 && sy == 0.0 {
                    continue;
                }
                let b = bbox.translate(sx * d, sy * d);
                if inside(&b) {
                    positives.push(Positive {
                        frame_index: 0,
                        frame: frame.clone(),
                        bbox: b,
                    });
                }
            }
        }
        let exclude = positives.iter().map(|p| p.bbox).collect();
        Ok(TrainingDataset {
            positives,
            negatives: Vec::new(),
            pools: vec![NegativePool {
                frame_index: 0,
                frame,
                exclude,
            }],
        })
    }

    /// Adds a valid tracking result and the candidates it does not suppress.
    /// Invalid frames leave the dataset unchanged.
    pub fn update(
        &mut self,
        frame_index: usize,
        frame: Arc<Frame>,
        result: Option<BBox>,
        candidates: &[BBox],
        tau_nms: f64,
    ) -> (usize, usize) {
        let Some(b) = result else { return (0, 0) };
        let (fw, fh) = (frame.width() as f64, frame.height() as f64);
        let Some(b) = b.clip(fw, fh) else { return (0, 0) };
        self.positives.push(Positive {
            frame_index,
            frame: frame.clone(),
            bbox: b,
        });
        let mut added = 0;
        for c in candidates {
            if c.iou(&b) < tau_nms {
                if let Some(c) = c.clip(fw, fh) {
                    self.negatives.push(Negative {
                        frame_index,
                        frame: frame.clone(),
                        bbox: c,
                    });
                    added += 1;
                }
            }
        }
        (1, added)
    }

    /// Frames holding positives, in time order.
    pub fn positive_frames(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.positives.iter().map(|p| p.frame_index).collect();
        f.dedup();
        f
    }

    /// Frames used for re-learning: the first `first` frames with
    /// positives, then the latest ones going backwards, `cap` in total.
    pub fn relearn_frames(&self, first: usize, cap: usize) -> Vec<usize> {
        let frames = self.positive_frames();
        let head = first.min(cap).min(frames.len());
        let mut chosen: Vec<usize> = frames[..head].to_vec();
        for &f in frames[head..].iter().rev() {
            if chosen.len() >= cap {
                break;
            }
            chosen.push(f);
        }
        chosen
    }

    /// Restricts the dataset to the given frames. Frame 0 is always kept.
    pub fn retain_frames(&mut self, frames: &[usize]) {
        let keep = |f: usize| f == 0 || frames.contains(&f);
        self.positives.retain(|p| keep(p.frame_index));
        self.negatives.retain(|n| keep(n.frame_index));
        self.pools.retain(|p| keep(p.frame_index));
    }

    pub fn subset(&self, frames: &[usize]) -> TrainingDataset {
        let mut d = self.clone();
        d.retain_frames(frames);
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> Arc<Frame> {
        Arc::new(Frame::from_gray(100, 80, &vec![0.5; 8000]))
    }

    #[test]
    fn init_has_nine_positives() {
        let d = TrainingDataset::init(frame(), BBox::new(20.0, 20.0, 30.0, 20.0), 4.0).unwrap();
        assert_eq!(d.positives.len(), 9);
        assert!(d.negatives.is_empty());
        assert_eq!(d.pools.len(), 1);
    }

    #[test]
    fn corner_box_drops_outside_shifts() {
        let d = TrainingDataset::init(frame(), BBox::new(0.0, 0.0, 30.0, 20.0), 4.0).unwrap();
        // only shifts with dx, dy >= 0 stay inside
        assert_eq!(d.positives.len(), 4);
    }

    #[test]
    fn update_rules() {
        let mut d = TrainingDataset::init(frame(), BBox::new(20.0, 20.0, 30.0, 20.0), 4.0).unwrap();
        let b = BBox::new(10.0, 10.0, 20.0, 20.0);
        assert_eq!(d.update(1, frame(), None, &[b], 0.7), (0, 0));
        assert_eq!(d.update(2, frame(), Some(b), &[b], 0.7), (1, 0));
        let far = BBox::new(60.0, 50.0, 20.0, 20.0);
        assert_eq!(d.update(3, frame(), Some(b), &[b, far], 0.7), (1, 1));
        assert_eq!(d.negatives[0].bbox, far);
    }

    #[test]
    fn relearn_selection_takes_head_then_latest() {
        let mut d = TrainingDataset::default();
        for f in 0..30 {
            d.positives.push(Positive {
                frame_index: f,
                frame: frame(),
                bbox: BBox::new(1.0, 1.0, 5.0, 5.0),
            });
        }
        let s = d.relearn_frames(10, 15);
        assert_eq!(s, vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 29, 28, 27, 26, 25]);
        assert_eq!(d.relearn_frames(10, 100).len(), 30);
    }
}
