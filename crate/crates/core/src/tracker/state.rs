//! The per-frame tracking loop.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use super::roi::{compute_roi, search_pyramid};
use super::temporal_dp::{temporal_dp, DpFrame};
use super::trackability::{trackability, TrackabilityMonitor};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::features::{FeaturePyramid, Frame};
use crate::flow::{image_pyramid, median_flow, GrayImage};
use crate::geometry::BBox;
use crate::learner::{learn_object_aog, Learned, OnlineLearner, Outcome, PoolCache, TrainingDataset};
use crate::model::Model;
use crate::parser::{parse, tree_features, Detection, ParseOptions, ParseOutput};

/// Tracking result of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame_index: usize,
    pub bbox: Option<BBox>,
    /// `NaN` on invalid frames.
    pub score: f64,
    pub valid: bool,
    pub searched_whole_frame: bool,
    /// Root trackability of the chosen parse, `NaN` on invalid frames.
    pub trackability: f64,
    /// No gated path existed and the best-scoring candidates were taken.
    pub low_confidence: bool,
    /// Part boxes of the chosen parse tree.
    pub parts: Vec<BBox>,
}

impl FrameResult {
    fn invalid(frame_index: usize, searched_whole_frame: bool) -> Self {
        FrameResult {
            frame_index,
            bbox: None,
            score: f64::NAN,
            valid: false,
            searched_whole_frame,
            trackability: f64::NAN,
            low_confidence: false,
            parts: Vec::new(),
        }
    }
}

/// What happened on one call to [`Tracker::track`].
#[derive(Debug, Clone)]
pub struct StepReport {
    /// Current estimate for the new frame; may still be revised by later
    /// frames until it leaves the decoding window.
    pub result: FrameResult,
    pub candidates: Vec<BBox>,
    pub intrackable: bool,
    /// Outcome of a structure re-learn run on this frame.
    pub relearned: Option<Outcome>,
}

#[derive(Debug, Clone)]
struct Candidate {
    window: BBox,
    score: f64,
    trackability: f64,
    parts: Vec<BBox>,
}

struct Entry {
    frame_index: usize,
    gray: Arc<Vec<GrayImage>>,
    candidates: Vec<Candidate>,
    searched_whole_frame: bool,
    /// Committed choice once the frame is the oldest in the window.
    committed: Option<usize>,
}

pub struct Tracker {
    cfg: EngineConfig,
    model: Model,
    dataset: TrainingDataset,
    pools: PoolCache,
    online: Option<OnlineLearner>,
    monitor: TrackabilityMonitor,
    window: VecDeque<Entry>,
    /// Median-flow predictions keyed by (from frame, candidate, to frame).
    flow_cache: HashMap<(usize, usize, usize), Option<BBox>>,
    results: Vec<FrameResult>,
    last_box: BBox,
    /// Gray pyramid of the frame `last_box` came from.
    last_gray: Arc<Vec<GrayImage>>,
    relearns: usize,
    learned: Learned,
}

impl Tracker {
    /// Learns the first model from the annotated first frame.
    pub fn new(frame: Frame, bbox: BBox, cfg: EngineConfig) -> Result<Tracker> {
        cfg.validate()?;
        let frame = Arc::new(frame);
        let dataset = TrainingDataset::init(frame.clone(), bbox, cfg.features.cell_size as f64)?;
        let mut pools = PoolCache::default();
        let learned = learn_object_aog(&dataset, &mut pools, &cfg)?;
        let monitor = TrackabilityMonitor::new(cfg.tracker.n_intrackable, cfg.tracker.n_new_sample);
        let gray = Arc::new(image_pyramid(GrayImage::from_frame(&frame), cfg.flow.pyramid_levels));
        let first = FrameResult {
            frame_index: 0,
            bbox: Some(bbox),
            score: f64::NAN,
            valid: true,
            searched_whole_frame: false,
            trackability: f64::NAN,
            low_confidence: false,
            parts: Vec::new(),
        };
        let mut window = VecDeque::new();
        window.push_back(Entry {
            frame_index: 0,
            gray: gray.clone(),
            candidates: vec![Candidate {
                window: bbox,
                score: 0.0,
                trackability: f64::NAN,
                parts: Vec::new(),
            }],
            searched_whole_frame: false,
            committed: Some(0),
        });
        Ok(Tracker {
            online: cfg.tracker.online_update.then(|| OnlineLearner::new(&learned.report)),
            model: learned.model.clone(),
            cfg,
            dataset,
            pools,
            monitor,
            window,
            flow_cache: HashMap::new(),
            results: vec![first],
            last_box: bbox,
            last_gray: gray,
            relearns: 0,
            learned,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Result of the most recent structure learning run.
    pub fn learned(&self) -> &Learned {
        &self.learned
    }

    pub fn relearn_count(&self) -> usize {
        self.relearns
    }

    pub fn monitor(&self) -> &TrackabilityMonitor {
        &self.monitor
    }

    pub fn dataset(&self) -> &TrainingDataset {
        &self.dataset
    }

    /// Results so far. Frames still inside the decoding window carry their
    /// latest estimate.
    pub fn trajectory(&self) -> &[FrameResult] {
        &self.results
    }

    pub fn into_trajectory(self) -> Vec<FrameResult> {
        self.results
    }

    fn parse_region(&self, frame: &Frame, target: &BBox, region: BBox) -> Result<(FeaturePyramid, ParseOutput)> {
        let pyr = search_pyramid(frame, &self.model, target, region, self.cfg.tracker.scale_levels)?;
        let out = parse(
            &self.model,
            &pyr,
            &ParseOptions::new(&self.cfg.parser, self.model.tau_g),
        )?;
        Ok((pyr, out))
    }

    fn candidates(&self, pyr: &FeaturePyramid, out: &ParseOutput) -> Result<Vec<Candidate>> {
        out.detections
            .iter()
            .map(|d| {
                let parts = d
                    .tree
                    .nodes
                    .iter()
                    .filter(|n| self.model.aog.node(n.node).is_terminal())
                    .map(|n| {
                        self.model
                            .template
                            .node_box(&self.model.aog, n.node, &pyr.geometry, n.placement)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Candidate {
                    window: d.window,
                    score: d.score,
                    trackability: trackability(&d.tree, &out.maps).first().copied().unwrap_or(f64::NAN),
                    parts,
                })
            })
            .collect()
    }

    fn predict(&mut self, i: usize, a: usize, j: usize) -> Option<BBox> {
        let key = (self.window[i].frame_index, a, self.window[j].frame_index);
        if let Some(p) = self.flow_cache.get(&key) {
            return *p;
        }
        let from = self.window[i].candidates[a].window;
        let p = median_flow(&self.window[i].gray, &self.window[j].gray, &from, &self.cfg.flow).map(|m| m.apply(&from));
        self.flow_cache.insert(key, p);
        p
    }

    /// Thresholded motion cost: 0 when the candidate overlaps the median
    /// flow prediction enough or when the prediction failed.
    fn motion_cost(&mut self, i: usize, a: usize, j: usize, b: usize) -> f64 {
        let predicted = self.predict(i, a, j);
        motion_cost(
            &self.window[j].candidates[b].window,
            predicted,
            self.cfg.tracker.tau_motion,
        )
    }

    /// Tracks the next frame.
    pub fn track(&mut self, frame: Frame) -> Result<StepReport> {
        let frame_index = self.results.len();
        let (fw, fh) = (frame.width() as f64, frame.height() as f64);
        let roi = compute_roi(&self.last_box, fw, fh, self.cfg.tracker.s_roi)
            .ok_or_else(|| Error::InvalidInput("search region left the frame".into()))?;
        let gray = Arc::new(image_pyramid(
            GrayImage::from_frame(&frame),
            self.cfg.flow.pyramid_levels,
        ));
        // where the last box moved to, for sampling the search pyramid
        let target = median_flow(&self.last_gray, &gray, &self.last_box, &self.cfg.flow)
            .map(|m| m.apply(&self.last_box))
            .filter(|b| b.is_valid() && b.clip(fw, fh).is_some())
            .unwrap_or(self.last_box);
        let (mut pyr, mut out) = self.parse_region(&frame, &target, roi)?;
        let mut whole = false;
        if out.detections.is_empty() {
            whole = true;
            (pyr, out) = self.parse_region(&frame, &target, BBox::new(0.0, 0.0, fw, fh))?;
        }
        let candidates = self.candidates(&pyr, &out)?;
        self.window.push_back(Entry {
            frame_index,
            gray: gray.clone(),
            candidates,
            searched_whole_frame: whole,
            committed: None,
        });
        while self.window.len() > self.cfg.tracker.delta_t + 1 {
            let old = self.window.pop_front().expect("non-empty");
            self.flow_cache.retain(|k, _| k.0 != old.frame_index);
        }
        self.results.push(FrameResult::invalid(frame_index, whole));
        let cand_boxes: Vec<BBox> = out.detections.iter().map(|d| d.window).collect();
        if out.detections.is_empty() {
            // no temporal decoding on invalid frames
            self.monitor.update(None);
            return Ok(StepReport {
                result: self.results[frame_index].clone(),
                candidates: cand_boxes,
                intrackable: false,
                relearned: None,
            });
        }

        let frames: Vec<DpFrame> = self
            .window
            .iter()
            .map(|e| DpFrame {
                scores: e.candidates.iter().map(|c| c.score).collect(),
                anchor: e.committed,
            })
            .collect();
        let path = temporal_dp(&frames, |i, a, j, b| self.motion_cost(i, a, j, b));
        for (k, e) in self.window.iter().enumerate() {
            if e.committed.is_some() && k + 1 < self.window.len() {
                continue;
            }
            let Some(c) = path.choice[k] else { continue };
            let cand = &e.candidates[c];
            self.results[e.frame_index] = FrameResult {
                frame_index: e.frame_index,
                bbox: Some(cand.window),
                score: cand.score,
                valid: true,
                searched_whole_frame: e.searched_whole_frame,
                trackability: cand.trackability,
                low_confidence: path.low_confidence,
                parts: cand.parts.clone(),
            };
        }
        // the second oldest frame becomes the anchor of the next window
        if self.window.len() == self.cfg.tracker.delta_t + 1 {
            if let Some(c) = path.choice[1] {
                self.window[1].committed = Some(c);
            }
        }
        let last = self.window.len() - 1;
        let chosen = path.choice[last].expect("current frame has candidates");
        let result = self.results[frame_index].clone();
        let bbox = result.bbox.expect("valid result");
        self.last_box = bbox;
        self.last_gray = gray;

        let intrackable = self.monitor.update(Some(result.trackability));
        let mut relearned = None;
        if !path.low_confidence {
            let frame = Arc::new(frame);
            self.dataset.update(
                frame_index,
                frame.clone(),
                Some(bbox),
                &cand_boxes,
                self.cfg.parser.tau_nms,
            );
            if let Some(online) = self.online.as_mut() {
                let det = &out.detections[chosen];
                let pos = tree_features(&self.model, &pyr, &det.tree)?;
                let neg = out
                    .detections
                    .iter()
                    .filter(|d: &&Detection| d.window.iou(&bbox) < self.cfg.parser.tau_nms)
                    .map(|d| tree_features(&self.model, &pyr, &d.tree))
                    .collect::<Result<Vec<_>>>()?;
                online.update(&mut self.model, pos, neg, &self.cfg);
            }
            if self.monitor.critical_moment() {
                relearned = Some(self.relearn()?);
            }
        }
        Ok(StepReport {
            result,
            candidates: cand_boxes,
            intrackable,
            relearned,
        })
    }

    /// Re-learns the structure from a capped selection of frames with valid
    /// results. The old model stays when learning errors out.
    fn relearn(&mut self) -> Result<Outcome> {
        let lc = &self.cfg.learner;
        let frames = self.dataset.relearn_frames(lc.relearn_first, lc.relearn_cap);
        let data = self.dataset.subset(&frames);
        self.monitor.reset_counters();
        self.relearns += 1;
        match learn_object_aog(&data, &mut self.pools, &self.cfg) {
            Ok(learned) => {
                self.model = learned.model.clone();
                self.online = self
                    .cfg
                    .tracker
                    .online_update
                    .then(|| OnlineLearner::new(&learned.report));
                let outcome = learned.outcome;
                self.learned = learned;
                Ok(outcome)
            }
            Err(e) => {
                log::warn!("structure re-learn failed, keeping the current model: {e}");
                Ok(self.learned.outcome)
            }
        }
    }
}

/// 0 when `predicted` is missing or overlaps `candidate` by at least
/// `tau`, `+inf` otherwise.
pub fn motion_cost(candidate: &BBox, predicted: Option<BBox>, tau: f64) -> f64 {
    match predicted {
        Some(p) if candidate.iou(&p) < tau => f64::INFINITY,
        _ => 0.0,
    }
}
