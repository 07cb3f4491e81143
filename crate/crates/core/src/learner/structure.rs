//! The structure learning pipeline: root template, node merits, initial
//! object AOG, latent SVM, majority-vote pruning and verification.

use std::collections::{BTreeMap, BTreeSet};

use super::examples::Scored;
use super::lsvm::{lsvm_train, LsvmReport, PoolCache};
use super::merits::{evaluate_node_merits, retrieve_initial_object_aog};
use super::TrainingDataset;
use crate::aog::{Aog, KeptChildren, NodeId};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::features::Frame;
use crate::geometry::BBox;
use crate::model::Model;
use crate::parser::{configuration_key, parse, BlockKind, Detection, ParseOptions, TemplateGeometry};
use crate::tracker::{compute_roi, search_pyramid};

/// Grid side for an initial box: 4 for large boxes, 3 otherwise, unless
/// configured.
pub fn grid_side(cfg: &EngineConfig, bbox: &BBox) -> u32 {
    cfg.aog
        .grid_side
        .unwrap_or(if bbox.w.min(bbox.h) >= cfg.aog.large_box_px {
            4
        } else {
            3
        })
}

/// Untrained model over the full AOG for `bbox`.
pub fn full_model(cfg: &EngineConfig, frame: &Frame, bbox: &BBox, part_level_offset: usize) -> Result<Model> {
    let side = grid_side(cfg, bbox);
    let aog = Aog::build_full((side, side), (1, 1), cfg.aog.overlap_ratio)?;
    let t = TemplateGeometry::for_box(bbox.w, bbox.h, side, cfg.aog.unit_cells).with_part_offset(part_level_offset);
    let channels = cfg.features.set().effective(frame.is_color).channels();
    Ok(Model::new(
        aog,
        t,
        channels,
        cfg.features.clone(),
        cfg.learner.def_floor,
    ))
}

/// Linear SVM on the object template with negative mining.
pub fn train_root_svm(
    data: &TrainingDataset,
    pools: &mut PoolCache,
    cfg: &EngineConfig,
) -> Result<(Model, LsvmReport)> {
    let first = data
        .positives
        .first()
        .ok_or_else(|| Error::InvalidInput("training needs at least one positive".into()))?;
    let mut root = full_model(cfg, &first.frame, &first.bbox, 0)?.object_only()?;
    let report = lsvm_train(&mut root, data, pools, cfg, 1, false)?;
    Ok((root, report))
}

fn bilinear(src: &[f64], w: usize, h: usize, c: usize, x: f64, y: f64, k: usize) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let at = |xx: usize, yy: usize| src[(yy * w + xx) * c + k];
    (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x1, y0)) + fy * ((1.0 - fx) * at(x0, y1) + fx * at(x1, y1))
}

/// Seeds every terminal with its part of the object template, upsampled
/// twofold for parts on the finer level, and every root branch with `bias`.
pub fn init_terminal_params(model: &mut Model, root_template: &[f64], bias: f64) -> Result<()> {
    let t = model.template;
    let (ow, oh) = t.object_cells();
    let c = model.channels();
    if root_template.len() != ow * oh * c {
        return Err(Error::InvalidInput(format!(
            "object template has {} values, expected {}",
            root_template.len(),
            ow * oh * c
        )));
    }
    let terminals: Vec<NodeId> = model.aog.terminals().map(|n| n.id).collect();
    for id in terminals {
        let r = model.aog.node(id).region;
        let (ew, eh) = t.extent(&model.aog, id);
        let (x0, y0) = (r.x as usize * t.unit.0, r.y as usize * t.unit.1);
        let fine = ew != r.w as usize * t.unit.0;
        let dst = model.params.appearance_mut(id);
        for cy in 0..eh {
            for cx in 0..ew {
                for k in 0..c {
                    dst[(cy * ew + cx) * c + k] = if fine {
                        let sx = x0 as f64 + (cx as f64 + 0.5) / 2.0 - 0.5;
                        let sy = y0 as f64 + (cy as f64 + 0.5) / 2.0 - 0.5;
                        bilinear(root_template, ow, oh, c, sx, sy, k)
                    } else {
                        root_template[((y0 + cy) * ow + x0 + cx) * c + k]
                    };
                }
            }
        }
    }
    for b in model.params.layout.blocks.clone().into_iter().flatten() {
        if b.kind == BlockKind::Bias {
            model.params.values[b.offset] = bias;
        }
    }
    Ok(())
}

/// Keeps the part configurations chosen by at least `fraction` of the
/// relabeled positives, or the most frequent one if none is. Returns the
/// pruned model and whether anything was removed.
pub fn prune_majority_vote(model: &Model, positives: &[Option<Scored>], fraction: f64) -> Result<(Model, bool)> {
    let aog = &model.aog;
    let mut groups: BTreeMap<Vec<NodeId>, Vec<&Scored>> = BTreeMap::new();
    for s in positives.iter().flatten() {
        groups.entry(configuration_key(aog, &s.tree)).or_default().push(s);
    }
    let total: usize = groups.values().map(Vec::len).sum();
    if total == 0 {
        return Ok((model.clone(), false));
    }
    let mut chosen: Vec<&Vec<&Scored>> = groups
        .values()
        .filter(|g| g.len() as f64 >= fraction * total as f64)
        .collect();
    if chosen.is_empty() {
        let best = groups.values().map(Vec::len).max().unwrap_or(0);
        chosen = groups.values().filter(|g| g.len() == best).take(1).collect();
    }
    let mut kept: KeptChildren = BTreeMap::new();
    for s in chosen.into_iter().flatten() {
        let in_tree: BTreeSet<NodeId> = s.tree.nodes.iter().map(|n| n.node).collect();
        for n in &s.tree.nodes {
            let node = aog.node(n.node);
            if node.is_or() {
                let set = kept.entry(n.node).or_default();
                set.extend(node.child_ids().filter(|c| in_tree.contains(c)));
            }
        }
    }
    let changed = kept.iter().any(|(or, set)| set.len() < aog.node(*or).children.len());
    if !changed {
        return Ok((model.clone(), false));
    }
    Ok((model.restrict(&kept)?, true))
}

/// Parses the search region around `bbox` and returns the top detection if
/// it beats the threshold and overlaps the box by at least `tau_nms`.
pub fn verify_model(model: &Model, frame: &Frame, bbox: &BBox, cfg: &EngineConfig) -> Result<Option<Detection>> {
    let (fw, fh) = (frame.width() as f64, frame.height() as f64);
    let roi = compute_roi(bbox, fw, fh, cfg.tracker.s_roi)
        .ok_or_else(|| Error::InvalidInput("verification box outside the frame".into()))?;
    let pyr = search_pyramid(frame, model, bbox, roi, cfg.tracker.scale_levels)?;
    let opts = ParseOptions::new(&cfg.parser, model.tau_g);
    let out = parse(model, &pyr, &opts)?;
    Ok(out
        .detections
        .into_iter()
        .next()
        .filter(|d| d.score >= model.tau_g && d.window.iou(bbox) >= cfg.parser.tau_nms))
}

/// Which model the pipeline ended with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Parts on the object level.
    Parts,
    /// Parts one octave finer, after the first attempt failed verification.
    FineParts,
    /// Both attempts failed; the object template alone.
    ObjectOnly,
}

#[derive(Debug, Clone)]
pub struct Attempt {
    pub part_level_offset: usize,
    pub initial_nodes: usize,
    pub final_nodes: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Learned {
    pub model: Model,
    pub outcome: Outcome,
    pub attempts: Vec<Attempt>,
    pub report: LsvmReport,
}

fn attempt(
    data: &TrainingDataset,
    pools: &mut PoolCache,
    cfg: &EngineConfig,
    root: &Model,
    offset: usize,
    log: &mut Attempt,
) -> Result<(Model, LsvmReport)> {
    let first = &data.positives[0];
    let mut full = full_model(cfg, &first.frame, &first.bbox, offset)?;
    let obj = root.aog.object_terminal().expect("object-only model");
    let bias = root.params.bias(root.aog.root_children()[0]);
    init_terminal_params(&mut full, root.params.appearance(obj), bias)?;
    let merits = evaluate_node_merits(&full, data, pools, cfg)?;
    let mut model = retrieve_initial_object_aog(&full, &merits, cfg.learner.merit_epsilon)?;
    log.initial_nodes = model.aog.len();
    let mut report = lsvm_train(&mut model, data, pools, cfg, cfg.learner.lsvm_rounds, true)?;
    let (mut pruned, changed) = prune_majority_vote(&model, &report.positives, cfg.learner.prune_fraction)?;
    if changed {
        report = lsvm_train(&mut pruned, data, pools, cfg, 1, true)?;
    }
    log.final_nodes = pruned.aog.len();
    if verify_model(&pruned, &first.frame, &first.bbox, cfg)?.is_none() {
        return Err(Error::VerificationFailed("top parse misses the first box".into()));
    }
    Ok((pruned, report))
}

/// Learns an object AOG from `data`. The first positive must be the
/// annotated box of the first frame; verification is run against it.
pub fn learn_object_aog(data: &TrainingDataset, pools: &mut PoolCache, cfg: &EngineConfig) -> Result<Learned> {
    let (root, root_report) = train_root_svm(data, pools, cfg)?;
    let mut attempts = Vec::new();
    for (offset, outcome) in [(0, Outcome::Parts), (cfg.features.interval, Outcome::FineParts)] {
        let mut log = Attempt {
            part_level_offset: offset,
            initial_nodes: 0,
            final_nodes: 0,
            failure: None,
        };
        let r = attempt(data, pools, cfg, &root, offset, &mut log);
        match r {
            Ok((model, report)) => {
                attempts.push(log);
                return Ok(Learned {
                    model,
                    outcome,
                    attempts,
                    report,
                });
            }
            Err(e) => {
                log::debug!("structure attempt with offset {offset} failed: {e}");
                log.failure = Some(e.to_string());
                attempts.push(log);
            }
        }
    }
    Ok(Learned {
        model: root,
        outcome: Outcome::ObjectOnly,
        attempts,
        report: root_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FeatureConfig;

    #[test]
    fn terminals_tile_the_object_template() {
        let aog = Aog::build_full((2, 2), (1, 1), 0.0).unwrap();
        let t = TemplateGeometry::new((2, 2), (2, 1), 0);
        let mut m = Model::new(aog, t, 2, FeatureConfig::default(), 0.01);
        let (ow, oh) = t.object_cells();
        let root: Vec<f64> = (0..ow * oh * 2).map(|i| i as f64).collect();
        init_terminal_params(&mut m, &root, 0.5).unwrap();
        let obj = m.aog.object_terminal().unwrap();
        assert_eq!(m.params.appearance(obj), &root[..]);
        for n in m.aog.terminals() {
            let r = n.region;
            let a = m.params.appearance(n.id);
            let w = r.w as usize * 2;
            for cy in 0..r.h as usize {
                for cx in 0..w {
                    for k in 0..2 {
                        let src = ((r.y as usize + cy) * ow + r.x as usize * 2 + cx) * 2 + k;
                        assert_eq!(a[(cy * w + cx) * 2 + k], root[src]);
                    }
                }
            }
        }
        for c in m.aog.root_children() {
            assert_eq!(m.params.bias(c), 0.5);
        }
    }

    #[test]
    fn upsampled_parts_keep_constant_templates() {
        let aog = Aog::build_full((2, 2), (1, 1), 0.0).unwrap();
        let t = TemplateGeometry::new((2, 2), (2, 2), 6);
        let mut m = Model::new(aog, t, 1, FeatureConfig::default(), 0.01);
        init_terminal_params(&mut m, &[0.25; 16], 0.0).unwrap();
        for n in m.aog.terminals() {
            assert!(m.params.appearance(n.id).iter().all(|&v| (v - 0.25).abs() < 1e-12));
        }
    }
}
