//! Training examples, scored in the same pyramid layout the tracker
//! searches so that training scores and tracking scores agree.

use crate::aog::{ParseTree, Placement};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::features::{FeaturePyramid, Frame};
use crate::geometry::BBox;
use crate::model::Model;
use crate::parser::{score_at, tree_features, SparseFeatures};
use crate::tracker::{compute_roi, search_pyramid_levels};

/// The search pyramid the tracker would build around `bbox`, restricted to
/// the levels within one scale step of the box.
#[derive(Debug, Clone)]
pub struct ExamplePyramid {
    pub pyramid: FeaturePyramid,
    /// Root placement of the box itself.
    pub anchor: Placement,
}

pub fn example_pyramid(frame: &Frame, bbox: &BBox, model: &Model, cfg: &EngineConfig) -> Result<ExamplePyramid> {
    let off = model.template.part_level_offset;
    let s = cfg.tracker.scale_levels;
    let (fw, fh) = (frame.width() as f64, frame.height() as f64);
    let roi = compute_roi(bbox, fw, fh, cfg.tracker.s_roi)
        .ok_or_else(|| Error::InvalidInput(format!("box {bbox:?} outside the frame")))?;
    let obj = off + s;
    let mut levels: Vec<usize> = Vec::new();
    for l in [obj.saturating_sub(1), obj, obj + 1] {
        levels.push(l);
        if off > 0 && l >= off {
            levels.push(l - off);
        }
    }
    levels.sort_unstable();
    levels.dedup();
    let pyramid = search_pyramid_levels(frame, model, bbox, roi, s, &levels)?;
    let (ow, oh) = model.template.object_cells();
    let level = pyramid
        .levels
        .get(obj)
        .filter(|l| l.width >= ow && l.height >= oh)
        .ok_or_else(|| Error::InvalidInput(format!("box {bbox:?} too small a region to sample")))?;
    let (x, y, _, _) = pyramid.geometry.image_to_cells(obj, bbox);
    let x = (x.round().max(0.0) as usize).min(level.width - ow);
    let y = (y.round().max(0.0) as usize).min(level.height - oh);
    Ok(ExamplePyramid {
        pyramid,
        anchor: Placement::new(obj, x as i32, y as i32),
    })
}

/// A parse tree with its features and score.
#[derive(Debug, Clone)]
pub struct Scored {
    pub score: f64,
    pub tree: ParseTree,
    pub features: SparseFeatures,
}

fn score_tree(model: &Model, pyr: &FeaturePyramid, root: Placement, radius: usize) -> Result<Option<Scored>> {
    let a = score_at(model, pyr, root, radius)?;
    let Some(tree) = a.tree(model, pyr, radius) else {
        return Ok(None);
    };
    let features = tree_features(model, pyr, &tree)?;
    Ok(Some(Scored {
        score: a.root_score(),
        tree,
        features,
    }))
}

/// Best parse tree with the root at `bbox`.
pub fn best_at_box(model: &Model, frame: &Frame, bbox: &BBox, cfg: &EngineConfig) -> Result<Option<Scored>> {
    let ex = example_pyramid(frame, bbox, model, cfg)?;
    score_tree(model, &ex.pyramid, ex.anchor, cfg.parser.deformation_radius)
}

/// Root placements on the object levels of `ex` whose window overlaps
/// `bbox` by at least `min_iou`, in level then raster order.
pub fn placements_near(model: &Model, ex: &ExamplePyramid, bbox: &BBox, min_iou: f64) -> Result<Vec<Placement>> {
    let g = &ex.pyramid.geometry;
    let (ow, oh) = model.template.object_cells();
    let off = model.template.part_level_offset;
    let mut out = Vec::new();
    for (l, level) in ex.pyramid.levels.iter().enumerate() {
        if l < off || level.width < ow || level.height < oh || (off > 0 && ex.pyramid.levels[l - off].width == 0) {
            continue;
        }
        for y in 0..=(level.height - oh) as i32 {
            for x in 0..=(level.width - ow) as i32 {
                let p = Placement::new(l, x, y);
                if model.template.window_box(g, p)?.iou(bbox) >= min_iou {
                    out.push(p);
                }
            }
        }
    }
    Ok(out)
}

/// Best parse tree among root placements whose window overlaps `bbox` by
/// at least `min_iou`. Ties keep the first placement in scan order.
pub fn relabel(model: &Model, frame: &Frame, bbox: &BBox, min_iou: f64, cfg: &EngineConfig) -> Result<Option<Scored>> {
    let ex = example_pyramid(frame, bbox, model, cfg)?;
    let radius = cfg.parser.deformation_radius;
    let mut best: Option<Scored> = None;
    for p in placements_near(model, &ex, bbox, min_iou)? {
        if let Some(s) = score_tree(model, &ex.pyramid, p, radius)? {
            if best.as_ref().is_none_or(|b| s.score > b.score) {
                best = Some(s);
            }
        }
    }
    Ok(best)
}
