//! Spatial dynamic programming over an object AOG.
//!
//! Score maps are computed bottom-up for every node and pyramid level, then
//! parse trees are read back top-down from the best root placements. A map
//! is indexed by the node's own top-left placement, so its size is the level
//! size minus the node extent plus one.

mod anchored;
mod nms;
mod params;
mod score;
mod template;

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::aog::{AndKind, Aog, NodeId, NodeKind, ParseNode, ParseTree, Placement};
use crate::config::ParserConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureMap, FeaturePyramid, PyramidGeometry};
use crate::geometry::BBox;
use crate::model::Model;

pub use anchored::{canonical_placement, score_at, AnchoredScores};
pub use nms::{nms, nms_by};
pub use params::{dot_f32, Block, BlockKind, ModelParams, ParamLayout, SparseFeatures};
pub use score::{
    decompose, deformation_max, pack_displacement, score_or, score_terminal, unpack_displacement, ScoreMap,
};
pub use template::TemplateGeometry;

/// Score map of one node at one level. `arg` holds the chosen child id for
/// Or-nodes and the packed displacement for Deformation And-nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMap {
    pub score: ScoreMap,
    pub arg: Vec<u32>,
}

/// Per-level, per-node score maps.
#[derive(Debug, Clone)]
pub struct ScorePyramid {
    pub levels: Vec<Vec<Option<NodeMap>>>,
    pub radius: usize,
}

impl ScorePyramid {
    pub fn get(&self, id: NodeId, level: usize) -> Option<&NodeMap> {
        self.levels.get(level)?.get(id.index())?.as_ref()
    }

    pub fn score_at(&self, id: NodeId, p: Placement) -> Option<f64> {
        self.get(id, p.level)?.score.at(p.x as i64, p.y as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    pub tau_g: f64,
    pub tau_nms: f64,
    pub n_best: usize,
    pub radius: usize,
}

impl ParseOptions {
    pub fn new(cfg: &ParserConfig, tau_g: f64) -> Self {
        ParseOptions {
            tau_g,
            tau_nms: cfg.tau_nms,
            n_best: cfg.n_best,
            radius: cfg.deformation_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub window: BBox,
    pub score: f64,
    pub tree: ParseTree,
}

#[derive(Debug, Clone)]
pub struct ParseOutput {
    pub detections: Vec<Detection>,
    pub maps: ScorePyramid,
}

/// Score maps of every node over the pyramid.
pub fn score_pyramid(model: &Model, pyramid: &FeaturePyramid, radius: usize) -> Result<ScorePyramid> {
    let aog = &model.aog;
    let t = &model.template;
    if pyramid.channels() != model.params.layout.channels {
        return Err(Error::InvalidInput(format!(
            "pyramid has {} channels, model expects {}",
            pyramid.channels(),
            model.params.layout.channels
        )));
    }
    let off = t.part_level_offset;
    let n = pyramid.len();
    let order = aog.post_order();
    let (obj_nodes, part_nodes): (Vec<NodeId>, Vec<NodeId>) = order.iter().partition(|&&id| t.on_object_level(aog, id));

    let mut levels: Vec<Vec<Option<NodeMap>>> = (0..n)
        .into_par_iter()
        .map(|l| {
            let mut maps: Vec<Option<NodeMap>> = vec![None; aog.len()];
            if l + off < n {
                for &id in &part_nodes {
                    let m = node_map(model, id, &pyramid.levels[l], &maps, &maps, radius);
                    maps[id.index()] = m;
                }
            }
            maps
        })
        .collect();

    let object: Vec<Vec<Option<NodeMap>>> = (off..n)
        .into_par_iter()
        .map(|l| {
            let mut local: Vec<Option<NodeMap>> = vec![None; aog.len()];
            for &id in &obj_nodes {
                let m = node_map(model, id, &pyramid.levels[l], &local, &levels[l - off], radius);
                local[id.index()] = m;
            }
            local
        })
        .collect();
    for (k, local) in object.into_iter().enumerate() {
        for (slot, m) in levels[off + k].iter_mut().zip(local) {
            if m.is_some() {
                *slot = m;
            }
        }
    }
    Ok(ScorePyramid { levels, radius })
}

/// One node's map at one level. `local` holds maps on this node's level;
/// `fine` holds part-level maps for object-level parents.
fn node_map(
    model: &Model,
    id: NodeId,
    feat: &FeatureMap,
    local: &[Option<NodeMap>],
    fine: &[Option<NodeMap>],
    radius: usize,
) -> Option<NodeMap> {
    let aog = &model.aog;
    let t = &model.template;
    let node = aog.node(id);
    let (ew, eh) = t.extent(aog, id);
    if ew > feat.width || eh > feat.height {
        return None;
    }
    let (w, h) = (feat.width - ew + 1, feat.height - eh + 1);
    let lookup = |c: NodeId| -> Option<&NodeMap> {
        if t.on_object_level(aog, c) {
            local[c.index()].as_ref()
        } else {
            fine[c.index()].as_ref()
        }
    };
    let plain = |score| Some(NodeMap { score, arg: Vec::new() });
    match node.kind {
        NodeKind::Terminal => plain(score_terminal(feat, model.params.appearance(id), ew, eh)?),
        NodeKind::And(AndKind::Termination) => plain(lookup(node.children[0].0)?.score.clone()),
        NodeKind::And(AndKind::Deformation) => {
            let child = lookup(node.children[0].0)?;
            let (score, arg) = deformation_max(&child.score, model.params.deformation(id), radius);
            Some(NodeMap { score, arg })
        }
        NodeKind::And(AndKind::Decomposition { .. }) => {
            let mut parts = Vec::with_capacity(2);
            for &(c, _) in &node.children {
                parts.push((&lookup(c)?.score, t.child_offset(aog, id, c)));
            }
            plain(decompose(w, h, &parts))
        }
        NodeKind::Or => {
            let mut kids: Vec<NodeId> = node.child_ids().collect();
            kids.sort();
            let stride = |c: NodeId| {
                if t.on_object_level(aog, id) && !t.on_object_level(aog, c) {
                    t.part_factor() as i64
                } else {
                    1
                }
            };
            let avail: Vec<(NodeId, &ScoreMap, i64, f64)> = kids
                .iter()
                .filter_map(|&c| lookup(c).map(|m| (c, &m.score, stride(c), model.params.bias(c))))
                .collect();
            if avail.is_empty() {
                return None;
            }
            let mut score = ScoreMap::filled(w, h, f64::NEG_INFINITY);
            let mut arg = vec![avail[0].0 .0; w * h];
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    for &(c, m, s, b) in &avail {
                        if let Some(v) = m.at(x as i64 * s, y as i64 * s) {
                            if v + b > score.data[i] {
                                score.data[i] = v + b;
                                arg[i] = c.0;
                            }
                        }
                    }
                }
            }
            Some(NodeMap { score, arg })
        }
    }
}

/// Reads back the parse tree rooted at `root`.
pub fn retrieve(model: &Model, maps: &ScorePyramid, root: Placement) -> Result<ParseTree> {
    let aog = &model.aog;
    let t = &model.template;
    let mut nodes = Vec::new();
    let mut queue = VecDeque::from([(aog.root(), root, (0, 0))]);
    while let Some((id, p, disp)) = queue.pop_front() {
        let map = maps
            .get(id, p.level)
            .ok_or_else(|| Error::Invariant(format!("no map for node {id} at level {}", p.level)))?;
        let i = (p.x >= 0 && p.y >= 0 && (p.x as usize) < map.score.width && (p.y as usize) < map.score.height)
            .then(|| p.y as usize * map.score.width + p.x as usize)
            .ok_or_else(|| Error::Invariant(format!("node {id} placement {p:?} outside its map")))?;
        let node = aog.node(id);
        let mut disp_out = disp;
        match node.kind {
            NodeKind::Or => {
                let c = NodeId(map.arg[i]);
                queue.push_back((c, t.child_placement(aog, id, c, p), (0, 0)));
            }
            NodeKind::And(AndKind::Deformation) => {
                let (dx, dy) = unpack_displacement(map.arg[i], maps.radius);
                disp_out = (dx, dy);
                let c = node.children[0].0;
                queue.push_back((c, Placement::new(p.level, p.x + dx, p.y + dy), (dx, dy)));
            }
            NodeKind::And(_) => {
                for c in node.child_ids() {
                    queue.push_back((c, t.child_placement(aog, id, c, p), (0, 0)));
                }
            }
            NodeKind::Terminal => {}
        }
        nodes.push(ParseNode {
            node: id,
            placement: p,
            score: map.score.data[i],
            displacement: disp_out,
        });
    }
    let score = nodes[0].score;
    Ok(ParseTree { nodes, score })
}

/// Root placements `(placement, window, score)` with finite score passing
/// `keep`.
pub fn root_candidates(
    model: &Model,
    geometry: &PyramidGeometry,
    maps: &ScorePyramid,
    keep: impl Fn(&BBox, f64) -> bool,
) -> Result<Vec<(Placement, BBox, f64)>> {
    let root = model.aog.root();
    let mut out = Vec::new();
    for l in 0..maps.levels.len() {
        let Some(m) = maps.get(root, l) else { continue };
        for y in 0..m.score.height {
            for x in 0..m.score.width {
                let v = m.score.get(x, y);
                if !v.is_finite() {
                    continue;
                }
                let p = Placement::new(l, x as i32, y as i32);
                let b = model.template.window_box(geometry, p)?;
                if keep(&b, v) {
                    out.push((p, b, v));
                }
            }
        }
    }
    Ok(out)
}

/// Thresholds root candidates, suppresses overlaps and retrieves the
/// surviving parse trees.
pub fn detect(
    model: &Model,
    geometry: &PyramidGeometry,
    maps: &ScorePyramid,
    opts: &ParseOptions,
) -> Result<Vec<Detection>> {
    let cands = root_candidates(model, geometry, maps, |_, v| v >= opts.tau_g)?;
    let kept = nms_by(cands, |c| (c.1, c.2), opts.tau_nms, opts.n_best);
    kept.into_iter()
        .map(|(p, window, score)| {
            Ok(Detection {
                window,
                score,
                tree: retrieve(model, maps, p)?,
            })
        })
        .collect()
}

/// Best detections in `pyramid`, score-descending.
pub fn parse(model: &Model, pyramid: &FeaturePyramid, opts: &ParseOptions) -> Result<ParseOutput> {
    let maps = score_pyramid(model, pyramid, opts.radius)?;
    let detections = detect(model, &pyramid.geometry, &maps, opts)?;
    Ok(ParseOutput { detections, maps })
}

/// Feature vector of a parse tree, so that `<params, features>` is its score.
pub fn tree_features(model: &Model, pyramid: &FeaturePyramid, tree: &ParseTree) -> Result<SparseFeatures> {
    let aog = &model.aog;
    let layout = &model.params.layout;
    let mut f = SparseFeatures::default();
    for (k, pn) in tree.nodes.iter().enumerate() {
        let node = aog.node(pn.node);
        match node.kind {
            NodeKind::Terminal => {
                let b = layout.block(pn.node).expect("terminal block");
                let (w, h) = model.template.extent(aog, pn.node);
                let p = pn.placement;
                let level = pyramid
                    .levels
                    .get(p.level)
                    .ok_or_else(|| Error::Invariant("tree level outside pyramid".into()))?;
                if p.x < 0 || p.y < 0 {
                    return Err(Error::Invariant("negative placement".into()));
                }
                f.push(b.offset, level.crop_window(p.x as usize, p.y as usize, w, h)?);
            }
            NodeKind::And(AndKind::Deformation) => {
                let b = layout.block(pn.node).expect("deformation block");
                let d = crate::features::deformation_feature(pn.displacement.0, pn.displacement.1);
                f.push(b.offset, d.iter().map(|v| -*v as f32).collect());
            }
            _ => {}
        }
        if k == 1 {
            if let Some(b) = layout.block(pn.node).filter(|b| b.kind == BlockKind::Bias) {
                f.push(b.offset, vec![1.0]);
            }
        }
    }
    Ok(f)
}

/// Root-level choices and part regions of a tree, used to tell
/// configurations apart.
pub fn configuration_key(aog: &Aog, tree: &ParseTree) -> Vec<NodeId> {
    let mut k: Vec<NodeId> = tree
        .nodes
        .iter()
        .filter(|n| aog.node(n.node).is_terminal())
        .map(|n| n.node)
        .collect();
    k.sort();
    k
}
