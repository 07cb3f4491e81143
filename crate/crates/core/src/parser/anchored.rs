//! Scores of every node for one fixed root placement.
//!
//! With the root pinned, each node has a single canonical placement given by
//! its grid region, so the whole AOG can be evaluated in one post-order pass
//! without building score maps. This agrees with the map-based DP read at
//! the same placements and is much cheaper when only a handful of windows
//! matter, as when scoring training examples.

use std::collections::VecDeque;

use super::{dot_f32, pack_displacement, unpack_displacement};
use crate::aog::{AndKind, NodeId, NodeKind, ParseNode, ParseTree, Placement};
use crate::error::{Error, Result};
use crate::features::{deformation_feature, FeatureMap, FeaturePyramid};
use crate::model::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredScores {
    pub root: Placement,
    /// Canonical placement per node; `None` when its level is missing.
    pub placement: Vec<Option<Placement>>,
    /// Node scores, `-inf` where a template leaves the level.
    pub score: Vec<f64>,
    /// Or-nodes: chosen child id. Deformation And-nodes: packed displacement.
    pub arg: Vec<u32>,
}

/// Canonical placement of `id` when the root sits at `root`.
pub fn canonical_placement(model: &Model, id: NodeId, root: Placement) -> Option<Placement> {
    let t = &model.template;
    let r = model.aog.node(id).region;
    let (ox, oy) = (r.x as i32 * t.unit.0 as i32, r.y as i32 * t.unit.1 as i32);
    if t.on_object_level(&model.aog, id) || t.part_level_offset == 0 {
        Some(Placement::new(root.level, root.x + ox, root.y + oy))
    } else {
        let level = root.level.checked_sub(t.part_level_offset)?;
        Some(Placement::new(level, 2 * (root.x + ox), 2 * (root.y + oy)))
    }
}

fn window_dot(level: &FeatureMap, w: &[f64], x: i32, y: i32, ew: usize, eh: usize) -> f64 {
    if x < 0 || y < 0 || x as usize + ew > level.width || y as usize + eh > level.height {
        return f64::NEG_INFINITY;
    }
    let row = ew * level.channels;
    (0..eh)
        .map(|ry| dot_f32(level.row(x as usize, y as usize + ry, ew), &w[ry * row..(ry + 1) * row]))
        .sum()
}

/// Evaluates every node with the root at `root`.
pub fn score_at(model: &Model, pyramid: &FeaturePyramid, root: Placement, radius: usize) -> Result<AnchoredScores> {
    let aog = &model.aog;
    let t = &model.template;
    if pyramid.channels() != model.params.layout.channels {
        return Err(Error::InvalidInput("pyramid channels differ from the model".into()));
    }
    let n = aog.len();
    let placement: Vec<Option<Placement>> = (0..n)
        .map(|i| canonical_placement(model, NodeId(i as u32), root))
        .collect();
    let mut score = vec![f64::NEG_INFINITY; n];
    let mut arg = vec![0u32; n];
    let r = radius as i32;
    for id in aog.post_order() {
        let i = id.index();
        let Some(p) = placement[i] else { continue };
        let Some(level) = pyramid.levels.get(p.level) else {
            continue;
        };
        let node = aog.node(id);
        match node.kind {
            NodeKind::Terminal => {
                let (ew, eh) = t.extent(aog, id);
                score[i] = window_dot(level, model.params.appearance(id), p.x, p.y, ew, eh);
            }
            NodeKind::And(AndKind::Termination) => score[i] = score[node.children[0].0.index()],
            NodeKind::And(AndKind::Deformation) => {
                let c = node.children[0].0;
                if !score[c.index()].is_finite() {
                    continue;
                }
                let (ew, eh) = t.extent(aog, c);
                let w = model.params.appearance(c);
                let th = model.params.deformation(id);
                let mut best = f64::NEG_INFINITY;
                let mut code = pack_displacement(0, 0, radius);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let v = window_dot(level, w, p.x + dx, p.y + dy, ew, eh);
                        if !v.is_finite() {
                            continue;
                        }
                        let d = deformation_feature(dx, dy);
                        let v = v - (th[0] * d[0] + th[1] * d[1] + th[2] * d[2] + th[3] * d[3]);
                        if v > best {
                            best = v;
                            code = pack_displacement(dx, dy, radius);
                        }
                    }
                }
                score[i] = best;
                arg[i] = code;
            }
            NodeKind::And(AndKind::Decomposition { .. }) => {
                score[i] = node.child_ids().map(|c| score[c.index()]).sum();
            }
            NodeKind::Or => {
                let mut kids: Vec<NodeId> = node.child_ids().collect();
                kids.sort();
                arg[i] = kids[0].0;
                for c in kids {
                    let v = score[c.index()] + model.params.bias(c);
                    if v > score[i] {
                        score[i] = v;
                        arg[i] = c.0;
                    }
                }
            }
        }
    }
    Ok(AnchoredScores {
        root,
        placement,
        score,
        arg,
    })
}

impl AnchoredScores {
    pub fn root_score(&self) -> f64 {
        self.score[0]
    }

    /// The best parse tree under this anchor, `None` when the root score is
    /// not finite.
    pub fn tree(&self, model: &Model, pyramid: &FeaturePyramid, radius: usize) -> Option<ParseTree> {
        if !self.root_score().is_finite() {
            return None;
        }
        let aog = &model.aog;
        let mut nodes = Vec::new();
        let mut queue = VecDeque::from([(aog.root(), (0, 0))]);
        while let Some((id, disp)) = queue.pop_front() {
            let i = id.index();
            let base = self.placement[i]?;
            let placement = Placement::new(base.level, base.x + disp.0, base.y + disp.1);
            let node = aog.node(id);
            let mut s = self.score[i];
            let mut d_out = disp;
            match node.kind {
                NodeKind::Or => queue.push_back((NodeId(self.arg[i]), (0, 0))),
                NodeKind::And(AndKind::Deformation) => {
                    d_out = unpack_displacement(self.arg[i], radius);
                    queue.push_back((node.children[0].0, d_out));
                }
                NodeKind::And(_) => queue.extend(node.child_ids().map(|c| (c, (0, 0)))),
                NodeKind::Terminal if disp != (0, 0) => {
                    let (ew, eh) = model.template.extent(aog, id);
                    let level = &pyramid.levels[placement.level];
                    s = window_dot(level, model.params.appearance(id), placement.x, placement.y, ew, eh);
                }
                NodeKind::Terminal => {}
            }
            nodes.push(ParseNode {
                node: id,
                placement,
                score: s,
                displacement: d_out,
            });
        }
        Some(ParseTree {
            nodes,
            score: self.root_score(),
        })
    }
}
