//! Rating every node of the full AOG by its training error.

use rayon::prelude::*;

use super::examples::example_pyramid;
use super::lsvm::{mine_pool, PoolCache};
use super::TrainingDataset;
use crate::aog::{Aog, KeptChildren, NodeId, NodeKind};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::parser::score_at;

/// Training error rate per node id.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMerits {
    pub error: Vec<f64>,
}

/// Error rate of thresholding scores at the midpoint of the two class
/// means. Scores within rounding of the threshold take the majority label;
/// non-finite scores rank below every finite one.
pub fn error_rate(pos: &[f64], neg: &[f64]) -> f64 {
    let n = pos.len() + neg.len();
    if pos.is_empty() || neg.is_empty() {
        return 0.0;
    }
    let floor = pos
        .iter()
        .chain(neg)
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let fix = |v: f64| {
        if v.is_finite() {
            v
        } else if floor.is_finite() {
            floor - 1.0
        } else {
            0.0
        }
    };
    let mean = |s: &[f64]| s.iter().map(|&v| fix(v)).sum::<f64>() / s.len() as f64;
    let t = 0.5 * (mean(pos) + mean(neg));
    let tol = 1e-12 * t.abs().max(1.0);
    let majority_pos = pos.len() > neg.len();
    let says_pos = |v: f64| {
        let v = fix(v);
        if v > t + tol {
            true
        } else if v < t - tol {
            false
        } else {
            majority_pos
        }
    };
    let wrong = pos.iter().filter(|&&v| !says_pos(v)).count() + neg.iter().filter(|&&v| says_pos(v)).count();
    wrong as f64 / n as f64
}

/// Scores every positive at its box and the hardest negatives (dataset
/// negatives and pool windows ranked by the object template) at theirs,
/// then rates each node.
pub fn evaluate_node_merits(
    full: &Model,
    data: &TrainingDataset,
    pools: &mut PoolCache,
    cfg: &EngineConfig,
) -> Result<NodeMerits> {
    let radius = cfg.parser.deformation_radius;
    let cap = cfg.learner.merit_negatives;
    let at_box = |frame, bbox| -> Option<Vec<f64>> {
        let ex = example_pyramid(frame, bbox, full, cfg).ok()?;
        score_at(full, &ex.pyramid, ex.anchor, radius).ok().map(|a| a.score)
    };
    let pos: Vec<Vec<f64>> = data
        .positives
        .par_iter()
        .filter_map(|p| at_box(&p.frame, &p.bbox))
        .collect();
    if pos.is_empty() {
        return Err(Error::Degenerate("no usable positives for node merits".into()));
    }
    let recent = data.negatives.len().saturating_sub(cap);
    let mut neg: Vec<Vec<f64>> = data.negatives[recent..]
        .par_iter()
        .filter_map(|n| at_box(&n.frame, &n.bbox))
        .collect();
    let root = full.object_only()?;
    for pool in &data.pools {
        let pyr = pools.get(pool, full, cfg)?;
        let mined = mine_pool(&root, pool, pyr, cfg, f64::NEG_INFINITY, cap)?;
        let scored: Vec<Vec<f64>> = mined
            .par_iter()
            .map(|((_, p), _)| score_at(full, pyr, *p, radius).map(|a| a.score))
            .collect::<Result<_>>()?;
        neg.extend(scored);
    }
    let error = (0..full.aog.len())
        .map(|i| {
            let p: Vec<f64> = pos.iter().map(|s| s[i]).collect();
            let n: Vec<f64> = neg.iter().map(|s| s[i]).collect();
            error_rate(&p, &n)
        })
        .collect();
    Ok(NodeMerits { error })
}

/// Walks down from the root keeping, at every Or-node, the children whose
/// error is within `epsilon` of the best child.
pub fn select_children(aog: &Aog, error: &[f64], epsilon: f64) -> KeptChildren {
    let mut kept = KeptChildren::new();
    let mut seen = vec![false; aog.len()];
    let mut queue = std::collections::VecDeque::from([aog.root()]);
    seen[aog.root().index()] = true;
    while let Some(id) = queue.pop_front() {
        let node = aog.node(id);
        let next: Vec<NodeId> = match node.kind {
            NodeKind::Terminal => Vec::new(),
            NodeKind::And(_) => node.child_ids().collect(),
            NodeKind::Or => {
                let best = node.child_ids().map(|c| error[c.index()]).fold(f64::INFINITY, f64::min);
                let keep: Vec<NodeId> = node
                    .child_ids()
                    .filter(|c| error[c.index()] <= best + epsilon)
                    .collect();
                kept.insert(id, keep.iter().copied().collect());
                keep
            }
        };
        for c in next {
            if !seen[c.index()] {
                seen[c.index()] = true;
                queue.push_back(c);
            }
        }
    }
    kept
}

/// The initial object AOG: the subgraph picked by [`select_children`].
pub fn retrieve_initial_object_aog(full: &Model, merits: &NodeMerits, epsilon: f64) -> Result<Model> {
    full.restrict(&select_children(&full.aog, &merits.error, epsilon))
}
