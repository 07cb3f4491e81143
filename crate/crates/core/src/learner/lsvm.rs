//! Latent SVM training: alternate positive relabeling, hard negative mining
//! and convex optimization with the latent choices held fixed.

use rayon::prelude::*;

use super::examples::{best_at_box, relabel, Scored};
use super::lbfgs::{minimize, LbfgsOptions, LbfgsResult};
use super::svm::{train_dcd_warm, DualState, HingeProblem};
use super::{NegativePool, TrainingDataset};
use crate::aog::Placement;
use crate::config::{EngineConfig, LearnerConfig, Solver};
use crate::error::{Error, Result};
use crate::features::FeaturePyramid;
use crate::model::Model;
use crate::parser::{nms_by, retrieve, root_candidates, score_pyramid, tree_features, TemplateGeometry};
use crate::tracker::{compute_roi, search_pyramid};

/// Pyramids of the mining pools around their object, one per template layout.
#[derive(Debug, Default)]
pub struct PoolCache {
    entries: Vec<((usize, TemplateGeometry), FeaturePyramid)>,
}

impl PoolCache {
    pub fn get(&mut self, pool: &NegativePool, model: &Model, cfg: &EngineConfig) -> Result<&FeaturePyramid> {
        let key = (pool.frame_index, model.template);
        if let Some(i) = self.entries.iter().position(|(k, _)| *k == key) {
            return Ok(&self.entries[i].1);
        }
        let anchor = pool
            .exclude
            .first()
            .ok_or_else(|| Error::InvalidInput("mining pool without an object box".into()))?;
        let (fw, fh) = (pool.frame.width() as f64, pool.frame.height() as f64);
        let region = compute_roi(anchor, fw, fh, cfg.learner.mining_roi)
            .ok_or_else(|| Error::InvalidInput("mining pool box outside the frame".into()))?;
        let pyr = search_pyramid(&pool.frame, model, anchor, region, cfg.tracker.scale_levels)?;
        self.entries.push((key, pyr));
        Ok(&self.entries.last().expect("just pushed").1)
    }
}

/// Identifies a mined window: pool frame and root placement.
pub type MinedKey = (usize, Placement);

/// Highest scoring windows of a pool frame away from the object, after NMS.
pub fn mine_pool(
    model: &Model,
    pool: &NegativePool,
    pyr: &FeaturePyramid,
    cfg: &EngineConfig,
    min_score: f64,
    max_keep: usize,
) -> Result<Vec<(MinedKey, Scored)>> {
    let radius = cfg.parser.deformation_radius;
    let maps = score_pyramid(model, pyr, radius)?;
    let neg_iou = cfg.learner.negative_iou;
    let cands = root_candidates(model, &pyr.geometry, &maps, |b, v| {
        v > min_score && pool.exclude.iter().all(|e| e.iou(b) < neg_iou)
    })?;
    let kept = nms_by(cands, |c| (c.1, c.2), cfg.parser.tau_nms, max_keep);
    kept.into_iter()
        .map(|(p, _, score)| {
            let tree = retrieve(model, &maps, p)?;
            let features = tree_features(model, pyr, &tree)?;
            Ok(((pool.frame_index, p), Scored { score, tree, features }))
        })
        .collect()
}

fn bounds(model: &Model, floor: f64) -> Vec<(usize, f64)> {
    model
        .params
        .layout
        .quadratic_indices()
        .into_iter()
        .map(|i| (i, floor))
        .collect()
}

/// Minimizes the convexified objective by L-BFGS from the current
/// parameters, keeping quadratic deformation weights above the floor.
pub fn optimize_lbfgs(model: &mut Model, problem: &HingeProblem, floor: f64, opts: &LbfgsOptions) -> LbfgsResult {
    let b = bounds(model, floor);
    let r = minimize(|w, g| problem.value_grad(w, g), model.params.values.clone(), &b, opts);
    model.params.values.clone_from(&r.x);
    r
}

/// Minimizes the convexified objective with the configured solver. Returns
/// the objective value reached. `dual` warm-starts the dual solver and is
/// ignored by L-BFGS, which starts from the current parameters.
pub fn optimize(
    model: &mut Model,
    problem: &HingeProblem,
    cfg: &LearnerConfig,
    max_iters: usize,
    dual: &mut DualState,
) -> f64 {
    match cfg.solver {
        Solver::Lbfgs => {
            let opts = LbfgsOptions {
                memory: 10,
                max_iters,
                grad_tol: cfg.grad_tol,
            };
            optimize_lbfgs(model, problem, cfg.def_floor, &opts).value
        }
        Solver::Dcd => {
            let w = train_dcd_warm(problem, &bounds(model, cfg.def_floor), dual, cfg.dcd_tol, max_iters);
            model.params.values = w;
            problem.value(&model.params.values)
        }
    }
}

/// Objective values of one training round, both on the round's final
/// working set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTrace {
    pub before: f64,
    pub after: f64,
    pub negatives: usize,
}

#[derive(Debug, Clone)]
pub struct LsvmReport {
    pub rounds: Vec<RoundTrace>,
    /// Final latent choice per dataset positive, `None` when it admits none.
    pub positives: Vec<Option<Scored>>,
    pub tau_g: f64,
    /// Working set of the last round and its dual solution, reused by
    /// online updates.
    pub working: HingeProblem,
    pub dual: DualState,
}

/// Positives and negatives of a working set with the mining keys of the
/// negatives.
struct Working {
    problem: HingeProblem,
    keys: Vec<Option<MinedKey>>,
    dual: DualState,
}

impl Working {
    fn cap(&mut self, w: &[f64], cap: usize) {
        if self.problem.neg.len() <= cap {
            return;
        }
        let mut order: Vec<(f64, usize)> = self
            .problem
            .neg
            .iter()
            .enumerate()
            .map(|(i, x)| (x.dot(w), i))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut keep: Vec<usize> = order[..cap].iter().map(|&(_, i)| i).collect();
        keep.sort_unstable();
        self.dual.retain_neg(&keep);
        let neg = std::mem::take(&mut self.problem.neg);
        let keys = std::mem::take(&mut self.keys);
        let mut it = keep.into_iter().peekable();
        for (i, (x, k)) in neg.into_iter().zip(keys).enumerate() {
            if it.peek() == Some(&i) {
                it.next();
                self.problem.neg.push(x);
                self.keys.push(k);
            }
        }
    }
}

fn score_positives(
    model: &Model,
    data: &TrainingDataset,
    cfg: &EngineConfig,
    latent: bool,
) -> Result<Vec<Option<Scored>>> {
    let iou = cfg.learner.relabel_iou;
    data.positives
        .par_iter()
        .map(|p| {
            let r = if latent {
                relabel(model, &p.frame, &p.bbox, iou, cfg)
            } else {
                best_at_box(model, &p.frame, &p.bbox, cfg)
            };
            // boxes that cannot be sampled simply drop out
            Ok(r.unwrap_or(None))
        })
        .collect()
}

fn score_negatives(model: &Model, data: &TrainingDataset, cfg: &EngineConfig) -> Result<Vec<Scored>> {
    let scored: Vec<Option<Scored>> = data
        .negatives
        .par_iter()
        .map(|n| best_at_box(model, &n.frame, &n.bbox, cfg).unwrap_or(None))
        .collect();
    Ok(scored.into_iter().flatten().collect())
}

/// Trains `model` in place for `rounds` rounds. With `latent` unset every
/// positive keeps its annotated placement, which is plain SVM training with
/// negative mining.
pub fn lsvm_train(
    model: &mut Model,
    data: &TrainingDataset,
    pools: &mut PoolCache,
    cfg: &EngineConfig,
    rounds: usize,
    latent: bool,
) -> Result<LsvmReport> {
    let lc = &cfg.learner;
    let dim = model.params.layout.dim;
    let mut traces = Vec::new();
    let mut working = HingeProblem::default();
    let mut dual = DualState::default();
    for _ in 0..rounds.max(1) {
        let pos: Vec<Scored> = score_positives(model, data, cfg, latent)?
            .into_iter()
            .flatten()
            .collect();
        if pos.is_empty() {
            return Err(Error::VerificationFailed(
                "no positive admits a placement overlapping its box".into(),
            ));
        }
        let neg = score_negatives(model, data, cfg)?;
        let mut ws = Working {
            keys: vec![None; neg.len()],
            dual: DualState::default(),
            problem: HingeProblem {
                pos: pos.into_iter().map(|s| s.features).collect(),
                neg: neg.into_iter().map(|s| s.features).collect(),
                c: lc.lsvm_c,
                dim,
            },
        };
        let start = model.params.values.clone();
        for m in 0..lc.mining_rounds.max(1) {
            let mut added = 0;
            for pool in &data.pools {
                let pyr = pools.get(pool, model, cfg)?;
                let mined = mine_pool(model, pool, pyr, cfg, lc.hard_negative_margin, lc.negatives_per_frame)?;
                for (key, s) in mined {
                    if !ws.keys.contains(&Some(key)) {
                        ws.problem.neg.push(s.features);
                        ws.keys.push(Some(key));
                        added += 1;
                    }
                }
            }
            if added == 0 && m > 0 {
                break;
            }
            if ws.problem.neg.is_empty() {
                return Err(Error::Degenerate("no negatives available for training".into()));
            }
            optimize(model, &ws.problem, lc, lc.max_iters, &mut ws.dual);
            ws.cap(&model.params.values, lc.negative_cache_cap);
        }
        check_degenerate(&ws.problem)?;
        // never leave a round worse than it started
        let before = ws.problem.value(&start);
        if ws.problem.value(&model.params.values) > before {
            model.params.values = start;
        }
        traces.push(RoundTrace {
            before,
            after: ws.problem.value(&model.params.values),
            negatives: ws.problem.neg.len(),
        });
        working = ws.problem;
        dual = ws.dual;
    }
    let positives = score_positives(model, data, cfg, latent)?;
    let tau_g = positives
        .iter()
        .flatten()
        .map(|s| s.score)
        .fold(f64::INFINITY, f64::min);
    model.tau_g = tau_g;
    Ok(LsvmReport {
        rounds: traces,
        positives,
        tau_g,
        working,
        dual,
    })
}

/// Refuses training sets whose examples all share one feature vector.
fn check_degenerate(p: &HingeProblem) -> Result<()> {
    let mut all = p.pos.iter().chain(&p.neg);
    let Some(first) = all.next() else {
        return Err(Error::Degenerate("empty training set".into()));
    };
    if all.all(|x| x == first) {
        return Err(Error::Degenerate(
            "all training examples have identical features".into(),
        ));
    }
    Ok(())
}
