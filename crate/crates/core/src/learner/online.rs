//! Parameter updates between structure re-learns: the latest result joins
//! the working set and the solver resumes from its previous solution.

use super::lsvm::{optimize, LsvmReport};
use super::svm::{DualState, HingeProblem};
use crate::config::EngineConfig;
use crate::model::Model;
use crate::parser::SparseFeatures;

#[derive(Debug, Clone)]
pub struct OnlineLearner {
    problem: HingeProblem,
    dual: DualState,
    /// Positives from the structure learning run, never dropped.
    head: usize,
}

impl OnlineLearner {
    pub fn new(report: &LsvmReport) -> Self {
        OnlineLearner {
            head: report.working.pos.len(),
            problem: report.working.clone(),
            dual: report.dual.clone(),
        }
    }

    pub fn positives(&self) -> usize {
        self.problem.pos.len()
    }

    pub fn negatives(&self) -> usize {
        self.problem.neg.len()
    }

    /// Adds one positive and its negatives, re-optimizes for at most
    /// `online_update_iters` and resets `tau_g` to the lowest positive
    /// score. Returns the new `tau_g`.
    pub fn update(
        &mut self,
        model: &mut Model,
        pos: SparseFeatures,
        neg: Vec<SparseFeatures>,
        cfg: &EngineConfig,
    ) -> f64 {
        let lc = &cfg.learner;
        self.problem.pos.push(pos);
        self.problem.neg.extend(neg);
        let cap = self.head + lc.relearn_cap;
        if self.problem.pos.len() > cap {
            // drop the oldest online positive
            let i = self.head;
            self.problem.pos.remove(i);
            if i < self.dual.pos.len() {
                self.dual.pos.remove(i);
            }
        }
        if self.problem.neg.len() > lc.negative_cache_cap {
            let w = &model.params.values;
            let mut order: Vec<(f64, usize)> = self
                .problem
                .neg
                .iter()
                .enumerate()
                .map(|(i, x)| (x.dot(w), i))
                .collect();
            order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut keep: Vec<usize> = order[..lc.negative_cache_cap].iter().map(|&(_, i)| i).collect();
            keep.sort_unstable();
            self.dual.retain_neg(&keep);
            let old = std::mem::take(&mut self.problem.neg);
            self.problem.neg = keep.iter().map(|&i| old[i].clone()).collect();
        }
        optimize(
            model,
            &self.problem,
            lc,
            cfg.tracker.online_update_iters,
            &mut self.dual,
        );
        let w = &model.params.values;
        let tau = self.problem.pos.iter().map(|x| x.dot(w)).fold(f64::INFINITY, f64::min);
        model.tau_g = tau;
        tau
    }
}
