//! Hinge-loss linear classifiers over sparse feature vectors.

use rayon::prelude::*;

use crate::parser::SparseFeatures;

/// Labeled examples sharing one regularized weight vector. The hinge loss
/// of each example is scaled by `n / (2 n_y)`, where `n_y` counts its class,
/// so both classes carry half the total weight however unbalanced they are.
#[derive(Debug, Clone, Default)]
pub struct HingeProblem {
    pub pos: Vec<SparseFeatures>,
    pub neg: Vec<SparseFeatures>,
    pub c: f64,
    pub dim: usize,
}

const CHUNK: usize = 64;

impl HingeProblem {
    pub fn len(&self) -> usize {
        self.pos.len() + self.neg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loss weight of one example of class `y`: `c n / (2 n_y)`.
    pub fn weight(&self, y: f64) -> f64 {
        let ny = if y > 0.0 { self.pos.len() } else { self.neg.len() };
        self.c * self.len() as f64 / (2 * ny.max(1)) as f64
    }

    fn examples(&self) -> impl Iterator<Item = (&SparseFeatures, f64)> {
        self.pos
            .iter()
            .map(|x| (x, 1.0))
            .chain(self.neg.iter().map(|x| (x, -1.0)))
    }

    /// `1/2 |w|^2 + sum weight(y) max(0, 1 - y <w, x>)`
    pub fn value(&self, w: &[f64]) -> f64 {
        let hinge: f64 = self
            .examples()
            .map(|(x, y)| self.weight(y) * (1.0 - y * x.dot(w)).max(0.0))
            .sum();
        0.5 * w.iter().map(|v| v * v).sum::<f64>() + hinge
    }

    /// Value and gradient. Examples are reduced in fixed chunks so the result
    /// does not depend on scheduling.
    pub fn value_grad(&self, w: &[f64], g: &mut [f64]) -> f64 {
        let ex: Vec<(&SparseFeatures, f64)> = self.examples().collect();
        let parts: Vec<(f64, Vec<(usize, f64)>)> = ex
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut h = 0.0;
                let mut active = Vec::new();
                for (i, (x, y)) in chunk.iter().enumerate() {
                    let m = 1.0 - y * x.dot(w);
                    if m > 0.0 {
                        h += self.weight(*y) * m;
                        active.push((i, *y));
                    }
                }
                (h, active)
            })
            .collect();
        g.copy_from_slice(w);
        let mut hinge = 0.0;
        for (k, (h, active)) in parts.into_iter().enumerate() {
            hinge += h;
            for (i, y) in active {
                ex[k * CHUNK + i].0.axpy(-self.weight(y) * y, g);
            }
        }
        0.5 * w.iter().map(|v| v * v).sum::<f64>() + hinge
    }

    /// Number of examples with `y <w, x> < 1`.
    pub fn margin_violations(&self, w: &[f64]) -> usize {
        self.examples().filter(|(x, y)| y * x.dot(w) < 1.0).count()
    }

    /// Sum of hinge losses, unweighted.
    pub fn hinge_sum(&self, w: &[f64]) -> f64 {
        self.examples().map(|(x, y)| (1.0 - y * x.dot(w)).max(0.0)).sum()
    }
}

/// Dual variables of a [`train_dcd_warm`] solve, kept per class so that
/// examples can be appended or dropped between solves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DualState {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
    /// Multipliers of the lower bounds.
    pub mu: Vec<f64>,
}

impl DualState {
    /// Drops the negatives whose indices are not listed in `keep`
    /// (ascending).
    pub fn retain_neg(&mut self, keep: &[usize]) {
        self.neg = keep.iter().filter_map(|&i| self.neg.get(i).copied()).collect();
    }
}

/// Dual coordinate descent for the L1-loss linear SVM: each dual variable
/// lives in `[0, weight(y)]` and is updated in closed form in turn.
pub fn train_dcd(p: &HingeProblem, tol: f64, max_epochs: usize) -> Vec<f64> {
    train_dcd_bounded(p, &[], tol, max_epochs)
}

/// [`train_dcd`] with lower bounds `w[i] >= lb`. Each bound gets a
/// nonnegative multiplier that enters `w` directly and is updated in closed
/// form alongside the example duals.
pub fn train_dcd_bounded(p: &HingeProblem, bounds: &[(usize, f64)], tol: f64, max_epochs: usize) -> Vec<f64> {
    train_dcd_warm(p, bounds, &mut DualState::default(), tol, max_epochs)
}

/// [`train_dcd_bounded`] starting from `state`, which is resized to the
/// problem (new examples start at zero) and updated in place. The weights
/// are rebuilt from the duals, so any state is a valid start.
pub fn train_dcd_warm(
    p: &HingeProblem,
    bounds: &[(usize, f64)],
    state: &mut DualState,
    tol: f64,
    max_epochs: usize,
) -> Vec<f64> {
    let ex: Vec<(&SparseFeatures, f64)> = p.examples().collect();
    let np = p.pos.len();
    let (up, un) = (p.weight(1.0), p.weight(-1.0));
    state.pos.resize(p.pos.len(), 0.0);
    state.neg.resize(p.neg.len(), 0.0);
    state.mu.resize(bounds.len(), 0.0);
    let mut alpha: Vec<f64> = state
        .pos
        .iter()
        .chain(&state.neg)
        .enumerate()
        .map(|(i, a)| a.clamp(0.0, if i < np { up } else { un }))
        .collect();
    let mut mu = std::mem::take(&mut state.mu);
    let q: Vec<f64> = ex
        .iter()
        .map(|(x, _)| {
            x.blocks
                .iter()
                .flat_map(|(_, v)| v.iter())
                .map(|&v| (v as f64).powi(2))
                .sum()
        })
        .collect();
    let mut w = vec![0.0; p.dim];
    for (i, (x, y)) in ex.iter().enumerate() {
        if alpha[i] > 0.0 {
            x.axpy(alpha[i] * y, &mut w);
        }
    }
    for (k, &(i, _)) in bounds.iter().enumerate() {
        w[i] += mu[k];
    }
    for _ in 0..max_epochs {
        let mut max_pg = 0.0f64;
        for (k, &(i, lb)) in bounds.iter().enumerate() {
            let step = lb - w[i];
            let new = (mu[k] + step).max(0.0);
            if new != mu[k] {
                max_pg = max_pg.max((new - mu[k]).abs());
                w[i] += new - mu[k];
                mu[k] = new;
            }
        }
        for (i, (x, y)) in ex.iter().enumerate() {
            if q[i] <= 0.0 {
                continue;
            }
            let g = y * x.dot(&w) - 1.0;
            let u = if i < np { up } else { un };
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= u {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, u);
                x.axpy((alpha[i] - old) * y, &mut w);
            }
        }
        if max_pg < tol {
            break;
        }
    }
    // the multipliers only lift bounded coordinates, so this is a no-op
    // at convergence and a safeguard before it
    for &(i, lb) in bounds {
        w[i] = w[i].max(lb);
    }
    state.pos = alpha[..np].to_vec();
    state.neg = alpha[np..].to_vec();
    state.mu = mu;
    w
}
