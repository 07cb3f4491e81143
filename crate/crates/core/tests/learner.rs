mod support;

use std::sync::Arc;

use aogtrack_core::config::Solver;
use aogtrack_core::learner::{full_model, lsvm_train, train_root_svm, HingeProblem, PoolCache, TrainingDataset};
use aogtrack_core::parser::SparseFeatures;
use aogtrack_core::{BBox, EngineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{svm_dual_lower_bound, textured_frame};

fn random_sparse(rng: &mut ChaCha8Rng, dim: usize) -> SparseFeatures {
    let mut f = SparseFeatures::default();
    let mut off = 0;
    while off < dim {
        let len = rng.gen_range(1..=6).min(dim - off);
        if rng.gen_bool(0.6) {
            f.push(off, (0..len).map(|_| rng.gen_range(-1.0f32..1.0)).collect());
        }
        off += len + rng.gen_range(0..3);
    }
    f
}

#[test]
fn convexified_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = 40;
    let p = HingeProblem {
        pos: (0..12).map(|_| random_sparse(&mut rng, dim)).collect(),
        neg: (0..30).map(|_| random_sparse(&mut rng, dim)).collect(),
        c: 0.7,
        dim,
    };
    let h = 1e-6;
    for _ in 0..20 {
        let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let mut g = vec![0.0; dim];
        p.value_grad(&w, &mut g);
        let fd: Vec<f64> = (0..dim)
            .map(|k| {
                let (mut a, mut b) = (w.clone(), w.clone());
                a[k] += h;
                b[k] -= h;
                (p.value(&a) - p.value(&b)) / (2.0 * h)
            })
            .collect();
        let err: f64 = g.iter().zip(&fd).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = fd.iter().map(|y| y * y).sum::<f64>().sqrt();
        assert!(err / norm <= 1e-4, "relative error {}", err / norm);
    }
}

fn scene(seed: u64) -> (TrainingDataset, EngineConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obj = BBox::new(44.0, 36.0, 36.0, 32.0);
    let frame = Arc::new(textured_frame(&mut rng, 144, 112, obj));
    let data = TrainingDataset::init(frame, obj, 2.0).unwrap();
    let mut cfg = EngineConfig::default();
    cfg.aog.grid_side = Some(2);
    (data, cfg)
}

#[test]
fn objective_trace_never_increases() {
    for solver in [Solver::Dcd, Solver::Lbfgs] {
        let (data, mut cfg) = scene(8);
        cfg.learner.solver = solver;
        let mut model = full_model(&cfg, &data.positives[0].frame, &data.positives[0].bbox, 0).unwrap();
        let mut pools = PoolCache::default();
        let report = lsvm_train(&mut model, &data, &mut pools, &cfg, 3, true).unwrap();
        assert_eq!(report.rounds.len(), 3);
        for r in &report.rounds {
            assert!(r.after <= r.before + 1e-12, "{solver:?}: {r:?}");
        }
        assert!(
            report.rounds[0].after < report.rounds[0].before,
            "{solver:?}: no progress"
        );
    }
}

#[test]
fn object_only_model_is_a_plain_linear_svm() {
    let (data, mut cfg) = scene(21);
    cfg.learner.dcd_tol = 1e-6;
    cfg.learner.max_iters = 20_000;
    let mut pools = PoolCache::default();
    let (model, report) = train_root_svm(&data, &mut pools, &cfg).unwrap();
    assert_eq!(model.aog.part_terminal_count(), 0);
    let w = &model.params.values;
    let p = &report.working;
    let dim = model.params.layout.dim;
    let dense = |v: &[SparseFeatures]| v.iter().map(|x| x.to_dense(dim)).collect::<Vec<_>>();
    let lower = svm_dual_lower_bound(&dense(&p.pos), &dense(&p.neg), p.c, 20_000);
    // the reference primal, written out densely
    let n = p.pos.len() + p.neg.len();
    let primal = 0.5 * w.iter().map(|v| v * v).sum::<f64>()
        + dense(&p.pos)
            .iter()
            .map(|x| c_pos(p.c, n, p.pos.len()) * hinge(x, w, 1.0))
            .sum::<f64>()
        + dense(&p.neg)
            .iter()
            .map(|x| c_pos(p.c, n, p.neg.len()) * hinge(x, w, -1.0))
            .sum::<f64>();
    assert!((primal - p.value(w)).abs() <= 1e-9 * primal.max(1.0));
    assert!(lower <= primal + 1e-12);
    assert!(primal - lower <= 1e-3 * primal, "gap {} on {}", primal - lower, primal);
}

fn c_pos(c: f64, n: usize, ny: usize) -> f64 {
    c * n as f64 / (2 * ny) as f64
}

fn hinge(x: &[f64], w: &[f64], y: f64) -> f64 {
    (1.0 - y * x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).max(0.0)
}
