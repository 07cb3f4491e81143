mod support;

use aogtrack_core::aog::Placement;
use aogtrack_core::aog::{KeptChildren, NodeKind};
use aogtrack_core::geometry::BBox;
use aogtrack_core::parser::{
    deformation_max, nms_by, parse, retrieve, score_at, score_pyramid, score_terminal, tree_features, ParseOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

fn opts(tau_g: f64, n_best: usize, radius: usize) -> ParseOptions {
    ParseOptions {
        tau_g,
        tau_nms: 0.7,
        n_best,
        radius,
    }
}

#[test]
fn dp_top_score_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..120 {
        let grid = [(1, 1), (1, 2), (2, 1), (2, 2)][case % 4];
        let unit = (rng.gen_range(1..3), rng.gen_range(1..3));
        let offset = if case % 3 == 0 { 1 } else { 0 };
        let radius = rng.gen_range(1..3);
        let c = rng.gen_range(1..4);
        let model = random_model(&mut rng, grid, unit, c, offset, 1);
        let base = (rng.gen_range(9..13), rng.gen_range(9..13));
        let pyr = random_pyramid(&mut rng, base, 3, c, 1);
        let out = parse(&model, &pyr, &opts(f64::NEG_INFINITY, 1, radius)).unwrap();
        let expect = brute_force_best(&model, &pyr, radius);
        let got = out.detections[0].score;
        assert!((got - expect).abs() <= 1e-6, "case {case}: dp {got} vs brute {expect}");
    }
}

#[test]
fn detection_scores_reconstruct_from_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..30 {
        let offset = case % 2;
        let model = random_model(&mut rng, (2, 2), (2, 1), 3, offset, 1);
        let pyr = random_pyramid(&mut rng, (14, 12), 3, 3, 1);
        let out = parse(&model, &pyr, &opts(f64::NEG_INFINITY, 10, 3)).unwrap();
        assert!(!out.detections.is_empty());
        for d in &out.detections {
            let phi = tree_features(&model, &pyr, &d.tree).unwrap();
            let s = phi.dot(&model.params.values);
            assert!((s - d.score).abs() < 1e-5, "{s} vs {}", d.score);
            // parts move only below Deformation edges
            for n in &d.tree.nodes {
                if n.displacement != (0, 0) {
                    let k = model.aog.node(n.node).kind;
                    assert!(matches!(k, NodeKind::Terminal | NodeKind::And(_)));
                }
            }
            let cfg = d.tree.collapse(&model.aog, &model.template, &pyr.geometry).unwrap();
            assert_eq!(cfg.boxes[0], d.window);
        }
        for w in out.detections.windows(2) {
            assert!(w[0].score >= w[1].score);
        }
    }
}

#[test]
fn terminal_map_matches_crop_and_dot() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let (w, h, c) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..4));
        let level = random_map(&mut rng, 9, 8, c);
        let theta: Vec<f64> = (0..w * h * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = score_terminal(&level, &theta, w, h).unwrap();
        for y in 0..m.height {
            for x in 0..m.width {
                let e = crop_dot(&level, &theta, x as i64, y as i64, w, h).unwrap();
                assert!((m.get(x, y) - e).abs() < 1e-6);
                let crop = level.crop_window(x, y, w, h).unwrap();
                let d: f64 = crop.iter().zip(&theta).map(|(a, b)| *a as f64 * b).sum();
                assert!((d - e).abs() < 1e-9);
            }
        }
    }
    let level = random_map(&mut rng, 5, 5, 2);
    let zero = score_terminal(&level, &[0.0; 8], 2, 2).unwrap();
    assert!(zero.data.iter().all(|&v| v == 0.0));
}

#[test]
fn deformation_matches_naive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..150 {
        let r = 1 + case % 3;
        let (w, h) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let m = random_score_map(&mut rng, w, h);
        let theta = [
            rng.gen_range(0.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let (out, _) = deformation_max(&m, theta, r);
        assert_eq!(out.data, naive_local_max(&m, theta, r as i64));
    }
}

#[test]
fn infinite_threshold_gives_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = random_model(&mut rng, (2, 2), (1, 1), 2, 0, 1);
    let pyr = random_pyramid(&mut rng, (8, 8), 2, 2, 1);
    let out = parse(&model, &pyr, &opts(f64::INFINITY, 10, 2)).unwrap();
    assert!(out.detections.is_empty());
}

#[test]
fn object_only_grammar_is_root_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let full = random_model(&mut rng, (2, 2), (2, 2), 2, 0, 1);
    let wrapper = full.aog.root_children()[0];
    let kept: KeptChildren = [(full.aog.root(), [wrapper].into())].into();
    let (aog, _) = full.aog.extract_subgraph(&kept).unwrap();
    let mut model = aogtrack_core::model::Model::new(aog, full.template, 2, full.features.clone(), 0.01);
    for v in model.params.values.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let pyr = random_pyramid(&mut rng, (10, 10), 1, 2, 1);
    let out = parse(&model, &pyr, &opts(f64::NEG_INFINITY, 50, 3)).unwrap();
    let obj = model.aog.object_terminal().unwrap();
    let bias = model.params.bias(model.aog.root_children()[0]);
    let m = score_terminal(&pyr.levels[0], model.params.appearance(obj), 4, 4).unwrap();
    let mut cands: Vec<(BBox, f64)> = Vec::new();
    for y in 0..m.height {
        for x in 0..m.width {
            cands.push((
                BBox::new(16.0 * x as f64 / 4.0, 16.0 * y as f64 / 4.0, 16.0, 16.0),
                m.get(x, y) + bias,
            ));
        }
    }
    let expect = nms_by(cands, |c| *c, 0.7, 50);
    assert_eq!(out.detections.len(), expect.len());
    for (d, e) in out.detections.iter().zip(&expect) {
        assert_eq!(d.window, e.0);
        assert!((d.score - e.1).abs() < 1e-9);
    }
}

#[test]
fn adding_or_children_never_lowers_root_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let full = random_model(&mut rng, (2, 2), (1, 1), 2, 0, 1);
        let pyr = random_pyramid(&mut rng, (9, 9), 2, 2, 1);
        let root = full.aog.root();
        let kids = full.aog.root_children();
        let sub_model = |keep: &[usize]| {
            let kept: KeptChildren = [(root, keep.iter().map(|&k| kids[k]).collect())].into();
            let (aog, old) = full.aog.extract_subgraph(&kept).unwrap();
            let mut m = aogtrack_core::model::Model::new(aog, full.template, 2, full.features.clone(), 0.01);
            for (new, &o) in old.iter().enumerate() {
                if let (Some(nb), Some(ob)) = (m.params.layout.blocks[new], full.params.layout.blocks[o.index()]) {
                    m.params.values[nb.offset..nb.offset + nb.len]
                        .copy_from_slice(&full.params.values[ob.offset..ob.offset + ob.len]);
                }
            }
            m
        };
        let small = sub_model(&[1]);
        let big = sub_model(&[0, 1]);
        let a = score_pyramid(&small, &pyr, 2).unwrap();
        let b = score_pyramid(&big, &pyr, 2).unwrap();
        let ra = a.get(small.aog.root(), 0).unwrap();
        let rb = b.get(big.aog.root(), 0).unwrap();
        for (x, y) in ra.score.data.iter().zip(&rb.score.data) {
            assert!(y >= x);
        }
    }
}

#[test]
fn nms_output_is_an_antichain_and_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let n = rng.gen_range(1..40);
        let items: Vec<(BBox, f64)> = (0..n)
            .map(|_| {
                let b = BBox::new(
                    rng.gen_range(0.0..50.0),
                    rng.gen_range(0.0..50.0),
                    rng.gen_range(5.0..30.0),
                    rng.gen_range(5.0..30.0),
                );
                (b, (rng.gen_range(0..10) as f64) / 2.0)
            })
            .collect();
        let kept = nms_by(items.clone(), |c| *c, 0.5, usize::MAX);
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                assert!(kept[i].0.iou(&kept[j].0) < 0.5);
            }
        }
        // quadratic reference: repeatedly take the best remaining box
        let mut rest = items;
        let mut reference = Vec::new();
        while !rest.is_empty() {
            let mut bi = 0;
            for i in 1..rest.len() {
                let (a, b) = (&rest[i], &rest[bi]);
                if a.1 > b.1 || (a.1 == b.1 && (a.0.x, a.0.y, a.0.w, a.0.h) < (b.0.x, b.0.y, b.0.w, b.0.h)) {
                    bi = i;
                }
            }
            let best = rest.remove(bi);
            rest.retain(|r| r.0.iou(&best.0) < 0.5);
            reference.push(best);
        }
        assert_eq!(kept, reference);
    }
}

#[test]
fn anchored_evaluation_agrees_with_score_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..24 {
        let offset = case % 2;
        let model = random_model(&mut rng, (2, 2), (1, 2), 2, offset, 1);
        let pyr = random_pyramid(&mut rng, (11, 12), 3, 2, 1);
        let maps = score_pyramid(&model, &pyr, 2).unwrap();
        let root = model.aog.root();
        let mut checked = 0;
        for l in 0..pyr.len() {
            let Some(m) = maps.get(root, l) else { continue };
            for y in 0..m.score.height {
                for x in 0..m.score.width {
                    let p = Placement::new(l, x as i32, y as i32);
                    let a = score_at(&model, &pyr, p, 2).unwrap();
                    let v = m.score.get(x, y);
                    if !v.is_finite() {
                        assert!(!a.root_score().is_finite());
                        continue;
                    }
                    assert!((a.root_score() - v).abs() < 1e-9);
                    let t = a.tree(&model, &pyr, 2).unwrap();
                    let r = retrieve(&model, &maps, p).unwrap();
                    assert_eq!(t.nodes.len(), r.nodes.len());
                    for (u, w) in t.nodes.iter().zip(&r.nodes) {
                        assert_eq!(
                            (u.node, u.placement, u.displacement),
                            (w.node, w.placement, w.displacement)
                        );
                        assert!((u.score - w.score).abs() < 1e-9);
                    }
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }
}
