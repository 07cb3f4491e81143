//! Independent reference implementations used as test oracles. Nothing here
//! calls the DP code it checks.
#![allow(dead_code)]

use aogtrack_core::aog::{AndKind, Aog, NodeId, NodeKind};
use aogtrack_core::config::FeatureConfig;
use aogtrack_core::features::{FeatureMap, FeaturePyramid};
use aogtrack_core::model::Model;
use aogtrack_core::parser::{BlockKind, ScoreMap, TemplateGeometry};
use rand::Rng;

pub fn random_map<R: Rng>(rng: &mut R, w: usize, h: usize, c: usize) -> FeatureMap {
    let data = (0..w * h * c).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    FeatureMap::from_vec(w, h, c, data)
}

pub fn random_score_map<R: Rng>(rng: &mut R, w: usize, h: usize) -> ScoreMap {
    ScoreMap::from_vec(w, h, (0..w * h).map(|_| rng.gen_range(-5.0..5.0)).collect())
}

/// Levels shrinking roughly by `2^(-1/interval)`, finest first.
pub fn random_pyramid<R: Rng>(
    rng: &mut R,
    base: (usize, usize),
    levels: usize,
    c: usize,
    interval: usize,
) -> FeaturePyramid {
    let maps = (0..levels)
        .map(|l| {
            let f = 2f64.powf(-(l as f64) / interval as f64);
            let w = ((base.0 as f64 * f).round() as usize).max(1);
            let h = ((base.1 as f64 * f).round() as usize).max(1);
            random_map(rng, w, h, c)
        })
        .collect();
    FeaturePyramid::from_levels(maps, 4, interval)
}

/// Full AOG of `grid` with every parameter drawn at random; quadratic
/// deformation weights stay positive.
pub fn random_model<R: Rng>(
    rng: &mut R,
    grid: (u32, u32),
    unit: (usize, usize),
    c: usize,
    offset: usize,
    interval: usize,
) -> Model {
    let aog = Aog::build_full(grid, (1, 1), 0.0).unwrap();
    let t = TemplateGeometry::new(grid, unit, offset);
    let features = FeatureConfig {
        interval,
        ..FeatureConfig::default()
    };
    let mut m = Model::new(aog, t, c, features, 0.01);
    for b in m.params.layout.blocks.clone().into_iter().flatten() {
        for k in 0..b.len {
            let v = &mut m.params.values[b.offset + k];
            *v = match b.kind {
                BlockKind::Deformation if k % 2 == 0 => rng.gen_range(0.01..0.5),
                BlockKind::Deformation => rng.gen_range(-0.3..0.3),
                _ => rng.gen_range(-1.0..1.0),
            };
        }
    }
    m
}

/// `<w, crop>` by explicit loops; `None` when the window leaves the map.
pub fn crop_dot(level: &FeatureMap, w: &[f64], x: i64, y: i64, ew: usize, eh: usize) -> Option<f64> {
    if x < 0 || y < 0 || x as usize + ew > level.width || y as usize + eh > level.height {
        return None;
    }
    let c = level.channels;
    let mut s = 0.0;
    for yy in 0..eh {
        for xx in 0..ew {
            let cell = level.cell(x as usize + xx, y as usize + yy);
            for k in 0..c {
                s += cell[k] as f64 * w[(yy * ew + xx) * c + k];
            }
        }
    }
    Some(s)
}

/// Naive bounded local max of a map under a quadratic penalty.
pub fn naive_local_max(m: &ScoreMap, theta: [f64; 4], r: i64) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 0..m.height as i64 {
        for x in 0..m.width as i64 {
            let mut best = f64::NEG_INFINITY;
            for dy in -r..=r {
                for dx in -r..=r {
                    if let Some(v) = m.at(x + dx, y + dy) {
                        let (fx, fy) = (dx as f64, dy as f64);
                        best = best.max(v - (theta[0] * fx * fx + theta[1] * fx + theta[2] * fy * fy + theta[3] * fy));
                    }
                }
            }
            out.push(best);
        }
    }
    out
}

/// Scores of every parse tree below `id` placed at `(level, x, y)`, listed
/// tree by tree. Each part terminal takes its best displacement, which is
/// exact because the tree score is a sum of per-terminal terms.
fn tree_scores(m: &Model, pyr: &FeaturePyramid, id: NodeId, level: usize, x: i64, y: i64, r: i64) -> Vec<f64> {
    let aog = &m.aog;
    let t = &m.template;
    let node = aog.node(id);
    let unit = t.unit;
    let f = |n: NodeId| if t.on_object_level(aog, n) { 1 } else { t.part_factor() };
    match node.kind {
        NodeKind::Terminal => {
            let (ew, eh) = (
                node.region.w as usize * unit.0 * f(id),
                node.region.h as usize * unit.1 * f(id),
            );
            vec![crop_dot(&pyr.levels[level], m.params.appearance(id), x, y, ew, eh).unwrap_or(f64::NEG_INFINITY)]
        }
        NodeKind::And(AndKind::Termination) => tree_scores(m, pyr, node.children[0].0, level, x, y, r),
        NodeKind::And(AndKind::Deformation) => {
            let th = m.params.deformation(id);
            let mut best = f64::NEG_INFINITY;
            for dy in -r..=r {
                for dx in -r..=r {
                    let s = tree_scores(m, pyr, node.children[0].0, level, x + dx, y + dy, r)[0];
                    let (fx, fy) = (dx as f64, dy as f64);
                    best = best.max(s - (th[0] * fx * fx + th[1] * fx + th[2] * fy * fy + th[3] * fy));
                }
            }
            // the anchor itself must be a valid placement
            let anchor = tree_scores(m, pyr, node.children[0].0, level, x, y, r)[0];
            vec![if anchor.is_finite() { best } else { f64::NEG_INFINITY }]
        }
        NodeKind::And(AndKind::Decomposition { .. }) => {
            let mut acc = vec![0.0];
            for &(c, _) in &node.children {
                let cr = aog.node(c).region;
                let ox = (cr.x - node.region.x) as i64 * (unit.0 * f(c)) as i64;
                let oy = (cr.y - node.region.y) as i64 * (unit.1 * f(c)) as i64;
                let sub = tree_scores(m, pyr, c, level, x + ox, y + oy, r);
                acc = acc.iter().flat_map(|a| sub.iter().map(move |s| a + s)).collect();
            }
            acc
        }
        NodeKind::Or => {
            let mut out = Vec::new();
            for c in node.child_ids() {
                let descend = t.on_object_level(aog, id) && !t.on_object_level(aog, c) && t.part_level_offset > 0;
                let sub = if descend {
                    if level < t.part_level_offset {
                        vec![f64::NEG_INFINITY]
                    } else {
                        tree_scores(m, pyr, c, level - t.part_level_offset, 2 * x, 2 * y, r)
                    }
                } else {
                    tree_scores(m, pyr, c, level, x, y, r)
                };
                let b = m.params.bias(c);
                out.extend(sub.into_iter().map(|s| s + b));
            }
            out
        }
    }
}

/// Best score over all parse trees and all root placements by enumeration.
pub fn brute_force_best(m: &Model, pyr: &FeaturePyramid, r: usize) -> f64 {
    let (ow, oh) = m.template.object_cells();
    let mut best = f64::NEG_INFINITY;
    for level in m.template.part_level_offset..pyr.levels.len() {
        let lv = &pyr.levels[level];
        if lv.width < ow || lv.height < oh {
            continue;
        }
        for y in 0..=(lv.height - oh) as i64 {
            for x in 0..=(lv.width - ow) as i64 {
                for s in tree_scores(m, pyr, m.aog.root(), level, x, y, r as i64) {
                    best = best.max(s);
                }
            }
        }
    }
    best
}

/// Minimum path energy by enumerating every path; `None` frames are
/// skipped and the cost bridges their valid neighbours.
pub fn brute_force_path(scores: &[Option<Vec<f64>>], cost: &dyn Fn(usize, usize, usize, usize) -> f64) -> f64 {
    let valid: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_some()).collect();
    if valid.is_empty() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    let mut choice = vec![0usize; valid.len()];
    loop {
        let mut e = 0.0;
        for (k, &f) in valid.iter().enumerate() {
            e -= scores[f].as_ref().unwrap()[choice[k]];
            if k > 0 {
                e += cost(valid[k - 1], choice[k - 1], f, choice[k]);
            }
        }
        if e < best {
            best = e;
        }
        let mut k = 0;
        loop {
            if k == valid.len() {
                return best;
            }
            choice[k] += 1;
            if choice[k] < scores[valid[k]].as_ref().unwrap().len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

/// A smooth, mildly cluttered background with a block-textured rectangle
/// inside `obj`.
pub fn textured_frame<R: Rng>(rng: &mut R, w: u32, h: u32, obj: aogtrack_core::BBox) -> aogtrack_core::features::Frame {
    let colors: Vec<[f32; 3]> = (0..16).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let phase: f64 = rng.gen_range(0.0..6.0);
    let img = image::Rgb32FImage::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
        if fx >= obj.x && fx < obj.right() && fy >= obj.y && fy < obj.bottom() {
            let i = ((fx - obj.x) / obj.w * 4.0) as usize;
            let j = ((fy - obj.y) / obj.h * 4.0) as usize;
            return image::Rgb(colors[j.min(3) * 4 + i.min(3)]);
        }
        let v = (0.5 + 0.2 * ((fx * 0.07 + phase).sin() * (fy * 0.05).cos())) as f32;
        image::Rgb([v, 0.9 * v, 0.8 * v + 0.1])
    });
    aogtrack_core::features::Frame::new(img, true)
}

/// Dense class-balanced hinge SVM solved in the dual by accelerated
/// projected gradient ascent. Returns a dual lower bound on the optimum.
pub fn svm_dual_lower_bound(pos: &[Vec<f64>], neg: &[Vec<f64>], c: f64, iters: usize) -> f64 {
    let n = pos.len() + neg.len();
    let xs: Vec<(&Vec<f64>, f64, f64)> = pos
        .iter()
        .map(|x| (x, 1.0, c * n as f64 / (2 * pos.len()) as f64))
        .chain(neg.iter().map(|x| (x, -1.0, c * n as f64 / (2 * neg.len()) as f64)))
        .collect();
    let gram: Vec<Vec<f64>> = xs
        .iter()
        .map(|(a, ya, _)| {
            xs.iter()
                .map(|(b, yb, _)| ya * yb * a.iter().zip(b.iter()).map(|(p, q)| p * q).sum::<f64>())
                .collect()
        })
        .collect();
    // Lipschitz constant of the dual gradient, bounded by the trace
    let l: f64 = (0..n).map(|i| gram[i][i]).sum::<f64>().max(1e-12);
    let dual = |a: &[f64]| {
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += a[i] * a[j] * gram[i][j];
            }
        }
        a.iter().sum::<f64>() - 0.5 * q
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g: Vec<f64> = (0..n)
            .map(|i| 1.0 - (0..n).map(|j| gram[i][j] * z[j]).sum::<f64>())
            .collect();
        let next: Vec<f64> = (0..n).map(|i| (z[i] + g[i] / l).clamp(0.0, xs[i].2)).collect();
        let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = (0..n).map(|i| next[i] + (t - 1.0) / tn * (next[i] - a[i])).collect();
        a = next;
        t = tn;
    }
    dual(&a)
}
