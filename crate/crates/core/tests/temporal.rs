mod support;

use aogtrack_core::tracker::{path_energy, temporal_dp, DpFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::brute_force_path;

/// A random window of `delta_t` frames: some invalid, each valid frame with
/// 1..=10 candidates, and a transition table with a share of forbidden
/// (infinite) edges.
fn random_case(rng: &mut ChaCha8Rng, delta_t: usize, p_inf: f64) -> (Vec<DpFrame>, Vec<Vec<Vec<f64>>>) {
    let frames: Vec<DpFrame> = (0..delta_t)
        .map(|_| {
            if rng.gen_bool(0.15) {
                DpFrame::default()
            } else {
                let n = rng.gen_range(1..=10);
                DpFrame::new((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect())
            }
        })
        .collect();
    // table[i*delta_t + j][a][b], only read for consecutive valid i, j
    let table = (0..delta_t * delta_t)
        .map(|_| {
            (0..10)
                .map(|_| {
                    (0..10)
                        .map(|_| {
                            if rng.gen_bool(p_inf) {
                                f64::INFINITY
                            } else {
                                rng.gen_range(0.0..4.0)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    (frames, table)
}

fn scores_of(frames: &[DpFrame]) -> Vec<Option<Vec<f64>>> {
    frames
        .iter()
        .map(|f| {
            if !f.is_valid() {
                return None;
            }
            // an anchor is the same as a frame with one candidate, but the
            // index must survive, so mask the others with -inf scores
            Some(
                f.scores
                    .iter()
                    .enumerate()
                    .map(|(a, &s)| {
                        if f.anchor.is_none_or(|k| k == a) {
                            s
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect(),
            )
        })
        .collect()
}

fn check(frames: &[DpFrame], table: &[Vec<Vec<f64>>], delta_t: usize) -> bool {
    let cost = |i: usize, a: usize, j: usize, b: usize| table[i * delta_t + j][a][b];
    let oracle = brute_force_path(&scores_of(frames), &cost);
    let got = temporal_dp(frames, cost);
    for (j, c) in got.choice.iter().enumerate() {
        assert_eq!(c.is_some(), frames[j].is_valid());
        if let (Some(c), Some(k)) = (c, frames[j].anchor) {
            assert_eq!(*c, k);
        }
    }
    if oracle.is_finite() {
        assert!(!got.low_confidence);
        assert!((got.energy - oracle).abs() < 1e-9, "{} vs {oracle}", got.energy);
        let e = path_energy(frames, &got.choice, cost);
        assert!((e - oracle).abs() < 1e-9);
        false
    } else {
        assert!(got.low_confidence);
        assert_eq!(got.energy, f64::INFINITY);
        true
    }
}

#[test]
fn temporal_dp_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let delta_t = 5;
    let (mut with_inf, mut with_invalid, mut infeasible) = (0, 0, 0);
    for case in 0..300 {
        let p_inf = [0.0, 0.1, 0.4, 0.9][case % 4];
        let (mut frames, table) = random_case(&mut rng, delta_t, p_inf);
        if case % 5 == 0 {
            // anchor the first valid frame, as the tracker does with its
            // committed result
            if let Some(f) = frames.iter_mut().find(|f| f.is_valid()) {
                f.anchor = Some(rng.gen_range(0..f.scores.len()));
            }
        }
        if p_inf > 0.0 {
            with_inf += 1;
        }
        if frames.iter().any(|f| !f.is_valid()) {
            with_invalid += 1;
        }
        if check(&frames, &table, delta_t) {
            infeasible += 1;
        }
    }
    assert!(
        with_inf >= 100 && with_invalid >= 50 && infeasible >= 10,
        "{with_inf} {with_invalid} {infeasible}"
    );
}

#[test]
fn all_invalid_window_is_empty() {
    let frames = vec![DpFrame::default(); 5];
    let p = temporal_dp(&frames, |_, _, _, _| 0.0);
    assert!(p.choice.iter().all(Option::is_none));
    assert_eq!(p.energy, 0.0);
}
