mod support;

use aogtrack_core::features::Frame;
use aogtrack_core::tracker::{RunningStats, TrackabilityMonitor, Tracker};
use aogtrack_core::{BBox, EngineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::textured_frame;

fn frame_with(obj: BBox) -> Frame {
    // same seed, so the same texture and background every time
    textured_frame(&mut ChaCha8Rng::seed_from_u64(4), 320, 240, obj)
}

fn tracker() -> Tracker {
    let obj = BBox::new(40.0, 40.0, 40.0, 36.0);
    Tracker::new(frame_with(obj), obj, EngineConfig::default()).unwrap()
}

#[test]
fn welford_matches_two_pass_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [2usize, 3, 10, 500] {
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..80.0)).collect();
        let mut s = RunningStats::default();
        xs.iter().for_each(|&x| s.push(x));
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((s.mean - mean).abs() <= 1e-9);
        assert!((s.std().unwrap() - var.sqrt()).abs() <= 1e-9);
    }
}

#[test]
fn monitor_uses_only_earlier_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut m = TrackabilityMonitor::new(5, 10);
    let mut seen: Vec<f64> = Vec::new();
    for _ in 0..200 {
        let v = if rng.gen_bool(0.05) {
            rng.gen_range(-20.0..0.0)
        } else {
            rng.gen_range(8.0..12.0)
        };
        let expect = seen.len() >= 2 && {
            let mean = seen.iter().sum::<f64>() / seen.len() as f64;
            let sd = (seen.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (seen.len() - 1) as f64).sqrt();
            v < mean - 3.0 * sd
        };
        assert_eq!(m.update(Some(v)), expect);
        seen.push(v);
    }
    // invalid frames are neither intrackable nor new samples
    let before = m.clone();
    assert!(!m.update(None));
    assert!(!m.update(Some(f64::NAN)));
    assert_eq!(m, before);
}

#[test]
fn object_inside_the_roi_is_found_there() {
    let mut t = tracker();
    let moved = BBox::new(45.0, 43.0, 40.0, 36.0);
    let r = t.track(frame_with(moved)).unwrap();
    assert!(r.result.valid);
    assert!(!r.result.searched_whole_frame);
    assert!(!r.candidates.is_empty());
    assert!(r.result.bbox.unwrap().iou(&moved) > 0.5, "{:?}", r.result.bbox);
}

#[test]
fn teleported_object_is_found_by_the_whole_frame_search() {
    let mut t = tracker();
    let far = BBox::new(250.0, 180.0, 40.0, 36.0);
    let r = t.track(frame_with(far)).unwrap();
    assert!(r.result.searched_whole_frame);
    assert!(r.result.valid);
    assert!(r.result.bbox.unwrap().iou(&far) > 0.5, "{:?}", r.result.bbox);
}

#[test]
fn blank_frame_is_invalid() {
    let mut t = tracker();
    let blank = image::Rgb32FImage::from_pixel(320, 240, image::Rgb([0.4, 0.4, 0.4]));
    let r = t.track(Frame::new(blank, true)).unwrap();
    assert!(!r.result.valid);
    assert!(r.result.bbox.is_none() && r.result.score.is_nan());
    assert!(r.result.searched_whole_frame);
}
