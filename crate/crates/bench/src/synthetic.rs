//! A generated test sequence with known ground truth: a textured rectangle
//! moving over a cluttered background, with a full occlusion, an exit from
//! the frame and an appearance change.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::Arc;

use aogtrack_core::features::Frame;
use aogtrack_core::{BBox, Error, Result};
use image::Rgb32FImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sequence::{FrameSource, Sequence};

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    /// Object size at scale 1.
    pub size: (f64, f64),
    /// Frames where an occluder covers the object completely.
    pub occluded: RangeInclusive<usize>,
    /// Frames where the object is outside the image.
    pub off_screen: RangeInclusive<usize>,
    /// First frame drawn with the second texture.
    pub texture_switch: usize,
    /// Block columns, counted from the right, that get fresh random colours
    /// on every frame from the switch on.
    pub switch_columns: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            width: 320,
            height: 240,
            frames: 100,
            size: (48.0, 40.0),
            occluded: 40..=50,
            off_screen: 70..=75,
            texture_switch: 60,
            switch_columns: 2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub sequence: Sequence,
    /// Object centre and scale per frame, also where it is hidden.
    pub path: Vec<((f64, f64), f64)>,
    /// Whether any of the object can be seen.
    pub visible: Vec<bool>,
    pub spec: SyntheticSpec,
}

/// Velocity per frame: piecewise constant, at most 8 px per frame.
fn velocity(t: usize) -> (f64, f64) {
    match t {
        0..=20 => (5.0, 2.0),
        21..=38 => (2.0, -3.0),
        39..=52 => (-7.0, 3.5),
        53..=69 => (-3.0, -2.0),
        _ => (-4.0, -1.0),
    }
}

/// Centre and scale at each frame. After leaving the image the object comes
/// back at the far side.
fn path(spec: &SyntheticSpec) -> Vec<((f64, f64), f64)> {
    let mut c = (90.0, 80.0);
    let mut out = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        if t > 0 {
            let v = velocity(t);
            c = (c.0 + v.0, c.1 + v.1);
        }
        if t == *spec.off_screen.end() + 1 {
            c = (spec.width as f64 - 70.0, spec.height as f64 - 70.0);
        }
        let s = 1.0 + 0.2 * (2.0 * std::f64::consts::PI * t as f64 / 50.0).sin();
        out.push((c, s));
    }
    out
}

#[derive(Clone)]
struct Texture {
    blocks: usize,
    colors: Vec<[f32; 3]>,
}

impl Texture {
    fn random(rng: &mut ChaCha8Rng, blocks: usize) -> Texture {
        let colors = (0..blocks * blocks)
            .map(|_| {
                let v: f32 = rng.gen_range(0.0..1.0);
                let hue: f32 = rng.gen_range(0.0..1.0);
                [v, (1.0 - v) * hue + 0.2 * v, 1.0 - 0.8 * hue]
            })
            .collect();
        Texture { blocks, colors }
    }

    fn at(&self, u: f64, v: f64) -> [f32; 3] {
        let n = self.blocks;
        let i = ((u * n as f64) as usize).min(n - 1);
        let j = ((v * n as f64) as usize).min(n - 1);
        self.colors[j * n + i]
    }
}

fn background(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Vec<[f32; 3]> {
    // smooth gradients plus a few dim blobs as clutter
    let blobs: Vec<(f64, f64, f64, f32)> = (0..25)
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(6.0..20.0),
                rng.gen_range(-0.15..0.15),
            )
        })
        .collect();
    let mut px = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let mut v = 0.45 + 0.08 * ((fx * 0.03).sin() * (fy * 0.045).cos()) as f32;
            for &(bx, by, r, a) in &blobs {
                let d2 = (fx - bx).powi(2) + (fy - by).powi(2);
                v += a * (-d2 / (2.0 * r * r)).exp() as f32;
            }
            px.push([v, 0.9 * v + 0.05, 0.8 * v + 0.1]);
        }
    }
    px
}

pub fn synthetic_sequence(spec: &SyntheticSpec) -> SyntheticSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bg = background(&mut rng, spec.width, spec.height);
    let first = Texture::random(&mut rng, 6);
    let path = path(spec);
    let (w, h) = (spec.width, spec.height);
    let mut frames = Vec::with_capacity(spec.frames);
    let mut ground_truth = Vec::with_capacity(spec.frames);
    let mut visible = Vec::with_capacity(spec.frames);
    for (t, &((cx, cy), s)) in path.iter().enumerate() {
        let obj = BBox::from_center(cx, cy, spec.size.0 * s, spec.size.1 * s);
        let off = spec.off_screen.contains(&t);
        let occluded = spec.occluded.contains(&t);
        let mut tex = first.clone();
        if t >= spec.texture_switch {
            let fresh = Texture::random(&mut rng, 6);
            let from = 6 - spec.switch_columns.min(6);
            for (i, c) in tex.colors.iter_mut().enumerate() {
                if i % 6 >= from {
                    *c = fresh.colors[i];
                }
            }
        }
        let occluder = BBox::from_center(cx, cy, obj.w + 24.0, obj.h + 24.0);
        let img = Rgb32FImage::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut p = bg[(y * w + x) as usize];
            if !off && fx >= obj.x && fx < obj.right() && fy >= obj.y && fy < obj.bottom() {
                p = tex.at((fx - obj.x) / obj.w, (fy - obj.y) / obj.h);
            }
            if occluded && fx >= occluder.x && fx < occluder.right() && fy >= occluder.y && fy < occluder.bottom() {
                p = [0.35, 0.35, 0.38];
            }
            image::Rgb(p.map(|c| c.clamp(0.0, 1.0)))
        });
        frames.push(FrameSource::Memory(Arc::new(Frame::new(img, true))));
        ground_truth.push((!off).then_some(obj));
        visible.push(!off && !occluded);
    }
    let attributes: BTreeSet<String> = ["OCC", "OV", "SV", "FM"].iter().map(|s| s.to_string()).collect();
    SyntheticSequence {
        sequence: Sequence {
            name: format!("synthetic-{}", spec.seed),
            frames,
            ground_truth,
            attributes,
        },
        path,
        visible,
        spec: spec.clone(),
    }
}

/// Writes `seq` as a TB-format directory: `img/0001.png`, ...,
/// `groundtruth_rect.txt` with 1-based boxes (`0,0,0,0` where the object is
/// absent) and `attributes.txt`.
pub fn write_tb(seq: &Sequence, dir: &Path) -> Result<()> {
    let img = dir.join("img");
    std::fs::create_dir_all(&img).map_err(|e| Error::io(&img, e))?;
    let mut gt = String::new();
    for i in 0..seq.len() {
        let f = seq.frame(i)?;
        image::DynamicImage::ImageRgb32F(f.image)
            .to_rgb8()
            .save(img.join(format!("{:04}.png", i + 1)))?;
        match seq.ground_truth[i] {
            Some(b) => gt += &format!("{},{},{},{}\n", b.x + 1.0, b.y + 1.0, b.w, b.h),
            None => gt += "0,0,0,0\n",
        }
    }
    let p = dir.join("groundtruth_rect.txt");
    std::fs::write(&p, gt).map_err(|e| Error::io(&p, e))?;
    let attrs: Vec<&str> = seq.attributes.iter().map(String::as_str).collect();
    let p = dir.join("attributes.txt");
    std::fs::write(&p, attrs.join(",") + "\n").map_err(|e| Error::io(&p, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motion_and_scale_stay_in_bounds() {
        let spec = SyntheticSpec::default();
        let s = synthetic_sequence(&spec);
        assert_eq!(s.sequence.len(), 100);
        for t in 1..spec.frames {
            let ((x0, y0), _) = s.path[t - 1];
            let ((x1, y1), sc) = s.path[t];
            if t != *spec.off_screen.end() + 1 {
                assert!(((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt() <= 8.0 + 1e-9);
            }
            assert!((0.8 - 1e-9..=1.2 + 1e-9).contains(&sc));
        }
        for (t, gt) in s.sequence.ground_truth.iter().enumerate() {
            if let Some(b) = gt {
                assert!(
                    b.x >= 0.0 && b.y >= 0.0 && b.right() <= 320.0 && b.bottom() <= 240.0,
                    "{t} {b:?}"
                );
            }
            assert_eq!(gt.is_none(), spec.off_screen.contains(&t));
        }
        assert_eq!(s.visible.iter().filter(|v| !**v).count(), 11 + 6);
    }
}
