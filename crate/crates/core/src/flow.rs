//! Median-flow box prediction: pyramidal Lucas-Kanade on a point grid,
//! validated by forward-backward consistency and patch correlation.

use crate::config::FlowConfig;
use crate::features::Frame;
use crate::geometry::BBox;

/// Single-channel image with bilinear sampling, replicated borders.
#[derive(Debug, Clone)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn from_frame(frame: &Frame) -> GrayImage {
        GrayImage {
            width: frame.width() as usize,
            height: frame.height() as usize,
            data: frame.gray(),
        }
    }

    fn px(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let (fx, fy) = (x - x0, y - y0);
        let (xi, yi) = (x0 as isize, y0 as isize);
        let a = self.px(xi, yi) as f64;
        let b = self.px(xi + 1, yi) as f64;
        let c = self.px(xi, yi + 1) as f64;
        let d = self.px(xi + 1, yi + 1) as f64;
        a * (1.0 - fx) * (1.0 - fy) + b * fx * (1.0 - fy) + c * (1.0 - fx) * fy + d * fx * fy
    }

    /// Half-resolution copy, 2x2 box filtered.
    pub fn downsample(&self) -> GrayImage {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = (2 * x as isize, 2 * y as isize);
                let s = self.px(sx, sy) + self.px(sx + 1, sy) + self.px(sx, sy + 1) + self.px(sx + 1, sy + 1);
                data.push(s / 4.0);
            }
        }
        GrayImage {
            width: w,
            height: h,
            data,
        }
    }

    fn in_bounds(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }
}

/// Gaussian-style image pyramid, finest first.
pub fn image_pyramid(img: GrayImage, levels: usize) -> Vec<GrayImage> {
    let mut out = vec![img];
    while out.len() < levels.max(1) {
        let last = out.last().expect("non-empty");
        if last.width < 16 || last.height < 16 {
            break;
        }
        let next = last.downsample();
        out.push(next);
    }
    out
}

/// Tracks `p` from `from` to `to`. Returns the new position, or `None` when
/// the window is untextured or the point leaves the image.
pub fn lucas_kanade(from: &[GrayImage], to: &[GrayImage], p: (f64, f64), cfg: &FlowConfig) -> Option<(f64, f64)> {
    let levels = from.len().min(to.len());
    let r = cfg.window as isize;
    let mut g = (0.0, 0.0);
    for l in (0..levels).rev() {
        let s = 0.5f64.powi(l as i32);
        let (a, b) = (&from[l], &to[l]);
        let c = (p.0 * s, p.1 * s);
        let mut win = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (c.0 + dx as f64, c.1 + dy as f64);
                let ix = (a.sample(x + 1.0, y) - a.sample(x - 1.0, y)) / 2.0;
                let iy = (a.sample(x, y + 1.0) - a.sample(x, y - 1.0)) / 2.0;
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
                win.push((x, y, a.sample(x, y), ix, iy));
            }
        }
        let n = win.len() as f64;
        let det = gxx * gyy - gxy * gxy;
        let tr = gxx + gyy;
        let min_eig = (tr - ((gxx - gyy).powi(2) + 4.0 * gxy * gxy).sqrt()) / 2.0;
        if min_eig / n < 1e-7 || det.abs() < 1e-18 {
            return None;
        }
        let mut v = (0.0, 0.0);
        for _ in 0..cfg.iterations {
            let (mut bx, mut by) = (0.0, 0.0);
            for &(x, y, i, ix, iy) in &win {
                let e = i - b.sample(x + g.0 + v.0, y + g.1 + v.1);
                bx += e * ix;
                by += e * iy;
            }
            let eta = ((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
            v.0 += eta.0;
            v.1 += eta.1;
            if eta.0.abs() < 0.01 && eta.1.abs() < 0.01 {
                break;
            }
        }
        g = (g.0 + v.0, g.1 + v.1);
        if l > 0 {
            g = (2.0 * g.0, 2.0 * g.1);
        }
    }
    let q = (p.0 + g.0, p.1 + g.1);
    (q.0.is_finite() && q.1.is_finite() && to[0].in_bounds(q.0, q.1)).then_some(q)
}

/// Normalized cross-correlation of the patches around `p` in `a` and `q` in `b`.
pub fn patch_ncc(a: &GrayImage, p: (f64, f64), b: &GrayImage, q: (f64, f64), half: isize) -> f64 {
    let mut u = Vec::new();
    let mut v = Vec::new();
    for dy in -half..=half {
        for dx in -half..=half {
            u.push(a.sample(p.0 + dx as f64, p.1 + dy as f64));
            v.push(b.sample(q.0 + dx as f64, q.1 + dy as f64));
        }
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (x, y) in u.iter().zip(&v) {
        suv += (x - mu) * (y - mv);
        suu += (x - mu) * (x - mu);
        svv += (y - mv) * (y - mv);
    }
    if suu < 1e-12 || svv < 1e-12 {
        return if suu < 1e-12 && svv < 1e-12 { 1.0 } else { 0.0 };
    }
    suv / (suu * svv).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Box motion between two frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub dx: f64,
    pub dy: f64,
    pub scale: f64,
}

impl Motion {
    pub const IDENTITY: Motion = Motion {
        dx: 0.0,
        dy: 0.0,
        scale: 1.0,
    };

    pub fn apply(&self, b: &BBox) -> BBox {
        let (cx, cy) = b.center();
        BBox::from_center(cx + self.dx, cy + self.dy, b.w * self.scale, b.h * self.scale)
    }
}

/// Median flow of `bbox` from `prev` to `next`; `None` on failure.
///
/// A grid point is usable when it tracks both ways and its patches correlate
/// at least `min_ncc`. The estimate fails when fewer than `min_survivors` of
/// the grid is usable or the median forward-backward error exceeds
/// `max_fb_error`. Points with error above the median are discarded before
/// taking median displacement and median pairwise-distance ratio.
pub fn median_flow(prev: &[GrayImage], next: &[GrayImage], bbox: &BBox, cfg: &FlowConfig) -> Option<Motion> {
    let n = cfg.grid;
    let mut tracks = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let p = (
                bbox.x + bbox.w * (i as f64 + 0.5) / n as f64,
                bbox.y + bbox.h * (j as f64 + 0.5) / n as f64,
            );
            let Some(q) = lucas_kanade(prev, next, p, cfg) else {
                continue;
            };
            let Some(back) = lucas_kanade(next, prev, q, cfg) else {
                continue;
            };
            if patch_ncc(&prev[0], p, &next[0], q, 5) < cfg.min_ncc {
                continue;
            }
            let fb = ((back.0 - p.0).powi(2) + (back.1 - p.1).powi(2)).sqrt();
            tracks.push((p, q, fb));
        }
    }
    if (tracks.len() as f64) < cfg.min_survivors * (n * n) as f64 || tracks.is_empty() {
        return None;
    }
    let med_fb = median(tracks.iter().map(|t| t.2).collect());
    if med_fb > cfg.max_fb_error {
        return None;
    }
    let kept: Vec<_> = tracks.into_iter().filter(|t| t.2 <= med_fb).collect();
    let dx = median(kept.iter().map(|(p, q, _)| q.0 - p.0).collect());
    let dy = median(kept.iter().map(|(p, q, _)| q.1 - p.1).collect());
    let mut ratios = Vec::new();
    for a in 0..kept.len() {
        for b in a + 1..kept.len() {
            let (p1, q1, _) = kept[a];
            let (p2, q2, _) = kept[b];
            let dp = ((p1.0 - p2.0).powi(2) + (p1.1 - p2.1).powi(2)).sqrt();
            let dq = ((q1.0 - q2.0).powi(2) + (q1.1 - q2.1).powi(2)).sqrt();
            if dp > 1e-9 {
                ratios.push(dq / dp);
            }
        }
    }
    let scale = if ratios.is_empty() { 1.0 } else { median(ratios) };
    Some(Motion { dx, dy, scale })
}

/// Convenience wrapper building pyramids from frames.
pub fn median_flow_predict(prev: &Frame, next: &Frame, bbox: &BBox, cfg: &FlowConfig) -> Option<BBox> {
    if prev.width() != next.width() || prev.height() != next.height() {
        return None;
    }
    let a = image_pyramid(GrayImage::from_frame(prev), cfg.pyramid_levels);
    let b = image_pyramid(GrayImage::from_frame(next), cfg.pyramid_levels);
    median_flow(&a, &b, bbox, cfg).map(|m| m.apply(bbox))
}
