//! 31-dimensional HOG cells in the deformable-part-model layout: 18
//! contrast-sensitive orientations, 9 contrast-insensitive orientations and
//! 4 gradient-energy channels, each cell normalized against its four 2x2
//! neighborhoods with truncation at 0.2.

use super::{FeatureMap, Frame};

pub const HOG_DIMS: usize = 31;

const ORIENTATIONS: usize = 9;
const TRUNCATION: f32 = 0.2;
const EPS: f32 = 1e-4;

// unit vectors of the 9 orientation bins over [0, pi)
const UU: [f32; 9] = [
    1.0000, 0.9397, 0.7660, 0.5000, 0.1736, -0.1736, -0.5000, -0.7660, -0.9397,
];
const VV: [f32; 9] = [0.0000, 0.3420, 0.6428, 0.8660, 0.9848, 0.9848, 0.8660, 0.6428, 0.3420];

pub fn hog_cells(frame: &Frame, cell_size: usize) -> FeatureMap {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let (cw, ch) = (w / cell_size, h / cell_size);
    let img = &frame.image;
    let px = |x: usize, y: usize, c: usize| img.get_pixel(x as u32, y as u32)[c] * 255.0;

    let mut hist = vec![0f32; cw * ch * 2 * ORIENTATIONS];
    let channels = if frame.is_color { 3 } else { 1 };
    let sbin = cell_size as f32;

    for y in 0..ch * cell_size {
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..cw * cell_size {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            // strongest gradient over the color channels
            let (mut dx, mut dy, mut mag2) = (0f32, 0f32, -1f32);
            for c in 0..channels {
                let gx = px(xp, y, c) - px(xm, y, c);
                let gy = px(x, yp, c) - px(x, ym, c);
                let m = gx * gx + gy * gy;
                if m > mag2 {
                    (dx, dy, mag2) = (gx, gy, m);
                }
            }
            if mag2 <= 0.0 {
                continue;
            }
            let mut best_dot = 0f32;
            let mut best_o = 0usize;
            for o in 0..ORIENTATIONS {
                let dot = UU[o] * dx + VV[o] * dy;
                if dot > best_dot {
                    best_dot = dot;
                    best_o = o;
                } else if -dot > best_dot {
                    best_dot = -dot;
                    best_o = o + ORIENTATIONS;
                }
            }
            let mag = mag2.sqrt();

            // bilinear vote into the four surrounding cells
            let xpos = (x as f32 + 0.5) / sbin - 0.5;
            let ypos = (y as f32 + 0.5) / sbin - 0.5;
            let ix = xpos.floor();
            let iy = ypos.floor();
            let vx0 = xpos - ix;
            let vy0 = ypos - iy;
            let (ix, iy) = (ix as i64, iy as i64);
            for (cx, wx) in [(ix, 1.0 - vx0), (ix + 1, vx0)] {
                if cx < 0 || cx >= cw as i64 {
                    continue;
                }
                for (cy, wy) in [(iy, 1.0 - vy0), (iy + 1, vy0)] {
                    if cy < 0 || cy >= ch as i64 {
                        continue;
                    }
                    let cell = cy as usize * cw + cx as usize;
                    hist[cell * 2 * ORIENTATIONS + best_o] += wx * wy * mag;
                }
            }
        }
    }

    // gradient energy per cell
    let energy: Vec<f32> = (0..cw * ch)
        .map(|cell| {
            let hc = &hist[cell * 2 * ORIENTATIONS..(cell + 1) * 2 * ORIENTATIONS];
            (0..ORIENTATIONS)
                .map(|o| {
                    let s = hc[o] + hc[o + ORIENTATIONS];
                    s * s
                })
                .sum()
        })
        .collect();
    let e = |x: i64, y: i64| {
        let x = x.clamp(0, cw as i64 - 1) as usize;
        let y = y.clamp(0, ch as i64 - 1) as usize;
        energy[y * cw + x]
    };

    let mut out = FeatureMap::zeros(cw, ch, HOG_DIMS);
    for cy in 0..ch {
        for cx in 0..cw {
            let (x, y) = (cx as i64, cy as i64);
            let block =
                |x0: i64, y0: i64| 1.0 / (e(x0, y0) + e(x0 + 1, y0) + e(x0, y0 + 1) + e(x0 + 1, y0 + 1) + EPS).sqrt();
            let norms = [block(x, y), block(x, y - 1), block(x - 1, y), block(x - 1, y - 1)];
            let hc = &hist[(cy * cw + cx) * 2 * ORIENTATIONS..(cy * cw + cx + 1) * 2 * ORIENTATIONS];
            let dst = out.cell_mut(cx, cy);
            let mut texture = [0f32; 4];
            for o in 0..2 * ORIENTATIONS {
                let mut sum = 0.0;
                for (k, n) in norms.iter().enumerate() {
                    let v = (hc[o] * n).min(TRUNCATION);
                    sum += v;
                    texture[k] += v;
                }
                dst[o] = 0.5 * sum;
            }
            for o in 0..ORIENTATIONS {
                let s = hc[o] + hc[o + ORIENTATIONS];
                dst[2 * ORIENTATIONS + o] = 0.5 * norms.iter().map(|n| (s * n).min(TRUNCATION)).sum::<f32>();
            }
            for k in 0..4 {
                dst[3 * ORIENTATIONS + k] = 0.2357 * texture[k];
            }
        }
    }
    out
}
