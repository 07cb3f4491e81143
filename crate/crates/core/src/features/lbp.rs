//! Uniform local binary patterns (8 neighbors, radius 1), 59-bin histograms
//! per cell.

use std::sync::OnceLock;

use super::{FeatureMap, Frame};

pub const LBP_DIMS: usize = 59;
pub const LBP_NON_UNIFORM_BIN: usize = 58;

// clockwise from the top-left neighbor
const NEIGHBORS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_left(1)).count_ones()
}

/// Histogram bin of every 8-bit code: uniform codes (at most two circular
/// transitions) get bins 0..58 in increasing code order, the rest share 58.
fn bin_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [LBP_NON_UNIFORM_BIN as u8; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            if transitions(code) <= 2 {
                table[code as usize] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next as usize, LBP_NON_UNIFORM_BIN);
        table
    })
}

pub fn lbp_cells(frame: &Frame, cell_size: usize) -> FeatureMap {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let (cw, ch) = (w / cell_size, h / cell_size);
    let gray = frame.gray();
    // Compare on 8-bit gray levels. Resampling leaves float noise in flat
    // regions that would otherwise flip bits at random.
    let at = |x: i64, y: i64| {
        let x = x.clamp(0, w as i64 - 1) as usize;
        let y = y.clamp(0, h as i64 - 1) as usize;
        (gray[y * w + x] * 255.0).round() as i32
    };
    let table = bin_table();
    let mut out = FeatureMap::zeros(cw, ch, LBP_DIMS);
    let mut mass = vec![0f32; cw * ch];
    let sbin = cell_size as f32;
    for y in 0..ch * cell_size {
        for x in 0..cw * cell_size {
            let center = at(x as i64, y as i64);
            let mut code = 0u8;
            for (bit, (dx, dy)) in NEIGHBORS.iter().enumerate() {
                if at(x as i64 + dx, y as i64 + dy) > center {
                    code |= 1 << bit;
                }
            }
            let bin = table[code as usize] as usize;
            // bilinear vote, as for the gradient histograms
            let xpos = (x as f32 + 0.5) / sbin - 0.5;
            let ypos = (y as f32 + 0.5) / sbin - 0.5;
            let (fx, fy) = (xpos.floor(), ypos.floor());
            let (vx, vy) = (xpos - fx, ypos - fy);
            let (ix, iy) = (fx as i64, fy as i64);
            for (cx, wx) in [(ix, 1.0 - vx), (ix + 1, vx)] {
                if cx < 0 || cx >= cw as i64 {
                    continue;
                }
                for (cy, wy) in [(iy, 1.0 - vy), (iy + 1, vy)] {
                    if cy < 0 || cy >= ch as i64 {
                        continue;
                    }
                    let (cx, cy) = (cx as usize, cy as usize);
                    out.cell_mut(cx, cy)[bin] += wx * wy;
                    mass[cy * cw + cx] += wx * wy;
                }
            }
        }
    }
    for cy in 0..ch {
        for cx in 0..cw {
            let m = mass[cy * cw + cx];
            if m > 0.0 {
                out.cell_mut(cx, cy).iter_mut().for_each(|v| *v /= m);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_eight_uniform_codes() {
        assert_eq!((0..=255u8).filter(|&c| transitions(c) <= 2).count(), 58);
        assert_eq!(bin_table()[0], 0);
        assert_eq!(bin_table()[0b0101_0101], LBP_NON_UNIFORM_BIN as u8);
    }

    #[test]
    fn constant_image_fills_zero_pattern_bin() {
        let map = lbp_cells(&Frame::from_gray(12, 8, &[0.3; 96]), 4);
        for y in 0..map.height {
            for x in 0..map.width {
                let c = map.cell(x, y);
                assert!((c[0] - 1.0).abs() < 1e-6);
                assert!(c[1..].iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn histograms_are_normalized() {
        let data: Vec<f32> = (0..20 * 16).map(|i| ((i * 37) % 11) as f32 / 11.0).collect();
        let map = lbp_cells(&Frame::from_gray(20, 16, &data), 4);
        for y in 0..map.height {
            for x in 0..map.width {
                let s: f32 = map.cell(x, y).iter().sum();
                assert!((s - 1.0).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn pixel_checkerboard() {
        let data: Vec<f32> = (0..16 * 16)
            .map(|i| if (i % 16 + i / 16) % 2 == 0 { 1.0 } else { 0.0 })
            .collect();
        let map = lbp_cells(&Frame::from_gray(16, 16, &data), 4);
        // Dark centers see four brighter edge neighbors (alternating code,
        // non-uniform); bright centers see nothing brighter (code 0).
        let c = map.cell(1, 1);
        assert!((c[LBP_NON_UNIFORM_BIN] - 0.5).abs() < 1e-6);
        assert!((c[0] - 0.5).abs() < 1e-6);
    }
}
