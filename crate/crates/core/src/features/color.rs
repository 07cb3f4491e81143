//! Joint RGB histograms, 4 bins per channel.

use super::{FeatureMap, Frame};

pub const COLOR_DIMS: usize = 64;

fn bin(v: f32) -> usize {
    ((v * 4.0).floor() as i64).clamp(0, 3) as usize
}

pub fn color_cells(frame: &Frame, cell_size: usize) -> FeatureMap {
    let (cw, ch) = (frame.width() as usize / cell_size, frame.height() as usize / cell_size);
    let mut out = FeatureMap::zeros(cw, ch, COLOR_DIMS);
    let norm = 1.0 / (cell_size * cell_size) as f32;
    for y in 0..ch * cell_size {
        for x in 0..cw * cell_size {
            let p = frame.image.get_pixel(x as u32, y as u32);
            let b = bin(p[0]) * 16 + bin(p[1]) * 4 + bin(p[2]);
            out.cell_mut(x / cell_size, y / cell_size)[b] += norm;
        }
    }
    out
}
