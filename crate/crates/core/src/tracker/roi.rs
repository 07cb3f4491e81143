use crate::error::{Error, Result};
use crate::features::{build_levels_in, build_pyramid_in, FeaturePyramid, Frame, PyramidParams};
use crate::geometry::BBox;
use crate::model::Model;

/// Square search region of side `s_roi * max(w, h)` centred on `prev`,
/// clipped to the frame.
pub fn compute_roi(prev: &BBox, frame_w: f64, frame_h: f64, s_roi: f64) -> Option<BBox> {
    let (cx, cy) = prev.center();
    let side = s_roi * prev.w.max(prev.h);
    BBox::from_center(cx, cy, side, side).clip(frame_w, frame_h)
}

fn search_layout(model: &Model, prev: &BBox, scale_levels: usize) -> Result<((f64, f64), PyramidParams)> {
    if !prev.is_valid() {
        return Err(Error::InvalidInput(format!("search box {prev:?} is degenerate")));
    }
    let f = &model.features;
    let off = model.template.part_level_offset;
    let prescale = model
        .template
        .prescale_for(prev, f.cell_size, f.interval, off + scale_levels);
    let mut params = model.pyramid_params();
    params.max_levels = off + 2 * scale_levels + 1;
    Ok((prescale, params))
}

/// Moves the left and top edges of `region` by less than one cell so that
/// the cell grid of the object level starts at the corner of `target`.
/// Training windows are registered to their box corner, so this keeps the
/// expected object on the same sub-cell phase.
fn register(region: BBox, target: &BBox, cell_px: (f64, f64)) -> BBox {
    let edge = |lo: f64, t: f64, px: f64| {
        let mut k = ((t - lo) / px).ceil();
        if t - k * px < 0.0 {
            k -= 1.0;
        }
        let e = (t - k * px).round();
        if e < 0.0 {
            lo
        } else {
            e
        }
    };
    let x = edge(region.x, target.x, cell_px.0);
    let y = edge(region.y, target.y, cell_px.1);
    BBox::new(x, y, region.right() - x, region.bottom() - y)
}

/// Pyramid of `region` sampled so that a box the size of `target` fills
/// the object window `scale_levels` levels above the lowest object level.
/// This leaves room to follow the object `scale_levels` steps either way.
/// The region edges are nudged by under a cell to align the grid with
/// `target`.
pub fn search_pyramid(
    frame: &Frame,
    model: &Model,
    target: &BBox,
    region: BBox,
    scale_levels: usize,
) -> Result<FeaturePyramid> {
    let (prescale, params) = search_layout(model, target, scale_levels)?;
    let level = model.template.part_level_offset + scale_levels;
    let cell = model.features.cell_size as f64 * 2f64.powf(level as f64 / model.features.interval as f64);
    let region = match region.clip(frame.width() as f64, frame.height() as f64) {
        Some(r) => register(r, target, (cell / prescale.0, cell / prescale.1)),
        None => region,
    };
    build_pyramid_in(frame, region, prescale, &params)
}

/// [`search_pyramid`] with only the listed levels filled in.
pub fn search_pyramid_levels(
    frame: &Frame,
    model: &Model,
    prev: &BBox,
    region: BBox,
    scale_levels: usize,
    only: &[usize],
) -> Result<FeaturePyramid> {
    let (prescale, params) = search_layout(model, prev, scale_levels)?;
    let only: Vec<usize> = only.iter().copied().filter(|&l| l < params.max_levels).collect();
    build_levels_in(frame, region, prescale, &params, &only)
}
