use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_cells, FeatureMap, FeatureSet, Frame};
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Maps pyramid cells back to the source image.
///
/// The pyramid is built from a crop of the image starting at `origin`,
/// resampled by `prescale` per axis. Level `l` is a further
/// `2^(-l / interval)` reduction, so one cell there spans
/// `cell_size * 2^(l / interval) / prescale` image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidGeometry {
    pub cell_size: usize,
    pub interval: usize,
    pub origin: (f64, f64),
    pub prescale: (f64, f64),
    pub level_dims: Vec<(usize, usize)>,
}

impl PyramidGeometry {
    pub fn level_scale(&self, level: usize) -> f64 {
        2f64.powf(level as f64 / self.interval as f64)
    }

    /// Image pixels per cell at `level`, per axis.
    pub fn cell_pixels(&self, level: usize) -> (f64, f64) {
        let s = self.cell_size as f64 * self.level_scale(level);
        (s / self.prescale.0, s / self.prescale.1)
    }

    pub fn cells_to_image(&self, level: usize, x: f64, y: f64, w: f64, h: f64) -> BBox {
        let (px, py) = self.cell_pixels(level);
        BBox::new(self.origin.0 + x * px, self.origin.1 + y * py, w * px, h * py)
    }

    /// Inverse of [`cells_to_image`](Self::cells_to_image), fractional cells.
    pub fn image_to_cells(&self, level: usize, b: &BBox) -> (f64, f64, f64, f64) {
        let (px, py) = self.cell_pixels(level);
        (
            (b.x - self.origin.0) / px,
            (b.y - self.origin.1) / py,
            b.w / px,
            b.h / py,
        )
    }
}

#[derive(Debug, Clone)]
pub struct FeaturePyramid {
    /// Finest first.
    pub levels: Vec<FeatureMap>,
    pub geometry: PyramidGeometry,
}

impl FeaturePyramid {
    pub fn channels(&self) -> usize {
        self.levels.first().map_or(0, |l| l.channels)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Pyramid over explicit levels, e.g. synthetic or cropped features.
    pub fn from_levels(levels: Vec<FeatureMap>, cell_size: usize, interval: usize) -> Self {
        let level_dims = levels.iter().map(|l| (l.width, l.height)).collect();
        FeaturePyramid {
            levels,
            geometry: PyramidGeometry {
                cell_size,
                interval,
                origin: (0.0, 0.0),
                prescale: (1.0, 1.0),
                level_dims,
            },
        }
    }
}

/// How a pyramid is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PyramidParams {
    pub cell_size: usize,
    /// Levels per octave.
    pub interval: usize,
    pub features: FeatureSet,
    /// Levels smaller than this many cells (one object template) are omitted.
    pub min_cells: (usize, usize),
    pub max_levels: usize,
}

impl PyramidParams {
    pub fn new(cell_size: usize, interval: usize, features: FeatureSet) -> Self {
        PyramidParams {
            cell_size,
            interval,
            features,
            min_cells: (1, 1),
            max_levels: usize::MAX,
        }
    }
}

/// Feature pyramid of a whole image.
pub fn build_pyramid(frame: &Frame, params: &PyramidParams) -> Result<FeaturePyramid> {
    let whole = BBox::new(0.0, 0.0, frame.width() as f64, frame.height() as f64);
    build_pyramid_in(frame, whole, (1.0, 1.0), params)
}

/// Feature pyramid of `region` of `frame` after resampling by `prescale`.
pub fn build_pyramid_in(
    frame: &Frame,
    region: BBox,
    prescale: (f64, f64),
    params: &PyramidParams,
) -> Result<FeaturePyramid> {
    build(frame, region, prescale, params, None)
}

/// Like [`build_pyramid_in`] but only computes the listed levels; the others
/// are left as empty maps so level indices keep their meaning.
pub fn build_levels_in(
    frame: &Frame,
    region: BBox,
    prescale: (f64, f64),
    params: &PyramidParams,
    only: &[usize],
) -> Result<FeaturePyramid> {
    build(frame, region, prescale, params, Some(only))
}

fn build(
    frame: &Frame,
    region: BBox,
    prescale: (f64, f64),
    params: &PyramidParams,
    only: Option<&[usize]>,
) -> Result<FeaturePyramid> {
    let cs = params.cell_size;
    if cs == 0 || params.interval == 0 {
        return Err(Error::InvalidInput("cell size and interval must be positive".into()));
    }
    let clipped = region
        .clip(frame.width() as f64, frame.height() as f64)
        .ok_or_else(|| Error::InvalidInput("pyramid region outside the frame".into()))?;
    let x0 = clipped.x.floor();
    let y0 = clipped.y.floor();
    let cw = (clipped.right().ceil().min(frame.width() as f64) - x0).max(1.0);
    let ch = (clipped.bottom().ceil().min(frame.height() as f64) - y0).max(1.0);
    let base_w = cw * prescale.0;
    let base_h = ch * prescale.1;
    if base_w < cs as f64 || base_h < cs as f64 {
        return Err(Error::InvalidInput(format!(
            "image {base_w:.0}x{base_h:.0} smaller than one {cs}px cell"
        )));
    }

    let mut sizes = Vec::new();
    let last = only.map_or(params.max_levels, |o| {
        o.iter().max().map_or(0, |m| m + 1).min(params.max_levels)
    });
    for l in 0..last {
        let f = 2f64.powf(-(l as f64) / params.interval as f64);
        let w = (base_w * f).round() as usize;
        let h = (base_h * f).round() as usize;
        if w / cs < params.min_cells.0.max(1) || h / cs < params.min_cells.1.max(1) {
            break;
        }
        sizes.push((w as u32, h as u32));
    }

    let crop = if (x0, y0, cw, ch) == (0.0, 0.0, frame.width() as f64, frame.height() as f64) {
        None
    } else {
        let img = image::imageops::crop_imm(&frame.image, x0 as u32, y0 as u32, cw as u32, ch as u32).to_image();
        Some(Frame::new(img, frame.is_color))
    };
    let src = crop.as_ref().unwrap_or(frame);
    let channels = params.features.effective(frame.is_color).channels();
    let levels = sizes
        .par_iter()
        .enumerate()
        .map(|(l, &(w, h))| match only {
            Some(o) if !o.contains(&l) => Ok(FeatureMap::zeros(0, 0, channels)),
            _ => compute_cells(&src.resized(w, h), cs, params.features),
        })
        .collect::<Result<Vec<_>>>()?;
    let level_dims = levels.iter().map(|l| (l.width, l.height)).collect();
    Ok(FeaturePyramid {
        levels,
        geometry: PyramidGeometry {
            cell_size: cs,
            interval: params.interval,
            origin: (x0, y0),
            prescale: (base_w / cw, base_h / ch),
            level_dims,
        },
    })
}
