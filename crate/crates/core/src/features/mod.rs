//! Cell-grid appearance features and multi-scale feature pyramids.

mod color;
mod hog;
mod lbp;
mod pyramid;

use std::path::Path;

use image::imageops::{self, FilterType};
use image::{DynamicImage, Rgb32FImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use color::{color_cells, COLOR_DIMS};
pub use hog::{hog_cells, HOG_DIMS};
pub use lbp::{lbp_cells, LBP_DIMS, LBP_NON_UNIFORM_BIN};
pub use pyramid::{build_levels_in, build_pyramid, build_pyramid_in, FeaturePyramid, PyramidGeometry, PyramidParams};

/// One video frame, RGB in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Frame {
    pub image: Rgb32FImage,
    pub is_color: bool,
}

impl Frame {
    pub fn new(image: Rgb32FImage, is_color: bool) -> Self {
        Frame { image, is_color }
    }

    pub fn from_dynamic(img: DynamicImage) -> Self {
        let is_color = img.color().has_color();
        Frame::new(img.to_rgb32f(), is_color)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Frame> {
        Ok(Frame::from_dynamic(image::open(path.as_ref())?))
    }

    /// Grayscale frame from row-major intensities in `[0, 1]`.
    pub fn from_gray(width: u32, height: u32, data: &[f32]) -> Frame {
        let image = Rgb32FImage::from_fn(width, height, |x, y| {
            let v = data[(y * width + x) as usize];
            image::Rgb([v, v, v])
        });
        Frame::new(image, false)
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    /// Luma plane, row-major.
    pub fn gray(&self) -> Vec<f32> {
        self.image
            .pixels()
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }

    pub fn resized(&self, width: u32, height: u32) -> Frame {
        if (width, height) == (self.width(), self.height()) {
            return self.clone();
        }
        Frame::new(
            imageops::resize(&self.image, width.max(1), height.max(1), FilterType::Triangle),
            self.is_color,
        )
    }
}

/// Which feature families are concatenated per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub hog: bool,
    pub lbp: bool,
    pub color: bool,
}

impl Default for FeatureSet {
    fn default() -> Self {
        FeatureSet {
            hog: true,
            lbp: true,
            color: true,
        }
    }
}

impl FeatureSet {
    /// Color histograms are dropped on grayscale input.
    pub fn effective(self, is_color: bool) -> FeatureSet {
        FeatureSet {
            color: self.color && is_color,
            ..self
        }
    }

    pub fn channels(self) -> usize {
        let mut c = 0;
        if self.hog {
            c += HOG_DIMS;
        }
        if self.lbp {
            c += LBP_DIMS;
        }
        if self.color {
            c += COLOR_DIMS;
        }
        c
    }
}

/// Dense `width x height x channels` tensor, channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        FeatureMap {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height * channels);
        FeatureMap {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn cell(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn cell_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// `w` consecutive cells of row `y` starting at column `x`.
    pub fn row(&self, x: usize, y: usize, w: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + w * self.channels]
    }

    /// Row-major concatenation of the cells of a window.
    pub fn crop_window(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Vec<f32>> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::InvalidInput(format!(
                "window ({x}, {y}, {w}, {h}) outside {}x{} map",
                self.width, self.height
            )));
        }
        let mut out = Vec::with_capacity(w * h * self.channels);
        for yy in y..y + h {
            out.extend_from_slice(self.row(x, yy, w));
        }
        Ok(out)
    }

    /// Window copy that may extend past the map; outside cells are zero.
    pub fn crop_padded(&self, x: i64, y: i64, w: usize, h: usize) -> FeatureMap {
        let mut out = FeatureMap::zeros(w, h, self.channels);
        for yy in 0..h {
            let sy = y + yy as i64;
            if sy < 0 || sy >= self.height as i64 {
                continue;
            }
            for xx in 0..w {
                let sx = x + xx as i64;
                if sx < 0 || sx >= self.width as i64 {
                    continue;
                }
                out.cell_mut(xx, yy)
                    .copy_from_slice(self.cell(sx as usize, sy as usize));
            }
        }
        out
    }

    /// Concatenates maps of equal grid size along the channel axis.
    pub fn concat_channels(maps: &[FeatureMap]) -> FeatureMap {
        let (w, h) = (maps[0].width, maps[0].height);
        let channels: usize = maps.iter().map(|m| m.channels).sum();
        let mut data = Vec::with_capacity(w * h * channels);
        for y in 0..h {
            for x in 0..w {
                for m in maps {
                    debug_assert_eq!((m.width, m.height), (w, h));
                    data.extend_from_slice(m.cell(x, y));
                }
            }
        }
        FeatureMap::from_vec(w, h, channels, data)
    }
}

/// Per-cell features of one image at one scale, channels ordered HOG, LBP,
/// color.
pub fn compute_cells(frame: &Frame, cell_size: usize, set: FeatureSet) -> Result<FeatureMap> {
    let set = set.effective(frame.is_color);
    if (frame.width() as usize) < cell_size || (frame.height() as usize) < cell_size {
        return Err(Error::InvalidInput(format!(
            "image {}x{} smaller than one {cell_size}px cell",
            frame.width(),
            frame.height()
        )));
    }
    if set.channels() == 0 {
        return Err(Error::InvalidInput("empty feature set".into()));
    }
    let mut parts = Vec::new();
    if set.hog {
        parts.push(hog_cells(frame, cell_size));
    }
    if set.lbp {
        parts.push(lbp_cells(frame, cell_size));
    }
    if set.color {
        parts.push(color_cells(frame, cell_size));
    }
    Ok(if parts.len() == 1 {
        parts.pop().expect("one part")
    } else {
        FeatureMap::concat_channels(&parts)
    })
}

/// The `[dx^2, dx, dy^2, dy]` displacement feature.
pub fn deformation_feature(dx: i32, dy: i32) -> [f64; 4] {
    let (dx, dy) = (dx as f64, dy as f64);
    [dx * dx, dx, dy * dy, dy]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deformation_feature_values() {
        assert_eq!(deformation_feature(0, 0), [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(deformation_feature(1, -2), [1.0, 1.0, 4.0, -2.0]);
        assert_eq!(deformation_feature(-3, 0), [9.0, -3.0, 0.0, 0.0]);
    }

    #[test]
    fn grayscale_drops_color_channels() {
        let frame = Frame::from_gray(16, 16, &[0.5; 256]);
        let map = compute_cells(&frame, 4, FeatureSet::default()).unwrap();
        assert_eq!(map.channels, HOG_DIMS + LBP_DIMS);
        assert_eq!((map.width, map.height), (4, 4));
    }

    #[test]
    fn too_small_image_is_refused() {
        let frame = Frame::from_gray(3, 8, &[0.5; 24]);
        assert!(compute_cells(&frame, 4, FeatureSet::default()).is_err());
    }

    #[test]
    fn crop_window_is_row_major() {
        let data: Vec<f32> = (0..3 * 2 * 2).map(|v| v as f32).collect();
        let map = FeatureMap::from_vec(3, 2, 2, data.clone());
        assert_eq!(map.crop_window(0, 0, 3, 2).unwrap(), data);
        assert_eq!(map.crop_window(1, 1, 2, 1).unwrap(), vec![8.0, 9.0, 10.0, 11.0]);
        assert!(map.crop_window(2, 0, 2, 1).is_err());
    }

    #[test]
    fn equal_crops_of_constant_map() {
        let map = FeatureMap::from_vec(6, 6, 3, vec![0.25; 108]);
        assert_eq!(
            map.crop_window(0, 0, 2, 3).unwrap(),
            map.crop_window(4, 3, 2, 3).unwrap()
        );
    }
}
