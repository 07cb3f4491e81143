//! Image sequences with ground truth, from disk or memory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use aogtrack_core::features::Frame;
use aogtrack_core::{BBox, Error, Result};

#[derive(Debug, Clone)]
pub enum FrameSource {
    File(PathBuf),
    Memory(Arc<Frame>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// One `x,y,w,h` line per frame, 1-based pixel origin.
    Tb,
    /// One 8-number polygon per line.
    Vot,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s {
            "tb" => Ok(Format::Tb),
            "vot" => Ok(Format::Vot),
            _ => Err(Error::InvalidInput(format!("unknown sequence format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<FrameSource>,
    /// Per frame; `None` where the object is absent or unannotated.
    pub ground_truth: Vec<Option<BBox>>,
    /// Challenge tags such as `OCC` or `SV`.
    pub attributes: BTreeSet<String>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, i: usize) -> Result<Frame> {
        match self.frames.get(i) {
            Some(FrameSource::File(p)) => Frame::open(p),
            Some(FrameSource::Memory(f)) => Ok((**f).clone()),
            None => Err(Error::InvalidInput(format!("frame {i} out of range"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "sequence {} has fewer than 2 frames",
                self.name
            )));
        }
        if self.ground_truth.len() != self.frames.len() {
            return Err(Error::InvalidInput(format!(
                "sequence {}: {} frames but {} annotations",
                self.name,
                self.frames.len(),
                self.ground_truth.len()
            )));
        }
        if self.ground_truth[0].is_none_or(|b| !b.is_valid()) {
            return Err(Error::InvalidInput(format!(
                "sequence {}: first frame not annotated",
                self.name
            )));
        }
        Ok(())
    }
}

fn numbers(line: &str) -> Result<Vec<f64>> {
    line.split(|c: char| c == ',' || c == '\t' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad number {t:?} in annotation line {line:?}")))
        })
        .collect()
}

/// Parses one annotation line. Non-finite or non-positive boxes mean the
/// object is absent.
pub fn parse_annotation(line: &str, format: Format) -> Result<Option<BBox>> {
    let v = numbers(line)?;
    let b = match (format, v.len()) {
        (Format::Tb, 4) => BBox::new(v[0] - 1.0, v[1] - 1.0, v[2], v[3]),
        (Format::Vot, 8) => {
            let pts: Vec<(f64, f64)> = v.chunks(2).map(|p| (p[0], p[1])).collect();
            match BBox::enclosing(&pts) {
                Some(b) => b,
                None => return Ok(None),
            }
        }
        (Format::Vot, 4) => BBox::new(v[0], v[1], v[2], v[3]),
        _ => {
            return Err(Error::InvalidInput(format!(
                "annotation line {line:?} has {} numbers",
                v.len()
            )))
        }
    };
    Ok(b.is_valid().then_some(b))
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("jpg" | "jpeg" | "png")
    )
}

/// Images in `dir/img`, or in `dir` itself, sorted by name.
pub fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let img_dir = if dir.join("img").is_dir() {
        dir.join("img")
    } else {
        dir.to_path_buf()
    };
    let mut frames: Vec<PathBuf> = std::fs::read_dir(&img_dir)
        .map_err(|e| Error::io(&img_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_image(p))
        .collect();
    frames.sort();
    Ok(frames)
}

/// Loads a sequence directory: images in `img/` (or the directory itself)
/// sorted by name, boxes from `groundtruth_rect.txt` (tb) or
/// `groundtruth.txt` (vot), optional tags from `attributes.txt`.
pub fn load_sequence(dir: impl AsRef<Path>, format: Format) -> Result<Sequence> {
    let dir = dir.as_ref();
    let frames = frame_paths(dir)?;
    let ann = match format {
        Format::Tb => ["groundtruth_rect.txt", "groundtruth.txt"],
        Format::Vot => ["groundtruth.txt", "groundtruth_rect.txt"],
    }
    .iter()
    .map(|n| dir.join(n))
    .find(|p| p.is_file())
    .ok_or_else(|| Error::InvalidInput(format!("no annotation file in {}", dir.display())))?;
    let text = std::fs::read_to_string(&ann).map_err(|e| Error::io(&ann, e))?;
    let ground_truth = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse_annotation(l, format))
        .collect::<Result<Vec<_>>>()?;
    if ground_truth.len() != frames.len() {
        return Err(Error::InvalidInput(format!(
            "{}: {} frames but {} annotation lines",
            dir.display(),
            frames.len(),
            ground_truth.len()
        )));
    }
    let attr = dir.join("attributes.txt");
    let attributes = if attr.is_file() {
        std::fs::read_to_string(&attr)
            .map_err(|e| Error::io(&attr, e))?
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    } else {
        BTreeSet::new()
    };
    let seq = Sequence {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        frames: frames.into_iter().map(FrameSource::File).collect(),
        ground_truth,
        attributes,
    };
    seq.validate()?;
    Ok(seq)
}

/// Loads the sequence directories under `root`, sorted by name, or only
/// those listed in `names`, in that order.
pub fn load_dataset(root: impl AsRef<Path>, format: Format, names: Option<&[String]>) -> Result<Vec<Sequence>> {
    let root = root.as_ref();
    let dirs: Vec<PathBuf> = match names {
        Some(names) => names.iter().map(|n| root.join(n)).collect(),
        None => {
            let mut d: Vec<PathBuf> = std::fs::read_dir(root)
                .map_err(|e| Error::io(root, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            d.sort();
            d
        }
    };
    dirs.iter().map(|d| load_sequence(d, format)).collect()
}
