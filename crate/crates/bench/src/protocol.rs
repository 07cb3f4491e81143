//! Evaluation protocols: one pass (OPE), temporal (TRE) and spatial (SRE)
//! robustness, and VOT-style runs with re-initialization after failures.

use aogtrack_core::features::Frame;
use aogtrack_core::tracker::Tracker;
use aogtrack_core::{BBox, EngineConfig, Error, Result};
use rayon::prelude::*;

use crate::sequence::Sequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Ope,
    Tre,
    Sre,
    Vot,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Ope => "ope",
            Protocol::Tre => "tre",
            Protocol::Sre => "sre",
            Protocol::Vot => "vot",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Protocol> {
        match s.to_ascii_lowercase().as_str() {
            "ope" => Ok(Protocol::Ope),
            "tre" => Ok(Protocol::Tre),
            "sre" => Ok(Protocol::Sre),
            "vot" => Ok(Protocol::Vot),
            _ => Err(Error::InvalidInput(format!("unknown protocol {s:?}"))),
        }
    }
}

/// Anything that can follow one object through a sequence.
pub trait SequenceTracker {
    fn init(&mut self, frame: Frame, bbox: BBox) -> Result<()>;

    /// Current estimate for the next frame.
    fn track(&mut self, frame: Frame) -> Result<Option<BBox>>;

    /// Final estimates since `init`, starting with the init frame, when the
    /// tracker revises earlier frames. `None` keeps the per-frame estimates.
    fn trajectory(&self) -> Option<Vec<Option<BBox>>> {
        None
    }
}

/// The AOG tracker behind [`SequenceTracker`].
pub struct AogTracker {
    cfg: EngineConfig,
    inner: Option<Tracker>,
}

impl AogTracker {
    pub fn new(cfg: EngineConfig) -> Self {
        AogTracker { cfg, inner: None }
    }
}

impl SequenceTracker for AogTracker {
    fn init(&mut self, frame: Frame, bbox: BBox) -> Result<()> {
        self.inner = Some(Tracker::new(frame, bbox, self.cfg.clone())?);
        Ok(())
    }

    fn track(&mut self, frame: Frame) -> Result<Option<BBox>> {
        let t = self
            .inner
            .as_mut()
            .ok_or_else(|| Error::InvalidInput("track called before init".into()))?;
        Ok(t.track(frame)?.result.bbox)
    }

    fn trajectory(&self) -> Option<Vec<Option<BBox>>> {
        self.inner
            .as_ref()
            .map(|t| t.trajectory().iter().map(|r| r.bbox).collect())
    }
}

/// One initialization of a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub start: usize,
    pub init: BBox,
}

/// Output of one variant: a box or nothing for each frame from `start` to
/// the end, the first being the init box.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantRun {
    pub variant: Variant,
    pub boxes: Vec<Option<BBox>>,
}

impl VariantRun {
    /// Ground truth aligned with `boxes`.
    pub fn ground_truth<'a>(&self, seq: &'a Sequence) -> &'a [Option<BBox>] {
        &seq.ground_truth[self.variant.start..]
    }
}

pub fn ope_variants(seq: &Sequence) -> Vec<Variant> {
    vec![Variant {
        name: "ope".into(),
        start: 0,
        init: seq.ground_truth[0].expect("validated sequence"),
    }]
}

/// Start frames `floor(k n / 20)` for `k < 20`, so the first is frame 0.
/// Starts without ground truth are skipped; a sequence shorter than 20
/// frames yields fewer, distinct starts.
pub fn tre_variants(seq: &Sequence) -> Vec<Variant> {
    let n = seq.len();
    let mut starts: Vec<usize> = (0..20).map(|k| k * n / 20).collect();
    starts.dedup();
    starts
        .into_iter()
        .filter_map(|s| match seq.ground_truth[s] {
            Some(b) => Some(Variant {
                name: format!("tre-{s}"),
                start: s,
                init: b,
            }),
            None => {
                log::warn!("{}: no ground truth at TRE start frame {s}, skipped", seq.name);
                None
            }
        })
        .collect()
}

/// Eight centre shifts by 10% of the box size and four scalings, all at
/// frame 0. Boxes pushed past the image edge are clipped to it.
pub fn sre_variants(seq: &Sequence, frame_size: (f64, f64)) -> Vec<Variant> {
    let b = seq.ground_truth[0].expect("validated sequence");
    let shifts = [
        ("n", 0.0, -1.0),
        ("ne", 1.0, -1.0),
        ("e", 1.0, 0.0),
        ("se", 1.0, 1.0),
        ("s", 0.0, 1.0),
        ("sw", -1.0, 1.0),
        ("w", -1.0, 0.0),
        ("nw", -1.0, -1.0),
    ];
    let mut out: Vec<(String, BBox)> = shifts
        .iter()
        .map(|&(n, dx, dy)| (format!("sre-shift-{n}"), b.translate(0.1 * b.w * dx, 0.1 * b.h * dy)))
        .collect();
    for s in [0.8, 0.9, 1.1, 1.2] {
        out.push((format!("sre-scale-{s}"), b.scale_about_center(s)));
    }
    out.into_iter()
        .map(|(name, init)| Variant {
            name,
            start: 0,
            init: init.clip(frame_size.0, frame_size.1).unwrap_or(b),
        })
        .collect()
}

/// Tracks from `v.start` to the end of the sequence.
pub fn run_variant<T: SequenceTracker>(seq: &Sequence, v: &Variant, mut tracker: T) -> Result<VariantRun> {
    tracker.init(seq.frame(v.start)?, v.init)?;
    let mut boxes = vec![Some(v.init)];
    for i in v.start + 1..seq.len() {
        boxes.push(tracker.track(seq.frame(i)?)?);
    }
    if let Some(t) = tracker.trajectory() {
        if t.len() == boxes.len() {
            boxes = t;
        }
    }
    Ok(VariantRun {
        variant: v.clone(),
        boxes,
    })
}

/// Runs `variants` in parallel, results in input order.
pub fn run_variants<T, F>(seq: &Sequence, variants: &[Variant], make: F) -> Result<Vec<VariantRun>>
where
    T: SequenceTracker,
    F: Fn() -> T + Sync,
{
    variants.par_iter().map(|v| run_variant(seq, v, make())).collect()
}

pub fn variants(seq: &Sequence, protocol: Protocol) -> Result<Vec<Variant>> {
    seq.validate()?;
    Ok(match protocol {
        Protocol::Ope | Protocol::Vot => ope_variants(seq),
        Protocol::Tre => tre_variants(seq),
        Protocol::Sre => {
            let f = seq.frame(0)?;
            sre_variants(seq, (f.width() as f64, f.height() as f64))
        }
    })
}

/// Frames skipped after a failure before the tracker is started again.
pub const VOT_SKIP: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct VotRun {
    /// Per frame: the estimate, `None` where no tracker was running.
    pub boxes: Vec<Option<BBox>>,
    /// Frames where the overlap dropped to zero.
    pub failures: Vec<usize>,
    /// Frames where the tracker was (re)started.
    pub inits: Vec<usize>,
    /// Mean overlap over frames tracked after an init frame, failure frames
    /// excluded. `NaN` if there are none.
    pub accuracy: f64,
}

impl VotRun {
    pub fn robustness(&self) -> usize {
        self.failures.len()
    }
}

/// Tracks with re-initialization: when the estimate no longer overlaps the
/// ground truth the frame counts as a failure, the next [`VOT_SKIP`] frames
/// are skipped and the tracker restarts on the first annotated frame after
/// that. Init frames and skipped frames do not enter the accuracy.
pub fn run_vot<T, F>(seq: &Sequence, make: F) -> Result<VotRun>
where
    T: SequenceTracker,
    F: Fn() -> T,
{
    seq.validate()?;
    let n = seq.len();
    let mut run = VotRun {
        boxes: vec![None; n],
        failures: Vec::new(),
        inits: Vec::new(),
        accuracy: f64::NAN,
    };
    let mut overlaps = Vec::new();
    let mut tracker: Option<T> = None;
    let mut i = 0;
    while i < n {
        let Some(t) = tracker.as_mut() else {
            // wait for an annotated frame to start from
            if let Some(b) = seq.ground_truth[i] {
                let mut t = make();
                t.init(seq.frame(i)?, b)?;
                run.boxes[i] = Some(b);
                run.inits.push(i);
                tracker = Some(t);
            }
            i += 1;
            continue;
        };
        let pred = t.track(seq.frame(i)?)?;
        run.boxes[i] = pred;
        match seq.ground_truth[i] {
            Some(g) if pred.is_none_or(|p| p.iou(&g) <= 0.0) => {
                run.failures.push(i);
                tracker = None;
                i += VOT_SKIP + 1;
                continue;
            }
            Some(g) => overlaps.push(pred.expect("checked").iou(&g)),
            None => {}
        }
        i += 1;
    }
    if !overlaps.is_empty() {
        run.accuracy = overlaps.iter().sum::<f64>() / overlaps.len() as f64;
    }
    Ok(run)
}
