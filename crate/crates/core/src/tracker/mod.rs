//! Frame-to-frame tracking: ROI search with whole-frame fallback, motion
//! gating, temporal decoding and trackability monitoring.

mod roi;
mod state;
mod temporal_dp;
mod trackability;

pub use roi::{compute_roi, search_pyramid, search_pyramid_levels};
pub use state::{motion_cost, FrameResult, StepReport, Tracker};
pub use temporal_dp::{path_energy, temporal_dp, DpFrame, DpPath};
pub use trackability::{trackability, RunningStats, TrackabilityMonitor};
