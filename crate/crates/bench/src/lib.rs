//! Sequences, evaluation protocols, metrics and reports for aogtrack.

pub mod metrics;
pub mod protocol;
pub mod report;
pub mod sequence;
pub mod synthetic;

use std::time::Instant;

use aogtrack_core::Result;
use rayon::prelude::*;

use protocol::{run_variants, run_vot, variants, Protocol, SequenceTracker};
use report::{Outcome, SequenceResult};
use sequence::Sequence;

/// Runs `protocol` on every sequence. Sequences and their variants run in
/// parallel; results keep the input order.
pub fn evaluate<T, F>(seqs: &[Sequence], protocol: Protocol, make: F) -> Result<Vec<SequenceResult>>
where
    T: SequenceTracker,
    F: Fn() -> T + Sync,
{
    seqs.par_iter()
        .map(|seq| {
            let t = Instant::now();
            let outcome = match protocol {
                Protocol::Vot => Outcome::Vot(run_vot(seq, &make)?),
                _ => Outcome::Runs(run_variants(seq, &variants(seq, protocol)?, &make)?),
            };
            Ok(SequenceResult::new(seq, protocol, outcome, t.elapsed().as_secs_f64()))
        })
        .collect()
}
