//! Result files: one CSV and one SVG plot per sequence, an aggregate CSV
//! when there are several sequences, and a JSON manifest.
//!
//! Run CSV `<sequence>_<protocol>.csv`, header `variant,metric,threshold,value`:
//! - `all,success,<t>,<rate>` for t = 0.00..1.00 and
//!   `all,precision,<px>,<rate>` for px = 0..50, pooled over all variants;
//! - `<variant>,auc,,<v>` and `<variant>,precision@20,,<v>` per variant and
//!   for `all`;
//! - VOT runs instead have `all,accuracy,,<v>`, `all,robustness,,<failures>`.
//!
//! Aggregate CSV `summary_<protocol>.csv`, header `group,sequences,auc,precision@20`
//! (or `group,sequences,accuracy,robustness` for VOT), one row for `all`,
//! one per attribute tag (`attr:SV`) and one per sequence (`seq:<name>`).
//! Attribute and `all` rows average the per-sequence values.
//!
//! Every number is printed with a fixed number of decimals, so equal
//! inputs give byte-identical files. Wall times live in the manifest only.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use aogtrack_core::tracker::FrameResult;
use aogtrack_core::{EngineConfig, Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::metrics::{curves, curves_from, precision_thresholds, success_thresholds, Curves};
use crate::protocol::{Protocol, VariantRun, VotRun};
use crate::sequence::Sequence;

#[derive(Debug, Clone)]
pub enum Outcome {
    Runs(Vec<VariantRun>),
    Vot(VotRun),
}

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub name: String,
    pub attributes: Vec<String>,
    pub protocol: Protocol,
    pub outcome: Outcome,
    /// Curves pooled over the frames of all variants.
    pub curves: Curves,
    pub wall_time_s: f64,
}

impl SequenceResult {
    pub fn new(seq: &Sequence, protocol: Protocol, outcome: Outcome, wall_time_s: f64) -> Self {
        let curves = match &outcome {
            Outcome::Runs(runs) => pooled(seq, runs),
            Outcome::Vot(v) => curves(&v.boxes, &seq.ground_truth),
        };
        SequenceResult {
            name: seq.name.clone(),
            attributes: seq.attributes.iter().cloned().collect(),
            protocol,
            outcome,
            curves,
            wall_time_s,
        }
    }

    /// Headline pair: (AUC, precision@20), or (accuracy, failures) for VOT.
    pub fn headline(&self) -> (f64, f64) {
        match &self.outcome {
            Outcome::Vot(v) => (v.accuracy, v.robustness() as f64),
            Outcome::Runs(_) => (self.curves.auc(), self.curves.precision_at_20()),
        }
    }
}

/// Curves over the concatenated frames of every variant.
pub fn pooled(seq: &Sequence, runs: &[VariantRun]) -> Curves {
    let (mut ious, mut dists) = (Vec::new(), Vec::new());
    for r in runs {
        for (p, g) in r.boxes.iter().zip(r.ground_truth(seq)) {
            if let Some(g) = g {
                ious.push(crate::metrics::overlap(p.as_ref(), g));
                dists.push(crate::metrics::center_error(p.as_ref(), g));
            }
        }
    }
    curves_from(&ious, &dists)
}

pub fn run_csv(seq: &Sequence, r: &SequenceResult) -> String {
    let mut s = String::from("variant,metric,threshold,value\n");
    let c = &r.curves;
    for (t, v) in success_thresholds().iter().zip(&c.success) {
        writeln!(s, "all,success,{t:.2},{v:.6}").unwrap();
    }
    for (t, v) in precision_thresholds().iter().zip(&c.precision) {
        writeln!(s, "all,precision,{t:.0},{v:.6}").unwrap();
    }
    match &r.outcome {
        Outcome::Runs(runs) => {
            writeln!(s, "all,auc,,{:.6}", c.auc()).unwrap();
            writeln!(s, "all,precision@20,,{:.6}", c.precision_at_20()).unwrap();
            for run in runs {
                let vc = curves(&run.boxes, run.ground_truth(seq));
                writeln!(s, "{},auc,,{:.6}", run.variant.name, vc.auc()).unwrap();
                writeln!(s, "{},precision@20,,{:.6}", run.variant.name, vc.precision_at_20()).unwrap();
            }
        }
        Outcome::Vot(v) => {
            writeln!(s, "all,accuracy,,{:.6}", v.accuracy).unwrap();
            writeln!(s, "all,robustness,,{}", v.robustness()).unwrap();
        }
    }
    s
}

pub fn summary_csv(results: &[SequenceResult]) -> String {
    let vot = results.first().is_some_and(|r| r.protocol == Protocol::Vot);
    let mut s = if vot {
        String::from("group,sequences,accuracy,robustness\n")
    } else {
        String::from("group,sequences,auc,precision@20\n")
    };
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in results {
        let h = r.headline();
        groups.entry("all".into()).or_default().push(h);
        for a in &r.attributes {
            groups.entry(format!("attr:{a}")).or_default().push(h);
        }
        groups.entry(format!("seq:{}", r.name)).or_default().push(h);
    }
    for (g, v) in &groups {
        let n = v.len() as f64;
        let a = v.iter().map(|x| x.0).sum::<f64>() / n;
        let b = v.iter().map(|x| x.1).sum::<f64>() / n;
        writeln!(s, "{g},{},{a:.6},{b:.6}", v.len()).unwrap();
    }
    s
}

const W: f64 = 320.0;
const H: f64 = 240.0;
const M: f64 = 40.0;

fn panel(s: &mut String, x0: f64, title: &str, xs: &[f64], ys: &[f64], xmax: f64, xlabel: &str) {
    let px = |x: f64| x0 + M + x / xmax * (W - 1.5 * M);
    let py = |y: f64| H - M - y * (H - 2.0 * M);
    writeln!(s, r#"<g font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle">{title}</text>"#,
        x0 + W / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        px(0.0),
        py(1.0),
        px(xmax) - px(0.0),
        py(0.0) - py(1.0)
    )
    .unwrap();
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{f:.2}</text>"#,
            px(0.0) - 4.0,
            py(f) + 4.0
        )
        .unwrap();
        let x = f * xmax;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(x),
            py(0.0) + 14.0,
            trim(x)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xlabel}</text>"#,
        px(xmax / 2.0),
        H - 8.0
    )
    .unwrap();
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.1},{:.1}", px(x), py(y)))
        .collect();
    writeln!(
        s,
        r#"<polyline fill="none" stroke="firebrick" stroke-width="2" points="{}"/>"#,
        pts.join(" ")
    )
    .unwrap();
    s.push_str("</g>\n");
}

fn trim(x: f64) -> String {
    let t = format!("{x:.2}");
    t.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn svg_open(width: f64) -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{H:.0}" viewBox="0 0 {width:.0} {H:.0}">"#
    ) + "\n"
}

pub fn plot_svg(r: &SequenceResult) -> String {
    match &r.outcome {
        Outcome::Runs(_) => {
            let mut s = svg_open(2.0 * W);
            let c = &r.curves;
            let title = format!("{} {}: success, AUC {:.3}", r.name, r.protocol.name(), c.auc());
            panel(
                &mut s,
                0.0,
                &title,
                &success_thresholds(),
                &c.success,
                1.0,
                "overlap threshold",
            );
            let title = format!("precision@20 {:.3}", c.precision_at_20());
            panel(
                &mut s,
                W,
                &title,
                &precision_thresholds(),
                &c.precision,
                50.0,
                "location error threshold (px)",
            );
            s.push_str("</svg>\n");
            s
        }
        Outcome::Vot(v) => {
            // accuracy against failures, one point
            let mut s = svg_open(W);
            let acc = if v.accuracy.is_finite() { v.accuracy } else { 0.0 };
            let xmax = (v.robustness() as f64).max(1.0) * 1.25;
            let title = format!("{} vot: accuracy {:.3}, failures {}", r.name, acc, v.robustness());
            panel(&mut s, 0.0, &title, &[], &[], xmax, "failures");
            let (x, y) = (
                M + v.robustness() as f64 / xmax * (W - 1.5 * M),
                H - M - acc * (H - 2.0 * M),
            );
            writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="firebrick"/>"#).unwrap();
            s.push_str("</svg>\n");
            s
        }
    }
}

#[derive(Debug, Serialize)]
struct ManifestSequence<'a> {
    name: &'a str,
    variants: usize,
    wall_time_s: f64,
    files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    engine_version: &'a str,
    config_hash: String,
    protocol: &'a str,
    sequences: Vec<ManifestSequence<'a>>,
    summary: Option<String>,
}

/// One line of `track` output:
/// `frame_index,x,y,w,h,score,valid,searched_whole_frame,trackability`,
/// flags as 0/1 and `nan` for whatever an invalid frame lacks.
pub fn trajectory_line(r: &FrameResult) -> String {
    let b = match r.bbox {
        Some(b) => format!("{:.2},{:.2},{:.2},{:.2}", b.x, b.y, b.w, b.h),
        None => "nan,nan,nan,nan".into(),
    };
    let num = |v: f64| if v.is_finite() { format!("{v:.6}") } else { "nan".into() };
    format!(
        "{},{b},{},{},{},{}",
        r.frame_index,
        num(r.score),
        r.valid as u8,
        r.searched_whole_frame as u8,
        num(r.trackability)
    )
}

/// SHA-256 of the config in its TOML form.
pub fn config_hash(cfg: &EngineConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes every file for `results` into `out` and returns their paths.
pub fn emit_report(
    seqs: &[Sequence],
    results: &[SequenceResult],
    cfg: &EngineConfig,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for (seq, r) in seqs.iter().zip(results) {
        let stem = format!("{}_{}", r.name, r.protocol.name());
        let csv = format!("{stem}.csv");
        let svg = format!("{stem}.svg");
        write(&out.join(&csv), &run_csv(seq, r))?;
        write(&out.join(&svg), &plot_svg(r))?;
        written.push(out.join(&csv));
        written.push(out.join(&svg));
        entries.push(ManifestSequence {
            name: &r.name,
            variants: match &r.outcome {
                Outcome::Runs(v) => v.len(),
                Outcome::Vot(_) => 1,
            },
            wall_time_s: r.wall_time_s,
            files: vec![csv, svg],
        });
    }
    let protocol = results.first().map_or("", |r| r.protocol.name());
    let summary = (results.len() > 1).then(|| format!("summary_{protocol}.csv"));
    if let Some(name) = &summary {
        write(&out.join(name), &summary_csv(results))?;
        written.push(out.join(name));
    }
    let manifest = Manifest {
        engine_version: aogtrack_core::VERSION,
        config_hash: config_hash(cfg),
        protocol,
        sequences: entries,
        summary,
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidInput(e.to_string()))?;
    write(&path, &(text + "\n"))?;
    written.push(path);
    Ok(written)
}
