use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use aogtrack_bench::evaluate;
use aogtrack_bench::protocol::{AogTracker, Protocol};
use aogtrack_bench::report::{emit_report, trajectory_line};
use aogtrack_bench::sequence::{frame_paths, load_dataset, load_sequence, Format, Sequence};
use aogtrack_core::aog::Aog;
use aogtrack_core::features::{build_pyramid, Frame};
use aogtrack_core::learner::{learn_object_aog, PoolCache, TrainingDataset};
use aogtrack_core::model::Model;
use aogtrack_core::parser::{parse, ParseOptions};
use aogtrack_core::tracker::{search_pyramid, FrameResult, Tracker};
use aogtrack_core::{BBox, EngineConfig, Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aogtrack",
    version,
    about = "Object tracking by online And-Or graph learning and parsing"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML file overriding engine defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Most frames used for a structure re-learn.
    #[arg(long, global = true)]
    relearn_cap: Option<usize>,
    /// Side of the AOG grid instead of the box-size rule.
    #[arg(long, global = true)]
    grid_side: Option<u32>,
    /// Loss weight of the latent SVM.
    #[arg(long, global = true)]
    lsvm_c: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print node and configuration counts of a full grid AOG.
    CountAog {
        #[arg(long, value_parser = pair::<u32>)]
        grid: (u32, u32),
        #[arg(long, default_value = "1x1", value_parser = pair::<u32>)]
        min_part: (u32, u32),
        #[arg(long, default_value_t = 0.0)]
        overlap: f64,
        /// Skip configuration enumeration above this many parse trees.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
    },
    /// Learn an object AOG from one annotated image and save the model.
    Learn {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, value_parser = bbox)]
        init: BBox,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect with a saved model: score, object box and part boxes per line.
    Parse {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Detection threshold; the model's own by default.
        #[arg(long)]
        threshold: Option<f64>,
        /// Expected object box. Sets the search scale and aspect ratio;
        /// without it the image is searched at its own scales and windows
        /// keep the template's proportions.
        #[arg(long, value_parser = bbox)]
        near: Option<BBox>,
    },
    /// Track through a sequence directory and print one CSV line per frame.
    Track {
        /// Directory of frames, in `img/` or directly inside.
        #[arg(long)]
        sequence: PathBuf,
        /// First-frame box; the first annotation when omitted.
        #[arg(long, value_parser = bbox)]
        init: Option<BBox>,
        /// Annotation format: tb or vot.
        #[arg(long, default_value = "tb")]
        format: Format,
        /// Write frames with the object and part boxes drawn in.
        #[arg(long)]
        render: Option<PathBuf>,
        /// Output file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an evaluation protocol over a dataset and write reports.
    Eval {
        #[arg(long)]
        protocol: Protocol,
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated sequence names; all subdirectories by default.
        #[arg(long, value_delimiter = ',')]
        sequences: Option<Vec<String>>,
        /// Annotation format: tb or vot.
        #[arg(long, default_value = "tb")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
}

fn pair<T: std::str::FromStr>(s: &str) -> std::result::Result<(T, T), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<T>().map_err(|_| format!("bad number {t:?}"));
    Ok((p(a)?, p(b)?))
}

fn bbox(s: &str) -> std::result::Result<BBox, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] if w > 0.0 && h > 0.0 => Ok(BBox::new(x, y, w, h)),
        _ => Err(format!("expected x,y,w,h with positive size, got {s:?}")),
    }
}

fn config(c: &Common) -> Result<EngineConfig> {
    let mut cfg = match &c.config {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    if let Some(v) = c.relearn_cap {
        cfg.learner.relearn_cap = v;
    }
    if let Some(v) = c.grid_side {
        cfg.aog.grid_side = Some(v);
    }
    if let Some(v) = c.lsvm_c {
        cfg.learner.lsvm_c = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_box(b: &BBox) -> String {
    format!("{:.2},{:.2},{:.2},{:.2}", b.x, b.y, b.w, b.h)
}

fn count_aog(grid: (u32, u32), min_part: (u32, u32), overlap: f64, budget: u64) -> Result<()> {
    let aog = Aog::build_full(grid, min_part, overlap)?;
    println!("part_terminals {}", aog.part_terminal_count());
    println!("decompositions {}", aog.decomposition_count());
    println!("or_nodes {}", aog.or_count());
    println!("parse_trees {}", aog.count_parse_trees());
    match aog.count_configurations(budget) {
        Ok(c) => println!("configurations {}", c.part_configurations),
        Err(Error::BudgetExceeded { .. }) => println!("configurations skipped (parse trees exceed --budget {budget})"),
        Err(e) => return Err(e),
    }
    Ok(())
}

fn learn(cfg: &EngineConfig, image: &Path, init: BBox, out: &Path) -> Result<()> {
    let frame = Arc::new(Frame::open(image)?);
    let data = TrainingDataset::init(frame, init, cfg.features.cell_size as f64)?;
    let learned = learn_object_aog(&data, &mut PoolCache::default(), cfg)?;
    learned.model.save(out)?;
    eprintln!(
        "{:?}: {} nodes, tau_g {:.4}",
        learned.outcome,
        learned.model.aog.len(),
        learned.model.tau_g
    );
    Ok(())
}

fn parse_image(
    cfg: &EngineConfig,
    model: &Path,
    image: &Path,
    threshold: Option<f64>,
    near: Option<BBox>,
) -> Result<()> {
    let model = Model::load(model)?;
    let frame = Frame::open(image)?;
    let pyr = match near {
        Some(b) => {
            let all = BBox::new(0.0, 0.0, frame.width() as f64, frame.height() as f64);
            search_pyramid(&frame, &model, &b, all, cfg.tracker.scale_levels)?
        }
        None => build_pyramid(&frame, &model.pyramid_params())?,
    };
    let out = parse(
        &model,
        &pyr,
        &ParseOptions::new(&cfg.parser, threshold.unwrap_or(model.tau_g)),
    )?;
    for d in &out.detections {
        let mut line = format!("{:.6},{}", d.score, fmt_box(&d.window));
        for n in d.tree.nodes.iter().filter(|n| model.aog.node(n.node).is_terminal()) {
            let b = model
                .template
                .node_box(&model.aog, n.node, &pyr.geometry, n.placement)?;
            line += &format!(",{}", fmt_box(&b));
        }
        println!("{line}");
    }
    Ok(())
}

fn render(dir: &Path, index: usize, frame: &Frame, r: &FrameResult) -> Result<()> {
    use imageproc::drawing::draw_hollow_rect_mut;
    use imageproc::rect::Rect;
    let mut img = image::DynamicImage::ImageRgb32F(frame.image.clone()).to_rgb8();
    let rect = |b: &BBox| {
        Rect::at(b.x.round() as i32, b.y.round() as i32)
            .of_size(b.w.round().max(1.0) as u32, b.h.round().max(1.0) as u32)
    };
    for p in &r.parts {
        draw_hollow_rect_mut(&mut img, rect(p), image::Rgb([40, 140, 255]));
    }
    if let Some(b) = r.bbox {
        draw_hollow_rect_mut(&mut img, rect(&b), image::Rgb([255, 40, 40]));
    }
    let path = dir.join(format!("{index:05}.png"));
    img.save(&path)?;
    Ok(())
}

fn track(
    cfg: EngineConfig,
    dir: &Path,
    init: Option<BBox>,
    format: Format,
    render_dir: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let seq: Sequence = match init {
        Some(_) => {
            let frames = frame_paths(dir)?;
            Sequence {
                name: String::new(),
                ground_truth: vec![None; frames.len()],
                frames: frames
                    .into_iter()
                    .map(aogtrack_bench::sequence::FrameSource::File)
                    .collect(),
                attributes: Default::default(),
            }
        }
        None => load_sequence(dir, format)?,
    };
    let init = init
        .or(seq.ground_truth.first().copied().flatten())
        .ok_or_else(|| Error::InvalidInput("no initial box".into()))?;
    if seq.is_empty() {
        return Err(Error::InvalidInput(format!("no frames in {}", dir.display())));
    }
    let mut tracker = Tracker::new(seq.frame(0)?, init, cfg)?;
    for i in 1..seq.len() {
        tracker.track(seq.frame(i)?)?;
    }
    let traj = tracker.into_trajectory();
    if let Some(d) = render_dir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        for (i, r) in traj.iter().enumerate() {
            render(d, i, &seq.frame(i)?, r)?;
        }
    }
    let mut text = String::from("frame_index,x,y,w,h,score,valid,searched_whole_frame,trackability\n");
    for r in &traj {
        text += &trajectory_line(r);
        text.push('\n');
    }
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("stdout", e))?,
    }
    Ok(())
}

fn eval(
    cfg: EngineConfig,
    protocol: Protocol,
    dataset: &Path,
    names: Option<&[String]>,
    format: Format,
    out: &Path,
) -> Result<()> {
    let seqs = load_dataset(dataset, format, names)?;
    let results = evaluate(&seqs, protocol, || AogTracker::new(cfg.clone()))?;
    for r in &results {
        let (a, b) = r.headline();
        eprintln!("{}: {a:.4} {b:.4} ({:.1} s)", r.name, r.wall_time_s);
    }
    for p in emit_report(&seqs, &results, &cfg, out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::CountAog {
            grid,
            min_part,
            overlap,
            budget,
        } => count_aog(grid, min_part, overlap, budget),
        Cmd::Learn { image, init, out } => learn(&config(&cli.common)?, &image, init, &out),
        Cmd::Parse {
            model,
            image,
            threshold,
            near,
        } => parse_image(&config(&cli.common)?, &model, &image, threshold, near),
        Cmd::Track {
            sequence,
            init,
            format,
            render,
            out,
        } => track(
            config(&cli.common)?,
            &sequence,
            init,
            format,
            render.as_deref(),
            out.as_deref(),
        ),
        Cmd::Eval {
            protocol,
            dataset,
            sequences,
            format,
            out,
        } => eval(
            config(&cli.common)?,
            protocol,
            &dataset,
            sequences.as_deref(),
            format,
            &out,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
