use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use glarefuse::adapter::DetectorCommand;
use glarefuse::benchmark::{generate_benchmark, write_benchmark};
use glarefuse::eval::{GroundTruth, DEFAULT_CONFIDENCES, MATCH_IOU};
use glarefuse::formats::{self, DetectionRecord};
use glarefuse::glare_mask::default_sigma;
use glarefuse::pipeline::{build_report, DetectorSource, EvalSettings, FileDetector, ImageDetections, PipelineConfig, Variant};
use glarefuse::report::{Report, ReportRow};
use glarefuse::synth::{default_domains, simulate_detector, SimDetectorSpec};
use glarefuse::{
    build_mask, fuse, harmonic_fill, inpaint_ns, DetectionSet, Error, FusionParams, GrayMask, ImageBuffer, InpaintParams,
    MaskParams, ScoreMode,
};

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "glarefuse", version, about = "Glare masking, inpainting, box fusion and domain-accuracy evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the binary glare mask of an image (PNG, 255 = inpaint).
    Mask {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        mask: MaskArgs,
    },
    /// Inpaint the glare of an image.
    Inpaint {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Precomputed mask PNG; built from the image when omitted.
        #[arg(long)]
        mask_file: Option<PathBuf>,
        /// Fill with the harmonic solver only.
        #[arg(long)]
        harmonic: bool,
        #[command(flatten)]
        mask: MaskArgs,
        #[command(flatten)]
        inpaint: InpaintArgs,
    },
    /// Fuse detection sets per image with weighted boxes fusion.
    Fuse {
        /// Detection files or directories, one per model/variant.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// `.jsonl` file, or a directory for one JSON per image.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        fusion: FusionArgs,
    },
    /// Score detections against ground truth.
    Eval {
        /// Detection sources, as `path` or `name=path`; one report row each.
        #[arg(long = "detections", required = true)]
        detections: Vec<String>,
        #[arg(long)]
        ground_truth: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
        /// Write the CSV report here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic multi-domain benchmark directory.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        images_per_domain: usize,
    },
    /// Run the full variant / detect / fuse / evaluate workflow.
    Run(RunArgs),
    /// Simulated detector for a single image; prints detection JSON.
    Simdet {
        image: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        glare: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Args, Clone)]
struct MaskArgs {
    #[arg(long, default_value_t = 170)]
    low: u8,
    #[arg(long, default_value_t = 255)]
    high: u8,
    /// Gaussian blur kernel size (odd).
    #[arg(long, default_value_t = 9)]
    blur: usize,
    /// Blur sigma; derived from the kernel size when omitted.
    #[arg(long)]
    blur_sigma: Option<f64>,
    #[arg(long, default_value_t = 2)]
    erode: usize,
    #[arg(long, default_value_t = 4)]
    dilate: usize,
    #[arg(long, default_value_t = 3)]
    morph_kernel: usize,
}

impl MaskArgs {
    fn params(&self) -> MaskParams {
        MaskParams {
            low: self.low,
            high: self.high,
            blur_kernel: self.blur,
            blur_sigma: self.blur_sigma.unwrap_or_else(|| default_sigma(self.blur)),
            erode_iters: self.erode,
            dilate_iters: self.dilate,
            morph_kernel: self.morph_kernel,
        }
    }
}

#[derive(Args, Clone)]
struct InpaintArgs {
    #[arg(long, default_value_t = 3)]
    radius: usize,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 1.0)]
    diffusion_weight: f64,
    #[arg(long, default_value_t = 2)]
    diffusion_every: usize,
}

impl InpaintArgs {
    fn params(&self) -> InpaintParams {
        InpaintParams {
            radius: self.radius,
            max_iters: self.max_iters,
            dt: self.dt,
            tol: self.tol,
            diffusion_weight: self.diffusion_weight,
            diffusion_every: self.diffusion_every,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreModeArg {
    Mean,
    WeightedMean,
}

#[derive(Args, Clone)]
struct FusionArgs {
    /// Fusion clustering IoU.
    #[arg(long, default_value_t = 0.55)]
    fusion_iou: f64,
    #[arg(long, default_value_t = 0.0)]
    skip_box_thr: f64,
    #[arg(long, value_enum, default_value = "weighted-mean")]
    score_mode: ScoreModeArg,
    /// Disable down-weighting of boxes found by few sets.
    #[arg(long)]
    no_rescale: bool,
}

impl FusionArgs {
    fn params(&self) -> FusionParams {
        FusionParams {
            iou_thr: self.fusion_iou,
            skip_box_thr: self.skip_box_thr,
            score_mode: match self.score_mode {
                ScoreModeArg::Mean => ScoreMode::Mean,
                ScoreModeArg::WeightedMean => ScoreMode::WeightedMean,
            },
            rescale_by_models: !self.no_rescale,
        }
    }
}

#[derive(Args, Clone)]
struct EvalArgs {
    /// Match IoU; a prediction must strictly exceed it.
    #[arg(long, default_value_t = MATCH_IOU)]
    iou: f64,
    /// Confidence thresholds, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CONFIDENCES.to_vec())]
    conf: Vec<f64>,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 0.9)]
    tp_rate: f64,
    #[arg(long, default_value_t = 0.8)]
    glare_fp_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    base_fp_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    jitter: f64,
}

impl SimArgs {
    fn spec(&self) -> SimDetectorSpec {
        SimDetectorSpec {
            tp_rate: self.tp_rate,
            glare_fp_rate: self.glare_fp_rate,
            base_fp_rate: self.base_fp_rate,
            jitter: self.jitter,
            ..SimDetectorSpec::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Directory of input images (PNG/JPEG).
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// Variants to detect on; `original` is always required.
    #[arg(long, value_delimiter = ',', default_value = "original,inpainted,smoothed")]
    variants: Vec<String>,
    /// `sim`, `cmd:<command line>` or `files:<dir>`.
    #[arg(long, default_value = "sim")]
    detector: String,
    /// Glare regions for the simulated detector.
    #[arg(long)]
    glare: Option<PathBuf>,
    /// External detector timeout per image, seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write overlay and mask PNGs.
    #[arg(long)]
    overlays: bool,
    #[command(flatten)]
    mask: MaskArgs,
    #[command(flatten)]
    inpaint: InpaintArgs,
    #[command(flatten)]
    fusion: FusionArgs,
    #[command(flatten)]
    eval: EvalArgs,
    #[command(flatten)]
    sim: SimArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Mask { input, output, mask } => {
            let img = ImageBuffer::load(&input)?;
            build_mask(&img, &mask.params())?.save_png(&output)?;
        }
        Command::Inpaint {
            input,
            output,
            mask_file,
            harmonic,
            mask,
            inpaint,
        } => {
            let img = ImageBuffer::load(&input)?;
            let m = match mask_file {
                Some(p) => GrayMask::load(&p)?,
                None => build_mask(&img, &mask.params())?,
            };
            let p = inpaint.params();
            let out = if harmonic {
                harmonic_fill(&img, &m, p.max_iters.max(1000), p.tol)?
            } else {
                inpaint_ns(&img, &m, &p)?
            };
            out.save_png(&output)?;
        }
        Command::Fuse { inputs, output, fusion } => fuse_files(&inputs, &output, &fusion.params())?,
        Command::Eval {
            detections,
            ground_truth,
            eval,
            output,
        } => {
            let report = eval_files(&detections, &ground_truth, &eval)?;
            print!("{}", report.to_table());
            if let Some(p) = output {
                std::fs::write(&p, report.to_csv()).map_err(|e| io_err(&p, e))?;
            }
        }
        Command::Synth {
            output,
            seed,
            images_per_domain,
        } => {
            let scenes = generate_benchmark(seed, &default_domains(), images_per_domain)?;
            write_benchmark(&output, &scenes)?;
            log::info!("wrote {} scenes to {}", scenes.len(), output.display());
        }
        Command::Run(args) => return run(args),
        Command::Simdet {
            image,
            ground_truth,
            glare,
            seed,
            sim,
        } => {
            let img = ImageBuffer::load(&image)?;
            let id = stem(&image)?;
            let gt = formats::read_ground_truth(&ground_truth)?
                .into_iter()
                .find(|g| g.image_id == id)
                .ok_or_else(|| Error::Config(format!("no ground truth for {id:?}")))?;
            let regions = match glare {
                Some(p) => formats::read_glare(&p)?
                    .into_iter()
                    .find(|r| r.image_id == id)
                    .map(|r| r.boxes())
                    .transpose()?
                    .unwrap_or_default(),
                None => Vec::new(),
            };
            let set = simulate_detector(&img, &gt, &regions, &sim.spec(), seed)?;
            println!("{}", formats::detection_json(&set));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn io_err(p: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: p.to_path_buf(),
        source: e,
    }
}

fn stem(p: &Path) -> Result<String, Error> {
    p.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::Config(format!("cannot derive an image id from {}", p.display())))
}

fn fuse_files(inputs: &[PathBuf], output: &Path, p: &FusionParams) -> Result<(), Error> {
    let mut by_image: BTreeMap<String, Vec<DetectionSet>> = BTreeMap::new();
    for (k, input) in inputs.iter().enumerate() {
        for mut set in formats::read_detections(input)? {
            if set.source_id.is_empty() {
                set.source_id = format!("input{k}");
            }
            by_image.entry(set.image_id.clone()).or_default().push(set);
        }
    }
    let fused = by_image.values().map(|sets| fuse(sets, p)).collect::<Result<Vec<_>, _>>()?;
    if output.extension().is_some_and(|e| e == "jsonl") {
        formats::write_jsonl(output, fused.iter().map(DetectionRecord::from))
    } else {
        std::fs::create_dir_all(output).map_err(|e| io_err(output, e))?;
        for s in &fused {
            formats::write_detection(&output.join(format!("{}.json", s.image_id)), s)?;
        }
        Ok(())
    }
}

fn eval_files(sources: &[String], gt_path: &Path, eval: &EvalArgs) -> Result<Report, Error> {
    let gts: HashMap<String, GroundTruth> = formats::read_ground_truth(gt_path)?
        .into_iter()
        .map(|g| (g.image_id.clone(), g))
        .collect();
    let settings = EvalSettings {
        variants: vec![Variant::Original],
        fusion: FusionParams::default(),
        confidences: eval.conf.clone(),
        iou_thr: eval.iou,
    };
    let mut rows = Vec::new();
    for src in sources {
        let (name, path) = match src.split_once('=') {
            Some((n, p)) => (n.to_owned(), PathBuf::from(p)),
            None => (stem(Path::new(src))?, PathBuf::from(src)),
        };
        let files = FileDetector::from_sets(formats::read_detections(&path)?.into_iter().map(|s| (Variant::Original, s)));
        // every ground-truth image is scored; a missing detection file counts as no detections
        let results: Vec<ImageDetections> = gts
            .keys()
            .map(|id| {
                let set = files
                    .image_ids(Variant::Original)
                    .contains(id)
                    .then(|| {
                        use glarefuse::pipeline::Detector;
                        files.detect(id, Variant::Original, &ImageBuffer::filled(1, 1, 1, 0).expect("1x1"), None)
                    })
                    .transpose()?
                    .unwrap_or_else(|| DetectionSet::new(id.clone(), name.clone(), vec![]));
                Ok(ImageDetections {
                    image_id: id.clone(),
                    sets: vec![(Variant::Original, set)],
                })
            })
            .collect::<Result<_, Error>>()?;
        let mut r = build_report(&results, &gts, &settings)?;
        let mut row: ReportRow = r.rows.remove(0);
        row.label = name;
        rows.push(row);
    }
    Ok(Report {
        confidences: eval.conf.clone(),
        rows,
    })
}

fn run(args: RunArgs) -> Result<ExitCode, Error> {
    let detector = if args.detector == "sim" {
        DetectorSource::Simulated {
            spec: args.sim.spec(),
            glare: args.glare.clone(),
        }
    } else if let Some(cmd) = args.detector.strip_prefix("cmd:") {
        DetectorSource::Command(DetectorCommand::from_env_or(Some(cmd), Duration::from_secs_f64(args.timeout))?)
    } else if args.detector == "cmd" {
        DetectorSource::Command(DetectorCommand::from_env_or(None, Duration::from_secs_f64(args.timeout))?)
    } else if let Some(dir) = args.detector.strip_prefix("files:") {
        DetectorSource::Files(PathBuf::from(dir))
    } else {
        return Err(Error::Config(format!("unknown detector {:?}", args.detector)));
    };
    let variants = args.variants.iter().map(|v| v.parse()).collect::<Result<Vec<Variant>, _>>()?;
    let cfg = PipelineConfig {
        images: args.images,
        ground_truth: args.ground_truth,
        variants,
        detector,
        mask: args.mask.params(),
        inpaint: args.inpaint.params(),
        fusion: args.fusion.params(),
        confidences: args.eval.conf,
        iou_thr: args.eval.iou,
        output: args.output,
        workers: args.workers,
        seed: args.seed,
        overlays: args.overlays,
    };
    let outcome = glarefuse::run_pipeline(&cfg)?;
    if let Some(report) = &outcome.report {
        print!("{}", report.to_table());
    }
    if outcome.partial() {
        error!("{} of {} images failed", outcome.failures.len(), outcome.failures.len() + outcome.processed.len());
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}
