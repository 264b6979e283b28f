//! Command-line front end: fuse, evaluate, rank, simulate, bench.
//!
//! Exit codes: 0 success, 1 usage or validation failure, 2 runtime failure.
//! `DEPTHFUSE_LOG` controls the log level.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use depthfuse::fusion::ImageStack;
use depthfuse::metrics::{self, MetricParams};
use depthfuse::pipeline::{self, PipelineParams, StageTimings};
use depthfuse::simulate::{self, SceneSpec};
use depthfuse::{io, Calibration};

#[derive(Parser)]
#[command(
    name = "depthfuse",
    version,
    about = "Depth-assisted all-in-focus imaging pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel stages (0 = available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Simulator seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: preprocess depth, segment, select, compose.
    Fuse {
        #[command(flatten)]
        common: CommonOpts,
        /// Raw depth map (16-bit PGM, millimeters).
        #[arg(long)]
        depth: Option<PathBuf>,
        /// Multi-focus source images (PNG), at least two, in focus order.
        #[arg(long, num_args = 2..)]
        sources: Vec<PathBuf>,
        /// Calibration JSON.
        #[arg(long)]
        calib: Option<PathBuf>,
    },
    /// Score a fused image against its two sources with six quality metrics.
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
        source_a: PathBuf,
        source_b: PathBuf,
        fused: PathBuf,
    },
    /// Score and rank methods from a CSV of per-scene metric values.
    Rank {
        #[command(flatten)]
        common: CommonOpts,
        /// Value table (`scene,metric,<method>...`); defaults to the bundled
        /// reference table.
        table: Option<PathBuf>,
    },
    /// Render a synthetic multi-focus dataset from a scene spec.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        spec: PathBuf,
    },
    /// Median per-stage pipeline timing on a rendered scene.
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        spec: PathBuf,
        /// Pipeline repetitions.
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

/// On-disk run configuration. Relative paths resolve against the config
/// file's directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    calibration: Option<PathBuf>,
    depth: Option<PathBuf>,
    #[serde(default)]
    sources: Vec<PathBuf>,
    output_dir: Option<PathBuf>,
    threads: Option<usize>,
    seed: Option<u64>,
    #[serde(default)]
    pipeline: PipelineParams,
    #[serde(default)]
    metrics: MetricParams,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Tags a library error with the pipeline stage it came from.
fn at_stage<T>(stage: &str, r: depthfuse::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Runtime(format!("{stage}: {e}")))
}

/// Input validation failures map to the usage exit code.
fn validating<T>(what: &str, r: depthfuse::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEPTHFUSE_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1u8,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fuse {
            common,
            depth,
            sources,
            calib,
        } => cmd_fuse(common, depth, sources, calib),
        Command::Evaluate {
            common,
            source_a,
            source_b,
            fused,
        } => cmd_evaluate(common, source_a, source_b, fused),
        Command::Rank { common, table } => cmd_rank(common, table),
        Command::Simulate { common, spec } => cmd_simulate(common, spec),
        Command::Bench { common, spec, reps } => cmd_bench(common, spec, reps),
    }
}

fn load_config(common: &CommonOpts) -> CliResult<RunConfig> {
    let Some(path) = &common.config else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    let mut config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    // Resolve relative paths against the config location.
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let rebase = |p: &mut Option<PathBuf>| {
        if let Some(v) = p.as_mut() {
            if v.is_relative() {
                *v = base.join(&v);
            }
        }
    };
    rebase(&mut config.calibration);
    rebase(&mut config.depth);
    rebase(&mut config.output_dir);
    for s in &mut config.sources {
        if s.is_relative() {
            *s = base.join(&s);
        }
    }
    Ok(config)
}

fn init_threads(common: &CommonOpts, config: &RunConfig, default: Option<usize>) -> CliResult<()> {
    let threads = common.threads.or(config.threads).or(default).unwrap_or(0);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if threads > 0 {
        builder = builder.num_threads(threads);
    }
    builder
        .build_global()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))
}

fn require_out(common: &CommonOpts, config: &RunConfig) -> CliResult<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| CliError::usage("an output directory is required (--out DIR)"))
}

fn require_file(what: &str, path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "{what} `{}` does not exist",
            path.display()
        )))
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_fuse(
    common: CommonOpts,
    depth: Option<PathBuf>,
    sources: Vec<PathBuf>,
    calib: Option<PathBuf>,
) -> CliResult<()> {
    let config = load_config(&common)?;
    // Validate the whole run before touching any output.
    let depth_path = depth
        .or_else(|| config.depth.clone())
        .ok_or_else(|| CliError::usage("a depth map is required (--depth PATH)"))?;
    let source_paths = if sources.is_empty() {
        config.sources.clone()
    } else {
        sources
    };
    if source_paths.len() < 2 {
        return Err(CliError::usage(
            "at least two source images are required (--sources A B ...)",
        ));
    }
    let calib_path = calib
        .or_else(|| config.calibration.clone())
        .ok_or_else(|| CliError::usage("a calibration file is required (--calib PATH)"))?;
    let out_dir = require_out(&common, &config)?;
    require_file("depth map", &depth_path)?;
    require_file("calibration", &calib_path)?;
    for s in &source_paths {
        require_file("source image", s)?;
    }
    validating("pipeline parameters", config.pipeline.ad.validate())?;
    validating("pipeline parameters", config.pipeline.seg.validate())?;
    let calibration = validating("calibration", Calibration::from_json_file(&calib_path))?;
    init_threads(&common, &config, None)?;

    let raw_depth = at_stage("read depth", io::read_depth_pgm(&depth_path))?;
    let mut images = Vec::new();
    for p in &source_paths {
        images.push(at_stage("read sources", io::read_color_png(p))?);
    }
    let stack = validating("source stack", ImageStack::new(images))?;

    // Pipeline stages, individually timed and tagged.
    let start = Instant::now();
    let preprocessed = at_stage(
        "preprocess",
        depthfuse::depthprep::preprocess(
            &raw_depth,
            &calibration,
            &config.pipeline.ad,
            stack.size(),
        ),
    )?;
    let t_pre = start.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let segmentation = at_stage(
        "segment",
        depthfuse::segment::segment_depth(&preprocessed, &calibration.optics, &config.pipeline.seg),
    )?;
    let t_seg = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let labels = at_stage(
        "select",
        depthfuse::fusion::select_in_focus(&stack, &segmentation),
    )?;
    let fused = at_stage("select", depthfuse::fusion::fuse(&stack, &labels))?;
    let t_sel = t.elapsed().as_secs_f64() * 1e3;
    let total = start.elapsed().as_secs_f64() * 1e3;

    let stats = at_stage(
        "stats",
        depthfuse::segment::region_stats(&segmentation, &preprocessed, &calibration.optics),
    )?;

    log::info!(
        "fused {} sources, {} regions, {:.1} ms",
        stack.len(),
        segmentation.region_count(),
        total
    );

    create_dir(&out_dir)?;
    at_stage(
        "write",
        io::write_depth_pgm(&out_dir.join("preprocessed_depth.pgm"), &preprocessed),
    )?;
    at_stage(
        "write",
        segmentation.write_pgm(&out_dir.join("segmentation.pgm")),
    )?;
    at_stage(
        "write",
        depthfuse::segment::write_region_stats(&out_dir.join("region_stats.json"), &stats),
    )?;
    at_stage("write", labels.write_pgm(&out_dir.join("labels.pgm")))?;
    if stack.len() == 2 {
        let weights = at_stage("write", depthfuse::fusion::weight_map(&labels, 1))?;
        at_stage("write", weights.write_pgm(&out_dir.join("weights.pgm")))?;
    }
    at_stage(
        "write",
        io::write_color_png(&out_dir.join("fused.png"), &fused),
    )?;
    let timings = StageTimings {
        preprocess_ms: t_pre,
        segment_ms: t_seg,
        select_ms: t_sel,
        total_ms: total,
    };
    let timing_json = serde_json::to_string_pretty(&timings)
        .map_err(|e| CliError::Runtime(format!("timings: {e}")))?;
    write_text(&out_dir.join("timings.json"), &timing_json)?;
    println!(
        "fuse: {} regions, preprocess {:.1} ms, segment {:.1} ms, select {:.1} ms",
        segmentation.region_count(),
        t_pre,
        t_seg,
        t_sel
    );
    Ok(())
}

fn cmd_evaluate(
    common: CommonOpts,
    source_a: PathBuf,
    source_b: PathBuf,
    fused: PathBuf,
) -> CliResult<()> {
    let config = load_config(&common)?;
    for p in [&source_a, &source_b, &fused] {
        require_file("image", p)?;
    }
    let out_dir = require_out(&common, &config)?;
    init_threads(&common, &config, None)?;
    let a = validating("source A", io::read_color_png(&source_a))?;
    let b = validating("source B", io::read_color_png(&source_b))?;
    let f = validating("fused image", io::read_color_png(&fused))?;
    let (report, failures) = at_stage(
        "evaluate",
        metrics::evaluate_all(&a, &b, &f, &config.metrics),
    )?;
    for fail in &failures {
        log::warn!("metric {} failed: {}", fail.metric, fail.error);
    }
    create_dir(&out_dir)?;
    write_text(&out_dir.join("metrics.csv"), &report.to_csv())?;
    print!("{}", report.to_markdown());
    Ok(())
}

fn cmd_rank(common: CommonOpts, table: Option<PathBuf>) -> CliResult<()> {
    let config = load_config(&common)?;
    let text = match &table {
        Some(path) => {
            require_file("table", path)?;
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?
        }
        None => metrics::rank::REFERENCE_TABLE_CSV.to_string(),
    };
    let out_dir = require_out(&common, &config)?;
    let input = validating("rank table", metrics::parse_rank_csv(&text))?;
    let scored = at_stage("rank", metrics::rank_methods(&input))?;
    create_dir(&out_dir)?;
    write_text(&out_dir.join("rank_summary.csv"), &scored.summary_csv())?;
    write_text(&out_dir.join("rank_scores.csv"), &scored.scores_csv())?;
    print!("{}", scored.summary_markdown());
    Ok(())
}

fn cmd_simulate(common: CommonOpts, spec_path: PathBuf) -> CliResult<()> {
    let config = load_config(&common)?;
    require_file("scene spec", &spec_path)?;
    let out_dir = require_out(&common, &config)?;
    let mut spec = validating("scene spec", SceneSpec::from_json_file(&spec_path))?;
    if let Some(seed) = common.seed.or(config.seed) {
        spec.seed = seed;
    }
    init_threads(&common, &config, None)?;
    let manifest = at_stage("simulate", simulate::write_scene_bundle(&out_dir, &spec))?;
    println!(
        "simulate: wrote {} sources and depth maps to {}",
        manifest.sources.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_bench(common: CommonOpts, spec_path: PathBuf, reps: usize) -> CliResult<()> {
    let config = load_config(&common)?;
    require_file("scene spec", &spec_path)?;
    if reps == 0 {
        return Err(CliError::usage("reps must be at least 1"));
    }
    let mut spec = validating("scene spec", SceneSpec::from_json_file(&spec_path))?;
    if let Some(seed) = common.seed.or(config.seed) {
        spec.seed = seed;
    }
    // The runtime envelope is defined single-threaded.
    init_threads(&common, &config, Some(1))?;
    let scene = at_stage("render", simulate::render_stack(&spec))?;
    let degraded = at_stage("degrade", simulate::degrade_depth(&scene.true_depth, &spec))?;
    let calibration = spec.calibration();

    let mut samples: Vec<StageTimings> = Vec::with_capacity(reps);
    for _ in 0..reps {
        let out = at_stage(
            "pipeline",
            pipeline::run(&degraded, &scene.stack, &calibration, &config.pipeline),
        )?;
        samples.push(out.timings);
    }
    let median = |get: fn(&StageTimings) -> f64| {
        let mut values: Vec<f64> = samples.iter().map(get).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values[values.len() / 2]
    };
    let summary = StageTimings {
        preprocess_ms: median(|t| t.preprocess_ms),
        segment_ms: median(|t| t.segment_ms),
        select_ms: median(|t| t.select_ms),
        total_ms: median(|t| t.total_ms),
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Runtime(format!("bench: {e}")))?;
    if let Some(out_dir) = common.out.clone().or_else(|| config.output_dir.clone()) {
        create_dir(&out_dir)?;
        write_text(&out_dir.join("bench.json"), &json)?;
    }
    println!("{json}");
    Ok(())
}
