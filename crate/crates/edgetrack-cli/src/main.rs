//! Command line front end for the tracking pipeline.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 invalid config, 4 runtime
//! failure. Scripts key off these, keep them stable.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgetrack::bench::{self, reference, BenchConfig, BenchError, SyntheticSceneSpec};
use edgetrack::config::FlatConfig;
use edgetrack::pipeline::{self, ErrorClass, PipelineConfig, PipelineError};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(
    name = "edgetrack",
    version,
    about = "Detect and track moving objects in video"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process a video source and write masks, overlays and a track log.
    Run(RunArgs),
    /// Sweep pipeline throughput over synthetic scenes with 1..n objects.
    Bench(BenchArgs),
    /// Render a synthetic scene as a PGM image sequence.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; command line flags win over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Image sequence directory or .y4m file.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Background model seed.
    #[arg(long)]
    seed: Option<u64>,
    /// `fallback` or `model:<weights.json>`.
    #[arg(long)]
    tracker: Option<String>,
    /// Pace frames by timestamp and drop stale ones, like a live camera.
    #[arg(long)]
    live: bool,
    /// Extra config override, repeatable (`--set blobs.min_area=200`).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the effective config and exit without processing.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma separated object counts to sweep.
    #[arg(long, default_value = "1,2,3,4,5,6")]
    objects: String,
    /// Output directory for sequences, CSVs and raw timing dumps.
    #[arg(long, default_value = "bench_out")]
    out: PathBuf,
    /// Frames measured per object count.
    #[arg(long, default_value_t = 300)]
    frames: u32,
    /// Frames discarded after all objects are tracked.
    #[arg(long, default_value_t = 50)]
    warmup: u32,
    /// Scene seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Text file with instantaneous milliwatt readings, sampled at 1 Hz.
    #[arg(long)]
    power_sensor: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Number of objects in the scene.
    #[arg(long, default_value_t = 1)]
    objects: u32,
    /// Frames to render.
    #[arg(long, default_value_t = 300)]
    frames: u32,
    /// Directory the PGM frames are written into.
    #[arg(long)]
    out: PathBuf,
    /// Scene seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // malformed invocation
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
        Err(e) => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn pipeline_exit(e: &PipelineError) -> ExitCode {
    let code = match e.class() {
        ErrorClass::Io => EXIT_IO,
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Runtime => EXIT_RUNTIME,
    };
    ExitCode::from(code)
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("edgetrack: {msg}");
    ExitCode::from(code)
}

/// Builds the effective config: file first, then flag overrides on top.
fn effective_config(args: &RunArgs) -> Result<PipelineConfig, ExitCode> {
    let mut flat = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| fail(EXIT_IO, format_args!("cannot read {}: {e}", path.display())))?;
            FlatConfig::parse(&text)
                .map_err(|e| fail(EXIT_CONFIG, format_args!("{}: {e}", path.display())))?
        }
        None => FlatConfig::default(),
    };
    if let Some(source) = &args.source {
        flat.set("source.path", source.display().to_string());
    }
    if let Some(out) = &args.out {
        flat.set("sink.dir", out.display().to_string());
    }
    if let Some(seed) = args.seed {
        flat.set("segmenter.seed", seed.to_string());
    }
    if let Some(tracker) = &args.tracker {
        flat.set("tracker.kind", tracker.clone());
    }
    if args.live {
        flat.set("pipeline.drop_policy", "drop_to_latest");
    }
    for pair in &args.set {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(fail(
                EXIT_USAGE,
                format_args!("--set needs KEY=VALUE, got `{pair}`"),
            ));
        };
        flat.set(key.trim(), value.trim());
    }
    PipelineConfig::from_flat(flat).map_err(|e| fail(EXIT_CONFIG, e))
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let config = match effective_config(&args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if args.dump_config {
        print!("{}", config.dump());
        return ExitCode::SUCCESS;
    }
    match pipeline::run(&config) {
        Ok(summary) => match serde_json::to_string(&summary) {
            Ok(json) => {
                println!("{json}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_RUNTIME, e),
        },
        Err(e) => {
            eprintln!("edgetrack: {e}");
            pipeline_exit(&e)
        }
    }
}

fn parse_object_counts(text: &str) -> Result<Vec<u32>, String> {
    let counts: Result<Vec<u32>, _> = text.split(',').map(|t| t.trim().parse::<u32>()).collect();
    match counts {
        Ok(c) if !c.is_empty() && c.iter().all(|&n| n >= 1) => Ok(c),
        Ok(_) => Err("--objects needs counts of at least 1".into()),
        Err(e) => Err(format!("--objects: {e}")),
    }
}

fn bench_exit(e: &BenchError) -> ExitCode {
    match e {
        BenchError::Io(_) | BenchError::Video(_) => ExitCode::from(EXIT_IO),
        BenchError::Pipeline(p) => pipeline_exit(p),
        BenchError::NeverWarm { .. }
        | BenchError::NotSustained { .. }
        | BenchError::TooShort { .. } => ExitCode::from(EXIT_RUNTIME),
    }
}

fn write_file<F>(path: &Path, write: F) -> std::io::Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
{
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write(&mut w)
}

fn cmd_bench(args: BenchArgs) -> ExitCode {
    let objects = match parse_object_counts(&args.objects) {
        Ok(o) => o,
        Err(msg) => return fail(EXIT_USAGE, msg),
    };
    let cfg = BenchConfig {
        warmup_frames: args.warmup,
        measure_frames: args.frames,
        seed: args.seed,
        power_sensor: args.power_sensor.clone(),
        ..BenchConfig::default()
    };
    let records = match bench::measure(&objects, &cfg, &args.out) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("edgetrack: bench: {e}");
            return bench_exit(&e);
        }
    };
    let csv = args.out.join("bench.csv");
    let overlay = args.out.join("jetson_tx2_reference.csv");
    let written = write_file(&csv, |w| bench::write_csv(&records, &cfg, w))
        .and_then(|_| write_file(&overlay, |w| reference::write_reference_csv(w)));
    if let Err(e) = written {
        return fail(EXIT_IO, e);
    }
    for r in &records {
        println!(
            "n={} fps={:.2} mean={:.2}ms p50={:.2}ms p99={:.2}ms over {} frames",
            r.n_objects, r.fps, r.mean_ms, r.p50_ms, r.p99_ms, r.frames
        );
    }
    println!("wrote {}", csv.display());
    ExitCode::SUCCESS
}

fn cmd_gen(args: GenArgs) -> ExitCode {
    let spec = SyntheticSceneSpec::new(args.objects, args.frames, args.seed);
    match bench::generate_sequence(&spec, &args.out) {
        Ok(n) => {
            println!("wrote {n} frames to {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_IO, e),
    }
}
