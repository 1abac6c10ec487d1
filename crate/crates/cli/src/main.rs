//! `blurforge` command-line tool.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags or values,
//! rejected before any file is touched), 2 on runtime failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use blurforge_core::framesim::{list_frames, load_window, DEFAULT_GAMMA, DEFAULT_MAX_FRAMES, DEFAULT_MIN_FRAMES};
use blurforge_core::manifest::{Manifest, MANIFEST_FILE};
use blurforge_core::metrics::{evaluate_pairs, pairs_from_dirs, MetricReport};
use blurforge_core::trajectory::{
    sample_params_with, DEFAULT_IMPULSE_PROB, DEFAULT_ITERATIONS, DEFAULT_MAX_LENGTH,
};
use blurforge_core::{
    apply_blur, build_dataset, build_framesim_dataset, generate_trajectory, kernel_preview, rasterize,
    read_kernel, sample_window_range, simulate_frame_blur, write_kernel, DatasetConfig, FrameSimConfig,
    ImageBuffer, NoiseSpec, ParamOverrides, SeededRng,
};
use clap::{ArgGroup, Args, Parser, Subcommand};
use serde_json::json;

const SEED_ENV: &str = "BLURFORGE_SEED";

#[derive(Debug, Parser)]
#[command(name = "blurforge", version, about = "Synthetic camera-shake blur: kernels, paired datasets and PSNR/SSIM")]
struct Cli {
    /// Print progress details to stderr
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a random camera-shake trajectory and rasterize it into a KERN1 kernel
    Kernel(KernelArgs),
    /// Convolve an image with a kernel file and optionally add Gaussian noise
    Blur(BlurArgs),
    /// Average a random window of high-frame-rate frames into a blurred/sharp pair
    Simulate(SimulateArgs),
    /// Build a paired sharp/blurred dataset from a directory of sharp images
    Dataset(DatasetArgs),
    /// Build a paired dataset by frame averaging over sequence subdirectories
    #[command(name = "framesim-dataset")]
    FramesimDataset(FramesimArgs),
    /// PSNR/SSIM over a manifest or two directories of same-named images
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Random seed (falls back to $BLURFORGE_SEED)
    #[arg(long, env = SEED_ENV)]
    seed: u64,
    /// Number of trajectory samples
    #[arg(long, default_value_t = DEFAULT_ITERATIONS, value_parser = positive_usize)]
    iterations: usize,
    /// Total path length in pixels
    #[arg(long, default_value_t = DEFAULT_MAX_LENGTH, value_parser = non_negative)]
    max_length: f64,
    /// Probability of impulsive shake
    #[arg(long, default_value_t = DEFAULT_IMPULSE_PROB, value_parser = probability)]
    impulse_prob: f64,
    /// Inertia in [0, 1); sampled from U(0, 0.7) when unset
    #[arg(long, value_parser = inertia)]
    inertia: Option<f64>,
    /// Probability of big shake; sampled from U(0, 0.2) when unset
    #[arg(long, value_parser = probability)]
    big_shake_prob: Option<f64>,
    /// Probability of Gaussian shake; sampled from U(0, 0.7) when unset
    #[arg(long, value_parser = probability)]
    gaussian_shake_prob: Option<f64>,
    /// Initial direction in radians; sampled from U(0, 2pi) when unset
    #[arg(long, value_parser = finite, allow_hyphen_values = true)]
    angle: Option<f64>,
    /// Odd canvas side in pixels (default: smallest side that fits)
    #[arg(long, value_parser = odd_side)]
    canvas: Option<usize>,
    /// Output kernel file (KERN1)
    #[arg(long)]
    out: PathBuf,
    /// Also write an 8-bit grayscale PNG preview
    #[arg(long)]
    preview: Option<PathBuf>,
    /// Also dump the trajectory as "re im" lines
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Print a JSON summary on stdout
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BlurArgs {
    #[arg(long)]
    image: PathBuf,
    /// KERN1 kernel file
    #[arg(long)]
    kernel: PathBuf,
    /// Standard deviation of additive noise, in [0, 1] sample units
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    noise_sigma: f64,
    /// Noise seed (falls back to $BLURFORGE_SEED, then 0)
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Directory of frames, taken in lexicographic order
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_FRAMES, value_parser = positive_usize)]
    min_frames: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_FRAMES, value_parser = positive_usize)]
    max_frames: usize,
    /// Gamma used to linearize frames before averaging
    #[arg(long, default_value_t = DEFAULT_GAMMA, value_parser = positive)]
    gamma: f64,
    #[arg(long, env = SEED_ENV)]
    seed: u64,
    #[arg(long)]
    out_blurred: PathBuf,
    #[arg(long)]
    out_sharp: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Square crop side; 0 keeps whole images
    #[arg(long, default_value_t = 256)]
    patch: usize,
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    patches_per_image: usize,
    /// Integer box-filter downscale applied before blurring
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    downscale: usize,
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    noise_sigma: f64,
    #[arg(long, env = SEED_ENV)]
    seed: u64,
    /// Worker threads (output does not depend on it)
    #[arg(long, default_value_t = default_workers(), value_parser = positive_usize)]
    workers: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct FramesimArgs {
    /// Directory with one subdirectory of frames per sequence
    #[arg(long)]
    frames_root: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Frames between window slots, or "inf" for one slot per sequence
    #[arg(long, default_value = "25", value_parser = stride)]
    stride: Stride,
    #[arg(long, default_value_t = DEFAULT_MIN_FRAMES, value_parser = positive_usize)]
    min_frames: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_FRAMES, value_parser = positive_usize)]
    max_frames: usize,
    #[arg(long, default_value_t = DEFAULT_GAMMA, value_parser = positive)]
    gamma: f64,
    #[arg(long, env = SEED_ENV)]
    seed: u64,
    #[arg(long, default_value_t = default_workers(), value_parser = positive_usize)]
    workers: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["manifest", "a"])))]
struct MetricsArgs {
    /// Manifest whose sharp/blurred pairs are compared
    #[arg(long, conflicts_with_all = ["a", "b"])]
    manifest: Option<PathBuf>,
    /// Reference directory
    #[arg(long, requires = "b")]
    a: Option<PathBuf>,
    /// Directory compared against --a, matched by file name
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    /// CSV output: pair_id,psnr_db,ssim rows and a final mean row
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON report (per_pair, mean_psnr, mean_ssim, failures, psnr_cap_db); "-" for stdout
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct Stride(Option<usize>);

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))
}

fn finite(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    v.is_finite().then_some(v).ok_or_else(|| format!("{s} is not finite"))
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    (v >= 0.0).then_some(v).ok_or_else(|| format!("{s} must be >= 0"))
}

fn positive(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    (v > 0.0).then_some(v).ok_or_else(|| format!("{s} must be > 0"))
}

fn probability(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    (0.0..=1.0).contains(&v).then_some(v).ok_or_else(|| format!("{s} is not in [0, 1]"))
}

fn inertia(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    (0.0..1.0).contains(&v).then_some(v).ok_or_else(|| format!("{s} is not in [0, 1)"))
}

fn positive_usize(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    (v >= 1).then_some(v).ok_or_else(|| "must be at least 1".to_string())
}

fn odd_side(s: &str) -> Result<usize, String> {
    let v = positive_usize(s)?;
    (v % 2 == 1).then_some(v).ok_or_else(|| format!("{v} is not odd"))
}

fn stride(s: &str) -> Result<Stride, String> {
    if s.eq_ignore_ascii_case("inf") {
        Ok(Stride(None))
    } else {
        positive_usize(s).map(|v| Stride(Some(v)))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let verbose = cli.verbose > 0;
    match cli.command {
        Command::Kernel(args) => kernel(args, verbose),
        Command::Blur(args) => blur(args),
        Command::Simulate(args) => simulate(args, verbose),
        Command::Dataset(args) => dataset(args, verbose),
        Command::FramesimDataset(args) => framesim_dataset(args, verbose),
        Command::Metrics(args) => metrics(args),
    }
}

fn print_json(value: serde_json::Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn kernel(args: KernelArgs, verbose: bool) -> anyhow::Result<()> {
    let overrides = ParamOverrides {
        iterations: Some(args.iterations),
        max_length: Some(args.max_length),
        impulse_prob: Some(args.impulse_prob),
        inertia: args.inertia,
        big_shake_prob: args.big_shake_prob,
        gaussian_shake_prob: args.gaussian_shake_prob,
        initial_angle: args.angle,
    };
    let mut rng = SeededRng::new(args.seed);
    let params = sample_params_with(&mut rng, &overrides);
    let traj = generate_trajectory(&params, &mut rng)?;
    let k = rasterize(&traj, args.canvas)?;
    if verbose {
        eprintln!("trajectory path length {:.6} px, canvas {}", traj.path_length(), k.width());
    }

    write_kernel(&k, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(p) = &args.preview {
        kernel_preview(&k, p)?;
    }
    if let Some(p) = &args.trajectory {
        traj.write_text(p).with_context(|| format!("writing {}", p.display()))?;
    }

    if args.json {
        print_json(json!({
            "kernel": args.out,
            "width": k.width(),
            "height": k.height(),
            "support": k.support_size(),
            "seed": args.seed,
            "params": params,
        }))
    } else {
        println!(
            "wrote {} ({}x{}, {} nonzero weights)",
            args.out.display(),
            k.width(),
            k.height(),
            k.support_size()
        );
        Ok(())
    }
}

fn blur(args: BlurArgs) -> anyhow::Result<()> {
    let img = ImageBuffer::load(&args.image)?;
    let k = read_kernel(&args.kernel)?;
    let noise = NoiseSpec {
        sigma: args.noise_sigma,
        seed: args.seed.unwrap_or(0),
    };
    let out = apply_blur(&img, &k, &noise)?;
    out.save_png(&args.out)?;
    if args.json {
        print_json(json!({
            "out": args.out,
            "width": out.width(),
            "height": out.height(),
            "kernel": [k.width(), k.height()],
            "noise_sigma": noise.sigma,
        }))
    } else {
        println!("wrote {} ({}x{})", args.out.display(), out.width(), out.height());
        Ok(())
    }
}

fn simulate(args: SimulateArgs, verbose: bool) -> anyhow::Result<()> {
    if args.min_frames > args.max_frames {
        bail!("--min-frames {} exceeds --max-frames {}", args.min_frames, args.max_frames);
    }
    let frames = list_frames(&args.frames)?;
    let mut rng = SeededRng::new(args.seed);
    let sel = sample_window_range(frames.len(), &mut rng, args.min_frames, args.max_frames)?;
    if verbose {
        eprintln!("averaging frames {}..{} of {}", sel.offset, sel.offset + sel.len, frames.len());
    }
    let window = load_window(&frames, sel, args.gamma)?;
    let (blurred, sharp) = simulate_frame_blur(&window);
    blurred.save_png(&args.out_blurred)?;
    sharp.save_png(&args.out_sharp)?;
    let middle = &frames[sel.offset + window.middle_index()];
    if args.json {
        print_json(json!({
            "offset": sel.offset,
            "frames": sel.len,
            "middle_frame": middle,
            "out_blurred": args.out_blurred,
            "out_sharp": args.out_sharp,
        }))
    } else {
        println!(
            "averaged {} frames from offset {} (sharp: {})",
            sel.len,
            sel.offset,
            middle.display()
        );
        Ok(())
    }
}

fn report_manifest(manifest: &Manifest, output: &Path, json_out: bool) -> anyhow::Result<()> {
    let path = output.join(MANIFEST_FILE);
    if json_out {
        print_json(json!({
            "manifest": path,
            "pairs": manifest.records.len(),
            "skipped": manifest.header.skipped,
        }))
    } else {
        println!("wrote {} pairs, manifest {}", manifest.records.len(), path.display());
        for s in &manifest.header.skipped {
            println!("skipped {}: {}", s.path, s.reason);
        }
        Ok(())
    }
}

fn dataset(args: DatasetArgs, verbose: bool) -> anyhow::Result<()> {
    let config = DatasetConfig {
        master_seed: args.seed,
        patch: (args.patch > 0).then_some(args.patch),
        patches_per_image: args.patches_per_image,
        downscale: args.downscale,
        noise_sigma: args.noise_sigma,
        overrides: ParamOverrides::default(),
        workers: args.workers,
    };
    if verbose {
        eprintln!("building dataset from {} with {} workers", args.input.display(), args.workers);
    }
    let manifest = build_dataset(&args.input, &args.output, &config)?;
    report_manifest(&manifest, &args.output, args.json)
}

fn framesim_dataset(args: FramesimArgs, verbose: bool) -> anyhow::Result<()> {
    let config = FrameSimConfig {
        master_seed: args.seed,
        stride: args.stride.0,
        min_frames: args.min_frames,
        max_frames: args.max_frames,
        gamma: args.gamma,
        workers: args.workers,
    };
    if verbose {
        eprintln!("averaging sequences under {}", args.frames_root.display());
    }
    let manifest = build_framesim_dataset(&args.frames_root, &args.output, &config)?;
    report_manifest(&manifest, &args.output, args.json)
}

fn metrics(args: MetricsArgs) -> anyhow::Result<()> {
    let pairs = match (&args.manifest, &args.a, &args.b) {
        (Some(m), _, _) => {
            let manifest = Manifest::read(m)?;
            manifest.metric_pairs(m.parent().unwrap_or(Path::new(".")))
        }
        (None, Some(a), Some(b)) => pairs_from_dirs(a, b)?,
        _ => unreachable!("clap enforces --manifest or --a/--b"),
    };
    let report = evaluate_pairs(&pairs)?;

    if let Some(p) = &args.csv {
        let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        report.write_csv(f)?;
    }
    let json_stdout = args.json.as_deref() == Some(Path::new("-"));
    match &args.json {
        Some(_) if json_stdout => println!("{}", report.to_json()?),
        Some(p) => std::fs::write(p, report.to_json()?).with_context(|| format!("writing {}", p.display()))?,
        None => {}
    }
    if !json_stdout {
        print_summary(&report);
    }
    for f in &report.failures {
        eprintln!("failed {}: {}", f.pair_id, f.error);
    }
    if report.per_pair.is_empty() {
        bail!("no pair could be evaluated");
    }
    Ok(())
}

fn print_summary(report: &MetricReport) {
    for p in &report.per_pair {
        println!("{}\t{:.4} dB\t{:.6}", p.pair_id, p.psnr_db, p.ssim);
    }
    if let (Some(psnr), Some(ssim)) = (report.mean_psnr, report.mean_ssim) {
        println!("mean\t{psnr:.4} dB\t{ssim:.6}\t({} pairs)", report.per_pair.len());
    }
}
