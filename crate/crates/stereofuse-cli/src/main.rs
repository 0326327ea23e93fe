//! `stereofuse` command line: fuse a stereo pair with a sparse prior,
//! simulate test scenes, score results and inspect occlusion masks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stereofuse::energy::entropy_field;
use stereofuse::eval::{bmp, degrade, mse, render_scene, scene_by_name, DegradeConfig};
use stereofuse::init::initial_maps;
use stereofuse::pipeline::{fuse, FusionOutput};
use stereofuse::{io as ffio, Criterion, FusionError, FusionParams};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "stereofuse",
    about = "Dense subpixel disparity from a stereo pair and a sparse depth prior",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse a rectified stereo pair with a sparse disparity prior.
    Fuse(FuseArgs),
    /// Render a synthetic scene and a degraded prior for it.
    Simulate(SimulateArgs),
    /// Score a disparity map against ground truth.
    Eval(EvalArgs),
    /// Compute and visualize occlusion masks and entropy for a pair + prior.
    Masks(MasksArgs),
}

/// Parameter overrides shared by fuse and masks.
#[derive(Args)]
struct ParamArgs {
    /// key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Correlation criterion: ecc or emcc.
    #[arg(long)]
    criterion: Option<String>,
    /// Propagation radius around the parent disparity.
    #[arg(long)]
    r: Option<i32>,
    /// Energy acceptance threshold.
    #[arg(long = "T", visible_alias = "threshold")]
    t_threshold: Option<f64>,
    /// Regularizer weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Depth-consistency bandwidth of the aggregation weights.
    #[arg(long)]
    gamma_d: Option<f64>,
    /// Correlation window side (odd, >= 3).
    #[arg(long)]
    window: Option<i32>,
    /// Disparity search range as dmin:dmax.
    #[arg(long)]
    range: Option<String>,
    /// Force t = 0 everywhere (integer disparities).
    #[arg(long)]
    no_subpixel: bool,
}

impl ParamArgs {
    fn build(&self) -> Result<FusionParams, FusionError> {
        let mut p = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    FusionError::Config(format!("{}: {e}", path.display()))
                })?;
                FusionParams::from_config_str(&text)?
            }
            None => FusionParams::default(),
        };
        if let Some(c) = &self.criterion {
            p.criterion = c.parse::<Criterion>()?;
        }
        if let Some(r) = self.r {
            p.r = r;
        }
        if let Some(t) = self.t_threshold {
            p.t_threshold = t;
        }
        if let Some(l) = self.lambda {
            p.lambda = l;
        }
        if let Some(g) = self.gamma_d {
            p.gamma_d = g;
        }
        if let Some(w) = self.window {
            p.set_key("window", &w.to_string())?;
        }
        if let Some(range) = &self.range {
            let (lo, hi) = range.split_once(':').ok_or_else(|| {
                FusionError::Config(format!("range must be dmin:dmax, got {range}"))
            })?;
            p.d_min = lo
                .trim()
                .parse()
                .map_err(|_| FusionError::Config(format!("invalid d_min: {lo}")))?;
            p.d_max = hi
                .trim()
                .parse()
                .map_err(|_| FusionError::Config(format!("invalid d_max: {hi}")))?;
        }
        if self.no_subpixel {
            p.subpixel = false;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args)]
struct FuseArgs {
    /// Left (reference) image, PNG or PGM.
    #[arg(long)]
    left: PathBuf,
    /// Right image.
    #[arg(long)]
    right: PathBuf,
    /// Sparse prior: CSV x,y,d or a PFM with gaps.
    #[arg(long)]
    prior: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Optional color guidance for the left view (defaults to --left).
    #[arg(long)]
    guide_left: Option<PathBuf>,
    /// Optional color guidance for the right view (defaults to --right).
    #[arg(long)]
    guide_right: Option<PathBuf>,
    /// Skip gap filling; unassigned pixels stay invalid in the PFM.
    #[arg(long)]
    no_fill: bool,
    /// Also write occlusion-mask and entropy visualizations.
    #[arg(long)]
    dump_masks: bool,
    /// Write the growth trace as trace.csv.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scene name (two_planes, single_plane)...
    #[arg(long, conflicts_with = "gt")]
    scene: Option<String>,
    /// ...or an existing ground-truth PFM to degrade into a prior.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "sim")]
    out: PathBuf,
    /// Prior degradation: grid subsampling factor.
    #[arg(long, default_value_t = 10)]
    factor: usize,
    /// Prior degradation: colored-noise amplitude in pixels.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Prior degradation: mean additive bias in pixels.
    #[arg(long, default_value_t = 2.0)]
    bias: f64,
    /// Prior degradation: noise wavelength in pixels.
    #[arg(long, default_value_t = 40.0)]
    period: f64,
    /// RNG seed for the degradation noise phases.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Disparity map under test (PFM).
    #[arg(long)]
    result: PathBuf,
    /// Ground-truth disparity map (PFM); invalid pixels are skipped.
    #[arg(long)]
    gt: PathBuf,
    /// Optional occlusion mask PNG; nonzero pixels are excluded.
    #[arg(long)]
    occlusion: Option<PathBuf>,
    /// Comma-separated BMP thresholds in pixels.
    #[arg(long, default_value = "0.5,1,2")]
    delta: String,
    /// Optional path for the JSON report (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MasksArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    prior: PathBuf,
    #[arg(long, default_value = "masks")]
    out: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("FUSE_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // ignore failure: the pool may already be initialized in tests
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("error: FUSE_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let result = match cli.command {
        Command::Fuse(args) => cmd_fuse(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Masks(args) => cmd_masks(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                FusionError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), FusionError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| FusionError::InvalidInput(format!("{}: {e}", dir.display())))
}

/// Histogram of accepted growth energies over [0, 2] (last bin catches the rest).
fn energy_histogram(out: &FusionOutput, bins: usize) -> Vec<usize> {
    let mut hist = vec![0usize; bins];
    for (i, &parent) in out.grown.parent.iter().enumerate() {
        if parent == -2 {
            continue;
        }
        let e = out.grown.energy[i];
        let bin = ((e / 2.0 * bins as f64) as usize).min(bins - 1);
        hist[bin] += 1;
    }
    hist
}

fn cmd_fuse(args: FuseArgs) -> Result<(), FusionError> {
    let params = args.params.build()?;
    let left = ffio::load_gray(&args.left)?;
    let right = ffio::load_gray(&args.right)?;
    let guide_left = ffio::load_color(args.guide_left.as_ref().unwrap_or(&args.left))?;
    let guide_right = ffio::load_color(args.guide_right.as_ref().unwrap_or(&args.right))?;
    let prior = ffio::read_prior(&args.prior)?;
    ensure_dir(&args.out)?;

    let start = Instant::now();
    let output = fuse(
        &left,
        &right,
        &guide_left,
        &guide_right,
        &prior,
        &params,
        !args.no_fill,
        args.trace,
    )?;
    let total_s = start.elapsed().as_secs_f64();

    ffio::write_pfm(&args.out.join("disparity.pfm"), &output.field)?;
    ffio::write_disparity_png(
        &args.out.join("disparity.png"),
        &output.field,
        Some(&output.maps.masks),
        params.d_min as f64,
        params.d_max as f64,
    )?;
    if args.dump_masks {
        ffio::write_masks_png(&args.out.join("masks.png"), &output.maps.masks)?;
        ffio::write_scalar_png(&args.out.join("entropy.png"), &output.entropy)?;
    }
    if args.trace {
        std::fs::write(args.out.join("trace.csv"), output.grown.trace_csv())?;
    }

    let stats = json!({
        "schema_version": SCHEMA_VERSION,
        "width": left.width(),
        "height": left.height(),
        "seeds": prior.len(),
        "params": params,
        "density_pre_fill": output.density_pre_fill,
        "density_final": output.field.density(),
        "fully_dense": output.fully_dense,
        "pops": output.grown.pops,
        "energy_histogram": { "range": [0.0, 2.0], "counts": energy_histogram(&output, 20) },
        "runtime_s": { "init": output.timings.init, "entropy": output.timings.entropy,
                        "grow": output.timings.grow, "fill": output.timings.fill,
                        "total": total_s },
    });
    std::fs::write(
        args.out.join("stats.json"),
        serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n",
    )?;
    println!(
        "fused {}x{}: density {:.1}% -> {:.1}%, {} pops, {:.2}s",
        left.width(),
        left.height(),
        100.0 * output.density_pre_fill,
        100.0 * output.field.density(),
        output.grown.pops,
        total_s
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), FusionError> {
    let cfg = DegradeConfig {
        factor: args.factor,
        bias_amplitude: args.bias,
        noise_sigma: args.sigma,
        noise_period: args.period,
    };
    ensure_dir(&args.out)?;
    let gt = match (&args.scene, &args.gt) {
        (Some(name), None) => {
            let spec = scene_by_name(name).ok_or_else(|| {
                FusionError::Config(format!("unknown scene: {name}"))
            })?;
            let scene = render_scene(&spec)?;
            ffio::write_gray_16bit(&args.out.join("left.png"), &scene.left)?;
            ffio::write_gray_16bit(&args.out.join("right.png"), &scene.right)?;
            ffio::write_color_png(&args.out.join("guide_left.png"), &scene.left_color)?;
            ffio::write_color_png(&args.out.join("guide_right.png"), &scene.right_color)?;
            // occluded pixels become invalid in the stored ground truth,
            // so eval skips them without a separate mask file
            let mut gt = scene.gt.clone();
            for y in 0..gt.height() {
                for x in 0..gt.width() {
                    if scene.occluded[y * gt.width() + x] {
                        gt.invalidate(x, y);
                    }
                }
            }
            gt
        }
        (None, Some(path)) => ffio::read_pfm(path)?,
        _ => {
            return Err(FusionError::Config(
                "exactly one of --scene or --gt is required".into(),
            ))
        }
    };
    let prior = degrade(&gt, &cfg, args.seed)?;
    ffio::write_pfm(&args.out.join("gt.pfm"), &gt)?;
    ffio::write_prior_csv(&args.out.join("prior.csv"), &prior)?;
    println!(
        "simulated {}x{}: {} prior seeds -> {}",
        gt.width(),
        gt.height(),
        prior.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), FusionError> {
    let result = ffio::read_pfm(&args.result)?;
    let gt = ffio::read_pfm(&args.gt)?;
    let occluded = match &args.occlusion {
        Some(path) => {
            let (w, h, mask) = ffio::read_bool_mask(path)?;
            if w != gt.width() || h != gt.height() {
                return Err(FusionError::DimensionMismatch(format!(
                    "occlusion mask is {w}x{h}, ground truth {}x{}",
                    gt.width(),
                    gt.height()
                )));
            }
            mask
        }
        None => vec![false; gt.width() * gt.height()],
    };
    let mut deltas = Vec::new();
    for part in args.delta.split(',') {
        let d: f64 = part.trim().parse().map_err(|_| {
            FusionError::Config(format!("invalid delta: {part}"))
        })?;
        if d <= 0.0 {
            return Err(FusionError::Config(format!("delta must be > 0, got {d}")));
        }
        deltas.push(d);
    }
    let mut bmp_entries = Vec::new();
    for &d in &deltas {
        bmp_entries.push(json!({ "delta": d, "percent": bmp(&result, &gt, &occluded, d)? }));
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "result": args.result.display().to_string(),
        "gt": args.gt.display().to_string(),
        "bmp": bmp_entries,
        "mse": mse(&result, &gt, &occluded)?,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serialize") + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_masks(args: MasksArgs) -> Result<(), FusionError> {
    let params = args.params.build()?;
    let left = ffio::load_gray(&args.left)?;
    let guide_left = ffio::load_color(&args.left)?;
    let guide_right = ffio::load_color(&args.right)?;
    let prior = ffio::read_prior(&args.prior)?;
    ensure_dir(&args.out)?;

    let maps = initial_maps(&prior, &guide_left, &guide_right, &params)?;
    let entropy = entropy_field(&left, params.window_half);
    ffio::write_masks_png(&args.out.join("masks.png"), &maps.masks)?;
    ffio::write_scalar_png(&args.out.join("entropy.png"), &entropy)?;
    ffio::write_pfm(&args.out.join("d0_left.pfm"), &maps.d0_left)?;
    ffio::write_disparity_png(
        &args.out.join("d0_left.png"),
        &maps.d0_left,
        Some(&maps.masks),
        params.d_min as f64,
        params.d_max as f64,
    )?;
    let count = |v: &[bool]| v.iter().filter(|&&b| b).count();
    println!(
        "masks {}x{}: stereo-occluded {}, depth-occluded {}",
        maps.d0_left.width(),
        maps.d0_left.height(),
        count(&maps.masks.stereo_occ),
        count(&maps.masks.depth_occ)
    );
    Ok(())
}
