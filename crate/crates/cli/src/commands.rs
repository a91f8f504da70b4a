//! Subcommand implementations. Each runner takes its parsed arguments,
//! does the work through the library crates, and reports through stdout;
//! errors bubble up to main for the exit code.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, ensure, Context, Result};
use clap::{Args, Subcommand};
use mepsnet_model::{dump_expert_features, grad_audit, load_model, MepsNet};
use quality_metrics::{evaluate_split, EvalReport};
use serde::Serialize;
use shdd_synth::{
    generate_dataset, pink_noise_field, radial_power_slope, write_synthetic_clean,
    GenerateConfig, RgbBuffer, ShddLevel,
};
use tensor_core::{Graph, Rng};
use train_optim::{load_split, AdamState, MODEL_FILE, OPTIM_FILE};

use crate::appconfig::{preset, AppConfig};

#[derive(Args)]
pub struct GenerateArgs {
    /// Directory of clean source PNGs
    #[arg(
        long,
        value_name = "DIR",
        required_unless_present = "synthetic_clean",
        conflicts_with = "synthetic_clean"
    )]
    pub clean: Option<PathBuf>,

    /// Synthesize N clean images under <out>/synthetic-clean instead
    #[arg(long, value_name = "N")]
    pub synthetic_clean: Option<usize>,

    /// Side length of synthesized clean images
    #[arg(long, value_name = "PX", default_value_t = 128)]
    pub synthetic_size: usize,

    /// Distortion severity: easy, moderate, or difficult
    #[arg(long, default_value = "moderate")]
    pub level: String,

    /// Master seed for split layouts and distortion draws
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Dataset root to create
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Clean images assigned to the train split
    #[arg(long, value_name = "N")]
    pub train_count: Option<usize>,

    /// Clean images assigned to the val split
    #[arg(long, value_name = "N")]
    pub val_count: Option<usize>,

    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

// echoes omit --threads: outputs are thread-invariant, so it is not
// part of what a re-run needs
#[derive(Serialize)]
struct GenerateEcho {
    clean: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    synthetic_clean: Option<usize>,
    synthetic_size: usize,
    level: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    val_count: Option<usize>,
}

#[derive(Serialize)]
struct GenerateEchoDoc {
    generate: GenerateEcho,
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let level = ShddLevel::parse(&args.level)?;
    let clean_dir = match (&args.clean, args.synthetic_clean) {
        (Some(dir), None) => dir.clone(),
        (None, Some(n)) => {
            ensure!(n > 0, "--synthetic-clean needs at least one image");
            let dir = args.out.join("synthetic-clean");
            let written = write_synthetic_clean(&dir, n, args.synthetic_size, args.seed)?;
            println!(
                "synthesized {} clean images under {}",
                written.len(),
                dir.display()
            );
            dir
        }
        _ => unreachable!("clap enforces exactly one clean source"),
    };

    let config = GenerateConfig {
        clean_dir: clean_dir.clone(),
        out_dir: args.out.clone(),
        level,
        master_seed: args.seed,
        threads: args.threads,
        train_count: args.train_count,
        val_count: args.val_count,
    };
    let report = generate_dataset(&config)?;

    let echo = GenerateEchoDoc {
        generate: GenerateEcho {
            clean: clean_dir,
            synthetic_clean: args.synthetic_clean,
            synthetic_size: args.synthetic_size,
            level: args.level.clone(),
            seed: args.seed,
            train_count: args.train_count,
            val_count: args.val_count,
        },
    };
    let echo_path = args.out.join("config.toml");
    fs::write(&echo_path, toml::to_string_pretty(&echo)?)
        .with_context(|| format!("writing {}", echo_path.display()))?;

    if report.warnings > 0 {
        eprintln!("{} warnings during generation (see stderr above)", report.warnings);
    }
    println!(
        "clean sources: {} (train {}, val {}, test {})",
        report.images, report.train_images, report.val_images, report.test_images
    );
    println!("distorted variants written: {}", report.variants_written);
    println!("manifest: {}", report.manifest_path.display());
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset root produced by `generate`
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,

    /// Output directory for checkpoints and the training log
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// TOML config file; defaults are the desk-scale settings
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one config key, e.g. --set train.iters=50 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Continue from the checkpoints already in --out
    #[arg(long)]
    pub resume: bool,

    /// Keep per-iteration lines out of stdout (train.log still gets them)
    #[arg(long)]
    pub quiet: bool,
}

/// Forwards the training log to a file and, unless quiet, to stdout.
struct Tee {
    file: fs::File,
    stdout: bool,
}

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.file.write_all(buf)?;
        if self.stdout {
            io::stdout().write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.file.flush()?;
        if self.stdout {
            io::stdout().flush()?;
        }
        Ok(())
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let cfg = AppConfig::resolve(args.config.as_deref(), &args.set)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    cfg.echo(&args.out)?;

    let set = load_split(&args.data, "train")?;
    println!(
        "loaded {} training pairs from {}",
        set.len(),
        args.data.display()
    );

    let (mut model, mut state): (MepsNet<f32>, AdamState<f32>) = if args.resume {
        let model = load_model(&args.out.join(MODEL_FILE))?;
        ensure!(
            *model.config() == cfg.model,
            "checkpoint architecture {:?} does not match the configured model {:?}",
            model.config(),
            cfg.model
        );
        let state = AdamState::load(&args.out.join(OPTIM_FILE), model.params())?;
        println!("resuming from iteration {}", state.step());
        (model, state)
    } else {
        let mut model = MepsNet::new(cfg.model)?;
        model.init(cfg.train.seed);
        let state = AdamState::new(model.params());
        (model, state)
    };

    let log_path = args.out.join("train.log");
    let mut open = fs::OpenOptions::new();
    open.create(true).write(true);
    if args.resume {
        open.append(true);
    } else {
        open.truncate(true);
    }
    let mut log = Tee {
        file: open
            .open(&log_path)
            .with_context(|| format!("opening {}", log_path.display()))?,
        stdout: !args.quiet,
    };

    let start = Instant::now();
    let outcome = train_optim::train(&mut model, &mut state, &set, &cfg.train, &args.out, &mut log)?;
    let secs = start.elapsed().as_secs_f64();

    if let Some(last) = outcome.losses.last() {
        println!(
            "reached iteration {} in {secs:.1}s, last loss {last:.6}",
            state.step()
        );
    } else {
        println!("nothing left to run: checkpoints already at iteration {}", state.step());
    }
    println!("model checkpoint: {}", outcome.model_path.display());
    println!("optimizer state: {}", outcome.optim_path.display());
    println!("training log: {}", log_path.display());
    Ok(())
}

#[derive(Args)]
pub struct EvalArgs {
    /// Dataset root produced by `generate`
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,

    /// Split to score
    #[arg(long, default_value = "test")]
    pub split: String,

    /// Model checkpoint to score
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "identity",
        conflicts_with = "identity"
    )]
    pub checkpoint: Option<PathBuf>,

    /// Score the identity mapping (restored = distorted input)
    #[arg(long)]
    pub identity: bool,

    /// Directory for the JSON report
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Serialize)]
struct EvalEcho {
    data: PathBuf,
    split: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<PathBuf>,
    identity: bool,
}

#[derive(Serialize)]
struct EvalEchoDoc {
    eval: EvalEcho,
}

/// One full-frame pass through the network, back to an image in [0,1].
fn restore_buffer<T: tensor_core::Element>(
    model: &MepsNet<T>,
    img: &RgbBuffer,
) -> std::result::Result<RgbBuffer, String> {
    let mut g = Graph::new();
    let pass = model
        .forward(&mut g, img.to_tensor())
        .map_err(|e| e.to_string())?;
    RgbBuffer::from_tensor(g.value(pass.output)).map_err(|e| e.to_string())
}

fn eval_with<F>(args: &EvalArgs, restore: F) -> Result<EvalReport>
where
    F: Fn(&RgbBuffer) -> std::result::Result<RgbBuffer, String> + Sync + Send,
{
    if args.threads == 0 {
        return Ok(evaluate_split(&args.data, &args.split, restore)?);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .context("building thread pool")?;
    pool.install(|| Ok(evaluate_split(&args.data, &args.split, restore)?))
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let report = if args.identity {
        eval_with(&args, |img| Ok(img.clone()))?
    } else {
        let path = args.checkpoint.as_ref().expect("clap requires a checkpoint");
        let model: MepsNet<f32> = load_model(path)?;
        eval_with(&args, |img| restore_buffer(&model, img))?
    };

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let report_path = args.out.join(format!("eval_{}.json", report.split));
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(&report_path, json + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;

    let echo = EvalEchoDoc {
        eval: EvalEcho {
            data: args.data.clone(),
            split: args.split.clone(),
            checkpoint: args.checkpoint.clone(),
            identity: args.identity,
        },
    };
    fs::write(args.out.join("config.toml"), toml::to_string_pretty(&echo)?)?;

    println!(
        "split={} n={} skipped={}",
        report.split, report.n, report.skipped
    );
    println!(
        "restored: psnr={:.4} ssim={:.6}",
        report.mean_psnr, report.mean_ssim
    );
    println!(
        "baseline: psnr={:.4} ssim={:.6}",
        report.baseline_psnr, report.baseline_ssim
    );
    println!("report: {}", report_path.display());
    Ok(())
}

#[derive(Args)]
pub struct RestoreArgs {
    /// Model checkpoint
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    /// A PNG file or a directory of PNGs
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,

    /// Directory for restored PNGs (same file names as the inputs)
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct RestoreEcho {
    checkpoint: PathBuf,
    input: PathBuf,
}

#[derive(Serialize)]
struct RestoreEchoDoc {
    restore: RestoreEcho,
}

fn png_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    ensure!(input.is_dir(), "{} is neither a file nor a directory", input.display());
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .with_context(|| format!("reading {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("png"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn restore(args: RestoreArgs) -> Result<()> {
    let model: MepsNet<f32> = load_model(&args.checkpoint)?;
    let inputs = png_inputs(&args.input)?;
    ensure!(!inputs.is_empty(), "no PNG files under {}", args.input.display());

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for path in &inputs {
        let img = RgbBuffer::load_png(path)?;
        let restored = restore_buffer(&model, &img)
            .map_err(|detail| anyhow!("restoring {}: {detail}", path.display()))?;
        let dest = args.out.join(path.file_name().expect("png path has a file name"));
        restored.save_png(&dest)?;
        println!("{} -> {}", path.display(), dest.display());
    }

    let echo = RestoreEchoDoc {
        restore: RestoreEcho {
            checkpoint: args.checkpoint.clone(),
            input: args.input.clone(),
        },
    };
    fs::write(args.out.join("config.toml"), toml::to_string_pretty(&echo)?)?;
    println!("restored {} images into {}", inputs.len(), args.out.display());
    Ok(())
}

#[derive(Subcommand)]
pub enum InspectCmd {
    /// Compare every analytic gradient against central finite differences
    GradCheck(GradCheckArgs),
    /// Parameter census and sharing ratios
    ParamCount(ParamCountArgs),
    /// Write per-expert activation maps for one input PNG
    Features(FeaturesArgs),
    /// Fit the radial power-law slope of the structured noise field
    Spectrum(SpectrumArgs),
}

pub fn inspect(cmd: InspectCmd) -> Result<()> {
    match cmd {
        InspectCmd::GradCheck(a) => grad_check(&a),
        InspectCmd::ParamCount(a) => param_count(&a),
        InspectCmd::Features(a) => features(&a),
        InspectCmd::Spectrum(a) => spectrum(&a),
    }
}

#[derive(Args)]
pub struct GradCheckArgs {
    /// Architecture preset: desk-tiny, desk, or paper
    #[arg(long, default_value = "desk-tiny")]
    pub preset: String,

    /// Input side length for the audit
    #[arg(long, default_value_t = 8)]
    pub side: usize,

    #[arg(long, default_value_t = 11)]
    pub seed: u64,

    /// Maximum allowed relative error
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

fn grad_check(a: &GradCheckArgs) -> Result<()> {
    let config = preset(&a.preset)?;
    let report = grad_audit(&config, a.side, a.seed)?;
    println!("parameters audited: {}", report.n_params);
    println!(
        "max relative error: {:.3e} (finite-difference eps {:.1e})",
        report.max_rel_err, report.eps
    );
    println!("elapsed: {:.2}s", report.seconds);
    ensure!(
        report.max_rel_err < a.tolerance,
        "gradient mismatch: max relative error {:.3e} exceeds tolerance {:.1e}",
        report.max_rel_err,
        a.tolerance
    );
    println!("gradients verified");
    Ok(())
}

#[derive(Args)]
pub struct ParamCountArgs {
    /// Architecture preset: desk-tiny, desk, or paper
    #[arg(long, default_value = "paper")]
    pub preset: String,

    /// TOML config whose [model] table overrides the preset
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one config key, e.g. --set model.n_experts=5 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn param_count(a: &ParamCountArgs) -> Result<()> {
    let model_cfg = if a.config.is_some() || !a.set.is_empty() {
        AppConfig::resolve(a.config.as_deref(), &a.set)?.model
    } else {
        preset(&a.preset)?
    };
    let configured: MepsNet<f32> = MepsNet::new(model_cfg)?;
    let single: MepsNet<f32> = MepsNet::new(model_cfg.with_experts(1))?;
    let c = configured.census();
    let s = single.census();

    println!(
        "architecture: {} experts, width {}, {} templates, kernel {}x{}",
        model_cfg.n_experts,
        model_cfg.expert_width,
        model_cfg.n_templates,
        model_cfg.kernel_size,
        model_cfg.kernel_size
    );
    println!(
        "{:<18} {:>14} {:>14}",
        "component",
        format!("n_experts={}", model_cfg.n_experts),
        "n_experts=1"
    );
    println!(
        "{:<18} {:>14} {:>14}",
        "shared templates", c.shared_templates, s.shared_templates
    );
    println!(
        "{:<18} {:>14} {:>14}",
        "coefficients", c.coefficients, s.coefficients
    );
    println!("{:<18} {:>14} {:>14}", "unshared", c.unshared, s.unshared);
    println!("{:<18} {:>14} {:>14}", "total", c.total, s.total);
    println!(
        "total ratio vs single expert: {:.4}",
        c.total as f64 / s.total as f64
    );
    let unshared_total = configured.no_sharing_total();
    println!(
        "without template sharing: {} ({:.2}x the shared total)",
        unshared_total,
        unshared_total as f64 / c.total as f64
    );
    Ok(())
}

#[derive(Args)]
pub struct FeaturesArgs {
    /// Model checkpoint
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    /// Input PNG
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Directory for the per-expert maps
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn features(a: &FeaturesArgs) -> Result<()> {
    let model: MepsNet<f32> = load_model(&a.checkpoint)?;
    let img = RgbBuffer::load_png(&a.input)?;
    let paths = dump_expert_features(&model, img.to_tensor(), &a.out)?;
    for p in &paths {
        println!("{}", p.display());
    }
    println!("wrote {} expert maps", paths.len());
    Ok(())
}

#[derive(Args)]
pub struct SpectrumArgs {
    /// Noise field side length
    #[arg(long, default_value_t = 256)]
    pub size: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Low edge of the fit band, cycles per field
    #[arg(long, default_value_t = 4.0)]
    pub f_lo: f64,

    /// High edge of the fit band, cycles per field
    #[arg(long, default_value_t = 64.0)]
    pub f_hi: f64,
}

fn spectrum(a: &SpectrumArgs) -> Result<()> {
    let mut rng = Rng::new(a.seed);
    let field = pink_noise_field(a.size, a.size, &mut rng)?;
    let slope = radial_power_slope(&field, a.size, a.size, a.f_lo, a.f_hi);
    println!(
        "field {0}x{0}, fit band {1}..{2} cycles",
        a.size, a.f_lo, a.f_hi
    );
    println!("radial power slope: {slope:.4} (target -2)");
    ensure!(
        (slope + 2.0).abs() <= 0.4,
        "slope {slope:.4} is outside -2 +/- 0.4"
    );
    println!("spectrum verified");
    Ok(())
}
