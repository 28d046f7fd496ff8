//! Argument definitions and command handlers behind the `sarcd` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sarcd_core::classifier::HingeParams;
use sarcd_core::evalstat;
use sarcd_core::pcanet::PcaNetConfig;
use sarcd_core::raster::{self, BitDepth};
use sarcd_core::sampling::{self, Strategy};
use sarcd_core::synthgen::{self, SceneSpec};

use crate::bench::{self, BenchConfig, SceneSource};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::model_file;
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(name = "sarcd", version, about = "PCA-Net change detection for co-registered SAR image pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a labelled pair and write it to --model.
    Train(TrainArgs),
    /// Classify every pixel of a pair and write a 0/255 change map.
    Detect(DetectArgs),
    /// Compare a change map against a reference; prints one CSV row.
    Eval(EvalArgs),
    /// Sweep strategies, patch sizes, rates and seeds; writes CSV.
    Bench(BenchArgs),
    /// Write a synthetic speckled scene: t1.pgm, t2.pgm, ref.pgm, scene.txt.
    Synth(SynthArgs),
    /// Write the 0/128/255 sample partition of a reference map.
    Partition(PartitionArgs),
}

#[derive(Debug, Clone, Args)]
pub struct NetArgs {
    /// Patch side h (odd).
    #[arg(long, default_value_t = 7)]
    pub patch: usize,
    /// Filter side k (odd, at most h).
    #[arg(long = "filter-size", default_value_t = 5)]
    pub filter_size: usize,
    #[arg(long, default_value_t = 8)]
    pub filters1: usize,
    #[arg(long, default_value_t = 8)]
    pub filters2: usize,
    /// Histogram block side; defaults to the patch side.
    #[arg(long)]
    pub block: Option<usize>,
    /// Maximum sub-windows per filter-learning stage.
    #[arg(long = "max-windows", default_value_t = 50_000)]
    pub max_windows: usize,
}

impl NetArgs {
    fn config(&self, patch: usize) -> PcaNetConfig {
        PcaNetConfig {
            h: patch,
            k: self.filter_size,
            l1: self.filters1,
            l2: self.filters2,
            block_side: self.block.unwrap_or(patch),
            normalize_hist: true,
            n_max: self.max_windows,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainingArgs {
    #[command(flatten)]
    pub net: NetArgs,
    /// Boundary dilation radius.
    #[arg(long, default_value_t = 2)]
    pub radius: usize,
    #[arg(long, default_value_t = 0.05)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    /// Offset added to both dates before the log-ratio (pseudo strategy).
    #[arg(long = "log-offset", default_value_t = 1.0)]
    pub log_offset: f64,
    /// Detection threads; defaults to all cores.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl TrainingArgs {
    fn run_config(&self, strategy: Strategy) -> RunConfig {
        RunConfig {
            net: self.net.config(self.net.patch),
            radius: self.radius,
            strategy,
            rate: self.rate,
            seed: self.seed,
            hinge: HingeParams {
                lambda: self.lambda,
                epochs: self.epochs,
            },
            log_ratio_offset: self.log_offset,
            workers: self.workers,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub t1: PathBuf,
    #[arg(long)]
    pub t2: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "obuc")]
    pub strategy: Strategy,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub t1: PathBuf,
    #[arg(long)]
    pub t2: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted change map (nonzero = changed).
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, default_value_t = 3)]
    pub blobs: usize,
    #[arg(long = "radius-min", default_value_t = 6)]
    pub radius_min: usize,
    #[arg(long = "radius-max", default_value_t = 12)]
    pub radius_max: usize,
    #[arg(long, default_value_t = 2)]
    pub looks: u32,
    #[arg(long = "bg-level", default_value_t = 60.0)]
    pub bg_level: f64,
    #[arg(long = "fg-level", default_value_t = 140.0)]
    pub fg_level: f64,
}

impl SceneArgs {
    fn spec(&self, seed: u64) -> SceneSpec {
        SceneSpec {
            width: self.width,
            height: self.height,
            n_blobs: self.blobs,
            radius_min: self.radius_min,
            radius_max: self.radius_max,
            looks: self.looks,
            bg_level: self.bg_level,
            fg_level: self.fg_level,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated strategies.
    #[arg(long, value_delimiter = ',', default_value = "uc,buc,obuc")]
    pub strategies: Vec<Strategy>,
    /// Comma-separated patch sides.
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub patches: Vec<usize>,
    /// Comma-separated sampling rates.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub rates: Vec<f64>,
    /// Runs per cell; run i uses seed + i.
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Use this fixed pair instead of synthetic scenes (needs --t2 and --ref too).
    #[arg(long, requires_all = ["t2", "reference"])]
    pub t1: Option<PathBuf>,
    #[arg(long, requires_all = ["t1", "reference"])]
    pub t2: Option<PathBuf>,
    #[arg(long = "ref", requires_all = ["t1", "t2"])]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub scene: SceneArgs,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub radius: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs one command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a, out).map_err(|e| e.context("train")),
        Command::Detect(a) => cmd_detect(&a, out).map_err(|e| e.context("detect")),
        Command::Eval(a) => cmd_eval(&a, out).map_err(|e| e.context("eval")),
        Command::Bench(a) => cmd_bench(&a, out).map_err(|e| e.context("bench")),
        Command::Synth(a) => cmd_synth(&a, out).map_err(|e| e.context("synth")),
        Command::Partition(a) => cmd_partition(&a, out).map_err(|e| e.context("partition")),
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| CliError::io("<stdout>", e))
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.training.run_config(a.strategy);
    cfg.validate()?;
    let pair = raster::load_pair(&a.t1, &a.t2)?;
    let reference = raster::load_reference(&a.reference)?;
    let o = pipeline::train(&cfg, &pair, &reference)?;
    model_file::save_model(&o.model, &a.model)?;

    let ts = &o.training_set;
    say(out, format_args!("strategy {}: {} samples ({} distinct)", ts.strategy, ts.len(), o.unique_coords))?;
    say(out, format_args!("  changed {}  unchanged {}", ts.n_changed, ts.n_unchanged))?;
    say(
        out,
        format_args!(
            "  boundary {}  inner changed {}  inner unchanged {}",
            o.set_counts.boundary, o.set_counts.inner_changed, o.set_counts.inner_unchanged
        ),
    )?;
    say(
        out,
        format_args!(
            "partition sizes (radius {}): boundary {}  inner changed {}  inner unchanged {}",
            o.partition.radius,
            o.partition.omega_b.len(),
            o.partition.omega_c.len(),
            o.partition.omega_u.len()
        ),
    )?;
    say(out, format_args!("feature dimension D = {}", o.model.feature_len()))?;
    say(out, format_args!("model written to {}", a.model.display()))
}

pub fn cmd_detect(a: &DetectArgs, out: &mut dyn Write) -> Result<()> {
    let model = model_file::load_model(&a.model)?;
    let pair = raster::load_pair(&a.t1, &a.t2)?;
    let map = pipeline::detect(&model, &pair, a.workers)?;
    raster::save_reference(&map, &a.out)?;
    say(
        out,
        format_args!("{} of {} pixels changed; map written to {}", map.count_changed(), map.len(), a.out.display()),
    )
}

/// Header and values of the `eval` CSV row.
pub fn eval_row(pred: &raster::ReferenceMap, reference: &raster::ReferenceMap) -> Result<[String; 5]> {
    let cm = evalstat::confusion(pred, reference)?;
    let rates = evalstat::error_rates(&cm)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    Ok([
        evalstat::kappa(&cm)?.to_string(),
        opt(rates.false_alarm),
        opt(rates.missed),
        rates.overall_error.to_string(),
        rates.pcc.to_string(),
    ])
}

pub const EVAL_HEADER: [&str; 5] = ["kappa", "fa", "missed", "oe", "pcc"];

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let pred = raster::load_reference(&a.pred)?;
    let reference = raster::load_reference(&a.reference)?;
    let row = eval_row(&pred, &reference)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVAL_HEADER)?;
    w.write_record(&row)?;
    w.flush().map_err(|e| CliError::io("<stdout>", e))
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let source = match (&a.t1, &a.t2, &a.reference) {
        (Some(t1), Some(t2), Some(r)) => SceneSource::Fixed {
            pair: raster::load_pair(t1, t2)?,
            reference: raster::load_reference(r)?,
        },
        _ => SceneSource::Synthetic(a.scene.spec(0)),
    };
    let cfg = BenchConfig {
        strategies: a.strategies.clone(),
        patches: a.patches.clone(),
        rates: a.rates.clone(),
        runs: a.runs,
        master_seed: a.training.seed,
        base: a.training.run_config(Strategy::Obuc),
        source,
    };
    let rows = bench::run_bench(&cfg, |r| {
        let kappa = r.kappa.map(|k| format!("{k:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{} h={} rate={} seed={}: kappa {kappa} [{}]",
            r.strategy,
            r.patch,
            r.rate,
            r.seed.unwrap_or_default(),
            r.status
        );
    })?;
    let file = fs::File::create(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    bench::write_csv(&rows, std::io::BufWriter::new(file))?;
    say(out, format_args!("{} rows written to {}", rows.len(), a.out.display()))
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = a.scene.spec(a.seed);
    let scene = synthgen::generate_scene(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let path = |name: &str| a.out.join(name);
    // Speckled intensities exceed 255, so the dates are stored at 16 bits.
    raster::save_raster(scene.pair.t1(), path("t1.pgm"), BitDepth::Sixteen)?;
    raster::save_raster(scene.pair.t2(), path("t2.pgm"), BitDepth::Sixteen)?;
    raster::save_reference(&scene.reference, path("ref.pgm"))?;
    write_text(&path("scene.txt"), &spec.manifest())?;
    say(
        out,
        format_args!(
            "scene {}x{} with {} changed pixels written to {}",
            spec.width,
            spec.height,
            scene.reference.count_changed(),
            a.out.display()
        ),
    )
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn cmd_partition(a: &PartitionArgs, out: &mut dyn Write) -> Result<()> {
    let reference = raster::load_reference(&a.reference)?;
    let part = sampling::partition(&reference, a.radius);
    raster::save_raster(&part.to_raster(), &a.out, BitDepth::Eight)?;
    say(
        out,
        format_args!(
            "boundary {}  inner changed {}  inner unchanged {}",
            part.omega_b.len(),
            part.omega_c.len(),
            part.omega_u.len()
        ),
    )
}
