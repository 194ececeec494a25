//! Command-line front end: `upsample`, `evaluate`, `synth` and `bench`.

pub mod bench;
pub mod config;
pub mod synth;

pub use config::RunConfig;
pub use synth::{Shape, SyntheticSpec};

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cloud_io::{
    normalize_unit_cube, read_ply, write_ply, NormTransform, PlyFormat, PlyPrecision, PointCloud,
};
use crate::error::{Error, Result};
use crate::metrics::{metric_report, Aggregation};
use crate::resample::{upsample_cloud, GridResolution, UpsampleConfig, UpsampleReport};

#[derive(Debug, Parser)]
#[command(
    name = "cloud-upsample",
    version,
    about = "Point-cloud geometry upsampling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upsample a PLY point cloud by a scale factor.
    Upsample(UpsampleArgs),
    /// Compare a test cloud against a reference cloud.
    Evaluate(EvaluateArgs),
    /// Sample an analytic surface into a PLY file.
    Synth(SynthArgs),
    /// Downsample, upsample and evaluate every cloud listed in a manifest.
    Bench(BenchArgs),
}

fn parse_format(s: &str) -> std::result::Result<PlyFormat, String> {
    match s {
        "ascii" => Ok(PlyFormat::Ascii),
        "binary-le" | "binary" => Ok(PlyFormat::BinaryLe),
        _ => Err(format!("expected `ascii` or `binary-le`, got `{s}`")),
    }
}

fn parse_precision(s: &str) -> std::result::Result<PlyPrecision, String> {
    match s {
        "32" => Ok(PlyPrecision::F32),
        "64" => Ok(PlyPrecision::F64),
        _ => Err(format!("expected `32` or `64`, got `{s}`")),
    }
}

/// Model and placement parameters shared by `upsample` and `bench`.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub scale: Option<f64>,
    /// Blocks per axis, or `auto`.
    #[arg(long)]
    pub grid: Option<GridResolution>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub rho_f: Option<f64>,
    #[arg(long)]
    pub stop_eps: Option<f64>,
    #[arg(long)]
    pub min_block_points: Option<usize>,
    #[arg(long)]
    pub clamp_margin: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MetricArgs {
    /// `mean-norm` or `rms`.
    #[arg(long)]
    pub aggregation: Option<Aggregation>,
    #[arg(long)]
    pub normals_k: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PlyArgs {
    /// `ascii` or `binary-le`.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<PlyFormat>,
    /// Coordinate precision in bits, `32` or `64`.
    #[arg(long, value_parser = parse_precision)]
    pub precision: Option<PlyPrecision>,
}

#[derive(Debug, Clone, Args)]
pub struct UpsampleArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// TOML file with `key = value` settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Add wall-clock time to the report (the report is then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub ply: PlyArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub metric: MetricArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    /// `plane`, `cosine-surface` or `sphere-patch`.
    #[arg(long, default_value = "plane")]
    pub shape: Shape,
    #[arg(long, default_value_t = 1000)]
    pub n_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub height: Option<f64>,
    #[arg(long)]
    pub offset: Option<f64>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub frequency: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Cap half-angle in degrees.
    #[arg(long)]
    pub cap_angle: Option<f64>,
    #[command(flatten)]
    pub ply: PlyArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// TOML manifest with `[[cloud]]` entries and an optional `[sweep]`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// CSV table.
    #[arg(long)]
    pub output: PathBuf,
    /// JSON sweep record.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
}

impl ModelArgs {
    fn overlay(&self, cfg: &mut RunConfig) {
        cfg.merge(&RunConfig {
            scale: self.scale,
            grid: self.grid,
            kmax: self.kmax,
            max_iter: self.max_iter,
            gamma: self.gamma,
            rho: self.rho,
            rho_f: self.rho_f,
            stop_eps: self.stop_eps,
            min_block_points: self.min_block_points,
            clamp_margin: self.clamp_margin,
            ..Default::default()
        });
    }
}

impl MetricArgs {
    fn overlay(&self, cfg: &mut RunConfig) {
        cfg.merge(&RunConfig {
            aggregation: self.aggregation,
            normals_k: self.normals_k,
            ..Default::default()
        });
    }
}

impl PlyArgs {
    fn overlay(&self, cfg: &mut RunConfig) {
        cfg.merge(&RunConfig {
            format: self.format,
            precision: self.precision,
            ..Default::default()
        });
    }
}

fn base_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Files created by a command; removed again unless the command succeeds.
struct Outputs {
    created: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new() -> Self {
        Self {
            created: Vec::new(),
            committed: false,
        }
    }

    fn track(&mut self, path: &Path) {
        self.created.push(path.to_path_buf());
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.created {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path, outputs: &mut Outputs) -> Result<()> {
    outputs.track(path);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Config(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn save_ply(cloud: &PointCloud, path: &Path, cfg: &RunConfig, outputs: &mut Outputs) -> Result<()> {
    outputs.track(path);
    write_ply(cloud, path, cfg.ply_format(), cfg.ply_precision())
}

#[derive(Serialize)]
struct UpsampleRunReport<'a> {
    input: &'a Path,
    output: &'a Path,
    config: &'a UpsampleConfig,
    normalization: NormTransform,
    #[serde(flatten)]
    result: &'a UpsampleReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

pub fn cmd_upsample(args: &UpsampleArgs) -> Result<UpsampleReport> {
    let mut cfg = base_config(&args.config)?;
    cfg.merge(&RunConfig {
        input: args.input.clone(),
        output: args.output.clone(),
        report: args.report.clone(),
        ..Default::default()
    });
    args.model.overlay(&mut cfg);
    args.ply.overlay(&mut cfg);
    let input = RunConfig::require(&cfg.input, "input")?;
    let output = RunConfig::require(&cfg.output, "output")?;
    let up = cfg.upsample_config()?;

    let start = Instant::now();
    let cloud = read_ply(input)?;
    if cloud.has_normals() {
        log::info!("input normals are not carried to the output");
    }
    let (normalized, t) = normalize_unit_cube(&cloud)?;
    let result = upsample_cloud(&normalized, &up)?;
    let mut points = cloud.points;
    points.extend(
        result.cloud.points[normalized.len()..]
            .iter()
            .map(|p| t.inverse(p)),
    );
    let out_cloud = PointCloud::new(points);

    let mut outputs = Outputs::new();
    save_ply(&out_cloud, output, &cfg, &mut outputs)?;
    let wall = start.elapsed().as_secs_f64();
    if let Some(report) = &cfg.report {
        let record = UpsampleRunReport {
            input,
            output,
            config: &up,
            normalization: t,
            result: &result.report,
            wall_time_s: args.timing.then_some(wall),
        };
        write_json(&record, report, &mut outputs)?;
    }
    outputs.commit();
    log::info!(
        "{} -> {} points in {wall:.3} s (shortfall {})",
        result.report.n_input,
        result.report.n_output,
        result.report.shortfall
    );
    Ok(result.report)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<crate::metrics::MetricReport> {
    let mut cfg = base_config(&args.config)?;
    cfg.merge(&RunConfig {
        input: args.input.clone(),
        reference: args.reference.clone(),
        report: args.report.clone(),
        ..Default::default()
    });
    args.metric.overlay(&mut cfg);
    let opts = cfg.metric_options()?;
    let test = read_ply(RunConfig::require(&cfg.input, "input")?)?;
    let reference = read_ply(RunConfig::require(&cfg.reference, "reference")?)?;
    // both clouds share the reference's unit-cube frame
    let (reference, t) = normalize_unit_cube(&reference)?;
    let test = t.apply(&test);
    let report = metric_report(&test, &reference, &opts)?;
    let mut outputs = Outputs::new();
    if let Some(path) = &cfg.report {
        write_json(&report, path, &mut outputs)?;
    }
    outputs.commit();
    Ok(report)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<PointCloud> {
    let d = SyntheticSpec::default();
    let spec = SyntheticSpec {
        shape: args.shape,
        n_points: args.n_points,
        seed: args.seed,
        height: args.height.unwrap_or(d.height),
        offset: args.offset.unwrap_or(d.offset),
        amplitude: args.amplitude.unwrap_or(d.amplitude),
        frequency: args.frequency.unwrap_or(d.frequency),
        radius: args.radius.unwrap_or(d.radius),
        cap_angle: args.cap_angle.unwrap_or(d.cap_angle),
    };
    let cloud = spec.generate()?;
    let mut cfg = RunConfig::default();
    args.ply.overlay(&mut cfg);
    let mut outputs = Outputs::new();
    save_ply(&cloud, &args.output, &cfg, &mut outputs)?;
    outputs.commit();
    Ok(cloud)
}

#[derive(Serialize)]
struct BenchRecord<'a> {
    manifest: &'a bench::Manifest,
    base_config: &'a UpsampleConfig,
    metric_options: &'a crate::metrics::MetricOptions,
    rows: &'a [bench::BenchRow],
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<bench::BenchRow>> {
    let mut cfg = base_config(&args.config)?;
    args.model.overlay(&mut cfg);
    args.metric.overlay(&mut cfg);
    // per-row scales come from the manifest; validate the rest with a dummy scale
    let base = RunConfig {
        scale: Some(cfg.scale.unwrap_or(2.0)),
        ..cfg.clone()
    }
    .upsample_config()?;
    let opts = cfg.metric_options()?;
    let manifest = bench::Manifest::load(&args.manifest)?;
    let base_dir = args.manifest.parent().unwrap_or(Path::new("."));
    let rows = bench::run_bench(&manifest, base_dir, &base, &opts);

    let mut outputs = Outputs::new();
    outputs.track(&args.output);
    let file = File::create(&args.output).map_err(|e| Error::io(&args.output, e))?;
    bench::write_csv(&rows, BufWriter::new(file))?;
    if let Some(path) = &args.report {
        let record = BenchRecord {
            manifest: &manifest,
            base_config: &base,
            metric_options: &opts,
            rows: &rows,
        };
        write_json(&record, path, &mut outputs)?;
    }
    outputs.commit();
    Ok(rows)
}

/// Runs a parsed command line, printing results to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Upsample(a) => {
            let r = cmd_upsample(&a)?;
            println!(
                "n_input: {}\nn_output: {}\nachieved_scale: {}\nshortfall: {}",
                r.n_input, r.n_output, r.achieved_scale, r.shortfall
            );
        }
        Command::Evaluate(a) => print!("{}", cmd_evaluate(&a)?.to_text()),
        Command::Synth(a) => {
            let c = cmd_synth(&a)?;
            println!("wrote {} points to {}", c.len(), a.output.display());
        }
        Command::Bench(a) => {
            let rows = cmd_bench(&a)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} rows, {failed} failed", rows.len());
        }
    }
    Ok(())
}
