//! Command-line front end. [`run`] parses arguments, executes one subcommand
//! and returns the process exit code:
//!
//! * `0` success, results as JSON on stdout
//! * `1` domain error, one JSON diagnostic `{module, operation, message}` per line on stderr
//! * `2` usage error, usage text on stderr

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use earsight::Direction;

mod commands;

#[derive(Debug, Parser)]
#[command(
    name = "earsight",
    version,
    about = "Direction finding, sound alerts and box selection for an assistive wearable"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate labeled four-channel clips.
    #[command(after_long_help = SIMULATE_HELP)]
    Simulate(SimulateArgs),
    /// Turn a clip directory into phase-matrix tensors.
    #[command(after_long_help = FEATURIZE_HELP)]
    Featurize(FeaturizeArgs),
    /// Train the direction network on a feature directory.
    #[command(after_long_help = TRAIN_HELP)]
    Train(TrainArgs),
    /// Score a checkpoint on a feature directory.
    Eval(EvalArgs),
    /// Predict the direction of one clip.
    Predict(PredictArgs),
    /// Score one clip against the class vocabulary and apply the importance filter.
    #[command(after_long_help = TEMPLATES_HELP)]
    Classify(ClassifyArgs),
    /// Build class templates from a simulated clip directory.
    #[command(name = "fit-templates", after_long_help = TEMPLATES_HELP)]
    FitTemplates(FitTemplatesArgs),
    /// Pick the candidate box that best matches a localization map.
    #[command(after_long_help = FUSE_HELP)]
    Fuse(FuseArgs),
    /// cIoU and AUC of pseudo boxes against ground truth.
    #[command(name = "loc-metrics", after_long_help = LOC_METRICS_HELP)]
    LocMetrics(LocMetricsArgs),
    /// Run the alert cycle over scripted events or a clip directory.
    #[command(after_long_help = LOOP_HELP)]
    Loop(LoopArgs),
    /// One-way ANOVA and Tukey HSD over repeated runs.
    #[command(after_long_help = STATS_HELP)]
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Encoding {
    Pcm16,
    Float32,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seconds per clip.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Hz.
    #[arg(long)]
    pub sample_rate: Option<u32>,
    /// Drop the additive noise.
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long, value_enum)]
    pub encoding: Option<Encoding>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Directory of WAV + manifest pairs.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature directory written by `featurize`.
    #[arg(long, alias = "features", value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Write per-epoch history as CSV.
    #[arg(long, value_name = "FILE")]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long, alias = "features", value_name = "DIR")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub clip: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_name = "FILE")]
    pub clip: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitTemplatesArgs {
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long, value_name = "FILE")]
    pub boxes: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub map: PathBuf,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_parser = parse_direction)]
    pub doa: Option<Direction>,
    /// Drop candidates whose center lies outside the DoA band.
    #[arg(long)]
    pub gate: bool,
    /// Image width in pixels; defaults to the map width.
    #[arg(long)]
    pub width: Option<u32>,
    /// Image height in pixels; defaults to the map height.
    #[arg(long)]
    pub height: Option<u32>,
}

#[derive(Debug, Args)]
pub struct LocMetricsArgs {
    /// Directory holding the predicted localization maps.
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    #[arg(long)]
    pub tau: Option<f64>,
    /// IoU counted as a success.
    #[arg(long)]
    pub success_iou: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum DoaMethod {
    #[default]
    Cnn,
    Classical,
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with = "replay",
        required_unless_present = "replay"
    )]
    pub events: Option<PathBuf>,
    /// Replay every WAV in a directory as audio windows.
    #[arg(long, value_name = "DIR")]
    pub replay: Option<PathBuf>,
    /// Seconds between replayed windows.
    #[arg(long, default_value_t = 1.0)]
    pub window: f64,
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub templates: Option<PathBuf>,
    /// Array geometry as TOML or JSON.
    #[arg(long, value_name = "FILE")]
    pub geometry: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub doa_method: DoaMethod,
    /// Write records here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, value_name = "FILE")]
    pub runs: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    s.parse().map_err(|e: earsight::Error| e.to_string())
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(f) => f.report(),
    }
}

const SIMULATE_HELP: &str = "\
Output: clip_NNNN.wav (4 channels) and clip_NNNN.json per clip, nine direction
classes interleaved. The JSON manifest holds label, azimuth_deg, distance_m,
snr_db, seed, sound_class and signal. Defaults come from [dataset] and [sim].";

const FEATURIZE_HELP: &str = "\
Writes <stem>.tns per clip with a <stem>.tns.json sidecar, plus manifest.json
listing {tensor, label, source, sound_class} and the STFT settings. The tensor
file is b\"TNS3\", then u32 dims 3/F/T, then the float32 payload in row-major
order, all little-endian. A corrupt WAV is reported and skipped; the exit code is then 1.
Reruns on the same inputs produce identical bytes.";

const TRAIN_HELP: &str = "\
Reads manifest.json and the tensors it lists, trains with the [model] and
[train] settings (80/20 stratified split) and writes a binary checkpoint with a
JSON sidecar. --history writes epoch,train_acc,val_acc,train_loss,val_loss.";

const TEMPLATES_HELP: &str = "\
Template store: a JSON object {class_name: [floats]}, unit-normalized on load.
fit-templates averages the mel embeddings of every clip whose manifest has a
sound_class. With [embedding.external] set, a subprocess provides embeddings:
it reads {\"audio_path\": ...} or {\"text\": ...} on stdin and prints
{\"embedding\": [...]} on stdout.";

const FUSE_HELP: &str = "\
Boxes: JSON lines {class, confidence, x, y, w, h} in image pixels.
Map: binary PGM (P5, 8-bit, value/maxval) or a tensor file of dims 1/H/W with
values in [0,1]. The map is resized to the image with nearest-neighbour
sampling when the sizes differ.";

const LOC_METRICS_HELP: &str = "\
Ground truth: JSON lines {map, x, y, w, h} where map is a file name inside
--pred. Each map is thresholded at tau; a map with no pixel above tau counts
as IoU 0. Output: {ciou_rate, auc, curve, count}, with the curve sampled at 21
IoU thresholds 0, 0.05, ..., 1.";

const LOOP_HELP: &str = "\
Events: JSON lines {t, type, path}. type is audio (path to a WAV window), image
(path to a frame JSON {boxes, map, width?, height?}) or reset. Relative paths
resolve against the file that names them. Output: one JSON record per line
with t, cycle_id and a type of transition, message, camera_request, selection,
dropped or diagnostic.";

const STATS_HELP: &str = "\
Input: CSV with header model,run_id,accuracy. Output: a JSON report with group
means, the ANOVA table and every Tukey HSD pair.";
