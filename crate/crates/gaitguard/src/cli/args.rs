use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gaitguard_core::gait::EventParams;
use gaitguard_core::identity::Hyper;
use gaitguard_core::mitigate::{Approach, Distribution, NoiseConfig, DEFAULT_KPM_PATCH_PX};
use gaitguard_core::stream::DEFAULT_MAX_PAYLOAD;

use crate::error::AppResult;

#[derive(Debug, Parser)]
#[command(
    name = "gaitguard",
    version,
    about = "Gait feature extraction, identification, frame mitigation and privacy evaluation"
)]
pub struct Cli {
    /// TOML config file; command-line flags override it [default: none]
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Global seed [default: $GAITGUARD_SEED, else 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print errors as {"error": code, "detail": text} [default: off]
    #[arg(long, global = true)]
    pub json: bool,
    /// More logging (repeatable) [default: warnings only]
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Base directory for relative output paths [default: current directory]
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract per-cycle gait features from keypoint sequences
    Extract(ExtractArgs),
    /// Cross-validate the gait identification classifier
    Identify(IdentifyArgs),
    /// Add region-targeted noise to frames
    Mitigate(MitigateArgs),
    /// Run the privacy-utility sweep on a synthetic corpus
    Sweep(SweepArgs),
    /// Serve mitigation over TCP
    Serve(ServeArgs),
    /// Stream frames from disk to a server
    Replay(ReplayArgs),
    /// Generate synthetic walkers, frames, regions and ground truth
    Synth(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Extract(_) => "extract",
            Command::Identify(_) => "identify",
            Command::Mitigate(_) => "mitigate",
            Command::Sweep(_) => "sweep",
            Command::Serve(_) => "serve",
            Command::Replay(_) => "replay",
            Command::Synth(_) => "synth",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EventArgs {
    /// Minimum peak prominence, as a fraction of the signal range
    #[arg(long, default_value_t = 0.1)]
    pub min_prominence: f64,
    /// Minimum separation between same-leg events, seconds
    #[arg(long, default_value_t = 0.25)]
    pub min_separation: f64,
    /// Longest gap of missing frames bridged by interpolation
    #[arg(long, default_value_t = 5)]
    pub max_gap: usize,
}

impl EventArgs {
    pub fn params(&self) -> EventParams {
        EventParams {
            min_prominence_frac: self.min_prominence,
            min_separation_s: self.min_separation,
            max_gap_frames: self.max_gap,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Boosting stages
    #[arg(long, default_value_t = 100)]
    pub stages: usize,
    /// Shrinkage per stage
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Depth of each regression tree
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    /// Row fraction drawn per stage
    #[arg(long, default_value_t = 1.0)]
    pub subsample: f64,
    /// Minimum rows per leaf
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
}

impl HyperArgs {
    pub fn hyper(&self) -> Hyper {
        Hyper {
            n_stages: self.stages,
            learning_rate: self.learning_rate,
            max_depth: self.max_depth,
            subsample: self.subsample,
            min_samples_leaf: self.min_samples_leaf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApproachArg {
    Kpm,
    Lbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistArg {
    Uniform,
    Normal,
    Laplace,
    #[value(alias = "exponential")]
    Exp,
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Masking approach
    #[arg(long, value_enum, default_value_t = ApproachArg::Lbm)]
    pub approach: ApproachArg,
    /// Noise distribution
    #[arg(long, value_enum, default_value_t = DistArg::Laplace)]
    pub dist: DistArg,
    /// Noise scale
    #[arg(long, default_value_t = 150.0)]
    pub lambda: f64,
    /// KPM patch side, pixels
    #[arg(long, default_value_t = DEFAULT_KPM_PATCH_PX)]
    pub patch: u32,
    /// Named preset replacing approach, dist and lambda: laplace-150 or
    /// exponential-100 [default: none]
    #[arg(long)]
    pub preset: Option<String>,
    /// Pass frames through unchanged [default: off]
    #[arg(long)]
    pub disabled: bool,
}

impl NoiseArgs {
    pub fn config(&self, seed: u64) -> AppResult<NoiseConfig> {
        let mut cfg = match &self.preset {
            Some(name) => NoiseConfig::preset(name)?,
            None => {
                let approach = match self.approach {
                    ApproachArg::Kpm => Approach::Kpm,
                    ApproachArg::Lbm => Approach::Lbm,
                };
                let dist = match self.dist {
                    DistArg::Uniform => Distribution::Uniform,
                    DistArg::Normal => Distribution::Normal,
                    DistArg::Laplace => Distribution::Laplace,
                    DistArg::Exp => Distribution::Exponential,
                };
                NoiseConfig::new(approach, dist, self.lambda, seed)
            }
        };
        cfg.seed = seed;
        cfg.kpm_patch_px = self.patch;
        cfg.enabled = !self.disabled;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    /// Keypoint sequence files, or directories of *.jsonl files
    #[arg(long = "in", value_name = "PATH", required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Feature CSV to write
    #[arg(long)]
    pub out: PathBuf,
    /// Calibration marker A x position, pixels [default: none]
    #[arg(long, requires_all = ["marker_b", "marker_distance"])]
    pub marker_a: Option<f64>,
    /// Calibration marker B x position, pixels [default: none]
    #[arg(long, requires_all = ["marker_a", "marker_distance"])]
    pub marker_b: Option<f64>,
    /// Real distance between the markers, meters [default: none]
    #[arg(long, requires_all = ["marker_a", "marker_b"])]
    pub marker_distance: Option<f64>,
    #[command(flatten)]
    pub events: EventArgs,
}

#[derive(Debug, Clone, Args)]
pub struct IdentifyArgs {
    /// Feature CSV files
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    /// Cross-validation folds
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Cross-validation repeats
    #[arg(long, default_value_t = 2)]
    pub repeats: usize,
    /// Drop the step-length columns [default: off]
    #[arg(long)]
    pub no_step_length: bool,
    /// Shuffle labels first, as a chance-level control [default: off]
    #[arg(long)]
    pub shuffle_labels: bool,
    /// Report JSON path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Confusion matrix CSV path [default: none]
    #[arg(long)]
    pub confusion_csv: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Png,
    Rgb,
}

#[derive(Debug, Clone, Args)]
pub struct MitigateArgs {
    /// Frame file or directory of .png/.rgb frames
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Region JSONL file [default: none, frames pass through]
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// Output directory; files keep their input names
    #[arg(long)]
    pub out: PathBuf,
    /// Frame rate used for timestamps of frames without a sidecar
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Output raster format [default: same as input]
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Per-frame status and SNR JSON [default: none]
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Corpus JSON: an object with "walkers" and options, or an array of
    /// walker specs. The global seed replaces any seed in the file
    #[arg(long)]
    pub corpus: PathBuf,
    /// "default" (2 approaches x 4 distributions x 4 lambdas) or a grid
    /// JSON file
    #[arg(long, default_value = "default")]
    pub grid: String,
    /// Sweep CSV path
    #[arg(long)]
    pub out: PathBuf,
    /// JSON mirror of the sweep [default: none]
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// SVG chart of the sweep [default: none]
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Histogram bins
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Cross-validation folds
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Cross-validation repeats
    #[arg(long, default_value_t = 2)]
    pub repeats: usize,
    /// Keep the step-length columns [default: off]
    #[arg(long)]
    pub with_step_length: bool,
    /// KPM patch side, pixels
    #[arg(long, default_value_t = DEFAULT_KPM_PATCH_PX)]
    pub patch: u32,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub events: EventArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Listen address
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub bind: String,
    /// Region JSONL used for frames without a trailer [default: none]
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// Largest accepted payload, bytes
    #[arg(long, default_value_t = DEFAULT_MAX_PAYLOAD)]
    pub max_payload: u32,
    /// Meter window, seconds
    #[arg(long, default_value_t = 2.0)]
    pub window: f64,
    /// Exit after serving this many connections [default: unlimited]
    #[arg(long)]
    pub max_connections: Option<usize>,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Server address
    #[arg(long)]
    pub connect: String,
    /// Frame file or directory
    #[arg(long)]
    pub frames: PathBuf,
    /// Send rate, frames per second
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Region JSONL; each frame's record rides along as a trailer
    /// [default: none]
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// Config JSON sent before streaming, e.g. '{"lambda":100}'
    /// [default: none]
    #[arg(long, value_name = "JSON")]
    pub set: Option<String>,
    /// Directory for the mitigated frames [default: none]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replay report JSON [default: stdout]
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON array of walker specs
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Clip length, seconds
    #[arg(long, default_value_t = 5.0)]
    pub duration: f64,
    /// Frame rate
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Canvas width, pixels
    #[arg(long, default_value_t = 320)]
    pub width: u32,
    /// Canvas height, pixels
    #[arg(long, default_value_t = 240)]
    pub height: u32,
    /// Fraction of frames with swapped ankle labels
    #[arg(long, default_value_t = 0.0)]
    pub swap_fraction: f64,
    /// Skip rendering frames [default: off]
    #[arg(long)]
    pub no_frames: bool,
    /// Raster format of rendered frames
    #[arg(long, value_enum, default_value_t = FormatArg::Png)]
    pub format: FormatArg,
}
