use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use veilpulse::estimators::{BAND_HI_HZ, BAND_LO_HZ};
use veilpulse::{Estimator, KeyMode, PerturbMethod};

#[derive(Debug, Parser)]
#[command(name = "veilpulse", version, about = "Privacy-preserving rPPG toolkit")]
pub struct Cli {
    /// Worker threads. Outputs do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Path of the run record. Defaults to `run.json` in the output directory,
    /// or `<stem>.run.json` beside an output file.
    #[arg(long, global = true)]
    pub run_json: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Write a seeded permutation key file.
    Keygen(KeygenArgs),
    /// Generate a synthetic dataset root with one video per heart rate.
    Synth(SynthArgs),
    /// Apply ROI extraction and a perturbation to a video or dataset root.
    Perturb(PerturbArgs),
    /// Extract a pulse signal with a classical estimator.
    Estimate(EstimateArgs),
    /// Heart rate of a signal CSV by Welch peak.
    Hr(HrArgs),
    /// Score predicted signals against ground-truth PPG.
    Evaluate(EvaluateArgs),
    /// Print log10(n!), the key space of an n-element shuffle.
    Keyspace(KeyspaceArgs),
    /// Heart-rate comparison of roi+sh+b against the privacy baselines on the
    /// synthetic corpus.
    Compare(CompareArgs),
    /// Re-execute a recorded run.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct KeygenArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Heart rates in bpm, comma separated; one video each.
    #[arg(long, value_delimiter = ',', required = true)]
    pub hr: Vec<f64>,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 300)]
    pub frames: usize,
    /// Pixel noise standard deviation in intensity units.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Noise seed of the first video; video `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.3)]
    pub harmonic2: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutFormat {
    /// PNG frame sequence.
    Png,
    /// RPPGCLIP binary with a JSON sidecar.
    Clip,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PerturbArgs {
    /// A video directory or a dataset root of video directories.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Landmarks JSONL. A path for a video directory; a file name inside each
    /// video for a dataset root. Without it frames are taken as ROIs already.
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    /// roi | roi+sh | roi+sh+b | patch:P | noise | bdct | le | instahide
    #[arg(long)]
    pub method: PerturbMethod,
    /// Explicit permutation key used for every sample.
    #[arg(long, conflicts_with_all = ["master_seed", "key_policy"])]
    pub key: Option<PathBuf>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// fixed | pool:M | unbounded
    #[arg(long)]
    pub key_policy: Option<KeyMode>,
    /// Odd Gaussian kernel size; defaults to 3 for blurred methods.
    #[arg(long)]
    pub blur_k: Option<usize>,
    /// Noise variance in [0, 1] intensity units.
    #[arg(long, default_value_t = 0.5)]
    pub noise_var: f64,
    /// Overrides the manifest frame rate.
    #[arg(long)]
    pub fps: Option<f64>,
    /// Output encoding; InstaHide always writes `clip`.
    #[arg(long, value_enum, default_value_t = OutFormat::Png)]
    pub format: OutFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// A video directory (PNG frames or RPPGCLIP) or a dataset root.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: EstimatorArg,
    /// Overrides the manifest or sidecar frame rate.
    #[arg(long)]
    pub fps: Option<f64>,
    /// Signal CSV for a video; a directory receiving `<id>/signal.csv` for a root.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorArg {
    Chrom,
    Pos,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Chrom => Estimator::Chrom,
            EstimatorArg::Pos => Estimator::Pos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl std::str::FromStr for Band {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s.split_once(':').ok_or_else(|| format!("band {s:?} is not LO:HI"))?;
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad band edge {lo:?}"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad band edge {hi:?}"))?;
        if !(lo > 0.0 && hi > lo) {
            return Err(format!("band {s:?} needs 0 < LO < HI"));
        }
        Ok(Band { lo, hi })
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl Default for Band {
    fn default() -> Self {
        Band { lo: BAND_LO_HZ, hi: BAND_HI_HZ }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct HrArgs {
    #[arg(long)]
    pub signal: PathBuf,
    /// Sampling rate; defaults to the rate implied by the CSV timestamps.
    #[arg(long)]
    pub fs: Option<f64>,
    #[arg(long, default_value_t = Band::default())]
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Root holding `<id>/signal.csv`.
    #[arg(long)]
    pub pred_root: PathBuf,
    /// Root holding `<id>/ppg.csv`.
    #[arg(long)]
    pub gt_root: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = veilpulse::ingest::DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = veilpulse::ingest::DEFAULT_STRIDE)]
    pub stride: usize,
    #[arg(long, default_value_t = Band::default())]
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct KeyspaceArgs {
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed of the unbounded key policy shared by all methods.
    #[arg(long, default_value_t = 0)]
    pub master_seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = veilpulse::corpus::CORPUS_HRS)]
    pub hr: Vec<f64>,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 300)]
    pub frames: usize,
    #[arg(long, default_value_t = 2.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub corpus_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// A run.json written by an earlier invocation.
    #[arg(long)]
    pub run: PathBuf,
}
