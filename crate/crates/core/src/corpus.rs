//! Synthetic evaluation corpus and method-by-method heart-rate comparison.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::Estimator;
use crate::formats::ClipData;
use crate::model::{Clip, HrReport, KeyMode, KeyPolicy, LandmarkSet, PerturbMethod, PerturbSpec, PpgTrace};
use crate::pipeline::{clip_traces, hr_report, perturb_corpus, roi_clip, video_hr, WindowConfig};
use crate::synth::{canonical_landmarks, synthesize_clip, SynthParams};

pub const CORPUS_HRS: [f64; 7] = [48.0, 60.0, 72.0, 90.0, 120.0, 150.0, 180.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub hrs: Vec<f64>,
    pub fps: f64,
    pub frames: usize,
    pub noise_sigma: f64,
    /// Video `i` uses noise seed `seed + i`.
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { hrs: CORPUS_HRS.to_vec(), fps: 30.0, frames: 300, noise_sigma: 2.0, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusVideo {
    pub id: String,
    pub clip: Clip,
    pub landmarks: Vec<LandmarkSet>,
    pub ppg: PpgTrace,
}

impl CorpusConfig {
    pub fn params(&self, i: usize) -> SynthParams {
        let mut p = SynthParams::new(self.hrs[i], self.fps, self.frames);
        p.noise_sigma = self.noise_sigma;
        p.seed = self.seed.wrapping_add(i as u64);
        p
    }

    pub fn video_id(&self, i: usize) -> String {
        format!("v{i:02}_hr{}", self.hrs[i])
    }
}

pub fn synthetic_corpus(cfg: &CorpusConfig) -> Result<Vec<CorpusVideo>> {
    (0..cfg.hrs.len())
        .map(|i| {
            let p = cfg.params(i);
            let (mut clip, ppg) = synthesize_clip(&p)?;
            clip.source_id = cfg.video_id(i);
            let lm = canonical_landmarks(p.height, p.width);
            let landmarks = (0..clip.len())
                .map(|t| {
                    let mut l = lm.clone();
                    l.frame_index = t;
                    l
                })
                .collect();
            Ok(CorpusVideo { id: clip.source_id.clone(), clip, landmarks, ppg })
        })
        .collect()
}

/// One method/estimator cell of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub key_policy: String,
    pub estimator: Estimator,
    pub report: HrReport,
}

/// Heart-rate MAE of every method on the same corpus and key policy, ROI
/// extraction applied first.
pub fn compare_methods(
    corpus: &[CorpusVideo],
    methods: &[PerturbMethod],
    estimators: &[Estimator],
    policy: KeyPolicy,
) -> Result<Vec<MethodScore>> {
    let rois = corpus.iter().map(|v| roi_clip(&v.clip, &v.landmarks)).collect::<Result<Vec<_>>>()?;
    let mut scores = Vec::new();
    for &method in methods {
        let spec = PerturbSpec::new(method, policy);
        let perturbed = perturb_corpus(&rois, &spec)?;
        for &estimator in estimators {
            scores.push(MethodScore {
                method: method.to_string(),
                key_policy: policy.mode.to_string(),
                estimator,
                report: score(corpus, &perturbed, estimator)?,
            });
        }
    }
    Ok(scores)
}

fn score(corpus: &[CorpusVideo], perturbed: &[ClipData], estimator: Estimator) -> Result<HrReport> {
    let cfg = WindowConfig::default();
    let videos = corpus
        .iter()
        .zip(perturbed)
        .map(|(v, p)| video_hr(&v.id, &clip_traces(p)?, &v.ppg, estimator, &cfg))
        .collect::<Result<Vec<_>>>()?;
    hr_report(videos)
}

/// The methods of the privacy comparison: ours first, then the baselines.
pub const COMPARISON_METHODS: [PerturbMethod; 5] =
    [PerturbMethod::RoiShB, PerturbMethod::Noise, PerturbMethod::Bdct, PerturbMethod::Le, PerturbMethod::InstaHide];

pub fn unbounded(master_seed: u64) -> KeyPolicy {
    KeyPolicy { mode: KeyMode::Unbounded, master_seed }
}
