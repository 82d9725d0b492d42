//! End-to-end glue: ROI extraction, per-sample perturbation for every
//! method, windowed heart-rate estimation and corpus metrics.

use rayon::prelude::*;

use crate::baselines::{add_gaussian_noise, bdct_mask, instahide_mix, le_encrypt, LeKey};
use crate::error::{Error, Result};
use crate::estimators::{mean_traces, mean_traces_real, Estimator, RgbTraces, BAND_HI_HZ, BAND_LO_HZ};
use crate::eval::{estimate_hr, hr_metrics};
use crate::formats::ClipData;
use crate::ingest::window_starts;
use crate::model::{Clip, HrReport, LandmarkSet, PermutationKey, PerturbMethod, PerturbSpec, PpgTrace, VideoHr};
use crate::perturb::{derive_sample_key, perturb_clip, sample_seed};
use crate::rng::{splitmix64, SplitMix64};
use crate::roi::roi_frame;

/// Maps every frame to its 64x64 ROI using the matching landmark set.
pub fn roi_clip(clip: &Clip, landmarks: &[LandmarkSet]) -> Result<Clip> {
    if landmarks.len() != clip.len() {
        return Err(Error::FrameCountMismatch { landmarks: landmarks.len(), frames: clip.len() });
    }
    let frames = clip.frames().par_iter().zip(landmarks).map(|(f, lm)| roi_frame(f, lm)).collect::<Result<Vec<_>>>()?;
    let mut out = Clip::new(frames, clip.fps(), clip.source_id.clone())?;
    out.window_index = clip.window_index;
    Ok(out)
}

/// Mixing weights for InstaHide, drawn uniformly from the simplex.
pub fn instahide_weights(seed: u64) -> [f64; 2] {
    let u = (SplitMix64::new(seed).next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    [u, 1.0 - u]
}

/// Applies a permutation-keyed method (pixel or patch shuffle, BDCT) with
/// an explicit key.
pub fn perturb_with_key(clip: &Clip, spec: &PerturbSpec, key: &PermutationKey) -> Result<Clip> {
    match spec.method {
        PerturbMethod::RoiSh | PerturbMethod::RoiShB | PerturbMethod::RoiShPatch(_) => perturb_clip(clip, spec, key),
        PerturbMethod::Bdct => {
            spec.validate()?;
            let frames = clip.frames().par_iter().map(|f| bdct_mask(f, key)).collect::<Result<Vec<_>>>()?;
            clip.with_frames(frames)
        }
        other => Err(Error::InvalidParameter(format!("{other} is not keyed by a permutation"))),
    }
}

/// Applies `spec` to one ROI-space clip. `sample_index` selects the key under
/// the key policy; `partner` is the second image source for InstaHide.
pub fn perturb_sample(clip: &Clip, partner: Option<&Clip>, spec: &PerturbSpec, sample_index: u64) -> Result<ClipData> {
    spec.validate()?;
    let seed = sample_seed(&spec.key_policy, sample_index);
    let out = match spec.method {
        PerturbMethod::Roi => clip.clone(),
        PerturbMethod::RoiSh | PerturbMethod::RoiShB | PerturbMethod::RoiShPatch(_) | PerturbMethod::Bdct => {
            let n = spec.key_size().expect("permutation-keyed method");
            perturb_with_key(clip, spec, &derive_sample_key(&spec.key_policy, sample_index, n))?
        }
        PerturbMethod::Noise => add_gaussian_noise(clip, spec.noise_variance, seed)?,
        PerturbMethod::Le => {
            let key = LeKey::from_seed(seed);
            let frames = clip.frames().par_iter().map(|f| le_encrypt(f, &key)).collect::<Result<Vec<_>>>()?;
            clip.with_frames(frames)?
        }
        PerturbMethod::InstaHide => {
            let partner = partner.ok_or_else(|| Error::InvalidParameter("InstaHide needs a partner clip".into()))?;
            let mixed = instahide_mix(clip, partner, instahide_weights(seed), Some(splitmix64(seed)))?;
            return Ok(ClipData::F32(mixed));
        }
    };
    Ok(ClipData::U8(out))
}

/// The InstaHide partner of video `i` among `n`: the next video, wrapping,
/// or `None` when the corpus has a single video (the caller then mixes the
/// clip with its own time reversal).
pub fn partner_index(i: usize, n: usize) -> Option<usize> {
    (n > 1).then(|| (i + 1) % n)
}

pub fn time_reversed(clip: &Clip) -> Result<Clip> {
    let mut frames = clip.frames().to_vec();
    frames.reverse();
    clip.with_frames(frames)
}

/// Perturbs every clip of a corpus; sample `i` uses key index `i`.
pub fn perturb_corpus(clips: &[Clip], spec: &PerturbSpec) -> Result<Vec<ClipData>> {
    clips
        .par_iter()
        .enumerate()
        .map(|(i, clip)| {
            let reversed;
            let partner = match (spec.method, partner_index(i, clips.len())) {
                (PerturbMethod::InstaHide, Some(j)) => Some(&clips[j]),
                (PerturbMethod::InstaHide, None) => {
                    reversed = time_reversed(clip)?;
                    Some(&reversed)
                }
                _ => None,
            };
            perturb_sample(clip, partner, spec, i as u64)
        })
        .collect()
}

pub fn clip_traces(data: &ClipData) -> Result<RgbTraces> {
    match data {
        ClipData::U8(c) => mean_traces(c),
        ClipData::F32(c) => mean_traces_real(c),
    }
}

/// Windowing and pulse band for heart-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowConfig {
    pub window: usize,
    pub stride: usize,
    pub band_lo: f64,
    pub band_hi: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window: crate::ingest::DEFAULT_WINDOW,
            stride: crate::ingest::DEFAULT_STRIDE,
            band_lo: BAND_LO_HZ,
            band_hi: BAND_HI_HZ,
        }
    }
}

/// Per-window heart rates from the estimator's pulse signal, the estimator
/// being run on each window separately.
pub fn window_hrs(traces: &RgbTraces, estimator: Estimator, cfg: &WindowConfig) -> Result<Vec<f64>> {
    window_starts(traces.len(), cfg.window, cfg.stride)?
        .into_iter()
        .map(|s| {
            let pulse = estimator.run(&traces.slice(s, cfg.window))?;
            Ok(estimate_hr(&pulse, cfg.band_lo, cfg.band_hi)?.bpm)
        })
        .collect()
}

/// Per-window heart rates of a reference PPG trace.
pub fn window_hrs_ppg(ppg: &PpgTrace, cfg: &WindowConfig) -> Result<Vec<f64>> {
    window_starts(ppg.len(), cfg.window, cfg.stride)?
        .into_iter()
        .map(|s| Ok(estimate_hr(&ppg.slice(s, cfg.window), cfg.band_lo, cfg.band_hi)?.bpm))
        .collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Video heart rate as the mean of the window estimates, for the prediction
/// and, through the same path, for the aligned ground truth.
pub fn video_hr(
    id: &str,
    traces: &RgbTraces,
    gt: &PpgTrace,
    estimator: Estimator,
    cfg: &WindowConfig,
) -> Result<VideoHr> {
    if traces.len() != gt.len() {
        return Err(Error::LengthMismatch(traces.len(), gt.len()));
    }
    let per_window_hr = window_hrs(traces, estimator, cfg)?;
    let gt_hr = mean(&window_hrs_ppg(gt, cfg)?);
    Ok(VideoHr { id: id.to_string(), pred_hr: mean(&per_window_hr), per_window_hr, gt_hr })
}

/// Same as [`video_hr`] for a precomputed pulse signal (e.g. `signal.csv`).
pub fn signal_video_hr(id: &str, pulse: &PpgTrace, gt: &PpgTrace, cfg: &WindowConfig) -> Result<VideoHr> {
    if pulse.len() != gt.len() {
        return Err(Error::LengthMismatch(pulse.len(), gt.len()));
    }
    let per_window_hr = window_hrs_ppg(pulse, cfg)?;
    let gt_hr = mean(&window_hrs_ppg(gt, cfg)?);
    Ok(VideoHr { id: id.to_string(), pred_hr: mean(&per_window_hr), per_window_hr, gt_hr })
}

/// Corpus metrics over per-video pairs, in the given order.
pub fn hr_report(videos: Vec<VideoHr>) -> Result<HrReport> {
    if videos.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pred: Vec<f64> = videos.iter().map(|v| v.pred_hr).collect();
    let gt: Vec<f64> = videos.iter().map(|v| v.gt_hr).collect();
    let m = hr_metrics(&pred, &gt)?;
    Ok(HrReport { videos, mae: m.mae, rmse: m.rmse, pearson_r: m.pearson_r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KeyMode, KeyPolicy};
    use crate::synth::{synthesize_clip, SynthParams};

    fn policy() -> KeyPolicy {
        KeyPolicy::new(KeyMode::Unbounded, 7).unwrap()
    }

    fn synth(hr: f64, frames: usize) -> (Clip, PpgTrace) {
        let mut p = SynthParams::new(hr, 30.0, frames);
        p.noise_sigma = 1.0;
        p.seed = hr as u64;
        synthesize_clip(&p).unwrap()
    }

    #[test]
    fn every_method_runs() {
        let (clip, _) = synth(72.0, 8);
        let (other, _) = synth(90.0, 8);
        for method in [
            PerturbMethod::Roi,
            PerturbMethod::RoiSh,
            PerturbMethod::RoiShB,
            PerturbMethod::RoiShPatch(4),
            PerturbMethod::Noise,
            PerturbMethod::Bdct,
            PerturbMethod::Le,
            PerturbMethod::InstaHide,
        ] {
            let spec = PerturbSpec::new(method, policy());
            let out = perturb_sample(&clip, Some(&other), &spec, 3).unwrap();
            assert_eq!(out.len(), 8, "{method:?}");
            assert_eq!(matches!(out, ClipData::F32(_)), method == PerturbMethod::InstaHide);
        }
    }

    #[test]
    fn instahide_requires_partner() {
        let (clip, _) = synth(72.0, 4);
        let spec = PerturbSpec::new(PerturbMethod::InstaHide, policy());
        assert!(perturb_sample(&clip, None, &spec, 0).is_err());
        assert_eq!(perturb_corpus(&[clip], &spec).unwrap().len(), 1);
    }

    #[test]
    fn shuffled_video_hr_matches_roi() {
        let (clip, gt) = synth(72.0, 300);
        let cfg = WindowConfig::default();
        let roi = video_hr("a", &mean_traces(&clip).unwrap(), &gt, Estimator::Chrom, &cfg).unwrap();
        let spec = PerturbSpec::new(PerturbMethod::RoiSh, policy());
        let sh = perturb_sample(&clip, None, &spec, 0).unwrap();
        let shuffled = video_hr("a", &clip_traces(&sh).unwrap(), &gt, Estimator::Chrom, &cfg).unwrap();
        assert_eq!(roi, shuffled);
        assert_eq!(roi.per_window_hr.len(), (300 - 128) / 8 + 1);
        assert!((roi.pred_hr - 72.0).abs() < 2.0, "{}", roi.pred_hr);
        assert!((roi.gt_hr - 72.0).abs() < 2.0, "{}", roi.gt_hr);
    }

    #[test]
    fn weights_on_simplex() {
        for s in 0..100 {
            let [a, b] = instahide_weights(s);
            assert!((0.0..=1.0).contains(&a));
            assert!((a + b - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn partners() {
        assert_eq!(partner_index(0, 1), None);
        assert_eq!(partner_index(2, 3), Some(0));
        assert_eq!(partner_index(0, 3), Some(1));
    }

    #[test]
    fn report_requires_videos() {
        assert!(matches!(hr_report(vec![]), Err(Error::EmptyInput)));
    }
}
