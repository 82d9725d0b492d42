//! Synthetic face-like clips with a known pulse, used as a test oracle.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Clip, Frame, LandmarkSet, PpgTrace, CHANNELS};

/// `sin(2 pi f t) + h2 * sin(4 pi f t)` with `f = hr / 60`.
pub fn synthesize_ppg(hr: f64, fs: f64, duration: f64, harmonic2_amp: f64) -> Result<PpgTrace> {
    let n = (duration * fs).round() as usize;
    ppg_samples(hr, fs, n, harmonic2_amp)
}

fn ppg_samples(hr: f64, fs: f64, n: usize, harmonic2_amp: f64) -> Result<PpgTrace> {
    if !(30.0..=240.0).contains(&hr) {
        return Err(Error::HrOutOfRange(hr));
    }
    let f = hr / 60.0;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            (2.0 * PI * f * t).sin() + harmonic2_amp * (4.0 * PI * f * t).sin()
        })
        .collect();
    PpgTrace::new(samples, fs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub hr: f64,
    pub fps: f64,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub base_color: [f64; 3],
    /// Pulse amplitude per channel, in intensity units.
    pub pulse_amp: [f64; 3],
    pub harmonic2_amp: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn new(hr: f64, fps: f64, frames: usize) -> Self {
        Self {
            hr,
            fps,
            frames,
            height: 64,
            width: 64,
            base_color: [150.0, 110.0, 95.0],
            pulse_amp: [0.6, 1.0, 0.4],
            harmonic2_amp: 0.3,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Smooth spatial weight in [0.5, 1.0].
pub fn spatial_profile(y: usize, x: usize, height: usize, width: usize) -> f64 {
    let u = 2.0 * PI * x as f64 / width as f64;
    let v = 2.0 * PI * y as f64 / height as f64;
    0.75 + 0.25 * u.cos() * v.cos()
}

/// `base_c + profile(x, y) * amp_c * ppg(t) + noise`, rounded and clamped.
///
/// Returns the clip and the exact ground-truth trace on the frame grid.
pub fn synthesize_clip(p: &SynthParams) -> Result<(Clip, PpgTrace)> {
    let ppg = ppg_samples(p.hr, p.fps, p.frames, p.harmonic2_amp)?;
    let peak = 1.0 + p.harmonic2_amp.abs();
    for c in 0..CHANNELS {
        let (lo, hi) = (p.base_color[c] - p.pulse_amp[c].abs() * peak, p.base_color[c] + p.pulse_amp[c].abs() * peak);
        if lo < 0.0 || hi > 255.0 {
            return Err(Error::RangeViolation(format!("channel {c} spans [{lo}, {hi}]")));
        }
    }
    if !(p.noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter("noise sigma must be >= 0".into()));
    }
    let (h, w) = (p.height, p.width);
    let profile: Vec<f64> = (0..h * w).map(|i| spatial_profile(i / w, i % w, h, w)).collect();
    let noise = Normal::new(0.0, p.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let mut frames = Vec::with_capacity(p.frames);
    for &s in ppg.samples() {
        let mut data = Vec::with_capacity(h * w * CHANNELS);
        for &weight in &profile {
            for c in 0..CHANNELS {
                let mut v = p.base_color[c] + weight * p.pulse_amp[c] * s;
                if p.noise_sigma > 0.0 {
                    v += noise.sample(&mut rng);
                }
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        frames.push(Frame::new(h, w, data)?);
    }
    let clip = Clip::new(frames, p.fps, format!("synth_hr{}", p.hr))?;
    Ok((clip, ppg))
}

/// A frontal iBUG-68 template scaled into a `width x height` frame.
pub fn canonical_landmarks(height: usize, width: usize) -> LandmarkSet {
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(68);
    for i in 0..17 {
        let a = PI * i as f64 / 16.0;
        pts.push([0.5 - 0.45 * a.cos(), 0.30 + 0.68 * a.sin()]);
    }
    for side in [0.15, 0.58] {
        for i in 0..5 {
            let x = side + 0.27 * i as f64 / 4.0;
            let arch = 0.02 * (PI * i as f64 / 4.0).sin();
            pts.push([x, 0.22 - arch]);
        }
    }
    for i in 0..4 {
        pts.push([0.5, 0.30 + 0.08 * i as f64]);
    }
    for i in 0..5 {
        pts.push([0.40 + 0.05 * i as f64, 0.62]);
    }
    for cx in [0.30, 0.70] {
        for i in 0..6 {
            let a = PI * i as f64 / 3.0;
            pts.push([cx - 0.07 * a.cos(), 0.32 - 0.03 * a.sin()]);
        }
    }
    for i in 0..12 {
        let a = PI * i as f64 / 6.0;
        pts.push([0.5 - 0.18 * a.cos(), 0.78 - 0.06 * a.sin()]);
    }
    for i in 0..8 {
        let a = PI * i as f64 / 4.0;
        pts.push([0.5 - 0.12 * a.cos(), 0.78 - 0.025 * a.sin()]);
    }
    let scaled = pts.into_iter().map(|[x, y]| [x * (width - 1) as f64, y * (height - 1) as f64]).collect();
    LandmarkSet::new(0, scaled).expect("template has 68 points")
}
