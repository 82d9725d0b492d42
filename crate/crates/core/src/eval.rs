//! Welch spectra, heart-rate extraction, and accuracy metrics.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PpgTrace;

pub const WELCH_MIN_LEN: usize = 32;
const WELCH_MAX_SEGMENT: usize = 256;
const WELCH_MIN_NFFT: usize = 2048;
/// Peak-to-median ratio below which an estimate is flagged.
const CONFIDENCE_RATIO: f64 = 3.0;
pub const SMOOTH_L1_BETA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WelchConfig {
    pub segment: usize,
    pub nfft: usize,
}

impl WelchConfig {
    pub fn for_len(len: usize) -> Self {
        let segment = len.min(WELCH_MAX_SEGMENT);
        let nfft = WELCH_MIN_NFFT.max((4 * segment).next_power_of_two());
        Self { segment, nfft }
    }
}

fn hann(n: usize) -> Vec<f64> {
    // Periodic form; sums to n / 2 and is constant-overlap-add at 50 %.
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// One-sided power spectral density by Welch's method: Hann segments with
/// 50 % overlap, each mean-removed and zero-padded to `nfft`.
pub fn welch_psd(signal: &PpgTrace) -> Result<Spectrum> {
    let x = signal.samples();
    if x.len() < WELCH_MIN_LEN {
        return Err(Error::TooShort { len: x.len(), min: WELCH_MIN_LEN - 1 });
    }
    let WelchConfig { segment, nfft } = WelchConfig::for_len(x.len());
    let step = segment - segment / 2;
    let window = hann(segment);
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);

    let bins = nfft / 2 + 1;
    let mut power = vec![0f64; bins];
    let mut count = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut start = 0;
    while start + segment <= x.len() {
        let seg = &x[start..start + segment];
        let m = seg.iter().sum::<f64>() / segment as f64;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, (v, w)) in seg.iter().zip(&window).enumerate() {
            buf[i].re = (v - m) * w;
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (signal.fs() * win_energy * count as f64);
    for (k, p) in power.iter_mut().enumerate() {
        *p *= scale;
        if k != 0 && !(nfft % 2 == 0 && k == bins - 1) {
            *p *= 2.0;
        }
    }
    let freqs = (0..bins).map(|k| k as f64 * signal.fs() / nfft as f64).collect();
    Ok(Spectrum { freqs, power })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrEstimate {
    pub bpm: f64,
    pub peak_hz: f64,
    /// Peak power under three times the in-band median.
    pub low_confidence: bool,
}

/// Heart rate at the in-band PSD maximum.
pub fn estimate_hr(signal: &PpgTrace, lo: f64, hi: f64) -> Result<HrEstimate> {
    let spec = welch_psd(signal)?;
    let band: Vec<(f64, f64)> =
        spec.freqs.iter().zip(&spec.power).filter(|(f, _)| (lo..=hi).contains(*f)).map(|(&f, &p)| (f, p)).collect();
    if band.is_empty() {
        return Err(Error::InvalidParameter(format!("band [{lo}, {hi}] Hz holds no spectral bins")));
    }
    let (peak_hz, peak) =
        band.iter().copied().fold((band[0].0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let mut powers: Vec<f64> = band.iter().map(|b| b.1).collect();
    powers.sort_by(|a, b| a.partial_cmp(b).expect("finite power"));
    let median = if powers.len() % 2 == 1 {
        powers[powers.len() / 2]
    } else {
        0.5 * (powers[powers.len() / 2 - 1] + powers[powers.len() / 2])
    };
    Ok(HrEstimate { bpm: 60.0 * peak_hz, peak_hz, low_confidence: peak < CONFIDENCE_RATIO * median })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// Undefined for fewer than two pairs or a constant side.
    pub pearson_r: Option<f64>,
}

pub fn hr_metrics(pred: &[f64], gt: &[f64]) -> Result<HrMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch(pred.len(), gt.len()));
    }
    if pred.is_empty() {
        return Err(Error::LengthMismatch(0, 0));
    }
    let n = pred.len() as f64;
    let mae = pred.iter().zip(gt).map(|(p, g)| (p - g).abs()).sum::<f64>() / n;
    let rmse = (pred.iter().zip(gt).map(|(p, g)| (p - g).powi(2)).sum::<f64>() / n).sqrt();
    Ok(HrMetrics { mae, rmse, pearson_r: pearson(pred, gt).ok() })
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Smooth L1 of a single difference.
pub fn smooth_l1_elem(delta: f64, beta: f64) -> f64 {
    let a = delta.abs();
    if a < beta {
        0.5 * delta * delta / beta
    } else {
        a - 0.5 * beta
    }
}

/// Derivative of [`smooth_l1_elem`] with respect to `delta`.
pub fn smooth_l1_grad(delta: f64, beta: f64) -> f64 {
    if delta.abs() < beta {
        delta / beta
    } else {
        delta.signum()
    }
}

/// Mean smooth-L1 distance between two traces.
pub fn smooth_l1(pred: &PpgTrace, gt: &PpgTrace, beta: f64) -> Result<f64> {
    smooth_l1_slices(pred.samples(), gt.samples(), beta)
}

pub fn smooth_l1_slices(pred: &[f64], gt: &[f64], beta: f64) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch(pred.len(), gt.len()));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = pred.iter().zip(gt).map(|(p, g)| smooth_l1_elem(p - g, beta)).sum();
    Ok(total / pred.len() as f64)
}
