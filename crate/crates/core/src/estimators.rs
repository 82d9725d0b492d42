//! Mean-trace rPPG estimators (CHROM and POS).
//!
//! Both depend on a clip only through its per-frame spatial channel means,
//! so any spatial permutation of the pixels leaves their output unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::BandPass;
use crate::model::{Clip, PpgTrace, RealClip, CHANNELS};

pub const BAND_LO_HZ: f64 = 0.7;
pub const BAND_HI_HZ: f64 = 4.0;
const BUTTER_ORDER: usize = 2;
pub const CHROM_MIN_FRAMES: usize = 64;
/// Below this a standard deviation counts as zero.
const SIGMA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Chrom,
    Pos,
}

impl Estimator {
    pub fn run(self, traces: &RgbTraces) -> Result<PpgTrace> {
        match self {
            Estimator::Chrom => chrom_traces(traces),
            Estimator::Pos => pos_traces(traces),
        }
    }
}

/// Per-frame mean intensity of each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbTraces {
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
    pub fps: f64,
}

impl RgbTraces {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn slice(&self, start: usize, len: usize) -> RgbTraces {
        RgbTraces {
            r: self.r[start..start + len].to_vec(),
            g: self.g[start..start + len].to_vec(),
            b: self.b[start..start + len].to_vec(),
            fps: self.fps,
        }
    }

    fn channels(&self) -> [&[f64]; 3] {
        [&self.r, &self.g, &self.b]
    }
}

/// Frame means computed from exact integer sums, so they are independent of
/// pixel order.
pub fn mean_traces(clip: &Clip) -> Result<RgbTraces> {
    if clip.is_empty() {
        return Err(Error::EmptyClip);
    }
    let mut tr = RgbTraces { r: vec![], g: vec![], b: vec![], fps: clip.fps() };
    for f in clip.frames() {
        let [r, g, b] = f.channel_means();
        tr.r.push(r);
        tr.g.push(g);
        tr.b.push(b);
    }
    Ok(tr)
}

/// Traces of a real-valued clip in `[-1, 1]`, mapped back to intensity units
/// with `(v + 1) * 127.5`.
pub fn mean_traces_real(clip: &RealClip) -> Result<RgbTraces> {
    let mut tr = RgbTraces { r: vec![], g: vec![], b: vec![], fps: clip.fps };
    let n = (clip.height * clip.width) as f64;
    for t in 0..clip.len {
        let mut acc = [0f64; 3];
        for px in clip.frame(t).chunks_exact(CHANNELS) {
            for c in 0..CHANNELS {
                acc[c] += f64::from(px[c]);
            }
        }
        let [r, g, b] = acc.map(|s| (s / n + 1.0) * 127.5);
        tr.r.push(r);
        tr.g.push(g);
        tr.b.push(b);
    }
    Ok(tr)
}

/// Zero-phase Butterworth band-pass.
pub fn bandpass(signal: &PpgTrace, lo: f64, hi: f64) -> Result<PpgTrace> {
    let filter = BandPass::butterworth(BUTTER_ORDER, lo, hi, signal.fs())?;
    PpgTrace::with_offset(filter.filtfilt(signal.samples())?, signal.fs(), signal.t0)
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den < SIGMA_EPS {
        0.0
    } else {
        num / den
    }
}

fn normalized(x: &[f64]) -> Result<Vec<f64>> {
    let m = mean(x);
    if m == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(x.iter().map(|v| v / m).collect())
}

fn centered(mut x: Vec<f64>) -> Vec<f64> {
    let m = mean(&x);
    x.iter_mut().for_each(|v| *v -= m);
    x
}

pub fn chrom(clip: &Clip) -> Result<PpgTrace> {
    chrom_traces(&mean_traces(clip)?)
}

/// CHROM over one window: `X = 3Rn - 2Gn`, `Y = 1.5Rn + Gn - 1.5Bn`, both
/// band-passed, `S = X - (sd X / sd Y) Y`, mean-centred.
pub fn chrom_traces(tr: &RgbTraces) -> Result<PpgTrace> {
    if tr.len() < CHROM_MIN_FRAMES {
        return Err(Error::TooShort { len: tr.len(), min: CHROM_MIN_FRAMES - 1 });
    }
    let [r, g, b] = tr.channels().map(normalized);
    let (r, g, b) = (r?, g?, b?);
    let x: Vec<f64> = r.iter().zip(&g).map(|(r, g)| 3.0 * r - 2.0 * g).collect();
    let y: Vec<f64> = r.iter().zip(&g).zip(&b).map(|((r, g), b)| 1.5 * r + g - 1.5 * b).collect();
    let filter = BandPass::butterworth(BUTTER_ORDER, BAND_LO_HZ, BAND_HI_HZ, tr.fps)?;
    let xf = filter.filtfilt(&x)?;
    let yf = filter.filtfilt(&y)?;
    let alpha = ratio(std_dev(&xf), std_dev(&yf));
    let s = xf.iter().zip(&yf).map(|(x, y)| x - alpha * y).collect();
    PpgTrace::new(centered(s), tr.fps)
}

pub fn pos(clip: &Clip) -> Result<PpgTrace> {
    pos_traces(&mean_traces(clip)?)
}

/// Window length used by POS: 1.6 s of frames, rounded up.
pub fn pos_window(fps: f64) -> usize {
    (1.6 * fps).ceil() as usize
}

/// POS with overlap-add over sliding windows of 1.6 s.
pub fn pos_traces(tr: &RgbTraces) -> Result<PpgTrace> {
    let l = pos_window(tr.fps);
    let n = tr.len();
    if l < 2 || n < l {
        return Err(Error::TooShort { len: n, min: l.saturating_sub(1) });
    }
    let mut out = vec![0f64; n];
    for start in 0..=n - l {
        let win = tr.slice(start, l);
        let [r, g, b] = win.channels().map(normalized);
        let (r, g, b) = (r?, g?, b?);
        let s1: Vec<f64> = g.iter().zip(&b).map(|(g, b)| g - b).collect();
        let s2: Vec<f64> = r.iter().zip(&g).zip(&b).map(|((r, g), b)| g + b - 2.0 * r).collect();
        let alpha = ratio(std_dev(&s1), std_dev(&s2));
        let h = centered(s1.iter().zip(&s2).map(|(a, b)| a + alpha * b).collect());
        for (o, v) in out[start..start + l].iter_mut().zip(h) {
            *o += v;
        }
    }
    PpgTrace::new(out, tr.fps)
}
