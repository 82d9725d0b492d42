//! Shared domain types.
//!
//! Pixel data is row-major, channel-last, in R,G,B order. Every permutation
//! in the crate indexes pixels in that order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;
/// Side of the square ROI every perturbation operates on.
pub const ROI_SIZE: usize = 64;
pub const LANDMARK_COUNT: usize = 68;

/// One 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width * CHANNELS {
            return Err(Error::DataLength { len: data.len(), height, width });
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(height * width * CHANNELS).collect();
        Self { height, width, data }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x3", self.height, self.width)
    }

    /// Exact per-channel integer sums.
    pub fn channel_sums(&self) -> [u64; 3] {
        let mut sums = [0u64; 3];
        for px in self.data.chunks_exact(CHANNELS) {
            for c in 0..CHANNELS {
                sums[c] += u64::from(px[c]);
            }
        }
        sums
    }

    pub fn channel_means(&self) -> [f64; 3] {
        let n = self.pixel_count() as f64;
        self.channel_sums().map(|s| s as f64 / n)
    }

    /// Axis-aligned crop, rows `y0..y1`, columns `x0..x1` (half-open).
    pub fn crop(&self, y0: usize, y1: usize, x0: usize, x1: usize) -> Frame {
        let mut data = Vec::with_capacity((y1 - y0) * (x1 - x0) * CHANNELS);
        for y in y0..y1 {
            let start = (y * self.width + x0) * CHANNELS;
            let end = (y * self.width + x1) * CHANNELS;
            data.extend_from_slice(&self.data[start..end]);
        }
        Frame { height: y1 - y0, width: x1 - x0, data }
    }
}

/// An ordered run of equally shaped frames with its frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    frames: Vec<Frame>,
    fps: f64,
    pub source_id: String,
    pub window_index: Option<usize>,
}

impl Clip {
    pub fn new(frames: Vec<Frame>, fps: f64, source_id: impl Into<String>) -> Result<Self> {
        validate_clip(Self { frames, fps, source_id: source_id.into(), window_index: None })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    /// Same metadata, new frames. The frames must share one shape.
    pub fn with_frames(&self, frames: Vec<Frame>) -> Result<Self> {
        validate_clip(Self {
            frames,
            fps: self.fps,
            source_id: self.source_id.clone(),
            window_index: self.window_index,
        })
    }

    pub fn slice(&self, start: usize, len: usize) -> Clip {
        Clip {
            frames: self.frames[start..start + len].to_vec(),
            fps: self.fps,
            source_id: self.source_id.clone(),
            window_index: self.window_index,
        }
    }
}

/// Returns the clip unchanged when every invariant holds.
pub fn validate_clip(clip: Clip) -> Result<Clip> {
    if !(clip.fps > 0.0) || !clip.fps.is_finite() {
        return Err(Error::NonPositiveFps(clip.fps));
    }
    let first = clip.frames.first().ok_or(Error::EmptyClip)?;
    for f in &clip.frames[1..] {
        if !f.same_shape(first) {
            return Err(Error::ShapeMismatch { expected: first.shape_string(), found: f.shape_string() });
        }
    }
    for f in &clip.frames {
        if f.data.len() != f.height * f.width * CHANNELS {
            return Err(Error::DataLength { len: f.data.len(), height: f.height, width: f.width });
        }
    }
    Ok(clip)
}

/// Real-valued clip, `T x H x W x 3`, used for outputs that leave the 8-bit domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RealClip {
    pub len: usize,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub data: Vec<f32>,
}

impl RealClip {
    pub fn new(len: usize, height: usize, width: usize, fps: f64, data: Vec<f32>) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyClip);
        }
        if !(fps > 0.0) {
            return Err(Error::NonPositiveFps(fps));
        }
        if data.len() != len * height * width * CHANNELS {
            return Err(Error::DataLength { len: data.len(), height, width });
        }
        Ok(Self { len, height, width, fps, data })
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.height * self.width * CHANNELS;
        &self.data[t * n..(t + 1) * n]
    }
}

/// 68 facial landmarks in iBUG-68 order, 0-indexed.
///
/// Jaw 0-16, brows 17-26, nose 27-35, eyes 36-47, mouth 48-67.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub frame_index: usize,
    points: Vec<[f64; 2]>,
}

impl LandmarkSet {
    pub fn new(frame_index: usize, points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::WrongPointCount { record: frame_index, found: points.len() });
        }
        Ok(Self { frame_index, points })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn x(&self, i: usize) -> f64 {
        self.points[i][0]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.points[i][1]
    }

    /// Indices of points lying outside a `width x height` frame.
    pub fn out_of_bounds(&self, height: usize, width: usize) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, [x, y])| !(*x >= 0.0 && *y >= 0.0 && *x < width as f64 && *y < height as f64))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self { frame_index: self.frame_index, points: self.points.iter().map(|[x, y]| [x + dx, y + dy]).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeyProvenance {
    Seeded { seed: u64, algorithm: String },
    Explicit,
}

/// A bijection on `0..n`; output slot `i` receives input element `perm[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationKey {
    perm: Vec<usize>,
    pub provenance: KeyProvenance,
}

impl PermutationKey {
    pub fn new(perm: Vec<usize>, provenance: KeyProvenance) -> Result<Self> {
        let n = perm.len();
        if n == 0 {
            return Err(Error::InvalidPermutation("empty".into()));
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidPermutation(format!("index {p} out of range or repeated")));
            }
        }
        Ok(Self { perm, provenance })
    }

    pub fn explicit(perm: Vec<usize>) -> Result<Self> {
        Self::new(perm, KeyProvenance::Explicit)
    }

    pub fn identity(n: usize) -> Self {
        Self { perm: (0..n).collect(), provenance: KeyProvenance::Explicit }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        inv
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }
}

/// A uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PpgTrace {
    samples: Vec<f64>,
    fs: f64,
    pub t0: f64,
}

impl PpgTrace {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        Self::with_offset(samples, fs, 0.0)
    }

    pub fn with_offset(samples: Vec<f64>, fs: f64, t0: f64) -> Result<Self> {
        if !(fs > 0.0) || !fs.is_finite() || samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrace);
        }
        Ok(Self { samples, fs, t0 })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn slice(&self, start: usize, len: usize) -> PpgTrace {
        PpgTrace {
            samples: self.samples[start..start + len].to_vec(),
            fs: self.fs,
            t0: self.t0 + start as f64 / self.fs,
        }
    }
}

/// How a per-sample key is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    Fixed,
    Pool(u64),
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPolicy {
    pub mode: KeyMode,
    pub master_seed: u64,
}

impl KeyPolicy {
    pub fn new(mode: KeyMode, master_seed: u64) -> Result<Self> {
        if mode == KeyMode::Pool(0) {
            return Err(Error::InvalidParameter("key pool size must be >= 1".into()));
        }
        Ok(Self { mode, master_seed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMethod {
    /// ROI only, no perturbation.
    Roi,
    RoiSh,
    RoiShB,
    /// Patch shuffle with the given patch side, blurred when a kernel is set.
    RoiShPatch(usize),
    Noise,
    Bdct,
    Le,
    InstaHide,
}

impl fmt::Display for PerturbMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbMethod::Roi => f.write_str("roi"),
            PerturbMethod::RoiSh => f.write_str("roi+sh"),
            PerturbMethod::RoiShB => f.write_str("roi+sh+b"),
            PerturbMethod::RoiShPatch(p) => write!(f, "patch:{p}"),
            PerturbMethod::Noise => f.write_str("noise"),
            PerturbMethod::Bdct => f.write_str("bdct"),
            PerturbMethod::Le => f.write_str("le"),
            PerturbMethod::InstaHide => f.write_str("instahide"),
        }
    }
}

impl FromStr for PerturbMethod {
    type Err = Error;

    /// Parses `roi`, `roi+sh`, `roi+sh+b`, `patch:P`, `noise`, `bdct`, `le`, `instahide`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "roi" => PerturbMethod::Roi,
            "roi+sh" => PerturbMethod::RoiSh,
            "roi+sh+b" => PerturbMethod::RoiShB,
            "noise" => PerturbMethod::Noise,
            "bdct" => PerturbMethod::Bdct,
            "le" => PerturbMethod::Le,
            "instahide" => PerturbMethod::InstaHide,
            other => match other.strip_prefix("patch:").map(str::parse::<usize>) {
                Some(Ok(p)) if matches!(p, 1 | 2 | 4 | 8) => PerturbMethod::RoiShPatch(p),
                Some(Ok(p)) => return Err(Error::BadPatchSize(p)),
                _ => return Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
            },
        })
    }
}

impl fmt::Display for KeyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyMode::Fixed => f.write_str("fixed"),
            KeyMode::Pool(m) => write!(f, "pool:{m}"),
            KeyMode::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl FromStr for KeyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(KeyMode::Fixed),
            "unbounded" => Ok(KeyMode::Unbounded),
            other => match other.strip_prefix("pool:").map(str::parse::<u64>) {
                Some(Ok(m)) if m >= 1 => Ok(KeyMode::Pool(m)),
                _ => Err(Error::InvalidParameter(format!("unknown key policy {other:?}"))),
            },
        }
    }
}

/// Full description of a perturbation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub method: PerturbMethod,
    pub blur_kernel: Option<usize>,
    pub key_policy: KeyPolicy,
    /// Noise variance in normalized [0, 1] intensity units.
    pub noise_variance: f64,
    /// Number of images mixed by InstaHide.
    pub instahide_k: usize,
}

impl PerturbSpec {
    pub fn new(method: PerturbMethod, key_policy: KeyPolicy) -> Self {
        let blur_kernel = match method {
            PerturbMethod::RoiShB | PerturbMethod::RoiShPatch(_) => Some(3),
            _ => None,
        };
        Self { method, blur_kernel, key_policy, noise_variance: 0.5, instahide_k: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if let PerturbMethod::RoiShPatch(p) = self.method {
            if !matches!(p, 1 | 2 | 4 | 8) {
                return Err(Error::BadPatchSize(p));
            }
        }
        if let Some(k) = self.blur_kernel {
            if k < 3 || k % 2 == 0 {
                return Err(Error::BadKernel(k));
            }
        }
        if self.key_policy.mode == KeyMode::Pool(0) {
            return Err(Error::InvalidParameter("key pool size must be >= 1".into()));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::InvalidParameter("noise variance must be >= 0".into()));
        }
        if self.instahide_k != 2 {
            return Err(Error::InvalidParameter("only k = 2 InstaHide mixing is supported".into()));
        }
        Ok(())
    }

    /// Domain size of the shuffle key, if the method is keyed by a permutation.
    pub fn key_size(&self) -> Option<usize> {
        match self.method {
            PerturbMethod::RoiSh | PerturbMethod::RoiShB => Some(ROI_SIZE * ROI_SIZE),
            PerturbMethod::RoiShPatch(p) => Some((ROI_SIZE / p) * (ROI_SIZE / p)),
            PerturbMethod::Bdct => Some(64),
            _ => None,
        }
    }
}

/// Heart-rate summary of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoHr {
    pub id: String,
    pub per_window_hr: Vec<f64>,
    pub pred_hr: f64,
    pub gt_hr: f64,
}

/// Corpus-level heart-rate accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrReport {
    pub videos: Vec<VideoHr>,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when either side has zero variance or fewer than two videos.
    pub pearson_r: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip_of(shapes: &[(usize, usize)]) -> Vec<Frame> {
        shapes.iter().map(|&(h, w)| Frame::filled(h, w, [1, 2, 3])).collect()
    }

    #[test]
    fn valid_clip_passes_through() {
        let clip = Clip::new(clip_of(&[(64, 64); 128]), 30.0, "v").unwrap();
        let again = validate_clip(clip.clone()).unwrap();
        assert_eq!(again, clip);
        assert_eq!(again.len(), 128);
    }

    #[test]
    fn empty_clip_rejected() {
        assert!(matches!(Clip::new(vec![], 30.0, "v"), Err(Error::EmptyClip)));
    }

    #[test]
    fn mixed_shapes_rejected() {
        let err = Clip::new(clip_of(&[(64, 64), (62, 62)]), 30.0, "v").unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn non_positive_fps_rejected() {
        assert!(matches!(Clip::new(clip_of(&[(4, 4)]), 0.0, "v"), Err(Error::NonPositiveFps(_))));
        assert!(matches!(Clip::new(clip_of(&[(4, 4)]), f64::NAN, "v"), Err(Error::NonPositiveFps(_))));
    }

    #[test]
    fn frame_rejects_bad_length() {
        assert!(Frame::new(2, 2, vec![0; 11]).is_err());
        assert!(Frame::new(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn permutation_key_checks_bijection() {
        assert!(PermutationKey::explicit(vec![2, 0, 1]).is_ok());
        assert!(PermutationKey::explicit(vec![0, 0, 1]).is_err());
        assert!(PermutationKey::explicit(vec![0, 3, 1]).is_err());
        assert!(PermutationKey::explicit(vec![]).is_err());
        let k = PermutationKey::explicit(vec![2, 0, 1]).unwrap();
        assert_eq!(k.inverse(), vec![1, 2, 0]);
    }

    #[test]
    fn landmarks_need_68_points() {
        assert!(matches!(
            LandmarkSet::new(3, vec![[0.0, 0.0]; 67]),
            Err(Error::WrongPointCount { record: 3, found: 67 })
        ));
        let lm = LandmarkSet::new(0, vec![[1.0, 1.0]; 68]).unwrap();
        assert!(lm.out_of_bounds(4, 4).is_empty());
        assert_eq!(lm.translated(10.0, 0.0).out_of_bounds(4, 4).len(), 68);
    }

    #[test]
    fn trace_rejects_nonfinite() {
        assert!(PpgTrace::new(vec![1.0, f64::NAN], 30.0).is_err());
        assert!(PpgTrace::new(vec![1.0], -1.0).is_err());
    }

    #[test]
    fn spec_validation() {
        let policy = KeyPolicy::new(KeyMode::Unbounded, 1).unwrap();
        let mut spec = PerturbSpec::new(PerturbMethod::RoiShPatch(4), policy);
        assert!(spec.validate().is_ok());
        assert_eq!(spec.key_size(), Some(256));
        spec.method = PerturbMethod::RoiShPatch(3);
        assert!(matches!(spec.validate(), Err(Error::BadPatchSize(3))));
        spec.method = PerturbMethod::RoiShB;
        spec.blur_kernel = Some(4);
        assert!(matches!(spec.validate(), Err(Error::BadKernel(4))));
        assert!(KeyPolicy::new(KeyMode::Pool(0), 0).is_err());
    }

    #[test]
    fn method_names_roundtrip() {
        for m in [
            PerturbMethod::Roi,
            PerturbMethod::RoiSh,
            PerturbMethod::RoiShB,
            PerturbMethod::RoiShPatch(1),
            PerturbMethod::RoiShPatch(8),
            PerturbMethod::Noise,
            PerturbMethod::Bdct,
            PerturbMethod::Le,
            PerturbMethod::InstaHide,
        ] {
            assert_eq!(m.to_string().parse::<PerturbMethod>().unwrap(), m);
        }
        assert!(matches!("patch:3".parse::<PerturbMethod>(), Err(Error::BadPatchSize(3))));
        assert!("roi+b".parse::<PerturbMethod>().is_err());
        for k in [KeyMode::Fixed, KeyMode::Pool(10), KeyMode::Unbounded] {
            assert_eq!(k.to_string().parse::<KeyMode>().unwrap(), k);
        }
        assert!("pool:0".parse::<KeyMode>().is_err());
    }
}
