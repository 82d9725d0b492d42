//! File formats: PNG frames, CSV signals, JSONL landmarks, JSON keys and the
//! `RPPGCLIP` binary clip container.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LandmarkRecord;
use crate::model::{Clip, Frame, HrReport, LandmarkSet, PermutationKey, PpgTrace, RealClip, CHANNELS};
use crate::perturb::{keygen, KEYGEN_ALGORITHM};

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_png(path: &Path, frame: &Frame) -> Result<()> {
    let mut out = create(path)?;
    PngEncoder::new(&mut out)
        .write_image(frame.data(), frame.width() as u32, frame.height() as u32, ExtendedColorType::Rgb8)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes frames as `dir/NNNNNN.png`.
pub fn write_frames(dir: &Path, frames: &[Frame]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in frames.iter().enumerate() {
        write_png(&dir.join(format!("{i:06}.png")), f)?;
    }
    Ok(())
}

/// Writes a `t_s,value` CSV; times are `t0 + i / fs`.
pub fn write_ppg_csv(path: &Path, trace: &PpgTrace) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "t_s,value").map_err(io)?;
    for (i, v) in trace.samples().iter().enumerate() {
        writeln!(out, "{},{}", trace.t0 + i as f64 / trace.fs(), v).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a `t_s,value` CSV. The sampling rate is recovered from the mean
/// time step.
pub fn read_ppg_csv(path: &Path) -> Result<PpgTrace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?;
    if header.trim() != "t_s,value" {
        return Err(Error::Format(format!("{}: expected header t_s,value", path.display())));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines.enumerate() {
        let bad = || Error::Format(format!("{}:{}: bad row {line:?}", path.display(), n + 2));
        let (t, v) = line.split_once(',').ok_or_else(bad)?;
        times.push(t.trim().parse::<f64>().map_err(|_| bad())?);
        values.push(v.trim().parse::<f64>().map_err(|_| bad())?);
    }
    if times.len() < 2 {
        return Err(Error::Format(format!("{}: need at least two samples", path.display())));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(Error::Format(format!("{}: timestamps must increase", path.display())));
    }
    let fs = (times.len() - 1) as f64 / span;
    // Round rates that are integral up to print precision.
    let fs = if (fs - fs.round()).abs() < 1e-6 { fs.round() } else { fs };
    PpgTrace::with_offset(values, fs, times[0])
}

pub fn write_landmarks(path: &Path, sets: &[LandmarkSet]) -> Result<()> {
    let mut out = create(path)?;
    for s in sets {
        let rec = LandmarkRecord { frame: s.frame_index, points: s.points().to_vec() };
        serde_json::to_writer(&mut out, &rec)?;
        writeln!(out).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// JSON key file: either a seed recipe or an explicit permutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeyFile {
    Explicit { version: u32, n: usize, perm: Vec<usize> },
    Seeded { version: u32, n: usize, seed: String, algorithm: String },
}

impl KeyFile {
    pub fn seeded(seed: u64, n: usize) -> Self {
        KeyFile::Seeded { version: 1, n, seed: seed.to_string(), algorithm: KEYGEN_ALGORITHM.to_string() }
    }

    pub fn to_key(&self) -> Result<PermutationKey> {
        match self {
            KeyFile::Explicit { version, n, perm } => {
                check_version(*version)?;
                if perm.len() != *n {
                    return Err(Error::Format(format!("key declares n={n} but lists {} entries", perm.len())));
                }
                PermutationKey::explicit(perm.clone())
            }
            KeyFile::Seeded { version, n, seed, algorithm } => {
                check_version(*version)?;
                if algorithm != KEYGEN_ALGORITHM {
                    return Err(Error::Format(format!("unknown key algorithm {algorithm:?}")));
                }
                let seed: u64 = seed.parse().map_err(|_| Error::Format(format!("seed {seed:?} is not a u64")))?;
                if *n == 0 {
                    return Err(Error::Format("key size must be >= 1".into()));
                }
                Ok(keygen(seed, *n))
            }
        }
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != 1 {
        return Err(Error::Format(format!("unsupported key file version {v}")));
    }
    Ok(())
}

pub fn write_key_file(path: &Path, key: &KeyFile) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer(&mut out, key)?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_key_file(path: &Path) -> Result<PermutationKey> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str::<KeyFile>(&text)?.to_key()
}

pub const CLIP_MAGIC: &[u8; 8] = b"RPPGCLIP";
pub const CLIP_VERSION: u16 = 1;
const HEADER_LEN: usize = 8 + 2 + 1 + 4 * 4;

/// Clip payload of an `RPPGCLIP` file.
#[derive(Debug, Clone, PartialEq)]
pub enum ClipData {
    U8(Clip),
    F32(RealClip),
}

impl ClipData {
    pub fn fps(&self) -> f64 {
        match self {
            ClipData::U8(c) => c.fps(),
            ClipData::F32(c) => c.fps,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ClipData::U8(c) => c.len(),
            ClipData::F32(c) => c.len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Serializes a clip: magic, u16 version, u8 dtype (0 = u8, 1 = f32),
/// u32 T, H, W, C, then row-major samples. All integers little-endian.
pub fn encode_clip(clip: &ClipData) -> Vec<u8> {
    let (dtype, t, h, w) = match clip {
        ClipData::U8(c) => (0u8, c.len(), c.height(), c.width()),
        ClipData::F32(c) => (1u8, c.len, c.height, c.width),
    };
    let elem = if dtype == 0 { 1 } else { 4 };
    let mut out = Vec::with_capacity(HEADER_LEN + t * h * w * CHANNELS * elem);
    out.extend_from_slice(CLIP_MAGIC);
    out.extend_from_slice(&CLIP_VERSION.to_le_bytes());
    out.push(dtype);
    for d in [t, h, w, CHANNELS] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match clip {
        ClipData::U8(c) => c.frames().iter().for_each(|f| out.extend_from_slice(f.data())),
        ClipData::F32(c) => c.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    out
}

/// Parses an `RPPGCLIP` buffer; frame rate and id come from the caller.
pub fn decode_clip(bytes: &[u8], fps: f64, source_id: &str) -> Result<ClipData> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != CLIP_MAGIC {
        return Err(Error::Format("not an RPPGCLIP file".into()));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != CLIP_VERSION {
        return Err(Error::Format(format!("unsupported RPPGCLIP version {version}")));
    }
    let dtype = bytes[10];
    let dim = |i: usize| u32::from_le_bytes(bytes[11 + 4 * i..15 + 4 * i].try_into().expect("4 bytes")) as usize;
    let (t, h, w, c) = (dim(0), dim(1), dim(2), dim(3));
    if c != CHANNELS {
        return Err(Error::Format(format!("expected 3 channels, found {c}")));
    }
    let body = &bytes[HEADER_LEN..];
    let count = t * h * w * c;
    match dtype {
        0 => {
            if body.len() != count {
                return Err(Error::Format(format!("payload has {} bytes, header implies {count}", body.len())));
            }
            let frames = body
                .chunks_exact((h * w * c).max(1))
                .take(t)
                .map(|chunk| Frame::new(h, w, chunk.to_vec()))
                .collect::<Result<Vec<_>>>()?;
            Ok(ClipData::U8(Clip::new(frames, fps, source_id)?))
        }
        1 => {
            if body.len() != count * 4 {
                return Err(Error::Format(format!("payload has {} bytes, header implies {}", body.len(), count * 4)));
            }
            let data = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
            Ok(ClipData::F32(RealClip::new(t, h, w, fps, data)?))
        }
        other => Err(Error::Format(format!("unknown dtype code {other}"))),
    }
}

/// JSON sidecar stored next to an `RPPGCLIP` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSidecar {
    pub fps: f64,
    pub key_file: Option<String>,
    pub gt_ppg: Option<String>,
}

pub const CLIP_FILE: &str = "clip.rppgclip";
pub const SIDECAR_FILE: &str = "clip.json";

pub fn write_clip(dir: &Path, clip: &ClipData, sidecar: &ClipSidecar) -> Result<()> {
    let path = dir.join(CLIP_FILE);
    let mut out = create(&path)?;
    out.write_all(&encode_clip(clip)).map_err(|e| Error::io(&path, e))?;
    out.flush().map_err(|e| Error::io(&path, e))?;
    write_json(&dir.join(SIDECAR_FILE), sidecar)
}

pub fn read_clip(dir: &Path) -> Result<(ClipData, ClipSidecar)> {
    let side = dir.join(SIDECAR_FILE);
    let sidecar: ClipSidecar = serde_json::from_str(&fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?)?;
    let path = dir.join(CLIP_FILE);
    let mut bytes = Vec::new();
    fs::File::open(&path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(&path, e))?;
    let id = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((decode_clip(&bytes, sidecar.fps, &id)?, sidecar))
}

/// One row of the metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub id: String,
    pub pred_hr: f64,
    pub gt_hr: f64,
}

/// Metrics report: per-video heart rates, corpus metrics and the settings
/// that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_video: Vec<ReportEntry>,
    pub mae: f64,
    pub rmse: f64,
    pub pearson_r: Option<f64>,
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn new(report: &HrReport, config: serde_json::Value) -> Self {
        Self {
            per_video: report
                .videos
                .iter()
                .map(|v| ReportEntry { id: v.id.clone(), pred_hr: v.pred_hr, gt_hr: v.gt_hr })
                .collect(),
            mae: report.mae,
            rmse: report.rmse,
            pearson_r: report.pearson_r,
            config,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}
