//! Dataset loading, PPG alignment, and windowing.
//!
//! On-disk layout of one video:
//!
//! ```text
//! <root>/<video_id>/frames/NNNNNN.png
//! <root>/<video_id>/landmarks.jsonl   {"frame":i,"points":[[x,y] x 68]} per line
//! <root>/<video_id>/ppg.csv           header t_s,value
//! <root>/<video_id>/manifest.json     {"fps":30}   (optional)
//! ```

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::read_ppg_csv;
use crate::model::{Clip, Frame, LandmarkSet, PpgTrace};

pub const DEFAULT_WINDOW: usize = 128;
pub const DEFAULT_STRIDE: usize = 8;

pub const FRAMES_DIR: &str = "frames";
pub const LANDMARKS_FILE: &str = "landmarks.jsonl";
pub const PPG_FILE: &str = "ppg.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fps: f64,
}

/// Paths of one video in the dataset layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub video_id: String,
    pub frames_dir: PathBuf,
    pub landmarks: PathBuf,
    pub ppg: PathBuf,
    pub fps: f64,
}

impl DatasetEntry {
    /// Resolves a video directory. `fps` overrides the manifest.
    pub fn open(video_dir: &Path, fps: Option<f64>) -> Result<Self> {
        if !video_dir.is_dir() {
            return Err(Error::MissingDir(video_dir.to_path_buf()));
        }
        let fps = match fps {
            Some(f) => f,
            None => read_manifest(video_dir)?.fps,
        };
        let video_id =
            video_dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "video".to_string());
        Ok(Self {
            video_id,
            frames_dir: video_dir.join(FRAMES_DIR),
            landmarks: video_dir.join(LANDMARKS_FILE),
            ppg: video_dir.join(PPG_FILE),
            fps,
        })
    }
}

pub fn read_manifest(video_dir: &Path) -> Result<Manifest> {
    let path = video_dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Video directories under a dataset root, sorted by name.
pub fn list_videos(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.is_dir() {
        return Err(Error::MissingDir(root.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn is_image(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(), Some("png"))
}

/// Image files of a frame directory in lexicographic order.
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingDir(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    files.sort();
    Ok(files)
}

pub fn decode_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| Error::Decode { path: path.to_path_buf(), reason: e.to_string() })?;
    let rgb = img.to_rgb8();
    Frame::new(rgb.height() as usize, rgb.width() as usize, rgb.into_raw())
}

pub fn load_frames(dir: &Path, fps: f64) -> Result<Clip> {
    let files = frame_files(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyClip);
    }
    let frames = files.iter().map(|p| decode_frame(p)).collect::<Result<Vec<_>>>()?;
    let id = dir.parent().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Clip::new(frames, fps, id)
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct LandmarkRecord {
    pub frame: usize,
    pub points: Vec<[f64; 2]>,
}

/// Reads a JSONL landmark file; records are returned ordered by frame index.
/// With `frames` set, the record count must match it.
pub fn load_landmarks(path: &Path, frames: Option<usize>) -> Result<Vec<LandmarkSet>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut sets = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LandmarkRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        sets.push(LandmarkSet::new(rec.frame, rec.points)?);
    }
    sets.sort_by_key(|s| s.frame_index);
    for (i, s) in sets.iter().enumerate() {
        if s.frame_index != i {
            return Err(Error::Format(format!("landmark frame indices are not 0..n (found {} at {i})", s.frame_index)));
        }
    }
    if let Some(n) = frames {
        if sets.len() != n {
            return Err(Error::FrameCountMismatch { landmarks: sets.len(), frames: n });
        }
    }
    Ok(sets)
}

/// Resamples `ppg` at frame times `i / fps` for `i in 0..t` by linear
/// interpolation. Frame times falling on a sample are copied exactly.
pub fn align_ppg(ppg: &PpgTrace, fps: f64, t: usize) -> Result<PpgTrace> {
    if !(fps > 0.0) {
        return Err(Error::NonPositiveFps(fps));
    }
    let x = ppg.samples();
    let ppg_end = ppg.t0 + (x.len().max(1) - 1) as f64 / ppg.fs();
    let video_end = (t.max(1) - 1) as f64 / fps;
    let coverage_err = || Error::InsufficientCoverage { ppg_s: ppg.duration(), video_s: t as f64 / fps };
    if x.is_empty() || ppg.t0 > 1e-9 || video_end > ppg_end + 1e-9 {
        return Err(coverage_err());
    }
    let samples = (0..t)
        .map(|i| {
            let pos = (i as f64 / fps - ppg.t0) * ppg.fs();
            let nearest = pos.round();
            if (pos - nearest).abs() < 1e-9 {
                return x[(nearest as usize).min(x.len() - 1)];
            }
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(x.len() - 1);
            let frac = pos - lo as f64;
            x[lo] * (1.0 - frac) + x[hi] * frac
        })
        .collect();
    PpgTrace::new(samples, fps)
}

/// Start offsets of full windows; incomplete tails are dropped.
pub fn window_starts(len: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if window == 0 || stride == 0 {
        return Err(Error::InvalidParameter("window and stride must be >= 1".into()));
    }
    if len < window {
        return Err(Error::ClipTooShort { len, window });
    }
    Ok((0..=(len - window) / stride).map(|k| k * stride).collect())
}

pub fn window_clips(clip: &Clip, gt: &PpgTrace, window: usize, stride: usize) -> Result<Vec<(Clip, PpgTrace)>> {
    if gt.len() != clip.len() {
        return Err(Error::LengthMismatch(clip.len(), gt.len()));
    }
    window_starts(clip.len(), window, stride)?
        .into_iter()
        .enumerate()
        .map(|(k, start)| {
            let mut c = clip.slice(start, window);
            c.window_index = Some(k);
            Ok((c, gt.slice(start, window)))
        })
        .collect()
}

/// Frames, ground-truth PPG aligned to the frame clock, and landmarks if present.
#[derive(Debug, Clone)]
pub struct LoadedVideo {
    pub entry: DatasetEntry,
    pub clip: Clip,
    pub ppg: Option<PpgTrace>,
    pub landmarks: Option<Vec<LandmarkSet>>,
}

pub fn load_video(video_dir: &Path, fps: Option<f64>) -> Result<LoadedVideo> {
    let entry = DatasetEntry::open(video_dir, fps)?;
    let mut clip = load_frames(&entry.frames_dir, entry.fps)?;
    clip.source_id = entry.video_id.clone();
    let ppg =
        if entry.ppg.is_file() { Some(align_ppg(&read_ppg_csv(&entry.ppg)?, entry.fps, clip.len())?) } else { None };
    let landmarks =
        if entry.landmarks.is_file() { Some(load_landmarks(&entry.landmarks, Some(clip.len()))?) } else { None };
    Ok(LoadedVideo { entry, clip, ppg, landmarks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{write_landmarks, write_png};
    use proptest::prelude::*;

    #[test]
    fn align_picks_even_samples() {
        let ppg = PpgTrace::new((0..100).map(f64::from).collect(), 60.0).unwrap();
        let out = align_ppg(&ppg, 30.0, 3).unwrap();
        assert_eq!(out.samples(), &[0.0, 2.0, 4.0]);
        assert_eq!(out.fs(), 30.0);
    }

    #[test]
    fn align_identity_rate() {
        let ppg = PpgTrace::new((0..50).map(|i| (i as f64).sin()).collect(), 30.0).unwrap();
        let out = align_ppg(&ppg, 30.0, 20).unwrap();
        assert_eq!(out.samples(), &ppg.samples()[..20]);
    }

    #[test]
    fn align_interpolates() {
        let ppg = PpgTrace::new(vec![0.0, 10.0, 20.0, 30.0], 2.0).unwrap();
        let out = align_ppg(&ppg, 3.0, 4).unwrap();
        // t = 1/3 s -> position 2/3.
        assert!((out.samples()[1] - 20.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn align_coverage() {
        let ppg = PpgTrace::new(vec![0.0; 240], 60.0).unwrap();
        assert!(matches!(align_ppg(&ppg, 30.0, 135), Err(Error::InsufficientCoverage { .. })));
        assert!(align_ppg(&ppg, 30.0, 120).is_ok());
    }

    #[test]
    fn window_examples() {
        assert_eq!(window_starts(128, 128, 8).unwrap(), vec![0]);
        assert_eq!(window_starts(136, 128, 8).unwrap(), vec![0, 8]);
        assert!(matches!(window_starts(127, 128, 8), Err(Error::ClipTooShort { len: 127, window: 128 })));
    }

    #[test]
    fn windows_pair_frames_with_signal() {
        let frames: Vec<Frame> = (0..140).map(|i| Frame::filled(2, 2, [i as u8; 3])).collect();
        let clip = Clip::new(frames, 30.0, "w").unwrap();
        let gt = PpgTrace::new((0..140).map(f64::from).collect(), 30.0).unwrap();
        let wins = window_clips(&clip, &gt, 128, 8).unwrap();
        assert_eq!(wins.len(), 2);
        for (c, s) in &wins {
            for (f, v) in c.frames().iter().zip(s.samples()) {
                assert_eq!(f64::from(f.data()[0]), *v);
            }
        }
        assert_eq!(wins[1].0.window_index, Some(1));
        let short_gt = PpgTrace::new(vec![0.0; 139], 30.0).unwrap();
        assert!(window_clips(&clip, &short_gt, 128, 8).is_err());
    }

    proptest! {
        #[test]
        fn window_count_formula(t in 1usize..2000, window in 1usize..300, stride in 1usize..64) {
            prop_assume!(t >= window);
            let starts = window_starts(t, window, stride).unwrap();
            prop_assert_eq!(starts.len(), (t - window) / stride + 1);
            prop_assert!(starts.windows(2).all(|w| w[1] - w[0] == stride));
            prop_assert!(starts.last().unwrap() + window <= t);
        }

        #[test]
        fn integer_ratio_alignment_is_exact(k in 1usize..5, t in 1usize..60) {
            let fps = 30.0;
            let ppg = PpgTrace::new((0..t * k + 1).map(|i| (i as f64 * 0.37).cos()).collect(), fps * k as f64).unwrap();
            let out = align_ppg(&ppg, fps, t).unwrap();
            for (i, v) in out.samples().iter().enumerate() {
                prop_assert_eq!(*v, ppg.samples()[i * k]);
            }
        }
    }

    #[test]
    fn load_frames_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        for i in [2u8, 0, 1] {
            write_png(&dir.path().join(format!("{i:06}.png")), &Frame::filled(4, 5, [i, i, i])).unwrap();
        }
        let clip = load_frames(dir.path(), 30.0).unwrap();
        assert_eq!(clip.len(), 3);
        for (i, f) in clip.frames().iter().enumerate() {
            assert_eq!(f.data()[0], i as u8);
        }
    }

    #[test]
    fn load_frames_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_frames(&dir.path().join("nope"), 30.0), Err(Error::MissingDir(_))));
        assert!(matches!(load_frames(dir.path(), 30.0), Err(Error::EmptyClip)));

        write_png(&dir.path().join("000000.png"), &Frame::filled(4, 4, [1; 3])).unwrap();
        fs::write(dir.path().join("000001.png"), b"not a png").unwrap();
        match load_frames(dir.path(), 30.0) {
            Err(Error::Decode { path, .. }) => assert!(path.ends_with("000001.png")),
            other => panic!("{other:?}"),
        }
        fs::remove_file(dir.path().join("000001.png")).unwrap();
        write_png(&dir.path().join("000001.png"), &Frame::filled(3, 4, [1; 3])).unwrap();
        assert!(matches!(load_frames(dir.path(), 30.0), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn landmark_file_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lm.jsonl");
        let sets: Vec<LandmarkSet> = (0..128).map(|i| LandmarkSet::new(i, vec![[1.0, 2.0]; 68]).unwrap()).collect();
        write_landmarks(&path, &sets).unwrap();
        assert_eq!(load_landmarks(&path, Some(128)).unwrap(), sets);
        assert!(matches!(
            load_landmarks(&path, Some(129)),
            Err(Error::FrameCountMismatch { landmarks: 128, frames: 129 })
        ));
        fs::write(&path, format!("{{\"frame\":0,\"points\":{:?}}}\n", vec![[1.0, 2.0]; 67])).unwrap();
        assert!(matches!(load_landmarks(&path, None), Err(Error::WrongPointCount { found: 67, .. })));
    }
}
