use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use veilpulse::corpus::{compare_methods, synthetic_corpus, unbounded, CorpusConfig, MethodScore, COMPARISON_METHODS};
use veilpulse::eval::estimate_hr;
use veilpulse::formats::{
    read_clip, read_key_file, read_ppg_csv, write_clip, write_frames, write_json, write_key_file, write_landmarks,
    write_ppg_csv, ClipData, ClipSidecar, EvalReport, KeyFile, CLIP_FILE,
};
use veilpulse::ingest::{
    align_ppg, frame_files, list_videos, load_frames, load_landmarks, read_manifest, Manifest, FRAMES_DIR,
    MANIFEST_FILE, PPG_FILE,
};
use veilpulse::perturb::{log10_keyspace, sample_seed};
use veilpulse::pipeline::{
    clip_traces, hr_report, perturb_corpus, perturb_with_key, roi_clip, signal_video_hr, WindowConfig,
};
use veilpulse::synth::{canonical_landmarks, synthesize_clip, SynthParams};
use veilpulse::{Clip, Error, Estimator, KeyMode, KeyPolicy, LandmarkSet, PerturbMethod, PerturbSpec, PpgTrace};

use crate::args::*;
use crate::error::{usage, CliResult};

pub const SIGNAL_FILE: &str = "signal.csv";
pub const KEY_FILE: &str = "key.json";

/// What a command produced, used to place its run record.
pub enum Output {
    Dir(PathBuf),
    File(PathBuf),
    Stdout,
}

pub fn execute(cmd: &Command) -> CliResult<Output> {
    match cmd {
        Command::Keygen(a) => keygen(a),
        Command::Synth(a) => synth(a),
        Command::Perturb(a) => perturb(a),
        Command::Estimate(a) => estimate(a),
        Command::Hr(a) => hr(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Keyspace(a) => keyspace(a),
        Command::Compare(a) => compare(a),
        Command::Replay(_) => Err(usage("replay is handled by the caller")),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: e }
}

fn keygen(a: &KeygenArgs) -> CliResult<Output> {
    if a.n == 0 {
        return Err(usage("--n must be >= 1"));
    }
    write_key_file(&a.out, &KeyFile::seeded(a.seed, a.n))?;
    Ok(Output::File(a.out.clone()))
}

fn synth(a: &SynthArgs) -> CliResult<Output> {
    if a.frames == 0 {
        return Err(usage("--frames must be >= 1"));
    }
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    a.hr.par_iter().enumerate().try_for_each(|(i, &hr)| -> CliResult<()> {
        let mut p = SynthParams::new(hr, a.fps, a.frames);
        p.noise_sigma = a.noise_sigma;
        p.seed = a.seed.wrapping_add(i as u64);
        p.harmonic2_amp = a.harmonic2;
        let (clip, ppg) = synthesize_clip(&p)?;
        let dir = a.out.join(format!("v{i:02}_hr{hr}"));
        write_frames(&dir.join(FRAMES_DIR), clip.frames())?;
        let lm = canonical_landmarks(p.height, p.width);
        let sets: Vec<LandmarkSet> = (0..clip.len())
            .map(|t| {
                let mut l = lm.clone();
                l.frame_index = t;
                l
            })
            .collect();
        write_landmarks(&dir.join(veilpulse::ingest::LANDMARKS_FILE), &sets)?;
        write_ppg_csv(&dir.join(PPG_FILE), &ppg)?;
        write_json(&dir.join(MANIFEST_FILE), &Manifest { fps: a.fps })?;
        Ok(())
    })?;
    Ok(Output::Dir(a.out.clone()))
}

/// One input video with the output directory it maps to.
struct VideoJob {
    id: String,
    dir: PathBuf,
    out: PathBuf,
    landmarks: Option<PathBuf>,
}

fn is_video_dir(dir: &Path) -> bool {
    dir.join(FRAMES_DIR).is_dir() || dir.join(CLIP_FILE).is_file()
}

/// A single video directory maps to `out`; a dataset root maps each video
/// `<id>` to `out/<id>`.
fn resolve_videos(input: &Path, out: &Path, landmarks: Option<&Path>) -> CliResult<Vec<VideoJob>> {
    let name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "video".into());
    if is_video_dir(input) {
        return Ok(vec![VideoJob {
            id: name(input),
            dir: input.to_path_buf(),
            out: out.to_path_buf(),
            landmarks: landmarks.map(Path::to_path_buf),
        }]);
    }
    let videos: Vec<VideoJob> = list_videos(input)?
        .into_iter()
        .filter(|d| is_video_dir(d))
        .map(|d| VideoJob { id: name(&d), out: out.join(name(&d)), landmarks: landmarks.map(|l| d.join(l)), dir: d })
        .collect();
    if videos.is_empty() {
        return Err(Error::EmptyInput.into());
    }
    Ok(videos)
}

fn video_fps(dir: &Path, fps: Option<f64>) -> CliResult<f64> {
    match fps {
        Some(f) if f > 0.0 => Ok(f),
        Some(f) => Err(usage(format!("--fps must be > 0, got {f}"))),
        None => Ok(read_manifest(dir)?.fps),
    }
}

fn copy_file(from: &Path, to: &Path) -> CliResult<()> {
    if let Some(parent) = to.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::copy(from, to).map_err(|e| io_err(from, e))?;
    Ok(())
}

fn perturb_spec(a: &PerturbArgs) -> CliResult<PerturbSpec> {
    let mode = a.key_policy.unwrap_or(KeyMode::Unbounded);
    let policy = KeyPolicy::new(mode, a.master_seed.unwrap_or(0)).map_err(|e| usage(e.to_string()))?;
    let mut spec = PerturbSpec::new(a.method, policy);
    if let Some(k) = a.blur_k {
        if !matches!(a.method, PerturbMethod::RoiShB | PerturbMethod::RoiShPatch(_)) {
            return Err(usage(format!("--blur-k does not apply to {}", a.method)));
        }
        spec.blur_kernel = Some(k);
    }
    spec.noise_variance = a.noise_var;
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn perturb(a: &PerturbArgs) -> CliResult<Output> {
    let spec = perturb_spec(a)?;
    let explicit_key = match &a.key {
        Some(path) => {
            let n = spec.key_size().ok_or_else(|| usage(format!("--key does not apply to {}", a.method)))?;
            let key = read_key_file(path)?;
            if key.n() != n {
                return Err(usage(format!("{} needs a key of size {n}, the key file has {}", a.method, key.n())));
            }
            Some(key)
        }
        None => None,
    };
    let videos = resolve_videos(&a.input, &a.out, a.landmarks.as_deref())?;

    if a.method == PerturbMethod::Roi && a.landmarks.is_none() {
        videos.par_iter().try_for_each(|v| -> CliResult<()> {
            for f in frame_files(&v.dir.join(FRAMES_DIR))? {
                copy_file(&f, &v.out.join(FRAMES_DIR).join(f.file_name().expect("file name")))?;
            }
            copy_side_files(v).map(|_| ())
        })?;
        return Ok(Output::Dir(a.out.clone()));
    }

    let clips = videos
        .par_iter()
        .map(|v| -> CliResult<Clip> {
            let fps = video_fps(&v.dir, a.fps)?;
            let mut clip = load_frames(&v.dir.join(FRAMES_DIR), fps)?;
            clip.source_id = v.id.clone();
            match &v.landmarks {
                Some(path) => Ok(roi_clip(&clip, &load_landmarks(path, Some(clip.len()))?)?),
                None => Ok(clip),
            }
        })
        .collect::<CliResult<Vec<_>>>()?;

    let outputs = match &explicit_key {
        Some(key) => clips
            .par_iter()
            .map(|c| Ok(ClipData::U8(perturb_with_key(c, &spec, key)?)))
            .collect::<CliResult<Vec<_>>>()?,
        None => perturb_corpus(&clips, &spec)?,
    };

    videos.par_iter().zip(&outputs).enumerate().try_for_each(|(i, (v, data))| -> CliResult<()> {
        let key_file = match (&a.key, spec.key_size()) {
            (Some(path), _) => {
                copy_file(path, &v.out.join(KEY_FILE))?;
                true
            }
            (None, Some(n)) => {
                write_key_file(&v.out.join(KEY_FILE), &KeyFile::seeded(sample_seed(&spec.key_policy, i as u64), n))?;
                true
            }
            (None, None) => false,
        };
        let gt = copy_side_files(v)?;
        write_json(&v.out.join(MANIFEST_FILE), &Manifest { fps: data.fps() })?;
        match data {
            ClipData::U8(clip) if a.format == OutFormat::Png => write_frames(&v.out.join(FRAMES_DIR), clip.frames())?,
            _ => {
                let sidecar = ClipSidecar {
                    fps: data.fps(),
                    key_file: key_file.then(|| KEY_FILE.to_string()),
                    gt_ppg: gt.then(|| PPG_FILE.to_string()),
                };
                write_clip(&v.out, data, &sidecar)?;
            }
        }
        Ok(())
    })?;
    Ok(Output::Dir(a.out.clone()))
}

/// Copies the ground-truth PPG and manifest next to the output; reports
/// whether a PPG file was present.
fn copy_side_files(v: &VideoJob) -> CliResult<bool> {
    fs::create_dir_all(&v.out).map_err(|e| io_err(&v.out, e))?;
    let manifest = v.dir.join(MANIFEST_FILE);
    if manifest.is_file() {
        copy_file(&manifest, &v.out.join(MANIFEST_FILE))?;
    }
    let ppg = v.dir.join(PPG_FILE);
    if ppg.is_file() {
        copy_file(&ppg, &v.out.join(PPG_FILE))?;
        return Ok(true);
    }
    Ok(false)
}

fn load_any(dir: &Path, fps: Option<f64>) -> CliResult<ClipData> {
    if dir.join(CLIP_FILE).is_file() {
        let (data, _) = read_clip(dir)?;
        return match (fps, data) {
            (None, d) => Ok(d),
            (Some(f), ClipData::U8(c)) => Ok(ClipData::U8(Clip::new(c.into_frames(), f, "")?)),
            (Some(f), ClipData::F32(mut c)) => {
                c.fps = f;
                Ok(ClipData::F32(c))
            }
        };
    }
    let fps = video_fps(dir, fps)?;
    Ok(ClipData::U8(load_frames(&dir.join(FRAMES_DIR), fps)?))
}

fn estimate(a: &EstimateArgs) -> CliResult<Output> {
    let single = is_video_dir(&a.input);
    let videos = resolve_videos(&a.input, &a.out, None)?;
    let estimator = Estimator::from(a.method);
    videos.par_iter().try_for_each(|v| -> CliResult<()> {
        let data = load_any(&v.dir, a.fps)?;
        let pulse = estimator.run(&clip_traces(&data)?)?;
        let path = if single { a.out.clone() } else { v.out.join(SIGNAL_FILE) };
        write_ppg_csv(&path, &pulse)?;
        Ok(())
    })?;
    Ok(if single { Output::File(a.out.clone()) } else { Output::Dir(a.out.clone()) })
}

fn hr(a: &HrArgs) -> CliResult<Output> {
    let mut signal = read_ppg_csv(&a.signal)?;
    if let Some(fs) = a.fs {
        if !(fs > 0.0) {
            return Err(usage(format!("--fs must be > 0, got {fs}")));
        }
        signal = PpgTrace::new(signal.into_samples(), fs)?;
    }
    let est = estimate_hr(&signal, a.band.lo, a.band.hi)?;
    println!("{}", json!({"bpm": est.bpm, "peak_hz": est.peak_hz, "low_confidence": est.low_confidence}));
    Ok(Output::Stdout)
}

fn window_config(window: usize, stride: usize, band: Band) -> WindowConfig {
    WindowConfig { window, stride, band_lo: band.lo, band_hi: band.hi }
}

fn evaluate(a: &EvaluateArgs) -> CliResult<Output> {
    let cfg = window_config(a.window, a.stride, a.band);
    let ids: Vec<String> = list_videos(&a.pred_root)?
        .into_iter()
        .filter(|d| d.join(SIGNAL_FILE).is_file())
        .filter_map(|d| d.file_name().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    if ids.is_empty() {
        return Err(Error::EmptyInput.into());
    }
    let videos = ids
        .par_iter()
        .map(|id| -> CliResult<_> {
            let pred = read_ppg_csv(&a.pred_root.join(id).join(SIGNAL_FILE))?;
            let gt = read_ppg_csv(&a.gt_root.join(id).join(PPG_FILE))?;
            let gt = align_ppg(&gt, pred.fs(), pred.len())?;
            Ok(signal_video_hr(id, &pred, &gt, &cfg)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let report = hr_report(videos)?;
    let config = json!({
        "pred_root": a.pred_root,
        "gt_root": a.gt_root,
        "window": cfg.window,
        "stride": cfg.stride,
        "band_hz": [cfg.band_lo, cfg.band_hi],
        "video_hr": "mean of window heart rates",
        "correlation_over": "per-video pairs",
    });
    write_json(&a.report, &EvalReport::new(&report, config))?;
    println!("{}", summary_line("evaluate", &report));
    Ok(Output::File(a.report.clone()))
}

fn summary_line(label: &str, r: &veilpulse::HrReport) -> String {
    let pr = r.pearson_r.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    format!("{label}: videos={} mae={:.3} rmse={:.3} r={pr}", r.videos.len(), r.mae, r.rmse)
}

fn keyspace(a: &KeyspaceArgs) -> CliResult<Output> {
    println!("{:.4}", log10_keyspace(a.n));
    Ok(Output::Stdout)
}

#[derive(Serialize)]
struct OrderingCheck {
    estimator: Estimator,
    baseline: String,
    ours_mae: f64,
    baseline_mae: f64,
    holds: bool,
}

#[derive(Serialize)]
struct CompareReport<'a> {
    corpus: &'a CorpusConfig,
    key_policy: String,
    master_seed: u64,
    ours: String,
    results: Vec<CompareEntry>,
    ordering: Vec<OrderingCheck>,
    ordering_holds: bool,
    notes: Vec<&'static str>,
}

#[derive(Serialize)]
struct CompareEntry {
    method: String,
    estimator: Estimator,
    #[serde(flatten)]
    report: EvalReport,
}

fn compare(a: &CompareArgs) -> CliResult<Output> {
    let corpus_cfg = CorpusConfig {
        hrs: a.hr.clone(),
        fps: a.fps,
        frames: a.frames,
        noise_sigma: a.noise_sigma,
        seed: a.corpus_seed,
    };
    if corpus_cfg.hrs.is_empty() {
        return Err(usage("--hr needs at least one value"));
    }
    let corpus = synthetic_corpus(&corpus_cfg)?;
    let estimators = [Estimator::Chrom, Estimator::Pos];
    let policy = unbounded(a.master_seed);
    let scores = compare_methods(&corpus, &COMPARISON_METHODS, &estimators, policy)?;
    let ours = COMPARISON_METHODS[0].to_string();

    let mut ordering = Vec::new();
    for est in estimators {
        let of = |m: &str| scores.iter().find(|s| s.method == m && s.estimator == est).expect("scored");
        let ours_mae = of(&ours).report.mae;
        for base in &COMPARISON_METHODS[1..] {
            let baseline_mae = of(&base.to_string()).report.mae;
            ordering.push(OrderingCheck {
                estimator: est,
                baseline: base.to_string(),
                ours_mae,
                baseline_mae,
                holds: ours_mae < baseline_mae,
            });
        }
    }
    let ordering_holds = ordering.iter().all(|o| o.holds);

    for s in &scores {
        println!("{}", summary_line(&format!("{} {:?}", s.method, s.estimator).to_lowercase(), &s.report));
    }
    for o in &ordering {
        let verdict = if o.holds { "holds" } else { "violated" };
        println!(
            "ordering {:?}: {ours} {:.3} < {} {:.3} {verdict}",
            o.estimator, o.ours_mae, o.baseline, o.baseline_mae
        );
    }

    let report = CompareReport {
        corpus: &corpus_cfg,
        key_policy: policy.mode.to_string(),
        master_seed: a.master_seed,
        ours,
        results: scores.iter().map(compare_entry).collect(),
        ordering,
        ordering_holds,
        notes: vec![
            "all methods run on the landmark ROI of each synthetic video",
            "instahide is applied at estimation time as well, mixing each video with the next one (k = 2)",
            "instahide output is mapped back to intensity with (v + 1) * 127.5 before trace extraction",
        ],
    };
    write_json(&a.out, &report)?;
    Ok(Output::File(a.out.clone()))
}

fn compare_entry(s: &MethodScore) -> CompareEntry {
    let config = json!({"key_policy": s.key_policy, "window": veilpulse::ingest::DEFAULT_WINDOW, "stride": veilpulse::ingest::DEFAULT_STRIDE});
    CompareEntry { method: s.method.clone(), estimator: s.estimator, report: EvalReport::new(&s.report, config) }
}
