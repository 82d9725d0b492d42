//! The privacy transform: keyed pixel and patch shuffling followed by a
//! Gaussian blur.
//!
//! All frames of one sample share a single key so that each pixel keeps its
//! temporal trajectory. Keys are derived from `(master_seed, sample_index)`
//! and never from shared generator state, so results do not depend on
//! scheduling.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    Clip, Frame, KeyMode, KeyPolicy, KeyProvenance, PermutationKey, PerturbMethod, PerturbSpec, CHANNELS,
};
use crate::rng::{splitmix64, SplitMix64};

pub const KEYGEN_ALGORITHM: &str = "splitmix64-fisheryates-v1";

/// Fisher-Yates shuffle of `0..n` driven by SplitMix64.
///
/// At step `i` (from `n - 1` down to 1) the swap partner is
/// `next_u64() % (i + 1)`. The modulo bias is below 2^-52 for n <= 4096.
pub fn keygen(seed: u64, n: usize) -> PermutationKey {
    assert!(n >= 1, "keygen needs n >= 1");
    let mut rng = SplitMix64::new(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        perm.swap(i, j);
    }
    PermutationKey::new(perm, KeyProvenance::Seeded { seed, algorithm: KEYGEN_ALGORITHM.to_string() })
        .expect("Fisher-Yates output is a bijection")
}

/// Seed of the key assigned to `sample_index` under `policy`.
pub fn sample_seed(policy: &KeyPolicy, sample_index: u64) -> u64 {
    match policy.mode {
        KeyMode::Fixed => policy.master_seed,
        KeyMode::Pool(m) => policy.master_seed.wrapping_add(splitmix64(sample_index) % m.max(1)),
        KeyMode::Unbounded => splitmix64(policy.master_seed ^ sample_index),
    }
}

pub fn derive_sample_key(policy: &KeyPolicy, sample_index: u64, n: usize) -> PermutationKey {
    keygen(sample_seed(policy, sample_index), n)
}

fn check_pixel_key(frame: &Frame, key: &PermutationKey) -> Result<()> {
    if frame.pixel_count() != key.n() {
        return Err(Error::SizeMismatch(format!("frame has {} pixels, key covers {}", frame.pixel_count(), key.n())));
    }
    Ok(())
}

fn gather_pixels(frame: &Frame, source: &[usize]) -> Frame {
    let src = frame.data();
    let mut out = Vec::with_capacity(src.len());
    for &s in source {
        out.extend_from_slice(&src[s * CHANNELS..(s + 1) * CHANNELS]);
    }
    Frame::new(frame.height(), frame.width(), out).expect("shape preserved")
}

/// Output pixel `i` takes input pixel `perm[i]`, all three channels together.
pub fn shuffle_pixels(frame: &Frame, key: &PermutationKey) -> Result<Frame> {
    check_pixel_key(frame, key)?;
    Ok(gather_pixels(frame, key.perm()))
}

pub fn unshuffle_pixels(frame: &Frame, key: &PermutationKey) -> Result<Frame> {
    check_pixel_key(frame, key)?;
    Ok(gather_pixels(frame, &key.inverse()))
}

fn patch_grid(frame: &Frame, patch: usize, key: &PermutationKey) -> Result<(usize, usize)> {
    if patch == 0 || !frame.height().is_multiple_of(patch) || !frame.width().is_multiple_of(patch) {
        return Err(Error::BadPatchSize(patch));
    }
    let (rows, cols) = (frame.height() / patch, frame.width() / patch);
    if rows * cols != key.n() {
        return Err(Error::SizeMismatch(format!("{} patches, key covers {}", rows * cols, key.n())));
    }
    Ok((rows, cols))
}

fn gather_patches(frame: &Frame, patch: usize, cols: usize, source: &[usize]) -> Frame {
    let w = frame.width();
    let src = frame.data();
    let mut out = vec![0u8; src.len()];
    let row_bytes = patch * CHANNELS;
    for (dst_idx, &src_idx) in source.iter().enumerate() {
        let (dy, dx) = ((dst_idx / cols) * patch, (dst_idx % cols) * patch);
        let (sy, sx) = ((src_idx / cols) * patch, (src_idx % cols) * patch);
        for r in 0..patch {
            let d = ((dy + r) * w + dx) * CHANNELS;
            let s = ((sy + r) * w + sx) * CHANNELS;
            out[d..d + row_bytes].copy_from_slice(&src[s..s + row_bytes]);
        }
    }
    Frame::new(frame.height(), frame.width(), out).expect("shape preserved")
}

/// Permutes non-overlapping `patch x patch` blocks; pixels inside a block
/// keep their relative layout. Blocks are indexed row-major.
pub fn shuffle_patches(frame: &Frame, patch: usize, key: &PermutationKey) -> Result<Frame> {
    let (_, cols) = patch_grid(frame, patch, key)?;
    Ok(gather_patches(frame, patch, cols, key.perm()))
}

pub fn unshuffle_patches(frame: &Frame, patch: usize, key: &PermutationKey) -> Result<Frame> {
    let (_, cols) = patch_grid(frame, patch, key)?;
    Ok(gather_patches(frame, patch, cols, &key.inverse()))
}

/// Normalized 1-D Gaussian taps for an odd kernel size `k`, sigma = (k - 1) / 4.
pub fn gaussian_taps(k: usize) -> Result<Vec<f64>> {
    if k < 3 || k.is_multiple_of(2) {
        return Err(Error::BadKernel(k));
    }
    let sigma = (k as f64 - 1.0) / 4.0;
    let half = (k / 2) as isize;
    let raw: Vec<f64> = (-half..=half).map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Separable Gaussian blur with edge-clamped borders.
///
/// Both passes run in `f64`; rounding to 8 bits happens once at the end.
pub fn gaussian_blur(frame: &Frame, k: usize) -> Result<Frame> {
    let taps = gaussian_taps(k)?;
    let (h, w) = (frame.height(), frame.width());
    if h == 0 || w == 0 {
        return Err(Error::EmptyInput);
    }
    let half = (k / 2) as isize;
    let src = frame.data();
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;

    let mut horiz = vec![0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0f64; 3];
            for (t, wt) in taps.iter().enumerate() {
                let sx = clamp(x as isize + t as isize - half, w);
                let s = (y * w + sx) * CHANNELS;
                for c in 0..CHANNELS {
                    acc[c] += wt * f64::from(src[s + c]);
                }
            }
            horiz[(y * w + x) * CHANNELS..][..CHANNELS].copy_from_slice(&acc);
        }
    }

    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0f64; 3];
            for (t, wt) in taps.iter().enumerate() {
                let sy = clamp(y as isize + t as isize - half, h);
                let s = (sy * w + x) * CHANNELS;
                for c in 0..CHANNELS {
                    acc[c] += wt * horiz[s + c];
                }
            }
            let d = (y * w + x) * CHANNELS;
            for c in 0..CHANNELS {
                out[d + c] = acc[c].round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Frame::new(h, w, out)
}

/// Applies the shuffle stage of `spec` (pixel or patch) with the sample key to
/// every frame, then the blur when configured. `roi` passes through.
pub fn perturb_clip(clip: &Clip, spec: &PerturbSpec, key: &PermutationKey) -> Result<Clip> {
    spec.validate()?;
    let patch = match spec.method {
        PerturbMethod::Roi => return Ok(clip.clone()),
        PerturbMethod::RoiSh | PerturbMethod::RoiShB => 1,
        PerturbMethod::RoiShPatch(p) => p,
        other => {
            return Err(Error::InvalidParameter(format!("{other:?} is not a shuffle method")));
        }
    };
    let blur = match spec.method {
        PerturbMethod::RoiSh => None,
        _ => spec.blur_kernel,
    };
    let frames = clip
        .frames()
        .par_iter()
        .map(|f| {
            let shuffled = if patch == 1 { shuffle_pixels(f, key)? } else { shuffle_patches(f, patch, key)? };
            match blur {
                Some(k) => gaussian_blur(&shuffled, k),
                None => Ok(shuffled),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    clip.with_frames(frames)
}

/// `log10(n!)` by exact summation of `log10(k)`.
pub fn log10_keyspace(n: usize) -> f64 {
    (2..=n).fold(0.0, |acc, k| acc + (k as f64).log10())
}

/// Key-space size, as `log10`, of a `patch x patch` shuffle over a square ROI of `side` pixels.
pub fn log10_patch_keyspace(side: usize, patch: usize) -> Result<f64> {
    if patch == 0 || !side.is_multiple_of(patch) {
        return Err(Error::BadPatchSize(patch));
    }
    Ok(log10_keyspace((side / patch) * (side / patch)))
}
