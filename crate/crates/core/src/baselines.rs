//! Competing privacy perturbations, implemented as clip transforms so the
//! same estimators can be run on their output.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{Clip, Frame, PermutationKey, RealClip, CHANNELS};
use crate::perturb::keygen;
use crate::rng::{splitmix64, SplitMix64};

/// Adds i.i.d. normal noise of the given variance in the [0, 1] intensity
/// domain, clips to [0, 1] and re-quantizes to 8 bits.
pub fn add_gaussian_noise(clip: &Clip, variance: f64, seed: u64) -> Result<Clip> {
    if !(variance >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance {variance}")));
    }
    if variance == 0.0 {
        return Ok(clip.clone());
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = clip
        .frames()
        .iter()
        .map(|f| {
            let data = f
                .data()
                .iter()
                .map(|&v| {
                    let x = f64::from(v) / 255.0 + normal.sample(&mut rng);
                    (x.clamp(0.0, 1.0) * 255.0).round() as u8
                })
                .collect();
            Frame::new(f.height(), f.width(), data)
        })
        .collect::<Result<Vec<_>>>()?;
    clip.with_frames(frames)
}

/// The raw, unclipped noise values `add_gaussian_noise` draws for `seed`.
pub fn noise_field(variance: f64, seed: u64, n: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, variance.sqrt()).expect("variance >= 0");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

const BLOCK: usize = 8;

fn dct_basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static BASIS: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0f64; BLOCK]; BLOCK];
        for (u, row) in m.iter_mut().enumerate() {
            let alpha = if u == 0 { (1.0 / BLOCK as f64).sqrt() } else { (2.0 / BLOCK as f64).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = alpha * ((2 * x + 1) as f64 * u as f64 * PI / (2 * BLOCK) as f64).cos();
            }
        }
        m
    })
}

type Block = [[f64; BLOCK]; BLOCK];

/// Orthonormal 2-D DCT-II of one block.
pub fn dct8x8(block: &Block) -> Block {
    let c = dct_basis();
    let mut tmp = [[0f64; BLOCK]; BLOCK];
    for u in 0..BLOCK {
        for x in 0..BLOCK {
            tmp[u][x] = (0..BLOCK).map(|y| c[u][y] * block[y][x]).sum();
        }
    }
    let mut out = [[0f64; BLOCK]; BLOCK];
    for u in 0..BLOCK {
        for v in 0..BLOCK {
            out[u][v] = (0..BLOCK).map(|x| tmp[u][x] * c[v][x]).sum();
        }
    }
    out
}

pub fn idct8x8(coef: &Block) -> Block {
    let c = dct_basis();
    let mut tmp = [[0f64; BLOCK]; BLOCK];
    for y in 0..BLOCK {
        for v in 0..BLOCK {
            tmp[y][v] = (0..BLOCK).map(|u| c[u][y] * coef[u][v]).sum();
        }
    }
    let mut out = [[0f64; BLOCK]; BLOCK];
    for y in 0..BLOCK {
        for x in 0..BLOCK {
            out[y][x] = (0..BLOCK).map(|v| tmp[y][v] * c[v][x]).sum();
        }
    }
    out
}

fn bdct_apply(frame: &Frame, source: &[usize]) -> Result<Frame> {
    let (h, w) = (frame.height(), frame.width());
    if h % BLOCK != 0 || w % BLOCK != 0 || h == 0 || w == 0 {
        return Err(Error::BadDims { height: h, width: w, block: BLOCK });
    }
    let src = frame.data();
    let mut out = vec![0u8; src.len()];
    for by in (0..h).step_by(BLOCK) {
        for bx in (0..w).step_by(BLOCK) {
            for c in 0..CHANNELS {
                let mut block = [[0f64; BLOCK]; BLOCK];
                for (y, row) in block.iter_mut().enumerate() {
                    for (x, v) in row.iter_mut().enumerate() {
                        *v = f64::from(src[((by + y) * w + bx + x) * CHANNELS + c]);
                    }
                }
                let coef = dct8x8(&block);
                let mut moved = [[0f64; BLOCK]; BLOCK];
                for (dst, &s) in source.iter().enumerate() {
                    moved[dst / BLOCK][dst % BLOCK] = coef[s / BLOCK][s % BLOCK];
                }
                let pixels = idct8x8(&moved);
                for (y, row) in pixels.iter().enumerate() {
                    for (x, v) in row.iter().enumerate() {
                        out[((by + y) * w + bx + x) * CHANNELS + c] = v.round().clamp(0.0, 255.0) as u8;
                    }
                }
            }
        }
    }
    Frame::new(h, w, out)
}

fn check_bdct_key(key: &PermutationKey) -> Result<()> {
    if key.n() != BLOCK * BLOCK {
        return Err(Error::SizeMismatch(format!("BDCT key covers {} channels, expected 64", key.n())));
    }
    Ok(())
}

/// Per channel: 8x8 block DCT, then the 64 frequency channels (each one
/// gathering that frequency across all blocks) are permuted by `key`, and
/// the blocks are transformed back and re-quantized.
pub fn bdct_mask(frame: &Frame, key: &PermutationKey) -> Result<Frame> {
    check_bdct_key(key)?;
    bdct_apply(frame, key.perm())
}

/// Inverse of [`bdct_mask`] up to re-quantization, exact only while the
/// masked frame did not clip.
pub fn bdct_unmask(frame: &Frame, key: &PermutationKey) -> Result<Frame> {
    check_bdct_key(key)?;
    bdct_apply(frame, &key.inverse())
}

const LE_BLOCK: usize = 4;
const LE_POSITIONS: usize = LE_BLOCK * LE_BLOCK;
const CHANNEL_ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Key material for the block-wise encryption, shared by every 4x4 block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeKey {
    /// Output position `i` takes the pixel at `pixel_perm[i]` within the block.
    pub pixel_perm: [usize; LE_POSITIONS],
    /// Output channel `c` at position `i` takes input channel `channel_perm[i][c]`.
    pub channel_perm: [[usize; 3]; LE_POSITIONS],
    /// Positions whose intensities are reversed, `v -> 255 - v`.
    pub reverse: [bool; LE_POSITIONS],
}

impl LeKey {
    pub fn null() -> Self {
        Self {
            pixel_perm: std::array::from_fn(|i| i),
            channel_perm: [[0, 1, 2]; LE_POSITIONS],
            reverse: [false; LE_POSITIONS],
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        let perm = keygen(seed, LE_POSITIONS);
        let mut rng = SplitMix64::new(splitmix64(seed));
        let mut key = Self::null();
        key.pixel_perm.copy_from_slice(perm.perm());
        for i in 0..LE_POSITIONS {
            key.channel_perm[i] = CHANNEL_ORDERS[(rng.next_u64() % 6) as usize];
            key.reverse[i] = rng.next_u64() & 1 == 1;
        }
        key
    }
}

fn le_dims(frame: &Frame) -> Result<()> {
    if !frame.height().is_multiple_of(LE_BLOCK) || !frame.width().is_multiple_of(LE_BLOCK) {
        return Err(Error::BadDims { height: frame.height(), width: frame.width(), block: LE_BLOCK });
    }
    Ok(())
}

fn block_offset(w: usize, by: usize, bx: usize, pos: usize) -> usize {
    ((by + pos / LE_BLOCK) * w + bx + pos % LE_BLOCK) * CHANNELS
}

/// Block-wise pixel shuffle, channel shuffle and negative-positive
/// transform with one key shared by all 4x4 blocks.
pub fn le_encrypt(frame: &Frame, key: &LeKey) -> Result<Frame> {
    le_dims(frame)?;
    let (h, w) = (frame.height(), frame.width());
    let src = frame.data();
    let mut out = vec![0u8; src.len()];
    for by in (0..h).step_by(LE_BLOCK) {
        for bx in (0..w).step_by(LE_BLOCK) {
            for i in 0..LE_POSITIONS {
                let s = block_offset(w, by, bx, key.pixel_perm[i]);
                let d = block_offset(w, by, bx, i);
                for c in 0..CHANNELS {
                    let v = src[s + key.channel_perm[i][c]];
                    out[d + c] = if key.reverse[i] { 255 - v } else { v };
                }
            }
        }
    }
    Frame::new(h, w, out)
}

pub fn le_decrypt(frame: &Frame, key: &LeKey) -> Result<Frame> {
    le_dims(frame)?;
    let (h, w) = (frame.height(), frame.width());
    let src = frame.data();
    let mut out = vec![0u8; src.len()];
    for by in (0..h).step_by(LE_BLOCK) {
        for bx in (0..w).step_by(LE_BLOCK) {
            for i in 0..LE_POSITIONS {
                let s = block_offset(w, by, bx, i);
                let d = block_offset(w, by, bx, key.pixel_perm[i]);
                for c in 0..CHANNELS {
                    let v = src[s + c];
                    out[d + key.channel_perm[i][c]] = if key.reverse[i] { 255 - v } else { v };
                }
            }
        }
    }
    Frame::new(h, w, out)
}

pub fn to_signed_unit(v: u8) -> f32 {
    f32::from(v) / 127.5 - 1.0
}

/// InstaHide with two images: per frame, `l0 * a + l1 * b` in the [-1, 1]
/// domain, then every value's sign is flipped at random. A fresh sign mask
/// is drawn for each frame. `sign_seed = None` disables flipping.
pub fn instahide_mix(a: &Clip, b: &Clip, lambda: [f64; 2], sign_seed: Option<u64>) -> Result<RealClip> {
    if a.len() != b.len() || a.height() != b.height() || a.width() != b.width() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", a.len(), a.frames()[0].shape_string()),
            found: format!("{}x{}", b.len(), b.frames()[0].shape_string()),
        });
    }
    if lambda.iter().any(|l| !(*l >= 0.0)) || (lambda[0] + lambda[1] - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("mixing weights {lambda:?} must be >= 0 and sum to 1")));
    }
    let (l0, l1) = (lambda[0] as f32, lambda[1] as f32);
    let mut rng = sign_seed.map(SplitMix64::new);
    let mut data = Vec::with_capacity(a.len() * a.height() * a.width() * CHANNELS);
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        let mut bits = 0u64;
        for (i, (&va, &vb)) in fa.data().iter().zip(fb.data()).enumerate() {
            let mut v = (l0 * to_signed_unit(va) + l1 * to_signed_unit(vb)).clamp(-1.0, 1.0);
            if let Some(rng) = rng.as_mut() {
                if i % 64 == 0 {
                    bits = rng.next_u64();
                }
                if (bits >> (i % 64)) & 1 == 1 {
                    v = -v;
                }
            }
            data.push(v);
        }
    }
    RealClip::new(a.len(), a.height(), a.width(), a.fps(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_frame(seed: u64) -> Frame {
        let mut g = SplitMix64::new(seed);
        Frame::new(64, 64, (0..64 * 64 * 3).map(|_| g.next_u64() as u8).collect()).unwrap()
    }

    fn smooth_frame(seed: u64) -> Frame {
        let phase = (seed % 17) as f64;
        Frame::from_fn(64, 64, |y, x| {
            let v = 128.0 + 60.0 * ((x as f64 + phase) / 9.0).sin() * ((y as f64) / 11.0).cos();
            [v as u8, (v * 0.8) as u8, (v * 0.6) as u8]
        })
    }

    fn clip_of(frames: Vec<Frame>) -> Clip {
        Clip::new(frames, 30.0, "b").unwrap()
    }

    #[test]
    fn zero_variance_noise_is_identity() {
        let clip = clip_of(vec![random_frame(1), random_frame(2)]);
        assert_eq!(add_gaussian_noise(&clip, 0.0, 9).unwrap(), clip);
        assert!(add_gaussian_noise(&clip, -1.0, 9).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let clip = clip_of(vec![random_frame(1)]);
        let a = add_gaussian_noise(&clip, 0.5, 3).unwrap();
        assert_eq!(a, add_gaussian_noise(&clip, 0.5, 3).unwrap());
        assert_ne!(a, add_gaussian_noise(&clip, 0.5, 4).unwrap());
    }

    #[test]
    fn noise_field_variance() {
        let v = noise_field(0.5, 11, 1_000_000);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((0.495..=0.505).contains(&var), "{var}");
    }

    #[test]
    fn dct_parseval() {
        let f = random_frame(5);
        let mut block = [[0f64; 8]; 8];
        for (y, row) in block.iter_mut().enumerate() {
            for (x, v) in row.iter_mut().enumerate() {
                *v = f64::from(f.pixel(y, x)[1]);
            }
        }
        let coef = dct8x8(&block);
        let energy = |b: &Block| b.iter().flatten().map(|v| v * v).sum::<f64>();
        assert!((energy(&coef) / energy(&block) - 1.0).abs() < 1e-9);
        let back = idct8x8(&coef);
        for (a, b) in back.iter().flatten().zip(block.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn bdct_identity_key_roundtrip() {
        let f = random_frame(6);
        let out = bdct_mask(&f, &PermutationKey::identity(64)).unwrap();
        for (a, b) in out.data().iter().zip(f.data()) {
            assert!((i16::from(*a) - i16::from(*b)).abs() <= 1);
        }
    }

    #[test]
    fn bdct_keyed_and_deterministic() {
        let f = smooth_frame(1);
        let (k1, k2) = (keygen(1, 64), keygen(2, 64));
        let a = bdct_mask(&f, &k1).unwrap();
        assert_eq!(a, bdct_mask(&f, &k1).unwrap());
        assert_ne!(a, bdct_mask(&f, &k2).unwrap());
        assert_ne!(a, f);
        assert!(matches!(bdct_mask(&Frame::filled(12, 16, [0; 3]), &k1), Err(Error::BadDims { .. })));
        assert!(matches!(bdct_mask(&f, &keygen(1, 63)), Err(Error::SizeMismatch(_))));
    }

    #[test]
    fn bdct_unmask_inverts_when_unclipped() {
        // Swapping two high-frequency channels keeps every value in range, so
        // only the two roundings separate the round trip from the input.
        let f = smooth_frame(4);
        let mut perm: Vec<usize> = (0..64).collect();
        perm.swap(62, 63);
        perm.swap(54, 55);
        let key = PermutationKey::explicit(perm).unwrap();
        let back = bdct_unmask(&bdct_mask(&f, &key).unwrap(), &key).unwrap();
        for (a, b) in back.data().iter().zip(f.data()) {
            assert!((i16::from(*a) - i16::from(*b)).abs() <= 2);
        }
    }

    #[test]
    fn le_roundtrip() {
        for s in 0..20 {
            let f = random_frame(s);
            let key = LeKey::from_seed(s);
            let enc = le_encrypt(&f, &key).unwrap();
            assert_eq!(le_decrypt(&enc, &key).unwrap(), f);
        }
    }

    #[test]
    fn le_null_key_is_identity() {
        let f = random_frame(9);
        assert_eq!(le_encrypt(&f, &LeKey::null()).unwrap(), f);
    }

    #[test]
    fn le_grey_histogram() {
        let f = Frame::filled(64, 64, [128; 3]);
        let key = LeKey::from_seed(77);
        assert!(key.reverse.iter().any(|&r| r) && key.reverse.iter().any(|&r| !r));
        let enc = le_encrypt(&f, &key).unwrap();
        assert!(enc.data().iter().all(|&v| v == 128 || v == 127));
        assert!(enc.data().contains(&127) && enc.data().contains(&128));
        assert!(matches!(le_encrypt(&Frame::filled(6, 8, [0; 3]), &key), Err(Error::BadDims { .. })));
    }

    #[test]
    fn instahide_examples() {
        let a = clip_of(vec![random_frame(1), random_frame(2)]);
        let b = clip_of(vec![random_frame(3), random_frame(4)]);
        let only_a = instahide_mix(&a, &b, [1.0, 0.0], None).unwrap();
        for (v, &p) in only_a.data.iter().zip(a.frames().iter().flat_map(|f| f.data())) {
            assert_eq!(*v, to_signed_unit(p));
        }
        let avg = instahide_mix(&a, &b, [0.5, 0.5], None).unwrap();
        let pairs = a.frames().iter().flat_map(|f| f.data()).zip(b.frames().iter().flat_map(|f| f.data()));
        for (v, (&pa, &pb)) in avg.data.iter().zip(pairs) {
            assert!((v - 0.5 * (to_signed_unit(pa) + to_signed_unit(pb))).abs() < 1e-6);
        }
        let flipped = instahide_mix(&a, &b, [0.3, 0.7], Some(5)).unwrap();
        assert!(flipped.data.iter().all(|v| v.abs() <= 1.0));
        assert_eq!(flipped, instahide_mix(&a, &b, [0.3, 0.7], Some(5)).unwrap());
        let short = clip_of(vec![random_frame(1)]);
        assert!(matches!(instahide_mix(&a, &short, [0.5, 0.5], None), Err(Error::ShapeMismatch { .. })));
        assert!(instahide_mix(&a, &b, [0.6, 0.6], None).is_err());
    }

    #[test]
    fn baselines_move_channel_means() {
        let mut moved = 0;
        let trials = 100;
        for s in 0..trials {
            let f = smooth_frame(s);
            let clip = clip_of(vec![f.clone()]);
            let means = f.channel_means();
            let noisy = add_gaussian_noise(&clip, 0.5, s).unwrap().frames()[0].channel_means();
            let bdct = bdct_mask(&f, &keygen(s, 64)).unwrap().channel_means();
            let le = le_encrypt(&f, &LeKey::from_seed(s)).unwrap().channel_means();
            let other = clip_of(vec![random_frame(s + 1000)]);
            let mixed =
                crate::estimators::mean_traces_real(&instahide_mix(&clip, &other, [0.5, 0.5], Some(s)).unwrap())
                    .unwrap();
            let ih = [mixed.r[0], mixed.g[0], mixed.b[0]];
            if [noisy, bdct, le, ih].iter().all(|m| m != &means) {
                moved += 1;
            }
        }
        assert!(moved >= 99, "{moved}/{trials}");
    }
}
