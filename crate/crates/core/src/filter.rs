//! Butterworth band-pass design and zero-phase (forward-backward) filtering
//! in second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Transposed direct form II state for a unit step held forever.
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let gain = (b0 + b1 + b2) / (1.0 + a1 + a2);
        [gain - b0, b2 - a2 * gain]
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let y = b0 * *v + z[0];
            z[0] = b1 * *v - a1 * y + z[1];
            z[1] = b2 * *v - a2 * y;
            *v = y;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandPass {
    pub sections: Vec<Biquad>,
    pub lo: f64,
    pub hi: f64,
    pub fs: f64,
}

impl BandPass {
    /// Digital Butterworth band-pass from an analog prototype of `order`
    /// poles, via band transformation and the bilinear transform with
    /// pre-warped edges. The result has `2 * order` poles.
    pub fn butterworth(order: usize, lo: f64, hi: f64, fs: f64) -> Result<Self> {
        if !(fs > 2.0 * hi) {
            return Err(Error::FsTooLow { fs, hi });
        }
        if !(lo > 0.0 && lo < hi) || order == 0 {
            return Err(Error::InvalidParameter(format!("band [{lo}, {hi}] of order {order}")));
        }
        // Work at a normalized rate of 2, as in the classic design recipe.
        let fs2 = 4.0;
        let warp = |f: f64| fs2 * (PI * (2.0 * f / fs) / 2.0).tan();
        let (wl, wh) = (warp(lo), warp(hi));
        let (bw, w0) = (wh - wl, (wl * wh).sqrt());

        let proto: Vec<Complex64> = (0..order)
            .map(|k| {
                let m = -(order as f64) + 1.0 + 2.0 * k as f64;
                -Complex64::from_polar(1.0, PI * m / (2.0 * order as f64))
            })
            .collect();

        let mut poles = Vec::with_capacity(2 * order);
        for p in &proto {
            let shifted = p * (bw / 2.0);
            let disc = (shifted * shifted - w0 * w0).sqrt();
            poles.push(shifted + disc);
            poles.push(shifted - disc);
        }
        // Analog: `order` zeros at s = 0, gain bw^order; zeros at infinity map to z = -1.
        let mut gain = bw.powi(order as i32);
        let mut num = Complex64::new(1.0, 0.0);
        let mut den = Complex64::new(1.0, 0.0);
        for _ in 0..order {
            num *= fs2;
        }
        for p in &poles {
            den *= fs2 - p;
        }
        gain *= (num / den).re;
        let zpoles: Vec<Complex64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();

        // One upper-half-plane pole per section, each with zeros at +1 and -1.
        let mut upper: Vec<Complex64> = zpoles.into_iter().filter(|p| p.im > 0.0).collect();
        upper.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).expect("finite poles"));
        if upper.len() != order {
            return Err(Error::InvalidParameter("band edges too close for a stable design".into()));
        }
        let sections = upper
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let g = if i == 0 { gain } else { 1.0 };
                Biquad { b: [g, 0.0, -g], a: [1.0, -2.0 * p.re, p.norm_sqr()] }
            })
            .collect();
        Ok(Self { sections, lo, hi, fs })
    }

    /// Reflection padding used by [`filtfilt`](Self::filtfilt).
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Zero-phase filtering: forward pass, then backward pass, each started
    /// from the steady state of the edge value, over an odd reflection of the
    /// signal ends.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = self.pad_len();
        if x.len() <= pad {
            return Err(Error::TooShort { len: x.len(), min: pad });
        }
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        self.run_sos(&mut ext);
        ext.reverse();
        self.run_sos(&mut ext);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }

    fn run_sos(&self, x: &mut [f64]) {
        let mut scale = x[0];
        for s in &self.sections {
            let [z0, z1] = s.step_state();
            s.run(x, [z0 * scale, z1 * scale]);
            scale *= s.dc_gain();
        }
    }

    /// Magnitude response at `f` Hz.
    pub fn magnitude(&self, f: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * f / self.fs);
        let zi = z.inv();
        self.sections
            .iter()
            .map(|s| {
                let num = s.b[0] + s.b[1] * zi + s.b[2] * zi * zi;
                let den = s.a[0] + s.a[1] * zi + s.a[2] * zi * zi;
                (num / den).norm()
            })
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analog_butterworth_response() {
        // |H|^2 = 1 / (1 + x^4), x = (w^2 - w0^2) / (w * bw) on pre-warped frequencies.
        let bp = BandPass::butterworth(2, 0.7, 4.0, 30.0).unwrap();
        let warp = |f: f64| (PI * f / 30.0).tan();
        let (wl, wh) = (warp(0.7), warp(4.0));
        for f in [0.2, 0.7, 1.2, 2.0, 4.0, 7.0, 12.0] {
            let w = warp(f);
            let x = (w * w - wl * wh) / (w * (wh - wl));
            let expected = 1.0 / (1.0 + x.powi(4)).sqrt();
            assert!((bp.magnitude(f) - expected).abs() < 1e-9, "f={f}");
        }
        assert!((bp.magnitude(0.7) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(bp.magnitude(1e-9) < 1e-6);
    }

    #[test]
    fn stable_poles() {
        let bp = BandPass::butterworth(2, 0.7, 4.0, 30.0).unwrap();
        assert_eq!(bp.sections.len(), 2);
        for s in &bp.sections {
            assert!(s.a[2] < 1.0 && s.a[2] > 0.0);
        }
    }

    #[test]
    fn constant_maps_to_zero() {
        let bp = BandPass::butterworth(2, 0.7, 4.0, 30.0).unwrap();
        let out = bp.filtfilt(&vec![3.7; 200]).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn matches_reference_sosfiltfilt() {
        // Values from scipy.signal.sosfiltfilt(butter(2, [0.7, 4], "band", fs=30, output="sos"), x).
        let x: Vec<f64> = (0..100)
            .map(|i| {
                let i = i as f64;
                (0.37 * i).sin() + 0.5 * (0.05 * i).cos() + 0.01 * i
            })
            .collect();
        let y = BandPass::butterworth(2, 0.7, 4.0, 30.0).unwrap().filtfilt(&x).unwrap();
        let expected = [
            (0, -0.0076316825649045406),
            (1, 0.37317849314229523),
            (10, -0.4699415533181438),
            (50, -0.3341791773932974),
            (98, -0.03078004850718208),
            (99, 0.1501052930467246),
        ];
        for (k, v) in expected {
            assert!((y[k] - v).abs() < 1e-9, "y[{k}] = {}", y[k]);
        }
    }

    #[test]
    fn rejects_bad_setups() {
        assert!(matches!(BandPass::butterworth(2, 0.7, 4.0, 8.0), Err(Error::FsTooLow { .. })));
        let bp = BandPass::butterworth(2, 0.7, 4.0, 30.0).unwrap();
        assert!(matches!(bp.filtfilt(&[0.0; 15]), Err(Error::TooShort { .. })));
        assert!(bp.filtfilt(&[0.0; 16]).is_ok());
    }
}
