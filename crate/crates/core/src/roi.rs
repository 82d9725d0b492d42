//! Composite ROI assembly: two cheeks side by side with the forehead on top,
//! resampled to a fixed 64x64 frame.

use crate::error::{Error, Result};
use crate::model::{Frame, LandmarkSet, CHANNELS, ROI_SIZE};

/// Bilinear resampling with corner-aligned sample positions.
pub fn bilinear_resize(img: &Frame, out_h: usize, out_w: usize) -> Result<Frame> {
    let (in_h, in_w) = (img.height(), img.width());
    if in_h == 0 || in_w == 0 || out_h == 0 || out_w == 0 {
        return Err(Error::EmptyInput);
    }
    if (in_h, in_w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    let scale = |n_in: usize, n_out: usize| {
        if n_out > 1 {
            (n_in - 1) as f64 / (n_out - 1) as f64
        } else {
            0.0
        }
    };
    let (sy, sx) = (scale(in_h, out_h), scale(in_w, out_w));
    let src = img.data();
    let at = |y: usize, x: usize, c: usize| f64::from(src[(y * in_w + x) * CHANNELS + c]);

    let mut out = Vec::with_capacity(out_h * out_w * CHANNELS);
    for oy in 0..out_h {
        let fy = oy as f64 * sy;
        let y0 = (fy.floor() as usize).min(in_h - 1);
        let y1 = (y0 + 1).min(in_h - 1);
        let ty = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ox as f64 * sx;
            let x0 = (fx.floor() as usize).min(in_w - 1);
            let x1 = (x0 + 1).min(in_w - 1);
            let tx = fx - x0 as f64;
            for c in 0..CHANNELS {
                let top = at(y0, x0, c) * (1.0 - tx) + at(y0, x1, c) * tx;
                let bottom = at(y1, x0, c) * (1.0 - tx) + at(y1, x1, c) * tx;
                let v = top * (1.0 - ty) + bottom * ty;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame::new(out_h, out_w, out)
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

/// Floors the minimum, ceils the maximum, then clamps to the frame.
fn clamp_rect(
    name: &'static str,
    (xmin, xmax): (f64, f64),
    (ymin, ymax): (f64, f64),
    h: usize,
    w: usize,
) -> Result<PixelRect> {
    let clamp = |v: f64, n: usize| v.clamp(0.0, (n - 1) as f64) as usize;
    if !(xmin <= xmax && ymin <= ymax) {
        return Err(Error::DegenerateRegion(name));
    }
    let rect = PixelRect {
        x0: clamp(xmin.floor(), w),
        x1: clamp(xmax.ceil(), w),
        y0: clamp(ymin.floor(), h),
        y1: clamp(ymax.ceil(), h),
    };
    if rect.width() < 2 || rect.height() < 2 {
        return Err(Error::DegenerateRegion(name));
    }
    Ok(rect)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionRects {
    pub cheek_a: PixelRect,
    pub cheek_b: PixelRect,
    pub forehead: PixelRect,
}

/// Rectangles for the two cheeks and the forehead, from iBUG-68 landmarks.
pub fn region_rects(lm: &LandmarkSet, height: usize, width: usize) -> Result<RegionRects> {
    if height == 0 || width == 0 {
        return Err(Error::EmptyInput);
    }
    let cheek_y = (lm.y(29), lm.y(33));
    let cheek_a = clamp_rect("cheek_a", (lm.x(1), lm.x(31)), cheek_y, height, width)?;
    let cheek_b = clamp_rect("cheek_b", (lm.x(35), lm.x(15)), cheek_y, height, width)?;

    let brow_top = (17..=26).map(|i| lm.y(i)).fold(f64::INFINITY, f64::min);
    let bottom = brow_top - 2.0;
    let top = bottom - 0.6 * (lm.y(33) - lm.y(27));
    let forehead = clamp_rect("forehead", (lm.x(19), lm.x(24)), (top, bottom), height, width)?;
    Ok(RegionRects { cheek_a, cheek_b, forehead })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Regions {
    pub cheek_a: Frame,
    pub cheek_b: Frame,
    pub forehead: Frame,
}

fn crop_rect(frame: &Frame, r: PixelRect) -> Frame {
    frame.crop(r.y0, r.y1 + 1, r.x0, r.x1 + 1)
}

pub fn extract_regions(frame: &Frame, lm: &LandmarkSet) -> Result<Regions> {
    let rects = region_rects(lm, frame.height(), frame.width())?;
    Ok(Regions {
        cheek_a: crop_rect(frame, rects.cheek_a),
        cheek_b: crop_rect(frame, rects.cheek_b),
        forehead: crop_rect(frame, rects.forehead),
    })
}

fn hconcat(left: &Frame, right: &Frame) -> Frame {
    debug_assert_eq!(left.height(), right.height());
    let h = left.height();
    let (lw, rw) = (left.width() * CHANNELS, right.width() * CHANNELS);
    let mut data = Vec::with_capacity(h * (lw + rw));
    for y in 0..h {
        data.extend_from_slice(&left.data()[y * lw..(y + 1) * lw]);
        data.extend_from_slice(&right.data()[y * rw..(y + 1) * rw]);
    }
    Frame::new(h, left.width() + right.width(), data).expect("concatenated shape")
}

fn vconcat(top: &Frame, bottom: &Frame) -> Frame {
    debug_assert_eq!(top.width(), bottom.width());
    let mut data = Vec::with_capacity(top.data().len() + bottom.data().len());
    data.extend_from_slice(top.data());
    data.extend_from_slice(bottom.data());
    Frame::new(top.height() + bottom.height(), top.width(), data).expect("concatenated shape")
}

/// Taller cheek is resized down to the shorter one's height, cheeks are
/// joined left to right, the forehead is resized to that width and stacked
/// on top, and the composite is resampled to 64x64.
pub fn assemble_roi(regions: &Regions) -> Result<Frame> {
    let Regions { cheek_a, cheek_b, forehead } = regions;
    for (name, r) in [("cheek_a", cheek_a), ("cheek_b", cheek_b), ("forehead", forehead)] {
        if r.height() < 2 || r.width() < 2 {
            return Err(Error::DegenerateRegion(name));
        }
    }
    let h = cheek_a.height().min(cheek_b.height());
    let a = bilinear_resize(cheek_a, h, cheek_a.width())?;
    let b = bilinear_resize(cheek_b, h, cheek_b.width())?;
    let cheeks = hconcat(&a, &b);
    let brow = bilinear_resize(forehead, forehead.height(), cheeks.width())?;
    bilinear_resize(&vconcat(&brow, &cheeks), ROI_SIZE, ROI_SIZE)
}

pub fn roi_frame(frame: &Frame, lm: &LandmarkSet) -> Result<Frame> {
    assemble_roi(&extract_regions(frame, lm)?)
}
