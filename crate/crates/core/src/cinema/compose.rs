//! Canvas composition from overview-camera detections.

use crate::detection::{Detection, Gaze};
use crate::error::{Error, Result};
use crate::geometry::Rect;

pub const ASPECT: f64 = 16.0 / 9.0;

/// A proposed PTZ shot in overview-camera pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canvas {
    pub rect: Rect,
}

impl Canvas {
    pub fn new(rect: Rect) -> Self {
        Canvas { rect }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposeParams {
    /// Extra width added around a group, split evenly between both sides.
    pub width_margin: f64,
    /// Eye line as a fraction of the canvas height from the top.
    pub eye_line: f64,
    /// Single-person canvas height over detection height.
    pub single_height_factor: f64,
    /// Smallest group margin accepted when the canvas has to shrink.
    pub min_margin: f64,
}

impl Default for ComposeParams {
    fn default() -> Self {
        ComposeParams {
            width_margin: 0.15,
            eye_line: 1.0 / 3.0,
            single_height_factor: 2.0,
            min_margin: 0.05,
        }
    }
}

impl ComposeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_margin >= 0.0) || !(self.eye_line > 0.0 && self.eye_line < 1.0) {
            return Err(Error::invalid("compose", "need width_margin >= 0 and 0 < eye_line < 1"));
        }
        if !(self.single_height_factor > 0.0) || !(self.min_margin >= 0.0) {
            return Err(Error::invalid("compose", "need positive height factor and non-negative margin floor"));
        }
        Ok(())
    }
}

/// A canvas together with the adjustments that were needed to produce it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composition {
    pub canvas: Canvas,
    /// Enlarged so every detection fits around the eye line.
    pub grown: bool,
    /// Reduced to fit inside the frame.
    pub shrunk: bool,
    pub shifted_x: bool,
    /// Moved vertically away from the eye-line position.
    pub shifted_y: bool,
}

impl Composition {
    pub fn clamped(&self) -> bool {
        self.shrunk || self.shifted_x || self.shifted_y
    }
}

pub fn propose_canvas(detections: &[Detection], dims: (usize, usize), params: &ComposeParams) -> Result<Canvas> {
    compose(detections, dims, params).map(|c| c.canvas)
}

/// Frames a group by its horizontal extent plus margin, or a single person
/// by their size with lead room on the side they look at; in both cases the
/// highest eye sits on the upper third line. Priorities when the frame gets
/// in the way: keep people in shot, then aspect, then eye line, then margins.
pub fn compose(detections: &[Detection], dims: (usize, usize), params: &ComposeParams) -> Result<Composition> {
    let first = detections.first().ok_or(Error::NoDetections)?;
    let (fw, fh) = (dims.0 as f64, dims.1 as f64);
    let e = params.eye_line;

    let mut hull = first.bbox.rect;
    let mut eye_y = first.eye_point.1;
    for d in &detections[1..] {
        let r = d.bbox.rect;
        hull = Rect::from_corners(
            hull.x.min(r.x),
            hull.y.min(r.y),
            hull.right().max(r.right()),
            hull.bottom().max(r.bottom()),
        );
        eye_y = eye_y.min(d.eye_point.1);
    }
    let span = hull.w;

    // Horizontal anchor: the canvas left edge sits at `anchor_x - lead * w`.
    let (mut h, anchor_x, lead) = if detections.len() == 1 {
        let h = params.single_height_factor * first.bbox.rect.h;
        let cx = first.bbox.rect.center().0;
        let lead = match first.gaze {
            Gaze::Right => 1.0 / 3.0,
            Gaze::Left => 2.0 / 3.0,
            Gaze::Frontal | Gaze::Unknown => 0.5,
        };
        (h, cx, lead)
    } else {
        let w = (1.0 + params.width_margin) * span;
        (w / ASPECT, hull.x + span / 2.0, 0.5)
    };

    // Smallest height that keeps everyone inside with the eye line honored.
    let need_h = [
        (eye_y - hull.y) / e,
        (hull.bottom() - eye_y) / (1.0 - e),
        (anchor_x - hull.x) / lead / ASPECT,
        (hull.right() - anchor_x) / (1.0 - lead) / ASPECT,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let mut grown = false;
    if h < need_h {
        h = need_h;
        grown = true;
    }

    // Fit inside the frame: first the size, then the eye-line position by
    // trading margin down to the floor, then translation.
    let cap_h = fh.min(fw / ASPECT);
    let mut shrunk = false;
    if h > cap_h {
        h = cap_h;
        shrunk = true;
    }
    let floor_h = (((1.0 + params.min_margin) * span) / ASPECT)
        .max(hull.h)
        .min(cap_h);
    let eye_fit_h = (eye_y / e).min((fh - eye_y) / (1.0 - e));
    if eye_y - e * h < 0.0 || eye_y + (1.0 - e) * h > fh {
        let lowest = floor_h.max(need_h.min(cap_h));
        // otherwise the eye line is given up during translation below
        if eye_fit_h >= lowest && eye_fit_h < h {
            h = eye_fit_h;
            shrunk = true;
        }
    }
    let w = h * ASPECT;

    let place = |desired: f64, size: f64, lo_keep: f64, hi_keep: f64, limit: f64| -> f64 {
        // keep-interval: positions where [lo_keep, hi_keep] stays inside
        let (mut lo, mut hi) = (hi_keep - size, lo_keep);
        let (flo, fhi) = (0.0, (limit - size).max(0.0));
        if lo > hi || hi < flo || lo > fhi {
            lo = flo;
            hi = fhi;
        } else {
            lo = lo.max(flo);
            hi = hi.min(fhi);
        }
        desired.clamp(lo, hi)
    };
    let desired_x = anchor_x - lead * w;
    let desired_y = eye_y - e * h;
    let x = place(desired_x, w, hull.x, hull.right(), fw);
    let y = place(desired_y, h, hull.y, hull.bottom(), fh);
    Ok(Composition {
        canvas: Canvas::new(Rect::new(x, y, w, h)),
        grown,
        shrunk,
        shifted_x: (x - desired_x).abs() > 1e-9,
        shifted_y: (y - desired_y).abs() > 1e-9,
    })
}
