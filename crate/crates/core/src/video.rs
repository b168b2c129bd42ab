//! Synthetic grayscale frames, running-average background subtraction and
//! zone activity measurement.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::point_in_polygon;
use crate::scene::{project, Actor, CameraConfig, Floorplan};

pub const BACKGROUND_LEVEL: u8 = 64;
pub const BACKGROUND_JITTER: i32 = 5;
/// Lowest actor intensity; at least 71 gray levels above the brightest
/// background pixel.
pub const ACTOR_BASE_LEVEL: u8 = 140;

/// FNV-1a, used wherever a stable seed is derived from an identifier.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Frame {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_pgm(path, self.width, self.height, &self.pixels)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForegroundMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl ForegroundMask {
    pub fn empty(width: usize, height: usize) -> Self {
        ForegroundMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let px: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        write_pgm(path, self.width, self.height, &px)
    }
}

fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(pixels.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n").expect("write to vec");
    out.extend_from_slice(pixels);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Fixed per-camera background: constant level plus a seeded offset in
/// `[-5, 5]` per pixel.
pub fn background_pattern(camera: &CameraConfig) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(camera.id.as_str()));
    let pixels = (0..camera.width * camera.height)
        .map(|_| (i32::from(BACKGROUND_LEVEL) + rng.gen_range(-BACKGROUND_JITTER..=BACKGROUND_JITTER)) as u8)
        .collect();
    Frame {
        width: camera.width,
        height: camera.height,
        pixels,
    }
}

pub fn actor_intensity(actor: &Actor) -> u8 {
    ACTOR_BASE_LEVEL + 20 * (stable_hash(&actor.id) % 5) as u8
}

/// Rasterizer with a cached background for one camera.
#[derive(Debug, Clone)]
pub struct Renderer {
    camera: CameraConfig,
    background: Frame,
}

impl Renderer {
    pub fn new(camera: &CameraConfig) -> Self {
        Renderer {
            camera: camera.clone(),
            background: background_pattern(camera),
        }
    }

    pub fn background(&self) -> &Frame {
        &self.background
    }

    /// Draws each visible actor's full-body box over the background in
    /// ascending id order. Actors outside their trajectory time are absent.
    pub fn render(&self, floorplan: &Floorplan, actors: &[Actor], t: f64) -> Frame {
        let mut frame = self.background.clone();
        let mut order: Vec<&Actor> = actors.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        let (w, h) = frame.dims();
        for actor in order {
            let Some(bbox) = project(floorplan, &self.camera, actor, t) else {
                continue;
            };
            let value = actor_intensity(actor);
            let (cols, rows) = bbox.rect.pixel_span(w, h);
            for y in rows {
                frame.pixels[y * w + cols.start..y * w + cols.end].fill(value);
            }
        }
        frame
    }
}

pub fn render(camera: &CameraConfig, floorplan: &Floorplan, actors: &[Actor], t: f64) -> Frame {
    Renderer::new(camera).render(floorplan, actors, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgsParams {
    pub alpha: f64,
    pub tau: f64,
    pub warmup: usize,
}

impl Default for BgsParams {
    fn default() -> Self {
        BgsParams {
            alpha: 0.02,
            tau: 20.0,
            warmup: 50,
        }
    }
}

impl BgsParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("bgs", "alpha must lie in [0, 1]"));
        }
        let contrast = f64::from(ACTOR_BASE_LEVEL) - f64::from(BACKGROUND_LEVEL) - f64::from(BACKGROUND_JITTER as u8);
        if !(self.tau > 0.0) || 2.0 * self.tau > contrast {
            return Err(Error::invalid(
                "bgs",
                format!("tau must lie in (0, {}] so actors stay at least 2·tau from background", contrast / 2.0),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    mean: Vec<f32>,
    alpha: f32,
    tau: f32,
}

impl BackgroundModel {
    /// Model seeded with `frame` as the background estimate.
    pub fn from_frame(frame: &Frame, params: &BgsParams) -> Self {
        BackgroundModel {
            width: frame.width,
            height: frame.height,
            mean: frame.pixels.iter().map(|&p| f32::from(p)).collect(),
            alpha: params.alpha as f32,
            tau: params.tau as f32,
        }
    }

    /// Seeds with the first frame, then runs the remaining frames through
    /// `bgs_step`.
    pub fn warmed_up<'a>(frames: impl IntoIterator<Item = &'a Frame>, params: &BgsParams) -> Result<Self> {
        let mut it = frames.into_iter();
        let first = it.next().ok_or_else(|| Error::invalid("bgs", "warm-up needs at least one frame"))?;
        let mut model = BackgroundModel::from_frame(first, params);
        for f in it {
            bgs_step(&mut model, f)?;
        }
        Ok(model)
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Classifies pixels deviating more than `tau` from the background estimate
/// as foreground, then blends the frame into the estimate at background
/// pixels only.
pub fn bgs_step(model: &mut BackgroundModel, frame: &Frame) -> Result<ForegroundMask> {
    if frame.dims() != model.dims() {
        return Err(Error::DimensionMismatch {
            expected: model.dims(),
            actual: frame.dims(),
        });
    }
    let (alpha, tau) = (model.alpha, model.tau);
    let bits = model
        .mean
        .iter_mut()
        .zip(&frame.pixels)
        .map(|(m, &p)| {
            let p = f32::from(p);
            let fg = (p - *m).abs() > tau;
            if !fg {
                *m = (1.0 - alpha) * *m + alpha * p;
            }
            fg
        })
        .collect();
    Ok(ForegroundMask {
        width: model.width,
        height: model.height,
        bits,
    })
}

/// Pixel set of a pixel-space polygon (even-odd rule on pixel centers).
#[derive(Debug, Clone)]
pub struct CompiledZone {
    width: usize,
    height: usize,
    indices: Vec<u32>,
}

impl CompiledZone {
    pub fn new(polygon: &[(f64, f64)], width: usize, height: usize) -> Result<Self> {
        if polygon.len() < 3 {
            return Err(Error::invalid("zone", "polygon needs at least 3 vertices"));
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in polygon {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let clamp = |v: f64, n: usize| v.max(0.0).min(n as f64) as usize;
        let (cx0, cx1) = (clamp(x0.floor(), width), clamp(x1.ceil(), width));
        let (cy0, cy1) = (clamp(y0.floor(), height), clamp(y1.ceil(), height));
        let mut indices = Vec::new();
        for y in cy0..cy1 {
            for x in cx0..cx1 {
                if point_in_polygon((x as f64 + 0.5, y as f64 + 0.5), polygon) {
                    indices.push((y * width + x) as u32);
                }
            }
        }
        if indices.is_empty() {
            return Err(Error::EmptyZone);
        }
        Ok(CompiledZone { width, height, indices })
    }

    pub fn pixel_count(&self) -> usize {
        self.indices.len()
    }

    pub fn activity(&self, mask: &ForegroundMask) -> Result<f64> {
        if (mask.width, mask.height) != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                actual: (mask.width, mask.height),
            });
        }
        let fg = self.indices.iter().filter(|&&i| mask.bits[i as usize]).count();
        Ok(fg as f64 / self.indices.len() as f64)
    }
}

/// Fraction of the zone's pixels that are foreground.
pub fn zone_activity(mask: &ForegroundMask, polygon: &[(f64, f64)]) -> Result<f64> {
    CompiledZone::new(polygon, mask.width, mask.height)?.activity(mask)
}
