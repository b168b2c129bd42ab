//! Background-subtraction gated person detection.
//!
//! The detector only ever sees the regions of a [`DetectionPool`]: bounding
//! boxes of foreground activity plus the previous frame's detections with a
//! margin, so stationary people that BGS no longer reports keep being found.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{wrap_angle, Rect};
use crate::scene::{actor_position, project, Actor, CameraConfig, CameraId, Floorplan, ImageBox};
use crate::video::{stable_hash, ForegroundMask, Frame};

/// Two detections overlapping more than this are treated as duplicates.
pub const DEDUP_IOU: f64 = 0.6;
/// Eye height within a detection box, as a fraction of the box height.
pub const EYE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gaze {
    Left,
    Right,
    Frontal,
    Unknown,
}

impl Gaze {
    pub fn as_str(self) -> &'static str {
        match self {
            Gaze::Left => "left",
            Gaze::Right => "right",
            Gaze::Frontal => "frontal",
            Gaze::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Upper-body box.
    pub bbox: ImageBox,
    pub eye_point: (f64, f64),
    pub gaze: Gaze,
    pub confidence: f64,
    /// Ground-truth actor; only set by the simulated detector.
    pub actor: Option<String>,
}

impl Detection {
    /// Detection for `rect` with the eye point derived from the box.
    pub fn from_box(camera: CameraId, rect: Rect, gaze: Gaze, confidence: f64) -> Self {
        Detection {
            eye_point: eye_point(&rect),
            bbox: ImageBox::new(camera, rect),
            gaze,
            confidence: confidence.clamp(0.0, 1.0),
            actor: None,
        }
    }
}

pub fn eye_point(rect: &Rect) -> (f64, f64) {
    (rect.x + rect.w / 2.0, rect.y + EYE_FRACTION * rect.h)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionPool {
    pub regions: Vec<ImageBox>,
}

impl DetectionPool {
    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn overlaps(&self, rect: &Rect) -> bool {
        self.regions.iter().any(|r| r.rect.intersection(rect).is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeScores {
    pub frontal: f64,
    pub left_profile: f64,
    pub right_profile: f64,
    pub threshold: f64,
}

/// Picks the strongest of the three face models, or `Unknown` when none
/// reaches the threshold. Ties go frontal, then left, then right.
pub fn fuse_gaze(scores: &GazeScores) -> Gaze {
    let ranked = [
        (scores.frontal, Gaze::Frontal),
        (scores.left_profile, Gaze::Left),
        (scores.right_profile, Gaze::Right),
    ];
    let (best, label) = ranked
        .into_iter()
        .fold((f64::NEG_INFINITY, Gaze::Unknown), |acc, (s, g)| if s > acc.0 { (s, g) } else { acc });
    if best < scores.threshold {
        Gaze::Unknown
    } else {
        label
    }
}

/// Bounding boxes of 4-connected foreground components of at least
/// `min_area` pixels, in raster order of their first pixel.
pub fn activity_regions(mask: &ForegroundMask, camera: &CameraId, min_area: usize) -> Vec<ImageBox> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut area = 0usize;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            let mut visit = |j: usize| {
                if mask.bits[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if area >= min_area {
            out.push(ImageBox::new(
                camera.clone(),
                Rect::from_corners(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64),
            ));
        }
    }
    out
}

/// Activity boxes plus previous detections grown by `margin_frac` per side,
/// snapped to whole pixels and clipped to the frame.
pub fn update_pool(prev: &[Detection], margin_frac: f64, activity: &[ImageBox], dims: (usize, usize)) -> DetectionPool {
    let (fw, fh) = dims;
    let grown = prev.iter().map(|d| {
        let r = d.bbox.rect;
        let (mx, my) = (r.w * margin_frac, r.h * margin_frac);
        let snapped = Rect::new(
            (r.x - mx).floor(),
            (r.y - my).floor(),
            (r.w + 2.0 * mx).floor().max(1.0),
            (r.h + 2.0 * my).floor().max(1.0),
        );
        ImageBox::new(d.bbox.camera.clone(), snapped)
    });
    let regions = activity
        .iter()
        .cloned()
        .chain(grown)
        .filter_map(|b| b.clipped(fw, fh))
        .collect();
    DetectionPool { regions }
}

/// Everything a detector may look at for one frame.
pub struct FrameContext<'a> {
    pub camera: &'a CameraConfig,
    pub frame: &'a Frame,
    pub floorplan: &'a Floorplan,
    pub actors: &'a [Actor],
    pub t: f64,
}

/// A person detector evaluated on a set of image regions.
pub trait Detector {
    fn detect(&mut self, ctx: &FrameContext<'_>, regions: &[ImageBox]) -> Vec<Detection>;
}

impl<F> Detector for F
where
    F: FnMut(&FrameContext<'_>, &[ImageBox]) -> Vec<Detection>,
{
    fn detect(&mut self, ctx: &FrameContext<'_>, regions: &[ImageBox]) -> Vec<Detection> {
        self(ctx, regions)
    }
}

/// Runs `detector` on the pool, drops anything outside it and removes
/// duplicates (IoU > 0.6, higher confidence wins).
pub fn detect(detector: &mut dyn Detector, ctx: &FrameContext<'_>, pool: &DetectionPool) -> Vec<Detection> {
    if pool.is_empty() {
        return Vec::new();
    }
    let mut found: Vec<Detection> = detector
        .detect(ctx, &pool.regions)
        .into_iter()
        .filter(|d| pool.overlaps(&d.bbox.rect))
        .collect();
    // stable sort keeps detector order among equal confidences
    found.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut kept: Vec<Detection> = Vec::with_capacity(found.len());
    for d in found {
        if kept.iter().all(|k| k.bbox.rect.iou(&d.bbox.rect) <= DEDUP_IOU) {
            kept.push(d);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDetectorParams {
    /// Maximum center perturbation in pixels.
    pub jitter: f64,
    pub p_miss: f64,
    pub gaze_threshold: f64,
    /// Half-angle of the frontal cone, radians.
    pub frontal_cone: f64,
}

impl Default for SimDetectorParams {
    fn default() -> Self {
        SimDetectorParams {
            jitter: 2.0,
            p_miss: 0.02,
            gaze_threshold: 0.5,
            frontal_cone: 30f64.to_radians(),
        }
    }
}

/// Ground-truth detector: reports the projected upper body of every visible
/// actor touching the pool, with seeded jitter and misses.
#[derive(Debug, Clone)]
pub struct SimulatedDetector {
    params: SimDetectorParams,
    rng: ChaCha8Rng,
}

impl SimulatedDetector {
    pub fn new(params: SimDetectorParams, seed: u64, camera: &CameraId) -> Self {
        SimulatedDetector {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed ^ stable_hash(camera.as_str())),
        }
    }
}

/// Apparent gaze of an actor facing `heading` as seen from `camera`.
/// Within the frontal cone of the camera direction it is frontal, within the
/// same cone of the opposite direction the face is hidden, otherwise the side
/// of the image the actor faces.
pub fn apparent_gaze(camera: &CameraConfig, actor_pos: crate::geometry::Vec2, heading: Option<f64>, frontal_cone: f64) -> Gaze {
    let Some(heading) = heading else {
        return Gaze::Unknown;
    };
    let to_camera = (camera.position - actor_pos).angle();
    let off = wrap_angle(heading - to_camera);
    if off.abs() <= frontal_cone {
        return Gaze::Frontal;
    }
    if off.abs() >= std::f64::consts::PI - frontal_cone {
        return Gaze::Unknown;
    }
    // image columns grow with the bearing seen from the camera
    let bearing = (actor_pos - camera.position).angle();
    let rightward = -bearing.sin() * heading.cos() + bearing.cos() * heading.sin();
    if rightward > 0.0 {
        Gaze::Right
    } else {
        Gaze::Left
    }
}

impl Detector for SimulatedDetector {
    fn detect(&mut self, ctx: &FrameContext<'_>, regions: &[ImageBox]) -> Vec<Detection> {
        let pool = DetectionPool {
            regions: regions.to_vec(),
        };
        let mut actors: Vec<&Actor> = ctx.actors.iter().collect();
        actors.sort_by(|a, b| a.id.cmp(&b.id));
        let (fw, fh) = (ctx.camera.width, ctx.camera.height);
        let mut out = Vec::new();
        for actor in actors {
            let Some(body) = project(ctx.floorplan, ctx.camera, actor, ctx.t) else {
                continue;
            };
            let Some(upper) = body.upper_body().clipped(fw, fh) else {
                continue;
            };
            if !pool.overlaps(&upper.rect) {
                continue;
            }
            let miss: f64 = self.rng.gen();
            let radius = self.params.jitter * self.rng.gen::<f64>().sqrt();
            let theta = self.rng.gen::<f64>() * std::f64::consts::TAU;
            let confidence = 0.8 + 0.2 * self.rng.gen::<f64>();
            if miss < self.params.p_miss {
                continue;
            }
            let moved = Rect { x: upper.rect.x + radius * theta.cos(), y: upper.rect.y + radius * theta.sin(), ..upper.rect };
            let Some(rect) = moved.clip(fw as f64, fh as f64) else {
                continue;
            };
            let pos = actor_position(actor, ctx.t).expect("projected actor is present");
            let truth = apparent_gaze(ctx.camera, pos, actor.heading_at(ctx.t), self.params.frontal_cone);
            let score = |g: Gaze| if g == truth { 0.9 } else { 0.1 };
            let gaze = fuse_gaze(&GazeScores {
                frontal: score(Gaze::Frontal),
                left_profile: score(Gaze::Left),
                right_profile: score(Gaze::Right),
                threshold: self.params.gaze_threshold,
            });
            let mut det = Detection::from_box(ctx.camera.id.clone(), rect, gaze, confidence);
            det.actor = Some(actor.id.clone());
            out.push(det);
        }
        out
    }
}
